use serde::{Deserialize, Serialize};

/// Every numerical threshold used by the library, in one place.
///
/// All entries are absolute unless noted. `scaled` multiplies every entry by
/// a common factor (the CLI's `--tol-scale`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub herm: f64,
    pub pseudo: f64,
    pub norm: f64,
    pub idem: f64,
    pub trace: f64,
    pub rank: f64,
    pub unitarity: f64,
    pub cyclic: f64,
    pub path: f64,
    pub phase: f64,
    pub tensor: f64,
    pub fid: f64,
    pub light: f64,
    pub pt: f64,
    /// Coherent-state tail mass allowed beyond the Fock cutoff.
    pub trunc: f64,
    /// Condition number above which metric operations log a warning.
    pub cond_warn: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            pseudo: 1e-10,
            norm: 1e-8,
            idem: 1e-10,
            trace: 1e-10,
            rank: 1e-8,
            unitarity: 1e-8,
            cyclic: 1e-6,
            path: 1e-12,
            phase: 1e-6,
            tensor: 1e-6,
            fid: 1e-8,
            light: 1e-6,
            pt: 1e-8,
            trunc: 1e-12,
            cond_warn: 1e8,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            herm: self.herm * factor,
            pseudo: self.pseudo * factor,
            norm: self.norm * factor,
            idem: self.idem * factor,
            trace: self.trace * factor,
            rank: self.rank * factor,
            unitarity: self.unitarity * factor,
            cyclic: self.cyclic * factor,
            path: self.path * factor,
            phase: self.phase * factor,
            tensor: self.tensor * factor,
            fid: self.fid * factor,
            light: self.light * factor,
            pt: self.pt * factor,
            trunc: self.trunc * factor,
            cond_warn: self.cond_warn,
        }
    }

    pub fn all_positive(&self) -> bool {
        [
            self.herm,
            self.pseudo,
            self.norm,
            self.idem,
            self.trace,
            self.rank,
            self.unitarity,
            self.cyclic,
            self.path,
            self.phase,
            self.tensor,
            self.fid,
            self.light,
            self.pt,
            self.trunc,
            self.cond_warn,
        ]
        .iter()
        .all(|t| t.is_finite() && *t > 0.0)
    }
}
