//! Built-in model families.

pub mod fock;
pub mod oscillator;
pub mod standard_qm;
pub mod two_level;

use crate::error::Result;
use crate::evolution::{evolve, EvolutionRecord, ParameterPath};
use crate::hilbert::{HamiltonianFamily, MetricFamily, PhysicalState};
use crate::tolerances::Tolerances;

/// Everything needed to run one evolution around a closed parameter loop.
#[derive(Debug, Clone)]
pub struct LoopScenario {
    pub name: String,
    pub h: HamiltonianFamily,
    pub w: MetricFamily,
    pub path: ParameterPath,
    pub psi0: PhysicalState,
}

impl LoopScenario {
    pub fn evolve(&self, steps: usize, tol: &Tolerances) -> Result<EvolutionRecord> {
        evolve(&self.h, &self.w, &self.path, &self.psi0, steps, tol)
    }
}
