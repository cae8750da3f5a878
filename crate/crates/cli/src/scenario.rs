//! Declarative scenario files: parsing with source positions, defaults and
//! validation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use ptqm_core::Tolerances;

use crate::error::CliError;

pub const SPEC_VERSION: u32 = 1;
pub const MODELS: [&str; 3] = ["oscillator", "two_level", "standard_qm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spec_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub path: PathSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
    /// Enables the seeded random-state checks.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PathSpec {
    Circle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration: Option<f64>,
    },
    Polygon {
        vertices: Vec<Vec<f64>>,
        duration: f64,
    },
    Custom {
        samples: Vec<Vec<f64>>,
        duration: f64,
    },
    Stationary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        point: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration: Option<f64>,
    },
}

impl PathSpec {
    pub fn type_name(&self) -> &'static str {
        match self {
            Self::Circle { .. } => "circle",
            Self::Polygon { .. } => "polygon",
            Self::Custom { .. } => "custom",
            Self::Stationary { .. } => "stationary",
        }
    }

    pub fn is_loop(&self) -> bool {
        !matches!(self, Self::Stationary { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub steps: usize,
    pub truncation: usize,
    pub tolerances: Tolerances,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            steps: 2000,
            truncation: 40,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub gamma: f64,
    #[serde(default = "default_expect_tol")]
    pub tol: f64,
}

fn default_expect_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(flatten)]
    pub kind: OutputKind,
    pub file: String,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputKind {
    Phases,
    TensorsAtPoint {
        points: Vec<Vec<f64>>,
    },
    TensorGrid {
        base: Vec<f64>,
        plane: [usize; 2],
        ranges: [[f64; 2]; 2],
        counts: [usize; 2],
    },
    Classification {
        #[serde(default = "default_class_samples")]
        samples: usize,
    },
    StokesCheck {
        #[serde(default = "default_loop_samples")]
        loop_samples: usize,
        #[serde(default = "default_surface_grid")]
        surface_grid: [usize; 2],
    },
}

fn default_class_samples() -> usize {
    64
}

fn default_loop_samples() -> usize {
    256
}

fn default_surface_grid() -> [usize; 2] {
    [16, 32]
}

impl OutputKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Phases => "phases",
            Self::TensorsAtPoint { .. } => "tensors_at_point",
            Self::TensorGrid { .. } => "tensor_grid",
            Self::Classification { .. } => "classification",
            Self::StokesCheck { .. } => "stokes_check",
        }
    }
}

/// Parse a scenario; syntax and schema errors carry line and column.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn parse_value(text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parameter names each model understands, with their defaults.
pub fn model_defaults(model: &str) -> Option<&'static [(&'static str, f64)]> {
    match model {
        "oscillator" => Some(&[("omega_d", 0.3), ("delta", 1.0), ("phi_l", 0.0)]),
        "two_level" => Some(&[("s", 1.0), ("g", 0.4)]),
        "standard_qm" => Some(&[("field", 1.0)]),
        _ => None,
    }
}

/// Dimension of the section chart used for tensors.
pub fn section_dim(model: &str) -> usize {
    match model {
        "oscillator" | "two_level" => 4,
        _ => 2,
    }
}

/// Oscillator picture; the only string-valued parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Picture {
    Pt,
    Hermitian,
}

impl ModelSpec {
    pub fn number(&self, key: &str) -> f64 {
        match self.params.get(key).and_then(Value::as_f64) {
            Some(v) => v,
            None => model_defaults(&self.name)
                .and_then(|d| d.iter().find(|(k, _)| *k == key).map(|(_, v)| *v))
                .unwrap_or(f64::NAN),
        }
    }

    pub fn picture(&self) -> Picture {
        match self.params.get("picture").and_then(Value::as_str) {
            Some("hermitian") => Picture::Hermitian,
            _ => Picture::Pt,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn finite(label: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{label} must be a finite number, got {v}")))
    }
}

fn positive(label: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{label} must be positive, got {v}")))
    }
}

fn points_of_dim(label: &str, pts: &[Vec<f64>], dim: usize) -> Result<(), CliError> {
    for (k, p) in pts.iter().enumerate() {
        if p.len() != dim {
            return Err(invalid(format!("{label}[{k}] has {} coordinates, expected {dim}", p.len())));
        }
        for &v in p {
            finite(&format!("{label}[{k}]"), v)?;
        }
    }
    Ok(())
}

impl Scenario {
    /// Everything that can be checked without running a computation.
    pub fn validate(&self, out_dir: &Path) -> Result<(), CliError> {
        if self.spec_version != SPEC_VERSION {
            return Err(invalid(format!(
                "unsupported spec_version {}; this build reads version {SPEC_VERSION}",
                self.spec_version
            )));
        }
        let Some(defaults) = model_defaults(&self.model.name) else {
            return Err(invalid(format!(
                "unknown model \"{}\"; expected one of {}",
                self.model.name,
                MODELS.join(", ")
            )));
        };
        for (key, value) in &self.model.params {
            if self.model.name == "oscillator" && key == "picture" {
                match value.as_str() {
                    Some("pt" | "hermitian") => continue,
                    _ => return Err(invalid(format!("model.params.picture must be \"pt\" or \"hermitian\", got {value}"))),
                }
            }
            if !defaults.iter().any(|(k, _)| k == key) {
                let known: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
                return Err(invalid(format!(
                    "unknown parameter \"{key}\" for model {}; known: {}",
                    self.model.name,
                    known.join(", ")
                )));
            }
            match value.as_f64() {
                Some(v) => finite(&format!("model.params.{key}"), v)?,
                None => return Err(invalid(format!("model.params.{key} must be a number, got {value}"))),
            }
        }
        self.validate_model_values()?;
        self.validate_path()?;

        if !self.run.tolerances.all_positive() {
            return Err(invalid("all tolerances must be positive and finite"));
        }
        if self.run.steps < 8 {
            return Err(invalid(format!("run.steps must be at least 8, got {}", self.run.steps)));
        }
        if self.model.name == "oscillator" && self.run.truncation < 2 {
            return Err(invalid("run.truncation must be at least 2"));
        }
        if let Some(e) = &self.expect {
            finite("expect.gamma", e.gamma)?;
            positive("expect.tol", e.tol)?;
        }
        self.validate_outputs()?;
        check_writable(out_dir)
    }

    fn validate_model_values(&self) -> Result<(), CliError> {
        let m = &self.model;
        match m.name.as_str() {
            "oscillator" => {
                if m.number("delta") == 0.0 {
                    return Err(invalid("model.params.delta must be nonzero"));
                }
                if m.number("omega_d") == 0.0 {
                    return Err(invalid("model.params.omega_d must be nonzero"));
                }
            }
            "two_level" => positive("model.params.s", m.number("s"))?,
            _ => {
                if m.number("field") == 0.0 {
                    return Err(invalid("model.params.field must be nonzero"));
                }
            }
        }
        Ok(())
    }

    fn validate_path(&self) -> Result<(), CliError> {
        let model = self.model.name.as_str();
        let allowed: &[&str] = match model {
            "oscillator" => &["circle"],
            "two_level" => &["circle", "polygon", "custom"],
            _ => &["circle", "stationary"],
        };
        if !allowed.contains(&self.path.type_name()) {
            return Err(invalid(format!(
                "path type \"{}\" is not available for model {model}; use {}",
                self.path.type_name(),
                allowed.join(" or ")
            )));
        }
        match &self.path {
            PathSpec::Circle {
                center,
                radius,
                rate,
                duration,
            } => {
                if let Some(c) = center {
                    if model != "two_level" {
                        return Err(invalid(format!("path.center is not used by model {model}")));
                    }
                    points_of_dim("path.center", std::slice::from_ref(c), 2)?;
                }
                if let Some(r) = radius {
                    positive("path.radius", *r)?;
                }
                if let Some(r) = rate {
                    finite("path.rate", *r)?;
                    if *r == 0.0 {
                        return Err(invalid("path.rate must be nonzero"));
                    }
                }
                if let Some(d) = duration {
                    positive("path.duration", *d)?;
                }
                if let (Some(r), Some(d)) = (rate, duration) {
                    if (2.0 * PI / r.abs() - d).abs() > 1e-9 * d {
                        return Err(invalid(format!("path.rate {r} and path.duration {d} describe different loops")));
                    }
                }
                if model == "oscillator" {
                    self.check_oscillator_circle(*radius, *rate, *duration)?;
                }
                if model == "standard_qm" {
                    if let Some(r) = radius {
                        if *r >= PI {
                            return Err(invalid("path.radius is a cone angle and must be below pi"));
                        }
                    }
                }
            }
            PathSpec::Polygon { vertices, duration } => {
                positive("path.duration", *duration)?;
                if vertices.len() < 3 {
                    return Err(invalid("path.vertices needs at least three points"));
                }
                points_of_dim("path.vertices", vertices, 2)?;
            }
            PathSpec::Custom { samples, duration } => {
                positive("path.duration", *duration)?;
                if samples.len() < 3 {
                    return Err(invalid("path.samples needs at least three points"));
                }
                points_of_dim("path.samples", samples, 2)?;
            }
            PathSpec::Stationary { point, duration } => {
                if let Some(p) = point {
                    points_of_dim("path.point", std::slice::from_ref(p), 3)?;
                    if p.iter().all(|v| *v == 0.0) {
                        return Err(invalid("path.point must be a nonzero field"));
                    }
                }
                if let Some(d) = duration {
                    positive("path.duration", *d)?;
                }
            }
        }
        Ok(())
    }

    /// The oscillator loop is fixed by the drive; explicit path fields must
    /// agree with it.
    fn check_oscillator_circle(&self, radius: Option<f64>, rate: Option<f64>, duration: Option<f64>) -> Result<(), CliError> {
        let (omega_d, delta) = (self.model.number("omega_d"), self.model.number("delta"));
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        if let Some(r) = radius {
            if !close(r, (omega_d / delta).abs()) {
                return Err(invalid(format!(
                    "path.radius {r} disagrees with |omega_d / delta| = {}",
                    (omega_d / delta).abs()
                )));
            }
        }
        if let Some(r) = rate {
            if !close(r, delta) {
                return Err(invalid(format!("path.rate {r} disagrees with delta = {delta}")));
            }
        }
        if let Some(d) = duration {
            if !close(d, 2.0 * PI / delta.abs()) {
                return Err(invalid(format!("path.duration {d} disagrees with 2 pi / |delta|")));
            }
        }
        Ok(())
    }

    fn validate_outputs(&self) -> Result<(), CliError> {
        let dim = section_dim(&self.model.name);
        let mut seen = std::collections::BTreeSet::new();
        for (k, out) in self.outputs.iter().enumerate() {
            let label = format!("outputs[{k}]");
            let rel = Path::new(&out.file);
            if out.file.is_empty()
                || rel.is_absolute()
                || rel.components().any(|c| !matches!(c, Component::Normal(_)))
            {
                return Err(invalid(format!(
                    "{label}.file must be a relative path inside the output directory, got \"{}\"",
                    out.file
                )));
            }
            if out.file == "bundle.json" || !seen.insert(out.file.clone()) {
                return Err(invalid(format!("{label}.file \"{}\" is used twice", out.file)));
            }
            match &out.kind {
                OutputKind::Phases => {}
                OutputKind::TensorsAtPoint { points } => {
                    if points.is_empty() {
                        return Err(invalid(format!("{label}.points is empty")));
                    }
                    points_of_dim(&format!("{label}.points"), points, dim)?;
                }
                OutputKind::TensorGrid {
                    base,
                    plane,
                    ranges,
                    counts,
                } => {
                    points_of_dim(&format!("{label}.base"), std::slice::from_ref(base), dim)?;
                    if plane[0] >= dim || plane[1] >= dim || plane[0] == plane[1] {
                        return Err(invalid(format!("{label}.plane must name two distinct coordinates below {dim}")));
                    }
                    if counts[0] == 0 || counts[1] == 0 {
                        return Err(invalid(format!("{label}.counts must be positive")));
                    }
                    for r in ranges.iter().flatten() {
                        finite(&format!("{label}.ranges"), *r)?;
                    }
                }
                OutputKind::Classification { samples } => {
                    if *samples < 2 {
                        return Err(invalid(format!("{label}.samples must be at least 2")));
                    }
                }
                OutputKind::StokesCheck {
                    loop_samples,
                    surface_grid,
                } => {
                    if *loop_samples < 8 || surface_grid[0] < 2 || surface_grid[1] < 2 {
                        return Err(invalid(format!("{label} needs at least 8 loop samples and a 2x2 surface grid")));
                    }
                    if self.model.name == "two_level" && self.path.type_name() != "circle" {
                        return Err(invalid(format!(
                            "{label}: stokes_check for two_level needs a circle path"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The directory exists and is writable, or could be created under a
/// writable ancestor.
fn check_writable(dir: &Path) -> Result<(), CliError> {
    let mut probe = Some(dir);
    while let Some(p) = probe {
        if p.as_os_str().is_empty() {
            probe = Some(Path::new("."));
            continue;
        }
        if let Ok(meta) = std::fs::metadata(p) {
            if !meta.is_dir() {
                return Err(invalid(format!("output path {} is not a directory", p.display())));
            }
            if meta.permissions().readonly() {
                return Err(invalid(format!("output directory {} is not writable", p.display())));
            }
            return Ok(());
        }
        probe = p.parent();
    }
    Ok(())
}
