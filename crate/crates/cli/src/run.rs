//! Executing a scenario and writing its outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use ptqm_core::evolution::{evolve, EvolutionRecord};
use ptqm_core::geometry::{
    classify_evolution, geometric_tensors, loop_integral_connection, surface_integral_curvature, tensor_field,
    tensor_field_csv, ClassifiedSample, EvolutionClass, GeometricTensors,
};
use ptqm_core::hilbert::physical_inner;
use ptqm_core::io::{csv_row, fmt_f64, to_json_string};
use ptqm_core::linalg::{max_abs_diff, phase_distance};
use ptqm_core::phases::{Check, PhaseReport};
use ptqm_core::{PtqmError, Tolerances};

use crate::error::CliError;
use crate::model::{build, random_pair, Built};
use crate::scenario::{Format, OutputKind, Scenario};

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionBlock {
    pub steps: usize,
    pub tau: f64,
    pub hilbert_dim: usize,
    pub checks: BTreeMap<String, Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseBlock {
    #[serde(flatten)]
    pub report: PhaseReport,
    pub oracle_checks: BTreeMap<String, Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorBlock {
    pub output: String,
    pub tensors: Vec<GeometricTensors>,
    pub checks: BTreeMap<String, Check>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ClassCounts {
    pub spacelike: usize,
    pub lightlike: usize,
    pub timelike: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationBlock {
    pub output: String,
    pub samples: Vec<ClassifiedSample>,
    pub counts: ClassCounts,
    pub checks: BTreeMap<String, Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StokesBlock {
    pub output: String,
    pub loop_phase: f64,
    pub surface_phase: f64,
    pub checks: BTreeMap<String, Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Runtime {
    pub steps: usize,
    pub truncation: Option<usize>,
    pub hilbert_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultBundle {
    pub scenario: Scenario,
    pub evolution: EvolutionBlock,
    pub phases: PhaseBlock,
    pub tensors: Vec<TensorBlock>,
    pub classification: Vec<ClassificationBlock>,
    pub stokes: Vec<StokesBlock>,
    pub residuals: BTreeMap<String, Check>,
    pub pass: bool,
    pub runtime: Runtime,
}

impl ResultBundle {
    pub fn to_json(&self) -> String {
        to_json_string(self)
    }
}

/// Label under which a default classification is reported when the
/// scenario asks for none.
pub const DEFAULT_CLASSIFICATION: &str = "default";

struct Collector<'a> {
    all: &'a mut BTreeMap<String, Check>,
}

impl Collector<'_> {
    fn add(&mut self, block: &mut BTreeMap<String, Check>, prefix: &str, name: &str, check: Check) {
        block.insert(name.to_string(), check);
        self.all.insert(format!("{prefix}.{name}"), check);
    }
}

fn numeric(residuals: &BTreeMap<String, Check>) -> impl Fn(PtqmError) -> CliError + '_ {
    move |e| CliError::numeric(e, residuals)
}

/// Build, evolve and measure. Nothing is written.
pub fn compute(scenario: &Scenario) -> Result<ResultBundle, CliError> {
    let tol = scenario.run.tolerances;
    let built = build(scenario, &tol).map_err(CliError::setup)?;
    let mut residuals = BTreeMap::new();

    let sc = &built.scenario;
    let steps = scenario.run.steps;
    let record = sc.evolve(steps, &tol).map_err(numeric(&residuals))?;
    let evolution = evolution_block(scenario, &built, &record, &tol, &mut residuals)?;

    let report = PhaseReport::compute(&record, &sc.h, &sc.w, &tol).map_err(numeric(&residuals))?;
    let mut col = Collector { all: &mut residuals };
    let mut report_checks = report.residuals.clone();
    for (name, check) in &report.residuals {
        col.add(&mut report_checks, "phases", name, *check);
    }
    let mut oracle_checks = BTreeMap::new();
    if let Some(a) = built.exact_alpha {
        col.add(&mut oracle_checks, "oracle", "alpha_exact", Check::new(phase_distance(report.alpha, a), tol.phase));
    }
    if let Some(g) = built.area_gamma {
        col.add(&mut oracle_checks, "oracle", "area_law", Check::new(phase_distance(report.gamma, g), 1e-4));
    }
    if let Some(e) = &scenario.expect {
        col.add(&mut oracle_checks, "oracle", "expected_gamma", Check::new(phase_distance(report.gamma, e.gamma), e.tol));
    }
    let phases = PhaseBlock { report, oracle_checks };

    let mut tensors = Vec::new();
    let mut classification = Vec::new();
    let mut stokes = Vec::new();
    for out in &scenario.outputs {
        match &out.kind {
            OutputKind::Phases => {}
            OutputKind::TensorsAtPoint { points } => {
                tensors.push(tensor_block(&out.file, points, &built, &tol, &mut residuals)?);
            }
            OutputKind::TensorGrid {
                base,
                plane,
                ranges,
                counts,
            } => {
                let points = grid_points(base, *plane, *ranges, *counts);
                tensors.push(tensor_block(&out.file, &points, &built, &tol, &mut residuals)?);
            }
            OutputKind::Classification { samples } => {
                classification.push(classification_block(&out.file, *samples, &built, &tol, &mut residuals)?);
            }
            OutputKind::StokesCheck {
                loop_samples,
                surface_grid,
            } => {
                stokes.push(stokes_block(
                    &out.file,
                    *loop_samples,
                    *surface_grid,
                    &built,
                    phases.report.gamma,
                    &tol,
                    &mut residuals,
                )?);
            }
        }
    }
    if classification.is_empty() {
        classification.push(classification_block(DEFAULT_CLASSIFICATION, 64, &built, &tol, &mut residuals)?);
    }

    let pass = residuals.values().all(|c| c.pass);
    Ok(ResultBundle {
        scenario: scenario.clone(),
        runtime: Runtime {
            steps,
            truncation: (scenario.model.name == "oscillator").then_some(scenario.run.truncation),
            hilbert_dim: sc.w.dim(),
        },
        evolution,
        phases,
        tensors,
        classification,
        stokes,
        residuals,
        pass,
    })
}

fn evolution_block(
    scenario: &Scenario,
    built: &Built,
    record: &EvolutionRecord,
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, Check>,
) -> Result<EvolutionBlock, CliError> {
    let sc = &built.scenario;
    let mut checks = BTreeMap::new();
    let mut col = Collector { all: residuals };
    col.add(&mut checks, "evolution", "norm_drift", Check::new(record.max_norm_drift(), tol.unitarity));
    if let Some(seed) = scenario.seed {
        let drift = inner_product_drift(seed, built, scenario.run.steps, tol).map_err(|e| CliError::numeric(e, col.all))?;
        col.add(&mut checks, "evolution", "inner_product_drift", Check::new(drift, tol.unitarity));
    }
    Ok(EvolutionBlock {
        steps: scenario.run.steps,
        tau: record.tau(),
        hilbert_dim: sc.w.dim(),
        checks,
    })
}

fn inner_product_drift(seed: u64, built: &Built, steps: usize, tol: &Tolerances) -> ptqm_core::Result<f64> {
    let sc = &built.scenario;
    let [a, b] = random_pair(seed, built)?;
    let ra = evolve(&sc.h, &sc.w, &sc.path, &a, steps, tol)?;
    let rb = evolve(&sc.h, &sc.w, &sc.path, &b, steps, tol)?;
    let w0 = sc.w.eval(&ra.states[0].lambda);
    let start = physical_inner(&w0, &a.vec, &b.vec)?;
    let mut worst = 0.0f64;
    for (x, y) in ra.states.iter().zip(&rb.states) {
        let wm = sc.w.eval(&x.lambda);
        worst = worst.max((physical_inner(&wm, &x.vec, &y.vec)? - start).norm());
    }
    Ok(worst)
}

fn grid_points(base: &[f64], plane: [usize; 2], ranges: [[f64; 2]; 2], counts: [usize; 2]) -> Vec<Vec<f64>> {
    let lin = |r: [f64; 2], n: usize, i: usize| {
        if n <= 1 {
            r[0]
        } else {
            r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64
        }
    };
    let mut pts = Vec::with_capacity(counts[0] * counts[1]);
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            let mut x = base.to_vec();
            x[plane[0]] = lin(ranges[0], counts[0], i);
            x[plane[1]] = lin(ranges[1], counts[1], j);
            pts.push(x);
        }
    }
    pts
}

fn tensor_block(
    file: &str,
    points: &[Vec<f64>],
    built: &Built,
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, Check>,
) -> Result<TensorBlock, CliError> {
    let tensors = if points.len() == 1 {
        vec![geometric_tensors(&built.section, &points[0], tol)]
    } else {
        tensor_field(&built.section, points, tol)
    }
    .into_iter()
    .collect::<ptqm_core::Result<Vec<_>>>()
    .map_err(numeric(residuals))?;
    let (mut split, mut herm, mut reference) = (0.0f64, 0.0f64, 0.0f64);
    for t in &tensors {
        let (im, re, h) = t.consistency();
        split = split.max(im).max(re);
        herm = herm.max(h);
        if let Some(q) = &built.reference_q {
            reference = reference.max(max_abs_diff(&t.q, q));
        }
    }
    let prefix = format!("tensors[{file}]");
    let mut checks = BTreeMap::new();
    let mut col = Collector { all: residuals };
    col.add(&mut checks, &prefix, "im_re_split", Check::new(split, tol.herm));
    col.add(&mut checks, &prefix, "hermiticity", Check::new(herm, tol.herm));
    if built.reference_q.is_some() {
        col.add(&mut checks, &prefix, "reference_qgt", Check::new(reference, tol.tensor));
    }
    Ok(TensorBlock {
        output: file.to_string(),
        tensors,
        checks,
    })
}

fn classification_block(
    file: &str,
    samples: usize,
    built: &Built,
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, Check>,
) -> Result<ClassificationBlock, CliError> {
    let list = classify_evolution(&built.section, &built.curve, samples, tol).map_err(numeric(residuals))?;
    let mut counts = ClassCounts::default();
    for s in &list {
        match s.class {
            EvolutionClass::Spacelike => counts.spacelike += 1,
            EvolutionClass::Lightlike => counts.lightlike += 1,
            EvolutionClass::Timelike => counts.timelike += 1,
        }
    }
    let prefix = format!("classification[{file}]");
    let mut checks = BTreeMap::new();
    let mut col = Collector { all: residuals };
    match built.timelike {
        Some(true) => {
            let missing = (list.len() - counts.timelike) as f64;
            col.add(&mut checks, &prefix, "non_timelike_samples", Check::new(missing, 0.0));
        }
        Some(false) => {
            col.add(&mut checks, &prefix, "timelike_samples", Check::new(counts.timelike as f64, 0.0));
        }
        None => {}
    }
    Ok(ClassificationBlock {
        output: file.to_string(),
        samples: list,
        counts,
        checks,
    })
}

fn stokes_block(
    file: &str,
    loop_samples: usize,
    grid: [usize; 2],
    built: &Built,
    gamma: f64,
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, Check>,
) -> Result<StokesBlock, CliError> {
    let Some(patch) = &built.patch else {
        return Err(CliError::Validation("stokes_check needs a closed loop with a filling surface".into()));
    };
    let loop_phase = loop_integral_connection(&built.section, &built.curve, loop_samples, tol).map_err(numeric(residuals))?;
    let surface_phase =
        surface_integral_curvature(&built.section, patch, grid[0], grid[1], tol).map_err(numeric(residuals))?;
    let prefix = format!("stokes[{file}]");
    let mut checks = BTreeMap::new();
    let mut col = Collector { all: residuals };
    col.add(&mut checks, &prefix, "loop_vs_surface", Check::new(phase_distance(loop_phase, surface_phase), 1e-4));
    if built.curve_is_evolution {
        col.add(&mut checks, &prefix, "loop_vs_gamma", Check::new(phase_distance(loop_phase, gamma), 1e-5));
    }
    Ok(StokesBlock {
        output: file.to_string(),
        loop_phase,
        surface_phase,
        checks,
    })
}

fn classification_csv(block: &ClassificationBlock) -> String {
    let mut out = String::from("t,ds2,class\n");
    for s in &block.samples {
        let class = match s.class {
            EvolutionClass::Spacelike => "spacelike",
            EvolutionClass::Lightlike => "lightlike",
            EvolutionClass::Timelike => "timelike",
        };
        out.push_str(&format!("{},{},{class}\n", fmt_f64(s.t), fmt_f64(s.ds2)));
    }
    out
}

fn phases_csv(block: &PhaseBlock) -> String {
    format!("{}\n{}\n", PhaseReport::csv_header(), block.report.csv_row())
}

fn stokes_csv(block: &StokesBlock) -> String {
    format!("loop_phase,surface_phase\n{}\n", csv_row(&[block.loop_phase, block.surface_phase]))
}

/// Text for every requested output, keyed by relative file name.
pub fn render_outputs(bundle: &ResultBundle) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for out in &bundle.scenario.outputs {
        let text = match (&out.kind, out.format) {
            (OutputKind::Phases, Format::Json) => to_json_string(&bundle.phases),
            (OutputKind::Phases, Format::Csv) => phases_csv(&bundle.phases),
            (OutputKind::TensorsAtPoint { .. } | OutputKind::TensorGrid { .. }, fmt) => {
                let block = bundle.tensors.iter().find(|b| b.output == out.file).expect("block per output");
                match fmt {
                    Format::Json => to_json_string(block),
                    Format::Csv => tensor_field_csv(&block.tensors),
                }
            }
            (OutputKind::Classification { .. }, fmt) => {
                let block = bundle.classification.iter().find(|b| b.output == out.file).expect("block per output");
                match fmt {
                    Format::Json => to_json_string(block),
                    Format::Csv => classification_csv(block),
                }
            }
            (OutputKind::StokesCheck { .. }, fmt) => {
                let block = bundle.stokes.iter().find(|b| b.output == out.file).expect("block per output");
                match fmt {
                    Format::Json => to_json_string(block),
                    Format::Csv => stokes_csv(block),
                }
            }
        };
        files.push((out.file.clone(), text));
    }
    files.push(("bundle.json".to_string(), bundle.to_json()));
    files
}

pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    for (name, text) in files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_the_ranges() {
        let pts = grid_points(&[0.0, 0.0, 5.0], [0, 2], [[0.0, 1.0], [-1.0, 1.0]], [2, 3]);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![0.0, 0.0, -1.0]);
        assert_eq!(pts[5], vec![1.0, 0.0, 1.0]);
        assert_eq!(grid_points(&[0.3, 0.0], [0, 1], [[0.0, 1.0], [2.0, 3.0]], [1, 1]), vec![vec![0.0, 2.0]]);
    }
}
