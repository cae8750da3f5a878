//! One-parameter sweeps over a base scenario.

use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use ptqm_core::io::fmt_f64;
use ptqm_core::phases::{route_spread, PhaseReport};

use crate::error::CliError;
use crate::run::{compute, ResultBundle};
use crate::scenario::{model_defaults, Scenario};

const INTEGER_KEYS: [&str; 3] = ["steps", "truncation", "seed"];

/// JSON location of a sweep parameter. Bare names are looked up among the
/// model parameters, then the run settings, then the path fields; dotted
/// names address the scenario directly and must already exist.
pub fn resolve(base: &Value, name: &str) -> Result<Vec<String>, CliError> {
    let unknown = || CliError::Validation(format!("sweep parameter \"{name}\" does not exist in the scenario"));
    if name.contains('.') {
        let keys: Vec<String> = name.split('.').map(str::to_string).collect();
        let mut v = base;
        for k in &keys {
            v = v.get(k).ok_or_else(unknown)?;
        }
        return if v.is_number() { Ok(keys) } else { Err(unknown()) };
    }
    let model = base.pointer("/model/name").and_then(Value::as_str).unwrap_or_default();
    if model_defaults(model).is_some_and(|d| d.iter().any(|(k, _)| *k == name)) {
        return Ok(vec!["model".into(), "params".into(), name.into()]);
    }
    if matches!(name, "steps" | "truncation") {
        return Ok(vec!["run".into(), name.into()]);
    }
    if name == "seed" {
        return Ok(vec!["seed".into()]);
    }
    let path_type = base.pointer("/path/type").and_then(Value::as_str).unwrap_or_default();
    let path_keys: &[&str] = match path_type {
        "circle" => &["radius", "rate", "duration"],
        _ => &["duration"],
    };
    if path_keys.contains(&name) {
        return Ok(vec!["path".into(), name.into()]);
    }
    Err(unknown())
}

fn set(base: &Value, keys: &[String], value: f64) -> Value {
    let mut v = base.clone();
    let mut cursor = &mut v;
    for k in &keys[..keys.len() - 1] {
        if !cursor.get(k).is_some_and(Value::is_object) {
            cursor[k.as_str()] = Value::Object(Default::default());
        }
        cursor = &mut cursor[k.as_str()];
    }
    let last = keys[keys.len() - 1].as_str();
    cursor[last] = if INTEGER_KEYS.contains(&last) && value >= 0.0 && value.fract() == 0.0 {
        Value::from(value as u64)
    } else {
        Value::from(value)
    };
    v
}

pub fn parse_values(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Validation(format!("sweep value \"{s}\" is not a finite number")))
        })
        .collect()
}

#[derive(Debug)]
pub struct Row {
    pub value: f64,
    pub outcome: Result<ResultBundle, String>,
}

impl Row {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(b) if b.pass)
    }
}

pub fn header(name: &str) -> String {
    format!(
        "{name},status,{},route_spread,spacelike,lightlike,timelike,failed_checks,message",
        PhaseReport::csv_header()
    )
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn csv_line(row: &Row) -> String {
    let value = fmt_f64(row.value);
    match &row.outcome {
        Ok(b) => {
            let counts = b.classification[0].counts;
            let failed: Vec<&str> = b.residuals.iter().filter(|(_, c)| !c.pass).map(|(k, _)| k.as_str()).collect();
            format!(
                "{value},{},{},{},{},{},{},{},{}",
                if b.pass { "pass" } else { "fail" },
                b.phases.report.csv_row(),
                fmt_f64(route_spread(&b.phases.report.gamma_routes)),
                counts.spacelike,
                counts.lightlike,
                counts.timelike,
                failed.len(),
                quote(&failed.join(" "))
            )
        }
        Err(e) => {
            let blanks = PhaseReport::csv_header().split(',').count() + 4;
            format!("{value},error,{}0,{}", "nan,".repeat(blanks), quote(e))
        }
    }
}

/// Run every row; failures are recorded per row and never stop the sweep.
pub fn sweep(base: &Value, name: &str, values: &[f64], out_dir: &Path) -> Result<Vec<Row>, CliError> {
    let keys = resolve(base, name)?;
    let base_scenario: Scenario = serde_json::from_value(base.clone())
        .map_err(|e| CliError::Validation(format!("base scenario does not parse: {e}")))?;
    base_scenario.validate(out_dir)?;
    Ok(values
        .par_iter()
        .map(|&value| {
            let outcome = serde_json::from_value::<Scenario>(set(base, &keys, value))
                .map_err(|e| e.to_string())
                .and_then(|s| s.validate(out_dir).map(|_| s).map_err(|e| e.to_string()))
                .and_then(|s| compute(&s).map_err(|e| e.to_string()));
            Row { value, outcome }
        })
        .collect())
}

pub fn table(name: &str, rows: &[Row]) -> String {
    let mut out = header(name);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

/// File name for a sweep table.
pub fn file_name(name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    format!("sweep_{clean}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        serde_json::json!({
            "spec_version": 1,
            "model": {"name": "oscillator", "params": {"omega_d": 0.3}},
            "path": {"type": "circle"},
            "run": {"steps": 400}
        })
    }

    #[test]
    fn names_resolve_to_locations() {
        let b = base();
        assert_eq!(resolve(&b, "omega_d").unwrap(), ["model", "params", "omega_d"]);
        assert_eq!(resolve(&b, "delta").unwrap(), ["model", "params", "delta"]);
        assert_eq!(resolve(&b, "steps").unwrap(), ["run", "steps"]);
        assert_eq!(resolve(&b, "radius").unwrap(), ["path", "radius"]);
        assert_eq!(resolve(&b, "run.steps").unwrap(), ["run", "steps"]);
        assert!(matches!(resolve(&b, "colour"), Err(CliError::Validation(_))));
        assert!(matches!(resolve(&b, "run.truncation"), Err(CliError::Validation(_))));
    }

    #[test]
    fn set_creates_missing_objects_and_keeps_integers() {
        let b = serde_json::json!({"model": {"name": "oscillator"}});
        let v = set(&b, &["model".into(), "params".into(), "delta".into()], 2.0);
        assert_eq!(v["model"]["params"]["delta"], Value::from(2.0));
        let v = set(&b, &["run".into(), "steps".into()], 800.0);
        assert_eq!(v["run"]["steps"], Value::from(800u64));
    }

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("0.1, 0.2,0.3").unwrap(), vec![0.1, 0.2, 0.3]);
        assert!(parse_values("").unwrap().is_empty());
        assert!(parse_values("1,x").is_err());
    }

    #[test]
    fn error_rows_keep_the_column_count() {
        let row = Row {
            value: 1.0,
            outcome: Err("bad, \"thing\"".into()),
        };
        let line = csv_line(&row);
        let cols = header("x").split(',').count();
        let before_message = line.rsplit_once(",\"").unwrap().0;
        assert_eq!(before_message.split(',').count() + 1, cols);
        assert!(line.ends_with("\"bad, \"\"thing\"\"\""));
    }
}
