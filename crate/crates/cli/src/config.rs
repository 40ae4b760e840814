//! Run configuration: presets, JSON config files and flags, layered in that
//! order, then expanded into the individual solver runs.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use collox::drivers::{Method, SolverConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// `D^2 g = mu (1 - g^2) Dg - g`
    #[default]
    Vdp,
    /// `D^2 g = -g`, exact solution `cos x` from the default initial state
    Harmonic,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Vdp => "vdp",
            ProblemKind::Harmonic => "harmonic",
        }
    }
}

/// A single value or a list of values (a sweep axis).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Axis<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> Axis<T> {
    fn values(&self) -> Vec<T> {
        match self {
            Axis::One(v) => vec![v.clone()],
            Axis::Many(v) => v.clone(),
        }
    }
}

/// A real that may also be written as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Number(f64),
    Text(RealText),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub enum RealText {
    #[serde(rename = "inf")]
    Inf,
}

impl Real {
    fn value(self) -> f64 {
        match self {
            Real::Number(v) => v,
            Real::Text(RealText::Inf) => f64::INFINITY,
        }
    }
}

/// One configuration source. Every field is optional; later layers win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub preset: Option<String>,
    pub problem: Option<ProblemKind>,
    pub mu: Option<Axis<f64>>,
    pub g0: Option<f64>,
    pub dg0: Option<f64>,
    pub k: Option<Axis<usize>>,
    pub l: Option<Axis<usize>>,
    pub w: Option<Axis<usize>>,
    pub method: Option<Axis<Method>>,
    pub iter_max: Option<Axis<usize>>,
    pub range: Option<[f64; 2]>,
    pub tol: Option<f64>,
    pub samples_per_interval: Option<usize>,
    pub fixed_iterations: Option<bool>,
    pub divergence_bound: Option<Real>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        Layer { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Layer {
    /// `top` over `self`.
    pub fn overlay(self, top: Layer) -> Layer {
        let base = self;
        overlay_fields!(base, top; preset, problem, mu, g0, dg0, k, l, w, method, iter_max,
            range, tol, samples_per_interval, fixed_iterations, divergence_bound, out, jobs, seed)
    }

    pub fn from_json(text: &str, origin: &str) -> CliResult<Layer> {
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("{origin}: {e}")))
    }

    pub fn from_file(path: &Path) -> CliResult<Layer> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Layer::from_json(&text, &path.display().to_string())
    }
}

/// Named parameter grids, scaled to desk size.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "table3.1",
        "cost grid: k 4..7, l 20..320, N in {10, 100} fixed iterations, mu = 0.05 on [0, 40]",
    ),
    (
        "table3.2",
        "iteration counts: k = 5, mu 0.01..2, l 10..160 on [0, 40]",
    ),
    (
        "table5.2",
        "w-sweep: mu = 3, k = 5, l = 160, segmented, w 2..160 on [0, 40]",
    ),
    (
        "large-mu",
        "large-mu run: mu = 20, k = 5, l = 320, segmented w = 40 on [0, 40]",
    ),
];

fn preset_base(name: &str) -> CliResult<Value> {
    let v = match name {
        // at mu = 1 the first whole-range linearisation on [0, 40] overflows in
        // double precision; mu = 0.05 keeps every run finite
        "table3.1" => serde_json::json!({
            "problem": "vdp", "mu": 0.05, "range": [0.0, 40.0], "method": "original",
            "k": [4, 5, 6, 7], "l": [20, 40, 80, 160, 320], "iter_max": [10, 100],
            "fixed_iterations": true
        }),
        "table3.2" => serde_json::json!({
            "problem": "vdp", "mu": [0.01, 0.05, 0.25, 0.5, 1.0, 2.0], "range": [0.0, 40.0],
            "method": "original", "k": 5, "l": [10, 20, 40, 80, 160], "tol": 1e-4
        }),
        "table5.2" => serde_json::json!({
            "problem": "vdp", "mu": 3.0, "range": [0.0, 40.0], "method": "segmented",
            "k": 5, "l": 160, "w": [2, 4, 8, 16, 20, 40, 80, 160], "divergence_bound": "inf"
        }),
        "large-mu" => serde_json::json!({
            "problem": "vdp", "mu": 20.0, "range": [0.0, 40.0], "method": "segmented",
            "k": 5, "l": 320, "w": 40
        }),
        _ => {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            return Err(CliError::usage(format!(
                "unknown preset '{name}' (available: {})",
                names.join(", ")
            )));
        }
    };
    Ok(v)
}

fn scalar(text: &str) -> Value {
    if let Ok(v) = text.parse::<u64>() {
        return Value::from(v);
    }
    if let Ok(v) = text.parse::<f64>() {
        if v.is_finite() {
            return Value::from(v);
        }
    }
    match text {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(text.to_string()),
    }
}

/// Parses `name` or `name:key=val,key=val`; a value may list several
/// entries separated by `|`.
pub fn parse_preset(spec: &str) -> CliResult<Layer> {
    let (name, overrides) = match spec.split_once(':') {
        Some((name, rest)) => (name, rest),
        None => (spec, ""),
    };
    let mut base = match preset_base(name)? {
        Value::Object(map) => map,
        _ => unreachable!("presets are objects"),
    };
    let mut extra = Map::new();
    for item in overrides.split(',').filter(|s| !s.is_empty()) {
        let (key, val) = item.split_once('=').ok_or_else(|| {
            CliError::usage(format!("preset override '{item}' must have the form key=value"))
        })?;
        let key = key.trim().replace('-', "_");
        let parts: Vec<Value> = val.split('|').map(|p| scalar(p.trim())).collect();
        let value = if parts.len() == 1 && key != "range" {
            parts.into_iter().next().expect("one part")
        } else {
            Value::Array(parts)
        };
        extra.insert(key, value);
    }
    base.extend(extra);
    Layer::from_json(&Value::Object(base).to_string(), &format!("preset '{spec}'"))
}

/// Everything needed for one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub problem: ProblemKind,
    pub mu: f64,
    pub g0: f64,
    pub dg0: f64,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub jobs: Vec<Job>,
    /// Combinations left out because `w` does not fit the method or `l`.
    pub skipped: usize,
    pub out: PathBuf,
    pub threads: usize,
    pub seed: Option<u64>,
}

pub const DEFAULT_OUT: &str = "collox-out";

/// Resolves the final layer into runs, validating each against the solver's
/// invariants.
pub fn plan(layer: Layer) -> CliResult<Plan> {
    let problem = layer.problem.unwrap_or_default();
    let mus = layer.mu.map_or(vec![1.0], |a| a.values());
    let ks = layer.k.map_or(vec![5], |a| a.values());
    let ls = layer.l.map_or(vec![160], |a| a.values());
    let ws = layer.w.map_or(vec![1], |a| a.values());
    let methods = layer.method.map_or(vec![Method::Original], |a| a.values());
    let iter_maxes = layer
        .iter_max
        .map_or(vec![SolverConfig::DEFAULT_ITER_MAX], |a| a.values());
    let [a, b] = layer.range.unwrap_or([0.0, 40.0]);
    let g0 = layer.g0.unwrap_or(1.0);
    let dg0 = layer.dg0.unwrap_or(0.0);

    for (name, len) in [
        ("mu", mus.len()),
        ("k", ks.len()),
        ("l", ls.len()),
        ("w", ws.len()),
        ("method", methods.len()),
        ("iter_max", iter_maxes.len()),
    ] {
        if len == 0 {
            return Err(CliError::usage(format!("{name} needs at least one value")));
        }
    }

    let mut jobs = Vec::new();
    let mut skipped = 0;
    for &mu in &mus {
        if problem == ProblemKind::Vdp && !(mu > 0.0 && mu.is_finite()) {
            return Err(CliError::usage(format!("mu must be positive, got {mu}")));
        }
        for &k in &ks {
            for &l in &ls {
                for &w in &ws {
                    for &iter_max in &iter_maxes {
                        for &method in &methods {
                            let mut solver = SolverConfig::new(k, l, a, b)
                                .with_method(method)
                                .with_w(w)
                                .with_iter_max(iter_max);
                            if let Some(tol) = layer.tol {
                                solver = solver.with_tol(tol);
                            }
                            if let Some(spi) = layer.samples_per_interval {
                                solver = solver.with_samples_per_interval(spi);
                            }
                            if let Some(fixed) = layer.fixed_iterations {
                                solver = solver.with_fixed_iterations(fixed);
                            }
                            if let Some(bound) = layer.divergence_bound {
                                solver = solver.with_divergence_bound(bound.value());
                            }
                            let sweeping = ws.len() > 1 || methods.len() > 1 || ls.len() > 1;
                            let misfit = w == 0
                                || !l.is_multiple_of(w)
                                || (method == Method::Original && w != 1);
                            if sweeping && w != 0 && misfit {
                                skipped += 1;
                                continue;
                            }
                            solver.validate().map_err(|e| CliError::usage(e.to_string()))?;
                            jobs.push(Job {
                                problem,
                                mu,
                                g0,
                                dg0,
                                solver,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(Plan {
        jobs,
        skipped,
        out: layer.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        threads: layer.jobs.unwrap_or(1),
        seed: layer.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_overrides_replace_axes() {
        let layer = parse_preset("table3.2:mu=0.05,l=20").unwrap();
        assert_eq!(layer.mu, Some(Axis::One(0.05)));
        assert_eq!(layer.l, Some(Axis::One(20)));
        assert_eq!(layer.k, Some(Axis::One(5)));
        let p = plan(layer).unwrap();
        assert_eq!(p.jobs.len(), 1);
        assert_eq!(p.jobs[0].solver.l, 20);
    }

    #[test]
    fn preset_lists_and_unknown_keys() {
        let layer = parse_preset("table5.2:w=2|4|8").unwrap();
        assert_eq!(layer.w, Some(Axis::Many(vec![2, 4, 8])));
        let err = parse_preset("table5.2:wdith=4").unwrap_err();
        assert!(err.to_string().contains("wdith"), "{err}");
        assert!(parse_preset("table9.9").is_err());
    }

    #[test]
    fn every_preset_plans() {
        for (name, _) in PRESETS {
            let p = plan(parse_preset(name).unwrap()).unwrap();
            assert!(!p.jobs.is_empty(), "{name}");
        }
        assert_eq!(plan(parse_preset("table5.2").unwrap()).unwrap().jobs.len(), 8);
        assert_eq!(plan(parse_preset("table3.1").unwrap()).unwrap().jobs.len(), 40);
    }

    #[test]
    fn later_layers_win() {
        let file = Layer::from_json(r#"{"k": 6, "l": [10, 20], "tol": 1e-6}"#, "test").unwrap();
        let flags = Layer {
            l: Some(Axis::One(40)),
            ..Layer::default()
        };
        let merged = parse_preset("table3.2").unwrap().overlay(file).overlay(flags);
        assert_eq!(merged.k, Some(Axis::One(6)));
        assert_eq!(merged.l, Some(Axis::One(40)));
        assert_eq!(merged.tol, Some(1e-6));
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let err = Layer::from_json(r#"{"mu": 1, "colour": "red"}"#, "cfg.json").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn divergence_bound_accepts_inf() {
        let layer = Layer::from_json(r#"{"divergence_bound": "inf"}"#, "test").unwrap();
        let p = plan(layer).unwrap();
        assert_eq!(p.jobs[0].solver.divergence_bound, f64::INFINITY);
    }

    #[test]
    fn sweep_skips_misfit_w_but_single_runs_validate() {
        let layer = Layer::from_json(
            r#"{"method": "segmented", "l": [80, 160], "w": [40, 160]}"#,
            "test",
        )
        .unwrap();
        let p = plan(layer).unwrap();
        assert_eq!(p.jobs.len(), 3);
        assert_eq!(p.skipped, 1);

        let layer = Layer::from_json(r#"{"method": "segmented", "w": 0}"#, "test").unwrap();
        let err = plan(layer).unwrap_err();
        assert!(err.to_string().contains("w must divide l"), "{err}");
    }
}
