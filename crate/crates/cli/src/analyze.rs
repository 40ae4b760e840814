use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::ValueEnum;
use collox::analysis::{
    convergence_order, estimate_iteration_model, fit_iteration_model, fit_mu_cost, optimal_w,
    IterationModel,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::run::{read_records, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// `N_seg(w) = N_ori / w^lambda + N_min w` from (w, N) rows
    IterationModel,
    /// `cost = A mu^m` from (mu, cost) rows
    MuCost,
    /// Convergence order of err_inf in the mesh size, per spline order
    Order,
    /// Minimising w, from --lambda/--n-ori/--n-min or a fitted model
    OptimalW,
    /// The parsed rows as JSON
    Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Cost {
    Wall,
    Flops,
    Iterations,
}

#[derive(Debug)]
pub struct AnalyzeArgs {
    pub input: Option<PathBuf>,
    pub kind: Kind,
    pub n_ori: Option<f64>,
    pub lambda: Option<f64>,
    pub n_min: Option<f64>,
    pub cost: Cost,
    pub out: Option<PathBuf>,
}

fn analysis(e: collox::Error) -> CliError {
    CliError::Analysis(e.to_string())
}

fn records(args: &AnalyzeArgs) -> CliResult<Vec<Record>> {
    match &args.input {
        Some(path) => read_records(path),
        None => Err(CliError::usage("this analysis needs an input file")),
    }
}

/// Fits on converged rows; a `w = 1` row supplies `N_ori` unless given.
fn iteration_model(rows: &[Record], n_ori: Option<f64>) -> CliResult<IterationModel> {
    let converged: Vec<&Record> = rows.iter().filter(|r| r.converged).collect();
    let whole = converged.iter().find(|r| r.w == 1).map(|r| r.n as f64);
    let points: Vec<(f64, f64)> = converged
        .iter()
        .filter(|r| r.w > 1)
        .map(|r| (r.w as f64, r.n as f64))
        .collect();
    match n_ori.or(whole) {
        Some(n) => fit_iteration_model(&points, n),
        None => estimate_iteration_model(&points),
    }
    .map_err(analysis)
}

#[derive(Serialize)]
struct OrderRow {
    k: usize,
    order: f64,
    points: usize,
}

fn compute(args: &AnalyzeArgs) -> CliResult<Value> {
    let value = match args.kind {
        Kind::IterationModel => {
            let rows = records(args)?;
            let model = iteration_model(&rows, args.n_ori)?;
            json!({
                "model": model,
                "optimal_w": optimal_w(model.lambda, model.n_ori, model.n_min),
            })
        }
        Kind::MuCost => {
            let rows = records(args)?;
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.converged)
                .map(|r| {
                    let cost = match args.cost {
                        Cost::Wall => r.wall_seconds,
                        Cost::Flops => r.flop_estimate,
                        Cost::Iterations => r.n as f64,
                    };
                    (r.mu, cost)
                })
                .collect();
            json!(fit_mu_cost(&points).map_err(analysis)?)
        }
        Kind::Order => {
            let rows = records(args)?;
            let mut by_k: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.converged && r.l > 0) {
                by_k.entry(r.k).or_default().push(((r.b - r.a) / r.l as f64, r.err_inf));
            }
            if by_k.is_empty() {
                return Err(CliError::Analysis("no converged rows to fit".into()));
            }
            let orders = by_k
                .into_iter()
                .map(|(k, pts)| {
                    Ok(OrderRow {
                        k,
                        order: convergence_order(&pts).map_err(analysis)?,
                        points: pts.len(),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            json!({ "orders": orders })
        }
        Kind::OptimalW => {
            let (lambda, n_ori, n_min) = match (args.lambda, args.n_ori, args.n_min) {
                (Some(l), Some(o), Some(m)) => (l, o, m),
                _ => {
                    let model = iteration_model(&records(args)?, args.n_ori)?;
                    (
                        args.lambda.unwrap_or(model.lambda),
                        model.n_ori,
                        args.n_min.unwrap_or(model.n_min),
                    )
                }
            };
            if !(lambda > 0.0 && n_ori > 0.0 && n_min > 0.0) {
                return Err(CliError::Analysis(format!(
                    "lambda, N_ori and N_min must be positive (got {lambda}, {n_ori}, {n_min})"
                )));
            }
            json!({
                "lambda": lambda,
                "n_ori": n_ori,
                "n_min": n_min,
                "optimal_w": optimal_w(lambda, n_ori, n_min),
            })
        }
        Kind::Rows => json!(records(args)?),
    };
    Ok(value)
}

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    let value = compute(&args)?;
    let text = serde_json::to_string_pretty(&value).expect("json values serialize") + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(w: usize, n: usize) -> Record {
        Record {
            problem: "vdp".into(),
            mu: 3.0,
            k: 5,
            l: 160,
            w,
            method: "segmented".into(),
            a: 0.0,
            b: 40.0,
            n,
            iterations_per_segment: vec![n],
            converged: true,
            wall_seconds: 1.0,
            flop_estimate: 1.0,
            counted_flops: 1,
            err_inf: 1.0,
            failure: None,
        }
    }

    #[test]
    fn whole_range_row_supplies_n_ori() {
        // N = 800 / w + 2 w, rounded
        let rows: Vec<Record> = [1usize, 2, 4, 8, 16, 32]
            .iter()
            .map(|&w| row(w, (800.0 / w as f64 + 2.0 * w as f64).round() as usize))
            .collect();
        let model = iteration_model(&rows, None).unwrap();
        assert_eq!(model.n_ori, 802.0);
        assert!((model.lambda - 1.0).abs() < 0.05, "{model:?}");
    }

    #[test]
    fn direct_optimal_w() {
        let args = AnalyzeArgs {
            input: None,
            kind: Kind::OptimalW,
            n_ori: Some(800.0),
            lambda: Some(1.0),
            n_min: Some(2.0),
            cost: Cost::Wall,
            out: None,
        };
        let v = compute(&args).unwrap();
        assert_eq!(v["optimal_w"], json!(20.0));
    }
}
