use std::fs;
use std::path::Path;
use std::sync::Arc;

use collox::analysis::{phase_samples, vdp_problem, VdpParams};
use collox::collocation::{Harmonic, OdeProblem};
use collox::drivers::{solve, SolveReport};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::{Job, Plan, ProblemKind};
use crate::error::{CliError, CliResult};

/// One solver run as written to `report.json` and `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub problem: String,
    pub mu: f64,
    pub k: usize,
    pub l: usize,
    pub w: usize,
    pub method: String,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub iterations_per_segment: Vec<usize>,
    pub converged: bool,
    #[serde(deserialize_with = "nullable")]
    pub wall_seconds: f64,
    #[serde(deserialize_with = "nullable")]
    pub flop_estimate: f64,
    pub counted_flops: u64,
    #[serde(deserialize_with = "nullable")]
    pub err_inf: f64,
    pub failure: Option<String>,
}

/// JSON writes non-finite reals as `null`; read them back as NaN.
fn nullable<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// [`Record`] with the per-segment counts joined by `;`, for CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvRecord {
    problem: String,
    mu: f64,
    k: usize,
    l: usize,
    w: usize,
    method: String,
    a: f64,
    b: f64,
    #[serde(rename = "N")]
    n: usize,
    iterations_per_segment: String,
    converged: bool,
    wall_seconds: f64,
    flop_estimate: f64,
    counted_flops: u64,
    err_inf: f64,
    failure: Option<String>,
}

impl From<&Record> for CsvRecord {
    fn from(r: &Record) -> Self {
        let segments: Vec<String> = r.iterations_per_segment.iter().map(|n| n.to_string()).collect();
        CsvRecord {
            problem: r.problem.clone(),
            mu: r.mu,
            k: r.k,
            l: r.l,
            w: r.w,
            method: r.method.clone(),
            a: r.a,
            b: r.b,
            n: r.n,
            iterations_per_segment: segments.join(";"),
            converged: r.converged,
            wall_seconds: r.wall_seconds,
            flop_estimate: r.flop_estimate,
            counted_flops: r.counted_flops,
            err_inf: r.err_inf,
            failure: r.failure.clone(),
        }
    }
}

impl TryFrom<CsvRecord> for Record {
    type Error = CliError;

    fn try_from(r: CsvRecord) -> CliResult<Self> {
        let iterations_per_segment = r
            .iterations_per_segment
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    CliError::usage(format!("bad iterations_per_segment entry '{s}'"))
                })
            })
            .collect::<CliResult<Vec<usize>>>()?;
        Ok(Record {
            problem: r.problem,
            mu: r.mu,
            k: r.k,
            l: r.l,
            w: r.w,
            method: r.method,
            a: r.a,
            b: r.b,
            n: r.n,
            iterations_per_segment,
            converged: r.converged,
            wall_seconds: r.wall_seconds,
            flop_estimate: r.flop_estimate,
            counted_flops: r.counted_flops,
            err_inf: r.err_inf,
            failure: r.failure.filter(|f| !f.is_empty()),
        })
    }
}

fn record(job: &Job, report: &SolveReport) -> Record {
    Record {
        problem: job.problem.name().to_string(),
        mu: job.mu,
        k: report.k,
        l: report.l,
        w: report.w,
        method: report.method.to_string(),
        a: job.solver.a,
        b: job.solver.b,
        n: report.iterations(),
        iterations_per_segment: report.iterations_per_segment.clone(),
        converged: report.converged,
        wall_seconds: report.wall_seconds,
        flop_estimate: report.flop_estimate,
        counted_flops: report.counted_flops,
        err_inf: report.err_inf,
        failure: report.failure.clone(),
    }
}

fn problem(job: &Job) -> CliResult<OdeProblem> {
    let built = match job.problem {
        ProblemKind::Vdp => vdp_problem(&VdpParams::new(job.mu).with_initial_state(job.g0, job.dg0)),
        ProblemKind::Harmonic => OdeProblem::with_initial_state(Arc::new(Harmonic), job.g0, job.dg0),
    };
    built.map_err(|e| CliError::usage(e.to_string()))
}

fn execute(job: &Job) -> CliResult<SolveReport> {
    solve(&problem(job)?, &job.solver).map_err(|e| CliError::usage(e.to_string()))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    Ok(csv::Writer::from_writer(file))
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn solve_one(plan: Plan) -> CliResult<()> {
    let job = match plan.jobs.as_slice() {
        [job] => job,
        jobs => {
            return Err(CliError::usage(format!(
                "solve runs a single configuration but {} were given; use sweep for lists",
                jobs.len() + plan.skipped
            )))
        }
    };
    let report = execute(job)?;
    create_dir(&plan.out)?;

    let path = plan.out.join("solution.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["x", "f", "df", "d2f", "err"])?;
    for &(x, err) in &report.err_samples {
        let [f, df, d2f] = report
            .solution
            .eval3(x)
            .map_err(|e| CliError::usage(e.to_string()))?;
        w.serialize((x, f, df, d2f, err))?;
    }
    flush(w, &path)?;

    let path = plan.out.join("phase.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["g", "dg"])?;
    if !report.solution.is_empty() {
        let phase = phase_samples(&report.solution, job.solver.samples_per_interval)
            .map_err(|e| CliError::usage(e.to_string()))?;
        for p in phase.points {
            w.serialize(p)?;
        }
    }
    flush(w, &path)?;

    let rec = record(job, &report);
    let path = plan.out.join("report.json");
    let text = serde_json::to_string_pretty(&rec).expect("records serialize");
    fs::write(&path, text + "\n").map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;

    println!(
        "{} k={} l={} w={} N={} err_inf={:e} converged={}",
        rec.method, rec.k, rec.l, rec.w, rec.n, rec.err_inf, rec.converged
    );
    match rec.failure {
        None => Ok(()),
        Some(why) => Err(CliError::NotConverged(why)),
    }
}

pub fn sweep(plan: Plan) -> CliResult<()> {
    if plan.skipped > 0 {
        eprintln!(
            "collox: skipped {} combination(s) whose w does not divide l or needs a segmented method",
            plan.skipped
        );
    }
    if plan.jobs.is_empty() {
        return Err(CliError::usage("the sweep has no valid combinations"));
    }
    let mut order: Vec<usize> = (0..plan.jobs.len()).collect();
    if let Some(seed) = plan.seed {
        order.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.threads.max(1))
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    let mut results: Vec<(usize, CliResult<Record>)> = pool.install(|| {
        order
            .par_iter()
            .map(|&i| {
                let job = &plan.jobs[i];
                (i, execute(job).map(|r| record(job, &r)))
            })
            .collect()
    });
    results.sort_by_key(|r| r.0);
    let records = results
        .into_iter()
        .map(|(_, r)| r)
        .collect::<CliResult<Vec<Record>>>()?;

    create_dir(&plan.out)?;
    let path = plan.out.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    for r in &records {
        w.serialize(CsvRecord::from(r))?;
    }
    flush(w, &path)?;

    let failed = records.iter().filter(|r| !r.converged).count();
    println!("{} run(s) written to {}", records.len(), path.display());
    if failed > 0 {
        return Err(CliError::NotConverged(format!(
            "{failed} of {} run(s) did not converge",
            records.len()
        )));
    }
    Ok(())
}

/// Reads `sweep.csv` or JSON reports (one object or an array).
pub fn read_records(path: &Path) -> CliResult<Vec<Record>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            One(Record),
            Many(Vec<Record>),
        }
        let doc: Doc = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        return Ok(match doc {
            Doc::One(r) => vec![r],
            Doc::Many(v) => v,
        });
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize::<CsvRecord>()
        .map(|row| Record::try_from(row?))
        .collect()
}
