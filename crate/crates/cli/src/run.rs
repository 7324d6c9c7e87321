//! Cell construction and parallel execution.
//!
//! A cell is one matrix (a synthetic sample or the toy operator) together
//! with every run that uses it. Cells are independent, so they are spread
//! over a worker pool; rows are still written in cell order so that the
//! output never depends on scheduling.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::mpsc;
use std::time::Instant;

use sketchlord::{
    error_energies, run_method, sample, toy_bounds, AdmmConfig, AdmmTrace, DenseOp, LinOp, LordError, Method,
    Recovery, SynthSpec,
};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::output::{csv_writer, Row, Status};
use crate::seed::{cell_seeds, CellSeeds};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub method: Method,
    pub recovery: Recovery,
    pub budget: usize,
    pub admm: AdmmConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synth(SynthSpec),
    Toy(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub source: Source,
    pub seeds: CellSeeds,
    pub runs: Vec<RunSpec>,
}

fn runs_for(cfg: &ExperimentConfig, label: &str, admm: &AdmmConfig) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    for &budget in &cfg.budgets {
        for &method in &cfg.methods {
            for &recovery in &cfg.recoveries {
                runs.push(RunSpec {
                    label: label.to_string(),
                    method,
                    recovery,
                    budget,
                    admm: admm.clone(),
                });
            }
        }
    }
    runs
}

fn stability_label(eta: f64, lambda: f64, mu: f64) -> String {
    format!("stability(eta={eta};lambda={lambda};mu={mu})")
}

/// Every cell of the experiment, in output order.
pub fn build_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    let mut push = |source: Source, runs: Vec<RunSpec>| {
        let seeds = cell_seeds(cfg.master_seed, cells.len() as u64);
        let source = match source {
            Source::Synth(mut spec) => {
                spec.seed = seeds.sample;
                Source::Synth(spec)
            }
            toy => toy,
        };
        cells.push(Cell { source, seeds, runs });
    };
    match cfg.experiment {
        Experiment::Toy => {
            for _ in 0..cfg.samples {
                push(Source::Toy(cfg.n), runs_for(cfg, "toy", &cfg.admm));
            }
        }
        Experiment::Grid | Experiment::Single => {
            let label = cfg.experiment.as_str();
            let samples = if cfg.experiment == Experiment::Single { 1 } else { cfg.samples };
            for &(family, t) in &cfg.matrices {
                for &xi in &cfg.xi {
                    for _ in 0..samples {
                        push(Source::Synth(cfg.synth_spec(family, t, xi, 0)), runs_for(cfg, label, &cfg.admm));
                    }
                }
            }
        }
        Experiment::Stability => {
            for &(family, t) in &cfg.matrices {
                for &xi in &cfg.xi {
                    for _ in 0..cfg.samples {
                        let runs = cfg
                            .stability
                            .iter()
                            .flat_map(|&[eta, lambda, mu]| {
                                let admm = cfg.admm.clone().with_step(eta, lambda, mu);
                                runs_for(cfg, &stability_label(eta, lambda, mu), &admm)
                            })
                            .collect();
                        push(Source::Synth(cfg.synth_spec(family, t, xi, 0)), runs);
                    }
                }
            }
        }
        Experiment::Bounds => {}
    }
    cells
}

/// A finished run: its row and, for the joint method, the solver trace.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub row: Row,
    pub trace: Option<AdmmTrace>,
}

fn blank_row(cell: &Cell, run: &RunSpec) -> Row {
    let (family, t, n, k, xi) = match &cell.source {
        Source::Synth(s) => (s.family.to_string(), Some(s.t), s.n, Some(s.k), Some(s.xi)),
        Source::Toy(n) => ("toy".to_string(), None, *n, None, None),
    };
    Row {
        experiment: run.label.clone(),
        family,
        t,
        n,
        k,
        p_budget: run.budget,
        xi,
        sample_seed: cell.seeds.sample,
        method: run.method.to_string(),
        recovery: run.recovery.to_string(),
        mvp_cost: None,
        rho_total: None,
        rho_diag: None,
        iterations: None,
        runtime_s: 0.0,
        status: Status::Error,
    }
}

fn execute<A: LinOp + ?Sized>(a: &A, cell: &Cell, run: &RunSpec) -> RunResult {
    let mut row = blank_row(cell, run);
    let start = Instant::now();
    let out = run_method(a, run.method, run.recovery, run.budget, cell.seeds.sketch, &run.admm);
    row.runtime_s = start.elapsed().as_secs_f64();
    match out {
        Ok(out) => {
            row.mvp_cost = Some(out.mvp_cost);
            row.iterations = out.trace.as_ref().map(|t| t.iterations);
            match error_energies(a, &out.approx) {
                Ok(e) => {
                    row.rho_total = e.rho_total().ok();
                    row.rho_diag = e.rho_diag().ok();
                    row.status = Status::Ok;
                }
                Err(err) => log::warn!("metric failed for {}/{}: {err}", row.method, row.recovery),
            }
            RunResult { row, trace: out.trace }
        }
        Err(LordError::Diverged { trace, .. }) => {
            row.iterations = Some(trace.iterations);
            row.status = Status::Diverged;
            RunResult {
                row,
                trace: Some(*trace),
            }
        }
        Err(err) => {
            log::warn!("{}/{} failed: {err}", row.method, row.recovery);
            RunResult { row, trace: None }
        }
    }
}

/// Runs every method of one cell on its shared matrix.
pub fn run_cell(cell: &Cell) -> Vec<RunResult> {
    match &cell.source {
        Source::Toy(n) => match sketchlord::toy_operator(*n) {
            Ok(op) => cell.runs.iter().map(|r| execute(&op, cell, r)).collect(),
            Err(err) => failed(cell, &err),
        },
        Source::Synth(spec) => match sample(spec) {
            Ok(s) => {
                let op = DenseOp::new(s.a);
                cell.runs.iter().map(|r| execute(&op, cell, r)).collect()
            }
            Err(err) => failed(cell, &err),
        },
    }
}

fn failed(cell: &Cell, err: &LordError) -> Vec<RunResult> {
    log::warn!("cannot build matrix: {err}");
    cell.runs
        .iter()
        .map(|r| RunResult {
            row: blank_row(cell, r),
            trace: None,
        })
        .collect()
}

/// Runs `cells` on `workers` threads and hands each cell's results to `sink`
/// in cell order, as soon as all earlier cells are done.
pub fn run_cells<F>(cells: &[Cell], workers: usize, mut sink: F) -> Result<(), CliError>
where
    F: FnMut(usize, Vec<RunResult>) -> Result<(), CliError>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        scope.spawn(move || {
            pool.install(|| {
                use rayon::prelude::*;
                cells.par_iter().enumerate().for_each_with(tx, |tx, (i, cell)| {
                    // The receiver only hangs up after a sink error.
                    let _ = tx.send((i, run_cell(cell)));
                });
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, results) in rx {
            pending.insert(i, results);
            while let Some(results) = pending.remove(&next) {
                log::info!("cell {}/{} done", next + 1, cells.len());
                sink(next, results)?;
                next += 1;
            }
        }
        Ok(())
    })
}

/// Runs a toy, grid or stability experiment, streaming rows to `out`.
pub fn run_experiment<W: Write>(cfg: &ExperimentConfig, workers: usize, out: W) -> Result<Vec<Row>, CliError> {
    let cells = build_cells(cfg);
    let mut writer = csv_writer(out);
    let mut rows = Vec::new();
    run_cells(&cells, workers, |_, results| {
        for r in results {
            writer.serialize(&r.row)?;
            rows.push(r.row);
        }
        writer.flush()?;
        Ok(())
    })?;
    Ok(rows)
}

/// The one run of a `single` experiment.
pub fn run_single(cfg: &ExperimentConfig) -> RunResult {
    let cells = build_cells(cfg);
    run_cell(&cells[0]).remove(0)
}

pub fn write_bounds<W: Write>(n: usize, k_max: usize, out: W) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(["N", "k", "rho_d", "rho_lor", "rho_d_then_lor", "rho_lor_then_d"])?;
    for k in 1..=k_max {
        let b = toy_bounds(n, k)?;
        w.write_record([
            n.to_string(),
            k.to_string(),
            format!("{:e}", b.rho_d),
            format!("{:e}", b.rho_lor),
            format!("{:e}", b.rho_d_then_lor),
            format!("{:e}", b.rho_lor_then_d),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn config(text: &str, e: Experiment) -> ExperimentConfig {
        ExperimentConfig::resolve(RawConfig::parse(text).unwrap(), e).unwrap()
    }

    #[test]
    fn cells_follow_the_cross_product() {
        let cfg = config("schema_version = 1\nsamples = 2", Experiment::Grid);
        let cells = build_cells(&cfg);
        assert_eq!(cells.len(), 9 * 4 * 2);
        assert!(cells.iter().all(|c| c.runs.len() == 15));
        let stab = build_cells(&config("schema_version = 1\nsamples = 3", Experiment::Stability));
        assert_eq!(stab.len(), 3);
        assert_eq!(stab[0].runs.len(), 14);
        assert_eq!(stab[0].runs[7].admm.lambda, 0.0125);
    }

    #[test]
    fn cell_seeds_do_not_depend_on_other_cells() {
        let a = build_cells(&config("schema_version = 1\nsamples = 3\nmaster_seed = 5", Experiment::Toy));
        let b = build_cells(&config("schema_version = 1\nsamples = 5\nmaster_seed = 5", Experiment::Toy));
        assert_eq!(a[..], b[..3]);
        let c = build_cells(&config("schema_version = 1\nsamples = 3\nmaster_seed = 6", Experiment::Toy));
        assert_ne!(a[0].seeds, c[0].seeds);
    }

    #[test]
    fn rows_arrive_in_cell_order_for_any_worker_count() {
        let cfg = config(
            "schema_version = 1\nN = 24\nsamples = 6\nbudgets = [12]\nrecoveries = [\"compact\"]\nmethods = [\"ssvd\", \"xdiag\"]",
            Experiment::Toy,
        );
        let strip = |rows: Vec<Row>| -> Vec<Row> {
            rows.into_iter().map(|r| Row { runtime_s: 0.0, ..r }).collect()
        };
        let one = strip(run_experiment(&cfg, 1, Vec::new()).unwrap());
        let four = strip(run_experiment(&cfg, 4, Vec::new()).unwrap());
        assert_eq!(one, four);
        assert_eq!(one.len(), 12);
        assert!(one.iter().all(|r| r.status == Status::Ok && r.mvp_cost == Some(12)));
    }

    #[test]
    fn failures_become_error_rows() {
        let cfg = config("schema_version = 1\nN = 12\nbudgets = [12]", Experiment::Single);
        let cell = &build_cells(&cfg)[0];
        let mut m = sketchlord::Mat::identity(12, 12);
        m[(3, 4)] = f64::NAN;
        let r = execute(&DenseOp::new(m), cell, &cell.runs[0]);
        assert_eq!(r.row.status, Status::Error);
        assert_eq!((r.row.rho_total, r.row.mvp_cost), (None, None));
        assert_eq!(r.row.experiment, "single");
    }

    #[test]
    fn bounds_table() {
        let mut out = Vec::new();
        write_bounds(200, 200, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 201);
        let first: Vec<f64> = lines[1].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert!((first[1] - 0.995 / 203.0).abs() < 1e-15);
        let last: Vec<f64> = lines[200].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!((last[1], last[3]), (0.0, 0.0));
        assert_eq!(first[0], last[0]);
    }
}
