//! Result rows and per-group summaries.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const COLUMNS: [&str; 16] = [
    "experiment",
    "family",
    "t",
    "N",
    "k",
    "p_budget",
    "xi",
    "sample_seed",
    "method",
    "recovery",
    "mvp_cost",
    "rho_total",
    "rho_diag",
    "iterations",
    "runtime_s",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Diverged,
    Error,
}

/// One run of one method. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub family: String,
    pub t: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: Option<usize>,
    pub p_budget: usize,
    pub xi: Option<f64>,
    pub sample_seed: u64,
    pub method: String,
    pub recovery: String,
    pub mvp_cost: Option<usize>,
    pub rho_total: Option<f64>,
    pub rho_diag: Option<f64>,
    pub iterations: Option<usize>,
    pub runtime_s: f64,
    pub status: Status,
}

pub fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(true).from_writer(out)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub family: String,
    pub t: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub p_budget: usize,
    pub xi: Option<f64>,
    pub method: String,
    pub recovery: String,
    pub runs: usize,
    pub ok: usize,
    pub rho_total_q1: Option<f64>,
    pub rho_total_median: Option<f64>,
    pub rho_total_q3: Option<f64>,
    pub rho_diag_median: Option<f64>,
    pub iterations_median: Option<f64>,
}

type GroupKey = (String, String, String, usize, usize, String, String, String);

/// Medians and quartiles over samples, one row per configuration.
/// Runs without a finite `rho_total` count toward `runs` but not `ok`.
pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.experiment.clone(),
            r.family.clone(),
            format!("{:?}", r.t),
            r.n,
            r.p_budget,
            format!("{:?}", r.xi),
            r.method.clone(),
            r.recovery.clone(),
        );
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let sorted = |f: &dyn Fn(&Row) -> Option<f64>| {
                let mut v: Vec<f64> = g.iter().filter_map(|r| f(r)).filter(|x| x.is_finite()).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v
            };
            let rho = sorted(&|r| r.rho_total);
            let diag = sorted(&|r| r.rho_diag);
            let iters = sorted(&|r| r.iterations.map(|i| i as f64));
            let q = |v: &[f64], p: f64| (!v.is_empty()).then(|| quantile(v, p));
            let first = g[0];
            SummaryRow {
                experiment: first.experiment.clone(),
                family: first.family.clone(),
                t: first.t,
                n: first.n,
                p_budget: first.p_budget,
                xi: first.xi,
                method: first.method.clone(),
                recovery: first.recovery.clone(),
                runs: g.len(),
                ok: rho.len(),
                rho_total_q1: q(&rho, 0.25),
                rho_total_median: q(&rho, 0.5),
                rho_total_q3: q(&rho, 0.75),
                rho_diag_median: q(&diag, 0.5),
                iterations_median: q(&iters, 0.5),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(rows: &[Row], out: W) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    for s in summarize(rows) {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
