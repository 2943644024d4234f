//! Relative evacuation-time differences and CSV reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, MetricsError};
use crate::graph::NodeId;

pub const RESULTS_HEADER: &str =
    "run_id,seed,pod,sod,poe,node_id,t_ideal_s,t_actual_s,delta,deadline_violated";
pub const AGGREGATE_HEADER: &str =
    "pod,sod,poe,runs,delta_avg,fraction_positive,mean_arrival_s,violation_rate";

/// `(perturbed - ideal) / ideal`.
pub fn node_delta(t_perturbed: f64, t_ideal: f64) -> Result<f64, MetricsError> {
    if t_ideal.is_nan() || t_ideal <= 0.0 {
        return Err(MetricsError::NonPositiveIdeal(t_ideal));
    }
    Ok((t_perturbed - t_ideal) / t_ideal)
}

/// Sum form: `(sum perturbed - sum ideal) / sum ideal` over `(perturbed, ideal)`
/// pairs. Not the mean of per-node ratios.
pub fn average_delta(pairs: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (perturbed, ideal) = pairs
        .iter()
        .fold((0.0, 0.0), |(p, i), &(tp, ti)| (p + tp, i + ti));
    node_delta(perturbed, ideal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetric {
    pub node: NodeId,
    pub t_ideal: f64,
    pub t_perturbed: f64,
    pub delta: f64,
}

impl NodeMetric {
    pub fn new(node: NodeId, t_ideal: f64, t_perturbed: f64) -> Result<Self, MetricsError> {
        Ok(NodeMetric {
            node,
            t_ideal,
            t_perturbed,
            delta: node_delta(t_perturbed, t_ideal)?,
        })
    }
}

/// One CSV row: a node metric plus the run it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub run_id: usize,
    pub seed: u64,
    pub pod: f64,
    pub sod: usize,
    pub poe: f64,
    pub metric: NodeMetric,
    pub deadline_violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetric {
    pub pod: f64,
    pub sod: usize,
    pub poe: f64,
    pub runs: usize,
    pub delta_avg: f64,
    pub fraction_positive: f64,
    pub mean_arrival: f64,
    pub violation_rate: f64,
}

/// Aggregates the rows of one grid point.
pub fn aggregate(rows: &[ResultRow], runs: usize) -> Result<AggregateMetric, MetricsError> {
    let first = rows.first().ok_or(MetricsError::Empty)?;
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.metric.t_perturbed, r.metric.t_ideal))
        .collect();
    let delta_avg = average_delta(&pairs)?;

    let mut per_node: BTreeMap<NodeId, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let slot = per_node.entry(r.metric.node).or_default();
        slot.0 += r.metric.delta;
        slot.1 += 1;
    }
    let positive = per_node
        .values()
        .filter(|(sum, n)| sum / *n as f64 > 0.0)
        .count();
    let n = rows.len() as f64;
    Ok(AggregateMetric {
        pod: first.pod,
        sod: first.sod,
        poe: first.poe,
        runs,
        delta_avg,
        fraction_positive: positive as f64 / per_node.len() as f64,
        mean_arrival: rows.iter().map(|r| r.metric.t_perturbed).sum::<f64>() / n,
        violation_rate: rows.iter().filter(|r| r.deadline_violated).count() as f64 / n,
    })
}

fn time_field(t: f64) -> String {
    format!("{t:.6}")
}

/// Per-evacuee rows as CSV text. The delta column is recomputed from the
/// printed times, so it can be checked from the file alone.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let ideal = time_field(r.metric.t_ideal);
        let actual = time_field(r.metric.t_perturbed);
        let (i, a): (f64, f64) = (
            ideal.parse().expect("formatted float"),
            actual.parse().expect("formatted float"),
        );
        let delta = if i > 0.0 { (a - i) / i } else { r.metric.delta };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.9},{}",
            r.run_id,
            r.seed,
            r.pod,
            r.sod,
            r.poe,
            r.metric.node,
            ideal,
            actual,
            delta,
            r.deadline_violated
        );
    }
    out
}

/// Aggregate rows sorted by `(pod, sod, poe)`.
pub fn aggregate_csv(aggs: &[AggregateMetric]) -> String {
    let mut sorted: Vec<&AggregateMetric> = aggs.iter().collect();
    sorted.sort_by(|a, b| {
        a.pod
            .total_cmp(&b.pod)
            .then(a.sod.cmp(&b.sod))
            .then(a.poe.total_cmp(&b.poe))
    });
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for a in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.9},{:.9},{:.6},{:.9}",
            a.pod, a.sod, a.poe, a.runs, a.delta_avg, a.fraction_positive, a.mean_arrival,
            a.violation_rate
        );
    }
    out
}

pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<(), Error> {
    fs::write(path, results_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn write_aggregate_csv(aggs: &[AggregateMetric], path: &Path) -> Result<(), Error> {
    fs::write(path, aggregate_csv(aggs)).map_err(|e| Error::io(path, e))
}
