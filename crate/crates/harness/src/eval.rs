//! Precision/recall curves, hit rates and curve dominance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::pipeline::Ranking;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub k: Vec<usize>,
    /// Pooled over queries: total hits over total returned ids.
    pub precision: Vec<f64>,
    /// Pooled over queries: total hits over total neighbours.
    pub recall: Vec<f64>,
    /// Per-query precision, averaged over queries that returned anything.
    pub precision_avg: Vec<f64>,
    /// Per-query recall, averaged over queries with at least one neighbour.
    pub recall_avg: Vec<f64>,
    /// Fraction of queries with a neighbour in the top `k`.
    pub hit_rate: Vec<f64>,
    pub query_seconds_mean: f64,
    pub query_seconds_p50: f64,
    pub query_seconds_p95: f64,
    pub probes_max: usize,
    pub config: Config,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let i = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[i]
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn evaluate(method: &str, runs: &[Ranking], config: &Config) -> EvalReport {
    let ks: Vec<usize> = (1..=config.k_max).collect();
    let total_truth: usize = runs.iter().map(|r| r.truth.len()).sum();
    let mut report = EvalReport {
        method: method.to_string(),
        k: ks.clone(),
        precision: Vec::new(),
        recall: Vec::new(),
        precision_avg: Vec::new(),
        recall_avg: Vec::new(),
        hit_rate: Vec::new(),
        query_seconds_mean: 0.0,
        query_seconds_p50: 0.0,
        query_seconds_p95: 0.0,
        probes_max: runs.iter().map(|r| r.probes).max().unwrap_or(0),
        config: config.clone(),
    };
    for &k in &ks {
        let (mut hits, mut returned, mut hit_queries) = (0usize, 0usize, 0usize);
        let (mut ps, mut rs) = (Vec::new(), Vec::new());
        for r in runs {
            let top = &r.ids[..k.min(r.ids.len())];
            let h = top.iter().filter(|id| r.truth.contains(id)).count();
            hits += h;
            returned += top.len();
            if h > 0 {
                hit_queries += 1;
            }
            if !top.is_empty() {
                ps.push(h as f64 / top.len() as f64);
            }
            if !r.truth.is_empty() {
                rs.push(h as f64 / r.truth.len() as f64);
            }
        }
        report.precision.push(if returned == 0 { 0.0 } else { hits as f64 / returned as f64 });
        report.recall.push(if total_truth == 0 { 0.0 } else { hits as f64 / total_truth as f64 });
        report.precision_avg.push(mean(&ps));
        report.recall_avg.push(mean(&rs));
        report.hit_rate.push(if runs.is_empty() { 0.0 } else { hit_queries as f64 / runs.len() as f64 });
    }
    let mut secs: Vec<f64> = runs.iter().map(|r| r.seconds).collect();
    secs.sort_by(f64::total_cmp);
    report.query_seconds_mean = mean(&secs);
    report.query_seconds_p50 = percentile(&secs, 0.5);
    report.query_seconds_p95 = percentile(&secs, 0.95);
    report
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<usize> {
        self.k.iter().position(|&x| x == k)
    }

    /// Plot-ready columns preceded by the echoed config. Timing is left out
    /// so equal seeds give equal files; see [`EvalReport::timing_text`].
    pub fn to_csv(&self) -> String {
        let mut out = self.config.echo();
        writeln!(out, "# method = {}", self.method).unwrap();
        writeln!(out, "# probes_max = {}", self.probes_max).unwrap();
        out.push_str("k,precision,recall,precision_avg,recall_avg,hit_rate\n");
        for i in 0..self.k.len() {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                self.k[i], self.precision[i], self.recall[i], self.precision_avg[i], self.recall_avg[i], self.hit_rate[i]
            )
            .unwrap();
        }
        out
    }

    pub fn timing_text(&self) -> String {
        format!(
            "query_seconds_mean = {:.6e}\nquery_seconds_p50 = {:.6e}\nquery_seconds_p95 = {:.6e}\n",
            self.query_seconds_mean, self.query_seconds_p50, self.query_seconds_p95
        )
    }
}

/// Largest precision at any point whose recall reaches `rho`.
pub fn interpolated_precision(precision: &[f64], recall: &[f64], rho: f64) -> Option<f64> {
    precision
        .iter()
        .zip(recall)
        .filter(|(_, &r)| r >= rho)
        .map(|(&p, _)| p)
        .max_by(f64::total_cmp)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dominance {
    /// Recall points reached by both curves.
    pub points: Vec<f64>,
    /// `(recall, precision_a, precision_b)` where `a` falls below `b`.
    pub violations: Vec<(f64, f64, f64)>,
}

impl Dominance {
    pub fn holds(&self) -> bool {
        !self.points.is_empty() && self.violations.is_empty()
    }
}

/// Compares interpolated pooled precision of `a` and `b` at every recall
/// value either curve attains, up to the smaller maximum recall.
pub fn dominance(a: &EvalReport, b: &EvalReport) -> Dominance {
    let top = |r: &[f64]| r.iter().copied().fold(0.0, f64::max);
    let limit = top(&a.recall).min(top(&b.recall));
    let mut points: Vec<f64> = a.recall.iter().chain(&b.recall).copied().filter(|&r| r > 0.0 && r <= limit).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut violations = Vec::new();
    for &rho in &points {
        let pa = interpolated_precision(&a.precision, &a.recall, rho).unwrap_or(0.0);
        let pb = interpolated_precision(&b.precision, &b.recall, rho).unwrap_or(0.0);
        if pa + 1e-12 < pb {
            violations.push((rho, pa, pb));
        }
    }
    Dominance { points, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(ids: &[u64], truth: &[u64]) -> Ranking {
        Ranking { query: 0, ids: ids.to_vec(), truth: truth.to_vec(), seconds: 0.0, probes: 0 }
    }

    #[test]
    fn hand_computed_curve() {
        let mut c = Config::default();
        c.k_max = 3;
        let runs = [run(&[1, 9, 2], &[1, 2]), run(&[8, 3], &[3])];
        let e = evaluate("x", &runs, &c);
        assert_eq!(e.precision, vec![0.5, 0.5, 3.0 / 5.0]);
        assert_eq!(e.recall, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(e.hit_rate, vec![0.5, 1.0, 1.0]);
        assert_eq!(e.recall_avg, vec![0.25, 0.75, 1.0]);
    }

    #[test]
    fn dominance_detects_crossing() {
        let mut c = Config::default();
        c.k_max = 2;
        let good = evaluate("a", &[run(&[1, 2], &[1, 2])], &c);
        let bad = evaluate("b", &[run(&[9, 1], &[1, 2])], &c);
        assert!(dominance(&good, &bad).holds());
        let d = dominance(&bad, &good);
        assert!(!d.holds());
        assert_eq!(d.points, vec![0.5]);
    }
}
