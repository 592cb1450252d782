//! Timing: nested-signature encoding throughput and query latency.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Result;
use mimp::code::BitCode;
use mimp::montgomery::{nested_signature, MontgomeryContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::pipeline::Deployment;

/// Queries timed per database size.
pub const BENCH_QUERIES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct LatencyRow {
    pub n: usize,
    pub p50: f64,
    pub p95: f64,
    pub mean: f64,
    pub max_probes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub encodings: usize,
    pub encode_seconds: f64,
    pub latency: Vec<LatencyRow>,
}

impl BenchReport {
    pub fn signatures_per_second(&self) -> f64 {
        self.encodings as f64 / self.encode_seconds.max(f64::MIN_POSITIVE)
    }

    pub fn to_text(&self, config: &Config) -> String {
        let mut out = config.echo();
        writeln!(out, "encodings = {}", self.encodings).unwrap();
        writeln!(out, "encode_seconds = {:.4}", self.encode_seconds).unwrap();
        writeln!(out, "signatures_per_second = {:.1}", self.signatures_per_second()).unwrap();
        out.push_str("n,p50_seconds,p95_seconds,mean_seconds,max_probes\n");
        for r in &self.latency {
            writeln!(out, "{},{:.6e},{:.6e},{:.6e},{}", r.n, r.p50, r.p95, r.mean, r.max_probes).unwrap();
        }
        out
    }
}

/// Seconds to compute `count` nested signatures of random substrings.
pub fn encode_throughput(config: &Config, count: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let s = config.params().s();
    let ctx = MontgomeryContext::generate(1, config.t, config.c_r, config.c_n, &mut rng)?;
    let (u, o) = (&ctx.tables[0].user, &ctx.tables[0].owner);
    let xs: Vec<u64> = (0..count).map(|_| rng.random_range(0..1u64 << s)).collect();
    let start = Instant::now();
    let mut sink = 0u64;
    for &x in &xs {
        sink ^= nested_signature(x, u, o).values[0];
    }
    let secs = start.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    Ok(secs)
}

pub fn run_bench(config: &Config, encodings: usize) -> Result<BenchReport> {
    let encode_seconds = encode_throughput(config, encodings)?;
    let params = config.params();
    let mut latency = Vec::new();
    for &n in &config.bench_sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ n as u64);
        let records: Vec<BitCode> = (0..n).map(|_| BitCode::random(config.d, &mut rng)).collect();
        let dep = Deployment::build(params, &records, config.seed, n as u64)?;
        let mut times = Vec::with_capacity(BENCH_QUERIES);
        let mut max_probes = 0;
        for _ in 0..BENCH_QUERIES {
            let mut q = records[rng.random_range(0..n)].clone();
            for _ in 0..config.r.min(config.d as u32) / 2 {
                q.flip(rng.random_range(0..config.d));
            }
            let start = Instant::now();
            let res = dep.query(&q, &[])?;
            times.push(start.elapsed().as_secs_f64());
            max_probes = max_probes.max(res.probes);
        }
        times.sort_by(f64::total_cmp);
        let at = |p: f64| times[((times.len() - 1) as f64 * p).round() as usize];
        latency.push(LatencyRow {
            n,
            p50: at(0.5),
            p95: at(0.95),
            mean: times.iter().sum::<f64>() / times.len() as f64,
            max_probes,
        });
    }
    Ok(BenchReport { encodings, encode_seconds, latency })
}
