//! Plot-ready privacy data: false-positive bounds, leakage curves and the
//! d-vs-m obfuscation histogram.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mimp::distance::obfuscated_distance;
use mimp::montgomery::{nested_fp_bound, primes_below};
use mimp::privacy::{
    mutual_information_exact, obfuscation_stats, privacy_gain_lsh_sampling, privacy_gain_montgomery,
    privacy_gain_segments, ObfuscationStats,
};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::dataset::{Dataset, SyntheticSpec};

/// Substring width of the reduced-scale leakage sweeps.
pub const LEAKAGE_S: u32 = 4;
pub const LEAKAGE_PAIRS: usize = 10;
pub const LEAKAGE_CR: [u32; 6] = [2, 4, 6, 8, 10, 12];
pub const GRID_CR: u32 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundPoint {
    pub c_n: u32,
    pub t: u32,
    pub bound: f64,
}

/// Modulus widths swept by [`bound_curve`].
pub const BOUND_CN: std::ops::RangeInclusive<u32> = 4..=20;

/// Nested false-positive bound for `T = 1, 2, 3` at every feasible `c_N` in
/// [`BOUND_CN`].
pub fn bound_curve(s: u32, c_r: u32) -> Vec<BoundPoint> {
    let mut out = Vec::new();
    for t in 1..=3 {
        for c_n in BOUND_CN {
            if let Ok(bound) = nested_fp_bound(s, c_r, c_n, t) {
                out.push(BoundPoint { c_n, t, bound });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiPoint {
    pub c_r: u32,
    pub mean: f64,
    pub std_error: f64,
    pub values: Vec<f64>,
}

/// Random prime pairs below `2^11`, with replacement across pairs.
pub fn prime_pairs(count: usize, seed: u64) -> Vec<(u64, u64)> {
    let primes = primes_below(1 << 11);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = sample(&mut rng, primes.len(), 2);
            (primes[v.index(0)], primes[v.index(1)])
        })
        .collect()
}

/// Exact mutual information at `s = 4`, averaged over prime pairs, per `c_R`.
pub fn mi_vs_cr(pairs: &[(u64, u64)], grid: &[u32]) -> Result<Vec<MiPoint>> {
    grid.iter()
        .map(|&c_r| {
            let values = pairs
                .iter()
                .map(|&(a, b)| Ok(mutual_information_exact(LEAKAGE_S, c_r, a, b)?.mutual_information))
                .collect::<Result<Vec<f64>>>()?;
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            Ok(MiPoint { c_r, mean, std_error: (var / n).sqrt(), values })
        })
        .collect()
}

/// Exact mutual information over a grid of moduli, `(n1, n2, I)`.
pub fn mi_grid(c_r: u32) -> Result<Vec<(u64, u64, f64)>> {
    let primes = primes_below(1 << 11);
    let moduli: Vec<u64> =
        (3..=11).map(|k| *primes.iter().rev().find(|&&p| p < 1 << k).expect("a prime below 2^k")).collect();
    let mut out = Vec::new();
    for &a in &moduli {
        for &b in &moduli {
            out.push((a, b, mutual_information_exact(LEAKAGE_S, c_r, a, b)?.mutual_information));
        }
    }
    Ok(out)
}

/// `(d, m)` statistics over a generated corpus, with `m` from plaintext MIMP.
pub fn d_vs_m(config: &Config) -> Result<ObfuscationStats> {
    let ds = Dataset::generate(&SyntheticSpec::from_config(config))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pairs = Vec::new();
    for (qi, q) in ds.queries.iter().enumerate() {
        for p in ds.database(qi) {
            pairs.push((p.hamming(q)? as u32, obfuscated_distance(p, q, config.l, &mut rng)?.m));
        }
    }
    Ok(obfuscation_stats(&pairs, config.r))
}

/// Writes every report file into `dir` and returns the summary text.
pub fn write_report(config: &Config, dir: &Path) -> Result<String> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let s = config.params().s() as u32;
    let echo = config.echo();

    let mut csv = echo.clone();
    csv.push_str("c_n,t,bound\n");
    for p in bound_curve(s, config.c_r) {
        writeln!(csv, "{},{},{:.6e}", p.c_n, p.t, p.bound)?;
    }
    fs::write(dir.join("fp_bound.csv"), csv)?;

    let pairs = prime_pairs(LEAKAGE_PAIRS, config.seed);
    let mut csv = echo.clone();
    csv.push_str("c_r,mean,stderr\n");
    for p in mi_vs_cr(&pairs, &LEAKAGE_CR)? {
        writeln!(csv, "{},{:.6},{:.6}", p.c_r, p.mean, p.std_error)?;
    }
    fs::write(dir.join("mi_vs_cr.csv"), csv)?;

    let mut csv = echo.clone();
    csv.push_str("n1,n2,mi\n");
    for (a, b, i) in mi_grid(GRID_CR)? {
        writeln!(csv, "{a},{b},{i:.6}")?;
    }
    fs::write(dir.join("mi_grid.csv"), csv)?;

    let stats = d_vs_m(config)?;
    let mut csv = echo.clone();
    csv.push_str("d,m,count\n");
    for ((d, m), n) in &stats.joint {
        writeln!(csv, "{d},{m},{n}")?;
    }
    fs::write(dir.join("d_vs_m.csv"), csv)?;

    let lsh = privacy_gain_lsh_sampling(config.d, config.lsh_s, config.lsh_l, 10_000, config.seed)?;
    let mont = privacy_gain_montgomery(config.lsh_l, config.lsh_s as u32, config.c_r, config.c_n, 4, 5, 2000, config.seed)?;
    let multi = stats.distinct_m_per_d().values().filter(|&&n| n >= 2).count();
    let mut summary = echo;
    writeln!(summary, "segments_gain_bits = {}", privacy_gain_segments(config.l))?;
    writeln!(summary, "lsh_gain_bits = {:.3}", lsh.mean)?;
    writeln!(summary, "lsh_gain_stderr = {:.3}", lsh.std_error)?;
    writeln!(summary, "lsh_gain_closed_form = {:.3}", lsh.closed_form)?;
    writeln!(summary, "montgomery_entropy_per_substring = {:.4}", mont.per_substring)?;
    writeln!(summary, "montgomery_entropy_stderr = {:.4}", mont.std_error)?;
    writeln!(summary, "montgomery_gain_bits = {:.2}", mont.total)?;
    writeln!(summary, "d_values_with_several_m = {multi}")?;
    writeln!(summary, "pairs = {}", stats.total)?;
    fs::write(dir.join("summary.txt"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_decreases_in_cn() {
        let curve = bound_curve(14, 15);
        for t in 1..=3 {
            let b: Vec<f64> = curve.iter().filter(|p| p.t == t).map(|p| p.bound).collect();
            assert!(b.len() > 3);
            assert!(b.windows(2).all(|w| w[1] < w[0]), "T = {t}: {b:?}");
        }
        let p = curve.iter().find(|p| p.t == 2 && p.c_n == 15).unwrap();
        assert!(p.bound < 7.44e-8);
    }

    #[test]
    fn pairs_are_distinct_primes() {
        for (a, b) in prime_pairs(20, 3) {
            assert_ne!(a, b);
            assert!(a < 2048 && b < 2048);
        }
    }
}
