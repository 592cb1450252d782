use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::entropy_bits;
use super::leakage::{conditional_entropy_mc, LeakageReport};
use crate::error::{invalid, Result};
use crate::montgomery::{draw_moduli, PrimeTable};

/// Gain from indexing the raw variant sets: each substring is one of two
/// equally likely values, so each contributes one bit.
pub fn privacy_gain_segments(l: usize) -> f64 {
    (0..l).map(|_| entropy_bits(&[0.5, 0.5])).sum()
}

/// Unsampled bit positions under random bit sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LshGain {
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `D (1 - s/D)^L`.
    pub closed_form: f64,
}

const LSH_CHUNK: usize = 1024;

/// Mean number of bit positions never sampled when each of `l` tables
/// samples `s` distinct positions of a `d`-bit code, tables drawn
/// independently.
pub fn privacy_gain_lsh_sampling(d: usize, s: usize, l: usize, trials: usize, seed: u64) -> Result<LshGain> {
    if s > d || d == 0 || trials == 0 {
        return Err(invalid(format!("need 0 < s <= D and trials > 0, got D = {d}, s = {s}, trials = {trials}")));
    }
    let chunks = trials.div_ceil(LSH_CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut seen = vec![false; d];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..LSH_CHUNK.min(trials - c * LSH_CHUNK) {
                seen.iter_mut().for_each(|b| *b = false);
                for _ in 0..l {
                    for pos in sample(&mut rng, d, s) {
                        seen[pos] = true;
                    }
                }
                let unseen = seen.iter().filter(|&&b| !b).count() as f64;
                sum += unseen;
                sum_sq += unseen * unseen;
            }
            (sum, sum_sq)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(LshGain {
        trials,
        mean,
        std_error: (var / n).sqrt(),
        closed_form: d as f64 * (1.0 - s as f64 / d as f64).powi(l as i32),
    })
}

/// Gain from Montgomery-domain indexing: `L` times the per-substring
/// conditional entropy, averaged over random moduli draws.
///
/// Multiplying by `L` treats the substrings' posteriors as independent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MontgomeryGain {
    pub l: usize,
    pub per_substring: f64,
    /// Monte Carlo standard error of `per_substring`.
    pub std_error: f64,
    pub total: f64,
    pub draws: Vec<LeakageReport>,
}

#[allow(clippy::too_many_arguments)]
pub fn privacy_gain_montgomery(
    l: usize,
    s: u32,
    c_r: u32,
    c_n: u32,
    signatures: usize,
    draws: usize,
    samples: usize,
    seed: u64,
) -> Result<MontgomeryGain> {
    if draws == 0 {
        return Err(invalid("at least one moduli draw is required"));
    }
    let primes = PrimeTable::new(c_n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(draws);
    for k in 0..draws {
        let moduli = draw_moduli(&primes, signatures, &mut rng)?;
        reports.push(conditional_entropy_mc(s, c_r, &moduli, samples, seed.wrapping_add(k as u64 + 1))?);
    }
    let n = draws as f64;
    let per_substring = reports.iter().map(|r| r.conditional_entropy).sum::<f64>() / n;
    let std_error = reports.iter().map(|r| r.std_error.unwrap_or(0.0).powi(2)).sum::<f64>().sqrt() / n;
    Ok(MontgomeryGain { l, per_substring, std_error, total: l as f64 * per_substring, draws: reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_gain_is_l() {
        assert_eq!(privacy_gain_segments(50), 50.0);
        assert_eq!(privacy_gain_segments(1), 1.0);
    }

    #[test]
    fn no_tables_reveal_nothing() {
        let g = privacy_gain_lsh_sampling(400, 8, 0, 100, 1).unwrap();
        assert_eq!(g.mean, 400.0);
        assert_eq!(g.closed_form, 400.0);
    }

    #[test]
    fn sampling_converges_to_closed_form() {
        let g = privacy_gain_lsh_sampling(64, 4, 10, 20_000, 5).unwrap();
        assert!((g.mean - g.closed_form).abs() < 4.0 * g.std_error, "{g:?}");
    }

    #[test]
    fn sampling_is_seeded() {
        let a = privacy_gain_lsh_sampling(100, 5, 7, 3000, 11).unwrap();
        assert_eq!(a, privacy_gain_lsh_sampling(100, 5, 7, 3000, 11).unwrap());
    }
}
