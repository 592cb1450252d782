use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::entropy_bits;
use crate::error::{invalid, Error, Result};
use crate::montgomery::{gcd, modular_inverse};

/// Largest substring length the exact enumeration accepts.
pub const EXACT_MAX_S: u32 = 10;
/// Largest modulus the exact enumeration accepts.
pub const EXACT_MAX_MODULUS: u64 = 1 << 11;
const EXACT_MAX_C_R: u32 = 24;
const MC_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// Leakage of a uniformly distributed `s`-bit substring through independent
/// Montgomery signatures, in bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub s: u32,
    pub c_r: u32,
    pub moduli: Vec<u64>,
    pub mutual_information: f64,
    pub conditional_entropy: f64,
    pub method: Method,
    pub samples: Option<usize>,
    pub std_error: Option<f64>,
}

/// Number of multipliers `R` in `(0, 2^c_r)` coprime to the prime `n` with
/// `R = rho (mod n)`.
pub fn multiplier_count(rho: u64, n: u64, c_r: u32) -> u64 {
    let k = (1u64 << c_r) - 1;
    let rho = rho % n;
    if rho == 0 || rho > k {
        0
    } else {
        (k - rho) / n + 1
    }
}

/// `p(gamma | x)` for every `x` in `[0, 2^s)`, as sparse `(gamma, p)` rows,
/// built by enumerating every multiplier in `(0, 2^c_r)` coprime to `n`.
pub fn conditional_pmfs(s: u32, c_r: u32, n: u64) -> Vec<Vec<(u32, f64)>> {
    let eligible: Vec<u64> = (1..1u64 << c_r).filter(|&r| gcd(r, n) == 1).collect();
    let total = eligible.len() as f64;
    let mut counts = vec![0u32; n as usize];
    (0..1u64 << s)
        .map(|x| {
            counts.iter_mut().for_each(|c| *c = 0);
            let xr = x % n;
            for &r in &eligible {
                counts[(xr * r % n) as usize] += 1;
            }
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(g, &c)| (g as u32, c as f64 / total))
                .collect()
        })
        .collect()
}

fn check_exact(s: u32, c_r: u32, moduli: &[u64]) -> Result<()> {
    if s == 0 || c_r == 0 {
        return Err(invalid("s and c_R must be positive"));
    }
    if s > EXACT_MAX_S || c_r > EXACT_MAX_C_R || moduli.iter().any(|&n| n > EXACT_MAX_MODULUS) {
        return Err(Error::BudgetExceeded(format!(
            "exact enumeration needs s <= {EXACT_MAX_S}, c_R <= {EXACT_MAX_C_R}, N <= {EXACT_MAX_MODULUS}; use the Monte Carlo estimator"
        )));
    }
    if moduli.iter().any(|&n| n < 2) {
        return Err(invalid("moduli must be at least 2"));
    }
    Ok(())
}

/// `I(X; Gamma_1, Gamma_2)` by full enumeration of `x` and both multipliers'
/// conditional distributions.
///
/// `H(Gamma_1, Gamma_2)` comes from the dense `N1 x N2` marginal and
/// `H(Gamma_1, Gamma_2 | X)` from the product form of the conditionals.
pub fn mutual_information_exact(s: u32, c_r: u32, n1: u64, n2: u64) -> Result<LeakageReport> {
    check_exact(s, c_r, &[n1, n2])?;
    let rows1 = conditional_pmfs(s, c_r, n1);
    let rows2 = conditional_pmfs(s, c_r, n2);
    let px = 1.0 / (1u64 << s) as f64;
    let width = n2 as usize;
    let mut marginal = vec![0.0f64; n1 as usize * width];
    let mut h_given_x = 0.0;
    for (r1, r2) in rows1.iter().zip(&rows2) {
        for &(g1, p1) in r1 {
            let row = &mut marginal[g1 as usize * width..(g1 as usize + 1) * width];
            let w = p1 * px;
            for &(g2, p2) in r2 {
                row[g2 as usize] += w * p2;
            }
        }
        let p1: Vec<f64> = r1.iter().map(|e| e.1).collect();
        let p2: Vec<f64> = r2.iter().map(|e| e.1).collect();
        h_given_x += px * (entropy_bits(&p1) + entropy_bits(&p2));
    }
    let mi = entropy_bits(&marginal) - h_given_x;
    Ok(LeakageReport {
        s,
        c_r,
        moduli: vec![n1, n2],
        mutual_information: mi,
        conditional_entropy: s as f64 - mi,
        method: Method::Exact,
        samples: None,
        std_error: None,
    })
}

struct Channel {
    n: u64,
    eligible: f64,
    /// `x^-1 mod n` for every `x` in `[0, 2^s)`, zero where `x = 0 (mod n)`.
    inverses: Vec<u64>,
}

impl Channel {
    fn new(n: u64, s: u32, c_r: u32) -> Result<Self> {
        let k = (1u64 << c_r) - 1;
        let inverses = (0..1u64 << s)
            .map(|x| if x % n == 0 { Ok(0) } else { modular_inverse(x, n) })
            .collect::<Result<_>>()?;
        Ok(Self { n, eligible: (k - k / n) as f64, inverses })
    }

    /// `p(gamma | x')`.
    fn likelihood(&self, gamma: u64, x: usize, c_r: u32) -> f64 {
        let inv = self.inverses[x];
        match (inv, gamma) {
            (0, 0) => 1.0,
            (0, _) | (_, 0) => 0.0,
            _ => multiplier_count(gamma * inv % self.n, self.n, c_r) as f64 / self.eligible,
        }
    }
}

/// Monte Carlo estimate of `H(X | Gamma_1, ..., Gamma_T)` for a uniform
/// `s`-bit `X` and one signature per modulus.
///
/// Each sample draws `x` and fresh multipliers, then evaluates the exact
/// posterior over all `2^s` candidates from closed-form multiplier counts.
pub fn conditional_entropy_mc(s: u32, c_r: u32, moduli: &[u64], samples: usize, seed: u64) -> Result<LeakageReport> {
    if s == 0 || s > 20 || c_r == 0 || c_r > 31 {
        return Err(invalid(format!("unsupported s = {s}, c_R = {c_r}")));
    }
    if moduli.is_empty() || moduli.iter().any(|&n| n < 2 || n >= 1 << 31) {
        return Err(invalid("moduli must lie in [2, 2^31)"));
    }
    if samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    let channels = moduli.iter().map(|&n| Channel::new(n, s, c_r)).collect::<Result<Vec<_>>>()?;
    let k = (1u64 << c_r) - 1;
    let chunks = samples.div_ceil(MC_CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut post = vec![0.0f64; 1 << s];
            let mut gammas = vec![0u64; channels.len()];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                let x = rng.random_range(0..1u64 << s);
                for (g, ch) in gammas.iter_mut().zip(&channels) {
                    let r = loop {
                        let r = rng.random_range(1..=k);
                        if r % ch.n != 0 {
                            break r;
                        }
                    };
                    *g = x % ch.n * r % ch.n;
                }
                for (xp, p) in post.iter_mut().enumerate() {
                    *p = gammas.iter().zip(&channels).map(|(&g, ch)| ch.likelihood(g, xp, c_r)).product();
                }
                let total: f64 = post.iter().sum();
                if total <= 0.0 {
                    return Err(Error::Internal(format!("zero-probability signature tuple {gammas:?}")));
                }
                post.iter_mut().for_each(|p| *p /= total);
                let h = entropy_bits(&post);
                sum += h;
                sum_sq += h * h;
            }
            Ok((sum, sum_sq))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sum, sum_sq) = sums.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(LeakageReport {
        s,
        c_r,
        moduli: moduli.to_vec(),
        mutual_information: s as f64 - mean,
        conditional_entropy: mean,
        method: Method::MonteCarlo,
        samples: Some(samples),
        std_error: Some((var / n).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montgomery::primes_below;
    use std::collections::HashMap;

    /// Joint distribution of `(x, gamma_1, gamma_2)` by enumerating every
    /// `(x, R_1, R_2)` triple.
    fn naive_mi(s: u32, c_r: u32, n1: u64, n2: u64) -> f64 {
        let r1: Vec<u64> = (1..1u64 << c_r).filter(|r| r % n1 != 0).collect();
        let r2: Vec<u64> = (1..1u64 << c_r).filter(|r| r % n2 != 0).collect();
        let total = ((1u64 << s) * r1.len() as u64 * r2.len() as u64) as f64;
        let mut joint: HashMap<(u64, u64, u64), u64> = HashMap::new();
        for x in 0..1u64 << s {
            for &a in &r1 {
                for &b in &r2 {
                    *joint.entry((x, x * a % n1, x * b % n2)).or_default() += 1;
                }
            }
        }
        let mut marg: HashMap<(u64, u64), u64> = HashMap::new();
        for (&(_, g1, g2), &c) in &joint {
            *marg.entry((g1, g2)).or_default() += c;
        }
        let h = |counts: Vec<u64>| -> f64 {
            counts.into_iter().map(|c| c as f64 / total).map(|p| -p * p.log2()).sum()
        };
        let h_joint = h(joint.into_values().collect());
        let h_marg = h(marg.into_values().collect());
        s as f64 + h_marg - h_joint
    }

    #[test]
    fn parity_channel_leaks_one_bit() {
        for s in 1..=4 {
            let rep = mutual_information_exact(s, 1, 2, 2).unwrap();
            assert!((rep.mutual_information - 1.0).abs() < 1e-12);
            assert!((rep.conditional_entropy - (s as f64 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_matches_naive_enumeration() {
        let exact = mutual_information_exact(4, 8, 251, 251).unwrap().mutual_information;
        let naive = naive_mi(4, 8, 251, 251);
        assert!((exact - naive).abs() < 1e-9, "{exact} vs {naive}");
        for (n1, n2, c_r) in [(7, 13, 5), (31, 3, 6), (127, 251, 9)] {
            let exact = mutual_information_exact(4, c_r, n1, n2).unwrap().mutual_information;
            assert!((exact - naive_mi(4, c_r, n1, n2)).abs() < 1e-9);
        }
    }

    #[test]
    fn budget_enforced() {
        assert!(matches!(mutual_information_exact(11, 8, 251, 251), Err(Error::BudgetExceeded(_))));
        assert!(matches!(mutual_information_exact(4, 8, 4099, 251), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn closed_form_counts_match_enumeration() {
        for n in [2u64, 3, 7, 251, 2039] {
            for c_r in [1u32, 3, 8, 12] {
                let mut counts = vec![0u64; n as usize];
                for r in (1..1u64 << c_r).filter(|r| r % n != 0) {
                    counts[(r % n) as usize] += 1;
                }
                for rho in 0..n {
                    assert_eq!(multiplier_count(rho, n, c_r), counts[rho as usize], "n={n} c_r={c_r} rho={rho}");
                }
            }
        }
    }

    #[test]
    fn mc_agrees_with_exact() {
        for (c_r, n1, n2) in [(4, 251, 241), (8, 17, 1523), (10, 673, 2003)] {
            let exact = mutual_information_exact(4, c_r, n1, n2).unwrap();
            let mc = conditional_entropy_mc(4, c_r, &[n1, n2], 20_000, 9).unwrap();
            let se = mc.std_error.unwrap();
            let diff = (mc.conditional_entropy - exact.conditional_entropy).abs();
            assert!(diff <= 3.0 * se + 1e-9, "c_r={c_r}: diff {diff}, se {se}");
        }
    }

    #[test]
    fn single_multiplier_is_deterministic() {
        // c_R = 1 forces R = 1, so gamma = x mod N and the posterior is exact.
        let mc = conditional_entropy_mc(4, 1, &[5], 2000, 3).unwrap();
        let exact = mutual_information_exact(4, 1, 5, 5).unwrap();
        // x mod 5 leaves residue classes of sizes 4, 3, 3, 3, 3 in [0, 16).
        let expected = (4.0 * 2.0 + 12.0 * 3f64.log2()) / 16.0;
        assert!((exact.conditional_entropy - expected).abs() < 1e-12);
        assert!((mc.conditional_entropy - expected).abs() <= 3.0 * mc.std_error.unwrap() + 1e-9);
    }

    #[test]
    fn mc_deterministic_for_seed() {
        let primes = primes_below(1 << 15);
        let moduli = [primes[100], primes[2000]];
        let a = conditional_entropy_mc(6, 15, &moduli, 1000, 42).unwrap();
        let b = conditional_entropy_mc(6, 15, &moduli, 1000, 42).unwrap();
        assert_eq!(a, b);
    }
}
