//! The obfuscated distance measure `m` and the inference arithmetic built on it.
//!
//! For a record `p` and query `q` cut into `L` substrings, `m` counts the
//! substrings whose variant sets collide. The true Hamming distance is then
//! known only to lie in `[2(L - m), s(L - m) + 2m]`, and a record is a candidate
//! `r`-neighbour only when `m >= L - r/2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::code::{BitCode, SegmentationPlan};
use crate::error::{invalid, Error, Result};
use crate::variants::{collides_from_diff, draw_flip};

/// Collision-count sum of a record/query pair together with the interval it
/// implies for the Hamming distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObfuscatedDistance {
    pub m: u32,
    pub l: u32,
    pub s: u32,
}

impl ObfuscatedDistance {
    pub fn interval_low(&self) -> u32 {
        2 * (self.l - self.m)
    }

    pub fn interval_high(&self) -> u32 {
        self.s * (self.l - self.m) + 2 * self.m
    }

    pub fn contains(&self, d: u32) -> bool {
        self.interval_low() <= d && d <= self.interval_high()
    }
}

/// Database flip positions for every substring of a record, drawn in
/// substring order.
pub fn draw_flips<R: Rng + ?Sized>(plan: &SegmentationPlan, rng: &mut R) -> Vec<usize> {
    plan.lengths().iter().map(|&len| draw_flip(len, rng)).collect()
}

fn segment_collides(p: &BitCode, q: &BitCode, offset: usize, len: usize, flip: usize) -> bool {
    if len <= 64 {
        collides_from_diff(p.read_bits(offset, len) ^ q.read_bits(offset, len), flip)
    } else {
        let ps = p.slice(offset, len);
        let qs = q.slice(offset, len);
        match ps.hamming(&qs).expect("equal lengths") {
            0 | 1 => true,
            2 => ps.get(flip) != qs.get(flip),
            _ => false,
        }
    }
}

/// Per-substring collision indicators for `p` enrolled with `flips` against `q`.
pub fn collisions(p: &BitCode, q: &BitCode, plan: &SegmentationPlan, flips: &[usize]) -> Result<Vec<bool>> {
    if p.len() != q.len() || p.len() != plan.code_len() {
        return Err(invalid(format!(
            "length mismatch: record {}, query {}, plan {}",
            p.len(),
            q.len(),
            plan.code_len()
        )));
    }
    if flips.len() != plan.num_substrings() {
        return Err(invalid("one flip position per substring is required"));
    }
    Ok((0..plan.num_substrings())
        .map(|i| {
            let (offset, len) = plan.range(i);
            segment_collides(p, q, offset, len, flips[i])
        })
        .collect())
}

/// `m` for a record enrolled with the given flip positions.
pub fn collision_sum(p: &BitCode, q: &BitCode, plan: &SegmentationPlan, flips: &[usize]) -> Result<u32> {
    Ok(collisions(p, q, plan, flips)?.into_iter().filter(|&c| c).count() as u32)
}

/// Obfuscates `p` with fresh flip positions from `rng` and measures it against `q`.
pub fn obfuscated_distance<R: Rng + ?Sized>(
    p: &BitCode,
    q: &BitCode,
    l: usize,
    rng: &mut R,
) -> Result<ObfuscatedDistance> {
    if p.len() != q.len() {
        return Err(invalid(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    let plan = SegmentationPlan::new(p.len(), l)?;
    let flips = draw_flips(&plan, rng);
    let m = collision_sum(p, q, &plan, &flips)?;
    Ok(ObfuscatedDistance { m, l: l as u32, s: plan.max_len() as u32 })
}

/// Smallest `m` in the inference region for radius `r`, i.e. `ceil(L - r/2)`.
pub fn inference_floor(l: u32, r: u32) -> u32 {
    l.saturating_sub(r / 2)
}

pub fn in_inference_region(m: u32, l: u32, r: u32) -> bool {
    m <= l && m >= inference_floor(l, r)
}

/// Probability that a distance drawn uniformly from the concealment interval
/// of `m` does not exceed `r`.
///
/// Capped at 1 when the whole interval lies below `r`, which can only happen
/// for `r >= 2L`.
pub fn pi_value(m: u32, l: u32, s: u32, r: u32) -> Result<f64> {
    if s < 2 {
        return Err(invalid(format!("substring length s = {s} must be at least 2")));
    }
    if !in_inference_region(m, l, r) {
        return Err(Error::OutOfRegion { m, floor: inference_floor(l, r), l });
    }
    let a = 2 * (l - m) as i64;
    let b = s as i64 * (l - m) as i64 + 2 * m as i64;
    let num = r as i64 - a + 1;
    let den = b - a + 1;
    Ok((num as f64 / den as f64).min(1.0))
}

/// Integer threshold on `m` equivalent to testing `pi >= eta`.
pub fn mu_threshold(eta: f64, l: u32, s: u32, r: u32) -> Result<u32> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta = {eta} must lie in (0, 1)")));
    }
    if s < 2 {
        return Err(invalid(format!("substring length s = {s} must be at least 2")));
    }
    let (l, s, r) = (l as f64, s as f64, r as f64);
    let den = 2.0 + eta * (s - 4.0);
    if den <= 0.0 {
        return Err(invalid(format!("threshold denominator 2 + eta(s - 4) = {den} is not positive")));
    }
    let mu = ((eta * (s * l - 2.0 * l + 1.0) + 2.0 * l - 1.0 - r) / den).ceil();
    Ok(mu.max(0.0) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_codes_give_full_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = BitCode::random(400, &mut rng);
        for l in [1, 7, 30, 400] {
            let od = obfuscated_distance(&p, &p, l, &mut rng).unwrap();
            assert_eq!(od.m, l as u32);
            assert_eq!((od.interval_low(), od.interval_high()), (0, 2 * l as u32));
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = BitCode::random(40, &mut rng);
        let q = BitCode::random(41, &mut rng);
        assert!(obfuscated_distance(&p, &q, 4, &mut rng).is_err());
    }

    #[test]
    fn long_substrings_use_slow_path() {
        // L = 1 on 200 bits takes the slice-based branch
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = BitCode::random(200, &mut rng);
        let plan = SegmentationPlan::new(200, 1).unwrap();
        let mut q = p.clone();
        q.flip(150);
        assert_eq!(collision_sum(&p, &q, &plan, &[3]).unwrap(), 1);
        q.flip(20);
        assert_eq!(collision_sum(&p, &q, &plan, &[3]).unwrap(), 0);
        assert_eq!(collision_sum(&p, &q, &plan, &[20]).unwrap(), 1);
        q.flip(21);
        assert_eq!(collision_sum(&p, &q, &plan, &[20]).unwrap(), 0);
    }

    #[test]
    fn pi_reference_value() {
        let pi = pi_value(16, 30, 14, 50).unwrap();
        assert_eq!(pi, 23.0 / 201.0);
        assert_eq!(format!("{pi:.4}"), "0.1144");
    }

    #[test]
    fn pi_at_full_count() {
        assert_eq!(pi_value(30, 30, 14, 50).unwrap(), 51.0 / 61.0);
    }

    #[test]
    fn pi_at_lower_boundary() {
        // 2(L - m) = r: pi = 1 / (b - a + 1)
        let (l, s, r) = (30u32, 14u32, 40u32);
        let m = l - r / 2;
        let a = 2 * (l - m);
        let b = s * (l - m) + 2 * m;
        assert_eq!(pi_value(m, l, s, r).unwrap(), 1.0 / (b - a + 1) as f64);
    }

    #[test]
    fn pi_out_of_region() {
        assert!(matches!(pi_value(4, 30, 14, 50), Err(Error::OutOfRegion { .. })));
        assert!(matches!(pi_value(31, 30, 14, 50), Err(Error::OutOfRegion { .. })));
        assert!(pi_value(10, 30, 1, 50).is_err());
    }

    #[test]
    fn pi_closed_form_matches_rational_form() {
        for l in 1..20u32 {
            for s in 2..16u32 {
                for r in 0..2 * l {
                    for m in inference_floor(l, r).max(1)..=l {
                        let (lf, sf, rf, mf) = (l as f64, s as f64, r as f64, m as f64);
                        let closed = (2.0 - (2.0 * lf - 1.0 - rf) / mf) / ((sf * lf - 2.0 * lf + 1.0) / mf + 4.0 - sf);
                        let got = pi_value(m, l, s, r).unwrap();
                        assert!((closed - got).abs() < 1e-12, "l={l} s={s} r={r} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn mu_thresholds() {
        assert_eq!(mu_threshold(0.1144, 30, 14, 50).unwrap(), 16);
        assert_eq!(mu_threshold(0.1110, 30, 14, 40).unwrap(), 19);
        // pi(22) = 15/141 = 0.106383 falls just short of 0.1064, so the
        // exact threshold is 23.
        assert!(pi_value(22, 30, 14, 30).unwrap() < 0.1064);
        assert_eq!(mu_threshold(0.1064, 30, 14, 30).unwrap(), 23);
        assert_eq!(mu_threshold(0.10638, 30, 14, 30).unwrap(), 22);
    }

    #[test]
    fn mu_rejects_bad_parameters() {
        assert!(mu_threshold(0.0, 30, 14, 50).is_err());
        assert!(mu_threshold(1.0, 30, 14, 50).is_err());
        // s = 2: 2 + eta(-2) > 0 for eta < 1, so fine; s = 2 with eta near 1
        assert!(mu_threshold(0.99, 30, 2, 50).is_ok());
        assert!(mu_threshold(0.5, 30, 1, 50).is_err());
    }

    proptest! {
        #[test]
        fn interval_contains_true_distance(seed in any::<u64>(), d in 2usize..300, l_frac in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = 1 + ((d / 2 - 1) as f64 * l_frac) as usize; // keeps s >= 2
            let p = BitCode::random(d, &mut rng);
            let mut q = p.clone();
            let flips = rng.random_range(0..=d);
            for _ in 0..flips {
                let i = rng.random_range(0..d);
                q.flip(i);
            }
            let od = obfuscated_distance(&p, &q, l, &mut rng).unwrap();
            let dist = p.hamming(&q).unwrap() as u32;
            prop_assert!(od.m <= od.l);
            prop_assert!(od.contains(dist), "d={} m={} interval=[{}, {}]", dist, od.m, od.interval_low(), od.interval_high());
        }

        #[test]
        fn no_false_negatives_within_radius(seed in any::<u64>(), l in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = l * 6;
            let p = BitCode::random(d, &mut rng);
            let r = rng.random_range(0..2 * l);
            let mut q = p.clone();
            for i in rand::seq::index::sample(&mut rng, d, r) {
                q.flip(i);
            }
            let od = obfuscated_distance(&p, &q, l, &mut rng).unwrap();
            prop_assert!(od.m >= 1);
        }

        #[test]
        fn pi_strictly_increasing(l in 1u32..60, s in 3u32..20, r_frac in 0.0f64..1.0) {
            let r = ((2 * l - 1) as f64 * r_frac) as u32;
            let lo = inference_floor(l, r);
            for m in lo..l {
                prop_assert!(pi_value(m + 1, l, s, r).unwrap() > pi_value(m, l, s, r).unwrap());
            }
        }

        #[test]
        fn threshold_equivalence(l in 1u32..60, s in 2u32..20, r_frac in 0.0f64..1.0, eta in 0.001f64..0.999) {
            let r = ((2 * l - 1) as f64 * r_frac) as u32;
            if let Ok(mu) = mu_threshold(eta, l, s, r) {
                for m in inference_floor(l, r)..=l {
                    prop_assert_eq!(pi_value(m, l, s, r).unwrap() >= eta, m >= mu, "m={} mu={}", m, mu);
                }
            }
        }
    }
}
