//! Binary-channel calibration and Neyman-Pearson analysis.
//!
//! A record is declared an `r`-neighbour when its `pi` value reaches a
//! threshold `eta`. The channel's false-alarm rate `lambda0` and miss rate
//! `lambda1` are estimated from labelled pairs; `eta` is picked to minimise
//! their sum, and the deployed rule accepts exactly when `m >= mu`.

use serde::{Deserialize, Serialize};

use crate::distance::{in_inference_region, inference_floor, mu_threshold, pi_value};
use crate::error::{invalid, Error, Result};

/// Calibrated detection parameters for one Hamming radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub r: u32,
    #[serde(rename = "L")]
    pub l: u32,
    pub s: u32,
    pub eta: f64,
    pub mu: u32,
    pub lambda0: f64,
    pub lambda1: f64,
}

impl ChannelProfile {
    /// Builds a profile from an already chosen `eta`, deriving `mu`.
    pub fn from_eta(r: u32, l: u32, s: u32, eta: f64, lambda0: f64, lambda1: f64) -> Result<Self> {
        let mu = mu_threshold(eta, l, s, r)?.clamp(inference_floor(l, r), l + 1);
        Ok(Self { r, l, s, eta, mu, lambda0, lambda1 })
    }

    /// Estimates the pmfs of `pi` from labelled `(m, is_neighbour)` pairs and
    /// picks the error-minimising threshold.
    ///
    /// Pairs outside the inference region are dropped first; they can never
    /// be neighbours.
    pub fn calibrate(pairs: &[(u32, bool)], l: u32, s: u32, r: u32) -> Result<Self> {
        let in_region: Vec<(u32, bool)> =
            pairs.iter().copied().filter(|&(m, _)| in_inference_region(m, l, r)).collect();
        let hist = estimate_pi_pmfs(&in_region, l, s, r)?;
        let choice = select_eta(&hist);
        Self::from_eta(r, l, s, choice.eta, choice.lambda0, choice.lambda1)
    }

    /// Inference-region check followed by the deployed rule `m >= mu`.
    pub fn decide(&self, m: u32) -> bool {
        decide(m, self)
    }
}

/// `true` iff the record is accepted as an `r`-neighbour.
pub fn decide(m: u32, profile: &ChannelProfile) -> bool {
    m >= inference_floor(profile.l, profile.r) && m >= profile.mu
}

/// Empirical pmfs of `pi` under the non-neighbour (H0) and neighbour (H1) hypotheses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiHistogramPair {
    pub support: Vec<f64>,
    pub pmf_h0: Vec<f64>,
    pub pmf_h1: Vec<f64>,
    pub count_h0: usize,
    pub count_h1: usize,
}

pub fn estimate_pi_pmfs(labeled: &[(u32, bool)], l: u32, s: u32, r: u32) -> Result<PiHistogramPair> {
    let mut pis = Vec::with_capacity(labeled.len());
    for &(m, neighbour) in labeled {
        pis.push((pi_value(m, l, s, r)?, neighbour));
    }
    let count_h1 = pis.iter().filter(|p| p.1).count();
    let count_h0 = pis.len() - count_h1;
    if count_h0 == 0 || count_h1 == 0 {
        return Err(Error::InsufficientData(format!(
            "need both classes in the inference region, have {count_h0} non-neighbours and {count_h1} neighbours"
        )));
    }
    let mut support: Vec<f64> = pis.iter().map(|p| p.0).collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    let mut pmf_h0 = vec![0.0; support.len()];
    let mut pmf_h1 = vec![0.0; support.len()];
    for (pi, neighbour) in pis {
        let at = support.binary_search_by(|x| x.total_cmp(&pi)).expect("support value");
        if neighbour {
            pmf_h1[at] += 1.0;
        } else {
            pmf_h0[at] += 1.0;
        }
    }
    pmf_h0.iter_mut().for_each(|p| *p /= count_h0 as f64);
    pmf_h1.iter_mut().for_each(|p| *p /= count_h1 as f64);
    Ok(PiHistogramPair { support, pmf_h0, pmf_h1, count_h0, count_h1 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaChoice {
    pub eta: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

impl PiHistogramPair {
    /// Thresholds worth trying: one below the smallest support value, the
    /// midpoints between neighbours, and one above the largest.
    pub fn candidate_thresholds(&self) -> Vec<f64> {
        let first = self.support[0];
        let last = *self.support.last().expect("non-empty support");
        let mut out = Vec::with_capacity(self.support.len() + 1);
        out.push(first / 2.0);
        out.extend(self.support.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        out.push(if last < 1.0 { (last + 1.0) / 2.0 } else { 1.0 + f64::EPSILON });
        out
    }

    /// `(lambda0, lambda1)` when accepting `pi >= eta`.
    pub fn error_rates(&self, eta: f64) -> (f64, f64) {
        let mut lambda0 = 0.0;
        let mut lambda1 = 0.0;
        for (i, &pi) in self.support.iter().enumerate() {
            if pi >= eta {
                lambda0 += self.pmf_h0[i];
            } else {
                lambda1 += self.pmf_h1[i];
            }
        }
        (lambda0, lambda1)
    }
}

/// Threshold minimising `lambda0 + lambda1`; ties go to the smallest `eta`.
pub fn select_eta(hist: &PiHistogramPair) -> EtaChoice {
    let n = hist.support.len();
    // suffix sums give lambda0 for the candidate just below support[i]
    let mut tail_h0 = vec![0.0; n + 1];
    let mut head_h1 = vec![0.0; n + 1];
    for i in (0..n).rev() {
        tail_h0[i] = tail_h0[i + 1] + hist.pmf_h0[i];
    }
    for i in 0..n {
        head_h1[i + 1] = head_h1[i] + hist.pmf_h1[i];
    }
    let candidates = hist.candidate_thresholds();
    let mut best = EtaChoice { eta: candidates[0], lambda0: tail_h0[0], lambda1: head_h1[0] };
    for (i, &eta) in candidates.iter().enumerate().skip(1) {
        let (lambda0, lambda1) = (tail_h0[i], head_h1[i]);
        if lambda0 + lambda1 < best.lambda0 + best.lambda1 - 1e-12 {
            best = EtaChoice { eta, lambda0, lambda1 };
        }
    }
    best
}

/// A randomised Neyman-Pearson rule on the binary observation `Y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NpRule {
    /// Probability of accepting H1 after observing `y = 1`.
    pub accept_given_y1: f64,
    /// Probability of accepting H1 after observing `y = 0`.
    pub accept_given_y0: f64,
    pub detection_probability: f64,
}

/// Most powerful rule at significance level `alpha` for the channel `(lambda0, lambda1)`.
pub fn np_rule(lambda0: f64, lambda1: f64, alpha: f64) -> Result<NpRule> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha = {alpha} must lie in [0, 1]")));
    }
    if !(0.0..=1.0).contains(&lambda0) || !(0.0..=1.0).contains(&lambda1) {
        return Err(invalid("channel error rates must lie in [0, 1]"));
    }
    if lambda0 + lambda1 >= 1.0 {
        return Err(Error::DegenerateChannel(lambda0 + lambda1));
    }
    Ok(if alpha < lambda0 {
        NpRule {
            accept_given_y1: alpha / lambda0,
            accept_given_y0: 0.0,
            detection_probability: alpha * (1.0 - lambda1) / lambda0,
        }
    } else {
        // lambda0 + lambda1 < 1 forces lambda0 < 1 here
        let spill = (alpha - lambda0) / (1.0 - lambda0);
        NpRule {
            accept_given_y1: 1.0,
            accept_given_y0: spill,
            detection_probability: 1.0 - lambda1 + lambda1 * spill,
        }
    })
}

/// Likelihood ratio `p1(y) / p0(y)` of the binary channel.
pub fn likelihood_ratio(lambda0: f64, lambda1: f64, y: bool) -> Result<f64> {
    if !(lambda0 > 0.0 && lambda0 < 1.0 && lambda1 > 0.0 && lambda1 < 1.0) {
        return Err(Error::DivisionByZero(format!(
            "likelihood ratio needs 0 < lambda0, lambda1 < 1, got ({lambda0}, {lambda1})"
        )));
    }
    Ok(if y { (1.0 - lambda1) / lambda0 } else { lambda1 / (1.0 - lambda0) })
}

/// Checks that profiles for increasing radii have strictly decreasing `mu`.
pub fn check_rank_profiles(profiles: &[ChannelProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::InvalidProfiles("at least one profile is required".into()));
    }
    for w in profiles.windows(2) {
        if w[1].r <= w[0].r {
            return Err(Error::InvalidProfiles(format!("radii must increase: {} then {}", w[0].r, w[1].r)));
        }
        if w[1].mu >= w[0].mu {
            return Err(Error::InvalidProfiles(format!(
                "mu must strictly decrease with the radius: {} (r = {}) then {} (r = {})",
                w[0].mu, w[0].r, w[1].mu, w[1].r
            )));
        }
        if w[1].l != w[0].l {
            return Err(Error::InvalidProfiles("all profiles must share L".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_profile() -> ChannelProfile {
        ChannelProfile::from_eta(50, 30, 14, 0.1144, 0.082, 0.036).unwrap()
    }

    #[test]
    fn point_mass_at_full_count() {
        let pairs = vec![(30, true), (30, true), (10, false)];
        let h = estimate_pi_pmfs(&pairs, 30, 14, 50).unwrap();
        let at = h.support.iter().position(|&x| x == 51.0 / 61.0).unwrap();
        assert_eq!(h.pmf_h1[at], 1.0);
    }

    #[test]
    fn empty_class_is_insufficient() {
        let pairs = vec![(30, true), (29, true)];
        assert!(matches!(estimate_pi_pmfs(&pairs, 30, 14, 50), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn pmfs_normalised() {
        let pairs: Vec<(u32, bool)> = (0..500).map(|i| (5 + (i * 7) % 26, i % 3 == 0)).collect();
        let h = estimate_pi_pmfs(&pairs, 30, 14, 50).unwrap();
        assert!((h.pmf_h0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((h.pmf_h1.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(h.support.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn separable_channel() {
        let pairs = vec![(5, false), (8, false), (20, true), (30, true)];
        let h = estimate_pi_pmfs(&pairs, 30, 14, 50).unwrap();
        let c = select_eta(&h);
        assert_eq!((c.lambda0, c.lambda1), (0.0, 0.0));
    }

    #[test]
    fn indistinguishable_channel() {
        let pairs = vec![(10, false), (20, false), (10, true), (20, true)];
        let h = estimate_pi_pmfs(&pairs, 30, 14, 50).unwrap();
        for eta in h.candidate_thresholds() {
            let (a, b) = h.error_rates(eta);
            assert!((a + b - 1.0).abs() < 1e-12);
        }
        let c = select_eta(&h);
        assert_eq!(c.eta, h.candidate_thresholds()[0]);
    }

    #[test]
    fn np_rule_corners() {
        let (l0, l1) = (0.082, 0.036);
        let at = np_rule(l0, l1, l0).unwrap();
        assert_eq!((at.accept_given_y1, at.accept_given_y0), (1.0, 0.0));
        assert!((at.detection_probability - (1.0 - l1)).abs() < 1e-15);
        let zero = np_rule(l0, l1, 0.0).unwrap();
        assert_eq!((zero.accept_given_y1, zero.accept_given_y0, zero.detection_probability), (0.0, 0.0, 0.0));
        let one = np_rule(l0, l1, 1.0).unwrap();
        assert_eq!((one.accept_given_y1, one.accept_given_y0), (1.0, 1.0));
        assert!((one.detection_probability - 1.0).abs() < 1e-15);
        assert!(matches!(np_rule(0.6, 0.4, 0.1), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn likelihood_ratios() {
        let up = likelihood_ratio(0.082, 0.036, true).unwrap();
        assert!((up - 0.964 / 0.082).abs() < 1e-12);
        assert!((up - 11.756).abs() < 1e-3);
        let down = likelihood_ratio(0.082, 0.036, false).unwrap();
        assert!((down - 0.036 / 0.918).abs() < 1e-12);
        assert!((down - 0.0392).abs() < 1e-4);
        assert_eq!(likelihood_ratio(0.5, 0.5, true).unwrap(), 1.0);
        assert_eq!(likelihood_ratio(0.5, 0.5, false).unwrap(), 1.0);
        assert!(likelihood_ratio(0.0, 0.5, true).is_err());
        assert!(likelihood_ratio(0.5, 1.0, false).is_err());
    }

    #[test]
    fn decisions_against_table_profile() {
        let p = table_profile();
        assert_eq!(p.mu, 16);
        assert!(p.decide(30));
        assert!(!p.decide(15));
        assert!(p.decide(16));
        assert!(!p.decide(0));
    }

    #[test]
    fn rank_profiles_must_nest() {
        let mk = |r, mu| ChannelProfile { r, l: 30, s: 14, eta: 0.1, mu, lambda0: 0.0, lambda1: 0.0 };
        assert!(check_rank_profiles(&[mk(30, 22), mk(40, 19), mk(50, 16)]).is_ok());
        assert!(check_rank_profiles(&[mk(30, 22), mk(40, 22)]).is_err());
        assert!(check_rank_profiles(&[mk(40, 19), mk(30, 22)]).is_err());
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(u32, bool)>> {
        prop::collection::vec((5u32..=30, any::<bool>()), 2..300)
            .prop_filter("both classes", |v| v.iter().any(|p| p.1) && v.iter().any(|p| !p.1))
    }

    proptest! {
        #[test]
        fn select_eta_matches_exhaustive_sweep(pairs in arb_pairs()) {
            let h = estimate_pi_pmfs(&pairs, 30, 14, 50).unwrap();
            let got = select_eta(&h);
            // brute force: direct error counts on the raw pairs at every candidate
            let n0 = pairs.iter().filter(|p| !p.1).count() as f64;
            let n1 = pairs.iter().filter(|p| p.1).count() as f64;
            let mut best: Option<(f64, f64)> = None;
            for eta in h.candidate_thresholds() {
                let fa = pairs.iter().filter(|p| !p.1 && pi_value(p.0, 30, 14, 50).unwrap() >= eta).count() as f64 / n0;
                let miss = pairs.iter().filter(|p| p.1 && pi_value(p.0, 30, 14, 50).unwrap() < eta).count() as f64 / n1;
                if best.is_none_or(|b| fa + miss < b.1 - 1e-12) {
                    best = Some((eta, fa + miss));
                }
            }
            let (eta, total) = best.unwrap();
            prop_assert_eq!(got.eta, eta);
            prop_assert!((got.lambda0 + got.lambda1 - total).abs() < 1e-9);
        }

        #[test]
        fn decide_matches_pi_test(pairs in arb_pairs()) {
            let p = ChannelProfile::calibrate(&pairs, 30, 14, 50).unwrap();
            for m in inference_floor(30, 50)..=30 {
                prop_assert_eq!(p.decide(m), pi_value(m, 30, 14, 50).unwrap() >= p.eta);
            }
        }

        #[test]
        fn detection_probability_monotone(l0 in 0.001f64..0.5, l1 in 0.0f64..0.49) {
            let mut prev = 0.0;
            for k in 0..=200 {
                let alpha = k as f64 / 200.0;
                let pd = np_rule(l0, l1, alpha).unwrap().detection_probability;
                prop_assert!(pd + 1e-12 >= prev);
                prev = pd;
            }
            let below = np_rule(l0, l1, l0 * (1.0 - 1e-9)).unwrap().detection_probability;
            let at = np_rule(l0, l1, l0).unwrap().detection_probability;
            prop_assert!((below - at).abs() < 1e-6);
        }
    }
}
