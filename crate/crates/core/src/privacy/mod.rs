//! Leakage and privacy-gain measurements.
//!
//! [`mutual_information_exact`] and [`conditional_entropy_mc`] quantify how
//! much a substring's Montgomery signatures reveal about it. The gain
//! functions compare the uncertainty left in a full code after publishing the
//! index, and [`obfuscation_stats`] tabulates how the obfuscated measure `m`
//! spreads over true distances.

mod gain;
mod leakage;
mod obfuscation;

pub use gain::{privacy_gain_lsh_sampling, privacy_gain_montgomery, privacy_gain_segments, LshGain, MontgomeryGain};
pub use leakage::{
    conditional_entropy_mc, conditional_pmfs, mutual_information_exact, multiplier_count, LeakageReport, Method,
    EXACT_MAX_MODULUS, EXACT_MAX_S,
};
pub use obfuscation::{obfuscation_stats, ObfuscationStats};

/// Shannon entropy in bits of a probability vector; zero entries are skipped.
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_bits(&[0.5, 0.5]), 1.0);
        assert_eq!(entropy_bits(&[1.0, 0.0]), 0.0);
        assert!((entropy_bits(&[0.25; 4]) - 2.0).abs() < 1e-12);
    }
}
