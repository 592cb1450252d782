use super::number::primes_below;
use crate::error::{Error, Result};

/// Number of primes below `2^c_n`.
pub fn prime_count_below(c_n: u32) -> usize {
    primes_below(1u64 << c_n).len()
}

/// Bound `(s + c_R - 1) / nu(2^c_N)` on the probability that one signature of
/// two distinct `s`-bit values collides under a uniformly drawn prime modulus.
pub fn fp_bound(s: u32, c_r: u32, c_n: u32) -> Result<f64> {
    let nu = prime_count_below(c_n);
    if (s + c_r) as usize >= nu {
        return Err(Error::BoundInvalid(format!(
            "s + c_R = {} must be below the prime count {nu} for c_N = {c_n}",
            s + c_r
        )));
    }
    Ok((s + c_r - 1) as f64 / nu as f64)
}

/// Bound on a false match of all `T^2` nested signatures.
pub fn nested_fp_bound(s: u32, c_r: u32, c_n: u32, t: u32) -> Result<f64> {
    Ok(fp_bound(s + c_n, 2 * c_r, c_n)?.powi((t * t) as i32))
}
