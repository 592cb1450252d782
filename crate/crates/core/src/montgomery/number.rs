//! Small number-theory helpers: sieve, primality, gcd and modular inverse.

use crate::error::{invalid, Error, Result};

/// All primes strictly below `limit`, ascending.
///
/// Sieve of Eratosthenes; intended for limits up to a few times `2^20`.
pub fn primes_below(limit: u64) -> Vec<u64> {
    if limit < 3 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n];
    let mut i = 2;
    while i * i < n {
        if !composite[i] {
            let mut j = i * i;
            while j < n {
                composite[j] = true;
                j += i;
            }
        }
        i += 1;
    }
    (2..n).filter(|&k| !composite[k]).map(|k| k as u64).collect()
}

/// Deterministic trial-division primality test, fine for 32-bit moduli.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `a^-1 mod n` in `(0, n)`.
pub fn modular_inverse(a: u64, n: u64) -> Result<u64> {
    if n < 2 {
        return Err(invalid(format!("modulus {n} must be at least 2")));
    }
    let (mut old_r, mut r) = ((a % n) as i128, n as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(Error::NoInverse { a, n });
    }
    Ok(old_s.rem_euclid(n as i128) as u64)
}
