use serde::{Deserialize, Serialize};

use super::number::{gcd, is_prime};
use super::MAX_PRODUCT_BITS;
use crate::code::BitCode;
use crate::error::{invalid, Result};

/// A modulus/multiplier pair `(N, R)` with the bit widths it was drawn under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Primitives {
    n: u64,
    r: u64,
    c_n: u32,
    c_r: u32,
}

impl Primitives {
    /// Validates `N` prime in `(0, 2^c_n)`, `R` in `(0, 2^c_r)` and `gcd(R, N) = 1`.
    pub fn new(n: u64, r: u64, c_n: u32, c_r: u32) -> Result<Self> {
        if c_n + c_r > MAX_PRODUCT_BITS {
            return Err(invalid(format!("c_N + c_R = {} exceeds {MAX_PRODUCT_BITS}", c_n + c_r)));
        }
        if !is_prime(n) || n >= 1 << c_n {
            return Err(invalid(format!("modulus {n} is not a prime below 2^{c_n}")));
        }
        if r == 0 || r >= 1 << c_r {
            return Err(invalid(format!("multiplier {r} is not in (0, 2^{c_r})")));
        }
        if gcd(r, n) != 1 {
            return Err(invalid(format!("multiplier {r} is not coprime to {n}")));
        }
        Ok(Self { n, r, c_n, c_r })
    }

    pub fn modulus(&self) -> u64 {
        self.n
    }

    pub fn multiplier(&self) -> u64 {
        self.r
    }

    pub fn c_n(&self) -> u32 {
        self.c_n
    }

    pub fn c_r(&self) -> u32 {
        self.c_r
    }
}

/// `(R, N)`-residue `xR mod N`.
#[inline]
pub fn residue(x: u64, prim: &Primitives) -> u64 {
    // (x mod N) * R < 2^(c_N + c_R) <= 2^62
    (x % prim.n) * prim.r % prim.n
}

/// Precomputed residues `M(2^b; R, N)` of single-bit values.
#[derive(Clone, Debug)]
pub struct ResidueTable {
    prim: Primitives,
    powers: Vec<u64>,
}

impl ResidueTable {
    pub fn new(prim: Primitives, max_len: usize) -> Result<Self> {
        if max_len as u32 + prim.c_r > MAX_PRODUCT_BITS {
            return Err(invalid(format!(
                "substrings of {max_len} bits with c_R = {} exceed {MAX_PRODUCT_BITS} bits",
                prim.c_r
            )));
        }
        let mut powers = Vec::with_capacity(max_len);
        let mut p = prim.r % prim.n;
        for _ in 0..max_len {
            powers.push(p);
            p = p * 2 % prim.n;
        }
        Ok(Self { prim, powers })
    }

    /// Sum of the residues of the set bits, reduced modulo `N`.
    pub fn eval(&self, substring: &BitCode) -> Result<u64> {
        if substring.len() > self.powers.len() {
            return Err(invalid(format!(
                "substring of {} bits exceeds the table width {}",
                substring.len(),
                self.powers.len()
            )));
        }
        let mut acc = 0;
        for (b, &p) in self.powers.iter().enumerate().take(substring.len()) {
            if substring.get(b) {
                acc = (acc + p) % self.prim.n;
            }
        }
        Ok(acc)
    }

    /// Residue of a value of at most `max_len` bits.
    pub fn eval_u64(&self, x: u64) -> u64 {
        residue(x, &self.prim)
    }

    /// Residue of `x` with bit `k` flipped, given `base = M(x; R, N)`.
    pub fn flipped(&self, base: u64, x: u64, k: usize) -> u64 {
        let n = self.prim.n;
        if x >> k & 1 == 1 {
            (base + n - self.powers[k]) % n
        } else {
            (base + self.powers[k]) % n
        }
    }

    pub fn primitives(&self) -> &Primitives {
        &self.prim
    }
}

/// Montgomery form of a substring accumulated bit by bit.
pub fn residue_of_bits(substring: &BitCode, prim: &Primitives) -> Result<u64> {
    ResidueTable::new(*prim, substring.len())?.eval(substring)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignatureLevel {
    Single,
    Nested,
}

/// Signatures of one value, ordered by slot `t` (single) or `(t, v)` (nested).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureSet {
    pub level: SignatureLevel,
    pub values: Vec<u64>,
    /// `(t, v)` slot indices producing each value; `v` is absent for single signatures.
    pub primitive_ids: Vec<(usize, Option<usize>)>,
}

/// `T` single-layer signatures `gamma_t = M(x; R_t, N_t)`.
pub fn signatures(x: u64, prims: &[Primitives]) -> SignatureSet {
    SignatureSet {
        level: SignatureLevel::Single,
        values: prims.iter().map(|p| residue(x, p)).collect(),
        primitive_ids: (0..prims.len()).map(|t| (t, None)).collect(),
    }
}

/// `T^2` nested signatures `psi_tv = M(M(x; R_t, N_t); R_v, N_v)` in `(t, v)` order.
pub fn nested_signature(x: u64, user: &[Primitives], owner: &[Primitives]) -> SignatureSet {
    let mut values = Vec::with_capacity(user.len() * owner.len());
    let mut primitive_ids = Vec::with_capacity(user.len() * owner.len());
    for (t, u) in user.iter().enumerate() {
        let gamma = residue(x, u);
        for (v, o) in owner.iter().enumerate() {
            values.push(residue(gamma, o));
            primitive_ids.push((t, Some(v)));
        }
    }
    SignatureSet { level: SignatureLevel::Nested, values, primitive_ids }
}

/// Blinded values `z_tv = M(x; R_t, N_t) * R_q,v`, left unreduced, in `(t, v)` order.
pub fn blind_query(x: u64, user: &[Primitives], query_multipliers: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(user.len() * query_multipliers.len());
    for u in user {
        let gamma = residue(x, u);
        for &rq in query_multipliers {
            out.push(gamma * rq);
        }
    }
    out
}

/// Server-side map `M(z; R_s, N_s)`.
#[inline]
pub fn server_map(z: u64, server: &Primitives) -> u64 {
    residue(z, server)
}
