//! Fixed-length binary codes and their segmentation into substrings.
//!
//! Bit `i` of a [`BitCode`] carries weight `2^i` in the code's natural-number
//! reading, so a substring's first bit is its least-significant bit. Textual
//! forms (`from_bit_str`, hex) are written most-significant first.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A binary string of fixed length `D`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitCode {
    len: usize,
    // bits beyond `len` in the last word are always zero
    words: Vec<u64>,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitCode {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; words_for(len)] }
    }

    /// Builds a code from a slice of 0/1 values, element `i` becoming bit `i`.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut code = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => code.set(i, true),
                other => return Err(invalid(format!("bit {i} has value {other}"))),
            }
        }
        Ok(code)
    }

    /// Parses a string of `0`/`1` characters written most-significant bit first.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace() && *c != '_').collect();
        let len = chars.len();
        let mut code = Self::zeros(len);
        for (k, c) in chars.iter().enumerate() {
            let bit = len - 1 - k;
            match c {
                '0' => {}
                '1' => code.set(bit, true),
                other => return Err(invalid(format!("unexpected character {other:?} in bit string"))),
            }
        }
        Ok(code)
    }

    /// The low `len` bits of `value`.
    pub fn from_u64(value: u64, len: usize) -> Result<Self> {
        if len > 64 {
            return Err(invalid(format!("a u64 holds at most 64 bits, asked for {len}")));
        }
        if len < 64 && value >> len != 0 {
            return Err(invalid(format!("{value} does not fit in {len} bits")));
        }
        let mut code = Self::zeros(len);
        if len > 0 {
            code.words[0] = value;
        }
        Ok(code)
    }

    /// Uniformly random code of the given length.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut code = Self::zeros(len);
        for w in code.words.iter_mut() {
            *w = rng.random();
        }
        code.clear_tail();
        code
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    /// A copy with bit `i` inverted.
    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip(i);
        out
    }

    /// The bits as 0/1 values, bit 0 first.
    pub fn bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Natural-number value, for codes of at most 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        match self.len {
            0 => Some(0),
            1..=64 => Some(self.words[0]),
            _ => None,
        }
    }

    /// Hamming distance to a code of the same length.
    pub fn hamming(&self, other: &BitCode) -> Result<usize> {
        if self.len != other.len {
            return Err(invalid(format!("length mismatch: {} vs {}", self.len, other.len)));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Reads `n <= 64` bits starting at `start` as an integer.
    pub fn read_bits(&self, start: usize, n: usize) -> u64 {
        assert!(n <= 64 && start + n <= self.len, "bit range out of bounds");
        if n == 0 {
            return 0;
        }
        let word = start / 64;
        let offset = start % 64;
        let mut value = self.words[word] >> offset;
        if offset != 0 && offset + n > 64 {
            value |= self.words[word + 1] << (64 - offset);
        }
        if n < 64 {
            value &= (1u64 << n) - 1;
        }
        value
    }

    /// The substring covering bits `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> BitCode {
        assert!(start + len <= self.len, "slice out of bounds");
        let mut out = Self::zeros(len);
        let mut done = 0;
        while done < len {
            let n = (len - done).min(64);
            out.words[done / 64] = self.read_bits(start + done, n);
            done += n;
        }
        out
    }

    /// Concatenates substrings; the first part occupies the lowest bits.
    pub fn concat(parts: &[BitCode]) -> BitCode {
        let total = parts.iter().map(BitCode::len).sum();
        let mut out = Self::zeros(total);
        let mut at = 0;
        for part in parts {
            for i in 0..part.len {
                if part.get(i) {
                    out.set(at + i, true);
                }
            }
            at += part.len;
        }
        out
    }

    /// Lowercase hex, most-significant nibble first, `ceil(len / 4)` digits.
    pub fn to_hex(&self) -> String {
        let nibbles = self.len.div_ceil(4);
        let mut s = String::with_capacity(nibbles);
        for k in (0..nibbles).rev() {
            let start = 4 * k;
            let n = (self.len - start).min(4);
            let v = self.read_bits(start, n);
            s.push(char::from_digit(v as u32, 16).expect("nibble"));
        }
        s
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        let hex = hex.trim();
        let nibbles = len.div_ceil(4);
        if hex.len() != nibbles {
            return Err(invalid(format!(
                "expected {nibbles} hex digits for a {len}-bit code, found {}",
                hex.len()
            )));
        }
        let mut code = Self::zeros(len);
        for (pos, c) in hex.chars().enumerate() {
            let k = nibbles - 1 - pos;
            let v = c
                .to_digit(16)
                .ok_or_else(|| invalid(format!("invalid hex digit {c:?}")))?;
            for b in 0..4 {
                if v >> b & 1 == 1 {
                    let i = 4 * k + b;
                    if i >= len {
                        return Err(invalid("hex value exceeds the declared code length"));
                    }
                    code.set(i, true);
                }
            }
        }
        Ok(code)
    }
}

impl fmt::Debug for BitCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "BitCode({self})")
        } else {
            write!(f, "BitCode[{}](0x{})", self.len, self.to_hex())
        }
    }
}

impl fmt::Display for BitCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len).rev() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// How a `D`-bit code is cut into `L` non-overlapping substrings.
///
/// When `L` does not divide `D`, the first `D mod L` substrings are one bit
/// longer than the rest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationPlan {
    d: usize,
    lengths: Vec<usize>,
    offsets: Vec<usize>,
}

impl SegmentationPlan {
    pub fn new(d: usize, l: usize) -> Result<Self> {
        if l == 0 || l > d {
            return Err(invalid(format!("number of substrings L = {l} must lie in [1, D = {d}]")));
        }
        let base = d / l;
        let long = d % l;
        let lengths: Vec<usize> = (0..l).map(|i| if i < long { base + 1 } else { base }).collect();
        let offsets = lengths
            .iter()
            .scan(0, |acc, &len| {
                let at = *acc;
                *acc += len;
                Some(at)
            })
            .collect();
        Ok(Self { d, lengths, offsets })
    }

    pub fn code_len(&self) -> usize {
        self.d
    }

    pub fn num_substrings(&self) -> usize {
        self.lengths.len()
    }

    /// Maximum substring length `ceil(D / L)`.
    pub fn max_len(&self) -> usize {
        self.lengths[0]
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Bit range `(offset, len)` of substring `i`.
    pub fn range(&self, i: usize) -> (usize, usize) {
        (self.offsets[i], self.lengths[i])
    }

    pub fn split(&self, code: &BitCode) -> Result<Vec<BitCode>> {
        if code.len() != self.d {
            return Err(invalid(format!("code has {} bits, plan expects {}", code.len(), self.d)));
        }
        Ok(self
            .offsets
            .iter()
            .zip(&self.lengths)
            .map(|(&at, &len)| code.slice(at, len))
            .collect())
    }
}

/// Cuts `code` into `l` substrings following [`SegmentationPlan`].
pub fn segment(code: &BitCode, l: usize) -> Result<Vec<BitCode>> {
    SegmentationPlan::new(code.len(), l)?.split(code)
}

impl TryFrom<&str> for BitCode {
    type Error = Error;

    fn try_from(s: &str) -> Result<Self> {
        BitCode::from_bit_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bit_string_is_msb_first() {
        let c = BitCode::from_bit_str("0010").unwrap();
        assert!(c.get(1));
        assert_eq!(c.to_u64(), Some(2));
        assert_eq!(c.to_string(), "0010");
    }

    #[test]
    fn from_bits_rejects_non_binary() {
        assert!(BitCode::from_bits(&[0, 1, 2]).is_err());
    }

    #[test]
    fn plan_400_by_30() {
        let plan = SegmentationPlan::new(400, 30).unwrap();
        assert_eq!(plan.max_len(), 14);
        assert!(plan.lengths()[..10].iter().all(|&n| n == 14));
        assert!(plan.lengths()[10..].iter().all(|&n| n == 13));
        assert_eq!(plan.lengths().iter().sum::<usize>(), 400);
    }

    #[test]
    fn plan_single_and_divisible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let code = BitCode::random(400, &mut rng);
        let one = segment(&code, 1).unwrap();
        assert_eq!(one, vec![code]);

        let small = BitCode::from_bit_str("101100111000").unwrap();
        let parts = segment(&small, 4).unwrap();
        assert!(parts.iter().all(|p| p.len() == 3));
        assert_eq!(parts[0].to_string(), "000");
        assert_eq!(parts[3].to_string(), "101");
    }

    #[test]
    fn plan_rejects_bad_l() {
        assert!(SegmentationPlan::new(10, 0).is_err());
        assert!(SegmentationPlan::new(10, 11).is_err());
    }

    #[test]
    fn hex_layout() {
        let c = BitCode::from_bit_str("1_0000_0001_1111").unwrap();
        assert_eq!(c.to_hex(), "101f");
        assert_eq!(BitCode::from_hex("101f", 13).unwrap(), c);
        assert!(BitCode::from_hex("301f", 13).is_err());
    }

    proptest! {
        #[test]
        fn segment_concat_round_trip(seed in any::<u64>(), d in 1usize..300, l_frac in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let code = BitCode::random(d, &mut rng);
            let l = 1 + ((d - 1) as f64 * l_frac) as usize;
            let parts = segment(&code, l).unwrap();
            prop_assert_eq!(parts.len(), l);
            let s = d.div_ceil(l);
            for (i, p) in parts.iter().enumerate() {
                let expect = if d % l == 0 || i < d % l { s } else { s - 1 };
                prop_assert_eq!(p.len(), expect);
            }
            prop_assert_eq!(BitCode::concat(&parts), code);
        }

        #[test]
        fn hex_round_trip(seed in any::<u64>(), d in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let code = BitCode::random(d, &mut rng);
            prop_assert_eq!(BitCode::from_hex(&code.to_hex(), d).unwrap(), code);
        }

        #[test]
        fn read_bits_matches_get(seed in any::<u64>(), d in 1usize..200, start_frac in 0.0f64..1.0, n in 0usize..=64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let code = BitCode::random(d, &mut rng);
            let start = ((d as f64) * start_frac) as usize;
            let n = n.min(d - start);
            let v = code.read_bits(start, n);
            for b in 0..n {
                prop_assert_eq!(v >> b & 1 == 1, code.get(start + b));
            }
        }
    }
}
