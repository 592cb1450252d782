//! One-bit variant sets and substring collisions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::code::BitCode;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Database,
    Query,
}

/// The obfuscated form of one substring.
///
/// Database side: the substring itself and one copy with a single bit flipped.
/// Query side: every one-bit variant of the substring, excluding the original.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSet {
    side: Side,
    entries: Vec<BitCode>,
    flip_position: Option<usize>,
}

impl VariantSet {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn entries(&self) -> &[BitCode] {
        &self.entries
    }

    /// Bit index flipped in entry 1 (database side only).
    pub fn flip_position(&self) -> Option<usize> {
        self.flip_position
    }

    /// Length of the underlying substring.
    pub fn substring_len(&self) -> usize {
        self.entries[0].len()
    }
}

/// Draws a database flip position for a substring of `len` bits.
pub fn draw_flip<R: Rng + ?Sized>(len: usize, rng: &mut R) -> usize {
    rng.random_range(0..len)
}

/// Database-side variant set with a uniformly drawn flip position.
pub fn make_database_variants<R: Rng + ?Sized>(substring: &BitCode, rng: &mut R) -> Result<VariantSet> {
    if substring.is_empty() {
        return Err(invalid("cannot build variants of an empty substring"));
    }
    let flip = draw_flip(substring.len(), rng);
    database_variants_at(substring, flip)
}

/// Database-side variant set flipping the given bit.
pub fn database_variants_at(substring: &BitCode, flip: usize) -> Result<VariantSet> {
    if substring.is_empty() {
        return Err(invalid("cannot build variants of an empty substring"));
    }
    if flip >= substring.len() {
        return Err(invalid(format!(
            "flip position {flip} out of range for a {}-bit substring",
            substring.len()
        )));
    }
    Ok(VariantSet {
        side: Side::Database,
        entries: vec![substring.clone(), substring.flipped(flip)],
        flip_position: Some(flip),
    })
}

/// Query-side variant set: entry `k` flips bit `k`.
pub fn make_query_variants(substring: &BitCode) -> Result<VariantSet> {
    if substring.is_empty() {
        return Err(invalid("cannot build variants of an empty substring"));
    }
    Ok(VariantSet {
        side: Side::Query,
        entries: (0..substring.len()).map(|k| substring.flipped(k)).collect(),
        flip_position: None,
    })
}

/// Number of (database entry, query entry) pairs that are equal.
///
/// Never exceeds 1 for sets built by this module.
pub fn collision_count(vp: &VariantSet, vq: &VariantSet) -> Result<u32> {
    if vp.side != Side::Database || vq.side != Side::Query {
        return Err(invalid("collision_count expects a database set and a query set"));
    }
    if vp.substring_len() != vq.substring_len() {
        return Err(invalid(format!(
            "substring length mismatch: {} vs {}",
            vp.substring_len(),
            vq.substring_len()
        )));
    }
    let mut count = 0;
    for p in &vp.entries {
        for q in &vq.entries {
            if p == q {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Collision test on a substring pair without materialising variant sets.
///
/// `diff` is the XOR of the two substrings and `flip` the database flip
/// position: distance 0 or 1 always collides, distance 2 collides iff the
/// flip hits a differing bit, anything larger never does.
#[inline]
pub fn collides_from_diff(diff: u64, flip: usize) -> bool {
    match diff.count_ones() {
        0 | 1 => true,
        2 => diff >> flip & 1 == 1,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> BitCode {
        BitCode::from_bit_str(s).unwrap()
    }

    #[test]
    fn database_flip_example() {
        let v = database_variants_at(&bits("0000"), 1).unwrap();
        assert_eq!(v.entries(), &[bits("0000"), bits("0010")]);
        assert_eq!(v.flip_position(), Some(1));
    }

    #[test]
    fn database_entries_differ_in_one_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for len in 1..40 {
            let sub = BitCode::random(len, &mut rng);
            let v = make_database_variants(&sub, &mut rng).unwrap();
            assert_eq!(v.entries().len(), 2);
            assert_eq!(v.entries()[0], sub);
            assert_eq!(v.entries()[0].hamming(&v.entries()[1]).unwrap(), 1);
        }
    }

    #[test]
    fn query_variants_of_101() {
        let v = make_query_variants(&bits("101")).unwrap();
        let mut got: Vec<String> = v.entries().iter().map(|e| e.to_string()).collect();
        got.sort();
        assert_eq!(got, vec!["001", "100", "111"]);
    }

    #[test]
    fn query_variants_cardinality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1, 2, 13, 14, 40] {
            let sub = BitCode::random(len, &mut rng);
            let v = make_query_variants(&sub).unwrap();
            assert_eq!(v.entries().len(), len);
            assert!(!v.entries().contains(&sub));
            for e in v.entries() {
                assert_eq!(e.hamming(&sub).unwrap(), 1);
            }
            let mut dedup = v.entries().to_vec();
            dedup.sort_by_key(|c| c.to_string());
            dedup.dedup();
            assert_eq!(dedup.len(), len);
        }
    }

    #[test]
    fn empty_substring_rejected() {
        let empty = BitCode::zeros(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(make_database_variants(&empty, &mut rng).is_err());
        assert!(make_query_variants(&empty).is_err());
    }

    #[test]
    fn collision_examples() {
        let p = bits("1011");
        let vq = make_query_variants(&p).unwrap();
        for flip in 0..4 {
            let vp = database_variants_at(&p, flip).unwrap();
            assert_eq!(collision_count(&vp, &vq).unwrap(), 1);
        }
        let far = make_query_variants(&bits("0101")).unwrap(); // d = 3
        for flip in 0..4 {
            let vp = database_variants_at(&p, flip).unwrap();
            assert_eq!(collision_count(&vp, &far).unwrap(), 0);
        }
        // d = 2, differing bits 0 and 1
        let q2 = make_query_variants(&bits("1000")).unwrap();
        assert_eq!(collision_count(&database_variants_at(&p, 0).unwrap(), &q2).unwrap(), 1);
        assert_eq!(collision_count(&database_variants_at(&p, 3).unwrap(), &q2).unwrap(), 0);
    }

    #[test]
    fn collision_length_mismatch() {
        let vp = database_variants_at(&bits("101"), 0).unwrap();
        let vq = make_query_variants(&bits("1010")).unwrap();
        assert!(collision_count(&vp, &vq).is_err());
        assert!(collision_count(&vq, &vp).is_err());
    }

    #[test]
    fn fast_path_agrees_on_all_four_bit_pairs() {
        for p in 0u64..16 {
            for q in 0u64..16 {
                let vq = make_query_variants(&BitCode::from_u64(q, 4).unwrap()).unwrap();
                for flip in 0..4 {
                    let vp = database_variants_at(&BitCode::from_u64(p, 4).unwrap(), flip).unwrap();
                    let literal = collision_count(&vp, &vq).unwrap() == 1;
                    assert_eq!(literal, collides_from_diff(p ^ q, flip), "p={p} q={q} flip={flip}");
                }
            }
        }
    }
}
