//! Statistical and algebraic properties of the Montgomery signatures.

use mimp::code::BitCode;
use mimp::montgomery::{
    blind_query, fp_bound, modular_inverse, nested_signature, primes_below, residue, residue_of_bits, server_map,
    signatures, Primitives,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coprime_multiplier(rng: &mut impl Rng, n: u64, c_r: u32) -> u64 {
    loop {
        let r = rng.random_range(1..1u64 << c_r);
        if r % n != 0 {
            return r;
        }
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn residues_do_not_preserve_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let primes = primes_below(1 << 15);
    let (mut ds, mut gaps) = (Vec::new(), Vec::new());
    for _ in 0..10_000 {
        let n = primes[rng.random_range(0..primes.len())];
        let p = Primitives::new(n, coprime_multiplier(&mut rng, n, 15), 15, 15).unwrap();
        let x = rng.random_range(0..1u64 << 14);
        let d = rng.random_range(1..=14);
        let mut y = x;
        for i in rand::seq::index::sample(&mut rng, 14, d) {
            y ^= 1 << i;
        }
        ds.push(d as f64);
        gaps.push((residue(x, &p) as f64 - residue(y, &p) as f64).abs());
    }
    let rho = spearman(&ds, &gaps);
    assert!(rho.abs() < 0.05, "rank correlation {rho}");
}

#[test]
fn single_signature_false_positive_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let primes = primes_below(1 << 15);
    let trials = 200_000u64;
    let mut hits = 0u64;
    for _ in 0..trials {
        let x = rng.random_range(0..1u64 << 14);
        let y = loop {
            let y = rng.random_range(0..1u64 << 14);
            if y != x {
                break y;
            }
        };
        let n = primes[rng.random_range(0..primes.len())];
        let p = Primitives::new(n, coprime_multiplier(&mut rng, n, 15), 15, 15).unwrap();
        hits += (residue(x, &p) == residue(y, &p)) as u64;
    }
    let beta = fp_bound(14, 15, 15).unwrap();
    let sigma = (beta * (1.0 - beta) / trials as f64).sqrt();
    let rate = hits as f64 / trials as f64;
    assert!(rate <= beta + 3.0 * sigma, "rate {rate} vs bound {beta}");
}

proptest! {
    #[test]
    fn blinded_query_reconstructs_nested_form(
        x in 0u64..1 << 14,
        picks in proptest::collection::vec(0usize..3512, 4),
        seed in any::<u64>(),
    ) {
        let primes = primes_below(1 << 15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nu = primes[picks[0]];
        let ns = primes[picks[1]];
        let user = Primitives::new(nu, coprime_multiplier(&mut rng, nu, 15), 15, 15).unwrap();
        let owner = Primitives::new(ns, coprime_multiplier(&mut rng, ns, 15), 15, 15).unwrap();
        let rq = coprime_multiplier(&mut rng, ns, 15);
        let rs = residue(modular_inverse(rq, ns).unwrap(), &owner);
        let server = Primitives::new(ns, rs, 15, 15).unwrap();
        let z = blind_query(x, &[user], &[rq])[0];
        prop_assert_eq!(server_map(z, &server), nested_signature(x, &[user], &[owner]).values[0]);
    }

    #[test]
    fn equal_inputs_always_match(x in 0u64..1 << 14, picks in proptest::collection::vec(0usize..3512, 2), r in 1u64..1 << 15) {
        let primes = primes_below(1 << 15);
        let prims: Vec<Primitives> = picks
            .iter()
            .filter_map(|&i| Primitives::new(primes[i], r, 15, 15).ok())
            .collect();
        prop_assert_eq!(signatures(x, &prims), signatures(x, &prims));
    }

    #[test]
    fn bitwise_residue_equals_direct(x in 0u64..1 << 14, pick in 0usize..3512, r in 1u64..1 << 15) {
        let n = primes_below(1 << 15)[pick];
        if let Ok(p) = Primitives::new(n, r, 15, 15) {
            let code = BitCode::from_u64(x, 14).unwrap();
            prop_assert_eq!(residue_of_bits(&code, &p).unwrap(), x * r % n);
        }
    }
}
