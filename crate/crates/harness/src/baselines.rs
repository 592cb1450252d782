//! Comparators: exhaustive Hamming search and sampled LSH with partial distance.
//!
//! The LSH comparator keeps only what matters for ranking: each of `L` tables
//! hashes `s` sampled positions, the query withholds one of them (the server
//! probes both fillings), and candidates are ranked by Hamming distance over
//! the positions the queries reveal in the clear.

use std::collections::HashMap;
use std::time::Instant;

use anyhow::{ensure, Result};
use mimp::code::BitCode;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::pipeline::Ranking;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    ExhaustiveHamming,
    LshPartial,
}

impl std::str::FromStr for Baseline {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive_hamming" => Ok(Self::ExhaustiveHamming),
            "lsh_partial" => Ok(Self::LshPartial),
            _ => anyhow::bail!("unknown baseline {s:?} (exhaustive_hamming | lsh_partial)"),
        }
    }
}

impl Baseline {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExhaustiveHamming => "exhaustive_hamming",
            Self::LshPartial => "lsh_partial",
        }
    }
}

fn rank_by_distance(mut scored: Vec<(usize, u64)>, k: usize) -> Vec<u64> {
    scored.sort_unstable();
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}

/// k-NN by true Hamming distance, ties by id.
pub fn exhaustive_hamming(ds: &Dataset, k: usize) -> Result<Vec<Ranking>> {
    (0..ds.queries.len())
        .into_par_iter()
        .map(|qi| {
            let q = &ds.queries[qi];
            let start = Instant::now();
            let scored = ds
                .database(qi)
                .iter()
                .enumerate()
                .map(|(id, p)| Ok((p.hamming(q)?, id as u64)))
                .collect::<Result<Vec<_>>>()?;
            let ids = rank_by_distance(scored, k);
            let seconds = start.elapsed().as_secs_f64();
            Ok(Ranking { query: qi, ids, truth: ds.neighbours(qi), seconds, probes: 0 })
        })
        .collect()
}

/// Sampled positions of an LSH index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LshLayout {
    pub d: usize,
    /// `s` distinct positions per table.
    pub tables: Vec<Vec<usize>>,
    /// Index into each table's positions of the bit the query withholds.
    pub omitted: Vec<usize>,
}

impl LshLayout {
    pub fn sample<R: Rng + ?Sized>(d: usize, s: usize, l: usize, rng: &mut R) -> Result<Self> {
        ensure!(s >= 1 && s <= d && s <= 64, "need 1 <= s <= min(D, 64)");
        let tables: Vec<Vec<usize>> = (0..l).map(|_| sample(rng, d, s).into_vec()).collect();
        let omitted = (0..l).map(|_| rng.random_range(0..s)).collect();
        Ok(Self { d, tables, omitted })
    }

    /// Sorted positions revealed in the clear by the sub-hashes.
    pub fn plaintext_positions(&self) -> Vec<usize> {
        let mut seen = vec![false; self.d];
        for (t, &o) in self.tables.iter().zip(&self.omitted) {
            for (j, &p) in t.iter().enumerate() {
                if j != o {
                    seen[p] = true;
                }
            }
        }
        (0..self.d).filter(|&i| seen[i]).collect()
    }

    fn hash(&self, table: usize, code: &BitCode) -> u64 {
        self.tables[table].iter().enumerate().fold(0, |h, (j, &p)| h | (code.get(p) as u64) << j)
    }
}

/// Hash tables over one database.
pub struct LshIndex {
    layout: LshLayout,
    tables: Vec<HashMap<u64, Vec<u64>>>,
    revealed: Vec<usize>,
}

impl LshIndex {
    pub fn build(layout: LshLayout, records: &[BitCode]) -> Self {
        let mut tables = vec![HashMap::new(); layout.tables.len()];
        for (id, p) in records.iter().enumerate() {
            for (t, table) in tables.iter_mut().enumerate() {
                table.entry(layout.hash(t, p)).or_insert_with(Vec::new).push(id as u64);
            }
        }
        let revealed = layout.plaintext_positions();
        Self { layout, tables, revealed }
    }

    /// Candidates from both fillings of each withheld bit, ranked by partial
    /// distance over the revealed positions.
    pub fn search(&self, records: &[BitCode], q: &BitCode, k: usize) -> (Vec<u64>, usize) {
        let mut candidates = Vec::new();
        let mut probes = 0;
        for (t, table) in self.tables.iter().enumerate() {
            let h = self.layout.hash(t, q);
            let bit = 1u64 << self.layout.omitted[t];
            for key in [h & !bit, h | bit] {
                probes += 1;
                if let Some(ids) = table.get(&key) {
                    candidates.extend_from_slice(ids);
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let scored = candidates
            .into_iter()
            .map(|id| {
                let p = &records[id as usize];
                (self.revealed.iter().filter(|&&i| p.get(i) != q.get(i)).count(), id)
            })
            .collect();
        (rank_by_distance(scored, k), probes)
    }
}

pub fn lsh_partial(ds: &Dataset, s: usize, l: usize, k: usize, seed: u64) -> Result<Vec<Ranking>> {
    let layout = LshLayout::sample(ds.spec.d, s, l, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let per_query = |qi: usize, index: &LshIndex| {
        let db = ds.database(qi);
        let start = Instant::now();
        let (ids, probes) = index.search(db, &ds.queries[qi], k);
        let seconds = start.elapsed().as_secs_f64();
        Ranking { query: qi, ids, truth: ds.neighbours(qi), seconds, probes }
    };
    Ok(match ds.spec.mode {
        crate::config::DatasetMode::Shared => {
            let index = LshIndex::build(layout, &ds.records);
            (0..ds.queries.len()).into_par_iter().map(|qi| per_query(qi, &index)).collect()
        }
        crate::config::DatasetMode::PerQuery => (0..ds.queries.len())
            .into_par_iter()
            .map(|qi| per_query(qi, &LshIndex::build(layout.clone(), ds.database(qi))))
            .collect(),
    })
}

/// Mean and standard error of the plaintext-position count over fresh layouts.
pub fn mean_plaintext_positions(d: usize, s: usize, l: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    ensure!(trials >= 2, "need at least two trials");
    let counts: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            Ok(LshLayout::sample(d, s, l, &mut rng)?.plaintext_positions().len() as f64)
        })
        .collect::<Result<_>>()?;
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
