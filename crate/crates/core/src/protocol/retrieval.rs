use serde::{Deserialize, Serialize};

use crate::calibration::{check_rank_profiles, decide, ChannelProfile};
use crate::distance::in_inference_region;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u64,
    /// Number of tables in which the record collided with the query.
    pub m: u32,
}

/// Every record touched by a query with its `m`, sorted by `m` descending and
/// then by id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: Option<u64>,
    pub l: u32,
    pub candidates: Vec<Candidate>,
    /// Rank sets, best first, when profiles were supplied.
    pub ranks: Option<Vec<Vec<u64>>>,
    /// Bucket probes the server performed.
    pub probes: usize,
}

impl RetrievalResult {
    pub fn new(l: u32, mut candidates: Vec<Candidate>, probes: usize) -> Self {
        candidates.sort_by(|a, b| b.m.cmp(&a.m).then(a.id.cmp(&b.id)));
        Self { query_id: None, l, candidates, ranks: None, probes }
    }

    pub fn m_of(&self, id: u64) -> u32 {
        self.candidates.iter().find(|c| c.id == id).map_or(0, |c| c.m)
    }

    /// Candidates inside the inference region for radius `r`.
    pub fn in_region(&self, r: u32) -> Vec<Candidate> {
        self.candidates.iter().copied().filter(|c| in_inference_region(c.m, self.l, r)).collect()
    }

    /// Ids accepted as neighbours under `profile`.
    pub fn accepted(&self, profile: &ChannelProfile) -> Vec<u64> {
        self.candidates.iter().filter(|c| decide(c.m, profile)).map(|c| c.id).collect()
    }
}

/// Splits candidates into rank sets: rank 1 holds `m >= mu_1`, rank `g` holds
/// `mu_g <= m < mu_{g-1}`. Candidates below every threshold are left out.
pub fn rank_ordered_search(result: &RetrievalResult, profiles: &[ChannelProfile]) -> Result<Vec<Vec<u64>>> {
    check_rank_profiles(profiles)?;
    let mut ranks = vec![Vec::new(); profiles.len()];
    for c in &result.candidates {
        if let Some(g) = profiles.iter().position(|p| decide(c.m, p)) {
            ranks[g].push(c.id);
        }
    }
    Ok(ranks)
}

/// The `k` candidates with the largest `m`, ties broken by ascending id.
pub fn knn(result: &RetrievalResult, k: usize) -> Vec<u64> {
    let mut c = result.candidates.clone();
    c.sort_by(|a, b| b.m.cmp(&a.m).then(a.id.cmp(&b.id)));
    c.into_iter().take(k).map(|c| c.id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn profile(r: u32, mu: u32) -> ChannelProfile {
        ChannelProfile { r, l: 30, s: 14, eta: 0.1, mu, lambda0: 0.0, lambda1: 0.0 }
    }

    fn result(ms: &[(u64, u32)]) -> RetrievalResult {
        RetrievalResult::new(30, ms.iter().map(|&(id, m)| Candidate { id, m }).collect(), 0)
    }

    #[test]
    fn table_thresholds_rank() {
        let profiles = [profile(30, 22), profile(40, 19), profile(50, 16)];
        let res = result(&[(1, 20), (2, 30), (3, 15), (4, 16), (5, 22), (6, 19)]);
        let ranks = rank_ordered_search(&res, &profiles).unwrap();
        assert_eq!(ranks, vec![vec![2, 5], vec![1, 6], vec![4]]);
    }

    #[test]
    fn non_monotone_profiles_rejected() {
        let res = result(&[(1, 20)]);
        let bad = [profile(30, 19), profile(40, 22)];
        assert!(matches!(rank_ordered_search(&res, &bad), Err(Error::InvalidProfiles(_))));
    }

    #[test]
    fn knn_order_and_truncation() {
        let res = result(&[(9, 5), (3, 7), (4, 7), (1, 2)]);
        assert_eq!(knn(&res, 2), vec![3, 4]);
        assert_eq!(knn(&res, 10), vec![3, 4, 9, 1]);
    }
}
