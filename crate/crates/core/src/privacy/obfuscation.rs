use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Histograms relating true distances `d` to obfuscated measures `m`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObfuscationStats {
    pub r: u32,
    pub total: usize,
    /// Pair counts per `(d, m)`.
    pub joint: BTreeMap<(u32, u32), usize>,
    /// Histograms of `d` and `m` for neighbouring pairs (`d <= r`).
    pub d_neighbour: BTreeMap<u32, usize>,
    pub m_neighbour: BTreeMap<u32, usize>,
    /// Histograms of `d` and `m` for non-neighbouring pairs (`d > r`).
    pub d_non_neighbour: BTreeMap<u32, usize>,
    pub m_non_neighbour: BTreeMap<u32, usize>,
}

impl ObfuscationStats {
    /// Number of distinct `m` values observed at each `d`.
    pub fn distinct_m_per_d(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for &(d, _) in self.joint.keys() {
            *out.entry(d).or_insert(0) += 1;
        }
        out
    }

    /// Pair count at each `d`.
    pub fn pairs_per_d(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for (&(d, _), &c) in &self.joint {
            *out.entry(d).or_insert(0) += c;
        }
        out
    }
}

/// Tabulates `(d, m)` pairs, split by the radius `r`.
pub fn obfuscation_stats(pairs: &[(u32, u32)], r: u32) -> ObfuscationStats {
    let mut st = ObfuscationStats { r, total: pairs.len(), ..Default::default() };
    for &(d, m) in pairs {
        *st.joint.entry((d, m)).or_insert(0) += 1;
        let (dh, mh) = if d <= r {
            (&mut st.d_neighbour, &mut st.m_neighbour)
        } else {
            (&mut st.d_non_neighbour, &mut st.m_non_neighbour)
        };
        *dh.entry(d).or_insert(0) += 1;
        *mh.entry(m).or_insert(0) += 1;
    }
    st
}
