//! Values exchanged between the parties.

use serde::{Deserialize, Serialize};

/// User to data owner: user-layer signatures of both database variants of
/// every substring. `tables[i][j]` holds the `T` residues of variant `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrolmentMessage {
    pub tables: Vec<[Vec<u64>; 2]>,
}

impl EnrolmentMessage {
    /// Number of residues carried.
    pub fn residue_count(&self) -> usize {
        self.tables.iter().map(|v| v[0].len() + v[1].len()).sum()
    }
}

/// Server to data owner: the server's moduli `N_s`, `T` per table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationRequest {
    pub server_id: u64,
    pub moduli: Vec<Vec<u64>>,
}

/// Data owner to user: query multipliers `R_q`, `T` per table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryKeyMessage {
    pub server_id: u64,
    pub multipliers: Vec<Vec<u64>>,
}

/// Data owner to server: server multipliers `R_s`, `T` per table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerKeyMessage {
    pub server_id: u64,
    pub multipliers: Vec<Vec<u64>>,
}

/// One record's nested signatures: `tables[i][j]` holds the `T^2` values of
/// database variant `j` in `(t, v)` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub record_id: u64,
    pub tables: Vec<[Vec<u64>; 2]>,
}

/// Data owner to server: the nested forms of every enrolled record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPayload {
    pub server_id: u64,
    pub entries: Vec<IndexEntry>,
}

/// User to server: blinded values for every one-bit variant of every query
/// substring. `tables[i][k]` holds the `T^2` values for variant `k` in `(t, v)` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryMessage {
    pub server_id: u64,
    pub tables: Vec<Vec<Vec<u64>>>,
}

impl QueryMessage {
    /// Number of bucket probes the message asks for.
    pub fn probe_count(&self) -> usize {
        self.tables.iter().map(Vec::len).sum()
    }
}
