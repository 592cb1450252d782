use rand::Rng;
use serde::{Deserialize, Serialize};

use super::index::{bucket_key, IndexMeta, SearchIndex};
use super::messages::{
    EnrolmentMessage, IndexEntry, IndexPayload, QueryKeyMessage, QueryMessage, RegistrationRequest, ServerKeyMessage,
};
use super::params::SystemParams;
use super::retrieval::{rank_ordered_search, Candidate, RetrievalResult};
use crate::calibration::ChannelProfile;
use crate::code::BitCode;
use crate::distance::draw_flips;
use crate::error::{Error, Result};
use crate::montgomery::{
    draw_moduli, draw_multiplier, modular_inverse, residue, PrimeTable, Primitives, ResidueTable,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    User,
    DataOwner,
    Server,
}

/// Kinds of secret or semi-secret material a party can hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Material {
    /// `(R_u, N_u)`
    UserPrimitives,
    /// `R_q`
    QueryMultipliers,
    /// `R_o`
    OwnerMultipliers,
    /// `R'_q`
    QueryInverses,
    /// `N_s`
    ServerModuli,
    /// `R_s`
    ServerMultipliers,
    /// First-layer signatures received at enrolment.
    UserSignatures,
    /// Nested-signature hash tables.
    IndexTables,
}

impl Role {
    pub fn allowed(self) -> &'static [Material] {
        use Material::*;
        match self {
            Role::User => &[UserPrimitives, QueryMultipliers],
            Role::DataOwner => &[OwnerMultipliers, QueryInverses, ServerModuli, UserSignatures],
            Role::Server => &[ServerModuli, ServerMultipliers, IndexTables],
        }
    }
}

pub trait Party {
    fn role(&self) -> Role;
    /// Material currently present in the party's state.
    fn held_material(&self) -> Vec<Material>;
}

/// Fails if a party holds material outside its role's partition.
pub fn audit(party: &dyn Party) -> Result<()> {
    let role = party.role();
    for m in party.held_material() {
        if !role.allowed().contains(&m) {
            return Err(Error::Protocol(format!("{role:?} holds {m:?}")));
        }
    }
    Ok(())
}

fn check_shape<T>(rows: &[Vec<T>], params: &SystemParams, what: &str) -> Result<()> {
    if rows.len() != params.l || rows.iter().any(|r| r.len() != params.t) {
        return Err(Error::Protocol(format!("{what}: expected {} tables of {} values", params.l, params.t)));
    }
    Ok(())
}

/// Holds the plaintext codes' first Montgomery layer and the query multipliers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    params: SystemParams,
    /// `(R_u, N_u)` per table per slot.
    primitives: Vec<Vec<Primitives>>,
    query_keys: Vec<QueryKeyMessage>,
}

impl User {
    pub fn new<R: Rng + ?Sized>(params: SystemParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let primes = PrimeTable::new(params.c_n)?;
        let mut primitives = Vec::with_capacity(params.l);
        for _ in 0..params.l {
            let slots = draw_moduli(&primes, params.t, rng)?
                .into_iter()
                .map(|n| Primitives::new(n, draw_multiplier(n, params.c_r, rng), params.c_n, params.c_r))
                .collect::<Result<Vec<_>>>()?;
            primitives.push(slots);
        }
        Ok(Self { params, primitives, query_keys: Vec::new() })
    }

    pub fn from_primitives(params: SystemParams, primitives: Vec<Vec<Primitives>>) -> Result<Self> {
        params.validate()?;
        check_shape(&primitives, &params, "user primitives")?;
        for p in primitives.iter().flatten() {
            Primitives::new(p.modulus(), p.multiplier(), params.c_n, params.c_r)?;
        }
        Ok(Self { params, primitives, query_keys: Vec::new() })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn primitives(&self) -> &[Vec<Primitives>] {
        &self.primitives
    }

    /// Re-validates every primitive, e.g. after loading a keystore.
    pub fn check(&self) -> Result<()> {
        let mut copy = Self::from_primitives(self.params, self.primitives.clone())?;
        for k in &self.query_keys {
            copy.install_query_keys(k.clone())?;
        }
        Ok(())
    }

    /// Enrols `record` with fresh database flip positions.
    pub fn enroll<R: Rng + ?Sized>(&self, record: &BitCode, rng: &mut R) -> Result<EnrolmentMessage> {
        let flips = draw_flips(&self.params.plan(), rng);
        self.enroll_with_flips(record, &flips)
    }

    /// Enrols `record` flipping bit `flips[i]` of substring `i` in variant 1.
    pub fn enroll_with_flips(&self, record: &BitCode, flips: &[usize]) -> Result<EnrolmentMessage> {
        let plan = self.params.plan();
        if record.len() != self.params.d {
            return Err(Error::InvalidRecord(format!("record has {} bits, expected {}", record.len(), self.params.d)));
        }
        if flips.len() != self.params.l {
            return Err(Error::InvalidRecord("one flip position per substring is required".into()));
        }
        let mut tables = Vec::with_capacity(self.params.l);
        for (i, prims) in self.primitives.iter().enumerate() {
            let (offset, len) = plan.range(i);
            if flips[i] >= len {
                return Err(Error::InvalidRecord(format!("flip {} outside substring {i} of {len} bits", flips[i])));
            }
            let x = record.read_bits(offset, len);
            let x1 = x ^ 1 << flips[i];
            tables.push([
                prims.iter().map(|p| residue(x, p)).collect(),
                prims.iter().map(|p| residue(x1, p)).collect(),
            ]);
        }
        Ok(EnrolmentMessage { tables })
    }

    pub fn install_query_keys(&mut self, msg: QueryKeyMessage) -> Result<()> {
        check_shape(&msg.multipliers, &self.params, "query multipliers")?;
        if msg.multipliers.iter().flatten().any(|&r| r == 0 || r >= 1 << self.params.c_r) {
            return Err(Error::Protocol(format!("query multiplier outside (0, 2^{})", self.params.c_r)));
        }
        self.query_keys.retain(|k| k.server_id != msg.server_id);
        self.query_keys.push(msg);
        Ok(())
    }

    /// Blinded values `M(x'; R_u, N_u) * R_q` for every one-bit variant `x'`
    /// of every query substring.
    pub fn query(&self, q: &BitCode, server_id: u64) -> Result<QueryMessage> {
        if q.len() != self.params.d {
            return Err(Error::InvalidRecord(format!("query has {} bits, expected {}", q.len(), self.params.d)));
        }
        let keys = self
            .query_keys
            .iter()
            .find(|k| k.server_id == server_id)
            .ok_or_else(|| Error::Protocol(format!("no query multipliers for server {server_id}")))?;
        let plan = self.params.plan();
        let mut tables = Vec::with_capacity(self.params.l);
        for (i, prims) in self.primitives.iter().enumerate() {
            let (offset, len) = plan.range(i);
            let x = q.read_bits(offset, len);
            let rq = &keys.multipliers[i];
            let res: Vec<(ResidueTable, u64)> = prims
                .iter()
                .map(|&p| {
                    let table = ResidueTable::new(p, len)?;
                    let base = table.eval_u64(x);
                    Ok((table, base))
                })
                .collect::<Result<_>>()?;
            let mut variants = Vec::with_capacity(len);
            for k in 0..len {
                let mut z = Vec::with_capacity(prims.len() * rq.len());
                for (table, base) in &res {
                    let gamma = table.flipped(*base, x, k);
                    z.extend(rq.iter().map(|&r| gamma * r));
                }
                variants.push(z);
            }
            tables.push(variants);
        }
        Ok(QueryMessage { server_id, tables })
    }
}

impl Party for User {
    fn role(&self) -> Role {
        Role::User
    }

    fn held_material(&self) -> Vec<Material> {
        let mut out = Vec::new();
        if !self.primitives.is_empty() {
            out.push(Material::UserPrimitives);
        }
        if !self.query_keys.is_empty() {
            out.push(Material::QueryMultipliers);
        }
        out
    }
}

/// The owner's half of one server registration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerRegistration {
    pub server_id: u64,
    /// `(R_o, N_s)` per table per slot.
    pub owner: Vec<Vec<Primitives>>,
    /// `R'_q` per table per slot.
    pub query_inv: Vec<Vec<u64>>,
}

/// Holds enrolled first-layer signatures and the second Montgomery layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataOwner {
    params: SystemParams,
    records: Vec<EnrolmentMessage>,
    registrations: Vec<OwnerRegistration>,
}

impl DataOwner {
    pub fn new(params: SystemParams) -> Self {
        Self { params, records: Vec::new(), registrations: Vec::new() }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    pub fn registrations(&self) -> &[OwnerRegistration] {
        &self.registrations
    }

    /// Stores an enrolment and assigns the next record id.
    pub fn receive_enrolment(&mut self, msg: EnrolmentMessage) -> Result<u64> {
        let p = &self.params;
        if msg.tables.len() != p.l || msg.tables.iter().any(|v| v[0].len() != p.t || v[1].len() != p.t) {
            return Err(Error::InvalidRecord(format!("enrolment must hold {} x 2 x {} residues", p.l, p.t)));
        }
        self.records.push(msg);
        Ok(self.records.len() as u64 - 1)
    }

    /// Draws `R_o` and `R_q` for a server's moduli and returns the user's and
    /// the server's share.
    pub fn register_server<R: Rng + ?Sized>(
        &mut self,
        req: &RegistrationRequest,
        rng: &mut R,
    ) -> Result<(QueryKeyMessage, ServerKeyMessage)> {
        let p = self.params;
        if req.moduli.len() != p.l || req.moduli.iter().any(|m| m.len() != p.t) {
            return Err(Error::InvalidRegistration(format!("expected {} tables of {} moduli", p.l, p.t)));
        }
        if self.registrations.iter().any(|r| r.server_id == req.server_id) {
            return Err(Error::InvalidRegistration(format!("server {} is already registered", req.server_id)));
        }
        let mut owner = Vec::with_capacity(p.l);
        let mut query = Vec::with_capacity(p.l);
        let mut query_inv = Vec::with_capacity(p.l);
        let mut server = Vec::with_capacity(p.l);
        for moduli in &req.moduli {
            let (mut o, mut q, mut qi, mut s) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for &ns in moduli {
                let ro = Primitives::new(ns, draw_multiplier(ns, p.c_r, rng), p.c_n, p.c_r)
                    .map_err(|e| Error::InvalidRegistration(e.to_string()))?;
                let rq = draw_multiplier(ns, p.c_r, rng);
                let rq_inv = modular_inverse(rq, ns)?;
                s.push(residue(rq_inv, &ro));
                o.push(ro);
                q.push(rq);
                qi.push(rq_inv);
            }
            owner.push(o);
            query.push(q);
            query_inv.push(qi);
            server.push(s);
        }
        self.registrations.push(OwnerRegistration { server_id: req.server_id, owner, query_inv });
        Ok((
            QueryKeyMessage { server_id: req.server_id, multipliers: query },
            ServerKeyMessage { server_id: req.server_id, multipliers: server },
        ))
    }

    /// Maps every enrolled first-layer signature into the server's domain.
    pub fn index_payload(&self, server_id: u64) -> Result<IndexPayload> {
        let reg = self
            .registrations
            .iter()
            .find(|r| r.server_id == server_id)
            .ok_or_else(|| Error::Protocol(format!("server {server_id} is not registered")))?;
        let entries = self
            .records
            .iter()
            .enumerate()
            .map(|(id, msg)| IndexEntry {
                record_id: id as u64,
                tables: msg
                    .tables
                    .iter()
                    .zip(&reg.owner)
                    .map(|(variants, owner)| variants.clone().map(|gammas| nest(&gammas, owner)))
                    .collect(),
            })
            .collect();
        Ok(IndexPayload { server_id, entries })
    }

    /// Checks `R_q R'_q = 1` is recoverable and every primitive is valid.
    pub fn check(&self) -> Result<()> {
        self.params.validate()?;
        for reg in &self.registrations {
            check_shape(&reg.owner, &self.params, "owner primitives")?;
            check_shape(&reg.query_inv, &self.params, "query inverses")?;
            for (o, qi) in reg.owner.iter().flatten().zip(reg.query_inv.iter().flatten()) {
                Primitives::new(o.modulus(), o.multiplier(), self.params.c_n, self.params.c_r)?;
                modular_inverse(*qi, o.modulus())?;
            }
        }
        Ok(())
    }
}

fn nest(gammas: &[u64], owner: &[Primitives]) -> Vec<u64> {
    gammas.iter().flat_map(|&g| owner.iter().map(move |o| residue(g, o))).collect()
}

impl Party for DataOwner {
    fn role(&self) -> Role {
        Role::DataOwner
    }

    fn held_material(&self) -> Vec<Material> {
        let mut out = Vec::new();
        if !self.records.is_empty() {
            out.push(Material::UserSignatures);
        }
        if !self.registrations.is_empty() {
            out.extend([Material::OwnerMultipliers, Material::QueryInverses, Material::ServerModuli]);
        }
        out
    }
}

/// Stores the hash tables and answers blinded queries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Server {
    params: SystemParams,
    id: u64,
    /// `N_s` per table per slot.
    moduli: Vec<Vec<u64>>,
    /// `R_s` per table per slot, once registered.
    multipliers: Option<Vec<Vec<u64>>>,
    #[serde(skip)]
    index: Option<SearchIndex>,
}

impl Server {
    /// A server with a random 63-bit id and moduli drawn without replacement per table.
    ///
    /// Ids stay below `2^63` so keystores fit signed 64-bit text formats.
    pub fn new<R: Rng + ?Sized>(params: SystemParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let primes = PrimeTable::new(params.c_n)?;
        let moduli = (0..params.l).map(|_| draw_moduli(&primes, params.t, rng)).collect::<Result<_>>()?;
        Ok(Self { params, id: rng.random::<u64>() >> 1, moduli, multipliers: None, index: None })
    }

    pub fn with_moduli(params: SystemParams, id: u64, moduli: Vec<Vec<u64>>) -> Result<Self> {
        params.validate()?;
        check_shape(&moduli, &params, "server moduli")?;
        Ok(Self { params, id, moduli, multipliers: None, index: None })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn moduli(&self) -> &[Vec<u64>] {
        &self.moduli
    }

    pub fn registration_request(&self) -> RegistrationRequest {
        RegistrationRequest { server_id: self.id, moduli: self.moduli.clone() }
    }

    pub fn is_registered(&self) -> bool {
        self.multipliers.is_some()
    }

    pub fn install_keys(&mut self, msg: ServerKeyMessage) -> Result<()> {
        if msg.server_id != self.id {
            return Err(Error::Protocol(format!("keys for server {} sent to server {}", msg.server_id, self.id)));
        }
        self.validate_keys(&msg.multipliers)?;
        self.multipliers = Some(msg.multipliers);
        Ok(())
    }

    fn validate_keys(&self, multipliers: &[Vec<u64>]) -> Result<()> {
        check_shape(multipliers, &self.params, "server multipliers")?;
        for (ns, rs) in self.moduli.iter().flatten().zip(multipliers.iter().flatten()) {
            Primitives::new(*ns, *rs, self.params.c_n, self.params.c_n)?;
        }
        Ok(())
    }

    /// Re-validates the stored keys, e.g. after loading a keystore.
    pub fn check(&self) -> Result<()> {
        self.params.validate()?;
        check_shape(&self.moduli, &self.params, "server moduli")?;
        if let Some(m) = &self.multipliers {
            self.validate_keys(m)?;
        }
        Ok(())
    }

    fn server_primitives(&self) -> Result<Vec<Vec<Primitives>>> {
        let mult = self.multipliers.as_ref().ok_or_else(|| Error::Protocol(format!("server {} is not registered", self.id)))?;
        self.moduli
            .iter()
            .zip(mult)
            .map(|(ns, rs)| ns.iter().zip(rs).map(|(&n, &r)| Primitives::new(n, r, self.params.c_n, self.params.c_n)).collect())
            .collect()
    }

    /// Stores the nested forms as bucket keys, two per record per table.
    pub fn build_index(&mut self, payload: IndexPayload) -> Result<&SearchIndex> {
        if !self.is_registered() {
            return Err(Error::Protocol(format!("server {} is not registered", self.id)));
        }
        if payload.server_id != self.id {
            return Err(Error::Protocol(format!("payload for server {} sent to server {}", payload.server_id, self.id)));
        }
        let p = self.params;
        let mut index = SearchIndex::new(IndexMeta {
            d: p.d as u32,
            l: p.l as u32,
            s: p.s() as u32,
            t: p.t as u32,
            c_r: p.c_r,
            c_n: p.c_n,
            n_records: payload.entries.len() as u64,
        });
        let width = p.t * p.t;
        for entry in &payload.entries {
            if entry.tables.len() != p.l || entry.tables.iter().any(|v| v[0].len() != width || v[1].len() != width) {
                return Err(Error::Protocol(format!("malformed index entry for record {}", entry.record_id)));
            }
            for (i, variants) in entry.tables.iter().enumerate() {
                for psi in variants {
                    index.insert(i, bucket_key(psi, p.c_n), entry.record_id);
                }
            }
        }
        Ok(self.index.insert(index))
    }

    pub fn index(&self) -> Option<&SearchIndex> {
        self.index.as_ref()
    }

    /// Installs a previously saved index after checking it matches the parameters.
    pub fn set_index(&mut self, index: SearchIndex) -> Result<()> {
        let m = index.meta();
        let p = self.params;
        if (m.d, m.l, m.t, m.c_r, m.c_n) != (p.d as u32, p.l as u32, p.t as u32, p.c_r, p.c_n) {
            return Err(Error::Protocol("index parameters do not match the server's".into()));
        }
        self.index = Some(index);
        Ok(())
    }

    /// Maps each blinded value through `(R_s, N_s)`, probes one bucket per
    /// query variant, and counts at most one hit per table for each record.
    pub fn search(&self, msg: &QueryMessage) -> Result<RetrievalResult> {
        if msg.server_id != self.id {
            return Err(Error::Protocol(format!("query for server {} sent to server {}", msg.server_id, self.id)));
        }
        let index = self.index.as_ref().ok_or_else(|| Error::Protocol("no index has been built".into()))?;
        let prims = self.server_primitives()?;
        if msg.tables.len() != self.params.l {
            return Err(Error::Protocol(format!("query covers {} tables, expected {}", msg.tables.len(), self.params.l)));
        }
        let width = self.params.t * self.params.t;
        let mut counts: std::collections::HashMap<u64, u32> = std::collections::HashMap::new();
        let mut hits = Vec::new();
        let mut probes = 0;
        let mut psi = vec![0u64; width];
        for (i, variants) in msg.tables.iter().enumerate() {
            hits.clear();
            for z in variants {
                if z.len() != width {
                    return Err(Error::Protocol(format!("query variant in table {i} holds {} values", z.len())));
                }
                for (k, (&zk, out)) in z.iter().zip(psi.iter_mut()).enumerate() {
                    *out = residue(zk, &prims[i][k % self.params.t]);
                }
                probes += 1;
                if let Some(ids) = index.bucket(i, &bucket_key(&psi, self.params.c_n)) {
                    hits.extend_from_slice(ids);
                }
            }
            hits.sort_unstable();
            hits.dedup();
            for &id in &hits {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        let candidates = counts.into_iter().map(|(id, m)| Candidate { id, m }).collect();
        Ok(RetrievalResult::new(self.params.l as u32, candidates, probes))
    }
}

impl Party for Server {
    fn role(&self) -> Role {
        Role::Server
    }

    fn held_material(&self) -> Vec<Material> {
        let mut out = vec![Material::ServerModuli];
        if self.multipliers.is_some() {
            out.push(Material::ServerMultipliers);
        }
        if self.index.is_some() {
            out.push(Material::IndexTables);
        }
        out
    }
}

/// Index generation: the owner nests every enrolment for `server`, which stores the keys.
pub fn build_index<'a>(owner: &DataOwner, server: &'a mut Server) -> Result<&'a SearchIndex> {
    let payload = owner.index_payload(server.id())?;
    server.build_index(payload)
}

/// Full query round trip, with rank sets when profiles are given.
pub fn query(q: &BitCode, user: &User, server: &Server, profiles: &[ChannelProfile]) -> Result<RetrievalResult> {
    let mut result = server.search(&user.query(q, server.id())?)?;
    if !profiles.is_empty() {
        result.ranks = Some(rank_ordered_search(&result, profiles)?);
    }
    Ok(result)
}
