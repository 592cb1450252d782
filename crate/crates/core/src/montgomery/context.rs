use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::number::{gcd, modular_inverse, primes_below};
use super::signature::{residue, Primitives};
use super::MAX_PRODUCT_BITS;
use crate::error::{invalid, Result};

/// The primes below `2^c_N`, from which moduli are drawn uniformly.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    c_n: u32,
    primes: Vec<u64>,
}

impl PrimeTable {
    pub fn new(c_n: u32) -> Result<Self> {
        if !(2..=28).contains(&c_n) {
            return Err(invalid(format!("c_N = {c_n} outside the supported range [2, 28]")));
        }
        Ok(Self { c_n, primes: primes_below(1 << c_n) })
    }

    pub fn c_n(&self) -> u32 {
        self.c_n
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }
}

/// `count` distinct moduli drawn uniformly from the table.
pub fn draw_moduli<R: Rng + ?Sized>(table: &PrimeTable, count: usize, rng: &mut R) -> Result<Vec<u64>> {
    if count > table.len() {
        return Err(invalid(format!("cannot draw {count} distinct moduli from {} primes", table.len())));
    }
    Ok(sample(rng, table.len(), count).into_iter().map(|i| table.primes[i]).collect())
}

/// Multiplier drawn uniformly from the values in `(0, 2^c_r)` coprime to `n`.
pub fn draw_multiplier<R: Rng + ?Sized>(n: u64, c_r: u32, rng: &mut R) -> u64 {
    loop {
        let r = rng.random_range(1..1u64 << c_r);
        if gcd(r, n) == 1 {
            return r;
        }
    }
}

/// Every primitive of one hash table, across all three parties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TablePrimitives {
    /// `(R_u,t, N_u,t)` per slot.
    pub user: Vec<Primitives>,
    /// `(R_o,v, N_s,v)` per slot.
    pub owner: Vec<Primitives>,
    /// `R_q,v` per slot.
    pub query: Vec<u64>,
    /// `R'_q,v = R_q,v^-1 mod N_s,v`.
    pub query_inv: Vec<u64>,
    /// `(R_s,v, N_s,v)` with `R_s,v = M(R'_q,v; R_o,v, N_s,v)`.
    pub server: Vec<Primitives>,
}

/// Full primitive material for `L` tables with `T` slots each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MontgomeryContext {
    pub t: usize,
    pub c_r: u32,
    pub c_n: u32,
    pub tables: Vec<TablePrimitives>,
}

impl MontgomeryContext {
    pub fn generate<R: Rng + ?Sized>(l: usize, t: usize, c_r: u32, c_n: u32, rng: &mut R) -> Result<Self> {
        if t == 0 {
            return Err(invalid("at least one signature slot is required"));
        }
        if c_r + c_n > MAX_PRODUCT_BITS || 2 * c_n > MAX_PRODUCT_BITS {
            return Err(invalid(format!("widths c_R = {c_r}, c_N = {c_n} exceed 64-bit arithmetic")));
        }
        let primes = PrimeTable::new(c_n)?;
        let mut tables = Vec::with_capacity(l);
        for _ in 0..l {
            let user = draw_moduli(&primes, t, rng)?
                .into_iter()
                .map(|n| Primitives::new(n, draw_multiplier(n, c_r, rng), c_n, c_r))
                .collect::<Result<Vec<_>>>()?;
            let server_moduli = draw_moduli(&primes, t, rng)?;
            let mut owner = Vec::with_capacity(t);
            let mut query = Vec::with_capacity(t);
            let mut query_inv = Vec::with_capacity(t);
            let mut server = Vec::with_capacity(t);
            for &ns in &server_moduli {
                let ro = Primitives::new(ns, draw_multiplier(ns, c_r, rng), c_n, c_r)?;
                let rq = draw_multiplier(ns, c_r, rng);
                let rq_inv = modular_inverse(rq, ns)?;
                let rs = residue(rq_inv, &ro);
                server.push(Primitives::new(ns, rs, c_n, c_n)?);
                owner.push(ro);
                query.push(rq);
                query_inv.push(rq_inv);
            }
            tables.push(TablePrimitives { user, owner, query, query_inv, server });
        }
        Ok(Self { t, c_r, c_n, tables })
    }

    /// Checks the inverse and server-multiplier relations for every slot.
    pub fn check(&self) -> Result<()> {
        for (i, tab) in self.tables.iter().enumerate() {
            for v in 0..self.t {
                let ns = tab.owner[v].modulus();
                if tab.server[v].modulus() != ns {
                    return Err(invalid(format!("table {i} slot {v}: owner and server moduli differ")));
                }
                if tab.query[v] % ns * tab.query_inv[v] % ns != 1 {
                    return Err(invalid(format!("table {i} slot {v}: R_q * R'_q != 1 mod N_s")));
                }
                if tab.server[v].multiplier() != tab.query_inv[v] * tab.owner[v].multiplier() % ns {
                    return Err(invalid(format!("table {i} slot {v}: R_s != R'_q * R_o mod N_s")));
                }
            }
        }
        Ok(())
    }
}
