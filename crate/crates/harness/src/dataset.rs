//! Synthetic datasets with planted neighbours, and their on-disk format.
//!
//! A dataset directory holds `records.mds`, `queries.mds`, `labels.txt` and
//! `spec.txt`. Code files start with `MIMPDS1 D=<bits> n=<count>` and carry
//! one lowercase hex code per line. Each label line is
//! `query_idx record_idx d`, where `record_idx` indexes the query's own
//! database.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use mimp::code::BitCode;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, DatasetMode, NonNeighbour};

pub const DATASET_MAGIC: &str = "MIMPDS1";

/// Redraw budget for a query whose non-genuine records come too close.
const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub d: usize,
    /// Records per query database in per-query mode, or in total when shared.
    pub n_records: usize,
    pub n_queries: usize,
    pub planted: usize,
    pub r: usize,
    pub divisor: usize,
    pub mode: DatasetMode,
    pub nonneighbour: NonNeighbour,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn from_config(c: &Config) -> Self {
        Self {
            d: c.d,
            n_records: c.n_records,
            n_queries: c.n_queries,
            planted: c.planted,
            r: c.r as usize,
            divisor: c.divisor,
            mode: c.mode,
            nonneighbour: c.nonneighbour,
            seed: c.seed,
        }
    }

    /// Width of the mismatch window `[0, D / divisor)`.
    pub fn window(&self) -> usize {
        self.d / self.divisor
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.d > 0 && self.divisor > 0 && self.window() > 0, "empty mismatch window");
        ensure!(self.r >= 1 && self.r <= self.window(), "r must lie in [1, D / divisor]");
        ensure!(self.planted <= self.n_records, "more planted neighbours than records");
        if self.mode == DatasetMode::Shared {
            ensure!(self.planted == 1, "shared mode plants exactly one genuine record per query");
            ensure!(self.n_queries <= self.n_records, "shared mode needs a distinct genuine record per query");
        } else if self.nonneighbour == NonNeighbour::Shell {
            ensure!(self.r < self.window(), "the shell model needs room above r in the mismatch window");
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("d", self.d.to_string()),
            ("n_records", self.n_records.to_string()),
            ("n_queries", self.n_queries.to_string()),
            ("planted", self.planted.to_string()),
            ("r", self.r.to_string()),
            ("divisor", self.divisor.to_string()),
            ("mode", self.mode.as_str().to_string()),
            ("nonneighbour", self.nonneighbour.as_str().to_string()),
            ("seed", self.seed.to_string()),
        ] {
            writeln!(s, "{k} = {v}").expect("write to string");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        let mut seen = 0;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').context("expected key = value")?;
            c.set(k.trim(), v)?;
            seen += 1;
        }
        ensure!(seen == 9, "spec.txt must carry all 9 keys, found {seen}");
        Ok(Self::from_config(&c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Label {
    pub query: usize,
    pub record: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub spec: SyntheticSpec,
    pub records: Vec<BitCode>,
    pub queries: Vec<BitCode>,
    /// Planted pairs, sorted by query then record.
    pub labels: Vec<Label>,
}

/// `base` with `d` distinct bits flipped inside `[0, window)`.
fn perturb<R: Rng + ?Sized>(base: &BitCode, d: usize, window: usize, rng: &mut R) -> BitCode {
    let mut out = base.clone();
    for i in sample(rng, window, d) {
        out.flip(i);
    }
    out
}

fn query_rng(seed: u64, q: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(q as u64 + 1);
    rng
}

impl Dataset {
    pub fn generate(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        match spec.mode {
            DatasetMode::PerQuery => Self::generate_per_query(spec),
            DatasetMode::Shared => Self::generate_shared(spec),
        }
    }

    fn generate_per_query(spec: &SyntheticSpec) -> Result<Self> {
        let (d, n, r, w) = (spec.d, spec.n_records, spec.r, spec.window());
        let mut records = Vec::with_capacity(n * spec.n_queries);
        let mut queries = Vec::with_capacity(spec.n_queries);
        let mut labels = Vec::new();
        for qi in 0..spec.n_queries {
            let mut rng = query_rng(spec.seed, qi);
            let q = BitCode::random(d, &mut rng);
            let mut db: Vec<(BitCode, Option<usize>)> = Vec::with_capacity(n);
            for _ in 0..spec.planted {
                let dist = rng.random_range(1..=r);
                db.push((perturb(&q, dist, w, &mut rng), Some(dist)));
            }
            for _ in spec.planted..n {
                let code = match spec.nonneighbour {
                    NonNeighbour::Shell => {
                        let dist = rng.random_range(r + 1..=(2 * r).min(w));
                        perturb(&q, dist, w, &mut rng)
                    }
                    NonNeighbour::Random => loop {
                        let c = BitCode::random(d, &mut rng);
                        if c.hamming(&q)? > r {
                            break c;
                        }
                    },
                };
                db.push((code, None));
            }
            db.shuffle(&mut rng);
            for (j, (code, planted)) in db.into_iter().enumerate() {
                if let Some(dist) = planted {
                    labels.push(Label { query: qi, record: j, d: dist });
                }
                records.push(code);
            }
            queries.push(q);
        }
        Ok(Self { spec: spec.clone(), records, queries, labels })
    }

    fn generate_shared(spec: &SyntheticSpec) -> Result<Self> {
        let (d, r, w) = (spec.d, spec.r, spec.window());
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let records: Vec<BitCode> = (0..spec.n_records).map(|_| BitCode::random(d, &mut rng)).collect();
        let genuine = sample(&mut rng, spec.n_records, spec.n_queries).into_vec();
        let mut queries = Vec::with_capacity(spec.n_queries);
        let mut labels = Vec::with_capacity(spec.n_queries);
        for (qi, &g) in genuine.iter().enumerate() {
            let mut rng = query_rng(spec.seed, qi);
            let mut redraws = 0;
            let (q, dist) = loop {
                let dist = rng.random_range(1..=r);
                let q = perturb(&records[g], dist, w, &mut rng);
                let clash = records.iter().enumerate().any(|(j, p)| j != g && p.hamming(&q).unwrap_or(0) <= r);
                if !clash {
                    break (q, dist);
                }
                redraws += 1;
                ensure!(redraws < MAX_REDRAWS, "query {qi}: could not keep other records beyond r = {r}");
            };
            labels.push(Label { query: qi, record: g, d: dist });
            queries.push(q);
        }
        Ok(Self { spec: spec.clone(), records, queries, labels })
    }

    /// The database searched by query `qi`.
    pub fn database(&self, qi: usize) -> &[BitCode] {
        match self.spec.mode {
            DatasetMode::PerQuery => {
                let n = self.spec.n_records;
                &self.records[qi * n..(qi + 1) * n]
            }
            DatasetMode::Shared => &self.records,
        }
    }

    /// Planted neighbour ids of query `qi` within its database.
    pub fn neighbours(&self, qi: usize) -> Vec<u64> {
        let start = self.labels.partition_point(|l| l.query < qi);
        self.labels[start..].iter().take_while(|l| l.query == qi).map(|l| l.record as u64).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_codes(&dir.join("records.mds"), self.spec.d, &self.records)?;
        write_codes(&dir.join("queries.mds"), self.spec.d, &self.queries)?;
        let mut labels = String::from("# query_idx record_idx d\n");
        for l in &self.labels {
            writeln!(labels, "{} {} {}", l.query, l.record, l.d).expect("write to string");
        }
        fs::write(dir.join("labels.txt"), labels)?;
        fs::write(dir.join("spec.txt"), self.spec.to_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let spec_path = dir.join("spec.txt");
        let spec_text =
            fs::read_to_string(&spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
        let spec = SyntheticSpec::parse(&spec_text).with_context(|| format!("in {}", spec_path.display()))?;
        let records = read_codes(&dir.join("records.mds"))?;
        let queries = read_codes(&dir.join("queries.mds"))?;
        let labels = read_labels(&dir.join("labels.txt"))?;
        let want_records = match spec.mode {
            DatasetMode::PerQuery => spec.n_records * spec.n_queries,
            DatasetMode::Shared => spec.n_records,
        };
        ensure!(records.len() == want_records, "records.mds holds {} codes, spec implies {want_records}", records.len());
        ensure!(queries.len() == spec.n_queries, "queries.mds holds {} codes, spec says {}", queries.len(), spec.n_queries);
        ensure!(records.iter().chain(&queries).all(|c| c.len() == spec.d), "code length differs from spec D");
        ensure!(
            labels.iter().all(|l| l.query < spec.n_queries && l.record < spec.n_records),
            "labels.txt refers to a missing query or record"
        );
        Ok(Self { spec, records, queries, labels })
    }
}

pub fn write_codes(path: &Path, d: usize, codes: &[BitCode]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{DATASET_MAGIC} D={d} n={}", codes.len())?;
    for c in codes {
        writeln!(w, "{}", c.to_hex())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codes(path: &Path) -> Result<Vec<BitCode>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let diag = |msg: String| anyhow::anyhow!("{}: {msg}", path.display());
    let mut parts = header.split_whitespace();
    if parts.next() != Some(DATASET_MAGIC) {
        return Err(diag(format!("bad magic, expected {DATASET_MAGIC}")));
    }
    let field = |p: Option<&str>, key: &str| -> Result<usize> {
        p.and_then(|s| s.strip_prefix(key))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| diag(format!("malformed header {header:?}")))
    };
    let d = field(parts.next(), "D=")?;
    let n = field(parts.next(), "n=")?;
    let mut codes = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        codes.push(BitCode::from_hex(line, d).map_err(|e| diag(format!("line {}: {e}", i + 2)))?);
    }
    if codes.len() != n {
        bail!(diag(format!("header says n={n}, found {} codes", codes.len())));
    }
    Ok(codes)
}

fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        ensure!(v.len() == 3, "{}: line {} needs 3 fields", path.display(), i + 1);
        labels.push(Label { query: v[0], record: v[1], d: v[2] });
    }
    labels.sort_by_key(|l| (l.query, l.record));
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mode: DatasetMode) -> SyntheticSpec {
        SyntheticSpec {
            d: 240,
            n_records: 30,
            n_queries: 5,
            planted: if mode == DatasetMode::Shared { 1 } else { 4 },
            r: 40,
            divisor: 2,
            mode,
            nonneighbour: NonNeighbour::Shell,
            seed: 3,
        }
    }

    #[test]
    fn planted_distances_hold() {
        for mode in [DatasetMode::PerQuery, DatasetMode::Shared] {
            let ds = Dataset::generate(&spec(mode)).unwrap();
            for qi in 0..ds.queries.len() {
                let nb = ds.neighbours(qi);
                assert_eq!(nb.len(), ds.spec.planted);
                for (j, p) in ds.database(qi).iter().enumerate() {
                    let d = p.hamming(&ds.queries[qi]).unwrap();
                    let diff: Vec<usize> = (0..240).filter(|&i| p.get(i) != ds.queries[qi].get(i)).collect();
                    if nb.contains(&(j as u64)) {
                        assert!(d >= 1 && d <= 40);
                        let label = ds.labels.iter().find(|l| l.query == qi && l.record == j).unwrap();
                        assert_eq!(label.d, d);
                        assert!(diff.iter().all(|&i| i < 120));
                    } else {
                        assert!(d > 40);
                    }
                }
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join(format!("mimp-ds-{}", std::process::id()));
        let ds = Dataset::generate(&spec(DatasetMode::PerQuery)).unwrap();
        ds.save(&dir).unwrap();
        assert_eq!(Dataset::load(&dir).unwrap(), ds);
        fs::write(dir.join("queries.mds"), "MIMPDS2 D=240 n=5\n").unwrap();
        assert!(Dataset::load(&dir).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
