//! Run configuration: a `key = value` text file with command-line overrides.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// How the records of a synthetic dataset relate to its queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetMode {
    /// Every query has its own database with planted neighbours.
    PerQuery,
    /// One database; each query is a noisy copy of one record.
    Shared,
}

/// How non-neighbour records are drawn in per-query mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonNeighbour {
    /// `d` uniform in `(r, 2r]`, mismatches placed like the neighbours'.
    Shell,
    /// Uniformly random codes, redrawn until `d > r`.
    Random,
}

impl FromStr for DatasetMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_query" => Ok(Self::PerQuery),
            "shared" => Ok(Self::Shared),
            _ => bail!("unknown dataset mode {s:?} (per_query | shared)"),
        }
    }
}

impl FromStr for NonNeighbour {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shell" => Ok(Self::Shell),
            "random" => Ok(Self::Random),
            _ => bail!("unknown non-neighbour model {s:?} (shell | random)"),
        }
    }
}

impl DatasetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PerQuery => "per_query",
            Self::Shared => "shared",
        }
    }
}

impl NonNeighbour {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Shell => "shell",
            Self::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub d: usize,
    pub l: usize,
    pub t: usize,
    pub c_r: u32,
    pub c_n: u32,
    /// Planting radius and default calibration radius.
    pub r: u32,
    /// Radii for rank-ordered search, ascending; empty means `[r]`.
    pub radii: Vec<u32>,
    pub k_max: usize,
    pub seed: u64,
    pub n_records: usize,
    pub n_queries: usize,
    pub planted: usize,
    /// Mismatch positions are drawn from the first `D / divisor` bits.
    pub divisor: usize,
    pub mode: DatasetMode,
    pub nonneighbour: NonNeighbour,
    /// Held-out queries used to produce calibration pairs.
    pub calibration_queries: usize,
    pub lsh_s: usize,
    pub lsh_l: usize,
    pub bench_sizes: Vec<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            d: 2800,
            l: 200,
            t: 2,
            c_r: 15,
            c_n: 15,
            r: 350,
            radii: Vec::new(),
            k_max: 30,
            seed: 1,
            n_records: 200,
            n_queries: 200,
            planted: 10,
            divisor: 1,
            mode: DatasetMode::PerQuery,
            nonneighbour: NonNeighbour::Shell,
            calibration_queries: 20,
            lsh_s: 8,
            lsh_l: 50,
            bench_sizes: vec![1000, 10000],
        }
    }
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("{s:?}: {e}")))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl Config {
    pub const KEYS: &'static [&'static str] = &[
        "d",
        "l",
        "t",
        "c_r",
        "c_n",
        "r",
        "radii",
        "k_max",
        "seed",
        "n_records",
        "n_queries",
        "planted",
        "divisor",
        "mode",
        "nonneighbour",
        "calibration_queries",
        "lsh_s",
        "lsh_l",
        "bench_sizes",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let ctx = || format!("bad value {v:?} for {key}");
        match key {
            "d" => self.d = v.parse().with_context(ctx)?,
            "l" => self.l = v.parse().with_context(ctx)?,
            "t" => self.t = v.parse().with_context(ctx)?,
            "c_r" => self.c_r = v.parse().with_context(ctx)?,
            "c_n" => self.c_n = v.parse().with_context(ctx)?,
            "r" => self.r = v.parse().with_context(ctx)?,
            "radii" => self.radii = parse_list(v).with_context(ctx)?,
            "k_max" => self.k_max = v.parse().with_context(ctx)?,
            "seed" => self.seed = v.parse().with_context(ctx)?,
            "n_records" => self.n_records = v.parse().with_context(ctx)?,
            "n_queries" => self.n_queries = v.parse().with_context(ctx)?,
            "planted" => self.planted = v.parse().with_context(ctx)?,
            "divisor" => self.divisor = v.parse().with_context(ctx)?,
            "mode" => self.mode = v.parse().with_context(ctx)?,
            "nonneighbour" => self.nonneighbour = v.parse().with_context(ctx)?,
            "calibration_queries" => self.calibration_queries = v.parse().with_context(ctx)?,
            "lsh_s" => self.lsh_s = v.parse().with_context(ctx)?,
            "lsh_l" => self.lsh_l = v.parse().with_context(ctx)?,
            "bench_sizes" => self.bench_sizes = parse_list(v).with_context(ctx)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').with_context(|| format!("line {}: expected key = value", no + 1))?;
            self.set(k.trim(), v).with_context(|| format!("line {}", no + 1))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        mimp::protocol::SystemParams::new(self.d, self.l, self.t, self.c_r, self.c_n)?;
        if self.divisor == 0 || self.d / self.divisor == 0 {
            bail!("divisor must be in [1, D]");
        }
        if self.r == 0 || self.r as usize > self.d / self.divisor {
            bail!("r = {} must lie in [1, D / divisor = {}]", self.r, self.d / self.divisor);
        }
        if self.k_max == 0 {
            bail!("k_max must be positive");
        }
        if self.planted > self.n_records {
            bail!("cannot plant {} neighbours among {} records", self.planted, self.n_records);
        }
        if self.mode == DatasetMode::Shared && self.planted != 1 {
            bail!("shared mode plants exactly one genuine record per query");
        }
        let radii = self.rank_radii();
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            bail!("radii must be strictly increasing");
        }
        Ok(())
    }

    pub fn rank_radii(&self) -> Vec<u32> {
        if self.radii.is_empty() {
            vec![self.r]
        } else {
            self.radii.clone()
        }
    }

    pub fn params(&self) -> mimp::protocol::SystemParams {
        mimp::protocol::SystemParams::new(self.d, self.l, self.t, self.c_r, self.c_n).expect("validated config")
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut w = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("write to string");
        w("d", self.d.to_string());
        w("l", self.l.to_string());
        w("t", self.t.to_string());
        w("c_r", self.c_r.to_string());
        w("c_n", self.c_n.to_string());
        w("r", self.r.to_string());
        w("radii", join(&self.radii));
        w("k_max", self.k_max.to_string());
        w("seed", self.seed.to_string());
        w("n_records", self.n_records.to_string());
        w("n_queries", self.n_queries.to_string());
        w("planted", self.planted.to_string());
        w("divisor", self.divisor.to_string());
        w("mode", self.mode.as_str().into());
        w("nonneighbour", self.nonneighbour.as_str().into());
        w("calibration_queries", self.calibration_queries.to_string());
        w("lsh_s", self.lsh_s.to_string());
        w("lsh_l", self.lsh_l.to_string());
        w("bench_sizes", join(&self.bench_sizes));
        out
    }

    /// The config as `#`-prefixed lines, for echoing into outputs.
    pub fn echo(&self) -> String {
        self.to_text().lines().map(|l| format!("# {l}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.radii = vec![300, 350, 400];
        c.mode = DatasetMode::Shared;
        c.planted = 1;
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_errors() {
        let c = Config::parse("# setup\nd = 400 # bits\nl=50\nr = 100\n").unwrap();
        assert_eq!((c.d, c.l, c.r), (400, 50, 100));
        assert!(Config::parse("bogus = 1").is_err());
        assert!(Config::parse("d = many").is_err());
        assert!(Config::parse("radii = 5, 3").is_err());
        assert!(Config::parse("mode = shared").is_err());
    }
}
