//! Stage plumbing: deployments, keystores, calibration and retrieval runs.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use mimp::calibration::{check_rank_profiles, ChannelProfile};
use mimp::code::BitCode;
use mimp::distance::obfuscated_distance;
use mimp::protocol::{build_index, knn, load_index, query, save_index, DataOwner, RetrievalResult, Server, SystemParams, User};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, DatasetMode};
use crate::dataset::{Dataset, SyntheticSpec};

pub const INDEX_FILE: &str = "index.mimpidx";
pub const USER_KEYSTORE: &str = "user.toml";
pub const OWNER_KEYSTORE: &str = "owner.toml";
pub const SERVER_KEYSTORE: &str = "server.toml";

/// Seed offset separating held-out calibration data from evaluation data.
const CALIBRATION_SALT: u64 = 0x5eed_ca11;

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One user, one data owner and one registered server with a built index.
#[derive(Clone, Debug)]
pub struct Deployment {
    pub user: User,
    pub owner: DataOwner,
    pub server: Server,
}

impl Deployment {
    /// Enrols `records` (ids in order), registers a server and builds its index.
    pub fn build(params: SystemParams, records: &[BitCode], seed: u64, stream: u64) -> Result<Self> {
        let mut rng = seeded(seed, stream);
        let mut user = User::new(params, &mut rng)?;
        let mut owner = DataOwner::new(params);
        let mut server = Server::new(params, &mut rng)?;
        for r in records {
            owner.receive_enrolment(user.enroll(r, &mut rng)?)?;
        }
        let (uk, sk) = owner.register_server(&server.registration_request(), &mut rng)?;
        user.install_query_keys(uk)?;
        server.install_keys(sk)?;
        build_index(&owner, &mut server)?;
        Ok(Self { user, owner, server })
    }

    pub fn query(&self, q: &BitCode, profiles: &[ChannelProfile]) -> Result<RetrievalResult> {
        Ok(query(q, &self.user, &self.server, profiles)?)
    }

    /// Writes one keystore per party plus the server's index.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(USER_KEYSTORE), toml::to_string(&self.user)?)?;
        fs::write(dir.join(OWNER_KEYSTORE), toml::to_string(&self.owner)?)?;
        fs::write(dir.join(SERVER_KEYSTORE), toml::to_string(&self.server)?)?;
        let index = self.server.index().context("server has no index")?;
        save_index(index, &dir.join(INDEX_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
        let user: User = read(&dir.join(USER_KEYSTORE))?;
        let owner: DataOwner = read(&dir.join(OWNER_KEYSTORE))?;
        let mut server: Server = read(&dir.join(SERVER_KEYSTORE))?;
        user.check()?;
        owner.check()?;
        server.check()?;
        let path = dir.join(INDEX_FILE);
        let index = load_index(&path).with_context(|| format!("loading {}", path.display()))?;
        server.set_index(index).with_context(|| format!("{} does not match the server keystore", path.display()))?;
        Ok(Self { user, owner, server })
    }
}

/// Contents of a profile file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub threshold_grid: String,
    pub profile: Vec<ChannelProfile>,
    pub config: Config,
}

impl ProfileFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, toml::to_string(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        ensure!(file.threshold_grid == "midpoint", "{}: unknown threshold grid {:?}", path.display(), file.threshold_grid);
        check_rank_profiles(&file.profile).with_context(|| format!("in {}", path.display()))?;
        Ok(file)
    }
}

/// `(m, d)` for every query-record pair of a held-out dataset drawn with the
/// config's generator settings, with `m` from plaintext MIMP.
pub fn calibration_pairs(config: &Config) -> Result<Vec<(u32, u32)>> {
    let mut spec = SyntheticSpec::from_config(config);
    spec.seed = config.seed.wrapping_add(CALIBRATION_SALT);
    spec.n_queries = config.calibration_queries;
    if spec.mode == DatasetMode::Shared {
        spec.n_queries = spec.n_queries.min(spec.n_records);
    }
    let ds = Dataset::generate(&spec)?;
    let per_query: Vec<Vec<(u32, u32)>> = (0..ds.queries.len())
        .into_par_iter()
        .map(|qi| {
            let mut rng = seeded(spec.seed, qi as u64);
            let q = &ds.queries[qi];
            ds.database(qi)
                .iter()
                .map(|p| {
                    let m = obfuscated_distance(p, q, config.l, &mut rng)?.m;
                    Ok((m, p.hamming(q)? as u32))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_query.into_iter().flatten().collect())
}

/// One calibrated profile per rank radius.
pub fn calibrate(config: &Config) -> Result<ProfileFile> {
    let pairs = calibration_pairs(config)?;
    let s = config.params().s() as u32;
    let mut profiles = Vec::new();
    for r in config.rank_radii() {
        let labelled: Vec<(u32, bool)> = pairs.iter().map(|&(m, d)| (m, d <= r)).collect();
        let p = ChannelProfile::calibrate(&labelled, config.l as u32, s, r)
            .with_context(|| format!("calibrating radius {r}"))?;
        profiles.push(p);
    }
    check_rank_profiles(&profiles).context("calibrated thresholds do not form a rank order; widen the radii gaps")?;
    Ok(ProfileFile { threshold_grid: "midpoint".into(), profile: profiles, config: config.clone() })
}

/// Ranked output of one query against its database.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub query: usize,
    /// Record ids in the query's database, best first.
    pub ids: Vec<u64>,
    /// Ground-truth neighbour ids.
    pub truth: Vec<u64>,
    pub seconds: f64,
    pub probes: usize,
}

/// MIMP k-NN over every query, through the full protocol.
pub fn run_mimp(config: &Config, ds: &Dataset) -> Result<Vec<Ranking>> {
    let params = config.params();
    let k = config.k_max;
    match ds.spec.mode {
        DatasetMode::PerQuery => (0..ds.queries.len())
            .into_par_iter()
            .map(|qi| {
                let dep = Deployment::build(params, ds.database(qi), config.seed, qi as u64)?;
                let start = Instant::now();
                let res = dep.query(&ds.queries[qi], &[])?;
                let seconds = start.elapsed().as_secs_f64();
                Ok(Ranking { query: qi, ids: knn(&res, k), truth: ds.neighbours(qi), seconds, probes: res.probes })
            })
            .collect(),
        DatasetMode::Shared => {
            let dep = Deployment::build(params, &ds.records, config.seed, 0)?;
            query_all(&dep, ds, k)
        }
    }
}

/// k-NN for every query of `ds` against an existing deployment.
pub fn query_all(dep: &Deployment, ds: &Dataset, k: usize) -> Result<Vec<Ranking>> {
    (0..ds.queries.len())
        .into_par_iter()
        .map(|qi| {
            let start = Instant::now();
            let res = dep.query(&ds.queries[qi], &[])?;
            let seconds = start.elapsed().as_secs_f64();
            Ok(Ranking { query: qi, ids: knn(&res, k), truth: ds.neighbours(qi), seconds, probes: res.probes })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        Config::parse("d = 120\nl = 10\nr = 20\nn_records = 20\nn_queries = 4\nplanted = 2\ncalibration_queries = 30\n")
            .unwrap()
    }

    #[test]
    fn keystores_round_trip() {
        let c = small();
        let ds = Dataset::generate(&SyntheticSpec::from_config(&c)).unwrap();
        let dep = Deployment::build(c.params(), ds.database(0), 1, 0).unwrap();
        let dir = std::env::temp_dir().join(format!("mimp-ks-{}", std::process::id()));
        dep.save(&dir).unwrap();
        let back = Deployment::load(&dir).unwrap();
        assert_eq!(back.user, dep.user);
        assert_eq!(back.owner, dep.owner);
        assert_eq!(back.server.index(), dep.server.index());
        let q = &ds.queries[0];
        assert_eq!(back.query(q, &[]).unwrap(), dep.query(q, &[]).unwrap());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn calibration_is_deterministic() {
        let mut c = small();
        c.r = 30;
        c.radii = vec![10, 20, 30];
        let a = calibrate(&c).unwrap();
        assert_eq!(a, calibrate(&c).unwrap());
        assert_eq!(a.profile.len(), 3);
        let text = toml::to_string(&a).unwrap();
        assert_eq!(toml::from_str::<ProfileFile>(&text).unwrap(), a);
    }

    #[test]
    fn per_query_runs_find_planted() {
        let c = small();
        let ds = Dataset::generate(&SyntheticSpec::from_config(&c)).unwrap();
        let runs = run_mimp(&c, &ds).unwrap();
        assert_eq!(runs.len(), 4);
        for r in &runs {
            assert!(r.probes <= 120);
            assert_eq!(r.truth.len(), 2);
        }
    }
}
