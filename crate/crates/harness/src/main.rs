use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use mimp_harness::baselines::{exhaustive_hamming, lsh_partial, Baseline};
use mimp_harness::bench::run_bench;
use mimp_harness::config::{Config, DatasetMode};
use mimp_harness::dataset::{Dataset, SyntheticSpec};
use mimp_harness::eval::evaluate;
use mimp_harness::pipeline::{calibrate, run_mimp, Deployment, ProfileFile};
use mimp_harness::privacy_report::write_report;

#[derive(Parser)]
#[command(name = "mimp", version, about = "Privacy-preserving Hamming-ball search: data, indexes and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus per-key overrides; flags win over the file.
#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "d")]
    d: Option<String>,
    #[arg(long = "l")]
    l: Option<String>,
    #[arg(long = "t")]
    t: Option<String>,
    #[arg(long = "c_r")]
    c_r: Option<String>,
    #[arg(long = "c_n")]
    c_n: Option<String>,
    #[arg(long = "r")]
    r: Option<String>,
    #[arg(long = "radii")]
    radii: Option<String>,
    #[arg(long = "k_max")]
    k_max: Option<String>,
    #[arg(long = "seed")]
    seed: Option<String>,
    #[arg(long = "n_records")]
    n_records: Option<String>,
    #[arg(long = "n_queries")]
    n_queries: Option<String>,
    #[arg(long = "planted")]
    planted: Option<String>,
    #[arg(long = "divisor")]
    divisor: Option<String>,
    #[arg(long = "mode")]
    mode: Option<String>,
    #[arg(long = "nonneighbour")]
    nonneighbour: Option<String>,
    #[arg(long = "calibration_queries")]
    calibration_queries: Option<String>,
    #[arg(long = "lsh_s")]
    lsh_s: Option<String>,
    #[arg(long = "lsh_l")]
    lsh_l: Option<String>,
    #[arg(long = "bench_sizes")]
    bench_sizes: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config> {
        let mut c = Config::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            c.apply_text(&text).with_context(|| format!("in config {}", path.display()))?;
        }
        let flags = [
            ("d", &self.d),
            ("l", &self.l),
            ("t", &self.t),
            ("c_r", &self.c_r),
            ("c_n", &self.c_n),
            ("r", &self.r),
            ("radii", &self.radii),
            ("k_max", &self.k_max),
            ("seed", &self.seed),
            ("n_records", &self.n_records),
            ("n_queries", &self.n_queries),
            ("planted", &self.planted),
            ("divisor", &self.divisor),
            ("mode", &self.mode),
            ("nonneighbour", &self.nonneighbour),
            ("calibration_queries", &self.calibration_queries),
            ("lsh_s", &self.lsh_s),
            ("lsh_l", &self.lsh_l),
            ("bench_sizes", &self.bench_sizes),
        ];
        debug_assert_eq!(flags.len(), Config::KEYS.len());
        for (key, value) in flags {
            if let Some(v) = value {
                c.set(key, v).with_context(|| format!("flag --{key}"))?;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Calibrate one channel profile per rank radius on held-out data
    Calibrate {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Enrol a database, register a server and save keystores plus index
    Index {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Database to index in per-query mode
        #[arg(long, default_value_t = 0)]
        db: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run queries against saved keystores and index
    Query {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Profile file for rank-ordered output
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Database the index holds in per-query mode
        #[arg(long, default_value_t = 0)]
        db: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Precision/recall and hit rate of MIMP k-NN over a dataset
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Precision/recall and hit rate of a comparator
    Baseline {
        /// exhaustive_hamming | lsh_partial
        #[arg(long)]
        method: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write privacy-analysis data files
    Privacy {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Encoding throughput and query latency
    Bench {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        encodings: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn load_dataset(dir: &Path, config: &Config) -> Result<Dataset> {
    let ds = Dataset::load(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    ensure!(ds.spec.d == config.d, "dataset has D = {}, config has D = {}", ds.spec.d, config.d);
    Ok(ds)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { out, cfg } => {
            let c = cfg.resolve()?;
            let ds = Dataset::generate(&SyntheticSpec::from_config(&c))?;
            ds.save(&out)?;
            println!("wrote {} records, {} queries to {}", ds.records.len(), ds.queries.len(), out.display());
        }
        Command::Calibrate { out, cfg } => {
            let c = cfg.resolve()?;
            let file = calibrate(&c)?;
            file.save(&out)?;
            for p in &file.profile {
                println!("r = {}: eta = {:.4}, mu = {}, lambda0 = {:.4}, lambda1 = {:.4}", p.r, p.eta, p.mu, p.lambda0, p.lambda1);
            }
        }
        Command::Index { data, out, db, cfg } => {
            let c = cfg.resolve()?;
            let ds = load_dataset(&data, &c)?;
            ensure!(db < ds.queries.len().max(1), "no database {db}");
            let records = if ds.spec.mode == DatasetMode::Shared { &ds.records[..] } else { ds.database(db) };
            let dep = Deployment::build(c.params(), records, c.seed, db as u64)?;
            dep.save(&out)?;
            write(&out.join("config.txt"), &c.to_text())?;
            println!("indexed {} records into {}", records.len(), out.display());
        }
        Command::Query { data, keys, out, profiles, db, cfg } => {
            let c = cfg.resolve()?;
            let ds = load_dataset(&data, &c)?;
            let dep = Deployment::load(&keys)?;
            let profiles = match profiles {
                Some(p) => ProfileFile::load(&p)?.profile,
                None => Vec::new(),
            };
            let queries: Vec<usize> =
                if ds.spec.mode == DatasetMode::Shared { (0..ds.queries.len()).collect() } else { vec![db] };
            let mut text = c.echo();
            text.push_str("query_idx,record_id,m,rank\n");
            for qi in queries {
                let q = ds.queries.get(qi).with_context(|| format!("no query {qi}"))?;
                let res = dep.query(q, &profiles)?;
                for cand in &res.candidates {
                    let rank = res
                        .ranks
                        .as_ref()
                        .and_then(|r| r.iter().position(|set| set.contains(&cand.id)))
                        .map_or(String::new(), |g| (g + 1).to_string());
                    writeln!(text, "{qi},{},{},{rank}", cand.id, cand.m)?;
                }
            }
            write(&out, &text)?;
            println!("wrote results to {}", out.display());
        }
        Command::Eval { data, out, cfg } => {
            let c = cfg.resolve()?;
            let ds = load_dataset(&data, &c)?;
            let report = evaluate("mimp", &run_mimp(&c, &ds)?, &c);
            write_report_files(&out, &report)?;
            summarize(&report);
        }
        Command::Baseline { method, data, out, cfg } => {
            let c = cfg.resolve()?;
            let ds = load_dataset(&data, &c)?;
            let method: Baseline = method.parse()?;
            let runs = match method {
                Baseline::ExhaustiveHamming => exhaustive_hamming(&ds, c.k_max)?,
                Baseline::LshPartial => lsh_partial(&ds, c.lsh_s, c.lsh_l, c.k_max, c.seed)?,
            };
            let report = evaluate(method.as_str(), &runs, &c);
            write_report_files(&out, &report)?;
            summarize(&report);
        }
        Command::Privacy { out, cfg } => {
            let c = cfg.resolve()?;
            print!("{}", write_report(&c, &out)?.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
        }
        Command::Bench { out, encodings, cfg } => {
            let c = cfg.resolve()?;
            let report = run_bench(&c, encodings)?;
            let text = report.to_text(&c);
            write(&out, &text)?;
            print!("{}", text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
        }
    }
    Ok(())
}

/// The report at `out` and its timing next to it.
fn write_report_files(out: &Path, report: &mimp_harness::eval::EvalReport) -> Result<()> {
    write(out, &report.to_csv())?;
    let mut timing = out.as_os_str().to_owned();
    timing.push(".timing");
    write(Path::new(&timing), &report.timing_text())
}

fn summarize(report: &mimp_harness::eval::EvalReport) {
    for k in [1, 5, 10, report.k.len()] {
        if let Some(i) = report.at(k) {
            println!(
                "{} k = {k}: precision = {:.4}, recall = {:.4}, hit_rate = {:.4}",
                report.method, report.precision[i], report.recall[i], report.hit_rate[i]
            );
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mimp: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
