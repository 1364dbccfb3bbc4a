//! Command-line front end: code construction, alist import/export, cycle
//! statistics, embedding and model training, Monte Carlo simulation, and
//! report comparison.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use permdec::bp::{BPConfig, EdgeWeights};
use permdec::codes::{bch, pg_enumerate, LinearCode};
use permdec::gps::{self, ClassifierParams, GpsSystem, TrainConfig};
use permdec::node_embed::{
    biased_walks, read_embeddings, train_skipgram, variable_node_rows, WalkConfig,
};
use permdec::perm2vec::Perm2VecParams;
use permdec::sim::{compare_report, read_report, run_ber, sha256_hex, SimConfig, Strategy};
use permdec::tanner::{self, TannerGraph};
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "permdec", version, about = "Permutation-selection decoding toolkit")]
struct Cli {
    /// Master seed for all stochastic stages.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Flat `key = value` file overriding tuning knobs.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a BCH code and print its parameters.
    BuildCode {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Write the systematic parity-check matrix in alist format.
    ExportAlist {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate an alist file; optionally re-emit it in canonical form.
    ImportAlist {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-variable-node 4-cycle counts of the code's Tanner graph.
    CycleStats {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train node embeddings of the Tanner graph (walks + skip-gram).
    TrainEmbed {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Jointly train the permutation embedder and scoring head.
    TrainGps {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Node-embedding checkpoint that seeds the positional table.
        #[arg(long)]
        embed: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training-curve CSV (batch, loss, heldout loss).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Monte Carlo BER/FER for one strategy over an SNR grid.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// identity | random_perm | gps_top1 | gps_top<κ> | bp_lower_bound
        #[arg(long)]
        strategy: String,
        /// Comma-separated SNR points in dB, e.g. "2,4,6".
        #[arg(long, default_value = "2,4,6")]
        snr: String,
        /// Model checkpoint; required by learned strategies.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Per-edge, per-iteration BP weight table.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge simulation reports into a comparison table and plot data.
    Compare {
        /// Report CSVs produced by `simulate`.
        reports: Vec<PathBuf>,
        #[arg(long)]
        out_table: Option<PathBuf>,
        #[arg(long)]
        out_plot: Option<PathBuf>,
    },
}

/// Tuning knobs from the `--config` file. Every key is optional; accessors
/// fall back to the built-in defaults.
struct Knobs(HashMap<String, String>);

const KNOWN_KEYS: &[&str] = &[
    // simulation
    "min_error_words",
    "max_words",
    "bp_iters",
    "bp_clip",
    "bp_early_stop",
    // model training
    "d_p",
    "batch_size",
    "num_batches",
    "snr_lo",
    "snr_hi",
    "lr",
    "log_every",
    // node embedding
    "walks_per_node",
    "walk_length",
    "window",
    "walk_p",
    "walk_q",
    "embed_dim",
    "negatives",
    "epochs",
    "walk_lr",
];

impl Knobs {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = HashMap::new();
        let Some(path) = path else {
            return Ok(Self(map));
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key = value", idx + 1))?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("config line {}: unknown key {key:?}", idx + 1);
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow!("config key {key} = {raw:?}: {e}")),
        }
    }

    fn bp(&self) -> Result<BPConfig> {
        let base = BPConfig::default();
        Ok(BPConfig {
            max_iters: self.parse("bp_iters", base.max_iters)?,
            early_stop: self.parse("bp_early_stop", base.early_stop)?,
            clip: self.parse("bp_clip", base.clip)?,
        })
    }

    fn walk(&self) -> Result<WalkConfig> {
        let base = WalkConfig::default();
        Ok(WalkConfig {
            num_walks_per_node: self.parse("walks_per_node", base.num_walks_per_node)?,
            walk_length: self.parse("walk_length", base.walk_length)?,
            window: self.parse("window", base.window)?,
            p: self.parse("walk_p", base.p)?,
            q: self.parse("walk_q", base.q)?,
            dim: self.parse("embed_dim", base.dim)?,
            negatives: self.parse("negatives", base.negatives)?,
            epochs: self.parse("epochs", base.epochs)?,
            lr: self.parse("walk_lr", base.lr)?,
        })
    }

    fn train(&self, seed: u64, d_w: usize) -> Result<TrainConfig> {
        let base = TrainConfig::default();
        Ok(TrainConfig {
            d_w,
            d_p: self.parse("d_p", base.d_p)?,
            batch_size: self.parse("batch_size", base.batch_size)?,
            num_batches: self.parse("num_batches", base.num_batches)?,
            snr_db_range: (
                self.parse("snr_lo", base.snr_db_range.0)?,
                self.parse("snr_hi", base.snr_db_range.1)?,
            ),
            lr: self.parse("lr", base.lr)?,
            seed,
            log_every: self.parse("log_every", base.log_every)?,
            bp: self.bp()?,
        })
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build(n: usize, k: usize) -> Result<LinearCode> {
    Ok(bch(n, k)?)
}

fn load_system(
    code: LinearCode,
    bp: BPConfig,
    checkpoint: Option<&Path>,
    weights: Option<&Path>,
    seed: u64,
) -> Result<(GpsSystem, Option<String>)> {
    let perms = pg_enumerate(code.n)?;
    let (p2v, cls, sha) = match checkpoint {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading checkpoint {}", path.display()))?;
            let (p2v, cls) = gps::read_gps(&text)?;
            (p2v, cls, Some(sha256_hex(&text)))
        }
        // Baseline strategies never consult the model; tiny random tables
        // keep system construction cheap.
        None => (
            Perm2VecParams::random(code.n, 2, 2, seed),
            ClassifierParams::init(code.n, code.n - code.k, 2, seed),
            None,
        ),
    };
    let w = match weights {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading weights {}", path.display()))?;
            Some(EdgeWeights::read_text(&text)?)
        }
        None => None,
    };
    Ok((GpsSystem::new(code, perms, p2v, cls, bp, w), sha))
}

fn run(cli: Cli) -> Result<()> {
    let knobs = Knobs::load(cli.config.as_deref())?;
    let seed = cli.seed;
    match cli.command {
        Command::BuildCode { n, k } => {
            let code = build(n, k)?;
            let perms = pg_enumerate(n)?;
            println!("{}", code.label);
            println!("n={} k={} rate={:.4}", code.n, code.k, code.rate());
            println!("parity-check rows={} cols={}", code.h.rows(), code.h.cols());
            println!("automorphisms={}", perms.len());
        }
        Command::ExportAlist { n, k, out } => {
            let code = build(n, k)?;
            emit(Some(&out), &permdec::codes::write_alist(&code.h))?;
        }
        Command::ImportAlist { input, out } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let h = permdec::codes::read_alist(&text)?;
            println!("cols={} rows={}", h.cols(), h.rows());
            if out.is_some() {
                emit(out.as_deref(), &permdec::codes::write_alist(&h))?;
            }
        }
        Command::CycleStats { n, k, out } => {
            let code = build(n, k)?;
            let graph = TannerGraph::from_parity_check(&code.h);
            let counts = tanner::count_4cycles_per_vnode(&graph);
            let total: u64 = counts.iter().sum();
            let normalizer = if total == 0 { 1.0 } else { total as f64 };
            emit(out.as_deref(), &tanner::cycle_stats_csv(&counts, normalizer))?;
        }
        Command::TrainEmbed { n, k, out } => {
            let code = build(n, k)?;
            let graph = TannerGraph::from_parity_check(&code.h);
            let cfg = knobs.walk()?;
            let walks = biased_walks(&graph, &cfg, seed);
            let (emb, stats) =
                train_skipgram(&walks, graph.n_var() + graph.n_check(), &cfg, seed);
            for (epoch, loss) in stats.epoch_loss.iter().enumerate() {
                log::info!("epoch {epoch}: loss {loss:.4}");
            }
            emit(Some(&out), &permdec::node_embed::write_embeddings(&emb))?;
        }
        Command::TrainGps { n, k, embed, out, log } => {
            let code = build(n, k)?;
            let graph = TannerGraph::from_parity_check(&code.h);
            let emb_text = fs::read_to_string(&embed)
                .with_context(|| format!("reading embeddings {}", embed.display()))?;
            let emb = read_embeddings(&emb_text)?;
            let v_init = variable_node_rows(&emb, &graph);
            let perms = pg_enumerate(n)?;
            let cfg = knobs.train(seed, v_init.cols())?;
            match gps::train(&code, &perms, &v_init, &cfg) {
                Ok(done) => {
                    emit(Some(&out), &gps::write_gps(&done.p2v, &done.cls))?;
                    emit(log.as_deref(), &gps::training_log_csv(&done.log))?;
                }
                Err(gps::GpsError::Diverged { batch, last_good }) => {
                    emit(Some(&out), &gps::write_gps(&last_good.p2v, &last_good.cls))?;
                    emit(log.as_deref(), &gps::training_log_csv(&last_good.log))?;
                    bail!(
                        "training diverged at batch {batch}; wrote last good state to {}",
                        out.display()
                    );
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Simulate { n, k, strategy, snr, checkpoint, weights, out } => {
            let strategy: Strategy = strategy.parse()?;
            if strategy.needs_model() && checkpoint.is_none() {
                bail!("strategy {strategy} requires --checkpoint");
            }
            let code = build(n, k)?;
            let snr_list: Vec<f64> = snr
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| anyhow!("bad SNR {s:?}: {e}")))
                .collect::<Result<_>>()?;
            let bp = knobs.bp()?;
            let (sys, sha) =
                load_system(code, bp.clone(), checkpoint.as_deref(), weights.as_deref(), seed)?;
            let mut cfg = SimConfig::new(strategy, snr_list, seed);
            cfg.bp = bp;
            cfg.min_error_words = knobs.parse("min_error_words", cfg.min_error_words)?;
            cfg.max_words = knobs.parse("max_words", cfg.max_words)?;
            cfg.checkpoint_sha = sha;
            let report = run_ber(&cfg, &sys)?;
            emit(out.as_deref(), &report.csv())?;
        }
        Command::Compare { reports, out_table, out_plot } => {
            if reports.is_empty() {
                bail!("compare needs at least one report file");
            }
            let parsed = reports
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p)
                        .with_context(|| format!("reading report {}", p.display()))?;
                    Ok(read_report(&text)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let merged = compare_report(&parsed)?;
            emit(out_table.as_deref(), &merged.csv)?;
            if out_plot.is_some() {
                emit(out_plot.as_deref(), &merged.plot)?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    run(cli)
}
