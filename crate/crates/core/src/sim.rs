//! Monte Carlo BER/FER evaluation of decoding strategies over the AWGN
//! channel, with paired noise across strategies, deterministic accumulation,
//! and CSV persistence.

use crate::bp::{self, DecodeResult};
use crate::channel;
use crate::codes::LinearCode;
use crate::gps::{self, GpsError, GpsSystem};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("SNR list must be non-empty")]
    EmptySnrList,
    #[error("min_error_words must be at least 1")]
    BadStopRule,
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("reports disagree on {0}")]
    GridMismatch(String),
    #[error("duplicate strategy {0:?} in comparison")]
    DuplicateStrategy(String),
    #[error("report parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Decode(#[from] GpsError),
}

/// How each received word is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Plain BP on the received word.
    Identity,
    /// BP under one uniformly drawn automorphism per word.
    RandomPerm,
    /// BP under the model's best-ranked automorphism.
    GpsTop1,
    /// Candidate selection over the model's top-κ automorphisms.
    GpsTopk(usize),
    /// Candidate selection over every automorphism — the ranking-free bound.
    BpLowerBound,
}

impl Strategy {
    /// Whether the strategy consults the trained model.
    pub fn needs_model(&self) -> bool {
        matches!(self, Strategy::GpsTop1 | Strategy::GpsTopk(_))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Identity => write!(f, "identity"),
            Strategy::RandomPerm => write!(f, "random_perm"),
            Strategy::GpsTop1 => write!(f, "gps_top1"),
            Strategy::GpsTopk(k) => write!(f, "gps_top{k}"),
            Strategy::BpLowerBound => write!(f, "bp_lower_bound"),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "identity" => Ok(Strategy::Identity),
            "random_perm" => Ok(Strategy::RandomPerm),
            "bp_lower_bound" => Ok(Strategy::BpLowerBound),
            _ => {
                if let Some(k) = s.strip_prefix("gps_top") {
                    match k.parse::<usize>() {
                        Ok(1) => return Ok(Strategy::GpsTop1),
                        Ok(k) if k > 1 => return Ok(Strategy::GpsTopk(k)),
                        _ => {}
                    }
                }
                Err(SimError::UnknownStrategy(s.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub strategy: Strategy,
    pub snr_list_db: Vec<f64>,
    /// Stop a SNR point once this many word errors have accumulated.
    pub min_error_words: u64,
    /// Hard cap on simulated words per SNR point.
    pub max_words: u64,
    pub bp: bp::BPConfig,
    pub seed: u64,
    /// Digest of the model checkpoint behind a learned strategy.
    pub checkpoint_sha: Option<String>,
}

impl SimConfig {
    pub fn new(strategy: Strategy, snr_list_db: Vec<f64>, seed: u64) -> Self {
        Self {
            strategy,
            snr_list_db,
            min_error_words: 1000,
            max_words: 1_000_000,
            bp: bp::BPConfig::default(),
            seed,
            checkpoint_sha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrRow {
    pub snr_db: f64,
    pub words: u64,
    pub bit_errors: u64,
    pub word_errors: u64,
    pub ber: f64,
    pub fer: f64,
    /// Wall-clock time for the point. Informational only; it is kept out of
    /// the CSV so reports stay byte-identical across runs.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub code: String,
    pub strategy: String,
    pub seed: u64,
    pub checkpoint_sha: Option<String>,
    pub rows: Vec<SnrRow>,
}

impl SimReport {
    pub fn csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# code={}\n", self.code));
        out.push_str(&format!("# strategy={}\n", self.strategy));
        out.push_str(&format!("# seed={}\n", self.seed));
        out.push_str(&format!(
            "# checkpoint_sha={}\n",
            self.checkpoint_sha.as_deref().unwrap_or("none")
        ));
        out.push_str("snr_db,words,bit_errors,word_errors,ber,fer\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.snr_db, r.words, r.bit_errors, r.word_errors, r.ber, r.fer
            ));
        }
        out
    }
}

/// Parse a report CSV written by [`SimReport::csv`]. Timing is not stored
/// in the file, so parsed rows carry zero wall seconds.
pub fn read_report(text: &str) -> Result<SimReport, SimError> {
    let mut code = None;
    let mut strategy = None;
    let mut seed = None;
    let mut checkpoint_sha = None;
    let mut rows = Vec::new();
    let mut saw_header = false;
    for line in text.lines() {
        if let Some(meta) = line.strip_prefix("# ") {
            let (key, value) = meta
                .split_once('=')
                .ok_or_else(|| SimError::Parse(format!("bad metadata line {line:?}")))?;
            match key {
                "code" => code = Some(value.to_string()),
                "strategy" => strategy = Some(value.to_string()),
                "seed" => {
                    seed = Some(value.parse().map_err(|e| {
                        SimError::Parse(format!("bad seed {value:?}: {e}"))
                    })?)
                }
                "checkpoint_sha" => {
                    checkpoint_sha = (value != "none").then(|| value.to_string())
                }
                _ => return Err(SimError::Parse(format!("unknown metadata key {key:?}"))),
            }
            continue;
        }
        if !saw_header {
            if line != "snr_db,words,bit_errors,word_errors,ber,fer" {
                return Err(SimError::Parse(format!("unexpected header {line:?}")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [snr, words, bits, werrs, ber, fer] = fields[..] else {
            return Err(SimError::Parse(format!("bad row {line:?}")));
        };
        let num = |s: &str| -> Result<f64, SimError> {
            s.parse().map_err(|e| SimError::Parse(format!("bad number {s:?}: {e}")))
        };
        let int = |s: &str| -> Result<u64, SimError> {
            s.parse().map_err(|e| SimError::Parse(format!("bad counter {s:?}: {e}")))
        };
        rows.push(SnrRow {
            snr_db: num(snr)?,
            words: int(words)?,
            bit_errors: int(bits)?,
            word_errors: int(werrs)?,
            ber: num(ber)?,
            fer: num(fer)?,
            wall_seconds: 0.0,
        });
    }
    Ok(SimReport {
        code: code.ok_or_else(|| SimError::Parse("missing code metadata".into()))?,
        strategy: strategy.ok_or_else(|| SimError::Parse("missing strategy metadata".into()))?,
        seed: seed.ok_or_else(|| SimError::Parse("missing seed metadata".into()))?,
        checkpoint_sha,
        rows,
    })
}

pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Decode under every automorphism and keep the best candidate by the same
/// rule as list decoding: syndrome-zero first, then nearest to `y`.
pub fn bp_lower_bound(y: &[f64], sigma: f64, sys: &GpsSystem) -> DecodeResult {
    let candidates: Vec<DecodeResult> = sys
        .perms
        .iter()
        .map(|p| bp::decode_permuted(y, p, &sys.graph, &sys.bp, sigma, sys.weights.as_ref()))
        .collect();
    let mut candidates = candidates;
    candidates.swap_remove(gps::best_candidate(y, &candidates))
}

/// RNG stream for one simulated word. Message bits and noise are drawn
/// before any strategy-specific randomness, so every strategy sees the same
/// transmissions for a given (seed, SNR index, word index).
fn word_rng(seed: u64, snr_idx: usize, word_idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((snr_idx as u64) << 40) | word_idx);
    rng
}

fn channel_word(
    code: &LinearCode,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<u8>, Vec<f64>) {
    let msg: Vec<u8> = (0..code.k).map(|_| rng.random_range(0..2u8)).collect();
    let c = code.encode(&msg);
    let y = channel::bpsk_modulate(&c)
        .iter()
        .map(|&x| x + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (c, y)
}

fn decode_word(
    strategy: Strategy,
    y: &[f64],
    sigma: f64,
    sys: &GpsSystem,
    rng: &mut ChaCha8Rng,
) -> Result<DecodeResult, GpsError> {
    match strategy {
        Strategy::Identity => {
            let llr = channel::llr(y, sigma)?;
            Ok(bp::decode(&llr, &sys.graph, &sys.bp, sys.weights.as_ref()))
        }
        Strategy::RandomPerm => {
            let p = rng.random_range(0..sys.perms.len());
            Ok(bp::decode_permuted(y, &sys.perms[p], &sys.graph, &sys.bp, sigma, sys.weights.as_ref()))
        }
        Strategy::GpsTop1 => gps::decode_gps(y, sigma, sys),
        Strategy::GpsTopk(k) => gps::list_decode_topk(y, sigma, sys, k),
        Strategy::BpLowerBound => Ok(bp_lower_bound(y, sigma, sys)),
    }
}

/// Words evaluated per parallel round; accumulation happens in word order,
/// so reports do not depend on thread count.
const CHUNK: u64 = 1024;

/// Monte Carlo BER/FER over the configured SNR grid: random codewords, AWGN,
/// one decode per word, accumulation until the word-error quota or word cap.
/// Deterministic given (config, system).
pub fn run_ber(cfg: &SimConfig, sys: &GpsSystem) -> Result<SimReport, SimError> {
    if cfg.snr_list_db.is_empty() {
        return Err(SimError::EmptySnrList);
    }
    if cfg.min_error_words == 0 {
        return Err(SimError::BadStopRule);
    }
    let mut sys = sys.clone();
    sys.bp = cfg.bp.clone();
    let n = sys.code.n as u64;

    let mut rows = Vec::with_capacity(cfg.snr_list_db.len());
    for (snr_idx, &snr_db) in cfg.snr_list_db.iter().enumerate() {
        let sigma = channel::sigma_from_ebn0(snr_db, sys.code.rate());
        let start = Instant::now();
        let (mut words, mut bit_errors, mut word_errors) = (0u64, 0u64, 0u64);
        while words < cfg.max_words && word_errors < cfg.min_error_words {
            let hi = (words + CHUNK).min(cfg.max_words);
            let outcomes: Result<Vec<u64>, GpsError> = (words..hi)
                .into_par_iter()
                .map(|w| {
                    let mut rng = word_rng(cfg.seed, snr_idx, w);
                    let (c, y) = channel_word(&sys.code, sigma, &mut rng);
                    let r = decode_word(cfg.strategy, &y, sigma, &sys, &mut rng)?;
                    Ok(c.iter().zip(&r.c_hat).filter(|(a, b)| a != b).count() as u64)
                })
                .collect();
            for wrong_bits in outcomes? {
                bit_errors += wrong_bits;
                word_errors += (wrong_bits > 0) as u64;
            }
            words = hi;
        }
        let ber = bit_errors as f64 / (words * n) as f64;
        let fer = word_errors as f64 / words as f64;
        log::info!(
            "{} @ {snr_db} dB: {words} words, ber {ber:.3e}, fer {fer:.3e}",
            cfg.strategy
        );
        rows.push(SnrRow {
            snr_db,
            words,
            bit_errors,
            word_errors,
            ber,
            fer,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(SimReport {
        code: sys.code.label.clone(),
        strategy: cfg.strategy.to_string(),
        seed: cfg.seed,
        checkpoint_sha: cfg.checkpoint_sha.clone(),
        rows,
    })
}

/// Merged comparison of reports on one code and SNR grid: a CSV table of
/// −log₁₀(BER) with one column per strategy (sorted by name) and matching
/// gnuplot data blocks.
pub struct ComparisonData {
    pub csv: String,
    pub plot: String,
}

pub fn compare_report(reports: &[SimReport]) -> Result<ComparisonData, SimError> {
    let Some(first) = reports.first() else {
        return Err(SimError::GridMismatch("empty report list".into()));
    };
    let grid: Vec<f64> = first.rows.iter().map(|r| r.snr_db).collect();
    for r in reports {
        if r.code != first.code {
            return Err(SimError::GridMismatch(format!(
                "code: {} vs {}",
                first.code, r.code
            )));
        }
        let g: Vec<f64> = r.rows.iter().map(|row| row.snr_db).collect();
        if g != grid {
            return Err(SimError::GridMismatch(format!("SNR grid: {grid:?} vs {g:?}")));
        }
    }
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| reports[a].strategy.cmp(&reports[b].strategy));
    for pair in order.windows(2) {
        if reports[pair[0]].strategy == reports[pair[1]].strategy {
            return Err(SimError::DuplicateStrategy(reports[pair[0]].strategy.clone()));
        }
    }

    let neg_log = |ber: f64| -ber.log10();
    let mut csv = String::from("snr_db");
    for &i in &order {
        csv.push_str(&format!(",{}", reports[i].strategy));
    }
    csv.push('\n');
    for (row_idx, &snr) in grid.iter().enumerate() {
        csv.push_str(&snr.to_string());
        for &i in &order {
            csv.push_str(&format!(",{}", neg_log(reports[i].rows[row_idx].ber)));
        }
        csv.push('\n');
    }

    let mut plot = String::new();
    for (block, &i) in order.iter().enumerate() {
        if block > 0 {
            plot.push_str("\n\n");
        }
        plot.push_str(&format!(
            "# strategy={} code={}\n",
            reports[i].strategy, reports[i].code
        ));
        for row in &reports[i].rows {
            plot.push_str(&format!("{} {}\n", row.snr_db, neg_log(row.ber)));
        }
    }
    Ok(ComparisonData { csv, plot })
}
