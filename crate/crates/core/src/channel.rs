//! BPSK over AWGN: modulation, noise, LLRs, and labeled training batches.

use crate::codes::{LinearCode, Permutation};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("LLR computation requires sigma > 0")]
    ZeroSigma,
    #[error(
        "batch starved after {attempts} attempts: {positives} positive / {negatives} negative \
         labels, need {quota} of each"
    )]
    LabelStarvation { attempts: usize, positives: usize, negatives: usize, quota: usize },
}

/// Channel operating point: sigma is derived from the normalized SNR.
#[derive(Debug, Clone)]
pub struct ChannelConfig {
    pub ebn0_db: f64,
    pub rate: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(ebn0_db: f64, rate: f64, seed: u64) -> Self {
        Self { ebn0_db, rate, sigma: sigma_from_ebn0(ebn0_db, rate), seed }
    }
}

/// BPSK: 0 → +1, 1 → −1.
pub fn bpsk_modulate(c: &[u8]) -> Vec<f64> {
    c.iter().map(|&b| 1.0 - 2.0 * b as f64).collect()
}

/// Add i.i.d. N(0, σ²) noise.
pub fn awgn(x: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    x.iter().map(|&v| v + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// AWGN channel LLRs: ℓ = 2y/σ² (σ assumed known at the receiver).
pub fn llr(y: &[f64], sigma: f64) -> Result<Vec<f64>, ChannelError> {
    if sigma <= 0.0 {
        return Err(ChannelError::ZeroSigma);
    }
    let scale = 2.0 / (sigma * sigma);
    Ok(y.iter().map(|&v| scale * v).collect())
}

/// Noise level for a normalized SNR (E_b/N_0) in dB at a given code rate:
/// σ = sqrt(1/(2·R·10^(dB/10))).
pub fn sigma_from_ebn0(ebn0_db: f64, rate: f64) -> f64 {
    assert!(rate > 0.0 && rate <= 1.0, "rate must be in (0, 1]");
    (1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))).sqrt()
}

/// One training example: the unpermuted noisy word, the permutation tried
/// on it, and whether decoding the permuted word succeeded.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub y: Vec<f64>,
    pub snr_db: f64,
    pub perm_index: usize,
    pub label: u8,
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    /// Total samples per batch; half get label 1, half label 0.
    pub batch_size: usize,
    /// Per-word SNR drawn uniformly from this range (dB).
    pub snr_db_range: (f64, f64),
    pub seed: u64,
    /// Attempt cap before declaring label starvation.
    pub max_attempts: usize,
}

impl BatchConfig {
    pub fn new(batch_size: usize, seed: u64) -> Self {
        Self {
            batch_size,
            snr_db_range: (1.0, 7.0),
            seed,
            max_attempts: batch_size.max(1) * 1000,
        }
    }
}

/// RNG stream for one generation attempt: every attempt owns a counter
/// stream of the batch seed, so results do not depend on thread count or
/// acceptance history.
fn attempt_rng(seed: u64, batch_index: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((batch_index << 32) | attempt);
    rng
}

fn run_attempt(
    code: &LinearCode,
    perms: &[Permutation],
    cfg: &BatchConfig,
    batch_index: u64,
    attempt: u64,
    label_fn: &(impl Fn(&[f64]) -> bool + Sync),
) -> LabeledSample {
    let mut rng = attempt_rng(cfg.seed, batch_index, attempt);
    let (lo, hi) = cfg.snr_db_range;
    let snr_db = if lo == hi { lo } else { rng.random_range(lo..hi) };
    let perm_index = rng.random_range(0..perms.len());
    let sigma = sigma_from_ebn0(snr_db, code.rate());
    let y = awgn(&bpsk_modulate(&vec![0; code.n]), sigma, &mut rng);
    let llr_perm =
        perms[perm_index].permute(&llr(&y, sigma).expect("sigma > 0 by construction"));
    let label = label_fn(&llr_perm) as u8;
    LabeledSample { y, snr_db, perm_index, label }
}

/// Generate one class-balanced training batch.
///
/// The all-zero codeword is transmitted at a per-word SNR drawn from the
/// configured range; a random permutation is applied to each word's LLRs
/// and `label_fn` (the base decoder's success flag) provides the label.
/// Attempts are consumed in a fixed order and rejection-sampled until both
/// label classes hold batch_size/2 samples, so a given (seed, batch_index)
/// always yields the same batch.
pub fn generate_training_batch(
    code: &LinearCode,
    perms: &[Permutation],
    cfg: &BatchConfig,
    batch_index: u64,
    label_fn: &(impl Fn(&[f64]) -> bool + Sync),
) -> Result<Vec<LabeledSample>, ChannelError> {
    assert!(cfg.batch_size >= 2 && cfg.batch_size % 2 == 0, "batch size must be even");
    assert!(!perms.is_empty(), "permutation list must be non-empty");
    let quota = cfg.batch_size / 2;
    let mut out = Vec::with_capacity(cfg.batch_size);
    let (mut positives, mut negatives) = (0usize, 0usize);
    let mut attempt = 0u64;
    const CHUNK: u64 = 256;
    while (positives < quota || negatives < quota) && (attempt as usize) < cfg.max_attempts {
        let hi = (attempt + CHUNK).min(cfg.max_attempts as u64);
        let chunk: Vec<LabeledSample> = (attempt..hi)
            .into_par_iter()
            .map(|a| run_attempt(code, perms, cfg, batch_index, a, label_fn))
            .collect();
        for s in chunk {
            let bucket = if s.label == 1 { &mut positives } else { &mut negatives };
            if *bucket < quota {
                *bucket += 1;
                out.push(s);
            }
            if positives == quota && negatives == quota {
                break;
            }
        }
        attempt = hi;
    }
    if positives < quota || negatives < quota {
        return Err(ChannelError::LabelStarvation {
            attempts: attempt as usize,
            positives,
            negatives,
            quota,
        });
    }
    Ok(out)
}

/// CSV dump of a batch: `snr_db,perm_index,label,y_0..y_{n−1}`.
pub fn dataset_csv(samples: &[LabeledSample]) -> String {
    let n = samples.first().map_or(0, |s| s.y.len());
    let mut out = String::from("snr_db,perm_index,label");
    for i in 0..n {
        out.push_str(&format!(",y_{i}"));
    }
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{},{}", s.snr_db, s.perm_index, s.label));
        for v in &s.y {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
