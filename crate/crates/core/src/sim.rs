//! Monte Carlo campaigns over the one-step synthetic channels and full codes.
//!
//! Trials are cut into fixed blocks. Block `b` of SNR point `i` always draws
//! from stream `(seed, tag | i, b)`, blocks are counted independently and
//! merged in block order, so results are bit-identical for any worker count.
//! With early stopping, blocks are evaluated in waves and the stop point is
//! found by scanning the wave in block order.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_noise_into, likelihoods_into, ChannelParams, StreamSeed};
use crate::error::{domain, Error, Result};
use crate::format::sig6;
use crate::kernel::Kernel;
use crate::parallel::with_threads;
use crate::polar::{
    genie_reliabilities, random_frame, select_information_set, PolarCodeConfig, ScDecoder, POLAR_BLOCK,
};
use crate::signal_set::SignalSet;
use crate::spectrum::{check_q, db_to_linear, union_bound, ChannelRole, DistanceSpectrum};

/// Trials per random block for one-step campaigns.
pub const SYMBOL_BLOCK: u64 = 4096;
/// Blocks evaluated together between early-stop checks.
pub const STOP_WAVE: u64 = 16;
/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

const TAG_GOOD: u64 = 1 << 60;
const TAG_BAD: u64 = 2 << 60;
const TAG_FER: u64 = 3 << 60;
const TAG_CONSTRUCT: u64 = 4 << 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Campaign {
    GoodChannel,
    BadChannel,
    Fer,
}

impl Campaign {
    /// Tag used in output file names.
    pub fn role_tag(self) -> &'static str {
        match self {
            Campaign::GoodChannel => "good",
            Campaign::BadChannel => "bad",
            Campaign::Fer => "fer",
        }
    }

    pub fn channel_role(self) -> Option<ChannelRole> {
        match self {
            Campaign::GoodChannel => Some(ChannelRole::Good),
            Campaign::BadChannel => Some(ChannelRole::Bad),
            Campaign::Fer => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub errors: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl SimPoint {
    pub fn new(snr_db: f64, trials: u64, errors: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(errors, trials, Z_95);
        SimPoint {
            snr_db,
            trials,
            errors,
            rate: errors as f64 / trials as f64,
            ci_lo,
            ci_hi,
        }
    }
}

/// Wilson score interval for `errors` successes in `trials` draws.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    /// Genie trials per construction run.
    pub trials: u64,
    /// `None` constructs at every simulated SNR; otherwise once at this SNR.
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub campaign: Campaign,
    pub set: SignalSet,
    /// One kernel for one-step campaigns, one per stage for codes.
    pub kernels: Vec<Kernel>,
    pub seed: u64,
    pub max_trials: u64,
    pub early_stop_errors: Option<u64>,
    pub block_trials: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub info_symbols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub construction: Option<Construction>,
    /// Frozen set used at each point (FER only).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub frozen: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub points: Vec<SimPoint>,
    pub bound_overlay: Option<Vec<f64>>,
    pub metadata: SimMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Trial budget per SNR point.
    pub trials: u64,
    pub seed: u64,
    /// Stop a point once at least this many errors are seen.
    pub early_stop_errors: Option<u64>,
    pub threads: Option<usize>,
}

impl SimOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimOptions {
            trials,
            seed,
            early_stop_errors: None,
            threads: None,
        }
    }

    fn check(&self, snr_db: &[f64]) -> Result<()> {
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        if snr_db.is_empty() {
            return domain("SNR list is empty");
        }
        if let Some(&bad) = snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return domain(format!("invalid SNR {bad} dB"));
        }
        if self.early_stop_errors == Some(0) {
            return domain("early-stop error count must be at least 1");
        }
        Ok(())
    }
}

/// Runs `count(block, n)` over the blocks of one point and returns
/// `(trials, errors)`. Must be called inside the campaign's thread pool.
fn run_blocks<F>(trials: u64, block: u64, early_stop: Option<u64>, count: F) -> (u64, u64)
where
    F: Fn(u64, u64) -> u64 + Sync,
{
    let blocks = trials.div_ceil(block);
    let size = |b: u64| block.min(trials - b * block);
    match early_stop {
        None => {
            let errors = (0..blocks).into_par_iter().map(|b| count(b, size(b))).sum();
            (trials, errors)
        }
        Some(limit) => {
            let (mut done, mut errors) = (0u64, 0u64);
            let mut start = 0;
            while start < blocks {
                let end = (start + STOP_WAVE).min(blocks);
                let wave: Vec<u64> = (start..end).into_par_iter().map(|b| count(b, size(b))).collect();
                for (b, e) in (start..end).zip(wave) {
                    done += size(b);
                    errors += e;
                    if errors >= limit {
                        return (done, errors);
                    }
                }
                start = end;
            }
            (done, errors)
        }
    }
}

fn one_step_campaign(
    campaign: Campaign,
    set: &SignalSet,
    kernel: &Kernel,
    snr_db: &[f64],
    opts: &SimOptions,
) -> Result<SimResult> {
    check_q(set, kernel)?;
    opts.check(snr_db)?;
    let tag = match campaign {
        Campaign::GoodChannel => TAG_GOOD,
        _ => TAG_BAD,
    };
    let points = with_threads(opts.threads, || -> Result<Vec<SimPoint>> {
        snr_db
            .iter()
            .enumerate()
            .map(|(i, &snr)| {
                let params = ChannelParams::for_set(set, snr)?;
                let (trials, errors) = run_blocks(opts.trials, SYMBOL_BLOCK, opts.early_stop_errors, |b, n| {
                    let mut rng = StreamSeed::new(opts.seed, tag | i as u64, b).rng();
                    match campaign {
                        Campaign::GoodChannel => good_block(set, kernel, &params, &mut rng, n),
                        _ => bad_block(set, kernel, &params, &mut rng, n),
                    }
                });
                Ok(SimPoint::new(snr, trials, errors))
            })
            .collect()
    })??;
    Ok(SimResult {
        points,
        bound_overlay: None,
        metadata: SimMetadata {
            campaign,
            set: set.clone(),
            kernels: vec![kernel.clone()],
            seed: opts.seed,
            max_trials: opts.trials,
            early_stop_errors: opts.early_stop_errors,
            block_trials: SYMBOL_BLOCK,
            info_symbols: None,
            construction: None,
            frozen: Vec::new(),
        },
    })
}

/// Sends `(f(u1, u2), u2)` and decides `u2` knowing `u1`. ML here is the
/// minimum summed squared distance.
fn good_block<R: Rng>(set: &SignalSet, k: &Kernel, p: &ChannelParams, rng: &mut R, n: u64) -> u64 {
    let q = set.q();
    let dim = set.dimension();
    let sigma = p.sigma1_sq.sqrt();
    let mut y = vec![0.0; 2 * dim];
    let mut errors = 0;
    for _ in 0..n {
        let u1 = rng.gen_range(0..q);
        let u2 = rng.gen_range(0..q);
        add_noise_into(set, &[k.f(u1, u2), u2], sigma, rng, &mut y);
        let (y1, y2) = y.split_at(dim);
        let mut best = (f64::INFINITY, 0);
        for b in 0..q {
            let d = sq_dist(y1, set.point(k.f(u1, b))) + sq_dist(y2, set.point(b));
            if d < best.0 {
                best = (d, b);
            }
        }
        errors += u64::from(best.1 != u2);
    }
    errors
}

/// Sends `(f(u1, u2), u2)` and decides `u1` with `u2` unknown.
fn bad_block<R: Rng>(set: &SignalSet, k: &Kernel, p: &ChannelParams, rng: &mut R, n: u64) -> u64 {
    let q = set.q();
    let dim = set.dimension();
    let sigma = p.sigma1_sq.sqrt();
    let mut y = vec![0.0; 2 * dim];
    let (mut w1, mut w2) = (vec![0.0; q], vec![0.0; q]);
    let mut errors = 0;
    for _ in 0..n {
        let u1 = rng.gen_range(0..q);
        let u2 = rng.gen_range(0..q);
        add_noise_into(set, &[k.f(u1, u2), u2], sigma, rng, &mut y);
        likelihoods_into(set, &y[..dim], p.n0, &mut w1);
        likelihoods_into(set, &y[dim..], p.n0, &mut w2);
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..q {
            let s: f64 = (0..q).map(|b| w1[k.f(a, b)] * w2[b]).sum();
            if s > best.0 {
                best = (s, a);
            }
        }
        errors += u64::from(best.1 != u1);
    }
    errors
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symbol error rate of `u2` on the good channel, `u1` known.
pub fn simulate_good_channel(set: &SignalSet, kernel: &Kernel, snr_db: &[f64], opts: &SimOptions) -> Result<SimResult> {
    one_step_campaign(Campaign::GoodChannel, set, kernel, snr_db, opts)
}

/// Symbol error rate of `u1` on the bad channel, `u2` unknown.
pub fn simulate_bad_channel(set: &SignalSet, kernel: &Kernel, snr_db: &[f64], opts: &SimOptions) -> Result<SimResult> {
    one_step_campaign(Campaign::BadChannel, set, kernel, snr_db, opts)
}

/// Frame error rate of SC decoding with `k` information symbols.
///
/// With `construction = None` the frozen set of `config` is used as is and
/// must hold exactly `N - k` indices. Otherwise the frozen set comes from
/// genie reliabilities, drawn on a stream separate from the FER trials.
pub fn simulate_fer(
    config: &PolarCodeConfig,
    k: usize,
    snr_db: &[f64],
    opts: &SimOptions,
    construction: Option<Construction>,
) -> Result<SimResult> {
    opts.check(snr_db)?;
    let big_n = config.block_len();
    if k > big_n {
        return domain(format!("K={k} exceeds N={big_n}"));
    }
    match construction {
        None if config.frozen().len() != big_n - k => {
            return domain(format!(
                "config freezes {} indices but K={k} needs {}",
                config.frozen().len(),
                big_n - k
            ));
        }
        Some(c) if c.trials == 0 => return domain("construction trials must be at least 1"),
        Some(Construction { snr_db: Some(s), .. }) if s.is_nan() || s == f64::NEG_INFINITY => {
            return domain(format!("invalid construction SNR {s} dB"));
        }
        _ => {}
    }

    let construct = |snr: f64, stream: u64| -> Result<Vec<usize>> {
        let c = construction.expect("construction requested");
        let params = ChannelParams::for_set(config.set(), snr)?;
        let rel = genie_reliabilities(config, &params, c.trials, opts.seed, TAG_CONSTRUCT | stream, opts.threads)?;
        select_information_set(&rel.error_rate, k)
    };
    let fixed = match construction {
        None => Some(config.frozen().to_vec()),
        Some(Construction { snr_db: Some(s), .. }) => Some(construct(s, u32::MAX as u64)?),
        Some(Construction { snr_db: None, .. }) => None,
    };

    let mut points = Vec::with_capacity(snr_db.len());
    let mut frozen_sets = Vec::with_capacity(snr_db.len());
    for (i, &snr) in snr_db.iter().enumerate() {
        let frozen = match &fixed {
            Some(f) => f.clone(),
            None => construct(snr, i as u64)?,
        };
        let mut cfg = config.clone();
        cfg.set_frozen(frozen.clone())?;
        let info = cfg.information_set();
        let params = ChannelParams::for_set(cfg.set(), snr)?;
        let (trials, errors) = with_threads(opts.threads, || {
            run_blocks(opts.trials, POLAR_BLOCK, opts.early_stop_errors, |b, n| {
                fer_block(&cfg, &info, &params, opts.seed, TAG_FER | i as u64, b, n)
            })
        })?;
        points.push(SimPoint::new(snr, trials, errors));
        frozen_sets.push(frozen);
    }
    Ok(SimResult {
        points,
        bound_overlay: None,
        metadata: SimMetadata {
            campaign: Campaign::Fer,
            set: config.set().clone(),
            kernels: config.stage_kernels().to_vec(),
            seed: opts.seed,
            max_trials: opts.trials,
            early_stop_errors: opts.early_stop_errors,
            block_trials: POLAR_BLOCK,
            info_symbols: Some(k),
            construction,
            frozen: frozen_sets,
        },
    })
}

fn fer_block(
    cfg: &PolarCodeConfig,
    info: &[usize],
    params: &ChannelParams,
    seed: u64,
    stream: u64,
    block: u64,
    n: u64,
) -> u64 {
    let big_n = cfg.block_len();
    let mut rng = StreamSeed::new(seed, stream, block).rng();
    let mut dec = ScDecoder::new(cfg);
    let (mut u, mut x, mut tmp) = (vec![0; big_n], vec![0; big_n], vec![0; big_n]);
    let mut y = vec![0.0; big_n * cfg.set().dimension()];
    let mut ch = vec![0.0; big_n * cfg.q()];
    let mut errors = 0;
    for _ in 0..n {
        random_frame(cfg, params, &mut rng, Some(info), &mut u, &mut x, &mut tmp, &mut y, &mut ch);
        let uhat = dec.decode_flat(&ch);
        errors += u64::from(info.iter().any(|&j| uhat[j] != u[j]));
    }
    errors
}

/// Attaches union-bound values of `spectrum` at the result's SNR points.
pub fn overlay_bounds(result: &SimResult, spectrum: &DistanceSpectrum) -> Result<SimResult> {
    let role = result.metadata.campaign.channel_role();
    if role != Some(spectrum.role()) {
        return Err(Error::RoleMismatch {
            result: result.metadata.campaign.role_tag().to_string(),
            spectrum: spectrum.role().to_string(),
        });
    }
    let mut out = result.clone();
    out.bound_overlay = Some(
        result
            .points
            .iter()
            .map(|p| union_bound(spectrum, db_to_linear(p.snr_db)))
            .collect(),
    );
    Ok(out)
}

impl SimResult {
    pub const CSV_HEADER: &'static str = "snr_db,trials,errors,rate,ci_lo,ci_hi,bound";

    /// CSV with six significant digits; `bound` is empty without an overlay.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for (i, p) in self.points.iter().enumerate() {
            let bound = self
                .bound_overlay
                .as_ref()
                .map(|b| sig6(b[i]))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                sig6(p.snr_db),
                p.trials,
                p.errors,
                sig6(p.rate),
                sig6(p.ci_lo),
                sig6(p.ci_hi),
                bound
            );
        }
        s
    }

    /// `<campaign>.<role>.csv`
    pub fn csv_file_name(&self, campaign: &str) -> String {
        format!("{campaign}.{}.csv", self.metadata.campaign.role_tag())
    }

    /// SNR where the rate curve crosses `target`, interpolating `log10(rate)`
    /// linearly between the first bracketing pair of points with errors.
    pub fn snr_at_rate(&self, target: f64) -> Option<f64> {
        snr_at_rate(&self.points, target)
    }
}

/// See [`SimResult::snr_at_rate`]. Points must be sorted by SNR.
pub fn snr_at_rate(points: &[SimPoint], target: f64) -> Option<f64> {
    let usable: Vec<&SimPoint> = points.iter().filter(|p| p.errors > 0).collect();
    let lt = target.log10();
    for w in usable.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.rate >= target && b.rate <= target {
            let (la, lb) = (a.rate.log10(), b.rate.log10());
            if la == lb {
                return Some(a.snr_db);
            }
            return Some(a.snr_db + (la - lt) / (la - lb) * (b.snr_db - a.snr_db));
        }
    }
    None
}

/// `start:stop:step` inclusive of `stop` up to rounding.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Domain(format!("bad number `{s}` in SNR grid `{text}`")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return domain(format!("SNR grid `{text}` needs start <= stop and step > 0"));
            }
            let count = ((b - a) / step + 1e-9).floor() as u64 + 1;
            if count > 100_000 {
                return domain(format!("SNR grid `{text}` has too many points"));
            }
            Ok((0..count).map(|i| a + i as f64 * step).collect())
        }
        _ => domain(format!("SNR grid `{text}` must be `start:stop:step` or a single value")),
    }
}
