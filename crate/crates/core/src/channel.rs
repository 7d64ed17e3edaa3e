//! AWGN channel: noise sampling, seeded random streams and per-symbol
//! likelihoods.
//!
//! `N0` is the noise power per two real dimensions and each real dimension
//! carries variance `N0/2`, for 1-D and 2-D sets alike. `SNR = Es/N0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::signal_set::SignalSet;
use crate::spectrum::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub snr_db: f64,
    pub es: f64,
    /// Noise power per two dimensions, `es / snr_linear`.
    pub n0: f64,
    /// Noise variance per real dimension, `n0 / 2`.
    pub sigma1_sq: f64,
}

impl ChannelParams {
    /// `snr_db = +inf` gives a noiseless channel.
    pub fn new(snr_db: f64, es: f64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return domain(format!("SNR must be a number above -inf dB, got {snr_db}"));
        }
        if !(es > 0.0 && es.is_finite()) {
            return domain(format!("signal energy must be positive, got {es}"));
        }
        let n0 = es / db_to_linear(snr_db);
        if !(n0 > 0.0) && snr_db != f64::INFINITY {
            return domain(format!("SNR {snr_db} dB leaves no noise power"));
        }
        Ok(ChannelParams {
            snr_db,
            es,
            n0,
            sigma1_sq: n0 / 2.0,
        })
    }

    pub fn for_set(set: &SignalSet, snr_db: f64) -> Result<Self> {
        Self::new(snr_db, set.es())
    }

    pub fn snr_linear(&self) -> f64 {
        db_to_linear(self.snr_db)
    }
}

/// Identifies an independent random stream: campaign seed, stream id, block.
///
/// Simulations cut trials into fixed-size blocks; trial `t` of stream `s` is
/// always drawn from block `t / block_len` at the same offset, so results do
/// not depend on how blocks are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub campaign: u64,
    pub stream: u64,
    pub block: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamSeed {
    pub fn new(campaign: u64, stream: u64, block: u64) -> Self {
        StreamSeed {
            campaign,
            stream,
            block,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut a = self.campaign;
        let mut b = self.stream ^ 0xA076_1D64_78BD_642F;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            let w = splitmix64(&mut a) ^ splitmix64(&mut b).rotate_left(17);
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.block);
        rng
    }
}

/// Adds noise to the points of `symbols`, writing `symbols.len() * dimension`
/// coordinates into `out`. Labels must already be validated.
pub(crate) fn add_noise_into<R: Rng + ?Sized>(
    set: &SignalSet,
    symbols: &[usize],
    sigma: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    let dim = set.dimension();
    for (k, &x) in symbols.iter().enumerate() {
        for (c, &p) in set.point(x).iter().enumerate() {
            let n: f64 = rng.sample(StandardNormal);
            out[k * dim + c] = p + sigma * n;
        }
    }
}

/// `y_i = s_{x_i} + n_i` with i.i.d. Gaussian noise of variance `N0/2` per
/// real dimension.
pub fn transmit_with<R: Rng + ?Sized>(
    set: &SignalSet,
    symbols: &[usize],
    params: &ChannelParams,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    for &x in symbols {
        set.check_label(x)?;
    }
    let dim = set.dimension();
    let mut flat = vec![0.0; symbols.len() * dim];
    add_noise_into(set, symbols, params.sigma1_sq.sqrt(), rng, &mut flat);
    Ok(flat.chunks_exact(dim).map(<[f64]>::to_vec).collect())
}

/// [`transmit_with`] drawing from the stream named by `seed`.
pub fn transmit(
    set: &SignalSet,
    symbols: &[usize],
    params: &ChannelParams,
    seed: StreamSeed,
) -> Result<Vec<Vec<f64>>> {
    transmit_with(set, symbols, params, &mut seed.rng())
}

/// Normalized posterior over the `q` labels given one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LikelihoodVector(Vec<f64>);

impl LikelihoodVector {
    /// Normalizes nonnegative finite weights; all-zero weights become uniform.
    pub fn from_weights(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return domain("likelihood weights must be finite and nonnegative");
        }
        normalize_in_place(&mut w);
        Ok(LikelihoodVector(w))
    }

    /// All mass on `label`.
    pub fn delta(q: usize, label: usize) -> Self {
        let mut v = vec![0.0; q];
        v[label] = 1.0;
        LikelihoodVector(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    /// Most likely label, lowest label on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Scales `w` to sum 1; a zero or non-finite total becomes uniform.
pub(crate) fn normalize_in_place(w: &mut [f64]) {
    let sum: f64 = w.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        let inv = 1.0 / sum;
        w.iter_mut().for_each(|p| *p *= inv);
    } else {
        let u = 1.0 / w.len() as f64;
        w.iter_mut().for_each(|p| *p = u);
    }
}

/// Fills `out` (length q) with `P(x | y) ∝ exp(-||y - s_x||² / n0)`.
/// With `n0 = 0` the mass goes to the nearest point(s).
pub(crate) fn likelihoods_into(set: &SignalSet, y: &[f64], n0: f64, out: &mut [f64]) {
    for (x, o) in out.iter_mut().enumerate() {
        *o = set
            .point(x)
            .iter()
            .zip(y)
            .map(|(s, v)| (v - s) * (v - s))
            .sum();
    }
    let min = out.iter().copied().fold(f64::INFINITY, f64::min);
    if n0 > 0.0 {
        let inv = 1.0 / n0;
        out.iter_mut().for_each(|d| *d = (-(*d - min) * inv).exp());
    } else {
        out.iter_mut().for_each(|d| *d = if *d == min { 1.0 } else { 0.0 });
    }
    normalize_in_place(out);
}

pub fn likelihoods(set: &SignalSet, y: &[f64], params: &ChannelParams) -> Result<LikelihoodVector> {
    if y.len() != set.dimension() {
        return domain(format!(
            "observation has {} coordinates, signal set is {}-D",
            y.len(),
            set.dimension()
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return domain("observation is not finite");
    }
    let mut out = vec![0.0; set.q()];
    likelihoods_into(set, y, params.n0, &mut out);
    Ok(LikelihoodVector(out))
}
