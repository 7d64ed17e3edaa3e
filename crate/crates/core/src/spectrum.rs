//! Distance spectra of the one-step synthetic channels and the bounds built
//! on them.
//!
//! For a reference input `(u1, u2)`, the good channel (u1 known) competes
//! against every `u2' != u2` and the bad channel against every `(u1' != u1, u2')`.
//! A competitor's squared distance is
//! `||s_f(u1,u2) - s_f(u1',u2')||² + ||s_u2 - s_u2'||²`.
//!
//! Spectrum distances are stored normalized by `Es`, so `d_min()` is in units
//! of `sqrt(Es)`. The union bound uses per-dimension noise variance `N0/2`,
//! which gives `Q(d/(2σ)) = Q((d/sqrt(Es)) * sqrt(SNR/2))` with `SNR = Es/N0`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::Kernel;
use crate::signal_set::SignalSet;

/// Squared distances (in `Es` units) closer than this share a spectral line.
pub const BIN_TOL: f64 = 1e-9;

/// SNR at which [`report`] ranks references by union bound.
pub const PROBE_SNR_DB: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelRole {
    Good,
    Bad,
}

impl fmt::Display for ChannelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelRole::Good => "good",
            ChannelRole::Bad => "bad",
        })
    }
}

impl std::str::FromStr for ChannelRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "good" => Ok(ChannelRole::Good),
            "bad" => Ok(ChannelRole::Bad),
            _ => domain(format!("unknown channel role `{s}` (expected good or bad)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumLine {
    /// Squared distance divided by `Es`.
    pub d_sq: f64,
    pub count: usize,
}

impl SpectrumLine {
    pub fn d(&self) -> f64 {
        self.d_sq.sqrt()
    }
}

/// Multiplicities of competitor distances seen from one reference input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumDoc", into = "SpectrumDoc")]
pub struct DistanceSpectrum {
    entries: Vec<SpectrumLine>,
    reference: (usize, usize),
    role: ChannelRole,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumDoc {
    role: ChannelRole,
    reference: [usize; 2],
    d_min: f64,
    n_min: usize,
    entries: Vec<SpectrumLine>,
}

impl From<DistanceSpectrum> for SpectrumDoc {
    fn from(s: DistanceSpectrum) -> Self {
        SpectrumDoc {
            role: s.role,
            reference: [s.reference.0, s.reference.1],
            d_min: s.d_min(),
            n_min: s.n_min(),
            entries: s.entries,
        }
    }
}

impl TryFrom<SpectrumDoc> for DistanceSpectrum {
    type Error = Error;

    fn try_from(doc: SpectrumDoc) -> Result<Self> {
        let ok_lines = !doc.entries.is_empty()
            && doc.entries.iter().all(|l| l.d_sq > 0.0 && l.count >= 1)
            && doc.entries.windows(2).all(|w| w[0].d_sq < w[1].d_sq);
        if !ok_lines {
            return domain("spectrum entries must be non-empty, sorted, positive");
        }
        let s = DistanceSpectrum {
            entries: doc.entries,
            reference: (doc.reference[0], doc.reference[1]),
            role: doc.role,
        };
        if (s.d_min() - doc.d_min).abs() > 1e-9 || s.n_min() != doc.n_min {
            return domain("spectrum d_min/n_min disagree with its entries");
        }
        Ok(s)
    }
}

impl DistanceSpectrum {
    /// Bins raw squared distances (already in `Es` units) into lines.
    pub(crate) fn from_distances(
        mut d_sq: Vec<f64>,
        reference: (usize, usize),
        role: ChannelRole,
    ) -> Self {
        d_sq.sort_by(f64::total_cmp);
        let mut entries: Vec<SpectrumLine> = Vec::new();
        for d in d_sq {
            match entries.last_mut() {
                Some(line) if d - line.d_sq <= BIN_TOL => line.count += 1,
                _ => entries.push(SpectrumLine { d_sq: d, count: 1 }),
            }
        }
        DistanceSpectrum {
            entries,
            reference,
            role,
        }
    }

    pub fn entries(&self) -> &[SpectrumLine] {
        &self.entries
    }

    pub fn reference(&self) -> (usize, usize) {
        self.reference
    }

    pub fn role(&self) -> ChannelRole {
        self.role
    }

    /// Minimum distance in units of `sqrt(Es)`.
    pub fn d_min(&self) -> f64 {
        self.entries[0].d()
    }

    /// Multiplicity of the minimum distance.
    pub fn n_min(&self) -> usize {
        self.entries[0].count
    }

    pub fn total_count(&self) -> usize {
        self.entries.iter().map(|l| l.count).sum()
    }

    /// Same lines (distances within [`BIN_TOL`], equal counts); references ignored.
    pub fn same_lines(&self, other: &DistanceSpectrum) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.count == b.count && (a.d_sq - b.d_sq).abs() <= BIN_TOL)
    }

    /// Orders spectra by quality: walking from the smallest distance, a larger
    /// distance wins, then a smaller count. `Greater` means `self` is better.
    pub fn quality_cmp(&self, other: &DistanceSpectrum) -> Ordering {
        for (a, b) in self.entries.iter().zip(&other.entries) {
            if (a.d_sq - b.d_sq).abs() > BIN_TOL {
                return a.d_sq.total_cmp(&b.d_sq);
            }
            if a.count != b.count {
                return b.count.cmp(&a.count);
            }
        }
        other.entries.len().cmp(&self.entries.len())
    }
}

impl fmt::Display for DistanceSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} @ {:.5}", l.count, l.d())?;
        }
        write!(f, "}}")
    }
}

pub(crate) fn check_q(set: &SignalSet, kernel: &Kernel) -> Result<()> {
    if set.q() != kernel.q() {
        return Err(Error::AlphabetMismatch {
            left: "signal set",
            left_q: set.q(),
            right: "kernel",
            right_q: kernel.q(),
        });
    }
    Ok(())
}

/// Good-channel squared distance between `(u1, u2)` and `(u1, u2p)`, in
/// coordinate units.
pub fn good_distance(
    set: &SignalSet,
    kernel: &Kernel,
    u1: usize,
    u2: usize,
    u2p: usize,
) -> Result<f64> {
    check_q(set, kernel)?;
    for v in [u1, u2, u2p] {
        set.check_label(v)?;
    }
    if u2 == u2p {
        return domain("good-channel distance needs u2 != u2'");
    }
    Ok(set.dist_sq_unchecked(kernel.f(u1, u2), kernel.f(u1, u2p)) + set.dist_sq_unchecked(u2, u2p))
}

/// Good-channel squared distances (in `Es` units) from `(u1, u2)` to every
/// `u2' != u2`, using a precomputed distance matrix.
pub(crate) fn good_row(dm: &[f64], es: f64, kernel: &Kernel, u1: usize, u2: usize) -> Vec<f64> {
    let q = kernel.q();
    let x1 = kernel.f(u1, u2);
    (0..q)
        .filter(|&v| v != u2)
        .map(|v| (dm[x1 * q + kernel.f(u1, v)] + dm[u2 * q + v]) / es)
        .collect()
}

fn bad_row(dm: &[f64], es: f64, kernel: &Kernel, u1: usize, u2: usize) -> Vec<f64> {
    let q = kernel.q();
    let x1 = kernel.f(u1, u2);
    let mut out = Vec::with_capacity(q * (q - 1));
    for a in (0..q).filter(|&a| a != u1) {
        for b in 0..q {
            out.push((dm[x1 * q + kernel.f(a, b)] + dm[u2 * q + b]) / es);
        }
    }
    out
}

fn check_reference(set: &SignalSet, kernel: &Kernel, u1: usize, u2: usize) -> Result<()> {
    check_q(set, kernel)?;
    set.check_label(u1)?;
    set.check_label(u2)
}

pub fn good_spectrum(
    set: &SignalSet,
    kernel: &Kernel,
    u1: usize,
    u2: usize,
) -> Result<DistanceSpectrum> {
    check_reference(set, kernel, u1, u2)?;
    let dm = set.distance_matrix();
    let row = good_row(&dm, set.es(), kernel, u1, u2);
    Ok(DistanceSpectrum::from_distances(row, (u1, u2), ChannelRole::Good))
}

pub fn bad_spectrum(
    set: &SignalSet,
    kernel: &Kernel,
    u1: usize,
    u2: usize,
) -> Result<DistanceSpectrum> {
    check_reference(set, kernel, u1, u2)?;
    let dm = set.distance_matrix();
    let row = bad_row(&dm, set.es(), kernel, u1, u2);
    Ok(DistanceSpectrum::from_distances(row, (u1, u2), ChannelRole::Bad))
}

/// Spectra from every reference `(u1, u2)`, indexed `u1 * q + u2`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub role: ChannelRole,
    pub spectra: Vec<DistanceSpectrum>,
    /// Reference with the largest union bound at [`PROBE_SNR_DB`].
    pub worst_reference: (usize, usize),
    /// All references share the same lines.
    pub uniform: bool,
}

impl SpectrumReport {
    pub fn worst(&self) -> &DistanceSpectrum {
        let q = (self.spectra.len() as f64).sqrt().round() as usize;
        &self.spectra[self.worst_reference.0 * q + self.worst_reference.1]
    }
}

pub fn all_spectra(set: &SignalSet, kernel: &Kernel, role: ChannelRole) -> Result<Vec<DistanceSpectrum>> {
    check_q(set, kernel)?;
    let q = set.q();
    let dm = set.distance_matrix();
    let es = set.es();
    Ok((0..q * q)
        .map(|r| {
            let (u1, u2) = (r / q, r % q);
            let row = match role {
                ChannelRole::Good => good_row(&dm, es, kernel, u1, u2),
                ChannelRole::Bad => bad_row(&dm, es, kernel, u1, u2),
            };
            DistanceSpectrum::from_distances(row, (u1, u2), role)
        })
        .collect())
}

pub fn report(set: &SignalSet, kernel: &Kernel, role: ChannelRole) -> Result<SpectrumReport> {
    let spectra = all_spectra(set, kernel, role)?;
    let uniform = spectra.iter().all(|s| s.same_lines(&spectra[0]));
    let snr = db_to_linear(PROBE_SNR_DB);
    let mut worst = 0;
    let mut worst_pe = f64::NEG_INFINITY;
    for (i, s) in spectra.iter().enumerate() {
        let pe = union_bound(s, snr);
        if pe > worst_pe {
            worst_pe = pe;
            worst = i;
        }
    }
    let q = set.q();
    Ok(SpectrumReport {
        role,
        spectra,
        worst_reference: (worst / q, worst % q),
        uniform,
    })
}

/// Which good-channel references an equidistance check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquidistancePolicy {
    AllReferences,
    FixedU1(usize),
}

/// True iff every covered good-channel spectrum is one line of multiplicity `q - 1`.
pub fn is_equidistant(set: &SignalSet, kernel: &Kernel, policy: EquidistancePolicy) -> Result<bool> {
    check_q(set, kernel)?;
    let q = set.q();
    let dm = set.distance_matrix();
    let u1s: Vec<usize> = match policy {
        EquidistancePolicy::AllReferences => (0..q).collect(),
        EquidistancePolicy::FixedU1(v) => {
            set.check_label(v)?;
            vec![v]
        }
    };
    Ok(u1s.iter().all(|&u1| {
        (0..q).all(|u2| {
            let s = DistanceSpectrum::from_distances(
                good_row(&dm, set.es(), kernel, u1, u2),
                (u1, u2),
                ChannelRole::Good,
            );
            s.entries.len() == 1
        })
    }))
}

/// `Σ_{u2'} d²(u1, u2, u2')` in coordinate units (the `u2' = u2` term is zero).
///
/// For group-matched sets (PSK) this equals `2 Σ_k ||s_k - s_0||²` for any
/// valid kernel and reference; other sets are accepted but the identity need
/// not hold (see [`SignalSet::is_group_matched`]).
pub fn conservation_sum(set: &SignalSet, kernel: &Kernel, u1: usize, u2: usize) -> Result<f64> {
    check_reference(set, kernel, u1, u2)?;
    let x1 = kernel.f(u1, u2);
    Ok((0..set.q())
        .map(|v| set.dist_sq_unchecked(x1, kernel.f(u1, v)) + set.dist_sq_unchecked(u2, v))
        .sum())
}

/// `2 Σ_{k=1}^{q-1} ||s_k - s_0||²`.
pub fn conserved_total(set: &SignalSet) -> f64 {
    2.0 * (1..set.q()).map(|k| set.dist_sq_unchecked(k, 0)).sum::<f64>()
}

/// Largest good-channel minimum distance compatible with distance
/// conservation: `sqrt(2/(q-1) Σ_k ||s_k - s_0||²)`, in coordinate units.
pub fn equidistant_bound(set: &SignalSet) -> f64 {
    (conserved_total(set) / (set.q() - 1) as f64).sqrt()
}

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `Σ N(d) Q((d/sqrt(Es)) sqrt(SNR/2))` with `SNR = Es/N0` (linear).
pub fn union_bound(spectrum: &DistanceSpectrum, snr_linear: f64) -> f64 {
    let scale = (snr_linear / 2.0).sqrt();
    spectrum
        .entries
        .iter()
        .map(|l| l.count as f64 * q_function(l.d() * scale))
        .sum()
}

/// `(snr_db, bound)` pairs over an SNR grid in dB.
pub fn bound_curve(spectrum: &DistanceSpectrum, snr_db: &[f64]) -> Vec<(f64, f64)> {
    snr_db
        .iter()
        .map(|&s| (s, union_bound(spectrum, db_to_linear(s))))
        .collect()
}
