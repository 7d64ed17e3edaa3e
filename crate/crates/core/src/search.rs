//! Exhaustive search for `u1 ⊕ π(u2)` kernels with the best good-channel
//! distance spectrum, and root-finding for the equidistant signal sets.
//!
//! Candidates are canonical (`π(0) = 0`): replacing `π` by `π + c` turns
//! `f(u1, u2)` into `f(u1 + c, u2)`, which only relabels the references and
//! leaves the worst-reference spectrum unchanged.
//!
//! Scoring: a candidate is judged by its worst reference (the least good
//! spectrum over all `q²` references under [`DistanceSpectrum::quality_cmp`]).
//! The best score wins; ties go to the lexicographically smallest `π`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{permutation_kernel, Permutation};
use crate::parallel::with_threads;
use crate::signal_set::{pam3_with_ratio, rotated_quad, SignalSet};
use crate::spectrum::{good_row, ChannelRole, DistanceSpectrum};

pub const MAX_EXHAUSTIVE_Q: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    /// One spectral line with multiplicity `q - 1`.
    Equidistant,
    /// Two lines, all but one competitor at `d_min`.
    AlmostEquidistant,
    BestFound,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub best_pi: Permutation,
    /// Worst-reference good-channel spectrum of `best_pi`.
    pub spectrum: DistanceSpectrum,
    pub certificate: Certificate,
    pub explored: u64,
    /// Every canonical permutation scoring equal to `best_pi`, in lexicographic
    /// order. Only filled when requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub optima: Vec<Permutation>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    pub all_optima: bool,
    pub threads: Option<usize>,
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// The `rank`-th permutation (lexicographic) of `1..q`, prefixed with 0.
fn canonical_unrank(q: usize, mut rank: u64) -> Permutation {
    let mut pool: Vec<usize> = (1..q).collect();
    let mut image = Vec::with_capacity(q);
    image.push(0);
    for left in (1..q).rev() {
        let block = factorial(left - 1) as u64;
        let idx = (rank / block) as usize;
        rank %= block;
        image.push(pool.remove(idx));
    }
    Permutation::new(image).expect("unranked permutation is a bijection")
}

/// Least good spectrum over every reference of `u1 ⊕ π(u2)`.
pub fn worst_good_spectrum(set: &SignalSet, dm: &[f64], pi: &Permutation) -> DistanceSpectrum {
    let kernel = permutation_kernel(pi);
    let q = set.q();
    let mut worst: Option<DistanceSpectrum> = None;
    for u1 in 0..q {
        for u2 in 0..q {
            let s = DistanceSpectrum::from_distances(
                good_row(dm, set.es(), &kernel, u1, u2),
                (u1, u2),
                ChannelRole::Good,
            );
            if worst.as_ref().is_none_or(|w| s.quality_cmp(w) == Ordering::Less) {
                worst = Some(s);
            }
        }
    }
    worst.expect("q >= 2")
}

pub fn certify(spectrum: &DistanceSpectrum, q: usize) -> Certificate {
    let lines = spectrum.entries();
    if lines.len() == 1 {
        Certificate::Equidistant
    } else if lines.len() == 2 && lines[0].count + 2 == q {
        Certificate::AlmostEquidistant
    } else {
        Certificate::BestFound
    }
}

/// Scores all `(q-1)!` canonical permutations of `set`.
pub fn search_permutations(set: &SignalSet, opts: SearchOptions) -> Result<SearchResult> {
    let q = set.q();
    if q > MAX_EXHAUSTIVE_Q {
        return Err(Error::SearchTooLarge {
            q,
            candidates: factorial(q - 1),
            limit: MAX_EXHAUSTIVE_Q,
        });
    }
    let total = factorial(q - 1) as u64;
    let dm = set.distance_matrix();
    let scores: Vec<DistanceSpectrum> = with_threads(opts.threads, || {
        (0..total)
            .into_par_iter()
            .map(|rank| worst_good_spectrum(set, &dm, &canonical_unrank(q, rank)))
            .collect()
    })?;

    let mut best = 0usize;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.quality_cmp(&scores[best]) == Ordering::Greater {
            best = i;
        }
    }
    let optima = if opts.all_optima {
        scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.quality_cmp(&scores[best]) == Ordering::Equal)
            .map(|(i, _)| canonical_unrank(q, i as u64))
            .collect()
    } else {
        Vec::new()
    };
    let spectrum = scores[best].clone();
    Ok(SearchResult {
        best_pi: canonical_unrank(q, best as u64),
        certificate: certify(&spectrum, q),
        spectrum,
        explored: total,
        optima,
    })
}

/// Root of a continuous `f` with a sign change on `[lo, hi]`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    assert!(f_lo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Residual `||s0-s1||² + ||s0-s2||² - 2||s0-s3||²` of a 4-point set.
pub fn quad_residual(set: &SignalSet) -> f64 {
    let d = |i, j| set.dist_sq_unchecked(i, j);
    d(0, 1) + d(0, 2) - 2.0 * d(0, 3)
}

/// Residual `||s0-s1||² + ||s0-s2||² - 2||s1-s2||²` of a 3-point set.
pub fn pam3_residual(set: &SignalSet) -> f64 {
    let d = |i, j| set.dist_sq_unchecked(i, j);
    d(0, 1) + d(0, 2) - 2.0 * d(1, 2)
}

/// Finds the rotation `x = ||s0 - s1||` that zeroes [`quad_residual`] over
/// [`rotated_quad`] geometries.
pub fn optimize_quad_rotation() -> (f64, SignalSet) {
    let g = |x: f64| quad_residual(&rotated_quad(x).expect("bracket inside (0, 2)"));
    let x = bisect(g, 1e-6, 2.0 - 1e-6);
    (x, rotated_quad(x).expect("root inside (0, 2)"))
}

/// Finds the gap ratio `β/α` that zeroes [`pam3_residual`] for collinear
/// points with gaps `α = 1` and `β`.
pub fn optimize_pam3_shift() -> (f64, SignalSet) {
    let g = |r: f64| pam3_residual(&pam3_with_ratio(r).expect("positive ratio"));
    let r = bisect(g, 1e-6, 10.0);
    (r, pam3_with_ratio(r).expect("positive ratio"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_set::psk;

    #[test]
    fn unrank_is_lexicographic() {
        let all: Vec<_> = (0..6).map(|r| canonical_unrank(4, r).image().to_vec()).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1, 2, 3],
                vec![0, 1, 3, 2],
                vec![0, 2, 1, 3],
                vec![0, 2, 3, 1],
                vec![0, 3, 1, 2],
                vec![0, 3, 2, 1],
            ]
        );
    }

    #[test]
    fn q5_finds_equidistant_pi1() {
        let r = search_permutations(&psk(5, 1.0).unwrap(), SearchOptions { all_optima: true, threads: None })
            .unwrap();
        assert_eq!(r.best_pi.image(), &[0, 2, 4, 1, 3]);
        assert_eq!(r.certificate, Certificate::Equidistant);
        assert_eq!(r.explored, 24);
        let optima: Vec<_> = r.optima.iter().map(|p| p.image().to_vec()).collect();
        assert_eq!(optima, vec![vec![0, 2, 4, 1, 3], vec![0, 3, 1, 4, 2]]);
        assert!((r.spectrum.d_min() - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn q3_identity_is_equidistant() {
        let r = search_permutations(&psk(3, 1.0).unwrap(), SearchOptions::default()).unwrap();
        assert!(r.best_pi.is_identity());
        assert_eq!(r.certificate, Certificate::Equidistant);
        assert_eq!(r.explored, 2);
    }

    #[test]
    fn refuses_large_q() {
        let err = search_permutations(&psk(11, 1.0).unwrap(), SearchOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SearchTooLarge { q: 11, .. }));
    }

    #[test]
    fn bisection_converges() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quad_rotation_root() {
        let (x, set) = optimize_quad_rotation();
        assert!((x - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!(((x * x + 4.0) - 2.0 * (4.0 - x * x)).abs() < 1e-10);
        assert!(quad_residual(&set).abs() < 1e-10);
    }

    #[test]
    fn pam3_shift_root() {
        let (r, set) = optimize_pam3_shift();
        assert!((r - (1.0 + 3f64.sqrt())).abs() < 1e-12);
        assert!(((1.0 + (1.0 + r) * (1.0 + r)) - 2.0 * r * r).abs() < 1e-10);
        assert!(pam3_residual(&set).abs() < 1e-10);
    }
}
