//! Finite signal sets with labeled points and mean-energy accounting.
//!
//! Points are real vectors of dimension 1 or 2; a complex PSK point
//! `a + jb` is stored as `(a, b)`. The energy `es` is the mean squared norm
//! of the points, so for PSK it equals every point's squared norm while for
//! the 3-point PAM set it is a true average.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const ENERGY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalSetDoc", into = "SignalSetDoc")]
pub struct SignalSet {
    q: usize,
    dimension: usize,
    coords: Vec<f64>,
    es: f64,
}

/// JSON shape: `{q, dimension, points: [[..]], es}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalSetDoc {
    q: usize,
    dimension: usize,
    points: Vec<Vec<f64>>,
    es: f64,
}

impl TryFrom<SignalSetDoc> for SignalSet {
    type Error = Error;

    fn try_from(doc: SignalSetDoc) -> Result<Self> {
        if doc.points.len() != doc.q {
            return domain(format!(
                "signal set declares q={} but lists {} points",
                doc.q,
                doc.points.len()
            ));
        }
        let set = SignalSet::from_points(doc.dimension, doc.points)?;
        let rel = (set.es - doc.es).abs() / set.es;
        if !(rel <= ENERGY_REL_TOL) {
            return domain(format!(
                "declared es={} does not match mean squared norm {}",
                doc.es, set.es
            ));
        }
        Ok(set)
    }
}

impl From<SignalSet> for SignalSetDoc {
    fn from(set: SignalSet) -> Self {
        SignalSetDoc {
            q: set.q,
            dimension: set.dimension,
            points: set.points().map(<[f64]>::to_vec).collect(),
            es: set.es,
        }
    }
}

impl SignalSet {
    /// Builds a set from explicit points; `es` is computed from them.
    pub fn from_points(dimension: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return domain(format!("dimension must be 1 or 2, got {dimension}"));
        }
        let q = points.len();
        if q < 2 {
            return domain(format!("a signal set needs at least 2 points, got {q}"));
        }
        let mut coords = Vec::with_capacity(q * dimension);
        for (k, p) in points.iter().enumerate() {
            if p.len() != dimension {
                return domain(format!(
                    "point {k} has {} coordinates, expected {dimension}",
                    p.len()
                ));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return domain(format!("point {k} has a non-finite coordinate"));
            }
            coords.extend_from_slice(p);
        }
        let es = mean_sq_norm(&coords, q);
        Self::checked(q, dimension, coords, es)
    }

    fn checked(q: usize, dimension: usize, coords: Vec<f64>, es: f64) -> Result<Self> {
        let set = SignalSet {
            q,
            dimension,
            coords,
            es,
        };
        if !(es > 0.0) {
            return domain("signal set has zero energy");
        }
        for i in 0..q {
            for j in (i + 1)..q {
                if set.dist_sq_unchecked(i, j) <= 0.0 {
                    return domain(format!("points {i} and {j} coincide"));
                }
            }
        }
        Ok(set)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Mean symbol energy (mean squared norm of the points).
    pub fn es(&self) -> f64 {
        self.es
    }

    pub fn point(&self, label: usize) -> &[f64] {
        &self.coords[label * self.dimension..(label + 1) * self.dimension]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dimension)
    }

    /// Squared Euclidean distance between points `i` and `j`.
    pub fn distance_sq(&self, i: usize, j: usize) -> Result<f64> {
        self.check_label(i)?;
        self.check_label(j)?;
        Ok(self.dist_sq_unchecked(i, j))
    }

    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        self.distance_sq(i, j).map(f64::sqrt)
    }

    pub(crate) fn dist_sq_unchecked(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Row-major `q x q` table of squared distances.
    pub fn distance_matrix(&self) -> Vec<f64> {
        let q = self.q;
        let mut m = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..q {
                m[i * q + j] = self.dist_sq_unchecked(i, j);
            }
        }
        m
    }

    pub(crate) fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.q {
            return domain(format!("label {label} out of range for q={}", self.q));
        }
        Ok(())
    }

    /// Rescales the set so its mean energy becomes `es`.
    pub fn normalize(&self, es: f64) -> Result<Self> {
        if !(es > 0.0 && es.is_finite()) {
            return domain(format!("target energy must be positive, got {es}"));
        }
        let scale = (es / self.es).sqrt();
        let coords = self.coords.iter().map(|c| c * scale).collect();
        Ok(SignalSet {
            q: self.q,
            dimension: self.dimension,
            coords,
            es,
        })
    }

    /// True when `||s_{l+k} - s_l|| = ||s_k - s_0||` for all `l, k` (indices mod q),
    /// i.e. the set is matched to the cyclic group on its labels.
    pub fn is_group_matched(&self) -> bool {
        let q = self.q;
        let tol = 1e-9 * self.es;
        (0..q).all(|l| {
            (0..q).all(|k| {
                let a = self.dist_sq_unchecked((l + k) % q, l);
                let b = self.dist_sq_unchecked(k, 0);
                (a - b).abs() <= tol
            })
        })
    }

    /// Parses a named preset: `psk:<q>`, `quad-eq` or `pam3-eq`. PSK presets
    /// have unit energy.
    pub fn from_preset(name: &str) -> Result<Self> {
        match name {
            "quad-eq" => equidistant_quad(1.0),
            "pam3-eq" => Ok(equidistant_pam3()),
            _ => match name.strip_prefix("psk:") {
                Some(q) => {
                    let q: usize = q
                        .parse()
                        .map_err(|_| Error::Domain(format!("bad PSK size in preset `{name}`")))?;
                    psk(q, 1.0)
                }
                None => domain(format!(
                    "unknown signal-set preset `{name}` (expected psk:<q>, quad-eq or pam3-eq)"
                )),
            },
        }
    }
}

impl fmt::Display for SignalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-point {}-D set (Es={})", self.q, self.dimension, self.es)
    }
}

fn mean_sq_norm(coords: &[f64], q: usize) -> f64 {
    coords.iter().map(|c| c * c).sum::<f64>() / q as f64
}

/// `q`-PSK with point `k` at `sqrt(es) * (cos(2πk/q), sin(2πk/q))`.
pub fn psk(q: usize, es: f64) -> Result<SignalSet> {
    if q < 2 {
        return domain(format!("PSK needs q >= 2, got {q}"));
    }
    if !(es > 0.0 && es.is_finite()) {
        return domain(format!("energy must be positive, got {es}"));
    }
    let r = es.sqrt();
    let coords = (0..q)
        .flat_map(|k| {
            let phi = 2.0 * PI * k as f64 / q as f64;
            [r * phi.cos(), r * phi.sin()]
        })
        .collect();
    SignalSet::checked(q, 2, coords, es)
}

/// Unit-circle 4-point family with `||s0 - s1|| = x` and `||s0 - s3|| = sqrt(4 - x²)`.
///
/// `s0 = (1, 0)` and `s2 = (-1, 0)` stay fixed while `s1` and `s3 = -s1` move
/// together; `x = sqrt(2)` is 4-PSK.
pub fn rotated_quad(x: f64) -> Result<SignalSet> {
    if !(x > 0.0 && x < 2.0) {
        return domain(format!("rotation parameter x must lie in (0, 2), got {x}"));
    }
    let cos = 1.0 - x * x / 2.0;
    let sin = (1.0 - cos * cos).sqrt();
    let coords = vec![1.0, 0.0, cos, sin, -1.0, 0.0, -cos, -sin];
    SignalSet::checked(4, 2, coords, 1.0)
}

/// The 4-point set that makes `u1 ⊕ π(u2)`, `π = (0,2,1,3)` equidistant for
/// `u1 ∈ {0, 2}`: `sqrt(es) * {(1,0), (1/3, 2√2/3), (-1,0), (-1/3, -2√2/3)}`.
pub fn equidistant_quad(es: f64) -> Result<SignalSet> {
    if !(es > 0.0 && es.is_finite()) {
        return domain(format!("energy must be positive, got {es}"));
    }
    let r = es.sqrt();
    let a = 1.0 / 3.0;
    let b = 2.0 * 2f64.sqrt() / 3.0;
    let coords = [1.0, 0.0, a, b, -1.0, 0.0, -a, -b]
        .iter()
        .map(|c| c * r)
        .collect();
    SignalSet::checked(4, 2, coords, es)
}

/// One-dimensional 3-point set with gaps `1` and `1 + √3`, centred on its
/// outer points: `{-1 - √3/2, -√3/2, 1 + √3/2}`.
pub fn equidistant_pam3() -> SignalSet {
    pam3_with_ratio(1.0 + 3f64.sqrt()).expect("fixed geometry is valid")
}

/// Collinear points `s0 < s1 < s2` with `s1 - s0 = 1` and `s2 - s1 = ratio`,
/// placed so that `s0 = -s2`.
pub(crate) fn pam3_with_ratio(ratio: f64) -> Result<SignalSet> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return domain(format!("gap ratio must be positive, got {ratio}"));
    }
    let half = (1.0 + ratio) / 2.0;
    SignalSet::from_points(1, vec![vec![-half], vec![1.0 - half], vec![half]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn psk2_is_antipodal() {
        let s = psk(2, 1.0).unwrap();
        assert!(close(s.point(0)[0], 1.0, 1e-15) && close(s.point(0)[1], 0.0, 1e-15));
        assert!(close(s.point(1)[0], -1.0, 1e-15) && close(s.point(1)[1], 0.0, 1e-15));
    }

    #[test]
    fn psk5_adjacent_distance() {
        let s = psk(5, 1.0).unwrap();
        assert!(close(s.distance(0, 1).unwrap(), 1.17557, 5e-6));
        assert!(close(s.distance_sq(0, 2).unwrap(), 3.61803, 5e-6));
    }

    #[test]
    fn psk8_geometric_property() {
        let s = psk(8, 1.0).unwrap();
        let d = |i, j| s.distance_sq(i, j).unwrap();
        assert!(close(d(0, 1) + d(0, 3), 4.0, 1e-12));
        assert!(close(2.0 * d(0, 2), 4.0, 1e-12));
        assert!(close(d(0, 4), 4.0, 1e-12));
    }

    #[test]
    fn psk_rejects_bad_arguments() {
        assert!(psk(1, 1.0).is_err());
        assert!(psk(4, 0.0).is_err());
        assert!(psk(4, -1.0).is_err());
    }

    #[test]
    fn psk_energy_is_exact() {
        let s = psk(7, 2.5).unwrap();
        assert_eq!(s.es(), 2.5);
        let mean = s.points().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / 7.0;
        assert!(((mean - 2.5) / 2.5).abs() < 1e-12);
    }

    #[test]
    fn psk_distances_depend_only_on_label_gap() {
        for q in 2..=64 {
            let s = psk(q, 1.0).unwrap();
            assert!(s.is_group_matched(), "q={q}");
        }
    }

    #[test]
    fn psk_distance_sums() {
        for (q, expect) in [(5, 10.0), (8, 16.0)] {
            let s = psk(q, 1.0).unwrap();
            let sum: f64 = (1..q).map(|k| s.distance_sq(k, 0).unwrap()).sum();
            assert!(close(sum, expect, 1e-12));
        }
    }

    #[test]
    fn distance_sq_rejects_bad_label() {
        let s = psk(4, 1.0).unwrap();
        assert!(s.distance_sq(0, 4).is_err());
        assert_eq!(s.distance_sq(3, 3).unwrap(), 0.0);
        assert!(close(s.distance_sq(0, 2).unwrap(), 4.0, 1e-12));
    }

    #[test]
    fn equidistant_quad_geometry() {
        let s = equidistant_quad(1.0).unwrap();
        assert!(close(s.point(1)[0], 0.33333, 5e-6));
        assert!(close(s.point(1)[1], 0.94281, 5e-6));
        assert!(close(s.distance(0, 1).unwrap(), 2.0 / 3f64.sqrt(), 1e-12));
        for p in s.points() {
            assert!(close(p[0] * p[0] + p[1] * p[1], 1.0, 1e-12));
        }
        let d = |i, j| s.distance_sq(i, j).unwrap();
        assert!(close(d(0, 1) + d(0, 2), 2.0 * d(0, 3), 1e-12));
        assert!(equidistant_quad(0.0).is_err());
    }

    #[test]
    fn equidistant_pam3_geometry() {
        let s = equidistant_pam3();
        let sqrt3 = 3f64.sqrt();
        assert!(close(s.point(0)[0], -1.0 - sqrt3 / 2.0, 1e-12));
        assert!(close(s.point(1)[0], -sqrt3 / 2.0, 1e-12));
        assert!(close(s.point(2)[0], 1.0 + sqrt3 / 2.0, 1e-12));
        assert!(close(s.es(), 2.571367, 5e-7));
        assert!(close(s.distance(0, 1).unwrap(), 1.0, 1e-12));
        assert!(close(s.distance(1, 2).unwrap(), 2.73205, 5e-6));
        assert!(close(s.distance(0, 2).unwrap(), 3.73205, 5e-6));
        let d = |i, j| s.distance_sq(i, j).unwrap();
        assert!(close(d(0, 1) + d(0, 2), 2.0 * d(1, 2), 1e-12));
    }

    #[test]
    fn rotated_quad_family() {
        let sq = rotated_quad(2f64.sqrt()).unwrap();
        let p4 = psk(4, 1.0).unwrap();
        for k in 0..4 {
            for c in 0..2 {
                assert!(close(sq.point(k)[c], p4.point(k)[c], 1e-12));
            }
        }
        let x = 2.0 / 3f64.sqrt();
        let r = rotated_quad(x).unwrap();
        let e = equidistant_quad(1.0).unwrap();
        for k in 0..4 {
            for c in 0..2 {
                assert!(close(r.point(k)[c], e.point(k)[c], 1e-12));
            }
        }
        assert!(close(r.distance_sq(0, 3).unwrap(), 8.0 / 3.0, 1e-12));
        assert!(rotated_quad(0.0).is_err());
        assert!(rotated_quad(2.0).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = equidistant_pam3();
        let text = serde_json::to_string(&s).unwrap();
        let back: SignalSet = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);

        let dup = r#"{"q":2,"dimension":1,"points":[[1.0],[1.0]],"es":1.0}"#;
        assert!(serde_json::from_str::<SignalSet>(dup).is_err());
        let wrong_es = r#"{"q":2,"dimension":1,"points":[[1.0],[-1.0]],"es":2.0}"#;
        assert!(serde_json::from_str::<SignalSet>(wrong_es).is_err());
        let extra = r#"{"q":2,"dimension":1,"points":[[1.0],[-1.0]],"es":1.0,"x":0}"#;
        assert!(serde_json::from_str::<SignalSet>(extra).is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(SignalSet::from_preset("psk:5").unwrap(), psk(5, 1.0).unwrap());
        assert_eq!(SignalSet::from_preset("pam3-eq").unwrap().q(), 3);
        assert_eq!(SignalSet::from_preset("quad-eq").unwrap().q(), 4);
        assert!(SignalSet::from_preset("qam:16").is_err());
        assert!(SignalSet::from_preset("psk:x").is_err());
    }

    #[test]
    fn normalize_rescales_energy() {
        let s = equidistant_pam3().normalize(1.0).unwrap();
        let mean = s.points().map(|p| p[0] * p[0]).sum::<f64>() / 3.0;
        assert!(close(mean, 1.0, 1e-12));
        assert!(!s.is_group_matched());
    }
}
