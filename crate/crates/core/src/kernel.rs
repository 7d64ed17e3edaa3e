//! Polarizing kernels `f: X² -> X` over `X = {0, .., q-1}`.
//!
//! A kernel must be invertible in each argument, so its table is a Latin
//! square. Kernels are stored as explicit tables; the `u1 ⊕ π(u2)` family is
//! only one way to build them.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A bijection on `0..q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let q = image.len();
        if q < 2 {
            return domain(format!("permutation needs at least 2 entries, got {q}"));
        }
        let mut seen = vec![false; q];
        for &v in &image {
            if v >= q || seen[v] {
                return domain(format!("{image:?} is not a bijection on 0..{q}"));
            }
            seen[v] = true;
        }
        Ok(Permutation(image))
    }

    pub fn identity(q: usize) -> Self {
        Permutation((0..q).collect())
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn image(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, v: usize) -> usize {
        self.0[v]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// Parses `identity` (needs `q`) or a comma list such as `0,2,4,1,3`.
    pub fn parse_with_q(text: &str, q: usize) -> Result<Self> {
        if text.trim() == "identity" {
            if q < 2 {
                return domain("identity permutation needs q >= 2");
            }
            return Ok(Self::identity(q));
        }
        let p: Permutation = text.parse()?;
        if p.q() != q {
            return Err(Error::AlphabetMismatch {
                left: "permutation",
                left_q: p.q(),
                right: "signal set",
                right_q: q,
            });
        }
        Ok(p)
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let image = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Domain(format!("malformed permutation entry `{t}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Permutation::new(image)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// A validated kernel table with `table[u1][u2] = f(u1, u2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "KernelDoc", into = "KernelDoc")]
pub struct Kernel {
    q: usize,
    table: Vec<usize>,
    // inv_u2[u1 * q + x1] = u2 such that f(u1, u2) = x1
    inv_u2: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelDoc {
    q: usize,
    table: Vec<Vec<usize>>,
}

impl TryFrom<KernelDoc> for Kernel {
    type Error = Error;

    fn try_from(doc: KernelDoc) -> Result<Self> {
        if doc.table.len() != doc.q {
            return domain(format!(
                "kernel declares q={} but has {} rows",
                doc.q,
                doc.table.len()
            ));
        }
        Kernel::from_table(&doc.table)
    }
}

impl From<Kernel> for KernelDoc {
    fn from(k: Kernel) -> Self {
        KernelDoc {
            q: k.q,
            table: k.rows(),
        }
    }
}

/// True iff `table` is square and every row and column is a permutation of `0..q`.
pub fn validate(table: &[Vec<usize>]) -> bool {
    let q = table.len();
    if q < 2 || table.iter().any(|r| r.len() != q) {
        return false;
    }
    let mut seen = vec![false; q];
    let is_perm = |seen: &mut Vec<bool>, it: &mut dyn Iterator<Item = usize>| {
        seen.iter_mut().for_each(|s| *s = false);
        for v in it {
            if v >= q || seen[v] {
                return false;
            }
            seen[v] = true;
        }
        true
    };
    (0..q).all(|r| is_perm(&mut seen, &mut table[r].iter().copied()))
        && (0..q).all(|c| is_perm(&mut seen, &mut table.iter().map(|row| row[c])))
}

impl Kernel {
    pub fn from_table(table: &[Vec<usize>]) -> Result<Self> {
        if !validate(table) {
            return domain("kernel table is not invertible in both arguments");
        }
        let q = table.len();
        let flat: Vec<usize> = table.iter().flatten().copied().collect();
        Ok(Self::from_flat(q, flat))
    }

    fn from_flat(q: usize, table: Vec<usize>) -> Self {
        let mut inv_u2 = vec![0; q * q];
        for u1 in 0..q {
            for u2 in 0..q {
                inv_u2[u1 * q + table[u1 * q + u2]] = u2;
            }
        }
        Kernel { q, table, inv_u2 }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Always true for a constructed kernel; kept for symmetry with [`validate`].
    pub fn validate(&self) -> bool {
        validate(&self.rows())
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.table.chunks_exact(self.q).map(<[usize]>::to_vec).collect()
    }

    /// `f(u1, u2)` without range checks.
    #[inline]
    pub fn f(&self, u1: usize, u2: usize) -> usize {
        self.table[u1 * self.q + u2]
    }

    pub fn apply(&self, u1: usize, u2: usize) -> Result<usize> {
        self.check(u1)?;
        self.check(u2)?;
        Ok(self.f(u1, u2))
    }

    /// The `u2` with `f(u1, u2) = x1`.
    pub fn invert_u2(&self, u1: usize, x1: usize) -> Result<usize> {
        self.check(u1)?;
        self.check(x1)?;
        Ok(self.inv_u2[u1 * self.q + x1])
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.q {
            return domain(format!("symbol {v} out of range for q={}", self.q));
        }
        Ok(())
    }

    /// Returns the permutation `π` if this kernel is `u1 ⊕ π(u2)`.
    pub fn as_permutation(&self) -> Option<Permutation> {
        let q = self.q;
        let pi: Vec<usize> = (0..q).map(|u2| self.f(0, u2)).collect();
        let fits = (0..q).all(|u1| (0..q).all(|u2| self.f(u1, u2) == (u1 + pi[u2]) % q));
        fits.then_some(Permutation(pi))
    }

    /// Random Latin square obtained by independently permuting the rows,
    /// columns and symbols of the cyclic table.
    pub fn random_latin<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Result<Self> {
        if q < 2 {
            return domain(format!("kernels need q >= 2, got {q}"));
        }
        let mut rows: Vec<usize> = (0..q).collect();
        let mut cols = rows.clone();
        let mut syms = rows.clone();
        rows.shuffle(rng);
        cols.shuffle(rng);
        syms.shuffle(rng);
        let table = (0..q * q)
            .map(|i| syms[(rows[i / q] + cols[i % q]) % q])
            .collect();
        Ok(Self::from_flat(q, table))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_permutation() {
            Some(p) if p.is_identity() => write!(f, "standard q={}", self.q),
            Some(p) => write!(f, "u1+pi(u2) pi={p}"),
            None => write!(f, "table q={}", self.q),
        }
    }
}

/// `f(u1, u2) = (u1 + u2) mod q`.
pub fn standard_kernel(q: usize) -> Result<Kernel> {
    if q < 2 {
        return domain(format!("kernels need q >= 2, got {q}"));
    }
    Ok(permutation_kernel(&Permutation::identity(q)))
}

/// `f(u1, u2) = (u1 + π(u2)) mod q`; every row is a cyclic right-shift of row 0.
pub fn permutation_kernel(pi: &Permutation) -> Kernel {
    let q = pi.q();
    let table = (0..q * q).map(|i| (i / q + pi.apply(i % q)) % q).collect();
    Kernel::from_flat(q, table)
}

/// `f(u1, u2) = (u1 + γ·u2) mod q` for prime `q`.
///
/// Only `γ ≢ 0 (mod q)` is required; `γ` itself need not be prime.
pub fn reed_solomon_kernel(q: usize, gamma: usize) -> Result<Kernel> {
    if !is_prime(q) {
        return domain(format!("Reed-Solomon kernel needs a prime q, got {q}"));
    }
    if gamma == 0 || gamma >= q {
        return domain(format!("gamma must lie in 1..={}, got {gamma}", q - 1));
    }
    let pi = Permutation((0..q).map(|u| gamma * u % q).collect());
    Ok(permutation_kernel(&pi))
}

pub fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perm(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn standard_tables() {
        let k5 = standard_kernel(5).unwrap();
        assert_eq!(k5.f(1, 4), 0);
        assert!((0..5).all(|k| k5.f(0, k) == k));
        assert_eq!(standard_kernel(2).unwrap().rows(), vec![vec![0, 1], vec![1, 0]]);
        assert!(standard_kernel(1).is_err());
        assert!(standard_kernel(7).unwrap().validate());
    }

    #[test]
    fn permutation_tables() {
        let k = permutation_kernel(&perm(&[0, 2, 4, 1, 3]));
        assert_eq!(k.f(0, 1), 2);
        let k4 = permutation_kernel(&perm(&[0, 2, 1, 3]));
        assert_eq!(k4.f(2, 3), 1);
        assert_eq!(
            permutation_kernel(&Permutation::identity(6)),
            standard_kernel(6).unwrap()
        );
        assert!(Permutation::new(vec![0, 1, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn validate_rejects_constant_column() {
        assert!(!validate(&[vec![0, 1], vec![0, 1]]));
        assert!(!validate(&[vec![0, 1], vec![1]]));
        assert!(!validate(&[vec![0, 2], vec![2, 0]]));
        assert!(Kernel::from_table(&[vec![0, 1], vec![0, 1]]).is_err());
    }

    #[test]
    fn all_q3_permutation_kernels_are_valid() {
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for p in perms {
            assert!(permutation_kernel(&perm(&p)).validate());
        }
    }

    #[test]
    fn apply_and_invert() {
        let k = standard_kernel(5).unwrap();
        assert_eq!(k.apply(3, 4).unwrap(), 2);
        assert_eq!(k.invert_u2(3, 2).unwrap(), 4);
        assert!(k.apply(5, 0).is_err());
        assert!(k.invert_u2(0, 9).is_err());
        let pi = perm(&[0, 3, 1, 4, 2]);
        let kp = permutation_kernel(&pi);
        assert!((0..5).all(|u2| kp.apply(0, u2).unwrap() == pi.apply(u2)));
    }

    #[test]
    fn reed_solomon_matches_permutations() {
        assert_eq!(
            reed_solomon_kernel(5, 2).unwrap(),
            permutation_kernel(&perm(&[0, 2, 4, 1, 3]))
        );
        assert_eq!(
            reed_solomon_kernel(5, 3).unwrap(),
            permutation_kernel(&perm(&[0, 3, 1, 4, 2]))
        );
        assert_eq!(reed_solomon_kernel(7, 1).unwrap(), standard_kernel(7).unwrap());
        assert!(reed_solomon_kernel(6, 5).is_err());
        assert!(reed_solomon_kernel(5, 0).is_err());
        assert!(reed_solomon_kernel(5, 5).is_err());
        // gamma = 4 is not prime but is a unit mod 5
        assert!(reed_solomon_kernel(5, 4).is_ok());
    }

    #[test]
    fn permutation_rows_are_cyclic_shifts() {
        let k = permutation_kernel(&perm(&[0, 3, 6, 1, 4, 7, 2, 5]));
        for u1 in 0..8 {
            for u2 in 0..8 {
                assert_eq!(k.f(u1, u2), (k.f(0, u2) + u1) % 8);
            }
        }
    }

    #[test]
    fn parse_permutations() {
        assert_eq!(Permutation::parse_with_q("0,2,4,1,3", 5).unwrap(), perm(&[0, 2, 4, 1, 3]));
        assert!(Permutation::parse_with_q("identity", 4).unwrap().is_identity());
        assert!(Permutation::parse_with_q("0,2,x", 3).is_err());
        assert!(matches!(
            Permutation::parse_with_q("0,1,2", 4),
            Err(Error::AlphabetMismatch { .. })
        ));
        assert_eq!(perm(&[0, 2, 1]).to_string(), "(0,2,1)");
    }

    #[test]
    fn json_round_trip() {
        let k = reed_solomon_kernel(7, 3).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert!(s.starts_with(r#"{"q":7,"table":[[0,3,6"#));
        let back: Kernel = serde_json::from_str(&s).unwrap();
        assert_eq!(k, back);
        assert!(serde_json::from_str::<Kernel>(r#"{"q":2,"table":[[0,1],[0,1]]}"#).is_err());
    }

    #[test]
    fn primes() {
        let p: Vec<usize> = (0..30).filter(|&n| is_prime(n)).collect();
        assert_eq!(p, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    proptest! {
        #[test]
        fn random_kernels_are_bijective_on_pairs(q in 2usize..=16, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = Kernel::random_latin(q, &mut rng).unwrap();
            prop_assert!(k.validate());
            let mut hit = vec![false; q * q];
            for u1 in 0..q {
                for u2 in 0..q {
                    let x1 = k.apply(u1, u2).unwrap();
                    prop_assert_eq!(k.invert_u2(u1, x1).unwrap(), u2);
                    let cell = x1 * q + u2;
                    prop_assert!(!hit[cell]);
                    hit[cell] = true;
                }
            }
        }
    }
}
