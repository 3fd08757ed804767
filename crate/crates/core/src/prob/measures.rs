use std::fmt;

use serde::{Serialize, Serializer};

use super::{JointPmf, ProbTable};
use crate::{Error, Result};

/// Tolerance below which negative information values are rounding noise.
pub const INFO_TOL: f64 = 1e-10;

/// A divergence value in bits; `Infinite` when absolute continuity fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }

    /// Value as `f64`, mapping the sentinel to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialOrd for Divergence {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Finite(v) => write!(f, "{v}"),
            Divergence::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Divergence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Divergence::Finite(v) => s.serialize_f64(*v),
            Divergence::Infinite => s.serialize_str("inf"),
        }
    }
}

/// `-sum p log2 p` over a raw mass vector, with `0 log 0 = 0`.
pub fn entropy_of(mass: &[f64]) -> f64 {
    let h: f64 = mass
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// Shannon entropy in bits.
pub fn entropy<T: ProbTable + ?Sized>(p: &T) -> f64 {
    entropy_of(p.mass())
}

/// `sum p log2(p/q)` over raw vectors of equal length.
pub fn kl_of(p: &[f64], q: &[f64]) -> Divergence {
    debug_assert_eq!(p.len(), q.len());
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Divergence::Infinite;
        }
        d += a * (a / b).log2();
    }
    Divergence::Finite(d.max(0.0))
}

/// `D(p || q)` in bits. Both tables must share axes.
pub fn kl_divergence<P, Q>(p: &P, q: &Q) -> Result<Divergence>
where
    P: ProbTable + ?Sized,
    Q: ProbTable + ?Sized,
{
    if p.axes() != q.axes() {
        return Err(Error::AlphabetMismatch(
            "divergence between tables on different alphabets".into(),
        ));
    }
    Ok(kl_of(p.mass(), q.mass()))
}

/// Smallest positive entry of `q`.
pub fn min_positive_mass(q: &[f64]) -> Option<f64> {
    q.iter().copied().filter(|&x| x > 0.0).reduce(f64::min)
}

/// `log2(1 / pi_Q)` with `pi_Q` the smallest positive mass of `q`; upper
/// bound on `D(p || q)` for every `p` absolutely continuous w.r.t. `q`.
pub fn kl_min_mass_bound<Q: ProbTable + ?Sized>(q: &Q) -> Result<f64> {
    let pi = min_positive_mass(q.mass()).ok_or_else(|| {
        Error::InvalidDistribution("distribution has no positive entry".into())
    })?;
    Ok(-pi.log2())
}

fn disjoint(sets: &[&[usize]]) -> Result<()> {
    let mut seen: Vec<usize> = Vec::new();
    for set in sets {
        for &a in *set {
            if seen.contains(&a) {
                return Err(Error::OverlappingAxes(format!(
                    "axis {a} appears in more than one argument"
                )));
            }
            seen.push(a);
        }
    }
    Ok(())
}

/// Entropy of the marginal on `axes`; the empty set has entropy 0.
pub fn joint_entropy(joint: &JointPmf, axes: &[usize]) -> Result<f64> {
    if axes.is_empty() {
        return Ok(0.0);
    }
    Ok(entropy(&joint.marginal(axes)?))
}

/// `H(A | C)` in bits.
pub fn conditional_entropy(joint: &JointPmf, a: &[usize], cond: &[usize]) -> Result<f64> {
    disjoint(&[a, cond])?;
    let ac: Vec<usize> = a.iter().chain(cond).copied().collect();
    Ok((joint_entropy(joint, &ac)? - joint_entropy(joint, cond)?).max(0.0))
}

/// `I(A; B | C)` in bits via entropies of the marginals.
pub fn mutual_information(joint: &JointPmf, a: &[usize], b: &[usize], cond: &[usize]) -> Result<f64> {
    disjoint(&[a, b, cond])?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter(
            "mutual information needs nonempty axis sets".into(),
        ));
    }
    let ac: Vec<usize> = a.iter().chain(cond).copied().collect();
    let bc: Vec<usize> = b.iter().chain(cond).copied().collect();
    let abc: Vec<usize> = a.iter().chain(b).chain(cond).copied().collect();
    let i = joint_entropy(joint, &ac)? + joint_entropy(joint, &bc)?
        - joint_entropy(joint, &abc)?
        - joint_entropy(joint, cond)?;
    debug_assert!(i >= -1e-9, "mutual information {i} far below zero");
    Ok(if i < INFO_TOL { i.max(0.0) } else { i })
}
