//! Empirical types, robust letter-typicality, and the exhaustive check of the
//! type-based lower bound on `Q^n(y2 | v2)` over typical pairs.
//!
//! A tuple of aligned sequences is ε-typical for a reference law `P` when
//! every cell of its joint type satisfies `|type(a) - P(a)| <= ε P(a)`. In
//! particular cells with `P(a) = 0` must be empty, and a typical tuple is
//! also typical (with the same ε) for every marginal of `P`.

use serde::Serialize;

use crate::channel::{names, stealth_reference};
use crate::par;
use crate::prob::{
    conditional_entropy, entropy_of, kl_of, mutual_information, Alphabet, CondPmf, JointPmf, Pmf,
    ProbTable,
};
use crate::{Error, Result};

/// Default enumeration cap for exhaustive checks.
pub const ENUMERATION_CAP: f64 = 1e7;

const COUNT_SLACK: f64 = 1e-9;

/// Joint type of aligned sequences: exact per-cell counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalType {
    axes: Vec<Alphabet>,
    counts: Vec<u64>,
    n: usize,
}

impl EmpiricalType {
    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Normalized counts.
    pub fn to_joint(&self) -> Result<JointPmf> {
        if self.n == 0 {
            return Err(Error::InvalidParameter(
                "the type of empty sequences is undefined".into(),
            ));
        }
        let mass = self.counts.iter().map(|&c| c as f64 / self.n as f64).collect();
        JointPmf::new(self.axes.clone(), mass)
    }
}

fn flat_counts(seqs: &[&[u8]], sizes: &[usize], counts: &mut [u64]) {
    counts.iter_mut().for_each(|c| *c = 0);
    let n = seqs.first().map_or(0, |s| s.len());
    for i in 0..n {
        let idx = seqs
            .iter()
            .zip(sizes)
            .fold(0, |acc, (s, &k)| acc * k + usize::from(s[i]));
        counts[idx] += 1;
    }
}

fn check_aligned(seqs: &[&[u8]], axes: &[Alphabet]) -> Result<usize> {
    if seqs.len() != axes.len() {
        return Err(Error::InvalidParameter(format!(
            "expected {} sequences, got {}",
            axes.len(),
            seqs.len()
        )));
    }
    let n = seqs.first().map_or(0, |s| s.len());
    for (s, a) in seqs.iter().zip(axes) {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: s.len(),
            });
        }
        if let Some(&bad) = s.iter().find(|&&x| usize::from(x) >= a.size()) {
            return Err(Error::UnknownSymbol {
                alphabet: a.name().to_string(),
                symbol: bad.to_string(),
            });
        }
    }
    Ok(n)
}

/// Joint type of `seqs` over `axes`.
pub fn empirical_type(seqs: &[&[u8]], axes: &[Alphabet]) -> Result<EmpiricalType> {
    let n = check_aligned(seqs, axes)?;
    let sizes: Vec<usize> = axes.iter().map(Alphabet::size).collect();
    let mut counts = vec![0u64; sizes.iter().product()];
    flat_counts(seqs, &sizes, &mut counts);
    Ok(EmpiricalType {
        axes: axes.to_vec(),
        counts,
        n,
    })
}

/// ε and the reference law of a typical set.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalityParams {
    epsilon: f64,
    reference: JointPmf,
}

impl TypicalityParams {
    pub fn new(epsilon: f64, reference: JointPmf) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "typicality epsilon must lie in (0, 1/2), got {epsilon}"
            )));
        }
        Ok(Self { epsilon, reference })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn reference(&self) -> &JointPmf {
        &self.reference
    }

    /// Count bounds for blocklength `n`.
    pub fn at(&self, n: usize) -> TypicalityTest {
        TypicalityTest::new(&self.reference, self.epsilon, n)
    }
}

/// Precomputed per-cell count windows for a fixed blocklength.
#[derive(Debug, Clone)]
pub struct TypicalityTest {
    sizes: Vec<usize>,
    lo: Vec<u64>,
    hi: Vec<u64>,
    n: usize,
}

impl TypicalityTest {
    pub fn new(reference: &JointPmf, epsilon: f64, n: usize) -> Self {
        let nf = n as f64;
        let (lo, hi) = reference
            .mass()
            .iter()
            .map(|&p| {
                if p == 0.0 {
                    (0, 0)
                } else {
                    let lo = (nf * p * (1.0 - epsilon) - COUNT_SLACK).ceil().max(0.0);
                    let hi = (nf * p * (1.0 + epsilon) + COUNT_SLACK).floor();
                    (lo as u64, hi as u64)
                }
            })
            .unzip();
        Self {
            sizes: reference.shape(),
            lo,
            hi,
            n,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn accepts_counts(&self, counts: &[u64]) -> bool {
        counts
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (lo, hi))| lo <= c && c <= hi)
    }

    /// Membership of aligned sequences (one per reference axis, length `n`).
    pub fn accepts(&self, seqs: &[&[u8]]) -> bool {
        if seqs.len() != self.sizes.len() || seqs.iter().any(|s| s.len() != self.n) {
            return false;
        }
        let mut counts = vec![0u64; self.lo.len()];
        for i in 0..self.n {
            let mut idx = 0;
            for (s, &k) in seqs.iter().zip(&self.sizes) {
                let x = usize::from(s[i]);
                if x >= k {
                    return false;
                }
                idx = idx * k + x;
            }
            counts[idx] += 1;
            if counts[idx] > self.hi[idx] {
                return false;
            }
        }
        counts.iter().zip(&self.lo).all(|(c, lo)| c >= lo)
    }

    /// True when no count vector summing to `n` fits the windows.
    pub fn is_empty(&self) -> bool {
        let lo: u64 = self.lo.iter().sum();
        let hi: u64 = self.hi.iter().sum();
        let n = self.n as u64;
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h) || lo > n || hi < n
    }
}

/// Robust ε-typicality of aligned sequences with respect to `params`.
pub fn is_eps_typical(seqs: &[&[u8]], params: &TypicalityParams) -> Result<bool> {
    let n = check_aligned(seqs, params.reference.axes())?;
    Ok(params.at(n).accepts(seqs))
}

/// Iterates all sequences of length `n` over an alphabet of `size` symbols
/// in lexicographic order.
#[derive(Debug, Clone)]
pub struct Sequences {
    current: Vec<u8>,
    size: u8,
    done: bool,
}

impl Sequences {
    pub fn new(size: usize, n: usize) -> Self {
        Self {
            current: vec![0; n],
            size: size as u8,
            done: size == 0,
        }
    }

    /// Advances in place; returns `false` after the last sequence.
    pub fn advance(&mut self) -> bool {
        for i in (0..self.current.len()).rev() {
            self.current[i] += 1;
            if self.current[i] < self.size {
                return true;
            }
            self.current[i] = 0;
        }
        self.done = true;
        false
    }

    pub fn current(&self) -> &[u8] {
        &self.current
    }
}

impl Iterator for Sequences {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.advance();
        Some(out)
    }
}

/// `index`-th sequence of length `n` in lexicographic order.
pub fn sequence_at(mut index: u64, size: usize, n: usize) -> Vec<u8> {
    let mut s = vec![0u8; n];
    for slot in s.iter_mut().rev() {
        *slot = (index % size as u64) as u8;
        index /= size as u64;
    }
    s
}

/// Deterministic sequence whose type is the closest attainable to `p`
/// (largest-remainder rounding), symbols laid out in increasing order.
pub fn representative_sequence(p: &Pmf, n: usize) -> Vec<u8> {
    let k = p.alphabet().size();
    let exact: Vec<f64> = (0..k).map(|a| p.p(a) * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &a in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if p.p(a) > 0.0 {
            counts[a] += 1;
            left -= 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .flat_map(|(a, &c)| std::iter::repeat_n(a as u8, c))
        .collect()
}

/// `log2 Q^n(y | v)` computed letter by letter (`-inf` if zero).
pub fn log2_product(q: &CondPmf, v: &[u8], y: &[u8]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in v.iter().zip(y) {
        let p = q.p(usize::from(a), usize::from(b));
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += p.log2();
    }
    acc
}

/// `log2 Q^n(y | v)` through the type of `(v, y)`:
/// `-n [H(P_vy) - H(P_v) + D(P_vy || P_v Q)]`; `-inf` when the type is not
/// absolutely continuous with respect to `P_v Q`.
pub fn log2_product_via_type(q: &CondPmf, v: &[u8], y: &[u8]) -> f64 {
    let (nv, ny) = (q.given_size(), q.out_size());
    let n = v.len() as f64;
    let mut counts = vec![0u64; nv * ny];
    flat_counts(&[v, y], &[nv, ny], &mut counts);
    let pe: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let pv: Vec<f64> = pe.chunks(ny).map(|r| r.iter().sum()).collect();
    let pvq: Vec<f64> = (0..nv * ny).map(|i| pv[i / ny] * q.p(i / ny, i % ny)).collect();
    match kl_of(&pe, &pvq).finite() {
        Some(d) => -n * (entropy_of(&pe) - entropy_of(&pv) + d),
        None => f64::NEG_INFINITY,
    }
}

fn rel_err_log2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        0.0
    } else if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        ((a - b).exp2() - 1.0).abs()
    }
}

/// Default slack `δ(ε) = ε (H(Y2|V2) + I(V1;V2)) + 2ε log2(|Y2||V1||V2|)`.
pub fn default_delta(joint: &JointPmf, epsilon: f64) -> Result<f64> {
    let (i1, i2, iy) = v1v2y2_axes(joint)?;
    let h = conditional_entropy(joint, &[iy], &[i2])?;
    let i = mutual_information(joint, &[i1], &[i2], &[])?;
    let cells: usize = [i1, i2, iy].iter().map(|&a| joint.axis(a).size()).product();
    Ok(epsilon * (h + i) + 2.0 * epsilon * (cells as f64).log2())
}

fn v1v2y2_axes(joint: &JointPmf) -> Result<(usize, usize, usize)> {
    Ok((
        joint.axis_index(names::V1)?,
        joint.axis_index(names::V2)?,
        joint.axis_index(names::Y2)?,
    ))
}

/// Outcome of [`lemma2_bound_check`].
#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Report {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_is_default: bool,
    /// `H(Y2|V2) + I(V1;V2)`.
    pub exponent: f64,
    pub enumerated_pairs: u64,
    pub typical_pairs: u64,
    pub violations: u64,
    /// Smallest `log2 Q^n + n (exponent + δ)` over typical pairs.
    pub min_margin: Option<f64>,
    /// Largest relative error of the type identity over all enumerated pairs.
    pub max_identity_rel_err: f64,
    /// Typical pairs whose type is not absolutely continuous w.r.t. `P_v Q`.
    pub infinite_divergences: u64,
    pub first_violation: Option<(Vec<u8>, Vec<u8>)>,
}

#[derive(Default)]
struct Lemma2Partial {
    typical: u64,
    violations: u64,
    min_margin: Option<f64>,
    max_rel: f64,
    infinite: u64,
    first_violation: Option<(Vec<u8>, Vec<u8>)>,
}

/// Enumerates every `(v2, y2)` pair of length `n`; over the ε-typical ones
/// checks `Q^n(y2 | v2) >= 2^{-n (H(Y2|V2) + I(V1;V2) + δ)}`, and over all
/// of them compares the letterwise product with the type identity.
///
/// `joint` must carry axes named `V1`, `V2`, `Y2`. `delta = None` selects
/// [`default_delta`].
pub fn lemma2_bound_check(
    joint: &JointPmf,
    n: usize,
    epsilon: f64,
    delta: Option<f64>,
) -> Result<Lemma2Report> {
    lemma2_bound_check_capped(joint, n, epsilon, delta, ENUMERATION_CAP)
}

pub fn lemma2_bound_check_capped(
    joint: &JointPmf,
    n: usize,
    epsilon: f64,
    delta: Option<f64>,
    cap: f64,
) -> Result<Lemma2Report> {
    let (i1, i2, iy) = v1v2y2_axes(joint)?;
    let triple = joint.marginal(&[i1, i2, iy])?;
    let q = stealth_reference(&triple)?;
    let pair = triple.marginal(&[1, 2])?;
    let params = TypicalityParams::new(epsilon, pair)?;
    let test = params.at(n);
    let (nv, ny) = (q.given_size(), q.out_size());
    let size = (nv as f64).powi(n as i32) * (ny as f64).powi(n as i32);
    if size > cap {
        return Err(Error::CapExceeded {
            what: "lemma 2 enumeration".into(),
            size,
            cap,
        });
    }
    let exponent = conditional_entropy(&triple, &[2], &[1])? + mutual_information(&triple, &[0], &[1], &[])?;
    let delta_is_default = delta.is_none();
    let delta = match delta {
        Some(d) => d,
        None => default_delta(&triple, epsilon)?,
    };
    let floor = -(n as f64) * (exponent + delta);
    let v_count = nv.pow(n as u32);

    let partials = par::map_range(v_count, |vi| {
        let v = sequence_at(vi as u64, nv, n);
        let mut part = Lemma2Partial::default();
        let mut ys = Sequences::new(ny, n);
        loop {
            let y = ys.current();
            let direct = log2_product(&q, &v, y);
            let via_type = log2_product_via_type(&q, &v, y);
            part.max_rel = part.max_rel.max(rel_err_log2(via_type, direct));
            if test.accepts(&[&v, y]) {
                part.typical += 1;
                if via_type == f64::NEG_INFINITY {
                    part.infinite += 1;
                }
                let margin = direct - floor;
                part.min_margin = Some(part.min_margin.map_or(margin, |m: f64| m.min(margin)));
                if margin < 0.0 {
                    part.violations += 1;
                    if part.first_violation.is_none() {
                        part.first_violation = Some((v.clone(), y.to_vec()));
                    }
                }
            }
            if !ys.advance() {
                break;
            }
        }
        part
    });

    let mut report = Lemma2Report {
        n,
        epsilon,
        delta,
        delta_is_default,
        exponent,
        enumerated_pairs: size as u64,
        typical_pairs: 0,
        violations: 0,
        min_margin: None,
        max_identity_rel_err: 0.0,
        infinite_divergences: 0,
        first_violation: None,
    };
    for p in partials {
        report.typical_pairs += p.typical;
        report.violations += p.violations;
        report.infinite_divergences += p.infinite;
        report.max_identity_rel_err = report.max_identity_rel_err.max(p.max_rel);
        report.min_margin = match (report.min_margin, p.min_margin) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if report.first_violation.is_none() {
            report.first_violation = p.first_violation;
        }
    }
    Ok(report)
}

/// Worst `|H(P_vy) - H(P_v) - H(Y2|V2)|` over ε-typical `(v2, y2)` pairs of
/// length `n`; `None` if the typical set is empty.
pub fn continuity_gap(joint: &JointPmf, n: usize, epsilon: f64) -> Result<Option<f64>> {
    let (_, i2, iy) = v1v2y2_axes(joint)?;
    let pair = joint.marginal(&[i2, iy])?;
    let h = conditional_entropy(&pair, &[1], &[0])?;
    let test = TypicalityParams::new(epsilon, pair.clone())?.at(n);
    let (nv, ny) = (pair.axis(0).size(), pair.axis(1).size());
    let size = (nv as f64).powi(n as i32) * (ny as f64).powi(n as i32);
    if size > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            what: "continuity-gap enumeration".into(),
            size,
            cap: ENUMERATION_CAP,
        });
    }
    let gaps = par::map_range(nv.pow(n as u32), |vi| {
        let v = sequence_at(vi as u64, nv, n);
        let mut worst: Option<f64> = None;
        let mut counts = vec![0u64; nv * ny];
        let mut ys = Sequences::new(ny, n);
        loop {
            let y = ys.current();
            if test.accepts(&[&v, y]) {
                flat_counts(&[&v, y], &[nv, ny], &mut counts);
                let pe: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
                let pv: Vec<f64> = pe.chunks(ny).map(|r| r.iter().sum()).collect();
                let gap = (entropy_of(&pe) - entropy_of(&pv) - h).abs();
                worst = Some(worst.map_or(gap, |w| w.max(gap)));
            }
            if !ys.advance() {
                break;
            }
        }
        worst
    });
    Ok(gaps.into_iter().flatten().reduce(f64::max))
}
