//! The broadcast channel, the auxiliary-variable scheme, the induced
//! single-letter law and its n-fold memoryless extension.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::prob::{mutual_information, Alphabet, CondPmf, JointPmf, Pmf, ProbTable};
use crate::{Error, Result};

/// Axis positions in the table returned by [`induced_joint`].
pub mod axis {
    pub const U: usize = 0;
    pub const V1: usize = 1;
    pub const V2: usize = 2;
    pub const X: usize = 3;
    pub const Y1: usize = 4;
    pub const Y2: usize = 5;
}

/// Axis names used throughout the crate.
pub mod names {
    pub const U: &str = "U";
    pub const V1: &str = "V1";
    pub const V2: &str = "V2";
    pub const X: &str = "X";
    pub const Y1: &str = "Y1";
    pub const Y2: &str = "Y2";
}

const MARKOV_TOL: f64 = 1e-9;

/// Memoryless broadcast channel `P(y1, y2 | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastChannel {
    law: CondPmf,
}

impl BroadcastChannel {
    /// `law` must condition on a single input axis and produce `(Y1, Y2)`.
    pub fn new(law: CondPmf) -> Result<Self> {
        if law.given().len() != 1 || law.out().len() != 2 {
            return Err(Error::InvalidParameter(
                "broadcast law must be P(y1, y2 | x)".into(),
            ));
        }
        Ok(Self { law })
    }

    /// Builds the law from row weights laid out as `[x][y1][y2]`.
    pub fn from_rows(x: Alphabet, y1: Alphabet, y2: Alphabet, rows: &[f64]) -> Result<Self> {
        Self::new(CondPmf::new(vec![x], vec![y1, y2], rows.to_vec())?)
    }

    /// Channel whose outputs are conditionally independent given the input.
    pub fn from_components(to_y1: &CondPmf, to_y2: &CondPmf) -> Result<Self> {
        if to_y1.given() != to_y2.given() || to_y1.given().len() != 1 {
            return Err(Error::AlphabetMismatch(
                "component channels must share one input alphabet".into(),
            ));
        }
        let (n1, n2) = (to_y1.out_size(), to_y2.out_size());
        let mut rows = Vec::with_capacity(to_y1.given_size() * n1 * n2);
        for x in 0..to_y1.given_size() {
            for a in 0..n1 {
                for b in 0..n2 {
                    rows.push(to_y1.p(x, a) * to_y2.p(x, b));
                }
            }
        }
        Self::new(CondPmf::new(
            to_y1.given().to_vec(),
            vec![to_y1.out()[0].clone(), to_y2.out()[0].clone()],
            rows,
        )?)
    }

    pub fn law(&self) -> &CondPmf {
        &self.law
    }

    pub fn input(&self) -> &Alphabet {
        &self.law.given()[0]
    }

    pub fn y1(&self) -> &Alphabet {
        &self.law.out()[0]
    }

    pub fn y2(&self) -> &Alphabet {
        &self.law.out()[1]
    }

    pub fn to_y1(&self) -> CondPmf {
        self.law.marginal_out(&[0]).expect("law has two output axes")
    }

    pub fn to_y2(&self) -> CondPmf {
        self.law.marginal_out(&[1]).expect("law has two output axes")
    }
}

/// Auxiliary scheme: a joint law on `(U, V1, V2)` and an input map
/// `P(x | v1, v2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxScheme {
    vjoint: JointPmf,
    xmap: CondPmf,
}

impl AuxScheme {
    /// `vjoint` has axes `(U, V1, V2)`; `xmap` conditions on `(V1, V2)`.
    pub fn new(vjoint: JointPmf, xmap: CondPmf) -> Result<Self> {
        let axes = vjoint.axes();
        let expected = [names::U, names::V1, names::V2];
        if axes.len() != 3 || axes.iter().zip(expected).any(|(a, n)| a.name() != n) {
            return Err(Error::InvalidParameter(
                "auxiliary joint must have axes (U, V1, V2)".into(),
            ));
        }
        if xmap.given() != &axes[1..] {
            return Err(Error::AlphabetMismatch(
                "input map must condition on (V1, V2)".into(),
            ));
        }
        if xmap.out().len() != 1 {
            return Err(Error::InvalidParameter(
                "input map must produce a single input axis".into(),
            ));
        }
        Ok(Self { vjoint, xmap })
    }

    /// Scheme with a singleton `U`; `v1v2` has axes `(V1, V2)`.
    pub fn without_u(v1v2: JointPmf, xmap: CondPmf) -> Result<Self> {
        let u = Alphabet::indexed(names::U, 1)?;
        let vjoint = JointPmf::product(&Pmf::point(u, 0)?.to_joint(), &v1v2)?;
        Self::new(vjoint, xmap)
    }

    pub fn vjoint(&self) -> &JointPmf {
        &self.vjoint
    }

    pub fn xmap(&self) -> &CondPmf {
        &self.xmap
    }

    pub fn u(&self) -> &Alphabet {
        self.vjoint.axis(0)
    }

    pub fn v1(&self) -> &Alphabet {
        self.vjoint.axis(1)
    }

    pub fn v2(&self) -> &Alphabet {
        self.vjoint.axis(2)
    }

    pub fn x(&self) -> &Alphabet {
        &self.xmap.out()[0]
    }

    pub fn has_trivial_u(&self) -> bool {
        self.u().size() == 1
    }

    pub fn p_v1v2(&self) -> JointPmf {
        self.vjoint.marginal(&[1, 2]).expect("three axes")
    }

    pub fn p_v1(&self) -> Pmf {
        self.vjoint.marginal(&[1]).and_then(|m| m.to_pmf()).expect("three axes")
    }

    pub fn p_v2(&self) -> Pmf {
        self.vjoint.marginal(&[2]).and_then(|m| m.to_pmf()).expect("three axes")
    }

    /// Per-letter channel `P(y1, y2 | v1, v2)`.
    pub fn to_outputs(&self, ch: &BroadcastChannel) -> Result<CondPmf> {
        self.check_channel(ch)?;
        self.xmap.then(ch.law())
    }

    /// Per-letter channel `P(y2 | v1, v2)`.
    pub fn to_y2(&self, ch: &BroadcastChannel) -> Result<CondPmf> {
        self.to_outputs(ch)?.marginal_out(&[1])
    }

    /// Per-letter channel `P(y1 | v1, v2)`.
    pub fn to_y1(&self, ch: &BroadcastChannel) -> Result<CondPmf> {
        self.to_outputs(ch)?.marginal_out(&[0])
    }

    fn check_channel(&self, ch: &BroadcastChannel) -> Result<()> {
        if self.x() != ch.input() {
            return Err(Error::AlphabetMismatch(format!(
                "scheme input alphabet `{}` differs from channel input `{}`",
                self.x().name(),
                ch.input().name()
            )));
        }
        Ok(())
    }
}

/// Joint law of `(U, V1, V2, X, Y1, Y2)` induced by a scheme and a channel.
pub fn induced_joint(ch: &BroadcastChannel, aux: &AuxScheme) -> Result<JointPmf> {
    aux.check_channel(ch)?;
    let (nu, n1, n2) = (aux.u().size(), aux.v1().size(), aux.v2().size());
    let nx = aux.x().size();
    let ny = ch.law().out_size();
    let mut mass = Vec::with_capacity(nu * n1 * n2 * nx * ny);
    for u in 0..nu {
        for a in 0..n1 {
            for b in 0..n2 {
                let pv = aux.vjoint.p(&[u, a, b]);
                let row = aux.xmap.row(a * n2 + b);
                for (x, &px) in row.iter().enumerate() {
                    for &py in ch.law().row(x) {
                        mass.push(pv * px * py);
                    }
                }
            }
        }
    }
    let axes = vec![
        aux.u().clone(),
        aux.v1().clone(),
        aux.v2().clone(),
        ch.input().renamed(names::X),
        ch.y1().renamed(names::Y1),
        ch.y2().renamed(names::Y2),
    ];
    let joint = JointPmf::new(axes, mass)?;
    check_markov(&joint)?;
    Ok(joint)
}

/// Checks `U - (V1, V2) - X - (Y1, Y2)` on an induced joint.
pub fn check_markov(joint: &JointPmf) -> Result<()> {
    use axis::*;
    let ux = mutual_information(joint, &[U], &[X], &[V1, V2])?;
    if ux > MARKOV_TOL {
        return Err(Error::MarkovViolation(format!("I(U; X | V1, V2) = {ux}")));
    }
    let vy = mutual_information(joint, &[U, V1, V2], &[Y1, Y2], &[X])?;
    if vy > MARKOV_TOL {
        return Err(Error::MarkovViolation(format!(
            "I(U, V1, V2; Y1, Y2 | X) = {vy}"
        )));
    }
    Ok(())
}

/// Stealth reference `Q(y2 | v2) = sum_v1 P_V1(v1) P(y2 | v1, v2)` from a
/// joint with axes named `V1`, `V2`, `Y2`.
///
/// `P(y2 | v1, v2)` is read off the joint, so it must be defined wherever
/// `P_V1(v1) P_V2(v2) > 0`. Rows for `v2` outside the support of `P_V2` are
/// filled with the `Y2` marginal.
pub fn stealth_reference(joint: &JointPmf) -> Result<CondPmf> {
    let i1 = joint.axis_index(names::V1)?;
    let i2 = joint.axis_index(names::V2)?;
    let iy = joint.axis_index(names::Y2)?;
    let p_v1 = joint.marginal(&[i1])?.to_pmf()?;
    let p_v2 = joint.marginal(&[i2])?.to_pmf()?;
    let p_y2 = joint.marginal(&[iy])?;
    let (w, defined) = joint.conditional(&[i1, i2], &[iy])?;
    let n2 = p_v2.alphabet().size();
    for (g, ok) in defined.iter().enumerate() {
        let (a, b) = (g / n2, g % n2);
        if !ok && p_v1.p(a) > 0.0 && p_v2.p(b) > 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "P(y2 | v1 = {}, v2 = {}) is undefined in the joint; derive the reference from the scheme instead",
                p_v1.alphabet().symbol(a),
                p_v2.alphabet().symbol(b)
            )));
        }
    }
    let q = stealth_reference_with(&p_v1, &w)?;
    let mut rows: Vec<f64> = Vec::with_capacity(q.given_size() * q.out_size());
    for (b, row) in q.rows().enumerate() {
        if p_v2.p(b) > 0.0 {
            rows.extend_from_slice(row);
        } else {
            rows.extend_from_slice(p_y2.mass());
        }
    }
    CondPmf::new(q.given().to_vec(), q.out().to_vec(), rows)
}

/// Stealth reference from `P_V1` and a per-letter channel `P(y2 | v1, v2)`.
pub fn stealth_reference_with(p_v1: &Pmf, w: &CondPmf) -> Result<CondPmf> {
    if w.given().len() != 2 || &w.given()[0] != p_v1.alphabet() {
        return Err(Error::AlphabetMismatch(
            "channel must condition on (V1, V2) with V1 matching the pmf".into(),
        ));
    }
    let n1 = p_v1.alphabet().size();
    let n2 = w.given()[1].size();
    let ny = w.out_size();
    let mut rows = vec![0.0; n2 * ny];
    for b in 0..n2 {
        for a in 0..n1 {
            let pa = p_v1.p(a);
            for (y, &py) in w.row(a * n2 + b).iter().enumerate() {
                rows[b * ny + y] += pa * py;
            }
        }
    }
    CondPmf::new(vec![w.given()[1].clone()], w.out().to_vec(), rows)
}

/// n-fold memoryless extension of a per-letter law (unconditional laws are
/// conditional laws with no conditioning axes).
#[derive(Debug, Clone)]
pub struct SequenceLaw {
    base: CondPmf,
    n: usize,
    samplers: Vec<Option<WeightedIndex<f64>>>,
}

impl SequenceLaw {
    pub fn new(base: CondPmf, n: usize) -> Result<Self> {
        let samplers = base
            .rows()
            .map(|row| WeightedIndex::new(row.iter().copied()).ok())
            .collect();
        Ok(Self { base, n, samplers })
    }

    pub fn iid(p: &Pmf, n: usize) -> Result<Self> {
        Self::new(
            CondPmf::new(vec![], vec![p.alphabet().clone()], p.mass().to_vec())?,
            n,
        )
    }

    pub fn base(&self) -> &CondPmf {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn row_at(&self, given: &[&[u8]], i: usize) -> usize {
        given
            .iter()
            .zip(self.base.given())
            .fold(0, |acc, (seq, a)| acc * a.size() + usize::from(seq[i]))
    }

    fn out_at(&self, out: &[&[u8]], i: usize) -> usize {
        out.iter()
            .zip(self.base.out())
            .fold(0, |acc, (seq, a)| acc * a.size() + usize::from(seq[i]))
    }

    fn check(&self, seqs: &[&[u8]], axes: &[Alphabet]) -> Result<()> {
        if seqs.len() != axes.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} sequences, got {}",
                axes.len(),
                seqs.len()
            )));
        }
        for (s, a) in seqs.iter().zip(axes) {
            if s.len() != self.n {
                return Err(Error::LengthMismatch {
                    expected: self.n,
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
        Ok(())
    }

    /// `log2` of the product of per-letter probabilities (`-inf` if zero).
    pub fn log2_prob(&self, given: &[&[u8]], out: &[&[u8]]) -> Result<f64> {
        self.check(given, self.base.given())?;
        self.check(out, self.base.out())?;
        let mut acc = 0.0;
        for i in 0..self.n {
            let p = self.base.p(self.row_at(given, i), self.out_at(out, i));
            if p == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            acc += p.log2();
        }
        Ok(acc)
    }

    pub fn prob(&self, given: &[&[u8]], out: &[&[u8]]) -> Result<f64> {
        Ok(self.log2_prob(given, out)?.exp2())
    }

    /// Draws one output sequence per output axis, letter by letter.
    pub fn sample<R: Rng + ?Sized>(&self, given: &[&[u8]], rng: &mut R) -> Result<Vec<Vec<u8>>> {
        self.check(given, self.base.given())?;
        let outs = self.base.out();
        let mut result = vec![Vec::with_capacity(self.n); outs.len()];
        for i in 0..self.n {
            let g = self.row_at(given, i);
            let sampler = self.samplers[g].as_ref().ok_or_else(|| {
                Error::InvalidDistribution(format!("row {g} cannot be sampled"))
            })?;
            let mut o = sampler.sample(rng);
            for (k, a) in outs.iter().enumerate().rev() {
                result[k].push((o % a.size()) as u8);
                o /= a.size();
            }
        }
        Ok(result)
    }
}
