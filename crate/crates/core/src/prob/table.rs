use super::Alphabet;
use crate::{Error, Result};

/// Normalization tolerance for every probability table.
pub const MASS_TOL: f64 = 1e-12;

/// Common view over dense probability tables.
pub trait ProbTable {
    fn axes(&self) -> &[Alphabet];
    fn mass(&self) -> &[f64];
}

fn check_mass(what: &str, mass: &[f64]) -> Result<()> {
    if let Some((i, &m)) = mass
        .iter()
        .enumerate()
        .find(|(_, m)| !m.is_finite() || **m < 0.0)
    {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entry {i} is {m}, expected a finite nonnegative value"
        )));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: mass sums to {total}, expected 1"
        )));
    }
    Ok(())
}

fn normalize(what: &str, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{what}: weights must be finite and nonnegative"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution(format!(
            "{what}: weights sum to zero"
        )));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

fn strides_for(axes: &[Alphabet]) -> Vec<usize> {
    let mut strides = vec![1; axes.len()];
    for i in (0..axes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * axes[i + 1].size();
    }
    strides
}

fn table_len(axes: &[Alphabet]) -> usize {
    axes.iter().map(Alphabet::size).product()
}

/// Probability mass function over a single alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    alphabet: Alphabet,
    mass: Vec<f64>,
}

impl Pmf {
    pub fn new(alphabet: Alphabet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != alphabet.size() {
            return Err(Error::AlphabetMismatch(format!(
                "pmf over `{}` needs {} entries, got {}",
                alphabet.name(),
                alphabet.size(),
                mass.len()
            )));
        }
        check_mass(alphabet.name(), &mass)?;
        Ok(Self { alphabet, mass })
    }

    pub fn from_weights(alphabet: Alphabet, weights: &[f64]) -> Result<Self> {
        let mass = normalize(alphabet.name(), weights)?;
        Self::new(alphabet, mass)
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let k = alphabet.size();
        Self {
            alphabet,
            mass: vec![1.0 / k as f64; k],
        }
    }

    pub fn point(alphabet: Alphabet, index: usize) -> Result<Self> {
        if index >= alphabet.size() {
            return Err(Error::InvalidParameter(format!(
                "point mass index {index} outside `{}`",
                alphabet.name()
            )));
        }
        let mut mass = vec![0.0; alphabet.size()];
        mass[index] = 1.0;
        Ok(Self { alphabet, mass })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Mass of a symbol given by label; unknown labels are rejected.
    pub fn prob(&self, symbol: &str) -> Result<f64> {
        Ok(self.mass[self.alphabet.index_of(symbol)?])
    }

    pub fn p(&self, index: usize) -> f64 {
        self.mass[index]
    }

    pub fn to_joint(&self) -> JointPmf {
        JointPmf {
            axes: vec![self.alphabet.clone()],
            mass: self.mass.clone(),
            strides: vec![1],
        }
    }
}

impl ProbTable for Pmf {
    fn axes(&self) -> &[Alphabet] {
        std::slice::from_ref(&self.alphabet)
    }
    fn mass(&self) -> &[f64] {
        &self.mass
    }
}

/// Dense joint distribution over an ordered list of alphabets, stored
/// row-major (last axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    axes: Vec<Alphabet>,
    mass: Vec<f64>,
    strides: Vec<usize>,
}

impl JointPmf {
    pub fn new(axes: Vec<Alphabet>, mass: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidParameter(
                "joint pmf needs at least one axis".into(),
            ));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.name() == a.name()) {
                return Err(Error::InvalidParameter(format!(
                    "axis name `{}` repeated",
                    a.name()
                )));
            }
        }
        let len = table_len(&axes);
        if mass.len() != len {
            return Err(Error::AlphabetMismatch(format!(
                "joint table needs {len} entries, got {}",
                mass.len()
            )));
        }
        check_mass("joint pmf", &mass)?;
        let strides = strides_for(&axes);
        Ok(Self {
            axes,
            mass,
            strides,
        })
    }

    pub fn from_weights(axes: Vec<Alphabet>, weights: &[f64]) -> Result<Self> {
        let mass = normalize("joint pmf", weights)?;
        Self::new(axes, mass)
    }

    /// Outer product `P_A(a) P_B(b)` with axes `A ++ B`.
    pub fn product(a: &JointPmf, b: &JointPmf) -> Result<Self> {
        let mut axes = a.axes.clone();
        axes.extend(b.axes.iter().cloned());
        let mass = a
            .mass
            .iter()
            .flat_map(|&x| b.mass.iter().map(move |&y| x * y))
            .collect();
        Self::new(axes, mass)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Alphabet::size).collect()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn axis(&self, i: usize) -> &Alphabet {
        &self.axes[i]
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name() == name)
            .ok_or_else(|| Error::MissingAxis(name.to_string()))
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let i = flat / s;
                flat %= s;
                i
            })
            .collect()
    }

    pub fn p(&self, idx: &[usize]) -> f64 {
        self.mass[self.flat_index(idx)]
    }

    /// Mass at a tuple of symbol labels.
    pub fn prob(&self, symbols: &[&str]) -> Result<f64> {
        if symbols.len() != self.axes.len() {
            return Err(Error::LengthMismatch {
                expected: self.axes.len(),
                found: symbols.len(),
            });
        }
        let idx = symbols
            .iter()
            .zip(&self.axes)
            .map(|(s, a)| a.index_of(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.p(&idx))
    }

    /// Marginal onto `keep`, with axes in the order given.
    pub fn marginal(&self, keep: &[usize]) -> Result<JointPmf> {
        check_axes(self.axes.len(), keep)?;
        if keep.is_empty() {
            return Err(Error::InvalidParameter(
                "marginal needs at least one axis".into(),
            ));
        }
        let axes: Vec<Alphabet> = keep.iter().map(|&k| self.axes[k].clone()).collect();
        let out_strides = strides_for(&axes);
        let mut mass = vec![0.0; table_len(&axes)];
        let mut idx = vec![0usize; self.axes.len()];
        for &m in &self.mass {
            let target: usize = keep
                .iter()
                .zip(&out_strides)
                .map(|(&k, s)| idx[k] * s)
                .sum();
            mass[target] += m;
            increment(&mut idx, &self.axes);
        }
        Ok(JointPmf {
            axes,
            mass,
            strides: out_strides,
        })
    }

    pub fn marginal_by_names(&self, names: &[&str]) -> Result<JointPmf> {
        let keep = names
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<Vec<_>>>()?;
        self.marginal(&keep)
    }

    pub fn to_pmf(&self) -> Result<Pmf> {
        if self.axes.len() != 1 {
            return Err(Error::InvalidParameter(format!(
                "table has {} axes, expected one",
                self.axes.len()
            )));
        }
        Ok(Pmf {
            alphabet: self.axes[0].clone(),
            mass: self.mass.clone(),
        })
    }

    /// Conditional law of `out` given `given`.
    ///
    /// Rows whose conditioning tuple has zero mass are filled with the uniform
    /// distribution and flagged `false` in the returned mask.
    pub fn conditional(&self, given: &[usize], out: &[usize]) -> Result<(CondPmf, Vec<bool>)> {
        let mut all: Vec<usize> = given.to_vec();
        all.extend_from_slice(out);
        check_axes(self.axes.len(), &all)?;
        if out.is_empty() {
            return Err(Error::InvalidParameter(
                "conditional needs at least one output axis".into(),
            ));
        }
        let table = self.marginal(&all)?;
        let gsize: usize = given.iter().map(|&g| self.axes[g].size()).product();
        let osize: usize = out.iter().map(|&o| self.axes[o].size()).product();
        let mut rows = table.mass;
        let mut defined = vec![true; gsize];
        for (g, row) in rows.chunks_mut(osize).enumerate() {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|x| *x /= total);
            } else {
                defined[g] = false;
                row.iter_mut().for_each(|x| *x = 1.0 / osize as f64);
            }
        }
        let cond = CondPmf::new(
            given.iter().map(|&g| self.axes[g].clone()).collect(),
            out.iter().map(|&o| self.axes[o].clone()).collect(),
            rows,
        )?;
        Ok((cond, defined))
    }
}

impl ProbTable for JointPmf {
    fn axes(&self) -> &[Alphabet] {
        &self.axes
    }
    fn mass(&self) -> &[f64] {
        &self.mass
    }
}

impl From<&Pmf> for JointPmf {
    fn from(p: &Pmf) -> Self {
        p.to_joint()
    }
}

/// Conditional distribution `P(out | given)`; one normalized row per
/// conditioning tuple, rows laid out in row-major order of `given`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondPmf {
    given: Vec<Alphabet>,
    out: Vec<Alphabet>,
    rows: Vec<f64>,
    out_size: usize,
}

impl CondPmf {
    pub fn new(given: Vec<Alphabet>, out: Vec<Alphabet>, rows: Vec<f64>) -> Result<Self> {
        if out.is_empty() {
            return Err(Error::InvalidParameter(
                "conditional pmf needs an output axis".into(),
            ));
        }
        let gsize = table_len(&given);
        let out_size = table_len(&out);
        if rows.len() != gsize * out_size {
            return Err(Error::AlphabetMismatch(format!(
                "conditional table needs {} entries, got {}",
                gsize * out_size,
                rows.len()
            )));
        }
        for (g, row) in rows.chunks(out_size).enumerate() {
            check_mass(&format!("row {g}"), row)?;
        }
        Ok(Self {
            given,
            out,
            rows,
            out_size,
        })
    }

    /// Rows are normalized individually before validation.
    pub fn from_weights(given: Vec<Alphabet>, out: Vec<Alphabet>, weights: &[f64]) -> Result<Self> {
        let out_size = table_len(&out);
        if out_size == 0 || !weights.len().is_multiple_of(out_size) {
            return Err(Error::AlphabetMismatch(
                "weights do not tile the output alphabet".into(),
            ));
        }
        let mut rows = Vec::with_capacity(weights.len());
        for (g, w) in weights.chunks(out_size).enumerate() {
            rows.extend(normalize(&format!("row {g}"), w)?);
        }
        Self::new(given, out, rows)
    }

    /// Deterministic map `out = f(given)`, encoded as 0/1 rows.
    pub fn deterministic<F>(given: Vec<Alphabet>, out: Vec<Alphabet>, f: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> usize,
    {
        let gsize = table_len(&given);
        let out_size = table_len(&out);
        let gstrides = strides_for(&given);
        let mut rows = vec![0.0; gsize * out_size];
        for g in 0..gsize {
            let idx: Vec<usize> = gstrides
                .iter()
                .zip(&given)
                .map(|(s, a)| (g / s) % a.size())
                .collect();
            let o = f(&idx);
            if o >= out_size {
                return Err(Error::InvalidParameter(format!(
                    "deterministic map sends row {g} to {o}, outside the output table"
                )));
            }
            rows[g * out_size + o] = 1.0;
        }
        Self::new(given, out, rows)
    }

    pub fn given(&self) -> &[Alphabet] {
        &self.given
    }

    pub fn out(&self) -> &[Alphabet] {
        &self.out
    }

    pub fn given_size(&self) -> usize {
        self.rows.len() / self.out_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn row(&self, g: usize) -> &[f64] {
        &self.rows[g * self.out_size..(g + 1) * self.out_size]
    }

    pub fn p(&self, g: usize, o: usize) -> f64 {
        self.rows[g * self.out_size + o]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks(self.out_size)
    }

    /// Flat row index of a conditioning tuple.
    pub fn given_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.given)
            .fold(0, |acc, (&i, a)| acc * a.size() + i)
    }

    /// Joint law `P(g) P(o | g)` with axes `given ++ out`.
    pub fn compose(&self, input: &JointPmf) -> Result<JointPmf> {
        if input.axes() != self.given.as_slice() {
            return Err(Error::AlphabetMismatch(
                "input axes differ from the conditioning axes".into(),
            ));
        }
        let mut axes = self.given.clone();
        axes.extend(self.out.iter().cloned());
        let mass = input
            .mass()
            .iter()
            .zip(self.rows.chunks(self.out_size))
            .flat_map(|(&pg, row)| row.iter().map(move |&q| pg * q))
            .collect();
        JointPmf::new(axes, mass)
    }

    /// Cascade `P(z | g) = sum_o P(o | g) next(z | o)`.
    pub fn then(&self, next: &CondPmf) -> Result<CondPmf> {
        if next.given != self.out {
            return Err(Error::AlphabetMismatch(
                "cascade: output axes of the first stage differ from the second stage input".into(),
            ));
        }
        let zsize = next.out_size;
        let mut rows = vec![0.0; self.given_size() * zsize];
        for (g, row) in self.rows.chunks(self.out_size).enumerate() {
            for (o, &po) in row.iter().enumerate() {
                if po == 0.0 {
                    continue;
                }
                for (z, &pz) in next.row(o).iter().enumerate() {
                    rows[g * zsize + z] += po * pz;
                }
            }
        }
        CondPmf::new(self.given.clone(), next.out.clone(), rows)
    }

    /// Marginalizes the output onto `keep` (indices into `out`).
    pub fn marginal_out(&self, keep: &[usize]) -> Result<CondPmf> {
        check_axes(self.out.len(), keep)?;
        let out_axes: Vec<Alphabet> = keep.iter().map(|&k| self.out[k].clone()).collect();
        let ksize = table_len(&out_axes);
        let kstrides = strides_for(&out_axes);
        let mut rows = vec![0.0; self.given_size() * ksize];
        for (g, row) in self.rows.chunks(self.out_size).enumerate() {
            let mut idx = vec![0usize; self.out.len()];
            for &p in row {
                let t: usize = keep.iter().zip(&kstrides).map(|(&k, s)| idx[k] * s).sum();
                rows[g * ksize + t] += p;
                increment(&mut idx, &self.out);
            }
        }
        CondPmf::new(self.given.clone(), out_axes, rows)
    }
}

fn check_axes(n_axes: usize, axes: &[usize]) -> Result<()> {
    for (i, &a) in axes.iter().enumerate() {
        if a >= n_axes {
            return Err(Error::InvalidParameter(format!(
                "axis {a} out of range (table has {n_axes})"
            )));
        }
        if axes[..i].contains(&a) {
            return Err(Error::OverlappingAxes(format!("axis {a} listed twice")));
        }
    }
    Ok(())
}

fn increment(idx: &mut [usize], axes: &[Alphabet]) {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < axes[i].size() {
            return;
        }
        idx[i] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(name: &str) -> Alphabet {
        Alphabet::indexed(name, 2).unwrap()
    }

    #[test]
    fn pmf_validation() {
        assert!(Pmf::new(bits("A"), vec![0.5, 0.4]).is_err());
        assert!(Pmf::new(bits("A"), vec![1.5, -0.5]).is_err());
        assert!(Pmf::new(bits("A"), vec![0.5]).is_err());
        let p = Pmf::new(bits("A"), vec![0.25, 0.75]).unwrap();
        assert_eq!(p.prob("1").unwrap(), 0.75);
        assert!(p.prob("2").is_err());
    }

    #[test]
    fn marginal_commutes_with_axis_order() {
        let axes = vec![bits("A"), Alphabet::indexed("B", 3).unwrap(), bits("C")];
        let w: Vec<f64> = (1..=12).map(f64::from).collect();
        let j = JointPmf::from_weights(axes, &w).unwrap();
        let direct = j.marginal(&[1]).unwrap();
        let via_ab = j.marginal(&[0, 1]).unwrap().marginal(&[1]).unwrap();
        let via_cb = j.marginal(&[2, 1]).unwrap().marginal(&[1]).unwrap();
        for i in 0..3 {
            assert!((direct.p(&[i]) - via_ab.p(&[i])).abs() < 1e-15);
            assert!((direct.p(&[i]) - via_cb.p(&[i])).abs() < 1e-15);
        }
        let swapped = j.marginal(&[2, 0]).unwrap();
        assert!((swapped.p(&[1, 0]) - j.marginal(&[0, 2]).unwrap().p(&[0, 1])).abs() < 1e-15);
    }

    #[test]
    fn conditional_roundtrip() {
        let axes = vec![bits("A"), bits("B")];
        let j = JointPmf::new(axes, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (c, defined) = j.conditional(&[0], &[1]).unwrap();
        assert!(defined.iter().all(|&d| d));
        let back = c.compose(&j.marginal(&[0]).unwrap()).unwrap();
        for (x, y) in back.mass().iter().zip(j.mass()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn cascade_and_output_marginal() {
        let x = bits("X");
        let bsc = CondPmf::new(vec![x.clone()], vec![bits("Y")], vec![0.9, 0.1, 0.1, 0.9]).unwrap();
        let bsc2 = CondPmf::new(vec![bits("Y")], vec![bits("Z")], vec![0.8, 0.2, 0.2, 0.8]).unwrap();
        let c = bsc.then(&bsc2).unwrap();
        assert!((c.p(0, 1) - (0.9 * 0.2 + 0.1 * 0.8)).abs() < 1e-15);

        let pair = CondPmf::deterministic(vec![x], vec![bits("Y1"), bits("Y2")], |i| i[0] * 2 + 1 - i[0])
            .unwrap();
        let y2 = pair.marginal_out(&[1]).unwrap();
        assert_eq!(y2.row(0), &[0.0, 1.0]);
        assert_eq!(y2.row(1), &[1.0, 0.0]);
    }
}
