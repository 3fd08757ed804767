//! The random-coding construction: codebook draw, covering selection,
//! encoding with typical input selection, typicality decoding, and Monte
//! Carlo error estimation.
//!
//! Indices are 0-based, so the covering fallback pair is `(0, 0)`.

use rand::distr::{Distribution, Uniform, weighted::WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{induced_joint, names, AuxScheme, BroadcastChannel, SequenceLaw};
use crate::par;
use crate::prob::{JointPmf, Pmf, ProbTable};
use crate::region::RatePoint;
use crate::rng::{self, tag};
use crate::typicality::TypicalityTest;
use crate::{Error, Result};

/// Default cap on the number of letters stored in an explicit codebook.
pub const CODEBOOK_CAP: f64 = 1e8;

/// Rejection attempts of the typical input selection.
pub const SELECTION_ATTEMPTS: usize = 64;

/// `ε < ε' < ε''` for covering, input selection and decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epsilons {
    pub cover: f64,
    pub select: f64,
    pub decode: f64,
}

impl Epsilons {
    pub fn new(cover: f64, select: f64, decode: f64) -> Result<Self> {
        let e = Self { cover, select, decode };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.cover && self.cover < self.select && self.select < self.decode && self.decode < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "epsilons must satisfy 0 < e < e' < e'' < 1/2, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for Epsilons {
    fn default() -> Self {
        Self { cover: 0.2, select: 0.3, decode: 0.4 }
    }
}

/// `ceil(2^{n r})`, with `n r` snapped to the nearest integer when within
/// rounding noise of it.
pub fn index_count(n: usize, rate: f64) -> f64 {
    let e = n as f64 * rate;
    let e = if (e - e.round()).abs() < 1e-9 { e.round() } else { e };
    e.exp2().ceil()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub rates: RatePoint,
    pub epsilons: Epsilons,
    pub seed: u64,
}

/// Index counts `M_t`, `J_t`, `K` as reals; they may exceed any integer type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Counts {
    pub m1: f64,
    pub m2: f64,
    pub j1: f64,
    pub j2: f64,
    pub k: f64,
}

impl CodeParams {
    pub fn new(n: usize, rates: RatePoint, epsilons: Epsilons, seed: u64) -> Result<Self> {
        let p = Self { n, rates, epsilons, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("blocklength must be positive".into()));
        }
        self.rates.validate()?;
        self.epsilons.validate()
    }

    pub fn counts(&self) -> Counts {
        let r = &self.rates;
        Counts {
            m1: index_count(self.n, r.r1),
            m2: index_count(self.n, r.r2),
            j1: index_count(self.n, r.r1p),
            j2: index_count(self.n, r.r2p),
            k: index_count(self.n, r.rco),
        }
    }

    /// Letters an explicit codebook would hold.
    pub fn codebook_letters(&self) -> f64 {
        let c = self.counts();
        (c.m1 * c.j1 + c.m2 * c.j2) * c.k * self.n as f64
    }
}

/// Dimensions `[M][J][K]` of one user's codeword array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub m: usize,
    pub j: usize,
    pub k: usize,
}

impl Dims {
    fn len(&self) -> usize {
        self.m * self.j * self.k
    }

    fn flat(&self, m: usize, s: usize, k: usize) -> usize {
        (m * self.j + s) * self.k + k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    params: CodeParams,
    dims: [Dims; 2],
    words: [Vec<u8>; 2],
}

fn to_index(x: f64, what: &str) -> Result<usize> {
    if x > usize::MAX as f64 / 2.0 {
        return Err(Error::CapExceeded { what: what.into(), size: x, cap: usize::MAX as f64 / 2.0 });
    }
    Ok(x as usize)
}

fn letter_sampler(p: &Pmf) -> WeightedIndex<f64> {
    WeightedIndex::new(p.mass().iter().copied()).expect("valid pmf")
}

fn draw_word<R: Rng + ?Sized>(sampler: &WeightedIndex<f64>, n: usize, rng: &mut R, out: &mut Vec<u8>) {
    out.extend((0..n).map(|_| sampler.sample(rng) as u8));
}

/// Draws both codeword arrays i.i.d. from the scheme's `V1` and `V2`
/// marginals. Rows `m` use independent derived streams.
pub fn generate_codebook(scheme: &AuxScheme, params: &CodeParams) -> Result<Codebook> {
    generate_codebook_capped(scheme, params, CODEBOOK_CAP)
}

pub fn generate_codebook_capped(scheme: &AuxScheme, params: &CodeParams, cap: f64) -> Result<Codebook> {
    params.validate()?;
    let size = params.codebook_letters();
    if size > cap {
        return Err(Error::CapExceeded { what: "codebook letters".into(), size, cap });
    }
    let c = params.counts();
    let k = to_index(c.k, "covering index count")?;
    let dims = [
        Dims { m: to_index(c.m1, "message count")?, j: to_index(c.j1, "randomization count")?, k },
        Dims { m: to_index(c.m2, "message count")?, j: to_index(c.j2, "randomization count")?, k },
    ];
    let marginals = [scheme.p_v1(), scheme.p_v2()];
    let stream_tags = [tag::CODEBOOK_V1, tag::CODEBOOK_V2];
    let n = params.n;
    let mut words: [Vec<u8>; 2] = Default::default();
    for t in 0..2 {
        let sampler = letter_sampler(&marginals[t]);
        let per_row = dims[t].j * dims[t].k;
        let rows = par::map_range(dims[t].m, |m| {
            let mut rng = rng::derive(params.seed, stream_tags[t], m as u64);
            let mut row = Vec::with_capacity(per_row * n);
            for _ in 0..per_row {
                draw_word(&sampler, n, &mut rng, &mut row);
            }
            row
        });
        words[t] = rows.concat();
    }
    Ok(Codebook { params: *params, dims, words })
}

impl Codebook {
    /// Codebook from explicit codeword arrays in `(m, s, k)` order.
    pub fn from_words(params: CodeParams, v1: Vec<u8>, v2: Vec<u8>) -> Result<Self> {
        params.validate()?;
        let c = params.counts();
        let k = to_index(c.k, "covering index count")?;
        let dims = [
            Dims { m: to_index(c.m1, "message count")?, j: to_index(c.j1, "randomization count")?, k },
            Dims { m: to_index(c.m2, "message count")?, j: to_index(c.j2, "randomization count")?, k },
        ];
        for (d, w) in dims.iter().zip([&v1, &v2]) {
            let expected = d.len() * params.n;
            if w.len() != expected {
                return Err(Error::LengthMismatch { expected, found: w.len() });
            }
        }
        Ok(Self { params, dims, words: [v1, v2] })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Dimensions for user `t` in `{1, 2}`.
    pub fn dims(&self, t: usize) -> Dims {
        self.dims[t - 1]
    }

    /// Codeword `v_t(m, s, k)` for user `t` in `{1, 2}`.
    pub fn word(&self, t: usize, m: usize, s: usize, k: usize) -> &[u8] {
        let d = self.dims[t - 1];
        let n = self.params.n;
        let i = d.flat(m, s, k);
        &self.words[t - 1][i * n..(i + 1) * n]
    }

    /// The `K` codewords of user `t` for `(m, s)`, concatenated.
    pub fn bank(&self, t: usize, m: usize, s: usize) -> &[u8] {
        let d = self.dims[t - 1];
        let n = self.params.n;
        let i = d.flat(m, s, 0);
        &self.words[t - 1][i * n..(i + d.k) * n]
    }

    /// All codewords of user `t`, concatenated in `(m, s, k)` order.
    pub fn words(&self, t: usize) -> &[u8] {
        &self.words[t - 1]
    }
}

/// Outcome of the covering selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Covering {
    pub k1: usize,
    pub k2: usize,
    pub fallback: bool,
}

/// Lexicographically smallest `(k1, k2)` with a jointly typical codeword
/// pair among two banks of `K` codewords each; `(0, 0)` flagged as a
/// fallback if there is none.
pub fn select_covering(bank1: &[u8], bank2: &[u8], n: usize, test: &TypicalityTest) -> Covering {
    let k = bank1.len() / n;
    for k1 in 0..k {
        let a = &bank1[k1 * n..(k1 + 1) * n];
        for k2 in 0..bank2.len() / n {
            let b = &bank2[k2 * n..(k2 + 1) * n];
            if test.accepts(&[a, b]) {
                return Covering { k1, k2, fallback: false };
            }
        }
    }
    Covering { k1: 0, k2: 0, fallback: true }
}

/// Covering selection for `(m1, s1, m2, s2)` with typicality parameter `epsilon`.
pub fn phi_tau(cb: &Codebook, scheme: &AuxScheme, m1: usize, s1: usize, m2: usize, s2: usize, epsilon: f64) -> Covering {
    let test = TypicalityTest::new(&scheme.p_v1v2(), epsilon, cb.n());
    select_covering(cb.bank(1, m1, s1), cb.bank(2, m2, s2), cb.n(), &test)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransmitRecord {
    pub m1: usize,
    pub m2: usize,
    pub s1: usize,
    pub s2: usize,
    pub k1: usize,
    pub k2: usize,
    pub covering_fallback: bool,
    /// Set when no typical input was found within the retry bound.
    pub selection_fallback: bool,
    pub x: Vec<u8>,
}

/// Typical input selection: rejection sampling from `P(x | v1, v2)` with a
/// bounded number of attempts, then an unrestricted draw.
#[derive(Debug, Clone)]
pub struct InputSelector {
    law: SequenceLaw,
    test: TypicalityTest,
}

impl InputSelector {
    pub fn new(scheme: &AuxScheme, n: usize, epsilon: f64) -> Result<Self> {
        let joint = scheme.xmap().compose(&scheme.p_v1v2())?;
        Ok(Self {
            law: SequenceLaw::new(scheme.xmap().clone(), n)?,
            test: TypicalityTest::new(&joint, epsilon, n),
        })
    }

    /// Returns the input and whether the retry bound was exhausted.
    pub fn select<R: Rng + ?Sized>(&self, v1: &[u8], v2: &[u8], rng: &mut R) -> Result<(Vec<u8>, bool)> {
        for _ in 0..SELECTION_ATTEMPTS {
            let x = self.law.sample(&[v1, v2], rng)?.remove(0);
            if self.test.accepts(&[v1, v2, &x]) {
                return Ok((x, false));
            }
        }
        Ok((self.law.sample(&[v1, v2], rng)?.remove(0), true))
    }
}

/// Stochastic encoder bound to a codebook.
#[derive(Debug, Clone)]
pub struct Encoder<'a> {
    cb: &'a Codebook,
    cover: TypicalityTest,
    selector: InputSelector,
}

impl<'a> Encoder<'a> {
    pub fn new(cb: &'a Codebook, scheme: &AuxScheme) -> Result<Self> {
        let (n, e) = (cb.n(), cb.params().epsilons);
        Ok(Self {
            cb,
            cover: TypicalityTest::new(&scheme.p_v1v2(), e.cover, n),
            selector: InputSelector::new(scheme, n, e.select)?,
        })
    }

    pub fn covering(&self, m1: usize, s1: usize, m2: usize, s2: usize) -> Covering {
        select_covering(self.cb.bank(1, m1, s1), self.cb.bank(2, m2, s2), self.cb.n(), &self.cover)
    }

    pub fn encode<R: Rng + ?Sized>(&self, m1: usize, m2: usize, rng: &mut R) -> Result<TransmitRecord> {
        let (d1, d2) = (self.cb.dims(1), self.cb.dims(2));
        if m1 >= d1.m || m2 >= d2.m {
            return Err(Error::InvalidParameter(format!(
                "messages ({m1}, {m2}) out of range ({}, {})",
                d1.m, d2.m
            )));
        }
        let s1 = Uniform::new(0, d1.j).expect("nonempty").sample(rng);
        let s2 = Uniform::new(0, d2.j).expect("nonempty").sample(rng);
        let c = self.covering(m1, s1, m2, s2);
        let v1 = self.cb.word(1, m1, s1, c.k1);
        let v2 = self.cb.word(2, m2, s2, c.k2);
        let (x, selection_fallback) = self.selector.select(v1, v2, rng)?;
        Ok(TransmitRecord {
            m1,
            m2,
            s1,
            s2,
            k1: c.k1,
            k2: c.k2,
            covering_fallback: c.fallback,
            selection_fallback,
            x,
        })
    }
}

/// Encodes `(m1, m2)` with the codebook's epsilons.
pub fn encode<R: Rng + ?Sized>(cb: &Codebook, scheme: &AuxScheme, m1: usize, m2: usize, rng: &mut R) -> Result<TransmitRecord> {
    Encoder::new(cb, scheme)?.encode(m1, m2, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecodeFailure {
    NoCandidate,
    Ambiguous,
}

/// `P_{V_t Y_t}` of receiver `t` in `{1, 2}`.
pub fn receiver_law(scheme: &AuxScheme, ch: &BroadcastChannel, t: usize) -> Result<JointPmf> {
    let joint = induced_joint(ch, scheme)?;
    let (v, y) = match t {
        1 => (names::V1, names::Y1),
        2 => (names::V2, names::Y2),
        _ => return Err(Error::InvalidParameter(format!("receiver must be 1 or 2, got {t}"))),
    };
    joint.marginal_by_names(&[v, y])
}

/// Typicality decoder of receiver `t`.
#[derive(Debug, Clone)]
pub struct Decoder {
    t: usize,
    test: TypicalityTest,
}

impl Decoder {
    pub fn new(scheme: &AuxScheme, ch: &BroadcastChannel, t: usize, n: usize, epsilon: f64) -> Result<Self> {
        let law = receiver_law(scheme, ch, t)?;
        Ok(Self { t, test: TypicalityTest::new(&law, epsilon, n) })
    }

    pub fn test(&self) -> &TypicalityTest {
        &self.test
    }

    /// The unique `(m, s)` such that some `k` puts `v_t(m, s, k)` in the
    /// typical set with `y`.
    pub fn decode(&self, cb: &Codebook, y: &[u8]) -> std::result::Result<(usize, usize), DecodeFailure> {
        let d = cb.dims(self.t);
        let n = cb.n();
        if y.len() != n {
            return Err(DecodeFailure::NoCandidate);
        }
        let mut found = None;
        for m in 0..d.m {
            for s in 0..d.j {
                let bank = cb.bank(self.t, m, s);
                if bank.chunks(n).any(|v| self.test.accepts(&[v, y])) {
                    if found.is_some() {
                        return Err(DecodeFailure::Ambiguous);
                    }
                    found = Some((m, s));
                }
            }
        }
        found.ok_or(DecodeFailure::NoCandidate)
    }
}

/// Decodes `y` at receiver `t` with typicality parameter `epsilon`.
pub fn decode(
    cb: &Codebook,
    scheme: &AuxScheme,
    ch: &BroadcastChannel,
    y: &[u8],
    t: usize,
    epsilon: f64,
) -> Result<std::result::Result<(usize, usize), DecodeFailure>> {
    if y.len() != cb.n() {
        return Err(Error::LengthMismatch { expected: cb.n(), found: y.len() });
    }
    Ok(Decoder::new(scheme, ch, t, cb.n(), epsilon)?.decode(cb, y))
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut f = vec![0.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] + (i as f64).ln();
    }
    f
}

/// Natural log of `P(c in [lo, hi] cellwise)` for `c ~ Multinomial(total, p)`.
pub fn ln_multinomial_box(total: usize, p: &[f64], lo: &[u64], hi: &[u64]) -> f64 {
    let lf = ln_factorials(total);
    // s[r]: log of sum over partial allocations using r trials of prod p^c / c!
    let mut s = vec![f64::NEG_INFINITY; total + 1];
    s[0] = 0.0;
    for (a, &pa) in p.iter().enumerate() {
        let mut next = vec![f64::NEG_INFINITY; total + 1];
        let c_hi = (hi[a] as usize).min(total);
        for (r, &sr) in s.iter().enumerate() {
            if sr == f64::NEG_INFINITY {
                continue;
            }
            for c in (lo[a] as usize)..=c_hi.min(total - r) {
                let term = if c == 0 {
                    0.0
                } else if pa == 0.0 {
                    break;
                } else {
                    c as f64 * pa.ln() - lf[c]
                };
                next[r + c] = log_add(next[r + c], sr + term);
            }
        }
        s = next;
    }
    s[total] + lf[total]
}

/// Probability that an independent codeword drawn i.i.d. from `p_v` is
/// typical with `y`, given the decoder's count windows.
pub struct ImpostorModel {
    p_v: Vec<f64>,
    nv: usize,
    ny: usize,
    lo: Vec<u64>,
    hi: Vec<u64>,
}

impl ImpostorModel {
    pub fn new(p_v: &Pmf, law: &JointPmf, epsilon: f64, n: usize) -> Self {
        let (nv, ny) = (law.axis(0).size(), law.axis(1).size());
        let nf = n as f64;
        let (lo, hi) = law
            .mass()
            .iter()
            .map(|&p| {
                if p == 0.0 {
                    (0, 0)
                } else {
                    let lo = (nf * p * (1.0 - epsilon) - 1e-9).ceil().max(0.0);
                    let hi = (nf * p * (1.0 + epsilon) + 1e-9).floor();
                    (lo as u64, hi as u64)
                }
            })
            .unzip();
        Self { p_v: p_v.mass().to_vec(), nv, ny, lo, hi }
    }

    /// `ln q(y)`: positions sharing an output symbol form independent
    /// multinomial blocks.
    pub fn ln_typical_prob(&self, y: &[u8]) -> f64 {
        let mut by_y = vec![0usize; self.ny];
        for &b in y {
            by_y[usize::from(b)] += 1;
        }
        let mut total = 0.0;
        for (b, &nb) in by_y.iter().enumerate() {
            let lo: Vec<u64> = (0..self.nv).map(|a| self.lo[a * self.ny + b]).collect();
            let hi: Vec<u64> = (0..self.nv).map(|a| self.hi[a * self.ny + b]).collect();
            if lo.iter().sum::<u64>() > nb as u64 || hi.iter().sum::<u64>() < nb as u64 {
                return f64::NEG_INFINITY;
            }
            total += ln_multinomial_box(nb, &self.p_v, &lo, &hi);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    /// Probability that at least one of `count` independent codewords is typical with `y`.
    pub fn any_of(&self, y: &[u8], count: f64) -> f64 {
        let lq = self.ln_typical_prob(y);
        if lq == f64::NEG_INFINITY || count <= 0.0 {
            return 0.0;
        }
        let q = lq.exp();
        let ln_none = if q >= 1.0 { f64::NEG_INFINITY } else { count * (-q).ln_1p() };
        -ln_none.exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimationMode {
    /// Explicit when the codebook fits under [`CODEBOOK_CAP`], else ensemble.
    #[default]
    Auto,
    /// One materialized codebook, exhaustive decoding.
    Explicit,
    /// Fresh covering banks per trial; all other codewords are marginalized
    /// through the exact probability of being typical with the output.
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub error1: bool,
    pub error2: bool,
    pub covering_fallback: bool,
    pub selection_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub n: usize,
    pub trials: usize,
    pub mode: EstimationMode,
    pub pe1: f64,
    pub pe2: f64,
    /// 95% normal-approximation half-width, per receiver.
    pub ci1: f64,
    pub ci2: f64,
    pub ci_halfwidth: f64,
    pub covering_fallback_rate: f64,
    pub selection_fallback_rate: f64,
}

fn half_width(p: f64, trials: usize) -> f64 {
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Summarizes per-trial outcomes.
pub fn summarize(n: usize, mode: EstimationMode, outcomes: &[TrialOutcome]) -> ErrorEstimate {
    let t = outcomes.len();
    let rate = |f: fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / t as f64;
    let pe1 = rate(|o| o.error1);
    let pe2 = rate(|o| o.error2);
    let (ci1, ci2) = (half_width(pe1, t), half_width(pe2, t));
    ErrorEstimate {
        n,
        trials: t,
        mode,
        pe1,
        pe2,
        ci1,
        ci2,
        ci_halfwidth: ci1.max(ci2),
        covering_fallback_rate: rate(|o| o.covering_fallback),
        selection_fallback_rate: rate(|o| o.selection_fallback),
    }
}

/// Resolves [`EstimationMode::Auto`] for the given parameters.
pub fn resolve_mode(mode: EstimationMode, params: &CodeParams) -> EstimationMode {
    match mode {
        EstimationMode::Auto if params.codebook_letters() <= CODEBOOK_CAP => EstimationMode::Explicit,
        EstimationMode::Auto => EstimationMode::Ensemble,
        m => m,
    }
}

/// Runs `trials` independent transmissions of uniformly drawn messages.
/// A trial counts as an error at receiver `t` unless it recovers `(m_t, s_t)`.
pub fn simulate_trials(
    scheme: &AuxScheme,
    ch: &BroadcastChannel,
    params: &CodeParams,
    trials: usize,
    mode: EstimationMode,
) -> Result<(EstimationMode, Vec<TrialOutcome>)> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    params.validate()?;
    let mode = resolve_mode(mode, params);
    let n = params.n;
    let eps = params.epsilons;
    let channel = SequenceLaw::new(ch.law().clone(), n)?;
    let decoders = [
        Decoder::new(scheme, ch, 1, n, eps.decode)?,
        Decoder::new(scheme, ch, 2, n, eps.decode)?,
    ];
    let outcomes = match mode {
        EstimationMode::Explicit | EstimationMode::Auto => {
            let cb = generate_codebook(scheme, params)?;
            let enc = Encoder::new(&cb, scheme)?;
            let (d1, d2) = (cb.dims(1), cb.dims(2));
            let results = par::map_range(trials, |i| -> Result<TrialOutcome> {
                let mut rng = rng::derive(params.seed, tag::TRIAL, i as u64);
                let m1 = rng.random_range(0..d1.m);
                let m2 = rng.random_range(0..d2.m);
                let rec = enc.encode(m1, m2, &mut rng)?;
                let y = channel.sample(&[&rec.x], &mut rng)?;
                Ok(TrialOutcome {
                    error1: decoders[0].decode(&cb, &y[0]) != Ok((m1, rec.s1)),
                    error2: decoders[1].decode(&cb, &y[1]) != Ok((m2, rec.s2)),
                    covering_fallback: rec.covering_fallback,
                    selection_fallback: rec.selection_fallback,
                })
            });
            results.into_iter().collect::<Result<Vec<_>>>()?
        }
        EstimationMode::Ensemble => ensemble_trials(scheme, ch, params, trials, &channel, &decoders)?,
    };
    Ok((mode, outcomes))
}

fn ensemble_trials(
    scheme: &AuxScheme,
    ch: &BroadcastChannel,
    params: &CodeParams,
    trials: usize,
    channel: &SequenceLaw,
    decoders: &[Decoder; 2],
) -> Result<Vec<TrialOutcome>> {
    let n = params.n;
    let eps = params.epsilons;
    let c = params.counts();
    let k = c.k;
    if k * n as f64 > CODEBOOK_CAP {
        return Err(Error::CapExceeded { what: "covering bank letters".into(), size: k * n as f64, cap: CODEBOOK_CAP });
    }
    let k = k as usize;
    let cover = TypicalityTest::new(&scheme.p_v1v2(), eps.cover, n);
    let selector = InputSelector::new(scheme, n, eps.select)?;
    let marginals = [scheme.p_v1(), scheme.p_v2()];
    let samplers = [letter_sampler(&marginals[0]), letter_sampler(&marginals[1])];
    let impostors = [
        ImpostorModel::new(&marginals[0], &receiver_law(scheme, ch, 1)?, eps.decode, n),
        ImpostorModel::new(&marginals[1], &receiver_law(scheme, ch, 2)?, eps.decode, n),
    ];
    let others = [(c.m1 * c.j1 - 1.0) * k as f64, (c.m2 * c.j2 - 1.0) * k as f64];
    let results = par::map_range(trials, |i| -> Result<TrialOutcome> {
        let mut rng = rng::derive(params.seed, tag::TRIAL, i as u64);
        let mut banks = [Vec::with_capacity(k * n), Vec::with_capacity(k * n)];
        for (bank, sampler) in banks.iter_mut().zip(&samplers) {
            for _ in 0..k {
                draw_word(sampler, n, &mut rng, bank);
            }
        }
        let cov = select_covering(&banks[0], &banks[1], n, &cover);
        let v1 = &banks[0][cov.k1 * n..(cov.k1 + 1) * n];
        let v2 = &banks[1][cov.k2 * n..(cov.k2 + 1) * n];
        let (x, selection_fallback) = selector.select(v1, v2, &mut rng)?;
        let y = channel.sample(&[&x], &mut rng)?;
        let mut errors = [false; 2];
        for t in 0..2 {
            let own = banks[t].chunks(n).any(|v| decoders[t].test().accepts(&[v, &y[t]]));
            let p_impostor = impostors[t].any_of(&y[t], others[t]);
            let impostor = rng.random::<f64>() < p_impostor;
            errors[t] = !own || impostor;
        }
        Ok(TrialOutcome {
            error1: errors[0],
            error2: errors[1],
            covering_fallback: cov.fallback,
            selection_fallback,
        })
    });
    results.into_iter().collect()
}

/// Monte Carlo error rates with 95% half-widths.
pub fn estimate_error(
    scheme: &AuxScheme,
    ch: &BroadcastChannel,
    params: &CodeParams,
    trials: usize,
    mode: EstimationMode,
) -> Result<ErrorEstimate> {
    let (mode, outcomes) = simulate_trials(scheme, ch, params, trials, mode)?;
    Ok(summarize(params.n, mode, &outcomes))
}

/// Fraction of covering fallbacks over `trials` fresh pairs of `K`-banks.
pub fn covering_fallback_rate(scheme: &AuxScheme, n: usize, rco: f64, epsilon: f64, trials: usize, seed: u64) -> Result<f64> {
    let k = index_count(n, rco);
    let size = 2.0 * k * n as f64;
    if size > CODEBOOK_CAP {
        return Err(Error::CapExceeded { what: "covering bank letters".into(), size, cap: CODEBOOK_CAP });
    }
    let k = k as usize;
    let cover = TypicalityTest::new(&scheme.p_v1v2(), epsilon, n);
    let samplers = [letter_sampler(&scheme.p_v1()), letter_sampler(&scheme.p_v2())];
    let hits = par::map_range(trials, |i| {
        let mut rng = rng::derive(seed, tag::TRIAL, i as u64);
        let mut banks = [Vec::with_capacity(k * n), Vec::with_capacity(k * n)];
        for (bank, sampler) in banks.iter_mut().zip(&samplers) {
            for _ in 0..k {
                draw_word(sampler, n, &mut rng, bank);
            }
        }
        select_covering(&banks[0], &banks[1], n, &cover).fallback
    });
    Ok(hits.iter().filter(|&&f| f).count() as f64 / trials as f64)
}

/// Covering fallback frequency for the codebook ensemble, bracketed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FallbackBracket {
    pub n: usize,
    pub rco: f64,
    pub k: f64,
    pub trials: usize,
    /// Fraction of trials certainly in fallback.
    pub lower: f64,
    /// Fraction of trials not certainly out of fallback.
    pub upper: f64,
    /// `K^2` times the probability that an independent pair is typical.
    pub expected_typical_pairs: f64,
}

/// All compositions of `n` into `parts` nonnegative counts.
fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|c| {
            compositions(n - c, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, c);
                rest
            })
        })
        .collect()
}

/// Exact-in-distribution covering trials without materializing the banks.
///
/// Given the `K` words of the second bank, the first bank misses every
/// typical pair with probability `(1 - p_hit)^K`, where `p_hit` is the
/// `P^n_{V1}` mass of the union of the sets typical with each second-bank
/// word. The typical mass `q` of one word depends only on its type, so a
/// bank is summarized by its type-class counts, which are sampled exactly.
/// `max q <= p_hit <= sum q` brackets the conditional fallback probability,
/// and a shared uniform resolves each trial against both ends.
pub fn covering_fallback_bracket(
    scheme: &AuxScheme,
    n: usize,
    rco: f64,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<FallbackBracket> {
    use rand_distr::Binomial;
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let p_v2 = scheme.p_v2();
    let nv2 = p_v2.alphabet().size();
    let classes_len = (n as f64 + 1.0).powi(nv2 as i32 - 1);
    if classes_len > 1e6 {
        return Err(Error::CapExceeded { what: "type classes".into(), size: classes_len, cap: 1e6 });
    }
    let model = ImpostorModel::new(&scheme.p_v1(), &scheme.p_v1v2(), epsilon, n);
    let lf = ln_factorials(n);
    let mut classes: Vec<(f64, f64)> = compositions(n, nv2)
        .into_iter()
        .filter_map(|c| {
            let mut ln_p = lf[n];
            for (a, &ca) in c.iter().enumerate() {
                ln_p -= lf[ca];
                if ca > 0 {
                    let pa = p_v2.p(a);
                    if pa == 0.0 {
                        return None;
                    }
                    ln_p += ca as f64 * pa.ln();
                }
            }
            let word: Vec<u8> = c.iter().enumerate().flat_map(|(a, &ca)| std::iter::repeat_n(a as u8, ca)).collect();
            Some((ln_p.exp(), model.ln_typical_prob(&word).exp()))
        })
        .collect();
    // Decreasing typical mass, so the first present class carries the maximum.
    classes.sort_by(|a, b| b.1.total_cmp(&a.1));
    let k = index_count(n, rco);
    let mean_q: f64 = classes.iter().map(|(p, q)| p * q).sum();
    let exact_counts = k <= 2f64.powi(53);
    let outcomes = par::map_range(trials, |i| -> (bool, bool) {
        let mut rng = rng::derive(seed, tag::TRIAL, i as u64);
        let u: f64 = rng.random();
        let (sum_q, max_q) = if exact_counts {
            let mut left = k as u64;
            let mut mass = 1.0f64;
            let (mut sum_q, mut max_q) = (0.0, 0.0f64);
            for &(p, q) in &classes {
                if left == 0 {
                    break;
                }
                let frac = if mass > 0.0 { (p / mass).min(1.0) } else { 1.0 };
                let count = Binomial::new(left, frac).map(|b| b.sample(&mut rng)).unwrap_or(left);
                if count > 0 {
                    sum_q += count as f64 * q;
                    max_q = max_q.max(q);
                }
                left -= count;
                mass -= p;
            }
            (sum_q, max_q)
        } else {
            // Index of the first present class, by inversion of its survival function.
            let v: f64 = rng.random();
            let mut covered = 0.0;
            let mut max_q = 0.0;
            for &(p, q) in &classes {
                covered += p;
                let none_yet = (k * (-covered.min(1.0)).ln_1p()).exp();
                if v >= none_yet {
                    max_q = q;
                    break;
                }
            }
            (f64::INFINITY, max_q)
        };
        let lower = if sum_q >= 1.0 { 0.0 } else { (k * (-sum_q).ln_1p()).exp() };
        let upper = if max_q >= 1.0 { 0.0 } else { (k * (-max_q).ln_1p()).exp() };
        (u < lower, u < upper)
    });
    let t = trials as f64;
    Ok(FallbackBracket {
        n,
        rco,
        k,
        trials,
        lower: outcomes.iter().filter(|o| o.0).count() as f64 / t,
        upper: outcomes.iter().filter(|o| o.1).count() as f64 / t,
        expected_typical_pairs: k * k * mean_q,
    })
}
