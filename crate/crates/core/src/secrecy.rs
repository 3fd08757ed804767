//! Effective secrecy, leakage and stealth at receiver 2, exact or by Monte
//! Carlo, plus the diagnostics that track the bounding steps of the
//! secrecy argument.
//!
//! Receiver 2 observes the codewords through the per-letter law
//! `P(y2 | v1, v2) = sum_x P(x | v1, v2) P(y2 | x)`. The reference law is
//! `Q^n(y2 | v2)`; when selected `v2` codewords differ across `(m1, s1)`
//! the reference is their uniform mixture, which reduces to `Q^n(. | v2)`
//! when the covering index is trivial.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{induced_joint, names, stealth_reference, stealth_reference_with, AuxScheme, BroadcastChannel};
use crate::codec::{generate_codebook, select_covering, CodeParams, Codebook, Epsilons};
use crate::par;
use crate::prob::{entropy_of, kl_of, min_positive_mass, mutual_information, CondPmf, Divergence, JointPmf, Pmf};
use crate::region::RatePoint;
use crate::rng::{self, tag};
use crate::typicality::{log2_product, sequence_at, TypicalityTest};
use crate::{Error, Result};

/// Default cap on enumerated terms.
pub const ENUMERATION_CAP: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecrecyReport {
    pub mode: Mode,
    pub n: usize,
    pub rates: RatePoint,
    pub m2: usize,
    pub s2: usize,
    pub m1_count: usize,
    pub j1_count: usize,
    pub effective_secrecy: Divergence,
    pub leakage: f64,
    pub stealth: Divergence,
    /// `|effective - leakage - stealth|`, exact mode with finite values.
    pub residual_decomposition: Option<f64>,
    /// `|D(P_{W1,Y2} || P_W1 R) - E_W1 D(P_{Y2|W1} || R)|`, exact mode.
    pub residual_chain_rule: Option<f64>,
    /// `log2(1 / min R)` over the support of the reference.
    pub lemma1_bound: f64,
    /// `n log2(1 / pi_Q)` with `pi_Q` the smallest positive `Q(y2 | v2)`.
    pub lemma1_letter_bound: f64,
    /// Standard errors of the Monte Carlo estimates.
    pub std_error: Option<(f64, f64)>,
    pub samples: Option<usize>,
}

/// Per-letter laws seen by receiver 2.
#[derive(Debug, Clone)]
pub struct Receiver2View {
    /// `P(y2 | v1, v2)`.
    pub w: CondPmf,
    /// `Q(y2 | v2)`.
    pub q: CondPmf,
    pub p_v1: Pmf,
    n2: usize,
    ny: usize,
}

impl Receiver2View {
    pub fn new(scheme: &AuxScheme, ch: &BroadcastChannel) -> Result<Self> {
        let w = scheme.to_y2(ch)?;
        let p_v1 = scheme.p_v1();
        let q = stealth_reference_with(&p_v1, &w)?;
        Ok(Self { n2: scheme.v2().size(), ny: w.out_size(), w, q, p_v1 })
    }

    pub fn output_size(&self) -> usize {
        self.ny
    }

    /// `W^n(. | v1, v2)` over all output sequences in lexicographic order.
    pub fn w_vector(&self, v1: &[u8], v2: &[u8]) -> Vec<f64> {
        kron(v1.len(), self.ny, |i| self.w.row(usize::from(v1[i]) * self.n2 + usize::from(v2[i])))
    }

    /// `Q^n(. | v2)` over all output sequences in lexicographic order.
    pub fn q_vector(&self, v2: &[u8]) -> Vec<f64> {
        kron(v2.len(), self.ny, |i| self.q.row(usize::from(v2[i])))
    }

    pub fn log2_w(&self, v1: &[u8], v2: &[u8], y: &[u8]) -> f64 {
        let g: Vec<u8> = v1.iter().zip(v2).map(|(&a, &b)| (usize::from(a) * self.n2 + usize::from(b)) as u8).collect();
        log2_product(&self.w, &g, y)
    }

    pub fn log2_q(&self, v2: &[u8], y: &[u8]) -> f64 {
        log2_product(&self.q, v2, y)
    }
}

fn kron<'a, F: Fn(usize) -> &'a [f64]>(n: usize, ny: usize, row: F) -> Vec<f64> {
    let mut out = vec![1.0];
    for i in 0..n {
        let r = row(i);
        let mut next = Vec::with_capacity(out.len() * ny);
        for &a in &out {
            next.extend(r.iter().map(|&b| a * b));
        }
        out = next;
    }
    out
}

fn output_space(ny: usize, n: usize) -> f64 {
    (ny as f64).powi(n as i32)
}

struct Selected<'a> {
    /// `(v1, v2)` for every `(m1, s1)`, row-major.
    pairs: Vec<(&'a [u8], &'a [u8])>,
    m1: usize,
    j1: usize,
}

fn selected<'a>(cb: &'a Codebook, scheme: &AuxScheme, m2: usize, s2: usize) -> Result<Selected<'a>> {
    let (d1, d2) = (cb.dims(1), cb.dims(2));
    if m2 >= d2.m || s2 >= d2.j {
        return Err(Error::InvalidParameter(format!("(m2, s2) = ({m2}, {s2}) out of range")));
    }
    let n = cb.n();
    let cover = TypicalityTest::new(&scheme.p_v1v2(), cb.params().epsilons.cover, n);
    let bank2 = cb.bank(2, m2, s2);
    let mut pairs = Vec::with_capacity(d1.m * d1.j);
    for m1 in 0..d1.m {
        for s1 in 0..d1.j {
            let c = select_covering(cb.bank(1, m1, s1), bank2, n, &cover);
            pairs.push((cb.word(1, m1, s1, c.k1), cb.word(2, m2, s2, c.k2)));
        }
    }
    Ok(Selected { pairs, m1: d1.m, j1: d1.j })
}

fn reference_vector(view: &Receiver2View, sel: &Selected) -> Vec<f64> {
    let mut cache: HashMap<&[u8], usize> = HashMap::new();
    let mut distinct: Vec<&[u8]> = Vec::new();
    let mut weight: Vec<usize> = Vec::new();
    for &(_, v2) in &sel.pairs {
        let i = *cache.entry(v2).or_insert_with(|| {
            distinct.push(v2);
            weight.push(0);
            distinct.len() - 1
        });
        weight[i] += 1;
    }
    let total = sel.pairs.len() as f64;
    let mut r: Vec<f64> = Vec::new();
    for (v2, w) in distinct.iter().zip(&weight) {
        let q = view.q_vector(v2);
        if r.is_empty() {
            r = vec![0.0; q.len()];
        }
        let f = *w as f64 / total;
        r.iter_mut().zip(&q).for_each(|(a, b)| *a += f * b);
    }
    r
}

fn letter_bound(view: &Receiver2View, n: usize) -> f64 {
    let all: Vec<f64> = view.q.rows().flatten().copied().collect();
    (n as f64) * (1.0 / min_positive_mass(&all).expect("stochastic rows")).log2()
}

/// Conditional output laws `P(y2 | m1)` for the fixed `(m2, s2)`.
fn message_laws(view: &Receiver2View, sel: &Selected) -> Vec<Vec<f64>> {
    par::map_range(sel.m1, |m1| {
        let mut acc: Vec<f64> = Vec::new();
        for s1 in 0..sel.j1 {
            let (v1, v2) = sel.pairs[m1 * sel.j1 + s1];
            let w = view.w_vector(v1, v2);
            if acc.is_empty() {
                acc = vec![0.0; w.len()];
            }
            acc.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
        }
        let j = sel.j1 as f64;
        acc.iter_mut().for_each(|a| *a /= j);
        acc
    })
}

/// Exact effective secrecy, leakage and stealth for the fixed `(m2, s2)`,
/// enumerating all output sequences of receiver 2.
pub fn effective_secrecy_exact(
    cb: &Codebook,
    scheme: &AuxScheme,
    ch: &BroadcastChannel,
    m2: usize,
    s2: usize,
) -> Result<SecrecyReport> {
    effective_secrecy_exact_capped(cb, scheme, ch, m2, s2, ENUMERATION_CAP)
}

pub fn effective_secrecy_exact_capped(
    cb: &Codebook,
    scheme: &AuxScheme,
    ch: &BroadcastChannel,
    m2: usize,
    s2: usize,
    cap: f64,
) -> Result<SecrecyReport> {
    let view = Receiver2View::new(scheme, ch)?;
    let n = cb.n();
    let d1 = cb.dims(1);
    let size = output_space(view.ny, n) * (d1.m * d1.j) as f64;
    if size > cap {
        return Err(Error::CapExceeded {
            what: "exact secrecy enumeration (use Monte Carlo mode)".into(),
            size,
            cap,
        });
    }
    let sel = selected(cb, scheme, m2, s2)?;
    let reference = reference_vector(&view, &sel);
    let laws = message_laws(&view, &sel);
    let m = sel.m1 as f64;

    let mut p_y = vec![0.0; reference.len()];
    for law in &laws {
        p_y.iter_mut().zip(law).for_each(|(a, b)| *a += b / m);
    }
    let chain: Vec<Divergence> = laws.iter().map(|l| kl_of(l, &reference)).collect();
    let effective = if chain.iter().all(|d| d.is_finite()) {
        Divergence::Finite(chain.iter().map(|d| d.to_f64()).sum::<f64>() / m)
    } else {
        Divergence::Infinite
    };
    let joint: Vec<f64> = laws.iter().flat_map(|l| l.iter().map(move |p| p / m)).collect();
    let product: Vec<f64> = (0..sel.m1).flat_map(|_| reference.iter().map(|r| r / m)).collect();
    let joint_form = kl_of(&joint, &product);
    let leakage = (entropy_of(&p_y) - laws.iter().map(|l| entropy_of(l)).sum::<f64>() / m).max(0.0);
    let stealth = kl_of(&p_y, &reference);

    let residual_chain_rule = match (joint_form, effective) {
        (Divergence::Finite(a), Divergence::Finite(b)) => Some((a - b).abs()),
        (Divergence::Infinite, Divergence::Infinite) => Some(0.0),
        _ => None,
    };
    let residual_decomposition = match (joint_form, stealth) {
        (Divergence::Finite(a), Divergence::Finite(s)) => Some((a - leakage - s).abs()),
        _ => None,
    };
    let lemma1_bound = (1.0 / min_positive_mass(&reference).expect("reference has mass")).log2();
    Ok(SecrecyReport {
        mode: Mode::Exact,
        n,
        rates: cb.params().rates,
        m2,
        s2,
        m1_count: sel.m1,
        j1_count: sel.j1,
        effective_secrecy: effective,
        leakage,
        stealth,
        residual_decomposition,
        residual_chain_rule,
        lemma1_bound,
        lemma1_letter_bound: letter_bound(&view, n),
        std_error: None,
        samples: None,
    })
}

/// Plug-in Monte Carlo estimate with exact `P(y2 | m1)`, `P(y2)` and
/// reference evaluated per sample. Leakage and effective secrecy are
/// estimated; stealth is their difference.
pub fn effective_secrecy_mc<R: Rng + ?Sized>(
    cb: &Codebook,
    scheme: &AuxScheme,
    ch: &BroadcastChannel,
    m2: usize,
    s2: usize,
    samples: usize,
    rng: &mut R,
) -> Result<SecrecyReport> {
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least two samples".into()));
    }
    let view = Receiver2View::new(scheme, ch)?;
    let n = cb.n();
    let sel = selected(cb, scheme, m2, s2)?;
    let v2s: Vec<&[u8]> = {
        let mut seen: Vec<&[u8]> = sel.pairs.iter().map(|p| p.1).collect();
        seen.sort();
        seen.dedup();
        seen
    };
    let weights: Vec<f64> = v2s
        .iter()
        .map(|v| sel.pairs.iter().filter(|p| p.1 == *v).count() as f64 / sel.pairs.len() as f64)
        .collect();
    let law = crate::channel::SequenceLaw::new(view.w.clone(), n)?;
    let log_mix = |terms: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = terms.collect();
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == f64::NEG_INFINITY {
            return hi;
        }
        hi + v.iter().map(|x| (x - hi).exp2()).sum::<f64>().log2()
    };
    let (mut eff, mut eff2, mut leak, mut leak2) = (0.0, 0.0, 0.0, 0.0);
    let mut infinite = false;
    for _ in 0..samples {
        let m1 = rng.random_range(0..sel.m1);
        let s1 = rng.random_range(0..sel.j1);
        let (v1, v2) = sel.pairs[m1 * sel.j1 + s1];
        let y = law.sample(&[v1, v2], rng)?.remove(0);
        let per_s = |m: usize| -> Vec<f64> {
            (0..sel.j1)
                .map(|s| {
                    let (a, b) = sel.pairs[m * sel.j1 + s];
                    view.log2_w(a, b, &y) - (sel.j1 as f64).log2()
                })
                .collect()
        };
        let lp_m = log_mix(&mut per_s(m1).into_iter());
        let lp_y = log_mix(&mut (0..sel.m1).flat_map(per_s).map(|x| x - (sel.m1 as f64).log2()));
        let lr = log_mix(&mut v2s.iter().zip(&weights).map(|(v, w)| view.log2_q(v, &y) + w.log2()));
        if lr == f64::NEG_INFINITY {
            infinite = true;
            continue;
        }
        let (e, l) = (lp_m - lr, lp_m - lp_y);
        eff += e;
        eff2 += e * e;
        leak += l;
        leak2 += l * l;
    }
    let t = samples as f64;
    let (me, ml) = (eff / t, leak / t);
    let se = |s2: f64, m: f64| ((s2 / t - m * m).max(0.0) / (t - 1.0)).sqrt();
    Ok(SecrecyReport {
        mode: Mode::MonteCarlo,
        n,
        rates: cb.params().rates,
        m2,
        s2,
        m1_count: sel.m1,
        j1_count: sel.j1,
        effective_secrecy: if infinite { Divergence::Infinite } else { Divergence::Finite(me) },
        leakage: ml,
        stealth: if infinite { Divergence::Infinite } else { Divergence::Finite(me - ml) },
        residual_decomposition: None,
        residual_chain_rule: None,
        lemma1_bound: letter_bound(&view, n),
        lemma1_letter_bound: letter_bound(&view, n),
        std_error: Some((se(eff2, me), se(leak2, ml))),
        samples: Some(samples),
    })
}

/// `I(W1; Y2^n | W2)` of a codebook, exact.
pub fn definition1_leakage(cb: &Codebook, scheme: &AuxScheme, ch: &BroadcastChannel) -> Result<f64> {
    let view = Receiver2View::new(scheme, ch)?;
    let (d1, d2) = (cb.dims(1), cb.dims(2));
    let size = output_space(view.ny, cb.n()) * (d1.m * d1.j * d2.m * d2.j) as f64;
    if size > ENUMERATION_CAP {
        return Err(Error::CapExceeded { what: "exact leakage enumeration".into(), size, cap: ENUMERATION_CAP });
    }
    let per_m2 = (0..d2.m)
        .map(|m2| -> Result<f64> {
            let mut laws: Vec<Vec<f64>> = vec![Vec::new(); d1.m];
            for s2 in 0..d2.j {
                let sel = selected(cb, scheme, m2, s2)?;
                for (m1, l) in message_laws(&view, &sel).into_iter().enumerate() {
                    if laws[m1].is_empty() {
                        laws[m1] = vec![0.0; l.len()];
                    }
                    laws[m1].iter_mut().zip(&l).for_each(|(a, b)| *a += b / d2.j as f64);
                }
            }
            let m = d1.m as f64;
            let mut p_y = vec![0.0; laws[0].len()];
            for l in &laws {
                p_y.iter_mut().zip(l).for_each(|(a, b)| *a += b / m);
            }
            Ok((entropy_of(&p_y) - laws.iter().map(|l| entropy_of(l)).sum::<f64>() / m).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_m2.iter().sum::<f64>() / d2.m as f64)
}

/// Exact expectation over random `V1` codebooks of `J1` i.i.d. words of
/// `D(P_{Y2|m1} || Q^n(. | v2))`, with `v2` fixed and a trivial covering
/// index.
pub fn expected_divergence_exact(view: &Receiver2View, v2: &[u8], j1: usize) -> Result<f64> {
    let n = v2.len();
    let nv = view.p_v1.alphabet().size();
    let words = (nv as f64).powi(n as i32);
    let books = words.powi(j1 as i32);
    if books * output_space(view.ny, n) > ENUMERATION_CAP {
        return Err(Error::CapExceeded { what: "codebook ensemble enumeration".into(), size: books, cap: ENUMERATION_CAP });
    }
    let words = words as usize;
    let seqs: Vec<Vec<u8>> = (0..words).map(|i| sequence_at(i as u64, nv, n)).collect();
    let probs: Vec<f64> = seqs.iter().map(|s| s.iter().map(|&a| view.p_v1.p(usize::from(a))).product()).collect();
    let w: Vec<Vec<f64>> = seqs.iter().map(|s| view.w_vector(s, v2)).collect();
    let q = view.q_vector(v2);
    let terms = par::map_range(books as usize, |b| {
        let mut idx = b;
        let mut weight = 1.0;
        let mut mix = vec![0.0; q.len()];
        for _ in 0..j1 {
            let i = idx % words;
            idx /= words;
            weight *= probs[i];
            mix.iter_mut().zip(&w[i]).for_each(|(a, x)| *a += x / j1 as f64);
        }
        if weight == 0.0 {
            0.0
        } else {
            weight * kl_of(&mix, &q).to_f64()
        }
    });
    Ok(terms.iter().sum())
}

/// `E_{v1 ~ P^n} sum_y W^n(y | v1, v2) log2(W^n / (J1 Q^n) + 1)`.
pub fn jensen_surrogate(view: &Receiver2View, v2: &[u8], j1: f64) -> Result<f64> {
    let n = v2.len();
    let nv = view.p_v1.alphabet().size();
    let size = (nv as f64).powi(n as i32) * output_space(view.ny, n);
    if size > ENUMERATION_CAP {
        return Err(Error::CapExceeded { what: "surrogate enumeration".into(), size, cap: ENUMERATION_CAP });
    }
    let q = view.q_vector(v2);
    let terms = par::map_range(nv.pow(n as u32), |i| {
        let v1 = sequence_at(i as u64, nv, n);
        let p: f64 = v1.iter().map(|&a| view.p_v1.p(usize::from(a))).product();
        if p == 0.0 {
            return 0.0;
        }
        let w = view.w_vector(&v1, v2);
        p * w
            .iter()
            .zip(&q)
            .filter(|(wy, _)| **wy > 0.0)
            .map(|(wy, qy)| wy * (wy / (j1 * qy) + 1.0).log2())
            .sum::<f64>()
    });
    Ok(terms.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ESplit {
    pub n: usize,
    pub j1: f64,
    /// Contribution of triples outside the typical set.
    pub e1: f64,
    /// Contribution of typical triples.
    pub e2: f64,
    /// `P^n` mass of `v1` jointly typical with `v2`.
    pub typical_v1_mass: f64,
}

/// Splits the surrogate, restricted to `v1` jointly ε-typical with `v2`,
/// by ε-typicality of `(v1, v2, y2)` under `P_{V1 V2 Y2}`.
pub fn e_split(scheme: &AuxScheme, ch: &BroadcastChannel, v2: &[u8], j1: f64, epsilon: f64) -> Result<ESplit> {
    let view = Receiver2View::new(scheme, ch)?;
    let joint = induced_joint(ch, scheme)?.marginal_by_names(&[names::V1, names::V2, names::Y2])?;
    let n = v2.len();
    let nv = view.p_v1.alphabet().size();
    let size = (nv as f64).powi(n as i32) * output_space(view.ny, n);
    if size > ENUMERATION_CAP {
        return Err(Error::CapExceeded { what: "e-split enumeration".into(), size, cap: ENUMERATION_CAP });
    }
    let pair = TypicalityTest::new(&joint.marginal(&[0, 1])?, epsilon, n);
    let triple = TypicalityTest::new(&joint, epsilon, n);
    let q = view.q_vector(v2);
    let parts = par::map_range(nv.pow(n as u32), |i| {
        let v1 = sequence_at(i as u64, nv, n);
        let p: f64 = v1.iter().map(|&a| view.p_v1.p(usize::from(a))).product();
        if p == 0.0 || !pair.accepts(&[&v1, v2]) {
            return (0.0, 0.0, 0.0);
        }
        let w = view.w_vector(&v1, v2);
        let (mut e1, mut e2) = (0.0, 0.0);
        for (yi, (&wy, &qy)) in w.iter().zip(&q).enumerate() {
            if wy == 0.0 {
                continue;
            }
            let term = p * wy * (wy / (j1 * qy) + 1.0).log2();
            let y = sequence_at(yi as u64, view.ny, n);
            if triple.accepts(&[&v1, v2, &y]) {
                e2 += term;
            } else {
                e1 += term;
            }
        }
        (e1, e2, p)
    });
    let (e1, e2, mass) = parts.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(ESplit { n, j1, e1, e2, typical_v1_mass: mass })
}

/// `I(Y2; V1 | V2)` of the scheme on the channel.
pub fn secrecy_threshold(scheme: &AuxScheme, ch: &BroadcastChannel) -> Result<f64> {
    let j: JointPmf = induced_joint(ch, scheme)?;
    let [v1, v2, y2] = [names::V1, names::V2, names::Y2].map(|a| j.axis_index(a));
    mutual_information(&j, &[y2?], &[v1?], &[v2?])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub r1p: f64,
    pub j1: usize,
    pub threshold: f64,
    pub mean_effective_secrecy: f64,
    pub std: f64,
    pub draws: usize,
    pub infinite_draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n: usize,
    /// Message rate `R1`; the other user's rates are zero.
    pub r1: f64,
    pub rco: f64,
    pub epsilons: Epsilons,
    pub draws: usize,
    pub seed: u64,
}

/// Mean and standard deviation over independent codebook draws of the exact
/// effective secrecy at `(m2, s2) = (0, 0)`, per randomization rate.
pub fn leakage_vs_rate_sweep(scheme: &AuxScheme, ch: &BroadcastChannel, grid: &[f64], cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    if cfg.draws == 0 {
        return Err(Error::InvalidParameter("sweep needs at least one codebook draw".into()));
    }
    let threshold = secrecy_threshold(scheme, ch)?;
    grid.iter()
        .enumerate()
        .map(|(gi, &r1p)| {
            let rates = RatePoint::new(cfg.r1, 0.0, r1p, 0.0, cfg.rco)?;
            let values = par::map_range(cfg.draws, |d| -> Result<Divergence> {
                let seed = rng::derive(cfg.seed, tag::SWEEP, ((gi as u64) << 32) | d as u64).random();
                let params = CodeParams::new(cfg.n, rates, cfg.epsilons, seed)?;
                let cb = generate_codebook(scheme, &params)?;
                Ok(effective_secrecy_exact(&cb, scheme, ch, 0, 0)?.effective_secrecy)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let finite: Vec<f64> = values.iter().filter_map(|d| d.finite()).collect();
            let k = finite.len() as f64;
            let mean = if finite.len() < values.len() { f64::INFINITY } else { finite.iter().sum::<f64>() / k };
            let var = if finite.len() > 1 {
                let mu = finite.iter().sum::<f64>() / k;
                finite.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            Ok(SweepRow {
                r1p,
                j1: crate::codec::index_count(cfg.n, r1p) as usize,
                threshold,
                mean_effective_secrecy: mean,
                std: var.sqrt(),
                draws: cfg.draws,
                infinite_draws: values.len() - finite.len(),
            })
        })
        .collect()
}

/// Single-letter stealth `D(P_{V2,Y2} || P_V2 Q)` together with `I(V1;V2)`,
/// which bounds it. `joint` needs axes named `V1`, `V2`, `Y2`.
pub fn single_letter_stealth(joint: &JointPmf) -> Result<(Divergence, f64)> {
    let i1 = joint.axis_index(names::V1)?;
    let i2 = joint.axis_index(names::V2)?;
    let iy = joint.axis_index(names::Y2)?;
    let q = stealth_reference(joint)?;
    let v2y2 = joint.marginal(&[i2, iy])?;
    let (n2, ny) = (v2y2.axis(0).size(), v2y2.axis(1).size());
    let mut p = Vec::with_capacity(n2 * ny);
    let mut r = Vec::with_capacity(n2 * ny);
    for b in 0..n2 {
        let pb: f64 = (0..ny).map(|y| v2y2.p(&[b, y])).sum();
        for y in 0..ny {
            p.push(v2y2.p(&[b, y]));
            r.push(pb * q.p(b, y));
        }
    }
    Ok((kl_of(&p, &r), mutual_information(joint, &[i1], &[i2], &[])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::prob::{Alphabet, ProbTable};
    use crate::typicality::{representative_sequence, Sequences};

    #[test]
    fn single_letter_stealth_matches_direct_sum() {
        let mut rng = rng::stream(17);
        for _ in 0..50 {
            let j = presets::random_v1v2y2(&mut rng);
            let c = |a: usize, b: usize, y: usize| j.mass()[4 * a + 2 * b + y];
            let p1 = |a: usize| (0..4).map(|i| j.mass()[4 * a + i]).sum::<f64>();
            let pab = |a: usize, b: usize| c(a, b, 0) + c(a, b, 1);
            let mut d = 0.0;
            for b in 0..2 {
                for y in 0..2 {
                    let p = c(0, b, y) + c(1, b, y);
                    let pb = pab(0, b) + pab(1, b);
                    let q: f64 = (0..2).map(|a| p1(a) * c(a, b, y) / pab(a, b)).sum();
                    d += p * (p / (pb * q)).log2();
                }
            }
            let (got, bound) = single_letter_stealth(&j).unwrap();
            assert!((got.to_f64() - d).abs() < 1e-12);
            assert!(d <= bound + 1e-12);
        }
    }

    fn code(scheme: &AuxScheme, n: usize, rates: RatePoint, seed: u64) -> Codebook {
        generate_codebook(scheme, &CodeParams::new(n, rates, Epsilons::default(), seed).unwrap()).unwrap()
    }

    fn rates(r1: f64, r1p: f64, rco: f64) -> RatePoint {
        RatePoint::new(r1, 0.0, r1p, 0.0, rco).unwrap()
    }

    #[test]
    fn blind_receiver_sees_nothing() {
        // Y2 depends on b2 only, V2 is constant: receiver 2 learns nothing.
        let s = presets::silent_v2_scheme();
        let ch = presets::orthogonal_clean_channel();
        let cb = code(&s, 4, rates(0.5, 0.5, 0.0), 1);
        let r = effective_secrecy_exact(&cb, &s, &ch, 0, 0).unwrap();
        assert!(r.leakage.abs() < 1e-12);
        assert!(r.stealth.to_f64().abs() < 1e-12);
        assert!(r.effective_secrecy.to_f64().abs() < 1e-12);
    }

    #[test]
    fn single_message_has_no_leakage() {
        let s = presets::silent_v2_scheme();
        let ch = presets::xor_leak_channel();
        let cb = code(&s, 4, rates(0.0, 0.5, 0.0), 2);
        let r = effective_secrecy_exact(&cb, &s, &ch, 0, 0).unwrap();
        assert_eq!(r.m1_count, 1);
        assert_eq!(r.leakage, 0.0);
        assert!((r.effective_secrecy.to_f64() - r.stealth.to_f64()).abs() < 1e-12);
        assert!(r.residual_chain_rule.unwrap() < 1e-12);
    }

    /// Independent route: enumerate the joint law of (W1, Y2^n) cell by cell.
    fn brute_force(cb: &Codebook, s: &AuxScheme, ch: &BroadcastChannel) -> (f64, f64, f64) {
        let w = s.to_y2(ch).unwrap();
        let q = stealth_reference_with(&s.p_v1(), &w).unwrap();
        let (d1, n) = (cb.dims(1), cb.n());
        let ny = w.out_size();
        let n2 = s.v2().size();
        let cover = TypicalityTest::new(&s.p_v1v2(), cb.params().epsilons.cover, n);
        let ys: Vec<Vec<u8>> = Sequences::new(ny, n).collect();
        let mut p = vec![vec![0.0; ys.len()]; d1.m];
        let mut r = vec![0.0; ys.len()];
        for (m, pm) in p.iter_mut().enumerate() {
            for sidx in 0..d1.j {
                let c = select_covering(cb.bank(1, m, sidx), cb.bank(2, 0, 0), n, &cover);
                let v1 = cb.word(1, m, sidx, c.k1);
                let v2 = cb.word(2, 0, 0, c.k2);
                for (yi, y) in ys.iter().enumerate() {
                    let mut pw = 1.0;
                    let mut pq = 1.0;
                    for i in 0..n {
                        pw *= w.p(usize::from(v1[i]) * n2 + usize::from(v2[i]), usize::from(y[i]));
                        pq *= q.p(usize::from(v2[i]), usize::from(y[i]));
                    }
                    pm[yi] += pw / (d1.m * d1.j) as f64;
                    r[yi] += pq / (d1.m * d1.j) as f64;
                }
            }
        }
        let m = d1.m as f64;
        let py: Vec<f64> = (0..ys.len()).map(|yi| p.iter().map(|row| row[yi]).sum()).collect();
        let mut eff = 0.0;
        let mut leak = 0.0;
        for row in &p {
            for (yi, &pm) in row.iter().enumerate() {
                if pm > 0.0 {
                    eff += pm * (pm / (r[yi] / m)).log2();
                    leak += pm * (pm / (py[yi] / m)).log2();
                }
            }
        }
        let stealth: f64 = py.iter().zip(&r).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).log2()).sum();
        (eff, leak, stealth)
    }

    #[test]
    fn matches_brute_force_on_random_instance() {
        let mut g = rng::stream(77);
        for trial in 0..5 {
            let v = presets::random_joint(&[(names::V1, 2), (names::V2, 2)], &mut g);
            let bits = |n: &str| Alphabet::indexed(n, 2).unwrap();
            let xm = CondPmf::from_weights(vec![bits(names::V1), bits(names::V2)], vec![bits(names::X)], &presets::dirichlet(8, &mut g)).unwrap();
            let s = AuxScheme::without_u(v, xm).unwrap();
            let ch = BroadcastChannel::from_rows(bits(names::X), bits(names::Y1), bits(names::Y2), &presets::dirichlet(4, &mut g).iter().chain(&presets::dirichlet(4, &mut g)).copied().collect::<Vec<_>>()).unwrap();
            let cb = code(&s, 3, rates(1.0 / 3.0, 1.0 / 3.0, 0.0), trial);
            let r = effective_secrecy_exact(&cb, &s, &ch, 0, 0).unwrap();
            let (e, l, st) = brute_force(&cb, &s, &ch);
            assert!((r.effective_secrecy.to_f64() - e).abs() < 1e-9);
            assert!((r.leakage - l).abs() < 1e-9);
            assert!((r.stealth.to_f64() - st).abs() < 1e-9);
            assert!(r.residual_decomposition.unwrap() < 1e-9);
            assert!(r.residual_chain_rule.unwrap() < 1e-9);
            assert!(r.effective_secrecy.to_f64() <= r.lemma1_bound + 1e-9);
            assert!(r.effective_secrecy.to_f64() <= r.lemma1_letter_bound + 1e-9);
        }
    }

    #[test]
    fn symmetric_codebook_residuals() {
        let s = presets::orthogonal_scheme();
        let ch = presets::orthogonal_noisy_channel(0.1, 0.2);
        let mut cb = code(&s, 2, rates(0.5, 0.5, 0.0), 3);
        // Identical words everywhere: the message law is degenerate.
        let word = cb.word(1, 0, 0, 0).to_vec();
        let fixed: Vec<u8> = word.iter().cycle().take(cb.words(1).len()).copied().collect();
        cb = rebuild(&cb, fixed);
        let r = effective_secrecy_exact(&cb, &s, &ch, 0, 0).unwrap();
        assert!(r.leakage.abs() < 1e-12);
        assert!(r.residual_decomposition.unwrap() < 1e-9);
        assert!(r.residual_chain_rule.unwrap() < 1e-9);
    }

    fn rebuild(cb: &Codebook, v1: Vec<u8>) -> Codebook {
        crate::codec::Codebook::from_words(*cb.params(), v1, cb.words(2).to_vec()).unwrap()
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let s = presets::silent_v2_scheme();
        let ch = presets::xor_leak_channel();
        let cb = code(&s, 6, rates(1.0 / 6.0, 0.5, 0.0), 8);
        let exact = effective_secrecy_exact(&cb, &s, &ch, 0, 0).unwrap();
        let mc = effective_secrecy_mc(&cb, &s, &ch, 0, 0, 20000, &mut rng::stream(1)).unwrap();
        let (se_e, se_l) = mc.std_error.unwrap();
        assert!((mc.effective_secrecy.to_f64() - exact.effective_secrecy.to_f64()).abs() < 5.0 * se_e + 1e-6);
        assert!((mc.leakage - exact.leakage).abs() < 5.0 * se_l + 1e-6);
    }

    #[test]
    fn jensen_direction() {
        let mut g = rng::stream(4);
        for _ in 0..5 {
            let v = presets::random_joint(&[(names::V1, 2), (names::V2, 2)], &mut g);
            let s = AuxScheme::without_u(v, presets::pair_input_map()).unwrap();
            let bits = |n: &str| Alphabet::indexed(n, 2).unwrap();
            let x = presets::xor_leak_channel().input().clone();
            let ch = BroadcastChannel::from_rows(x, bits(names::Y1), bits(names::Y2), &(0..4).flat_map(|_| presets::dirichlet(4, &mut g)).collect::<Vec<_>>()).unwrap();
            let view = Receiver2View::new(&s, &ch).unwrap();
            for j1 in [1usize, 2, 3] {
                let v2 = representative_sequence(&s.p_v2(), 2);
                let exact = expected_divergence_exact(&view, &v2, j1).unwrap();
                let bound = jensen_surrogate(&view, &v2, j1 as f64).unwrap();
                assert!(exact <= bound + 1e-12, "{exact} > {bound}");
            }
        }
    }

    #[test]
    fn definition1_linkage() {
        let s = presets::dsbs_scheme(0.3);
        let ch = presets::xor_leak_channel();
        let cb = generate_codebook(&s, &CodeParams::new(3, RatePoint::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0).unwrap(), Epsilons::default(), 5).unwrap()).unwrap();
        let leak = definition1_leakage(&cb, &s, &ch).unwrap();
        let (d2m, d2j) = (cb.dims(2).m, cb.dims(2).j);
        let mut avg = 0.0;
        for m2 in 0..d2m {
            for s2 in 0..d2j {
                avg += effective_secrecy_exact(&cb, &s, &ch, m2, s2).unwrap().effective_secrecy.to_f64();
            }
        }
        avg /= (d2m * d2j) as f64;
        assert!(leak <= avg + 1e-12, "{leak} > {avg}");
    }

    #[test]
    fn e_split_sums_to_restricted_surrogate() {
        let s = presets::silent_v2_scheme();
        let ch = presets::xor_leak_channel();
        let v2 = vec![0u8; 6];
        let e = e_split(&s, &ch, &v2, 64.0, 0.1).unwrap();
        // Y2 = V1, P_V1 uniform: only balanced v1 are typical, each triple is typical.
        let expect = 20.0 / 64.0 * (64.0f64 / 64.0 + 1.0).log2();
        assert!(e.e1.abs() < 1e-12);
        assert!((e.e2 - expect).abs() < 1e-12);
        assert!((e.typical_v1_mass - 20.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_reproducible_and_blind_grid_is_zero() {
        let s = presets::silent_v2_scheme();
        let blind = presets::orthogonal_clean_channel();
        let cfg = SweepConfig { n: 4, r1: 0.25, rco: 0.0, epsilons: Epsilons::default(), draws: 3, seed: 2 };
        let rows = leakage_vs_rate_sweep(&s, &blind, &[0.0, 0.5], &cfg).unwrap();
        assert!(rows.iter().all(|r| r.mean_effective_secrecy.abs() < 1e-12));
        let leak = presets::xor_leak_channel();
        let one = SweepConfig { draws: 1, ..cfg };
        assert_eq!(leakage_vs_rate_sweep(&s, &leak, &[0.5], &one).unwrap(), leakage_vs_rate_sweep(&s, &leak, &[0.5], &one).unwrap());
        assert!(leakage_vs_rate_sweep(&s, &leak, &[], &one).is_err());
    }

    #[test]
    fn exact_cap_suggests_monte_carlo() {
        let s = presets::silent_v2_scheme();
        let cb = code(&s, 8, rates(0.25, 0.5, 0.0), 1);
        let err = effective_secrecy_exact_capped(&cb, &s, &presets::xor_leak_channel(), 0, 0, 100.0).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }
}
