//! Property suites run by the `verify` command and the acceptance checks.
//!
//! Each suite returns a [`SuiteOutcome`] with the number of checked cases, the
//! number of failed cases and the worst residual seen.

use rand::Rng;
use serde::Serialize;

use crate::channel::{names, AuxScheme, BroadcastChannel};
use crate::codec::{generate_codebook, CodeParams, Epsilons};
use crate::prob::{kl_of, Alphabet, CondPmf, JointPmf};
use crate::region::RatePoint;
use crate::rng::{self, tag};
use crate::secrecy::{effective_secrecy_exact, single_letter_stealth, SecrecyReport};
use crate::typicality::lemma2_bound_check;
use crate::{par, presets, Result};

/// Absolute tolerance of identities and bounds.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Lower tolerance on quantities that are nonnegative in exact arithmetic.
pub const SIGN_TOL: f64 = 1e-10;
/// Relative tolerance of the type identity for `Q^n`.
pub const TYPE_IDENTITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub suite: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

/// Checks on one exact secrecy report; returns the worst residual and
/// whether every check held.
pub fn check_report(r: &SecrecyReport) -> (f64, bool) {
    let eff = r.effective_secrecy.finite();
    let stealth = r.stealth.finite();
    let res = r.residual_decomposition.unwrap_or(f64::INFINITY).max(r.residual_chain_rule.unwrap_or(0.0));
    let ok = matches!((eff, stealth), (Some(e), Some(s))
        if e >= -SIGN_TOL && s >= -SIGN_TOL && e <= r.lemma1_bound + IDENTITY_TOL)
        && r.leakage >= -SIGN_TOL
        && r.lemma1_bound <= r.lemma1_letter_bound + IDENTITY_TOL
        && res <= IDENTITY_TOL;
    (res, ok)
}

/// Random instance on binary alphabets: a law on `(V1, V2)`, a stochastic
/// input map `P(x | v1, v2)` and a law `P(y1, y2 | x)`.
pub fn random_binary_instance<R: Rng + ?Sized>(rng: &mut R) -> (AuxScheme, BroadcastChannel) {
    let bit = |n: &str| Alphabet::indexed(n, 2).expect("binary");
    let v1v2 = presets::random_joint(&[(names::V1, 2), (names::V2, 2)], rng);
    let map_rows: Vec<f64> = (0..4).flat_map(|_| presets::dirichlet(2, rng)).collect();
    let xmap = CondPmf::new(vec![bit(names::V1), bit(names::V2)], vec![bit(names::X)], map_rows).expect("valid rows");
    let scheme = AuxScheme::without_u(v1v2, xmap).expect("valid scheme");
    let rows: Vec<f64> = (0..2).flat_map(|_| presets::dirichlet(4, rng)).collect();
    let ch = BroadcastChannel::from_rows(bit(names::X), bit(names::Y1), bit(names::Y2), &rows).expect("valid rows");
    (scheme, ch)
}

/// Rate whose index count at blocklength `n` is exactly `count`.
pub fn rate_for_count(n: usize, count: usize) -> f64 {
    if count <= 1 {
        0.0
    } else {
        (count as f64 - 0.5).log2() / n as f64
    }
}

/// Effective secrecy equals leakage plus stealth, the chain-rule form agrees,
/// every term is nonnegative and below the divergence bound, on random binary
/// instances with `n <= max_n` and `M1, J1 <= max_count`.
pub fn decomposition_suite(cases: usize, max_n: usize, max_count: usize, seed: u64) -> Result<SuiteOutcome> {
    let results = par::map_range(cases, |i| -> Result<(f64, bool)> {
        let mut rng = rng::derive(seed, tag::SUITE, i as u64);
        let (scheme, ch) = random_binary_instance(&mut rng);
        let n = rng.random_range(1..=max_n);
        let m1 = rng.random_range(1..=max_count);
        let j1 = rng.random_range(1..=max_count);
        let rates = RatePoint::new(rate_for_count(n, m1), 0.0, rate_for_count(n, j1), 0.0, 0.0)?;
        let cb = generate_codebook(&scheme, &CodeParams::new(n, rates, Epsilons::default(), rng.random())?)?;
        Ok(check_report(&effective_secrecy_exact(&cb, &scheme, &ch, 0, 0)?))
    });
    summarize("decomposition", IDENTITY_TOL, results, format!("n <= {max_n}, M1, J1 <= {max_count}"))
}

/// The same checks on a given scheme over codebooks with `M1 = J1 = 2`.
pub fn decomposition_for(
    scheme: &AuxScheme,
    ch: &BroadcastChannel,
    ns: &[usize],
    codebooks: usize,
    seed: u64,
) -> Result<SuiteOutcome> {
    let jobs: Vec<(usize, usize)> = ns.iter().flat_map(|&n| (0..codebooks).map(move |c| (n, c))).collect();
    let results = par::map_slice(&jobs, |&(n, c)| -> Result<(f64, bool)> {
        let rates = RatePoint::new(rate_for_count(n, 2), 0.0, rate_for_count(n, 2), 0.0, 0.0)?;
        let cb_seed = rng::child_seed(seed, tag::SUITE, (n as u64) << 32 | c as u64);
        let cb = generate_codebook(scheme, &CodeParams::new(n, rates, Epsilons::default(), cb_seed)?)?;
        Ok(check_report(&effective_secrecy_exact(&cb, scheme, ch, 0, 0)?))
    });
    summarize("decomposition", IDENTITY_TOL, results, format!("configured scheme, n in {ns:?}"))
}

/// `0 <= D(p || q) <= log2(1 / min q)` for random `p` absolutely continuous
/// with respect to `q`, and equality for the point mass on the smallest
/// positive entry of `q`.
pub fn divergence_bound_suite(pairs: usize, seed: u64) -> SuiteOutcome {
    let results = par::map_range(pairs, |i| -> Result<(f64, bool)> {
        let mut rng = rng::derive(seed, tag::SUITE, i as u64);
        let k = rng.random_range(2..=6);
        let q = sparse_simplex(k, None, &mut rng);
        let p = sparse_simplex(k, Some(&q), &mut rng);
        let (arg, pi) = q
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, x)| x > 0.0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("q has positive mass");
        let bound = -pi.log2();
        let d = kl_of(&p, &q).finite();
        let mut point = vec![0.0; k];
        point[arg] = 1.0;
        let witness = kl_of(&point, &q).finite().map_or(f64::INFINITY, |w| (w - bound).abs());
        let ok = matches!(d, Some(d) if d >= -SIGN_TOL && d <= bound + IDENTITY_TOL) && witness <= IDENTITY_TOL;
        Ok((witness, ok))
    });
    summarize("divergence-bound", IDENTITY_TOL, results, "random pairs with p << q".into())
        .expect("no fallible steps")
}

/// Weights on `k` cells with random zeros, supported inside the support of
/// `within` when given.
fn sparse_simplex<R: Rng + ?Sized>(k: usize, within: Option<&[f64]>, rng: &mut R) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..k)
            .map(|i| {
                let allowed = within.is_none_or(|q| q[i] > 0.0);
                if allowed && rng.random::<f64>() >= 0.25 {
                    -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.into_iter().map(|x| x / total).collect();
        }
    }
}

/// Random `(V1, V2, Y2)` laws on binary alphabets.
pub fn random_joints(count: usize, seed: u64) -> Vec<JointPmf> {
    (0..count)
        .map(|i| presets::random_v1v2y2(&mut rng::derive(seed, tag::SUITE, i as u64)))
        .collect()
}

/// Lower bound on `Q^n(y2 | v2)` over all typical pairs, with the default
/// slack, and agreement of the type identity with the product law.
pub fn output_bound_suite(joints: &[JointPmf], ns: &[usize], epsilon: f64) -> Result<SuiteOutcome> {
    let jobs: Vec<(usize, usize)> = (0..joints.len()).flat_map(|j| ns.iter().map(move |&n| (j, n))).collect();
    let results = par::map_slice(&jobs, |&(j, n)| -> Result<(f64, bool)> {
        let r = lemma2_bound_check(&joints[j], n, epsilon, None)?;
        let ok = r.violations == 0 && r.max_identity_rel_err <= TYPE_IDENTITY_TOL;
        Ok((r.max_identity_rel_err, ok))
    });
    summarize("output-bound", TYPE_IDENTITY_TOL, results, format!("n in {ns:?}, eps = {epsilon}"))
}

/// `D(P_{V2,Y2} || P_V2 Q) <= I(V1;V2)`.
pub fn letter_stealth_suite(joints: &[JointPmf]) -> Result<SuiteOutcome> {
    let results = par::map_slice(joints, |j| -> Result<(f64, bool)> {
        let (d, i) = single_letter_stealth(j)?;
        Ok(match d.finite() {
            Some(d) => (d - i, d >= -SIGN_TOL && d <= i + IDENTITY_TOL),
            None => (f64::INFINITY, false),
        })
    });
    summarize("letter-stealth", IDENTITY_TOL, results, "excess of the divergence over I(V1;V2)".into())
}

fn summarize(
    suite: &'static str,
    tolerance: f64,
    results: Vec<Result<(f64, bool)>>,
    detail: String,
) -> Result<SuiteOutcome> {
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SuiteOutcome {
        suite,
        cases: results.len(),
        failures: results.iter().filter(|r| !r.1).count(),
        worst: results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max),
        tolerance,
        detail,
    })
}
