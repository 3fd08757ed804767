//! Achievable rate pairs of a scheme, the code-rate constraints of the
//! random-coding construction, and a seeded search over auxiliary schemes.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{induced_joint, names, AuxScheme, BroadcastChannel};
use crate::par;
use crate::presets::dirichlet;
use crate::prob::{mutual_information, Alphabet, CondPmf, JointPmf, Pmf};
use crate::rng::{self, tag};
use crate::{Error, Result};

/// Message, randomization and covering rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
    pub r1p: f64,
    pub r2p: f64,
    pub rco: f64,
}

impl RatePoint {
    pub fn new(r1: f64, r2: f64, r1p: f64, r2p: f64, rco: f64) -> Result<Self> {
        let p = Self { r1, r2, r1p, r2p, rco };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.r1, self.r2, self.r1p, self.r2p, self.rco];
        if all.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rates must be finite and nonnegative: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Information terms entering the region, all in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionTerms {
    pub i_v1_y1: f64,
    pub i_v2_y2: f64,
    pub i_v1_v2: f64,
    pub i_v1_y2_given_v2: f64,
    pub i_v2_y1_given_v1: f64,
}

impl RegionTerms {
    pub fn of(joint: &JointPmf) -> Result<Self> {
        let [v1, v2, y1, y2] = axes(joint, [names::V1, names::V2, names::Y1, names::Y2])?;
        Ok(Self {
            i_v1_y1: mutual_information(joint, &[v1], &[y1], &[])?,
            i_v2_y2: mutual_information(joint, &[v2], &[y2], &[])?,
            i_v1_v2: mutual_information(joint, &[v1], &[v2], &[])?,
            i_v1_y2_given_v2: mutual_information(joint, &[v1], &[y2], &[v2])?,
            i_v2_y1_given_v1: mutual_information(joint, &[v2], &[y1], &[v1])?,
        })
    }
}

fn axes<const K: usize>(joint: &JointPmf, want: [&str; K]) -> Result<[usize; K]> {
    let mut out = [0; K];
    for (slot, name) in out.iter_mut().zip(want) {
        *slot = joint.axis_index(name)?;
    }
    Ok(out)
}

/// Clamped right-hand sides of the two rate bounds:
/// `I(V1;Y1|U) - I(V1;Y2|V2,U) - I(V1;V2|U)` and its mirror image.
///
/// A joint without a `U` axis is treated as having a singleton `U`.
pub fn theorem1_rates(joint: &JointPmf) -> Result<(f64, f64)> {
    let [v1, v2, y1, y2] = axes(joint, [names::V1, names::V2, names::Y1, names::Y2])?;
    let u: Vec<usize> = joint.axis_index(names::U).into_iter().collect();
    let with = |extra: &[usize]| -> Vec<usize> { extra.iter().chain(&u).copied().collect() };
    let corr = mutual_information(joint, &[v1], &[v2], &u)?;
    let a = mutual_information(joint, &[v1], &[y1], &u)? - mutual_information(joint, &[v1], &[y2], &with(&[v2]))? - corr;
    let b = mutual_information(joint, &[v2], &[y2], &u)? - mutual_information(joint, &[v2], &[y1], &with(&[v1]))? - corr;
    Ok((a.max(0.0), b.max(0.0)))
}

/// One code-rate constraint; satisfied iff `slack > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slack {
    pub name: &'static str,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub r1_max: f64,
    pub r2_max: f64,
    pub terms: RegionTerms,
    pub point: RatePoint,
    pub slacks: Vec<Slack>,
    pub feasible: bool,
}

impl RegionReport {
    /// Names of the violated constraints.
    pub fn violated(&self) -> Vec<&'static str> {
        self.slacks.iter().filter(|s| s.slack <= 0.0).map(|s| s.name).collect()
    }

    pub fn slack(&self, name: &str) -> Option<f64> {
        self.slacks.iter().find(|s| s.name == name).map(|s| s.slack)
    }
}

pub mod constraint {
    pub const COVERING: &str = "covering";
    pub const PACKING_1: &str = "packing_1";
    pub const PACKING_2: &str = "packing_2";
    pub const REDUCED_1: &str = "reduced_1";
    pub const REDUCED_2: &str = "reduced_2";
    pub const SECRECY_1: &str = "secrecy_1";
    pub const SECRECY_2: &str = "secrecy_2";
}

/// Evaluates every code-rate constraint of the construction at `point`.
pub fn code_rate_constraints(joint: &JointPmf, point: RatePoint) -> Result<RegionReport> {
    use constraint::*;
    point.validate()?;
    let t = RegionTerms::of(joint)?;
    let (r1_max, r2_max) = theorem1_rates(joint)?;
    let p = point;
    let slacks = vec![
        Slack { name: COVERING, slack: p.rco - t.i_v1_v2 },
        Slack { name: PACKING_1, slack: t.i_v1_y1 - (p.r1 + p.r1p + p.rco) },
        Slack { name: PACKING_2, slack: t.i_v2_y2 - (p.r2 + p.r2p + p.rco) },
        Slack { name: REDUCED_1, slack: t.i_v1_y1 - t.i_v1_v2 - (p.r1 + p.r1p) },
        Slack { name: REDUCED_2, slack: t.i_v2_y2 - t.i_v1_v2 - (p.r2 + p.r2p) },
        Slack { name: SECRECY_1, slack: p.r1p - t.i_v1_y2_given_v2 },
        Slack { name: SECRECY_2, slack: p.r2p - t.i_v2_y1_given_v1 },
    ];
    let feasible = slacks.iter().all(|s| s.slack > 0.0);
    Ok(RegionReport {
        r1_max,
        r2_max,
        terms: t,
        point,
        slacks,
        feasible,
    })
}

/// Rate point with every constraint holding with slack at least `margin`,
/// with message rates as large as that allows. `None` if none exists.
pub fn interior_point(joint: &JointPmf, margin: f64) -> Result<Option<RatePoint>> {
    let t = RegionTerms::of(joint)?;
    let rco = t.i_v1_v2 + margin;
    let r1p = t.i_v1_y2_given_v2 + margin;
    let r2p = t.i_v2_y1_given_v1 + margin;
    let r1 = t.i_v1_y1 - rco - r1p - margin;
    let r2 = t.i_v2_y2 - rco - r2p - margin;
    if r1 < 0.0 || r2 < 0.0 {
        return Ok(None);
    }
    Ok(Some(RatePoint { r1, r2, r1p, r2p, rco }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub v1_size: usize,
    pub v2_size: usize,
    pub restarts: usize,
    /// Refinement sweeps per restart.
    pub sweeps: usize,
    pub initial_step: f64,
    /// Slack kept on every constraint of a returned point.
    pub margin: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            v1_size: 2,
            v2_size: 2,
            restarts: 200,
            sweeps: 40,
            initial_step: 0.25,
            margin: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub scheme: AuxScheme,
    pub point: RatePoint,
    /// The zero-rate fallback, returned when no searched scheme admits a
    /// strictly feasible point.
    pub trivial: bool,
}

#[derive(Clone)]
struct Candidate {
    vjoint: Vec<f64>,
    xmap: Vec<f64>,
}

struct Searcher<'a> {
    ch: &'a BroadcastChannel,
    v1: Alphabet,
    v2: Alphabet,
    x: Alphabet,
    margin: f64,
}

impl Searcher<'_> {
    fn scheme(&self, c: &Candidate) -> Result<AuxScheme> {
        let vjoint = JointPmf::from_weights(vec![self.v1.clone(), self.v2.clone()], &c.vjoint)?;
        let xmap = CondPmf::from_weights(vec![self.v1.clone(), self.v2.clone()], vec![self.x.clone()], &c.xmap)?;
        AuxScheme::without_u(vjoint, xmap)
    }

    fn evaluate(&self, c: &Candidate) -> Option<(AuxScheme, RatePoint)> {
        let scheme = self.scheme(c).ok()?;
        let joint = induced_joint(self.ch, &scheme).ok()?;
        let point = interior_point(&joint, self.margin).ok()??;
        Some((scheme, point))
    }

    /// Weighted unclamped rate bounds, with negative parts penalized so that
    /// infeasible starts still climb toward the region.
    fn score(&self, c: &Candidate, w: f64) -> f64 {
        let Some(t) = self
            .scheme(c)
            .and_then(|s| induced_joint(self.ch, &s))
            .and_then(|j| RegionTerms::of(&j))
            .ok()
        else {
            return f64::NEG_INFINITY;
        };
        let a = t.i_v1_y1 - t.i_v1_v2 - t.i_v1_y2_given_v2 - 3.0 * self.margin;
        let b = t.i_v2_y2 - t.i_v1_v2 - t.i_v2_y1_given_v1 - 3.0 * self.margin;
        w * a + (1.0 - w) * b + 2.0 * (a.min(0.0) + b.min(0.0))
    }

    fn random_candidate<R: Rng>(&self, rng: &mut R) -> Candidate {
        let cells = self.v1.size() * self.v2.size();
        let nx = self.x.size();
        let vjoint = dirichlet(cells, rng);
        let xmap = if rng.random_bool(0.5) {
            let symbols: Vec<usize> = (0..nx).collect();
            (0..cells)
                .flat_map(|_| {
                    let x = *symbols.choose(rng).expect("nonempty input");
                    (0..nx).map(move |i| if i == x { 1.0 } else { 0.0 })
                })
                .collect()
        } else {
            (0..cells).flat_map(|_| dirichlet(nx, rng)).collect()
        };
        Candidate { vjoint, xmap }
    }

    /// Moves `step` of mass from cell `from` to cell `to` inside `simplex`.
    fn shift(simplex: &mut [f64], from: usize, to: usize, step: f64) -> bool {
        let moved = step.min(simplex[from]);
        if moved <= 0.0 {
            return false;
        }
        simplex[from] -= moved;
        simplex[to] += moved;
        true
    }

    fn refine<R: Rng>(&self, mut c: Candidate, w: f64, sweeps: usize, step0: f64, rng: &mut R) -> Candidate {
        let nx = self.x.size();
        let cells = c.vjoint.len();
        let mut best = self.score(&c, w);
        let mut step = step0;
        for _ in 0..sweeps {
            let mut improved = false;
            for from in 0..cells {
                let to = rng.random_range(0..cells);
                if to == from {
                    continue;
                }
                let mut trial = c.clone();
                if Self::shift(&mut trial.vjoint, from, to, step) {
                    let s = self.score(&trial, w);
                    if s > best {
                        best = s;
                        c = trial;
                        improved = true;
                    }
                }
            }
            for row in 0..cells {
                let (from, to) = (rng.random_range(0..nx), rng.random_range(0..nx));
                if from == to {
                    continue;
                }
                let mut trial = c.clone();
                if Self::shift(&mut trial.xmap[row * nx..(row + 1) * nx], from, to, step) {
                    let s = self.score(&trial, w);
                    if s > best {
                        best = s;
                        c = trial;
                        improved = true;
                    }
                }
            }
            for row in 0..cells {
                for x in 0..nx {
                    let mut trial = c.clone();
                    let r = &mut trial.xmap[row * nx..(row + 1) * nx];
                    if r[x] == 1.0 {
                        continue;
                    }
                    r.iter_mut().enumerate().for_each(|(i, p)| *p = if i == x { 1.0 } else { 0.0 });
                    let s = self.score(&trial, w);
                    if s > best {
                        best = s;
                        c = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.6;
            }
        }
        c
    }
}

fn dominates(a: &RatePoint, b: &RatePoint) -> bool {
    a.r1 >= b.r1 && a.r2 >= b.r2 && (a.r1 > b.r1 || a.r2 > b.r2)
}

/// Keeps the points not dominated in `(r1, r2)`; ties keep the first seen.
/// The result is sorted by increasing `r1`.
pub fn pareto_filter(points: Vec<FrontierPoint>) -> Vec<FrontierPoint> {
    let mut keep: Vec<FrontierPoint> = Vec::new();
    for p in points {
        if keep.iter().any(|k| dominates(&k.point, &p.point) || (k.point.r1 == p.point.r1 && k.point.r2 == p.point.r2)) {
            continue;
        }
        keep.retain(|k| !dominates(&p.point, &k.point));
        keep.push(p);
    }
    keep.sort_by(|a, b| a.point.r1.total_cmp(&b.point.r1).then(b.point.r2.total_cmp(&a.point.r2)));
    keep
}

fn origin(ch: &BroadcastChannel, cfg: &SearchConfig) -> Result<FrontierPoint> {
    let v1 = Alphabet::indexed(names::V1, cfg.v1_size)?;
    let v2 = Alphabet::indexed(names::V2, cfg.v2_size)?;
    let x = ch.input().clone();
    let vjoint = JointPmf::product(&Pmf::point(v1.clone(), 0)?.to_joint(), &Pmf::point(v2.clone(), 0)?.to_joint())?;
    let xmap = CondPmf::deterministic(vec![v1, v2], vec![x], |_| 0)?;
    Ok(FrontierPoint {
        scheme: AuxScheme::without_u(vjoint, xmap)?,
        point: RatePoint::default(),
        trivial: true,
    })
}

/// Random-restart search with greedy coordinate refinement over `P(v1, v2)`
/// and `P(x | v1, v2)`, singleton `U`. Each restart scalarizes with its own
/// weight on `r1`. Deterministic given `cfg.seed`.
pub fn optimize_region(ch: &BroadcastChannel, cfg: &SearchConfig) -> Result<Vec<FrontierPoint>> {
    if cfg.v1_size == 0 || cfg.v2_size == 0 {
        return Err(Error::InvalidParameter("auxiliary alphabets must be nonempty".into()));
    }
    if cfg.margin.is_nan() || cfg.margin <= 0.0 {
        return Err(Error::InvalidParameter("search margin must be positive".into()));
    }
    let searcher = Searcher {
        ch,
        v1: Alphabet::indexed(names::V1, cfg.v1_size)?,
        v2: Alphabet::indexed(names::V2, cfg.v2_size)?,
        x: ch.input().clone(),
        margin: cfg.margin,
    };
    let found = par::map_range(cfg.restarts, |i| {
        let mut rng = rng::derive(cfg.seed, tag::RESTART, i as u64);
        let w = match i % 3 {
            0 => 0.5,
            _ => rng.random::<f64>(),
        };
        let start = searcher.random_candidate(&mut rng);
        let best = searcher.refine(start, w, cfg.sweeps, cfg.initial_step, &mut rng);
        searcher.evaluate(&best)
    });
    let points: Vec<FrontierPoint> = found
        .into_iter()
        .flatten()
        .map(|(scheme, point)| FrontierPoint { scheme, point, trivial: false })
        .collect();
    if points.is_empty() {
        return Ok(vec![origin(ch, cfg)?]);
    }
    Ok(pareto_filter(points))
}
