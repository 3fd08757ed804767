//! Bundled channels and schemes used by the tests, benches and the CLI.
//!
//! Four-ary inputs are labelled by bit pairs `"00"`, `"01"`, `"10"`, `"11"`,
//! with index `2 * b1 + b2`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::channel::{names, AuxScheme, BroadcastChannel};
use crate::prob::{Alphabet, CondPmf, JointPmf};

fn bits(name: &str) -> Alphabet {
    Alphabet::indexed(name, 2).expect("binary alphabet")
}

fn pairs(name: &str) -> Alphabet {
    Alphabet::new(name, ["00", "01", "10", "11"]).expect("four symbols")
}

fn bsc_row(bit: usize, flip: f64) -> [f64; 2] {
    if bit == 0 {
        [1.0 - flip, flip]
    } else {
        [flip, 1.0 - flip]
    }
}

/// `X = (b1, b2)`: receiver 1 sees `b1` through a BSC(`f1`), receiver 2 sees
/// `b2` through a BSC(`f2`).
pub fn orthogonal_noisy_channel(f1: f64, f2: f64) -> BroadcastChannel {
    let mut rows = Vec::with_capacity(16);
    for x in 0..4 {
        let r1 = bsc_row(x >> 1, f1);
        let r2 = bsc_row(x & 1, f2);
        for a in r1 {
            for b in r2 {
                rows.push(a * b);
            }
        }
    }
    BroadcastChannel::from_rows(pairs(names::X), bits(names::Y1), bits(names::Y2), &rows)
        .expect("valid law")
}

/// Noiseless orthogonal channel: `Y1 = b1`, `Y2 = b2`.
pub fn orthogonal_clean_channel() -> BroadcastChannel {
    orthogonal_noisy_channel(0.0, 0.0)
}

/// `X = (b1, b2)` with `Y1 = b1` and `Y2 = b1 xor b2`.
pub fn xor_leak_channel() -> BroadcastChannel {
    let law = CondPmf::deterministic(
        vec![pairs(names::X)],
        vec![bits(names::Y1), bits(names::Y2)],
        |x| {
            let (b1, b2) = (x[0] >> 1, x[0] & 1);
            2 * b1 + (b1 ^ b2)
        },
    )
    .expect("valid law");
    BroadcastChannel::new(law).expect("valid law")
}

/// Binary input seen through independent BSCs.
pub fn binary_bsc_broadcast(f1: f64, f2: f64) -> BroadcastChannel {
    let mut rows = Vec::with_capacity(8);
    for x in 0..2 {
        for a in bsc_row(x, f1) {
            for b in bsc_row(x, f2) {
                rows.push(a * b);
            }
        }
    }
    BroadcastChannel::from_rows(bits(names::X), bits(names::Y1), bits(names::Y2), &rows)
        .expect("valid law")
}

/// Both receivers observe the same output of a BSC(`flip`) on a binary input.
pub fn identical_outputs_channel(flip: f64) -> BroadcastChannel {
    let mut rows = Vec::with_capacity(8);
    for x in 0..2 {
        let r = bsc_row(x, flip);
        rows.extend_from_slice(&[r[0], 0.0, 0.0, r[1]]);
    }
    BroadcastChannel::from_rows(bits(names::X), bits(names::Y1), bits(names::Y2), &rows)
        .expect("valid law")
}

/// `X = (V1, V2)` on a four-ary input.
pub fn pair_input_map() -> CondPmf {
    CondPmf::deterministic(
        vec![bits(names::V1), bits(names::V2)],
        vec![pairs(names::X)],
        |v| 2 * v[0] + v[1],
    )
    .expect("valid map")
}

/// Scheme with the given `(V1, V2)` table (row-major, binary) and `X = (V1, V2)`.
pub fn pair_scheme(v1v2: [f64; 4]) -> AuxScheme {
    let joint = JointPmf::new(vec![bits(names::V1), bits(names::V2)], v1v2.to_vec()).expect("valid");
    AuxScheme::without_u(joint, pair_input_map()).expect("valid scheme")
}

/// Independent uniform bits, `X = (V1, V2)`.
pub fn orthogonal_scheme() -> AuxScheme {
    pair_scheme([0.25; 4])
}

/// Doubly symmetric binary source with `P(V1 != V2) = crossover`.
pub fn dsbs_scheme(crossover: f64) -> AuxScheme {
    let same = (1.0 - crossover) / 2.0;
    let diff = crossover / 2.0;
    pair_scheme([same, diff, diff, same])
}

/// Uniform `V1` and `V2` fixed to `0`.
pub fn silent_v2_scheme() -> AuxScheme {
    pair_scheme([0.5, 0.0, 0.5, 0.0])
}

/// Dirichlet(1, ..., 1) weights of the given length.
pub fn dirichlet<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x: f64| x / total).collect()
}

/// Uniformly random joint law over axes with the given names and sizes.
pub fn random_joint<R: Rng + ?Sized>(axes: &[(&str, usize)], rng: &mut R) -> JointPmf {
    let alphabets: Vec<Alphabet> = axes
        .iter()
        .map(|(n, k)| Alphabet::indexed(*n, *k).expect("nonempty"))
        .collect();
    let len = axes.iter().map(|(_, k)| k).product();
    JointPmf::from_weights(alphabets, &dirichlet(len, rng)).expect("positive weights")
}

/// Random `(V1, V2, Y2)` law on binary alphabets.
pub fn random_v1v2y2<R: Rng + ?Sized>(rng: &mut R) -> JointPmf {
    random_joint(&[(names::V1, 2), (names::V2, 2), (names::Y2, 2)], rng)
}
