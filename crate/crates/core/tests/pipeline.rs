use strongsec::codec::{estimate_error, generate_codebook, CodeParams, Epsilons, EstimationMode};
use strongsec::presets;
use strongsec::region::{code_rate_constraints, RatePoint};
use strongsec::channel::induced_joint;
use strongsec::secrecy::effective_secrecy_exact;

fn params(seed: u64) -> CodeParams {
    let rates = RatePoint::new(0.3, 0.3, 0.05, 0.05, 0.05).unwrap();
    CodeParams::new(24, rates, Epsilons::default(), seed).unwrap()
}

#[test]
fn codebooks_depend_only_on_seed() {
    let s = presets::orthogonal_scheme();
    let a = generate_codebook(&s, &params(9)).unwrap();
    let b = generate_codebook(&s, &params(9)).unwrap();
    let c = generate_codebook(&s, &params(10)).unwrap();
    assert_eq!(a.words(1), b.words(1));
    assert_eq!(a.words(2), b.words(2));
    assert_ne!(a.words(1), c.words(1));
}

#[test]
fn error_estimates_are_reproducible() {
    let s = presets::orthogonal_scheme();
    let ch = presets::orthogonal_noisy_channel(0.02, 0.02);
    for mode in [EstimationMode::Explicit, EstimationMode::Ensemble] {
        let a = estimate_error(&s, &ch, &params(3), 300, mode).unwrap();
        let b = estimate_error(&s, &ch, &params(3), 300, mode).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn end_to_end_interior_point() {
    let s = presets::orthogonal_scheme();
    let ch = presets::orthogonal_clean_channel();
    let joint = induced_joint(&ch, &s).unwrap();
    let p = params(1);
    assert!(code_rate_constraints(&joint, p.rates).unwrap().feasible);
    let e = estimate_error(&s, &ch, &p, 400, EstimationMode::Auto).unwrap();
    assert!(e.pe1 < 0.2 && e.pe2 < 0.2, "{e:?}");
    let cb = generate_codebook(&s, &CodeParams::new(8, RatePoint::new(0.25, 0.0, 0.25, 0.0, 0.0).unwrap(), Epsilons::default(), 1).unwrap()).unwrap();
    let r = effective_secrecy_exact(&cb, &s, &ch, 0, 0).unwrap();
    // Receiver 2 sees only V2, so nothing about the first message leaks.
    assert!(r.leakage < 1e-9);
}

#[cfg(feature = "rayon")]
mod pools {
    use super::*;
    use strongsec::region::{optimize_region, SearchConfig};
    use strongsec::secrecy::{leakage_vs_rate_sweep, SweepConfig};

    fn single<T: Send>(f: impl FnOnce() -> T + Send) -> T {
        rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
    }

    fn wide<T: Send>(f: impl FnOnce() -> T + Send) -> T {
        rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(f)
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let s = presets::orthogonal_scheme();
        let ch = presets::orthogonal_noisy_channel(0.05, 0.05);
        let run = || estimate_error(&s, &ch, &params(5), 200, EstimationMode::Ensemble).unwrap();
        assert_eq!(single(run), wide(run));

        let bsc = presets::binary_bsc_broadcast(0.1, 0.3);
        let cfg = SearchConfig { restarts: 12, sweeps: 6, ..SearchConfig::default() };
        let search = || optimize_region(&bsc, &cfg).unwrap();
        let (a, b) = (single(search), wide(search));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.point, y.point);
        }

        let leak = presets::xor_leak_channel();
        let silent = presets::silent_v2_scheme();
        let sweep_cfg = SweepConfig { n: 4, r1: 0.25, rco: 0.0, epsilons: Epsilons::default(), draws: 4, seed: 2 };
        let sweep = || leakage_vs_rate_sweep(&silent, &leak, &[0.5, 1.0], &sweep_cfg).unwrap();
        assert_eq!(single(sweep), wide(sweep));
    }
}
