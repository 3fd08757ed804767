use proptest::prelude::*;
use strongsec::channel::{names, stealth_reference};
use strongsec::codec::{generate_codebook, CodeParams, Epsilons};
use strongsec::prob::{
    conditional_entropy, entropy, joint_entropy, kl_divergence, kl_min_mass_bound, mutual_information, Alphabet,
    Divergence, JointPmf, Pmf, ProbTable,
};
use strongsec::region::RatePoint;
use strongsec::secrecy::effective_secrecy_exact;
use strongsec::typicality::{lemma2_bound_check, log2_product, log2_product_via_type};
use strongsec::presets;

const TOL: f64 = 1e-9;

fn weights(len: usize, allow_zero: bool) -> impl Strategy<Value = Vec<f64>> {
    let cell = if allow_zero { prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0].boxed() } else { (0.01f64..1.0).boxed() };
    prop::collection::vec(cell, len).prop_filter("some mass", |w| w.iter().sum::<f64>() > 0.0)
}

fn pmf(len: usize, allow_zero: bool) -> impl Strategy<Value = Pmf> {
    weights(len, allow_zero).prop_map(move |w| Pmf::from_weights(Alphabet::indexed("A", len).unwrap(), &w).unwrap())
}

fn joint3(sizes: [usize; 3]) -> impl Strategy<Value = JointPmf> {
    weights(sizes.iter().product(), true).prop_map(move |w| {
        let axes = ["A", "B", "C"].iter().zip(sizes).map(|(n, k)| Alphabet::indexed(*n, k).unwrap()).collect();
        JointPmf::from_weights(axes, &w).unwrap()
    })
}

fn v1v2y2() -> impl Strategy<Value = JointPmf> {
    weights(8, false).prop_map(|w| {
        let axes = [names::V1, names::V2, names::Y2].iter().map(|n| Alphabet::indexed(*n, 2).unwrap()).collect();
        JointPmf::from_weights(axes, &w).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn divergence_is_nonnegative_and_bounded((p, q) in (2usize..6).prop_flat_map(|k| (pmf(k, true), pmf(k, true)))) {
        match kl_divergence(&p, &q).unwrap() {
            Divergence::Finite(d) => {
                prop_assert!(d >= -TOL);
                prop_assert!(d <= kl_min_mass_bound(&q).unwrap() + TOL);
            }
            Divergence::Infinite => {
                let escapes = p.mass().iter().zip(q.mass()).any(|(&a, &b)| a > 0.0 && b == 0.0);
                prop_assert!(escapes);
            }
        }
    }

    #[test]
    fn self_divergence_vanishes(p in (2usize..6).prop_flat_map(|k| pmf(k, true))) {
        prop_assert!(kl_divergence(&p, &p).unwrap().to_f64().abs() < TOL);
    }

    #[test]
    fn entropy_chain_rule(j in joint3([2, 3, 2])) {
        let h_ab = joint_entropy(&j, &[0, 1]).unwrap();
        let h_a = joint_entropy(&j, &[0]).unwrap();
        let h_b_a = conditional_entropy(&j, &[1], &[0]).unwrap();
        prop_assert!((h_ab - h_a - h_b_a).abs() < TOL);
        prop_assert!(entropy(&j) <= (12f64).log2() + TOL);
    }

    #[test]
    fn mutual_information_chain_rule(j in joint3([2, 2, 3])) {
        let i_a_bc = mutual_information(&j, &[0], &[1, 2], &[]).unwrap();
        let i_a_b = mutual_information(&j, &[0], &[1], &[]).unwrap();
        let i_a_c_b = mutual_information(&j, &[0], &[2], &[1]).unwrap();
        prop_assert!((i_a_bc - i_a_b - i_a_c_b).abs() < TOL);
    }

    #[test]
    fn mutual_information_is_divergence_from_product(j in joint3([2, 3, 1])) {
        let ab = j.marginal(&[0, 1]).unwrap();
        let prod = JointPmf::product(&ab.marginal(&[0]).unwrap(), &ab.marginal(&[1]).unwrap()).unwrap();
        let d = kl_divergence(&ab, &prod).unwrap().to_f64();
        let i = mutual_information(&j, &[0], &[1], &[]).unwrap();
        prop_assert!((d - i).abs() < TOL);
    }

    #[test]
    fn product_law_matches_type_identity(
        joint in v1v2y2(),
        v in prop::collection::vec(0u8..2, 1..40),
        seed in any::<u64>(),
    ) {
        let q = stealth_reference(&joint).unwrap();
        let y: Vec<u8> = v.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as u8).collect();
        let a = log2_product(&q, &v, &y);
        let b = log2_product_via_type(&q, &v, &y);
        prop_assert!(((a - b).exp2() - 1.0).abs() < TOL, "{a} vs {b}");
    }

    #[test]
    fn output_lower_bound_over_typical_pairs(joint in v1v2y2(), eps in 0.05f64..0.45, n in 2usize..7) {
        let report = lemma2_bound_check(&joint, n, eps, None).unwrap();
        prop_assert_eq!(report.violations, 0);
        prop_assert!(report.max_identity_rel_err < TOL);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn effective_secrecy_splits_into_leakage_and_stealth(w in weights(4, false), seed in any::<u64>(), flip in 0.02f64..0.4) {
        let mut cells = [0.0; 4];
        cells.copy_from_slice(&w);
        let total: f64 = cells.iter().sum();
        cells.iter_mut().for_each(|c| *c /= total);
        let scheme = presets::pair_scheme(cells);
        let ch = presets::orthogonal_noisy_channel(flip, flip);
        let rates = RatePoint::new(0.25, 0.0, 0.25, 0.0, 0.0).unwrap();
        let cb = generate_codebook(&scheme, &CodeParams::new(6, rates, Epsilons::default(), seed).unwrap()).unwrap();
        let r = effective_secrecy_exact(&cb, &scheme, &ch, 0, 0).unwrap();
        prop_assert!(r.leakage >= -TOL);
        prop_assert!(r.residual_decomposition.unwrap() < TOL);
        prop_assert!(r.residual_chain_rule.unwrap() < TOL);
        let total = r.effective_secrecy.to_f64();
        prop_assert!(total <= r.lemma1_bound + TOL);
    }
}
