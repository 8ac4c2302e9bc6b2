mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use udrl_lab::bounds::{
    eps_bounds, f_map, h_b0, h_fixed_points, h_map, supp_mu_bounds, z_fixed_point, z_map,
    AlphaDenominator,
};
use udrl_lab::ce::{kernel_distance, CommandExtension, PolicyTensor};
use udrl_lab::domains::domain_by_name;
use udrl_lab::recursion::eudrl_step;
use udrl_lab::seg::{segment_stats, SegmentSpace};
use udrl_lab::values::{optimal_values, policy_values, Reference};

fn instance(seed: u64, ns: usize, na: usize, n: usize, ng: usize) -> (CommandExtension, PolicyTensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lam = common::random_kernel(&mut rng, ns, na);
    let ce = common::random_ce(&mut rng, lam, n, ng);
    let pi = PolicyTensor::random_positive(&ce, &mut rng);
    (ce, pi)
}

fn space() -> impl Strategy<Value = SegmentSpace> {
    prop_oneof![
        Just(SegmentSpace::Seg),
        Just(SegmentSpace::Trail),
        Just(SegmentSpace::Diag)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalizer_is_bounded(seed: u64, ns in 1usize..5, na in 1usize..4, n in 1usize..5, ng in 1usize..4) {
        let (ce, pi) = instance(seed, ns, na, n, ng);
        let stats = segment_stats(&ce, ce.kernel(), &pi, SegmentSpace::Seg);
        prop_assert!(stats.c > 0.0);
        prop_assert!(stats.c <= (n * (n + 1)) as f64 / 2.0 + 1e-12);
        let nu_total: f64 = stats.nu.iter().sum();
        prop_assert!((nu_total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn den_is_a_sub_probability(seed: u64, ns in 1usize..5, na in 1usize..4, n in 1usize..4, ng in 1usize..4, sp in space()) {
        let (ce, pi) = instance(seed, ns, na, n, ng);
        let stats = segment_stats(&ce, ce.kernel(), &pi, sp);
        let total: f64 = stats.den.iter().sum();
        prop_assert!(stats.num.iter().all(|&v| v >= 0.0));
        prop_assert!(total <= 1.0 + 1e-12);
        if sp == SegmentSpace::Seg {
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_distance_is_a_metric(seed: u64, ns in 1usize..5, na in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_kernel(&mut rng, ns, na);
        let b = common::random_kernel(&mut rng, ns, na);
        let c = common::random_kernel(&mut rng, ns, na);
        let ab = kernel_distance(&a, &b).unwrap();
        prop_assert_eq!(kernel_distance(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - kernel_distance(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
        prop_assert!(ab <= kernel_distance(&a, &c).unwrap() + kernel_distance(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn ce_json_roundtrip(seed: u64, ns in 1usize..5, na in 1usize..4, n in 1usize..4, ng in 1usize..4) {
        let (ce, _) = instance(seed, ns, na, n, ng);
        let back = CommandExtension::from_json(&ce.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, ce);
    }

    #[test]
    fn steps_yield_valid_policies(seed: u64, ns in 1usize..5, na in 1usize..4, n in 1usize..4, ng in 1usize..4, sp in space(), eps in 0.0f64..0.9) {
        let (ce, pi) = instance(seed, ns, na, n, ng);
        let next = eudrl_step(&ce, ce.kernel(), &pi, sp, eps);
        prop_assert!(next.validate().is_ok());
        prop_assert!(next.min_entry() >= eps / na as f64 - 1e-15);
    }

    #[test]
    fn optimal_values_dominate(seed: u64, ns in 1usize..5, na in 1usize..4, n in 1usize..5, ng in 1usize..4) {
        let (ce, pi) = instance(seed, ns, na, n, ng);
        let v = policy_values(&ce, ce.kernel(), &pi);
        let opt = optimal_values(&ce, ce.kernel());
        for x in 0..ce.ext_len() {
            prop_assert!(opt.v[x] >= v.v[x] - 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v.v[x]));
            let backup: f64 = (0..na).map(|a| pi.prob(x, a) * v.q_at(x, a)).sum();
            prop_assert!((backup - v.v[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn continuity_at_value_zero(seed: u64, alpha in 0.0f64..0.5, name in prop::sample::select(vec!["bandit", "z3-walk", "grid"])) {
        let d = domain_by_name(name).unwrap();
        let lam0 = d.kernel(0.0).unwrap();
        let lam = d.kernel(alpha).unwrap();
        let delta = kernel_distance(&lam, &lam0).unwrap();
        let pi = PolicyTensor::random_positive(&d.ce, &mut ChaCha8Rng::seed_from_u64(seed));
        let opt = optimal_values(&d.ce, &lam0);
        let v = policy_values(&d.ce, &lam, &pi);
        for x in 0..d.ce.ext_len() {
            if opt.v[x] == 0.0 {
                let h = d.ce.ext_decode(x).1 as f64;
                prop_assert!(v.v[x] <= delta * h / 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn critical_support_is_stable(seed: u64, alpha in 0.0f64..0.9, sp in space(), name in prop::sample::select(vec!["bandit", "z3-walk", "grid"])) {
        let d = domain_by_name(name).unwrap();
        let r = Reference::new(&d.ce, &d.kernel(0.0).unwrap()).unwrap();
        let lam = d.kernel(alpha).unwrap();
        let mut pi = PolicyTensor::random_positive(&d.ce, &mut ChaCha8Rng::seed_from_u64(seed));
        for _ in 0..4 {
            let stats = segment_stats(&d.ce, &lam, &pi, SegmentSpace::Seg);
            for x in r.critical.states() {
                prop_assert!(stats.den[x] > 0.0 && stats.nu[x] > 0.0);
            }
            pi = eudrl_step(&d.ce, &lam, &pi, sp, 0.0);
        }
    }

    #[test]
    fn f_contracts_toward_fixed_point(x in 0.0f64..=1.0, gamma in 1e-4f64..0.99) {
        let fx = f_map(x, gamma).unwrap();
        let star = 1.0 - gamma;
        prop_assert!((fx - star).abs() <= (x - star).abs() + 1e-15);
    }

    #[test]
    fn h_fixed_points_order(n in prop::sample::select(vec![1usize, 2, 3, 4, 8]), t in 1e-6f64..0.999) {
        let b = h_b0(n) * t;
        let fp = h_fixed_points(b, n).unwrap();
        let peak = (2 * n - 1) as f64 / (2 * n) as f64;
        prop_assert!(fp.lower.value < peak && peak < fp.upper.value);
        prop_assert!((h_map(fp.upper.value, b, n) - fp.upper.value).abs() <= 1e-10);
        prop_assert!((h_map(fp.lower.value, b, n) - fp.lower.value).abs() <= 1e-10);
    }

    #[test]
    fn z_fixed_point_is_attracting(gamma in 1e-3f64..0.5, eps in 0.01f64..0.45, a in 1usize..6, m_frac in 0.0f64..1.0) {
        let m = 1 + ((a - 1) as f64 * m_frac) as usize;
        let star = z_fixed_point(gamma, eps, m, a).unwrap();
        let mut x = 1.0;
        for _ in 0..2000 {
            x = z_map(x, gamma, eps, m, a).unwrap();
        }
        prop_assert!((x - star).abs() < 1e-9);
    }

    #[test]
    fn bound_sequences_are_monotone(delta in 1e-12f64..1e-3, eps in 0.05f64..0.3, name in prop::sample::select(vec!["bandit", "z3-walk"])) {
        let d = domain_by_name(name).unwrap();
        let r = Reference::new(&d.ce, &d.kernel(0.0).unwrap()).unwrap();
        let reports = [
            supp_mu_bounds(&d.ce, &r, delta, AlphaDenominator::NPlusOne).unwrap(),
            eps_bounds(&d.ce, &r, delta, eps, AlphaDenominator::NPlusOne).unwrap(),
        ];
        prop_assert!(reports[0].premises_hold || delta > 1e-6);
        for rep in reports.into_iter().filter(|rep| rep.premises_hold) {
            for w in rep.beta.windows(2) { prop_assert!(w[1] >= w[0]); }
            for w in rep.gamma.windows(2) { prop_assert!(w[1] >= w[0]); }
            for w in rep.kappa.windows(2) { prop_assert!(w[1] >= w[0]); }
        }
    }
}
