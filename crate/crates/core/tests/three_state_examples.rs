use udrl_lab::ce::PolicyTensor;
use udrl_lab::domains::{three_state_rays, Domain, Ray, ThreeStateExample};
use udrl_lab::recursion::eudrl_step;
use udrl_lab::seg::SegmentSpace;
use udrl_lab::values::goal_reaching_objective;

fn second_iterate(d: &Domain, alpha: f64) -> (PolicyTensor, f64) {
    let lam = d.kernel(alpha).unwrap();
    let mut pi = PolicyTensor::uniform(&d.ce);
    for _ in 0..2 {
        pi = eudrl_step(&d.ce, &lam, &pi, SegmentSpace::Seg, 0.0);
    }
    let j = goal_reaching_objective(&d.ce, &lam, &pi);
    (pi, j)
}

fn column(d: &Domain, pi: &PolicyTensor, g: usize) -> Vec<f64> {
    pi.dist(d.ce.ext_index(0, 1, g)).to_vec()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn truth(d: &Domain, q: &str) -> Vec<f64> {
    d.ground_truth
        .iter()
        .find(|t| t.quantity == q)
        .unwrap_or_else(|| panic!("{} lacks {q}", d.name))
        .value
        .clone()
}

#[test]
fn boundary_example_values() {
    for ray in [Ray::A, Ray::C] {
        let d = three_state_rays(ThreeStateExample::Boundary, ray).unwrap();
        let (pi, j) = second_iterate(&d, 0.0);
        assert!((j - 7.0 / 16.0).abs() <= 1e-12, "{j}");
        assert!(close(&column(&d, &pi, 0), &truth(&d, "pi2_g0_alpha0"), 1e-12));
        let (pi, j) = second_iterate(&d, 1e-6);
        assert!((j - truth(&d, "j_pi2_limit")[0]).abs() <= 1e-4, "{ray:?} {j}");
        if ray == Ray::A {
            assert!(close(&column(&d, &pi, 0), &truth(&d, "pi2_g0_limit"), 1e-4));
        }
    }
}

#[test]
fn deterministic_example_values() {
    for ray in [Ray::A, Ray::C] {
        let d = three_state_rays(ThreeStateExample::Deterministic, ray).unwrap();
        for (alpha, tag) in [(0.0, "alpha0"), (1e-6, "limit")] {
            let (pi, j) = second_iterate(&d, alpha);
            assert!((j - 2.0 / 3.0).abs() <= 1e-4, "{ray:?} {alpha} {j}");
            for g in 0..3 {
                let want = truth(&d, &format!("pi2_g{g}_{tag}"));
                let got = column(&d, &pi, g);
                assert!(close(&got, &want, 1e-4), "{ray:?} α={alpha} g={g}: {got:?} vs {want:?}");
            }
        }
    }
}
