#![allow(dead_code)]

use rand::Rng;
use udrl_lab::ce::{build_ce, CommandExtension, FiniteMdp, TransitionKernel};

fn random_simplex<R: Rng>(rng: &mut R, n: usize, sparse: bool) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                if sparse && rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(0.01..1.0)
                }
            })
            .collect();
        let z: f64 = v.iter().sum();
        if z > 0.0 {
            v.iter_mut().for_each(|p| *p /= z);
            return v;
        }
    }
}

pub fn random_kernel<R: Rng>(rng: &mut R, ns: usize, na: usize) -> TransitionKernel {
    let rows: Vec<Vec<Vec<f64>>> = (0..ns)
        .map(|_| (0..na).map(|_| random_simplex(rng, ns, true)).collect())
        .collect();
    TransitionKernel::from_rows(&rows).unwrap()
}

pub fn random_deterministic_kernel<R: Rng>(rng: &mut R, ns: usize, na: usize) -> TransitionKernel {
    let targets: Vec<usize> = (0..ns * na).map(|_| rng.gen_range(0..ns)).collect();
    TransitionKernel::from_fn(ns, na, |s, a, t| (targets[s * na + a] == t) as u8 as f64).unwrap()
}

/// Random initial distribution, goal map and command distribution around `kernel`.
pub fn random_ce<R: Rng>(
    rng: &mut R,
    kernel: TransitionKernel,
    horizon: usize,
    num_goals: usize,
) -> CommandExtension {
    let ns = kernel.num_states();
    let mu = random_simplex(rng, ns, true);
    let goal_map = (0..ns).map(|_| rng.gen_range(0..num_goals)).collect();
    let block = (horizon + 1) * num_goals;
    let mut cd = vec![0.0; ns * block];
    for s in 0..ns {
        let w = random_simplex(rng, horizon * num_goals, true);
        cd[s * block + num_goals..(s + 1) * block].copy_from_slice(&w);
    }
    build_ce(FiniteMdp::new(kernel, mu).unwrap(), goal_map, horizon, num_goals, cd).unwrap()
}
