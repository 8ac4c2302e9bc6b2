//! Built-in desk-scale environments, each a command extension plus a kernel ray.

use serde::{Deserialize, Serialize};

use crate::ce::{
    build_ce, lift_kernel, tuple_decode, tuple_index, CommandExtension, FiniteMdp, KernelRay,
    RayFamily, TransitionKernel, DEFAULT_LIFT_CAP,
};
use crate::error::{LabError, Result};

/// Free cells of the 3×3 grid in row-major order; `(1, 2)` is a wall.
pub const GRID_CELLS: [(usize, usize); 8] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (1, 0),
    (1, 1),
    (2, 0),
    (2, 1),
    (2, 2),
];

/// Grid goal cell `(0, 2)`.
pub const GRID_GOAL: usize = 2;

/// Grid moves: right, left, up, down.
pub const GRID_MOVES: [(isize, isize); 4] = [(0, 1), (0, -1), (-1, 0), (1, 0)];

/// Tuple length of the lifted grid.
pub const ODT_TUPLE_LEN: usize = 3;

pub fn grid_cell(pos: (usize, usize)) -> Option<usize> {
    GRID_CELLS.iter().position(|&c| c == pos)
}

fn grid_target(s: usize, a: usize) -> usize {
    let (r, c) = GRID_CELLS[s];
    let (dr, dc) = GRID_MOVES[a];
    let (nr, nc) = (r as isize + dr, c as isize + dc);
    if !(0..3).contains(&nr) || !(0..3).contains(&nc) {
        return s;
    }
    grid_cell((nr as usize, nc as usize)).unwrap_or(s)
}

fn grid_kernel(alpha: f64) -> Result<TransitionKernel> {
    let (ns, na) = (GRID_CELLS.len(), GRID_MOVES.len());
    let mut probs = vec![0.0; ns * na * ns];
    for s in 0..ns {
        let mut available: Vec<usize> = (0..na).map(|a| grid_target(s, a)).collect();
        available.sort_unstable();
        available.dedup();
        for a in 0..na {
            let target = grid_target(s, a);
            let row = &mut probs[(s * na + a) * ns..(s * na + a + 1) * ns];
            let others: Vec<usize> = available.iter().cloned().filter(|&t| t != target).collect();
            if others.is_empty() {
                row[target] = 1.0;
                continue;
            }
            row[target] = 1.0 - alpha;
            for t in &others {
                row[*t] = alpha / others.len() as f64;
            }
        }
    }
    TransitionKernel::new(ns, na, probs)
}

fn three_state_rows(family: RayFamily, alpha: f64) -> Vec<Vec<f64>> {
    let (a, b) = (1.0 - alpha, alpha);
    match family {
        RayFamily::BoundaryA => vec![
            vec![a, b / 4.0, 3.0 * b / 4.0],
            vec![3.0 * b / 4.0, a, b / 4.0],
            vec![0.5, 0.5, 0.0],
        ],
        RayFamily::BoundaryC => vec![
            vec![a, 3.0 * b / 4.0, b / 4.0],
            vec![b / 4.0, a, 3.0 * b / 4.0],
            vec![0.5, 0.5, 0.0],
        ],
        RayFamily::DeterministicA => vec![
            vec![a, b, 0.0],
            vec![0.0, a, b],
            vec![b, a, 0.0],
        ],
        RayFamily::DeterministicC => vec![
            vec![a, 0.0, b],
            vec![b, a, 0.0],
            vec![0.0, a, b],
        ],
        _ => unreachable!(),
    }
}

/// Kernel of a built-in family at ray parameter `alpha`.
pub fn ray_kernel(family: RayFamily, alpha: f64) -> Result<TransitionKernel> {
    match family {
        RayFamily::BoundaryA
        | RayFamily::BoundaryC
        | RayFamily::DeterministicA
        | RayFamily::DeterministicC => {
            let identity = |s: usize| -> Vec<Vec<f64>> {
                (0..3)
                    .map(|_| (0..3).map(|t| (t == s) as u8 as f64).collect())
                    .collect()
            };
            TransitionKernel::from_rows(&[three_state_rows(family, alpha), identity(1), identity(2)])
        }
        RayFamily::Bandit => TransitionKernel::from_rows(&[
            vec![vec![1.0 - alpha, alpha], vec![alpha, 1.0 - alpha]],
            vec![vec![alpha, 1.0 - alpha], vec![1.0 - alpha, alpha]],
        ]),
        RayFamily::Z3Walk => TransitionKernel::from_fn(3, 2, |s, a, t| {
            let step = (s + 1) % 3;
            let (stay, go) = if a == 0 {
                (1.0 - alpha, alpha)
            } else {
                (alpha, 1.0 - alpha)
            };
            (t == s) as u8 as f64 * stay + (t == step) as u8 as f64 * go
        }),
        RayFamily::Grid => grid_kernel(alpha),
        RayFamily::GridLifted { k } => lift_kernel(&grid_kernel(alpha)?, k, DEFAULT_LIFT_CAP),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreeStateExample {
    /// Goals `{0, 2}` with probability ½ each.
    Boundary,
    /// Goals uniform over all three states.
    Deterministic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ray {
    A,
    C,
}

/// A reference value used by regression tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub quantity: String,
    pub value: Vec<f64>,
    /// `true` for values printed with the example, `false` for values derived by hand
    /// or by brute force.
    pub published: bool,
}

fn truth(quantity: &str, value: Vec<f64>, published: bool) -> GroundTruth {
    GroundTruth {
        quantity: quantity.into(),
        value,
        published,
    }
}

/// A named built-in environment.
#[derive(Clone, Debug)]
pub struct Domain {
    pub name: String,
    pub ce: CommandExtension,
    pub ray: KernelRay,
    /// `δ = delta_per_alpha·α` along the ray.
    pub delta_per_alpha: f64,
    pub ground_truth: Vec<GroundTruth>,
}

impl Domain {
    pub fn kernel(&self, alpha: f64) -> Result<TransitionKernel> {
        self.ray.eval(alpha)
    }

    /// Ray parameter for a target kernel distance.
    pub fn alpha_for_delta(&self, delta: f64) -> f64 {
        delta / self.delta_per_alpha
    }
}

fn uniform_commands(ns: usize, n: usize, ng: usize) -> Vec<f64> {
    let block = (n + 1) * ng;
    let mut cd = vec![0.0; ns * block];
    for s in 0..ns {
        for j in ng..block {
            cd[s * block + j] = 1.0 / (n * ng) as f64;
        }
    }
    cd
}

pub fn three_state_rays(example: ThreeStateExample, ray: Ray) -> Result<Domain> {
    let family = match (example, ray) {
        (ThreeStateExample::Boundary, Ray::A) => RayFamily::BoundaryA,
        (ThreeStateExample::Boundary, Ray::C) => RayFamily::BoundaryC,
        (ThreeStateExample::Deterministic, Ray::A) => RayFamily::DeterministicA,
        (ThreeStateExample::Deterministic, Ray::C) => RayFamily::DeterministicC,
    };
    let ray_k = KernelRay::new(family);
    let mdp = FiniteMdp::new(ray_k.eval(0.0)?, vec![1.0, 0.0, 0.0])?;
    let goals = match example {
        ThreeStateExample::Boundary => [0.5, 0.0, 0.5],
        ThreeStateExample::Deterministic => [1.0 / 3.0; 3],
    };
    let mut cd = Vec::with_capacity(3 * 2 * 3);
    for _ in 0..3 {
        cd.extend([0.0; 3]);
        cd.extend(goals);
    }
    let ce = build_ce(mdp, vec![0, 1, 2], 1, 3, cd)?;
    let suffix = match ray {
        Ray::A => "a",
        Ray::C => "c",
    };
    let (name, ground_truth) = match (example, ray) {
        (ThreeStateExample::Boundary, _) => {
            let mut gt = vec![
                truth("j_pi2_alpha0", vec![7.0 / 16.0], true),
                truth("pi2_g0_alpha0", vec![0.75, 0.0, 0.25], false),
            ];
            match ray {
                Ray::A => {
                    gt.push(truth("j_pi2_limit", vec![9.0 / 19.0], true));
                    gt.push(truth("pi2_g0_limit", vec![17.0 / 19.0, 0.0, 2.0 / 19.0], true));
                }
                Ray::C => gt.push(truth("j_pi2_limit", vec![6.0 / 13.0], true)),
            }
            (format!("example1-{suffix}"), gt)
        }
        (ThreeStateExample::Deterministic, _) => {
            let third = 1.0 / 3.0;
            let mut gt = vec![
                truth("j_pi2_alpha0", vec![2.0 / 3.0], true),
                truth("j_pi2_limit", vec![2.0 / 3.0], true),
                truth("pi2_g0_alpha0", vec![1.0, 0.0, 0.0], true),
                truth("pi2_g1_alpha0", vec![0.0, 0.5, 0.5], true),
                truth("pi2_g2_alpha0", vec![third, third, third], true),
                truth("pi2_g0_limit", vec![1.0, 0.0, 0.0], true),
            ];
            match ray {
                Ray::A => {
                    gt.push(truth("pi2_g1_limit", vec![0.0, 0.75, 0.25], true));
                    gt.push(truth("pi2_g2_limit", vec![0.0, 1.0, 0.0], false));
                }
                Ray::C => {
                    gt.push(truth("pi2_g1_limit", vec![0.0, third, 2.0 * third], true));
                    gt.push(truth("pi2_g2_limit", vec![0.6, 0.0, 0.4], true));
                }
            }
            (format!("example2-{suffix}"), gt)
        }
    };
    Ok(Domain {
        name,
        ce,
        ray: ray_k,
        delta_per_alpha: 2.0,
        ground_truth,
    })
}

pub fn bandit() -> Result<Domain> {
    let ray = KernelRay::new(RayFamily::Bandit);
    let mdp = FiniteMdp::new(ray.eval(0.0)?, vec![1.0, 0.0])?;
    let cd = vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5];
    Ok(Domain {
        name: "bandit".into(),
        ce: build_ce(mdp, vec![0, 1], 1, 2, cd)?,
        ray,
        delta_per_alpha: 2.0,
        ground_truth: vec![truth("optimal_set_sizes", vec![1.0], true)],
    })
}

pub fn z3_walk() -> Result<Domain> {
    let ray = KernelRay::new(RayFamily::Z3Walk);
    let n = 8;
    let mdp = FiniteMdp::new(ray.eval(0.0)?, vec![1.0 / 3.0; 3])?;
    Ok(Domain {
        name: "z3-walk".into(),
        ce: build_ce(mdp, vec![0, 1, 2], n, 3, uniform_commands(3, n, 3))?,
        ray,
        delta_per_alpha: 2.0,
        ground_truth: vec![truth("mu_bar", vec![1.0 / 72.0], false)],
    })
}

pub fn gridworld_3x3() -> Result<Domain> {
    let ray = KernelRay::new(RayFamily::Grid);
    let (ns, n) = (GRID_CELLS.len(), 4);
    let mdp = FiniteMdp::new(ray.eval(0.0)?, vec![1.0 / ns as f64; ns])?;
    Ok(Domain {
        name: "grid".into(),
        ce: build_ce(mdp, (0..ns).collect(), n, ns, uniform_commands(ns, n, ns))?,
        ray,
        delta_per_alpha: 2.0,
        ground_truth: vec![truth("mu_bar", vec![1.0 / 256.0], false)],
    })
}

/// Grid lifted to 3-tuples with goal 1 on tuples ending at `(0, 2)` and a single
/// initial extended state `((start, start, start), 4, 1)`.
pub fn odt_gridworld(start: (usize, usize)) -> Result<Domain> {
    let cell = grid_cell(start)
        .ok_or_else(|| LabError::DomainError(format!("{start:?} is not a free grid cell")))?;
    let k = ODT_TUPLE_LEN;
    let ray = KernelRay::new(RayFamily::GridLifted { k });
    let kernel = ray.eval(0.0)?;
    let (ns, n, ng) = (kernel.num_states(), 4, 2);
    let base = GRID_CELLS.len();
    let init = tuple_index(&vec![cell; k], base);
    let mut mu = vec![0.0; ns];
    mu[init] = 1.0;
    let goal_map = (0..ns)
        .map(|x| (tuple_decode(x, base, k)[k - 1] == GRID_GOAL) as usize)
        .collect();
    let block = (n + 1) * ng;
    let mut cd = vec![0.0; ns * block];
    cd[init * block + n * ng + 1] = 1.0;
    let mdp = FiniteMdp::new(kernel, mu)?;
    let paths = if start == (2, 2) { 1.0 } else { 3.0 };
    Ok(Domain {
        name: format!("odt-grid-{}{}", start.0, start.1),
        ce: build_ce(mdp, goal_map, n, ng, cd)?,
        ray,
        delta_per_alpha: 2.0,
        ground_truth: vec![truth("shortest_paths_to_goal", vec![paths], start == (2, 2))],
    })
}

/// Names accepted by [`domain_by_name`].
pub const DOMAIN_NAMES: [&str; 9] = [
    "example1-a",
    "example1-c",
    "example2-a",
    "example2-c",
    "bandit",
    "z3-walk",
    "grid",
    "odt-grid-22",
    "odt-grid-20",
];

pub fn domain_by_name(name: &str) -> Result<Domain> {
    match name {
        "example1-a" => three_state_rays(ThreeStateExample::Boundary, Ray::A),
        "example1-c" => three_state_rays(ThreeStateExample::Boundary, Ray::C),
        "example2-a" => three_state_rays(ThreeStateExample::Deterministic, Ray::A),
        "example2-c" => three_state_rays(ThreeStateExample::Deterministic, Ray::C),
        "bandit" => bandit(),
        "z3-walk" => z3_walk(),
        "grid" => gridworld_3x3(),
        "odt-grid-22" => odt_gridworld((2, 2)),
        "odt-grid-20" => odt_gridworld((2, 0)),
        other => Err(LabError::UnknownDomain(other.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce::{is_deterministic, kernel_distance};

    #[test]
    fn boundary_rows() {
        let k = ray_kernel(RayFamily::BoundaryA, 0.0).unwrap();
        assert_eq!(k.row(0, 2), &[0.5, 0.5, 0.0]);
        let k = ray_kernel(RayFamily::BoundaryA, 1.0).unwrap();
        assert_eq!(k.row(0, 0), &[0.0, 0.25, 0.75]);
        assert_eq!(k.row(0, 1), &[0.75, 0.0, 0.25]);
    }

    #[test]
    fn deterministic_example_at_zero() {
        for f in [RayFamily::DeterministicA, RayFamily::DeterministicC] {
            let k = ray_kernel(f, 0.0).unwrap();
            assert!(is_deterministic(&k));
            assert_eq!(k.row(0, 2), &[0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn bandit_distance_is_two_alpha() {
        let d = bandit().unwrap();
        let dist = kernel_distance(&d.kernel(0.05).unwrap(), &d.kernel(0.0).unwrap()).unwrap();
        assert!((dist - 0.1).abs() < 1e-15);
    }

    #[test]
    fn grid_kernel_shape() {
        let k = grid_kernel(0.0).unwrap();
        assert!(is_deterministic(&k));
        let start = grid_cell((2, 2)).unwrap();
        assert_eq!(k.successors(start, 2), &[(start, 1.0)]);
        assert_eq!(k.successors(start, 1), &[(grid_cell((2, 1)).unwrap(), 1.0)]);
        let k = grid_kernel(0.3).unwrap();
        let row = k.row(start, 1);
        assert!((row[grid_cell((2, 1)).unwrap()] - 0.7).abs() < 1e-15);
        assert!((row[start] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn z3_mu_bar_is_uniform() {
        let d = z3_walk().unwrap();
        assert!(d.ce.mu_bar().iter().all(|&m| (m - 1.0 / 72.0).abs() < 1e-16));
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(domain_by_name("nope"), Err(LabError::UnknownDomain(_))));
        for name in DOMAIN_NAMES {
            assert_eq!(domain_by_name(name).unwrap().name, name);
        }
    }
}
