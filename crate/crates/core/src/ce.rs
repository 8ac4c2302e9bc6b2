//! Finite MDPs, transition kernels, command extensions and policies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Tolerance on row sums of kernels, policies and initial distributions.
pub const PROB_TOL: f64 = 1e-12;
/// Entries at or below this value are outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Default cap on the number of lifted states in [`k_tuple_lift`].
pub const DEFAULT_LIFT_CAP: usize = 4096;

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &p in v {
        if !p.is_finite() || p < 0.0 {
            return Err(LabError::InvalidDistribution(format!("{what}: entry {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(LabError::InvalidDistribution(format!(
            "{what}: sums to {sum}"
        )));
    }
    Ok(())
}

/// Dense kernel `λ(s'|s,a)` stored as `(s, a, s')`, plus a sparse view of every row.
#[derive(Clone, Debug)]
pub struct TransitionKernel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
    sparse: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for TransitionKernel {
    fn eq(&self, other: &Self) -> bool {
        self.num_states == other.num_states
            && self.num_actions == other.num_actions
            && self.probs == other.probs
    }
}

impl TransitionKernel {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(LabError::ShapeMismatch("empty state or action set".into()));
        }
        if probs.len() != num_states * num_actions * num_states {
            return Err(LabError::ShapeMismatch(format!(
                "kernel has {} entries, expected {}",
                probs.len(),
                num_states * num_actions * num_states
            )));
        }
        let mut sparse = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                let off = (s * num_actions + a) * num_states;
                let row = &probs[off..off + num_states];
                check_distribution(row, &format!("kernel row (s={s}, a={a})"))?;
                sparse.push(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(j, &p)| (j, p))
                        .collect(),
                );
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
            sparse,
        })
    }

    /// Builds a kernel from nested rows indexed `[s][a][s']`.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let ns = rows.len();
        let na = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut probs = Vec::with_capacity(ns * na * ns);
        for (s, by_action) in rows.iter().enumerate() {
            if by_action.len() != na {
                return Err(LabError::ShapeMismatch(format!(
                    "state {s} has {} actions, expected {na}",
                    by_action.len()
                )));
            }
            for (a, row) in by_action.iter().enumerate() {
                if row.len() != ns {
                    return Err(LabError::ShapeMismatch(format!(
                        "row (s={s}, a={a}) has length {}, expected {ns}",
                        row.len()
                    )));
                }
                probs.extend_from_slice(row);
            }
        }
        Self::new(ns, na, probs)
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for s in 0..num_states {
            for a in 0..num_actions {
                for t in 0..num_states {
                    probs.push(f(s, a, t));
                }
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[(s * self.num_actions + a) * self.num_states + next]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let off = (s * self.num_actions + a) * self.num_states;
        &self.probs[off..off + self.num_states]
    }

    /// Nonzero entries of the row `λ(·|s,a)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.sparse[s * self.num_actions + a]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_rows(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|s| {
                (0..self.num_actions)
                    .map(|a| self.row(s, a).to_vec())
                    .collect()
            })
            .collect()
    }
}

/// Max over `(s,a)` of the L1 distance between next-state rows.
pub fn kernel_distance(lam: &TransitionKernel, lam0: &TransitionKernel) -> Result<f64> {
    if lam.num_states != lam0.num_states || lam.num_actions != lam0.num_actions {
        return Err(LabError::ShapeMismatch(
            "kernels have different shapes".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for s in 0..lam.num_states {
        for a in 0..lam.num_actions {
            let d: f64 = lam
                .row(s, a)
                .iter()
                .zip(lam0.row(s, a))
                .map(|(x, y)| (x - y).abs())
                .sum();
            best = best.max(d);
        }
    }
    Ok(best)
}

/// True iff every row has an entry of at least `1 - 1e-12`.
pub fn is_deterministic(lam: &TransitionKernel) -> bool {
    (0..lam.num_states).all(|s| {
        (0..lam.num_actions).all(|a| lam.row(s, a).iter().any(|&p| p >= 1.0 - PROB_TOL))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    kernel: TransitionKernel,
    mu: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(kernel: TransitionKernel, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != kernel.num_states() {
            return Err(LabError::ShapeMismatch(format!(
                "mu has length {}, kernel has {} states",
                mu.len(),
                kernel.num_states()
            )));
        }
        check_distribution(&mu, "initial state distribution")?;
        Ok(Self { kernel, mu })
    }

    pub fn num_states(&self) -> usize {
        self.kernel.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.kernel.num_actions()
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

/// An MDP extended with remaining horizon and goal.
///
/// Extended states `(s, h, g)` with `h` in `1..=N` are the transient states and are
/// indexed densely by [`CommandExtension::ext_index`]. The absorbing states `h = 0`
/// carry no policy and are never stored in policy or value tensors.
///
/// `command_dist` is indexed `(s, h, g)` with `h` in `0..=N`; the `h = 0` slot exists
/// only so that degenerate initializations can be expressed and rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandExtension {
    mdp: FiniteMdp,
    num_goals: usize,
    goal_map: Vec<usize>,
    horizon: usize,
    command_dist: Vec<f64>,
    mu_bar: Vec<f64>,
}

/// Validates and assembles a command extension.
pub fn build_ce(
    mdp: FiniteMdp,
    goal_map: Vec<usize>,
    horizon: usize,
    num_goals: usize,
    command_dist: Vec<f64>,
) -> Result<CommandExtension> {
    let ns = mdp.num_states();
    if horizon == 0 {
        return Err(LabError::ShapeMismatch("horizon N must be at least 1".into()));
    }
    if num_goals == 0 {
        return Err(LabError::ShapeMismatch("goal set is empty".into()));
    }
    if goal_map.len() != ns {
        return Err(LabError::ShapeMismatch(format!(
            "goal map has length {}, expected {ns}",
            goal_map.len()
        )));
    }
    if let Some(&g) = goal_map.iter().find(|&&g| g >= num_goals) {
        return Err(LabError::ShapeMismatch(format!(
            "goal map value {g} outside 0..{num_goals}"
        )));
    }
    let block = (horizon + 1) * num_goals;
    if command_dist.len() != ns * block {
        return Err(LabError::ShapeMismatch(format!(
            "command distribution has {} entries, expected {}",
            command_dist.len(),
            ns * block
        )));
    }
    if let Some(p) = command_dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(LabError::InvalidDistribution(format!(
            "command distribution entry {p}"
        )));
    }
    for s in 0..ns {
        if mdp.mu()[s] <= 0.0 {
            continue;
        }
        let slice = &command_dist[s * block..(s + 1) * block];
        if slice[..num_goals].iter().any(|&p| p > 0.0) {
            return Err(LabError::DegenerateInitialization(format!(
                "state {s} puts command mass on remaining horizon 0"
            )));
        }
        check_distribution(slice, &format!("command distribution at state {s}"))?;
    }
    let mut mu_bar = vec![0.0; ns * horizon * num_goals];
    for s in 0..ns {
        for h in 1..=horizon {
            for g in 0..num_goals {
                mu_bar[(s * horizon + h - 1) * num_goals + g] =
                    command_dist[s * block + h * num_goals + g] * mdp.mu()[s];
            }
        }
    }
    Ok(CommandExtension {
        mdp,
        num_goals,
        goal_map,
        horizon,
        command_dist,
        mu_bar,
    })
}

impl CommandExtension {
    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }

    /// The kernel the extension was built with, conventionally `λ0`.
    pub fn kernel(&self) -> &TransitionKernel {
        self.mdp.kernel()
    }

    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    pub fn num_goals(&self) -> usize {
        self.num_goals
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn goal_map(&self) -> &[usize] {
        &self.goal_map
    }

    pub fn goal_of(&self, s: usize) -> usize {
        self.goal_map[s]
    }

    /// Flat command distribution indexed `(s, h, g)` with `h` in `0..=N`.
    pub fn command_dist(&self) -> &[f64] {
        &self.command_dist
    }

    /// Number of transient extended states, `|S|·N·|G|`.
    pub fn ext_len(&self) -> usize {
        self.num_states() * self.horizon * self.num_goals
    }

    /// Dense index of `(s, h, g)`, `1 <= h <= N`.
    #[inline]
    pub fn ext_index(&self, s: usize, h: usize, g: usize) -> usize {
        debug_assert!(h >= 1 && h <= self.horizon);
        (s * self.horizon + h - 1) * self.num_goals + g
    }

    #[inline]
    pub fn ext_decode(&self, x: usize) -> (usize, usize, usize) {
        let g = x % self.num_goals;
        let rest = x / self.num_goals;
        (rest / self.horizon, rest % self.horizon + 1, g)
    }

    /// Initial distribution `μ̄` on transient extended states.
    pub fn mu_bar(&self) -> &[f64] {
        &self.mu_bar
    }

    /// Same extension with another initial kernel; used for compatible families.
    pub fn with_kernel(&self, kernel: TransitionKernel) -> Result<Self> {
        let mdp = FiniteMdp::new(kernel, self.mdp.mu().to_vec())?;
        build_ce(
            mdp,
            self.goal_map.clone(),
            self.horizon,
            self.num_goals,
            self.command_dist.clone(),
        )
    }

    pub fn to_document(&self) -> CeDocument {
        let ns = self.num_states();
        let block = (self.horizon + 1) * self.num_goals;
        CeDocument {
            num_states: ns,
            num_actions: self.num_actions(),
            kernel: self.kernel().to_rows(),
            mu: self.mdp.mu().to_vec(),
            num_goals: self.num_goals,
            goal_map: self.goal_map.clone(),
            horizon: self.horizon,
            command_dist: (0..ns)
                .map(|s| {
                    (0..=self.horizon)
                        .map(|h| {
                            let off = s * block + h * self.num_goals;
                            self.command_dist[off..off + self.num_goals].to_vec()
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &CeDocument) -> Result<Self> {
        let kernel = TransitionKernel::from_rows(&doc.kernel)?;
        if kernel.num_states() != doc.num_states || kernel.num_actions() != doc.num_actions {
            return Err(LabError::ShapeMismatch(
                "kernel shape disagrees with num_states/num_actions".into(),
            ));
        }
        let mdp = FiniteMdp::new(kernel, doc.mu.clone())?;
        if doc.command_dist.len() != doc.num_states {
            return Err(LabError::ShapeMismatch(
                "command_dist must have one block per state".into(),
            ));
        }
        let mut flat = Vec::new();
        for by_h in &doc.command_dist {
            if by_h.len() != doc.horizon + 1 {
                return Err(LabError::ShapeMismatch(format!(
                    "command_dist needs N+1 = {} horizon slots",
                    doc.horizon + 1
                )));
            }
            for by_g in by_h {
                if by_g.len() != doc.num_goals {
                    return Err(LabError::ShapeMismatch(
                        "command_dist goal dimension mismatch".into(),
                    ));
                }
                flat.extend_from_slice(by_g);
            }
        }
        build_ce(mdp, doc.goal_map.clone(), doc.horizon, doc.num_goals, flat)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CeDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

/// JSON form of a command extension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub mu: Vec<f64>,
    pub num_goals: usize,
    pub goal_map: Vec<usize>,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub command_dist: Vec<Vec<Vec<f64>>>,
}

/// `π(a|s,h,g)` on transient extended states, stored as `(ext, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTensor {
    ext_len: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTensor {
    pub fn uniform(ce: &CommandExtension) -> Self {
        let na = ce.num_actions();
        Self {
            ext_len: ce.ext_len(),
            num_actions: na,
            probs: vec![1.0 / na as f64; ce.ext_len() * na],
        }
    }

    pub fn from_probs(ce: &CommandExtension, probs: Vec<f64>) -> Result<Self> {
        let p = Self {
            ext_len: ce.ext_len(),
            num_actions: ce.num_actions(),
            probs,
        };
        p.validate()?;
        Ok(p)
    }

    /// Random policy with every entry strictly positive.
    pub fn random_positive<R: Rng + ?Sized>(ce: &CommandExtension, rng: &mut R) -> Self {
        let na = ce.num_actions();
        let mut probs = Vec::with_capacity(ce.ext_len() * na);
        for _ in 0..ce.ext_len() {
            let w: Vec<f64> = (0..na).map(|_| rng.gen_range(0.02..1.0)).collect();
            let z: f64 = w.iter().sum();
            probs.extend(w.iter().map(|x| x / z));
        }
        Self {
            ext_len: ce.ext_len(),
            num_actions: na,
            probs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.len() != self.ext_len * self.num_actions {
            return Err(LabError::ShapeMismatch(format!(
                "policy has {} entries, expected {}",
                self.probs.len(),
                self.ext_len * self.num_actions
            )));
        }
        for x in 0..self.ext_len {
            check_distribution(self.dist(x), &format!("policy at extended state {x}"))?;
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn ext_len(&self) -> usize {
        self.ext_len
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.num_actions + a]
    }

    pub fn dist(&self, x: usize) -> &[f64] {
        &self.probs[x * self.num_actions..(x + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn min_entry(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn from_raw(ext_len: usize, num_actions: usize, probs: Vec<f64>) -> Self {
        Self {
            ext_len,
            num_actions,
            probs,
        }
    }
}

/// Built-in parametric kernel families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayFamily {
    BoundaryA,
    BoundaryC,
    DeterministicA,
    DeterministicC,
    Bandit,
    Z3Walk,
    Grid,
    GridLifted { k: usize },
}

/// A continuous path `α ↦ λ_α` in kernel space; `S`, `A`, `μ̄`, `ρ`, `N` stay fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelRay {
    family: RayFamily,
}

impl KernelRay {
    pub fn new(family: RayFamily) -> Self {
        Self { family }
    }

    pub fn family(&self) -> RayFamily {
        self.family
    }

    pub fn eval(&self, alpha: f64) -> Result<TransitionKernel> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(LabError::DomainError(format!(
                "ray parameter {alpha} outside [0, 1]"
            )));
        }
        crate::domains::ray_kernel(self.family, alpha)
    }

    /// Lipschitz constant of `α ↦ λ_α` in the max-row L1 norm.
    pub fn lipschitz(&self) -> f64 {
        2.0
    }

    /// Kernel distance between `λ_α` and `λ_0`.
    pub fn delta(&self, alpha: f64) -> Result<f64> {
        kernel_distance(&self.eval(alpha)?, &self.eval(0.0)?)
    }
}

/// Index of the tuple `(x_1, …, x_K)` with `x_1` most significant.
pub fn tuple_index(tuple: &[usize], num_states: usize) -> usize {
    tuple.iter().fold(0, |acc, &x| acc * num_states + x)
}

pub fn tuple_decode(mut idx: usize, num_states: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = idx % num_states;
        idx /= num_states;
    }
    out
}

/// Kernel on `K`-tuples: `((x_1..x_K), a) ↦ (x_2..x_K, x')` with probability `λ(x'|x_K,a)`.
pub fn lift_kernel(kernel: &TransitionKernel, k: usize, cap: usize) -> Result<TransitionKernel> {
    if k == 0 {
        return Err(LabError::DomainError("tuple length K must be at least 1".into()));
    }
    let ns = kernel.num_states();
    let lifted = ns
        .checked_pow(k as u32)
        .filter(|&n| n <= cap)
        .ok_or_else(|| {
            LabError::CapacityExceeded(format!("{ns}^{k} lifted states exceed cap {cap}"))
        })?;
    let na = kernel.num_actions();
    let mut probs = vec![0.0; lifted * na * lifted];
    for idx in 0..lifted {
        let tuple = tuple_decode(idx, ns, k);
        let last = tuple[k - 1];
        let mut next = tuple.clone();
        next.rotate_left(1);
        for a in 0..na {
            for &(x, p) in kernel.successors(last, a) {
                next[k - 1] = x;
                probs[(idx * na + a) * lifted + tuple_index(&next, ns)] += p;
            }
        }
    }
    TransitionKernel::new(lifted, na, probs)
}

/// MDP on `K`-tuples of states. The history window is padded with copies of the
/// start state, so the lifted initial distribution lives on constant tuples.
pub fn k_tuple_lift(mdp: &FiniteMdp, k: usize, cap: usize) -> Result<FiniteMdp> {
    let kernel = lift_kernel(mdp.kernel(), k, cap)?;
    let ns = mdp.num_states();
    let mut mu = vec![0.0; kernel.num_states()];
    for (s, &p) in mdp.mu().iter().enumerate() {
        mu[tuple_index(&vec![s; k], ns)] = p;
    }
    FiniteMdp::new(kernel, mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandit_kernel(alpha: f64) -> TransitionKernel {
        TransitionKernel::from_rows(&[
            vec![vec![1.0 - alpha, alpha], vec![alpha, 1.0 - alpha]],
            vec![vec![alpha, 1.0 - alpha], vec![1.0 - alpha, alpha]],
        ])
        .unwrap()
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = TransitionKernel::new(1, 1, vec![0.5]).unwrap_err();
        assert!(matches!(err, LabError::InvalidDistribution(_)));
        let err = TransitionKernel::new(2, 1, vec![1.5, -0.5, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, LabError::InvalidDistribution(_)));
    }

    #[test]
    fn distance_examples() {
        let k0 = bandit_kernel(0.0);
        assert_eq!(kernel_distance(&k0, &k0).unwrap(), 0.0);
        let d = kernel_distance(&bandit_kernel(0.1), &k0).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        let other = TransitionKernel::new(1, 1, vec![1.0]).unwrap();
        assert!(kernel_distance(&other, &k0).is_err());
    }

    #[test]
    fn two_point_perturbation_distance_is_delta() {
        let delta = 0.3;
        let k0 = TransitionKernel::from_rows(&vec![vec![vec![1.0, 0.0, 0.0]]; 3]).unwrap();
        let k = TransitionKernel::from_rows(&vec![
            vec![vec![1.0 - delta / 2.0, delta / 2.0, 0.0]];
            3
        ])
        .unwrap();
        assert!((kernel_distance(&k, &k0).unwrap() - delta).abs() < 1e-15);
    }

    #[test]
    fn determinism() {
        assert!(is_deterministic(&bandit_kernel(0.0)));
        assert!(!is_deterministic(&bandit_kernel(0.5)));
        let id = TransitionKernel::from_fn(3, 2, |s, _, t| (s == t) as u8 as f64).unwrap();
        assert!(is_deterministic(&id));
    }

    fn bandit_ce(command: Vec<f64>) -> Result<CommandExtension> {
        let mdp = FiniteMdp::new(bandit_kernel(0.0), vec![1.0, 0.0])?;
        build_ce(mdp, vec![0, 1], 1, 2, command)
    }

    #[test]
    fn bandit_extension_has_two_initial_states() {
        let ce = bandit_ce(vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]).unwrap();
        let support: Vec<_> = (0..ce.ext_len())
            .filter(|&x| ce.mu_bar()[x] > 0.0)
            .map(|x| ce.ext_decode(x))
            .collect();
        assert_eq!(support, vec![(0, 1, 0), (0, 1, 1)]);
    }

    #[test]
    fn mass_on_zero_horizon_is_degenerate() {
        let err = bandit_ce(vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, LabError::DegenerateInitialization(_)));
        let err = bandit_ce(vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, LabError::ShapeMismatch(_)));
    }

    #[test]
    fn ext_index_roundtrip() {
        let ce = bandit_ce(vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]).unwrap();
        for x in 0..ce.ext_len() {
            let (s, h, g) = ce.ext_decode(x);
            assert_eq!(ce.ext_index(s, h, g), x);
        }
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let ce = bandit_ce(vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]).unwrap();
        let back = CommandExtension::from_json(&ce.to_json().unwrap()).unwrap();
        assert_eq!(back, ce);
    }

    #[test]
    fn lift_with_k1_is_identity() {
        let mdp = FiniteMdp::new(bandit_kernel(0.25), vec![0.3, 0.7]).unwrap();
        let lifted = k_tuple_lift(&mdp, 1, DEFAULT_LIFT_CAP).unwrap();
        assert_eq!(lifted, mdp);
    }

    #[test]
    fn lift_k2_matches_window_shift() {
        let lam = bandit_kernel(0.25);
        let mdp = FiniteMdp::new(lam.clone(), vec![1.0, 0.0]).unwrap();
        let lifted = k_tuple_lift(&mdp, 2, DEFAULT_LIFT_CAP).unwrap();
        assert_eq!(lifted.num_states(), 4);
        assert_eq!(lifted.mu(), &[1.0, 0.0, 0.0, 0.0]);
        for x1 in 0..2 {
            for x2 in 0..2 {
                for a in 0..2 {
                    for y1 in 0..2 {
                        for y2 in 0..2 {
                            let want = if y1 == x2 { lam.prob(x2, a, y2) } else { 0.0 };
                            let got = lifted.kernel().prob(x1 * 2 + x2, a, y1 * 2 + y2);
                            assert_eq!(got, want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lift_respects_capacity() {
        let mdp = FiniteMdp::new(bandit_kernel(0.0), vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            k_tuple_lift(&mdp, 5, 16),
            Err(LabError::CapacityExceeded(_))
        ));
    }

    #[test]
    fn uniform_policy_is_valid() {
        let ce = bandit_ce(vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]).unwrap();
        PolicyTensor::uniform(&ce).validate().unwrap();
        let bad = PolicyTensor::from_probs(&ce, vec![0.5; 3]);
        assert!(bad.is_err());
    }
}
