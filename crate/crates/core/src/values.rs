//! Policy evaluation, optimal values, the goal-reaching objective, optimal-action
//! sets and critical states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ce::{is_deterministic, CommandExtension, PolicyTensor, TransitionKernel, SUPPORT_TOL};
use crate::error::{LabError, Result};
use crate::seg::{segment_stats, SegmentSpace, SegmentStats};

/// `V(s,h,g)` indexed by extended state and `Q((s,h,g),a)` stored as `(ext, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTables {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub num_actions: usize,
}

impl ValueTables {
    #[inline]
    pub fn q_at(&self, x: usize, a: usize) -> f64 {
        self.q[x * self.num_actions + a]
    }
}

fn backward(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    mut backup: impl FnMut(usize, &[f64]) -> f64,
) -> ValueTables {
    let (ns, na, ng, n) = (
        ce.num_states(),
        ce.num_actions(),
        ce.num_goals(),
        ce.horizon(),
    );
    let mut v = vec![0.0; ce.ext_len()];
    let mut q = vec![0.0; ce.ext_len() * na];
    for h in 1..=n {
        for s in 0..ns {
            for g in 0..ng {
                let x = ce.ext_index(s, h, g);
                for a in 0..na {
                    q[x * na + a] = lam
                        .successors(s, a)
                        .iter()
                        .map(|&(t, p)| {
                            let next = if h == 1 {
                                (ce.goal_of(t) == g) as u8 as f64
                            } else {
                                v[ce.ext_index(t, h - 1, g)]
                            };
                            p * next
                        })
                        .sum();
                }
                v[x] = backup(x, &q[x * na..(x + 1) * na]);
            }
        }
    }
    ValueTables {
        v,
        q,
        num_actions: na,
    }
}

/// Exact `V^π` and `Q^π` by backward induction over the remaining horizon.
pub fn policy_values(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
) -> ValueTables {
    backward(ce, lam, |x, q| {
        q.iter().zip(pi.dist(x)).map(|(q, p)| q * p).sum()
    })
}

/// `V*` and `Q*` with a max backup.
pub fn optimal_values(ce: &CommandExtension, lam: &TransitionKernel) -> ValueTables {
    backward(ce, lam, |_, q| q.iter().cloned().fold(0.0, f64::max))
}

/// `J = Σ μ̄·V^π`.
pub fn goal_reaching_objective(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
) -> f64 {
    objective_from_values(ce, &policy_values(ce, lam, pi))
}

pub fn objective_from_values(ce: &CommandExtension, values: &ValueTables) -> f64 {
    ce.mu_bar().iter().zip(&values.v).map(|(m, v)| m * v).sum()
}

/// `O(s̄)` on `supp den_{λ0,π0}`; `None` outside.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalActionMap {
    pub sets: Vec<Option<Vec<usize>>>,
}

impl OptimalActionMap {
    pub fn get(&self, x: usize) -> Option<&[usize]> {
        self.sets[x].as_deref()
    }
}

/// Boolean mask of `S̄_{λ0}` over extended states.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalStateSet {
    pub mask: Vec<bool>,
}

impl CriticalStateSet {
    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(x, _)| x)
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: usize) -> bool {
        self.mask[x]
    }
}

fn actions_from_stats(stats: &SegmentStats) -> OptimalActionMap {
    let na = stats.num_actions;
    let sets = stats
        .den
        .iter()
        .enumerate()
        .map(|(x, &d)| {
            (d > SUPPORT_TOL).then(|| {
                (0..na)
                    .filter(|&a| stats.num_at(x, a) > SUPPORT_TOL)
                    .collect()
            })
        })
        .collect();
    OptimalActionMap { sets }
}

pub fn optimal_actions(
    ce: &CommandExtension,
    lam0: &TransitionKernel,
    pi0: &PolicyTensor,
) -> Result<OptimalActionMap> {
    if !is_deterministic(lam0) {
        return Err(LabError::NotDeterministic);
    }
    Ok(actions_from_stats(&segment_stats(
        ce,
        lam0,
        pi0,
        SegmentSpace::Seg,
    )))
}

fn critical_mask(stats: &SegmentStats) -> Vec<bool> {
    stats
        .den
        .iter()
        .zip(&stats.nu)
        .map(|(&d, &v)| d > SUPPORT_TOL && v > SUPPORT_TOL)
        .collect()
}

/// `S̄_{λ0} = supp den ∩ supp ν` under the uniform policy, re-checked with one
/// random positive policy.
pub fn critical_states(ce: &CommandExtension, lam0: &TransitionKernel) -> Result<CriticalStateSet> {
    if !is_deterministic(lam0) {
        return Err(LabError::NotDeterministic);
    }
    let uniform = PolicyTensor::uniform(ce);
    let mask = critical_mask(&segment_stats(ce, lam0, &uniform, SegmentSpace::Seg));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c417);
    let other = PolicyTensor::random_positive(ce, &mut rng);
    let check = critical_mask(&segment_stats(ce, lam0, &other, SegmentSpace::Seg));
    if check != mask {
        return Err(LabError::Inconsistent(
            "critical states depend on the positive policy used".into(),
        ));
    }
    Ok(CriticalStateSet { mask })
}

/// Critical states together with their optimal-action sets under a deterministic `λ0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub kernel: TransitionKernel,
    pub critical: CriticalStateSet,
    pub actions: OptimalActionMap,
    pub optimal: ValueTables,
}

impl Reference {
    pub fn new(ce: &CommandExtension, lam0: &TransitionKernel) -> Result<Self> {
        let critical = critical_states(ce, lam0)?;
        let actions = optimal_actions(ce, lam0, &PolicyTensor::uniform(ce))?;
        Ok(Self {
            kernel: lam0.clone(),
            critical,
            actions,
            optimal: optimal_values(ce, lam0),
        })
    }

    /// Distinct `|O(s̄)|` values over the critical states.
    pub fn optimal_set_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self
            .critical
            .states()
            .filter_map(|x| self.actions.get(x).map(|o| o.len()))
            .collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }

    pub fn optimal_mass(&self, pi: &PolicyTensor) -> f64 {
        optimal_mass(pi, &self.actions, &self.critical)
    }
}

/// `min_{s̄∈S̄} π(O(s̄)|s̄)`; an empty critical set gives 1.
pub fn optimal_mass(pi: &PolicyTensor, o: &OptimalActionMap, sbar: &CriticalStateSet) -> f64 {
    sbar.states()
        .map(|x| {
            o.get(x)
                .map(|set| set.iter().map(|&a| pi.prob(x, a)).sum::<f64>())
                .unwrap_or(0.0)
        })
        .fold(1.0, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce::{build_ce, FiniteMdp};

    fn bandit(alpha: f64) -> (CommandExtension, TransitionKernel) {
        let lam = TransitionKernel::from_rows(&[
            vec![vec![1.0 - alpha, alpha], vec![alpha, 1.0 - alpha]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ])
        .unwrap();
        let mdp = FiniteMdp::new(lam.clone(), vec![1.0, 0.0]).unwrap();
        let ce = build_ce(
            mdp,
            vec![0, 1],
            1,
            2,
            vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5],
        )
        .unwrap();
        (ce, lam)
    }

    #[test]
    fn one_step_q_is_goal_hitting_probability() {
        let (ce, lam) = bandit(0.2);
        let vt = policy_values(&ce, &lam, &PolicyTensor::uniform(&ce));
        let x = ce.ext_index(0, 1, 0);
        assert!((vt.q_at(x, 0) - 0.8).abs() < 1e-15);
        assert!((vt.q_at(x, 1) - 0.2).abs() < 1e-15);
        assert!((vt.v[x] - 0.5).abs() < 1e-15);
        let opt = optimal_values(&ce, &lam);
        assert!((opt.v[x] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn bandit_optimal_actions_are_singletons() {
        let (ce, lam) = bandit(0.0);
        let o = optimal_actions(&ce, &lam, &PolicyTensor::uniform(&ce)).unwrap();
        assert_eq!(o.get(ce.ext_index(0, 1, 0)), Some(&[0usize][..]));
        assert_eq!(o.get(ce.ext_index(0, 1, 1)), Some(&[1usize][..]));
        let crit = critical_states(&ce, &lam).unwrap();
        let states: Vec<_> = crit.states().collect();
        assert_eq!(states, vec![ce.ext_index(0, 1, 0), ce.ext_index(0, 1, 1)]);
    }

    #[test]
    fn non_deterministic_kernel_is_rejected() {
        let (ce, lam) = bandit(0.5);
        assert_eq!(critical_states(&ce, &lam), Err(LabError::NotDeterministic));
    }

    #[test]
    fn optimal_mass_examples() {
        let (ce, lam) = bandit(0.0);
        let r = Reference::new(&ce, &lam).unwrap();
        assert_eq!(r.optimal_mass(&PolicyTensor::uniform(&ce)), 0.5);
        let opt = PolicyTensor::from_probs(&ce, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.5, 0.5])
            .unwrap();
        assert_eq!(r.optimal_mass(&opt), 1.0);
    }
}
