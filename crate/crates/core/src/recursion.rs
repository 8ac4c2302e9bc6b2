//! The eUDRL policy recursion, its ε-regularized variant, the RWR reference step
//! and an iteration driver.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ce::{CommandExtension, PolicyTensor, TransitionKernel, SUPPORT_TOL};
use crate::error::{LabError, Result};
use crate::seg::{segment_stats, SegmentSpace};
use crate::values::{objective_from_values, policy_values, Reference};

/// One recursion step: `(1-ε)·num/den + ε/|A|` on `supp den`, uniform elsewhere.
pub fn eudrl_step(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
    space: SegmentSpace,
    eps: f64,
) -> PolicyTensor {
    let stats = segment_stats(ce, lam, pi, space);
    let na = ce.num_actions();
    let uniform = 1.0 / na as f64;
    let mut probs = Vec::with_capacity(ce.ext_len() * na);
    for (x, &d) in stats.den.iter().enumerate() {
        if d > SUPPORT_TOL {
            for a in 0..na {
                probs.push((1.0 - eps) * stats.num_at(x, a) / d + eps * uniform);
            }
        } else {
            probs.extend(std::iter::repeat_n(uniform, na));
        }
    }
    PolicyTensor::from_raw(ce.ext_len(), na, probs)
}

/// `π'(a|s̄) ∝ Q^π(s̄,a)·π(a|s̄)`, uniform where the weights vanish.
pub fn rwr_step(ce: &CommandExtension, lam: &TransitionKernel, pi: &PolicyTensor) -> PolicyTensor {
    let values = policy_values(ce, lam, pi);
    let na = ce.num_actions();
    let mut probs = Vec::with_capacity(ce.ext_len() * na);
    for x in 0..ce.ext_len() {
        let w: Vec<f64> = (0..na).map(|a| values.q_at(x, a) * pi.prob(x, a)).collect();
        let z: f64 = w.iter().sum();
        if z > 0.0 {
            probs.extend(w.iter().map(|v| v / z));
        } else {
            probs.extend(std::iter::repeat_n(1.0 / na as f64, na));
        }
    }
    PolicyTensor::from_raw(ce.ext_len(), na, probs)
}

/// Metrics recorded after each step. Reference-dependent fields are NaN without a reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub n: usize,
    pub optimal_mass: f64,
    pub j: f64,
    pub v_err: f64,
    pub q_err: f64,
    #[serde(skip)]
    pub wall_clock: f64,
}

#[derive(Clone, Debug, Default)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
    pub policies: Option<Vec<PolicyTensor>>,
    pub last: Option<PolicyTensor>,
}

#[derive(Clone, Debug, Default)]
pub struct IterateOptions<'a> {
    pub record_policies: bool,
    /// Critical states, optimal actions and `V*, Q*` of a deterministic `λ0`.
    pub reference: Option<&'a Reference>,
    /// Reject initial policies with zero entries.
    pub require_positive: bool,
}

fn metrics(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
    n: usize,
    reference: Option<&Reference>,
    started: Instant,
) -> TraceStep {
    let values = policy_values(ce, lam, pi);
    let j = objective_from_values(ce, &values);
    let (optimal_mass, v_err, q_err) = match reference {
        Some(r) => {
            let na = ce.num_actions();
            let mut v_err: f64 = 0.0;
            let mut q_err: f64 = 0.0;
            for x in r.critical.states() {
                v_err = v_err.max((values.v[x] - r.optimal.v[x]).abs());
                for a in 0..na {
                    q_err = q_err.max((values.q_at(x, a) - r.optimal.q_at(x, a)).abs());
                }
            }
            (r.optimal_mass(pi), v_err, q_err)
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    TraceStep {
        n,
        optimal_mass,
        j,
        v_err,
        q_err,
        wall_clock: started.elapsed().as_secs_f64(),
    }
}

/// Applies [`eudrl_step`] `n_steps` times and records `n_steps + 1` metric rows.
pub fn iterate(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi0: &PolicyTensor,
    n_steps: usize,
    space: SegmentSpace,
    eps: f64,
    opts: &IterateOptions,
) -> Result<IterationTrace> {
    if !(0.0..1.0).contains(&eps) {
        return Err(LabError::DomainError(format!("ε = {eps} outside [0, 1)")));
    }
    pi0.validate()?;
    if opts.require_positive && pi0.min_entry() <= 0.0 {
        return Err(LabError::DomainError(
            "initial policy must be strictly positive".into(),
        ));
    }
    let started = Instant::now();
    let mut trace = IterationTrace::default();
    let mut policies = opts.record_policies.then(Vec::new);
    let mut pi = pi0.clone();
    for n in 0..=n_steps {
        if n > 0 {
            pi = eudrl_step(ce, lam, &pi, space, eps);
        }
        trace
            .steps
            .push(metrics(ce, lam, &pi, n, opts.reference, started));
        if let Some(p) = policies.as_mut() {
            p.push(pi.clone());
        }
    }
    trace.policies = policies;
    trace.last = Some(pi);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce::{build_ce, FiniteMdp};

    fn bandit(alpha: f64) -> (CommandExtension, TransitionKernel) {
        let lam = TransitionKernel::from_rows(&[
            vec![vec![1.0 - alpha, alpha], vec![alpha, 1.0 - alpha]],
            vec![vec![alpha, 1.0 - alpha], vec![1.0 - alpha, alpha]],
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
    fn uniform_bandit_concentrates_on_correct_arm() {
        let (ce, lam) = bandit(0.0);
        let pi = PolicyTensor::uniform(&ce);
        let next = eudrl_step(&ce, &lam, &pi, SegmentSpace::Seg, 0.0);
        assert_eq!(next.dist(ce.ext_index(0, 1, 0)), &[1.0, 0.0]);
        assert_eq!(next.dist(ce.ext_index(0, 1, 1)), &[0.0, 1.0]);
        assert_eq!(next.dist(ce.ext_index(1, 1, 0)), &[0.5, 0.5]);
        let rwr = rwr_step(&ce, &lam, &pi);
        assert_eq!(rwr.dist(ce.ext_index(0, 1, 0)), &[1.0, 0.0]);
    }

    #[test]
    fn regularized_step_is_bounded_below() {
        let (ce, lam) = bandit(0.1);
        let eps = 0.2;
        let next = eudrl_step(&ce, &lam, &PolicyTensor::uniform(&ce), SegmentSpace::Seg, eps);
        assert!(next.min_entry() >= eps / 2.0 - 1e-15);
        next.validate().unwrap();
    }

    #[test]
    fn trace_has_n_plus_one_rows() {
        let (ce, lam) = bandit(0.0);
        let r = Reference::new(&ce, &lam).unwrap();
        let opts = IterateOptions {
            reference: Some(&r),
            ..Default::default()
        };
        let pi0 = PolicyTensor::uniform(&ce);
        let t = iterate(&ce, &lam, &pi0, 4, SegmentSpace::Seg, 0.0, &opts).unwrap();
        assert_eq!(t.steps.len(), 5);
        assert_eq!(t.steps[0].optimal_mass, 0.5);
        assert!(t.steps[1..].iter().all(|s| s.optimal_mass == 1.0));
        assert!(iterate(&ce, &lam, &pi0, 1, SegmentSpace::Seg, 1.0, &opts).is_err());
    }
}
