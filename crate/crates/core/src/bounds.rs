//! Rational maps `f`, `h`, `z`, their fixed points, and the accumulation-point
//! bound pipelines built on them.

use serde::{Deserialize, Serialize};

use crate::ce::{CommandExtension, PolicyTensor};
use crate::error::{LabError, Result};
use crate::values::Reference;

/// Iteration cap for the contractions `g_l` and `g_u`.
pub const MAX_CONTRACTION_STEPS: usize = 5_000_000;

/// `f_γ(x) = x/(x+γ)`.
pub fn f_map(x: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(LabError::DomainError(format!("x = {x} outside [0, 1]")));
    }
    Ok(x / (x + gamma))
}

/// Unique fixed point `1 - γ` of `f_γ` on `(0, 1]`.
pub fn f_fixed_point(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 - gamma)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(LabError::DomainError(format!("γ = {gamma} outside (0, 1)")))
    }
}

/// `b₀(N) = (1/2N)·((2N-1)/2N)^{2N-1}`.
pub fn h_b0(n: usize) -> f64 {
    let two_n = 2.0 * n as f64;
    ((two_n - 1.0) / two_n).powi(2 * n as i32 - 1) / two_n
}

/// `h_b(x) = x^{2N}/(x^{2N}+b)`.
pub fn h_map(x: f64, b: f64, n: usize) -> f64 {
    let p = x.powi(2 * n as i32);
    p / (p + b)
}

/// A fixed point together with the residual `|map(x) - x|` and the work spent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HFixedPoints {
    pub lower: FixedPoint,
    pub upper: FixedPoint,
}

fn contract(mut x: f64, g: impl Fn(f64) -> f64) -> (f64, usize) {
    for k in 1..=MAX_CONTRACTION_STEPS {
        let next = g(x);
        let step = (next - x).abs();
        x = next;
        if step <= 1e-16 {
            return (x, k);
        }
    }
    (x, MAX_CONTRACTION_STEPS)
}

/// The nonzero fixed points `x_l < (2N-1)/2N < x_u` of `h_b`, via the contractions
/// `g_l(x) = (b/(1-x))^{1/(2N-1)}` and `g_u(x) = 1 - b/x^{2N-1}`.
pub fn h_fixed_points(b: f64, n: usize) -> Result<HFixedPoints> {
    if n == 0 {
        return Err(LabError::DomainError("N must be at least 1".into()));
    }
    let b0 = h_b0(n);
    if !(b > 0.0 && b < b0) {
        return Err(LabError::DomainError(format!("b = {b} outside (0, {b0})")));
    }
    let m = 2 * n as i32 - 1;
    let inv = 1.0 / m as f64;
    let (xl, il) = contract(0.0, |x| (b / (1.0 - x)).powf(inv));
    let (xu, iu) = contract(1.0, |x| 1.0 - b / x.powi(m));
    Ok(HFixedPoints {
        lower: FixedPoint {
            value: xl,
            residual: (h_map(xl, b, n) - xl).abs(),
            iterations: il,
        },
        upper: FixedPoint {
            value: xu,
            residual: (h_map(xu, b, n) - xu).abs(),
            iterations: iu,
        },
    })
}

fn check_z(gamma: f64, eps: f64, m: usize, a: usize) -> Result<()> {
    if !(gamma > 0.0 && eps > 0.0 && gamma + eps < 1.0) {
        return Err(LabError::DomainError(format!(
            "need γ, ε > 0 and γ + ε < 1, got γ = {gamma}, ε = {eps}"
        )));
    }
    if m == 0 || m > a {
        return Err(LabError::DomainError(format!("need 0 < M <= |A|, got M = {m}, |A| = {a}")));
    }
    Ok(())
}

/// `z(x) = (1-ε)·x/(x+γ) + ε·M/|A|`.
pub fn z_map(x: f64, gamma: f64, eps: f64, m: usize, a: usize) -> Result<f64> {
    check_z(gamma, eps, m, a)?;
    Ok((1.0 - eps) * x / (x + gamma) + eps * m as f64 / a as f64)
}

/// Closed-form unique fixed point of `z`.
pub fn z_fixed_point(gamma: f64, eps: f64, m: usize, a: usize) -> Result<f64> {
    check_z(gamma, eps, m, a)?;
    Ok(z_star(gamma, eps, m as f64 / a as f64))
}

fn z_star(gamma: f64, eps: f64, ratio: f64) -> f64 {
    let xh = 1.0 - eps * (1.0 - ratio) - gamma;
    (xh + (xh * xh + 4.0 * gamma * eps * ratio).sqrt()) / 2.0
}

/// Denominator used in the visitation constant `α`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaDenominator {
    /// `2/(N(N+1))`, consistent with `c <= N(N+1)/2`.
    #[default]
    NPlusOne,
    /// `2/(N(N-1))`; undefined for `N = 1`.
    NMinusOne,
}

fn alpha_prefactor(n: usize, denom: AlphaDenominator) -> Result<f64> {
    let n = n as f64;
    match denom {
        AlphaDenominator::NPlusOne => Ok(2.0 / (n * (n + 1.0))),
        AlphaDenominator::NMinusOne if n > 1.0 => Ok(2.0 / (n * (n - 1.0))),
        AlphaDenominator::NMinusOne => Err(LabError::DomainError(
            "the N(N-1) denominator is undefined for N = 1".into(),
        )),
    }
}

fn min_mu_bar_on_support(ce: &CommandExtension) -> f64 {
    ce.mu_bar()
        .iter()
        .cloned()
        .filter(|&m| m > 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `μ̄` over critical states; fails unless `S̄ ⊆ supp μ̄`.
fn min_mu_bar_on_critical(ce: &CommandExtension, reference: &Reference) -> Result<f64> {
    let mut best = f64::INFINITY;
    for x in reference.critical.states() {
        let m = ce.mu_bar()[x];
        if m <= 0.0 {
            let (s, h, g) = ce.ext_decode(x);
            return Err(LabError::PremiseViolated(format!(
                "critical state ({s},{h},{g}) is outside supp μ̄"
            )));
        }
        best = best.min(m);
    }
    if best.is_infinite() {
        return Err(LabError::PremiseViolated("no critical states".into()));
    }
    Ok(best)
}

/// `α = (2/(N(N+1)))·min_{S̄} μ̄`, requiring `S̄ ⊆ supp μ̄`.
pub fn alpha_visitation(
    ce: &CommandExtension,
    reference: &Reference,
    denom: AlphaDenominator,
) -> Result<f64> {
    Ok(alpha_prefactor(ce.horizon(), denom)? * min_mu_bar_on_critical(ce, reference)?)
}

/// `α(δ,ε) = (2/(N(N+1)))·min_{supp μ̄} μ̄·(ε/|A|)^N·(1-δ/2)^N`.
pub fn alpha_eps(ce: &CommandExtension, delta: f64, eps: f64, denom: AlphaDenominator) -> Result<f64> {
    let n = ce.horizon() as i32;
    Ok(alpha_prefactor(ce.horizon(), denom)?
        * min_mu_bar_on_support(ce)
        * (eps / ce.num_actions() as f64).powi(n)
        * (1.0 - delta / 2.0).powi(n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    SuppMu,
    UniqueOpt,
    Epsilon,
}

/// Every intermediate and output of one bound pipeline evaluation.
///
/// `accumulation_bound` is the lower bound on `liminf_n min_{S̄} π_n(O(s̄)|s̄)`.
/// Outputs that a variant does not define are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub variant: BoundVariant,
    pub delta: f64,
    pub epsilon: f64,
    pub horizon: usize,
    pub num_actions: usize,
    pub min_mu_bar: f64,
    pub optimal_set_sizes: Vec<usize>,
    pub alpha_denominator: AlphaDenominator,
    pub alpha: f64,
    pub beta_tilde: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kappa: Vec<f64>,
    pub b: f64,
    pub b0: f64,
    pub delta0: f64,
    pub x_l: f64,
    pub x_u: f64,
    pub x_star: Vec<(usize, f64)>,
    pub accumulation_bound: f64,
    pub limit: f64,
    pub policy_bound: f64,
    pub q_bound: f64,
    pub v_bound: f64,
    pub j_bound: f64,
    pub rate: f64,
    pub initial_gate: Option<bool>,
    pub premises_hold: bool,
    pub violations: Vec<String>,
}

impl BoundReport {
    fn empty(variant: BoundVariant, ce: &CommandExtension, delta: f64, reference: &Reference) -> Self {
        Self {
            variant,
            delta,
            epsilon: 0.0,
            horizon: ce.horizon(),
            num_actions: ce.num_actions(),
            min_mu_bar: f64::NAN,
            optimal_set_sizes: reference.optimal_set_sizes(),
            alpha_denominator: AlphaDenominator::NPlusOne,
            alpha: f64::NAN,
            beta_tilde: f64::NAN,
            beta: Vec::new(),
            gamma: Vec::new(),
            kappa: Vec::new(),
            b: f64::NAN,
            b0: f64::NAN,
            delta0: f64::NAN,
            x_l: f64::NAN,
            x_u: f64::NAN,
            x_star: Vec::new(),
            accumulation_bound: f64::NAN,
            limit: 1.0,
            policy_bound: f64::NAN,
            q_bound: f64::NAN,
            v_bound: f64::NAN,
            j_bound: f64::NAN,
            rate: f64::NAN,
            initial_gate: None,
            premises_hold: true,
            violations: Vec::new(),
        }
    }

    /// A report whose premises fail before any intermediate can be computed.
    pub fn violated(
        variant: BoundVariant,
        ce: &CommandExtension,
        reference: &Reference,
        delta: f64,
        eps: f64,
        msg: String,
    ) -> Self {
        let mut r = Self::empty(variant, ce, delta, reference);
        r.epsilon = eps;
        r.violate(msg);
        r.finish()
    }

    fn violate(&mut self, msg: String) {
        self.premises_hold = false;
        self.violations.push(msg);
    }

    /// Blanks the outputs when a premise fails; intermediates are kept.
    fn finish(mut self) -> Self {
        if !self.premises_hold {
            for v in [
                &mut self.accumulation_bound,
                &mut self.policy_bound,
                &mut self.q_bound,
                &mut self.v_bound,
                &mut self.j_bound,
                &mut self.rate,
            ] {
                *v = f64::NAN;
            }
        }
        self
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(LabError::DomainError(format!("δ = {delta} outside (0, 1)")))
    }
}

fn in_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

/// Bounds for the case `S̄_{λ0} ⊆ supp μ̄`.
pub fn supp_mu_bounds(
    ce: &CommandExtension,
    reference: &Reference,
    delta: f64,
    denom: AlphaDenominator,
) -> Result<BoundReport> {
    check_delta(delta)?;
    let mut r = BoundReport::empty(BoundVariant::SuppMu, ce, delta, reference);
    let n = ce.horizon();
    r.alpha_denominator = denom;
    r.min_mu_bar = min_mu_bar_on_critical(ce, reference)?;
    r.alpha = alpha_visitation(ce, reference, denom)?;
    r.beta_tilde = n as f64 * delta / 2.0;
    for h in 1..=n {
        let beta = if h == 1 {
            delta.max(r.beta_tilde)
        } else {
            delta + r.kappa[h - 2] + r.beta[h - 2]
        };
        let gamma = r.beta_tilde / ((1.0 - beta) * r.alpha);
        if !in_unit(beta) {
            r.violate(format!("β_{h} = {beta} outside (0, 1)"));
        }
        if !in_unit(gamma) {
            r.violate(format!("γ_{h} = {gamma} outside (0, 1)"));
        }
        r.beta.push(beta);
        r.gamma.push(gamma);
        r.kappa.push(2.0 * gamma);
    }
    let (beta_n, gamma_n, kappa_n) = (r.beta[n - 1], r.gamma[n - 1], r.kappa[n - 1]);
    r.x_star = vec![(0, 1.0 - gamma_n)];
    r.accumulation_bound = 1.0 - gamma_n;
    r.policy_bound = kappa_n;
    r.q_bound = beta_n;
    r.v_bound = beta_n + kappa_n;
    r.j_bound = r.beta_tilde + beta_n + kappa_n;
    r.rate = gamma_n;
    Ok(r.finish())
}

/// `b(δ) = δN²(N+1)/(4(1-δ/2)^{2N}·min_{supp μ̄} μ̄)`.
pub fn b_of_delta(delta: f64, n: usize, min_mu: f64) -> f64 {
    let nf = n as f64;
    delta * nf * nf * (nf + 1.0) / (4.0 * (1.0 - delta / 2.0).powi(2 * n as i32) * min_mu)
}

/// Root of `b(δ) = b₀` on `(1e-15, 2/(N+1)]` by bisection.
pub fn delta0(n: usize, min_mu: f64) -> f64 {
    let b0 = h_b0(n);
    let (mut lo, mut hi) = (1e-15, 2.0 / (n as f64 + 1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if b_of_delta(mid, n, min_mu) < b0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Bounds for the case `|O(s̄)| = 1` on `S̄_{λ0}`.
pub fn unique_opt_bounds(
    ce: &CommandExtension,
    reference: &Reference,
    delta: f64,
    pi0: Option<&PolicyTensor>,
) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(LabError::DomainError(format!("δ = {delta} outside (0, 2)")));
    }
    let mut r = BoundReport::empty(BoundVariant::UniqueOpt, ce, delta, reference);
    let n = ce.horizon();
    if r.optimal_set_sizes.iter().any(|&m| m != 1) {
        r.violate("some critical state has more than one optimal action".into());
    }
    r.min_mu_bar = min_mu_bar_on_support(ce);
    r.b0 = h_b0(n);
    r.b = b_of_delta(delta, n, r.min_mu_bar);
    r.delta0 = delta0(n, r.min_mu_bar);
    if delta >= r.delta0 || r.b >= r.b0 {
        r.violate(format!("δ = {delta} is not below δ₀ = {}", r.delta0));
        return Ok(r.finish());
    }
    let fp = h_fixed_points(r.b, n)?;
    r.x_l = fp.lower.value;
    r.x_u = fp.upper.value;
    let half = (1.0 - delta / 2.0).powi(n as i32);
    r.accumulation_bound = r.x_u;
    r.policy_bound = 1.0 - r.x_u;
    r.v_bound = 1.0 - half * r.x_u.powi(n as i32);
    r.j_bound = n as f64 * delta / 2.0 + r.v_bound;
    let two_n = 2 * n as i32;
    r.rate = 2.0 * n as f64 * r.b * r.x_u.powi(two_n - 1) / (r.x_u.powi(two_n) + r.b).powi(2);
    if let Some(pi0) = pi0 {
        let x0 = reference.optimal_mass(pi0);
        r.initial_gate = Some(x0 > r.x_l);
        if x0 <= r.x_l {
            r.violate(format!("initial optimal mass {x0} does not exceed x_l = {}", r.x_l));
        }
    }
    Ok(r.finish())
}

/// Bounds for the ε-regularized recursion.
pub fn eps_bounds(
    ce: &CommandExtension,
    reference: &Reference,
    delta: f64,
    eps: f64,
    denom: AlphaDenominator,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LabError::DomainError(format!("ε = {eps} outside (0, 1)")));
    }
    let mut r = BoundReport::empty(BoundVariant::Epsilon, ce, delta, reference);
    let n = ce.horizon();
    let na = ce.num_actions();
    r.epsilon = eps;
    r.alpha_denominator = denom;
    r.min_mu_bar = min_mu_bar_on_support(ce);
    r.alpha = alpha_eps(ce, delta, eps, denom)?;
    r.beta_tilde = n as f64 * delta / 2.0;
    if r.optimal_set_sizes.is_empty() {
        r.violate("no critical states".into());
        return Ok(r);
    }
    let mut sizes_by_h: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for x in reference.critical.states() {
        if let Some(o) = reference.actions.get(x) {
            let h = ce.ext_decode(x).1;
            if !sizes_by_h[h].contains(&o.len()) {
                sizes_by_h[h].push(o.len());
            }
        }
    }
    let keep = (1.0 - eps).powi(n as i32);
    let gap = |m: usize| 1.0 - eps * (1.0 - m as f64 / na as f64);
    for (h, here) in sizes_by_h.iter().enumerate().skip(1) {
        let beta = if h == 1 {
            delta.max(r.beta_tilde)
        } else {
            delta + r.kappa[h - 2] + r.beta[h - 2]
        };
        let gamma = r.beta_tilde / ((keep - beta) * r.alpha);
        if !in_unit(beta) {
            r.violate(format!("β_{h} = {beta} outside (0, 1)"));
        }
        if !in_unit(gamma) {
            r.violate(format!("γ_{h} = {gamma} outside (0, 1)"));
        }
        if gamma + eps >= 1.0 {
            r.violate(format!("γ_{h} + ε = {} is not below 1", gamma + eps));
        }
        if keep <= beta {
            r.violate(format!("(1-ε)^N = {keep} does not exceed β_{h} = {beta}"));
        }
        let sizes = if here.is_empty() {
            &r.optimal_set_sizes
        } else {
            here
        };
        let kappa = sizes
            .iter()
            .map(|&m| 2.0 * (gap(m) - z_star(gamma, eps, m as f64 / na as f64)))
            .fold(0.0, f64::max);
        r.beta.push(beta);
        r.gamma.push(gamma);
        r.kappa.push(kappa);
    }
    let gamma_n = r.gamma[n - 1];
    let (beta_n, kappa_n) = (r.beta[n - 1], r.kappa[n - 1]);
    r.x_star = r
        .optimal_set_sizes
        .iter()
        .map(|&m| (m, z_star(gamma_n, eps, m as f64 / na as f64)))
        .collect();
    r.accumulation_bound = r.x_star.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    r.limit = r
        .optimal_set_sizes
        .iter()
        .map(|&m| gap(m))
        .fold(f64::INFINITY, f64::min);
    r.policy_bound = kappa_n;
    r.q_bound = beta_n;
    r.v_bound = beta_n + kappa_n;
    r.j_bound = r.beta_tilde + beta_n + kappa_n;
    r.rate = r
        .x_star
        .iter()
        .map(|&(_, xs)| (1.0 - eps) * gamma_n / (xs + gamma_n).powi(2))
        .fold(0.0, f64::max);
    Ok(r.finish())
}
