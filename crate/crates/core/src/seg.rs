//! Segment distribution of a command extension: visitation, reach probabilities,
//! the eUDRL numerator and denominator, and an enumeration oracle.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ce::{CommandExtension, PolicyTensor, TransitionKernel};
use crate::error::{LabError, Result};

/// Default cap on `|S|^N·|A|^N·N·|G|` for [`enumerate_segments`].
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Which segments the recursion is fitted on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentSpace {
    /// All segments.
    #[default]
    Seg,
    /// Segments that end together with their trajectory.
    Trail,
    /// Trailing segments whose realized goal equals the commanded goal.
    Diag,
}

impl SegmentSpace {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentSpace::Seg => "seg",
            SegmentSpace::Trail => "trail",
            SegmentSpace::Diag => "diag",
        }
    }
}

impl std::str::FromStr for SegmentSpace {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seg" => Ok(Self::Seg),
            "trail" => Ok(Self::Trail),
            "diag" => Ok(Self::Diag),
            other => Err(LabError::DomainError(format!("unknown segment space {other}"))),
        }
    }
}

/// `M(s,h,g) = Σ_{t<N} P(S_t=s, H_t=h, G_t=g)` over transient states.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVisitTensor {
    pub m: Vec<f64>,
}

impl StateVisitTensor {
    /// `Σ h·M(s,h,g)`, the normalization constant of the segment distribution.
    pub fn normalizer(&self, ce: &CommandExtension) -> f64 {
        self.m
            .iter()
            .enumerate()
            .map(|(x, &m)| ce.ext_decode(x).1 as f64 * m)
            .sum()
    }
}

pub fn forward_marginals(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
) -> StateVisitTensor {
    let mut m = ce.mu_bar().to_vec();
    let (ns, na, ng) = (ce.num_states(), ce.num_actions(), ce.num_goals());
    for h in (2..=ce.horizon()).rev() {
        for s in 0..ns {
            for g in 0..ng {
                let x = ce.ext_index(s, h, g);
                let mass = m[x];
                if mass == 0.0 {
                    continue;
                }
                for a in 0..na {
                    let w = mass * pi.prob(x, a);
                    if w == 0.0 {
                        continue;
                    }
                    for &(t, p) in lam.successors(s, a) {
                        m[ce.ext_index(t, h - 1, g)] += w * p;
                    }
                }
            }
        }
    }
    StateVisitTensor { m }
}

/// `W_k(s,h'',g',g) = P(ρ(S_k)=g | S_0=s, H_0=h'', G_0=g')` for `k <= h'' < N`.
struct ReachTable {
    ns: usize,
    n: usize,
    ng: usize,
    w: Vec<f64>,
}

impl ReachTable {
    #[inline]
    fn idx(&self, k: usize, s: usize, hh: usize, gp: usize, g: usize) -> usize {
        (((k * self.ns + s) * self.n + hh) * self.ng + gp) * self.ng + g
    }

    fn get(&self, k: usize, s: usize, hh: usize, gp: usize, g: usize) -> f64 {
        self.w[self.idx(k, s, hh, gp, g)]
    }

    fn build(ce: &CommandExtension, lam: &TransitionKernel, pi: &PolicyTensor) -> Self {
        let (ns, na, ng, n) = (
            ce.num_states(),
            ce.num_actions(),
            ce.num_goals(),
            ce.horizon(),
        );
        let mut t = ReachTable {
            ns,
            n,
            ng,
            w: vec![0.0; n * ns * n * ng * ng],
        };
        for s in 0..ns {
            let gs = ce.goal_of(s);
            for hh in 0..n {
                for gp in 0..ng {
                    let i = t.idx(0, s, hh, gp, gs);
                    t.w[i] = 1.0;
                }
            }
        }
        let mut acc = vec![0.0; ng];
        for k in 1..n {
            for s in 0..ns {
                for hh in k..n {
                    for gp in 0..ng {
                        let x = ce.ext_index(s, hh, gp);
                        acc.iter_mut().for_each(|v| *v = 0.0);
                        for a in 0..na {
                            let pa = pi.prob(x, a);
                            if pa == 0.0 {
                                continue;
                            }
                            for &(s2, p) in lam.successors(s, a) {
                                let base = t.idx(k - 1, s2, hh - 1, gp, 0);
                                for (g, v) in acc.iter_mut().enumerate() {
                                    *v += pa * p * t.w[base + g];
                                }
                            }
                        }
                        let base = t.idx(k, s, hh, gp, 0);
                        t.w[base..base + ng].copy_from_slice(&acc);
                    }
                }
            }
        }
        t
    }
}

/// `r[a,s,h',g',h,g] = P(ρ(S_h)=g | A_0=a, S_0=s, H_0=h', G_0=g')` for `1 <= h <= h'`.
#[derive(Clone, Debug)]
pub struct ReachProbTensor {
    na: usize,
    ns: usize,
    n: usize,
    ng: usize,
    r: Vec<f64>,
}

impl ReachProbTensor {
    fn idx(&self, a: usize, s: usize, hp: usize, gp: usize, h: usize, g: usize) -> usize {
        ((((a * self.ns + s) * self.n + hp - 1) * self.ng + gp) * self.n + h - 1) * self.ng + g
    }

    pub fn get(&self, a: usize, s: usize, hp: usize, gp: usize, h: usize, g: usize) -> Result<f64> {
        if h == 0 || h > hp || hp > self.n {
            return Err(LabError::IndexError(format!(
                "need 1 <= h <= h' <= N, got h={h}, h'={hp}"
            )));
        }
        if a >= self.na || s >= self.ns || gp >= self.ng || g >= self.ng {
            return Err(LabError::IndexError("action, state or goal out of range".into()));
        }
        Ok(self.r[self.idx(a, s, hp, gp, h, g)])
    }
}

pub fn reach_probabilities(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
) -> ReachProbTensor {
    let table = ReachTable::build(ce, lam, pi);
    let (ns, na, ng, n) = (
        ce.num_states(),
        ce.num_actions(),
        ce.num_goals(),
        ce.horizon(),
    );
    let mut out = ReachProbTensor {
        na,
        ns,
        n,
        ng,
        r: vec![0.0; na * ns * n * ng * n * ng],
    };
    for a in 0..na {
        for s in 0..ns {
            for hp in 1..=n {
                for gp in 0..ng {
                    for h in 1..=hp {
                        for g in 0..ng {
                            let v: f64 = lam
                                .successors(s, a)
                                .iter()
                                .map(|&(s2, p)| p * table.get(h - 1, s2, hp - 1, gp, g))
                                .sum();
                            let i = out.idx(a, s, hp, gp, h, g);
                            out.r[i] = v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Numerator, denominator and visitation of the recursion for one segment space.
///
/// `num` is stored as `(ext, a)`. For the trailing and diagonal spaces the entries are
/// joint probabilities with the subspace event, still divided by the all-segment `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentStats {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub c: f64,
    pub nu: Vec<f64>,
    pub space: SegmentSpace,
    pub num_actions: usize,
}

impl SegmentStats {
    #[inline]
    pub fn num_at(&self, x: usize, a: usize) -> f64 {
        self.num[x * self.num_actions + a]
    }

    /// Largest entrywise difference over `num`, `den`, `nu` and `c`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = |u: &[f64], v: &[f64]| {
            u.iter()
                .zip(v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        d(&self.num, &other.num)
            .max(d(&self.den, &other.den))
            .max(d(&self.nu, &other.nu))
            .max((self.c - other.c).abs())
    }
}

pub fn segment_stats(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
    space: SegmentSpace,
) -> SegmentStats {
    let visits = forward_marginals(ce, lam, pi);
    let table = ReachTable::build(ce, lam, pi);
    let (ns, na, ng, n) = (
        ce.num_states(),
        ce.num_actions(),
        ce.num_goals(),
        ce.horizon(),
    );
    let c = visits.normalizer(ce);
    let mut num = vec![0.0; ce.ext_len() * na];
    for s in 0..ns {
        for hp in 1..=n {
            for gp in 0..ng {
                let xp = ce.ext_index(s, hp, gp);
                let mass = visits.m[xp];
                if mass == 0.0 {
                    continue;
                }
                let hs = match space {
                    SegmentSpace::Seg => 1..=hp,
                    _ => hp..=hp,
                };
                for a in 0..na {
                    let w = mass * pi.prob(xp, a);
                    if w == 0.0 {
                        continue;
                    }
                    for h in hs.clone() {
                        for &(s2, p) in lam.successors(s, a) {
                            let base = table.idx(h - 1, s2, hp - 1, gp, 0);
                            if space == SegmentSpace::Diag {
                                num[ce.ext_index(s, h, gp) * na + a] += w * p * table.w[base + gp];
                            } else {
                                for g in 0..ng {
                                    num[ce.ext_index(s, h, g) * na + a] +=
                                        w * p * table.w[base + g];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    num.iter_mut().for_each(|v| *v /= c);
    let den = num.chunks(na).map(|r| r.iter().sum()).collect();
    let total: f64 = visits.m.iter().sum();
    let nu = visits.m.iter().map(|m| m / total).collect();
    SegmentStats {
        num,
        den,
        c,
        nu,
        space,
        num_actions: na,
    }
}

/// `P(H₀=h, G₀=g | S₀=s, l=h)` for every extended state `(s,h,g)`: each visit of
/// `(s,h',g')` with `h' >= h` starts exactly one segment of length `h`, and it is a
/// trailing one iff `h' = h`. Zero where the condition has no mass.
pub fn visitation_conditional(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
) -> Vec<f64> {
    let m = forward_marginals(ce, lam, pi).m;
    let (ns, ng, n) = (ce.num_states(), ce.num_goals(), ce.horizon());
    let mut out = vec![0.0; ce.ext_len()];
    for s in 0..ns {
        let mut tail = 0.0;
        for h in (1..=n).rev() {
            tail += (0..ng).map(|g| m[ce.ext_index(s, h, g)]).sum::<f64>();
            if tail > 0.0 {
                for g in 0..ng {
                    let x = ce.ext_index(s, h, g);
                    out[x] = m[x] / tail;
                }
            }
        }
    }
    out
}

/// Exact law of the segment distribution, keyed by the token sequence
/// `[l, s_0, h_0, g_0, a_0, s_1, …, a_{l-1}, s_l]`.
#[derive(Clone, Debug)]
pub struct SegmentLaw {
    pub probs: HashMap<Vec<usize>, f64>,
    pub c: f64,
}

/// Enumerates every trajectory and every segment contained in it.
pub fn enumerate_segments(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
    cap: u64,
) -> Result<SegmentLaw> {
    let (ns, na, ng, n) = (
        ce.num_states() as u64,
        ce.num_actions() as u64,
        ce.num_goals() as u64,
        ce.horizon() as u32,
    );
    let work = ns
        .checked_pow(n)
        .and_then(|v| v.checked_mul(na.checked_pow(n)?))
        .and_then(|v| v.checked_mul(n as u64 * ng));
    match work {
        Some(w) if w <= cap => {}
        _ => {
            return Err(LabError::CapacityExceeded(format!(
                "enumeration of |S|^N|A|^N N|G| terms exceeds cap {cap}"
            )))
        }
    }
    let mut raw: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut c = 0.0;
    for x0 in 0..ce.ext_len() {
        let p0 = ce.mu_bar()[x0];
        if p0 == 0.0 {
            continue;
        }
        let (s0, h0, g0) = ce.ext_decode(x0);
        let mut states = vec![s0];
        let mut actions = Vec::new();
        walk(
            ce, lam, pi, h0, g0, p0, &mut states, &mut actions, &mut raw, &mut c,
        );
    }
    for v in raw.values_mut() {
        *v /= c;
    }
    Ok(SegmentLaw { probs: raw, c })
}

#[allow(clippy::too_many_arguments)]
fn walk(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
    h0: usize,
    g0: usize,
    prob: f64,
    states: &mut Vec<usize>,
    actions: &mut Vec<usize>,
    out: &mut HashMap<Vec<usize>, f64>,
    c: &mut f64,
) {
    let t = actions.len();
    if t == h0 {
        for start in 0..h0 {
            for l in 1..=h0 - start {
                let mut key = vec![l, states[start], h0 - start, g0];
                for i in 0..l {
                    key.push(actions[start + i]);
                    key.push(states[start + i + 1]);
                }
                *out.entry(key).or_insert(0.0) += prob;
                *c += prob;
            }
        }
        return;
    }
    let s = states[t];
    let x = ce.ext_index(s, h0 - t, g0);
    for a in 0..ce.num_actions() {
        let pa = pi.prob(x, a);
        if pa == 0.0 {
            continue;
        }
        for &(s2, p) in lam.successors(s, a) {
            states.push(s2);
            actions.push(a);
            walk(ce, lam, pi, h0, g0, prob * pa * p, states, actions, out, c);
            actions.pop();
            states.pop();
        }
    }
}

impl SegmentLaw {
    /// Recomputes the recursion statistics from the enumerated law.
    pub fn stats(&self, ce: &CommandExtension, space: SegmentSpace) -> SegmentStats {
        let na = ce.num_actions();
        let mut num = vec![0.0; ce.ext_len() * na];
        let mut visits = vec![0.0; ce.ext_len()];
        for (key, &p) in &self.probs {
            let (l, s0, h0, g0, a0) = (key[0], key[1], key[2], key[3], key[4]);
            let s_end = key[key.len() - 1];
            let g = ce.goal_of(s_end);
            if l == h0 {
                // each visit of (s0,h0,g0) starts exactly one segment of full length
                visits[ce.ext_index(s0, h0, g0)] += p * self.c;
            }
            let keep = match space {
                SegmentSpace::Seg => true,
                SegmentSpace::Trail => l == h0,
                SegmentSpace::Diag => l == h0 && g == g0,
            };
            if keep {
                num[ce.ext_index(s0, l, g) * na + a0] += p;
            }
        }
        let den = num.chunks(na).map(|r| r.iter().sum()).collect();
        let total: f64 = visits.iter().sum();
        let nu = visits.iter().map(|m| m / total).collect();
        SegmentStats {
            num,
            den,
            c: self.c,
            nu,
            space,
            num_actions: na,
        }
    }

    /// Sum of all segment probabilities.
    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Largest deviation of the conditional action and transition laws inside
    /// segments (given the length and the prefix) from `π` and `λ`.
    pub fn markov_residual(
        &self,
        ce: &CommandExtension,
        lam: &TransitionKernel,
        pi: &PolicyTensor,
    ) -> f64 {
        let mut prefix_mass: HashMap<Vec<usize>, f64> = HashMap::new();
        for (key, &p) in &self.probs {
            for j in 4..=key.len() {
                *prefix_mass.entry(key[..j].to_vec()).or_insert(0.0) += p;
            }
        }
        let mut worst: f64 = 0.0;
        for (prefix, &mass) in &prefix_mass {
            if prefix.len() == key_len(prefix[0]) || mass <= 0.0 {
                continue;
            }
            let (h0, g0) = (prefix[2], prefix[3]);
            // after the header [l, s_0, h_0, g_0] the tokens alternate a_0, s_1, a_1, ...
            let body = prefix.len() - 4;
            let mut ext = prefix.clone();
            ext.push(0);
            if body % 2 == 0 {
                let i = body / 2;
                let s = if body == 0 {
                    prefix[1]
                } else {
                    prefix[prefix.len() - 1]
                };
                let x = ce.ext_index(s, h0 - i, g0);
                for a in 0..ce.num_actions() {
                    *ext.last_mut().unwrap() = a;
                    let cond = prefix_mass.get(&ext).copied().unwrap_or(0.0) / mass;
                    worst = worst.max((cond - pi.prob(x, a)).abs());
                }
            } else {
                let a = prefix[prefix.len() - 1];
                let s = if body == 1 {
                    prefix[1]
                } else {
                    prefix[prefix.len() - 2]
                };
                for t in 0..ce.num_states() {
                    *ext.last_mut().unwrap() = t;
                    let cond = prefix_mass.get(&ext).copied().unwrap_or(0.0) / mass;
                    worst = worst.max((cond - lam.prob(s, a, t)).abs());
                }
            }
        }
        worst
    }
}

fn key_len(l: usize) -> usize {
    4 + 2 * l
}

/// Enumeration oracle for [`segment_stats`].
pub fn brute_force_segment_dist(
    ce: &CommandExtension,
    lam: &TransitionKernel,
    pi: &PolicyTensor,
    space: SegmentSpace,
    cap: u64,
) -> Result<SegmentStats> {
    Ok(enumerate_segments(ce, lam, pi, cap)?.stats(ce, space))
}
