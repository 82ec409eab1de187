//! Recursive utility of Markov plans.
//!
//! Finite-horizon utilities are built by backward composition of the policy
//! aggregators `T_f psi(s) = H(s, f(s), psi)` applied to the zero terminal
//! function, where the innermost step is `T_f 0(s) = r(s, f(s))^(1/(1-rho))`.
//! With `rho, gamma < 1` (regime A) the horizon values increase with the
//! horizon, with `rho, gamma > 1` (regime B) they decrease.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DerivedParams, Mdp, Space, ValueFn};
use crate::operators::{aggregator_h, policy_op_slice, to_v, Policy};
use crate::scalar::{pow_nonneg, Scalar};
use crate::solver::iterate_with;

/// Tolerance used for the stationary tail of a plan.
pub const TAIL_TOL: f64 = 1e-12;
/// Iteration cap for the stationary tail.
pub const TAIL_MAX_ITER: usize = 1_000_000;
/// Allowed excess of a plan's utility over the optimal value, in omega-norm.
pub const AUDIT_SLACK: f64 = 1e-9;

/// A finite sequence of decision rules `(pi_1, ..., pi_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarkovPlan {
    pub steps: Vec<Policy>,
}

impl MarkovPlan {
    pub fn new<T: Scalar>(m: &Mdp<T>, steps: Vec<Policy>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Malformed(
                "Markov plan needs at least one step".into(),
            ));
        }
        for f in &steps {
            f.check(m)?;
        }
        Ok(Self { steps })
    }

    /// `(f, f, ..., f)` with `n` steps.
    pub fn stationary<T: Scalar>(m: &Mdp<T>, f: &Policy, n: usize) -> Result<Self> {
        Self::new(m, vec![f.clone(); n.max(1)])
    }

    /// Draws each step uniformly over the feasible actions of every state.
    pub fn random<T: Scalar>(m: &Mdp<T>, horizon: usize, rng: &mut impl Rng) -> Self {
        let steps = (0..horizon.max(1))
            .map(|_| {
                Policy(
                    (0..m.n_states())
                        .map(|s| {
                            let acts = m.feasible(s);
                            acts[rng.gen_range(0..acts.len())]
                        })
                        .collect(),
                )
            })
            .collect();
        Self { steps }
    }

    /// The same plan with the last step repeated up to `horizon` steps.
    pub fn extended(&self, horizon: usize) -> Self {
        let mut steps = self.steps.clone();
        let last = steps.last().expect("plans are nonempty").clone();
        while steps.len() < horizon {
            steps.push(last.clone());
        }
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Decision rule used after the plan runs out.
    pub fn tail(&self) -> &Policy {
        self.steps.last().expect("plans are nonempty")
    }
}

/// Parameter regime where finite-horizon utilities are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `rho, gamma in (0, 1)`
    A,
    /// `rho, gamma > 1`
    B,
}

pub fn regime<T: Scalar>(m: &Mdp<T>) -> Result<Regime> {
    let one = T::one();
    if m.rho() < one && m.gamma() < one {
        Ok(Regime::A)
    } else if m.rho() > one && m.gamma() > one {
        Ok(Regime::B)
    } else {
        Err(Error::UnsupportedCase {
            rho: m.rho().to_f64().unwrap_or(f64::NAN),
            gamma: m.gamma().to_f64().unwrap_or(f64::NAN),
            case: crate::model::classify(m.rho(), m.gamma()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<T> {
    /// `U_1(pi), ..., U_n(pi)` in v-space.
    pub horizon_values: Vec<ValueFn<T>>,
    /// Utility of the plan followed by its last step forever.
    pub limit_value: ValueFn<T>,
    pub monotone_direction: Direction,
}

/// `T_f 0(s) = r(s, f(s))^(1/(1-rho))`.
fn terminal_step<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>, f: &Policy) -> Result<Vec<T>> {
    let e = T::one() / (T::one() - m.rho());
    (0..m.n_states())
        .map(|s| pow_nonneg(d.r[s][f.action(s)], e, "terminal step"))
        .collect()
}

fn policy_step_v<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    f: &Policy,
    v: &[T],
) -> Result<Vec<T>> {
    (0..m.n_states())
        .map(|s| aggregator_h(m, d, s, f.action(s), v))
        .collect()
}

/// `U_k(pi) = T_{pi_1} ... T_{pi_k} 0` in v-space.
fn compose_from_zero<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    steps: &[Policy],
) -> Result<Vec<T>> {
    let (last, rest) = steps.split_last().expect("nonempty");
    let mut v = terminal_step(m, d, last)?;
    for f in rest.iter().rev() {
        v = policy_step_v(m, d, f, &v)?;
    }
    Ok(v)
}

/// Finite-horizon utilities `U_1(pi) .. U_n(pi)` and the stationary-tail limit.
pub fn finite_horizon<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    plan: &MarkovPlan,
) -> Result<EvalReport<T>> {
    let direction = match regime(m)? {
        Regime::A => Direction::Increasing,
        Regime::B => Direction::Decreasing,
    };
    for f in &plan.steps {
        f.check(m)?;
    }
    let horizon_values = (1..=plan.len())
        .map(|k| compose_from_zero(m, d, &plan.steps[..k]).map(|v| ValueFn::new(v, Space::VSpace)))
        .collect::<Result<Vec<_>>>()?;
    let limit_value = plan_utility(m, d, plan, T::lit(TAIL_TOL))?;
    Ok(EvalReport {
        horizon_values,
        limit_value,
        monotone_direction: direction,
    })
}

/// `v_f`, the fixed point of `v = H(., f(.), v)`, via the w-space policy operator.
pub fn infinite_horizon<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    f: &Policy,
    tol: T,
) -> Result<ValueFn<T>> {
    let w = policy_fixed_point_w(m, d, f, tol)?;
    to_v(m, d, &ValueFn::new(w, Space::WSpace))
}

fn policy_fixed_point_w<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    f: &Policy,
    tol: T,
) -> Result<Vec<T>> {
    regime(m)?;
    f.check(m)?;
    iterate_with(
        m,
        tol,
        TAIL_MAX_ITER,
        d.delta,
        vec![T::zero(); m.n_states()],
        |w| policy_op_slice(m, d, f, w),
    )
    .map(|(w, _)| w)
}

/// Utility of `pi_1, ..., pi_n` followed by `pi_n` forever:
/// `T_{pi_1} ... T_{pi_n} v_{pi_n}`, evaluated in w-space.
pub fn plan_utility<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    plan: &MarkovPlan,
    tol: T,
) -> Result<ValueFn<T>> {
    let mut w = policy_fixed_point_w(m, d, plan.tail(), tol)?;
    for f in plan.steps.iter().rev() {
        w = policy_op_slice(m, d, f, &w)?;
    }
    to_v(m, d, &ValueFn::new(w, Space::WSpace))
}

/// `T^k 0` for `k = 1..=n` with the full v-space Bellman operator, using the
/// same terminal convention as the plans (`T 0(s) = max_a r(s,a)^(1/(1-rho))`).
pub fn bellman_iterates_from_zero<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    n: usize,
) -> Result<Vec<ValueFn<T>>> {
    regime(m)?;
    let e = T::one() / (T::one() - m.rho());
    let mut v = (0..m.n_states())
        .map(|s| {
            let mut best = T::neg_infinity();
            for &a in m.feasible(s) {
                best = best.max(pow_nonneg(d.r[s][a], e, "Bellman terminal step")?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            v = crate::operators::bellman_v(m, d, &v)?;
        }
        out.push(ValueFn::new(v.clone(), Space::VSpace));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport<T> {
    pub seed: u64,
    pub n_random: usize,
    pub horizon: usize,
    /// Plans evaluated, including the stationary optimal plan (index 0).
    pub plans_checked: usize,
    /// `min over plans and states of (v*(s) - U(pi)(s)) / omega(s)`
    pub worst_margin: T,
    pub worst_plan: usize,
    pub worst_state: usize,
    /// Margin of the optimal stationary plan; zero up to solver tolerance.
    pub f_star_margin: T,
    pub slack: T,
}

/// Checks that no sampled Markov plan beats `v_star` by more than the slack.
///
/// Plan 0 is `f_star` repeated; plans `1..=n_random` are drawn with a
/// `ChaCha8` generator seeded by `seed`. Each plan is evaluated with its last
/// step as a stationary tail, and the finite-horizon value `U_horizon(pi)` is
/// checked to lie below (regime A) or above (regime B) that utility.
#[allow(clippy::too_many_arguments)]
pub fn optimality_audit<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    v_star: &ValueFn<T>,
    f_star: &Policy,
    n_random: usize,
    horizon: usize,
    seed: u64,
) -> Result<AuditReport<T>> {
    let reg = regime(m)?;
    f_star.check(m)?;
    let horizon = horizon.max(1);
    let slack = T::lit(AUDIT_SLACK);
    let tol = T::lit(TAIL_TOL);
    let omega = m.omega();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut worst = (T::infinity(), 0, 0);
    let mut f_star_margin = T::infinity();
    for idx in 0..=n_random {
        let plan = if idx == 0 {
            MarkovPlan::stationary(m, f_star, horizon)?
        } else {
            MarkovPlan::random(m, horizon, &mut rng)
        };
        let u = plan_utility(m, d, &plan, tol)?;
        let u_h = compose_from_zero(m, d, &plan.steps)?;
        for s in 0..m.n_states() {
            let margin = (v_star.values[s] - u.values[s]) / omega[s];
            if margin < -slack {
                return Err(Error::AuditFailed {
                    plan: idx,
                    state: s,
                    margin: margin.to_f64().unwrap_or(f64::NAN),
                });
            }
            let order_gap = match reg {
                Regime::A => (u.values[s] - u_h[s]) / omega[s],
                Regime::B => (u_h[s] - u.values[s]) / omega[s],
            };
            if order_gap < -slack {
                return Err(Error::AuditFailed {
                    plan: idx,
                    state: s,
                    margin: order_gap.to_f64().unwrap_or(f64::NAN),
                });
            }
            if margin < worst.0 {
                worst = (margin, idx, s);
            }
            if idx == 0 {
                f_star_margin = f_star_margin.min(margin);
            }
        }
    }
    Ok(AuditReport {
        seed,
        n_random,
        horizon,
        plans_checked: n_random + 1,
        worst_margin: worst.0,
        worst_plan: worst.1,
        worst_state: worst.2,
        f_star_margin,
        slack,
    })
}
