//! Certified value iteration.
//!
//! Iteration starts from the zero function and stops once the a-posteriori
//! contraction bound `delta/(1-delta) ||w_k - w_{k-1}||_omega` drops below the
//! requested tolerance, which certifies `||w_k - w*||_omega <= tol`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{derive, omega_dist, omega_norm, CaseClass, DerivedParams, Mdp, Space, ValueFn};
use crate::operators::{
    aggregator_h, aggregator_w, apply_f_slice, optimize_state, to_v, OperatorKind, Optimizer,
    Policy,
};
use crate::scalar::{pow_nonneg, Scalar};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_TOL),
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord<T> {
    pub iter: usize,
    /// `||w_k - w_{k-1}||_omega`
    pub step_norm: T,
    /// `delta^k / (1 - delta) ||F w_0 - w_0||_omega`
    pub apriori: T,
    /// `delta / (1 - delta) ||w_k - w_{k-1}||_omega`
    pub aposteriori: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport<T> {
    pub case: CaseClass,
    pub operator: OperatorKind,
    pub theta: T,
    pub m_bound: T,
    pub c: T,
    pub delta: T,
    /// `||F 0||_omega / (1 - delta)`, the constant of the a-priori bound from the zero function.
    pub banach_constant: T,
    /// `||F 0 - 0||_omega`
    pub initial_step: T,
    pub iterations: usize,
    pub trace: Vec<TraceRecord<T>>,
    pub w_star: ValueFn<T>,
    pub v_star: ValueFn<T>,
    pub policy: Policy,
    pub bellman_residual: T,
    pub certified_error: T,
}

/// Iterates `w_k = F w_{k-1}` until the a-posteriori bound is at most `tol`.
pub fn value_iterate<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    w0: &ValueFn<T>,
    tol: T,
    max_iter: usize,
) -> Result<(ValueFn<T>, Vec<TraceRecord<T>>)> {
    if w0.space != Space::WSpace {
        return Err(Error::Domain {
            what: "value_iterate",
            detail: "initial function must live in w-space".into(),
        });
    }
    if !(tol > T::zero()) {
        return Err(Error::BadParameter {
            name: "tol",
            detail: format!("{tol} must be positive"),
        });
    }
    iterate_with(m, tol, max_iter, d.delta, w0.values.clone(), |w| {
        apply_f_slice(m, d, w)
    })
    .map(|(w, trace)| (ValueFn::new(w, Space::WSpace), trace))
}

/// Contraction iteration shared by the Bellman and policy operators.
pub(crate) fn iterate_with<T: Scalar>(
    m: &Mdp<T>,
    tol: T,
    max_iter: usize,
    delta: T,
    w0: Vec<T>,
    mut op: impl FnMut(&[T]) -> Result<Vec<T>>,
) -> Result<(Vec<T>, Vec<TraceRecord<T>>)> {
    let omega = m.omega();
    let one = T::one();
    let ratio = delta / (one - delta);
    let mut trace = Vec::new();
    let mut w = w0;
    let mut initial = T::zero();
    let mut delta_k = one;
    let mut last_bound = T::infinity();

    for k in 1..=max_iter {
        let next = op(&w)?;
        let step = omega_dist(&next, &w, omega);
        if k == 1 {
            initial = step;
        }
        delta_k = delta_k * delta;
        let record = TraceRecord {
            iter: k,
            step_norm: step,
            apriori: delta_k / (one - delta) * initial,
            aposteriori: ratio * step,
        };
        trace.push(record);
        w = next;
        last_bound = record.aposteriori;
        if record.aposteriori <= tol {
            return Ok((w, trace));
        }
    }
    Err(Error::MaxIterationsExceeded {
        iterations: max_iter,
        last_bound: last_bound.to_f64().unwrap_or(f64::NAN),
    })
}

/// Per state, the feasible action optimizing `H_k(s, ., w)`; lowest index on ties.
pub fn extract_policy<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    w_star: &ValueFn<T>,
) -> Result<Policy> {
    (0..m.n_states())
        .map(|s| optimize_state(m, d, s, &w_star.values).map(|(_, a)| a))
        .collect::<Result<Vec<_>>>()
        .map(Policy)
}

/// Actions whose `H_k(s, a, w)` is within `rel_tol` (relative) of the optimum.
pub fn optimal_action_sets<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    w: &ValueFn<T>,
    rel_tol: T,
) -> Result<Vec<Vec<usize>>> {
    let mut sets = Vec::with_capacity(m.n_states());
    for s in 0..m.n_states() {
        let (best, _) = optimize_state(m, d, s, &w.values)?;
        let slack = rel_tol * best.abs().max(T::one());
        let mut set = Vec::new();
        for &a in m.feasible(s) {
            let h = aggregator_w(m, d, s, a, &w.values)?;
            let gap = match d.kind.optimizer() {
                Optimizer::Max => best - h,
                Optimizer::Min => h - best,
            };
            if gap <= slack {
                set.push(a);
            }
        }
        sets.push(set);
    }
    Ok(sets)
}

/// `sup_s |v(s) - max_a H(s, a, v)| / omega(s)` in v-space.
///
/// The maximization is used in every case: where the w-space operator
/// minimizes, the decreasing transform turns it back into a maximum.
pub fn bellman_residual<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>, v: &ValueFn<T>) -> Result<T> {
    if v.space != Space::VSpace {
        return Err(Error::Domain {
            what: "bellman_residual",
            detail: "expects a v-space value function".into(),
        });
    }
    let mut worst = T::zero();
    for s in 0..m.n_states() {
        let mut best = T::neg_infinity();
        for &a in m.feasible(s) {
            best = best.max(aggregator_h(m, d, s, a, &v.values)?);
        }
        worst = worst.max((v.values[s] - best).abs() / m.omega()[s]);
    }
    Ok(worst)
}

/// classify, derive, iterate from zero, transform, extract the policy and
/// check the Bellman residual.
pub fn solve<T: Scalar>(m: &Mdp<T>, opts: &SolveOptions<T>) -> Result<SolveReport<T>> {
    let d = derive(m)?;
    solve_derived(m, &d, opts)
}

pub fn solve_derived<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    let zero = ValueFn::zero(m.n_states());
    let (w_star, trace) = value_iterate(m, d, &zero, opts.tol, opts.max_iter)?;
    let v_star = to_v(m, d, &w_star)?;
    let policy = extract_policy(m, d, &w_star)?;
    let bellman_residual = bellman_residual(m, d, &v_star)?;
    let last = trace.last().expect("at least one iteration");
    let one = T::one();
    Ok(SolveReport {
        case: d.case,
        operator: d.kind,
        theta: d.theta,
        m_bound: d.m_bound,
        c: d.c,
        delta: d.delta,
        banach_constant: trace[0].step_norm / (one - d.delta),
        initial_step: trace[0].step_norm,
        iterations: trace.len(),
        certified_error: last.aposteriori,
        trace,
        w_star,
        v_star,
        policy,
        bellman_residual,
    })
}

/// `||F 0 - 0||_omega`, the first step of value iteration from zero.
///
/// In the power-form cases `F 0 = r^theta`, which exceeds `r` wherever
/// `r < 1`, so `M` alone does not bound this step.
pub fn zero_step<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>) -> Result<T> {
    let f0 = apply_f_slice(m, d, &vec![T::zero(); m.n_states()])?;
    Ok(omega_norm(&f0, m.omega()))
}

/// Smallest `n` with `delta^n / (1 - delta) ||F 0||_omega <= tol`.
pub fn apriori_iterations<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>, tol: T) -> Result<usize> {
    let one = T::one();
    let lead = zero_step(m, d)? / (one - d.delta);
    if lead <= tol {
        return Ok(0);
    }
    if d.delta == T::zero() {
        return Ok(1);
    }
    let n = ((tol / lead).ln() / d.delta.ln()).ceil();
    Ok(n.to_usize().unwrap_or(usize::MAX))
}

/// `delta^n / (1 - delta) ||F 0||_omega`, the a-priori error after `n` steps from zero.
pub fn apriori_bound<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>, n: usize) -> Result<T> {
    let dn = pow_nonneg(d.delta, T::from_usize_lossy(n), "apriori bound")?;
    Ok(dn / (T::one() - d.delta) * zero_step(m, d)?)
}
