//! Epstein-Zin aggregator and the transformed Bellman operators.
//!
//! The raw aggregator lives in v-space:
//!
//! ```text
//! H(s,a,v) = [ r(s,a) + beta (sum_s' v(s')^(1-gamma) q(s'|s,a))^((1-rho)/(1-gamma)) ]^(1/(1-rho))
//! ```
//!
//! Substituting `w = v^(1-gamma)` (F1, F4) or `w = v^(1-rho)` (F2, F3) gives
//! the w-space aggregators
//!
//! ```text
//! power form  (F1, F4): [ r + beta (E w)^(1/theta) ]^theta
//! mean form   (F2, F3):   r + beta (E w^theta)^(1/theta)
//! ```
//!
//! which are contractions in the omega-norm. When the exponent of the
//! transform is negative (F3, F4) the transform is decreasing and the
//! maximization in v-space becomes a minimization in w-space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CaseClass, DerivedParams, Mdp, Space, ValueFn};
use crate::scalar::{pow_nonneg, Scalar};

/// Transformed Bellman operator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    F1,
    F2,
    F3,
    F4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    Max,
    Min,
}

impl Optimizer {
    /// `true` when `candidate` strictly improves on `incumbent`.
    pub fn improves<T: Scalar>(self, candidate: T, incumbent: T) -> bool {
        match self {
            Optimizer::Max => candidate > incumbent,
            Optimizer::Min => candidate < incumbent,
        }
    }
}

impl OperatorKind {
    /// Operator for a regime. `ThetaOne` goes to F2 when `rho < 1` and to F3
    /// when `rho > 1`.
    pub fn for_case(case: CaseClass, rho_above_one: bool) -> Option<Self> {
        match case {
            CaseClass::Case1 => Some(OperatorKind::F1),
            CaseClass::Case2 => Some(OperatorKind::F2),
            CaseClass::Case3 => Some(OperatorKind::F3),
            CaseClass::Case4 => Some(OperatorKind::F4),
            CaseClass::ThetaOne if rho_above_one => Some(OperatorKind::F3),
            CaseClass::ThetaOne => Some(OperatorKind::F2),
            CaseClass::Unsupported => None,
        }
    }

    pub fn optimizer(self) -> Optimizer {
        match self {
            OperatorKind::F1 | OperatorKind::F2 => Optimizer::Max,
            OperatorKind::F3 | OperatorKind::F4 => Optimizer::Min,
        }
    }

    /// F1 and F4 use `[r + beta (E w)^(1/theta)]^theta`.
    pub fn power_form(self) -> bool {
        matches!(self, OperatorKind::F1 | OperatorKind::F4)
    }

    /// Exponent `e` with `v = w^e`: `1/(1-gamma)` for F1/F4, `1/(1-rho)` for F2/F3.
    pub fn exponent_back<T: Scalar>(self, rho: T, gamma: T) -> T {
        let one = T::one();
        if self.power_form() {
            one / (one - gamma)
        } else {
            one / (one - rho)
        }
    }
}

/// A stationary decision rule: one feasible action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn action(&self, s: usize) -> usize {
        self.0[s]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Errors with the first state whose action is not admissible.
    pub fn check<T: Scalar>(&self, m: &Mdp<T>) -> Result<()> {
        if self.0.len() != m.n_states() {
            return Err(Error::Malformed(format!(
                "policy has {} entries for {} states",
                self.0.len(),
                m.n_states()
            )));
        }
        for (s, &a) in self.0.iter().enumerate() {
            if !m.is_feasible(s, a) {
                return Err(Error::InfeasibleAction {
                    state: s,
                    action: a,
                });
            }
        }
        Ok(())
    }
}

fn expect_space<T>(v: &ValueFn<T>, space: Space, what: &'static str) -> Result<()> {
    if v.space != space {
        return Err(Error::Domain {
            what,
            detail: format!("expected a {space:?} value function, got {:?}", v.space),
        });
    }
    Ok(())
}

fn expect_len<T>(v: &[T], n: usize, what: &'static str) -> Result<()> {
    if v.len() != n {
        return Err(Error::Domain {
            what,
            detail: format!("value function has {} entries for {n} states", v.len()),
        });
    }
    Ok(())
}

/// Raw Epstein-Zin aggregator `H(s, a, v)` on v-space values.
pub fn aggregator_h<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    s: usize,
    a: usize,
    v: &[T],
) -> Result<T> {
    let one = T::one();
    let zero = T::zero();
    let (rho, gamma) = (m.rho(), m.gamma());
    let mut inner = zero;
    for (sp, &p) in m.transition(s, a).iter().enumerate() {
        if p > zero {
            inner = inner + p * pow_nonneg(v[sp], one - gamma, "aggregator H: v^(1-gamma)")?;
        }
    }
    let cont = pow_nonneg(
        inner,
        (one - rho) / (one - gamma),
        "aggregator H: certainty equivalent",
    )?;
    pow_nonneg(
        d.r[s][a] + m.beta() * cont,
        one / (one - rho),
        "aggregator H: outer power",
    )
}

/// Transformed aggregator `H_k(s, a, w)` of the case operator on w-space values.
pub fn aggregator_w<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    s: usize,
    a: usize,
    w: &[T],
) -> Result<T> {
    let one = T::one();
    let zero = T::zero();
    let theta = d.theta;
    let row = m.transition(s, a);
    if d.kind.power_form() {
        let mut mean = zero;
        for (sp, &p) in row.iter().enumerate() {
            if p > zero {
                if w[sp] < zero {
                    return Err(negative_w(w[sp]));
                }
                mean = mean + p * w[sp];
            }
        }
        let cont = pow_nonneg(mean, one / theta, "power-form aggregator: (E w)^(1/theta)")?;
        pow_nonneg(
            d.r[s][a] + m.beta() * cont,
            theta,
            "power-form aggregator: outer power",
        )
    } else {
        let mut mean = zero;
        for (sp, &p) in row.iter().enumerate() {
            if p > zero {
                mean = mean + p * pow_nonneg(w[sp], theta, "mean-form aggregator: w^theta")?;
            }
        }
        let cont = pow_nonneg(
            mean,
            one / theta,
            "mean-form aggregator: (E w^theta)^(1/theta)",
        )?;
        Ok(d.r[s][a] + m.beta() * cont)
    }
}

fn negative_w<T: Scalar>(x: T) -> Error {
    Error::Domain {
        what: "w-space operator",
        detail: format!("negative value {x}"),
    }
}

/// Optimal value and lowest-index optimizing action of `H_k(s, ., w)`.
pub(crate) fn optimize_state<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    s: usize,
    w: &[T],
) -> Result<(T, usize)> {
    let opt = d.kind.optimizer();
    let mut best: Option<(T, usize)> = None;
    for &a in m.feasible(s) {
        let h = aggregator_w(m, d, s, a, w)?;
        match best {
            Some((b, _)) if !opt.improves(h, b) => {}
            _ => best = Some((h, a)),
        }
    }
    Ok(best.expect("feasible sets are nonempty"))
}

/// `F_k w`: per state, max (F1/F2) or min (F3/F4) of `H_k(s, ., w)`.
pub fn apply_f<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>, w: &ValueFn<T>) -> Result<ValueFn<T>> {
    expect_space(w, Space::WSpace, "apply_F")?;
    Ok(ValueFn::new(apply_f_slice(m, d, &w.values)?, Space::WSpace))
}

pub(crate) fn apply_f_slice<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    w: &[T],
) -> Result<Vec<T>> {
    expect_len(w, m.n_states(), "apply_F")?;
    (0..m.n_states())
        .map(|s| optimize_state(m, d, s, w).map(|(h, _)| h))
        .collect()
}

/// `F_{kf} w`: the case operator with the action fixed by `f`.
pub fn apply_policy_op<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    f: &Policy,
    w: &ValueFn<T>,
) -> Result<ValueFn<T>> {
    expect_space(w, Space::WSpace, "apply_policy_op")?;
    f.check(m)?;
    Ok(ValueFn::new(
        policy_op_slice(m, d, f, &w.values)?,
        Space::WSpace,
    ))
}

pub(crate) fn policy_op_slice<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    f: &Policy,
    w: &[T],
) -> Result<Vec<T>> {
    expect_len(w, m.n_states(), "apply_policy_op")?;
    (0..m.n_states())
        .map(|s| aggregator_w(m, d, s, f.action(s), w))
        .collect()
}

/// `v = w^(exponent_back)`.
pub fn to_v<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>, w: &ValueFn<T>) -> Result<ValueFn<T>> {
    expect_space(w, Space::WSpace, "to_v")?;
    let e = d.kind.exponent_back(m.rho(), m.gamma());
    let values = w
        .values
        .iter()
        .map(|&x| pow_nonneg(x, e, "to_v"))
        .collect::<Result<_>>()?;
    Ok(ValueFn::new(values, Space::VSpace))
}

/// Inverse of [`to_v`]: `w = v^(1/exponent_back)`.
pub fn to_w<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>, v: &ValueFn<T>) -> Result<ValueFn<T>> {
    expect_space(v, Space::VSpace, "to_w")?;
    let e = T::one() / d.kind.exponent_back(m.rho(), m.gamma());
    let values = v
        .values
        .iter()
        .map(|&x| pow_nonneg(x, e, "to_w"))
        .collect::<Result<_>>()?;
    Ok(ValueFn::new(values, Space::WSpace))
}

/// Raw Bellman operator in v-space, `(T v)(s) = max_a H(s, a, v)`.
pub fn bellman_v<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>, v: &[T]) -> Result<Vec<T>> {
    expect_len(v, m.n_states(), "bellman_v")?;
    (0..m.n_states())
        .map(|s| {
            let mut best = T::neg_infinity();
            for &a in m.feasible(s) {
                best = best.max(aggregator_h(m, d, s, a, v)?);
            }
            Ok(best)
        })
        .collect()
}
