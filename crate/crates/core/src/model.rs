//! Finite Markov decision model with Epstein-Zin preferences.
//!
//! An [`Mdp`] is only obtainable through [`validate`], so every instance in
//! circulation satisfies the structural invariants (nonempty feasible sets,
//! stochastic transition rows, nonnegative utilities, weights `>= 1`).
//! [`derive`] then computes the transformed reward table and the constants
//! that select and certify the contraction operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OperatorKind;
use crate::scalar::{pow_nonneg, Scalar};

/// Tolerance on `|sum_s' q(s'|s,a) - 1|` (widened to a few ulps for `f32`).
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Model description as read from a model file, before validation.
///
/// `utility[s][a]` and `transition[s][a]` may be `null` for infeasible pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n_states: usize,
    pub n_actions: usize,
    pub feasible: Vec<Vec<usize>>,
    pub utility: Vec<Vec<Option<T>>>,
    pub transition: Vec<Vec<Option<Vec<T>>>>,
    pub beta: T,
    pub rho: T,
    pub gamma: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<T>>,
}

/// A validated model. Fields are private; use the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<T> {
    name: Option<String>,
    n_states: usize,
    n_actions: usize,
    feasible: Vec<Vec<usize>>,
    utility: Vec<Vec<T>>,
    transition: Vec<Vec<Vec<T>>>,
    beta: T,
    rho: T,
    gamma: T,
    omega: Vec<T>,
}

impl<T: Scalar> Mdp<T> {
    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Admissible actions `A(s)`, in increasing index order as given.
    pub fn feasible(&self, s: usize) -> &[usize] {
        &self.feasible[s]
    }

    pub fn is_feasible(&self, s: usize, a: usize) -> bool {
        s < self.n_states && self.feasible[s].contains(&a)
    }

    /// Per-period utility; zero for infeasible pairs.
    pub fn utility(&self, s: usize, a: usize) -> T {
        self.utility[s][a]
    }

    /// Transition row `q(.|s,a)`; all zeros for infeasible pairs.
    pub fn transition(&self, s: usize, a: usize) -> &[T] {
        &self.transition[s][a]
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    /// Feasible `(s, a)` pairs in state-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.feasible
            .iter()
            .enumerate()
            .flat_map(|(s, acts)| acts.iter().map(move |&a| (s, a)))
    }

    /// Back to the unvalidated form, e.g. for writing a model file.
    pub fn to_raw(&self) -> RawModel<T> {
        let mut utility = vec![vec![None; self.n_actions]; self.n_states];
        let mut transition = vec![vec![None; self.n_actions]; self.n_states];
        for (s, a) in self.pairs() {
            utility[s][a] = Some(self.utility[s][a]);
            transition[s][a] = Some(self.transition[s][a].clone());
        }
        RawModel {
            name: self.name.clone(),
            n_states: self.n_states,
            n_actions: self.n_actions,
            feasible: self.feasible.clone(),
            utility,
            transition,
            beta: self.beta,
            rho: self.rho,
            gamma: self.gamma,
            omega: Some(self.omega.clone()),
        }
    }

    /// Same model with every utility multiplied by `k > 0`.
    pub fn scale_utility(&self, k: T) -> Result<Self> {
        let mut raw = self.to_raw();
        for row in raw.utility.iter_mut() {
            for u in row.iter_mut().flatten() {
                *u = *u * k;
            }
        }
        validate(raw)
    }

    /// Same model with a different weight function.
    pub fn with_omega(&self, omega: Vec<T>) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.omega = Some(omega);
        validate(raw)
    }
}

/// Parameter regime of `(rho, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseClass {
    /// `0 < rho < gamma < 1`
    Case1,
    /// `0 < gamma < rho < 1`
    Case2,
    /// `1 < rho < gamma`
    Case3,
    /// `1 < gamma < rho`
    Case4,
    /// `rho == gamma`
    ThetaOne,
    /// `rho < 1 < gamma` or `gamma < 1 < rho`
    Unsupported,
}

impl CaseClass {
    pub fn is_supported(self) -> bool {
        self != CaseClass::Unsupported
    }
}

/// Classifies the `(rho, gamma)` regime. Assumes both are positive and
/// different from one.
pub fn classify<T: Scalar>(rho: T, gamma: T) -> CaseClass {
    let one = T::one();
    if rho == gamma {
        CaseClass::ThetaOne
    } else if rho < one && gamma < one {
        if rho < gamma {
            CaseClass::Case1
        } else {
            CaseClass::Case2
        }
    } else if rho > one && gamma > one {
        if rho < gamma {
            CaseClass::Case3
        } else {
            CaseClass::Case4
        }
    } else {
        CaseClass::Unsupported
    }
}

/// Checks a raw description and builds an [`Mdp`].
///
/// Parameters are checked first, then the shape, then per-state and per-pair
/// invariants in state-major order; the first violation is returned.
pub fn validate<T: Scalar>(raw: RawModel<T>) -> Result<Mdp<T>> {
    let one = T::one();
    let zero = T::zero();

    if !(raw.beta >= zero && raw.beta < one) {
        return Err(bad("beta", format!("{} not in [0, 1)", raw.beta)));
    }
    for (name, p) in [("rho", raw.rho), ("gamma", raw.gamma)] {
        if !(p > zero) || !p.is_finite() {
            return Err(bad(name, format!("{p} must be a positive finite number")));
        }
        if p == one {
            return Err(bad(name, "must differ from 1".into()));
        }
    }

    let (ns, na) = (raw.n_states, raw.n_actions);
    if ns == 0 {
        return Err(bad("n_states", "must be positive".into()));
    }
    if na == 0 {
        return Err(bad("n_actions", "must be positive".into()));
    }
    if raw.feasible.len() != ns {
        return Err(malformed("feasible", ns, raw.feasible.len()));
    }
    if raw.utility.len() != ns {
        return Err(malformed("utility", ns, raw.utility.len()));
    }
    if raw.transition.len() != ns {
        return Err(malformed("transition", ns, raw.transition.len()));
    }
    let omega = match raw.omega {
        Some(w) if w.len() != ns => return Err(malformed("omega", ns, w.len())),
        Some(w) => w,
        None => vec![one; ns],
    };

    let negative_exponent = raw.rho > one;
    let row_tol = T::lit(ROW_SUM_TOL).max(T::epsilon() * T::lit(4.0));
    let mut utility = vec![vec![zero; na]; ns];
    let mut transition = vec![vec![vec![zero; ns]; na]; ns];
    let mut feasible = Vec::with_capacity(ns);

    for s in 0..ns {
        let acts = &raw.feasible[s];
        if acts.is_empty() {
            return Err(Error::EmptyFeasibleSet { state: s });
        }
        if raw.utility[s].len() != na {
            return Err(malformed(
                &format!("utility[{s}]"),
                na,
                raw.utility[s].len(),
            ));
        }
        if raw.transition[s].len() != na {
            return Err(malformed(
                &format!("transition[{s}]"),
                na,
                raw.transition[s].len(),
            ));
        }
        let mut sorted = acts.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != acts.len() {
            return Err(Error::Malformed(format!("feasible[{s}] repeats an action")));
        }
        if let Some(&a) = sorted.iter().find(|&&a| a >= na) {
            return Err(Error::Malformed(format!(
                "feasible[{s}] names action {a} but n_actions = {na}"
            )));
        }

        for &a in &sorted {
            let u = raw.utility[s][a].ok_or_else(|| {
                Error::Malformed(format!("utility[{s}][{a}] is null for a feasible pair"))
            })?;
            if !u.is_finite() {
                return Err(Error::Malformed(format!("utility[{s}][{a}] is not finite")));
            }
            if u < zero {
                return Err(Error::NegativeUtility {
                    state: s,
                    action: a,
                });
            }
            if negative_exponent && u == zero {
                return Err(Error::ZeroUtilityInNegativeExponentCase {
                    state: s,
                    action: a,
                });
            }
            utility[s][a] = u;

            let row = raw.transition[s][a].as_ref().ok_or_else(|| {
                Error::Malformed(format!("transition[{s}][{a}] is null for a feasible pair"))
            })?;
            if row.len() != ns {
                return Err(malformed(&format!("transition[{s}][{a}]"), ns, row.len()));
            }
            if let Some((next, &value)) = row.iter().enumerate().find(|(_, p)| !(**p >= zero)) {
                return Err(Error::NegativeTransition {
                    state: s,
                    action: a,
                    next,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
            let sum = row.iter().fold(zero, |acc, &p| acc + p);
            if !((sum - one).abs() <= row_tol) {
                return Err(Error::NonStochasticRow {
                    state: s,
                    action: a,
                    sum: sum.to_f64().unwrap_or(f64::NAN),
                });
            }
            transition[s][a] = row.clone();
        }
        feasible.push(sorted);
    }

    if let Some(w) = omega.iter().find(|w| !(**w >= one) || !w.is_finite()) {
        return Err(bad("omega", format!("weight {w} must be finite and >= 1")));
    }

    Ok(Mdp {
        name: raw.name,
        n_states: ns,
        n_actions: na,
        feasible,
        utility,
        transition,
        beta: raw.beta,
        rho: raw.rho,
        gamma: raw.gamma,
        omega,
    })
}

fn bad(name: &'static str, detail: String) -> Error {
    Error::BadParameter { name, detail }
}

fn malformed(field: &str, expected: usize, got: usize) -> Error {
    Error::Malformed(format!("{field} has length {got}, expected {expected}"))
}

/// Constants derived from a validated model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedParams<T> {
    /// `r[s][a] = (1 - beta) u(s,a)^(1 - rho)`; zero for infeasible pairs.
    pub r: Vec<Vec<T>>,
    /// `(1 - gamma) / (1 - rho)`
    pub theta: T,
    pub case: CaseClass,
    /// Operator family (and optimization direction) used for this regime.
    pub kind: OperatorKind,
    /// Smallest `M` with `r(s,a) <= M omega(s)`.
    pub m_bound: T,
    /// Growth constant of the weight under the kernel, at least 1.
    pub c: T,
    /// Contraction modulus of the case operator in the omega-norm.
    pub delta: T,
}

/// Computes `r`, `theta`, the regime, `M`, `c` and `delta`.
pub fn derive<T: Scalar>(m: &Mdp<T>) -> Result<DerivedParams<T>> {
    let case = classify(m.rho, m.gamma);
    if !case.is_supported() {
        return Err(Error::UnsupportedCase {
            rho: m.rho.to_f64().unwrap_or(f64::NAN),
            gamma: m.gamma.to_f64().unwrap_or(f64::NAN),
            case,
        });
    }
    let kind =
        OperatorKind::for_case(case, m.rho > T::one()).expect("supported case has an operator");
    let one = T::one();
    let theta = (one - m.gamma) / (one - m.rho);
    let r = reward_table(m)?;

    let m_bound = m
        .pairs()
        .map(|(s, a)| r[s][a] / m.omega[s])
        .fold(T::zero(), T::max);

    // Cases 1/4 control E[omega]; Cases 2/3 (and theta = 1) control E[omega^theta].
    let weight_power = match case {
        CaseClass::Case1 | CaseClass::Case4 => one,
        _ => theta,
    };
    let mut c = one;
    for (s, a) in m.pairs() {
        let mut num = T::zero();
        for (sp, &p) in m.transition[s][a].iter().enumerate() {
            if p > T::zero() {
                num = num + p * pow_nonneg(m.omega[sp], weight_power, "derive: omega power")?;
            }
        }
        let den = pow_nonneg(m.omega[s], weight_power, "derive: omega power")?;
        c = c.max(num / den);
    }

    let delta = match case {
        CaseClass::Case1 | CaseClass::Case4 => c * pow_nonneg(m.beta, theta, "derive: beta^theta")?,
        _ => pow_nonneg(c, one / theta, "derive: c^(1/theta)")? * m.beta,
    };
    if !(delta < one) {
        return Err(Error::NotAContraction {
            delta: delta.to_f64().unwrap_or(f64::NAN),
        });
    }

    Ok(DerivedParams {
        r,
        theta,
        case,
        kind,
        m_bound,
        c,
        delta,
    })
}

/// `r[s][a] = (1 - beta) u(s,a)^(1 - rho)` on feasible pairs, zero elsewhere.
pub fn reward_table<T: Scalar>(m: &Mdp<T>) -> Result<Vec<Vec<T>>> {
    let one = T::one();
    let mut r = vec![vec![T::zero(); m.n_actions]; m.n_states];
    for (s, a) in m.pairs() {
        r[s][a] = (one - m.beta) * pow_nonneg(m.utility[s][a], one - m.rho, "reward table")?;
    }
    Ok(r)
}

/// Which transformed space a value function lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    /// Transformed space where the Bellman operator contracts.
    WSpace,
    /// Recursive-utility space of the Bellman equation.
    VSpace,
}

/// Per-state values tagged with their space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFn<T> {
    pub values: Vec<T>,
    pub space: Space,
}

impl<T: Scalar> ValueFn<T> {
    pub fn new(values: Vec<T>, space: Space) -> Self {
        Self { values, space }
    }

    /// The zero function in w-space.
    pub fn zero(n: usize) -> Self {
        Self::new(vec![T::zero(); n], Space::WSpace)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sup_s |v(s)| / omega(s)`
    pub fn omega_norm(&self, omega: &[T]) -> T {
        omega_norm(&self.values, omega)
    }

    /// `sup_s |v(s) - other(s)| / omega(s)`
    pub fn omega_dist(&self, other: &Self, omega: &[T]) -> T {
        omega_dist(&self.values, &other.values, omega)
    }
}

pub fn omega_norm<T: Scalar>(v: &[T], omega: &[T]) -> T {
    v.iter()
        .zip(omega)
        .map(|(&x, &w)| x.abs() / w)
        .fold(T::zero(), T::max)
}

pub fn omega_dist<T: Scalar>(a: &[T], b: &[T], omega: &[T]) -> T {
    a.iter()
        .zip(b)
        .zip(omega)
        .map(|((&x, &y), &w)| (x - y).abs() / w)
        .fold(T::zero(), T::max)
}
