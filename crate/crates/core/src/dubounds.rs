//! Convergence constants from Du's fixed point theorem, for comparison with
//! the Banach rate of the transformed operators.
//!
//! For bounded models in the convex regime (`0 < rho < gamma < 1`) and the
//! concave regime (`1 < rho < gamma`) the operator
//!
//! ```text
//! (T v)(s) = opt_a [ r(s,a) + beta (sum_s' v(s') q(s'|s,a))^(1/theta) ]^theta
//! ```
//!
//! (opt = max when convex, min when concave) maps an order interval
//! `[g1, g2]` of constant functions into itself. A boundary condition with
//! constant `eps` gives `||v_n - v*|| <= B (1 - eps)^n`. The free parameter of
//! the interval (`y` for the upper end in the convex case, `x` for the lower
//! end in the concave case) is tuned to minimize `B (1 - eps)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{derive, omega_norm, validate, CaseClass, DerivedParams, Mdp, RawModel};
use crate::operators::apply_f_slice;
use crate::scalar::{pow_nonneg, Scalar};

/// Number of interior grid points used to bracket the optimum.
pub const SCAN_POINTS: usize = 64;
/// Golden-section tolerance on the bounded search variable.
pub const GOLDEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DuKind {
    /// Case 1, boundary condition `T g2 <= (1 - eps) g2 + eps g1`.
    Convex,
    /// Case 3, boundary condition `T g1 >= (1 - eps) g1 + eps g2`.
    Concave,
}

/// Summary statistics of `r` that drive the Du constants, plus the model
/// whose operator is evaluated.
#[derive(Debug, Clone)]
pub struct DuProfile<T> {
    pub kind: DuKind,
    /// `min_{(s,a)} r`
    pub m_low: T,
    /// `max_{(s,a)} r`
    pub m_high: T,
    /// `min_s max_a r`
    pub minmax: T,
    /// `max_s min_a r`
    pub maxmin: T,
    pub beta: T,
    pub theta: T,
    model: Mdp<T>,
    derived: DerivedParams<T>,
}

impl<T: Scalar> DuProfile<T> {
    pub fn from_model(m: &Mdp<T>) -> Result<Self> {
        let d = derive(m)?;
        let kind = match d.case {
            CaseClass::Case1 => DuKind::Convex,
            CaseClass::Case3 => DuKind::Concave,
            case => {
                return Err(Error::BoundaryConditionFails(format!(
                    "Du's theorem needs a convex (Case1) or concave (Case3) operator, model is {case:?}"
                )))
            }
        };
        let mut m_low = T::infinity();
        let mut m_high = T::neg_infinity();
        let mut minmax = T::infinity();
        let mut maxmin = T::neg_infinity();
        for s in 0..m.n_states() {
            let mut row_max = T::neg_infinity();
            let mut row_min = T::infinity();
            for &a in m.feasible(s) {
                row_max = row_max.max(d.r[s][a]);
                row_min = row_min.min(d.r[s][a]);
            }
            m_low = m_low.min(row_min);
            m_high = m_high.max(row_max);
            minmax = minmax.min(row_max);
            maxmin = maxmin.max(row_min);
        }
        if kind == DuKind::Concave && !(m_low > T::zero()) {
            return Err(Error::BoundaryConditionFails(
                "concave profile needs min r > 0".into(),
            ));
        }
        Ok(Self {
            kind,
            m_low,
            m_high,
            minmax,
            maxmin,
            beta: m.beta(),
            theta: d.theta,
            model: m.clone(),
            derived: d,
        })
    }

    /// Convex profile with `M = 1`, `min_s max_a r = 0`, `beta = 0.9`,
    /// `rho = 1/2`, `gamma = 3/4`.
    pub fn example1() -> Self {
        // state 0 only has r = 0; state 1 has r in {0, 1}
        let m = realize(
            &[&[0.0], &[0.0, 1.0]],
            T::lit(0.9),
            T::lit(0.5),
            T::lit(0.75),
        );
        Self::from_model(&m).expect("example 1 profile is convex")
    }

    /// Concave profile with `m = 1`, `M = 5`, `max_s min_a r = 3`,
    /// `beta = 0.9`, `rho = 1.25`, `gamma = 1.5`.
    pub fn example2() -> Self {
        let m = realize(
            &[&[3.0, 5.0], &[1.0, 5.0]],
            T::lit(0.9),
            T::lit(1.25),
            T::lit(1.5),
        );
        Self::from_model(&m).expect("example 2 profile is concave")
    }

    pub fn model(&self) -> &Mdp<T> {
        &self.model
    }

    pub fn derived(&self) -> &DerivedParams<T> {
        &self.derived
    }

    /// Open interval of the free parameter: `y in (0, inf)` convex, `x in (0, m)` concave.
    pub fn param_range(&self) -> (T, T) {
        match self.kind {
            DuKind::Convex => (T::zero(), T::infinity()),
            DuKind::Concave => (T::zero(), self.m_low),
        }
    }

    /// Constant interval ends `(g1, g2)` for parameter `p`.
    pub fn interval(&self, p: T) -> Result<(T, T)> {
        let one_minus_beta = T::one() - self.beta;
        match self.kind {
            DuKind::Convex => Ok((
                T::zero(),
                pow_nonneg((self.m_high + p) / one_minus_beta, self.theta, "g2")?,
            )),
            DuKind::Concave => Ok((
                pow_nonneg(p / one_minus_beta, self.theta, "g1")?,
                pow_nonneg(self.m_high / one_minus_beta, self.theta, "g2")?,
            )),
        }
    }

    /// Search variable `t in (0, 1)` to parameter.
    fn param_of(&self, t: T) -> T {
        match self.kind {
            DuKind::Convex => t / (T::one() - t),
            DuKind::Concave => t * self.m_low,
        }
    }

    /// All Du quantities at parameter `p`.
    pub fn evaluate(&self, p: T) -> Result<DuPoint<T>> {
        let (g1, g2) = self.interval(p)?;
        let m = &self.model;
        let d = &self.derived;
        let epsilon = du_epsilon_max(m, d, g1, g2, self.kind)?;
        let defect = boundary_defect(m, d, g1, g2, self.kind)?;
        let b = du_b(g1, g2, defect, epsilon);
        let rate = T::one() - epsilon;
        Ok(DuPoint {
            param: p,
            g1,
            g2,
            epsilon,
            b,
            rate,
            product: b * rate,
        })
    }
}

/// Builds a bounded model whose `r` table is given per state (one action per
/// entry), uniform transitions and unit weights.
fn realize<T: Scalar>(r_rows: &[&[f64]], beta: T, rho: T, gamma: T) -> Mdp<T> {
    let n = r_rows.len();
    let na = r_rows.iter().map(|r| r.len()).max().unwrap_or(1);
    let one = T::one();
    let inv = one / (one - rho);
    let uniform = vec![one / T::from_usize_lossy(n); n];
    let mut utility = vec![vec![None; na]; n];
    let mut transition = vec![vec![None; na]; n];
    let mut feasible = Vec::with_capacity(n);
    for (s, row) in r_rows.iter().enumerate() {
        feasible.push((0..row.len()).collect());
        for (a, &r) in row.iter().enumerate() {
            // u = (r / (1 - beta))^(1/(1-rho)) reproduces r up to rounding
            let u = pow_nonneg(T::lit(r) / (one - beta), inv, "realize").expect("r >= 0");
            utility[s][a] = Some(u);
            transition[s][a] = Some(uniform.clone());
        }
    }
    validate(RawModel {
        name: Some("du-profile".into()),
        n_states: n,
        n_actions: na,
        feasible,
        utility,
        transition,
        beta,
        rho,
        gamma,
        omega: None,
    })
    .expect("profile realization is a valid model")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuPoint<T> {
    pub param: T,
    pub g1: T,
    pub g2: T,
    pub epsilon: T,
    #[serde(rename = "B")]
    pub b: T,
    /// `1 - eps`
    pub rate: T,
    /// `B (1 - eps)`
    pub product: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// The Banach modulus is strictly smaller than the optimized Du rate.
    Banach,
    Du,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuBoundReport<T> {
    pub kind: DuKind,
    pub param_star: T,
    pub epsilon: T,
    #[serde(rename = "B")]
    pub b: T,
    pub rate: T,
    pub product: T,
    /// Minimizer of `1 - eps` alone, when one exists in the open range.
    pub rate_only: Option<DuPoint<T>>,
    /// More than one local minimum on the bracketing grid.
    pub multimodal: bool,
    pub banach_delta: T,
    /// `M / (1 - delta)`
    pub banach_l: T,
    /// `||F 0||_omega / (1 - delta)`
    pub banach_l_tight: T,
    pub winner: Verdict,
}

/// Du's operator on the model: power-form aggregator, max (convex) or min (concave).
pub fn du_operator<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    v: &[T],
    kind: DuKind,
) -> Result<Vec<T>> {
    let one = T::one();
    let theta = d.theta;
    let mut out = Vec::with_capacity(m.n_states());
    for s in 0..m.n_states() {
        let mut best: Option<T> = None;
        for &a in m.feasible(s) {
            let mean = m
                .transition(s, a)
                .iter()
                .zip(v)
                .fold(T::zero(), |acc, (&p, &x)| acc + p * x);
            let cont = pow_nonneg(mean, one / theta, "Du operator")?;
            let h = pow_nonneg(d.r[s][a] + m.beta() * cont, theta, "Du operator")?;
            best = Some(match (best, kind) {
                (None, _) => h,
                (Some(b), DuKind::Convex) => b.max(h),
                (Some(b), DuKind::Concave) => b.min(h),
            });
        }
        out.push(best.expect("feasible sets are nonempty"));
    }
    Ok(out)
}

/// Largest `eps in (0, 1)` satisfying the boundary condition pointwise, by
/// bisection on the (monotone) feasibility predicate.
///
/// First checks that `T` maps `[g1, g2]` into itself.
pub fn du_epsilon_max<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    g1: T,
    g2: T,
    kind: DuKind,
) -> Result<T> {
    if !(g1 < g2) {
        return Err(Error::BoundaryConditionFails(format!(
            "empty interval: g1 = {g1} is not below g2 = {g2}"
        )));
    }
    let n = m.n_states();
    let t_g1 = du_operator(m, d, &vec![g1; n], kind)?;
    let t_g2 = du_operator(m, d, &vec![g2; n], kind)?;
    let slack = T::epsilon() * T::lit(4.0) * g2;
    if let Some(s) = (0..n).find(|&s| t_g1[s] < g1 - slack || t_g2[s] > g2 + slack) {
        return Err(Error::BoundaryConditionFails(format!(
            "T does not map [{g1}, {g2}] into itself at state {s}"
        )));
    }

    let one = T::one();
    let holds = |eps: T| match kind {
        DuKind::Convex => t_g2.iter().all(|&t| t <= (one - eps) * g2 + eps * g1),
        DuKind::Concave => t_g1.iter().all(|&t| t >= (one - eps) * g1 + eps * g2),
    };
    let (mut lo, mut hi) = (T::zero(), one);
    if holds(hi) {
        return Err(Error::BoundaryConditionFails(
            "boundary condition holds with eps = 1 (degenerate interval)".into(),
        ));
    }
    let two = T::lit(2.0);
    for _ in 0..2000 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi || hi - lo <= T::epsilon() * hi {
            break;
        }
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == T::zero() {
        return Err(Error::BoundaryConditionFails(
            "no eps > 0 satisfies the boundary condition".into(),
        ));
    }
    Ok(lo)
}

/// `||T g2 - g2||` (convex) or `||T g1 - g1||` (concave) in the sup norm.
pub fn boundary_defect<T: Scalar>(
    m: &Mdp<T>,
    d: &DerivedParams<T>,
    g1: T,
    g2: T,
    kind: DuKind,
) -> Result<T> {
    let n = m.n_states();
    let g = match kind {
        DuKind::Convex => g2,
        DuKind::Concave => g1,
    };
    let tg = du_operator(m, d, &vec![g; n], kind)?;
    Ok(tg.iter().fold(T::zero(), |acc, &t| acc.max((t - g).abs())))
}

/// `B = ||g1 - g2|| + 2 defect / eps^2` (normal cone constant 1).
pub fn du_b<T: Scalar>(g1: T, g2: T, boundary_defect: T, epsilon: T) -> T {
    (g1 - g2).abs() + T::lit(2.0) * boundary_defect / (epsilon * epsilon)
}

/// `||F 0 - 0||_omega / (1 - delta)` for the case operator.
pub fn banach_l<T: Scalar>(m: &Mdp<T>, d: &DerivedParams<T>) -> Result<T> {
    let f0 = apply_f_slice(m, d, &vec![T::zero(); m.n_states()])?;
    Ok(omega_norm(&f0, m.omega()) / (T::one() - d.delta))
}

/// Golden-section minimization of `f` on `[a, b]` until the bracket is
/// narrower than `tol`.
pub fn golden_section_min<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    mut a: T,
    mut b: T,
    tol: T,
) -> (T, T) {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / T::lit(2.0);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)].into_iter().fold(
        (x, fx),
        |best, cand| if cand.1 < best.1 { cand } else { best },
    )
}

struct Bracket<T> {
    lo: T,
    hi: T,
    multimodal: bool,
}

/// Grid scan over the search variable; the best point must be interior.
fn bracket<T: Scalar>(mut f: impl FnMut(T) -> T, what: &str) -> Result<Bracket<T>> {
    let denom = T::from_usize_lossy(SCAN_POINTS + 1);
    let ts: Vec<T> = (1..=SCAN_POINTS)
        .map(|i| T::from_usize_lossy(i) / denom)
        .collect();
    let vals: Vec<T> = ts.iter().map(|&t| f(t)).collect();
    let (best, _) = vals.iter().enumerate().filter(|(_, v)| v.is_finite()).fold(
        (usize::MAX, T::infinity()),
        |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
    );
    if best == usize::MAX {
        return Err(Error::OptimizationFailed(format!(
            "{what}: objective not finite on the scan grid"
        )));
    }
    if best == 0 || best == SCAN_POINTS - 1 {
        return Err(Error::OptimizationFailed(format!(
            "{what}: no interior minimum bracketed (best grid point is at the edge of the range)"
        )));
    }
    let local_minima = (1..SCAN_POINTS - 1)
        .filter(|&i| vals[i].is_finite() && vals[i] < vals[i - 1] && vals[i] <= vals[i + 1])
        .count();
    Ok(Bracket {
        lo: ts[best - 1],
        hi: ts[best + 1],
        multimodal: local_minima > 1,
    })
}

fn minimize<T: Scalar>(
    profile: &DuProfile<T>,
    what: &str,
    pick: impl Fn(&DuPoint<T>) -> T,
) -> Result<(DuPoint<T>, bool)> {
    let objective = |t: T| {
        profile
            .evaluate(profile.param_of(t))
            .map(|p| pick(&p))
            .unwrap_or_else(|_| T::infinity())
    };
    let br = bracket(objective, what)?;
    let (t_star, _) = golden_section_min(objective, br.lo, br.hi, T::lit(GOLDEN_TOL));
    let point = profile.evaluate(profile.param_of(t_star))?;
    Ok((point, br.multimodal))
}

/// Minimizer of `1 - eps(p)` alone.
pub fn minimize_rate_only<T: Scalar>(profile: &DuProfile<T>) -> Result<DuPoint<T>> {
    minimize(profile, "rate-only minimization", |p| p.rate).map(|(p, _)| p)
}

/// Minimizes `B(p) (1 - eps(p))` and sets the result against the Banach constants.
pub fn du_optimize_rate<T: Scalar>(profile: &DuProfile<T>) -> Result<DuBoundReport<T>> {
    let (best, multimodal) = minimize(profile, "B(1-eps) minimization", |p| p.product)?;
    let rate_only = minimize_rate_only(profile).ok();
    let d = profile.derived();
    let banach_delta = d.delta;
    let banach_l_tight = banach_l(profile.model(), d)?;
    Ok(DuBoundReport {
        kind: profile.kind,
        param_star: best.param,
        epsilon: best.epsilon,
        b: best.b,
        rate: best.rate,
        product: best.product,
        rate_only,
        multimodal,
        banach_delta,
        banach_l: d.m_bound / (T::one() - banach_delta),
        banach_l_tight,
        winner: if banach_delta < best.rate {
            Verdict::Banach
        } else {
            Verdict::Du
        },
    })
}
