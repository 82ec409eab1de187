//! Shared generators for the integration suites.
#![allow(dead_code, clippy::excessive_precision)]

use ezdp::{derive, validate, CaseClass, DerivedParams, Mdp, RawModel};
use rand::Rng;

pub const CASES: [CaseClass; 4] = [
    CaseClass::Case1,
    CaseClass::Case2,
    CaseClass::Case3,
    CaseClass::Case4,
];

/// `(rho, gamma)` strictly inside the regime of `case`.
pub fn random_params(case: CaseClass, rng: &mut impl Rng) -> (f64, f64) {
    let (lo, hi) = match case {
        CaseClass::Case1 | CaseClass::Case2 => (0.1, 0.9),
        _ => (1.1, 3.0),
    };
    loop {
        let a: f64 = rng.gen_range(lo..hi);
        let b: f64 = rng.gen_range(lo..hi);
        if (a - b).abs() < 0.05 {
            continue;
        }
        let (small, large) = if a < b { (a, b) } else { (b, a) };
        return match case {
            CaseClass::Case1 | CaseClass::Case3 => (small, large),
            _ => (large, small),
        };
    }
}

fn random_row(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.01..1.0)
            }
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    if sum == 0.0 {
        let mut row = vec![0.0; n];
        row[rng.gen_range(0..n)] = 1.0;
        return row;
    }
    let mut row: Vec<f64> = raw.iter().map(|x| x / sum).collect();
    // put the rounding remainder on the largest entry so the row sums to 1
    let (imax, _) =
        row.iter().enumerate().fold(
            (0, f64::MIN),
            |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc },
        );
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != imax)
        .map(|(_, x)| x)
        .sum();
    row[imax] = 1.0 - rest;
    row
}

/// Random model of the given regime with `omega in [1, 3]` and a contraction
/// modulus drawn from `[0.5, max_delta]`. Draws are rejected until the
/// discount factor that realizes the modulus is at least 0.3.
pub fn random_model(
    case: CaseClass,
    max_delta: f64,
    rng: &mut impl Rng,
) -> (Mdp<f64>, DerivedParams<f64>) {
    loop {
        if let Some(found) = try_random_model(case, max_delta, rng) {
            return found;
        }
    }
}

fn try_random_model(
    case: CaseClass,
    max_delta: f64,
    rng: &mut impl Rng,
) -> Option<(Mdp<f64>, DerivedParams<f64>)> {
    let n = rng.gen_range(1..=8);
    let k = rng.gen_range(1..=4);
    let (rho, gamma) = random_params(case, rng);
    let feasible: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut acts: Vec<usize> = (0..k).filter(|_| rng.gen_bool(0.7)).collect();
            if acts.is_empty() {
                acts.push(rng.gen_range(0..k));
            }
            acts
        })
        .collect();
    let utility = (0..n)
        .map(|s| {
            (0..k)
                .map(|a| feasible[s].contains(&a).then(|| rng.gen_range(0.5..5.0)))
                .collect()
        })
        .collect();
    let transition: Vec<Vec<Option<Vec<f64>>>> = (0..n)
        .map(|s| {
            (0..k)
                .map(|a| feasible[s].contains(&a).then(|| random_row(n, rng)))
                .collect()
        })
        .collect();
    let omega: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();

    // delta is c beta^theta (Cases 1, 4) or c^(1/theta) beta, with c independent of beta
    let theta = (1.0 - gamma) / (1.0 - rho);
    let power_form = matches!(case, CaseClass::Case1 | CaseClass::Case4);
    let p = if power_form { 1.0 } else { theta };
    let mut c = 1.0_f64;
    for s in 0..n {
        for &a in &feasible[s] {
            let q = transition[s][a].as_ref().unwrap();
            let e: f64 = q.iter().zip(&omega).map(|(q, w)| q * w.powf(p)).sum();
            c = c.max(e / omega[s].powf(p));
        }
    }
    let target: f64 = rng.gen_range(0.5..max_delta);
    let beta = if power_form {
        (target / c).powf(1.0 / theta)
    } else {
        target / c.powf(1.0 / theta)
    };
    if !(0.3..0.999).contains(&beta) {
        return None;
    }
    let m = validate(RawModel {
        name: Some(format!("random {case:?}")),
        n_states: n,
        n_actions: k,
        feasible,
        utility,
        transition,
        beta,
        rho,
        gamma,
        omega: Some(omega),
    })
    .expect("generated model is valid");
    let d = derive(&m).expect("generated model contracts");
    assert!(d.delta < 1.0 && d.case == case);
    Some((m, d))
}

/// Single-state, single-action model with constant utility `u`.
pub fn constant_model(u: f64, beta: f64, rho: f64, gamma: f64) -> Mdp<f64> {
    validate(RawModel {
        name: Some("constant".into()),
        n_states: 1,
        n_actions: 1,
        feasible: vec![vec![0]],
        utility: vec![vec![Some(u)]],
        transition: vec![vec![Some(vec![1.0])]],
        beta,
        rho,
        gamma,
        omega: None,
    })
    .expect("constant model is valid")
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn load_fixture() -> Mdp<f64> {
    ezdp::cli::load_model(&fixture_path("two_state.json")).expect("fixture loads")
}

/// Brute-force values of the two-state fixture, computed at 40 digits
/// independently of the stopping rule.
pub const FIXTURE_W: [f64; 2] = [1.3212654225332129437, 1.3385992939397545784];
pub const FIXTURE_V: [f64; 2] = [3.0476162366029300182, 3.2107195050166630864];
pub const FIXTURE_POLICY: [usize; 2] = [1, 1];
