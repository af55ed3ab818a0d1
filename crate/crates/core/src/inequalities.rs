//! Pointwise identities and inequalities as signed margins.
//!
//! A checker returns a margin that is `≥ 0` when the statement holds on the
//! given input. Identities return `−residual`, scaled as documented on each
//! checker, so that every report is read the same way.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};
use crate::functionals::{
    bochner_min_eigenvalue, complex_sectional, flag_pinching, k_unnormalized, CanonicalPlane,
};
use crate::gallery;
use crate::io::OperatorFile;
use crate::operator::{bochner_operator, sharp, BivectorOperator, CurvatureOperator};
use crate::search::{start_rng, SearchOptions, Stiefel};

/// Slack subtracted from the measured flag pinching before it is used as `λ`.
pub const LAMBDA_SLACK: f64 = 1e-9;
/// Budget of each flag-pinching measurement for the operator pools.
pub const POOL_BUDGET: usize = 20_000;
/// Margins this close to zero trigger the equality-case traces.
pub const EQUALITY_BAND: f64 = 1e-9;
/// Norm agreement required by the equality-case traces.
pub const EQUALITY_NORM_TOL: f64 = 1e-5;
/// Above this `λ` the equality traces are not applied: at `λ = 1` equality
/// holds for vectors of any length.
pub const EQUALITY_LAMBDA_MAX: f64 = 1.0 - 1e-6;

pub const CHECKERS: [&str; 7] = [
    "polarization_vec",
    "polarization_scalar",
    "flag_sum",
    "berger",
    "csc_lower_bound",
    "sharp_identity",
    "bochner",
];

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn add(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `R(X,Y)Z`, defined by `⟨R(X,Y)Z, V⟩ = R(X,Y,Z,V)`.
pub fn curvature_vector(op: &BivectorOperator, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let n = op.n();
    let mut e = vec![0.0; n];
    (0..n)
        .map(|i| {
            e[i] = 1.0;
            let v = op.r(x, y, z, &e);
            e[i] = 0.0;
            v
        })
        .collect()
}

/// `|6R(X,Y)Z + R(Y,Z+X)(Z+X) − R(Y,Z−X)(Z−X) − R(X,Z+Y)(Z+Y) + R(X,Z−Y)(Z−Y)|`.
pub fn check_polarization_vec(op: &BivectorOperator, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let (zpx, zmx) = (add(z, x, 1.0), add(z, x, -1.0));
    let (zpy, zmy) = (add(z, y, 1.0), add(z, y, -1.0));
    let lhs = curvature_vector(op, x, y, z);
    let terms = [
        (-1.0, curvature_vector(op, y, &zpx, &zpx)),
        (1.0, curvature_vector(op, y, &zmx, &zmx)),
        (1.0, curvature_vector(op, x, &zpy, &zpy)),
        (-1.0, curvature_vector(op, x, &zmy, &zmy)),
    ];
    let mut diff: Vec<f64> = lhs.iter().map(|v| 6.0 * v).collect();
    for (s, t) in &terms {
        for (d, v) in diff.iter_mut().zip(t) {
            *d -= s * v;
        }
    }
    norm(&diff)
}

/// `|−R(X,Y,Z,W) − (1/12)·Σ|` for the twelve-term `k`-polarization.
pub fn check_polarization_scalar(
    op: &BivectorOperator,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    w: &[f64],
) -> f64 {
    let k = |a: &[f64], b: &[f64]| op.r(a, b, a, b);
    let (zpx, zmx) = (add(z, x, 1.0), add(z, x, -1.0));
    let (zpy, zmy) = (add(z, y, 1.0), add(z, y, -1.0));
    let group = |a: &[f64], b: &[f64], sign: f64, c: &[f64]| {
        -k(&add(a, b, sign), c) + k(a, c) + k(b, c)
    };
    let rhs = (group(y, w, 1.0, &zpx)
        + group(x, w, 1.0, &zmy)
        + group(y, w, -1.0, &zmx)
        + group(x, w, -1.0, &zpy))
        / 12.0;
    (-op.r(x, y, z, w) - rhs).abs()
}

fn require_orthogonal(vs: &[&[f64]], what: &str) -> Result<()> {
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            let d = dot(vs[a], vs[b]);
            let scale = norm(vs[a]) * norm(vs[b]);
            if d.abs() > 1e-10 * scale.max(1e-300) && d.abs() > 1e-14 {
                return Err(CurvError::BadFrame(format!(
                    "{what}: vectors {a} and {b} are not orthogonal (dot {d:e})"
                )));
            }
        }
    }
    Ok(())
}

/// Margins `(lower, upper)` of
/// `2λ/(1+λ)(b(Y,Y)+b(W,W)) ≤ b(Y+W,Y+W) ≤ 2/(1+λ)(b(Y,Y)+b(W,W))` with `b = R_e`.
pub fn check_flag_sum_bounds(
    op: &BivectorOperator,
    e: &[f64],
    y: &[f64],
    w: &[f64],
    lambda: f64,
) -> Result<(f64, f64)> {
    require_orthogonal(&[e, y, w], "flag sum")?;
    let b = |v: &[f64]| op.r(e, v, e, v);
    let sum = b(y) + b(w);
    let mixed = b(&add(y, w, 1.0));
    Ok((
        mixed - 2.0 * lambda / (1.0 + lambda) * sum,
        2.0 / (1.0 + lambda) * sum - mixed,
    ))
}

/// `(1−λ)[k(Y,Z)+k(X,Z)+k(X,W)+k(Y,W)+2k(X,Y)+2k(Z,W)] − 6(1+λ)|R(X,Y,Z,W)|`.
pub fn check_berger_bound(
    op: &BivectorOperator,
    lambda: f64,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    w: &[f64],
) -> Result<f64> {
    require_orthogonal(&[x, y, z, w], "berger")?;
    let k = |a: &[f64], b: &[f64]| op.r(a, b, a, b);
    let sum = k(y, z) + k(x, z) + k(x, w) + k(y, w) + 2.0 * k(x, y) + 2.0 * k(z, w);
    Ok((1.0 - lambda) * sum - 6.0 * (1.0 + lambda) * op.r(x, y, z, w).abs())
}

/// Unit direction of `v`, or `None` when `v` vanishes.
fn direction(v: &[f64]) -> Option<Vec<f64>> {
    let l = norm(v);
    (l > 1e-12).then(|| v.iter().map(|x| x / l).collect())
}

/// `R(U,V,Ū,V̄) − (2(4λ−1)/3)(k(X,Ŷ)+k(Z,Ŵ))` for `λ ≤ ¼`, and
/// `R(U,V,Ū,V̄) − (2(4λ−1)/3)k(X,Ŷ)` for `λ > ¼`. Terms whose direction
/// vector vanishes are dropped.
pub fn check_csc_lower_bound(op: &CurvatureOperator, lambda: f64, p: &CanonicalPlane) -> Result<f64> {
    if p.xi() > p.t() + 1e-12 {
        return Err(CurvError::BadFrame("plane is not ordered (|W| > |Y|)".into()));
    }
    let c = 2.0 * (4.0 * lambda - 1.0) / 3.0;
    let kxy = direction(&p.y).map_or(0.0, |yh| k_unnormalized(op, &p.x, &yh));
    let kzw = direction(&p.w).map_or(0.0, |wh| k_unnormalized(op, &p.z, &wh));
    let bound = if lambda <= 0.25 { c * (kxy + kzw) } else { c * kxy };
    Ok(complex_sectional(op, p) - bound)
}

/// Frobenius norm of `(Ric∧id − Rm) − Rm#I`.
pub fn check_sharp_identity(op: &CurvatureOperator) -> f64 {
    let id = BivectorOperator::identity(op.n());
    let s = sharp(op, &id).expect("same dimension");
    (&bochner_operator(op) - &s).norm()
}

fn require_odd(n: usize) -> Result<usize> {
    if n % 2 == 0 {
        return Err(CurvError::EvenDimension(n));
    }
    if n < 5 {
        return Err(CurvError::DimensionTooSmall { n, min: 5 });
    }
    Ok((n - 1) / 2)
}

/// `(n−3)/(4n−9)` for odd `n ≥ 5`.
pub fn vanishing_threshold(n: usize) -> Result<f64> {
    require_odd(n)?;
    Ok((n as f64 - 3.0) / (4.0 * n as f64 - 9.0))
}

/// `(8m−5)λ² + (6m−3)λ − 2(m−1)` with `m = (n−1)/2`.
pub fn discriminant(n: usize, lambda: f64) -> Result<f64> {
    let m = require_odd(n)? as f64;
    Ok((8.0 * m - 5.0) * lambda * lambda + (6.0 * m - 3.0) * lambda - 2.0 * (m - 1.0))
}

pub fn discriminant_positive(n: usize, lambda: f64) -> Result<bool> {
    Ok(discriminant(n, lambda)? > 0.0)
}

/// `2(m−1)/(8m−5)`, the pinching above which the Bochner term is positive.
pub fn bochner_threshold(n: usize) -> Result<f64> {
    let m = require_odd(n)? as f64;
    Ok(2.0 * (m - 1.0) / (8.0 * m - 5.0))
}

/// Smallest eigenvalue of `Ric∧id − Rm` (odd `n`).
pub fn check_bochner_positivity(op: &CurvatureOperator) -> Result<f64> {
    if op.n() % 2 == 0 {
        return Err(CurvError::EvenDimension(op.n()));
    }
    Ok(bochner_min_eigenvalue(op))
}

/// Input of one trial, sufficient to recompute its margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialInput {
    pub trial: usize,
    pub operator: OperatorFile,
    pub vectors: Vec<Vec<f64>>,
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub n: usize,
    pub trials: usize,
    pub min_margin: f64,
    pub worst_case: Option<TrialInput>,
    /// Trials whose near-equality violated the equal-norm conclusion.
    pub equality_violations: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Margin of one trial together with the equality-trace verdict.
struct Outcome {
    margin: f64,
    equality_ok: bool,
}

fn evaluate(name: &str, input: &TrialInput) -> Result<Outcome> {
    let op = input.operator.to_operator(false)?;
    let v = &input.vectors;
    let lambda = input.lambda.unwrap_or(0.0);
    let scale = |k: usize| (1.0 + op.norm()) * v[..k].iter().map(|x| norm(x)).product::<f64>().max(1e-300);
    let traced = op.norm() > 0.0 && lambda < EQUALITY_LAMBDA_MAX;
    let out = match name {
        "polarization_vec" => Outcome {
            margin: -check_polarization_vec(&op, &v[0], &v[1], &v[2]) / scale(3),
            equality_ok: true,
        },
        "polarization_scalar" => Outcome {
            margin: -check_polarization_scalar(&op, &v[0], &v[1], &v[2], &v[3]) / scale(4),
            equality_ok: true,
        },
        "sharp_identity" => Outcome {
            margin: -check_sharp_identity(&op) / (1.0 + op.norm()),
            equality_ok: true,
        },
        "flag_sum" => {
            let (lo, hi) = check_flag_sum_bounds(&op, &v[0], &v[1], &v[2], lambda)?;
            let near = lo.abs() <= EQUALITY_BAND || hi.abs() <= EQUALITY_BAND;
            let equal = (norm(&v[1]) - norm(&v[2])).abs() <= EQUALITY_NORM_TOL;
            Outcome {
                margin: lo.min(hi),
                equality_ok: !(traced && near) || equal,
            }
        }
        "berger" => {
            let m = check_berger_bound(&op, lambda, &v[0], &v[1], &v[2], &v[3])?;
            let norms: Vec<f64> = v.iter().map(|x| norm(x)).collect();
            let spread = norms.iter().cloned().fold(f64::MIN, f64::max)
                - norms.iter().cloned().fold(f64::MAX, f64::min);
            Outcome {
                margin: m,
                equality_ok: !(traced && m.abs() <= EQUALITY_BAND) || spread <= EQUALITY_NORM_TOL,
            }
        }
        "csc_lower_bound" => {
            let p = CanonicalPlane::new(v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone())?;
            Outcome {
                margin: check_csc_lower_bound(&op, lambda, &p)?,
                equality_ok: true,
            }
        }
        "bochner" => Outcome {
            margin: check_bochner_positivity(&op)?,
            equality_ok: true,
        },
        other => return Err(CurvError::UnknownChecker(other.into())),
    };
    Ok(out)
}

/// Recomputes the margin of a recorded trial.
pub fn replay(name: &str, input: &TrialInput) -> Result<f64> {
    Ok(evaluate(name, input)?.margin)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Orthonormal `p`-frame as separate vectors.
fn frame(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    let f = Stiefel::new(n, p).random(rng);
    (0..p).map(|c| f[c * n..(c + 1) * n].to_vec()).collect()
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// A pooled operator with its measured flag pinching.
#[derive(Clone, Debug)]
pub struct PooledOperator {
    pub operator: CurvatureOperator,
    pub lambda: f64,
}

/// `λ` used by the inequality checkers: measured pinching minus the slack.
fn checker_lambda(op: &CurvatureOperator, seed: u64) -> Option<f64> {
    let v = flag_pinching(op, &SearchOptions::new(POOL_BUDGET, seed)).ok()?.value?;
    let l = (v - LAMBDA_SLACK).min(1.0);
    (l > 0.0).then_some(l)
}

/// Flag-pinched operators for the inequality checkers: the named models
/// followed by samples whose targets sweep `(0, 1)`.
pub fn pinched_pool(n: usize, size: usize, seed: u64, min_target: f64) -> Vec<PooledOperator> {
    let mut named = vec![CurvatureOperator::identity(n)];
    if n >= 4 {
        named.push(gallery::section4_example(n).expect("n >= 4"));
    }
    if n % 2 == 0 && n >= 4 {
        named.push(gallery::fubini_study(n / 2).expect("m >= 2"));
    }
    let samples: Vec<Option<CurvatureOperator>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let frac = (i as f64 + 0.5) / size as f64;
            let target = min_target + (0.95 - min_target) * frac;
            gallery::random_flag_pinched(n, target, seed.wrapping_mul(1_000_003).wrapping_add(i as u64)).ok()
        })
        .collect();
    let ops: Vec<CurvatureOperator> = named.into_iter().chain(samples.into_iter().flatten()).collect();
    ops.into_par_iter()
        .enumerate()
        .filter_map(|(i, op)| {
            let lambda = checker_lambda(&op, seed.wrapping_add(i as u64))?;
            (lambda >= min_target - LAMBDA_SLACK).then_some(PooledOperator { operator: op, lambda })
        })
        .collect()
}

fn make_trial(
    name: &str,
    n: usize,
    trial: usize,
    seed: u64,
    pool: &[PooledOperator],
    fixed: Option<&CurvatureOperator>,
) -> TrialInput {
    let mut rng = start_rng(seed, 1 + trial as u64);
    let pick = |rng: &mut ChaCha8Rng| -> (CurvatureOperator, Option<f64>) {
        match fixed {
            Some(op) => (op.clone(), None),
            None if pool.is_empty() => {
                let s = rng.gen::<u64>();
                (gallery::random_bianchi(n, s), None)
            }
            None => {
                let p = &pool[trial % pool.len()];
                (p.operator.clone(), Some(p.lambda))
            }
        }
    };
    let (op, lambda) = pick(&mut rng);
    let lambda = lambda.or_else(|| fixed.and_then(|op| checker_lambda(op, seed)));
    let vectors = match name {
        "polarization_vec" => (0..3).map(|_| gaussian(&mut rng, n)).collect(),
        "polarization_scalar" => (0..4).map(|_| gaussian(&mut rng, n)).collect(),
        "flag_sum" => {
            let f = frame(&mut rng, n, 3);
            let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            vec![f[0].clone(), scaled(&f[1], a), scaled(&f[2], b)]
        }
        "berger" => {
            let f = frame(&mut rng, n, 4);
            f.iter().map(|v| scaled(v, rng.gen_range(0.1..1.0))).collect()
        }
        "csc_lower_bound" => {
            let f = frame(&mut rng, n, 4);
            // a quarter of the planes sit on the boundary strata t, ξ ∈ {0, 1}
            let corner = rng.gen_range(0..4) == 0;
            let (t, xi) = if corner {
                let t = [0.0, 1.0][rng.gen_range(0..2)];
                (t, [0.0, t][rng.gen_range(0..2)])
            } else {
                let t: f64 = rng.gen_range(0.0..1.0);
                (t, rng.gen_range(0.0..=t))
            };
            vec![f[0].clone(), scaled(&f[1], t.sqrt()), f[2].clone(), scaled(&f[3], xi.sqrt())]
        }
        _ => Vec::new(),
    };
    TrialInput {
        trial,
        operator: OperatorFile::dense(&op),
        vectors,
        lambda,
    }
}

fn resolve(names: &[String], n: usize) -> Result<Vec<&'static str>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            for c in CHECKERS {
                if c == "bochner" && n % 2 == 0 {
                    continue;
                }
                if c == "csc_lower_bound" || c == "berger" {
                    if n < 4 {
                        continue;
                    }
                }
                if !out.contains(&c) {
                    out.push(c);
                }
            }
            continue;
        }
        let c = CHECKERS
            .iter()
            .find(|c| **c == name.as_str())
            .ok_or_else(|| CurvError::UnknownChecker(name.clone()))?;
        if *c == "bochner" {
            require_odd(n)?;
        }
        if !out.contains(c) {
            out.push(*c);
        }
    }
    Ok(out)
}

/// Runs the named checkers (`"all"` expands to every checker applicable at `n`).
///
/// Identity checkers draw a fresh Bianchi operator per trial; inequality
/// checkers cycle through a pool of flag-pinched operators with `λ` set to
/// the measured pinching minus [`LAMBDA_SLACK`]. With `fixed`, every trial
/// uses that operator.
pub fn run_suite(
    names: &[String],
    n: usize,
    trials: usize,
    seed: u64,
    tol: f64,
    fixed: Option<&CurvatureOperator>,
) -> Result<Vec<CheckReport>> {
    if n < 3 {
        return Err(CurvError::DimensionTooSmall { n, min: 3 });
    }
    if let Some(op) = fixed {
        if op.n() != n {
            return Err(CurvError::DimensionMismatch {
                expected: n,
                got: op.n(),
            });
        }
    }
    let checkers = resolve(names, n)?;
    let pool_size = trials.clamp(1, 24);
    let needs_pool = |c: &str| matches!(c, "flag_sum" | "berger" | "csc_lower_bound" | "bochner");
    let general_pool = if fixed.is_none() && checkers.iter().any(|c| needs_pool(c) && *c != "bochner") {
        pinched_pool(n, pool_size, seed, 0.05)
    } else {
        Vec::new()
    };
    let mut reports = Vec::new();
    for name in checkers {
        let bochner_pool;
        let pool: &[PooledOperator] = match name {
            "bochner" if fixed.is_none() => {
                let thr = bochner_threshold(n)?;
                bochner_pool = pinched_pool(n, pool_size, seed, thr + 0.02)
                    .into_iter()
                    .filter(|p| p.lambda > thr)
                    .collect::<Vec<_>>();
                &bochner_pool
            }
            c if needs_pool(c) => &general_pool,
            _ => &[],
        };
        if needs_pool(name) && fixed.is_none() && pool.is_empty() {
            return Err(CurvError::SamplerFailed {
                lo: 0.0,
                hi: 1.0,
                lambda_lo: 0.0,
                lambda_hi: 0.0,
            });
        }
        let outcomes: Vec<Result<(f64, bool, TrialInput)>> = (0..trials)
            .into_par_iter()
            .map(|i| {
                let input = make_trial(name, n, i, seed, pool, fixed);
                let o = evaluate(name, &input)?;
                Ok((o.margin, o.equality_ok, input))
            })
            .collect();
        let mut worst: Option<(f64, TrialInput)> = None;
        let mut violations = 0;
        for r in outcomes {
            let (m, eq, input) = r?;
            if !eq {
                violations += 1;
            }
            let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
            if worst.as_ref().map_or(true, |w| m < w.0) {
                worst = Some((m, input));
            }
        }
        let min_margin = worst.as_ref().map_or(f64::INFINITY, |w| w.0);
        reports.push(CheckReport {
            name: name.to_string(),
            n,
            trials,
            min_margin,
            worst_case: worst.map(|w| w.1),
            equality_violations: violations,
            tolerance: tol,
            pass: min_margin >= -tol && violations == 0,
        });
    }
    Ok(reports)
}
