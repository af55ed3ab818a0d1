//! Derivative-free multistart minimization over Stiefel manifolds.
//!
//! Points of `St(n,p)` are stored column-major as `n·p` floats with
//! orthonormal columns; `p = 1` is the unit sphere. The search runs three
//! phases on a fixed evaluation budget: exploration (caller-supplied
//! candidates such as grids, then seeded random frames), compass search
//! from the best `starts` explored points, and a fine polish of the winner.
//! Results depend only on the options, never on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub const DEFAULT_STARTS: usize = 64;
pub const DEFAULT_BUDGET: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchOptions {
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
}

impl SearchOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            starts: DEFAULT_STARTS,
            seed,
        }
    }
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self::new(DEFAULT_BUDGET, 0)
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// `St(n,p)`: `n×p` matrices with orthonormal columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stiefel {
    pub n: usize,
    pub p: usize,
}

impl Stiefel {
    pub fn new(n: usize, p: usize) -> Self {
        assert!(p >= 1 && p <= n, "need 1 <= p <= n");
        Self { n, p }
    }

    pub fn sphere(n: usize) -> Self {
        Self::new(n, 1)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n * self.p
    }

    pub fn random<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let mut x: Vec<f64> = (0..self.ambient_dim())
                .map(|_| rng.sample(StandardNormal))
                .collect();
            if self.retract(&mut x) {
                return x;
            }
        }
    }

    /// Modified Gram–Schmidt in place; `false` if the columns are degenerate.
    pub fn retract(&self, x: &mut [f64]) -> bool {
        let n = self.n;
        for c in 0..self.p {
            for prev in 0..c {
                let dot: f64 = (0..n).map(|i| x[prev * n + i] * x[c * n + i]).sum();
                for i in 0..n {
                    x[c * n + i] -= dot * x[prev * n + i];
                }
            }
            let norm = (0..n).map(|i| x[c * n + i].powi(2)).sum::<f64>().sqrt();
            if !(norm > 1e-12) {
                return false;
            }
            for i in 0..n {
                x[c * n + i] /= norm;
            }
        }
        true
    }

    pub fn column<'a>(&self, x: &'a [f64], c: usize) -> &'a [f64] {
        &x[c * self.n..(c + 1) * self.n]
    }
}

/// Unit vectors of the integer points on the surface of the cube
/// `max|xᵢ| = k`, one per antipodal pair (first nonzero coordinate positive).
///
/// The lattice contains the coordinate axes and all `±1` diagonals.
pub fn sphere_lattice(n: usize, k: i64) -> Vec<Vec<f64>> {
    let side = (2 * k + 1) as usize;
    let total = side.pow(n as u32);
    let mut out = Vec::new();
    let mut coords = vec![0i64; n];
    for code in 0..total {
        let mut c = code;
        for x in coords.iter_mut() {
            *x = (c % side) as i64 - k;
            c /= side;
        }
        if coords.iter().map(|x| x.abs()).max() != Some(k) {
            continue;
        }
        let first = coords.iter().find(|&&x| x != 0).copied().unwrap_or(0);
        if first < 0 {
            continue;
        }
        let norm = coords.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
        out.push(coords.iter().map(|&x| x as f64 / norm).collect());
    }
    out
}

/// Largest cube lattice on `S^{n−1}` with at most `limit` points.
pub fn sphere_lattice_within(n: usize, limit: usize) -> Vec<Vec<f64>> {
    let count = |k: i64| {
        let a = (2 * k + 1) as f64;
        let b = (2 * k - 1) as f64;
        ((a.powi(n as i32) - b.powi(n as i32)) / 2.0) as usize
    };
    let mut k = 1;
    while k < 64 && count(k + 1) <= limit {
        k += 1;
    }
    if count(k) > limit {
        return Vec::new();
    }
    sphere_lattice(n, k)
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub(crate) fn start_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Compass search with opportunistic polling and step halving.
fn compass<F>(
    space: Stiefel,
    f: &F,
    mut x: Vec<f64>,
    mut fx: f64,
    h0: f64,
    h_min: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64, usize)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = space.ambient_dim();
    let mut h = h0;
    let mut evals = 0;
    let mut y = vec![0.0; dim];
    let mut first = 0;
    while evals < budget && h >= h_min {
        let mut improved = false;
        for off in 0..dim {
            let coord = (first + off) % dim;
            for sign in [1.0, -1.0] {
                if evals >= budget {
                    break;
                }
                y.copy_from_slice(&x);
                y[coord] += sign * h;
                if !space.retract(&mut y) {
                    continue;
                }
                let fy = sanitize(f(&y));
                evals += 1;
                if fy < fx {
                    std::mem::swap(&mut x, &mut y);
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        first = (first + 1) % dim;
        if !improved {
            for _ in 0..4 {
                if evals >= budget {
                    break;
                }
                let d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                for i in 0..dim {
                    y[i] = x[i] + h * d[i] / dn;
                }
                if !space.retract(&mut y) {
                    continue;
                }
                let fy = sanitize(f(&y));
                evals += 1;
                if fy < fx {
                    std::mem::swap(&mut x, &mut y);
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx, evals)
}

/// Multistart minimization of `f` over `space`.
///
/// `candidates` are evaluated first (up to a quarter of the budget, more
/// if the caller supplies more), then random frames fill the exploration
/// phase.
pub fn minimize<F>(
    space: Stiefel,
    f: F,
    candidates: &[Vec<f64>],
    opts: &SearchOptions,
) -> SearchOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let budget = opts.budget.max(16);
    let starts = opts.starts.clamp(1, budget / 8);
    let explore = (budget / 4).max(starts).max(candidates.len().min(budget / 2));

    let mut pool: Vec<(f64, usize, Vec<f64>)> = Vec::with_capacity(explore);
    let mut rng = start_rng(opts.seed, 0);
    for (i, c) in candidates.iter().take(explore).enumerate() {
        let mut x = c.clone();
        if space.retract(&mut x) {
            pool.push((sanitize(f(&x)), i, x));
        }
    }
    let mut used = pool.len();
    while used < explore {
        let x = space.random(&mut rng);
        pool.push((sanitize(f(&x)), used, x));
        used += 1;
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    pool.truncate(starts);

    let local_budget = (budget - used) * 3 / 4 / pool.len().max(1);
    let seed = opts.seed;
    let locals: Vec<(Vec<f64>, f64, usize)> = pool
        .into_par_iter()
        .enumerate()
        .map(|(i, (fx, _, x))| {
            let mut rng = start_rng(seed, 1 + i as u64);
            compass(space, &f, x, fx, 0.1, 1e-10, local_budget, &mut rng)
        })
        .collect();

    let mut evaluations = used;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (x, fx, e) in locals {
        evaluations += e;
        if best.as_ref().map_or(true, |b| fx < b.1) {
            best = Some((x, fx));
        }
    }
    let (x, fx) = best.expect("at least one start");
    let remaining = budget.saturating_sub(evaluations);
    let mut rng = start_rng(seed, u64::MAX);
    let (x, fx, e) = compass(space, &f, x, fx, 1e-3, 1e-13, remaining, &mut rng);
    SearchOutcome {
        point: x,
        value: fx,
        evaluations: evaluations + e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts_and_contents() {
        let pts = sphere_lattice(3, 1);
        assert_eq!(pts.len(), 13);
        assert!(pts.iter().any(|p| p == &vec![1.0, 0.0, 0.0]));
        for p in &pts {
            let n: f64 = p.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-15);
        }
        assert!(sphere_lattice_within(4, 2000).len() <= 2000);
    }

    #[test]
    fn retraction_orthonormalizes() {
        let s = Stiefel::new(5, 3);
        let mut rng = start_rng(3, 0);
        let x = s.random(&mut rng);
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = s.column(&x, a).iter().zip(s.column(&x, b)).map(|(p, q)| p * q).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn finds_smallest_rayleigh_quotient() {
        // min xᵀAx on S³ is the smallest eigenvalue
        let a = [3.0, 1.0, 0.5, 2.0];
        let f = |x: &[f64]| x.iter().zip(a.iter()).map(|(v, w)| w * v * v).sum::<f64>()
            + 0.3 * x[0] * x[2];
        let out = minimize(Stiefel::sphere(4), f, &[], &SearchOptions::new(20_000, 1));
        let exact = {
            // 2x2 block on coordinates 0 and 2
            let (p, q, r) = (3.0f64, 0.15f64, 0.5f64);
            ((p + r) - ((p - r).powi(2) + 4.0 * q * q).sqrt()) / 2.0
        };
        assert!((out.value - exact.min(1.0)).abs() < 1e-10, "{}", out.value);
        assert!(out.evaluations <= 20_000);
    }

    #[test]
    fn deterministic_given_seed() {
        let f = |x: &[f64]| (x[0] * x[5] - x[1] * x[4]).powi(2) - x[2];
        let o = SearchOptions::new(5_000, 9);
        let a = minimize(Stiefel::new(3, 2), f, &[], &o);
        let b = minimize(Stiefel::new(3, 2), f, &[], &o);
        assert_eq!(a.point, b.point);
        assert_eq!(a.value, b.value);
    }
}
