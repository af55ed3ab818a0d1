#![allow(dead_code)]

use curvlab::CurvatureOperator;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Haar-distributed orthogonal matrix via QR with sign correction.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let (q, rr) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if rr[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / l).collect()
}

/// Flag form eigenvalues by direct tensor evaluation on a Gram–Schmidt basis of `e^⊥`.
pub fn flag_eigenvalues_direct(op: &CurvatureOperator, e: &[f64]) -> Vec<f64> {
    let n = e.len();
    // the n−1 axes least aligned with e, orthogonalized twice
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs()));
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &k in &order[..n - 1] {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for _ in 0..2 {
            for b in std::iter::once(e).chain(basis.iter().map(|b| b.as_slice())) {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(v.into_iter().map(|x| x / l).collect());
    }
    let d = basis.len();
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            // polarized R(e, u, e, v)
            let s: Vec<f64> = basis[a].iter().zip(&basis[b]).map(|(x, y)| x + y).collect();
            let qa = op.r(e, &basis[a], e, &basis[a]);
            let qb = op.r(e, &basis[b], e, &basis[b]);
            m[(a, b)] = 0.5 * (op.r(e, &s, e, &s) - qa - qb);
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Point of `S^{n−1}` from hyperspherical angles.
fn sphere_point(angles: &[f64]) -> Vec<f64> {
    let n = angles.len() + 1;
    let mut v = vec![0.0; n];
    let mut s = 1.0;
    for (i, a) in angles.iter().enumerate() {
        v[i] = s * a.cos();
        s *= a.sin();
    }
    v[n - 1] = s;
    v
}

/// Hierarchical grid minimization of `f` over `S^{n−1}`: a full angular grid,
/// then repeated local grids of shrinking pitch around the best points.
pub fn sphere_grid_min<F: Fn(&[f64]) -> f64>(n: usize, f: F, coarse: usize, levels: usize) -> (f64, Vec<f64>) {
    let d = n - 1;
    let upper = |i: usize| if i + 1 == d { 2.0 * std::f64::consts::PI } else { std::f64::consts::PI };
    let mut seeds: Vec<(f64, Vec<f64>)> = Vec::new();
    let total = coarse.pow(d as u32);
    for code in 0..total {
        let mut c = code;
        let ang: Vec<f64> = (0..d)
            .map(|i| {
                let k = c % coarse;
                c /= coarse;
                upper(i) * (k as f64 + 0.5) / coarse as f64
            })
            .collect();
        let v = f(&sphere_point(&ang));
        seeds.push((v, ang));
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    seeds.truncate(8);
    let mut best = (f64::INFINITY, Vec::new());
    for (v0, mut ang) in seeds {
        let mut fv = v0;
        let mut pitch = std::f64::consts::PI / coarse as f64;
        for _ in 0..levels {
            let mut improved = true;
            while improved {
                improved = false;
                for code in 0..3usize.pow(d as u32) {
                    let mut c = code;
                    let trial: Vec<f64> = ang
                        .iter()
                        .map(|a| {
                            let k = c % 3;
                            c /= 3;
                            a + (k as f64 - 1.0) * pitch
                        })
                        .collect();
                    let v = f(&sphere_point(&trial));
                    if v < fv - 1e-15 {
                        fv = v;
                        ang = trial;
                        improved = true;
                    }
                }
            }
            pitch *= 0.5;
        }
        if fv < best.0 {
            best = (fv, sphere_point(&ang));
        }
    }
    best
}

/// Flag pinching by the grid oracle.
pub fn flag_pinching_oracle(op: &CurvatureOperator) -> f64 {
    let n = op.n();
    let scale = op.norm();
    sphere_grid_min(
        n,
        |e| {
            let ev = flag_eigenvalues_direct(op, e);
            let hi = ev[ev.len() - 1];
            if hi <= 1e-12 * scale {
                f64::INFINITY
            } else {
                ev[0] / hi
            }
        },
        10,
        24,
    )
    .0
}

/// `(min K, max K)` by the grid oracle over poles.
pub fn sectional_range_oracle(op: &CurvatureOperator) -> (f64, f64) {
    let n = op.n();
    let lo = sphere_grid_min(n, |e| flag_eigenvalues_direct(op, e)[0], 10, 24).0;
    let hi = -sphere_grid_min(n, |e| -flag_eigenvalues_direct(op, e)[n - 2], 10, 24).0;
    (lo, hi)
}

/// Rotation of ℝ⁴ from a pair of unit quaternions: `x ↦ p·x·q̄`.
pub fn rotation_from_quaternions(p: [f64; 4], q: [f64; 4]) -> DMatrix<f64> {
    let mul = |a: [f64; 4], b: [f64; 4]| {
        [
            a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
        ]
    };
    let qc = [q[0], -q[1], -q[2], -q[3]];
    let mut m = DMatrix::zeros(4, 4);
    for c in 0..4 {
        let mut e = [0.0; 4];
        e[c] = 1.0;
        let img = mul(mul(p, e), qc);
        for r in 0..4 {
            m[(r, c)] = img[r];
        }
    }
    m
}

/// Complex sectional curvature of the canonical plane built from the
/// columns of `g` with `Y = s·g₂`, `W = ±r·g₄`, evaluated through the
/// Hermitian form on `Λ²ℂ⁴`.
pub fn csc_hermitian(op: &CurvatureOperator, g: &DMatrix<f64>, s: f64, r: f64) -> f64 {
    let n = 4;
    let col = |c: usize| -> Vec<f64> { (0..n).map(|i| g[(i, c)]).collect() };
    let (x, y, z, w) = (col(0), col(1), col(2), col(3));
    let mut best = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let u: Vec<(f64, f64)> = (0..n).map(|i| (x[i], s * y[i])).collect();
        let v: Vec<(f64, f64)> = (0..n).map(|i| (z[i], sign * r * w[i])).collect();
        let dim = 6;
        let mut re = DVector::zeros(dim);
        let mut im = DVector::zeros(dim);
        let mut p = 0;
        for i in 0..n {
            for j in i + 1..n {
                // u_i v_j − u_j v_i
                let (a, b) = u[i];
                let (c, d) = v[j];
                let (e, f) = u[j];
                let (gg, h) = v[i];
                re[p] = (a * c - b * d) - (e * gg - f * h);
                im[p] = (a * d + b * c) - (e * h + f * gg);
                p += 1;
            }
        }
        let m = op.matrix();
        best = best.min(re.dot(&(m * &re)) + im.dot(&(m * &im)));
    }
    best
}

/// Minimum CSC over canonical planes at `n = 4`: grid over `S³×S³`
/// (rotations), then over `(s, r) ∈ [0,1]²`, then local refinement.
pub fn min_csc_oracle_n4(op: &CurvatureOperator) -> f64 {
    let k = 5usize;
    let quat = |a: &[f64]| -> [f64; 4] {
        let v = sphere_point(a);
        [v[0], v[1], v[2], v[3]]
    };
    let pi = std::f64::consts::PI;
    let ang = |i: usize, j: usize| if j == 2 { 2.0 * pi * (i as f64 + 0.5) / k as f64 } else { pi * (i as f64 + 0.5) / k as f64 };
    let sr = |g: &DMatrix<f64>| -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for a in 0..=10 {
            for b in 0..=10 {
                let (s, r) = (a as f64 / 10.0, b as f64 / 10.0);
                let v = csc_hermitian(op, g, s, r);
                if v < best.0 {
                    best = (v, s, r);
                }
            }
        }
        best
    };
    let mut pool: Vec<(f64, [f64; 8])> = Vec::new();
    for code in 0..k.pow(6) {
        let mut c = code;
        let mut a = [0.0; 6];
        for (j, slot) in a.iter_mut().enumerate() {
            *slot = ang(c % k, j % 3);
            c /= k;
        }
        let g = rotation_from_quaternions(quat(&a[..3]), quat(&a[3..]));
        let (v, s, r) = sr(&g);
        pool.push((v, [a[0], a[1], a[2], a[3], a[4], a[5], s, r]));
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    pool.truncate(6);
    let eval = |p: &[f64; 8]| {
        let g = rotation_from_quaternions(quat(&p[..3]), quat(&p[3..6]));
        csc_hermitian(op, &g, p[6].clamp(0.0, 1.0), p[7].clamp(0.0, 1.0))
    };
    let mut best = f64::INFINITY;
    for (mut fv, mut p) in pool {
        let mut h = 0.3;
        while h > 1e-9 {
            let mut improved = false;
            for i in 0..8 {
                for d in [h, -h] {
                    let mut q = p;
                    q[i] += d;
                    if i >= 6 {
                        q[i] = q[i].clamp(0.0, 1.0);
                    }
                    let v = eval(&q);
                    if v < fv {
                        fv = v;
                        p = q;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best = best.min(fv);
    }
    best
}
