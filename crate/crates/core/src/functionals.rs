//! Curvature functionals and their extremizers.
//!
//! Flag and sectional pinching are searched over poles `e ∈ S^{n−1}`: for
//! each pole the flag form `R_e|e^⊥` is diagonalized exactly, so the outer
//! search only moves `e`. Complex sectional curvature is searched over
//! orthonormal 4-frames; for a frame `(f₁,f₂,f₃,f₄)` the canonical plane
//! `X = f₁, Y = s·f₂, Z = f₃, W = ±r·f₄` has
//!
//! ```text
//! R(U,V,Ū,V̄) = k(f₁,f₃) + r²k(f₁,f₄) + s²k(f₂,f₃) + s²r²k(f₂,f₄) − 2sr|R(f₁,f₂,f₃,f₄)|
//! ```
//!
//! which is minimized over `(s,r) ∈ [0,1]²` in closed form in `r` and by a
//! bracketed scan in `s`, the endpoints (the degenerate strata `t = 0`,
//! `ξ = 0` and the isotropic corner `t = ξ = 1`) always included.

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CurvError, Result};
use crate::operator::{
    bivector_dim, bochner_operator, wedge_into, BivectorOperator, CurvatureOperator, FrameTag,
    SymmetricForm,
};
use crate::search::{minimize, sphere_lattice_within, SearchOptions, Stiefel};

/// Poles whose flag form has top eigenvalue below this (relative to `‖op‖`) are skipped.
pub const DEGENERATE_POLE_TOL: f64 = 1e-12;
/// Flag eigenvalues below `−NEGATIVE_TOL·‖op‖` mean the operator has negative sectional curvature.
pub const NEGATIVE_TOL: f64 = 1e-6;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense `R_{ijkl}` for fast contractions.
#[derive(Clone, Debug)]
pub struct DenseTensor {
    n: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(op: &BivectorOperator) -> Self {
        let n = op.n();
        let mut data = vec![0.0; n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        data[((i * n + j) * n + k) * n + l] = op.tensor_entry(i, j, k, l);
                    }
                }
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l]
    }

    /// `R_e(p,q) = R(e, e_p, e, e_q)` as an `n×n` matrix.
    pub fn flag_matrix(&self, e: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            if e[i] == 0.0 {
                continue;
            }
            for k in 0..n {
                let w = e[i] * e[k];
                if w == 0.0 {
                    continue;
                }
                for p in 0..n {
                    for q in 0..n {
                        out[(p, q)] += w * self.get(i, p, k, q);
                    }
                }
            }
        }
        out
    }
}

/// Orthonormal basis of `e^⊥` (columns of an `n×(n−1)` matrix) from the
/// Householder reflection taking `e` to the coordinate axis nearest it.
pub fn householder_complement(e: &[f64]) -> DMatrix<f64> {
    let n = e.len();
    let h = householder(e);
    let k = nearest_axis(e);
    let cols: Vec<usize> = (0..n).filter(|&c| c != k).collect();
    DMatrix::from_fn(n, n - 1, |r, c| h[(r, cols[c])])
}

fn nearest_axis(e: &[f64]) -> usize {
    let mut k = 0;
    for i in 1..e.len() {
        if e[i].abs() > e[k].abs() {
            k = i;
        }
    }
    k
}

fn householder(e: &[f64]) -> DMatrix<f64> {
    let n = e.len();
    let k = nearest_axis(e);
    let mut v: Vec<f64> = e.to_vec();
    v[k] += if e[k] >= 0.0 { 1.0 } else { -1.0 } * norm(e);
    let vv = dot(&v, &v);
    DMatrix::from_fn(n, n, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - 2.0 * v[r] * v[c] / vv
    })
}

/// Eigenvalues (ascending) of `R_e` restricted to `e^⊥`, via the Householder frame.
fn flag_eigenvalues(t: &DenseTensor, e: &[f64]) -> Vec<f64> {
    let a = t.flag_matrix(e);
    let h = householder(e);
    let k = nearest_axis(e);
    let b = &h * a * &h;
    let b = b.remove_row(k).remove_column(k);
    let mut ev: Vec<f64> = b.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `R_e` on `e^⊥`, the flag curvature form of the pole `e`.
#[derive(Clone, Debug)]
pub struct FlagForm {
    pole: Vec<f64>,
    basis: DMatrix<f64>,
    form: SymmetricForm,
}

impl FlagForm {
    pub fn pole(&self) -> &[f64] {
        &self.pole
    }

    /// Orthonormal basis of `e^⊥`, one vector per column.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn form(&self) -> &SymmetricForm {
        &self.form
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.form.eigenvalues()
    }

    /// `b(v,v)` for a vector `v` of the ambient space (expected in `e^⊥`).
    pub fn value(&self, v: &[f64]) -> f64 {
        let c = self.basis.transpose() * nalgebra::DVector::from_column_slice(v);
        c.dot(&(self.form.matrix() * &c))
    }
}

pub fn flag_form(op: &CurvatureOperator, e: &[f64]) -> Result<FlagForm> {
    let n = op.n();
    if e.len() != n {
        return Err(CurvError::DimensionMismatch {
            expected: n,
            got: e.len(),
        });
    }
    let len = norm(e);
    if (len - 1.0).abs() > 1e-10 {
        return Err(CurvError::NotUnit { norm: len });
    }
    let basis = householder_complement(e);
    let t = DenseTensor::new(op);
    let full = t.flag_matrix(e);
    let s = basis.transpose() * full * &basis;
    Ok(FlagForm {
        pole: e.to_vec(),
        form: SymmetricForm::with_frame(s, FrameTag::PoleComplement(e.to_vec())),
        basis,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Certification {
    /// Exploration included an exhaustive pole lattice.
    Grid,
    Multistart,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PinchingWitness {
    Flag {
        pole: Vec<f64>,
        min_direction: Vec<f64>,
        max_direction: Vec<f64>,
    },
    Sectional {
        min_plane: [Vec<f64>; 2],
        max_plane: [Vec<f64>; 2],
        min_curvature: f64,
        max_curvature: f64,
    },
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PinchingResult {
    /// `None` when the pinching ratio is undefined (e.g. the zero operator).
    pub value: Option<f64>,
    pub witness: PinchingWitness,
    pub evaluations: usize,
    pub certified_by: Certification,
}

/// Pole lattice for the exploration phase; exhaustive (certifying) for `n ≤ 5`.
fn pole_candidates(n: usize, budget: usize) -> (Vec<Vec<f64>>, Certification) {
    if n <= 5 {
        let pts = sphere_lattice_within(n, budget / 4);
        if !pts.is_empty() {
            return (pts, Certification::Grid);
        }
    }
    (sphere_lattice_within(n, (budget / 8).min(4000)), Certification::Multistart)
}

fn extreme_direction(t: &DenseTensor, e: &[f64], largest: bool) -> Vec<f64> {
    let a = t.flag_matrix(e);
    let basis = householder_complement(e);
    let s = basis.transpose() * a * &basis;
    let eig = SymmetricEigen::new(s);
    let mut idx = 0;
    for i in 1..eig.eigenvalues.len() {
        let better = if largest {
            eig.eigenvalues[i] > eig.eigenvalues[idx]
        } else {
            eig.eigenvalues[i] < eig.eigenvalues[idx]
        };
        if better {
            idx = i;
        }
    }
    let v = &basis * eig.eigenvectors.column(idx);
    v.iter().copied().collect()
}

/// `inf_e λ_min(R_e|e^⊥) / λ_max(R_e|e^⊥)` over unit poles `e`.
pub fn flag_pinching(op: &CurvatureOperator, opts: &SearchOptions) -> Result<PinchingResult> {
    let n = op.n();
    let scale = op.norm();
    let certified = pole_candidates(n, opts.budget);
    if scale == 0.0 {
        return Ok(PinchingResult {
            value: None,
            witness: PinchingWitness::None,
            evaluations: 0,
            certified_by: certified.1,
        });
    }
    let t = DenseTensor::new(op);
    let negative = AtomicBool::new(false);
    let worst_negative = std::sync::Mutex::new(0.0f64);
    let objective = |e: &[f64]| {
        let ev = flag_eigenvalues(&t, e);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo < -NEGATIVE_TOL * scale {
            negative.store(true, Ordering::Relaxed);
            let mut w = worst_negative.lock().unwrap();
            *w = w.min(lo);
        }
        if hi <= DEGENERATE_POLE_TOL * scale {
            f64::INFINITY
        } else {
            lo / hi
        }
    };
    let out = minimize(Stiefel::sphere(n), objective, &certified.0, opts);
    if negative.load(Ordering::Relaxed) {
        return Err(CurvError::NegativeSectional {
            value: *worst_negative.lock().unwrap(),
            threshold: -NEGATIVE_TOL * scale,
        });
    }
    if !out.value.is_finite() {
        return Ok(PinchingResult {
            value: None,
            witness: PinchingWitness::None,
            evaluations: out.evaluations,
            certified_by: certified.1,
        });
    }
    let e = out.point;
    Ok(PinchingResult {
        value: Some(out.value.max(0.0)),
        witness: PinchingWitness::Flag {
            min_direction: extreme_direction(&t, &e, false),
            max_direction: extreme_direction(&t, &e, true),
            pole: e,
        },
        evaluations: out.evaluations,
        certified_by: certified.1,
    })
}

/// Flag pinching in the nonpositive setting: `λ·R_e(X,X) ≥ R_e(Y,Y)` is the
/// ordinary condition for `−R`.
pub fn dual_flag_pinching(op: &CurvatureOperator, opts: &SearchOptions) -> Result<PinchingResult> {
    flag_pinching(&op.scaled(-1.0), opts)
}

/// `R(X,Y,X,Y)/|X∧Y|²`.
pub fn sectional(op: &CurvatureOperator, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = op.n();
    for v in [x, y] {
        if v.len() != n {
            return Err(CurvError::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let area2 = dot(x, x) * dot(y, y) - dot(x, y).powi(2);
    if area2 <= 1e-14 * dot(x, x) * dot(y, y) {
        return Err(CurvError::DegeneratePlane { area2 });
    }
    Ok(op.r(x, y, x, y) / area2)
}

/// `k(A,B) = R(A,B,A,B)`, not normalized by the area of the plane.
pub fn k_unnormalized(op: &CurvatureOperator, a: &[f64], b: &[f64]) -> f64 {
    op.r(a, b, a, b)
}

/// `(min K)/(max K)` over 2-planes.
///
/// Both extremes are searched over poles: the smallest (largest) sectional
/// curvature is the smallest (largest) flag eigenvalue over all poles.
pub fn sectional_pinching(op: &CurvatureOperator, opts: &SearchOptions) -> PinchingResult {
    let n = op.n();
    let scale = op.norm();
    let half = SearchOptions {
        budget: opts.budget / 2,
        ..*opts
    };
    let (cands, certified_by) = pole_candidates(n, half.budget);
    if scale == 0.0 {
        return PinchingResult {
            value: None,
            witness: PinchingWitness::None,
            evaluations: 0,
            certified_by,
        };
    }
    let t = DenseTensor::new(op);
    let lo = minimize(
        Stiefel::sphere(n),
        |e: &[f64]| flag_eigenvalues(&t, e)[0],
        &cands,
        &half,
    );
    let hi = minimize(
        Stiefel::sphere(n),
        |e: &[f64]| -*flag_eigenvalues(&t, e).last().unwrap(),
        &cands,
        &SearchOptions {
            seed: opts.seed.wrapping_add(1),
            ..half
        },
    );
    let (kmin, kmax) = (lo.value, -hi.value);
    let value = (kmax > DEGENERATE_POLE_TOL * scale).then(|| kmin / kmax);
    PinchingResult {
        value,
        witness: PinchingWitness::Sectional {
            min_plane: [lo.point.clone(), extreme_direction(&t, &lo.point, false)],
            max_plane: [hi.point.clone(), extreme_direction(&t, &hi.point, true)],
            min_curvature: kmin,
            max_curvature: kmax,
        },
        evaluations: lo.evaluations + hi.evaluations,
        certified_by,
    }
}

/// A complex 2-plane in normal form: `U = X + iY`, `V = Z + iW` with
/// `X,Y,Z,W` pairwise orthogonal, `|X| = |Z| = 1` and `0 ≤ ξ = |W|² ≤ t = |Y|² ≤ 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CanonicalPlane {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

const PLANE_TOL: f64 = 1e-12;

impl CanonicalPlane {
    /// Validates the normal form. The ordering `ξ ≤ t` is restored by
    /// exchanging `U` and `V`, which leaves the curvature unchanged.
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if [&y, &z, &w].iter().any(|v| v.len() != n) {
            return Err(CurvError::BadFrame("vectors of different lengths".into()));
        }
        let vs = [&x, &y, &z, &w];
        for a in 0..4 {
            for b in a + 1..4 {
                let d = dot(vs[a], vs[b]);
                if d.abs() > 1e-10 {
                    return Err(CurvError::BadFrame(format!(
                        "vectors {a} and {b} are not orthogonal (dot {d:e})"
                    )));
                }
            }
        }
        if (norm(&x) - 1.0).abs() > 1e-10 || (norm(&z) - 1.0).abs() > 1e-10 {
            return Err(CurvError::BadFrame("|X| and |Z| must be 1".into()));
        }
        let (t, xi) = (dot(&y, &y), dot(&w, &w));
        if t > 1.0 + 1e-10 || xi > 1.0 + 1e-10 {
            return Err(CurvError::BadFrame("|Y| and |W| must not exceed 1".into()));
        }
        if xi > t + PLANE_TOL {
            Ok(Self { x: z, y: w, z: x, w: y })
        } else {
            Ok(Self { x, y, z, w })
        }
    }

    /// Plane `X = f₁, Y = s·f₂, Z = f₃, W = r·f₄` from an orthonormal frame.
    pub fn from_frame(f: [&[f64]; 4], s: f64, r: f64) -> Result<Self> {
        let scale = |v: &[f64], c: f64| v.iter().map(|x| x * c).collect::<Vec<f64>>();
        Self::new(f[0].to_vec(), scale(f[1], s), f[2].to_vec(), scale(f[3], r))
    }

    /// Normal form of the complex plane spanned by `u0, v0 ∈ ℂⁿ`.
    ///
    /// `U` maximizes `Re⟨U,U⟩` (bilinear) among Hermitian-unit vectors of the
    /// plane, `V` is Hermitian-orthogonal to it with `⟨V,V⟩ ≥ 0`; then
    /// `U` and `V` are rescaled by positive reals so that `|X| = |Z| = 1`.
    /// The curvature of the plane changes by a positive factor only.
    pub fn from_complex(u0: &[Complex64], v0: &[Complex64]) -> Result<Self> {
        let n = u0.len();
        if v0.len() != n {
            return Err(CurvError::BadFrame("vectors of different lengths".into()));
        }
        let herm = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(p, q)| p.conj() * q).sum()
        };
        let bil = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(p, q)| p * q).sum()
        };
        // Hermitian orthonormal basis b1, b2 of the plane
        let n1 = herm(u0, u0).re.sqrt();
        if !(n1 > 1e-12) {
            return Err(CurvError::BadFrame("U is zero".into()));
        }
        let b1: Vec<Complex64> = u0.iter().map(|x| x / n1).collect();
        let proj = herm(&b1, v0);
        let mut b2: Vec<Complex64> = v0.iter().zip(&b1).map(|(v, b)| v - proj * b).collect();
        let n2 = herm(&b2, &b2).re.sqrt();
        if !(n2 > 1e-12 * herm(v0, v0).re.sqrt().max(1e-300)) {
            return Err(CurvError::BadFrame("U and V are complex-dependent".into()));
        }
        b2.iter_mut().for_each(|x| *x /= n2);
        // Re(cᵀSc) for c = a + ib as a real quadratic form in (a, b)
        let s = [[bil(&b1, &b1), bil(&b1, &b2)], [bil(&b2, &b1), bil(&b2, &b2)]];
        let q = DMatrix::from_fn(4, 4, |r, c| {
            let (ri, rb) = (r % 2, r / 2);
            let (ci, cb) = (c % 2, c / 2);
            let sv = s[ri][ci];
            match (rb, cb) {
                (0, 0) => sv.re,
                (1, 1) => -sv.re,
                _ => -sv.im,
            }
        });
        let eig = SymmetricEigen::new(q);
        let imax = eig.eigenvalues.imax();
        let col = eig.eigenvectors.column(imax);
        let c1 = [Complex64::new(col[0], col[2]), Complex64::new(col[1], col[3])];
        let c1n = (c1[0].norm_sqr() + c1[1].norm_sqr()).sqrt();
        let c1 = [c1[0] / c1n, c1[1] / c1n];
        // Hermitian complement in C²
        let mut c2 = [-c1[1].conj(), c1[0].conj()];
        let comb = |c: &[Complex64; 2]| -> Vec<Complex64> {
            b1.iter().zip(&b2).map(|(p, q)| c[0] * p + c[1] * q).collect()
        };
        let v = comb(&c2);
        let vv = bil(&v, &v);
        if vv.norm() > 0.0 {
            let phase = Complex64::from_polar(1.0, -vv.arg() / 2.0);
            c2 = [c2[0] * phase, c2[1] * phase];
        }
        let u = comb(&c1);
        let v = comb(&c2);
        let re = |a: &[Complex64]| a.iter().map(|x| x.re).collect::<Vec<f64>>();
        let im = |a: &[Complex64]| a.iter().map(|x| x.im).collect::<Vec<f64>>();
        let (x, y, z, w) = (re(&u), im(&u), re(&v), im(&v));
        let (nx, nz) = (norm(&x), norm(&z));
        let sc = |a: Vec<f64>, c: f64| a.into_iter().map(|t| t / c).collect::<Vec<f64>>();
        let (x, y, z, w) = (sc(x, nx), sc(y, nx), sc(z, nz), sc(w, nz));
        // remove rounding-level overlaps so the normal form validates exactly
        let mut vs = [x, y, z, w];
        for a in 1..4 {
            for b in 0..a {
                let nb = dot(&vs[b], &vs[b]);
                if nb > 0.0 {
                    let d = dot(&vs[a], &vs[b]) / nb;
                    if d.abs() < 1e-9 {
                        let vb = vs[b].clone();
                        vs[a].iter_mut().zip(&vb).for_each(|(p, q)| *p -= d * q);
                    }
                }
            }
        }
        let [x, y, z, w] = vs;
        Self::new(x, y, z, w)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `t = |Y|²`.
    pub fn t(&self) -> f64 {
        dot(&self.y, &self.y)
    }

    /// `ξ = |W|²`.
    pub fn xi(&self) -> f64 {
        dot(&self.w, &self.w)
    }

    pub fn u(&self) -> Vec<Complex64> {
        self.x.iter().zip(&self.y).map(|(a, b)| Complex64::new(*a, *b)).collect()
    }

    pub fn v(&self) -> Vec<Complex64> {
        self.z.iter().zip(&self.w).map(|(a, b)| Complex64::new(*a, *b)).collect()
    }

    /// `(|⟨U,U⟩|, |⟨V,V⟩|, |⟨U,V⟩|)` for the bilinear extension of the metric.
    pub fn isotropy_defects(&self) -> (f64, f64, f64) {
        let bil = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(p, q)| p * q).sum()
        };
        let (u, v) = (self.u(), self.v());
        (bil(&u, &u).norm(), bil(&v, &v).norm(), bil(&u, &v).norm())
    }
}

/// `R(U,V,Ū,V̄) = k(X,Z) + k(Y,W) + k(X,W) + k(Y,Z) − 2R(X,Y,Z,W)`.
pub fn complex_sectional(op: &CurvatureOperator, p: &CanonicalPlane) -> f64 {
    let (x, y, z, w) = (&p.x, &p.y, &p.z, &p.w);
    k_unnormalized(op, x, z) + k_unnormalized(op, y, w) + k_unnormalized(op, x, w)
        + k_unnormalized(op, y, z)
        - 2.0 * op.r(x, y, z, w)
}

/// `⟨Rm(U∧V), conj(U∧V)⟩` evaluated directly on complex vectors.
pub fn complex_sectional_hermitian(op: &BivectorOperator, u: &[Complex64], v: &[Complex64]) -> f64 {
    let n = u.len();
    let mut re = nalgebra::DVector::zeros(bivector_dim(n));
    let mut im = nalgebra::DVector::zeros(bivector_dim(n));
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            let c = u[i] * v[j] - u[j] * v[i];
            re[p] = c.re;
            im[p] = c.im;
            p += 1;
        }
    }
    let m = op.matrix();
    re.dot(&(m * &re)) + im.dot(&(m * &im))
}

/// Quadratic forms `⟨Rm(a∧b), c∧d⟩` on reusable buffers.
struct FrameEval<'a> {
    m: &'a DMatrix<f64>,
    dim: usize,
}

impl FrameEval<'_> {
    fn bivector(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        wedge_into(a, b, &mut out);
        out
    }

    fn form(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.dim {
            if b[c] == 0.0 {
                continue;
            }
            let col = self.m.column(c);
            let mut s = 0.0;
            for r in 0..self.dim {
                s += a[r] * col[r];
            }
            acc += s * b[c];
        }
        acc
    }

    /// `(k(f₁,f₃), k(f₁,f₄), k(f₂,f₃), k(f₂,f₄), R(f₁,f₂,f₃,f₄))`.
    fn coefficients(&self, f: [&[f64]; 4]) -> [f64; 5] {
        let w13 = self.bivector(f[0], f[2]);
        let w14 = self.bivector(f[0], f[3]);
        let w23 = self.bivector(f[1], f[2]);
        let w24 = self.bivector(f[1], f[3]);
        let w12 = self.bivector(f[0], f[1]);
        let w34 = self.bivector(f[2], f[3]);
        [
            self.form(&w13, &w13),
            self.form(&w14, &w14),
            self.form(&w23, &w23),
            self.form(&w24, &w24),
            self.form(&w12, &w34),
        ]
    }
}

/// `min_{s,r ∈ [0,1]} a + r²b + s²c + s²r²d − 2sr·e` for `e ≥ 0`; returns `(value, s, r)`.
pub(crate) fn min_over_scalings(a: f64, b: f64, c: f64, d: f64, e: f64) -> (f64, f64, f64) {
    let at = |s: f64| -> (f64, f64) {
        let qa = b + d * s * s;
        let qb = e * s;
        let qc = a + c * s * s;
        let val = |r: f64| qa * r * r - 2.0 * qb * r + qc;
        if qa > 0.0 {
            let r = (qb / qa).clamp(0.0, 1.0);
            let (v, v0, v1) = (val(r), val(0.0), val(1.0));
            // exact endpoints win ties against rounding in the interior formula
            if v0 <= v && v0 <= v1 {
                (v0, 0.0)
            } else if v1 <= v {
                (v1, 1.0)
            } else {
                (v, r)
            }
        } else {
            let (v0, v1) = (val(0.0), val(1.0));
            if v0 <= v1 {
                (v0, 0.0)
            } else {
                (v1, 1.0)
            }
        }
    };
    const GRID: usize = 16;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut best_i = 0;
    for i in 0..=GRID {
        let s = i as f64 / GRID as f64;
        let (v, r) = at(s);
        if v < best.0 {
            best = (v, s, r);
            best_i = i;
        }
    }
    // golden-section refinement in the bracket around the best grid point
    let mut lo = best_i.saturating_sub(1) as f64 / GRID as f64;
    let mut hi = (best_i + 1).min(GRID) as f64 / GRID as f64;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (at(x1).0, at(x2).0);
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = at(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = at(x2).0;
        }
    }
    let s = 0.5 * (lo + hi);
    let (v, r) = at(s);
    if v < best.0 {
        best = (v, s, r);
    }
    best
}

/// Coordinate frames (ordered choices of distinct axes), capped.
fn coordinate_frames(n: usize, p: usize, cap: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; p];
    fn rec(n: usize, p: usize, depth: usize, idx: &mut Vec<usize>, out: &mut Vec<Vec<f64>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if depth == p {
            let mut f = vec![0.0; n * p];
            for (c, &i) in idx.iter().enumerate() {
                f[c * n + i] = 1.0;
            }
            out.push(f);
            return;
        }
        for i in 0..n {
            if idx[..depth].contains(&i) {
                continue;
            }
            idx[depth] = i;
            rec(n, p, depth + 1, idx, out, cap);
        }
    }
    rec(n, p, 0, &mut idx, &mut out, cap);
    out
}

/// Minimum of the complex sectional curvature over canonical planes.
#[derive(Clone, Debug, Serialize)]
pub struct CscMinimum {
    pub value: f64,
    pub witness: CanonicalPlane,
    pub evaluations: usize,
}

fn frame_columns(frame: &[f64], n: usize, p: usize) -> Vec<&[f64]> {
    (0..p).map(|c| &frame[c * n..(c + 1) * n]).collect()
}

/// `inf` of [`complex_sectional`] over canonical planes.
///
/// For `n = 3` the search runs over 3-frames with `W = 0`; for `n = 2` only
/// the real plane remains.
pub fn min_complex_sectional(op: &CurvatureOperator, opts: &SearchOptions) -> CscMinimum {
    let n = op.n();
    let p = n.min(4);
    let ev = FrameEval {
        m: op.matrix(),
        dim: op.dim(),
    };
    let zero = vec![0.0; n];
    let coeffs = |frame: &[f64]| -> [f64; 5] {
        let cols = frame_columns(frame, n, p);
        match p {
            4 => ev.coefficients([cols[0], cols[1], cols[2], cols[3]]),
            3 => {
                let c = ev.coefficients([cols[0], cols[1], cols[2], &zero]);
                [c[0], 0.0, c[2], 0.0, 0.0]
            }
            _ => {
                let c = ev.coefficients([cols[0], &zero, cols[1], &zero]);
                [c[0], 0.0, 0.0, 0.0, 0.0]
            }
        }
    };
    let objective = |frame: &[f64]| {
        let [a, b, c, d, e] = coeffs(frame);
        min_over_scalings(a, b, c, d, e.abs()).0
    };
    let cands = coordinate_frames(n, p, opts.budget / 8);
    let out = minimize(Stiefel::new(n, p), objective, &cands, opts);
    let [a, b, c, d, e] = coeffs(&out.point);
    let (value, s, r) = min_over_scalings(a, b, c, d, e.abs());
    let cols = frame_columns(&out.point, n, p);
    let sign = if e < 0.0 { -1.0 } else { 1.0 };
    let f4: Vec<f64> = match p {
        4 => cols[3].iter().map(|x| x * sign).collect(),
        _ => zero.clone(),
    };
    let f2: &[f64] = if p >= 3 { cols[1] } else { &zero };
    let f3: &[f64] = if p >= 3 { cols[2] } else { cols[1] };
    let witness = CanonicalPlane::from_frame([cols[0], f2, f3, &f4], s, r)
        .expect("search frames are orthonormal");
    CscMinimum {
        value,
        witness,
        evaluations: out.evaluations,
    }
}

/// `inf` of the complex sectional curvature over isotropic planes (`t = ξ = 1`).
pub fn min_isotropic(op: &CurvatureOperator, opts: &SearchOptions) -> Result<CscMinimum> {
    let n = op.n();
    if n < 4 {
        return Err(CurvError::DimensionTooSmall { n, min: 4 });
    }
    let ev = FrameEval {
        m: op.matrix(),
        dim: op.dim(),
    };
    let objective = |frame: &[f64]| {
        let cols = frame_columns(frame, n, 4);
        let [a, b, c, d, e] = ev.coefficients([cols[0], cols[1], cols[2], cols[3]]);
        a + b + c + d - 2.0 * e.abs()
    };
    let cands = coordinate_frames(n, 4, opts.budget / 8);
    let out = minimize(Stiefel::new(n, 4), objective, &cands, opts);
    let cols = frame_columns(&out.point, n, 4);
    let e = ev.coefficients([cols[0], cols[1], cols[2], cols[3]])[4];
    let sign = if e < 0.0 { -1.0 } else { 1.0 };
    let f4: Vec<f64> = cols[3].iter().map(|x| x * sign).collect();
    let witness = CanonicalPlane::from_frame([cols[0], cols[1], cols[2], &f4], 1.0, 1.0)
        .expect("search frames are orthonormal");
    Ok(CscMinimum {
        value: out.value,
        witness,
        evaluations: out.evaluations,
    })
}

/// `Ric∧id − Rm`.
pub fn bochner_two_form_operator(op: &CurvatureOperator) -> BivectorOperator {
    bochner_operator(op)
}

pub fn bochner_min_eigenvalue(op: &CurvatureOperator) -> f64 {
    bochner_operator(op).min_eigenvalue()
}

/// Aggregate of the pointwise functionals of one operator.
#[derive(Clone, Debug, Serialize)]
pub struct PinchingReport {
    pub lambda_flag: Option<f64>,
    pub lambda_sec: Option<f64>,
    pub min_csc: f64,
    pub min_isotropic: Option<f64>,
    pub scal: f64,
    pub ric_min: f64,
    pub ric_max: f64,
    pub bochner_min: f64,
    pub witnesses: ReportWitnesses,
    pub budget: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportWitnesses {
    pub flag: PinchingWitness,
    pub sectional: PinchingWitness,
    pub csc: CanonicalPlane,
    pub isotropic: Option<CanonicalPlane>,
}

pub fn pinching_report(op: &CurvatureOperator, opts: &SearchOptions) -> Result<PinchingReport> {
    let flag = flag_pinching(op, opts)?;
    let sec = sectional_pinching(op, opts);
    let csc = min_complex_sectional(op, opts);
    let iso = if op.n() >= 4 {
        Some(min_isotropic(op, opts)?)
    } else {
        None
    };
    let ric = op.ricci().eigenvalues();
    Ok(PinchingReport {
        lambda_flag: flag.value,
        lambda_sec: sec.value,
        min_csc: csc.value,
        min_isotropic: iso.as_ref().map(|m| m.value),
        scal: op.scalar_curvature(),
        ric_min: ric[0],
        ric_max: ric[ric.len() - 1],
        bochner_min: bochner_min_eigenvalue(op),
        witnesses: ReportWitnesses {
            flag: flag.witness,
            sectional: sec.witness,
            csc: csc.witness,
            isotropic: iso.map(|m| m.witness),
        },
        budget: opts.budget,
        seed: opts.seed,
    })
}
