//! Algebraic curvature operators on `Λ²ℝⁿ`.
//!
//! An operator is stored as a symmetric `N×N` matrix in the lexicographic
//! bivector basis `{eᵢ∧eⱼ}_{i<j}`, which is declared orthonormal, so that
//! `|X∧Y|² = |X|²|Y|² − ⟨X,Y⟩²`. The induced `(0,4)` tensor is
//! `R(X,Y,Z,W) = ⟨Rm(X∧Y), Z∧W⟩`; with this convention the identity `I`
//! has all sectional curvatures equal to one.
//!
//! [`BivectorOperator`] is any symmetric endomorphism of `Λ²`. A
//! [`CurvatureOperator`] additionally satisfies the first Bianchi identity
//! and is only produced by checked constructors.

use std::ops::{Add, Deref, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CurvError, Result};

/// Relative Bianchi tolerance enforced at construction.
pub const BIANCHI_TOL: f64 = 1e-10;
/// Tolerance for duplicate tensor entries after symmetry closure.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// Position of `eᵢ∧eⱼ` (0-based, `i < j`) in the lexicographic basis.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Number of basis bivectors, `n(n−1)/2`.
#[inline]
pub fn bivector_dim(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Lexicographic basis of `Λ²ℝⁿ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BivectorBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl BivectorBasis {
    pub fn new(n: usize) -> Self {
        let pairs = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self { n, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// 0-based index pairs, strictly increasing in lexicographic order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Index and orientation sign of `eᵢ∧eⱼ`; `None` when `i == j`.
    pub fn signed_index(&self, i: usize, j: usize) -> Option<(usize, f64)> {
        signed_pair(self.n, i, j)
    }
}

#[inline]
pub(crate) fn signed_pair(n: usize, i: usize, j: usize) -> Option<(usize, f64)> {
    match i.cmp(&j) {
        std::cmp::Ordering::Less => Some((pair_index(n, i, j), 1.0)),
        std::cmp::Ordering::Greater => Some((pair_index(n, j, i), -1.0)),
        std::cmp::Ordering::Equal => None,
    }
}

/// Coordinates of `x∧y` in the lexicographic basis.
pub fn wedge_vectors(x: &[f64], y: &[f64]) -> DVector<f64> {
    let n = x.len();
    let mut out = DVector::zeros(bivector_dim(n));
    wedge_into(x, y, out.as_mut_slice());
    out
}

#[inline]
pub(crate) fn wedge_into(x: &[f64], y: &[f64], out: &mut [f64]) {
    let n = x.len();
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            out[p] = x[i] * y[j] - x[j] * y[i];
            p += 1;
        }
    }
}

/// Induced action of an `n×n` matrix on `Λ²` (second compound matrix).
pub fn compound2(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let basis = BivectorBasis::new(n);
    let dim = basis.dim();
    DMatrix::from_fn(dim, dim, |r, c| {
        let (a, b) = basis.pairs[r];
        let (i, j) = basis.pairs[c];
        g[(a, i)] * g[(b, j)] - g[(a, j)] * g[(b, i)]
    })
}

/// A symmetric endomorphism of `Λ²ℝⁿ` in the lexicographic basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BivectorOperator {
    n: usize,
    m: DMatrix<f64>,
}

impl BivectorOperator {
    /// Wraps a matrix, symmetrizing it. Rejects wrong shapes and matrices
    /// whose asymmetry exceeds the consistency tolerance.
    pub fn from_matrix(n: usize, m: DMatrix<f64>) -> Result<Self> {
        let dim = bivector_dim(n);
        if m.nrows() != dim || m.ncols() != dim {
            return Err(CurvError::DimensionMismatch {
                expected: dim,
                got: m.nrows().max(m.ncols()),
            });
        }
        let scale = 1.0 + m.amax();
        for r in 0..dim {
            for c in r + 1..dim {
                if (m[(r, c)] - m[(c, r)]).abs() > CONSISTENCY_TOL * scale {
                    let basis = BivectorBasis::new(n);
                    let (i, j) = basis.pairs[r];
                    let (k, l) = basis.pairs[c];
                    return Err(CurvError::InconsistentSymmetry {
                        entry: [i + 1, j + 1, k + 1, l + 1],
                        detail: format!(
                            "matrix is not symmetric ({} vs {})",
                            m[(r, c)],
                            m[(c, r)]
                        ),
                    });
                }
            }
        }
        Ok(Self::symmetrized(n, m))
    }

    pub(crate) fn symmetrized(n: usize, m: DMatrix<f64>) -> Self {
        let m = (&m + m.transpose()) * 0.5;
        Self { n, m }
    }

    pub fn identity(n: usize) -> Self {
        let dim = bivector_dim(n);
        Self {
            n,
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zero(n: usize) -> Self {
        let dim = bivector_dim(n);
        Self {
            n,
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Frobenius norm of the matrix.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.m.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `Rm²` as a composition of endomorphisms.
    pub fn square(&self) -> Self {
        Self::symmetrized(self.n, &self.m * &self.m)
    }

    /// Conjugation `Rm ↦ g·Rm·g⁻¹` by an orthogonal `g` acting on `Λ²`.
    pub fn conjugate(&self, g: &DMatrix<f64>) -> Self {
        let c = compound2(g);
        Self::symmetrized(self.n, &c * &self.m * c.transpose())
    }

    /// `R_{ijkl}` for 0-based indices.
    #[inline]
    pub fn tensor_entry(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match (signed_pair(self.n, i, j), signed_pair(self.n, k, l)) {
            (Some((p, s)), Some((q, t))) => s * t * self.m[(p, q)],
            _ => 0.0,
        }
    }

    /// `⟨Rm(X∧Y), Z∧W⟩` without dimension checks.
    pub fn r(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let a = wedge_vectors(x, y);
        let b = wedge_vectors(z, w);
        a.dot(&(&self.m * b))
    }

    /// `⟨Rm(X∧Y), Z∧W⟩`, multilinear in all four slots.
    pub fn full_tensor_entry(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> Result<f64> {
        for v in [x, y, z, w] {
            if v.len() != self.n {
                return Err(CurvError::DimensionMismatch {
                    expected: self.n,
                    got: v.len(),
                });
            }
        }
        Ok(self.r(x, y, z, w))
    }

    /// Largest cyclic sum `|R_{ijkl} + R_{jkil} + R_{kijl}|` and where it occurs.
    pub fn bianchi_residual_at(&self) -> (f64, [usize; 4]) {
        let n = self.n;
        let mut worst = (0.0, [1, 1, 1, 1]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.tensor_entry(i, j, k, l)
                            + self.tensor_entry(j, k, i, l)
                            + self.tensor_entry(k, i, j, l);
                        if s.abs() > worst.0 {
                            worst = (s.abs(), [i + 1, j + 1, k + 1, l + 1]);
                        }
                    }
                }
            }
        }
        worst
    }

    pub fn bianchi_residual(&self) -> f64 {
        self.bianchi_residual_at().0
    }

    /// Orthogonal projection onto the Bianchi subspace `S²_B`.
    ///
    /// The complement is `Λ⁴`, one direction per 4-subset `i<j<k<l`, along
    /// which `(M[ij,kl], M[ik,jl], M[il,jk])` moves as `(1, −1, 1)`.
    pub fn bianchi_project(&self) -> CurvatureOperator {
        let n = self.n;
        let mut m = self.m.clone();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for l in k + 1..n {
                        let ij_kl = (pair_index(n, i, j), pair_index(n, k, l));
                        let ik_jl = (pair_index(n, i, k), pair_index(n, j, l));
                        let il_jk = (pair_index(n, i, l), pair_index(n, j, k));
                        let r = (m[ij_kl] - m[ik_jl] + m[il_jk]) / 3.0;
                        for (idx, sign) in [(ij_kl, -1.0), (ik_jl, 1.0), (il_jk, -1.0)] {
                            m[idx] += sign * r;
                            m[(idx.1, idx.0)] += sign * r;
                        }
                    }
                }
            }
        }
        CurvatureOperator(Self { n, m })
    }
}

impl Add for &BivectorOperator {
    type Output = BivectorOperator;
    fn add(self, rhs: Self) -> BivectorOperator {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        BivectorOperator {
            n: self.n,
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &BivectorOperator {
    type Output = BivectorOperator;
    fn sub(self, rhs: Self) -> BivectorOperator {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        BivectorOperator {
            n: self.n,
            m: &self.m - &rhs.m,
        }
    }
}

impl Mul<f64> for &BivectorOperator {
    type Output = BivectorOperator;
    fn mul(self, rhs: f64) -> BivectorOperator {
        BivectorOperator {
            n: self.n,
            m: &self.m * rhs,
        }
    }
}

impl Neg for &BivectorOperator {
    type Output = BivectorOperator;
    fn neg(self) -> BivectorOperator {
        self * -1.0
    }
}

/// A symmetric endomorphism of `Λ²ℝⁿ` satisfying the first Bianchi identity.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureOperator(BivectorOperator);

impl Deref for CurvatureOperator {
    type Target = BivectorOperator;
    fn deref(&self) -> &BivectorOperator {
        &self.0
    }
}

impl CurvatureOperator {
    /// Accepts `op` if its Bianchi residual is at most `1e−10·(1+‖M‖)`.
    pub fn new(op: BivectorOperator) -> Result<Self> {
        let tol = BIANCHI_TOL * (1.0 + op.norm());
        Self::with_tolerance(op, tol)
    }

    fn with_tolerance(op: BivectorOperator, tol: f64) -> Result<Self> {
        let (residual, quadruple) = op.bianchi_residual_at();
        if residual > tol {
            return Err(CurvError::BianchiViolation {
                quadruple,
                residual,
                tolerance: tol,
            });
        }
        Ok(Self(op))
    }

    /// Skips the Bianchi check; for operators that satisfy it by construction.
    pub(crate) fn trusted(op: BivectorOperator) -> Self {
        Self(op)
    }

    pub fn from_matrix(n: usize, m: DMatrix<f64>) -> Result<Self> {
        Self::new(BivectorOperator::from_matrix(n, m)?)
    }

    /// Builds an operator from `((i,j,k,l), value)` entries with 1-based
    /// indices, closed under `R_{ijkl} = −R_{jikl} = R_{klij}`.
    ///
    /// With `project` set, the closed matrix is orthogonally projected onto
    /// the Bianchi subspace; otherwise a Bianchi violation is an error.
    pub fn from_tensor(n: usize, entries: &[([usize; 4], f64)], project: bool) -> Result<Self> {
        if n < 2 {
            return Err(CurvError::DimensionTooSmall { n, min: 2 });
        }
        let dim = bivector_dim(n);
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        let mut set = vec![false; dim * dim];
        let mut max_abs: f64 = 0.0;
        for &(entry, v) in entries {
            if entry.iter().any(|&x| x == 0 || x > n) {
                return Err(CurvError::IndexOutOfRange { entry, n });
            }
            let [i, j, k, l] = entry.map(|x| x - 1);
            let (Some((p, s)), Some((q, t))) = (signed_pair(n, i, j), signed_pair(n, k, l)) else {
                if v.abs() > CONSISTENCY_TOL {
                    return Err(CurvError::InconsistentSymmetry {
                        entry,
                        detail: format!("entry with a repeated index in a pair must vanish, got {v}"),
                    });
                }
                continue;
            };
            let value = s * t * v;
            let (r, c) = (p.min(q), p.max(q));
            if set[r * dim + c] {
                if (m[(r, c)] - value).abs() > CONSISTENCY_TOL {
                    return Err(CurvError::InconsistentSymmetry {
                        entry,
                        detail: format!(
                            "conflicts with an earlier entry ({} vs {})",
                            m[(r, c)],
                            value
                        ),
                    });
                }
            } else {
                set[r * dim + c] = true;
                m[(r, c)] = value;
                m[(c, r)] = value;
            }
            max_abs = max_abs.max(v.abs());
        }
        let op = BivectorOperator { n, m };
        if project {
            Ok(op.bianchi_project())
        } else {
            Self::with_tolerance(op, BIANCHI_TOL * (1.0 + max_abs))
        }
    }

    /// The identity `I` on `Λ²`: constant sectional curvature one.
    pub fn identity(n: usize) -> Self {
        Self(BivectorOperator::identity(n))
    }

    pub fn zero(n: usize) -> Self {
        Self(BivectorOperator::zero(n))
    }

    pub fn as_operator(&self) -> &BivectorOperator {
        &self.0
    }

    pub fn into_operator(self) -> BivectorOperator {
        self.0
    }

    /// `Ric(X,Y) = Σᵢ R(X,Eᵢ,Y,Eᵢ)`.
    pub fn ricci(&self) -> SymmetricForm {
        let n = self.n();
        let ric = DMatrix::from_fn(n, n, |a, b| {
            (0..n).map(|i| self.tensor_entry(a, i, b, i)).sum()
        });
        SymmetricForm::new((&ric + ric.transpose()) * 0.5)
    }

    pub fn scalar_curvature(&self) -> f64 {
        2.0 * self.matrix().diagonal().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn conjugate(&self, g: &DMatrix<f64>) -> Self {
        Self(self.0.conjugate(g))
    }

    /// `self + c·I`.
    pub fn shifted(&self, c: f64) -> Self {
        Self(&self.0 + &(&BivectorOperator::identity(self.n()) * c))
    }

    /// Linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &CurvatureOperator, b: f64) -> Self {
        Self(&(&self.0 * a) + &(&other.0 * b))
    }
}

/// Identifies the orthonormal frame a [`SymmetricForm`] is written in.
#[derive(Clone, Debug, PartialEq)]
pub enum FrameTag {
    /// The standard basis of `ℝⁿ`.
    Standard,
    /// An orthonormal basis of `e^⊥` for the given pole `e`.
    PoleComplement(Vec<f64>),
}

/// Symmetric bilinear form on a `d`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricForm {
    matrix: DMatrix<f64>,
    frame: FrameTag,
}

impl SymmetricForm {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self::with_frame(matrix, FrameTag::Standard)
    }

    pub fn with_frame(matrix: DMatrix<f64>, frame: FrameTag) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "form must be square");
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Self { matrix, frame }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn frame(&self) -> &FrameTag {
        &self.frame
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// `A∧B(X∧Y) = ½(A(X)∧B(Y) + B(X)∧A(Y))`, extended linearly to `Λ²`.
pub fn wedge(a: &SymmetricForm, b: &SymmetricForm) -> Result<BivectorOperator> {
    let n = a.dim();
    if b.dim() != n {
        return Err(CurvError::DimensionMismatch {
            expected: n,
            got: b.dim(),
        });
    }
    let (a, b) = (a.matrix(), b.matrix());
    let basis = BivectorBasis::new(n);
    let dim = basis.dim();
    // ⟨A∧B(eᵢ∧eⱼ), e_k∧e_l⟩ = ½(A_ki B_lj − A_li B_kj + B_ki A_lj − B_li A_kj)
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        let (k, l) = basis.pairs[r];
        let (i, j) = basis.pairs[c];
        0.5 * (a[(k, i)] * b[(l, j)] - a[(l, i)] * b[(k, j)] + b[(k, i)] * a[(l, j)]
            - b[(l, i)] * a[(k, j)])
    });
    Ok(BivectorOperator::symmetrized(n, m))
}

/// Nonzero structure constants `⟨[b_α, b_β], b_γ⟩ = sign` of `so(n)`.
///
/// Bivectors are identified with skew matrices via
/// `eᵢ∧eⱼ ↦ E_ij = eᵢeⱼᵀ − eⱼeᵢᵀ`, orthonormal for `⟨A,B⟩ = −½tr(AB)`.
/// Since `[E_ij, E_kl] = δ_jk E_il − δ_jl E_ik − δ_ik E_jl + δ_il E_jk`,
/// each constant is `±1`.
pub fn structure_constants(n: usize) -> Vec<(usize, usize, usize, f64)> {
    let basis = BivectorBasis::new(n);
    let mut out = Vec::new();
    for (alpha, &(i, j)) in basis.pairs.iter().enumerate() {
        for (beta, &(k, l)) in basis.pairs.iter().enumerate() {
            let terms = [
                (j == k, i, l, 1.0),
                (j == l, i, k, -1.0),
                (i == k, j, l, -1.0),
                (i == l, j, k, 1.0),
            ];
            for (hit, a, b, s) in terms {
                if hit {
                    if let Some((gamma, t)) = signed_pair(n, a, b) {
                        out.push((alpha, beta, gamma, s * t));
                    }
                }
            }
        }
    }
    out
}

/// The `#` product: `⟨(S#T)v, w⟩ = ½ Σ_{α,β} ⟨[S b_α, T b_β], v⟩⟨[b_α, b_β], w⟩`.
///
/// With this normalization `I#I = (n−2)I` and `Rm#I = Ric∧id − Rm` for every
/// algebraic curvature operator.
pub fn sharp(s: &BivectorOperator, t: &BivectorOperator) -> Result<BivectorOperator> {
    if s.n() != t.n() {
        return Err(CurvError::DimensionMismatch {
            expected: s.n(),
            got: t.n(),
        });
    }
    let n = s.n();
    let dim = s.dim();
    let consts = structure_constants(n);
    let (sm, tm) = (s.matrix(), t.matrix());
    let mut out = DMatrix::<f64>::zeros(dim, dim);
    for &(a1, b1, gamma, s1) in &consts {
        for &(a2, b2, delta, s2) in &consts {
            out[(gamma, delta)] += 0.5 * s1 * s2 * sm[(a1, a2)] * tm[(b1, b2)];
        }
    }
    Ok(BivectorOperator::symmetrized(n, out))
}

/// `Ric∧id − Rm`, the curvature term of the Bochner formula on 2-forms.
pub fn bochner_operator(op: &CurvatureOperator) -> BivectorOperator {
    let ric = op.ricci();
    let id = SymmetricForm::identity(op.n());
    let w = wedge(&ric, &id).expect("same dimension");
    &w - op.as_operator()
}
