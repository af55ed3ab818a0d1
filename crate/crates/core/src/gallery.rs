//! Named operators and seeded samplers.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};
use crate::functionals::{flag_pinching, sectional_pinching, PinchingWitness};
use crate::operator::{bivector_dim, pair_index, BivectorOperator, CurvatureOperator};
use crate::search::{start_rng, SearchOptions};

/// Evaluation budget for each pinching measurement inside the sampler.
pub const SAMPLER_BUDGET: usize = 6_000;
/// Bisection iterations before the sampler gives up.
pub const SAMPLER_ITERATIONS: usize = 40;
/// Width of the acceptance window `[target, target + width]`.
pub const SAMPLER_WINDOW: f64 = 0.05;

/// `I` on `Λ²ℝⁿ`.
pub fn round_sphere(n: usize) -> Result<CurvatureOperator> {
    if n < 3 {
        return Err(CurvError::DimensionTooSmall { n, min: 3 });
    }
    Ok(CurvatureOperator::identity(n))
}

/// Diagonal operator with `k(e₁,e₂) = 4`, `k(e₁,eᵢ) = k(e₂,eᵢ) = 2` and `k(eᵢ,eⱼ) = 1` otherwise.
pub fn section4_example(n: usize) -> Result<CurvatureOperator> {
    if n < 4 {
        return Err(CurvError::DimensionTooSmall { n, min: 4 });
    }
    let dim = bivector_dim(n);
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in i + 1..n {
            let k = match (i, j) {
                (0, 1) => 4.0,
                (0, _) | (1, _) => 2.0,
                _ => 1.0,
            };
            m[(pair_index(n, i, j), pair_index(n, i, j))] = k;
        }
    }
    Ok(CurvatureOperator::trusted(BivectorOperator::symmetrized(n, m)))
}

/// The standard complex structure on `ℝ²ᵐ`: `J e_{2a−1} = e_{2a}`.
pub fn complex_structure(m: usize) -> DMatrix<f64> {
    let n = 2 * m;
    let mut j = DMatrix::zeros(n, n);
    for a in 0..m {
        j[(2 * a + 1, 2 * a)] = 1.0;
        j[(2 * a, 2 * a + 1)] = -1.0;
    }
    j
}

/// Fubini–Study curvature operator of `ℂPᵐ`, holomorphic sectional curvature 4.
///
/// `R(X,Y,Z,W) = ⟨X,Z⟩⟨Y,W⟩ − ⟨X,W⟩⟨Y,Z⟩ + ⟨X,JZ⟩⟨Y,JW⟩ − ⟨X,JW⟩⟨Y,JZ⟩ + 2⟨X,JY⟩⟨Z,JW⟩`.
pub fn fubini_study(m: usize) -> Result<CurvatureOperator> {
    if m < 2 {
        return Err(CurvError::DimensionTooSmall { n: 2 * m, min: 4 });
    }
    let n = 2 * m;
    let j = complex_structure(m);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let dim = pairs.len();
    let m_ = DMatrix::from_fn(dim, dim, |p, q| {
        let ((x, y), (z, w)) = (pairs[p], pairs[q]);
        d(x, z) * d(y, w) - d(x, w) * d(y, z) + j[(x, z)] * j[(y, w)] - j[(x, w)] * j[(y, z)]
            + 2.0 * j[(x, y)] * j[(z, w)]
    });
    Ok(CurvatureOperator::trusted(BivectorOperator::symmetrized(n, m_)))
}

/// Symmetrized Gaussian matrix projected onto the Bianchi subspace.
pub fn random_bianchi(n: usize, seed: u64) -> CurvatureOperator {
    let dim = bivector_dim(n);
    let mut rng = start_rng(seed, 0);
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v
    });
    let sym = (&g + g.transpose()) * 0.5;
    BivectorOperator::symmetrized(n, sym).bianchi_project()
}

/// `random_flag_pinched` with the default measurement budget.
pub fn random_flag_pinched(n: usize, target: f64, seed: u64) -> Result<CurvatureOperator> {
    random_flag_pinched_with(n, target, seed, SAMPLER_BUDGET)
}

/// `(1−s)·A + s·I` with flag pinching in `[target, target + 0.05]`.
///
/// `A` is `random_bianchi(n, seed)` shifted by `c·I` until its smallest
/// sectional curvature is zero and then scaled so its largest sectional
/// curvature is one; `s` is found by bisection.
pub fn random_flag_pinched_with(
    n: usize,
    target: f64,
    seed: u64,
    budget: usize,
) -> Result<CurvatureOperator> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(CurvError::BadParams(format!(
            "lambda_target must lie in (0, 1], got {target}"
        )));
    }
    let id = CurvatureOperator::identity(n);
    if target >= 1.0 {
        return Ok(id);
    }
    let opts = SearchOptions::new(budget, seed);
    let raw = random_bianchi(n, seed);
    let sec = sectional_pinching(&raw, &opts);
    let (kmin, kmax) = match sec.witness {
        PinchingWitness::Sectional {
            min_curvature,
            max_curvature,
            ..
        } => (min_curvature, max_curvature),
        _ => (0.0, 1.0),
    };
    let shift = (-kmin).max(0.0);
    let top = kmax + shift;
    let a = raw.shifted(shift).scaled(1.0 / top);
    let measure = |s: f64| -> f64 {
        let op = a.combine(1.0 - s, &id, s);
        match flag_pinching(&op, &opts) {
            Ok(r) => r.value.unwrap_or(0.0),
            // a clipped minimum that the search overshot: not yet pinched
            Err(_) => 0.0,
        }
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut lam_lo, mut lam_hi) = (measure(lo), 1.0);
    if lam_lo >= target && lam_lo <= target + SAMPLER_WINDOW {
        return Ok(a);
    }
    for _ in 0..SAMPLER_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let lam = measure(mid);
        if lam < target {
            lo = mid;
            lam_lo = lam;
        } else if lam > target + SAMPLER_WINDOW {
            hi = mid;
            lam_hi = lam;
        } else {
            return Ok(a.combine(1.0 - mid, &id, mid));
        }
    }
    Err(CurvError::SamplerFailed {
        lo,
        hi,
        lambda_lo: lam_lo,
        lambda_hi: lam_hi,
    })
}

/// A named gallery member with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GallerySpec {
    pub name: String,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub seed: u64,
    pub lambda_target: Option<f64>,
}

impl GallerySpec {
    pub fn build(&self) -> Result<CurvatureOperator> {
        let need_n = || {
            self.n
                .ok_or_else(|| CurvError::BadParams(format!("`{}` needs n", self.name)))
        };
        match self.name.as_str() {
            "round" => round_sphere(need_n()?),
            "section4" => section4_example(need_n()?),
            "fubini_study" => {
                let m = match (self.m, self.n) {
                    (Some(m), _) => m,
                    (None, Some(n)) if n % 2 == 0 => n / 2,
                    _ => return Err(CurvError::BadParams("fubini_study needs m or an even n".into())),
                };
                fubini_study(m)
            }
            "random_bianchi" => {
                let n = need_n()?;
                if n < 3 {
                    return Err(CurvError::DimensionTooSmall { n, min: 3 });
                }
                Ok(random_bianchi(n, self.seed))
            }
            "random_flag_pinched" => {
                let n = need_n()?;
                if n < 3 {
                    return Err(CurvError::DimensionTooSmall { n, min: 3 });
                }
                let target = self
                    .lambda_target
                    .ok_or_else(|| CurvError::BadParams("random_flag_pinched needs lambda_target".into()))?;
                random_flag_pinched(n, target, self.seed)
            }
            other => Err(CurvError::BadParams(format!("unknown gallery member `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::compound2;

    #[test]
    fn gallery_satisfies_bianchi() {
        for op in [
            round_sphere(4).unwrap(),
            section4_example(6).unwrap(),
            fubini_study(2).unwrap(),
            fubini_study(3).unwrap(),
            random_bianchi(5, 1),
            random_bianchi(7, 2),
        ] {
            assert!(op.bianchi_residual() <= 1e-12, "{}", op.bianchi_residual());
        }
    }

    #[test]
    fn named_members() {
        assert_eq!(round_sphere(4).unwrap().scalar_curvature(), 12.0);
        assert!(matches!(round_sphere(2), Err(CurvError::DimensionTooSmall { .. })));
        assert_eq!(section4_example(4).unwrap().scalar_curvature(), 26.0);
        assert!(section4_example(3).is_err());
        assert!(fubini_study(1).is_err());
    }

    #[test]
    fn fubini_study_curvatures() {
        let fs = fubini_study(2).unwrap();
        let e = |i: usize| {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            v
        };
        // k(X,JX) = 4, k(X,Z) = 1 for Z ⊥ X, JX
        assert!((fs.r(&e(0), &e(1), &e(0), &e(1)) - 4.0).abs() < 1e-14);
        assert!((fs.r(&e(0), &e(2), &e(0), &e(2)) - 1.0).abs() < 1e-14);
        // Einstein with Ric = 2(m+1)
        let ric = fs.ricci();
        assert!((ric.matrix() - DMatrix::identity(4, 4) * 6.0).norm() < 1e-13);
    }

    #[test]
    fn fubini_study_is_kaehler() {
        for m in 2..=3 {
            let fs = fubini_study(m).unwrap();
            let j2 = compound2(&complex_structure(m));
            let c = fs.matrix() * &j2 - &j2 * fs.matrix();
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn samplers_are_reproducible() {
        assert_eq!(random_bianchi(5, 1), random_bianchi(5, 1));
        assert_ne!(random_bianchi(5, 1), random_bianchi(5, 2));
        let a = random_flag_pinched(4, 0.3, 9).unwrap();
        let b = random_flag_pinched(4, 0.3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(random_flag_pinched(5, 1.0, 3).unwrap(), CurvatureOperator::identity(5));
        assert!(random_flag_pinched(4, 0.0, 3).is_err());
    }

    #[test]
    fn sampler_hits_its_window() {
        let op = random_flag_pinched(4, 0.25, 7).unwrap();
        let lam = flag_pinching(&op, &SearchOptions::new(40_000, 1)).unwrap().value.unwrap();
        assert!((0.25 - 1e-4..=0.30 + 1e-4).contains(&lam), "{lam}");
    }
}
