//! Numerical laboratory for algebraic curvature operators.
//!
//! Curvature operators live on `Λ²ℝⁿ` in the lexicographic bivector basis.
//! On top of the algebra ([`operator`]) sit the pinching and complex
//! sectional curvature functionals ([`functionals`]), executable checks of
//! the pointwise inequalities ([`inequalities`]), the curvature ODE of the
//! Ricci flow ([`flow`]) and a gallery of model operators ([`gallery`]).

pub mod cli;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod gallery;
pub mod inequalities;
pub mod io;
pub mod operator;
pub mod search;

pub use error::{CurvError, Result};
pub use operator::{BivectorOperator, CurvatureOperator, SymmetricForm};
pub use search::SearchOptions;
