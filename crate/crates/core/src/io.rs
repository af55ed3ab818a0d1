//! Operator JSON files.
//!
//! ```text
//! {"n": 4, "format": "dense-lex", "matrix": [[...], ...]}
//! {"n": 4, "format": "tensor", "entries": [{"ijkl": [1,2,1,2], "v": 4.0}, ...]}
//! ```
//!
//! Floats are written in shortest round-trip decimal; indices are 1-based.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};
use crate::operator::{bivector_dim, CurvatureOperator};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub ijkl: [usize; 4],
    pub v: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OperatorFile {
    pub n: usize,
    pub format: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub entries: Option<Vec<TensorEntry>>,
}

impl OperatorFile {
    pub fn dense(op: &CurvatureOperator) -> Self {
        let m = op.matrix();
        Self {
            n: op.n(),
            format: "dense-lex".into(),
            matrix: Some(m.row_iter().map(|r| r.iter().copied().collect()).collect()),
            entries: None,
        }
    }

    /// Validates the payload and builds the operator; `project` repairs
    /// Bianchi violations by orthogonal projection instead of rejecting.
    pub fn to_operator(&self, project: bool) -> Result<CurvatureOperator> {
        let n = self.n;
        if n < 2 {
            return Err(CurvError::DimensionTooSmall { n, min: 2 });
        }
        match self.format.as_str() {
            "dense-lex" => {
                let rows = self
                    .matrix
                    .as_ref()
                    .ok_or_else(|| CurvError::Format("dense-lex requires `matrix`".into()))?;
                let dim = bivector_dim(n);
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(CurvError::Format(format!(
                        "matrix must be {dim}x{dim} for n = {n}"
                    )));
                }
                let m = DMatrix::from_fn(dim, dim, |r, c| rows[r][c]);
                let op = crate::operator::BivectorOperator::from_matrix(n, m)?;
                if project {
                    Ok(op.bianchi_project())
                } else {
                    CurvatureOperator::new(op)
                }
            }
            "tensor" => {
                let entries = self
                    .entries
                    .as_ref()
                    .ok_or_else(|| CurvError::Format("tensor requires `entries`".into()))?;
                let list: Vec<([usize; 4], f64)> = entries.iter().map(|e| (e.ijkl, e.v)).collect();
                CurvatureOperator::from_tensor(n, &list, project)
            }
            other => Err(CurvError::Format(format!("unknown format `{other}`"))),
        }
    }
}

pub fn operator_to_json(op: &CurvatureOperator) -> String {
    serde_json::to_string(&OperatorFile::dense(op)).expect("finite floats serialize")
}

pub fn operator_from_json(text: &str, project: bool) -> Result<CurvatureOperator> {
    let file: OperatorFile = serde_json::from_str(text)?;
    file.to_operator(project)
}

pub fn read_operator(path: &Path, project: bool) -> Result<CurvatureOperator> {
    operator_from_json(&std::fs::read_to_string(path)?, project)
}

pub fn write_operator(path: &Path, op: &CurvatureOperator) -> Result<()> {
    std::fs::write(path, operator_to_json(op) + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_format_parses() {
        let text = r#"{"n":4,"format":"tensor","entries":[
            {"ijkl":[1,2,1,2],"v":4},{"ijkl":[1,3,1,3],"v":2},{"ijkl":[1,4,1,4],"v":2},
            {"ijkl":[2,3,2,3],"v":2},{"ijkl":[2,4,2,4],"v":2},{"ijkl":[3,4,3,4],"v":1}]}"#;
        let op = operator_from_json(text, false).unwrap();
        assert_eq!(op.scalar_curvature(), 26.0);
    }

    #[test]
    fn dense_round_trip_is_exact() {
        let op = CurvatureOperator::identity(4).scaled(0.1);
        let text = operator_to_json(&op);
        assert!(text.starts_with(r#"{"n":4,"format":"dense-lex","matrix":[[0.1,0.0"#));
        assert_eq!(operator_from_json(&text, false).unwrap(), op);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(operator_from_json(r#"{"n":4,"format":"dense-lex","matr"#, false).is_err());
        assert!(matches!(
            operator_from_json(r#"{"n":4,"format":"dense-lex","matrix":[[1]]}"#, false),
            Err(CurvError::Format(_))
        ));
        assert!(matches!(
            operator_from_json(r#"{"n":4,"format":"sparse"}"#, false),
            Err(CurvError::Format(_))
        ));
        assert!(matches!(
            operator_from_json(r#"{"n":4,"format":"tensor","entries":[{"ijkl":[1,2,3,4],"v":1}]}"#, false),
            Err(CurvError::BianchiViolation { .. })
        ));
    }
}
