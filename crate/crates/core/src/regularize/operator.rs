use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which smoothing operator penalizes the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    #[serde(rename = "I", alias = "identity")]
    Identity,
    #[serde(rename = "D1", alias = "first_difference")]
    FirstDifference,
    #[serde(rename = "D2", alias = "second_difference")]
    SecondDifference,
}

impl OperatorKind {
    pub fn label(self) -> &'static str {
        match self {
            OperatorKind::Identity => "I",
            OperatorKind::FirstDifference => "D1",
            OperatorKind::SecondDifference => "D2",
        }
    }

    /// Smallest `n` for which the operator has at least one row.
    pub fn min_size(self) -> usize {
        match self {
            OperatorKind::Identity => 1,
            OperatorKind::FirstDifference => 2,
            OperatorKind::SecondDifference => 3,
        }
    }

    /// Dimension of the null space for an `n`-column operator.
    pub fn null_dim(self) -> usize {
        match self {
            OperatorKind::Identity => 0,
            OperatorKind::FirstDifference => 1,
            OperatorKind::SecondDifference => 2,
        }
    }
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "identity" => Ok(OperatorKind::Identity),
            "D1" | "d1" | "first_difference" => Ok(OperatorKind::FirstDifference),
            "D2" | "d2" | "second_difference" => Ok(OperatorKind::SecondDifference),
            other => Err(Error::InvalidInput(format!(
                "unknown regularization operator {other:?} (expected I, D1 or D2)"
            ))),
        }
    }
}

/// A banded `t × n` operator with full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationOperator {
    kind: OperatorKind,
    matrix: DMatrix<f64>,
}

impl RegularizationOperator {
    pub fn build(kind: OperatorKind, n: usize) -> Result<Self> {
        if n < kind.min_size() {
            return Err(Error::InvalidInput(format!(
                "operator {kind} needs at least {} columns, got {n}",
                kind.min_size()
            )));
        }
        let matrix = match kind {
            OperatorKind::Identity => DMatrix::identity(n, n),
            OperatorKind::FirstDifference => banded(n, &[-1.0, 1.0]),
            OperatorKind::SecondDifference => banded(n, &[1.0, -2.0, 1.0]),
        };
        Ok(Self { kind, matrix })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.kind == OperatorKind::Identity
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `‖L x‖₂`.
    pub fn seminorm(&self, x: &[f64]) -> f64 {
        let w = self.matrix.ncols() - self.matrix.nrows() + 1;
        let stencil: &[f64] = match self.kind {
            OperatorKind::Identity => return x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            OperatorKind::FirstDifference => &[-1.0, 1.0],
            OperatorKind::SecondDifference => &[1.0, -2.0, 1.0],
        };
        debug_assert_eq!(w, stencil.len());
        x.windows(stencil.len())
            .map(|win| win.iter().zip(stencil).map(|(a, b)| a * b).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn banded(n: usize, stencil: &[f64]) -> DMatrix<f64> {
    let t = n + 1 - stencil.len();
    let mut m = DMatrix::zeros(t, n);
    for i in 0..t {
        for (k, &c) in stencil.iter().enumerate() {
            m[(i, i + k)] = c;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_difference_small() {
        let l = RegularizationOperator::build(OperatorKind::FirstDifference, 3).unwrap();
        let want = DMatrix::from_row_slice(2, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0]);
        assert_eq!(l.matrix(), &want);
    }

    #[test]
    fn second_difference_small() {
        let l = RegularizationOperator::build(OperatorKind::SecondDifference, 4).unwrap();
        let want =
            DMatrix::from_row_slice(2, 4, &[1.0, -2.0, 1.0, 0.0, 0.0, 1.0, -2.0, 1.0]);
        assert_eq!(l.matrix(), &want);
    }

    #[test]
    fn null_spaces() {
        let n = 7;
        let ones = nalgebra::DVector::from_element(n, 2.5);
        let ramp = nalgebra::DVector::from_fn(n, |i, _| 0.3 * i as f64 - 1.0);
        let d1 = RegularizationOperator::build(OperatorKind::FirstDifference, n).unwrap();
        let d2 = RegularizationOperator::build(OperatorKind::SecondDifference, n).unwrap();
        assert_eq!((d1.matrix() * &ones).amax(), 0.0);
        assert!((d2.matrix() * &ones).amax() == 0.0);
        assert!((d2.matrix() * &ramp).amax() < 1e-15);
        assert_eq!(d1.nrows(), n - OperatorKind::FirstDifference.null_dim());
        assert_eq!(d2.nrows(), n - OperatorKind::SecondDifference.null_dim());
    }

    #[test]
    fn too_small() {
        assert!(RegularizationOperator::build(OperatorKind::FirstDifference, 1).is_err());
        assert!(RegularizationOperator::build(OperatorKind::SecondDifference, 2).is_err());
        assert!(RegularizationOperator::build(OperatorKind::Identity, 0).is_err());
    }

    #[test]
    fn seminorm_matches_matrix() {
        let x = [0.3, 1.7, -0.2, 4.0, 2.2];
        for kind in [
            OperatorKind::Identity,
            OperatorKind::FirstDifference,
            OperatorKind::SecondDifference,
        ] {
            let l = RegularizationOperator::build(kind, x.len()).unwrap();
            let direct = (l.matrix() * nalgebra::DVector::from_column_slice(&x)).norm();
            assert!((l.seminorm(&x) - direct).abs() < 1e-14, "{kind}");
        }
    }

    #[test]
    fn parse_labels() {
        assert_eq!("D2".parse::<OperatorKind>().unwrap(), OperatorKind::SecondDifference);
        assert_eq!("I".parse::<OperatorKind>().unwrap(), OperatorKind::Identity);
        assert!("D3".parse::<OperatorKind>().is_err());
    }
}
