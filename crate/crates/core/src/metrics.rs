use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfKind {
    Accuracy,
    Rmse,
}

/// Model quality: accuracy for classification, RMSE for regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub kind: PerfKind,
    pub value: f64,
}

impl Performance {
    pub fn accuracy(value: f64) -> Self {
        Self { kind: PerfKind::Accuracy, value }
    }

    pub fn rmse(value: f64) -> Self {
        Self { kind: PerfKind::Rmse, value }
    }

    /// True when `self` is strictly better than `other` (same kind assumed).
    pub fn better_than(&self, other: &Performance) -> bool {
        match self.kind {
            PerfKind::Accuracy => self.value > other.value,
            PerfKind::Rmse => self.value < other.value,
        }
    }

    /// Absolute deviation `|self − other|`.
    pub fn deviation(&self, other: &Performance) -> f64 {
        (self.value - other.value).abs()
    }
}

/// Root mean squared error over all rows and channels.
///
/// Accumulation order is row-major (time outer, channel inner); the
/// sensitivity oracle in the test suite relies on this order.
pub fn rmse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::Shape { expected: target.rows(), got: pred.rows(), what: "prediction rows" });
    }
    if pred.rows() == 0 || pred.cols() == 0 {
        return Err(Error::EmptyInput("evaluation targets"));
    }
    let mut sum = 0.0;
    for t in 0..pred.rows() {
        for (p, y) in pred.row(t).iter().zip(target.row(t)) {
            let e = p - y;
            sum += e * e;
        }
    }
    Ok(libm::sqrt(sum / (pred.rows() * pred.cols()) as f64))
}

/// Index of the largest element; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_prediction_has_zero_rmse() {
        let y = Matrix::from_rows(&[vec![1.0], vec![-2.0]]).unwrap();
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn zero_predictor_on_unit_variance() {
        let y = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]]).unwrap();
        let z = Matrix::zeros(4, 1);
        assert_eq!(rmse(&z, &y).unwrap(), 1.0);
    }

    #[test]
    fn empty_is_error() {
        let z = Matrix::zeros(0, 1);
        assert_eq!(rmse(&z, &z), Err(Error::EmptyInput("evaluation targets")));
    }

    #[test]
    fn argmax_ties_to_first() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }

    #[test]
    fn direction_of_better() {
        assert!(Performance::rmse(0.1).better_than(&Performance::rmse(0.2)));
        assert!(Performance::accuracy(0.9).better_than(&Performance::accuracy(0.2)));
    }
}
