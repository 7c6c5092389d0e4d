//! In-memory labeled dataset shared by the trainer and the metrics.

use crate::error::{Error, Result};

/// Feature vectors with scalar labels; classification tasks use labels in
/// `{+1, -1}` and regression tasks use real targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::invalid("xs", "dataset must be non-empty"));
        }
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let d = xs[0].len();
        if xs.iter().any(|x| x.len() != d) {
            return Err(Error::invalid("xs", "all feature vectors must share a dimension"));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<f64>, &f64)> {
        self.xs.iter().zip(self.ys.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_shapes() {
        assert!(Dataset::new(vec![], vec![]).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![1.0, 2.0]).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![1.0, -1.0]).is_err());
        let d = Dataset::new(vec![vec![1.0, 2.0]], vec![1.0]).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.len(), 1);
    }
}
