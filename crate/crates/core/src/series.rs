//! The unit of training, generation, and evaluation.

/// A fixed-length univariate sequence with an optional class label.
///
/// Labels are 1-based class indices (`1..=C`). Generated and augmented
/// series carry the label they were produced under; raw unlabeled data may
/// leave it unset.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub values: Vec<f64>,
    pub label: Option<usize>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Self {
        Series { values, label: None }
    }

    pub fn labeled(values: Vec<f64>, label: usize) -> Self {
        Series {
            values,
            label: Some(label),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
