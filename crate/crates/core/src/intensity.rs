//! Logarithmic brightness fields.

use ndarray::Array2;

/// Dense scalar field of logarithmic brightness, defined up to an additive
/// constant: every loss term sees `L` only through differences.
#[derive(Debug, Clone, PartialEq)]
pub struct LogIntensity {
    pub data: Array2<f32>,
}

impl LogIntensity {
    pub fn new(data: Array2<f32>) -> Self {
        Self { data }
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        Self { data: Array2::from_elem((height, width), value) }
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }
}
