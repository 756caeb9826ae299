use crate::error::{DataError, Result};

/// Per-pixel disparity in pixels with a validity flag, row-major.
///
/// Invalid pixels always carry value 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DisparityMap {
    /// Every pixel valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::new(width, height, values, valid)
    }

    pub fn new(width: usize, height: usize, mut values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != width * height || valid.len() != width * height {
            return Err(DataError::Parameter(format!(
                "{width}x{height} map needs {} values and flags, got {} and {}",
                width * height,
                values.len(),
                valid.len()
            )));
        }
        for (i, (v, &ok)) in values.iter_mut().zip(&valid).enumerate() {
            if !ok {
                *v = 0.0;
            } else if !(v.is_finite() && *v >= 0.0) {
                return Err(DataError::Parameter(format!("pixel {i} has invalid disparity {v}")));
            }
        }
        Ok(DisparityMap { width, height, values, valid })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.values[i])
    }
}
