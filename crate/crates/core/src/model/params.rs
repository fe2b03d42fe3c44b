use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Result, ShsError};
use crate::features::FEATURE_COUNT;

pub const CLASS_COUNT: usize = 2;
/// Column of the spanner class in the softmax output.
pub const SHS_CLASS: usize = 1;

/// Layer widths of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            input: FEATURE_COUNT,
            hidden: 32,
            layers: 2,
            classes: CLASS_COUNT,
        }
    }
}

impl ModelDims {
    pub fn with_hidden(hidden: usize) -> Self {
        ModelDims {
            hidden,
            ..Default::default()
        }
    }

    /// Output width of layer `l` (0 is the input).
    pub fn width(&self, l: usize) -> usize {
        if l == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(ShsError::config(format!("degenerate model dims {self:?}")));
        }
        if self.classes != CLASS_COUNT {
            return Err(ShsError::config("the classifier head must have 2 classes"));
        }
        Ok(())
    }
}

/// Trainable weights: one `(2 d_{l-1}) x d_l` matrix per aggregation layer
/// and a `d_L x 2` classifier. There are no bias terms.
///
/// Also used as the container for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub layers: Vec<Matrix>,
    pub head: Matrix,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let layers = (1..=dims.layers)
            .map(|l| Matrix::zeros(2 * dims.width(l - 1), dims.width(l)))
            .collect();
        Ok(ModelParams {
            dims,
            layers,
            head: Matrix::zeros(dims.hidden, dims.classes),
        })
    }

    /// Glorot-uniform initialization, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        let mut p = ModelParams::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in p.matrices_mut() {
            let limit = (6.0 / (m.rows + m.cols) as f64).sqrt();
            for v in m.data.iter_mut() {
                *v = rng.gen_range(-limit..limit);
            }
        }
        Ok(p)
    }

    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().chain(std::iter::once(&self.head))
    }

    pub fn matrices_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.layers
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
    }

    pub fn parameter_count(&self) -> usize {
        self.matrices().map(|m| m.data.len()).sum()
    }

    /// All weights flattened layer by layer, classifier last.
    pub fn flat(&self) -> Vec<f64> {
        self.matrices()
            .flat_map(|m| m.data.iter().copied())
            .collect()
    }

    pub fn sum_squares(&self) -> f64 {
        self.matrices().map(Matrix::sum_squares).sum()
    }

    pub fn norm(&self) -> f64 {
        self.sum_squares().sqrt()
    }

    /// Checks that every matrix matches the shape implied by `dims`.
    pub fn validate(&self) -> Result<()> {
        let expected = ModelParams::zeros(self.dims)?;
        if self.layers.len() != expected.layers.len() {
            return Err(ShsError::Shape(format!(
                "{} layers, expected {}",
                self.layers.len(),
                expected.layers.len()
            )));
        }
        for (l, (got, want)) in self.matrices().zip(expected.matrices()).enumerate() {
            if got.shape() != want.shape() || got.data.len() != got.rows * got.cols {
                return Err(ShsError::Shape(format!(
                    "matrix {l} is {:?}, expected {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes_chain() {
        let p = ModelParams::init(ModelDims::default(), 1).unwrap();
        assert_eq!(p.layers[0].shape(), (6, 32));
        assert_eq!(p.layers[1].shape(), (64, 32));
        assert_eq!(p.head.shape(), (32, 2));
        assert_eq!(p.parameter_count(), 6 * 32 + 64 * 32 + 64);
        p.validate().unwrap();
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ModelParams::init(ModelDims::default(), 9).unwrap();
        let b = ModelParams::init(ModelDims::default(), 9).unwrap();
        let c = ModelParams::init(ModelDims::default(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 38.0).sqrt();
        assert!(a.layers[0].data.iter().all(|v| v.abs() < limit));
    }
}
