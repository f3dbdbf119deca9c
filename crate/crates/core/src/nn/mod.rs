//! Dense numerical kernels: the two-layer perceptron, softmax cross-entropy,
//! the Adam optimizer, and finite-difference gradient verification.
//!
//! Everything runs in double precision over owned buffers with fixed
//! reduction orders; results are bitwise reproducible.

mod adam;
mod gradcheck;
mod loss;
mod mlp;

pub use adam::{adam_step, AdamConfig};
pub(crate) use adam::adam_update_block;
pub use gradcheck::finite_difference_check;
pub use loss::{softmax, softmax_cross_entropy};
pub use mlp::{
    l2_penalty, mlp_backward, mlp_forward_eval, mlp_forward_frozen, mlp_forward_train,
    ForwardCache, L2Blocks,
};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Two-layer perceptron parameters: `w1` D×H, `b1` H, `w2` H×L, `b2` L.
///
/// Also serves as the container for gradients and optimizer moments, which
/// share its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpParams {
    /// Uniform Glorot initialization, biases zero.
    pub fn glorot(d_in: usize, hidden: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut init = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
        };
        let w1 = init(d_in, hidden);
        let w2 = init(hidden, d_out);
        MlpParams {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(d_out),
        }
    }

    pub fn zeros(d_in: usize, hidden: usize, d_out: usize) -> Self {
        MlpParams {
            w1: Array2::zeros((d_in, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, d_out)),
            b2: Array1::zeros(d_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    /// (input dim, hidden width, output dim).
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.nrows(), self.w1.ncols(), self.w2.ncols())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|x| x.is_finite()))
    }

    /// Parameter blocks in a fixed order, as contiguous slices.
    pub fn blocks(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("w1", self.w1.as_slice().expect("w1 contiguous")),
            ("b1", self.b1.as_slice().expect("b1 contiguous")),
            ("w2", self.w2.as_slice().expect("w2 contiguous")),
            ("b2", self.b2.as_slice().expect("b2 contiguous")),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 4] {
        [
            ("w1", self.w1.as_slice_mut().expect("w1 contiguous")),
            ("b1", self.b1.as_slice_mut().expect("b1 contiguous")),
            ("w2", self.w2.as_slice_mut().expect("w2 contiguous")),
            ("b2", self.b2.as_slice_mut().expect("b2 contiguous")),
        ]
    }

    /// Total number of scalar parameters.
    pub fn coord_count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// Flat coordinate view across blocks in `blocks()` order.
    pub fn coord(&self, idx: usize) -> f64 {
        let mut i = idx;
        for (_, block) in self.blocks() {
            if i < block.len() {
                return block[i];
            }
            i -= block.len();
        }
        panic!("coordinate {idx} out of range");
    }

    pub fn coord_add(&mut self, idx: usize, delta: f64) {
        let mut i = idx;
        for (_, block) in self.blocks_mut() {
            if i < block.len() {
                block[i] += delta;
                return;
            }
            i -= block.len();
        }
        panic!("coordinate {idx} out of range");
    }
}

/// First/second-moment accumulators and step counter for Adam.
#[derive(Debug, Clone)]
pub struct OptState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub step: u64,
}

impl OptState {
    pub fn new(params: &MlpParams) -> Self {
        OptState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

pub(crate) fn check_same_shape(a: &MlpParams, b: &MlpParams, what: &str) -> Result<()> {
    if a.w1.raw_dim() != b.w1.raw_dim()
        || a.b1.raw_dim() != b.b1.raw_dim()
        || a.w2.raw_dim() != b.w2.raw_dim()
        || a.b2.raw_dim() != b.b2.raw_dim()
    {
        return Err(Error::Dimension(format!("{what}: parameter shapes differ")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn glorot_respects_fan_based_bound() {
        let p = MlpParams::glorot(30, 20, 5, &mut rng::stream(1));
        let bound1 = (6.0 / 50.0_f64).sqrt();
        assert!(p.w1.iter().all(|&x| x.abs() < bound1));
        assert!(p.b1.iter().all(|&x| x == 0.0));
        assert_eq!(p.dims(), (30, 20, 5));
    }

    #[test]
    fn coord_view_covers_every_block() {
        let mut p = MlpParams::zeros(2, 3, 2);
        assert_eq!(p.coord_count(), 6 + 3 + 6 + 2);
        p.coord_add(0, 1.0); // first w1 entry
        p.coord_add(6, 2.0); // first b1 entry
        p.coord_add(9, 3.0); // first w2 entry
        p.coord_add(16, 4.0); // last b2 entry
        assert_eq!(p.w1[(0, 0)], 1.0);
        assert_eq!(p.b1[0], 2.0);
        assert_eq!(p.w2[(0, 0)], 3.0);
        assert_eq!(p.b2[1], 4.0);
        assert_eq!(p.coord(16), 4.0);
    }
}
