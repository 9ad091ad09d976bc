//! Seeded random draws. Every stochastic routine takes an explicit RNG or
//! seed so results are reproducible.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{qr_q, Matrix};
use crate::tensor::{DenseTensor, Shape};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent seed for sub-stream `stream` of `seed`, so that related
/// draws (truth, design, noise) never share a generator.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = seeded(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Matrix with i.i.d. N(0, 1) entries, drawn in column-major order.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Tensor with i.i.d. N(0, variance) entries.
pub fn gaussian_tensor(shape: &Shape, variance: f64, rng: &mut Rng) -> DenseTensor {
    let sd = variance.sqrt();
    let data = (0..shape.size()).map(|_| sd * standard_normal(rng)).collect();
    DenseTensor::new(shape.clone(), data).expect("length matches shape")
}

/// Uniformly distributed `p x r` orthonormal frame: the Q factor (positive
/// R diagonal) of a Gaussian matrix.
pub fn orthonormal_frame(p: usize, r: usize, rng: &mut Rng) -> Matrix {
    loop {
        let g = gaussian_matrix(p, r, rng);
        // a Gaussian matrix is rank deficient with probability zero
        if let Ok(q) = qr_q(&g) {
            return q;
        }
    }
}
