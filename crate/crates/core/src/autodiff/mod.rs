//! Reverse-mode automatic differentiation on a flat tape.
//!
//! All arithmetic is f64. Graphs are built per training step on a [`Tape`];
//! [`Tensor`] is the persistent parameter store that outlives tapes.

mod adam;
mod tape;

pub use adam::AdamState;
pub(crate) use tape::stable_sigmoid;
pub use tape::{Tape, Value};

use crate::error::{Error, Result};
use rand::Rng;

/// Dense tensor with optional gradient buffer. Parameters live here between
/// training steps; tapes copy data in on bind and write gradients back.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Precondition {
                op: "Tensor::new",
                msg: format!("shape {:?} implies {} elements, got {}", shape, numel, data.len()),
            });
        }
        Ok(Tensor { shape, data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel], requires_grad: false, grad: None }
    }

    /// Uniform init on (-bound, bound), consuming `numel` draws from `rng`.
    pub fn uniform<R: Rng>(shape: Vec<usize>, bound: f64, rng: &mut R) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.random_range(-bound..bound)).collect();
        Tensor { shape, data, requires_grad: true, grad: None }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn accumulate_grad(&mut self, g: &[f64]) {
        debug_assert_eq!(g.len(), self.data.len());
        let buf = self.grad.get_or_insert_with(|| vec![0.0; self.data.len()]);
        for (b, gi) in buf.iter_mut().zip(g) {
            *b += gi;
        }
    }
}

/// Fan-in bound 1/sqrt(n) used for every trainable matrix except lexicon rows.
pub fn fan_in_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}
