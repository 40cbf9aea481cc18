//! Dense matrices, reverse-mode differentiation and the optimizer used to
//! train the disentangler.

mod graph;
mod matrix;
mod optim;
mod params;
mod sum;

pub use graph::{Gradients, Graph, Var};
pub use matrix::{matmul, row_l2_normalize, Matrix, NORM_EPS};
pub use optim::{Adam, AdamConfig};
pub use params::ParamSet;
pub use sum::exact_sum;
