//! Per-vertex descriptor fields, their file format, ground-truth
//! annotations, and a synthetic bilateral fixture generator.

mod annotations;
mod sdf;
mod synthetic;

pub use annotations::{load_annotations, save_annotations, GroundTruth};
pub use sdf::{decode_sdf, encode_sdf, load_descriptors, save_descriptors, SDF_MAGIC, SDF_VERSION};
pub use synthetic::{generate_synthetic, orthonormal_basis, SyntheticParams, SyntheticShape};

use crate::error::{Error, Result};
use crate::numkernel::{Matrix, NORM_EPS};

/// Descriptor matrix `F` and its flipped counterpart, both `|V| x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorField {
    values: Matrix,
    flipped: Matrix,
}

impl DescriptorField {
    pub fn new(values: Matrix, flipped: Matrix) -> Result<Self> {
        if values.shape() != flipped.shape() {
            return Err(Error::shape(
                "descriptor_field",
                format!("values {:?} vs flipped {:?}", values.shape(), flipped.shape()),
            ));
        }
        if values.cols() == 0 {
            return Err(Error::invalid("descriptor dimension must be positive"));
        }
        if !values.is_finite() || !flipped.is_finite() {
            return Err(Error::invalid("descriptor field contains non-finite entries"));
        }
        Ok(Self { values, flipped })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn flipped(&self) -> &Matrix {
        &self.flipped
    }

    pub fn vertex_count(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// Row-wise unit normalization of both matrices.
    pub fn normalize(&self) -> Self {
        Self {
            values: self.values.row_l2_normalize(NORM_EPS),
            flipped: self.flipped.row_l2_normalize(NORM_EPS),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_rows() {
        let f = DescriptorField::new(
            Matrix::from_rows(&[[3.0, 4.0], [1.0, 0.0], [0.0, 0.0]]),
            Matrix::from_rows(&[[0.0, 2.0], [0.6, 0.8], [0.0, 0.0]]),
        )
        .unwrap()
        .normalize();
        assert_eq!(f.values().row(1), &[1.0, 0.0]);
        assert_eq!(f.values().row(2), &[0.0, 0.0]);
        assert!((f.values().get(0, 0) - 0.6).abs() < 1e-15);
        assert_eq!(f.flipped().row(0), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(DescriptorField::new(Matrix::zeros(3, 0), Matrix::zeros(3, 0)).is_err());
        assert!(DescriptorField::new(Matrix::zeros(3, 2), Matrix::zeros(2, 2)).is_err());
        assert!(DescriptorField::new(Matrix::filled(1, 2, f64::NAN), Matrix::zeros(1, 2)).is_err());
    }
}
