//! Dense n-dimensional array with an optional gradient buffer.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    pub shape: Vec<usize>,
    pub values: Vec<T>,
    pub grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![T::zero(); n],
            grad: None,
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::Dim(format!(
                "tensor data length {} does not match shape {:?}",
                values.len(),
                shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
            grad: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Allocate (or re-zero) the gradient buffer.
    pub fn alloc_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.fill(T::zero()),
            None => self.grad = Some(vec![T::zero(); self.values.len()]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n: usize = self.shape.iter().product();
        if self.values.len() != n {
            return Err(Error::Dim("tensor length does not match shape".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("tensor contains non-finite values".into()));
        }
        if let Some(g) = &self.grad {
            if g.len() != n {
                return Err(Error::Dim("gradient length does not match shape".into()));
            }
        }
        Ok(())
    }
}
