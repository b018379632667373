//! Minimal dense row-major tensor (1–3 axes) backing all network math.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major tensor with one to three axes.
///
/// Shapes are dynamic but validated: constructors reject data/shape
/// mismatches and elementwise combinators reject shape disagreements.
/// Indexing in the hot paths uses `debug_assert` bounds plus the slice
/// bounds check.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S = f64> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Zero-filled tensor of the given shape (1–3 axes, no zero-length axis
    /// unless the whole tensor is intentionally empty).
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(
            (1..=3).contains(&shape.len()),
            "tensor rank must be 1..=3, got {}",
            shape.len()
        );
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![S::zero(); len],
        }
    }

    /// Builds a tensor from row-major data, validating the element count.
    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if !(1..=3).contains(&shape.len()) {
            return Err(Error::size(format!(
                "tensor rank must be 1..=3, got {}",
                shape.len()
            )));
        }
        if data.len() != expect {
            return Err(Error::size(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                expect,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn at1(&self, i: usize) -> S {
        debug_assert_eq!(self.rank(), 1);
        self.data[i]
    }

    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> S {
        debug_assert_eq!(self.rank(), 2);
        debug_assert!(r < self.shape[0] && c < self.shape[1]);
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> S {
        debug_assert_eq!(self.rank(), 3);
        debug_assert!(i < self.shape[0] && j < self.shape[1] && k < self.shape[2]);
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    #[inline]
    pub fn set1(&mut self, i: usize, v: S) {
        debug_assert_eq!(self.rank(), 1);
        self.data[i] = v;
    }

    #[inline]
    pub fn set2(&mut self, r: usize, c: usize, v: S) {
        debug_assert_eq!(self.rank(), 2);
        self.data[r * self.shape[1] + c] = v;
    }

    #[inline]
    pub fn set3(&mut self, i: usize, j: usize, k: usize, v: S) {
        debug_assert_eq!(self.rank(), 3);
        self.data[(i * self.shape[1] + j) * self.shape[2] + k] = v;
    }

    #[inline]
    pub fn add2(&mut self, r: usize, c: usize, v: S) {
        debug_assert_eq!(self.rank(), 2);
        self.data[r * self.shape[1] + c] += v;
    }

    #[inline]
    pub fn add3(&mut self, i: usize, j: usize, k: usize, v: S) {
        debug_assert_eq!(self.rank(), 3);
        self.data[(i * self.shape[1] + j) * self.shape[2] + k] += v;
    }

    /// Row `r` of a rank-2 tensor as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        debug_assert_eq!(self.rank(), 2);
        let w = self.shape[1];
        &self.data[r * w..(r + 1) * w]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        debug_assert_eq!(self.rank(), 2);
        let w = self.shape[1];
        &mut self.data[r * w..(r + 1) * w]
    }

    /// Elementwise sum into `self`; shapes must agree.
    pub fn add_assign(&mut self, other: &Tensor<S>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::size(format!(
                "cannot add tensors of shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
        Ok(())
    }

    /// Multiplies every element by `factor`.
    pub fn scale(&mut self, factor: S) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn fill(&mut self, v: S) {
        for slot in &mut self.data {
            *slot = v;
        }
    }

    /// Sum of squared elements (L2 penalty building block).
    pub fn sum_squares(&self) -> S {
        self.data.iter().map(|v| *v * *v).sum()
    }

    /// Errors if any element is NaN or infinite; `context` names the tensor
    /// in the failure message.
    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite value {v} at flat index {i} in {context}"
                )));
            }
        }
        Ok(())
    }

    /// Converts element type (used to feed `f64` panel windows to an `f32`
    /// network and for checkpoint serialization).
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::of(v.to64())).collect(),
        }
    }
}
