use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::voxel::SparseGeometry;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Gathers rows by index.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.cols);
        for (dst, &src) in rows.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }
}

/// Per-voxel feature vectors aligned with a geometry's canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFeatureMap<S> {
    pub geometry: SparseGeometry,
    pub features: Matrix<S>,
}

impl<S: Scalar> SparseFeatureMap<S> {
    pub fn new(geometry: SparseGeometry, features: Matrix<S>) -> Result<Self> {
        if geometry.len() != features.rows() {
            return Err(Error::Shape(format!(
                "{} coordinates but {} feature rows",
                geometry.len(),
                features.rows()
            )));
        }
        Ok(Self { geometry, features })
    }
}

/// A learnable tensor with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor<S> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<S>,
    pub grad: Vec<S>,
}

impl<S: Scalar> ParamTensor<S> {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![S::zero(); n],
            grad: vec![S::zero(); n],
        }
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<S>) -> Result<Self> {
        let name = name.into();
        if values.len() != shape.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "tensor {name}: {} values for shape {shape:?}",
                values.len()
            )));
        }
        let grad = vec![S::zero(); values.len()];
        Ok(Self {
            name,
            shape: shape.to_vec(),
            values,
            grad,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = S::zero());
    }

    pub fn fill_uniform<R: Rng>(&mut self, bound: f64, rng: &mut R) {
        let dist = Uniform::new_inclusive(-bound, bound);
        for v in &mut self.values {
            *v = S::lit(dist.sample(rng));
        }
    }

    pub fn fill_normal<R: Rng>(&mut self, sigma: f64, rng: &mut R) {
        let dist = Normal::new(0.0, sigma).expect("sigma is positive");
        for v in &mut self.values {
            *v = S::lit(dist.sample(rng));
        }
    }

    /// Same tensor in another precision; gradients are reset.
    pub fn cast<T: Scalar>(&self) -> ParamTensor<T> {
        ParamTensor {
            name: self.name.clone(),
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .map(|v| T::lit(v.to_f64_lossy()))
                .collect(),
            grad: vec![T::zero(); self.values.len()],
        }
    }
}
