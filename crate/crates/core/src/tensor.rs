//! Dense row-major tensors over `f64` or `Complex64`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::float::*;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TensorData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::Real(v) => v.len(),
            TensorData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

fn volume(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn real(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if volume(shape) != data.len() {
            return Err(Error::dim("tensor data", volume(shape), data.len()));
        }
        Ok(Self { shape: shape.to_vec(), data: TensorData::Real(data) })
    }

    pub fn complex(shape: &[usize], data: Vec<Complex64>) -> Result<Self> {
        if volume(shape) != data.len() {
            return Err(Error::dim("tensor data", volume(shape), data.len()));
        }
        Ok(Self { shape: shape.to_vec(), data: TensorData::Complex(data) })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data: TensorData::Real(data) }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: TensorData::Real(vec![0.0; volume(shape)]) }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { shape: vec![n, n], data: TensorData::Real(data) }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.data, TensorData::Complex(_))
    }

    pub fn as_real(&self) -> Result<&[f64]> {
        match &self.data {
            TensorData::Real(v) => Ok(v),
            TensorData::Complex(_) => Err(Error::domain("expected a real tensor, found complex")),
        }
    }

    pub fn as_complex(&self) -> Result<&[Complex64]> {
        match &self.data {
            TensorData::Complex(v) => Ok(v),
            TensorData::Real(_) => Err(Error::domain("expected a complex tensor, found real")),
        }
    }

    pub fn into_real(self) -> Result<Vec<f64>> {
        match self.data {
            TensorData::Real(v) => Ok(v),
            TensorData::Complex(_) => Err(Error::domain("expected a real tensor, found complex")),
        }
    }

    /// Promotes a real tensor to complex; complex tensors are returned as is.
    pub fn to_complex(&self) -> Tensor {
        match &self.data {
            TensorData::Real(v) => Tensor {
                shape: self.shape.clone(),
                data: TensorData::Complex(v.iter().map(|&x| Complex64::new(x, 0.0)).collect()),
            },
            TensorData::Complex(_) => self.clone(),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if volume(shape) != self.len() {
            return Err(Error::dim("reshape", self.len(), volume(shape)));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    fn matrix_dims(&self, operand: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            [n] => Ok((n, 1)),
            _ => Err(Error::dim(operand, 2, self.shape.len())),
        }
    }

    /// Matrix product `self · rhs`. Vectors are treated as column matrices
    /// and the result keeps rank 1 when `rhs` is a vector.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k) = self.matrix_dims("matmul lhs")?;
        let (k2, n) = rhs.matrix_dims("matmul rhs")?;
        if k != k2 {
            return Err(Error::dim("matmul rhs", k, k2));
        }
        let shape: Vec<usize> = if rhs.shape.len() == 1 { vec![m] } else { vec![m, n] };
        match (&self.data, &rhs.data) {
            (TensorData::Real(a), TensorData::Real(b)) => {
                Ok(Tensor { shape, data: TensorData::Real(matmul_generic(a, b, m, k, n)) })
            }
            (TensorData::Complex(a), TensorData::Complex(b)) => {
                Ok(Tensor { shape, data: TensorData::Complex(matmul_generic(a, b, m, k, n)) })
            }
            _ => Err(Error::domain("matmul mixes real and complex operands")),
        }
    }

    /// Conjugate transpose (plain transpose for real tensors).
    pub fn adjoint(&self) -> Result<Tensor> {
        let (r, c) = self.matrix_dims("adjoint")?;
        let data = match &self.data {
            TensorData::Real(v) => TensorData::Real(transpose(v, r, c, |x| x)),
            TensorData::Complex(v) => TensorData::Complex(transpose(v, r, c, |x| x.conj())),
        };
        Ok(Tensor { shape: vec![c, r], data })
    }

    pub fn frobenius_norm(&self) -> f64 {
        match &self.data {
            TensorData::Real(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            TensorData::Complex(v) => v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt(),
        }
    }

    /// `‖self − other‖_F`, for same-kind tensors of equal shape.
    pub fn distance(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::dim("distance rhs", self.len(), other.len()));
        }
        match (&self.data, &other.data) {
            (TensorData::Real(a), TensorData::Real(b)) => {
                Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            }
            (TensorData::Complex(a), TensorData::Complex(b)) => {
                Ok(a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt())
            }
            _ => Err(Error::domain("distance mixes real and complex operands")),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let Ok((r, c)) = self.matrix_dims("hermitian") else { return false };
        if r != c || self.shape.len() != 2 {
            return false;
        }
        match &self.data {
            TensorData::Real(v) => {
                (0..r).all(|i| (0..c).all(|j| (v[i * c + j] - v[j * c + i]).abs() <= tol))
            }
            TensorData::Complex(v) => (0..r)
                .all(|i| (0..c).all(|j| (v[i * c + j] - v[j * c + i].conj()).norm() <= tol)),
        }
    }
}

fn matmul_generic<T>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T>
where
    T: Copy + Zero + core::ops::Mul<Output = T> + core::ops::AddAssign,
{
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            let row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn transpose<T: Copy>(v: &[T], r: usize, c: usize, f: impl Fn(T) -> T) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len());
    for j in 0..c {
        for i in 0..r {
            out.push(f(v[i * c + j]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(matches!(
            Tensor::real(&[2, 3], vec![0.0; 5]),
            Err(Error::Dimension { expected: 6, found: 5, .. })
        ));
    }

    #[test]
    fn matmul_identity() {
        let x = Tensor::real(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(Tensor::identity(3).matmul(&x).unwrap(), x);
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let a = Tensor::identity(2);
        let b = a.to_complex();
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn adjoint_of_complex() {
        let a = Tensor::complex(
            &[1, 2],
            vec![Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)],
        )
        .unwrap();
        let h = a.adjoint().unwrap();
        assert_eq!(h.shape(), &[2, 1]);
        assert_eq!(h.as_complex().unwrap()[0], Complex64::new(1.0, -2.0));
        let g = a.matmul(&h).unwrap();
        assert!((g.as_complex().unwrap()[0].re - 6.0).abs() < 1e-15);
        assert!(g.is_hermitian(0.0));
    }
}
