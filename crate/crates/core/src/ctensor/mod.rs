//! Dense complex tensors.
//!
//! [`CTensor`] is the single value type used for activations, weights and
//! cotangents. Storage is row-major with one [`Complex`] per element, so the
//! in-memory layout is interleaved `re, im` pairs.

mod spectral;

pub use spectral::{hermitian_eig, unitary_exp, unitary_exp_with_eig, HermEig, HERMITIAN_TOL};

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{domain_err, shape_err, Result};

/// Double-precision complex scalar.
pub type Complex = num_complex::Complex64;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);
pub const I: Complex = Complex::new(0.0, 1.0);

/// Row-major dense array of complex numbers.
#[derive(Clone, PartialEq)]
pub struct CTensor {
    shape: Vec<usize>,
    data: Vec<Complex>,
}

impl fmt::Debug for CTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CTensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl CTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![ZERO; n],
        }
    }

    pub fn full(shape: &[usize], value: Complex) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<Complex>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return shape_err(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Real-valued tensor (zero imaginary parts).
    pub fn from_real(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::from_vec(shape, data.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    pub fn vector(data: Vec<Complex>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = ONE;
        }
        t
    }

    pub fn diag(values: &[Complex]) -> Self {
        let n = values.len();
        let mut t = Self::zeros(&[n, n]);
        for (i, &v) in values.iter().enumerate() {
            t.data[i * n + i] = v;
        }
        t
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> Complex) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return shape_err(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => shape_err(format!("expected a matrix, got shape {:?}", self.shape)),
        }
    }

    fn rc(&self) -> (usize, usize) {
        self.dims2().expect("rank-2 tensor")
    }

    pub fn row(&self, i: usize) -> &[Complex] {
        let c = *self.shape.last().expect("non-scalar tensor");
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex] {
        let c = *self.shape.last().expect("non-scalar tensor");
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex]> {
        let c = *self.shape.last().unwrap_or(&1);
        self.data.chunks(c.max(1))
    }

    pub fn map(&self, f: impl Fn(Complex) -> Complex) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, op: &str, f: impl Fn(Complex, Complex) -> Complex) -> Result<Self> {
        if self.shape != other.shape {
            return shape_err(format!(
                "{op}: {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return shape_err(format!(
                "add_assign: {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, s: Complex) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    /// Elementwise `|z|`, returned as a real-valued tensor.
    pub fn modulus(&self) -> Self {
        self.map(|z| Complex::new(z.norm(), 0.0))
    }

    /// Elementwise `z * conj(z)`, returned as a real-valued tensor.
    pub fn modulus_sq(&self) -> Self {
        self.map(|z| Complex::new(z.norm_sqr(), 0.0))
    }

    pub fn re(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.im).collect()
    }

    pub fn sum(&self) -> Complex {
        self.data.iter().sum()
    }

    /// Sum of `|z|^2` over all elements.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius / l2 norm over all elements.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose of a matrix.
    pub fn hermitian_transpose(&self) -> Result<Self> {
        let (r, c) = self.dims2()?;
        let mut out = Self::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j].conj();
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.dims2()?;
        let mut out = Self::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(out)
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.dims2()?;
        let (k2, n) = other.dims2()?;
        if k != k2 {
            return shape_err(format!("matmul: [{m}, {k}] x [{k2}, {n}]"));
        }
        let mut out = vec![ZERO; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Self::from_vec(&[m, n], out)
    }

    /// `self · otherᴴ` without materializing the transpose.
    pub fn matmul_nh(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.dims2()?;
        let (n, k2) = other.dims2()?;
        if k != k2 {
            return shape_err(format!("matmul_nh: [{m}, {k}] x [{n}, {k2}]ᴴ"));
        }
        let mut out = vec![ZERO; m * n];
        for i in 0..m {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * n + j] = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
            }
        }
        Self::from_vec(&[m, n], out)
    }

    /// `selfᴴ · other` without materializing the transpose.
    pub fn matmul_hn(&self, other: &Self) -> Result<Self> {
        let (k, m) = self.dims2()?;
        let (k2, n) = other.dims2()?;
        if k != k2 {
            return shape_err(format!("matmul_hn: [{k}, {m}]ᴴ x [{k2}, {n}]"));
        }
        let mut out = vec![ZERO; m * n];
        for p in 0..k {
            let arow = &self.data[p * m..(p + 1) * m];
            let brow = &other.data[p * n..(p + 1) * n];
            for (i, a) in arow.iter().enumerate() {
                let a = a.conj();
                if a == ZERO {
                    continue;
                }
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Self::from_vec(&[m, n], out)
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[Complex]) -> Result<Vec<Complex>> {
        let (r, c) = self.dims2()?;
        if c != v.len() {
            return shape_err(format!("matvec: [{r}, {c}] x [{}]", v.len()));
        }
        Ok(self
            .rows()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `‖selfᴴ·self − I‖_F` for a square matrix.
    pub fn unitarity_defect(&self) -> Result<f64> {
        let (r, c) = self.dims2()?;
        if r != c {
            return shape_err(format!("unitarity_defect: non-square [{r}, {c}]"));
        }
        let g = self.matmul_hn(self)?;
        Ok(g.sub(&Self::eye(r))?.norm())
    }

    /// `‖self − selfᴴ‖_F`, zero for Hermitian matrices.
    pub fn hermiticity_defect(&self) -> Result<f64> {
        let (r, c) = self.dims2()?;
        if r != c {
            return shape_err(format!("hermiticity_defect: non-square [{r}, {c}]"));
        }
        Ok(self.sub(&self.hermitian_transpose()?)?.norm())
    }

    /// Mean and variance along `axis`.
    ///
    /// The variance is `Σ (z − mean)·conj(z − mean) / n`, which is real and
    /// non-negative; it is returned as a real-valued tensor. Both outputs drop
    /// the reduced axis.
    pub fn complex_stats(&self, axis: usize) -> Result<(CTensor, CTensor)> {
        if axis >= self.shape.len() {
            return domain_err(format!(
                "axis {axis} out of range for shape {:?}",
                self.shape
            ));
        }
        let n = self.shape[axis];
        if n == 0 {
            return domain_err("complex_stats over an empty axis");
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape.remove(axis);
        let mut mean = vec![ZERO; outer * inner];
        let mut var = vec![ZERO; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| self.data[(o * n + k) * inner + i];
                let mu = (0..n).map(at).sum::<Complex>() / n as f64;
                let v = (0..n).map(|k| (at(k) - mu).norm_sqr()).sum::<f64>() / n as f64;
                mean[o * inner + i] = mu;
                var[o * inner + i] = Complex::new(v, 0.0);
            }
        }
        Ok((
            CTensor::from_vec(&out_shape, mean)?,
            CTensor::from_vec(&out_shape, var)?,
        ))
    }
}

impl Index<[usize; 2]> for CTensor {
    type Output = Complex;

    fn index(&self, [i, j]: [usize; 2]) -> &Complex {
        let (_, c) = self.rc();
        &self.data[i * c + j]
    }
}

impl IndexMut<[usize; 2]> for CTensor {
    fn index_mut(&mut self, [i, j]: [usize; 2]) -> &mut Complex {
        let (_, c) = self.rc();
        &mut self.data[i * c + j]
    }
}

/// Hermitian inner product `⟨a, b⟩ = Σ a_i · conj(b_i)`.
pub fn inner(a: &[Complex], b: &[Complex]) -> Complex {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn vec_norm(v: &[Complex]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random(shape: &[usize], seed: u64) -> CTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CTensor::from_fn(shape, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn stats_of_conjugate_pair() {
        let t = CTensor::vector(vec![c(1.0, 1.0), c(1.0, -1.0)]);
        let (m, v) = t.complex_stats(0).unwrap();
        assert!((m.data()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((v.data()[0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn stats_of_constant_set() {
        let z = c(0.3, -2.5);
        let t = CTensor::full(&[7], z);
        let (m, v) = t.complex_stats(0).unwrap();
        assert!((m.data()[0] - z).norm() < 1e-15);
        assert_eq!(v.data()[0], ZERO);
    }

    #[test]
    fn stats_match_scalar_loop() {
        let t = random(&[16], 3);
        let (m, v) = t.complex_stats(0).unwrap();
        let (mut sr, mut si) = (0.0, 0.0);
        for z in t.data() {
            sr += z.re;
            si += z.im;
        }
        let (mr, mi) = (sr / 16.0, si / 16.0);
        let mut acc = 0.0;
        for z in t.data() {
            let (dr, di) = (z.re - mr, z.im - mi);
            acc += dr * dr + di * di;
        }
        assert!((m.data()[0] - c(mr, mi)).norm() < 1e-12);
        assert!((v.data()[0].re - acc / 16.0).abs() < 1e-12);
        assert_eq!(v.data()[0].im, 0.0);
    }

    #[test]
    fn stats_along_inner_axis() {
        let t = random(&[3, 5], 8);
        let (m, v) = t.complex_stats(1).unwrap();
        assert_eq!(m.shape(), &[3]);
        for r in 0..3 {
            let row = CTensor::vector(t.row(r).to_vec());
            let (mr, vr) = row.complex_stats(0).unwrap();
            assert!((m.data()[r] - mr.data()[0]).norm() < 1e-14);
            assert!((v.data()[r] - vr.data()[0]).norm() < 1e-14);
        }
        let (m0, _) = t.complex_stats(0).unwrap();
        assert_eq!(m0.shape(), &[5]);
    }

    #[test]
    fn stats_reject_empty_axis() {
        let t = CTensor::zeros(&[0]);
        assert!(t.complex_stats(0).is_err());
        assert!(random(&[2], 1).complex_stats(1).is_err());
    }

    #[test]
    fn product_of_conjugates() {
        assert_eq!(c(1.0, 1.0) * c(1.0, -1.0), c(2.0, 0.0));
    }

    #[test]
    fn identity_matmul() {
        let a = random(&[4, 4], 2);
        assert_eq!(a.matmul(&CTensor::eye(4)).unwrap(), a);
    }

    #[test]
    fn hermitian_transpose_involution() {
        let a = random(&[3, 5], 4);
        assert_eq!(a.hermitian_transpose().unwrap().hermitian_transpose().unwrap(), a);
    }

    #[test]
    fn adjoint_of_product() {
        let a = random(&[3, 4], 5);
        let b = random(&[4, 2], 6);
        let lhs = a.matmul(&b).unwrap().hermitian_transpose().unwrap();
        let rhs = b
            .hermitian_transpose()
            .unwrap()
            .matmul(&a.hermitian_transpose().unwrap())
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() < 1e-14);
    }

    #[test]
    fn fused_adjoint_products() {
        let a = random(&[3, 4], 9);
        let b = random(&[5, 4], 10);
        let nh = a.matmul_nh(&b).unwrap();
        let expect = a.matmul(&b.hermitian_transpose().unwrap()).unwrap();
        assert!(nh.sub(&expect).unwrap().norm() < 1e-14);
        let c2 = random(&[3, 2], 11);
        let hn = a.matmul_hn(&c2).unwrap();
        let expect = a.hermitian_transpose().unwrap().matmul(&c2).unwrap();
        assert!(hn.sub(&expect).unwrap().norm() < 1e-14);
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let a = random(&[2, 3], 1);
        let b = random(&[2, 3], 2);
        assert!(a.matmul(&b).is_err());
        assert!(a.add(&random(&[3, 2], 3)).is_err());
        assert!(CTensor::from_vec(&[2, 2], vec![ZERO; 3]).is_err());
        assert!(a.add(&b).is_ok());
    }

    #[test]
    fn polar_round_trip() {
        for z in random(&[32], 12).data() {
            let back = Complex::from_polar(z.norm(), z.arg());
            assert!((back - z).norm() < 1e-12);
        }
    }
}
