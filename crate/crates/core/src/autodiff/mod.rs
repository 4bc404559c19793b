//! Wirtinger-calculus gradient bookkeeping.
//!
//! Every complex quantity `θ = a + ib` carries a cotangent
//! `∂L/∂conj(θ) = ½(∂L/∂a + i·∂L/∂b)` for the (real) training loss `L`.
//! Steepest descent moves `θ` along `−cotangent`. Real-valued intermediates
//! (moduli, softmax inputs, logits) carry the plain derivative `∂L/∂x`
//! inside layer code; where a real quantity is exposed as a [`CTensor`] its
//! cotangent follows the complex convention, so `∂L/∂x = 2·Re(cotangent)`.
//!
//! Layers implement [`Layer`] with hand-written forward and backward passes;
//! [`grad_check`] compares them against central finite differences.

mod gradcheck;

pub use gradcheck::{grad_check, grad_check_fn, GradCheckReport, DEFAULT_STEP};

use std::collections::HashMap;

use crate::ctensor::{CTensor, Complex};
use crate::error::{Error, Result};
use crate::optim::MomentSlots;

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// How a parameter is treated by initialization and the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamOptions {
    /// Imaginary part is pinned to zero (e.g. the real classification projection).
    pub real: bool,
    /// Receives decoupled weight decay.
    pub decay: bool,
    /// Rows are re-normalized to unit l2 norm after every optimizer step.
    pub unit_rows: bool,
}

impl Default for ParamOptions {
    fn default() -> Self {
        Self {
            real: false,
            decay: true,
            unit_rows: false,
        }
    }
}

impl ParamOptions {
    pub fn no_decay() -> Self {
        Self {
            decay: false,
            ..Self::default()
        }
    }

    pub fn real() -> Self {
        Self {
            real: true,
            ..Self::default()
        }
    }
}

/// A named trainable tensor with its cotangent and optimizer slots.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: CTensor,
    /// `∂L/∂conj(value)`, same shape as `value`.
    pub cotangent: CTensor,
    pub options: ParamOptions,
    pub slots: Option<MomentSlots>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: CTensor, options: ParamOptions) -> Self {
        let cotangent = CTensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            cotangent,
            options,
            slots: None,
        }
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }

    /// Enforces `unit_rows` and `real` on the current value.
    pub fn project(&mut self) {
        if self.options.real {
            for z in self.value.data_mut() {
                z.im = 0.0;
            }
        }
        if self.options.unit_rows && self.value.ndim() >= 1 {
            let cols = *self.value.shape().last().unwrap();
            for row in self.value.data_mut().chunks_mut(cols.max(1)) {
                let n = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if n > 0.0 {
                    for z in row.iter_mut() {
                        *z /= n;
                    }
                }
            }
        }
    }
}

/// Registry of a model's parameters with unique hierarchical names.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: CTensor, options: ParamOptions) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        let mut p = Parameter::new(name.clone(), value, options);
        p.project();
        self.index.insert(name, self.params.len());
        self.params.push(p);
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn value(&self, id: ParamId) -> &CTensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut CTensor {
        &mut self.params[id.0].value
    }

    pub fn cotangent(&self, id: ParamId) -> &CTensor {
        &self.params[id.0].cotangent
    }

    /// Adds `grad` into the parameter's cotangent.
    pub fn accumulate(&mut self, id: ParamId, grad: &CTensor) -> Result<()> {
        let p = &mut self.params[id.0];
        p.cotangent.add_assign(grad).map_err(|e| match e {
            Error::Shape(msg) => Error::Shape(format!("{}: {msg}", p.name)),
            other => other,
        })?;
        if p.options.real {
            for z in p.cotangent.data_mut() {
                z.im = 0.0;
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for z in p.cotangent.data_mut() {
                *z = Complex::new(0.0, 0.0);
            }
        }
    }

    pub fn scale_grads(&mut self, s: f64) {
        for p in &mut self.params {
            for z in p.cotangent.data_mut() {
                *z *= s;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Parameter::numel).sum()
    }

    /// l2 norm of all cotangents taken together.
    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.cotangent.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Hand-differentiated layer.
///
/// `backward` must be given the cache produced by the matching `forward`
/// call. It accumulates parameter cotangents into the store and returns the
/// cotangent of the input.
pub trait Layer {
    type Cache;

    fn forward(&self, store: &ParamStore, input: &CTensor) -> Result<(CTensor, Self::Cache)>;

    fn backward(&self, store: &mut ParamStore, cache: &Self::Cache, grad_out: &CTensor) -> Result<CTensor>;

    /// Parameters touched by this layer, used by [`grad_check`].
    fn params(&self) -> Vec<ParamId>;
}

/// Two layers applied in sequence.
pub struct Chain<A, B>(pub A, pub B);

impl<A: Layer, B: Layer> Layer for Chain<A, B> {
    type Cache = (A::Cache, B::Cache);

    fn forward(&self, store: &ParamStore, input: &CTensor) -> Result<(CTensor, Self::Cache)> {
        let (mid, ca) = self.0.forward(store, input)?;
        let (out, cb) = self.1.forward(store, &mid)?;
        Ok((out, (ca, cb)))
    }

    fn backward(&self, store: &mut ParamStore, cache: &Self::Cache, grad_out: &CTensor) -> Result<CTensor> {
        let g = self.1.backward(store, &cache.1, grad_out)?;
        self.0.backward(store, &cache.0, &g)
    }

    fn params(&self) -> Vec<ParamId> {
        let mut p = self.0.params();
        p.extend(self.1.params());
        p
    }
}

/// Cotangent of `z` for an elementwise map `z ↦ y` with real Jacobian
/// `[[∂u/∂a, ∂u/∂b], [∂v/∂a, ∂v/∂b]]` where `z = a + ib`, `y = u + iv`.
#[inline]
pub fn pullback_real_jacobian(grad_y: Complex, jac: [[f64; 2]; 2]) -> Complex {
    let [[ua, ub], [va, vb]] = jac;
    Complex::new(
        ua * grad_y.re + va * grad_y.im,
        ub * grad_y.re + vb * grad_y.im,
    )
}

/// Cotangent of `z` given `∂L/∂|z|`; zero at the origin (subgradient).
#[inline]
pub fn pullback_modulus(z: Complex, grad_r: f64) -> Complex {
    let r = z.norm();
    if r == 0.0 {
        Complex::new(0.0, 0.0)
    } else {
        z * (grad_r / (2.0 * r))
    }
}

/// Cotangent of `z` given `∂L/∂|z|²`.
#[inline]
pub fn pullback_modulus_sq(z: Complex, grad_s: f64) -> Complex {
    z * grad_s
}

/// Cotangent of a complex number given `∂L/∂Re(z)` and `∂L/∂Im(z)`.
#[inline]
pub fn pullback_parts(grad_re: f64, grad_im: f64) -> Complex {
    Complex::new(0.5 * grad_re, 0.5 * grad_im)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of a real function of one complex variable,
    /// combined into `½(∂/∂a + i∂/∂b)`.
    fn fd_cotangent(f: impl Fn(Complex) -> f64, z: Complex) -> Complex {
        let h = 1e-6;
        let da = (f(z + Complex::new(h, 0.0)) - f(z - Complex::new(h, 0.0))) / (2.0 * h);
        let db = (f(z + Complex::new(0.0, h)) - f(z - Complex::new(0.0, h))) / (2.0 * h);
        Complex::new(0.5 * da, 0.5 * db)
    }

    #[test]
    fn modulus_squared_cotangent_is_identity() {
        let theta = Complex::new(0.7, -1.3);
        // via the |z| route: ∂(r²)/∂r = 2r
        let via_r = pullback_modulus(theta, 2.0 * theta.norm());
        let via_sq = pullback_modulus_sq(theta, 1.0);
        assert!((via_r - theta).norm() < 1e-15);
        assert!((via_sq - theta).norm() < 1e-15);
        let fd = fd_cotangent(|z| z.norm_sqr(), theta);
        assert!((fd - theta).norm() < 1e-8);
    }

    #[test]
    fn real_part_cotangent_is_half() {
        let theta = Complex::new(-0.2, 4.0);
        assert_eq!(pullback_parts(1.0, 0.0), Complex::new(0.5, 0.0));
        let fd = fd_cotangent(|z| z.re, theta);
        assert!((fd - Complex::new(0.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn constant_loss_has_zero_cotangent() {
        let fd = fd_cotangent(|_| 3.0, Complex::new(1.0, 1.0));
        assert_eq!(fd, Complex::new(0.0, 0.0));
        assert_eq!(pullback_parts(0.0, 0.0), Complex::new(0.0, 0.0));
    }

    #[test]
    fn real_jacobian_pullback_matches_fd() {
        // y = conj(z)·(2 + i), non-holomorphic
        let w = Complex::new(2.0, 1.0);
        let probe = Complex::new(0.3, -0.8);
        let loss = |z: Complex| (z.conj() * w * probe.conj()).re;
        let z = Complex::new(0.4, 0.9);
        // u = 2a + b, v = a − 2b
        let grad_y = probe * 0.5; // ∂L/∂conj(y) of Re(y·conj(probe))
        let c = pullback_real_jacobian(grad_y, [[2.0, 1.0], [1.0, -2.0]]);
        assert!((c - fd_cotangent(loss, z)).norm() < 1e-8);
    }

    #[test]
    fn holomorphic_chain_rule_fails_on_conj() {
        // y = w·conj(z): treating it as holomorphic with y' = w is wrong
        let w = Complex::new(2.0, 1.0);
        let t = Complex::new(0.3, -0.8);
        let loss = |z: Complex| (w * z.conj() - t).norm_sqr();
        let z = Complex::new(0.4, 0.9);
        let c_y = w * z.conj() - t;
        let naive = w.conj() * c_y;
        // u = 2a + b, v = a − 2b
        let correct = pullback_real_jacobian(c_y, [[2.0, 1.0], [1.0, -2.0]]);
        let fd = fd_cotangent(loss, z);
        assert!((correct - fd).norm() < 1e-8);
        assert!((naive - fd).norm() > 0.1);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("a", CTensor::zeros(&[2]), ParamOptions::default()).unwrap();
        assert!(s.add("a", CTensor::zeros(&[2]), ParamOptions::default()).is_err());
    }

    #[test]
    fn real_params_drop_imaginary_cotangent() {
        let mut s = ParamStore::new();
        let id = s.add("p", CTensor::zeros(&[2]), ParamOptions::real()).unwrap();
        s.accumulate(id, &CTensor::full(&[2], Complex::new(1.0, 2.0))).unwrap();
        assert!(s.cotangent(id).data().iter().all(|z| z.im == 0.0 && z.re == 1.0));
        assert!(s.accumulate(id, &CTensor::zeros(&[3])).is_err());
    }
}
