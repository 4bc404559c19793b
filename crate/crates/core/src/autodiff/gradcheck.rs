use std::fmt;

use super::{Layer, ParamId, ParamStore};
use crate::ctensor::{CTensor, Complex};
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Maximum relative error between analytic and finite-difference cotangents,
/// one entry per checked tensor (`"input"` plus every parameter name).
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_error() < tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, err) in &self.entries {
            writeln!(f, "{name:<40} {err:.3e}")?;
        }
        Ok(())
    }
}

/// Finite-difference check of a [`Layer`] under the probe `L = Σ|output|²`.
pub fn grad_check<L: Layer>(layer: &L, store: &mut ParamStore, input: &CTensor, step: f64) -> Result<GradCheckReport> {
    let params = layer.params();
    grad_check_fn(store, &params, input, step, |store, x, need_grad| {
        let (y, cache) = layer.forward(store, x)?;
        let loss = y.norm_sqr();
        if !need_grad {
            return Ok((loss, None));
        }
        // ∂|y|²/∂conj(y) = y
        let gx = layer.backward(store, &cache, &y)?;
        Ok((loss, Some(gx)))
    })
}

/// Finite-difference check of an arbitrary real loss.
///
/// `eval(store, input, need_grad)` returns the loss and, when `need_grad`
/// is set, accumulates parameter cotangents into `store` and returns the
/// input cotangent. Perturbations of the real and imaginary channels are
/// combined as `½(Δa + iΔb)` with central differences of width `2·step`.
///
/// The per-element relative error is `|analytic − fd| / max(|analytic|,
/// |fd|, τ)` with `τ = 1e-3·max(1, max |analytic|)`, the maximum taken over
/// every checked tensor. Round-off in the central difference is about
/// `1e-16·|L|/step`, which for elements whose true cotangent is zero (a whole
/// tensor, when the loss is invariant to it) would otherwise dominate the
/// ratio.
pub fn grad_check_fn<F>(store: &mut ParamStore, params: &[ParamId], input: &CTensor, step: f64, mut eval: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore, &CTensor, bool) -> Result<(f64, Option<CTensor>)>,
{
    if step <= 0.0 {
        return Err(Error::Domain(format!("grad_check step must be positive, got {step}")));
    }
    store.zero_grads();
    let (loss, gx) = eval(store, input, true)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("grad_check probe loss is {loss}")));
    }
    let analytic: Vec<CTensor> = params.iter().map(|&id| store.cotangent(id).clone()).collect();
    let scale = analytic.iter().chain(&gx).map(CTensor::max_abs).fold(1.0, f64::max);
    let floor = 1e-3 * scale;
    let mut entries = Vec::new();

    if let Some(gx) = gx {
        let mut x = input.clone();
        let mut fd = CTensor::zeros(input.shape());
        for k in 0..x.len() {
            fd.data_mut()[k] = fd_element(&mut x, k, step, |x| Ok(eval(store, x, false)?.0))?;
        }
        entries.push(("input".to_string(), max_rel_error(&gx, &fd, floor)));
    }

    for (&id, an) in params.iter().zip(&analytic) {
        let real_only = store.get(id).options.real;
        let n = store.value(id).len();
        let mut fd = CTensor::zeros(store.value(id).shape());
        for k in 0..n {
            let orig = store.value(id).data()[k];
            let mut f = |delta: Complex, store: &mut ParamStore| -> Result<f64> {
                store.value_mut(id).data_mut()[k] = orig + delta;
                let l = eval(store, input, false)?.0;
                store.value_mut(id).data_mut()[k] = orig;
                Ok(l)
            };
            let da = (f(Complex::new(step, 0.0), store)? - f(Complex::new(-step, 0.0), store)?) / (2.0 * step);
            let db = if real_only {
                0.0
            } else {
                (f(Complex::new(0.0, step), store)? - f(Complex::new(0.0, -step), store)?) / (2.0 * step)
            };
            fd.data_mut()[k] = Complex::new(0.5 * da, 0.5 * db);
        }
        entries.push((store.get(id).name.clone(), max_rel_error(an, &fd, floor)));
    }
    Ok(GradCheckReport { entries })
}

fn fd_element(x: &mut CTensor, k: usize, step: f64, mut f: impl FnMut(&CTensor) -> Result<f64>) -> Result<Complex> {
    let orig = x.data()[k];
    let mut at = |delta: Complex, x: &mut CTensor| -> Result<f64> {
        x.data_mut()[k] = orig + delta;
        let l = f(x)?;
        x.data_mut()[k] = orig;
        if !l.is_finite() {
            return Err(Error::NonFinite(format!("probe loss is {l} at element {k}")));
        }
        Ok(l)
    };
    let da = (at(Complex::new(step, 0.0), x)? - at(Complex::new(-step, 0.0), x)?) / (2.0 * step);
    let db = (at(Complex::new(0.0, step), x)? - at(Complex::new(0.0, -step), x)?) / (2.0 * step);
    Ok(Complex::new(0.5 * da, 0.5 * db))
}

fn max_rel_error(analytic: &CTensor, fd: &CTensor, floor: f64) -> f64 {
    analytic
        .data()
        .iter()
        .zip(fd.data())
        .map(|(a, f)| (a - f).norm() / a.norm().max(f.norm()).max(floor))
        .fold(0.0, f64::max)
}
