//! Elementwise complex activations for hidden units.

use std::f64::consts::PI;

use crate::autodiff::{pullback_real_jacobian, Layer, ParamId, ParamStore};
use crate::ctensor::{CTensor, Complex, ZERO};
use crate::error::{Error, Result};

const GELU_C: f64 = 0.044715;
// sqrt(2/π)
const GELU_K: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HiddenActivation {
    SplitReLU,
    SplitGeLU,
    /// Keeps `z` only when both parts are non-negative.
    ZReLU,
    /// Keeps `z` only when `arg(z) ∈ [theta1, theta2]`.
    ArgReLU { theta1: f64, theta2: f64 },
    /// Shrinks the modulus by `bias < 0`: `z·(|z| + bias)/|z|`, or 0.
    ModReLU { bias: f64 },
    /// `z · Φ(|z|)` with the tanh approximation of the Gaussian CDF.
    ModGeLU,
}

impl HiddenActivation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::ModReLU { bias } if bias >= 0.0 => {
                Err(Error::Config(format!("modrelu bias must be negative, got {bias}")))
            }
            Self::ArgReLU { theta1, theta2 } if !(-PI..=PI).contains(&theta1) || !(-PI..=PI).contains(&theta2) || theta1 > theta2 => {
                Err(Error::Config(format!("argrelu interval [{theta1}, {theta2}] must lie in [−π, π]")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, z: Complex) -> Complex {
        match *self {
            Self::SplitReLU => Complex::new(z.re.max(0.0), z.im.max(0.0)),
            Self::SplitGeLU => Complex::new(gelu(z.re), gelu(z.im)),
            Self::ZReLU => {
                if z.re >= 0.0 && z.im >= 0.0 {
                    z
                } else {
                    ZERO
                }
            }
            Self::ArgReLU { theta1, theta2 } => {
                let a = z.arg();
                if a >= theta1 && a <= theta2 {
                    z
                } else {
                    ZERO
                }
            }
            Self::ModReLU { bias } => {
                let r = z.norm();
                if r + bias >= 0.0 && r > 0.0 {
                    z * ((r + bias) / r)
                } else {
                    ZERO
                }
            }
            Self::ModGeLU => z * gelu_gate(z.norm()),
        }
    }

    /// Real Jacobian `[[∂u/∂a, ∂u/∂b], [∂v/∂a, ∂v/∂b]]` at `z = a + ib`.
    pub fn jacobian(&self, z: Complex) -> [[f64; 2]; 2] {
        let (a, b) = (z.re, z.im);
        match *self {
            Self::SplitReLU => [[step(a), 0.0], [0.0, step(b)]],
            Self::SplitGeLU => [[gelu_prime(a), 0.0], [0.0, gelu_prime(b)]],
            Self::ZReLU => {
                let g = if a >= 0.0 && b >= 0.0 { 1.0 } else { 0.0 };
                [[g, 0.0], [0.0, g]]
            }
            Self::ArgReLU { theta1, theta2 } => {
                let t = z.arg();
                let g = if t >= theta1 && t <= theta2 { 1.0 } else { 0.0 };
                [[g, 0.0], [0.0, g]]
            }
            Self::ModReLU { bias } => {
                let r = z.norm();
                if r + bias < 0.0 || r == 0.0 {
                    return [[0.0; 2]; 2];
                }
                // y = z·(1 + bias/r)
                let s = 1.0 + bias / r;
                let r3 = r * r * r;
                [[s - bias * a * a / r3, -bias * a * b / r3], [-bias * a * b / r3, s - bias * b * b / r3]]
            }
            Self::ModGeLU => {
                let r = z.norm();
                let s = gelu_gate(r);
                if r == 0.0 {
                    return [[s, 0.0], [0.0, s]];
                }
                // y = z·s(r),  ∂r/∂a = a/r
                let ds = gelu_gate_prime(r) / r;
                [[s + a * a * ds, a * b * ds], [a * b * ds, s + b * b * ds]]
            }
        }
    }

    pub fn forward(&self, z: &CTensor) -> CTensor {
        z.map(|v| self.apply(v))
    }

    pub fn backward(&self, z: &CTensor, grad_out: &CTensor) -> Result<CTensor> {
        if z.shape() != grad_out.shape() {
            return Err(Error::Shape(format!("activation backward: {:?} vs {:?}", z.shape(), grad_out.shape())));
        }
        let data = z
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&v, &g)| pullback_real_jacobian(g, self.jacobian(v)))
            .collect();
        CTensor::from_vec(z.shape(), data)
    }
}

/// `activate(z, kind)` over a whole tensor.
pub fn activate(z: &CTensor, kind: HiddenActivation) -> CTensor {
    kind.forward(z)
}

impl Layer for HiddenActivation {
    type Cache = CTensor;

    fn forward(&self, _store: &ParamStore, input: &CTensor) -> Result<(CTensor, CTensor)> {
        Ok((HiddenActivation::forward(self, input), input.clone()))
    }

    fn backward(&self, _store: &mut ParamStore, input: &CTensor, grad_out: &CTensor) -> Result<CTensor> {
        HiddenActivation::backward(self, input, grad_out)
    }

    fn params(&self) -> Vec<ParamId> {
        Vec::new()
    }
}

fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `0.5·(1 + tanh(√(2/π)(x + 0.044715x³)))`
fn gelu_gate(x: f64) -> f64 {
    0.5 * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_gate_prime(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

pub(crate) fn gelu(x: f64) -> f64 {
    x * gelu_gate(x)
}

fn gelu_prime(x: f64) -> f64 {
    gelu_gate(x) + x * gelu_gate_prime(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, DEFAULT_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    pub(crate) fn all_kinds() -> Vec<HiddenActivation> {
        vec![
            HiddenActivation::SplitReLU,
            HiddenActivation::SplitGeLU,
            HiddenActivation::ZReLU,
            HiddenActivation::ArgReLU { theta1: -1.0, theta2: 2.0 },
            HiddenActivation::ModReLU { bias: -0.3 },
            HiddenActivation::ModGeLU,
        ]
    }

    #[test]
    fn zero_and_negative_inputs() {
        assert_eq!(HiddenActivation::SplitGeLU.apply(ZERO), ZERO);
        assert_eq!(HiddenActivation::SplitReLU.apply(c(-1.0, -1.0)), ZERO);
    }

    #[test]
    fn zrelu_sign_gate() {
        assert_eq!(HiddenActivation::ZReLU.apply(c(1.0, 2.0)), c(1.0, 2.0));
        assert_eq!(HiddenActivation::ZReLU.apply(c(-1.0, 2.0)), ZERO);
    }

    #[test]
    fn zrelu_is_argrelu_on_first_quadrant() {
        let arg = HiddenActivation::ArgReLU { theta1: 0.0, theta2: std::f64::consts::FRAC_PI_2 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            assert_eq!(arg.apply(z), HiddenActivation::ZReLU.apply(z));
        }
    }

    #[test]
    fn modrelu_scaling() {
        let act = HiddenActivation::ModReLU { bias: -1.0 };
        let big = Complex::from_polar(2.0, FRAC_PI_4);
        assert!((act.apply(big) - Complex::from_polar(1.0, FRAC_PI_4)).norm() < 1e-15);
        assert_eq!(act.apply(Complex::from_polar(0.5, FRAC_PI_4)), ZERO);
    }

    #[test]
    fn modgelu_keeps_phase() {
        let z = Complex::from_polar(1.3, 2.0);
        let y = HiddenActivation::ModGeLU.apply(z);
        assert!((y.arg() - 2.0).abs() < 1e-12);
        assert!((y.norm() - gelu(1.3)).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(HiddenActivation::ModReLU { bias: 0.5 }.validate().is_err());
        assert!(HiddenActivation::ArgReLU { theta1: 1.0, theta2: 0.0 }.validate().is_err());
        assert!(HiddenActivation::ArgReLU { theta1: 0.0, theta2: 4.0 }.validate().is_err());
        for k in all_kinds() {
            k.validate().unwrap();
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut store = ParamStore::new();
        for kind in all_kinds() {
            for seed in 0..3 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = CTensor::from_fn(&[3, 5], |_| c(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)));
                let report = grad_check(&kind, &mut store, &x, DEFAULT_STEP).unwrap();
                assert!(report.passes(1e-5), "{kind:?} seed {seed}\n{report}");
            }
        }
    }
}
