//! AdamW for complex parameters.
//!
//! [`OptimizerKind::CAdamW`] accumulates the second moment from `g·conj(g)`,
//! a real non-negative quantity shared by both channels. [`OptimizerKind::RAdamW`]
//! treats the real and imaginary channels as independent real parameters.
//! Both use the Wirtinger cotangent as the gradient and apply decoupled
//! weight decay once per step.

mod lsq;

pub use lsq::{compare_optimizers, LeastSquares, OptimizerCurves};

use crate::autodiff::{Parameter, ParamStore};
use crate::ctensor::{CTensor, Complex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    CAdamW,
    RAdamW,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cadamw" => Ok(Self::CAdamW),
            "radamw" => Ok(Self::RAdamW),
            _ => Err(Error::Config(format!("unknown optimizer `{s}` (expected cadamw or radamw)"))),
        }
    }
}

/// Learning-rate multiplier `η_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Linear ramp from 0 over `warmup_steps`, then linear decay to 0 at `total_steps`.
    LinearWarmupDecay { warmup_steps: u64, total_steps: u64 },
}

impl Schedule {
    /// Multiplier for the 1-based step `t`.
    pub fn multiplier(&self, t: u64) -> f64 {
        match *self {
            Schedule::Constant(c) => c,
            Schedule::LinearWarmupDecay { warmup_steps, total_steps } => {
                if t <= warmup_steps && warmup_steps > 0 {
                    t as f64 / warmup_steps as f64
                } else if total_steps <= warmup_steps {
                    1.0
                } else {
                    (total_steps.saturating_sub(t)) as f64 / (total_steps - warmup_steps) as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub schedule: Schedule,
    /// Global cotangent norm cap applied before the step.
    pub clip_norm: Option<f64>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            schedule: Schedule::Constant(1.0),
            clip_norm: None,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.alpha > 0.0
            && self.epsilon > 0.0
            && self.weight_decay >= 0.0
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// First and second moments of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSlots {
    pub m: CTensor,
    /// CAdamW: real (imaginary part 0). RAdamW: per-channel moments in re/im.
    pub v: CTensor,
    pub t: u64,
}

impl MomentSlots {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            m: CTensor::zeros(shape),
            v: CTensor::zeros(shape),
            t: 0,
        }
    }
}

/// Stateful wrapper that counts steps and applies the schedule.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    pub kind: OptimizerKind,
    pub step: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, kind: OptimizerKind) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, kind, step: 0 })
    }

    /// One update of every parameter from its cotangent. On a non-finite
    /// cotangent nothing is modified.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        adamw_step(store, &self.config, self.kind, self.step + 1)?;
        self.step += 1;
        Ok(())
    }
}

pub fn cadamw_step(store: &mut ParamStore, cfg: &AdamWConfig, t: u64) -> Result<()> {
    adamw_step(store, cfg, OptimizerKind::CAdamW, t)
}

pub fn radamw_step(store: &mut ParamStore, cfg: &AdamWConfig, t: u64) -> Result<()> {
    adamw_step(store, cfg, OptimizerKind::RAdamW, t)
}

fn adamw_step(store: &mut ParamStore, cfg: &AdamWConfig, kind: OptimizerKind, t: u64) -> Result<()> {
    for p in store.iter() {
        if !p.cotangent.all_finite() {
            return Err(Error::NonFinite(format!("cotangent of `{}` at step {t}", p.name)));
        }
    }
    let mut clip = 1.0;
    if let Some(cap) = cfg.clip_norm {
        let n = store.grad_norm();
        if n > cap {
            clip = cap / n;
        }
    }
    let eta = cfg.schedule.multiplier(t);
    for p in store.iter_mut() {
        update_param(p, cfg, kind, t, eta, clip);
    }
    Ok(())
}

fn update_param(p: &mut Parameter, cfg: &AdamWConfig, kind: OptimizerKind, t: u64, eta: f64, clip: f64) {
    let slots = p.slots.get_or_insert_with(|| MomentSlots::zeros(p.value.shape()));
    slots.t = t;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    let decay = if p.options.decay { cfg.weight_decay } else { 0.0 };
    let m = slots.m.data_mut();
    let v = slots.v.data_mut();
    for (k, (theta, &c)) in p.value.data_mut().iter_mut().zip(p.cotangent.data()).enumerate() {
        let g = c * clip;
        m[k] = m[k] * b1 + g * (1.0 - b1);
        let mh = m[k] / c1;
        let step = match kind {
            OptimizerKind::CAdamW => {
                v[k] = Complex::new(b2 * v[k].re + (1.0 - b2) * g.norm_sqr(), 0.0);
                let denom = (v[k].re / c2).sqrt() + cfg.epsilon;
                mh / denom
            }
            OptimizerKind::RAdamW => {
                v[k] = Complex::new(b2 * v[k].re + (1.0 - b2) * g.re * g.re, b2 * v[k].im + (1.0 - b2) * g.im * g.im);
                Complex::new(mh.re / ((v[k].re / c2).sqrt() + cfg.epsilon), mh.im / ((v[k].im / c2).sqrt() + cfg.epsilon))
            }
        };
        *theta -= (step * cfg.alpha + *theta * decay) * eta;
    }
    p.project();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamOptions;
    use crate::ctensor::{I, ONE, ZERO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_store(value: Complex, grad: Complex) -> (ParamStore, crate::autodiff::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("theta", CTensor::vector(vec![value]), ParamOptions::default()).unwrap();
        s.accumulate(id, &CTensor::vector(vec![grad])).unwrap();
        (s, id)
    }

    #[test]
    fn first_step_with_imaginary_gradient() {
        let cfg = AdamWConfig::default();
        let (mut s, id) = scalar_store(ZERO, I);
        cadamw_step(&mut s, &cfg, 1).unwrap();
        let expect = -I * (cfg.alpha / (1.0 + cfg.epsilon));
        assert!((s.value(id).data()[0] - expect).norm() < 1e-15);
        let slots = s.get(id).slots.as_ref().unwrap();
        assert!((slots.v.data()[0].re - (1.0 - cfg.beta2)).abs() < 1e-18);
        assert_eq!(slots.v.data()[0].im, 0.0);
    }

    #[test]
    fn radamw_channel_moments() {
        let cfg = AdamWConfig::default();
        let (mut s, id) = scalar_store(ZERO, I);
        radamw_step(&mut s, &cfg, 1).unwrap();
        let v = s.get(id).slots.as_ref().unwrap().v.data()[0];
        assert_eq!(v.re, 0.0);
        assert!((v.im - (1.0 - cfg.beta2)).abs() < 1e-18);
    }

    #[test]
    fn pure_decay() {
        let cfg = AdamWConfig {
            weight_decay: 0.1,
            schedule: Schedule::Constant(0.5),
            ..AdamWConfig::default()
        };
        let theta = Complex::new(2.0, -1.0);
        let (mut s, id) = scalar_store(theta, ZERO);
        cadamw_step(&mut s, &cfg, 1).unwrap();
        assert!((s.value(id).data()[0] - theta * (1.0 - 0.5 * 0.1)).norm() < 1e-15);
    }

    #[test]
    fn real_gradients_give_identical_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = AdamWConfig {
            weight_decay: 0.01,
            ..AdamWConfig::default()
        };
        let init = CTensor::from_fn(&[5], |_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let mut a = ParamStore::new();
        let mut b = ParamStore::new();
        let ia = a.add("w", init.clone(), ParamOptions::default()).unwrap();
        let ib = b.add("w", init, ParamOptions::default()).unwrap();
        for t in 1..=20 {
            let g = CTensor::from_fn(&[5], |_| Complex::new(rng.random_range(-1.0..1.0), 0.0));
            a.zero_grads();
            b.zero_grads();
            a.accumulate(ia, &g).unwrap();
            b.accumulate(ib, &g).unwrap();
            cadamw_step(&mut a, &cfg, t).unwrap();
            radamw_step(&mut b, &cfg, t).unwrap();
            assert_eq!(a.value(ia), b.value(ib));
        }
    }

    #[test]
    fn phase_rotated_gradient_rotates_update() {
        let alpha = Complex::from_polar(1.0, 0.7);
        let cfg = AdamWConfig::default();
        let g = Complex::new(0.3, -0.8);
        let (mut s1, i1) = scalar_store(ZERO, g);
        let (mut s2, i2) = scalar_store(ZERO, g * alpha);
        for t in 1..=5 {
            cadamw_step(&mut s1, &cfg, t).unwrap();
            cadamw_step(&mut s2, &cfg, t).unwrap();
        }
        assert!((s1.value(i1).data()[0] * alpha - s2.value(i2).data()[0]).norm() < 1e-14);
        let v1 = s1.get(i1).slots.as_ref().unwrap().v.data()[0];
        let v2 = s2.get(i2).slots.as_ref().unwrap().v.data()[0];
        assert!((v1 - v2).norm() < 1e-16);
    }

    #[test]
    fn constant_gradient_moves_against_it() {
        let cfg = AdamWConfig::default();
        let g = Complex::new(0.5, -2.0);
        let (mut s, id) = scalar_store(ZERO, g);
        let mut prev = ZERO;
        for t in 1..=10 {
            cadamw_step(&mut s, &cfg, t).unwrap();
            let now = s.value(id).data()[0];
            let delta = now - prev;
            // delta is a negative multiple of g
            assert!((delta / g).im.abs() < 1e-12 && (delta / g).re < 0.0);
            prev = now;
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let cfg = AdamWConfig::default();
        let (mut s, id) = scalar_store(ONE, Complex::new(f64::NAN, 0.0));
        assert!(matches!(cadamw_step(&mut s, &cfg, 1), Err(Error::NonFinite(_))));
        assert_eq!(s.value(id).data()[0], ONE);
        assert!(s.get(id).slots.is_none());
    }

    #[test]
    fn matches_scalar_reference_trace() {
        // independent scalar re-implementation over 10 steps with g = (1+i)/√2
        let cfg = AdamWConfig::default();
        let g = Complex::new(1.0, 1.0) / 2f64.sqrt();
        for kind in [OptimizerKind::CAdamW, OptimizerKind::RAdamW] {
            let (mut s, id) = scalar_store(ZERO, g);
            let (mut m, mut vr, mut vi, mut th) = (ZERO, 0.0f64, 0.0f64, ZERO);
            for t in 1..=10u64 {
                adamw_step(&mut s, &cfg, kind, t).unwrap();
                m = 0.9 * m + 0.1 * g;
                let mh = m / (1.0 - 0.9f64.powi(t as i32));
                let c2 = 1.0 - 0.999f64.powi(t as i32);
                let upd = if kind == OptimizerKind::CAdamW {
                    vr = 0.999 * vr + 0.001 * (g * g.conj()).re;
                    mh / ((vr / c2).sqrt() + 1e-8)
                } else {
                    vr = 0.999 * vr + 0.001 * g.re * g.re;
                    vi = 0.999 * vi + 0.001 * g.im * g.im;
                    Complex::new(mh.re / ((vr / c2).sqrt() + 1e-8), mh.im / ((vi / c2).sqrt() + 1e-8))
                };
                th -= 1e-3 * upd;
                assert!((s.value(id).data()[0] - th).norm() < 1e-15);
            }
            let v = s.get(id).slots.as_ref().unwrap().v.data()[0];
            if kind == OptimizerKind::CAdamW {
                // shared real moment of |g|² = 1
                assert_eq!(v.im, 0.0);
                assert!((v.re - (1.0 - 0.999f64.powi(10))).abs() < 1e-12);
            } else {
                // one half per channel
                assert!((v.re - 0.5 * (1.0 - 0.999f64.powi(10))).abs() < 1e-12);
                assert!((v.im - v.re).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn schedule_shapes() {
        let s = Schedule::LinearWarmupDecay { warmup_steps: 10, total_steps: 110 };
        assert_eq!(s.multiplier(5), 0.5);
        assert_eq!(s.multiplier(10), 1.0);
        assert_eq!(s.multiplier(60), 0.5);
        assert_eq!(s.multiplier(200), 0.0);
        assert_eq!(Schedule::Constant(1.0).multiplier(7), 1.0);
    }

    #[test]
    fn clipping_caps_global_norm() {
        // with clipping the first step is unchanged (Adam is scale-free) but the moments shrink
        let cfg = AdamWConfig {
            clip_norm: Some(1.0),
            ..AdamWConfig::default()
        };
        let (mut s, id) = scalar_store(ZERO, Complex::new(30.0, 40.0));
        cadamw_step(&mut s, &cfg, 1).unwrap();
        let m = s.get(id).slots.as_ref().unwrap().m.data()[0];
        assert!((m.norm() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn no_decay_and_real_options_respected() {
        let cfg = AdamWConfig {
            weight_decay: 0.5,
            ..AdamWConfig::default()
        };
        let mut s = ParamStore::new();
        let a = s.add("gain", CTensor::vector(vec![ONE]), ParamOptions::no_decay()).unwrap();
        let b = s.add("proj", CTensor::vector(vec![ONE]), ParamOptions::real()).unwrap();
        s.accumulate(b, &CTensor::vector(vec![Complex::new(1.0, 5.0)])).unwrap();
        cadamw_step(&mut s, &cfg, 1).unwrap();
        assert_eq!(s.value(a).data()[0], ONE);
        assert_eq!(s.value(b).data()[0].im, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(AdamWConfig { beta1: 1.0, ..AdamWConfig::default() }.validate().is_err());
        assert!(AdamWConfig { weight_decay: -1.0, ..AdamWConfig::default() }.validate().is_err());
        assert!(AdamWConfig::default().validate().is_ok());
    }
}
