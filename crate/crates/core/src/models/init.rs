use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::config::InitScheme;
use crate::autodiff::{ParamId, ParamStore};
use crate::ctensor::{vec_norm, CTensor, Complex, ZERO};

/// Independent `N(0, std²)` real and imaginary parts.
pub fn split_normal<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> CTensor {
    let n = Normal::new(0.0, std).expect("positive std");
    CTensor::from_fn(shape, |_| Complex::new(n.sample(rng), n.sample(rng)))
}

/// Haar-random unitary from modified Gram–Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CTensor {
    loop {
        let g = split_normal(&[d, d], 1.0, rng);
        let mut rows: Vec<Vec<Complex>> = g.rows().map(|r| r.to_vec()).collect();
        let mut ok = true;
        for i in 0..d {
            for j in 0..i {
                let proj: Complex = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b.conj()).sum();
                let prev = rows[j].clone();
                for (a, b) in rows[i].iter_mut().zip(&prev) {
                    *a -= proj * b;
                }
            }
            let n = vec_norm(&rows[i]);
            if n < 1e-8 {
                ok = false;
                break;
            }
            rows[i].iter_mut().for_each(|z| *z /= n);
        }
        if ok {
            return CTensor::from_vec(&[d, d], rows.concat()).expect("square");
        }
    }
}

/// Moduli from a Rayleigh distribution with `σ = 1/√(fan_in + fan_out)`,
/// phases uniform on `[−π, π)`.
pub fn rayleigh_glorot<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> CTensor {
    let (fan_out, fan_in) = match shape {
        [o, i] => (*o, *i),
        [n] => (*n, *n),
        _ => (1, shape.iter().product()),
    };
    let sigma = 1.0 / ((fan_in + fan_out) as f64).sqrt();
    CTensor::from_fn(shape, |_| {
        let u: f64 = rng.random::<f64>();
        let r = sigma * (-2.0 * (1.0 - u).ln()).sqrt();
        Complex::from_polar(r, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
    })
}

/// Fills a weight-like tensor according to the scheme. The unitary scheme
/// falls back to split-normal for non-square shapes.
pub fn init_tensor<R: Rng + ?Sized>(name: &str, shape: &[usize], scheme: InitScheme, std: f64, rng: &mut R) -> CTensor {
    match scheme {
        InitScheme::SplitNormal => split_normal(shape, std, rng),
        InitScheme::Unitary => match shape {
            [a, b] if a == b => random_unitary(*a, rng),
            _ => {
                warn!("unitary init needs a square weight; `{name}` {shape:?} uses split-normal");
                split_normal(shape, std, rng)
            }
        },
        InitScheme::RayleighGlorot => rayleigh_glorot(shape, rng),
    }
}

/// Initializes every registered parameter by role, in registration order:
/// `*.weight` and embedding tables by `scheme`, biases at zero, norm gains
/// untouched, the measurement unitary and projection split-normal, and the
/// NSP class states as a nearly identical unit pair.
pub fn init_weights<R: Rng + ?Sized>(store: &mut ParamStore, scheme: InitScheme, std: f64, rng: &mut R) {
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let name = store.get(id).name.clone();
        let shape = store.value(id).shape().to_vec();
        let value = if name.ends_with(".gain") {
            continue;
        } else if name.ends_with(".bias") {
            CTensor::zeros(&shape)
        } else if name.ends_with(".states") {
            nsp_states(&shape, rng)
        } else if name.ends_with(".unitary.weight") || name.ends_with(".projection") {
            split_normal(&shape, std, rng)
        } else {
            init_tensor(&name, &shape, scheme, std, rng)
        };
        *store.value_mut(id) = value;
        store.get_mut(id).project();
    }
}

/// `φ₀` random unit, `φ₁ = unit(φ₀ + 0.1·δ)`: both classes start with
/// nearly equal overlap for any input.
fn nsp_states<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> CTensor {
    let d = shape[1];
    let draw = |rng: &mut R| -> Vec<Complex> {
        (0..d)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(re, im)
            })
            .collect()
    };
    let unit = |v: Vec<Complex>| {
        let n = vec_norm(&v);
        v.into_iter().map(|z| if n > 0.0 { z / n } else { ZERO }).collect::<Vec<_>>()
    };
    let phi0 = unit(draw(rng));
    let delta = unit(draw(rng));
    let phi1 = unit(phi0.iter().zip(&delta).map(|(a, b)| a + b * 0.1).collect());
    CTensor::from_vec(&[2, d], [phi0, phi1].concat()).expect("shape")
}
