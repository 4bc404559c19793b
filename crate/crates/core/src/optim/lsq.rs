//! Complex least squares `L(θ) = ‖Aθ − b‖²` as an optimizer benchmark.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AdamW, AdamWConfig, OptimizerKind};
use crate::autodiff::{ParamOptions, ParamStore};
use crate::ctensor::{CTensor, Complex};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub a: CTensor,
    pub b: CTensor,
}

impl LeastSquares {
    /// Standard complex Gaussian `A` (`[rows, dim]`) and `b` (`[rows]`).
    pub fn random(dim: usize, rows: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<Complex> {
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect()
        };
        let a = CTensor::from_vec(&[rows, dim], draw(rows * dim)).expect("shape");
        let b = CTensor::vector(draw(rows));
        Self { a, b }
    }

    /// Random `A` (`[rows, dim]`) and `b = A·θ*` for a random `θ*`, so the
    /// minimum loss is exactly zero.
    pub fn random_consistent(dim: usize, rows: usize, seed: u64) -> Self {
        let mut p = Self::random(dim, rows, seed);
        let target = Self::random(1, dim, seed ^ 0x005e_ed0f_7a75);
        p.b = CTensor::vector(p.a.matvec(target.a.data()).expect("shape"));
        p
    }

    pub fn dim(&self) -> usize {
        self.a.shape()[1]
    }

    fn residual(&self, theta: &CTensor) -> Result<Vec<Complex>> {
        let ax = self.a.matvec(theta.data())?;
        Ok(ax.iter().zip(self.b.data()).map(|(x, y)| x - y).collect())
    }

    pub fn loss(&self, theta: &CTensor) -> Result<f64> {
        Ok(self.residual(theta)?.iter().map(|z| z.norm_sqr()).sum())
    }

    /// `∂L/∂conj(θ) = Aᴴ(Aθ − b)`.
    pub fn cotangent(&self, theta: &CTensor) -> Result<CTensor> {
        let r = CTensor::from_vec(&[self.a.shape()[0], 1], self.residual(theta)?)?;
        self.a.matmul_hn(&r)?.reshape(&[self.dim()])
    }
}

/// Loss after every step for both optimizers, starting from `θ = 0`.
#[derive(Debug, Clone)]
pub struct OptimizerCurves {
    pub cadamw: Vec<f64>,
    pub radamw: Vec<f64>,
}

impl OptimizerCurves {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,cadamw,radamw\n");
        for (i, (c, r)) in self.cadamw.iter().zip(&self.radamw).enumerate() {
            s.push_str(&format!("{},{c:.10e},{r:.10e}\n", i + 1));
        }
        s
    }
}

pub fn compare_optimizers(problem: &LeastSquares, steps: usize, cfg: &AdamWConfig) -> Result<OptimizerCurves> {
    let run = |kind| -> Result<Vec<f64>> {
        let mut store = ParamStore::new();
        let id = store.add("theta", CTensor::zeros(&[problem.dim()]), ParamOptions::default())?;
        let mut opt = AdamW::new(*cfg, kind)?;
        let mut losses = Vec::with_capacity(steps);
        for _ in 0..steps {
            store.zero_grads();
            let g = problem.cotangent(store.value(id))?;
            store.accumulate(id, &g)?;
            opt.step(&mut store)?;
            losses.push(problem.loss(store.value(id))?);
        }
        Ok(losses)
    };
    Ok(OptimizerCurves {
        cadamw: run(OptimizerKind::CAdamW)?,
        radamw: run(OptimizerKind::RAdamW)?,
    })
}
