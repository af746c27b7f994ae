//! (μ/μ_w, λ) CMA-ES with rank-one and rank-μ covariance updates and
//! cumulative step-size adaptation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaesConfig {
    /// Offspring per generation; `None` uses `4 + floor(3 ln n)`.
    pub population: Option<usize>,
    pub sigma0: f64,
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        Self {
            population: None,
            sigma0: 5.0,
            max_evals: 1000,
            f_tol: 1e-9,
            x_tol: 1e-4,
        }
    }
}

impl CmaesConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.population {
            if l < 4 {
                return Err(Error::Config(format!("cmaes population must be >= 4, got {l}")));
            }
            if self.max_evals < l {
                return Err(Error::Config(format!(
                    "cmaes max_evals ({}) must be at least the population ({l})",
                    self.max_evals
                )));
            }
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::Config(format!(
                "cmaes sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        if self.max_evals < 4 {
            return Err(Error::Config("cmaes max_evals must be at least 4".into()));
        }
        if !(self.f_tol >= 0.0) || !(self.x_tol >= 0.0) {
            return Err(Error::Config("cmaes tolerances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn lambda(&self, n: usize) -> usize {
        self.population
            .unwrap_or(4 + (3.0 * (n as f64).ln()).floor() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxEvals,
    FunctionTolerance,
    StepTolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    pub generation: usize,
    pub evals: usize,
    pub mean: Vec<f64>,
    pub sigma: f64,
    /// Best fitness seen so far, including `x0`.
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesOutcome {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evals: usize,
    pub termination: Termination,
    pub trace: Vec<GenerationTrace>,
}

struct Params {
    lambda: usize,
    weights: Vec<f64>,
    mueff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
}

impl Params {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
        let cs = (mueff + 2.0) / (nf + mueff + 5.0);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self {
            lambda,
            weights,
            mueff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
        }
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() || v == f64::NEG_INFINITY {
        // -inf is as suspicious as NaN for a penalized objective
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` starting from `x0`. `x0` is evaluated first and counts
/// toward `max_evals`; the best sample ever evaluated is returned.
pub fn cmaes_minimize<F, R>(mut f: F, x0: &[f64], config: &CmaesConfig, rng: &mut R) -> Result<CmaesOutcome>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    config.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidState("cmaes needs at least one dimension".into()));
    }
    let p = Params::new(n, config.lambda(n));
    let mu = p.weights.len();

    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = config.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut ps = DVector::<f64>::zeros(n);
    let mut pc = DVector::<f64>::zeros(n);

    let mut x_best = x0.to_vec();
    let mut f_best = sanitize(f(x0));
    let mut evals = 1;
    // (evals so far, best value of that generation, spread of that generation)
    let mut history: Vec<(usize, f64, f64)> = Vec::new();
    let mut trace = Vec::new();
    let window = 10 * n;

    let mut generation = 0;
    let termination = loop {
        if evals >= config.max_evals {
            break Termination::MaxEvals;
        }
        let eig = SymmetricEigen::new(cov.clone());
        let d: DVector<f64> = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
        let b = eig.eigenvectors;
        if sigma * d.max() < config.x_tol {
            break Termination::StepTolerance;
        }

        let count = p.lambda.min(config.max_evals - evals);
        let mut ys: Vec<DVector<f64>> = Vec::with_capacity(count);
        let mut fits: Vec<(f64, usize)> = Vec::with_capacity(count);
        for k in 0..count {
            let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
            let y = &b * z.component_mul(&d);
            let x = &mean + sigma * &y;
            let fx = sanitize(f(x.as_slice()));
            evals += 1;
            if fx < f_best {
                f_best = fx;
                x_best = x.as_slice().to_vec();
            }
            ys.push(y);
            fits.push((fx, k));
        }
        if count < p.lambda {
            break Termination::MaxEvals;
        }
        fits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut y_w = DVector::<f64>::zeros(n);
        for (w, &(_, k)) in p.weights.iter().zip(&fits) {
            y_w += *w * &ys[k];
        }
        mean += sigma * &y_w;

        let inv_sqrt = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        ps = (1.0 - p.cs) * &ps + (p.cs * (2.0 - p.cs) * p.mueff).sqrt() * (&inv_sqrt * &y_w);
        let decay = 1.0 - (1.0 - p.cs).powi(2 * (generation as i32 + 1));
        let h_sigma = ps.norm() / decay.sqrt() / p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };
        pc = (1.0 - p.cc) * &pc + h * (p.cc * (2.0 - p.cc) * p.mueff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (w, &(_, k)) in p.weights.iter().zip(fits.iter().take(mu)) {
            rank_mu += *w * &ys[k] * ys[k].transpose();
        }
        let rank_one = &pc * pc.transpose() + (1.0 - h) * p.cc * (2.0 - p.cc) * &cov;
        cov = (1.0 - p.c1 - p.cmu) * &cov + p.c1 * rank_one + p.cmu * rank_mu;
        cov = 0.5 * (&cov + cov.transpose());

        sigma *= ((p.cs / p.damps) * (ps.norm() / p.chi_n - 1.0)).exp();

        generation += 1;
        let spread = fits[fits.len() - 1].0 - fits[0].0;
        history.push((evals, fits[0].0, if spread.is_nan() { 0.0 } else { spread }));
        trace.push(GenerationTrace {
            generation,
            evals,
            mean: mean.as_slice().to_vec(),
            sigma,
            best_fitness: f_best,
        });

        // Stagnation: generation bests over the last 10n evaluations, and the
        // current generation itself, all lie within f_tol.
        if evals > window {
            let recent: Vec<&(usize, f64, f64)> =
                history.iter().filter(|(e, _, _)| *e + window > evals).collect();
            if history.len() > recent.len() {
                let lo = recent.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
                let hi = recent.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
                let range = if hi == lo { 0.0 } else { hi - lo };
                if range < config.f_tol && history[history.len() - 1].2 < config.f_tol {
                    break Termination::FunctionTolerance;
                }
            }
        }
    };

    Ok(CmaesOutcome {
        x_best,
        f_best,
        evals,
        termination,
        trace,
    })
}
