//! Maximum-likelihood fits of single-state baseline models.
//!
//! BFGS with a backtracking line search on the negative log-likelihood.
//! Poisson, NB and MNL use analytic gradients; zero-inflated families use
//! central differences. `α` is optimized as `ln α`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Panel;
use crate::error::{Error, Result};
use crate::model::{Family, ModelSpec, SlotKind, StateKernel};

const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-6;
const RESTARTS: usize = 5;
/// `ln α` below this is reported as a boundary (Poisson-limit) estimate.
const LN_ALPHA_BOUNDARY: f64 = -10.0;
const DIVERGENCE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MleFlag {
    /// The named parameter ran to the edge of its admissible range.
    Boundary(String),
    /// Some coefficient diverged: likely separation or an unbounded likelihood.
    Unbounded(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    /// Inverse observed information; NaN entries when the Hessian at the
    /// optimum is not positive definite.
    pub covariance: Vec<Vec<f64>>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<MleFlag>,
}

impl MleFit {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.estimates.len()).map(|i| self.covariance[i][i].sqrt()).collect()
    }
}

/// AIC and BIC with `K` = number of estimated parameters.
pub fn aic_bic(fit: &MleFit, n_obs: usize) -> (f64, f64) {
    let k = fit.estimates.len() as f64;
    let aic = 2.0 * k - 2.0 * fit.loglik;
    let bic = k * (n_obs as f64).ln() - 2.0 * fit.loglik;
    (aic, bic)
}

/// Log-likelihood of a single-state model at a free vector.
pub fn loglik(spec: &ModelSpec, panel: &Panel, free: &[f64]) -> Result<f64> {
    Ok(objective(spec, panel)?.loglik(free))
}

/// Gradient of [`loglik`]: analytic for Poisson, NB and MNL, central
/// differences for zero-inflated families.
pub fn gradient(spec: &ModelSpec, panel: &Panel, free: &[f64]) -> Result<Vec<f64>> {
    if free.len() != spec.free_count() {
        return Err(Error::Dimension { expected: spec.free_count(), found: free.len() });
    }
    Ok(objective(spec, panel)?.gradient(free))
}

fn objective<'a>(spec: &'a ModelSpec, panel: &'a Panel) -> Result<Objective<'a>> {
    if spec.is_switching() {
        return Err(Error::Specification("baseline fits take single-state models".into()));
    }
    Ok(Objective { spec, panel, family: spec.family(0) })
}

struct Objective<'a> {
    spec: &'a ModelSpec,
    panel: &'a Panel,
    family: Family,
}

impl Objective<'_> {
    fn kernel(&self, free: &[f64]) -> Result<StateKernel> {
        let params = self.spec.assemble_params(free)?;
        Ok(StateKernel::new(self.family, &params[0], self.panel.max_y()))
    }

    fn loglik(&self, free: &[f64]) -> f64 {
        let Ok(kernel) = self.kernel(free) else { return f64::NAN };
        (0..self.panel.len()).map(|i| kernel.log_lik(self.panel.x(i), self.panel.y(i))).sum()
    }

    /// Gradient of the log-likelihood with respect to the free vector.
    fn gradient(&self, free: &[f64]) -> Vec<f64> {
        if self.family.is_zero_inflated() {
            return self.numeric_gradient(free);
        }
        let slot_grad = self.slot_gradient(free);
        let mut g = vec![0.0; free.len()];
        let free_slots = self.spec.free_slots();
        for (slot, r) in self.spec.restrictions().iter().enumerate() {
            let target = match r {
                crate::model::Restriction::Free => free_slots.iter().position(|&s| s == slot),
                crate::model::Restriction::TiedTo(p) => free_slots.iter().position(|s| s == p),
                _ => None,
            };
            if let Some(k) = target {
                g[k] += slot_grad[slot];
            }
        }
        g
    }

    fn slot_gradient(&self, free: &[f64]) -> Vec<f64> {
        let params = self.spec.assemble_params(free).expect("validated length");
        let p = &params[0];
        let k = self.spec.covariate_count();
        let slots = self.spec.slots();
        let mut g = vec![0.0; slots.len()];
        let alpha_slot = slots.iter().position(|s| s.kind == SlotKind::LnAlpha);
        match self.family {
            Family::Poisson | Family::NegBin => {
                let ln_alpha = p.ln_alpha.unwrap_or(f64::NEG_INFINITY);
                let alpha = ln_alpha.exp();
                let r = 1.0 / alpha;
                let mut g_beta = vec![0.0; k];
                let mut g_alpha = 0.0;
                for i in 0..self.panel.len() {
                    let x = self.panel.x(i);
                    let y = self.panel.y(i) as f64;
                    let lambda = x.iter().zip(&p.beta).map(|(a, b)| a * b).sum::<f64>().exp();
                    let d_eta = if self.family == Family::NegBin {
                        (y - lambda) / (1.0 + alpha * lambda)
                    } else {
                        y - lambda
                    };
                    for (gb, xi) in g_beta.iter_mut().zip(x) {
                        *gb += d_eta * xi;
                    }
                    if self.family == Family::NegBin {
                        let al = alpha * lambda;
                        let digamma_diff: f64 = (0..self.panel.y(i)).map(|j| 1.0 / (r + j as f64)).sum();
                        g_alpha += -r * digamma_diff + y + r * al.ln_1p() - (y + r) * al / (1.0 + al);
                    }
                }
                g[..k].copy_from_slice(&g_beta);
                if let Some(a) = alpha_slot {
                    g[a] = g_alpha;
                }
            }
            Family::Mnl { outcomes } => {
                let kernel = StateKernel::new(self.family, p, 0);
                for i in 0..self.panel.len() {
                    let x = self.panel.x(i);
                    let y = self.panel.y(i) as usize;
                    let probs = kernel.outcome_probs(x);
                    for j in 0..outcomes - 1 {
                        let resid = if y == j + 1 { 1.0 } else { 0.0 } - probs[j];
                        for c in 0..k {
                            g[j * k + c] += resid * x[c];
                        }
                    }
                }
            }
            _ => unreachable!("zero-inflated families use numeric gradients"),
        }
        g
    }

    fn numeric_gradient(&self, free: &[f64]) -> Vec<f64> {
        let mut x = free.to_vec();
        (0..free.len())
            .map(|i| {
                let h = 1e-6 * free[i].abs().max(1.0);
                x[i] = free[i] + h;
                let up = self.loglik(&x);
                x[i] = free[i] - h;
                let down = self.loglik(&x);
                x[i] = free[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}

fn default_init(spec: &ModelSpec, panel: &Panel) -> Vec<f64> {
    let mean = panel.ys().iter().map(|&y| y as f64).sum::<f64>() / panel.len().max(1) as f64;
    spec.free_slots()
        .iter()
        .map(|&s| {
            let slot = &spec.slots()[s];
            match slot.kind {
                SlotKind::Beta { block: 0, cov: 0 } if spec.family(0).is_count() && mean > 0.0 => mean.ln(),
                _ => 0.0,
            }
        })
        .collect()
}

fn scaled_grad_norm(g: &[f64], x: &[f64], f: f64) -> f64 {
    let fs = f.abs().max(1.0);
    g.iter().zip(x).map(|(gi, xi)| gi.abs() * xi.abs().max(1.0) / fs).fold(0.0, f64::max)
}

struct Optimum {
    x: Vec<f64>,
    loglik: f64,
    converged: bool,
    iterations: usize,
}

fn bfgs(obj: &Objective<'_>, init: Vec<f64>) -> Optimum {
    let n = init.len();
    let mut x = DVector::from_vec(init);
    let mut f = -obj.loglik(x.as_slice());
    if !f.is_finite() {
        return Optimum { loglik: -f, x: x.as_slice().to_vec(), converged: false, iterations: 0 };
    }
    let mut g = -DVector::from_vec(obj.gradient(x.as_slice()));
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut converged = n == 0;
    let mut iterations = 0;
    let mut first_step = true;
    while !converged && iterations < MAX_ITER {
        iterations += 1;
        let mut dir = -(&h_inv * &g);
        if dir.dot(&g) >= 0.0 {
            h_inv = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        if first_step {
            // keep the first step modest; the gradient scale is data-size dependent
            let norm = dir.amax();
            if norm > 1.0 {
                dir /= norm;
            }
            first_step = false;
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let ft = -obj.loglik(trial.as_slice());
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            converged = scaled_grad_norm(g.as_slice(), x.as_slice(), f) < GRAD_TOL * 10.0;
            break;
        };
        let g_new = -DVector::from_vec(obj.gradient(x_new.as_slice()));
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let id = DMatrix::<f64>::identity(n, n);
            let left = &id - &s * yv.transpose() * rho;
            let right = &id - &yv * s.transpose() * rho;
            h_inv = &left * &h_inv * &right + &s * s.transpose() * rho;
        }
        let df = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        converged = scaled_grad_norm(g.as_slice(), x.as_slice(), f) < GRAD_TOL;
        if !converged && df.abs() < 1e-15 * f.abs().max(1.0) && step < 1e-10 {
            break;
        }
    }
    Optimum { x: x.as_slice().to_vec(), loglik: -f, converged, iterations }
}

/// Central-difference Hessian of the log-likelihood via the gradient.
fn hessian(obj: &Objective<'_>, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = 1e-5 * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let up = obj.gradient(&xp);
        xp[j] = x[j] - step;
        let down = obj.gradient(&xp);
        xp[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (up[i] - down[i]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Fits a single-state model by maximum likelihood.
pub fn fit_mle(spec: &ModelSpec, panel: &Panel, init: Option<&[f64]>) -> Result<MleFit> {
    if spec.is_switching() {
        return Err(Error::Specification("maximum likelihood is only available for single-state models".into()));
    }
    if panel.is_empty() {
        return Err(Error::Domain("cannot fit a model to an empty dataset".into()));
    }
    if panel.covariate_count() != spec.covariate_count() {
        return Err(Error::Dimension { expected: spec.covariate_count(), found: panel.covariate_count() });
    }
    let family = spec.family(0);
    let obj = Objective { spec, panel, family };
    let start = match init {
        Some(v) => {
            if v.len() != spec.free_count() {
                return Err(Error::Dimension { expected: spec.free_count(), found: v.len() });
            }
            v.to_vec()
        }
        None => default_init(spec, panel),
    };
    let mut best = bfgs(&obj, start.clone());
    if family.is_zero_inflated() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..RESTARTS {
            let jittered: Vec<f64> = start.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
            let candidate = bfgs(&obj, jittered);
            if candidate.loglik.is_finite() && (candidate.loglik > best.loglik || !best.loglik.is_finite()) {
                best = candidate;
            }
        }
    }

    let names = spec.free_names();
    let mut flags = Vec::new();
    for (name, &v) in names.iter().zip(&best.x) {
        if name.ends_with("ln_alpha") && v < LN_ALPHA_BOUNDARY {
            flags.push(MleFlag::Boundary(name.clone()));
        } else if v.abs() > DIVERGENCE {
            flags.push(MleFlag::Unbounded(name.clone()));
        }
    }

    let n = best.x.len();
    let neg_h = -hessian(&obj, &best.x);
    let covariance = match neg_h.clone().cholesky() {
        Some(ch) => {
            let inv = ch.inverse();
            (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect()
        }
        None => vec![vec![f64::NAN; n]; n],
    };
    Ok(MleFit {
        names,
        estimates: best.x,
        covariance,
        loglik: best.loglik,
        converged: best.converged,
        iterations: best.iterations,
        flags,
    })
}
