//! Prior distributions and the log-joint of data and parameters.
//!
//! Free coefficients carry independent normal priors; free transition
//! probabilities carry Beta priors multiplied by the label-ordering
//! indicator `p01 ≤ p10` (where the layout asks for it); the state vector
//! carries its Markov prior.

use serde::{Deserialize, Serialize};

use crate::data::Panel;
use crate::error::{Error, Result};
use crate::mle::{fit_mle, MleFit};
use crate::model::{Family, ModelSpec, StateKernel};
use crate::sampler::ParamPoint;
use crate::special::{ln_beta_pdf, ln_normal_pdf, LOG_ZERO};
use crate::switching::{log_state_prior, SwitchingLayout};

/// Prior variance used when the baseline fit carries no information about a
/// coefficient (estimate and variance both zero).
pub const FALLBACK_VARIANCE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefPrior {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl CoefPrior {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Normal log-density of free coefficient `k` at `value`.
    #[inline]
    pub fn ln_density(&self, k: usize, value: f64) -> f64 {
        ln_normal_pdf(value, self.mu[k], self.sigma2[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionPrior {
    /// Beta shapes of `p01`.
    pub upsilon0: f64,
    pub nu0: f64,
    /// Beta shapes of `p10`.
    pub upsilon1: f64,
    pub nu1: f64,
}

impl Default for TransitionPrior {
    fn default() -> Self {
        default_transition_prior()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub coef: CoefPrior,
    pub trans: TransitionPrior,
}

impl PriorSpec {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.coef.mu.len() != spec.free_count() || self.coef.sigma2.len() != spec.free_count() {
            return Err(Error::Dimension { expected: spec.free_count(), found: self.coef.mu.len() });
        }
        if self.coef.sigma2.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Specification("prior variances must be positive and finite".into()));
        }
        let t = &self.trans;
        if [t.upsilon0, t.nu0, t.upsilon1, t.nu1].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Specification("Beta prior shapes must be positive".into()));
        }
        Ok(())
    }
}

/// Prior means and variances from baseline maximum-likelihood results:
/// `μ = estimate`, `Σ = 10·max(estimate², variance)`.
pub fn derive_hyperparams(estimates: &[f64], variances: &[f64]) -> Result<CoefPrior> {
    if estimates.len() != variances.len() {
        return Err(Error::Dimension { expected: estimates.len(), found: variances.len() });
    }
    let mut sigma2 = Vec::with_capacity(estimates.len());
    for (&v, &var) in estimates.iter().zip(variances) {
        if var < 0.0 || var.is_nan() {
            return Err(Error::Domain(format!("negative or undefined variance {var}")));
        }
        let s = 10.0 * (v * v).max(var);
        sigma2.push(if s > 0.0 && s.is_finite() { s } else { FALLBACK_VARIANCE });
    }
    Ok(CoefPrior { mu: estimates.to_vec(), sigma2 })
}

/// Uniform Beta(1, 1) priors on both transition probabilities.
pub fn default_transition_prior() -> TransitionPrior {
    TransitionPrior { upsilon0: 1.0, nu0: 1.0, upsilon1: 1.0, nu1: 1.0 }
}

/// Coefficient priors for `spec` derived from single-state baseline fits of
/// each state's family. Free parameters absent from the baseline (or states
/// with no baseline) fall back to `μ = 0`, `Σ = 10`.
pub fn derive_prior_from_baselines(spec: &ModelSpec, panel: &Panel) -> Result<CoefPrior> {
    let mut fits: Vec<(Family, ModelSpec, MleFit)> = Vec::new();
    for &family in spec.families() {
        if family == Family::ZeroOnly || fits.iter().any(|(f, _, _)| *f == family) {
            continue;
        }
        let base = ModelSpec::single(family, spec.covariates().to_vec())?;
        let fit = fit_mle(&base, panel, None)?;
        fits.push((family, base, fit));
    }
    let mut estimates = Vec::with_capacity(spec.free_count());
    let mut variances = Vec::with_capacity(spec.free_count());
    for &slot in spec.free_slots() {
        let s = &spec.slots()[slot];
        let family = spec.family(s.state);
        let suffix = s.name.split_once('.').map_or(s.name.as_str(), |(_, rest)| rest);
        let found = fits.iter().find(|(f, _, _)| *f == family).and_then(|(_, base, fit)| {
            let idx = base.free_names().iter().position(|n| n.split_once('.').map(|(_, r)| r) == Some(suffix))?;
            let var = fit.covariance.get(idx).and_then(|row| row.get(idx)).copied().unwrap_or(0.0);
            Some((fit.estimates[idx], if var.is_finite() && var > 0.0 { var } else { 0.0 }))
        });
        let (e, v) = found.unwrap_or((0.0, 0.0));
        estimates.push(e);
        variances.push(v);
    }
    derive_hyperparams(&estimates, &variances)
}

/// Log-prior of `theta` up to the global normalizing constant.
pub fn log_prior(theta: &ParamPoint, spec: &ModelSpec, layout: &SwitchingLayout, prior: &PriorSpec) -> Result<f64> {
    if theta.free.len() != prior.coef.len() {
        return Err(Error::Dimension { expected: prior.coef.len(), found: theta.free.len() });
    }
    let mut total: f64 = theta.free.iter().enumerate().map(|(k, &v)| prior.coef.ln_density(k, v)).sum();
    if spec.is_switching() {
        if layout.restrict_p01_le_p10() && !theta.trans.satisfies_restriction() {
            return Ok(LOG_ZERO);
        }
        let t = &prior.trans;
        for (&p01, &p10) in theta.trans.p01.iter().zip(&theta.trans.p10) {
            total += ln_beta_pdf(p01, t.upsilon0, t.nu0) + ln_beta_pdf(p10, t.upsilon1, t.nu1);
        }
        total += log_state_prior(&theta.s, &theta.trans, layout)?;
    }
    Ok(total)
}

/// `ln f(Y | Θ)`: each auxiliary period contributes the likelihood of its
/// observations in its current state. Transition probabilities do not enter.
pub fn log_likelihood(panel: &Panel, theta: &ParamPoint, spec: &ModelSpec) -> Result<f64> {
    let params = spec.assemble_params(&theta.free)?;
    let kernels: Vec<StateKernel> = spec
        .families()
        .iter()
        .zip(&params)
        .map(|(f, p)| StateKernel::new(*f, p, panel.max_y()))
        .collect();
    if theta.s.len() != panel.periods() {
        return Err(Error::Dimension { expected: panel.periods(), found: theta.s.len() });
    }
    let mut total = 0.0;
    for t in 0..panel.periods() {
        let kernel = &kernels[theta.state_at(t, spec)];
        for row in panel.rows(t) {
            total += kernel.log_lik(panel.x(row), panel.y(row));
        }
    }
    Ok(total)
}

/// `ln f(Y, Θ) = ln f(Y | Θ) + ln π(Θ)`.
pub fn log_joint(
    panel: &Panel,
    theta: &ParamPoint,
    spec: &ModelSpec,
    layout: &SwitchingLayout,
    prior: &PriorSpec,
) -> Result<f64> {
    let lp = log_prior(theta, spec, layout, prior)?;
    if lp == LOG_ZERO {
        return Ok(LOG_ZERO);
    }
    Ok(log_likelihood(panel, theta, spec)? + lp)
}
