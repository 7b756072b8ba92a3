//! Inference from stored chains: convergence diagnostics, label-setting
//! resolution, posterior summaries, evidence and goodness of fit.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Panel;
use crate::datagen::{simulate_states, simulate_y};
use crate::error::{Error, Result};
use crate::model::{Family, ModelSpec, StateKernel};
use crate::sampler::{chain_rng, ChainResult, ParamPoint};
use crate::special::log_sum_exp;
use crate::switching::{stationary_probs, StateVector, SwitchingLayout, TransitionProbs};

/// Default log-joint deficit beyond which a chain is taken to sit in the
/// wrong label setting.
pub const DEFAULT_LABEL_DELTA: f64 = 5.0;
pub const DEFAULT_BOOTSTRAP_DRAWS: usize = 100_000;
pub const DEFAULT_SUBSAMPLE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub psrf: Vec<f64>,
    pub mpsrf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub names: Vec<String>,
    /// `None` when fewer than two chains are retained.
    pub convergence: Option<Convergence>,
    pub retained_chains: Vec<usize>,
    pub dropped_chains: Vec<usize>,
    pub mean_logjoint: Vec<f64>,
    /// Mean post-burn-in acceptance per free coefficient over retained chains.
    pub accept_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub credible_lo: Vec<f64>,
    pub credible_hi: Vec<f64>,
    /// `P(s_t̃ = 1 | Y)` per auxiliary period.
    pub state_prob: Vec<f64>,
    pub state_sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvidence {
    pub log_marginal: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub dic: f64,
    pub mean_loglik: f64,
    pub max_loglik: f64,
}

/// Names of the continuous parameters: free coefficients, then `p01` and
/// `p10` per free interval.
pub fn continuous_names(spec: &ModelSpec, intervals: usize) -> Vec<String> {
    let mut names = spec.free_names();
    if spec.is_switching() {
        names.extend((1..=intervals).map(|r| format!("p01[{r}]")));
        names.extend((1..=intervals).map(|r| format!("p10[{r}]")));
    }
    names
}

/// Continuous coordinates of one draw in [`continuous_names`] order.
pub fn continuous_values(point: &ParamPoint) -> Vec<f64> {
    let mut v = point.free.clone();
    v.extend_from_slice(&point.trans.p01);
    v.extend_from_slice(&point.trans.p10);
    v
}

/// Potential scale reduction factors per parameter and the multivariate
/// factor. `chains[m][g]` is draw `g` of chain `m`.
pub fn psrf_mpsrf(chains: &[Vec<Vec<f64>>]) -> Result<Convergence> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::Unavailable("scale reduction factors need at least two chains".into()));
    }
    let g = chains[0].len();
    if g < 2 {
        return Err(Error::Unavailable("scale reduction factors need at least two draws per chain".into()));
    }
    if chains.iter().any(|c| c.len() != g) {
        return Err(Error::Dimension { expected: g, found: chains.iter().map(Vec::len).find(|&l| l != g).unwrap() });
    }
    let p = chains[0][0].len();
    if chains.iter().flatten().any(|d| d.len() != p) {
        return Err(Error::Dimension { expected: p, found: 0 });
    }
    let (mf, gf) = (m as f64, g as f64);
    let means: Vec<DVector<f64>> = chains
        .iter()
        .map(|c| c.iter().fold(DVector::zeros(p), |acc, d| acc + DVector::from_column_slice(d)) / gf)
        .collect();
    let grand = means.iter().fold(DVector::zeros(p), |acc, v| acc + v) / mf;
    let mut w = DMatrix::<f64>::zeros(p, p);
    for (c, mean) in chains.iter().zip(&means) {
        for d in c {
            let e = DVector::from_column_slice(d) - mean;
            w += &e * e.transpose();
        }
    }
    w /= mf * (gf - 1.0);
    // between-chain covariance of the chain means (B/G′)
    let mut b = DMatrix::<f64>::zeros(p, p);
    for mean in &means {
        let e = mean - &grand;
        b += &e * e.transpose();
    }
    b /= mf - 1.0;
    let base = (gf - 1.0) / gf;
    let v = &w * base + &b * (1.0 + 1.0 / mf);
    let psrf = (0..p).map(|i| (v[(i, i)] / w[(i, i)]).sqrt()).collect();
    let lambda = max_generalized_eigenvalue(&w, &b);
    let mpsrf = (base + lambda * (mf + 1.0) / mf).sqrt();
    Ok(Convergence { psrf, mpsrf })
}

/// Largest eigenvalue of `W⁻¹B` for symmetric `W` (positive definite) and
/// `B`; falls back to the pseudo-inverse when `W` is singular.
fn max_generalized_eigenvalue(w: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if let Some(chol) = w.clone().cholesky() {
        let l = chol.l();
        if let Some(l_inv) = l.clone().try_inverse() {
            let m = &l_inv * b * l_inv.transpose();
            let m = (&m + m.transpose()) * 0.5;
            return SymmetricEigen::new(m).eigenvalues.max();
        }
    }
    warn!("within-chain covariance is singular; using its pseudo-inverse");
    let eig = SymmetricEigen::new(w.clone());
    let tol = eig.eigenvalues.amax() * 1e-12 * w.nrows() as f64;
    let inv_sqrt = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| if l > tol { 1.0 / l.sqrt() } else { 0.0 }),
    );
    let half = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let m = &half * b * &half;
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues.max()
}

/// Splits chains by their mean log-joint: those more than `delta` below the
/// best chain's mean are dropped.
pub fn resolve_labels(logjoint_traces: &[Vec<f64>], delta: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if logjoint_traces.is_empty() || logjoint_traces.iter().any(Vec::is_empty) {
        return Err(Error::Domain("label resolution needs non-empty log-joint traces".into()));
    }
    let means: Vec<f64> = logjoint_traces.iter().map(|t| mean(t)).collect();
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (retained, dropped): (Vec<usize>, Vec<usize>) = (0..means.len()).partition(|&i| means[i] >= best - delta);
    Ok((retained, dropped))
}

/// Label resolution followed by scale reduction factors over the retained
/// chains.
pub fn diagnose(chains: &[ChainResult], spec: &ModelSpec, delta: f64) -> Result<DiagnosticsReport> {
    let traces: Vec<Vec<f64>> = chains.iter().map(|c| c.logjoint.clone()).collect();
    let (retained, dropped) = resolve_labels(&traces, delta)?;
    let intervals = chains[0].draws.first().map_or(0, |d| d.trans.p01.len());
    let names = continuous_names(spec, intervals);
    let convergence = if retained.len() >= 2 {
        let draws: Vec<Vec<Vec<f64>>> =
            retained.iter().map(|&i| chains[i].draws.iter().map(continuous_values).collect()).collect();
        Some(psrf_mpsrf(&draws)?)
    } else {
        None
    };
    let n_free = spec.free_count();
    let accept_rates = (0..n_free)
        .map(|k| retained.iter().map(|&i| chains[i].accept_rates[k]).sum::<f64>() / retained.len() as f64)
        .collect();
    Ok(DiagnosticsReport {
        names,
        convergence,
        retained_chains: retained.iter().map(|&i| chains[i].chain).collect(),
        dropped_chains: dropped.iter().map(|&i| chains[i].chain).collect(),
        mean_logjoint: chains.iter().map(|c| mean(&c.logjoint)).collect(),
        accept_rates,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Empirical quantile by linear interpolation between order statistics:
/// position `(n − 1)·p` of the sorted sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Means, standard deviations, equal-tailed `(a/2, 1 − a/2)` credible
/// intervals and state probabilities over the pooled draws.
pub fn summarize(chains: &[&ChainResult], spec: &ModelSpec, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("significance level must lie in (0, 1), got {level}")));
    }
    let draws: Vec<&ParamPoint> = chains.iter().flat_map(|c| c.draws.iter()).collect();
    if draws.is_empty() {
        return Err(Error::Domain("no draws to summarize".into()));
    }
    let intervals = draws[0].trans.p01.len();
    let names = continuous_names(spec, intervals);
    let values: Vec<Vec<f64>> = draws.iter().map(|d| continuous_values(d)).collect();
    let n = values.len() as f64;
    let p = names.len();
    let mut summary = PosteriorSummary {
        names,
        mean: Vec::with_capacity(p),
        sd: Vec::with_capacity(p),
        credible_lo: Vec::with_capacity(p),
        credible_hi: Vec::with_capacity(p),
        state_prob: Vec::new(),
        state_sd: Vec::new(),
    };
    for j in 0..p {
        let mut col: Vec<f64> = values.iter().map(|v| v[j]).collect();
        let m = col.iter().sum::<f64>() / n;
        let var = if col.len() > 1 { col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        col.sort_by(f64::total_cmp);
        summary.mean.push(m);
        summary.sd.push(var.sqrt());
        summary.credible_lo.push(quantile_sorted(&col, level / 2.0));
        summary.credible_hi.push(quantile_sorted(&col, 1.0 - level / 2.0));
    }
    if spec.is_switching() {
        let t = draws[0].s.len();
        let mut ones = vec![0u64; t];
        for d in &draws {
            for (acc, &s) in ones.iter_mut().zip(d.s.as_slice()) {
                *acc += s as u64;
            }
        }
        summary.state_prob = ones.iter().map(|&c| c as f64 / n).collect();
        summary.state_sd = summary.state_prob.iter().map(|&q| (q * (1.0 - q)).sqrt()).collect();
    }
    Ok(summary)
}

/// Harmonic-mean estimate of `ln f(Y | M)` from per-draw log-likelihoods.
pub fn log_marginal_likelihood(loglik: &[f64]) -> Result<f64> {
    if loglik.is_empty() {
        return Err(Error::Domain("empty log-likelihood trace".into()));
    }
    let neg: Vec<f64> = loglik.iter().map(|v| -v).collect();
    Ok(-(log_sum_exp(&neg) - (loglik.len() as f64).ln()))
}

/// Bootstrap interval of the harmonic-mean estimate: `draws` resamples (with
/// replacement) of `fraction·G′` log-likelihoods each; returns the 2.5% and
/// 97.5% quantiles of the resampled estimates.
pub fn bootstrap_marglik_ci(loglik: &[f64], draws: usize, fraction: f64, seed: u64) -> Result<(f64, f64)> {
    if loglik.len() < 100 {
        return Err(Error::Domain(format!("bootstrap needs at least 100 draws, got {}", loglik.len())));
    }
    if draws == 0 || !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Domain("bootstrap needs positive draws and a fraction in (0, 1]".into()));
    }
    let size = ((loglik.len() as f64 * fraction).round() as usize).max(1);
    let mut rng = chain_rng(seed, 0);
    let mut buf = vec![0.0; size];
    let mut estimates: Vec<f64> = (0..draws)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = -loglik[rng.random_range(0..loglik.len())];
            }
            -(log_sum_exp(&buf) - (size as f64).ln())
        })
        .collect();
    estimates.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&estimates, 0.025), quantile_sorted(&estimates, 0.975)))
}

/// `ln BF = ln f(Y | M₂) − ln f(Y | M₁)`; positive values favour `M₂`.
pub fn log_bayes_factor(log_marginal_2: f64, log_marginal_1: f64) -> f64 {
    log_marginal_2 - log_marginal_1
}

/// `DIC = 2·E[−2 LL] − (−2 LL(θ̄))`.
pub fn dic(loglik: &[f64], loglik_at_mean: f64) -> Result<f64> {
    if loglik.is_empty() {
        return Err(Error::Domain("empty log-likelihood trace".into()));
    }
    Ok(2.0 * (-2.0 * mean(loglik)) + 2.0 * loglik_at_mean)
}

/// Plug-in point for DIC and goodness of fit: continuous parameters at their
/// posterior means, states at their rounded posterior probabilities.
pub fn posterior_mean_point(chains: &[&ChainResult]) -> Result<ParamPoint> {
    let draws: Vec<&ParamPoint> = chains.iter().flat_map(|c| c.draws.iter()).collect();
    let first = draws.first().ok_or_else(|| Error::Domain("no draws".into()))?;
    let n = draws.len() as f64;
    let avg = |f: &dyn Fn(&ParamPoint) -> &[f64]| -> Vec<f64> {
        let mut acc = vec![0.0; f(first).len()];
        for d in &draws {
            for (a, v) in acc.iter_mut().zip(f(d)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / n).collect()
    };
    let free = avg(&|d| &d.free);
    let p01 = avg(&|d| &d.trans.p01);
    let p10 = avg(&|d| &d.trans.p10);
    let mut ones = vec![0usize; first.s.len()];
    for d in &draws {
        for (acc, &s) in ones.iter_mut().zip(d.s.as_slice()) {
            *acc += s as usize;
        }
    }
    let s = ones.iter().map(|&c| (2 * c > draws.len()) as u8).collect();
    Ok(ParamPoint { free, trans: TransitionProbs { p01, p10 }, s: StateVector(s) })
}

/// Evidence summary of a fitted model over retained chains.
pub fn model_evidence(
    panel: &Panel,
    spec: &ModelSpec,
    chains: &[&ChainResult],
    bootstrap_draws: usize,
    seed: u64,
) -> Result<ModelEvidence> {
    let ll: Vec<f64> = chains.iter().flat_map(|c| c.loglik.iter().copied()).collect();
    let log_marginal = log_marginal_likelihood(&ll)?;
    let (ci_lo, ci_hi) = if ll.len() >= 100 {
        bootstrap_marglik_ci(&ll, bootstrap_draws, DEFAULT_SUBSAMPLE_FRACTION, seed)?
    } else {
        (f64::NAN, f64::NAN)
    };
    let point = posterior_mean_point(chains)?;
    let ll_mean = crate::priors::log_likelihood(panel, &point, spec)?;
    Ok(ModelEvidence {
        log_marginal,
        ci_lo,
        ci_hi,
        dic: dic(&ll, ll_mean)?,
        mean_loglik: mean(&ll),
        max_loglik: ll.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

fn kernels(spec: &ModelSpec, free: &[f64]) -> Result<Vec<StateKernel>> {
    let params = spec.assemble_params(free)?;
    Ok(spec.families().iter().zip(&params).map(|(f, p)| StateKernel::new(*f, p, 0)).collect())
}

/// Stationary state probabilities of the interval governing period `t`.
fn state_weights(spec: &ModelSpec, layout: &SwitchingLayout, trans: &TransitionProbs, t: usize) -> Result<[f64; 2]> {
    if !spec.is_switching() {
        return Ok([1.0, 0.0]);
    }
    let r = layout.free_interval_at(t);
    let (p0, p1) = stationary_probs(trans.p01[r], trans.p10[r])?;
    Ok([p0, p1])
}

/// Mean and variance of a count under one state.
fn count_moments(kernel: &StateKernel, x: &[f64]) -> (f64, f64) {
    let family = kernel.family();
    if family == Family::ZeroOnly {
        return (0.0, 0.0);
    }
    let (lambda, alpha) = kernel.mean_and_alpha(x);
    let base_var = lambda * (1.0 + alpha * lambda);
    if !family.is_zero_inflated() {
        return (lambda, base_var);
    }
    let z = if family.has_tau() { kernel.tau() * lambda.ln() } else { kernel.gamma().iter().zip(x).map(|(g, v)| g * v).sum() };
    let q = crate::special::logistic(z);
    ((1.0 - q) * lambda, (1.0 - q) * base_var + q * (1.0 - q) * lambda * lambda)
}

/// `Σ (Y − E)² / Var` with state-unconditional moments.
pub fn gof_chisq_counts(panel: &Panel, spec: &ModelSpec, layout: &SwitchingLayout, point: &ParamPoint) -> Result<f64> {
    if !spec.is_count() {
        return Err(Error::Specification("count statistic requested for a severity model".into()));
    }
    let ks = kernels(spec, &point.free)?;
    let mut total = 0.0;
    for t in 0..panel.periods() {
        let w = state_weights(spec, layout, &point.trans, t)?;
        for row in panel.rows(t) {
            let x = panel.x(row);
            let (m0, v0) = count_moments(&ks[0], x);
            let (e, var) = if spec.is_switching() {
                let (m1, v1) = count_moments(&ks[1], x);
                (w[0] * m0 + w[1] * m1, w[0] * v0 + w[1] * v1 + w[0] * w[1] * (m1 - m0).powi(2))
            } else {
                (m0, v0)
            };
            let y = panel.y(row) as f64;
            if var > 0.0 {
                total += (y - e).powi(2) / var;
            } else if y != e {
                return Err(Error::DegenerateModel(format!(
                    "zero variance with observed {y} ≠ expected {e} in period {}",
                    t + 1
                )));
            }
        }
    }
    Ok(total)
}

/// Pearson statistic over outcome indicators of a multinomial logit model.
pub fn gof_chisq_mnl(panel: &Panel, spec: &ModelSpec, layout: &SwitchingLayout, point: &ParamPoint) -> Result<f64> {
    let Some(outcomes) = spec.outcome_count() else {
        return Err(Error::Specification("severity statistic requested for a count model".into()));
    };
    let ks = kernels(spec, &point.free)?;
    let mut total = 0.0;
    for t in 0..panel.periods() {
        let w = state_weights(spec, layout, &point.trans, t)?;
        for row in panel.rows(t) {
            let x = panel.x(row);
            let p0 = ks[0].outcome_probs(x);
            let p1 = if spec.is_switching() { ks[1].outcome_probs(x) } else { p0.clone() };
            let y = panel.y(row) as usize;
            if y == 0 || y > outcomes {
                return Err(Error::OutcomeOutOfRange { outcome: y as u32, count: outcomes });
            }
            for i in 0..outcomes {
                let p = w[0] * p0[i] + w[1] * p1[i];
                let delta = if i + 1 == y { 1.0 } else { 0.0 };
                if p > 0.0 {
                    total += (delta - p).powi(2) / p;
                } else if delta > 0.0 {
                    return Err(Error::Domain(format!("observed outcome {y} has zero probability")));
                }
            }
        }
    }
    Ok(total)
}

/// The χ² statistic appropriate to the model kind.
pub fn gof_statistic(panel: &Panel, spec: &ModelSpec, layout: &SwitchingLayout, point: &ParamPoint) -> Result<f64> {
    if spec.is_count() {
        gof_chisq_counts(panel, spec, layout, point)
    } else {
        gof_chisq_mnl(panel, spec, layout, point)
    }
}

/// Fraction of replicate statistics strictly above the observed one.
pub fn exceedance_fraction(observed: f64, replicates: &[f64]) -> f64 {
    replicates.iter().filter(|&&r| r > observed).count() as f64 / replicates.len() as f64
}

/// Monte-Carlo p-value: `replicates` datasets are simulated from the fitted
/// model (states regenerated from the transition probabilities) on the
/// observed design.
pub fn gof_pvalue(
    panel: &Panel,
    spec: &ModelSpec,
    layout: &SwitchingLayout,
    point: &ParamPoint,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    if replicates < 100 {
        return Err(Error::Domain(format!("at least 100 replicates are required, got {replicates}")));
    }
    let observed = match gof_statistic(panel, spec, layout, point) {
        Ok(v) => v,
        Err(Error::DegenerateModel(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let params = spec.assemble_params(&point.free)?;
    let stats: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = chain_rng(seed, i);
            let s = if spec.is_switching() {
                simulate_states(layout, &point.trans, &mut rng)?
            } else {
                StateVector(vec![0; panel.periods()])
            };
            let y = simulate_y(panel, spec, &params, &s, &mut rng)?;
            match gof_statistic(&panel.with_y(y), spec, layout, point) {
                Ok(v) => Ok(v),
                Err(Error::DegenerateModel(_)) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(exceedance_fraction(observed, &stats))
}

/// Weighted Pearson correlation between posterior state probabilities and an
/// external series, with weights `min(1/sd_t, median(1/sd))`.
pub fn weighted_state_correlation(state_prob: &[f64], state_sd: &[f64], series: &[f64]) -> Result<f64> {
    let n = state_prob.len();
    if state_sd.len() != n || series.len() != n {
        return Err(Error::Dimension { expected: n, found: series.len().min(state_sd.len()) });
    }
    if n < 2 {
        return Err(Error::UndefinedCorrelation("need at least two periods".into()));
    }
    let inv: Vec<f64> = state_sd.iter().map(|&s| if s > 0.0 { 1.0 / s } else { f64::INFINITY }).collect();
    let mut sorted = inv.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let w: Vec<f64> = if median.is_finite() { inv.iter().map(|&v| v.min(median)).collect() } else { vec![1.0; n] };
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(state_prob).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(series).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let (dx, dy) = (state_prob[i] - mx, series[i] - my);
        sxy += w[i] * dx * dy;
        sxx += w[i] * dx * dx;
        syy += w[i] * dy * dy;
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(Error::UndefinedCorrelation("a constant series has no correlation".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Observation};
    use crate::sampler::ProposalScales;
    use crate::switching::build_weekly_layout;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn covs(k: usize) -> Vec<String> {
        std::iter::once("intercept".to_string()).chain((1..k).map(|i| format!("x{i}"))).collect()
    }

    fn scalar_chains(chains: &[&[f64]]) -> Vec<Vec<Vec<f64>>> {
        chains.iter().map(|c| c.iter().map(|&v| vec![v]).collect()).collect()
    }

    #[test]
    fn psrf_worked_example() {
        let c = psrf_mpsrf(&scalar_chains(&[&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]])).unwrap();
        assert_relative_eq!(c.psrf[0], (2.0 / 3.0 + 0.75f64).sqrt(), epsilon = 1e-12);
        assert!((c.psrf[0] - 1.1902).abs() < 1e-4);
        assert_relative_eq!(c.mpsrf, c.psrf[0], epsilon = 1e-12);
    }

    #[test]
    fn identical_chains_give_the_floor() {
        let chain: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64 * 0.3, (i as f64).sin()]).collect();
        let c = psrf_mpsrf(&[chain.clone(), chain.clone(), chain]).unwrap();
        let floor = (6.0f64 / 7.0).sqrt();
        for p in c.psrf {
            assert!((p - floor).abs() < 1e-12);
        }
        assert!((c.mpsrf - floor).abs() < 1e-12);
    }

    #[test]
    fn singular_within_covariance_uses_pseudo_inverse() {
        // the second coordinate duplicates the first
        let a: Vec<Vec<f64>> = [1.0, 2.0, 4.0].iter().map(|&v| vec![v, v]).collect();
        let b: Vec<Vec<f64>> = [2.0, 3.5, 4.0].iter().map(|&v| vec![v, v]).collect();
        let c = psrf_mpsrf(&[a.clone(), b.clone()]).unwrap();
        let single = psrf_mpsrf(&[
            a.iter().map(|v| vec![v[0]]).collect(),
            b.iter().map(|v| vec![v[0]]).collect(),
        ])
        .unwrap();
        assert_relative_eq!(c.mpsrf, single.mpsrf, epsilon = 1e-9);
    }

    #[test]
    fn psrf_needs_two_chains() {
        assert!(matches!(psrf_mpsrf(&scalar_chains(&[&[1.0, 2.0]])), Err(Error::Unavailable(_))));
    }

    #[test]
    fn label_threshold() {
        let t = |m: f64| vec![m; 3];
        let (kept, dropped) = resolve_labels(&[t(-100.0), t(-100.2), t(-135.0)], 5.0).unwrap();
        assert_eq!(kept, vec![0, 1]);
        assert_eq!(dropped, vec![2]);
        let (kept, dropped) = resolve_labels(&[t(-3.0)], 5.0).unwrap();
        assert_eq!((kept, dropped), (vec![0], vec![]));
        let (kept, _) = resolve_labels(&[t(1.0), t(1.0)], 5.0).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn type7_quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_relative_eq!(quantile_sorted(&v, 0.025), 3.475, epsilon = 1e-12);
        assert_relative_eq!(quantile_sorted(&v, 0.975), 97.525, epsilon = 1e-12);
    }

    fn chain_of(points: Vec<ParamPoint>, loglik: Vec<f64>) -> ChainResult {
        ChainResult {
            chain: 0,
            names: vec![],
            logjoint: loglik.clone(),
            loglik,
            accept_rates: vec![],
            scales: ProposalScales { sigma: vec![], shape: Default::default() },
            unfitted_scales: vec![],
            draws: points,
        }
    }

    #[test]
    fn summaries_of_constant_and_state_draws() {
        let spec = ModelSpec::switching(Family::Poisson, Family::Poisson, covs(1)).unwrap();
        let point = ParamPoint {
            free: vec![0.5, 1.5],
            trans: TransitionProbs::uniform(1, 0.2, 0.3),
            s: StateVector(vec![1, 1, 0]),
        };
        let c = chain_of(vec![point.clone(); 10], vec![-1.0; 10]);
        let s = summarize(&[&c], &spec, 0.05).unwrap();
        assert_eq!(s.names, vec!["s0.beta[intercept]", "s1.beta[intercept]", "p01[1]", "p10[1]"]);
        for (m, e) in s.mean.iter().zip([0.5, 1.5, 0.2, 0.3]) {
            assert_relative_eq!(*m, e, epsilon = 1e-12);
        }
        assert_eq!(s.credible_lo, s.credible_hi);
        assert_eq!(s.state_prob, vec![1.0, 1.0, 0.0]);
        assert!(s.sd.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn harmonic_mean_examples() {
        assert_relative_eq!(log_marginal_likelihood(&[-3.0; 5]).unwrap(), -3.0, epsilon = 1e-12);
        assert_relative_eq!(log_marginal_likelihood(&[0.0, -(3f64.ln())]).unwrap(), -(2f64.ln()), epsilon = 1e-12);
        let base = [-1.0, -2.0, -1.5];
        let mut dup = base.to_vec();
        dup.push(-2.0);
        assert!(log_marginal_likelihood(&dup).unwrap() < log_marginal_likelihood(&base).unwrap());
    }

    proptest! {
        #[test]
        fn harmonic_mean_bounded_by_max(trace in prop::collection::vec(-1e3f64..0.0, 1..50)) {
            let hm = log_marginal_likelihood(&trace).unwrap();
            let max = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = trace.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(hm <= max + 1e-9);
            prop_assert!(hm >= min - 1e-9);
        }

        #[test]
        fn bayes_factor_antisymmetric(a in -1e4f64..0.0, b in -1e4f64..0.0) {
            prop_assert_eq!(log_bayes_factor(a, a), 0.0);
            prop_assert_eq!(log_bayes_factor(a, b), -log_bayes_factor(b, a));
        }

        #[test]
        fn psrf_never_below_floor(
            a in prop::collection::vec(-5.0f64..5.0, 6),
            b in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let c = psrf_mpsrf(&scalar_chains(&[&a, &b])).unwrap();
            let floor = (5.0f64 / 6.0).sqrt();
            prop_assert!(c.psrf[0] >= floor - 1e-12);
            prop_assert!(c.mpsrf >= floor - 1e-12);
        }
    }

    #[test]
    fn bayes_factor_example() {
        assert_relative_eq!(log_bayes_factor(-2184.21, -2554.16), 369.95, epsilon = 1e-9);
    }

    #[test]
    fn bootstrap_examples() {
        let constant = vec![-7.0; 500];
        let (lo, hi) = bootstrap_marglik_ci(&constant, 2000, 0.01, 1).unwrap();
        assert_relative_eq!(lo, -7.0, epsilon = 1e-12);
        assert_relative_eq!(hi, -7.0, epsilon = 1e-12);
        assert!(bootstrap_marglik_ci(&constant[..50], 10, 0.01, 1).is_err());
    }

    /// Second implementation: resampling by counting how many low values a
    /// subsample draws (binomial), so each estimate has closed form.
    #[test]
    fn bootstrap_matches_binomial_oracle() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::{Binomial, Distribution};
        let trace: Vec<f64> = (0..1000).map(|i| if i % 4 == 0 { -12.0 } else { -10.0 }).collect();
        let (lo, hi) = bootstrap_marglik_ci(&trace, 20_000, 0.02, 3).unwrap();
        let m = 20u64;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let bin = Binomial::new(m, 0.25).unwrap();
        let mut oracle: Vec<f64> = (0..20_000)
            .map(|_| {
                let k = bin.sample(&mut rng) as f64;
                let mf = m as f64;
                // −ln((k·e^{12} + (m−k)·e^{10}) / m)
                -((k * 12f64.exp() + (mf - k) * 10f64.exp()) / mf).ln()
            })
            .collect();
        oracle.sort_by(f64::total_cmp);
        let (olo, ohi) = (quantile_sorted(&oracle, 0.025), quantile_sorted(&oracle, 0.975));
        // estimates are discrete (k = 0..20), so quantiles should coincide up to
        // interpolation within one step
        let step = 0.15;
        assert!((lo - olo).abs() < step, "{lo} vs {olo}");
        assert!((hi - ohi).abs() < step, "{hi} vs {ohi}");
    }

    #[test]
    fn dic_examples() {
        assert_relative_eq!(dic(&[-4.0], -4.0).unwrap(), 8.0);
        assert_relative_eq!(dic(&[-2.5; 4], -2.5).unwrap(), 5.0);
        // mean LL = −3, LL(θ̄) = −2.5: 2·6 − 5 = 7
        assert_relative_eq!(dic(&[-2.0, -4.0], -2.5).unwrap(), 7.0);
    }

    fn panel_of(ys: &[u32], xs: &[f64]) -> (Panel, SwitchingLayout) {
        let obs = ys
            .iter()
            .zip(xs)
            .enumerate()
            .map(|(i, (&y, &x))| Observation { t: i as u32 + 1, n: 1, y, x: vec![1.0, x] })
            .collect();
        let data = Dataset::new(covs(2), obs).unwrap();
        let layout = build_weekly_layout(data.counts_per_period()).unwrap();
        (layout.arrange(&data).unwrap(), layout)
    }

    #[test]
    fn single_state_poisson_is_pearson() {
        let ys = [0u32, 3, 1, 5, 2];
        let xs = [0.1, -0.4, 0.7, 1.2, -1.0];
        let (panel, layout) = panel_of(&ys, &xs);
        let spec = ModelSpec::single(Family::Poisson, covs(2)).unwrap();
        let point = ParamPoint {
            free: vec![0.4, 0.6],
            trans: TransitionProbs { p01: vec![], p10: vec![] },
            s: StateVector(vec![0; 5]),
        };
        let pearson: f64 = ys
            .iter()
            .zip(&xs)
            .map(|(&y, &x)| {
                let e = (0.4 + 0.6 * x).exp();
                (y as f64 - e).powi(2) / e
            })
            .sum();
        assert_relative_eq!(gof_chisq_counts(&panel, &spec, &layout, &point).unwrap(), pearson, epsilon = 1e-12);
    }

    #[test]
    fn two_state_moment_arithmetic() {
        // λ⁰ = 1, λ¹ = 3, p̄ = (½, ½), α = 0, Y = 2: E = 2, term 0
        let (panel, layout) = panel_of(&[2, 2], &[0.0, 0.0]);
        let spec = ModelSpec::switching(Family::Poisson, Family::Poisson, covs(2)).unwrap();
        let point = ParamPoint {
            free: vec![0.0, 0.0, 3f64.ln(), 0.0],
            trans: TransitionProbs::uniform(1, 0.4, 0.4),
            s: StateVector(vec![0, 1]),
        };
        assert_relative_eq!(gof_chisq_counts(&panel, &spec, &layout, &point).unwrap(), 0.0, epsilon = 1e-12);
        // Y = 4: (4 − 2)² / (½·1 + ½·3 + ¼·4) = 4/3 per observation
        let (panel, layout) = panel_of(&[4, 4], &[0.0, 0.0]);
        assert_relative_eq!(gof_chisq_counts(&panel, &spec, &layout, &point).unwrap(), 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn mnl_statistic_examples() {
        let (panel, layout) = panel_of(&[1, 1], &[0.0, 0.0]);
        let spec = ModelSpec::single(Family::Mnl { outcomes: 2 }, covs(2)).unwrap();
        let point = ParamPoint {
            free: vec![0.0, 0.0],
            trans: TransitionProbs { p01: vec![], p10: vec![] },
            s: StateVector(vec![0, 0]),
        };
        // each accident: (½)²/½ + (½)²/½ = 1
        assert_relative_eq!(gof_chisq_mnl(&panel, &spec, &layout, &point).unwrap(), 2.0, epsilon = 1e-12);
        let saturated = ParamPoint { free: vec![800.0, 0.0], ..point };
        assert_relative_eq!(gof_chisq_mnl(&panel, &spec, &layout, &saturated).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pvalue_sentinels() {
        assert_eq!(exceedance_fraction(0.0, &[0.5, 1.0, 2.0]), 1.0);
        assert_eq!(exceedance_fraction(f64::INFINITY, &[0.5, 1.0, f64::INFINITY]), 0.0);
        assert_eq!(exceedance_fraction(1.0, &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn correlation_examples() {
        let p = [0.1, 0.5, 0.9, 0.3];
        let sd = [0.3, 0.5, 0.3, 0.45];
        assert_relative_eq!(weighted_state_correlation(&p, &[0.2; 4], &p).unwrap(), 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        assert_relative_eq!(weighted_state_correlation(&p, &sd, &neg).unwrap(), -1.0, epsilon = 1e-12);
        assert!(weighted_state_correlation(&p, &sd, &[1.0; 4]).is_err());

        // hand computation with weights (1, 2, 2): 1/sd = (1, 2, 4), median 2
        let x = [0.0, 1.0, 0.5];
        let y = [1.0, 3.0, 2.0];
        let sd3 = [1.0, 0.5, 0.25];
        let w = [1.0, 2.0, 2.0];
        let sw: f64 = w.iter().sum();
        let mx = (0.0 + 2.0 + 1.0) / sw;
        let my = (1.0 + 6.0 + 4.0) / sw;
        let cov: f64 = (0..3).map(|i| w[i] * (x[i] - mx) * (y[i] - my)).sum();
        let vx: f64 = (0..3).map(|i| w[i] * (x[i] - mx).powi(2)).sum();
        let vy: f64 = (0..3).map(|i| w[i] * (y[i] - my).powi(2)).sum();
        assert_relative_eq!(
            weighted_state_correlation(&x, &sd3, &y).unwrap(),
            cov / (vx * vy).sqrt(),
            epsilon = 1e-12
        );
    }
}
