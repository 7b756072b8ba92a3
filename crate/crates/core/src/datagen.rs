//! Forward simulation of state paths, counts and severities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, Panel};
use crate::error::{Error, Result};
use crate::model::{Family, ModelSpec, Obs, StateKernel, StateParams};
use crate::special::logistic;
use crate::switching::{StateVector, SwitchingLayout, TransitionProbs};

/// Everything needed to generate a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SimRecipe {
    pub spec: ModelSpec,
    pub layout: SwitchingLayout,
    /// True values of the free parameters.
    pub free: Vec<f64>,
    /// True transition probabilities (ignored by single-state models).
    pub trans: TransitionProbs,
    /// Covariate rows in auxiliary order, period by period.
    pub covariates: Vec<Vec<f64>>,
    pub seed: u64,
}

/// True parameters and states kept alongside a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub names: Vec<String>,
    pub free: Vec<f64>,
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
    pub states: Vec<u8>,
}

/// Markov path over the auxiliary axis. The first state and every state
/// following an index of 𝒯₋ are fair coin flips.
pub fn simulate_states<R: Rng + ?Sized>(layout: &SwitchingLayout, trans: &TransitionProbs, rng: &mut R) -> Result<StateVector> {
    let r = layout.free_interval_count();
    if trans.p01.len() != r || trans.p10.len() != r {
        return Err(Error::Dimension { expected: r, found: trans.p01.len() });
    }
    if trans.p01.iter().chain(&trans.p10).any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("transition probabilities must lie in [0, 1]".into()));
    }
    let t_tilde = layout.t_tilde();
    let mut s = Vec::with_capacity(t_tilde);
    s.push(rng.random_range(0..2u8));
    for t in 0..t_tilde - 1 {
        let next = if layout.counts_transition_from(t) {
            let i = layout.free_interval_at(t);
            let u: f64 = rng.random();
            match s[t] {
                0 => (u < trans.p01[i]) as u8,
                _ => (u >= trans.p10[i]) as u8,
            }
        } else {
            rng.random_range(0..2u8)
        };
        s.push(next);
    }
    Ok(StateVector(s))
}

/// Intercept plus independent standard-normal columns, one row per
/// auxiliary observation slot.
pub fn standard_normal_design<R: Rng + ?Sized>(layout: &SwitchingLayout, covariates: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let rows: usize = layout.obs_counts().iter().sum();
    (0..rows)
        .map(|_| {
            std::iter::once(1.0)
                .chain((1..covariates).map(|_| rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect()
}

/// One draw from the state's observation law.
pub fn draw_observation<R: Rng + ?Sized>(family: Family, params: &StateParams, x: &[f64], rng: &mut R) -> Obs {
    let kernel = StateKernel::new(family, params, 0);
    draw_from_kernel(&kernel, x, rng)
}

fn draw_from_kernel<R: Rng + ?Sized>(kernel: &StateKernel, x: &[f64], rng: &mut R) -> Obs {
    let family = kernel.family();
    match family {
        Family::ZeroOnly => 0,
        Family::Mnl { .. } => {
            let probs = kernel.outcome_probs(x);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i as Obs + 1;
                }
            }
            probs.len() as Obs
        }
        _ => {
            let (lambda, alpha) = kernel.mean_and_alpha(x);
            if family.is_zero_inflated() {
                let z = if family.has_tau() {
                    kernel.tau() * lambda.ln()
                } else {
                    kernel.gamma().iter().zip(x).map(|(g, v)| g * v).sum()
                };
                if rng.random::<f64>() < logistic(z) {
                    return 0;
                }
            }
            draw_count(lambda, alpha, rng)
        }
    }
}

/// Poisson (`α = 0`) or NB draw via the Gamma–Poisson mixture.
fn draw_count<R: Rng + ?Sized>(lambda: f64, alpha: f64, rng: &mut R) -> Obs {
    let mean = if alpha > 0.0 {
        let shape = 1.0 / alpha;
        Gamma::new(shape, alpha * lambda).map_or(lambda, |g| g.sample(rng))
    } else {
        lambda
    };
    if !(mean > 0.0) {
        return 0;
    }
    let v: f64 = Poisson::new(mean).map_or(0.0, |p| p.sample(rng));
    v.min(u32::MAX as f64) as Obs
}

/// New observations for an existing design under the given parameters and
/// states (all-zero states for single-state models).
pub fn simulate_y<R: Rng + ?Sized>(
    panel: &Panel,
    spec: &ModelSpec,
    params: &[StateParams],
    s: &StateVector,
    rng: &mut R,
) -> Result<Vec<Obs>> {
    if s.len() != panel.periods() {
        return Err(Error::Dimension { expected: panel.periods(), found: s.len() });
    }
    let kernels: Vec<StateKernel> = spec.families().iter().zip(params).map(|(f, p)| StateKernel::new(*f, p, 0)).collect();
    let mut y = Vec::with_capacity(panel.len());
    for t in 0..panel.periods() {
        let state = if spec.is_switching() { s.0[t] as usize } else { 0 };
        for row in panel.rows(t) {
            y.push(draw_from_kernel(&kernels[state], panel.x(row), rng));
        }
    }
    Ok(y)
}

fn simulate(recipe: &SimRecipe, want_counts: bool) -> Result<(Dataset, Truth)> {
    let spec = &recipe.spec;
    if spec.is_count() != want_counts {
        return Err(Error::Specification(format!(
            "recipe family {} does not match the requested simulation",
            spec.family(spec.state_count() - 1).name()
        )));
    }
    let layout = &recipe.layout;
    let rows: usize = layout.obs_counts().iter().sum();
    if recipe.covariates.len() != rows {
        return Err(Error::Dimension { expected: rows, found: recipe.covariates.len() });
    }
    if let Some(bad) = recipe.covariates.iter().find(|x| x.len() != spec.covariate_count()) {
        return Err(Error::Dimension { expected: spec.covariate_count(), found: bad.len() });
    }
    let params = spec.assemble_params(&recipe.free)?;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let s = if spec.is_switching() {
        simulate_states(layout, &recipe.trans, &mut rng)?
    } else {
        StateVector(vec![0; layout.t_tilde()])
    };
    let kernels: Vec<StateKernel> = spec.families().iter().zip(&params).map(|(f, p)| StateKernel::new(*f, p, 0)).collect();
    let mut obs = Vec::with_capacity(rows);
    let mut row = 0;
    for (t, &count) in layout.obs_counts().iter().enumerate() {
        let state = if spec.is_switching() { s.0[t] as usize } else { 0 };
        for n in 0..count {
            let x = &recipe.covariates[row];
            let y = draw_from_kernel(&kernels[state], x, &mut rng);
            let (rt, rn) = layout.to_real(t + 1, n + 1)?;
            obs.push(Observation { t: rt as u32, n: rn as u32, y, x: x.clone() });
            row += 1;
        }
    }
    let truth = Truth {
        names: spec.free_names(),
        free: recipe.free.clone(),
        p01: recipe.trans.p01.clone(),
        p10: recipe.trans.p10.clone(),
        states: s.0,
    };
    Ok((Dataset::new(spec.covariates().to_vec(), obs)?, truth))
}

/// Simulates a count dataset (Poisson, NB, zero-inflated or zero-only
/// states).
pub fn simulate_counts(recipe: &SimRecipe) -> Result<(Dataset, Truth)> {
    simulate(recipe, true)
}

/// Simulates severity outcomes, one per accident slot of the layout.
pub fn simulate_severities(recipe: &SimRecipe) -> Result<(Dataset, Truth)> {
    simulate(recipe, false)
}
