//! Files and run plumbing: datasets, run configuration, the chain store and
//! text reports.

pub mod config;
pub mod dataset;
pub mod report;
pub mod store;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Panel};
use crate::datagen::{simulate_counts, simulate_severities, standard_normal_design, SimRecipe, Truth};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::priors::{derive_prior_from_baselines, CoefPrior, PriorSpec};
use crate::sampler::{run_chains, ChainResult, Progress};
use crate::switching::{build_annual_layout, build_interval_layout, build_weekly_layout, SwitchingLayout, TransitionProbs};

pub use config::{parse_family, sha256_hex, AnalysisConfig, LayoutConfig, RunConfig, SimulateConfig};
pub use dataset::{load_dataset, read_dataset, write_dataset};
pub use store::{load_chain, load_run, persist_chain, save_run, Run, RunMeta};

/// Model, layout, arranged data and priors of a run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ModelSpec,
    pub layout: SwitchingLayout,
    pub panel: Panel,
    pub prior: PriorSpec,
}

/// Layout for `obs_counts[t]` observations in period `t + 1` (annual: `T`
/// years of `N` segments).
pub fn build_layout(layout: &LayoutConfig, periods: usize, obs_counts: Vec<usize>) -> Result<SwitchingLayout> {
    match layout {
        LayoutConfig::Annual => {
            let segments = obs_counts.first().copied().unwrap_or(0);
            if obs_counts.iter().any(|&c| c != segments) {
                return Err(Error::Specification("annual data must observe every segment in every year".into()));
            }
            build_annual_layout(periods, segments)
        }
        LayoutConfig::Weekly | LayoutConfig::Severity => build_weekly_layout(obs_counts),
        LayoutConfig::Intervals { boundaries, ties, restricted } => {
            let ties = if ties.is_empty() { (1..boundaries.len()).collect() } else { ties.clone() };
            build_interval_layout(obs_counts, boundaries.clone(), &ties, *restricted)
        }
    }
}

/// Model, layout and arranged data, without priors.
pub fn arrange(config: &RunConfig, data: &Dataset) -> Result<(ModelSpec, SwitchingLayout, Panel)> {
    let spec = config.model_spec(data.covariate_names())?;
    if let Some(outcomes) = spec.outcome_count() {
        if let Some(o) = data.observations().iter().find(|o| o.y == 0 || o.y as usize > outcomes) {
            return Err(Error::OutcomeOutOfRange { outcome: o.y, count: outcomes });
        }
    }
    let counts = data.counts_per_period();
    let layout = build_layout(&config.layout, counts.len(), counts)?;
    let panel = layout.arrange(data)?;
    Ok((spec, layout, panel))
}

/// Builds everything a fit or an analysis needs. Coefficient priors come
/// from single-state baseline fits unless every free parameter is
/// overridden in the configuration.
pub fn prepare(config: &RunConfig, data: &Dataset) -> Result<Prepared> {
    let (spec, layout, panel) = arrange(config, data)?;
    let names = spec.free_names();
    for name in config.prior.coef.keys() {
        if !names.contains(name) {
            return Err(Error::Config(format!("prior override for unknown free parameter `{name}`")));
        }
    }
    let mut coef = if names.iter().all(|n| config.prior.coef.contains_key(n)) {
        CoefPrior { mu: vec![0.0; names.len()], sigma2: vec![1.0; names.len()] }
    } else {
        info!("deriving coefficient priors from baseline fits");
        derive_prior_from_baselines(&spec, &panel)?
    };
    for (k, name) in names.iter().enumerate() {
        if let Some(o) = config.prior.coef.get(name) {
            coef.mu[k] = o.mean;
            coef.sigma2[k] = o.variance;
        }
    }
    let prior = PriorSpec { coef, trans: config.prior.transition.unwrap_or_default() };
    prior.validate(&spec)?;
    Ok(Prepared { spec, layout, panel, prior })
}

/// Runs all chains of a configuration.
pub fn fit(config: &RunConfig, data: &Dataset, progress: Option<&Progress>) -> Result<Vec<Result<ChainResult>>> {
    let p = prepare(config, data)?;
    run_chains(&p.panel, &p.spec, &p.layout, &p.prior, &config.sampler, progress)
}

/// Generates a synthetic dataset from the `[simulate]` table.
pub fn simulate_dataset(config: &RunConfig, seed: u64) -> Result<(Dataset, Truth)> {
    let sim = config
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("the configuration has no [simulate] table".into()))?;
    if sim.periods == 0 || sim.units == 0 {
        return Err(Error::Config("simulation needs periods ≥ 1 and units ≥ 1".into()));
    }
    let mut covariates = vec!["intercept".to_string()];
    covariates.extend(sim.covariates.iter().cloned());
    let spec = config.model_spec(&covariates)?;
    let layout = build_layout(&config.layout, sim.periods, vec![sim.units; sim.periods])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = standard_normal_design(&layout, covariates.len(), &mut rng);
    let trans = if spec.is_switching() {
        let r = layout.free_interval_count();
        let expand = |v: &[f64]| if v.len() == 1 { vec![v[0]; r] } else { v.to_vec() };
        TransitionProbs { p01: expand(&sim.p01), p10: expand(&sim.p10) }
    } else {
        TransitionProbs { p01: vec![], p10: vec![] }
    };
    let recipe = SimRecipe { spec, layout, free: sim.free.clone(), trans, covariates: design, seed };
    if recipe.spec.is_count() {
        simulate_counts(&recipe)
    } else {
        simulate_severities(&recipe)
    }
}

/// Writes the truth sidecar of a simulated dataset (TOML).
pub fn write_truth(path: &std::path::Path, truth: &Truth) -> Result<()> {
    let text = toml::to_string(truth).map_err(|e| Error::Store(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_truth(path: &std::path::Path) -> Result<Truth> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Store(format!("{}: {e}", path.display())))
}

impl Run {
    pub fn arrange(&self) -> Result<(ModelSpec, SwitchingLayout, Panel)> {
        arrange(&self.config, &self.data)
    }
}
