//! Shared fixtures for the benchmarks.

use rswitch_core::datagen::{simulate_counts, standard_normal_design, SimRecipe};
use rswitch_core::priors::{default_transition_prior, CoefPrior, PriorSpec};
use rswitch_core::switching::build_weekly_layout;
use rswitch_core::{Family, ModelSpec, Panel, SwitchingLayout, TransitionProbs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two-state negative binomial fixture: `periods` weeks of `units`
/// segments with two standard-normal covariates.
pub struct Fixture {
    pub spec: ModelSpec,
    pub layout: SwitchingLayout,
    pub panel: Panel,
    pub prior: PriorSpec,
    pub truth: Vec<f64>,
}

pub fn negbin_fixture(periods: usize, units: usize) -> Fixture {
    let covs: Vec<String> = ["intercept", "x1", "x2"].iter().map(|s| s.to_string()).collect();
    let spec = ModelSpec::switching(Family::NegBin, Family::NegBin, covs).expect("valid spec");
    let layout = build_weekly_layout(vec![units; periods]).expect("valid layout");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let design = standard_normal_design(&layout, 3, &mut rng);
    let truth = vec![0.0, 0.3, -0.2, -1.0, 0.7, 0.3, -0.2, -1.0];
    let recipe = SimRecipe {
        spec: spec.clone(),
        layout: layout.clone(),
        free: truth.clone(),
        trans: TransitionProbs::uniform(1, 0.1, 0.2),
        covariates: design,
        seed: 11,
    };
    let (data, _) = simulate_counts(&recipe).expect("simulation");
    let panel = layout.arrange(&data).expect("arranged");
    let n = spec.free_count();
    let prior = PriorSpec {
        coef: CoefPrior { mu: vec![0.0; n], sigma2: vec![10.0; n] },
        trans: default_transition_prior(),
    };
    Fixture { spec, layout, panel, prior, truth }
}
