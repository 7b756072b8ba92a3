//! Run configuration: a TOML document with `[model]`, `[layout]`, `[prior]`,
//! `[sampler]`, `[analysis]` and (for synthetic data) `[simulate]` tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{DEFAULT_BOOTSTRAP_DRAWS, DEFAULT_LABEL_DELTA, DEFAULT_SUBSAMPLE_FRACTION};
use crate::error::{Error, Result};
use crate::model::{Family, ModelSpec, Restriction};
use crate::priors::TransitionPrior;
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default)]
    pub prior: PriorOverrides,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// One family name (single-state model) or two (state 0, state 1).
    /// `zero` as the state-0 family gives the zero-accident state.
    pub families: Vec<String>,
    /// Number of severity outcomes for `mnl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<usize>,
    /// Parameter name → `free`, `zero`, `-inf` or `tie:<parameter name>`.
    #[serde(default)]
    pub restrictions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayoutConfig {
    /// Segments observed over years; the dataset's `t` is the year and `n`
    /// the segment.
    Annual,
    #[default]
    Weekly,
    /// Accidents per week; `n` numbers the accidents of week `t`.
    Severity,
    /// Identity time with explicit interval boundaries (1-based, starting
    /// at 1 and ending at `T + 1`) and a 1-based tie map.
    Intervals {
        boundaries: Vec<usize>,
        #[serde(default)]
        ties: Vec<usize>,
        #[serde(default = "yes")]
        restricted: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefOverride {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorOverrides {
    /// Free parameter name → normal prior; the rest come from baseline fits.
    #[serde(default)]
    pub coef: BTreeMap<String, CoefOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<TransitionPrior>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub delta: f64,
    pub level: f64,
    pub bootstrap_draws: usize,
    pub subsample_fraction: f64,
    pub gof_replicates: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            delta: DEFAULT_LABEL_DELTA,
            level: 0.05,
            bootstrap_draws: DEFAULT_BOOTSTRAP_DRAWS,
            subsample_fraction: DEFAULT_SUBSAMPLE_FRACTION,
            gof_replicates: 200,
        }
    }
}

/// Synthetic-data recipe for the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Real periods `T`.
    pub periods: usize,
    /// Observations per period (segments for annual layouts).
    pub units: usize,
    /// Names of the standard-normal covariates after the intercept.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// True free parameters in model order.
    pub free: Vec<f64>,
    #[serde(default)]
    pub p01: Vec<f64>,
    #[serde(default)]
    pub p10: Vec<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml()?.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        let n = self.model.families.len();
        if n == 0 || n > 2 {
            return Err(Error::Config(format!("one or two families expected, got {n}")));
        }
        for name in &self.model.families {
            parse_family(name, self.model.outcomes)?;
        }
        let a = &self.analysis;
        if !(a.delta >= 0.0) || !(a.level > 0.0 && a.level < 1.0) {
            return Err(Error::Config("analysis needs δ ≥ 0 and a level in (0, 1)".into()));
        }
        if !(a.subsample_fraction > 0.0 && a.subsample_fraction <= 1.0) || a.bootstrap_draws == 0 {
            return Err(Error::Config("bootstrap needs positive draws and a fraction in (0, 1]".into()));
        }
        if a.gof_replicates < 100 {
            return Err(Error::Config("at least 100 goodness-of-fit replicates are required".into()));
        }
        Ok(())
    }

    /// Builds the model for the given covariate header.
    pub fn model_spec(&self, covariates: &[String]) -> Result<ModelSpec> {
        let m = &self.model;
        let families: Vec<Family> =
            m.families.iter().map(|f| parse_family(f, m.outcomes)).collect::<Result<_>>()?;
        let zero_state0 = families[0] == Family::ZeroOnly;
        let mut spec = match families.as_slice() {
            [f] if *f == Family::ZeroOnly => {
                return Err(Error::Specification("a single-state model cannot be zero-only".into()))
            }
            [f] => ModelSpec::single(*f, covariates.to_vec())?,
            [f0, f1] => {
                let first = if zero_state0 { *f1 } else { *f0 };
                ModelSpec::switching(first, *f1, covariates.to_vec())?
            }
            _ => unreachable!("validated"),
        };
        let intercept = covariates.first().ok_or_else(|| Error::Specification("no covariates".into()))?;
        let mut plain: Vec<(&str, Restriction)> = Vec::new();
        let mut ties: Vec<(&str, &str)> = Vec::new();
        let mut minus_inf = zero_state0;
        for (name, rule) in &m.restrictions {
            match rule.trim() {
                "-inf" => {
                    if *name != format!("s0.beta[{intercept}]") {
                        return Err(Error::Specification(format!("`-inf` is legal only for s0.beta[{intercept}]")));
                    }
                    minus_inf = true;
                }
                "free" => plain.push((name, Restriction::Free)),
                "zero" => plain.push((name, Restriction::Zero)),
                other => match other.strip_prefix("tie:") {
                    Some(parent) => ties.push((name, parent.trim())),
                    None => return Err(Error::Config(format!("unknown restriction `{other}` for `{name}`"))),
                },
            }
        }
        // the zero-only state rebuilds the slot table, so it goes first and
        // tie targets are resolved by name afterwards
        if minus_inf {
            spec.restrict(&format!("s0.beta[{intercept}]"), Restriction::MinusInfinity)?;
        }
        for (name, r) in plain {
            spec.restrict(name, r)?;
        }
        for (child, parent) in ties {
            let p = spec
                .slot_index(parent)
                .ok_or_else(|| Error::Specification(format!("unknown tie target `{parent}`")))?;
            spec.restrict(child, Restriction::TiedTo(p))?;
        }
        Ok(spec)
    }
}

pub fn parse_family(name: &str, outcomes: Option<usize>) -> Result<Family> {
    Ok(match name {
        "poisson" => Family::Poisson,
        "negbin" => Family::NegBin,
        "zip-tau" => Family::ZipTau,
        "zip-gamma" => Family::ZipGamma,
        "zinb-tau" => Family::ZinbTau,
        "zinb-gamma" => Family::ZinbGamma,
        "zero" => Family::ZeroOnly,
        "mnl" => match outcomes {
            Some(i) if i >= 2 => Family::Mnl { outcomes: i },
            _ => return Err(Error::Config("`mnl` needs `outcomes` ≥ 2".into())),
        },
        other => return Err(Error::Config(format!("unknown family `{other}`"))),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
