//! Observation likelihoods for every supported family and the parameter
//! layout of a (possibly switching) model.
//!
//! A model has one or two states. Each state is governed by a [`Family`] and
//! owns a block of parameter slots (coefficients, `ln α`, `τ`, `γ`). Slots are
//! either free, fixed at zero, or tied to a free slot; [`ModelSpec`] holds the
//! restriction table and maps the vector of free values back onto full
//! per-state [`StateParams`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_rising, log_add_exp, log_sum_exp, softplus, LOG_ZERO};

/// Below this value of `ln α` the negative binomial is evaluated as its
/// Poisson limit; `α` underflows past it.
const LN_ALPHA_POISSON_LIMIT: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Poisson,
    NegBin,
    ZipTau,
    ZipGamma,
    ZinbTau,
    ZinbGamma,
    /// Multinomial logit over `outcomes` severity levels; the last outcome is
    /// the reference with coefficients fixed to zero.
    Mnl { outcomes: usize },
    /// Point mass at zero counts.
    ZeroOnly,
}

impl Family {
    pub fn has_alpha(self) -> bool {
        matches!(self, Family::NegBin | Family::ZinbTau | Family::ZinbGamma)
    }

    pub fn has_tau(self) -> bool {
        matches!(self, Family::ZipTau | Family::ZinbTau)
    }

    pub fn has_gamma(self) -> bool {
        matches!(self, Family::ZipGamma | Family::ZinbGamma)
    }

    pub fn is_zero_inflated(self) -> bool {
        self.has_tau() || self.has_gamma()
    }

    pub fn is_count(self) -> bool {
        !matches!(self, Family::Mnl { .. })
    }

    /// Number of estimable outcome blocks of coefficients.
    fn beta_blocks(self) -> usize {
        match self {
            Family::Mnl { outcomes } => outcomes - 1,
            Family::ZeroOnly => 0,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::NegBin => "negbin",
            Family::ZipTau => "zip-tau",
            Family::ZipGamma => "zip-gamma",
            Family::ZinbTau => "zinb-tau",
            Family::ZinbGamma => "zinb-gamma",
            Family::Mnl { .. } => "mnl",
            Family::ZeroOnly => "zero",
        }
    }
}

/// Full parameter set of one state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateParams {
    /// Coefficients; for MNL, `outcomes` consecutive blocks of covariate
    /// length, the last block all zero.
    pub beta: Vec<f64>,
    pub ln_alpha: Option<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Restriction {
    Free,
    Zero,
    /// Only meaningful for the state-0 intercept; turns that state into
    /// [`Family::ZeroOnly`] and is never stored in a restriction table.
    MinusInfinity,
    /// Copies the value of the free slot with this index.
    TiedTo(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    /// Coefficient of covariate `cov` in outcome block `block`.
    Beta { block: usize, cov: usize },
    LnAlpha,
    Tau,
    Gamma { cov: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub state: usize,
    pub kind: SlotKind,
    pub name: String,
}

/// Observation value: a count for count families, a 1-based outcome index
/// for MNL.
pub type Obs = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    families: Vec<Family>,
    covariates: Vec<String>,
    slots: Vec<ParamSlot>,
    restrictions: Vec<Restriction>,
    free_slots: Vec<usize>,
    free_of_slot: Vec<Option<usize>>,
}

impl ModelSpec {
    /// A single-state model.
    pub fn single(family: Family, covariates: Vec<String>) -> Result<Self> {
        Self::new(vec![family], covariates)
    }

    /// A two-state Markov-switching model.
    pub fn switching(state0: Family, state1: Family, covariates: Vec<String>) -> Result<Self> {
        Self::new(vec![state0, state1], covariates)
    }

    fn new(families: Vec<Family>, covariates: Vec<String>) -> Result<Self> {
        if covariates.is_empty() {
            return Err(Error::Specification("at least the intercept covariate is required".into()));
        }
        for (state, family) in families.iter().enumerate() {
            if let Family::Mnl { outcomes } = family {
                if *outcomes < 2 {
                    return Err(Error::Specification("multinomial logit needs at least 2 outcomes".into()));
                }
            }
            if *family == Family::ZeroOnly && (state != 0 || families.len() != 2) {
                return Err(Error::Specification(
                    "the zero-only family is valid only for state 0 of a switching model".into(),
                ));
            }
        }
        if families.len() == 2 && families[0].is_count() != families[1].is_count() {
            return Err(Error::Specification("both states must model the same kind of observation".into()));
        }
        if let (Some(Family::Mnl { outcomes: a }), Some(Family::Mnl { outcomes: b })) =
            (families.first(), families.get(1))
        {
            if a != b {
                return Err(Error::Specification("both states must share the outcome count".into()));
            }
        }
        let slots = build_slots(&families, &covariates);
        let restrictions = vec![Restriction::Free; slots.len()];
        let mut spec = ModelSpec {
            families,
            covariates,
            slots,
            restrictions,
            free_slots: Vec::new(),
            free_of_slot: Vec::new(),
        };
        spec.reindex();
        Ok(spec)
    }

    /// Applies a restriction to the slot with the given name.
    pub fn restrict(&mut self, slot: &str, restriction: Restriction) -> Result<()> {
        let idx = self
            .slot_index(slot)
            .ok_or_else(|| Error::Specification(format!("unknown parameter `{slot}`")))?;
        match restriction {
            Restriction::MinusInfinity => {
                let s = &self.slots[idx];
                if s.state != 0 || s.kind != (SlotKind::Beta { block: 0, cov: 0 }) || self.families.len() != 2 {
                    return Err(Error::Specification(
                        "a minus-infinity restriction is legal only for the state-0 intercept".into(),
                    ));
                }
                self.make_state0_zero_only()
            }
            Restriction::TiedTo(parent) => {
                if parent >= self.slots.len() || parent == idx {
                    return Err(Error::Specification(format!("invalid tie target for `{slot}`")));
                }
                if self.restrictions[parent] != Restriction::Free {
                    return Err(Error::Specification(format!(
                        "`{slot}` is tied to `{}`, which is not free",
                        self.slots[parent].name
                    )));
                }
                self.check_not_a_parent(idx)?;
                self.restrictions[idx] = restriction;
                self.reindex();
                Ok(())
            }
            Restriction::Zero => {
                self.check_not_a_parent(idx)?;
                self.restrictions[idx] = restriction;
                self.reindex();
                Ok(())
            }
            Restriction::Free => {
                self.restrictions[idx] = restriction;
                self.reindex();
                Ok(())
            }
        }
    }

    fn check_not_a_parent(&self, idx: usize) -> Result<()> {
        if self.restrictions.contains(&Restriction::TiedTo(idx)) {
            return Err(Error::Specification(format!(
                "`{}` has parameters tied to it and must stay free",
                self.slots[idx].name
            )));
        }
        Ok(())
    }

    fn make_state0_zero_only(&mut self) -> Result<()> {
        let named: Vec<(String, Restriction)> = self
            .slots
            .iter()
            .zip(&self.restrictions)
            .filter(|(s, _)| s.state == 1)
            .map(|(s, r)| (s.name.clone(), *r))
            .collect();
        // Ties into state 0 would lose their parent.
        for (name, r) in &named {
            if let Restriction::TiedTo(p) = r {
                if self.slots[*p].state == 0 {
                    return Err(Error::Specification(format!(
                        "`{name}` is tied to a state-0 parameter that the zero-only state removes"
                    )));
                }
            }
        }
        let old_slots = self.slots.clone();
        self.families[0] = Family::ZeroOnly;
        self.slots = build_slots(&self.families, &self.covariates);
        self.restrictions = named
            .iter()
            .map(|(_, r)| match r {
                Restriction::TiedTo(p) => {
                    let parent_name = &old_slots[*p].name;
                    Restriction::TiedTo(self.slot_index(parent_name).expect("parent survives"))
                }
                other => *other,
            })
            .collect();
        self.reindex();
        Ok(())
    }

    fn reindex(&mut self) {
        self.free_slots = self
            .restrictions
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Restriction::Free)
            .map(|(i, _)| i)
            .collect();
        self.free_of_slot = vec![None; self.slots.len()];
        for (f, &s) in self.free_slots.iter().enumerate() {
            self.free_of_slot[s] = Some(f);
        }
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn family(&self, state: usize) -> Family {
        self.families[state]
    }

    pub fn state_count(&self) -> usize {
        self.families.len()
    }

    pub fn is_switching(&self) -> bool {
        self.families.len() == 2
    }

    pub fn is_count(&self) -> bool {
        self.families.iter().all(|f| f.is_count())
    }

    pub fn outcome_count(&self) -> Option<usize> {
        self.families.iter().find_map(|f| match f {
            Family::Mnl { outcomes } => Some(*outcomes),
            _ => None,
        })
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn covariate_count(&self) -> usize {
        self.covariates.len()
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn restrictions(&self) -> &[Restriction] {
        &self.restrictions
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    /// Slot indices of the free parameters, in free-vector order.
    pub fn free_slots(&self) -> &[usize] {
        &self.free_slots
    }

    pub fn free_count(&self) -> usize {
        self.free_slots.len()
    }

    pub fn free_names(&self) -> Vec<String> {
        self.free_slots.iter().map(|&s| self.slots[s].name.clone()).collect()
    }

    /// States whose parameters change when free parameter `k` changes
    /// (its own state plus the states of slots tied to it).
    pub fn states_touched_by(&self, k: usize) -> Vec<usize> {
        let slot = self.free_slots[k];
        let mut states = vec![self.slots[slot].state];
        for (i, r) in self.restrictions.iter().enumerate() {
            if *r == Restriction::TiedTo(slot) && !states.contains(&self.slots[i].state) {
                states.push(self.slots[i].state);
            }
        }
        states.sort_unstable();
        states
    }

    /// Expands a free-value vector into full slot values.
    pub fn slot_values(&self, free: &[f64]) -> Result<Vec<f64>> {
        if free.len() != self.free_slots.len() {
            return Err(Error::Dimension { expected: self.free_slots.len(), found: free.len() });
        }
        Ok(self
            .restrictions
            .iter()
            .enumerate()
            .map(|(i, r)| match r {
                Restriction::Free => free[self.free_of_slot[i].expect("free slot indexed")],
                Restriction::Zero => 0.0,
                Restriction::TiedTo(p) => free[self.free_of_slot[*p].expect("tie parent is free")],
                Restriction::MinusInfinity => unreachable!("never stored"),
            })
            .collect())
    }

    /// Expands the free vector into per-state parameter sets.
    pub fn assemble_params(&self, free: &[f64]) -> Result<Vec<StateParams>> {
        let values = self.slot_values(free)?;
        let k = self.covariates.len();
        let mut params: Vec<StateParams> = self
            .families
            .iter()
            .map(|f| StateParams {
                beta: match f {
                    Family::ZeroOnly => Vec::new(),
                    Family::Mnl { outcomes } => vec![0.0; outcomes * k],
                    _ => vec![0.0; k],
                },
                ln_alpha: f.has_alpha().then_some(0.0),
                tau: f.has_tau().then_some(0.0),
                gamma: f.has_gamma().then(|| vec![0.0; k]),
            })
            .collect();
        for (slot, v) in self.slots.iter().zip(values) {
            let p = &mut params[slot.state];
            match slot.kind {
                SlotKind::Beta { block, cov } => p.beta[block * k + cov] = v,
                SlotKind::LnAlpha => p.ln_alpha = Some(v),
                SlotKind::Tau => p.tau = Some(v),
                SlotKind::Gamma { cov } => p.gamma.as_mut().expect("gamma family")[cov] = v,
            }
        }
        Ok(params)
    }

    /// Packs full per-state parameters back into the free vector.
    pub fn pack_free(&self, params: &[StateParams]) -> Vec<f64> {
        let k = self.covariates.len();
        self.free_slots
            .iter()
            .map(|&s| {
                let slot = &self.slots[s];
                let p = &params[slot.state];
                match slot.kind {
                    SlotKind::Beta { block, cov } => p.beta[block * k + cov],
                    SlotKind::LnAlpha => p.ln_alpha.unwrap_or(0.0),
                    SlotKind::Tau => p.tau.unwrap_or(0.0),
                    SlotKind::Gamma { cov } => p.gamma.as_ref().map_or(0.0, |g| g[cov]),
                }
            })
            .collect()
    }
}

fn build_slots(families: &[Family], covariates: &[String]) -> Vec<ParamSlot> {
    let mut slots = Vec::new();
    for (state, family) in families.iter().enumerate() {
        let prefix = format!("s{state}");
        let blocks = family.beta_blocks();
        for block in 0..blocks {
            for (cov, cname) in covariates.iter().enumerate() {
                let name = if matches!(family, Family::Mnl { .. }) {
                    format!("{prefix}.beta[{}:{cname}]", block + 1)
                } else {
                    format!("{prefix}.beta[{cname}]")
                };
                slots.push(ParamSlot { state, kind: SlotKind::Beta { block, cov }, name });
            }
        }
        if family.has_alpha() {
            slots.push(ParamSlot { state, kind: SlotKind::LnAlpha, name: format!("{prefix}.ln_alpha") });
        }
        if family.has_tau() {
            slots.push(ParamSlot { state, kind: SlotKind::Tau, name: format!("{prefix}.tau") });
        }
        if family.has_gamma() {
            for (cov, cname) in covariates.iter().enumerate() {
                slots.push(ParamSlot {
                    state,
                    kind: SlotKind::Gamma { cov },
                    name: format!("{prefix}.gamma[{cname}]"),
                });
            }
        }
    }
    slots
}

/// `ln(1 + e^z)`; uses `ln` directly where `e^z` is not small, which is
/// several times cheaper than `ln_1p` and accurate to ~1e-12 relative there.
#[inline]
fn ln_one_plus_exp(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else if z > -10.0 {
        (1.0 + z.exp()).ln()
    } else {
        softplus(z)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `exp(β′x)`.
pub fn rate(beta: &[f64], x: &[f64]) -> Result<f64> {
    if beta.len() != x.len() {
        return Err(Error::Dimension { expected: beta.len(), found: x.len() });
    }
    Ok(dot(beta, x).exp())
}

pub fn log_poisson(lambda: f64, a: Obs) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("Poisson rate must be positive and finite, got {lambda}")));
    }
    Ok(a as f64 * lambda.ln() - lambda - ln_factorial(a as u64))
}

pub fn log_negbin(lambda: f64, ln_alpha: f64, a: Obs) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() || !ln_alpha.is_finite() {
        return Err(Error::Domain(format!(
            "negative binomial needs finite positive rate and finite ln(alpha), got ({lambda}, {ln_alpha})"
        )));
    }
    Ok(negbin_kernel(lambda.ln(), ln_alpha, a))
}

fn negbin_kernel(eta: f64, ln_alpha: f64, a: Obs) -> f64 {
    if ln_alpha < LN_ALPHA_POISSON_LIMIT {
        return a as f64 * eta - eta.exp() - ln_factorial(a as u64);
    }
    let r = (-ln_alpha).exp();
    let a_f = a as f64;
    // ln(αλ) and ln(1 + αλ)
    let ln_al = ln_alpha + eta;
    ln_rising(r, a as u64) - ln_factorial(a as u64) + a_f * ln_al - (a_f + r) * softplus(ln_al)
}

/// Log-probability under one of the four zero-inflated families.
pub fn log_zero_inflated(family: Family, params: &StateParams, x: &[f64], a: Obs) -> Result<f64> {
    if !family.is_zero_inflated() {
        return Err(Error::Specification(format!("{} is not a zero-inflated family", family.name())));
    }
    let lambda = rate(&params.beta, x)?;
    let eta = lambda.ln();
    let base = if family.has_alpha() {
        let ln_alpha = params
            .ln_alpha
            .ok_or_else(|| Error::Specification("missing ln(alpha)".into()))?;
        log_negbin(lambda, ln_alpha, a)?
    } else {
        log_poisson(lambda, a)?
    };
    let z = if family.has_tau() {
        params.tau.ok_or_else(|| Error::Specification("missing tau".into()))? * eta
    } else {
        let gamma = params.gamma.as_ref().ok_or_else(|| Error::Specification("missing gamma".into()))?;
        if gamma.len() != x.len() {
            return Err(Error::Dimension { expected: gamma.len(), found: x.len() });
        }
        dot(gamma, x)
    };
    Ok(zero_inflate(z, base, a))
}

// ln[q·I(a) + (1 − q)·base] with q = logistic(z).
fn zero_inflate(z: f64, base: f64, a: Obs) -> f64 {
    let ln_one_minus_q = -softplus(z);
    if a == 0 {
        let ln_q = -softplus(-z);
        log_add_exp(ln_q, ln_one_minus_q + base)
    } else {
        ln_one_minus_q + base
    }
}

/// Log-probability of outcome `i` (1-based) under the multinomial logit.
pub fn log_mnl(params: &StateParams, x: &[f64], i: Obs) -> Result<f64> {
    let k = x.len();
    if k == 0 || !params.beta.len().is_multiple_of(k) {
        return Err(Error::Dimension { expected: k, found: params.beta.len() });
    }
    let outcomes = params.beta.len() / k;
    if i == 0 || i as usize > outcomes {
        return Err(Error::OutcomeOutOfRange { outcome: i, count: outcomes });
    }
    let utilities: Vec<f64> = params.beta.chunks(k).map(|b| dot(b, x)).collect();
    Ok(utilities[i as usize - 1] - log_sum_exp(&utilities))
}

/// Log-likelihood of a single observation in the given state.
pub fn log_obs_likelihood(spec: &ModelSpec, state: usize, params: &StateParams, x: &[f64], y: Obs) -> Result<f64> {
    let family = *spec
        .families
        .get(state)
        .ok_or_else(|| Error::Specification(format!("state {state} does not exist")))?;
    match family {
        Family::ZeroOnly => Ok(if y == 0 { 0.0 } else { LOG_ZERO }),
        Family::Poisson => log_poisson(rate(&params.beta, x)?, y),
        Family::NegBin => {
            let ln_alpha = params.ln_alpha.ok_or_else(|| Error::Specification("missing ln(alpha)".into()))?;
            log_negbin(rate(&params.beta, x)?, ln_alpha, y)
        }
        Family::Mnl { .. } => log_mnl(params, x, y),
        zi => log_zero_inflated(zi, params, x, y),
    }
}

/// Per-state likelihood evaluator with the parameter-only work hoisted out
/// of the per-observation loop. Inputs are assumed validated.
#[derive(Debug, Clone)]
pub struct StateKernel {
    family: Family,
    beta: Vec<f64>,
    ln_alpha: f64,
    tau: f64,
    gamma: Vec<f64>,
    /// Count-dependent constant: `ln Γ(a+r) − ln Γ(r) − ln a!` (NB) or
    /// `−ln a!` (Poisson), indexed by count.
    count_const: Vec<f64>,
    /// `1/α` when the NB form is active.
    r: f64,
    nb: bool,
    covariates: usize,
}

impl StateKernel {
    pub fn new(family: Family, params: &StateParams, max_count: Obs) -> Self {
        let ln_alpha = params.ln_alpha.unwrap_or(f64::NEG_INFINITY);
        let nb = family.has_alpha() && ln_alpha >= LN_ALPHA_POISSON_LIMIT;
        let count_const = if family.is_count() && family != Family::ZeroOnly {
            let r = (-ln_alpha).exp();
            (0..=max_count as u64)
                .map(|a| if nb { ln_rising(r, a) - ln_factorial(a) } else { -ln_factorial(a) })
                .collect()
        } else {
            Vec::new()
        };
        let covariates = match family {
            Family::Mnl { outcomes } => params.beta.len() / outcomes,
            _ => params.beta.len(),
        };
        StateKernel {
            family,
            beta: params.beta.clone(),
            ln_alpha,
            tau: params.tau.unwrap_or(0.0),
            gamma: params.gamma.clone().unwrap_or_default(),
            count_const,
            r: (-ln_alpha).exp(),
            nb,
            covariates,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    #[inline]
    fn count_constant(&self, a: Obs) -> f64 {
        match self.count_const.get(a as usize) {
            Some(c) => *c,
            None => {
                if self.nb {
                    ln_rising(self.r, a as u64) - ln_factorial(a as u64)
                } else {
                    -ln_factorial(a as u64)
                }
            }
        }
    }

    #[inline]
    fn base_count(&self, eta: f64, a: Obs) -> f64 {
        let c = self.count_constant(a);
        if self.nb {
            let ln_al = self.ln_alpha + eta;
            c + a as f64 * ln_al - (a as f64 + self.r) * ln_one_plus_exp(ln_al)
        } else {
            c + a as f64 * eta - eta.exp()
        }
    }

    /// Whether the likelihood depends on `x` only through `η = x·β`
    /// (Poisson and NB), so callers may cache `η` per observation.
    pub fn is_linear_index(&self) -> bool {
        matches!(self.family, Family::Poisson | Family::NegBin)
    }

    /// `ln f(y | η)` for Poisson/NB kernels given the precomputed index.
    #[inline]
    pub fn log_lik_eta(&self, eta: f64, y: Obs) -> f64 {
        debug_assert!(self.is_linear_index());
        self.base_count(eta, y)
    }

    /// `ln f(y | x)` for this state.
    #[inline]
    pub fn log_lik(&self, x: &[f64], y: Obs) -> f64 {
        match self.family {
            Family::ZeroOnly => {
                if y == 0 {
                    0.0
                } else {
                    LOG_ZERO
                }
            }
            Family::Poisson | Family::NegBin => self.base_count(dot(&self.beta, x), y),
            Family::Mnl { .. } => {
                let k = self.covariates;
                let mut max = f64::NEG_INFINITY;
                let mut chosen = 0.0;
                let mut utilities = [0.0f64; 16];
                let mut heap;
                let u: &mut [f64] = if self.beta.len() / k <= 16 {
                    &mut utilities[..self.beta.len() / k]
                } else {
                    heap = vec![0.0; self.beta.len() / k];
                    &mut heap
                };
                for (j, b) in self.beta.chunks(k).enumerate() {
                    let v = dot(b, x);
                    u[j] = v;
                    max = max.max(v);
                    if j + 1 == y as usize {
                        chosen = v;
                    }
                }
                let s: f64 = u.iter().map(|v| (v - max).exp()).sum();
                chosen - max - s.ln()
            }
            zi => {
                let eta = dot(&self.beta, x);
                let base = self.base_count(eta, y);
                let z = if zi.has_tau() { self.tau * eta } else { dot(&self.gamma, x) };
                zero_inflate(z, base, y)
            }
        }
    }

    /// State mean `λ` and NB over-dispersion `α` (zero for Poisson forms).
    pub fn mean_and_alpha(&self, x: &[f64]) -> (f64, f64) {
        match self.family {
            Family::ZeroOnly => (0.0, 0.0),
            f => {
                let alpha = if f.has_alpha() { self.ln_alpha.exp() } else { 0.0 };
                (dot(&self.beta, x).exp(), alpha)
            }
        }
    }

    /// Outcome probabilities of the multinomial logit.
    pub fn outcome_probs(&self, x: &[f64]) -> Vec<f64> {
        let k = self.covariates;
        let u: Vec<f64> = self.beta.chunks(k).map(|b| dot(b, x)).collect();
        let lse = log_sum_exp(&u);
        u.iter().map(|v| (v - lse).exp()).collect()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Replaces the regression coefficients; count constants are untouched.
    pub(crate) fn set_beta(&mut self, beta: &[f64]) {
        self.beta.copy_from_slice(beta);
    }

    pub fn ln_alpha(&self) -> f64 {
        self.ln_alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
}
