//! Hybrid Gibbs sampler.
//!
//! One sweep updates (a) the free coefficients of state 0 and (b) those of
//! state 1 by random-walk Metropolis, (c) the transition probabilities by
//! exact truncated-Beta draws, and (d) the state vector in consecutive
//! blocks drawn exactly by enumeration. Proposal scales are tuned during
//! burn-in and frozen afterwards.

mod cache;
pub mod states;
pub mod tbeta;
pub mod tuning;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Panel;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::priors::{log_prior, PriorSpec};
use crate::switching::{count_raw, StateVector, SwitchingLayout, TransitionProbs};

use cache::LikCache;
pub use states::{sample_state_block, LnTransitions, MAX_BLOCK};
pub use tbeta::{sample_truncated_beta, Bound, TruncatedBeta};
pub use tuning::{fit_exponential_scale, ProposalScales, ProposalShape, Tuner, WindowRecord};

/// Attempts at drawing a starting point with a finite posterior.
const INIT_RETRIES: usize = 100;
/// Sweeps between full recomputations of the likelihood cache.
const CACHE_REBUILD_EVERY: usize = 256;

/// A point of the parameter space. Single-state models carry an all-zero
/// state vector and empty transition vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    pub free: Vec<f64>,
    pub trans: TransitionProbs,
    pub s: StateVector,
}

impl ParamPoint {
    /// State index governing auxiliary period `t` (0-based).
    #[inline]
    pub fn state_at(&self, t: usize, spec: &ModelSpec) -> usize {
        if spec.is_switching() {
            self.s.0[t] as usize
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Total sweeps `G`, burn-in included.
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub tau_block: usize,
    pub n_chains: usize,
    pub target_accept: f64,
    pub tune_window: usize,
    pub tune_factor: f64,
    pub seed: u64,
    pub proposal: ProposalShape,
    /// Verify the likelihood cache against full recomputation after every
    /// accepted move (slow; for testing).
    pub shadow: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            draws: 20_000,
            burn_in: 5_000,
            thin: 3,
            tau_block: 10,
            n_chains: 8,
            target_accept: 0.3,
            tune_window: 50,
            tune_factor: 1.25,
            seed: 1,
            proposal: ProposalShape::Normal,
            shadow: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.burn_in >= self.draws {
            return fail("burn-in must be shorter than the total number of draws");
        }
        if self.thin == 0 {
            return fail("thinning stride must be at least 1");
        }
        if self.tau_block == 0 || self.tau_block > MAX_BLOCK {
            return fail("state block length must be between 1 and 20");
        }
        if self.n_chains == 0 {
            return fail("at least one chain is required");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return fail("target acceptance must lie in (0, 1)");
        }
        if self.tune_window == 0 || !(self.tune_factor > 1.0) {
            return fail("tuning window must be positive and tuning factor above 1");
        }
        Ok(())
    }

    /// Number of stored draws per chain.
    pub fn stored_draws(&self) -> usize {
        (self.draws - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub chain: usize,
    pub names: Vec<String>,
    pub draws: Vec<ParamPoint>,
    pub loglik: Vec<f64>,
    pub logjoint: Vec<f64>,
    /// Post-burn-in acceptance rate per free coefficient.
    pub accept_rates: Vec<f64>,
    pub scales: ProposalScales,
    /// Coefficients whose final scale could not be fitted and kept the last
    /// tuned value.
    pub unfitted_scales: Vec<usize>,
}

/// Progress callback: `(chain, sweep, log-joint)`.
pub type Progress = dyn Fn(usize, usize, f64) + Sync;

/// Random-walk increment from the jumping law.
fn jump<R: Rng + ?Sized>(sigma: f64, shape: ProposalShape, rng: &mut R) -> f64 {
    match shape {
        ProposalShape::Normal => sigma * rng.sample::<f64, _>(StandardNormal),
        ProposalShape::Cauchy => Cauchy::new(0.0, sigma).expect("positive scale").sample(rng),
    }
}

/// Metropolis acceptance for a log-ratio `diff`; non-finite ratios reject.
#[inline]
fn accept_move<R: Rng + ?Sized>(diff: f64, rng: &mut R) -> bool {
    if diff.is_nan() || diff == f64::NEG_INFINITY {
        return false;
    }
    diff >= 0.0 || rng.random::<f64>().ln() < diff
}

/// One random-walk Metropolis step on a scalar with log-target
/// `log_target`. Returns the new value, its log-target and whether the
/// proposal was accepted.
pub fn metropolis_step<R: Rng + ?Sized>(
    current: f64,
    current_lp: f64,
    sigma: f64,
    shape: ProposalShape,
    mut log_target: impl FnMut(f64) -> f64,
    rng: &mut R,
) -> (f64, f64, bool) {
    let proposal = current + jump(sigma, shape, rng);
    let lp = log_target(proposal);
    if accept_move(lp - current_lp, rng) {
        (proposal, lp, true)
    } else {
        (current, current_lp, false)
    }
}

/// Starting scales `max(0.1·|μ|, √Σ/10, 10⁻³)`.
pub fn initial_scales(prior: &PriorSpec, shape: ProposalShape) -> ProposalScales {
    let sigma = prior
        .coef
        .mu
        .iter()
        .zip(&prior.coef.sigma2)
        .map(|(m, v)| (0.1 * m.abs()).max(v.sqrt() / 10.0).max(1e-3))
        .collect();
    ProposalScales { sigma, shape }
}

fn empty_trans() -> TransitionProbs {
    TransitionProbs { p01: Vec::new(), p10: Vec::new() }
}

/// Draws an over-dispersed starting point with finite posterior density.
pub fn init_theta<R: Rng + ?Sized>(
    panel: &Panel,
    spec: &ModelSpec,
    layout: &SwitchingLayout,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<ParamPoint> {
    prior.validate(spec)?;
    if layout.t_tilde() != panel.periods() {
        return Err(Error::Dimension { expected: layout.t_tilde(), found: panel.periods() });
    }
    let t_tilde = layout.t_tilde();
    for _ in 0..INIT_RETRIES {
        let free: Vec<f64> = prior
            .coef
            .mu
            .iter()
            .zip(&prior.coef.sigma2)
            .map(|(m, v)| {
                let z: f64 = rng.sample::<f64, _>(StandardNormal).clamp(-2.0, 2.0);
                m + 2.0 * v.sqrt() * z
            })
            .collect();
        let cache = LikCache::new(panel, spec, &free)?;
        let (trans, s) = if spec.is_switching() {
            let r = layout.free_interval_count();
            let mut p01 = Vec::with_capacity(r);
            let mut p10 = Vec::with_capacity(r);
            for _ in 0..r {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                let (a, b) = if layout.restrict_p01_le_p10() { (a.min(b), a.max(b)) } else { (a, b) };
                p01.push(a);
                p10.push(b);
            }
            let s: Vec<u8> = (0..t_tilde)
                .map(|t| {
                    let coin: u8 = rng.random_range(0..2);
                    let (l0, l1) = (cache.ll(0)[t], cache.ll(1)[t]);
                    if l0 == f64::NEG_INFINITY && l1 > f64::NEG_INFINITY {
                        1
                    } else if l1 == f64::NEG_INFINITY && l0 > f64::NEG_INFINITY {
                        0
                    } else {
                        coin
                    }
                })
                .collect();
            (TransitionProbs { p01, p10 }, s)
        } else {
            (empty_trans(), vec![0; t_tilde])
        };
        let theta = ParamPoint { free, trans, s: StateVector(s) };
        let lp = log_prior(&theta, spec, layout, prior)?;
        let ll = cache.total(theta.s.as_slice(), !spec.is_switching());
        if (lp + ll).is_finite() {
            return Ok(theta);
        }
    }
    Err(Error::Initialization(format!("no finite starting point after {INIT_RETRIES} attempts")))
}

/// Conjugate draws of every free interval's `(p01, p10)`: `p01` first,
/// truncated above by the current `p10` when the label restriction is
/// active, then `p10` truncated below by the new `p01`.
pub fn gibbs_update_transitions<R: Rng + ?Sized>(
    theta: &mut ParamPoint,
    layout: &SwitchingLayout,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<()> {
    let counts = count_raw(theta.s.as_slice(), layout);
    let t = &prior.trans;
    let restricted = layout.restrict_p01_le_p10();
    for (r, m) in counts.per_interval.iter().enumerate() {
        let a01 = m.m01 as f64 + t.upsilon0;
        let b01 = m.m00 as f64 + t.nu0;
        let bound = if restricted { Bound::Upper(theta.trans.p10[r]) } else { Bound::None };
        let p01 = TruncatedBeta::new(a01, b01, bound)?.sample(rng);
        theta.trans.p01[r] = p01;
        let a10 = m.m10 as f64 + t.upsilon1;
        let b10 = m.m11 as f64 + t.nu1;
        let bound = if restricted { Bound::Lower(p01) } else { Bound::None };
        theta.trans.p10[r] = TruncatedBeta::new(a10, b10, bound)?.sample(rng);
    }
    Ok(())
}

/// Chain-local generator: stream `chain` of the master seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn abort(chain: usize, draw: usize, message: String) -> Error {
    Error::ChainAborted { chain, draw, message }
}

/// Runs one chain.
pub fn run_chain(
    panel: &Panel,
    spec: &ModelSpec,
    layout: &SwitchingLayout,
    prior: &PriorSpec,
    config: &SamplerConfig,
    chain: usize,
    progress: Option<&Progress>,
) -> Result<ChainResult> {
    config.validate()?;
    prior.validate(spec)?;
    let mut rng = chain_rng(config.seed, chain);
    let mut theta = init_theta(panel, spec, layout, prior, &mut rng)?;
    let switching = spec.is_switching();
    let single = !switching;
    let n_free = spec.free_count();
    let t_tilde = layout.t_tilde();

    // (a) state-0 coefficients, then (b) state-1 coefficients
    let mut order: Vec<usize> = (0..n_free).collect();
    order.sort_by_key(|&k| spec.slots()[spec.free_slots()[k]].state);

    let mut scales = initial_scales(prior, config.proposal);
    let mut tuner = Tuner::new(n_free, config.tune_window, config.tune_factor, config.target_accept);
    let mut unfitted = Vec::new();
    let mut cache = LikCache::new(panel, spec, &theta.free)?;
    let mut accepted = vec![0usize; n_free];
    let mut proposed = vec![0usize; n_free];
    let mut scores = Vec::with_capacity(1 << config.tau_block);

    let stored = config.stored_draws();
    let mut draws = Vec::with_capacity(stored);
    let mut loglik = Vec::with_capacity(stored);
    let mut logjoint = Vec::with_capacity(stored);

    for g in 0..config.draws {
        for &k in &order {
            let old = theta.free[k];
            let new = old + jump(scales.sigma[k], scales.shape, &mut rng);
            theta.free[k] = new;
            let params = spec.assemble_params(&theta.free)?;
            let delta_ll = cache.propose(panel, k, new - old, &params, theta.s.as_slice(), single);
            let diff = delta_ll + prior.coef.ln_density(k, new) - prior.coef.ln_density(k, old);
            let ok = accept_move(diff, &mut rng);
            if ok {
                cache.accept(panel, theta.s.as_slice(), single);
                if config.shadow {
                    cache
                        .verify(panel, spec, &theta.free, theta.s.as_slice())
                        .map_err(|e| abort(chain, g + 1, e.to_string()))?;
                }
            } else {
                theta.free[k] = old;
                cache.reject();
            }
            if g < config.burn_in {
                tuner.record(k, ok);
            } else {
                proposed[k] += 1;
                accepted[k] += ok as usize;
            }
        }

        if switching {
            gibbs_update_transitions(&mut theta, layout, prior, &mut rng)?;
            cache.refresh(panel, theta.s.as_slice());
            if config.shadow {
                cache
                    .verify(panel, spec, &theta.free, theta.s.as_slice())
                    .map_err(|e| abort(chain, g + 1, e.to_string()))?;
            }
            let trans = LnTransitions::new(&theta.trans);
            let mut start = 0;
            while start < t_tilde {
                let len = config.tau_block.min(t_tilde - start);
                sample_state_block(
                    start,
                    len,
                    &mut theta.s.0,
                    cache.ll(0),
                    cache.ll(1),
                    layout,
                    &trans,
                    &mut scores,
                    &mut rng,
                )
                .map_err(|e| abort(chain, g + 1, e.to_string()))?;
                start += len;
            }
        }

        if g < config.burn_in {
            tuner.end_sweep(g, &mut scales);
            if g + 1 == config.burn_in {
                unfitted = tuner.finish(config.burn_in, &mut scales);
            }
        }
        if (g + 1) % CACHE_REBUILD_EVERY == 0 {
            cache.rebuild(panel, &spec.assemble_params(&theta.free)?);
        }

        let keep = g >= config.burn_in && (g + 1 - config.burn_in).is_multiple_of(config.thin);
        if keep || progress.is_some() {
            let ll = cache.total(theta.s.as_slice(), single);
            let lj = ll + log_prior(&theta, spec, layout, prior)?;
            if !lj.is_finite() {
                return Err(abort(
                    chain,
                    g + 1,
                    format!(
                        "non-finite log-joint {lj} (log-likelihood {ll}); free = {:?}, p01 = {:?}, p10 = {:?}",
                        theta.free, theta.trans.p01, theta.trans.p10
                    ),
                ));
            }
            if keep {
                draws.push(theta.clone());
                loglik.push(ll);
                logjoint.push(lj);
            }
            if let Some(cb) = progress {
                cb(chain, g + 1, lj);
            }
        }
    }

    let accept_rates =
        accepted.iter().zip(&proposed).map(|(&a, &p)| if p > 0 { a as f64 / p as f64 } else { 0.0 }).collect();
    Ok(ChainResult {
        chain,
        names: spec.free_names(),
        draws,
        loglik,
        logjoint,
        accept_rates,
        scales,
        unfitted_scales: unfitted,
    })
}

/// Worker threads for chain-level parallelism: `RSWITCH_THREADS` when set,
/// otherwise the available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("RSWITCH_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `config.n_chains` independent chains, possibly concurrently.
/// Results are ordered by chain index; a failing chain does not stop the
/// others.
pub fn run_chains(
    panel: &Panel,
    spec: &ModelSpec,
    layout: &SwitchingLayout,
    prior: &PriorSpec,
    config: &SamplerConfig,
    progress: Option<&Progress>,
) -> Result<Vec<Result<ChainResult>>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads().min(config.n_chains))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        (0..config.n_chains)
            .into_par_iter()
            .map(|c| run_chain(panel, spec, layout, prior, config, c, progress))
            .collect()
    }))
}
