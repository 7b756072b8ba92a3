//! Per-period log-likelihood totals `L_j(t) = Σ_rows ln f(y | state j)`.
//!
//! A coefficient update of state `j` only needs `L_j` on the periods
//! currently in state `j`; those entries are kept exact at all times. The
//! other periods of `j` are marked stale and recomputed once before the
//! state vector is redrawn. For Poisson and NB states the linear index
//! `x·β` is cached per row, so a move of one regression coefficient costs a
//! multiply-add plus the density per row.

use crate::data::Panel;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Restriction, SlotKind, StateKernel, StateParams};

/// How free parameter `k` enters state `j`.
#[derive(Debug, Clone, Default)]
struct Effect {
    /// Covariates whose first-block coefficient equals the free value.
    beta_covs: Vec<usize>,
    /// The free value enters the state other than via a cached index.
    other: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct LikCache {
    kernels: Vec<StateKernel>,
    ll: Vec<Vec<f64>>,
    eta: Vec<Option<Vec<f64>>>,
    stale: Vec<bool>,
    /// `effects[k][j]`; `None` when free parameter `k` does not touch state `j`.
    effects: Vec<Vec<Option<Effect>>>,
    scratch_ll: Vec<Vec<f64>>,
    scratch_eta: Vec<Option<Vec<f64>>>,
    scratch_kernels: Vec<Option<StateKernel>>,
}

impl LikCache {
    pub(crate) fn new(panel: &Panel, spec: &ModelSpec, free: &[f64]) -> Result<Self> {
        let params = spec.assemble_params(free)?;
        let states = spec.state_count();
        let kernels: Vec<StateKernel> =
            (0..states).map(|j| StateKernel::new(spec.family(j), &params[j], panel.max_y())).collect();
        let effects = (0..spec.free_count())
            .map(|k| {
                let parent = spec.free_slots()[k];
                let mut per_state: Vec<Option<Effect>> = vec![None; states];
                for (slot, r) in spec.restrictions().iter().enumerate() {
                    let linked = slot == parent || *r == Restriction::TiedTo(parent);
                    if !linked {
                        continue;
                    }
                    let info = &spec.slots()[slot];
                    let e = per_state[info.state].get_or_insert_with(Effect::default);
                    match info.kind {
                        SlotKind::Beta { block: 0, cov } if kernels[info.state].is_linear_index() => {
                            e.beta_covs.push(cov)
                        }
                        _ => e.other = true,
                    }
                }
                per_state
            })
            .collect();
        let periods = panel.periods();
        let mut cache = LikCache {
            kernels,
            ll: vec![vec![0.0; periods]; states],
            eta: vec![None; states],
            stale: vec![false; states],
            effects,
            scratch_ll: vec![vec![0.0; periods]; states],
            scratch_eta: vec![None; states],
            scratch_kernels: vec![None; states],
        };
        cache.rebuild(panel, &params);
        cache.scratch_eta = cache.eta.clone();
        Ok(cache)
    }

    /// Recomputes everything from the current kernels.
    pub(crate) fn rebuild(&mut self, panel: &Panel, params: &[StateParams]) {
        for j in 0..self.kernels.len() {
            self.kernels[j] = StateKernel::new(self.kernels[j].family(), &params[j], panel.max_y());
            self.eta[j] = self.kernels[j].is_linear_index().then(|| {
                let beta = self.kernels[j].beta();
                (0..panel.len()).map(|row| dot(beta, panel.x(row))).collect()
            });
            for t in 0..panel.periods() {
                self.ll[j][t] = period_ll(&self.kernels[j], self.eta[j].as_deref(), panel, t);
            }
            self.stale[j] = false;
        }
    }

    #[inline]
    pub(crate) fn ll(&self, state: usize) -> &[f64] {
        &self.ll[state]
    }

    /// `Σ_t L_{s_t}(t)`.
    pub(crate) fn total(&self, s: &[u8], single: bool) -> f64 {
        if single {
            return self.ll[0].iter().sum();
        }
        s.iter().enumerate().map(|(t, &st)| self.ll[st as usize][t]).sum()
    }

    /// Evaluates free parameter `k` moving by `delta` (new parameters
    /// `params`) on the periods in each touched state. Returns the change in
    /// the state-restricted log-likelihood; results wait in scratch space
    /// until [`LikCache::accept`].
    pub(crate) fn propose(
        &mut self,
        panel: &Panel,
        k: usize,
        delta: f64,
        params: &[StateParams],
        s: &[u8],
        single: bool,
    ) -> f64 {
        let mut change = 0.0;
        for j in 0..self.kernels.len() {
            let Some(effect) = &self.effects[k][j] else {
                self.scratch_kernels[j] = None;
                continue;
            };
            let kernel = if effect.other {
                StateKernel::new(self.kernels[j].family(), &params[j], panel.max_y())
            } else {
                // only cached-index coefficients moved; constants unchanged
                let mut kern = self.kernels[j].clone();
                kern.set_beta(&params[j].beta);
                kern
            };
            for t in 0..panel.periods() {
                if !single && s[t] as usize != j {
                    continue;
                }
                let rows = panel.rows(t);
                let new = match (&self.eta[j], &mut self.scratch_eta[j]) {
                    (Some(eta), Some(scratch)) => {
                        let (eta, scratch, ys) = (&eta[rows.clone()], &mut scratch[rows.clone()], &panel.ys()[rows.clone()]);
                        scratch.copy_from_slice(eta);
                        for &c in &effect.beta_covs {
                            for (e, x) in scratch.iter_mut().zip(&panel.column(c)[rows.clone()]) {
                                *e += delta * x;
                            }
                        }
                        scratch.iter().zip(ys).map(|(&e, &y)| kernel.log_lik_eta(e, y)).sum()
                    }
                    _ => rows.map(|row| kernel.log_lik(panel.x(row), panel.y(row))).sum(),
                };
                self.scratch_ll[j][t] = new;
                change += new - self.ll[j][t];
                if change.is_nan() || change == f64::NEG_INFINITY {
                    self.scratch_kernels[j] = Some(kernel);
                    return f64::NEG_INFINITY;
                }
            }
            self.scratch_kernels[j] = Some(kernel);
        }
        change
    }

    /// Commits the last proposal.
    pub(crate) fn accept(&mut self, panel: &Panel, s: &[u8], single: bool) {
        for j in 0..self.kernels.len() {
            let Some(kernel) = self.scratch_kernels[j].take() else { continue };
            let mut any_out = false;
            for t in 0..panel.periods() {
                if !single && s[t] as usize != j {
                    any_out = true;
                    continue;
                }
                self.ll[j][t] = self.scratch_ll[j][t];
                if let (Some(eta), Some(scratch)) = (&mut self.eta[j], &self.scratch_eta[j]) {
                    let rows = panel.rows(t);
                    eta[rows.clone()].copy_from_slice(&scratch[rows]);
                }
            }
            self.kernels[j] = kernel;
            self.stale[j] |= any_out;
        }
    }

    pub(crate) fn reject(&mut self) {
        for k in &mut self.scratch_kernels {
            *k = None;
        }
    }

    /// Brings out-of-state periods of stale states up to date.
    pub(crate) fn refresh(&mut self, panel: &Panel, s: &[u8]) {
        for j in 0..self.kernels.len() {
            if !self.stale[j] {
                continue;
            }
            let kernel = &self.kernels[j];
            for t in 0..panel.periods() {
                if s[t] as usize == j {
                    continue;
                }
                if let Some(eta) = &mut self.eta[j] {
                    for row in panel.rows(t) {
                        eta[row] = dot(kernel.beta(), panel.x(row));
                    }
                }
                self.ll[j][t] = period_ll(kernel, self.eta[j].as_deref(), panel, t);
            }
            self.stale[j] = false;
        }
    }

    /// Compares the cache with a from-scratch recomputation: in-state
    /// entries always, all entries for non-stale states.
    pub(crate) fn verify(&self, panel: &Panel, spec: &ModelSpec, free: &[f64], s: &[u8]) -> Result<()> {
        let params = spec.assemble_params(free)?;
        let single = !spec.is_switching();
        for j in 0..self.kernels.len() {
            let kernel = StateKernel::new(spec.family(j), &params[j], panel.max_y());
            for t in 0..panel.periods() {
                let in_state = single || s[t] as usize == j;
                if !in_state && self.stale[j] {
                    continue;
                }
                let fresh: f64 = panel.rows(t).map(|row| kernel.log_lik(panel.x(row), panel.y(row))).sum();
                let cached = self.ll[j][t];
                let ok = (fresh == cached) || (fresh - cached).abs() <= 1e-8 * fresh.abs().max(1.0);
                if !ok {
                    return Err(Error::Domain(format!(
                        "likelihood cache drift: state {j}, period {}: cached {cached}, fresh {fresh}",
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

fn period_ll(kernel: &StateKernel, eta: Option<&[f64]>, panel: &Panel, t: usize) -> f64 {
    match eta {
        Some(eta) => panel.rows(t).map(|row| kernel.log_lik_eta(eta[row], panel.y(row))).sum(),
        None => panel.rows(t).map(|row| kernel.log_lik(panel.x(row), panel.y(row))).sum(),
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
