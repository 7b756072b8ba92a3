//! Auxiliary-time representation of the two-state switching process.
//!
//! Observations indexed by `(t, n)` are re-indexed onto a single auxiliary
//! axis `t̃ = 1..=T̃`, so that one latent state governs each auxiliary period.
//! The axis is cut into intervals of constant transition probabilities;
//! intervals may be tied to an earlier interval, in which case they share its
//! `(p01, p10)` pair. Indices listed in the independence set 𝒯₋ have a
//! successor whose state does not depend on them, so the transition out of
//! them is never counted.
//!
//! Auxiliary and real indices in the public API are 1-based.

use crate::data::{Dataset, Panel};
use crate::error::{Error, Result};
use crate::special::LOG_ZERO;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMap {
    /// Annual layout: `t̃ = (n − 1)·T + t`, one observation per auxiliary period.
    SegmentMajor { periods: usize, segments: usize },
    /// `t̃ = t`, `ñ = n`.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingLayout {
    t_tilde: usize,
    obs_counts: Vec<usize>,
    /// `t_minus[i]` is true when auxiliary index `i + 1` belongs to 𝒯₋.
    t_minus: Vec<bool>,
    bounds: Vec<usize>,
    tie: Vec<usize>,
    restricted: bool,
    time_map: TimeMap,
    interval_of: Vec<usize>,
    free_intervals: Vec<usize>,
    free_of_interval: Vec<usize>,
}

impl SwitchingLayout {
    fn assemble(
        obs_counts: Vec<usize>,
        t_minus_set: &[usize],
        bounds: Vec<usize>,
        tie: Vec<usize>,
        restricted: bool,
        time_map: TimeMap,
    ) -> Result<Self> {
        let t_tilde = obs_counts.len();
        if t_tilde == 0 {
            return Err(Error::Specification("layout needs at least one auxiliary period".into()));
        }
        if bounds.len() < 2 || bounds[0] != 1 || *bounds.last().unwrap() != t_tilde + 1 {
            return Err(Error::Specification(format!(
                "interval boundaries must start at 1 and end at {}",
                t_tilde + 1
            )));
        }
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Specification("interval boundaries must be strictly increasing".into()));
        }
        let r_count = bounds.len() - 1;
        if tie.len() != r_count {
            return Err(Error::Dimension { expected: r_count, found: tie.len() });
        }
        for (r, &target) in tie.iter().enumerate() {
            if target > r || tie[target] != target {
                return Err(Error::Specification(format!(
                    "interval {} is tied to interval {}, which is not an untied earlier interval",
                    r + 1,
                    target + 1
                )));
            }
        }
        let mut t_minus = vec![false; t_tilde];
        for &t in t_minus_set {
            if t == 0 || t > t_tilde {
                return Err(Error::Specification(format!("independence index {t} outside 1..={t_tilde}")));
            }
            t_minus[t - 1] = true;
        }
        let mut interval_of = vec![0; t_tilde];
        for r in 0..r_count {
            for slot in &mut interval_of[bounds[r] - 1..bounds[r + 1] - 1] {
                *slot = r;
            }
        }
        let free_intervals: Vec<usize> = (0..r_count).filter(|&r| tie[r] == r).collect();
        let mut free_of_interval = vec![0; r_count];
        for r in 0..r_count {
            free_of_interval[r] = free_intervals.iter().position(|&f| f == tie[r]).expect("governor is free");
        }
        Ok(SwitchingLayout {
            t_tilde,
            obs_counts,
            t_minus,
            bounds,
            tie,
            restricted,
            time_map,
            interval_of,
            free_intervals,
            free_of_interval,
        })
    }

    pub fn t_tilde(&self) -> usize {
        self.t_tilde
    }

    pub fn obs_counts(&self) -> &[usize] {
        &self.obs_counts
    }

    /// Elements of 𝒯₋, 1-based.
    pub fn t_minus(&self) -> Vec<usize> {
        self.t_minus.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i + 1).collect()
    }

    /// Whether the transition from auxiliary period `t` (0-based) to `t + 1`
    /// is a Markov transition (in range and not out of 𝒯₋).
    #[inline]
    pub fn counts_transition_from(&self, t: usize) -> bool {
        t + 1 < self.t_tilde && !self.t_minus[t]
    }

    pub fn interval_bounds(&self) -> &[usize] {
        &self.bounds
    }

    pub fn interval_count(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Governing interval of each interval (0-based).
    pub fn interval_tie(&self) -> &[usize] {
        &self.tie
    }

    pub fn free_interval_count(&self) -> usize {
        self.free_intervals.len()
    }

    /// Index into the free-interval probability vectors for auxiliary
    /// period `t` (0-based).
    #[inline]
    pub fn free_interval_at(&self, t: usize) -> usize {
        self.free_of_interval[self.interval_of[t]]
    }

    pub fn restrict_p01_le_p10(&self) -> bool {
        self.restricted
    }

    pub fn time_map(&self) -> TimeMap {
        self.time_map
    }

    /// Real `(t, n)` to auxiliary `(t̃, ñ)`.
    pub fn to_aux(&self, t: usize, n: usize) -> Result<(usize, usize)> {
        match self.time_map {
            TimeMap::SegmentMajor { periods, segments } => {
                if t == 0 || t > periods || n == 0 || n > segments {
                    return Err(Error::Domain(format!("(t={t}, n={n}) outside the annual layout")));
                }
                Ok(((n - 1) * periods + t, 1))
            }
            TimeMap::Identity => {
                if t == 0 || t > self.t_tilde || n == 0 || n > self.obs_counts[t - 1] {
                    return Err(Error::Domain(format!("(t={t}, n={n}) outside the layout")));
                }
                Ok((t, n))
            }
        }
    }

    /// Auxiliary `(t̃, ñ)` to real `(t, n)`.
    pub fn to_real(&self, t_aux: usize, n_aux: usize) -> Result<(usize, usize)> {
        if t_aux == 0 || t_aux > self.t_tilde || n_aux == 0 || n_aux > self.obs_counts[t_aux - 1] {
            return Err(Error::Domain(format!("(t̃={t_aux}, ñ={n_aux}) outside the layout")));
        }
        match self.time_map {
            TimeMap::SegmentMajor { periods, .. } => {
                let n = t_aux.div_ceil(periods);
                Ok((t_aux - (n - 1) * periods, n))
            }
            TimeMap::Identity => Ok((t_aux, n_aux)),
        }
    }

    /// Arranges a dataset in auxiliary order. Every auxiliary slot must be
    /// filled exactly once.
    pub fn arrange(&self, data: &Dataset) -> Result<Panel> {
        let mut period_start = Vec::with_capacity(self.t_tilde + 1);
        let mut acc = 0;
        for &c in &self.obs_counts {
            period_start.push(acc);
            acc += c;
        }
        period_start.push(acc);
        if data.len() != acc {
            return Err(Error::Dimension { expected: acc, found: data.len() });
        }
        let mut rows: Vec<Option<(Vec<f64>, u32)>> = vec![None; acc];
        for o in data.observations() {
            let (ta, na) = self.to_aux(o.t as usize, o.n as usize)?;
            let slot = period_start[ta - 1] + na - 1;
            if rows[slot].is_some() {
                return Err(Error::Domain(format!("duplicate observation (t={}, n={})", o.t, o.n)));
            }
            rows[slot] = Some((o.x.clone(), o.y));
        }
        let rows = rows.into_iter().map(|r| r.expect("all slots filled when counts match")).collect();
        Ok(Panel::from_rows(data.covariate_names().len(), rows, period_start))
    }
}

/// Annual layout: `segments` roadway segments observed over `periods` years.
pub fn build_annual_layout(periods: usize, segments: usize) -> Result<SwitchingLayout> {
    if periods == 0 || segments == 0 {
        return Err(Error::Specification("annual layout needs T ≥ 1 and N ≥ 1".into()));
    }
    let t_tilde = periods * segments;
    let t_minus: Vec<usize> = (1..=segments).map(|n| n * periods).collect();
    let mut bounds: Vec<usize> = (0..segments).map(|r| 1 + r * periods).collect();
    bounds.push(t_tilde + 1);
    SwitchingLayout::assemble(
        vec![1; t_tilde],
        &t_minus,
        bounds,
        (0..segments).collect(),
        false,
        TimeMap::SegmentMajor { periods, segments },
    )
}

/// Weekly layout (also used for severities): identity time map, one interval,
/// label restriction active. `obs_counts[t]` observations in period `t + 1`.
pub fn build_weekly_layout(obs_counts: Vec<usize>) -> Result<SwitchingLayout> {
    if obs_counts.len() < 2 {
        return Err(Error::Specification("weekly layout needs T ≥ 2".into()));
    }
    let t = obs_counts.len();
    SwitchingLayout::assemble(obs_counts, &[], vec![1, t + 1], vec![0], true, TimeMap::Identity)
}

/// General identity-time layout with explicit interval boundaries (1-based,
/// first 1, last `T̃ + 1`) and a tie map (`tie[r]` is the 1-based interval
/// governing interval `r + 1`).
pub fn build_interval_layout(
    obs_counts: Vec<usize>,
    boundaries: Vec<usize>,
    tie: &[usize],
    restricted: bool,
) -> Result<SwitchingLayout> {
    if tie.contains(&0) {
        return Err(Error::Specification("interval ties are 1-based".into()));
    }
    let tie = tie.iter().map(|r| r - 1).collect();
    SwitchingLayout::assemble(obs_counts, &[], boundaries, tie, restricted, TimeMap::Identity)
}

/// Latent states, one per auxiliary period, each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVector(pub Vec<u8>);

impl StateVector {
    pub fn new(s: Vec<u8>) -> Result<Self> {
        if s.iter().any(|&v| v > 1) {
            return Err(Error::Domain("state values must be 0 or 1".into()));
        }
        Ok(StateVector(s))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

/// Transition probabilities per free interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProbs {
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
}

impl TransitionProbs {
    pub fn uniform(free_intervals: usize, p01: f64, p10: f64) -> Self {
        TransitionProbs { p01: vec![p01; free_intervals], p10: vec![p10; free_intervals] }
    }

    pub fn satisfies_restriction(&self) -> bool {
        self.p01.iter().zip(&self.p10).all(|(a, b)| a <= b)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub m00: u64,
    pub m01: u64,
    pub m10: u64,
    pub m11: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.m00 + self.m01 + self.m10 + self.m11
    }

    #[inline]
    pub(crate) fn add(&mut self, from: u8, to: u8) {
        match (from, to) {
            (0, 0) => self.m00 += 1,
            (0, _) => self.m01 += 1,
            (_, 0) => self.m10 += 1,
            _ => self.m11 += 1,
        }
    }
}

/// Transition counts pooled per free interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    pub per_interval: Vec<PairCounts>,
}

pub fn count_transitions(s: &StateVector, layout: &SwitchingLayout) -> Result<TransitionCounts> {
    if s.len() != layout.t_tilde {
        return Err(Error::Dimension { expected: layout.t_tilde, found: s.len() });
    }
    Ok(count_raw(s.as_slice(), layout))
}

pub(crate) fn count_raw(s: &[u8], layout: &SwitchingLayout) -> TransitionCounts {
    let mut per_interval = vec![PairCounts::default(); layout.free_interval_count()];
    for t in 0..s.len().saturating_sub(1) {
        if layout.counts_transition_from(t) {
            per_interval[layout.free_interval_at(t)].add(s[t], s[t + 1]);
        }
    }
    TransitionCounts { per_interval }
}

/// Stationary state probabilities `(p̄0, p̄1)`.
pub fn stationary_probs(p01: f64, p10: f64) -> Result<(f64, f64)> {
    let total = p01 + p10;
    if !(total > 0.0) {
        return Err(Error::DegenerateChain);
    }
    let p1 = p01 / total;
    Ok((1.0 - p1, p1))
}

/// `m · ln p`, with `0 · ln 0 = 0`.
#[inline]
pub(crate) fn xlogy(m: u64, p: f64) -> f64 {
    if m == 0 {
        0.0
    } else if p <= 0.0 {
        LOG_ZERO
    } else {
        m as f64 * p.ln()
    }
}

/// Number of history-independent state draws (the first period and every
/// successor of a 𝒯₋ index), each contributing `ln ½`.
pub fn initial_state_count(layout: &SwitchingLayout) -> usize {
    1 + (0..layout.t_tilde.saturating_sub(1)).filter(|&t| layout.t_minus[t]).count()
}

/// Markov log-prior of the state vector.
pub fn log_state_prior(s: &StateVector, probs: &TransitionProbs, layout: &SwitchingLayout) -> Result<f64> {
    let counts = count_transitions(s, layout)?;
    if probs.p01.len() != layout.free_interval_count() || probs.p10.len() != layout.free_interval_count() {
        return Err(Error::Dimension { expected: layout.free_interval_count(), found: probs.p01.len() });
    }
    Ok(log_state_prior_from_counts(&counts, probs) + initial_state_count(layout) as f64 * 0.5f64.ln())
}

pub(crate) fn log_state_prior_from_counts(counts: &TransitionCounts, probs: &TransitionProbs) -> f64 {
    counts
        .per_interval
        .iter()
        .enumerate()
        .map(|(r, m)| {
            let (p01, p10) = (probs.p01[r], probs.p10[r]);
            xlogy(m.m01, p01) + xlogy(m.m00, 1.0 - p01) + xlogy(m.m10, p10) + xlogy(m.m11, 1.0 - p10)
        })
        .sum()
}
