//! Exact Gibbs draws of a block of consecutive states.
//!
//! All `2^τ` assignments of the block are scored level by level over the
//! binary prefix tree, so shared prefixes are summed once. Assignments with
//! a zero-likelihood period (e.g. a positive count under the zero-only
//! state) carry weight `−∞` and are never drawn.

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::LOG_ZERO;
use crate::switching::{SwitchingLayout, TransitionProbs};

pub const MAX_BLOCK: usize = 20;

/// `ln` transition probabilities per free interval, indexed `[from][to]`.
#[derive(Debug, Clone)]
pub struct LnTransitions(Vec<[[f64; 2]; 2]>);

impl LnTransitions {
    pub fn new(probs: &TransitionProbs) -> Self {
        let ln = |p: f64| if p > 0.0 { p.ln() } else { LOG_ZERO };
        LnTransitions(
            probs
                .p01
                .iter()
                .zip(&probs.p10)
                .map(|(&p01, &p10)| [[ln(1.0 - p01), ln(p01)], [ln(p10), ln(1.0 - p10)]])
                .collect(),
        )
    }

    /// Term for the move out of period `t` (0-based), zero when that
    /// transition is not part of the Markov chain.
    #[inline]
    fn term(&self, layout: &SwitchingLayout, t: usize, from: u8, to: u8) -> f64 {
        if layout.counts_transition_from(t) {
            self.0[layout.free_interval_at(t)][from as usize][to as usize]
        } else {
            0.0
        }
    }
}

/// Log conditional weights (up to a constant) of every assignment of the
/// block `start..start+len` (0-based); bit `d` of the index is the state of
/// period `start + d`.
#[allow(clippy::too_many_arguments)]
pub fn block_log_weights(
    start: usize,
    len: usize,
    s: &[u8],
    ll0: &[f64],
    ll1: &[f64],
    layout: &SwitchingLayout,
    trans: &LnTransitions,
    scores: &mut Vec<f64>,
) -> Result<()> {
    if len == 0 || len > MAX_BLOCK {
        return Err(Error::BlockTooLong(len));
    }
    if start + len > s.len() {
        return Err(Error::Dimension { expected: s.len(), found: start + len });
    }
    scores.clear();
    scores.resize(1 << len, LOG_ZERO);
    let ll = [ll0, ll1];
    // first period, with the transition from the fixed predecessor
    for state in 0..2usize {
        let mut v = ll[state][start];
        if start > 0 {
            v += trans.term(layout, start - 1, s[start - 1], state as u8);
        }
        scores[state] = v;
    }
    // level d extends every prefix of length d by period start + d; the
    // upper half is written first so the lower half can be updated in place
    for d in 1..len {
        let t = start + d;
        let width = 1usize << d;
        let mut step = [[0.0; 2]; 2];
        for (from, row) in step.iter_mut().enumerate() {
            for (to, v) in row.iter_mut().enumerate() {
                *v = trans.term(layout, t - 1, from as u8, to as u8);
            }
        }
        let (l0, l1) = (ll0[t], ll1[t]);
        let (lower, upper) = scores.split_at_mut(width);
        for code in 0..width {
            let last = (code >> (d - 1)) & 1;
            let prefix = lower[code];
            upper[code] = prefix + l1 + step[last][1];
            lower[code] = prefix + l0 + step[last][0];
        }
    }
    let end = start + len;
    if end < s.len() {
        let next = s[end];
        let exit = [trans.term(layout, end - 1, 0, next), trans.term(layout, end - 1, 1, next)];
        for (code, v) in scores.iter_mut().enumerate() {
            *v += exit[(code >> (len - 1)) & 1];
        }
    }
    for v in scores.iter_mut() {
        if v.is_nan() {
            *v = LOG_ZERO;
        }
    }
    Ok(())
}

/// Draws an index with probability proportional to `exp(scores)`.
pub fn draw_log_weighted<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Option<usize> {
    let mut weights = scores.to_vec();
    draw_log_weighted_in_place(&mut weights, rng)
}

/// As [`draw_log_weighted`], overwriting `scores` with unnormalized weights.
fn draw_log_weighted_in_place<R: Rng + ?Sized>(scores: &mut [f64], rng: &mut R) -> Option<usize> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut total = 0.0;
    for v in scores.iter_mut() {
        // below this the weight underflows to zero anyway
        *v = if *v - max > -745.0 { (*v - max).exp() } else { 0.0 };
        total += *v;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &w) in scores.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            if u < w {
                return Some(i);
            }
            u -= w;
        }
    }
    Some(last_positive)
}

/// Redraws states `start..start+len` (0-based) from their exact conditional
/// given all other states, the per-period state log-likelihoods and the
/// transition probabilities.
#[allow(clippy::too_many_arguments)]
pub fn sample_state_block<R: Rng + ?Sized>(
    start: usize,
    len: usize,
    s: &mut [u8],
    ll0: &[f64],
    ll1: &[f64],
    layout: &SwitchingLayout,
    trans: &LnTransitions,
    scores: &mut Vec<f64>,
    rng: &mut R,
) -> Result<()> {
    block_log_weights(start, len, s, ll0, ll1, layout, trans, scores)?;
    let code = draw_log_weighted_in_place(scores, rng).ok_or_else(|| {
        Error::Domain(format!("state block starting at period {} has no admissible assignment", start + 1))
    })?;
    for d in 0..len {
        s[start + d] = ((code >> d) & 1) as u8;
    }
    Ok(())
}
