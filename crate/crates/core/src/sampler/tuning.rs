//! Burn-in tuning of the M-H proposal scales.
//!
//! Every `window` draws each coefficient's scale is multiplied by `factor`
//! if its acceptance rate over the window exceeded the target and divided
//! by it if the rate fell short. At the end of burn-in a decreasing
//! exponential `rate ≈ a·exp(−b·σ)` is fitted to the later windows and the
//! scale is set to the value whose fitted rate equals the target.

use log::warn;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ProposalShape {
    #[default]
    Normal,
    Cauchy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalScales {
    pub sigma: Vec<f64>,
    pub shape: ProposalShape,
}

/// One window's outcome for one coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRecord {
    /// Draw index at which the window closed.
    pub end: usize,
    pub sigma: f64,
    pub rate: f64,
}

/// Multiplicative adjustment after one window. A rate exactly at target
/// leaves the scale unchanged.
pub fn adjust_scale(sigma: f64, rate: f64, target: f64, factor: f64) -> f64 {
    if rate > target {
        sigma * factor
    } else if rate < target {
        sigma / factor
    } else {
        sigma
    }
}

/// Fits `ln(rate) = c − b·σ` by least squares and returns the scale at
/// which the fitted rate equals `target`. Only windows with rates in
/// `(0.01, 0.99)` take part; `None` when fewer than three distinct
/// `(σ, rate)` pairs remain or the fit is not decreasing.
pub fn fit_exponential_scale(records: &[WindowRecord], target: f64) -> Option<f64> {
    let usable: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.rate > 0.01 && r.rate < 0.99 && r.sigma > 0.0)
        .map(|r| (r.sigma, r.rate.ln()))
        .collect();
    let mut distinct = usable.clone();
    distinct.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    distinct.dedup();
    let distinct_sigmas = {
        let mut s: Vec<f64> = usable.iter().map(|p| p.0).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s.len()
    };
    if distinct.len() < 3 || distinct_sigmas < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let b = -slope;
    if !(b > 0.0) {
        return None;
    }
    let c = my - slope * mx;
    let sigma = (c - target.ln()) / b;
    (sigma.is_finite() && sigma > 0.0).then_some(sigma)
}

/// Per-coefficient window bookkeeping for one chain.
#[derive(Debug, Clone)]
pub struct Tuner {
    window: usize,
    factor: f64,
    target: f64,
    accepted: Vec<usize>,
    proposed: Vec<usize>,
    history: Vec<Vec<WindowRecord>>,
}

impl Tuner {
    pub fn new(coefs: usize, window: usize, factor: f64, target: f64) -> Self {
        Tuner {
            window,
            factor,
            target,
            accepted: vec![0; coefs],
            proposed: vec![0; coefs],
            history: vec![Vec::new(); coefs],
        }
    }

    pub fn record(&mut self, k: usize, accepted: bool) {
        self.proposed[k] += 1;
        self.accepted[k] += accepted as usize;
    }

    /// Called after every burn-in sweep `g` (0-based); closes windows and
    /// adjusts scales.
    pub fn end_sweep(&mut self, g: usize, scales: &mut ProposalScales) {
        if !(g + 1).is_multiple_of(self.window) {
            return;
        }
        for k in 0..scales.sigma.len() {
            if self.proposed[k] == 0 {
                continue;
            }
            let rate = self.accepted[k] as f64 / self.proposed[k] as f64;
            self.history[k].push(WindowRecord { end: g + 1, sigma: scales.sigma[k], rate });
            scales.sigma[k] = adjust_scale(scales.sigma[k], rate, self.target, self.factor);
            self.accepted[k] = 0;
            self.proposed[k] = 0;
        }
    }

    /// Freezes the scales at burn-in end using windows from the last two
    /// thirds of burn-in. The fitted scale is kept within a factor of two of
    /// the scales actually visited.
    pub fn finish(&self, burn_in: usize, scales: &mut ProposalScales) -> Vec<usize> {
        let mut unfitted = Vec::new();
        for (k, records) in self.history.iter().enumerate() {
            let late: Vec<WindowRecord> = records.iter().copied().filter(|r| 3 * r.end > burn_in).collect();
            match fit_exponential_scale(&late, self.target) {
                Some(s) => {
                    let lo = late.iter().map(|r| r.sigma).fold(f64::INFINITY, f64::min);
                    let hi = late.iter().map(|r| r.sigma).fold(0.0, f64::max);
                    scales.sigma[k] = s.clamp(0.5 * lo, 2.0 * hi);
                }
                None => {
                    if !records.is_empty() {
                        warn!("coefficient {k}: too few usable tuning windows; keeping last proposal scale");
                    }
                    unfitted.push(k);
                }
            }
        }
        unfitted
    }

    pub fn history(&self, k: usize) -> &[WindowRecord] {
        &self.history[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn window_adjustments() {
        assert_relative_eq!(adjust_scale(1.0, 0.6, 0.3, 1.25), 1.25);
        assert_relative_eq!(adjust_scale(1.0, 0.1, 0.3, 1.25), 0.8);
        assert_eq!(adjust_scale(1.0, 0.3, 0.3, 1.25), 1.0);
    }

    #[test]
    fn exact_exponential_is_inverted() {
        let records: Vec<WindowRecord> = [0.5, 0.8, 1.0, 1.25, 1.6, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| WindowRecord { end: i, sigma: s, rate: (-s).exp() })
            .collect();
        let s = fit_exponential_scale(&records, 0.3).unwrap();
        assert_relative_eq!(s, -(0.3f64.ln()), epsilon = 1e-12);
        assert_relative_eq!(s, 1.204, epsilon = 1e-3);
    }

    #[test]
    fn degenerate_fits_are_declined() {
        let same = vec![WindowRecord { end: 1, sigma: 1.0, rate: 0.3 }; 10];
        assert_eq!(fit_exponential_scale(&same, 0.3), None);
        let increasing: Vec<WindowRecord> =
            (1..6).map(|i| WindowRecord { end: i, sigma: i as f64, rate: 0.1 * i as f64 }).collect();
        assert_eq!(fit_exponential_scale(&increasing, 0.3), None);
        let extreme: Vec<WindowRecord> =
            (1..6).map(|i| WindowRecord { end: i, sigma: i as f64, rate: 1.0 }).collect();
        assert_eq!(fit_exponential_scale(&extreme, 0.3), None);
    }

    #[test]
    fn tuner_closes_windows() {
        let mut t = Tuner::new(1, 2, 1.25, 0.3);
        let mut scales = ProposalScales { sigma: vec![1.0], shape: ProposalShape::Normal };
        for g in 0..4 {
            t.record(0, true);
            t.end_sweep(g, &mut scales);
        }
        assert_eq!(t.history(0).len(), 2);
        assert_relative_eq!(scales.sigma[0], 1.5625);
    }
}
