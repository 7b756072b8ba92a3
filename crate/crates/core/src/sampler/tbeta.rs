//! Exact draws from a Beta distribution truncated to a sub-interval.
//!
//! For shapes `a, b ≥ 1` the log-density is concave, so tangent lines at a
//! handful of touch points form a piecewise-exponential upper envelope;
//! draws come from rejection sampling under it. Non-concave shapes, and
//! envelopes that keep rejecting, fall back to numerical inversion of the
//! truncated CDF.

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{log_sum_exp, reg_inc_beta};

const TOUCH_POINTS: usize = 5;
const MAX_REJECTIONS: usize = 1000;
const GRID: usize = 4096;

/// Which end of `[0, 1]` the truncation bound replaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    /// Support `[0, value]`.
    Upper(f64),
    /// Support `[value, 1]`.
    Lower(f64),
    /// Full support `[0, 1]`.
    None,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    left: f64,
    width: f64,
    /// Envelope value (log) at `left`, relative to the density maximum.
    at_left: f64,
    slope: f64,
}

/// A truncated Beta law prepared for repeated sampling.
#[derive(Debug, Clone)]
pub struct TruncatedBeta {
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    /// `h` at the region maximum; densities are handled relative to it.
    h_max: f64,
    pieces: Vec<Piece>,
    /// Cumulative piece masses, normalized to end at 1.
    cumulative: Vec<f64>,
    /// Set when the region carries no usable envelope (non-concave shapes
    /// or a degenerate region).
    inversion_only: bool,
}

impl TruncatedBeta {
    pub fn new(a: f64, b: f64, bound: Bound) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("Beta shapes must be positive and finite, got ({a}, {b})")));
        }
        let (lo, hi) = match bound {
            Bound::Upper(v) => (0.0, v),
            Bound::Lower(v) => (v, 1.0),
            Bound::None => (0.0, 1.0),
        };
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Domain(format!("truncation bound outside [0, 1]: {bound:?}")));
        }
        let mut tb = TruncatedBeta {
            a,
            b,
            lo,
            hi,
            h_max: 0.0,
            pieces: Vec::new(),
            cumulative: Vec::new(),
            inversion_only: true,
        };
        if hi - lo <= 0.0 {
            return Ok(tb);
        }
        let mode = tb.region_mode();
        tb.h_max = tb.h(mode);
        if a >= 1.0 && b >= 1.0 && tb.h_max.is_finite() {
            tb.build_envelope(mode);
        }
        Ok(tb)
    }

    #[inline]
    fn h(&self, p: f64) -> f64 {
        let left = if self.a == 1.0 { 0.0 } else { (self.a - 1.0) * p.ln() };
        let right = if self.b == 1.0 { 0.0 } else { (self.b - 1.0) * (-p).ln_1p() };
        left + right
    }

    #[inline]
    fn dh(&self, p: f64) -> f64 {
        (self.a - 1.0) / p - (self.b - 1.0) / (1.0 - p)
    }

    /// Maximizer of the density over the truncation region.
    fn region_mode(&self) -> f64 {
        let (a, b) = (self.a, self.b);
        let interior = if a >= 1.0 && b >= 1.0 {
            if a + b > 2.0 {
                (a - 1.0) / (a + b - 2.0)
            } else {
                0.5 * (self.lo + self.hi)
            }
        } else if a < 1.0 && b >= 1.0 {
            self.lo
        } else if b < 1.0 && a >= 1.0 {
            self.hi
        } else if self.h(self.lo.max(1e-300)) >= self.h(self.hi.min(1.0 - 1e-16)) {
            self.lo
        } else {
            self.hi
        };
        interior.clamp(self.lo, self.hi)
    }

    /// Tangent touch points: the region maximum plus points one and two
    /// Laplace standard deviations either side, kept strictly inside the
    /// region.
    fn touch_points(&self, mode: f64) -> Vec<f64> {
        let (lo, hi) = (self.lo, self.hi);
        let width = hi - lo;
        let n = self.a + self.b - 2.0;
        let sd = if n > 0.0 {
            let m = ((self.a - 1.0) / n).clamp(1e-12, 1.0 - 1e-12);
            (m * (1.0 - m) / n).sqrt().max(1e-12)
        } else {
            width
        };
        let inner_lo = lo + 1e-9 * width;
        let inner_hi = hi - 1e-9 * width;
        let mut pts: Vec<f64> = Vec::with_capacity(TOUCH_POINTS);
        let centre = mode.clamp(inner_lo, inner_hi);
        pts.push(centre);
        for k in [1.0, 2.0] {
            for sign in [-1.0, 1.0] {
                let mut p = centre + sign * k * sd;
                if p <= inner_lo || p >= inner_hi {
                    // spread the remaining points over the region instead
                    let end = if sign < 0.0 { inner_lo } else { inner_hi };
                    p = centre + (end - centre) * (k / 3.0);
                }
                pts.push(p);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * width.max(1e-300));
        pts.retain(|p| *p > lo && *p < hi);
        pts
    }

    fn build_envelope(&mut self, mode: f64) {
        let pts = self.touch_points(mode);
        if pts.is_empty() {
            return;
        }
        let values: Vec<f64> = pts.iter().map(|&p| self.h(p) - self.h_max).collect();
        let slopes: Vec<f64> = pts.iter().map(|&p| self.dh(p)).collect();
        if values.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return;
        }
        let mut edges = vec![self.lo];
        for i in 0..pts.len() - 1 {
            let ds = slopes[i] - slopes[i + 1];
            let z = if ds.abs() > 1e-12 * slopes[i].abs().max(slopes[i + 1].abs()).max(1e-300) {
                (values[i + 1] - values[i] - pts[i + 1] * slopes[i + 1] + pts[i] * slopes[i]) / ds
            } else {
                0.5 * (pts[i] + pts[i + 1])
            };
            let prev = *edges.last().unwrap();
            edges.push(z.clamp(prev, self.hi));
        }
        edges.push(self.hi);
        let mut pieces = Vec::with_capacity(pts.len());
        let mut ln_masses = Vec::with_capacity(pts.len());
        for i in 0..pts.len() {
            let left = edges[i];
            let width = edges[i + 1] - left;
            let at_left = values[i] + slopes[i] * (left - pts[i]);
            let piece = Piece { left, width, at_left, slope: slopes[i] };
            ln_masses.push(if width > 0.0 { at_left + ln_exp_integral(slopes[i], width) } else { f64::NEG_INFINITY });
            pieces.push(piece);
        }
        let total = log_sum_exp(&ln_masses);
        if !total.is_finite() {
            return;
        }
        let mut acc = 0.0;
        self.cumulative = ln_masses
            .iter()
            .map(|m| {
                acc += (m - total).exp();
                acc
            })
            .collect();
        self.pieces = pieces;
        self.inversion_only = false;
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// One exact draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi - self.lo <= 0.0 {
            return self.lo;
        }
        if !self.inversion_only {
            for _ in 0..MAX_REJECTIONS {
                let u: f64 = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
                let i = self.cumulative.partition_point(|&c| c < u).min(self.pieces.len() - 1);
                let piece = self.pieces[i];
                let p = (piece.left + sample_exp_piece(piece.slope, piece.width, rng.random()))
                    .clamp(piece.left, piece.left + piece.width)
                    .clamp(self.lo, self.hi);
                let envelope = piece.at_left + piece.slope * (p - piece.left);
                let target = self.h(p) - self.h_max;
                let v: f64 = rng.random();
                if v.ln() <= target - envelope {
                    return p;
                }
            }
        }
        self.sample_by_inversion(rng)
    }

    /// Inversion of the truncated CDF by bisection on the regularized
    /// incomplete beta; if the region's mass underflows, a fine-grid
    /// numerical CDF of the relative density is inverted instead.
    pub fn sample_by_inversion<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let f_lo = reg_inc_beta(self.a, self.b, self.lo);
        let f_hi = reg_inc_beta(self.a, self.b, self.hi);
        let mass = f_hi - f_lo;
        if mass > 1e-12 {
            let target = f_lo + u * mass;
            let (mut lo, mut hi) = (self.lo, self.hi);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if reg_inc_beta(self.a, self.b, mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi.max(1e-300) {
                    break;
                }
            }
            return (0.5 * (lo + hi)).clamp(self.lo, self.hi);
        }
        self.grid_inversion(u)
    }

    fn grid_inversion(&self, u: f64) -> f64 {
        let step = (self.hi - self.lo) / GRID as f64;
        let dens: Vec<f64> = (0..=GRID)
            .map(|i| {
                let p = (self.lo + i as f64 * step).clamp(1e-300, 1.0 - 1e-16);
                (self.h(p) - self.h_max).exp()
            })
            .collect();
        let mut cum = vec![0.0; GRID + 1];
        for i in 0..GRID {
            cum[i + 1] = cum[i] + 0.5 * (dens[i] + dens[i + 1]) * step;
        }
        let target = u * cum[GRID];
        let i = cum.partition_point(|&c| c < target).clamp(1, GRID);
        let seg = cum[i] - cum[i - 1];
        let frac = if seg > 0.0 { (target - cum[i - 1]) / seg } else { 0.5 };
        (self.lo + (i as f64 - 1.0 + frac) * step).clamp(self.lo, self.hi)
    }
}

/// `ln ∫₀ʷ e^{s·x} dx`.
fn ln_exp_integral(s: f64, w: f64) -> f64 {
    let sw = s * w;
    if sw.abs() < 1e-12 {
        w.ln()
    } else if s > 0.0 {
        sw + (-(-sw).exp_m1()).ln() - s.ln()
    } else {
        (-sw.exp_m1()).ln() - (-s).ln()
    }
}

/// Inverse CDF of the density `∝ e^{s·x}` on `[0, w]` at `u`.
fn sample_exp_piece(s: f64, w: f64, u: f64) -> f64 {
    let sw = s * w;
    if sw.abs() < 1e-12 {
        u * w
    } else if s > 0.0 {
        w + (u + (1.0 - u) * (-sw).exp()).ln() / s
    } else {
        // mirror image of the increasing case
        w - sample_exp_piece(-s, w, 1.0 - u)
    }
}

/// One draw from `Beta(a, b)` truncated by `bound`.
pub fn sample_truncated_beta<R: Rng + ?Sized>(a: f64, b: f64, bound: Bound, rng: &mut R) -> Result<f64> {
    if let Bound::Upper(v) | Bound::Lower(v) = bound {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("truncation bound must lie in (0, 1), got {v}")));
        }
    }
    Ok(TruncatedBeta::new(a, b, bound)?.sample(rng))
}
