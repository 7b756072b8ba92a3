use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::Obs;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Real time period, 1-based.
    pub t: u32,
    /// Unit (segment or accident) index within the period, 1-based.
    pub n: u32,
    pub y: Obs,
    pub x: Vec<f64>,
}

/// Observations with a shared covariate header. The first covariate is the
/// intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariate_names: Vec<String>,
    obs: Vec<Observation>,
}

impl Dataset {
    pub fn new(covariate_names: Vec<String>, obs: Vec<Observation>) -> Result<Self> {
        let k = covariate_names.len();
        let mut seen = HashSet::with_capacity(obs.len());
        for o in &obs {
            if o.x.len() != k {
                return Err(Error::Dimension { expected: k, found: o.x.len() });
            }
            if o.t == 0 || o.n == 0 {
                return Err(Error::Domain(format!("indices are 1-based, got (t={}, n={})", o.t, o.n)));
            }
            if !seen.insert((o.t, o.n)) {
                return Err(Error::Domain(format!("duplicate observation (t={}, n={})", o.t, o.n)));
            }
        }
        Ok(Dataset { covariate_names, obs })
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn max_y(&self) -> Obs {
        self.obs.iter().map(|o| o.y).max().unwrap_or(0)
    }

    pub fn max_t(&self) -> u32 {
        self.obs.iter().map(|o| o.t).max().unwrap_or(0)
    }

    pub fn max_n(&self) -> u32 {
        self.obs.iter().map(|o| o.n).max().unwrap_or(0)
    }

    /// Observation count per real period `1..=max_t`.
    pub fn counts_per_period(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_t() as usize];
        for o in &self.obs {
            counts[o.t as usize - 1] += 1;
        }
        counts
    }
}

/// Observations laid out in auxiliary-time order for fast per-period sums.
#[derive(Debug, Clone)]
pub struct Panel {
    k: usize,
    x: Vec<f64>,
    /// Column-major copy of `x`.
    xt: Vec<f64>,
    y: Vec<Obs>,
    /// `period_start[t]..period_start[t+1]` are the rows of auxiliary period
    /// `t` (0-based).
    period_start: Vec<usize>,
    max_y: Obs,
}

impl Panel {
    pub(crate) fn from_rows(k: usize, rows: Vec<(Vec<f64>, Obs)>, period_start: Vec<usize>) -> Self {
        let mut x = Vec::with_capacity(rows.len() * k);
        let mut y = Vec::with_capacity(rows.len());
        for (xi, yi) in rows {
            x.extend_from_slice(&xi);
            y.push(yi);
        }
        let max_y = y.iter().copied().max().unwrap_or(0);
        let xt = transpose(&x, k);
        Panel { k, x, xt, y, period_start, max_y }
    }

    pub fn covariate_count(&self) -> usize {
        self.k
    }

    pub fn periods(&self) -> usize {
        self.period_start.len() - 1
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn max_y(&self) -> Obs {
        self.max_y
    }

    pub fn rows(&self, period: usize) -> std::ops::Range<usize> {
        self.period_start[period]..self.period_start[period + 1]
    }

    #[inline]
    pub fn x(&self, row: usize) -> &[f64] {
        &self.x[row * self.k..(row + 1) * self.k]
    }

    /// Covariate `c` of every row.
    #[inline]
    pub fn column(&self, c: usize) -> &[f64] {
        let n = self.y.len();
        &self.xt[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn y(&self, row: usize) -> Obs {
        self.y[row]
    }

    pub fn ys(&self) -> &[Obs] {
        &self.y
    }

    /// Copy of this panel with replaced observations (same design).
    pub fn with_y(&self, y: Vec<Obs>) -> Self {
        assert_eq!(y.len(), self.y.len());
        let max_y = y.iter().copied().max().unwrap_or(0);
        Panel { k: self.k, x: self.x.clone(), xt: self.xt.clone(), y, period_start: self.period_start.clone(), max_y }
    }
}

fn transpose(x: &[f64], k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let n = x.len() / k;
    let mut xt = vec![0.0; x.len()];
    for (row, chunk) in x.chunks_exact(k).enumerate() {
        for (c, &v) in chunk.iter().enumerate() {
            xt[c * n + row] = v;
        }
    }
    xt
}
