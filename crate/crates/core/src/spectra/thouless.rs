use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::IDSTable;
use crate::lyapunov::LyapunovEstimate;
use crate::{Error, Result};

/// Finite union of closed energy intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub intervals: Vec<(f64, f64)>,
}

impl FitWindow {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::InvalidInput(format!("fit interval [{a}, {b}] is not a bounded interval")));
            }
        }
        Ok(Self { intervals })
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| (a..=b).contains(&lambda))
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    fn bounds(&self) -> (f64, f64) {
        self.intervals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(a, b)| (lo.min(a), hi.max(b)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThoulessRow {
    pub lambda: f64,
    pub gamma: f64,
    /// `∫ log|(λ − t)/(t − i)| dN(t)`, tail included.
    pub integral: f64,
    /// `γ − (−α + integral)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoulessFit {
    pub alpha: f64,
    pub max_residual: f64,
    pub rows: Vec<ThoulessRow>,
    /// Largest tail contribution beyond the top of the grid over the fit energies.
    pub max_tail: f64,
    pub warnings: Vec<String>,
}

/// `∫ log|t − λ| dt` antiderivative in `u = t − λ`.
fn log_abs_antiderivative(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.abs().ln() - u
    }
}

/// `∫ log|t − i| dt = ½ ∫ log(1 + t²) dt` antiderivative.
fn log_modulus_antiderivative(t: f64) -> f64 {
    0.5 * (t * t.mul_add(t, 1.0).ln() - 2.0 * t + 2.0 * t.atan())
}

/// Contribution of `t > top`, with the large-energy density of states
/// `dN = dt / (2π√t)`. In `u = t^{-1/2}` the integrand is smooth:
/// `(1/π) ∫₀^{top^{-1/2}} [log(1 − λu²) − ½ log(1 + u⁴)] / u² du`.
fn tail_integral(lambda: f64, top: f64) -> f64 {
    if top <= 0.0 || lambda >= top {
        return f64::NAN;
    }
    let f = |u: f64| {
        if u == 0.0 {
            -lambda
        } else {
            let u2 = u * u;
            ((-lambda * u2).ln_1p() - 0.5 * (u2 * u2).ln_1p()) / u2
        }
    };
    let n = 256;
    let b = 1.0 / top.sqrt();
    let h = b / n as f64;
    let mut s = f(0.0) + f(b);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 / PI
}

/// `∫ log|(λ − t)/(t − i)| dN(t)` for the piecewise-linear interpolation of
/// the table, each piece integrated in closed form, plus the tail above the
/// grid. Mass `N(t₀)` below the first grid point is placed at `t₀`.
pub fn thouless_integral(ids: &IDSTable, lambda: f64) -> f64 {
    let t = &ids.lambda_grid;
    let n = &ids.values;
    let mut total = 0.0;
    if n[0] != 0.0 {
        total += n[0] * ((lambda - t[0]).abs().ln() - 0.5 * t[0].mul_add(t[0], 1.0).ln());
    }
    for j in 0..t.len() - 1 {
        let (a, b) = (t[j], t[j + 1]);
        let slope = (n[j + 1] - n[j]) / (b - a);
        if slope == 0.0 {
            continue;
        }
        let near = log_abs_antiderivative(b - lambda) - log_abs_antiderivative(a - lambda);
        let far = log_modulus_antiderivative(b) - log_modulus_antiderivative(a);
        total += slope * (near - far);
    }
    total + tail_integral(lambda, t[t.len() - 1])
}

/// Fits the constant `α` in `γ(λ) = −α + ∫ log|(λ − t)/(t − i)| dN(t)` by
/// least squares over the Lyapunov samples inside `window`.
///
/// The window must lie inside the grid, except that energies below the grid
/// are accepted when the table starts at `N = 0` (no spectrum below).
pub fn thouless_check(gamma: &[LyapunovEstimate], ids: &IDSTable, window: &FitWindow) -> Result<ThoulessFit> {
    if window.is_empty() {
        return Err(Error::EmptyFitWindow);
    }
    let grid = &ids.lambda_grid;
    if grid.len() < 2 || grid.len() != ids.values.len() {
        return Err(Error::InsufficientRange("density-of-states table needs at least two points".into()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput("density-of-states grid must be strictly increasing".into()));
    }
    let (lo, hi) = window.bounds();
    let (t0, top) = (grid[0], grid[grid.len() - 1]);
    let floor = if ids.values[0] == 0.0 { f64::NEG_INFINITY } else { t0 };
    if lo < floor || hi > top {
        return Err(Error::InsufficientRange(format!(
            "fit window [{lo}, {hi}] is not inside the grid [{t0}, {top}] (N({t0}) = {})",
            ids.values[0]
        )));
    }
    let used: Vec<&LyapunovEstimate> = gamma.iter().filter(|e| window.contains(e.lambda)).collect();
    if used.is_empty() {
        return Err(Error::EmptyFitWindow);
    }
    let integrals: Vec<f64> = used.iter().map(|e| thouless_integral(ids, e.lambda)).collect();
    let offsets: Vec<f64> = used.iter().zip(&integrals).map(|(e, i)| i - e.mean).collect();
    let alpha = crate::lyapunov::pairwise_sum(&offsets) / offsets.len() as f64;
    let rows: Vec<ThoulessRow> = used
        .iter()
        .zip(&integrals)
        .map(|(e, &integral)| ThoulessRow { lambda: e.lambda, gamma: e.mean, integral, residual: e.mean - (integral - alpha) })
        .collect();
    let max_residual = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);

    let mut warnings = Vec::new();
    let max_tail = used.iter().map(|e| tail_integral(e.lambda, top).abs()).fold(0.0, f64::max);
    let max_gamma = used.iter().map(|e| e.mean.abs()).fold(0.0, f64::max);
    if max_tail > 0.1 * max_gamma {
        warnings.push(format!(
            "tail above {top} contributes up to {max_tail:.3e}, more than 10% of the largest |gamma| {max_gamma:.3e}"
        ));
    }
    if top - hi < 40.0 * (hi - lo) {
        warnings.push(format!("grid extends {:.3} above the fit window, less than 40 window widths", top - hi));
    }
    Ok(ThoulessFit { alpha, max_residual, rows, max_tail, warnings })
}
