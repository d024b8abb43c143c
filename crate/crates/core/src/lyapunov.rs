//! Monte Carlo estimates of the Lyapunov exponent and related statistics of
//! random transfer-matrix products.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Configuration, ModelConfig};
use crate::rng::{derive_seed, CouplingStream};
use crate::transfer::{product_with_cells, CellMatrices, DIRICHLET};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    pub n_steps: usize,
    pub n_samples: usize,
    /// Per-cell log growth averaged over samples.
    pub mean: f64,
    pub std_error: f64,
    pub master_seed: u64,
    /// Cells discarded before the growth rate is measured.
    pub burn_in: usize,
}

/// Estimator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    /// `None` selects `n_steps / 10`.
    pub burn_in: Option<usize>,
    pub initial_vector: [f64; 2],
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self { burn_in: None, initial_vector: DIRICHLET }
    }
}

impl LyapunovOptions {
    /// Plain `log‖U_λ(n)x₀‖ / n` without discarding any cells.
    pub fn plain() -> Self {
        Self { burn_in: Some(0), initial_vector: DIRICHLET }
    }

    fn burn_in_for(&self, n_steps: usize) -> usize {
        self.burn_in.unwrap_or(n_steps / 10).min(n_steps.saturating_sub(1))
    }
}

/// Sum in the canonical pairwise order used for every reduction here.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (l, r) = values.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Mean and standard error of the mean (zero for a single value).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let squares: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&squares) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Couplings of cells `1..=n_steps` of one sample.
fn sample_couplings(model: &ModelConfig, n_steps: usize, master_seed: u64, sample: u64) -> Configuration {
    model.sample_configuration(1, n_steps.max(1) as i64, master_seed, sample)
}

/// Per-sample growth rates with the default options.
pub fn estimate_lyapunov(
    model: &ModelConfig,
    lambda: f64,
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> LyapunovEstimate {
    estimate_lyapunov_with(model, lambda, n_steps, n_samples, master_seed, &LyapunovOptions::default())
}

/// Averages `(log‖U(n)x₀‖ − log‖U(b)x₀‖) / (n − b)` over independent samples,
/// `b` being the burn-in. Discarding the first cells removes the `O(1/n)`
/// transient from the fixed starting direction. Sample `s` uses the coupling
/// stream `(master_seed, s)`, so the result does not depend on the number of
/// worker threads.
pub fn estimate_lyapunov_with(
    model: &ModelConfig,
    lambda: f64,
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
    options: &LyapunovOptions,
) -> LyapunovEstimate {
    assert!(n_steps >= 1 && n_samples >= 1, "need at least one step and one sample");
    let burn_in = options.burn_in_for(n_steps);
    let cells = CellMatrices::for_model(model, lambda);
    let rates: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let config = sample_couplings(model, n_steps, master_seed, s);
            let mut at_burn_in = 0.0;
            let r = product_with_cells(&cells, &config, n_steps, options.initial_vector, |n, log_norm| {
                if n == burn_in {
                    at_burn_in = log_norm;
                }
            });
            (r.log_norm - at_burn_in) / (n_steps - burn_in) as f64
        })
        .collect();
    let (mean, std_error) = mean_and_std_error(&rates);
    LyapunovEstimate { lambda, n_steps, n_samples, mean, std_error, master_seed, burn_in }
}

/// Estimates on every grid energy; energy `i` draws from the master seed
/// mixed with `i`.
pub fn lyapunov_profile(
    model: &ModelConfig,
    lambda_grid: &[f64],
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> Vec<LyapunovEstimate> {
    lambda_grid
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let mut e = estimate_lyapunov(model, l, n_steps, n_samples, derive_seed(master_seed, i as u64));
            e.master_seed = master_seed;
            e
        })
        .collect()
}

/// Empirical distribution of the projective direction `θ ∈ [0, π)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionHistogram {
    pub lambda: f64,
    pub bin_count: usize,
    pub weights: Vec<f64>,
    /// Total-variation distance between the histograms of the two halves of
    /// the recording window.
    pub drift: f64,
}

impl DirectionHistogram {
    pub fn bin_center(&self, i: usize) -> f64 {
        std::f64::consts::PI * (i as f64 + 0.5) / self.bin_count as f64
    }

    pub fn bin_of(&self, theta: f64) -> usize {
        let t = theta.rem_euclid(std::f64::consts::PI);
        ((t / std::f64::consts::PI * self.bin_count as f64) as usize).min(self.bin_count - 1)
    }
}

pub const DEFAULT_INVARIANT_BURN_IN: usize = 1000;

/// Histogram of the directions `U_λ(n)x₀` for `burn_in < n ≤ burn_in + n_record`
/// along a single chain (sample index 0).
pub fn invariant_measure(
    model: &ModelConfig,
    lambda: f64,
    burn_in: usize,
    n_record: usize,
    bin_count: usize,
    master_seed: u64,
) -> DirectionHistogram {
    invariant_measure_chain(model, lambda, burn_in, n_record, bin_count, master_seed, 0)
}

fn invariant_measure_chain(
    model: &ModelConfig,
    lambda: f64,
    burn_in: usize,
    n_record: usize,
    bin_count: usize,
    master_seed: u64,
    sample_index: u64,
) -> DirectionHistogram {
    assert!(bin_count >= 1 && n_record >= 1);
    let cells = CellMatrices::for_model(model, lambda);
    let mut stream = CouplingStream::new(master_seed, sample_index, 1);
    let mut v = DIRICHLET;
    let mut halves = [vec![0u64; bin_count], vec![0u64; bin_count]];
    let mut hist = DirectionHistogram { lambda, bin_count, weights: Vec::new(), drift: 0.0 };
    for n in 0..burn_in + n_record {
        let g = cells.get(model.mu.quantile(stream.next_uniform()));
        let w = g.apply(v);
        let r = w[0].hypot(w[1]);
        v = [w[0] / r, w[1] / r];
        if n >= burn_in {
            let half = usize::from(n - burn_in >= n_record / 2);
            halves[half][hist.bin_of(v[1].atan2(v[0]))] += 1;
        }
    }
    let total = n_record as f64;
    hist.weights = (0..bin_count).map(|i| (halves[0][i] + halves[1][i]) as f64 / total).collect();
    let (n0, n1) = ((n_record / 2).max(1) as f64, (n_record - n_record / 2).max(1) as f64);
    hist.drift =
        0.5 * (0..bin_count).map(|i| (halves[0][i] as f64 / n0 - halves[1][i] as f64 / n1).abs()).sum::<f64>();
    hist
}

/// `Σ_bins w(θ) Σ_q p_q log‖g_q v(θ)‖`: the Furstenberg integral of the
/// histogram against the exact one-step distribution of cell matrices.
pub fn pairing_estimate(model: &ModelConfig, hist: &DirectionHistogram) -> f64 {
    let cells = CellMatrices::for_model(model, hist.lambda);
    let terms: Vec<f64> = (0..hist.bin_count)
        .map(|i| {
            if hist.weights[i] == 0.0 {
                return 0.0;
            }
            let t = hist.bin_center(i);
            let v = [t.cos(), t.sin()];
            let expected: f64 = model
                .mu
                .support()
                .map(|a| {
                    let w = cells.get(a.value).apply(v);
                    a.probability * w[0].hypot(w[1]).ln()
                })
                .sum();
            hist.weights[i] * expected
        })
        .collect();
    pairwise_sum(&terms)
}

/// Pairing estimates from `n_replicas` independent chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FurstenbergEstimate {
    pub lambda: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n_replicas: usize,
    /// Largest half-window drift over the replicas.
    pub max_drift: f64,
}

pub fn furstenberg_estimate(
    model: &ModelConfig,
    lambda: f64,
    burn_in: usize,
    n_record: usize,
    bin_count: usize,
    n_replicas: usize,
    master_seed: u64,
) -> FurstenbergEstimate {
    let results: Vec<(f64, f64)> = (0..n_replicas as u64)
        .into_par_iter()
        .map(|r| {
            let h = invariant_measure_chain(model, lambda, burn_in, n_record, bin_count, master_seed, r);
            (pairing_estimate(model, &h), h.drift)
        })
        .collect();
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (mean, std_error) = mean_and_std_error(&values);
    let max_drift = results.iter().map(|r| r.1).fold(0.0, f64::max);
    FurstenbergEstimate { lambda, mean, std_error, n_replicas, max_drift }
}

/// `log E‖U_λ(n)x‖^{−δ}` with `x = (0, 1)`, averaged in the log domain.
pub fn log_negative_moment(
    model: &ModelConfig,
    lambda: f64,
    delta: f64,
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> f64 {
    assert!(delta > 0.0 && n_samples >= 1);
    if n_steps == 0 {
        return 0.0;
    }
    let logs = sample_log_norms(model, lambda, n_steps, n_samples, master_seed);
    let exponents: Vec<f64> = logs.iter().map(|l| -delta * l.0).collect();
    log_mean_exp(&exponents)
}

/// `E‖U_λ(n)x‖^{−δ}` with `x = (0, 1)`.
pub fn negative_moment(
    model: &ModelConfig,
    lambda: f64,
    delta: f64,
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> f64 {
    log_negative_moment(model, lambda, delta, n_steps, n_samples, master_seed).exp()
}

fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    max + (pairwise_sum(&shifted) / values.len() as f64).ln()
}

/// `(log‖U x‖, log|⟨U x, (1, 0)⟩|)` per sample, `x = (0, 1)`.
fn sample_log_norms(
    model: &ModelConfig,
    lambda: f64,
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> Vec<(f64, f64)> {
    let cells = CellMatrices::for_model(model, lambda);
    (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let config = sample_couplings(model, n_steps, master_seed, s);
            let r = product_with_cells(&cells, &config, n_steps, DIRICHLET, |_, _| {});
            (r.log_norm, r.log_norm + r.direction[0].abs().ln())
        })
        .collect()
}

/// Fraction of samples with `|⟨U_λ(n)x, y⟩| ≥ e^{(γ̂−ε)n}`, `x = (0, 1)`,
/// `y = (1, 0)`, `ε = γ̂/2`, where `γ̂` comes from an independent estimate at
/// the same length.
pub fn matrix_element_growth(
    model: &ModelConfig,
    lambda: f64,
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> f64 {
    let prior = estimate_lyapunov(model, lambda, n_steps, n_samples, derive_seed(master_seed, u64::MAX));
    matrix_element_growth_with_rate(model, lambda, n_steps, n_samples, master_seed, prior.mean)
}

/// As [`matrix_element_growth`] with a given `γ̂`.
pub fn matrix_element_growth_with_rate(
    model: &ModelConfig,
    lambda: f64,
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
    gamma_hat: f64,
) -> f64 {
    let threshold = 0.5 * gamma_hat * n_steps as f64;
    let logs = sample_log_norms(model, lambda, n_steps, n_samples, master_seed);
    logs.iter().filter(|l| l.1 >= threshold).count() as f64 / n_samples as f64
}

/// Least-squares fit of `log|Δγ| = log C + α log|Δλ|` over all pairs of a
/// profile; returns `(C, α)`. A diagnostic only.
pub fn holder_fit(profile: &[LyapunovEstimate]) -> Option<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, p) in profile.iter().enumerate() {
        for q in &profile[i + 1..] {
            let dg = (p.mean - q.mean).abs();
            let dl = (p.lambda - q.lambda).abs();
            if dg > 0.0 && dl > 0.0 {
                xs.push(dl.ln());
                ys.push(dg.ln());
            }
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let alpha = sxy / sxx;
    Some(((my - alpha * mx).exp(), alpha))
}
