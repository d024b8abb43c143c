use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DirichletBox;
use crate::lyapunov::mean_and_std_error;
use crate::model::{Configuration, ModelConfig};
use crate::{Error, Result};

/// Number of Dirichlet eigenvalues `≤ λ` of the box `[-L/2, L/2]`. At an
/// eigenvalue itself the answer may be off by one, depending on the sign of
/// the rounded endpoint value.
pub fn eigenvalue_count(model: &ModelConfig, config: &Configuration, length: u32, lambda: f64) -> Result<u64> {
    Ok(DirichletBox::new(model, config, length)?.count(lambda))
}

/// Eigenvalues in `(lo, hi]`, located by bisection on the counting function.
pub fn box_eigenvalues(
    model: &ModelConfig,
    config: &Configuration,
    length: u32,
    window: (f64, f64),
    tol: f64,
) -> Result<Vec<f64>> {
    check_window(window)?;
    Ok(DirichletBox::new(model, config, length)?.eigenvalues(window.0, window.1, tol))
}

fn check_window((lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("eigenvalue window ({lo}, {hi}) must be bounded and ordered")))
    }
}

/// Eigenvalues of one box in a window, with the counting function at the
/// window ends and just above every eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpectrum {
    pub length: u32,
    pub config: Configuration,
    pub window: (f64, f64),
    pub eigenvalues: Vec<f64>,
    pub count_below: Vec<(f64, u64)>,
}

impl BoxSpectrum {
    /// `N_L(λ)` for `λ` inside the window.
    pub fn count_at(&self, lambda: f64) -> Option<u64> {
        let (lo, hi) = self.window;
        if !(lo..=hi).contains(&lambda) {
            return None;
        }
        let base = self.count_below[0].1;
        Some(base + self.eigenvalues.iter().filter(|&&e| e <= lambda).count() as u64)
    }
}

pub fn box_spectrum(
    model: &ModelConfig,
    config: &Configuration,
    length: u32,
    window: (f64, f64),
    tol: f64,
) -> Result<BoxSpectrum> {
    check_window(window)?;
    let b = DirichletBox::new(model, config, length)?;
    let eigenvalues = b.eigenvalues(window.0, window.1, tol);
    let mut count_below = vec![(window.0, b.count(window.0))];
    count_below.extend(eigenvalues.iter().map(|&e| (e, b.count(e))));
    count_below.push((window.1, b.count(window.1)));
    Ok(BoxSpectrum { length, config: config.clone(), window, eigenvalues, count_below })
}

/// Finite-volume estimate of the integrated density of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IDSTable {
    pub lambda_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub length: u32,
    pub n_samples: usize,
    pub std_errors: Vec<f64>,
}

impl IDSTable {
    /// A table from known values, e.g. a closed-form density of states.
    pub fn exact(lambda_grid: Vec<f64>, values: Vec<f64>) -> Self {
        let std_errors = vec![0.0; values.len()];
        Self { lambda_grid, values, length: 0, n_samples: 0, std_errors }
    }
}

/// Averages `N_L(λ)/L` over `n_samples` configurations. Every grid energy
/// sees the same configurations, so the estimate is nondecreasing in `λ`.
/// Sample `s` draws from the coupling stream `(master_seed, s)`.
pub fn ids_estimate(
    model: &ModelConfig,
    lambda_grid: &[f64],
    length: u32,
    n_samples: usize,
    master_seed: u64,
) -> Result<IDSTable> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be positive".into()));
    }
    let (n_first, n_last) = DirichletBox::cell_range(length);
    let scale = 1.0 / length.max(1) as f64;
    let per_sample: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let config = model.sample_configuration(n_first, n_last, master_seed, s);
            let b = DirichletBox::new(model, &config, length)?;
            Ok(lambda_grid.iter().map(|&l| b.count(l) as f64 * scale).collect())
        })
        .collect::<Result<_>>()?;
    let (values, std_errors) = (0..lambda_grid.len())
        .map(|j| {
            let column: Vec<f64> = per_sample.iter().map(|row| row[j]).collect();
            mean_and_std_error(&column)
        })
        .unzip();
    Ok(IDSTable { lambda_grid: lambda_grid.to_vec(), values, length, n_samples, std_errors })
}
