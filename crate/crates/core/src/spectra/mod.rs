//! Finite Dirichlet boxes `[-L/2, L/2]`: eigenvalue counting, density of
//! states, Green's functions and localization diagnostics.

mod counting;
mod diagnostics;
mod green;
mod thouless;

pub use counting::{box_eigenvalues, box_spectrum, eigenvalue_count, ids_estimate, BoxSpectrum, IDSTable};
pub use diagnostics::{
    eigenfunction_decay, good_box_bound, good_box_probability, is_good_box_length, wegner_probability, window_radius,
    GoodBoxBound, GOOD_BOX_STEP, MATCH_TOL,
};
pub use green::{green_function, BoxSolutions, GreenKernel, Scaled, PROXIMITY_TOL};
pub use thouless::{thouless_check, thouless_integral, FitWindow, ThoulessFit, ThoulessRow};

use crate::model::{Configuration, ModelConfig, Piece, PiecewisePotential};
use crate::transfer::propagate_counting;
use crate::{Error, Result};

/// The potential of one sample restricted to `[-L/2, L/2]`, as a list of
/// constant pieces in absolute coordinates. Cell `n` occupies
/// `[n - 1/2, n + 1/2]`; for even `L` the two outermost cells are cut in half.
#[derive(Debug, Clone)]
pub struct DirichletBox {
    length: u32,
    pieces: Vec<Piece>,
}

impl DirichletBox {
    pub fn new(model: &ModelConfig, config: &Configuration, length: u32) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidInput("box length must be a positive integer".into()));
        }
        let (n_first, n_last) = Self::cell_range(length);
        if !config.covers(n_first, n_last) {
            return Err(Error::InvalidInput(format!(
                "configuration covers cells {}..={}, box of length {length} needs {n_first}..={n_last}",
                config.first_index(),
                config.last_index()
            )));
        }
        let half = length as f64 / 2.0;
        let mut cache: Vec<(f64, PiecewisePotential)> = Vec::new();
        let mut pieces = Vec::new();
        for n in n_first..=n_last {
            let q = config.coupling(n);
            if !cache.iter().any(|(v, _)| *v == q) {
                cache.push((q, model.cell_potential(q)));
            }
            let cell = &cache.iter().find(|(v, _)| *v == q).unwrap().1;
            for p in cell.pieces() {
                let lo = (p.start + n as f64).max(-half);
                let hi = (p.start + p.width + n as f64).min(half);
                if hi > lo {
                    pieces.push(Piece { start: lo, width: hi - lo, value: p.value });
                }
            }
        }
        Ok(Self { length, pieces })
    }

    /// Indices of the cells meeting the open box, `-L/2 - 1/2 < n < L/2 + 1/2`.
    pub fn cell_range(length: u32) -> (i64, i64) {
        let h = (length / 2) as i64;
        (-h, h)
    }

    pub fn length(&self) -> u32 {
        self.length
    }

    pub fn left(&self) -> f64 {
        -(self.length as f64) / 2.0
    }

    pub fn right(&self) -> f64 {
        self.length as f64 / 2.0
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Index of the piece containing `x` (the last piece for `x = L/2`).
    pub(crate) fn piece_index(&self, x: f64) -> usize {
        self.pieces.partition_point(|p| p.start <= x).clamp(1, self.pieces.len()) - 1
    }

    pub fn potential_at(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].value
    }

    /// Number of Dirichlet eigenvalues `≤ λ`: the zeros in `(-L/2, L/2]` of
    /// the solution with data `(0, 1)` at `-L/2`.
    pub fn count(&self, lambda: f64) -> u64 {
        let mut v = [0.0, 1.0];
        let mut zeros = 0;
        for p in &self.pieces {
            let (z, next) = propagate_counting(p.value, p.width, lambda, v);
            zeros += z;
            let r = next[0].hypot(next[1]);
            v = [next[0] / r, next[1] / r];
        }
        zeros
    }

    /// Eigenvalues in `(lo, hi]`, each bracketed to width `tol`.
    pub fn eigenvalues(&self, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if hi > lo {
            let (clo, chi) = (self.count(lo), self.count(hi));
            self.split(lo, clo, hi, chi, tol, &mut out);
        }
        out
    }

    fn split(&self, lo: f64, clo: u64, hi: f64, chi: u64, tol: f64, out: &mut Vec<f64>) {
        if chi <= clo {
            return;
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            out.extend(std::iter::repeat(mid).take((chi - clo) as usize));
            return;
        }
        if chi - clo == 1 {
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if self.count(m) > clo {
                    b = m;
                } else {
                    a = m;
                }
            }
            out.push(0.5 * (a + b));
            return;
        }
        let cmid = self.count(mid);
        self.split(lo, clo, mid, cmid, tol, out);
        self.split(mid, cmid, hi, chi, tol, out);
    }
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {value}")))
    }
}
