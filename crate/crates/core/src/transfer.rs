//! Exact transfer matrices of step potentials and renormalized random products.
//!
//! A matrix maps Cauchy data `(u, u')` at the left end of an interval to the
//! data at the right end. Its first column is the solution with `(u, u') =
//! (1, 0)` at the left end, the second the solution with `(0, 1)`.

use num_complex::Complex64;

use crate::model::{Configuration, ModelConfig, PiecewisePotential};

/// Below this value of `|κ w|` the propagator entries use their Taylor series.
const SERIES_CUTOFF: f64 = 1e-4;

/// Real 2×2 matrix, row-major `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl TransferMatrix {
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// `self · rhs`.
    #[inline]
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Inverse; assumes a nonzero determinant.
    pub fn inverse(&self) -> Self {
        let det = self.det();
        Self { a: self.d / det, b: -self.b / det, c: -self.c / det, d: self.a / det }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    /// Spectral norm (largest singular value).
    pub fn norm(&self) -> f64 {
        let s = self.frobenius_sq();
        let det = self.det();
        let disc = (s * s - 4.0 * det * det).max(0.0);
        (0.5 * (s + disc.sqrt())).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { a: self.a - other.a, b: self.b - other.b, c: self.c - other.c, d: self.d - other.d }
    }

    pub fn to_rows(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }
}

/// Complex 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexTransferMatrix {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl ComplexTransferMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { a: one, b: zero, c: zero, d: one }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Real part of every entry.
    pub fn re(&self) -> TransferMatrix {
        TransferMatrix::new(self.a.re, self.b.re, self.c.re, self.d.re)
    }
}

/// `(cosh κw, sinh(κw)/κ, κ sinh κw)` with `s = κ²`; all three are entire in `s`.
fn hyperbolic_entries(s: Complex64, w: f64) -> (Complex64, Complex64, Complex64) {
    let x = s * (w * w);
    if x.norm() < SERIES_CUTOFF * SERIES_CUTOFF {
        let ch = 1.0 + x / 2.0 + x * x / 24.0;
        let shc = w * (1.0 + x / 6.0 + x * x / 120.0);
        return (ch, shc, s * shc);
    }
    let kappa = s.sqrt();
    let kw = kappa * w;
    let sh = kw.sinh();
    (kw.cosh(), sh / kappa, kappa * sh)
}

/// Propagator across one constant piece at complex energy.
pub fn piece_transfer(value: f64, width: f64, z: Complex64) -> ComplexTransferMatrix {
    let s = Complex64::new(value, 0.0) - z;
    let (ch, shc, ksh) = hyperbolic_entries(s, width);
    ComplexTransferMatrix { a: ch, b: shc, c: ksh, d: ch }
}

/// Propagator across one constant piece at real energy.
#[inline]
pub fn piece_transfer_real(value: f64, width: f64, lambda: f64) -> TransferMatrix {
    let s = value - lambda;
    let x = s * width * width;
    if x.abs() < SERIES_CUTOFF * SERIES_CUTOFF {
        let ch = 1.0 + x / 2.0 + x * x / 24.0;
        let shc = width * (1.0 + x / 6.0 + x * x / 120.0);
        return TransferMatrix::new(ch, shc, s * shc, ch);
    }
    if s > 0.0 {
        let k = s.sqrt();
        let (sh, ch) = ((k * width).sinh(), (k * width).cosh());
        TransferMatrix::new(ch, sh / k, k * sh, ch)
    } else {
        let k = (-s).sqrt();
        let (sn, cs) = (k * width).sin_cos();
        TransferMatrix::new(cs, sn / k, -k * sn, cs)
    }
}

/// Transfer matrix across the whole support of `potential` at complex `z`.
pub fn cell_transfer(potential: &PiecewisePotential, z: Complex64) -> ComplexTransferMatrix {
    potential
        .pieces()
        .fold(ComplexTransferMatrix::identity(), |acc, p| piece_transfer(p.value, p.width, z).mul(&acc))
}

/// Transfer matrix across the whole support of `potential` at real `λ`.
pub fn cell_transfer_real(potential: &PiecewisePotential, lambda: f64) -> TransferMatrix {
    potential
        .pieces()
        .fold(TransferMatrix::IDENTITY, |acc, p| piece_transfer_real(p.value, p.width, lambda).mul(&acc))
}

/// Cell matrices `g_λ(q)` keyed by coupling value. Bernoulli-type models have
/// only a handful of distinct couplings, so a linear scan is enough.
#[derive(Debug, Clone)]
pub struct CellMatrices {
    entries: Vec<(f64, TransferMatrix)>,
}

impl CellMatrices {
    /// Precomputes the matrices for every atom of the coupling distribution.
    pub fn for_model(model: &ModelConfig, lambda: f64) -> Self {
        let entries = model
            .mu
            .atoms()
            .iter()
            .map(|atom| (atom.value, cell_transfer_real(&model.cell_potential(atom.value), lambda)))
            .collect();
        Self { entries }
    }

    /// Matrix for coupling `q`; `q` must be an atom of the model.
    #[inline]
    pub fn get(&self, q: f64) -> &TransferMatrix {
        self.entries
            .iter()
            .find(|(v, _)| *v == q)
            .map(|(_, m)| m)
            .expect("coupling value is not an atom of the model")
    }

    pub fn entries(&self) -> &[(f64, TransferMatrix)] {
        &self.entries
    }
}

/// Outcome of a renormalized product `U_λ(n) x₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductResult {
    /// `log ‖U_λ(n) x₀‖` for unit `x₀`.
    pub log_norm: f64,
    /// `U_λ(n) x₀ / ‖U_λ(n) x₀‖`.
    pub direction: [f64; 2],
    /// The last cell matrix applied (identity for an empty product).
    pub renorm_matrix: TransferMatrix,
}

/// Default initial vector: Dirichlet data `(u, u') = (0, 1)`.
pub const DIRICHLET: [f64; 2] = [0.0, 1.0];

/// `U_λ(n) x₀` over cells `1..=n_steps` with `x₀ = (0, 1)`.
pub fn random_product(model: &ModelConfig, config: &Configuration, lambda: f64, n_steps: usize) -> ProductResult {
    random_product_from(model, config, lambda, n_steps, DIRICHLET)
}

/// `U_λ(n) x₀` over cells `1..=n_steps` for an arbitrary nonzero `x₀`.
pub fn random_product_from(
    model: &ModelConfig,
    config: &Configuration,
    lambda: f64,
    n_steps: usize,
    x0: [f64; 2],
) -> ProductResult {
    let cells = CellMatrices::for_model(model, lambda);
    product_with_cells(&cells, config, n_steps, x0, |_, _| {})
}

/// Renormalized product with a callback receiving `(n, log_norm)` after each
/// cell. `x₀` is normalized first.
pub fn product_with_cells(
    cells: &CellMatrices,
    config: &Configuration,
    n_steps: usize,
    x0: [f64; 2],
    mut observe: impl FnMut(usize, f64),
) -> ProductResult {
    if n_steps > 0 {
        assert!(config.covers(1, n_steps as i64), "configuration does not cover cells 1..={n_steps}");
    }
    let r0 = x0[0].hypot(x0[1]);
    let mut v = [x0[0] / r0, x0[1] / r0];
    let mut log_norm = 0.0;
    let mut last = TransferMatrix::IDENTITY;
    for n in 1..=n_steps {
        let g = cells.get(config.coupling(n as i64));
        let w = g.apply(v);
        let r = w[0].hypot(w[1]);
        v = [w[0] / r, w[1] / r];
        log_norm += r.ln();
        last = *g;
        observe(n, log_norm);
    }
    ProductResult { log_norm, direction: v, renorm_matrix: last }
}

/// Propagates `state = (u, u')` across one constant piece and counts the
/// zeros of `u` in `(0, width]` of the piece. A zero sitting exactly at the
/// start of the piece is not counted.
pub fn propagate_counting(value: f64, width: f64, lambda: f64, state: [f64; 2]) -> (u64, [f64; 2]) {
    let next = piece_transfer_real(value, width, lambda).apply(state);
    let s = value - lambda;
    if s < 0.0 && s * width * width < -(SERIES_CUTOFF * SERIES_CUTOFF) {
        let k = (-s).sqrt();
        let beta = (k * state[0]).atan2(state[1]);
        let zeros = ((beta + k * width) / std::f64::consts::PI).floor() - (beta / std::f64::consts::PI).floor();
        return (zeros.max(0.0) as u64, next);
    }
    let crossed = state[0] != 0.0 && (next[0] == 0.0 || (next[0] > 0.0) != (state[0] > 0.0));
    (crossed as u64, next)
}

/// Zeros in `(start, end]` of the solution starting from `state` at the left
/// end of `potential`; returns the count and the normalized end data.
pub fn count_zeros(potential: &PiecewisePotential, lambda: f64, state: [f64; 2]) -> (u64, [f64; 2]) {
    let mut v = state;
    let mut zeros = 0;
    for p in potential.pieces() {
        let (z, next) = propagate_counting(p.value, p.width, lambda, v);
        zeros += z;
        let r = next[0].hypot(next[1]);
        v = [next[0] / r, next[1] / r];
    }
    (zeros, v)
}

/// `exp ∫ |V(t) − λ + 1| dt`: bound on the growth of `|u|² + |u'|²` across the
/// support of `potential` for any solution at energy `λ`.
pub fn growth_bound(potential: &PiecewisePotential, lambda: f64) -> f64 {
    growth_exponent(potential, lambda).exp()
}

/// Logarithm of [`growth_bound`].
pub fn growth_exponent(potential: &PiecewisePotential, lambda: f64) -> f64 {
    potential.integral_abs_shifted(lambda - 1.0)
}

/// Bound on `‖g_λ − g_λ'‖` across `potential` from the Gronwall estimate for
/// two solutions with equal data at the left end:
/// `|λ − λ'| · ℓ · exp(½∫|V − λ + 1| + ∫(|V − λ'| + 1))` per unit initial
/// vector, times `√2` for the operator norm.
pub fn lipschitz_bound(potential: &PiecewisePotential, lambda: f64, lambda_prime: f64) -> f64 {
    let length = potential.total_length();
    let exponent = 0.5 * potential.integral_abs_shifted(lambda - 1.0)
        + potential.integral_abs_shifted(lambda_prime)
        + length;
    std::f64::consts::SQRT_2 * (lambda - lambda_prime).abs() * length * exponent.exp()
}

/// Constants `(C₁, C₂)` with `‖g_λ(n)‖² ≤ exp(C₁ + |λ| + C₂|q_n|)` uniformly.
pub fn norm_bound_constants(model: &ModelConfig) -> (f64, f64) {
    let c1 = std::f64::consts::LN_2 + model.v_per.integral_abs() + 1.0;
    let c2 = model.f.integral_abs();
    (c1, c2)
}

/// Constant `C` in `∫_{x−1}^{x+1} |u|² ≥ C (|u(x)|² + |u'(x)|²)` given
/// `J = ∫_{x−1}^{x+1} |q + 1|`, with `q = V − λ`.
pub fn l2_lower_bound_constant(j: f64) -> f64 {
    let c3 = (0.5 * (-j).exp()).sqrt();
    let c4 = (2.0 * j.exp()).sqrt();
    let length = (c3 / (4.0 * c4)).min(2.0);
    length * c3 * c3 / 16.0
}
