//! The random operator family `-d²/dx² + V_per + Σ q_n f(x - n)`.
//!
//! Potentials are step functions on the unit cell `[-1/2, 1/2]`. Sites with
//! genuinely singular profiles (delta spikes, unbounded L¹ functions) have to
//! be supplied as step approximations; that approximation error is not
//! tracked here.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CouplingStream;

/// Breakpoints closer than this are treated as coincident when grids merge.
pub const BREAKPOINT_TOL: f64 = 1e-12;
/// Tolerance on probability sums and declared interval lengths.
pub const SUM_TOL: f64 = 1e-12;

pub const CELL_START: f64 = -0.5;
pub const CELL_END: f64 = 0.5;

/// Step function: `values[k]` on the k-th subinterval of lengths `widths`
/// laid out from `x_start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePotential {
    x_start: f64,
    widths: Vec<f64>,
    values: Vec<f64>,
}

/// One constant piece of a [`PiecewisePotential`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub width: f64,
    pub value: f64,
}

impl PiecewisePotential {
    pub fn new(x_start: f64, widths: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(invalid("widths", "at least one subinterval is required"));
        }
        if widths.len() != values.len() {
            return Err(invalid(
                "values",
                format!("expected {} values, found {}", widths.len(), values.len()),
            ));
        }
        for (i, w) in widths.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(invalid(format!("widths[{i}]"), "width must be positive and finite"));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(invalid(format!("values[{i}]"), "value must be finite"));
            }
        }
        if !x_start.is_finite() {
            return Err(invalid("x_start", "must be finite"));
        }
        Ok(Self { x_start, widths, values })
    }

    /// A step potential on the unit cell `[-1/2, 1/2]`.
    pub fn cell(widths: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = Self::new(CELL_START, widths, values)?;
        let total = p.total_length();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid("widths", format!("widths sum to {total}, expected 1")));
        }
        Ok(p)
    }

    /// Constant `value` on the unit cell.
    pub fn constant_cell(value: f64) -> Self {
        Self { x_start: CELL_START, widths: vec![1.0], values: vec![value] }
    }

    /// Steps given by breakpoints inside the cell: `values[k]` on
    /// `[breaks[k-1], breaks[k])` with `breaks[-1] = -1/2`, `breaks[n] = 1/2`.
    pub fn cell_from_breakpoints(breaks: &[f64], values: &[f64]) -> Result<Self> {
        let mut edges = Vec::with_capacity(breaks.len() + 2);
        edges.push(CELL_START);
        edges.extend_from_slice(breaks);
        edges.push(CELL_END);
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Self::cell(widths, values.to_vec())
    }

    pub fn x_start(&self) -> f64 {
        self.x_start
    }

    pub fn x_end(&self) -> f64 {
        self.x_start + self.total_length()
    }

    pub fn total_length(&self) -> f64 {
        self.widths.iter().sum()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pieces(&self) -> impl Iterator<Item = Piece> + '_ {
        let mut start = self.x_start;
        self.widths.iter().zip(&self.values).map(move |(&width, &value)| {
            let p = Piece { start, width, value };
            start += width;
            p
        })
    }

    /// Interior breakpoints followed by the right endpoint.
    fn right_edges(&self) -> Vec<f64> {
        let mut acc = self.x_start;
        self.widths
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }

    /// Value at `x`; the right-continuous convention is used at breakpoints and
    /// points outside the support read as zero.
    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.x_start {
            return 0.0;
        }
        for (edge, v) in self.right_edges().into_iter().zip(&self.values) {
            if x < edge {
                return *v;
            }
        }
        if (x - self.x_end()).abs() <= BREAKPOINT_TOL {
            return *self.values.last().unwrap();
        }
        0.0
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// `∫ |V|` over the support.
    pub fn integral_abs(&self) -> f64 {
        self.widths.iter().zip(&self.values).map(|(w, v)| w * v.abs()).sum()
    }

    /// `∫ |V - shift|` over the support.
    pub fn integral_abs_shifted(&self, shift: f64) -> f64 {
        self.widths.iter().zip(&self.values).map(|(w, v)| w * (v - shift).abs()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x_start: self.x_start,
            widths: self.widths.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pointwise `self + scale * other` on the merged grid. Both potentials must
    /// describe the same interval.
    pub fn add_scaled(&self, other: &PiecewisePotential, scale: f64) -> Self {
        debug_assert!((self.x_start - other.x_start).abs() <= BREAKPOINT_TOL);
        let mut edges: Vec<f64> = self.right_edges();
        edges.extend(other.right_edges());
        edges.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(edges.len());
        for e in edges {
            match merged.last() {
                Some(&last) if (e - last).abs() <= BREAKPOINT_TOL => {}
                _ => merged.push(e),
            }
        }
        let end = self.x_end().max(other.x_end());
        if let Some(last) = merged.last_mut() {
            *last = end;
        }

        let mut widths = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        let mut left = self.x_start;
        for right in merged {
            let mid = 0.5 * (left + right);
            widths.push(right - left);
            values.push(self.value_at(mid) + scale * other.value_at(mid));
            left = right;
        }
        Self { x_start: self.x_start, widths, values }
    }

    /// Drops breakpoints between equal neighbouring values.
    pub fn simplified(&self) -> Self {
        let mut widths: Vec<f64> = Vec::with_capacity(self.widths.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.values.len());
        for (&w, &v) in self.widths.iter().zip(&self.values) {
            match values.last() {
                Some(&last) if last == v => *widths.last_mut().unwrap() += w,
                _ => {
                    widths.push(w);
                    values.push(v);
                }
            }
        }
        Self { x_start: self.x_start, widths, values }
    }

    fn covers_cell(&self) -> bool {
        (self.x_start - CELL_START).abs() <= SUM_TOL && (self.x_end() - CELL_END).abs() <= SUM_TOL
    }
}

/// A single atom of the coupling distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub probability: f64,
}

/// Finitely supported distribution of the coupling constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDistribution {
    atoms: Vec<Atom>,
}

impl CouplingDistribution {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("atoms", "at least one atom is required"));
        }
        for (i, (v, p)) in atoms.iter().enumerate() {
            if !v.is_finite() {
                return Err(invalid(format!("atoms[{i}][0]"), "value must be finite"));
            }
            if !(p.is_finite() && *p >= 0.0) {
                return Err(invalid(format!("atoms[{i}][1]"), "probability must be non-negative"));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid("atoms", format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self {
            atoms: atoms.into_iter().map(|(value, probability)| Atom { value, probability }).collect(),
        })
    }

    /// Point mass at `value`.
    pub fn dirac(value: f64) -> Self {
        Self { atoms: vec![Atom { value, probability: 1.0 }] }
    }

    /// Two-point distribution `P(q = 0) = 1 - p`, `P(q = 1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(vec![(0.0, 1.0 - p), (1.0, p)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Atoms with positive probability.
    pub fn support(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.probability > 0.0)
    }

    pub fn support_min(&self) -> f64 {
        self.support().map(|a| a.value).fold(f64::INFINITY, f64::min)
    }

    pub fn support_max(&self) -> f64 {
        self.support().map(|a| a.value).fold(f64::NEG_INFINITY, f64::max)
    }

    /// True iff at least two distinct values carry positive probability.
    pub fn is_nontrivial(&self) -> bool {
        self.support_max() > self.support_min()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.probability).sum()
    }

    /// Inverse-CDF lookup of a uniform draw `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut cumulative = 0.0;
        for a in &self.atoms {
            cumulative += a.probability;
            if a.probability > 0.0 && u < cumulative {
                return a.value;
            }
        }
        // rounding left a sliver above the last cumulative sum
        self.support().last().map(|a| a.value).unwrap_or(self.atoms[0].value)
    }

    fn mapped(&self, map: impl Fn(f64) -> f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { value: map(a.value), probability: a.probability })
                .collect(),
        }
    }
}

/// Background, single site and coupling law of the random operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub v_per: PiecewisePotential,
    pub f: PiecewisePotential,
    pub mu: CouplingDistribution,
    /// Coupling support spans exactly `[0, 1]`, so that `g_0` is the background
    /// cell and `g_1` the fully perturbed one.
    pub normalized: bool,
}

impl ModelConfig {
    /// Validated model. Rejects a single-site potential that vanishes
    /// identically.
    pub fn new(v_per: PiecewisePotential, f: PiecewisePotential, mu: CouplingDistribution) -> Result<Self> {
        if f.is_zero() {
            return Err(invalid("f.values", "single-site potential must not vanish identically"));
        }
        Self::new_unchecked_site(v_per, f, mu)
    }

    /// Like [`ModelConfig::new`] but accepts `f ≡ 0`, which is useful as a
    /// trivial-scattering reference.
    pub fn new_unchecked_site(
        v_per: PiecewisePotential,
        f: PiecewisePotential,
        mu: CouplingDistribution,
    ) -> Result<Self> {
        if !v_per.covers_cell() {
            return Err(invalid("v_per.widths", "background must describe exactly [-1/2, 1/2]"));
        }
        if !f.covers_cell() {
            return Err(invalid("f.widths", "single site must describe exactly [-1/2, 1/2]"));
        }
        let normalized = spans_unit_interval(&mu);
        Ok(Self { v_per, f, mu, normalized })
    }

    /// Rescales the family so the coupling support spans `[0, 1]`:
    /// `V_per ← V_per + a f`, `f ← (b - a) f`, `q ↦ (q - a)/(b - a)` with `a`, `b`
    /// the extreme support points. Idempotent.
    pub fn normalize_support(&self) -> Result<Self> {
        if !self.mu.is_nontrivial() {
            return Err(Error::SingleAtomDistribution);
        }
        if spans_unit_interval(&self.mu) {
            return Ok(Self { normalized: true, ..self.clone() });
        }
        let a = self.mu.support_min();
        let b = self.mu.support_max();
        let span = b - a;
        Ok(Self {
            v_per: self.v_per.add_scaled(&self.f, a),
            f: self.f.scaled(span),
            mu: self.mu.mapped(|q| (q - a) / span),
            normalized: true,
        })
    }

    /// `V_per + q f` on the unit cell.
    pub fn cell_potential(&self, q: f64) -> PiecewisePotential {
        if q == 0.0 {
            return self.v_per.clone();
        }
        self.v_per.add_scaled(&self.f, q)
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized)
        }
    }

    /// Draws the couplings `q_n`, `n_first ≤ n ≤ n_last`. The value at `n`
    /// depends only on `(master_seed, sample_index, n)`.
    pub fn sample_configuration(
        &self,
        n_first: i64,
        n_last: i64,
        master_seed: u64,
        sample_index: u64,
    ) -> Configuration {
        assert!(n_first <= n_last, "empty index window {n_first}..={n_last}");
        let mut stream = CouplingStream::new(master_seed, sample_index, n_first);
        let couplings = (n_first..=n_last).map(|_| self.mu.quantile(stream.next_uniform())).collect();
        Configuration { couplings, index_offset: n_first, seed_record: master_seed, sample_index }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidModel { path: "$".into(), message: e.to_string() })?;
        raw.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            v_per: StepFile { widths: self.v_per.widths.clone(), values: self.v_per.values.clone() },
            f: StepFile { widths: self.f.widths.clone(), values: self.f.values.clone() },
            mu: MuFile { atoms: self.mu.atoms.iter().map(|a| [a.value, a.probability]).collect() },
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }
}

fn spans_unit_interval(mu: &CouplingDistribution) -> bool {
    mu.support_min() == 0.0 && mu.support_max() == 1.0
}

/// Couplings of one sample over an index window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub couplings: Vec<f64>,
    /// Lattice index of `couplings[0]`.
    pub index_offset: i64,
    pub seed_record: u64,
    pub sample_index: u64,
}

impl Configuration {
    /// Hand-built configuration (seed recorded as zero).
    pub fn from_couplings(couplings: Vec<f64>, index_offset: i64) -> Self {
        Self { couplings, index_offset, seed_record: 0, sample_index: 0 }
    }

    pub fn first_index(&self) -> i64 {
        self.index_offset
    }

    pub fn last_index(&self) -> i64 {
        self.index_offset + self.couplings.len() as i64 - 1
    }

    pub fn covers(&self, n_first: i64, n_last: i64) -> bool {
        n_first >= self.first_index() && n_last <= self.last_index()
    }

    /// Coupling at lattice index `n`. Panics outside the window.
    #[inline]
    pub fn coupling(&self, n: i64) -> f64 {
        self.couplings[(n - self.index_offset) as usize]
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    v_per: StepFile,
    f: StepFile,
    mu: MuFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepFile {
    widths: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MuFile {
    atoms: Vec<[f64; 2]>,
}

impl ModelFile {
    fn validate(self) -> Result<ModelConfig> {
        let v_per = PiecewisePotential::cell(self.v_per.widths, self.v_per.values).map_err(|e| prefix("v_per", e))?;
        let f = PiecewisePotential::cell(self.f.widths, self.f.values).map_err(|e| prefix("f", e))?;
        let mu = CouplingDistribution::new(self.mu.atoms.into_iter().map(|[v, p]| (v, p)).collect())
            .map_err(|e| prefix("mu", e))?;
        ModelConfig::new(v_per, f, mu)
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::InvalidModel { path: path.into(), message: message.into() }
}

fn prefix(root: &str, e: Error) -> Error {
    match e {
        Error::InvalidModel { path, message } => Error::InvalidModel { path: format!("{root}.{path}"), message },
        other => other,
    }
}

/// Reference models used throughout the tests and the self-test.
pub mod presets {
    use super::*;

    /// `V_per = 0`, `f = χ_[-1/2,1/2]`, Bernoulli(1/2) couplings on `{0, 1}`.
    pub fn square_well() -> ModelConfig {
        ModelConfig::new(
            PiecewisePotential::constant_cell(0.0),
            PiecewisePotential::constant_cell(1.0),
            CouplingDistribution::bernoulli(0.5).unwrap(),
        )
        .unwrap()
    }

    /// Kronig–Penney background: height 10 on `[-1/4, 1/4]`.
    pub fn kronig_penney_background() -> PiecewisePotential {
        PiecewisePotential::cell_from_breakpoints(&[-0.25, 0.25], &[0.0, 10.0, 0.0]).unwrap()
    }

    /// Kronig–Penney background with the square-well site and Bernoulli(1/2)
    /// couplings.
    pub fn kronig_penney_square_well() -> ModelConfig {
        ModelConfig::new(
            kronig_penney_background(),
            PiecewisePotential::constant_cell(1.0),
            CouplingDistribution::bernoulli(0.5).unwrap(),
        )
        .unwrap()
    }

    /// Free background, unit site, all couplings zero.
    pub fn free() -> ModelConfig {
        ModelConfig::new(
            PiecewisePotential::constant_cell(0.0),
            PiecewisePotential::constant_cell(1.0),
            CouplingDistribution::dirac(0.0),
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chi() -> PiecewisePotential {
        PiecewisePotential::constant_cell(1.0)
    }

    #[test]
    fn normalize_already_normalized_is_identity() {
        let m = presets::square_well();
        let n = m.normalize_support().unwrap();
        assert_eq!(n.v_per, m.v_per);
        assert_eq!(n.f, m.f);
        assert_eq!(n.mu, m.mu);
        assert!(n.normalized);
    }

    #[test]
    fn normalize_two_five() {
        let mu = CouplingDistribution::new(vec![(2.0, 0.5), (5.0, 0.5)]).unwrap();
        let m = ModelConfig::new(PiecewisePotential::constant_cell(0.0), chi(), mu).unwrap();
        assert!(!m.normalized);
        let n = m.normalize_support().unwrap();
        assert!(n.normalized);
        assert_eq!(n.v_per.simplified().values(), &[2.0]);
        assert_eq!(n.f.values(), &[3.0]);
        let vals: Vec<f64> = n.mu.atoms().iter().map(|a| a.value).collect();
        assert_eq!(vals, vec![0.0, 1.0]);
    }

    #[test]
    fn normalize_single_atom_fails() {
        let m = ModelConfig::new(PiecewisePotential::constant_cell(0.0), chi(), CouplingDistribution::dirac(0.3))
            .unwrap();
        assert_eq!(m.normalize_support(), Err(Error::SingleAtomDistribution));
    }

    #[test]
    fn normalize_ignores_zero_probability_atoms() {
        let mu = CouplingDistribution::new(vec![(0.3, 1.0), (7.0, 0.0)]).unwrap();
        let m = ModelConfig::new(PiecewisePotential::constant_cell(0.0), chi(), mu).unwrap();
        assert_eq!(m.normalize_support(), Err(Error::SingleAtomDistribution));
    }

    #[test]
    fn cell_potential_examples() {
        let m = presets::square_well();
        assert_eq!(m.cell_potential(0.0), m.v_per);
        let xi = 2.75;
        let p = m.cell_potential(xi);
        assert_eq!(p.values(), &[xi]);

        let v = PiecewisePotential::cell_from_breakpoints(&[0.0], &[-1.0, 1.0]).unwrap();
        let m = ModelConfig::new(v, chi(), CouplingDistribution::bernoulli(0.5).unwrap()).unwrap();
        let p = m.cell_potential(2.0);
        assert_eq!(p.values(), &[1.0, 3.0]);
        assert_eq!(p.widths(), &[0.5, 0.5]);
    }

    #[test]
    fn merge_unions_breakpoints() {
        let a = PiecewisePotential::cell_from_breakpoints(&[-0.25, 0.25], &[0.0, 10.0, 0.0]).unwrap();
        let b = PiecewisePotential::cell_from_breakpoints(&[0.0], &[1.0, 2.0]).unwrap();
        let c = a.add_scaled(&b, 1.0);
        assert_eq!(c.values(), &[1.0, 11.0, 12.0, 2.0]);
        assert!((c.total_length() - 1.0).abs() < 1e-15);
        // coincident breakpoints within tolerance collapse
        let d = PiecewisePotential::cell_from_breakpoints(&[1e-14], &[5.0, 6.0]).unwrap();
        assert_eq!(b.add_scaled(&d, 1.0).widths().len(), 2);
    }

    #[test]
    fn sample_degenerate_distribution() {
        let m = presets::free();
        let c = m.sample_configuration(-3, 50, 9, 0);
        assert!(c.couplings.iter().all(|q| *q == 0.0));
        assert_eq!(c.couplings.len(), 54);
    }

    #[test]
    fn sample_is_reproducible_and_partition_independent() {
        let m = presets::square_well();
        let a = m.sample_configuration(-100, 100, 77, 3);
        let b = m.sample_configuration(-100, 100, 77, 3);
        assert_eq!(a, b);
        let left = m.sample_configuration(-100, -1, 77, 3);
        let right = m.sample_configuration(0, 100, 77, 3);
        let joined: Vec<f64> = left.couplings.iter().chain(&right.couplings).copied().collect();
        assert_eq!(joined, a.couplings);
        for n in [-100, -7, 0, 55, 100] {
            assert_eq!(m.sample_configuration(n, n, 77, 3).couplings[0], a.coupling(n));
        }
    }

    #[test]
    fn bernoulli_mean_within_three_sigma() {
        // n = 1e5, p = 1/2: sigma = 0.5/sqrt(1e5) = 1.58e-3, 3 sigma = 4.74e-3
        let m = presets::square_well();
        let c = m.sample_configuration(1, 100_000, 2024, 0);
        let mean = c.couplings.iter().sum::<f64>() / c.couplings.len() as f64;
        assert!((0.494..=0.506).contains(&mean), "mean {mean}");
        assert!(c.couplings.iter().all(|q| *q == 0.0 || *q == 1.0));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let m = presets::kronig_penney_square_well();
        let back = ModelConfig::from_json_str(&m.to_json()).unwrap();
        assert_eq!(back.v_per, m.v_per);
        assert_eq!(back.mu, m.mu);

        let bad = r#"{"v_per":{"widths":[0.5,0.6],"values":[0,0]},"f":{"widths":[1],"values":[1]},"mu":{"atoms":[[0,0.5],[1,0.5]]}}"#;
        match ModelConfig::from_json_str(bad) {
            Err(Error::InvalidModel { path, .. }) => assert_eq!(path, "v_per.widths"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"v_per":{"widths":[1],"values":[0]},"f":{"widths":[1],"values":[1]},"mu":{"atoms":[[0,0.5],[1,-0.5]]}}"#;
        match ModelConfig::from_json_str(bad) {
            Err(Error::InvalidModel { path, .. }) => assert_eq!(path, "mu.atoms[1][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"v_per":{"widths":[1, -0.0],"values":[0, 1]},"f":{"widths":[1],"values":[1]},"mu":{"atoms":[[0,1]]}}"#;
        match ModelConfig::from_json_str(bad) {
            Err(Error::InvalidModel { path, .. }) => assert_eq!(path, "v_per.widths[1]"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"v_per":{"widths":[1],"values":[0]},"f":{"widths":[1],"values":[0]},"mu":{"atoms":[[0,1]]}}"#;
        match ModelConfig::from_json_str(bad) {
            Err(Error::InvalidModel { path, .. }) => assert_eq!(path, "f.values"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_cell() -> impl Strategy<Value = PiecewisePotential> {
        prop::collection::vec((0.05f64..1.0, -5.0f64..5.0), 1..5).prop_map(|pieces| {
            let total: f64 = pieces.iter().map(|p| p.0).sum();
            let mut widths: Vec<f64> = pieces.iter().map(|p| p.0 / total).collect();
            let head: f64 = widths[..widths.len() - 1].iter().sum();
            *widths.last_mut().unwrap() = 1.0 - head;
            PiecewisePotential::cell(widths, pieces.iter().map(|p| p.1).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent_and_preserves_family(
            v in arb_cell(), f in arb_cell(), a in -3.0f64..3.0, gap in 0.1f64..4.0, x in -0.4999f64..0.4999
        ) {
            prop_assume!(!f.is_zero());
            let b = a + gap;
            let mid = a + 0.3 * gap;
            let mu = CouplingDistribution::new(vec![(a, 0.3), (mid, 0.3), (b, 0.4)]).unwrap();
            let m = ModelConfig::new(v, f, mu).unwrap();
            let once = m.normalize_support().unwrap();
            let twice = once.normalize_support().unwrap();
            prop_assert_eq!(&once, &twice);
            for (orig, image) in m.mu.atoms().iter().zip(once.mu.atoms()) {
                let lhs = once.v_per.value_at(x) + image.value * once.f.value_at(x);
                let rhs = m.v_per.value_at(x) + orig.value * m.f.value_at(x);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
