//! Scattering of the single site `f` against the periodic background, the
//! conjugation of `g₁` to `g̃₀ s`, and the exceptional energy set.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::{
    band_structure, bisect, discriminant_real, floquet_data, golden_max, BandStructure, FloquetData, Region, DEFAULT_EDGE_TOL,
};
use crate::model::ModelConfig;
use crate::transfer::{cell_transfer_real, TransferMatrix};

/// Above this condition number the Floquet basis is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;
pub const DEFAULT_ROOT_TOL: f64 = 1e-8;
/// Gap eigenvectors fall back to a unit second component below this first component.
const FIRST_COMPONENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoefficients {
    pub lambda: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub region: Region,
    pub branch_id: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapCoefficients {
    pub lambda: f64,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    /// True when an eigenvector had to be normalized by its second component.
    pub second_component_normalized: bool,
}

/// `g₁(λ)`: the cell matrix with coupling one.
pub fn perturbed_cell(model: &ModelConfig, lambda: f64) -> TransferMatrix {
    cell_transfer_real(&model.cell_potential(1.0), lambda)
}

/// `(a, b)` on a band, `(a, b)ᵗ = Φ(1/2)⁻¹ g₁ v₊` with `Φ(1/2) = [ρ₊v₊, ρ₋v₋]`.
pub fn band_coefficients(model: &ModelConfig, lambda: f64, bs: &BandStructure) -> Result<ScatteringCoefficients> {
    band_coefficients_on_branch(model, lambda, bs, false)
}

/// As [`band_coefficients`], optionally on the opposite Floquet branch.
pub fn band_coefficients_on_branch(
    model: &ModelConfig,
    lambda: f64,
    bs: &BandStructure,
    swap_branch: bool,
) -> Result<ScatteringCoefficients> {
    model.require_normalized()?;
    let fd = floquet_data(model, lambda, bs)?;
    if fd.region != Region::Band {
        return Err(Error::InvalidInput(format!("energy {lambda} is not in a band")));
    }
    let fd = if swap_branch { fd.swapped() } else { fd };
    let (a, b) = coefficients_from(&fd, &perturbed_cell(model, lambda))?;
    Ok(ScatteringCoefficients { lambda, a, b, region: Region::Band, branch_id: fd.branch_id })
}

fn coefficients_from(fd: &FloquetData, g1: &TransferMatrix) -> Result<(Complex64, Complex64)> {
    let one = Complex64::new(1.0, 0.0);
    let u = [g1.a * one + g1.b * fd.c_plus, g1.c * one + g1.d * fd.c_plus];
    let phi = [[fd.rho_plus, fd.rho_minus], [fd.rho_plus * fd.c_plus, fd.rho_minus * fd.c_minus]];
    let (x, cond) = solve_complex(phi, u);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularBasis { lambda: fd.lambda, condition: cond });
    }
    Ok((x[0], x[1]))
}

/// Solves `m x = rhs`; also returns the Frobenius condition number of `m`.
fn solve_complex(m: [[Complex64; 2]; 2], rhs: [Complex64; 2]) -> ([Complex64; 2], f64) {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let frob = m.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
    let cond = frob / det.norm();
    let x0 = (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det;
    let x1 = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
    ([x0, x1], cond)
}

/// Real eigenvectors `v₁` (`|ρ₁| < 1`) and `v₂` of `g₀` in a gap, each scaled
/// to first component one (second component one when the first vanishes).
fn gap_eigenvectors(g0: &TransferMatrix) -> ([f64; 2], [f64; 2], f64, f64, bool) {
    let d = g0.trace();
    let big = 0.5 * (d + d.signum() * (d * d - 4.0).max(0.0).sqrt());
    let small = 1.0 / big;
    let mut fallback = false;
    let mut vec_for = |rho: f64| {
        let c1 = [g0.b, rho - g0.a];
        let c2 = [rho - g0.d, g0.c];
        let n1 = c1[0].hypot(c1[1]);
        let n2 = c2[0].hypot(c2[1]);
        let v = if n1 >= n2 { [c1[0] / n1, c1[1] / n1] } else { [c2[0] / n2, c2[1] / n2] };
        if v[0].abs() >= FIRST_COMPONENT_TOL {
            [1.0, v[1] / v[0]]
        } else {
            fallback = true;
            [v[0] / v[1], 1.0]
        }
    };
    let v1 = vec_for(small);
    let v2 = vec_for(big);
    (v1, v2, small, big, fallback)
}

/// Gap coefficients: `[ρᵢvᵢ, ρⱼvⱼ] (aᵢ, bᵢ)ᵗ = g₁ vᵢ` for `i ≠ j ∈ {1, 2}`.
pub fn gap_coefficients(model: &ModelConfig, lambda: f64, bs: &BandStructure) -> Result<GapCoefficients> {
    model.require_normalized()?;
    let index = bs.check_interior(lambda)?;
    let g0 = cell_transfer_real(&model.v_per, lambda);
    let d = g0.trace();
    if bs.intervals[index].kind != Region::Gap || d.abs() <= 2.0 + bs.edge_tolerance {
        let (_, edge) = bs.distance_to_edge(lambda);
        return Err(Error::TooCloseToEdge { lambda, edge, tolerance: bs.edge_tolerance });
    }
    let g1 = perturbed_cell(model, lambda);
    let (v1, v2, r1, r2, fallback) = gap_eigenvectors(&g0);
    let solve = |vi: [f64; 2], ri: f64, vj: [f64; 2], rj: f64| {
        let w = g1.apply(vi);
        let m = TransferMatrix::new(ri * vi[0], rj * vj[0], ri * vi[1], rj * vj[1]);
        m.inverse().apply(w)
    };
    let [a1, b1] = solve(v1, r1, v2, r2);
    let [a2, b2] = solve(v2, r2, v1, r1);
    Ok(GapCoefficients { lambda, a1, b1, a2, b2, second_component_normalized: fallback })
}

/// Factors whose real roots in a gap are the roots of `a₁b₁a₂b₂`. `aᵢ` does
/// not depend on how the eigenvectors are scaled; `bᵢ = 0` is detected through
/// `det[vᵢ, g₁vᵢ]` with unit `vᵢ`, which is quadratic in `vᵢ` and therefore
/// free of the sign flips a fixed-component normalization introduces.
fn gap_factors(model: &ModelConfig, lambda: f64) -> [f64; 4] {
    let g0 = cell_transfer_real(&model.v_per, lambda);
    let g1 = perturbed_cell(model, lambda);
    let (v1, v2, r1, r2, _) = gap_eigenvectors(&g0);
    let unit = |v: [f64; 2]| {
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    let (u1, u2) = (unit(v1), unit(v2));
    let cross = |x: [f64; 2], y: [f64; 2]| x[0] * y[1] - x[1] * y[0];
    let a_of = |vi: [f64; 2], ri: f64, vj: [f64; 2]| {
        // Cramer's rule for the first coefficient: det[g₁vᵢ, ρⱼvⱼ] / det[ρᵢvᵢ, ρⱼvⱼ]
        cross(g1.apply(vi), vj) / (ri * cross(vi, vj))
    };
    [a_of(u1, r1, u2), cross(u1, g1.apply(u1)), a_of(u2, r2, u1), cross(u2, g1.apply(u2))]
}

/// `C`, `g̃₀` and `s` with `g₁ = C g̃₀ s C⁻¹` and `g₀ = C g̃₀ C⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugationDecomposition {
    pub c: TransferMatrix,
    pub g0_tilde: TransferMatrix,
    pub s: TransferMatrix,
}

impl ConjugationDecomposition {
    /// `C g̃₀ s C⁻¹`.
    pub fn perturbed(&self) -> TransferMatrix {
        self.c.mul(&self.g0_tilde).mul(&self.s).mul(&self.c.inverse())
    }

    /// `C g̃₀ C⁻¹`.
    pub fn background(&self) -> TransferMatrix {
        self.c.mul(&self.g0_tilde).mul(&self.c.inverse())
    }
}

pub fn conjugation_decomposition(
    model: &ModelConfig,
    lambda: f64,
    bs: &BandStructure,
) -> Result<ConjugationDecomposition> {
    model.require_normalized()?;
    let fd = floquet_data(model, lambda, bs)?;
    if fd.region != Region::Band {
        return Err(Error::InvalidInput(format!("energy {lambda} is not in a band")));
    }
    let (a, b) = coefficients_from(&fd, &perturbed_cell(model, lambda))?;
    let (c, rho) = (fd.c_plus, fd.rho_plus);
    let (p, m) = (a + b, a - b);
    Ok(ConjugationDecomposition {
        c: TransferMatrix::new(1.0, 0.0, c.re, c.im),
        g0_tilde: TransferMatrix::new(rho.re, rho.im, -rho.im, rho.re),
        s: TransferMatrix::new(p.re, p.im, -m.im, m.re),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    BRoot,
    DZero,
    BandEdge,
    GapCoeffRoot,
}

impl CriticalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriticalKind::BRoot => "b_root",
            CriticalKind::DZero => "d_zero",
            CriticalKind::BandEdge => "band_edge",
            CriticalKind::GapCoeffRoot => "gap_coeff_root",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalEntry {
    pub lambda: f64,
    pub kind: CriticalKind,
    /// `|b|`, `|D|`, `||D| - 2|` or the vanishing gap factor at the root.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalSet {
    pub entries: Vec<CriticalEntry>,
    pub scan_range: (f64, f64),
    pub scan_step: f64,
    pub root_tol: f64,
    pub edge_tol: f64,
}

impl CriticalSet {
    pub fn of_kind(&self, kind: CriticalKind) -> impl Iterator<Item = &CriticalEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    pub fn distance_to(&self, lambda: f64) -> f64 {
        self.entries.iter().map(|e| (e.lambda - lambda).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Samples per band or gap; the sampling step never exceeds the scan step.
const SAMPLES_PER_INTERVAL: f64 = 2000.0;

/// Assembles the exceptional set in `[λ_min, λ_max]`: roots of `b` and zeros of
/// `D` inside bands, roots of `a₁b₁a₂b₂` inside gaps, and all band edges.
pub fn critical_set(
    model: &ModelConfig,
    lambda_min: f64,
    lambda_max: f64,
    scan_step: f64,
    root_tol: f64,
) -> Result<CriticalSet> {
    model.require_normalized()?;
    let edge_tol = DEFAULT_EDGE_TOL;
    let bs = band_structure(model, lambda_min, lambda_max, scan_step, edge_tol)?;
    let collar = 100.0 * edge_tol;
    let mut entries = Vec::new();
    let mut band_samples = 0usize;
    let mut degenerate_samples = 0usize;

    for interval in bs.intervals.iter().filter(|i| i.width() > 0.0) {
        let lo = interval.left.max(lambda_min);
        let (lo, hi) = (lo + collar, interval.right - collar);
        if hi <= lo {
            continue;
        }
        let step = scan_step.min((hi - lo) / SAMPLES_PER_INTERVAL);
        let n = ((hi - lo) / step).ceil() as usize;
        let grid: Vec<f64> = (0..=n).map(|i| if i == n { hi } else { lo + i as f64 * step }).collect();
        match interval.kind {
            Region::Band => {
                let (found, total, degenerate) = band_roots(model, &bs, &grid, root_tol);
                entries.extend(found);
                band_samples += total;
                degenerate_samples += degenerate;
            }
            Region::Gap => entries.extend(gap_roots(model, &grid)),
        }
    }

    if band_samples > 0 {
        let fraction = degenerate_samples as f64 / band_samples as f64;
        if fraction > 0.5 {
            return Err(Error::DegenerateSite { fraction });
        }
    }

    for &e in &bs.edges {
        if e >= lambda_min && e <= lambda_max {
            let residual = (discriminant_real(model, e).abs() - 2.0).abs();
            entries.push(CriticalEntry { lambda: e, kind: CriticalKind::BandEdge, residual });
        }
    }
    entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(CriticalSet { entries, scan_range: (lambda_min, lambda_max), scan_step, root_tol, edge_tol })
}

fn band_roots(
    model: &ModelConfig,
    bs: &BandStructure,
    grid: &[f64],
    root_tol: f64,
) -> (Vec<CriticalEntry>, usize, usize) {
    let abs_b = |l: f64| band_coefficients(model, l, bs).map(|c| c.b.norm()).unwrap_or(f64::NAN);
    let values: Vec<f64> = grid.iter().map(|&l| abs_b(l)).collect();
    let total = values.iter().filter(|v| v.is_finite()).count();
    let degenerate = values.iter().filter(|v| **v < root_tol).count();
    let mut out = Vec::new();

    for i in 1..grid.len() - 1 {
        let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
        if !(c <= l && c <= r) || !(l.is_finite() && r.is_finite()) || (l == c && c == r) {
            continue;
        }
        let arg = golden_max(|x| -abs_b(x), grid[i - 1], grid[i + 1]);
        let residual = abs_b(arg);
        if residual <= root_tol && !out.iter().any(|e: &CriticalEntry| (e.lambda - arg).abs() <= root_tol) {
            out.push(CriticalEntry { lambda: arg, kind: CriticalKind::BRoot, residual });
        }
    }

    let d = |l: f64| discriminant_real(model, l);
    for w in grid.windows(2) {
        let (da, db) = (d(w[0]), d(w[1]));
        if da * db < 0.0 || db == 0.0 {
            let root = bisect(d, w[0], w[1]);
            out.push(CriticalEntry { lambda: root, kind: CriticalKind::DZero, residual: d(root).abs() });
        }
    }
    (out, total, degenerate)
}

fn gap_roots(model: &ModelConfig, grid: &[f64]) -> Vec<CriticalEntry> {
    let values: Vec<[f64; 4]> = grid.iter().map(|&l| gap_factors(model, l)).collect();
    let mut out = Vec::new();
    for k in 0..4 {
        let f = |l: f64| gap_factors(model, l)[k];
        for i in 0..grid.len() - 1 {
            let (fa, fb) = (values[i][k], values[i + 1][k]);
            if fa * fb < 0.0 || (fb == 0.0 && fa != 0.0) {
                let root = bisect(f, grid[i], grid[i + 1]);
                out.push(CriticalEntry { lambda: root, kind: CriticalKind::GapCoeffRoot, residual: f(root).abs() });
            }
        }
    }
    out
}

/// Projective separation below which two directions are considered equal.
pub const DIRECTION_TOL: f64 = 1e-8;
const MESH_DIRECTIONS: usize = 64;

/// Heuristic check of the three-direction condition: every direction of a
/// mesh (plus the axes and the real eigendirections of the generators) must
/// reach at least three distinct directions under words of length at most
/// `n_words` in the cell matrices.
pub fn three_direction_test(model: &ModelConfig, lambda: f64, n_words: usize) -> bool {
    let generators: Vec<TransferMatrix> =
        model.mu.support().map(|a| cell_transfer_real(&model.cell_potential(a.value), lambda)).collect();
    let mut starts: Vec<[f64; 2]> = (0..MESH_DIRECTIONS)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / MESH_DIRECTIONS as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    starts.push([1.0, 0.0]);
    starts.push([0.0, 1.0]);
    for g in &generators {
        starts.extend(real_eigendirections(g));
    }
    starts.iter().all(|&v| orbit_reaches_three(&generators, v, n_words))
}

fn real_eigendirections(g: &TransferMatrix) -> Vec<[f64; 2]> {
    let t = g.trace();
    let disc = t * t - 4.0 * g.det();
    if disc < 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for rho in [0.5 * (t + disc.sqrt()), 0.5 * (t - disc.sqrt())] {
        for v in [[g.b, rho - g.a], [rho - g.d, g.c]] {
            let n = v[0].hypot(v[1]);
            if n > 1e-14 {
                out.push([v[0] / n, v[1] / n]);
                break;
            }
        }
    }
    out
}

fn same_direction(x: [f64; 2], y: [f64; 2]) -> bool {
    let nx = x[0].hypot(x[1]);
    let ny = y[0].hypot(y[1]);
    ((x[0] * y[1] - x[1] * y[0]) / (nx * ny)).abs() <= DIRECTION_TOL
}

fn orbit_reaches_three(generators: &[TransferMatrix], start: [f64; 2], n_words: usize) -> bool {
    let normalize = |v: [f64; 2]| {
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    let mut seen = vec![normalize(start)];
    let mut frontier = seen.clone();
    for _ in 0..n_words {
        let mut next = Vec::new();
        for v in &frontier {
            for g in generators {
                let w = normalize(g.apply(*v));
                if !seen.iter().any(|s| same_direction(*s, w)) {
                    seen.push(w);
                    next.push(w);
                    if seen.len() >= 3 {
                        return true;
                    }
                }
            }
        }
        if next.is_empty() {
            return false;
        }
        frontier = next;
    }
    seen.len() >= 3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, CouplingDistribution, PiecewisePotential};
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};
    use std::f64::consts::PI;

    fn trivial_site() -> ModelConfig {
        ModelConfig::new_unchecked_site(
            presets::kronig_penney_background(),
            PiecewisePotential::constant_cell(0.0),
            CouplingDistribution::bernoulli(0.5).unwrap(),
        )
        .unwrap()
    }

    fn band_energies(bs: &BandStructure, count: usize, seed: u64) -> Vec<f64> {
        let bands: Vec<(f64, f64)> = bs.bands().into_iter().filter(|b| b.1 - b.0 > 1e-3).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < count {
            let (a, b) = bands[(rng.next_u64() % bands.len() as u64) as usize];
            let u = rng.next_u64() as f64 / u64::MAX as f64;
            let l = a + (b - a) * (0.001 + 0.998 * u);
            if bs.check_interior(l).is_ok() {
                out.push(l);
            }
        }
        out
    }

    #[test]
    fn trivial_site_scatters_trivially() {
        let m = trivial_site();
        let bs = band_structure(&m, -5.0, 80.0, 0.01, DEFAULT_EDGE_TOL).unwrap();
        for l in band_energies(&bs, 50, 1) {
            let c = band_coefficients(&m, l, &bs).unwrap();
            assert!((c.a - 1.0).norm() < 1e-10 && c.b.norm() < 1e-10);
            let d = conjugation_decomposition(&m, l, &bs).unwrap();
            assert!(d.s.max_abs_diff(&TransferMatrix::IDENTITY) < 1e-10);
            assert!(d.background().max_abs_diff(&cell_transfer_real(&m.v_per, l)) < 1e-9);
        }
        for (a, b) in bs.gaps() {
            if b - a < 1e-2 || !a.is_finite() {
                continue;
            }
            let g = gap_coefficients(&m, 0.5 * (a + b), &bs).unwrap();
            assert!((g.a1 - 1.0).abs() < 1e-10 && (g.a2 - 1.0).abs() < 1e-10);
            assert!(g.b1.abs() < 1e-10 && g.b2.abs() < 1e-10);
        }
    }

    #[test]
    fn reflectionless_energy_of_square_well() {
        let m = presets::square_well();
        let bs = band_structure(&m, 0.5, 60.0, 0.01, DEFAULT_EDGE_TOL).unwrap();
        let c = band_coefficients(&m, 1.0 + PI * PI, &bs).unwrap();
        assert!(c.b.norm() <= 1e-8);
        assert!((c.a.norm() - 1.0).abs() <= 1e-8);
        let d = conjugation_decomposition(&m, 1.0 + PI * PI, &bs).unwrap();
        let s = d.s;
        let sst = s.mul(&TransferMatrix::new(s.a, s.c, s.b, s.d));
        assert!(sst.max_abs_diff(&TransferMatrix::IDENTITY) < 1e-8);
        assert!((s.det() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn classical_square_barrier_reflection() {
        // |b| = |r|/|t| for a unit barrier of height 1 at energy 5
        let m = presets::square_well();
        let bs = band_structure(&m, 0.5, 60.0, 0.01, DEFAULT_EDGE_TOL).unwrap();
        let (k, kp) = (5f64.sqrt(), 2.0);
        let expected = (k * k - kp * kp).abs() * kp.sin().abs() / (2.0 * k * kp);
        let c = band_coefficients(&m, 5.0, &bs).unwrap();
        assert!((c.b.norm() - expected).abs() < 1e-10, "{} vs {expected}", c.b.norm());
    }

    #[test]
    fn band_identity_and_branch_swap() {
        for m in [presets::square_well(), presets::kronig_penney_square_well()] {
            let bs = band_structure(&m, -5.0, 120.0, 0.01, DEFAULT_EDGE_TOL).unwrap();
            for l in band_energies(&bs, 200, 2) {
                let c = band_coefficients(&m, l, &bs).unwrap();
                assert!((c.a.norm_sqr() - c.b.norm_sqr() - 1.0).abs() <= 1e-8, "lambda {l}");
                let s = band_coefficients_on_branch(&m, l, &bs, true).unwrap();
                assert!((s.a - c.a.conj()).norm() <= 1e-8 * c.a.norm());
                assert!((s.b - c.b.conj()).norm() <= 1e-8 * c.a.norm());
                assert!((s.a.norm() - c.a.norm()).abs() <= 1e-10 * c.a.norm());
                assert!((s.b.norm() - c.b.norm()).abs() <= 1e-10 * c.a.norm());
                assert_eq!(s.branch_id, -c.branch_id);
            }
        }
    }

    #[test]
    fn conjugation_reconstructs_cell_matrices() {
        let m = presets::kronig_penney_square_well();
        let bs = band_structure(&m, -5.0, 120.0, 0.01, DEFAULT_EDGE_TOL).unwrap();
        for l in band_energies(&bs, 200, 3) {
            let d = conjugation_decomposition(&m, l, &bs).unwrap();
            let g1 = perturbed_cell(&m, l);
            assert!(d.perturbed().max_abs_diff(&g1) <= 1e-8, "lambda {l}");
            assert!(d.background().max_abs_diff(&cell_transfer_real(&m.v_per, l)) <= 1e-8);
            assert!((d.s.det() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn gap_coefficients_of_free_background_at_minus_one() {
        let m = presets::square_well();
        let bs = band_structure(&m, -5.0, 60.0, 0.01, DEFAULT_EDGE_TOL).unwrap();
        let g = gap_coefficients(&m, -1.0, &bs).unwrap();
        // background eigenvectors (1, -1) for e^{-1}, (1, 1) for e; barrier cell
        // has κ = √2: [[cosh κ, sinh κ/κ], [κ sinh κ, cosh κ]]
        let k = 2f64.sqrt();
        let (ch, sh) = (k.cosh(), k.sinh());
        let e = 1f64.exp();
        let w1 = [ch - sh / k, k * sh - ch];
        let w2 = [ch + sh / k, k * sh + ch];
        // w = a ρ_i v_i + b ρ_j v_j
        let expand = |w: [f64; 2], ri: f64, vi: [f64; 2], rj: f64, vj: [f64; 2]| {
            let det = ri * rj * (vi[0] * vj[1] - vi[1] * vj[0]);
            ((w[0] * rj * vj[1] - w[1] * rj * vj[0]) / det, (ri * vi[0] * w[1] - ri * vi[1] * w[0]) / det)
        };
        let (a1, b1) = expand(w1, 1.0 / e, [1.0, -1.0], e, [1.0, 1.0]);
        let (a2, b2) = expand(w2, e, [1.0, 1.0], 1.0 / e, [1.0, -1.0]);
        for (got, want) in [(g.a1, a1), (g.b1, b1), (g.a2, a2), (g.b2, b2)] {
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
        assert!(!g.second_component_normalized);
    }

    #[test]
    fn critical_set_of_square_well() {
        let m = presets::square_well();
        let cs = critical_set(&m, 0.5, 60.0, 0.01, DEFAULT_ROOT_TOL).unwrap();
        let roots: Vec<f64> = cs.of_kind(CriticalKind::BRoot).map(|e| e.lambda).collect();
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0] - (1.0 + PI * PI)).abs() < 1e-6);
        assert!((roots[1] - (1.0 + 4.0 * PI * PI)).abs() < 1e-6);
        let zeros: Vec<f64> = cs.of_kind(CriticalKind::DZero).map(|e| e.lambda).collect();
        let expected: Vec<f64> = (0..2).map(|n| ((n as f64 + 0.5) * PI).powi(2)).collect();
        assert_eq!(zeros.len(), 2);
        for (z, e) in zeros.iter().zip(&expected) {
            assert!((z - e).abs() < 1e-9);
        }
        let edges: Vec<f64> = cs.of_kind(CriticalKind::BandEdge).map(|e| e.lambda).collect();
        assert_eq!(edges.len(), 2);
        assert!((edges[0] - PI * PI).abs() < 1e-6 && (edges[1] - 4.0 * PI * PI).abs() < 1e-6);
        assert!(cs.entries.windows(2).all(|w| w[0].lambda <= w[1].lambda));
    }

    #[test]
    fn degenerate_site_is_reported() {
        let m = ModelConfig::new_unchecked_site(
            PiecewisePotential::constant_cell(0.0),
            PiecewisePotential::constant_cell(0.0),
            CouplingDistribution::bernoulli(0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(critical_set(&m, 0.5, 20.0, 0.01, DEFAULT_ROOT_TOL).unwrap_err().name(), "DegenerateSite");
    }

    #[test]
    fn gap_factor_roots_are_roots_of_coefficients() {
        let m = presets::kronig_penney_square_well();
        let cs = critical_set(&m, -5.0, 120.0, 0.01, DEFAULT_ROOT_TOL).unwrap();
        let bs = band_structure(&m, -5.0, 120.0, 0.01, DEFAULT_EDGE_TOL).unwrap();
        for e in cs.of_kind(CriticalKind::GapCoeffRoot) {
            let g = gap_coefficients(&m, e.lambda, &bs).unwrap();
            let scale = g.a1.abs().max(g.a2.abs()).max(1.0);
            let smallest = [g.a1, g.b1, g.a2, g.b2].iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
            assert!(smallest < 1e-6 * scale, "{e:?} {g:?}");
        }
    }

    #[test]
    fn three_directions() {
        let m = presets::square_well();
        // band energy with D != 0
        assert!(three_direction_test(&m, 5.0, 6));
        // deep gap with nonzero gap coefficients
        assert!(three_direction_test(&m, -3.0, 6));
        // trivial site at a zero of D: a quarter turn, orbits of length two
        let rot = ModelConfig::new_unchecked_site(
            PiecewisePotential::constant_cell(0.0),
            PiecewisePotential::constant_cell(0.0),
            CouplingDistribution::bernoulli(0.5).unwrap(),
        )
        .unwrap();
        assert!(!three_direction_test(&rot, PI * PI / 4.0, 8));
    }
}
