use rayon::prelude::*;

use super::green::GreenKernel;
use super::{check_positive, BoxSolutions, DirichletBox};
use crate::model::{Configuration, ModelConfig};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Quadrature spacing for the resolvent norm bounds.
pub const GOOD_BOX_STEP: f64 = 0.05;
/// Largest `|sin|` of the angle between the two shooting solutions at the
/// matching point for an energy to count as an eigenvalue.
pub const MATCH_TOL: f64 = 1e-6;

/// `L ∈ 3ℤ \ 6ℤ`.
pub fn is_good_box_length(length: u32) -> bool {
    length % 3 == 0 && length % 6 != 0
}

/// Logarithms of two upper bounds for `‖χ_out R_Λ(λ) χ_int‖`, with `χ_int`
/// the indicator of `[-L/6, L/6]` and `χ_out` that of the unit collars at
/// both ends of the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodBoxBound {
    pub log_hilbert_schmidt: f64,
    pub log_schur: f64,
}

impl GoodBoxBound {
    pub fn log_bound(&self) -> f64 {
        self.log_hilbert_schmidt.min(self.log_schur)
    }
}

fn trapezoid(a: f64, b: f64, h: f64) -> Vec<(f64, f64)> {
    let n = (((b - a) / h) - 1e-9).ceil().max(1.0) as usize;
    let step = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 * step } else { step };
            (a + i as f64 * step, w)
        })
        .collect()
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `log Σ wᵢ e^{p·logsᵢ}`.
fn log_quadrature(nodes: &[(f64, f64)], logs: &[f64], p: f64) -> f64 {
    nodes.iter().zip(logs).fold(f64::NEG_INFINITY, |acc, (&(_, w), &l)| log_add(acc, w.ln() + p * l))
}

/// Hilbert–Schmidt and Schur-test bounds on a trapezoid grid of spacing
/// `GOOD_BOX_STEP`. Inside each collar the kernel factorizes, e.g.
/// `G(x, y) = u₊(x)u₋(y)/W` on the right, so the double integrals reduce to
/// products of single ones.
pub fn good_box_bound(bx: &DirichletBox, lambda: f64) -> Result<GoodBoxBound> {
    let l = bx.length() as f64;
    if bx.length() < 3 {
        return Err(Error::InvalidInput("good-box bounds need L >= 3".into()));
    }
    let g = GreenKernel::new(bx, lambda)?;
    let sol = g.solutions();
    let w = g.log_abs_wronskian();
    let right = trapezoid(l / 2.0 - 1.0, l / 2.0, GOOD_BOX_STEP);
    let left = trapezoid(-l / 2.0, -l / 2.0 + 1.0, GOOD_BOX_STEP);
    let core = trapezoid(-l / 6.0, l / 6.0, GOOD_BOX_STEP);
    let plus_r: Vec<f64> = right.iter().map(|&(x, _)| sol.u_plus(x).log_abs_u()).collect();
    let minus_l: Vec<f64> = left.iter().map(|&(x, _)| sol.u_minus(x).log_abs_u()).collect();
    let minus_c: Vec<f64> = core.iter().map(|&(y, _)| sol.u_minus(y).log_abs_u()).collect();
    let plus_c: Vec<f64> = core.iter().map(|&(y, _)| sol.u_plus(y).log_abs_u()).collect();

    let hs_sq = log_add(
        log_quadrature(&right, &plus_r, 2.0) + log_quadrature(&core, &minus_c, 2.0),
        log_quadrature(&left, &minus_l, 2.0) + log_quadrature(&core, &plus_c, 2.0),
    );
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let row = (max(&plus_r) + log_quadrature(&core, &minus_c, 1.0))
        .max(max(&minus_l) + log_quadrature(&core, &plus_c, 1.0));
    let (int_r, int_l) = (log_quadrature(&right, &plus_r, 1.0), log_quadrature(&left, &minus_l, 1.0));
    let col = minus_c
        .iter()
        .zip(&plus_c)
        .map(|(&m, &p)| log_add(m + int_r, p + int_l))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GoodBoxBound { log_hilbert_schmidt: 0.5 * hs_sq - w, log_schur: 0.5 * (row + col) - w })
}

/// Fraction of samples whose box is `(γ̄, λ)`-good: `λ` is not a box
/// eigenvalue and the resolvent bound is at most `e^{−γ̄L/3}`. Sample `s`
/// uses the coupling stream `(master_seed, s)`, so different energies see
/// the same boxes.
pub fn good_box_probability(
    model: &ModelConfig,
    lambda: f64,
    gamma_bar: f64,
    length: u32,
    n_samples: usize,
    master_seed: u64,
) -> Result<f64> {
    if !is_good_box_length(length) {
        return Err(Error::InvalidInput(format!("box length {length} is not in 3Z \\ 6Z")));
    }
    check_positive("gamma_bar", gamma_bar)?;
    check_samples(n_samples)?;
    let threshold = -gamma_bar * length as f64 / 3.0;
    let (a, b) = DirichletBox::cell_range(length);
    let good: Vec<bool> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let config = model.sample_configuration(a, b, master_seed, s);
            let bx = DirichletBox::new(model, &config, length)?;
            match good_box_bound(&bx, lambda) {
                Ok(bound) => Ok(bound.log_bound() <= threshold),
                Err(Error::EigenvalueProximity { .. }) => Ok(false),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(good.iter().filter(|&&g| g).count() as f64 / n_samples as f64)
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        Err(Error::InvalidInput("n_samples must be positive".into()))
    } else {
        Ok(())
    }
}

/// Fraction of samples with a box eigenvalue within `e^{−σL^β}` of `λ`.
/// Each length draws from its own seed `derive_seed(master_seed, L)`.
pub fn wegner_probability(
    model: &ModelConfig,
    lambda: f64,
    length: u32,
    sigma: f64,
    beta: f64,
    n_samples: usize,
    master_seed: u64,
) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!("beta must lie in (0, 1), got {beta}")));
    }
    check_positive("sigma", sigma)?;
    check_samples(n_samples)?;
    let eps = (-sigma * (length as f64).powf(beta)).exp();
    let seed = derive_seed(master_seed, length as u64);
    let (a, b) = DirichletBox::cell_range(length);
    let hits: Vec<bool> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let config = model.sample_configuration(a, b, seed, s);
            let bx = DirichletBox::new(model, &config, length)?;
            let near = bx.eigenvalues(lambda - 2.0 * eps, lambda + 2.0 * eps, eps * 1e-6);
            Ok(near.iter().any(|e| (e - lambda).abs() <= eps))
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / n_samples as f64)
}

/// Half-width `κ_L` of the energy window around `λ` over which goodness at
/// rate `γ − ε` transfers to rate `γ − ε'` on the Wegner event.
pub fn window_radius(gamma: f64, eps: f64, eps_prime: f64, sigma: f64, beta: f64, length: u32) -> f64 {
    let l = length as f64;
    0.5 * (-2.0 * sigma * l.powf(beta)).exp() * ((-(gamma - eps_prime) * l / 3.0).exp() - (-(gamma - eps) * l / 3.0).exp())
}

/// Exponential decay rate of the box eigenfunction at `eigenvalue`.
///
/// The eigenfunction is shot from both ends and matched at the integer point
/// where the product of the two amplitudes peaks. The envelope
/// `log (u² + u'²/s)^{1/2}`, `s = max(|E|, 1)`, is sampled at the integer
/// points and both tails are fitted together by one line in the distance to
/// the matching point; the returned rate is minus its slope.
pub fn eigenfunction_decay(model: &ModelConfig, config: &Configuration, length: u32, eigenvalue: f64) -> Result<f64> {
    let bx = DirichletBox::new(model, config, length)?;
    let sol = BoxSolutions::new(&bx, eigenvalue);
    let s = eigenvalue.abs().max(1.0);
    let h = (length / 2) as i64;
    let points: Vec<f64> = (-h..=h).map(|n| n as f64).collect();
    let left: Vec<f64> = points.iter().map(|&x| sol.u_minus(x).log_amplitude(s)).collect();
    let right: Vec<f64> = points.iter().map(|&x| sol.u_plus(x).log_amplitude(s)).collect();
    let m = (0..points.len())
        .max_by(|&i, &j| (left[i] + right[i]).total_cmp(&(left[j] + right[j])))
        .unwrap();

    let (a, b) = (sol.u_minus(points[m]).dir, sol.u_plus(points[m]).dir);
    let mismatch = (a[0] * b[1] - a[1] * b[0]).abs();
    if mismatch > MATCH_TOL {
        let distance = bx
            .eigenvalues(eigenvalue - 1.0, eigenvalue + 1.0, 1e-12)
            .into_iter()
            .map(|e| (e - eigenvalue).abs())
            .fold(f64::INFINITY, f64::min);
        return Err(Error::EigenvalueProximity { lambda: eigenvalue, distance });
    }

    let (mut d, mut env) = (Vec::new(), Vec::new());
    for (i, &x) in points.iter().enumerate() {
        let dist = (x - points[m]).abs();
        if dist < 1.0 {
            continue;
        }
        d.push(dist);
        env.push(if i < m { left[i] - left[m] } else { right[i] - right[m] });
    }
    if d.len() < 2 || d.iter().all(|&v| v == d[0]) {
        return Err(Error::InvalidInput(format!("box of length {length} is too short to fit a decay rate")));
    }
    let n = d.len() as f64;
    let (md, me) = (d.iter().sum::<f64>() / n, env.iter().sum::<f64>() / n);
    let sxy: f64 = d.iter().zip(&env).map(|(x, y)| (x - md) * (y - me)).sum();
    let sxx: f64 = d.iter().map(|x| (x - md).powi(2)).sum();
    Ok(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::discriminant_real;
    use crate::model::{presets, CouplingDistribution, PiecewisePotential};

    #[test]
    fn box_lengths() {
        assert!(is_good_box_length(45));
        assert!(is_good_box_length(9));
        assert!(!is_good_box_length(44));
        assert!(!is_good_box_length(42));
        let m = presets::square_well();
        assert!(matches!(good_box_probability(&m, 5.0, 0.05, 44, 4, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn deep_below_spectrum_every_box_is_good() {
        let m = presets::square_well();
        // Hyperbolicity at λ = −1 is at least √(0 + 1) = 1 in every cell.
        let f = good_box_probability(&m, -1.0, 0.5, 45, 32, 3).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn free_bounds_match_closed_form() {
        let m = presets::free();
        let c = Configuration::from_couplings(vec![0.0; 9], -4);
        let bx = DirichletBox::new(&m, &c, 9).unwrap();
        let b = good_box_bound(&bx, -1.0).unwrap();
        // G(x, y) = sinh(x + 9/2) sinh(9/2 − y) / sinh 9 for x < y on the left collar.
        let (mut hs, h) = (0.0, 1e-3);
        let n = (1.0 / h) as usize;
        let m_core = (3.0 / h) as usize;
        for i in 0..n {
            let x = -4.5 + (i as f64 + 0.5) * h;
            for j in 0..m_core {
                let y = -1.5 + (j as f64 + 0.5) * h;
                let g = (x + 4.5f64).sinh() * (4.5 - y).sinh() / 9f64.sinh();
                hs += 2.0 * g * g * h * h;
            }
        }
        assert!((b.log_hilbert_schmidt - 0.5 * hs.ln()).abs() < 2e-3, "{} vs {}", b.log_hilbert_schmidt, 0.5 * hs.ln());
        assert!(b.log_schur >= b.log_hilbert_schmidt - 1.0);
    }

    #[test]
    fn wegner_fraction_is_a_probability() {
        let m = presets::square_well();
        let f = wegner_probability(&m, 5.0, 33, 0.5, 0.5, 40, 1).unwrap();
        assert!((0.0..=1.0).contains(&f));
        assert_eq!(wegner_probability(&m, -5.0, 33, 0.5, 0.5, 40, 1).unwrap(), 0.0);
        assert!(wegner_probability(&m, 5.0, 33, 0.5, 1.0, 4, 1).is_err());
        assert!(wegner_probability(&m, 5.0, 33, 0.0, 0.5, 4, 1).is_err());
    }

    #[test]
    fn window_radius_is_positive_and_tiny() {
        let k = window_radius(0.3, 0.01, 0.05, 0.5, 0.5, 45);
        assert!(k > 0.0 && k < 1e-2);
        assert_eq!(window_radius(0.3, 0.05, 0.05, 0.5, 0.5, 45), 0.0);
    }

    #[test]
    fn free_eigenfunction_does_not_decay() {
        let m = presets::free();
        let c = Configuration::from_couplings(vec![0.0; 61], -30);
        let bx = DirichletBox::new(&m, &c, 60).unwrap();
        for e in bx.eigenvalues(3.5, 4.5, 1e-13) {
            let rate = eigenfunction_decay(&m, &c, 60, e).unwrap();
            assert!(rate.abs() <= 0.05, "rate {rate} at {e}");
        }
    }

    #[test]
    fn non_eigenvalue_is_rejected() {
        let m = presets::free();
        let c = Configuration::from_couplings(vec![0.0; 61], -30);
        let e = (30.5 * std::f64::consts::PI / 60.0).powi(2);
        assert!(matches!(eigenfunction_decay(&m, &c, 60, e), Err(Error::EigenvalueProximity { .. })));
    }

    /// A single impurity cell in a Kronig–Penney box binds a state inside the
    /// first gap; its envelope decays like the larger Floquet multiplier.
    #[test]
    fn gap_state_decays_at_floquet_rate() {
        let bg = presets::kronig_penney_background();
        let m = ModelConfig::new(bg, PiecewisePotential::constant_cell(-6.0), CouplingDistribution::bernoulli(0.5).unwrap())
            .unwrap();
        let length = 41;
        let mut q = vec![0.0; 41];
        q[20] = 1.0;
        let c = Configuration::from_couplings(q, -20);
        let bx = DirichletBox::new(&m, &c, length).unwrap();
        let gap: Vec<f64> = bx
            .eigenvalues(-5.0, 40.0, 1e-13)
            .into_iter()
            .filter(|&e| discriminant_real(&m, e).abs() > 2.2)
            .collect();
        assert!(!gap.is_empty(), "no gap state found");
        for e in gap {
            let d = discriminant_real(&m, e);
            let big = (d.abs() + (d * d - 4.0).sqrt()) / 2.0;
            let rate = eigenfunction_decay(&m, &c, length, e).unwrap();
            assert!((rate - big.ln()).abs() <= 0.1 * big.ln(), "E={e}: rate {rate} vs {}", big.ln());
        }
    }
}
