use anderson1d::acceptance::SEED;
use anderson1d::model::presets;
use anderson1d::scattering::{critical_set, CriticalKind, DEFAULT_ROOT_TOL};
use anderson1d::spectra::{good_box_probability, window_radius};

/// Goodness at rate `γ − ε` near `λ` carries over to rate `γ − ε'` anywhere in
/// the window of half-width `κ_L`.
#[test]
fn good_boxes_persist_across_the_window() {
    let m = presets::square_well();
    let (lambda, gamma, eps, eps_prime) = (0.5, 0.188, 0.03, 0.06);
    let (sigma, beta, length, n) = (0.5, 0.5, 45, 200);
    let kappa = window_radius(gamma, eps, eps_prime, sigma, beta, length);
    assert!(kappa > 0.0);
    let at = good_box_probability(&m, lambda, gamma - eps, length, n, 7).unwrap();
    assert!(at > 0.1 && at < 0.9, "pinned fraction {at} should be informative");
    let binomial = (at * (1.0 - at) / n as f64).sqrt();
    for shifted in [lambda - kappa, lambda + kappa] {
        let f = good_box_probability(&m, shifted, gamma - eps_prime, length, n, 7).unwrap();
        assert!(f >= at - 2.0 * binomial, "fraction {f} at {shifted} vs {at} at {lambda}");
    }
}

/// The 200-sample fractions of the acceptance run at `γ̄ = 0.05`, `L = 45`.
/// Neither energy yields good boxes since the exponent there is far below `γ̄`.
#[test]
fn good_box_fractions_regression() {
    let m = presets::square_well();
    let cs = critical_set(&m, 0.0, 60.0, 0.01, DEFAULT_ROOT_TOL).unwrap();
    let critical = cs.of_kind(CriticalKind::BRoot).next().unwrap().lambda;
    for lambda in [5.0, critical] {
        assert_eq!(good_box_probability(&m, lambda, 0.05, 45, 200, SEED).unwrap(), 0.0, "lambda {lambda}");
    }
}
