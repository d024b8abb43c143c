use anderson1d::acceptance::Suite;

fn check(id: u8) {
    let outcome = Suite::default().run(id);
    println!("{}  [{:.1} s]", outcome.line(), outcome.elapsed.as_secs_f64());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn criterion_01_critical_energies() {
    check(1);
}

#[test]
fn criterion_02_zero_exponent_at_criticality() {
    check(2);
}

#[test]
fn criterion_03_scattering_identity() {
    check(3);
}

#[test]
fn criterion_04_conjugation_decomposition() {
    check(4);
}

#[test]
fn criterion_05_unimodularity_and_bounds() {
    check(5);
}

#[test]
fn criterion_06_free_model_exactness() {
    check(6);
}

#[test]
fn criterion_07_thouless_consistency() {
    check(7);
}

#[test]
fn criterion_08_wegner_trend() {
    check(8);
}

#[test]
fn criterion_09_good_box_contrast() {
    check(9);
}

#[test]
fn criterion_10_furstenberg_consistency() {
    check(10);
}
