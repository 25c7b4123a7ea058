use std::f64::consts::PI;

use srcstab::functionals::harmonic_measure_lower;
use srcstab::harmonic::harmonic_measure_mc;
use srcstab::sweep::C64;

/// Conformal-map value on the real axis beyond the slit.
fn exact(k: f64, kb: f64) -> f64 {
    2.0 / PI * (kb * kb / (k.powi(4) - kb.powi(4)).sqrt()).atan()
}

#[test]
fn walks_match_conformal_value() {
    for k in [1.1, 1.6, 2.5, 3.7] {
        let e = harmonic_measure_mc(C64::new(k, 0.0), 1.0, 20_000, 11).unwrap();
        let want = exact(k, 1.0);
        assert!((e.value - want).abs() < 4.0 * e.stderr + 2e-3, "k={k}: {} vs {want}", e.value);
        assert!(want >= harmonic_measure_lower(k, 1.0).unwrap());
    }
}

#[test]
fn boundary_limits() {
    let slit = harmonic_measure_mc(C64::new(0.5, 1e-6), 1.0, 2000, 3).unwrap();
    assert!(slit.value > 0.999);
    let ray = C64::from_polar(0.7, PI / 4.0 - 1e-6);
    let r = harmonic_measure_mc(ray, 1.0, 2000, 3).unwrap();
    assert!(r.value < 1e-3);
}
