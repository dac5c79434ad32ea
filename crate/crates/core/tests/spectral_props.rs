use ilwlab_core::spectral::{Grid, Side, SpectralField};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn hermitian_defect(f: &SpectralField) -> f64 {
    let g = f.grid();
    let mut worst = f.coeff(0).im.abs();
    for xi in 1..g.nyquist() {
        worst = worst.max((f.coeff(xi) - f.coeff(-xi).conj()).norm());
    }
    worst.max(f.coeff(g.nyquist()).norm())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// Direct O(M²) evaluation of (2π)^{-1/2} Σ f̂(η) ĝ(ξ−η) restricted to the dealiased band.
fn convolution_oracle(f: &SpectralField, g: &SpectralField, xi: i64) -> Complex64 {
    let kc = f.grid().dealias_cut();
    if xi.abs() > kc {
        return Complex64::new(0.0, 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for eta in -kc..=kc {
        let rest = xi - eta;
        if rest.abs() <= kc {
            acc += f.coeff(eta) * g.coeff(rest);
        }
    }
    acc / (2.0 * PI).sqrt()
}

#[test]
fn round_trip_is_identity() {
    for (m, seed) in [(16usize, 1u64), (64, 2), (256, 3)] {
        let grid = Grid::new(m).unwrap();
        let f = SpectralField::random_band_limited(grid, grid.nyquist() - 1, seed).unwrap();
        let samples = f.to_samples();
        let back = SpectralField::forward(grid, &samples).unwrap();
        let coeff_err = f
            .coeffs()
            .iter()
            .zip(back.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(coeff_err < 1e-12, "M={m}: spectral round trip {coeff_err:e}");
        assert!(sup_diff(&samples, &back.to_samples()) < 1e-12, "M={m}: physical round trip");
    }
}

#[test]
fn nyquist_mode_is_dropped_on_forward() {
    let grid = Grid::new(16).unwrap();
    let samples: Vec<f64> = grid.points().iter().map(|x| (8.0 * x).cos()).collect();
    let f = SpectralField::forward(grid, &samples).unwrap();
    assert_eq!(f.coeff(8), Complex64::new(0.0, 0.0));
}

#[test]
fn cosine_has_expected_coefficients() {
    let grid = Grid::new(32).unwrap();
    let f = SpectralField::from_fn(grid, |x| x.cos());
    let expected = (PI / 2.0).sqrt();
    assert!((f.coeff(1).re - expected).abs() < 1e-13);
    assert!((f.coeff(-1).re - expected).abs() < 1e-13);
    assert!((f.l2_norm() - PI.sqrt()).abs() < 1e-13);
}

#[test]
fn record_round_trip() {
    let grid = Grid::new(32).unwrap();
    let f = SpectralField::random_band_limited(grid, 12, 9).unwrap();
    let mut buf = Vec::new();
    f.write_record(&mut buf).unwrap();
    let g = SpectralField::read_record(&buf[..]).unwrap();
    assert_eq!(f, g);
}

#[test]
fn galilean_reduce_splits_mean() {
    let grid = Grid::new(32).unwrap();
    let f = SpectralField::from_fn(grid, |x| 0.75 + x.sin());
    let (g, mean) = f.galilean_reduce();
    assert!((mean - 0.75).abs() < 1e-14);
    assert!(g.is_mean_zero());
}

#[test]
fn convolution_matches_direct_sum() {
    let grid = Grid::new(32).unwrap();
    let f = SpectralField::random_band_limited(grid, 15, 11).unwrap();
    let g = SpectralField::random_band_limited(grid, 15, 12).unwrap();
    let h = f.convolve(&g).unwrap();
    for xi in grid.frequencies() {
        let d = (h.coeff(xi) - convolution_oracle(&f, &g, xi)).norm();
        assert!(d < 1e-10, "xi={xi}: {d:e}");
    }
}

#[test]
fn product_of_sines() {
    // sin(x)·sin(x) = (1 − cos 2x)/2
    let grid = Grid::new(32).unwrap();
    let s = SpectralField::from_fn(grid, |x| x.sin());
    let p = s.convolve(&s).unwrap();
    let expected = SpectralField::from_fn(grid, |x| 0.5 - 0.5 * (2.0 * x).cos());
    assert!(p.sub(&expected).l2_norm() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plancherel_agrees_with_quadrature(seed in any::<u64>(), band in 1i64..31) {
        let grid = Grid::new(64).unwrap();
        let f = SpectralField::random_band_limited(grid, band, seed).unwrap();
        let a = f.l2_norm();
        let b = f.l2_norm_quadrature();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn operations_preserve_hermitian_symmetry(seed in any::<u64>(), n in 0.0f64..20.0, a in -3.0f64..3.0) {
        let grid = Grid::new(32).unwrap();
        let f = SpectralField::random_band_limited(grid, 15, seed).unwrap();
        let g = SpectralField::random_band_limited(grid, 15, seed.wrapping_add(1)).unwrap();
        prop_assert!(hermitian_defect(&f) == 0.0);
        prop_assert!(hermitian_defect(&f.project(n, Side::Low)) == 0.0);
        prop_assert!(hermitian_defect(&f.project(n, Side::High)) == 0.0);
        prop_assert!(hermitian_defect(&f.axpy(a, &g)) < 1e-15);
        prop_assert!(hermitian_defect(&f.convolve(&g).unwrap()) < 1e-14);
        let rotated = f.map_coeffs(|xi, c| c * Complex64::from_polar(1.0, a * xi as f64));
        prop_assert!(hermitian_defect(&rotated) < 1e-15);
        let back = SpectralField::forward(grid, &f.to_samples()).unwrap();
        prop_assert!(hermitian_defect(&back) < 1e-15);
    }

    #[test]
    fn projectors_are_complementary(seed in any::<u64>(), n in 0.0f64..20.0) {
        let grid = Grid::new(32).unwrap();
        let f = SpectralField::random_band_limited(grid, 15, seed).unwrap();
        let lo = f.project(n, Side::Low);
        let hi = f.project(n, Side::High);
        prop_assert!(lo.axpy(1.0, &hi).sub(&f).sup_coeff() == 0.0);
        let cross: f64 = lo.coeffs().iter().zip(hi.coeffs()).map(|(a, b)| (a * b.conj()).norm()).sum();
        prop_assert!(cross == 0.0);
        prop_assert!(lo.project(n, Side::Low) == lo);
        let total = lo.l2_norm_sq() + hi.l2_norm_sq();
        prop_assert!((total - f.l2_norm_sq()).abs() < 1e-14);
    }
}
