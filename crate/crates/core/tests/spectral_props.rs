mod common;

use dkpp_core::oracle::direct_transform;
use dkpp_core::random_fields::FieldSampler;
use dkpp_core::spectral::{
    apply_fractional_laplacian, forward_transform, h2alpha_norm, inverse_transform, inverse_transform_complex,
    l1_norm, l2_norm,
};
use dkpp_core::{Complex, Grid, SpectralField, Symbol};
use proptest::prelude::*;
use std::f64::consts::PI;

fn smooth_field() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), prop::sample::select(vec![16usize, 64, 128, 256]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_and_hermitian((seed, n) in smooth_field()) {
        let g = Grid::new(8.0 * PI, n).unwrap();
        let mut s = FieldSampler::new(seed, 1.0);
        let f = s.next_white_noise(&g);
        let spec = forward_transform(&f, &g).unwrap();
        prop_assert!(spec.hermitian_defect() <= 1e-12 * (1.0 + spec.max_abs()));
        let back = inverse_transform(&spec, &g).unwrap();
        let err = l2_norm(&back.iter().zip(&f).map(|(a, b)| a - b).collect::<Vec<_>>(), &g).unwrap();
        prop_assert!(err <= 1e-12 * l2_norm(&f, &g).unwrap());
    }

    #[test]
    fn parseval((seed, n) in smooth_field()) {
        let g = Grid::new(8.0 * PI, n).unwrap();
        let f = FieldSampler::new(seed, 3.0).next_white_noise(&g);
        let quad = l2_norm(&f, &g).unwrap();
        let spec = forward_transform(&f, &g).unwrap().l2_norm(&g);
        prop_assert!((quad - spec).abs() <= 1e-12 * (1.0 + quad));
    }

    #[test]
    fn hermitian_spectrum_gives_real_field(seed in any::<u64>()) {
        let g = Grid::new(5.0, 64).unwrap();
        let real = FieldSampler::new(seed, 1.0).next_white_noise(&g);
        let spec = forward_transform(&real, &g).unwrap();
        let z = inverse_transform_complex(&spec, &g).unwrap();
        let max_im = z.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
        prop_assert!(max_im <= 1e-12);
    }

    #[test]
    fn fourier_sup_bound(seed in any::<u64>()) {
        let g = Grid::new(8.0 * PI, 256).unwrap();
        let f = FieldSampler::new(seed, 2.0).next_field(&g);
        let (u, uxx) = f.snapshot(&g, 0.4);
        let spec = forward_transform(&u, &g).unwrap();
        prop_assert!(spec.max_abs() <= l1_norm(&u, &g).unwrap() / (2.0 * PI).sqrt() + 1e-10);
        let d2 = spec.coefficients().iter().enumerate()
            .map(|(i, c)| g.frequency(i).powi(2) * c.norm())
            .fold(0.0f64, f64::max);
        prop_assert!(d2 <= l1_norm(&uxx, &g).unwrap() / (2.0 * PI).sqrt() + 1e-8);
    }

    #[test]
    fn symbol_composition(alpha in 0.05f64..1.0, a in 0.0f64..2.0, b in -2.0f64..2.0, t in 0.0f64..2.0) {
        let g = Grid::new(4.0, 32).unwrap();
        let m1 = Symbol::linear_part(&g, alpha, a, b).unwrap();
        let m2 = Symbol::linear_part(&g, 1.0 - alpha / 2.0, b.abs(), a).unwrap();
        let spec = forward_transform(&FieldSampler::new(1, 1.0).next_white_noise(&g), &g).unwrap();
        let twice = m2.apply(&m1.apply(&spec).unwrap()).unwrap();
        let once = m1.compose(&m2).unwrap().apply(&spec).unwrap();
        for (x, y) in twice.coefficients().iter().zip(once.coefficients()) {
            prop_assert!((x - y).norm() <= 1e-13 * (1.0 + x.norm()));
        }
        let e1 = m1.exp_scaled(t);
        for (i, v) in e1.values().iter().enumerate() {
            prop_assert!(v.norm() <= (a * t).exp() * (1.0 + 1e-15));
            prop_assert!(m1.values()[i].re <= a);
        }
        prop_assert_eq!(m1.values()[0].re, a);
    }

    #[test]
    fn fractional_laplacian_is_positive(seed in any::<u64>(), alpha in 0.05f64..=1.0) {
        let g = Grid::new(6.0, 64).unwrap();
        let f = FieldSampler::new(seed, 1.0).next_white_noise(&g);
        let lf = apply_fractional_laplacian(&f, &g, alpha).unwrap();
        let q: f64 = f.iter().zip(&lf).map(|(a, b)| a * b).sum::<f64>() * g.dx();
        prop_assert!(q >= -1e-12);
        // per-mode multiplication oracle
        let spec = forward_transform(&f, &g).unwrap();
        let manual: Vec<Complex> = spec.coefficients().iter().enumerate()
            .map(|(i, c)| c * g.frequency(i).abs().powf(2.0 * alpha)).collect();
        let expect = inverse_transform(&SpectralField::from_coefficients(manual), &g).unwrap();
        for (x, y) in lf.iter().zip(&expect) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn gaussian_transform_matches_direct_quadrature() {
    let g = Grid::new(16.0 * PI, 512).unwrap();
    let f: Vec<f64> = g.points().iter().map(|x| (-x * x / 2.0).exp()).collect();
    let fast = forward_transform(&f, &g).unwrap();
    let slow = direct_transform(&f, &g).unwrap();
    for (i, (a, b)) in fast.coefficients().iter().zip(&slow).enumerate() {
        assert!((a - b).norm() <= 1e-10);
        assert!((a.re - (-g.frequency(i).powi(2) / 2.0).exp()).abs() <= 1e-10);
    }
}

#[test]
fn gaussian_norms() {
    let g = Grid::new(16.0 * PI, 512).unwrap();
    let f: Vec<f64> = g.points().iter().map(|x| (-x * x).exp()).collect();
    assert!((l2_norm(&f, &g).unwrap() - (PI / 2.0).powf(0.25)).abs() < 1e-12);
    let h2 = h2alpha_norm(&f, &g, 1.0).unwrap();
    assert!((h2 * h2 - 4.0 * (PI / 2.0).sqrt()).abs() < 1e-10);
}

#[test]
fn fractional_eigenfunctions() {
    let g = Grid::new(PI, 64).unwrap();
    let s: Vec<f64> = g.points().iter().map(|x| x.sin()).collect();
    let out = apply_fractional_laplacian(&s, &g, 0.5).unwrap();
    assert!(out.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-12));
    let s2: Vec<f64> = g.points().iter().map(|x| (2.0 * x).sin()).collect();
    let out = apply_fractional_laplacian(&s2, &g, 1.0).unwrap();
    assert!(out.iter().zip(&s2).all(|(a, b)| (a - 4.0 * b).abs() < 1e-12));
    assert!(apply_fractional_laplacian(&s, &g, 1.5).is_err());
    assert!(apply_fractional_laplacian(&s, &g, 0.0).is_err());
}
