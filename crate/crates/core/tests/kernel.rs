use kolmo_core::kernel::*;
use kolmo_core::Error;
use proptest::prelude::*;

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn cauchy_spectral_matches_closed_form() {
    let s = KernelSpec::new(1.0, 1, 4096.0, 1 << 17, KernelMethod::SpectralInversion);
    let k = kernel_eval(&s, 0.25).unwrap();
    let grid = s.grid().unwrap();
    let exact: Vec<f64> = (0..grid.len())
        .map(|i| cauchy_kernel(0.25, &grid.point(i)))
        .collect();
    assert!(sup_diff(&k.values, &exact) < 1e-6);
    assert!((k.mass - 1.0).abs() < 1e-4);
    assert!(k.min_value > -1e-8);
}

#[test]
fn cauchy_on_short_torus_reports_boundary_mass() {
    let s = KernelSpec::new(1.0, 1, 512.0, 1 << 14, KernelMethod::SpectralInversion);
    match kernel_eval(&s, 0.25) {
        Err(Error::MassDeficit { boundary_mass, .. }) => assert!(boundary_mass > 1e-4),
        other => panic!("expected MassDeficit, got {other:?}"),
    }
}

#[test]
fn gaussian_two_dimensional_oracle() {
    let s = KernelSpec::new(2.0, 2, 40.0, 128, KernelMethod::SpectralInversion);
    let k = kernel_eval(&s, 1.0).unwrap();
    let grid = s.grid().unwrap();
    let exact: Vec<f64> = (0..grid.len())
        .map(|i| gaussian_kernel(1.0, &grid.point(i)))
        .collect();
    assert!(sup_diff(&k.values, &exact) < 1e-12);
    assert!((k.values[grid.len() / 2 + 64] - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-12);
}

#[test]
fn semigroup_across_alpha() {
    for &alpha in &[0.5, 1.0, 1.5, 2.0] {
        let s = KernelSpec::new(alpha, 1, 256.0, 1 << 14, KernelMethod::SpectralInversion);
        let a = kernel_eval_unchecked(&s, 0.3).unwrap();
        let b = kernel_eval_unchecked(&s, 0.5).unwrap();
        let ab = kernel_eval_unchecked(&s, 0.8).unwrap();
        let conv = kernel_convolve(&a, &b.values).unwrap();
        let peak = ab.values.iter().cloned().fold(0.0, f64::max);
        assert!(
            sup_diff(&conv, &ab.values) < 1e-10 * peak.max(1.0),
            "alpha = {alpha}"
        );
    }
}

#[test]
fn positivity_on_resolved_grids() {
    for &(alpha, n) in &[
        (0.5, 1 << 15),
        (1.0, 1 << 14),
        (1.5, 1 << 12),
        (2.0, 1 << 10),
    ] {
        let s = KernelSpec::new(alpha, 1, 64.0, n, KernelMethod::SpectralInversion);
        let k = kernel_eval_unchecked(&s, 1.0).unwrap();
        assert!(k.min_value >= -1e-8, "alpha = {alpha}: {}", k.min_value);
    }
}

#[test]
fn convolution_is_an_l_infinity_contraction() {
    let s = KernelSpec::new(1.5, 1, 1024.0, 1 << 13, KernelMethod::SpectralInversion);
    let k = kernel_eval(&s, 0.7).unwrap();
    let grid = s.grid().unwrap();
    let g: Vec<f64> = (0..grid.len())
        .map(|i| (3.0 * grid.point(i)[0]).sin().signum())
        .collect();
    let out = kernel_convolve(&k, &g).unwrap();
    let sup = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(sup <= 1.0 + s.mass_tol);
}

#[test]
fn spec_json_shape() {
    let s: KernelSpec = serde_json::from_str(
        r#"{"alpha": 2.0, "d": 1, "L": 40.0, "n": 256, "method": "closed_form"}"#,
    )
    .unwrap();
    assert_eq!(s.method, KernelMethod::ClosedForm);
    assert_eq!(s.mass_tol, DEFAULT_MASS_TOL);
    assert!(serde_json::from_str::<KernelSpec>(
        r#"{"alpha": 2.0, "d": 1, "L": 40.0, "n": 256, "extra": 1}"#
    )
    .is_err());
    let bad = KernelSpec::new(1.5, 1, 40.0, 256, KernelMethod::ClosedForm);
    assert!(kernel_eval(&bad, 1.0).is_err());
}

#[test]
fn csv_export() {
    let s = KernelSpec::new(2.0, 1, 40.0, 8, KernelMethod::ClosedForm);
    let k = kernel_eval_unchecked(&s, 1.0).unwrap();
    let mut buf = Vec::new();
    k.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,value");
    assert_eq!(lines.len(), 9);
}

#[test]
fn laplacian_linearity() {
    let f1 = |x: &[f64]| (-0.5 * x[0] * x[0]).exp();
    let f2 = |x: &[f64]| 1.0 / (1.0 + x[0] * x[0]);
    let q = PvQuad::default();
    let (a, b) = (2.0, -0.7);
    let comb = |x: &[f64]| a * f1(x) + b * f2(x);
    for &x in &[0.0, 0.4, -1.3] {
        let l = frac_laplacian_apply(&comb, &[x], 1.2, &q).unwrap();
        let r1 = frac_laplacian_apply(&f1, &[x], 1.2, &q).unwrap();
        let r2 = frac_laplacian_apply(&f2, &[x], 1.2, &q).unwrap();
        assert!((l.value - (a * r1.value + b * r2.value)).abs() < 1e-6);
    }
}

#[test]
fn laplacian_matches_spectral_symbol_off_origin() {
    // (−Δ)^{α/2} on a Gaussian evaluated through its Fourier multiplier.
    let alpha = 1.0;
    let x = 0.7;
    let gl = kolmo_core::quadrature::GaussLegendre::get(64);
    let mut oracle = 0.0;
    for k in 0..40 {
        let (a, b) = (0.25 * k as f64, 0.25 * (k + 1) as f64);
        oracle += gl.integrate(a, b, |xi: f64| {
            xi.powf(alpha) * (-0.5 * xi * xi).exp() * (xi * x).cos()
        });
    }
    oracle *= 2.0 * (2.0 * std::f64::consts::PI).sqrt() / (2.0 * std::f64::consts::PI);
    let got = frac_laplacian_apply(
        &|z: &[f64]| (-0.5 * z[0] * z[0]).exp(),
        &[x],
        alpha,
        &PvQuad::default(),
    )
    .unwrap();
    assert!(
        (got.value - oracle).abs() < 1e-6,
        "{} vs {oracle}",
        got.value
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_identity(alpha in 0.6f64..2.0, t in 0.2f64..3.0) {
        let n = 1024;
        let base = KernelSpec::new(alpha, 1, 32.0, n, KernelMethod::SpectralInversion);
        let scaled = KernelSpec { extent: 32.0 * t.powf(1.0 / alpha), ..base };
        let k1 = kernel_eval_unchecked(&base, 1.0).unwrap();
        let kt = kernel_eval_unchecked(&scaled, t).unwrap();
        let factor = t.powf(-1.0 / alpha);
        for (a, b) in kt.values.iter().zip(&k1.values) {
            prop_assert!((a - factor * b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn mass_is_one(alpha in 0.5f64..2.0, t in 0.1f64..2.0) {
        let s = KernelSpec::new(alpha, 1, 64.0, 256, KernelMethod::SpectralInversion);
        let k = kernel_eval_unchecked(&s, t).unwrap();
        prop_assert!((k.mass - 1.0).abs() < 1e-12);
    }
}
