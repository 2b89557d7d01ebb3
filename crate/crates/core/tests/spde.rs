use kolmo_core::exec;
use kolmo_core::kernel::{KernelMethod, KernelSpec};
use kolmo_core::levy::{
    sample_prm_seeded, LevyConfig, MarkFactor, PoissonMeasureSample, SpaceProfile, TimeFactor,
};
use kolmo_core::modulus::ModulusFunction;
use kolmo_core::spde::*;
use kolmo_core::Error;

fn eigen_amplitude(sample: &PoissonMeasureSample, t: f64, left: bool) -> f64 {
    let jumps: f64 = sample
        .atoms
        .iter()
        .filter(|a| a.t < t || (a.t == t && !left))
        .map(|a| a.v[0] * (-(t - a.t)).exp())
        .sum();
    jumps - (1.0 - (-t).exp())
}

fn config(alpha: f64, reps: usize) -> SpdeConfig {
    let mut c = SpdeConfig::default_eigen(alpha);
    c.replications = reps;
    c
}

fn check_eigen_oracle(ens: &Ensemble, reps: usize) {
    let grid = *ens.solver.grid();
    for rep in 0..reps {
        let sample = ens.sample(rep).unwrap();
        let path = ens.path(rep).unwrap();
        for ti in 0..path.len() {
            let a = eigen_amplitude(&sample, path.times[ti], path.left_limit[ti]);
            let scale = a.abs().max(1e-3);
            for i in (0..grid.len()).step_by(7) {
                let exact = a * grid.point(i)[0].sin();
                assert!(
                    (path.values[ti][i] - exact).abs() <= 1e-6 * scale,
                    "rep {rep}, t {}",
                    path.times[ti]
                );
            }
        }
    }
}

#[test]
fn eigenfunction_oracle_gaussian_kernel() {
    let ens = config(2.0, 20).ensemble().unwrap();
    check_eigen_oracle(&ens, 20);
}

#[test]
fn eigenfunction_oracle_cauchy_kernel() {
    let mut c = config(1.0, 10);
    assert!(matches!(c.ensemble(), Err(Error::MassDeficit { .. })));
    c.solver.check_mass = false;
    check_eigen_oracle(&c.ensemble().unwrap(), 10);
}

#[test]
fn zero_forcing_gives_zero() {
    let mut c = config(2.0, 5);
    c.forcing = ForcingSpec::Zero;
    let ens = c.ensemble().unwrap();
    for rep in 0..5 {
        let p = ens.path(rep).unwrap();
        assert!(p.values.iter().flatten().all(|v| *v == 0.0));
    }
}

#[test]
fn starts_at_zero_and_jumps_by_forcing() {
    let ens = config(2.0, 30).ensemble().unwrap();
    let grid = *ens.solver.grid();
    for rep in 0..30 {
        let sample = ens.sample(rep).unwrap();
        let path = ens.path(rep).unwrap();
        assert!(path.values[path.index_of(0.0).unwrap()]
            .iter()
            .all(|v| *v == 0.0));
        for a in &sample.atoms {
            let left = (0..path.len())
                .find(|&i| path.times[i] == a.t && path.left_limit[i])
                .unwrap();
            let right = (0..path.len())
                .find(|&i| path.times[i] == a.t && !path.left_limit[i])
                .unwrap();
            for i in 0..grid.len() {
                let jump = path.values[right][i] - path.values[left][i];
                let g = a.v[0] * grid.point(i)[0].sin();
                assert!((jump - g).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn before_first_atom_only_compensator() {
    let c = config(2.0, 1);
    let solver = c.solver().unwrap();
    let sample = PoissonMeasureSample {
        atoms: vec![kolmo_core::levy::Atom {
            t: 0.6,
            v: vec![0.4],
        }],
        horizon: 1.0,
        seed: 0,
        replication: 0,
    };
    let path = solver
        .solve(&sample, &[0.0, 0.3, 0.5, 0.6, 1.0], false)
        .unwrap();
    for ti in 0..3 {
        assert!(path.jump_part[ti].iter().all(|v| *v == 0.0));
        let diff = path.values[ti]
            .iter()
            .zip(&path.compensator_part[ti])
            .all(|(u, c)| *u == -c);
        assert!(diff);
    }
}

#[test]
fn time_quadrature_matches_closed_form() {
    // g = r · v · sin x: the compensator is ν(E) E[v] (t − 1 + e^{−t}) sin x.
    let mut c = config(2.0, 1);
    c.forcing = ForcingSpec::Separable {
        time: TimeFactor {
            coef: 1.0,
            exponent: 1.0,
        },
        mark: MarkFactor::Identity,
        space: SpaceSpec::Sine {
            freq: 1.0,
            phase: 0.0,
        },
    };
    let solver = c.solver().unwrap();
    let empty = PoissonMeasureSample {
        atoms: vec![],
        horizon: 1.0,
        seed: 0,
        replication: 0,
    };
    let times = uniform_times(1.0, 9);
    let path = solver.solve(&empty, &times, false).unwrap();
    let grid = *solver.grid();
    for (ti, &t) in times.iter().enumerate() {
        let amp = t - 1.0 + (-t).exp();
        for i in (0..grid.len()).step_by(13) {
            assert!((path.compensator_part[ti][i] - amp * grid.point(i)[0].sin()).abs() < 1e-9);
        }
    }
}

#[test]
fn custom_forcing_matches_separable() {
    let kernel = KernelSpec::new(
        2.0,
        1,
        10.0 * std::f64::consts::PI,
        256,
        KernelMethod::SpectralInversion,
    );
    let levy = LevyConfig::uniform(2.0, 1.0, 1.0);
    let sep = Forcing::Separable {
        time: TimeFactor {
            coef: 1.0,
            exponent: 0.5,
        },
        mark: MarkFactor::Identity,
        space: SpaceProfile::Gaussian { width: 0.7 },
    };
    let custom = Forcing::custom("same", |t, v, x| {
        t.sqrt() * v[0] * (-x[0] * x[0] / 0.98).exp()
    });
    let sample = sample_prm_seeded(&levy, 7, 3).unwrap();
    let times = uniform_times(1.0, 5);
    let a = mild_solution(
        &sample,
        sep,
        kernel,
        levy.clone(),
        &times,
        SolverOptions::default(),
    )
    .unwrap();
    let b = mild_solution(
        &sample,
        custom,
        kernel,
        levy,
        &times,
        SolverOptions::default(),
    )
    .unwrap();
    for (u, w) in a.values.iter().zip(&b.values) {
        for (x, y) in u.iter().zip(w) {
            assert!((x - y).abs() < 1e-7);
        }
    }
}

#[test]
fn linear_in_forcing() {
    let kernel = KernelSpec::new(1.5, 1, 64.0, 512, KernelMethod::SpectralInversion);
    let levy = LevyConfig::uniform(2.0, 1.0, 1.0);
    let g1 = Forcing::eigen();
    let g2 = Forcing::Separable {
        time: TimeFactor {
            coef: 2.0,
            exponent: 0.5,
        },
        mark: MarkFactor::One,
        space: SpaceProfile::Gaussian { width: 1.0 },
    };
    let (a, b) = (1.5, -0.25);
    let comb = Forcing::Combination(vec![(a, g1.clone()), (b, g2.clone())]);
    let opts = SolverOptions {
        check_mass: false,
        ..SolverOptions::default()
    };
    let times = uniform_times(1.0, 11);
    for rep in 0..5 {
        let sample = sample_prm_seeded(&levy, 99, rep).unwrap();
        let u1 = mild_solution(&sample, g1.clone(), kernel, levy.clone(), &times, opts).unwrap();
        let u2 = mild_solution(&sample, g2.clone(), kernel, levy.clone(), &times, opts).unwrap();
        let uc = mild_solution(&sample, comb.clone(), kernel, levy.clone(), &times, opts).unwrap();
        for ti in 0..times.len() {
            for i in 0..512 {
                let lin = a * u1.values[ti][i] + b * u2.values[ti][i];
                assert!((uc.values[ti][i] - lin).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn compensated_solution_is_centered() {
    let ens = config(2.0, 2000).ensemble().unwrap();
    let grid = *ens.solver.grid();
    let x = (0..grid.len())
        .min_by(|&a, &b| {
            let d = |i: usize| (grid.point(i)[0] - std::f64::consts::FRAC_PI_2).abs();
            d(a).total_cmp(&d(b))
        })
        .unwrap();
    let vals = ens
        .map(|p| Ok(p.values[p.index_of(0.5).unwrap()][x]))
        .unwrap();
    let m = kolmo_core::stats::mean(&vals);
    let se = kolmo_core::stats::standard_error(&vals);
    assert!(m.abs() < 4.0 * se, "mean {m}, se {se}");
}

#[test]
fn modulus_estimate_slope() {
    let ens = config(2.0, 1000).ensemble().unwrap();
    let phi = ModulusFunction::power(1.0).unwrap();
    let r = modulus_estimate_check(&ens, 2.0, &phi, &ModulusCheckOptions::default()).unwrap();
    let slope = r.fit_distance.as_ref().unwrap().slope;
    assert!((slope - 2.0).abs() < 0.15, "slope {slope}");
    assert!(r.consistent);
    let small = config(2.0, 50).ensemble().unwrap();
    assert!(matches!(
        modulus_estimate_check(&small, 2.0, &phi, &ModulusCheckOptions::default()),
        Err(Error::InsufficientReplications { .. })
    ));
}

#[test]
fn zero_forcing_reports() {
    let mut c = config(2.0, 100);
    c.forcing = ForcingSpec::Zero;
    let ens = c.ensemble().unwrap();
    let phi = ModulusFunction::power(1.0).unwrap();
    let m = modulus_estimate_check(&ens, 2.0, &phi, &ModulusCheckOptions::default()).unwrap();
    assert!(m.all_zero && m.consistent);
    let h = holder_conclusion_check(&ens, 2.0, &phi, 0.25, 0.25, &HolderCheckOptions::default())
        .unwrap();
    assert!(h.levels.iter().all(|l| l.estimate == 0.0) && h.stable);
    let s = sup_bound_check(&ens).unwrap();
    assert_eq!((s.lhs_estimate, s.rhs_total), (0.0, 0.0));
}

#[test]
fn holder_seminorm_stable_and_monotone_in_beta() {
    let ens = config(2.0, 200).ensemble().unwrap();
    let phi = ModulusFunction::power(1.0).unwrap();
    let opts = HolderCheckOptions::default();
    let r = holder_conclusion_check(&ens, 2.0, &phi, 0.25, 0.25, &opts).unwrap();
    assert!(r.stable, "{:?}", r.levels);
    assert_eq!(
        r.levels.iter().map(|l| l.points).collect::<Vec<_>>(),
        vec![17, 33, 65]
    );
    let opts = HolderCheckOptions {
        c1: 0.5,
        ..HolderCheckOptions::default()
    };
    let r = holder_conclusion_check(&ens, 2.0, &phi, 0.25, 0.25, &opts).unwrap();
    let smaller = holder_conclusion_check(&ens, 2.0, &phi, 0.25, 0.1, &opts).unwrap();
    for (a, b) in smaller.levels.iter().zip(&r.levels) {
        assert!(a.estimate <= b.estimate);
    }
    assert!(holder_conclusion_check(&ens, 2.0, &phi, 0.25, 0.3, &opts).is_err());
}

#[test]
fn sup_bound_rhs_and_stability() {
    let ens = config(2.0, 1000).ensemble().unwrap();
    let r = sup_bound_check(&ens).unwrap();
    assert!((r.rhs_total - 1.0).abs() < 1e-12);
    assert_eq!(r.batch_sizes, vec![100, 1000]);
    assert!(r.ratio > 0.0 && r.consistent, "{:?}", r.batch_ratios);
    let mut doubled = config(2.0, 100);
    doubled.levy.nu.total_mass = 4.0;
    let r2 = sup_bound_check(&doubled.ensemble().unwrap()).unwrap();
    assert_eq!(r2.rhs_total, 2.0 * r.rhs_total);
}

#[test]
fn lemma_passes_and_locates_violations() {
    let kernel = SpdeConfig::default_eigen(2.0).kernel;
    let probes = LemmaProbes::product(
        &[0.1, 0.5],
        &[vec![0.3], vec![0.9]],
        &[0.0, 0.01, 0.1, 1.0],
        1.0,
    );
    let ok = convolution_modulus_lemma(&Forcing::eigen(), &kernel, &probes).unwrap();
    assert!(ok.passed && ok.checked > 0);
    assert!(ok.max_ratio <= 1.0);

    let flat = Forcing::Separable {
        time: TimeFactor::constant(1.0),
        mark: MarkFactor::One,
        space: SpaceProfile::Constant(2.0),
    };
    let r = convolution_modulus_lemma(&flat, &kernel, &probes).unwrap();
    assert!(r.passed && r.max_ratio == 0.0);

    let liar = Forcing::custom("steep", |_, v, x| v[0] * (3.0 * x[0]).sin())
        .with_certificate(Certificate::lipschitz(1, |_, v| v[0].abs()).unwrap())
        .unwrap();
    let bad = convolution_modulus_lemma(&liar, &kernel, &probes).unwrap();
    assert!(!bad.passed);
    let w = bad.witness.unwrap();
    assert!(w.lhs > w.rhs);
}

#[test]
fn parallel_and_sequential_agree() {
    let ens = config(2.0, 16).ensemble().unwrap();
    let par = ens.materialize().unwrap();
    let seq = exec::sequential(|| ens.materialize()).unwrap();
    assert_eq!(par, seq);
}

#[test]
fn config_json_roundtrip() {
    let c = SpdeConfig::default_eigen(2.0);
    let json = serde_json::to_string(&c).unwrap();
    let back: SpdeConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, c);
    let mut narrow = c.clone();
    narrow.kernel.extent = 4.0;
    assert!(narrow.validate().is_err());
}
