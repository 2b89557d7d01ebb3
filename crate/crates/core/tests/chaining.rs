use kolmo_core::chaining::{
    build_grid, chain_path, chaining_report, dyadic_approximation, generate_field,
    moment_hypothesis_check, neighbor_pairs, reduction_factor, ChainingOptions, DyadicPoint,
    FieldConfig, FieldGenerator, FieldSample, MomentOptions, Norm,
};
use kolmo_core::modulus::ModulusFunction;
use proptest::prelude::*;

fn field(d: usize, m_max: u32, replications: usize, generator: FieldGenerator) -> FieldSample {
    let cfg = FieldConfig {
        d,
        m_max,
        time_points: 1,
        h_dim: 1,
        norm: Norm::Sup,
        replications,
        generator,
    };
    generate_field(&cfg, 5).unwrap()
}

#[test]
fn grid_sizes_and_pair_counts() {
    for d in 1..=3usize {
        for m in 0..=8u32 {
            let side = (1usize << m) + 1;
            let pairs = if (d as u32) * (m + 1) <= 21 {
                let grid = build_grid(d, m).unwrap();
                assert_eq!(grid.len(), side.pow(d as u32));
                let np = neighbor_pairs(&grid);
                let n = np.iter().count();
                assert_eq!(n, np.count());
                assert!(n as u128 <= np.count_bound());
                n as u128
            } else {
                (d * (side - 1) * side.pow(d as u32 - 1)) as u128
            };
            assert!(
                pairs <= d as u128 * (1u128 << ((m + 1) * d as u32)),
                "d={d} m={m}"
            );
        }
    }
}

#[test]
fn neighbour_pairs_differ_in_one_axis_by_one_step() {
    let grid = build_grid(3, 3).unwrap();
    let step = 1.0 / 8.0;
    for (a, b, axis) in neighbor_pairs(&grid).iter() {
        let (x, y) = (grid.coords(a), grid.coords(b));
        for k in 0..3 {
            let diff = y[k] - x[k];
            if k == axis {
                assert_eq!(diff, step);
            } else {
                assert_eq!(diff, 0.0);
            }
        }
    }
}

#[test]
fn approximation_examples() {
    assert_eq!(
        dyadic_approximation(&[0.3], 2).unwrap().coords(),
        vec![0.25]
    );
    assert_eq!(
        dyadic_approximation(&[0.3, 0.7], 1).unwrap().coords(),
        vec![0.0, 0.5]
    );
    assert_eq!(dyadic_approximation(&[1.0], 3).unwrap().coords(), vec![1.0]);
    assert!(dyadic_approximation(&[1.5], 3).is_err());
}

#[test]
fn linear_field_bound_and_seminorm() {
    let m = 8;
    let f = field(1, m, 1, FieldGenerator::Linear { slope: 1.0 });
    let alpha = 0.75;
    let r = chaining_report(
        &f,
        &ModulusFunction::power(1.0).unwrap(),
        &ChainingOptions::new(alpha),
    )
    .unwrap();
    for i in 0..=m as usize {
        assert!((r.k.get(0, i, 0) - (-(i as f64)).exp2()).abs() < 1e-15);
    }
    // C(1) = 2·1·2·2^α, terms φ^{-α}(2^{-i}) K_i = 2^{-(1-α) i}.
    let c = 4.0 * alpha.exp2();
    let expected: f64 = c
        * (0..=m)
            .map(|i| (-(1.0 - alpha) * i as f64).exp2())
            .sum::<f64>();
    assert!((r.c_d - c).abs() < 1e-12);
    assert!((r.chain_bound[0] - expected).abs() < 1e-12 * expected);
    assert!((r.seminorm_empirical[0] - 1.0).abs() < 1e-12);
    assert!(r.all_within_bound());
    assert!(r.pathwise.unwrap().holds());
}

#[test]
fn scaled_linear_lipschitz_seminorm() {
    let f = field(2, 4, 1, FieldGenerator::Linear { slope: -2.5 });
    let r = chaining_report(
        &f,
        &ModulusFunction::power(1.0).unwrap(),
        &ChainingOptions::new(1.0),
    )
    .unwrap();
    assert!((r.seminorm_empirical[0] - 2.5).abs() < 1e-12);
    assert!(r.all_within_bound());
}

#[test]
fn brownian_sheet_increments_bounded() {
    let f = field(2, 5, 20, FieldGenerator::Brownian);
    let r = chaining_report(
        &f,
        &ModulusFunction::power(1.0).unwrap(),
        &ChainingOptions::new(0.25),
    )
    .unwrap();
    assert!(r.all_within_bound());
    let pw = r.pathwise.unwrap();
    assert!(pw.holds() && pw.checked > 0);
}

#[test]
fn reduction_factor_is_one_when_modulus_below_one() {
    assert_eq!(
        reduction_factor(&ModulusFunction::power(1.0).unwrap(), 1, 0.2, 0.6).unwrap(),
        1.0
    );
    let quarter = ModulusFunction::custom("quarter", |r| r / 4.0);
    for d in 1..=4 {
        assert_eq!(reduction_factor(&quarter, d, 0.2, 0.6).unwrap(), 1.0);
    }
    let f = reduction_factor(&ModulusFunction::power(1.0).unwrap(), 4, 0.2, 0.6).unwrap();
    assert!((f - 2f64.powf(0.4)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn approximation_refines(x in proptest::collection::vec(0.0f64..=1.0, 1..4), m in 0u32..20) {
        let coarse = dyadic_approximation(&x, m).unwrap().coords();
        let fine = dyadic_approximation(&x, m + 1).unwrap().coords();
        for k in 0..x.len() {
            prop_assert!(coarse[k] <= fine[k] && fine[k] <= x[k]);
            prop_assert!(x[k] - coarse[k] < (-(m as f64)).exp2() || x[k] == 1.0);
        }
    }

    #[test]
    fn chain_paths_are_short(
        m in 1u32..12,
        raw in proptest::collection::vec((0u64..1 << 12, -1i64..=1), 1..4),
    ) {
        let top = 1u64 << m;
        let a: Vec<u64> = raw.iter().map(|(n, _)| n % top).collect();
        let b: Vec<u64> = raw.iter().zip(&a).map(|((_, s), &n)| (n as i64 + s).clamp(0, top as i64) as u64).collect();
        let (pa, pb) = (DyadicPoint::new(m, a).unwrap(), DyadicPoint::new(m, b).unwrap());
        let path = chain_path(&pa, &pb).unwrap();
        prop_assert!(path.len() <= pa.dim());
        let mut here = pa.coords();
        for seg in &path {
            prop_assert_eq!(seg.from.coords(), here.clone());
            prop_assert!((seg.length() - (-(m as f64)).exp2()).abs() < 1e-15);
            here = seg.to.coords();
        }
        prop_assert_eq!(here, pb.coords());
    }

    #[test]
    fn scaled_noise_moment_slope(seed in 0u64..1000) {
        let cfg = FieldConfig {
            d: 1,
            m_max: 6,
            time_points: 1,
            h_dim: 1,
            norm: Norm::Sup,
            replications: 50,
            generator: FieldGenerator::ScaledNoise,
        };
        let f = generate_field(&cfg, seed).unwrap();
        let r = moment_hypothesis_check(&f, 2.0, &ModulusFunction::power(1.0).unwrap(), &MomentOptions::default())
            .unwrap();
        prop_assert!((r.fit_distance.unwrap().slope - 2.0).abs() < 1e-9);
        prop_assert!(r.consistent);
    }
}
