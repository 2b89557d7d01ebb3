use kolmo_core::modulus::{
    dyadic_sum, log_hypothesis_holds, loglog_constants, ratio_condition, theta_window,
    ModulusFunction, TailMethod, Verdict,
};
use proptest::prelude::*;

const ZETA_3_2: f64 = 2.612_375_348_685_488;

#[test]
fn log_power_sum_matches_zeta() {
    // Terms are (log 2)^{-3/2} at i = 0 and (i log 2)^{-3/2} after.
    let phi = ModulusFunction::log_power(2.0).unwrap();
    let s = dyadic_sum(&phi, 0.75, 100_000, TailMethod::IntegralBound).unwrap();
    let exact = 2f64.ln().powf(-1.5) * (1.0 + ZETA_3_2);
    assert_eq!(s.verdict, Verdict::Converges);
    assert!(s.partial_sum < exact);
    assert!(s.upper_estimate().unwrap() >= exact * (1.0 - 1e-12));
    assert!(s.upper_estimate().unwrap() - exact < 1e-2);
}

#[test]
fn inverse_log_diverges() {
    let phi = ModulusFunction::custom("inv_log", |r| {
        if r < 0.5 {
            -1.0 / r.ln()
        } else {
            1.0 / 2f64.ln()
        }
    });
    let s = dyadic_sum(&phi, 1.0, 1000, TailMethod::IntegralBound).unwrap();
    assert_eq!(s.verdict, Verdict::Diverges);
}

#[test]
fn loglog_large_beta_limit() {
    let c = loglog_constants(1e6, 1.0).unwrap();
    assert!((c.r0 - (-1f64).exp()).abs() < 1e-5);
    assert_eq!(c.n0, 2);
}

#[test]
fn windows_for_reference_pairs() {
    let phi = ModulusFunction::log_power(2.0).unwrap();
    let w = theta_window(&phi, 1.0).unwrap();
    assert!(w.contains(0.75) && !w.contains(0.5) && !w.contains(1.0));
    assert!(theta_window(&phi, 2.0).unwrap().is_empty());
    assert!(theta_window(&ModulusFunction::log_power(3.0).unwrap(), 0.3)
        .unwrap()
        .is_empty());
    let w = theta_window(&ModulusFunction::log_power(3.0).unwrap(), 0.4).unwrap();
    assert!(w.contains(2.0) && !w.contains(0.8));
}

proptest! {
    #[test]
    fn power_sum_is_geometric(eps in 0.2f64..2.0, theta in 0.2f64..1.0) {
        let q = (-eps * theta).exp2();
        let i_max = (45.0 / (eps * theta)).ceil() as usize;
        let s = dyadic_sum(&ModulusFunction::power(eps).unwrap(), theta, i_max, TailMethod::RatioTest).unwrap();
        prop_assert!((s.partial_sum - 1.0 / (1.0 - q)).abs() < 1e-9);
    }

    #[test]
    fn log_power_ratio_closed_form(beta in 0.5f64..6.0) {
        let r = ratio_condition(&ModulusFunction::log_power(beta).unwrap(), 1, 64, None).unwrap();
        prop_assert!(r.holds);
        for p in &r.ratios {
            let n = p.n as f64;
            prop_assert!((p.ratio - (1.0 + 1.0 / n).powf(beta)).abs() < 1e-12 * (1.0 + 1.0 / n).powf(beta));
        }
    }

    #[test]
    fn window_empty_iff_hypothesis_fails(beta in 0.1f64..6.0, gamma in 0.1f64..6.0) {
        let w = theta_window(&ModulusFunction::log_power(beta).unwrap(), gamma).unwrap();
        let oracle = beta > 1.0 && if gamma >= 1.0 { beta > gamma } else { beta * gamma > 1.0 };
        prop_assert_eq!(w.is_empty(), !oracle);
        prop_assert_eq!(log_hypothesis_holds(beta, gamma), oracle);
    }

    #[test]
    fn loglog_level_brackets_r0(beta in 0.2f64..8.0, k0 in 0.2f64..5.0) {
        let c = loglog_constants(beta, k0).unwrap();
        let expected = (-(1.0 / beta).exp() / k0).exp();
        prop_assert!((c.r0 - expected).abs() <= 1e-15 * expected.max(1e-300));
        prop_assert!((-(c.n0 as f64)).exp2() <= c.r0);
        prop_assert!(c.n0 == 1 || c.r0 < (1.0 - c.n0 as f64).exp2());
    }

    #[test]
    fn builtins_nondecreasing(a in 1e-12f64..0.99, b in 1e-12f64..0.99, which in 0usize..3, beta in 1.1f64..4.0) {
        let phi = match which {
            0 => ModulusFunction::power(beta / 4.0).unwrap(),
            1 => ModulusFunction::log_power(beta).unwrap(),
            _ => ModulusFunction::log_log(beta, 1.0).unwrap(),
        };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(phi.eval(lo).unwrap() <= phi.eval(hi).unwrap() * (1.0 + 1e-12));
    }
}
