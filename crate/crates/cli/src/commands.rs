use serde::Serialize;

use kolmo_core::chaining::{
    chaining_report, generate_field, holder_exponent_fit, moment_hypothesis_check, ChainingOptions,
    HolderFit, MomentReport,
};
use kolmo_core::levy::{
    compensated_integral_with, kunita_check, sample_prm_seeded, Compensator, InequalityReport,
    Integrand,
};
use kolmo_core::modulus::{
    admissibility, theta_window, AdmissibilityOptions, ModulusFunction, ModulusSpec, Outcome,
    ThetaWindow,
};
use kolmo_core::spde::{
    forcing_linfty_check, holder_conclusion_check, modulus_estimate_check, sup_bound_check,
    Ensemble, HolderCheckOptions, HolderReport, ModulusCheckOptions, ModulusEstimateReport,
};
use kolmo_core::stats::Summary;
use kolmo_core::{exec, Error};

use crate::config::{ChainConfig, LevyVerifyConfig, ModulusCheckConfig, SpdeRunConfig};
use crate::output::{CliError, Run, Status};

fn outcome_status(o: Outcome) -> Status {
    match o {
        Outcome::Certified => Status::Pass,
        Outcome::Failed => Status::Fail,
        Outcome::Inconclusive => Status::Inconclusive,
    }
}

/// Moment-ratio reports: a non-finite ratio is a violation, drift across
/// batches only means the constant could not be pinned down.
fn inequality_status(r: &InequalityReport) -> Status {
    if !r.ratio.is_finite() {
        Status::Fail
    } else if r.consistent {
        Status::Pass
    } else {
        Status::Inconclusive
    }
}

fn default_theta(window: ThetaWindow) -> Result<f64, CliError> {
    window
        .midpoint()
        .ok_or_else(|| CliError::usage("the theta window is empty; no admissible theta exists"))
}

#[derive(Serialize)]
struct EmptyWindow {
    modulus: ModulusSpec,
    gamma: f64,
    theta_window: ThetaWindow,
    outcome: Outcome,
}

pub fn modulus_check(cfg: &mut ModulusCheckConfig, run: &mut Run) -> Result<Status, CliError> {
    let phi = cfg.modulus.build()?;
    let window = theta_window(&phi, cfg.gamma)?;
    let theta = match (cfg.theta, window.midpoint()) {
        (Some(t), _) => t,
        (None, Some(mid)) => mid,
        (None, None) => {
            eprintln!("theta window is empty for gamma = {}", cfg.gamma);
            run.write_json(
                "admissibility.json",
                &EmptyWindow {
                    modulus: cfg.modulus,
                    gamma: cfg.gamma,
                    theta_window: window,
                    outcome: Outcome::Failed,
                },
            )?;
            return Ok(Status::Fail);
        }
    };
    cfg.theta = Some(theta);
    let defaults = AdmissibilityOptions::default();
    let opts = AdmissibilityOptions {
        i_max: cfg.i_max.unwrap_or(defaults.i_max),
        tail_method: cfg.tail_method.unwrap_or(defaults.tail_method),
        ratio_range: cfg.ratio_range,
        lambda_bound: cfg.lambda_bound,
        ..defaults
    };
    let report = admissibility(&phi, cfg.gamma, theta, &opts)?;
    run.write_json("admissibility.json", &report)?;
    Ok(outcome_status(report.outcome))
}

#[derive(Serialize)]
struct MomentOutput {
    hypothesis: MomentReport,
    holder_fit: Option<HolderFit>,
}

pub fn chain_estimate(cfg: &mut ChainConfig, run: &mut Run) -> Result<Status, CliError> {
    let phi = cfg.modulus.build()?;
    let theta = match cfg.theta {
        Some(t) => t,
        None => default_theta(theta_window(&phi, cfg.gamma)?)?,
    };
    if !(theta > 0.0 && theta < 1.0 / cfg.gamma) {
        return Err(CliError::usage(format!(
            "theta must lie in (0, 1/gamma), got {theta}"
        )));
    }
    cfg.theta = Some(theta);
    let field = generate_field(&cfg.field, cfg.seed)?;
    let opts = ChainingOptions {
        alpha: 1.0 / cfg.gamma - theta,
        mode: cfg.mode,
        i_max: cfg.i_max,
        probes: cfg.probes,
        pair_budget: cfg.pair_budget,
        pathwise: cfg.pathwise,
    };
    let report = chaining_report(&field, &phi, &opts)?;
    let mut k_csv = Vec::new();
    report.k.write_csv(&mut k_csv)?;
    let mut bound_csv = Vec::new();
    report.write_bound_csv(&mut bound_csv)?;
    let moment = MomentOutput {
        hypothesis: moment_hypothesis_check(&field, cfg.gamma, &phi, &cfg.moment)?,
        holder_fit: match holder_exponent_fit(&field, cfg.gamma, &cfg.moment) {
            Ok(f) => Some(f),
            Err(Error::DegenerateFit(_)) => None,
            Err(e) => return Err(e.into()),
        },
    };
    run.write_json("chaining.json", &report)?;
    run.write("k.csv", &k_csv)?;
    run.write("bound.csv", &bound_csv)?;
    run.write_json("moment.json", &moment)?;
    let status = if report.all_within_bound() && moment.hypothesis.consistent {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(status)
}

#[derive(Serialize)]
struct SampleCheck {
    expected: f64,
    sample: Summary,
    z_score: f64,
}

impl SampleCheck {
    fn new(values: &[f64], expected: f64) -> Self {
        let sample = Summary::of(values);
        let z_score = if sample.standard_error > 0.0 {
            (sample.mean - expected) / sample.standard_error
        } else if sample.mean == expected {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            expected,
            sample,
            z_score,
        }
    }

    fn within(&self, z: f64) -> bool {
        self.z_score.abs() <= z
    }
}

/// Atom counts and the isometry `E|I_T|² = ∫∫ ψ² ν dr`.
#[derive(Serialize)]
struct PoissonReport {
    n_rep: usize,
    seed: u64,
    z_threshold: f64,
    atom_count: SampleCheck,
    integral_mean: SampleCheck,
    isometry: SampleCheck,
}

const Z_THRESHOLD: f64 = 4.0;

pub fn levy_verify(cfg: &LevyVerifyConfig, run: &mut Run) -> Result<Status, CliError> {
    cfg.levy.validate()?;
    if cfg.p.is_empty() {
        return Err(CliError::usage("p must list at least one moment"));
    }
    let psi: Integrand = cfg.integrand.into();
    let comp = Compensator::new(&psi, &cfg.levy)?;
    let horizon = cfg.levy.horizon;
    let draws = exec::try_map_indexed(cfg.replications, |rep| {
        let sample = sample_prm_seeded(&cfg.levy, cfg.seed, rep as u64)?;
        let end = compensated_integral_with(&sample, &psi, &comp, &[horizon])?.values[0];
        Ok::<_, Error>((sample.len() as f64, end))
    })?;
    if draws.len() < 2 {
        return Err(CliError::usage("need at least two replications"));
    }
    let counts: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let ends: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let squares: Vec<f64> = ends.iter().map(|v| v * v).collect();
    let poisson = PoissonReport {
        n_rep: cfg.replications,
        seed: cfg.seed,
        z_threshold: Z_THRESHOLD,
        atom_count: SampleCheck::new(&counts, cfg.levy.intensity()),
        integral_mean: SampleCheck::new(&ends, 0.0),
        isometry: SampleCheck::new(&squares, psi.intensity_integral(&cfg.levy, 2.0)?),
    };
    let mut status = if [
        &poisson.atom_count,
        &poisson.integral_mean,
        &poisson.isometry,
    ]
    .iter()
    .all(|c| c.within(Z_THRESHOLD))
    {
        Status::Pass
    } else {
        Status::Fail
    };
    let mut reports = Vec::with_capacity(cfg.p.len());
    for &p in &cfg.p {
        let r = kunita_check(&psi, &cfg.levy, p, cfg.replications, cfg.seed)?;
        status = status.worst(inequality_status(&r));
        reports.push(r);
    }
    run.write_json("poisson.json", &poisson)?;
    run.write_json("kunita.json", &reports)?;
    Ok(status)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifySet {
    Modulus,
    Sup,
    Kunita,
}

#[derive(Serialize)]
struct ModulusOutput {
    estimate: ModulusEstimateReport,
    holder: HolderReport,
}

#[derive(Serialize)]
struct Skipped {
    skipped: String,
}

pub fn spde_run(
    cfg: &mut SpdeRunConfig,
    verify: &[VerifySet],
    run: &mut Run,
) -> Result<Status, CliError> {
    let experiment = cfg.experiment();
    let ens = experiment.ensemble()?;
    let d = cfg.kernel.d;
    let cert = ens.solver.forcing().certificate(d);
    let p = cfg
        .checks
        .p
        .or(cert.as_ref().map(|c| c.p))
        .unwrap_or(d as f64 + 1.0);
    cfg.checks.p = Some(p);
    let mut status = Status::Pass;

    if cfg.export_paths > 0 {
        let mut head = experiment.clone();
        head.replications = cfg.export_paths.min(cfg.replications);
        let field = head.ensemble()?.materialize()?;
        let mut csv = Vec::new();
        field.write_csv(&mut csv, cfg.c1)?;
        run.write("field.csv", &csv)?;
    }

    if verify.contains(&VerifySet::Modulus) {
        match cert.as_ref() {
            Some(cert) => {
                let (s, out) = spde_modulus(cfg, &ens, p, &cert.phi)?;
                status = status.worst(s);
                run.write_json("modulus.json", &out)?;
            }
            None => {
                eprintln!("forcing has no modulus certificate; modulus reports skipped");
                status = status.worst(Status::Inconclusive);
                run.write_json(
                    "modulus.json",
                    &Skipped {
                        skipped: "forcing has no modulus certificate".into(),
                    },
                )?;
            }
        }
    }
    if verify.contains(&VerifySet::Sup) {
        let r = sup_bound_check(&ens)?;
        status = status.worst(inequality_status(&r));
        run.write_json("sup.json", &r)?;
    }
    if verify.contains(&VerifySet::Kunita) {
        let mut wide = experiment.clone();
        wide.replications = cfg.checks.kunita_replications;
        match forcing_linfty_check(&wide.ensemble()?, p) {
            Ok(r) => {
                status = status.worst(inequality_status(&r));
                run.write_json("kunita.json", &r)?;
            }
            Err(Error::InvalidInput(msg)) => {
                eprintln!("kunita report skipped: {msg}");
                status = status.worst(Status::Inconclusive);
                run.write_json("kunita.json", &Skipped { skipped: msg })?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(status)
}

fn spde_modulus(
    cfg: &mut SpdeRunConfig,
    ens: &Ensemble,
    p: f64,
    phi: &ModulusFunction,
) -> Result<(Status, ModulusOutput), CliError> {
    let theta = match cfg.checks.theta {
        Some(t) => t,
        None => default_theta(theta_window(phi, p)?)?,
    };
    let beta = cfg.checks.beta.unwrap_or(1.0 / p - theta);
    let mopts = cfg.checks.modulus.unwrap_or(ModulusCheckOptions {
        c1: cfg.c1,
        ..ModulusCheckOptions::default()
    });
    let hopts = cfg.checks.holder.clone().unwrap_or(HolderCheckOptions {
        c1: cfg.c1,
        ..HolderCheckOptions::default()
    });
    let estimate = modulus_estimate_check(ens, p, phi, &mopts)?;
    let holder = holder_conclusion_check(ens, p, phi, theta, beta, &hopts)?;
    cfg.checks.theta = Some(theta);
    cfg.checks.beta = Some(beta);
    cfg.checks.modulus = Some(mopts);
    cfg.checks.holder = Some(hopts);
    let mut status = outcome_status(holder.admissibility);
    if !estimate.consistent || !holder.stable {
        status = Status::Fail;
    }
    Ok((status, ModulusOutput { estimate, holder }))
}
