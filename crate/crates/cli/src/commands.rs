//! The five subcommands, as pure-ish functions: given a resolved
//! configuration (and, for `simulate`/`estimate`, file paths) they produce
//! a rendered report plus a gate verdict that `main` maps onto the exit
//! status.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use speqt_core::{
    chsh, compose_bounds, count_transitions, dcr_correct, mle, naive_frequency_estimate,
    real_distribution, realistic_certificate, setup_angles, simulate, transition_matrix,
    verify_etilde_montecarlo, verify_factorization_distance, verify_s_bound_montecarlo,
    BoundBundle, Certificate, DistributionMode, EstimationResult, FactorizationDistanceReport,
    MonteCarloReport,
};

use crate::config::{settings_to_pairs, RunConfig};
use crate::report::{render, sidecar_path, SequenceSidecar, SCHEMA_VERSION};

/// Phase grid for the factorization-distance verification (radians).
const VERIFY_GRID_RESOLUTION: f64 = 1e-3;
/// Agreement tolerance for the factorization checks at that resolution.
const VERIFY_TOLERANCE: f64 = 1e-2;

/// What a command produced: the rendered report and whether its acceptance
/// gate (certified / zero violations; vacuously true elsewhere) passed.
pub struct Outcome {
    pub report: Vec<u8>,
    pub gate_passed: bool,
}

/// Composes the analytic error bounds for the configured setup and state.
pub fn cmd_bounds(config: &RunConfig, seed_override: Option<u64>) -> Result<Outcome> {
    let resolved = config.resolve(seed_override)?;
    let rho = config.resolve_state()?;
    let bundle: BoundBundle = compose_bounds(&config.setup, &rho)?;
    Ok(Outcome {
        report: render("bounds", Some(&resolved), &bundle)?,
        gate_passed: true,
    })
}

#[derive(serde::Serialize)]
struct CertifyResult {
    /// The settings actually used, `[phi, theta]` per pair.
    settings: [[f64; 2]; 4],
    /// Post-selected CHSH value of the real apparatus at those settings.
    s_real: f64,
    bounds: BoundBundle,
    certificate: Certificate,
}

/// Evaluates the post-selected CHSH value, composes the bounds, and emits
/// a min-entropy certificate. Gate: the certificate certifies positive
/// entropy.
pub fn cmd_certify(config: &RunConfig, seed_override: Option<u64>) -> Result<Outcome> {
    let resolved = config.resolve(seed_override)?;
    let rho = config.resolve_state()?;
    let settings = config.resolve_settings(&rho)?;
    let s_real = chsh(&settings, &rho, &config.setup, DistributionMode::Real)?;
    let bounds = compose_bounds(&config.setup, &rho)?;
    let certificate = realistic_certificate(s_real, &bounds)?;
    let gate_passed = certificate.certified;
    let result = CertifyResult {
        settings: settings_to_pairs(&settings),
        s_real,
        bounds,
        certificate,
    };
    Ok(Outcome {
        report: render("certify", Some(&resolved), &result)?,
        gate_passed,
    })
}

#[derive(serde::Serialize)]
struct SimulateResult {
    /// The `[phi, theta]` pair the events were generated at (setting 0).
    setting: [f64; 2],
    /// Post-selected channel distribution of the optics at that setting.
    optical_channels: [f64; 4],
    /// Chain distribution after the dark-count admixture.
    chain_p: [f64; 4],
    n_events: usize,
    seed: u64,
}

/// Simulates a detection-event sequence: maps the real-mode outcome
/// distribution at setting pair 0 onto channels 0–3, folds in dark counts,
/// builds the detector chain, and writes the binary sequence plus its JSON
/// sidecar.
pub fn cmd_simulate(
    config: &RunConfig,
    seed_override: Option<u64>,
    sequence_out: &Path,
) -> Result<Outcome> {
    let resolved = config.resolve(seed_override)?;
    if resolved.n_events == 0 {
        bail!("n_events must be at least 1");
    }
    let rho = config.resolve_state()?;
    let settings = config.resolve_settings(&rho)?;
    let setting = settings[0];
    let optical = real_distribution(&rho, &setting, &config.setup)?.channels();
    let chain_p = dcr_correct(optical, resolved.detector.dcr_fraction)?;
    let model = transition_matrix(
        chain_p,
        resolved.detector.afterpulse_prob,
        resolved.detector.epsilon,
    )?;
    let events = simulate(&model, resolved.n_events, None, resolved.seed)?;

    fs::write(sequence_out, &events)
        .with_context(|| format!("writing sequence {}", sequence_out.display()))?;
    let sidecar = SequenceSidecar {
        schema_version: SCHEMA_VERSION.into(),
        p: chain_p,
        p_a: resolved.detector.afterpulse_prob,
        epsilon: resolved.detector.epsilon,
        dcr_fraction: resolved.detector.dcr_fraction,
        seed: resolved.seed,
        n: resolved.n_events,
    };
    let sidecar_file = sidecar_path(sequence_out);
    fs::write(&sidecar_file, crate::report::to_precise_json(&sidecar)?)
        .with_context(|| format!("writing sidecar {}", sidecar_file.display()))?;

    let result = SimulateResult {
        setting: [setting.phi, setting.theta],
        optical_channels: optical,
        chain_p,
        n_events: resolved.n_events,
        seed: resolved.seed,
    };
    Ok(Outcome {
        report: render("simulate", Some(&resolved), &result)?,
        gate_passed: true,
    })
}

#[derive(serde::Serialize)]
struct EstimateResult {
    /// Calibration and provenance read from the sequence sidecar.
    sidecar: SequenceSidecar,
    /// Dead-time-corrected frequency estimate (diagnostic and initializer).
    naive: [f64; 4],
    estimate: EstimationResult,
    /// Whether each sidecar reference probability falls inside the
    /// estimated confidence interval.
    reference_within_ci: [bool; 4],
}

/// Estimates the channel distribution of a recorded sequence by maximum
/// likelihood, using the calibration stored in the sidecar.
pub fn cmd_estimate(sequence: &Path, level: f64) -> Result<Outcome> {
    let events = fs::read(sequence)
        .with_context(|| format!("reading sequence {}", sequence.display()))?;
    let sidecar_file = sidecar_path(sequence);
    let sidecar: SequenceSidecar = serde_json::from_slice(
        &fs::read(&sidecar_file)
            .with_context(|| format!("reading sidecar {}", sidecar_file.display()))?,
    )
    .with_context(|| format!("parsing sidecar {}", sidecar_file.display()))?;
    if sidecar.n != events.len() {
        bail!(
            "sidecar records {} events but the sequence holds {}",
            sidecar.n,
            events.len()
        );
    }

    let counts = count_transitions(&events)?;
    let naive = naive_frequency_estimate(&counts, sidecar.epsilon)?;
    let estimate = mle(&counts, sidecar.p_a, sidecar.epsilon, level)?;
    let reference_within_ci = std::array::from_fn(|k| {
        estimate.ci_lower[k] <= sidecar.p[k] && sidecar.p[k] <= estimate.ci_upper[k]
    });
    let result = EstimateResult {
        sidecar,
        naive,
        estimate,
        reference_within_ci,
    };
    Ok(Outcome {
        report: render("estimate", None, &result)?,
        gate_passed: true,
    })
}

#[derive(serde::Serialize)]
struct VerifyResult {
    factorization: FactorizationDistanceReport,
    factorization_tolerance: f64,
    /// Both factorization checks within tolerance: numeric vs closed form,
    /// and restricted vs general family.
    factorization_consistent: bool,
    etilde: MonteCarloReport,
    s_bound: MonteCarloReport,
    total_violations: usize,
}

/// Runs the numerical verification suites for the configured setup: the
/// factorization-distance identity and both Monte-Carlo bound checks.
/// Gate: zero violations overall.
pub fn cmd_verify(config: &RunConfig, seed_override: Option<u64>, trials: usize) -> Result<Outcome> {
    let resolved = config.resolve(seed_override)?;
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let (angles1, angles2) = setup_angles(&config.setup)?;
    let factorization = verify_factorization_distance(angles1, angles2, VERIFY_GRID_RESOLUTION)?;
    let factorization_consistent = factorization.gap.abs() <= VERIFY_TOLERANCE
        && (factorization.general_numeric - factorization.numeric).abs() <= VERIFY_TOLERANCE;
    let etilde = verify_etilde_montecarlo(&config.setup, trials, resolved.seed)?;
    let s_bound = verify_s_bound_montecarlo(&config.setup, trials, resolved.seed)?;
    let total_violations =
        etilde.violations + s_bound.violations + usize::from(!factorization_consistent);
    let result = VerifyResult {
        factorization,
        factorization_tolerance: VERIFY_TOLERANCE,
        factorization_consistent,
        etilde,
        s_bound,
        total_violations,
    };
    Ok(Outcome {
        gate_passed: total_violations == 0,
        report: render("verify", Some(&resolved), &result)?,
    })
}
