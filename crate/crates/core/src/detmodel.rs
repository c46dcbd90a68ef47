//! Markov model of detector readouts with dead time, afterpulsing and dark
//! counts, its stationary analysis, and seeded sequence simulation.
//!
//! Successive detection events are not independent: an afterpulse repeats
//! the previous channel with probability `p_a`, and a photon arriving during
//! the dead time of the previous detection (probability `ε = η·λ·T_d` per
//! event) biases the next recorded channel. Dark counts mix a uniform
//! component into the per-event channel probabilities. The resulting
//! four-state chain has transition matrix
//! `P = p_a·I + (1−p_a)·((1−ε)·P̃ + ε·Q)`, where every row of `P̃` is the
//! channel distribution `p` and `Q` encodes the dead-time collision terms
//! `q_ii = p_i²`, `q_ij = p_j(1+p_i)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Error;

/// Physical detector parameters, from which the model's small parameters
/// are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Detection efficiency η, in (0, 1].
    pub efficiency: f64,
    /// Photon arrival rate λ, events per second.
    pub rate: f64,
    /// Dead time T_d, seconds.
    pub dead_time: f64,
    /// Afterpulse probability `p_a`, in [0, 0.05] (small-parameter regime).
    pub afterpulse_prob: f64,
    /// Fraction of recorded events that are dark counts, in [0, 1).
    pub dcr_fraction: f64,
    /// Afterpulse time window as a multiple of the dead time. Informational
    /// only: it underpins the validity of treating afterpulses as
    /// single-step memory but enters no formula.
    pub afterpulse_window_ratio: f64,
}

impl DetectorSpec {
    /// Dead-time collision probability `ε = η·λ·T_d`.
    pub fn epsilon(&self) -> f64 {
        self.efficiency * self.rate * self.dead_time
    }

    /// Checks parameter ranges, including the model's small-parameter
    /// validity regime `ε ≤ 0.05` and `p_a ≤ 0.05`.
    pub fn validate(&self) -> Result<(), Error> {
        if !self.efficiency.is_finite() || self.efficiency <= 0.0 || self.efficiency > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "efficiency {} must lie in (0, 1]",
                self.efficiency
            )));
        }
        for (name, v) in [("rate", self.rate), ("dead_time", self.dead_time)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        let eps = self.epsilon();
        if eps > 0.05 {
            return Err(Error::InvalidParameter(format!(
                "epsilon = eta*lambda*T_d = {eps} exceeds the model's validity regime [0, 0.05]"
            )));
        }
        if !self.afterpulse_prob.is_finite()
            || !(0.0..=0.05).contains(&self.afterpulse_prob)
        {
            return Err(Error::InvalidParameter(format!(
                "afterpulse probability {} must lie in [0, 0.05]",
                self.afterpulse_prob
            )));
        }
        if !self.dcr_fraction.is_finite() || !(0.0..1.0).contains(&self.dcr_fraction) {
            return Err(Error::InvalidParameter(format!(
                "dark-count fraction {} must lie in [0, 1)",
                self.dcr_fraction
            )));
        }
        if !self.afterpulse_window_ratio.is_finite() || self.afterpulse_window_ratio < 0.0 {
            return Err(Error::InvalidParameter(
                "afterpulse window ratio must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// The four-state chain built from `(p, p_a, ε)`: channel distribution,
/// small parameters, and the explicit transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovDetectorModel {
    p: [f64; 4],
    p_a: f64,
    epsilon: f64,
    transition: [[f64; 4]; 4],
}

impl MarkovDetectorModel {
    /// Per-event channel distribution the chain was built from.
    pub fn p(&self) -> [f64; 4] {
        self.p
    }

    /// Afterpulse probability.
    pub fn p_a(&self) -> f64 {
        self.p_a
    }

    /// Dead-time collision probability.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Row-stochastic transition matrix; entry `[i][j]` is the probability
    /// of recording channel `j` right after channel `i`.
    pub fn transition(&self) -> &[[f64; 4]; 4] {
        &self.transition
    }
}

fn check_simplex(p: &[f64; 4], what: &str) -> Result<(), Error> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidProbability(format!(
            "{what} entries must be finite and nonnegative, got {p:?}"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbability(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Mixes a uniform dark-count component into the channel distribution:
/// `p̃_i = (1−p_DCR)·p_i + p_DCR/4`.
pub fn dcr_correct(p: [f64; 4], p_dcr: f64) -> Result<[f64; 4], Error> {
    check_simplex(&p, "channel distribution")?;
    if !p_dcr.is_finite() || !(0.0..1.0).contains(&p_dcr) {
        return Err(Error::InvalidParameter(format!(
            "dark-count fraction {p_dcr} must lie in [0, 1)"
        )));
    }
    Ok([
        (1.0 - p_dcr) * p[0] + p_dcr / 4.0,
        (1.0 - p_dcr) * p[1] + p_dcr / 4.0,
        (1.0 - p_dcr) * p[2] + p_dcr / 4.0,
        (1.0 - p_dcr) * p[3] + p_dcr / 4.0,
    ])
}

/// Builds the chain for channel distribution `p`, afterpulse probability
/// `p_a` and dead-time parameter `epsilon`.
///
/// The rows are assembled from the closed form
/// `P_ij = (1−p_a)·p_j·(1+ε·p_i)` for `i ≠ j` and
/// `P_ii = p_a + (1−p_a)·p_i·(1−ε·(1−p_i))`, which is algebraically equal
/// to the mixture definition and makes every row sum to 1 exactly.
///
/// All `p_i` must be strictly positive; a zero entry makes the chain
/// reducible and the stationary analysis meaningless.
pub fn transition_matrix(
    p: [f64; 4],
    p_a: f64,
    epsilon: f64,
) -> Result<MarkovDetectorModel, Error> {
    check_simplex(&p, "channel distribution")?;
    if p.iter().any(|&v| v == 0.0) {
        return Err(Error::InvalidProbability(
            "a zero channel probability makes the chain reducible".into(),
        ));
    }
    for (name, v) in [("p_a", p_a), ("epsilon", epsilon)] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "{name} = {v} must lie in [0, 1]"
            )));
        }
    }
    let mut transition = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            transition[i][j] = if i == j {
                p_a + (1.0 - p_a) * p[i] * (1.0 - epsilon * (1.0 - p[i]))
            } else {
                (1.0 - p_a) * p[j] * (1.0 + epsilon * p[i])
            };
        }
    }
    Ok(MarkovDetectorModel {
        p,
        p_a,
        epsilon,
        transition,
    })
}

/// Stationary distribution of the chain, computed two independent ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Exact closed form `f_i ∝ p_i/(1+ε·p_i)`.
    pub closed_form: [f64; 4],
    /// Left power iteration of the transition matrix to tolerance 1e-14.
    pub power_iteration: [f64; 4],
    /// Power-iteration steps used.
    pub iterations: usize,
}

impl InvariantReport {
    /// The stationary distribution (the closed form, which is exact).
    pub fn distribution(&self) -> [f64; 4] {
        self.closed_form
    }
}

/// Computes the stationary distribution both in closed form and by left
/// power iteration, and errors if the two disagree beyond 1e-12.
///
/// The closed form is `f_i = (p_i/(1+ε·p_i)) / Σ_j (p_j/(1+ε·p_j))` — note
/// it does not involve `p_a`: adding `p_a·I` rescales the spectral gap but
/// moves no eigenvector. Requires `p_a < 1`; at `p_a = 1` the chain never
/// leaves its initial state and has no unique stationary distribution.
pub fn invariant_distribution(model: &MarkovDetectorModel) -> Result<InvariantReport, Error> {
    if model.p_a >= 1.0 - 1e-12 {
        return Err(Error::InvalidParameter(
            "p_a = 1 freezes the chain; the stationary distribution is not unique".into(),
        ));
    }
    let eps = model.epsilon;
    let mut closed = [0.0; 4];
    let mut z = 0.0;
    for i in 0..4 {
        closed[i] = model.p[i] / (1.0 + eps * model.p[i]);
        z += closed[i];
    }
    for v in closed.iter_mut() {
        *v /= z;
    }

    let mut v = [0.25; 4];
    let mut iterations = 0;
    loop {
        let mut next = [0.0; 4];
        for i in 0..4 {
            for j in 0..4 {
                next[j] += v[i] * model.transition[i][j];
            }
        }
        let norm: f64 = next.iter().sum();
        for x in next.iter_mut() {
            *x /= norm;
        }
        let delta: f64 = (0..4).map(|i| (next[i] - v[i]).abs()).sum();
        v = next;
        iterations += 1;
        if delta < 1e-14 {
            break;
        }
        if iterations >= 200_000 {
            return Err(Error::NoConvergence(format!(
                "power iteration still moving by {delta:.3e} after {iterations} steps"
            )));
        }
    }

    let divergence = (0..4)
        .map(|i| (closed[i] - v[i]).abs())
        .fold(0.0_f64, f64::max);
    if divergence > 1e-12 {
        return Err(Error::NoConvergence(format!(
            "closed-form and power-iteration stationary distributions differ by {divergence:.3e}"
        )));
    }
    Ok(InvariantReport {
        closed_form: closed,
        power_iteration: v,
        iterations,
    })
}

/// Recovers the per-event channel distribution `p` from a stationary
/// distribution `f`, inverting `f_i ∝ p_i/(1+ε·p_i)` exactly.
///
/// Substituting `p_i = f_i/(c − ε·f_i)` satisfies the proportionality for
/// any `c`; the normalization `Σ p_i = 1` fixes `c` as the root of a
/// strictly decreasing function, found by bisection on
/// `(ε·max f, ε·max f + 1]` to full precision.
pub fn invert_invariant(f: [f64; 4], epsilon: f64) -> Result<[f64; 4], Error> {
    check_simplex(&f, "stationary distribution")?;
    if f.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidProbability(
            "stationary distribution entries must be strictly positive".into(),
        ));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} must be finite and nonnegative"
        )));
    }
    if epsilon < 1e-15 {
        return Ok(f);
    }
    let fmax = f.iter().cloned().fold(0.0_f64, f64::max);
    let total = |c: f64| -> f64 { f.iter().map(|&fi| fi / (c - epsilon * fi)).sum() };
    // The root lies in (ε·fmax, ε·fmax + 1]: the sum diverges at the left
    // end and is ≤ 1 at the right end.
    let mut lo = epsilon * fmax * (1.0 + 1e-14) + 1e-300;
    let mut hi = epsilon * fmax + 1.0;
    if total(hi) > 1.0 {
        return Err(Error::NoConvergence(
            "failed to bracket the normalization constant".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let mut p = [0.0; 4];
    for i in 0..4 {
        p[i] = f[i] / (c - epsilon * f[i]);
    }
    let sum: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= sum;
    }
    Ok(p)
}

/// Small-ε expansion of [`invert_invariant`]:
/// `p_i ≈ f_i·(1 + ε·(f_i − Σ_j f_j²))`.
///
/// Diagnostic only — its error against the exact inversion shrinks as ε²
/// (verified in the tests); use the exact routine for real work.
pub fn first_order_inverse(f: [f64; 4], epsilon: f64) -> [f64; 4] {
    let sum_sq: f64 = f.iter().map(|v| v * v).sum();
    let mut p = [0.0; 4];
    for i in 0..4 {
        p[i] = f[i] * (1.0 + epsilon * (f[i] - sum_sq));
    }
    p
}

/// Simulates `n_events` chain steps and returns the channel sequence
/// (values 0–3, one octet per event).
///
/// The first symbol is drawn from `initial` when given, otherwise from the
/// model's channel distribution; subsequent symbols follow the transition
/// matrix. Deterministic for a fixed seed.
pub fn simulate(
    model: &MarkovDetectorModel,
    n_events: usize,
    initial: Option<[f64; 4]>,
    seed: u64,
) -> Result<Vec<u8>, Error> {
    if n_events == 0 {
        return Err(Error::InvalidParameter(
            "a simulated sequence needs at least one event".into(),
        ));
    }
    let first = match initial {
        Some(dist) => {
            check_simplex(&dist, "initial distribution")?;
            dist
        }
        None => model.p,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |dist: &[f64; 4], rng: &mut ChaCha8Rng| -> u8 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, &w) in dist.iter().enumerate() {
            acc += w;
            if u < acc {
                return k as u8;
            }
        }
        3
    };
    let mut seq = Vec::with_capacity(n_events);
    let mut current = draw(&first, &mut rng);
    seq.push(current);
    for _ in 1..n_events {
        current = draw(&model.transition[current as usize], &mut rng);
        seq.push(current);
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P_TEST: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

    #[test]
    fn detector_spec_derives_epsilon_and_validates_ranges() {
        let spec = DetectorSpec {
            efficiency: 0.5,
            rate: 4.0e5,
            dead_time: 5.0e-8,
            afterpulse_prob: 0.01,
            dcr_fraction: 0.02,
            afterpulse_window_ratio: 2.0,
        };
        spec.validate().unwrap();
        assert!((spec.epsilon() - 0.01).abs() < 1e-15);

        let mut bad = spec;
        bad.rate = 1.0e7;
        assert!(bad.validate().is_err(), "epsilon far out of regime");
        let mut bad = spec;
        bad.afterpulse_prob = 0.2;
        assert!(bad.validate().is_err());
        let mut bad = spec;
        bad.dcr_fraction = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dcr_correction_examples() {
        assert_eq!(dcr_correct(P_TEST, 0.0).unwrap(), P_TEST);
        let corrected = dcr_correct([1.0, 0.0, 0.0, 0.0], 0.04).unwrap();
        let expected = [0.97, 0.01, 0.01, 0.01];
        for i in 0..4 {
            assert!((corrected[i] - expected[i]).abs() < 1e-15);
        }
        let uniform = [0.25; 4];
        let fixed = dcr_correct(uniform, 0.3).unwrap();
        for v in fixed {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!(dcr_correct([0.5, 0.5, 0.2, -0.2], 0.0).is_err());
        assert!(dcr_correct(uniform, 1.0).is_err());
    }

    #[test]
    fn transition_matrix_limits() {
        // No memory at all: every row is p.
        let model = transition_matrix(P_TEST, 0.0, 0.0).unwrap();
        for row in model.transition() {
            for (j, &v) in row.iter().enumerate() {
                assert!((v - P_TEST[j]).abs() < 1e-15);
            }
        }
        // Pure afterpulsing: identity.
        let model = transition_matrix(P_TEST, 1.0, 0.0).unwrap();
        for (i, row) in model.transition().iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn transition_matrix_uniform_case_matches_direct_evaluation() {
        let model = transition_matrix([0.25; 4], 0.01, 0.02).unwrap();
        for (i, row) in model.transition().iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let expected = if i == j { 0.2537875 } else { 0.2487375 };
                assert!((v - expected).abs() < 1e-15, "entry ({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn transition_matrix_rows_sum_to_one_and_reassemble() {
        for (p_a, eps) in [(0.0, 0.0), (0.01, 0.02), (0.3, 0.05), (0.9, 1.0)] {
            let model = transition_matrix(P_TEST, p_a, eps).unwrap();
            for (i, row) in model.transition().iter().enumerate() {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
                assert!(row.iter().all(|&v| v >= 0.0));
                // Reassemble from the mixture definition.
                for (j, &v) in row.iter().enumerate() {
                    let q = if i == j {
                        P_TEST[i] * P_TEST[i]
                    } else {
                        P_TEST[j] * (1.0 + P_TEST[i])
                    };
                    let ptilde = P_TEST[j];
                    let direct = if i == j { p_a } else { 0.0 }
                        + (1.0 - p_a) * ((1.0 - eps) * ptilde + eps * q);
                    assert!((v - direct).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn transition_matrix_rejects_reducible_chains() {
        assert!(matches!(
            transition_matrix([0.5, 0.5, 0.0, 0.0], 0.0, 0.0),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn invariant_distribution_reduces_to_p_without_dead_time() {
        let model = transition_matrix(P_TEST, 0.2, 0.0).unwrap();
        let report = invariant_distribution(&model).unwrap();
        for i in 0..4 {
            assert!((report.closed_form[i] - P_TEST[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn invariant_distribution_agreement_and_pa_independence() {
        let mut reference: Option<[f64; 4]> = None;
        for p_a in [0.0, 0.01, 0.3] {
            let model = transition_matrix(P_TEST, p_a, 0.02).unwrap();
            let report = invariant_distribution(&model).unwrap();
            let diff = (0..4)
                .map(|i| (report.closed_form[i] - report.power_iteration[i]).abs())
                .fold(0.0_f64, f64::max);
            assert!(diff < 1e-12, "p_a = {p_a}: routes differ by {diff}");
            if let Some(prev) = reference {
                let shift = (0..4)
                    .map(|i| (report.closed_form[i] - prev[i]).abs())
                    .fold(0.0_f64, f64::max);
                assert!(shift < 1e-12, "p_a = {p_a} moved the invariant by {shift}");
            }
            reference = Some(report.closed_form);
        }
    }

    #[test]
    fn invariant_is_a_left_eigenvector_and_shrinks_the_largest_channel() {
        let model = transition_matrix(P_TEST, 0.01, 0.02).unwrap();
        let report = invariant_distribution(&model).unwrap();
        let f = report.closed_form;
        // f · P = f.
        for j in 0..4 {
            let fp: f64 = (0..4).map(|i| f[i] * model.transition()[i][j]).sum();
            assert!((fp - f[j]).abs() < 1e-14);
        }
        // Dead time suppresses the busiest channel.
        assert!(f[0] < P_TEST[0]);
        assert!(f[3] > P_TEST[3]);
    }

    #[test]
    fn invariant_distribution_requires_a_moving_chain() {
        let model = transition_matrix(P_TEST, 1.0, 0.0).unwrap();
        assert!(invariant_distribution(&model).is_err());
    }

    #[test]
    fn invert_invariant_examples() {
        // Without dead time the map is the identity.
        assert_eq!(invert_invariant(P_TEST, 0.0).unwrap(), P_TEST);
        // Uniform is a fixed point at any epsilon.
        let p = invert_invariant([0.25; 4], 0.04).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-12);
        }
        assert!(invert_invariant([0.5, 0.5, 0.0, 0.0], 0.01).is_err());
    }

    #[test]
    fn invariant_round_trip_recovers_p() {
        for eps in [0.005, 0.02, 0.05] {
            let model = transition_matrix(P_TEST, 0.01, eps).unwrap();
            let f = invariant_distribution(&model).unwrap().closed_form;
            let p = invert_invariant(f, eps).unwrap();
            for i in 0..4 {
                assert!(
                    (p[i] - P_TEST[i]).abs() < 1e-10,
                    "eps = {eps}: component {i} off by {}",
                    (p[i] - P_TEST[i]).abs()
                );
            }
        }
    }

    #[test]
    fn first_order_inverse_error_shrinks_quadratically() {
        let gap = |eps: f64| -> f64 {
            let model = transition_matrix(P_TEST, 0.0, eps).unwrap();
            let f = invariant_distribution(&model).unwrap().closed_form;
            let exact = invert_invariant(f, eps).unwrap();
            let approx = first_order_inverse(f, eps);
            (0..4)
                .map(|i| (exact[i] - approx[i]).abs())
                .fold(0.0_f64, f64::max)
        };
        let g2 = gap(0.02);
        let g1 = gap(0.01);
        assert!((g2 - 1.193e-6).abs() < 0.2e-6, "gap(0.02) = {g2:e}");
        assert!((g1 - 2.991e-7).abs() < 0.5e-7, "gap(0.01) = {g1:e}");
        let ratio = g2 / g1;
        assert!((3.5..=4.5).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn simulation_is_deterministic_per_seed() {
        let model = transition_matrix(P_TEST, 0.01, 0.02).unwrap();
        let a = simulate(&model, 5000, None, 99).unwrap();
        let b = simulate(&model, 5000, None, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&model, 5000, None, 100).unwrap();
        assert_ne!(a, c);
        assert!(a.iter().all(|&s| s < 4));
        assert!(simulate(&model, 0, None, 1).is_err());
    }

    #[test]
    fn memoryless_simulation_reproduces_the_channel_frequencies() {
        let n = 1_000_000;
        let model = transition_matrix([0.25; 4], 0.0, 0.0).unwrap();
        let seq = simulate(&model, n, None, 7).unwrap();
        let mut counts = [0usize; 4];
        for &s in &seq {
            counts[s as usize] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n as f64;
            assert!(
                (freq - 0.25).abs() < 4.0 * sigma,
                "channel {i}: frequency {freq}"
            );
        }
    }

    #[test]
    fn afterpulsing_raises_the_lag_one_repeat_rate() {
        let n = 1_000_000;
        let model = transition_matrix(P_TEST, 0.5, 0.0).unwrap();
        let seq = simulate(&model, n, None, 11).unwrap();
        let repeats = seq.windows(2).filter(|w| w[0] == w[1]).count();
        let sum_sq: f64 = P_TEST.iter().map(|v| v * v).sum();
        let expected = 0.5 + 0.5 * sum_sq;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        let observed = repeats as f64 / (n - 1) as f64;
        assert!(
            (observed - expected).abs() < 4.0 * sigma,
            "repeat rate {observed}, expected {expected}"
        );
    }
}
