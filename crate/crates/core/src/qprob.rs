//! Outcome distributions, correlation coefficients and the CHSH parameter.
//!
//! Detection is a four-channel projective measurement: momentum mode (which
//! output port) times polarization (H or V behind a polarizing splitter).
//! Outcomes are labeled `x = ±1` for momentum (mode 0 → +1) and `y = ±1` for
//! polarization (H → +1). Three kinds of distribution are produced:
//!
//! - *ideal*: balanced lossless interferometer, the textbook case;
//! - *real*: the lossy operator with post-selection on detected photons;
//! - *factorized ideal*: the closest momentum⊗polarization description of
//!   the real device, the reference object every error bound compares to.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::mat::{is_density, tensor, ComplexMatrix, DEFAULT_TOL};
use crate::optics::{
    normalize_bs, phase_operator, polarization_rotation, mzi_real_operator, SetupSpec,
};
use crate::Error;

/// Post-selection denominators below this threshold count as total
/// extinction rather than rounding noise.
const EXTINCTION_THRESHOLD: f64 = 1e-15;

#[inline]
fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A validated 4×4 density matrix together with its polarization-block
/// decomposition.
///
/// Writing `P_H`, `P_V` for the projectors onto the H and V blocks,
/// `ρ = α·P_H ρ_H P_H + β·P_V ρ_V P_V + √(αβ)·(P_V p P_H + P_H p† P_V)`,
/// where `α = Tr[P_H ρ P_H]`, `β = 1 − α`, `ρ_H`/`ρ_V` are the normalized
/// 2×2 momentum states conditioned on polarization, and `p` is the rescaled
/// cross block. The decomposition is what the analytic bounds consume.
#[derive(Debug, Clone)]
pub struct DensityState {
    rho: ComplexMatrix,
    alpha: f64,
    beta: f64,
    rho_h: ComplexMatrix,
    rho_v: ComplexMatrix,
    p_cross: ComplexMatrix,
}

impl DensityState {
    /// Validates `m` as a density matrix and decomposes it.
    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self, Error> {
        if (m.nrows(), m.ncols()) != (4, 4) {
            return Err(Error::DimensionMismatch {
                expected: "a 4×4 density matrix".into(),
                found: format!("{}×{}", m.nrows(), m.ncols()),
            });
        }
        if !is_density(m, DEFAULT_TOL) {
            return Err(Error::InvalidDensity(
                "matrix is not Hermitian, positive semidefinite and unit-trace within 1e-9".into(),
            ));
        }
        let alpha = (m.get(0, 0) + m.get(1, 1)).re;
        let beta = (m.get(2, 2) + m.get(3, 3)).re;
        let block = |row0: usize, col0: usize, scale: f64| {
            if scale > 0.0 {
                ComplexMatrix::from_fn(2, 2, |r, c| m.get(row0 + r, col0 + c) / scale)
            } else {
                ComplexMatrix::zeros(2, 2)
            }
        };
        let cross_scale = (alpha.max(0.0) * beta.max(0.0)).sqrt();
        Ok(DensityState {
            rho: m.clone(),
            alpha,
            beta,
            rho_h: block(0, 0, alpha),
            rho_v: block(2, 2, beta),
            p_cross: block(2, 0, cross_scale),
        })
    }

    /// Builds the state `|ψ⟩⟨ψ|` from a four-component vector, normalizing it.
    pub fn from_pure(psi: &[Complex64; 4]) -> Result<Self, Error> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !norm2.is_finite() || norm2 < 1e-15 {
            return Err(Error::InvalidDensity(
                "pure-state vector has (near-)zero norm".into(),
            ));
        }
        let m = ComplexMatrix::from_fn(4, 4, |r, c| psi[r] * psi[c].conj() / norm2);
        Self::from_matrix(&m)
    }

    /// The full 4×4 density matrix.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rho
    }

    /// Weight of the H polarization block.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Weight of the V polarization block, `1 − alpha` up to rounding.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Momentum state conditioned on H polarization (zeros when `alpha = 0`).
    pub fn rho_h(&self) -> &ComplexMatrix {
        &self.rho_h
    }

    /// Momentum state conditioned on V polarization (zeros when `beta = 0`).
    pub fn rho_v(&self) -> &ComplexMatrix {
        &self.rho_v
    }

    /// Rescaled cross block `p` coupling the V rows to the H columns.
    pub fn p_cross(&self) -> &ComplexMatrix {
        &self.p_cross
    }

    /// Reassembles the density matrix from the stored decomposition; used by
    /// tests to confirm the decomposition is lossless.
    pub fn reassemble(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(4, 4);
        let cross = (self.alpha * self.beta).sqrt();
        for r in 0..2 {
            for c in 0..2 {
                m.set(r, c, self.alpha * self.rho_h.get(r, c));
                m.set(2 + r, 2 + c, self.beta * self.rho_v.get(r, c));
                m.set(2 + r, c, cross * self.p_cross.get(r, c));
                m.set(r, 2 + c, cross * self.p_cross.get(c, r).conj());
            }
        }
        m
    }
}

/// One measurement setting: interferometer phase `phi` for the momentum side
/// and rotation angle `theta` for the polarization side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    /// Momentum interferometer phase, radians.
    pub phi: f64,
    /// Polarization rotation angle, radians.
    pub theta: f64,
}

/// Joint distribution over the four `(x, y)` outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution {
    /// `cells[ix][iy]` where index 0 means outcome +1 and index 1 means −1.
    cells: [[f64; 2]; 2],
}

impl OutcomeDistribution {
    /// Builds a distribution from the four cells `[[(+,+),(+,−)],[(−,+),(−,−)]]`,
    /// validating nonnegativity and normalization (within 1e-9).
    pub fn from_cells(cells: [[f64; 2]; 2]) -> Result<Self, Error> {
        let mut clamped = cells;
        let mut sum = 0.0;
        for row in clamped.iter_mut() {
            for p in row.iter_mut() {
                if !p.is_finite() || *p < -DEFAULT_TOL || *p > 1.0 + DEFAULT_TOL {
                    return Err(Error::InvalidProbability(format!(
                        "cell value {p} outside [0, 1]"
                    )));
                }
                *p = p.clamp(0.0, 1.0);
                sum += *p;
            }
        }
        if (sum - 1.0).abs() > DEFAULT_TOL {
            return Err(Error::InvalidProbability(format!(
                "cells sum to {sum}, expected 1"
            )));
        }
        Ok(OutcomeDistribution { cells: clamped })
    }

    /// Builds a distribution from detector-channel probabilities in the order
    /// `(mode 0, H), (mode 1, H), (mode 0, V), (mode 1, V)`.
    pub fn from_channels(chan: [f64; 4]) -> Result<Self, Error> {
        Self::from_cells([[chan[0], chan[2]], [chan[1], chan[3]]])
    }

    /// Probability of outcome `(x, y)`; index 0 means +1, index 1 means −1.
    pub fn cell(&self, ix: usize, iy: usize) -> f64 {
        self.cells[ix][iy]
    }

    /// The four cells as `[[(+,+),(+,−)],[(−,+),(−,−)]]`.
    pub fn cells(&self) -> [[f64; 2]; 2] {
        self.cells
    }

    /// Channel probabilities in the order `(0,H), (1,H), (0,V), (1,V)`.
    pub fn channels(&self) -> [f64; 4] {
        [
            self.cells[0][0],
            self.cells[1][0],
            self.cells[0][1],
            self.cells[1][1],
        ]
    }

    /// Largest cell-wise absolute difference to another distribution.
    pub fn max_abs_diff(&self, other: &OutcomeDistribution) -> f64 {
        let mut worst = 0.0_f64;
        for ix in 0..2 {
            for iy in 0..2 {
                worst = worst.max((self.cells[ix][iy] - other.cells[ix][iy]).abs());
            }
        }
        worst
    }
}

/// Which evolution model generates a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionMode {
    /// Balanced lossless interferometer, ignoring the setup entirely.
    Ideal,
    /// Lossy setup operator with post-selection.
    Real,
    /// Closest momentum⊗polarization factorized description of the setup.
    Factorized,
}

/// Ideal momentum mixing of a balanced interferometer at phase `phi`:
/// `i e^{iφ/2} [[sin φ/2, cos φ/2], [cos φ/2, −sin φ/2]]`.
fn ideal_momentum_operator(phi: f64) -> ComplexMatrix {
    let (s, c) = (phi / 2.0).sin_cos();
    let front = c64(0.0, 1.0) * Complex64::from_polar(1.0, phi / 2.0);
    ComplexMatrix::from_fn(2, 2, |r, q| match (r, q) {
        (0, 0) => front * s,
        (1, 1) => front * (-s),
        _ => front * c,
    })
}

/// Unit-norm beam-splitter mixing by angle `x`: `[[cos x, i sin x], [i sin x, cos x]]`.
pub(crate) fn ideal_bs(x: f64) -> ComplexMatrix {
    let (s, c) = x.sin_cos();
    ComplexMatrix::from_fn(2, 2, |r, q| {
        if r == q {
            c64(c, 0.0)
        } else {
            c64(0.0, s)
        }
    })
}

/// Diagonal of `u ρ u†` (real parts), i.e. the unnormalized channel weights.
fn evolved_channel_weights(u: &ComplexMatrix, rho: &ComplexMatrix) -> [f64; 4] {
    let mut diag = [0.0; 4];
    for (i, d) in diag.iter_mut().enumerate() {
        let mut acc = c64(0.0, 0.0);
        for j in 0..4 {
            for k in 0..4 {
                acc += u.get(i, j) * rho.get(j, k) * u.get(i, k).conj();
            }
        }
        *d = acc.re;
    }
    diag
}

/// Normalizes channel weights into an [`OutcomeDistribution`], treating a
/// vanishing total as complete photon loss.
fn post_select(weights: [f64; 4]) -> Result<OutcomeDistribution, Error> {
    let total: f64 = weights.iter().sum();
    if !total.is_finite() || total < EXTINCTION_THRESHOLD {
        return Err(Error::AllPhotonsLost(total));
    }
    OutcomeDistribution::from_channels([
        weights[0] / total,
        weights[1] / total,
        weights[2] / total,
        weights[3] / total,
    ])
}

/// The full detection operator: polarization rotation applied after a given
/// 4×4 momentum-stage evolution.
fn with_polarization(u4: &ComplexMatrix, theta: f64) -> Result<ComplexMatrix, Error> {
    let w = tensor(&ComplexMatrix::identity(2), &polarization_rotation(theta))?;
    Ok(w.mul(u4))
}

/// Outcome distribution of the ideal balanced lossless apparatus.
pub fn ideal_distribution(
    rho: &DensityState,
    s: &MeasurementSetting,
) -> Result<OutcomeDistribution, Error> {
    let u = tensor(&ideal_momentum_operator(s.phi), &polarization_rotation(s.theta))?;
    post_select(evolved_channel_weights(&u, rho.matrix()))
}

/// Post-selected outcome distribution of the real lossy apparatus.
///
/// The denominator (probability that the photon survives to any detector) is
/// divided out; if it vanishes the photon never arrives and an error is
/// returned.
pub fn real_distribution(
    rho: &DensityState,
    s: &MeasurementSetting,
    setup: &SetupSpec,
) -> Result<OutcomeDistribution, Error> {
    let u4 = mzi_real_operator(setup, s.phi, false)?;
    let u = with_polarization(&u4, s.theta)?;
    post_select(evolved_channel_weights(&u, rho.matrix()))
}

/// Outcome distribution under the unitarized (loss-normalized) apparatus
/// operator; the reference in the ẽ bound.
pub fn normalized_real_distribution(
    rho: &DensityState,
    s: &MeasurementSetting,
    setup: &SetupSpec,
) -> Result<OutcomeDistribution, Error> {
    let u4 = mzi_real_operator(setup, s.phi, true)?;
    let u = with_polarization(&u4, s.theta)?;
    post_select(evolved_channel_weights(&u, rho.matrix()))
}

/// The closed-form optimal factorized mixing angles `(u₀, v₀)` of a setup:
/// each is the mean of the corresponding splitter's two polarization angles.
pub fn factorized_optimal_angles(setup: &SetupSpec) -> Result<(f64, f64), Error> {
    let (a1, _) = normalize_bs(&setup.bs1)?;
    let (a2, _) = normalize_bs(&setup.bs2_with_mirror())?;
    Ok((
        0.5 * (a1.alpha_h + a1.alpha_v),
        0.5 * (a2.alpha_h + a2.alpha_v),
    ))
}

/// Outcome distribution of the best factorized (momentum ⊗ polarization)
/// approximation to the real apparatus.
///
/// The momentum factor is `U(u₀) · diag(e^{iφ}, 1) · U(v₀)` with `U` the
/// unit-norm splitter mixing and `(u₀, v₀)` the closed-form optimum; the
/// polarization factor is the same rotation as everywhere else.
pub fn factorized_ideal_distribution(
    rho: &DensityState,
    s: &MeasurementSetting,
    setup: &SetupSpec,
) -> Result<OutcomeDistribution, Error> {
    let (u0, v0) = factorized_optimal_angles(setup)?;
    let momentum = ideal_bs(u0).mul(&phase_operator(s.phi)).mul(&ideal_bs(v0));
    let u = tensor(&momentum, &polarization_rotation(s.theta))?;
    post_select(evolved_channel_weights(&u, rho.matrix()))
}

/// Correlation coefficient `E = P(+,+) + P(−,−) − P(+,−) − P(−,+)`.
pub fn correlation(d: &OutcomeDistribution) -> f64 {
    d.cell(0, 0) + d.cell(1, 1) - d.cell(0, 1) - d.cell(1, 0)
}

fn distribution_for(
    rho: &DensityState,
    s: &MeasurementSetting,
    setup: &SetupSpec,
    mode: DistributionMode,
) -> Result<OutcomeDistribution, Error> {
    match mode {
        DistributionMode::Ideal => ideal_distribution(rho, s),
        DistributionMode::Real => real_distribution(rho, s, setup),
        DistributionMode::Factorized => factorized_ideal_distribution(rho, s, setup),
    }
}

/// CHSH parameter `S = E₀₀ + E₀₁ + E₁₀ − E₁₁` for the four settings
/// `[a₀b₀, a₀b₁, a₁b₀, a₁b₁]` under the chosen distribution mode.
pub fn chsh(
    settings: &[MeasurementSetting; 4],
    rho: &DensityState,
    setup: &SetupSpec,
    mode: DistributionMode,
) -> Result<f64, Error> {
    let mut e = [0.0; 4];
    for (k, s) in settings.iter().enumerate() {
        e[k] = correlation(&distribution_for(rho, s, setup, mode)?);
    }
    Ok(e[0] + e[1] + e[2] - e[3])
}

/// Correlation as a function of a single `(phi, theta)` pair, for the
/// optimizer's tables.
fn correlation_at(
    rho: &DensityState,
    setup: &SetupSpec,
    mode: DistributionMode,
    phi: f64,
    theta: f64,
) -> Result<f64, Error> {
    Ok(correlation(&distribution_for(
        rho,
        &MeasurementSetting { phi, theta },
        setup,
        mode,
    )?))
}

/// Golden-section maximization of a 1-D slice, used to polish grid optima.
pub(crate) fn golden_max(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> f64 {
    let gr = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - gr * (hi - lo);
    let mut d = lo + gr * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Finds measurement settings maximizing the CHSH parameter for the given
/// state and setup.
///
/// Three stages: a coarse separable scan over the phase pair (the two
/// polarization maximizations decouple once both phases are fixed), a local
/// 1e-3-resolution scan around the coarse optimum, and a cyclic
/// golden-section polish. Ties are broken toward lexicographically smaller
/// angle quadruples, so the result is deterministic.
pub fn optimize_chsh_settings(
    rho: &DensityState,
    setup: &SetupSpec,
    mode: DistributionMode,
) -> Result<(f64, [MeasurementSetting; 4]), Error> {
    use std::f64::consts::TAU;

    // Stage 1: coarse separable scan (~0.02 rad).
    const N: usize = 315;
    let n = N;
    let step = TAU / n as f64;
    let mut table = vec![[0.0_f64; N]; N];
    for (i, row) in table.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = correlation_at(rho, setup, mode, i as f64 * step, j as f64 * step)?;
        }
    }
    let argmax = |v: &[f64]| {
        let mut best = 0;
        for (k, &x) in v.iter().enumerate() {
            if x > v[best] {
                best = k;
            }
        }
        best
    };
    let mut best = (f64::NEG_INFINITY, [0.0_f64; 4]);
    let mut sum = vec![0.0_f64; n];
    let mut diff = vec![0.0_f64; n];
    for i0 in 0..n {
        for i1 in 0..n {
            for j in 0..n {
                sum[j] = table[i0][j] + table[i1][j];
                diff[j] = table[i0][j] - table[i1][j];
            }
            let j0 = argmax(&sum);
            let j1 = argmax(&diff);
            let val = sum[j0] + diff[j1];
            if val > best.0 + 1e-15 {
                best = (
                    val,
                    [
                        i0 as f64 * step,
                        i1 as f64 * step,
                        j0 as f64 * step,
                        j1 as f64 * step,
                    ],
                );
            }
        }
    }
    let (_, mut angles) = best;

    let s_of = |a: &[f64; 4]| -> Result<f64, Error> {
        let settings = settings_from_angles(a);
        chsh(&settings, rho, setup, mode)
    };

    // Stage 2: local scan at 1e-3 resolution, one coordinate at a time,
    // repeated so coordinate coupling is absorbed.
    for _ in 0..2 {
        for k in 0..4 {
            let center = angles[k];
            let mut best_v = s_of(&angles)?;
            let mut best_a = center;
            for step_idx in -50..=50 {
                let cand = center + step_idx as f64 * 1e-3;
                let mut trial = angles;
                trial[k] = cand;
                let v = s_of(&trial)?;
                if v > best_v + 1e-15 {
                    best_v = v;
                    best_a = cand;
                }
            }
            angles[k] = best_a;
        }
    }

    // Stage 3: cyclic golden-section polish.
    for _ in 0..3 {
        for k in 0..4 {
            let others = angles;
            let f = |x: f64| {
                let mut trial = others;
                trial[k] = x;
                s_of(&trial).unwrap_or(f64::NEG_INFINITY)
            };
            angles[k] = golden_max(f, angles[k] - 2e-3, angles[k] + 2e-3, 60);
        }
    }

    let settings = settings_from_angles(&angles);
    Ok((s_of(&angles)?, settings))
}

/// Expands `[φ₀, φ₁, θ₀, θ₁]` into the four CHSH settings
/// `[a₀b₀, a₀b₁, a₁b₀, a₁b₁]`.
fn settings_from_angles(a: &[f64; 4]) -> [MeasurementSetting; 4] {
    [
        MeasurementSetting { phi: a[0], theta: a[2] },
        MeasurementSetting { phi: a[0], theta: a[3] },
        MeasurementSetting { phi: a[1], theta: a[2] },
        MeasurementSetting { phi: a[1], theta: a[3] },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{BeamSplitterSpec, GenerationSpec, MirrorSpec, generation_state};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn bell_state() -> DensityState {
        generation_state(&GenerationSpec::balanced_real()).unwrap()
    }

    fn pure_0h() -> DensityState {
        DensityState::from_pure(&[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)])
            .unwrap()
    }

    fn random_density(rng: &mut ChaCha8Rng) -> DensityState {
        // Ginibre construction: G·G† normalized to unit trace.
        let g = ComplexMatrix::from_fn(4, 4, |_, _| {
            c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = g.mul(&g.adjoint());
        let t = m.trace().re;
        DensityState::from_matrix(&m.scale(c64(1.0 / t, 0.0))).unwrap()
    }

    fn lossy_setup() -> SetupSpec {
        SetupSpec {
            bs1: BeamSplitterSpec {
                t_h: 0.63,
                r_h: 0.41,
                t_v: 0.52,
                r_v: 0.7,
            },
            bs2: BeamSplitterSpec {
                t_h: 0.55,
                r_h: 0.62,
                t_v: 0.71,
                r_v: 0.48,
            },
            mirror: MirrorSpec {
                eta_h: 0.93,
                eta_v: 0.88,
            },
            gen: GenerationSpec::balanced_real(),
        }
    }

    #[test]
    fn density_state_decomposition_reassembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let rho = random_density(&mut rng);
            assert!((rho.alpha() + rho.beta() - 1.0).abs() < 1e-12);
            assert!(rho.matrix().max_abs_diff(&rho.reassemble()) < 1e-12);
        }
        // Degenerate blocks: a pure H state has beta = 0 and zero blocks.
        let rho = pure_0h();
        assert_eq!(rho.beta(), 0.0);
        assert!(rho.matrix().max_abs_diff(&rho.reassemble()) < 1e-15);
    }

    #[test]
    fn density_state_rejects_invalid_matrices() {
        let not_normalized = ComplexMatrix::identity(4);
        assert!(DensityState::from_matrix(&not_normalized).is_err());
        let wrong_shape = ComplexMatrix::identity(2);
        assert!(DensityState::from_matrix(&wrong_shape).is_err());
    }

    #[test]
    fn bell_state_cells_at_zero_settings() {
        // The balanced interferometer at φ = 0 routes the photon to the
        // opposite port, so the real-amplitude entangled state lands on the
        // anti-diagonal cells.
        let d = ideal_distribution(
            &bell_state(),
            &MeasurementSetting { phi: 0.0, theta: 0.0 },
        )
        .unwrap();
        assert!(d.cell(0, 0).abs() < 1e-12);
        assert!((d.cell(1, 0) - 0.5).abs() < 1e-12);
        assert!((d.cell(0, 1) - 0.5).abs() < 1e-12);
        assert!(d.cell(1, 1).abs() < 1e-12);
    }

    #[test]
    fn pure_h_state_marginal_follows_the_interferometer_fringe() {
        let rho = pure_0h();
        for phi in [0.3, 1.234, 2.2, 4.8] {
            let d = ideal_distribution(&rho, &MeasurementSetting { phi, theta: 0.0 }).unwrap();
            let s2 = (phi / 2.0).sin().powi(2);
            assert!((d.cell(0, 0) - s2).abs() < 1e-12);
            assert!((d.cell(1, 0) - (1.0 - s2)).abs() < 1e-12);
            // Polarization never leaves H.
            assert!(d.cell(0, 1).abs() < 1e-14 && d.cell(1, 1).abs() < 1e-14);
        }
    }

    #[test]
    fn distributions_are_normalized_probability_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let setup = lossy_setup();
        for _ in 0..50 {
            let rho = random_density(&mut rng);
            let s = MeasurementSetting {
                phi: rng.gen_range(0.0..std::f64::consts::TAU),
                theta: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            for d in [
                ideal_distribution(&rho, &s).unwrap(),
                real_distribution(&rho, &s, &setup).unwrap(),
                normalized_real_distribution(&rho, &s, &setup).unwrap(),
                factorized_ideal_distribution(&rho, &s, &setup).unwrap(),
            ] {
                let total: f64 = d.channels().iter().sum();
                assert!((total - 1.0).abs() < 1e-9);
                assert!(d.channels().iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }

    #[test]
    fn real_distribution_matches_ideal_on_the_ideal_setup() {
        let setup = SetupSpec::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let rho = random_density(&mut rng);
            let s = MeasurementSetting {
                phi: rng.gen_range(0.0..std::f64::consts::TAU),
                theta: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            let di = ideal_distribution(&rho, &s).unwrap();
            let dr = real_distribution(&rho, &s, &setup).unwrap();
            assert!(di.max_abs_diff(&dr) < 1e-12);
        }
    }

    #[test]
    fn equally_lossy_channels_reduce_to_the_normalized_operator() {
        // When every channel loses the same fraction, post-selection undoes
        // the loss exactly and the unitarized description is recovered.
        let mut setup = lossy_setup();
        setup.bs1 = BeamSplitterSpec {
            t_h: 0.9 * 0.6,
            r_h: 0.9 * 0.8,
            t_v: 0.9 * 0.3,
            r_v: 0.9 * (1.0 - 0.09_f64).sqrt(),
        };
        setup.bs2 = BeamSplitterSpec {
            t_h: 0.8 * 0.7,
            r_h: 0.8 * (1.0 - 0.49_f64).sqrt(),
            t_v: 0.8 * 0.55,
            r_v: 0.8 * (1.0 - 0.3025_f64).sqrt(),
        };
        setup.mirror = MirrorSpec {
            eta_h: 0.95,
            eta_v: 0.95,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..20 {
            let rho = random_density(&mut rng);
            let s = MeasurementSetting {
                phi: rng.gen_range(0.0..std::f64::consts::TAU),
                theta: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            let dr = real_distribution(&rho, &s, &setup).unwrap();
            let dn = normalized_real_distribution(&rho, &s, &setup).unwrap();
            assert!(dr.max_abs_diff(&dn) < 1e-12);
        }
    }

    #[test]
    fn real_distribution_is_invariant_under_common_rescaling() {
        let base = lossy_setup();
        let gamma = 0.7;
        let scale_bs = |b: &BeamSplitterSpec| BeamSplitterSpec {
            t_h: gamma * b.t_h,
            r_h: gamma * b.r_h,
            t_v: gamma * b.t_v,
            r_v: gamma * b.r_v,
        };
        let scaled = SetupSpec {
            bs1: scale_bs(&base.bs1),
            bs2: scale_bs(&base.bs2),
            mirror: base.mirror,
            gen: base.gen,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..20 {
            let rho = random_density(&mut rng);
            let s = MeasurementSetting {
                phi: rng.gen_range(0.0..std::f64::consts::TAU),
                theta: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            let d1 = real_distribution(&rho, &s, &base).unwrap();
            let d2 = real_distribution(&rho, &s, &scaled).unwrap();
            assert!(d1.max_abs_diff(&d2) < 1e-12);
        }
    }

    #[test]
    fn all_photons_lost_is_reported() {
        // An H-polarized photon meeting splitters whose H channel is almost
        // completely absorbing: the surviving weight is ~1e-32, far below the
        // extinction threshold. (Exactly zero coefficients are rejected as
        // degenerate, so tiny positive ones stand in.)
        let rho = pure_0h();
        let mut setup = SetupSpec::ideal();
        setup.bs1.t_h = 1e-8;
        setup.bs1.r_h = 1e-8;
        setup.bs2.t_h = 1e-8;
        setup.bs2.r_h = 1e-8;
        let err = real_distribution(
            &rho,
            &MeasurementSetting { phi: 0.4, theta: 0.0 },
            &setup,
        );
        assert!(matches!(err, Err(Error::AllPhotonsLost(_))));
    }

    #[test]
    fn factorized_optimum_on_ideal_setup_is_balanced() {
        let (u0, v0) = factorized_optimal_angles(&SetupSpec::ideal()).unwrap();
        assert!((u0 - FRAC_PI_4).abs() < 1e-15);
        assert!((v0 - FRAC_PI_4).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..10 {
            let rho = random_density(&mut rng);
            let s = MeasurementSetting {
                phi: rng.gen_range(0.0..std::f64::consts::TAU),
                theta: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            let df = factorized_ideal_distribution(&rho, &s, &SetupSpec::ideal()).unwrap();
            let di = ideal_distribution(&rho, &s).unwrap();
            assert!(df.max_abs_diff(&di) < 1e-12);
        }
    }

    #[test]
    fn equal_polarization_responses_make_factorized_exact() {
        let setup = SetupSpec {
            bs1: BeamSplitterSpec {
                t_h: 0.58,
                r_h: 0.47,
                t_v: 0.58,
                r_v: 0.47,
            },
            bs2: BeamSplitterSpec {
                t_h: 0.61,
                r_h: 0.66,
                t_v: 0.61,
                r_v: 0.66,
            },
            mirror: MirrorSpec {
                eta_h: 0.9,
                eta_v: 0.9,
            },
            gen: GenerationSpec::balanced_real(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..20 {
            let rho = random_density(&mut rng);
            let s = MeasurementSetting {
                phi: rng.gen_range(0.0..std::f64::consts::TAU),
                theta: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            let df = factorized_ideal_distribution(&rho, &s, &setup).unwrap();
            let dn = normalized_real_distribution(&rho, &s, &setup).unwrap();
            assert!(df.max_abs_diff(&dn) < 1e-12);
        }
    }

    #[test]
    fn correlation_examples() {
        let uniform = OutcomeDistribution::from_cells([[0.25, 0.25], [0.25, 0.25]]).unwrap();
        assert_eq!(correlation(&uniform), 0.0);
        let aligned = OutcomeDistribution::from_cells([[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(correlation(&aligned), 1.0);
        let anti = OutcomeDistribution::from_cells([[0.0, 0.5], [0.5, 0.0]]).unwrap();
        assert_eq!(correlation(&anti), -1.0);
    }

    #[test]
    fn chsh_with_equal_settings_collapses_to_twice_one_correlation() {
        let rho = bell_state();
        let setup = SetupSpec::ideal();
        let s = MeasurementSetting { phi: 0.8, theta: 0.3 };
        let settings = [s, s, s, s];
        let got = chsh(&settings, &rho, &setup, DistributionMode::Ideal).unwrap();
        let e = correlation(&ideal_distribution(&rho, &s).unwrap());
        assert!((got - 2.0 * e).abs() < 1e-12);
        assert!(got.abs() <= 2.0 + 1e-9);
    }

    #[test]
    fn product_state_never_violates_the_classical_bound() {
        let rho = pure_0h();
        let setup = SetupSpec::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for _ in 0..1000 {
            let a: [f64; 4] = [
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ];
            let settings = super::settings_from_angles(&a);
            let s = chsh(&settings, &rho, &setup, DistributionMode::Ideal).unwrap();
            assert!(s.abs() <= 2.0 + 1e-9, "S = {s} for a product state");
        }
    }

    #[test]
    fn optimizer_reaches_the_quantum_maximum_on_the_ideal_setup() {
        let rho = bell_state();
        let setup = SetupSpec::ideal();
        let (s, settings) =
            optimize_chsh_settings(&rho, &setup, DistributionMode::Ideal).unwrap();
        assert!(
            (s - 2.0 * SQRT_2).abs() < 1e-6,
            "optimized S = {s}, expected 2√2"
        );
        // The returned settings reproduce the returned value.
        let again = chsh(&settings, &rho, &setup, DistributionMode::Ideal).unwrap();
        assert!((again - s).abs() < 1e-12);
    }
}
