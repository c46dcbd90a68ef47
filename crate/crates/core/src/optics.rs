//! Operators for the optical elements — beam splitters, phase plates,
//! folding mirrors, polarization rotators — and their composition into the
//! interferometer evolution applied between state generation and detection.
//!
//! The momentum degree of freedom passes through a Mach–Zehnder-style
//! arrangement: a first beam splitter, a relative phase φ on one path, and a
//! second beam splitter whose coefficients absorb the folding-mirror losses.
//! Polarization is untouched by an ideal interferometer; real beam splitters
//! respond differently to H and V, which is exactly the imperfection the rest
//! of the crate quantifies.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::mat::{tensor, ComplexMatrix};
use crate::qprob::DensityState;
use crate::Error;

#[inline]
fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Amplitude coefficients of one physical beam splitter, per polarization.
///
/// `t_*` multiplies the transmitted amplitude and `r_*` the reflected one; a
/// lossless splitter has `t² + r² = 1`, a lossy one `t² + r² < 1`. The H and
/// V entries may differ — that polarization dependence is the central
/// imperfection studied here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterSpec {
    /// Transmission amplitude for horizontal polarization, in [0, 1].
    pub t_h: f64,
    /// Reflection amplitude for horizontal polarization, in [0, 1].
    pub r_h: f64,
    /// Transmission amplitude for vertical polarization, in [0, 1].
    pub t_v: f64,
    /// Reflection amplitude for vertical polarization, in [0, 1].
    pub r_v: f64,
}

impl BeamSplitterSpec {
    /// A balanced lossless splitter: `t = r = √0.5` for both polarizations.
    pub fn balanced() -> Self {
        let h = 0.5_f64.sqrt();
        BeamSplitterSpec {
            t_h: h,
            r_h: h,
            t_v: h,
            r_v: h,
        }
    }

    /// Checks passivity (`t² + r² ≤ 1`) and normalizability (`t² + r² > 0`)
    /// for both polarization channels, plus coefficient ranges.
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [
            ("t_h", self.t_h),
            ("r_h", self.r_h),
            ("t_v", self.t_v),
            ("r_v", self.r_v),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "beam splitter coefficient {name} = {v} must lie in [0, 1]"
                )));
            }
        }
        let nh = self.t_h * self.t_h + self.r_h * self.r_h;
        let nv = self.t_v * self.t_v + self.r_v * self.r_v;
        if nh > 1.0 + 1e-12 || nv > 1.0 + 1e-12 {
            return Err(Error::NotPassive(format!(
                "t²+r² = {nh:.6} (H), {nv:.6} (V); both must be ≤ 1"
            )));
        }
        if nh <= 0.0 || nv <= 0.0 {
            return Err(Error::DegenerateSpec(
                "beam splitter has a zero-norm polarization channel".into(),
            ));
        }
        Ok(())
    }

    /// Coefficients with both amplitudes of each polarization channel scaled
    /// by a common mirror loss factor.
    fn rescaled(&self, eta_h: f64, eta_v: f64) -> BeamSplitterSpec {
        BeamSplitterSpec {
            t_h: eta_h * self.t_h,
            r_h: eta_h * self.r_h,
            t_v: eta_v * self.t_v,
            r_v: eta_v * self.r_v,
        }
    }
}

/// Mixing angles of a beam splitter after normalizing out losses.
///
/// `cos(alpha) = t/√(t²+r²)` and `sin(alpha) = r/√(t²+r²)` per polarization;
/// with nonnegative coefficients both angles lie in `[0, π/2]`. A splitter is
/// polarization-independent exactly when `alpha_h == alpha_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsAngles {
    /// Mixing angle seen by horizontal polarization, radians in [0, π/2].
    pub alpha_h: f64,
    /// Mixing angle seen by vertical polarization, radians in [0, π/2].
    pub alpha_v: f64,
}

/// Loss factors of the folding mirrors between the two beam splitters.
///
/// The mirrors are assumed polarization-preserving up to these scalar
/// attenuations, which are folded into the second splitter's coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorSpec {
    /// Amplitude retained by horizontally polarized light, in (0, 1].
    pub eta_h: f64,
    /// Amplitude retained by vertically polarized light, in (0, 1].
    pub eta_v: f64,
}

impl MirrorSpec {
    /// A lossless mirror pair.
    pub fn lossless() -> Self {
        MirrorSpec {
            eta_h: 1.0,
            eta_v: 1.0,
        }
    }

    /// Checks `0 < η ≤ 1` for both polarizations.
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [("eta_h", self.eta_h), ("eta_v", self.eta_v)] {
            if !v.is_finite() || v <= 0.0 || v > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "mirror factor {name} = {v} must lie in (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Parameters of the generation stage that prepares the entangled state.
///
/// A vertically polarized photon hits a polarizing splitter with amplitudes
/// `(t_v0, r_v0)`; the transmitted path is rotated to horizontal and the two
/// paths recombine into `√α |0H⟩ + e^{i(π/2−ξ)} √β |1V⟩` where
/// `α = t_v0²/(t_v0²+r_v0²)`. The common mirror factor `eta_gen` attenuates
/// both paths equally and therefore cancels from the normalized state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    /// Transmission amplitude of the generation splitter, in [0, 1].
    pub t_v0: f64,
    /// Reflection amplitude of the generation splitter, in [0, 1].
    pub r_v0: f64,
    /// Common mirror attenuation of the generation stage, in (0, 1].
    pub eta_gen: f64,
    /// Compensation phase ξ in radians; ξ = π/2 yields real amplitudes.
    pub xi: f64,
}

impl GenerationSpec {
    /// Balanced generation with the phase dialed for real amplitudes
    /// (`α = β = 1/2`, ξ = π/2).
    pub fn balanced_real() -> Self {
        let h = 0.5_f64.sqrt();
        GenerationSpec {
            t_v0: h,
            r_v0: h,
            eta_gen: 1.0,
            xi: std::f64::consts::FRAC_PI_2,
        }
    }

    /// Checks coefficient ranges and `0 < t_v0² + r_v0² ≤ 1`.
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [("t_v0", self.t_v0), ("r_v0", self.r_v0)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "generation coefficient {name} = {v} must lie in [0, 1]"
                )));
            }
        }
        let n = self.t_v0 * self.t_v0 + self.r_v0 * self.r_v0;
        if n <= 0.0 {
            return Err(Error::DegenerateSpec(
                "generation splitter has zero norm".into(),
            ));
        }
        if n > 1.0 + 1e-12 {
            return Err(Error::NotPassive(format!(
                "generation splitter t²+r² = {n:.6} must be ≤ 1"
            )));
        }
        if !self.eta_gen.is_finite() || self.eta_gen <= 0.0 || self.eta_gen > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "eta_gen = {} must lie in (0, 1]",
                self.eta_gen
            )));
        }
        if !self.xi.is_finite() {
            return Err(Error::InvalidParameter("xi must be finite".into()));
        }
        Ok(())
    }

    /// Weight `α` of the `|0H⟩` component (and `β = 1 − α`).
    pub fn alpha_beta(&self) -> (f64, f64) {
        let t2 = self.t_v0 * self.t_v0;
        let r2 = self.r_v0 * self.r_v0;
        let alpha = t2 / (t2 + r2);
        (alpha, 1.0 - alpha)
    }
}

/// The complete optical setup: generation stage plus the two preparation
/// beam splitters and the folding mirrors between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupSpec {
    /// First preparation beam splitter.
    pub bs1: BeamSplitterSpec,
    /// Second preparation beam splitter (mirror losses are folded into it).
    pub bs2: BeamSplitterSpec,
    /// Folding mirrors between the two splitters.
    pub mirror: MirrorSpec,
    /// Generation stage producing the input state.
    pub gen: GenerationSpec,
}

impl SetupSpec {
    /// A fully ideal setup: balanced lossless splitters, lossless mirrors,
    /// balanced generation with real amplitudes.
    pub fn ideal() -> Self {
        SetupSpec {
            bs1: BeamSplitterSpec::balanced(),
            bs2: BeamSplitterSpec::balanced(),
            mirror: MirrorSpec::lossless(),
            gen: GenerationSpec::balanced_real(),
        }
    }

    /// Validates every component.
    pub fn validate(&self) -> Result<(), Error> {
        self.bs1.validate()?;
        self.bs2.validate()?;
        self.mirror.validate()?;
        self.gen.validate()
    }

    /// The second splitter's coefficients with the mirror losses folded in.
    pub fn bs2_with_mirror(&self) -> BeamSplitterSpec {
        self.bs2.rescaled(self.mirror.eta_h, self.mirror.eta_v)
    }
}

/// The 4×4 matrix of a beam splitter in the global basis: block-diagonal in
/// polarization, with each block mixing the two momentum modes as
/// `[[t, i·r], [i·r, t]]`.
pub fn bs_operator(spec: &BeamSplitterSpec) -> Result<ComplexMatrix, Error> {
    spec.validate()?;
    let mut m = ComplexMatrix::zeros(4, 4);
    for (block, (t, r)) in [(0, (spec.t_h, spec.r_h)), (2, (spec.t_v, spec.r_v))] {
        m.set(block, block, c64(t, 0.0));
        m.set(block, block + 1, c64(0.0, r));
        m.set(block + 1, block, c64(0.0, r));
        m.set(block + 1, block + 1, c64(t, 0.0));
    }
    Ok(m)
}

/// Splits a beam splitter into unit-norm mixing angles plus the per-channel
/// amplitude survival factors `[c_H, c_V] = [√(t_H²+r_H²), √(t_V²+r_V²)]`.
///
/// The matrix rebuilt from the returned angles (via [`bs_operator`] with
/// `t = cos`, `r = sin`) is unitary.
pub fn normalize_bs(spec: &BeamSplitterSpec) -> Result<(BsAngles, [f64; 2]), Error> {
    spec.validate()?;
    let ch = (spec.t_h * spec.t_h + spec.r_h * spec.r_h).sqrt();
    let cv = (spec.t_v * spec.t_v + spec.r_v * spec.r_v).sqrt();
    Ok((
        BsAngles {
            alpha_h: (spec.r_h / ch).atan2(spec.t_h / ch),
            alpha_v: (spec.r_v / cv).atan2(spec.t_v / cv),
        },
        [ch, cv],
    ))
}

/// The relative-phase element on the upper interferometer path:
/// `diag(e^{iφ}, 1)` acting on momentum.
pub fn phase_operator(phi: f64) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(2);
    m.set(0, 0, Complex64::from_polar(1.0, phi));
    m
}

/// The momentum-path swap performed by a folding mirror: `[[0,1],[1,0]]`.
///
/// Including or omitting it only relabels which detector is called "+1" for
/// the momentum outcome, so the evolution operators below leave it out; a
/// property test pins down that relabeling behavior.
pub fn mirror_swap() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m.set(0, 1, c64(1.0, 0.0));
    m.set(1, 0, c64(1.0, 0.0));
    m
}

/// Polarization rotation by `theta`: `[[cos θ, −sin θ], [sin θ, cos θ]]`
/// acting on `(|H⟩, |V⟩)`.
pub fn polarization_rotation(theta: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    ComplexMatrix::from_fn(2, 2, |r, q| match (r, q) {
        (0, 0) | (1, 1) => c64(c, 0.0),
        (0, 1) => c64(-s, 0.0),
        _ => c64(s, 0.0),
    })
}

/// The interferometer evolution at phase `phi`: second splitter (with mirror
/// losses folded in), then the phase element, then the first splitter.
///
/// With `normalized = false` the true lossy operator is returned (operator
/// norm ≤ 1, not unitary in general). With `normalized = true` each
/// splitter's coefficients are replaced by their unit-norm mixing angles, so
/// the result is the closest unitary description of the same mixing — the
/// reference against which post-selected statistics are compared.
pub fn mzi_real_operator(
    setup: &SetupSpec,
    phi: f64,
    normalized: bool,
) -> Result<ComplexMatrix, Error> {
    setup.validate()?;
    let bs2 = setup.bs2_with_mirror();
    let (m1, m2) = if normalized {
        let (a1, _) = normalize_bs(&setup.bs1)?;
        let (a2, _) = normalize_bs(&bs2)?;
        let unit = |a: BsAngles| BeamSplitterSpec {
            t_h: a.alpha_h.cos(),
            r_h: a.alpha_h.sin(),
            t_v: a.alpha_v.cos(),
            r_v: a.alpha_v.sin(),
        };
        (bs_operator(&unit(a1))?, bs_operator(&unit(a2))?)
    } else {
        (bs_operator(&setup.bs1)?, bs_operator(&bs2)?)
    };
    let phase4 = tensor(&phase_operator(phi), &ComplexMatrix::identity(2))?;
    Ok(m1.mul(&phase4).mul(&m2))
}

/// The state produced by the generation stage: the pure state
/// `√α |0H⟩ + e^{i(π/2−ξ)} √β |1V⟩` as a density matrix with its
/// block decomposition populated.
///
/// At ξ = 0 this is `(√α|0H⟩ + i√β|1V⟩)`; dialing ξ = π/2 compensates the
/// `i` and gives real amplitudes. The common attenuation `eta_gen` cancels
/// in the normalization and only matters for absolute count rates, which
/// this crate does not model.
pub fn generation_state(gen: &GenerationSpec) -> Result<DensityState, Error> {
    gen.validate()?;
    let (alpha, beta) = gen.alpha_beta();
    let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 - gen.xi);
    let psi = [
        c64(alpha.sqrt(), 0.0),
        c64(0.0, 0.0),
        c64(0.0, 0.0),
        phase * beta.sqrt(),
    ];
    DensityState::from_pure(&psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{hs_norm, is_density, is_unitary, op_norm};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn balanced_bs_operator_equals_tensor_of_momentum_splitter() {
        let h = 0.5_f64.sqrt();
        let momentum = ComplexMatrix::from_rows(&[
            vec![c64(h, 0.0), c64(0.0, h)],
            vec![c64(0.0, h), c64(h, 0.0)],
        ])
        .unwrap();
        let expected = tensor(&momentum, &ComplexMatrix::identity(2)).unwrap();
        let got = bs_operator(&BeamSplitterSpec::balanced()).unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn fully_transmissive_bs_is_identity() {
        let spec = BeamSplitterSpec {
            t_h: 1.0,
            r_h: 0.0,
            t_v: 1.0,
            r_v: 0.0,
        };
        let got = bs_operator(&spec).unwrap();
        assert!(got.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn lossy_bs_column_norms_follow_the_coefficients() {
        let spec = BeamSplitterSpec {
            t_h: 0.7,
            r_h: 0.7,
            t_v: 0.6,
            r_v: 0.6,
        };
        let m = bs_operator(&spec).unwrap();
        for col in 0..4 {
            let norm2: f64 = (0..4).map(|r| m.get(r, col).norm_sqr()).sum();
            let expected = if col < 2 { 0.98 } else { 0.72 };
            assert!((norm2 - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn bs_validation_rejects_active_and_degenerate_specs() {
        let active = BeamSplitterSpec {
            t_h: 0.9,
            r_h: 0.9,
            t_v: 0.5,
            r_v: 0.5,
        };
        assert!(matches!(bs_operator(&active), Err(Error::NotPassive(_))));
        let degenerate = BeamSplitterSpec {
            t_h: 0.0,
            r_h: 0.0,
            t_v: 0.5,
            r_v: 0.5,
        };
        assert!(matches!(
            bs_operator(&degenerate),
            Err(Error::DegenerateSpec(_))
        ));
        let negative = BeamSplitterSpec {
            t_h: -0.5,
            r_h: 0.5,
            t_v: 0.5,
            r_v: 0.5,
        };
        assert!(bs_operator(&negative).is_err());
    }

    #[test]
    fn normalize_bs_examples() {
        let (angles, c) = normalize_bs(&BeamSplitterSpec::balanced()).unwrap();
        assert!((angles.alpha_h - FRAC_PI_4).abs() < 1e-15);
        assert!((angles.alpha_v - FRAC_PI_4).abs() < 1e-15);
        assert!((c[0] - 1.0).abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15);

        let lossy = BeamSplitterSpec {
            t_h: 0.6,
            r_h: 0.6,
            t_v: 0.8,
            r_v: 0.0,
        };
        let (angles, c) = normalize_bs(&lossy).unwrap();
        assert!((angles.alpha_h - FRAC_PI_4).abs() < 1e-15);
        assert!((c[0] - 0.6 * 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(angles.alpha_v, 0.0);
        assert!((c[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalized_angles_rebuild_to_a_unitary() {
        let spec = BeamSplitterSpec {
            t_h: 0.63,
            r_h: 0.41,
            t_v: 0.52,
            r_v: 0.7,
        };
        let (angles, _) = normalize_bs(&spec).unwrap();
        let unit = BeamSplitterSpec {
            t_h: angles.alpha_h.cos(),
            r_h: angles.alpha_h.sin(),
            t_v: angles.alpha_v.cos(),
            r_v: angles.alpha_v.sin(),
        };
        assert!(is_unitary(&bs_operator(&unit).unwrap(), 1e-12));
    }

    #[test]
    fn phase_operator_examples() {
        assert!(phase_operator(0.0).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let at_pi = phase_operator(PI);
        assert!((at_pi.get(0, 0) - c64(-1.0, 0.0)).norm() < 1e-15);
        assert!((at_pi.get(1, 1) - c64(1.0, 0.0)).norm() < 1e-15);
        let at_half = phase_operator(FRAC_PI_2);
        assert!((at_half.get(0, 0) - c64(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn polarization_rotation_examples() {
        assert!(polarization_rotation(0.0).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let quarter = polarization_rotation(FRAC_PI_4);
        let h = 0.5_f64.sqrt();
        assert!((quarter.get(0, 0).re - h).abs() < 1e-15);
        assert!((quarter.get(0, 1).re + h).abs() < 1e-15);
        let half = polarization_rotation(FRAC_PI_2);
        assert!((half.get(0, 1).re + 1.0).abs() < 1e-15);
        assert!((half.get(1, 0).re - 1.0).abs() < 1e-15);
        assert!(is_unitary(&polarization_rotation(1.234), 1e-15));
    }

    /// Closed form of the ideal interferometer momentum action:
    /// `i e^{iφ/2} [[sin φ/2, cos φ/2], [cos φ/2, −sin φ/2]]`.
    fn ideal_mzi_closed_form(phi: f64) -> ComplexMatrix {
        let (s, c) = (phi / 2.0).sin_cos();
        let front = c64(0.0, 1.0) * Complex64::from_polar(1.0, phi / 2.0);
        ComplexMatrix::from_rows(&[
            vec![front * s, front * c],
            vec![front * c, front * (-s)],
        ])
        .unwrap()
    }

    #[test]
    fn ideal_setup_reproduces_the_closed_form() {
        let setup = SetupSpec::ideal();
        for phi in [0.0, 0.7, 2.3, 4.0, 5.9] {
            let expected =
                tensor(&ideal_mzi_closed_form(phi), &ComplexMatrix::identity(2)).unwrap();
            for normalized in [false, true] {
                let got = mzi_real_operator(&setup, phi, normalized).unwrap();
                assert!(
                    got.max_abs_diff(&expected) < 1e-12,
                    "phi = {phi}, normalized = {normalized}"
                );
            }
        }
    }

    #[test]
    fn ideal_setup_at_zero_phase_swaps_momentum_paths() {
        // At φ = 0 the balanced interferometer routes everything to the
        // opposite port: i·(σ₁ ⊗ I) .
        let got = mzi_real_operator(&SetupSpec::ideal(), 0.0, false).unwrap();
        let expected = tensor(&mirror_swap().scale(c64(0.0, 1.0)), &ComplexMatrix::identity(2))
            .unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-14);
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
    fn normalized_operator_is_unitary_and_raw_operator_is_passive() {
        let setup = lossy_setup();
        for phi in [0.0, 0.9, 1.7, 3.1, 5.2] {
            let raw = mzi_real_operator(&setup, phi, false).unwrap();
            let unit = mzi_real_operator(&setup, phi, true).unwrap();
            assert!(is_unitary(&unit, 1e-12));
            assert!(op_norm(&raw) <= 1.0 + 1e-12);
            assert!(hs_norm(&raw) > 0.0);
        }
    }

    #[test]
    fn equal_polarization_responses_factorize_as_momentum_times_identity() {
        // When both splitters and the mirrors treat H and V identically, the
        // normalized evolution must be exactly (2×2 momentum matrix) ⊗ I₂.
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
        for phi in [0.4, 1.3, 2.8] {
            let unit = mzi_real_operator(&setup, phi, true).unwrap();
            let momentum = ComplexMatrix::from_fn(2, 2, |r, q| unit.get(r, q));
            let rebuilt = tensor(&momentum, &ComplexMatrix::identity(2)).unwrap();
            assert!(unit.max_abs_diff(&rebuilt) < 1e-12);
        }
    }

    #[test]
    fn generation_state_examples() {
        // Balanced with ξ = π/2: real amplitudes, α = β = 1/2.
        let rho = generation_state(&GenerationSpec::balanced_real()).unwrap();
        let m = rho.matrix();
        assert!(is_density(m, 1e-12));
        assert!((m.get(0, 0).re - 0.5).abs() < 1e-14);
        assert!((m.get(3, 3).re - 0.5).abs() < 1e-14);
        assert!((m.get(0, 3) - c64(0.5, 0.0)).norm() < 1e-14);

        // Balanced with ξ = 0: the i-phase survives in the cross term.
        let mut gen = GenerationSpec::balanced_real();
        gen.xi = 0.0;
        let m_i = generation_state(&gen).unwrap().matrix().clone();
        assert!((m_i.get(0, 3) - c64(0.0, -0.5)).norm() < 1e-14);

        // No reflected path: pure |0H⟩⟨0H|.
        let gen = GenerationSpec {
            t_v0: 0.8,
            r_v0: 0.0,
            eta_gen: 1.0,
            xi: 0.0,
        };
        let rho = generation_state(&gen).unwrap();
        assert!((rho.matrix().get(0, 0).re - 1.0).abs() < 1e-14);
        assert!((rho.alpha() - 1.0).abs() < 1e-14);

        // 0.6/0.8 split: α = 0.36, β = 0.64.
        let gen = GenerationSpec {
            t_v0: 0.6,
            r_v0: 0.8,
            eta_gen: 0.7,
            xi: 1.1,
        };
        let rho = generation_state(&gen).unwrap();
        assert!((rho.alpha() - 0.36).abs() < 1e-14);
        assert!((rho.beta() - 0.64).abs() < 1e-14);
    }

    #[test]
    fn generation_state_has_a_single_cross_term() {
        let gen = GenerationSpec {
            t_v0: 0.6,
            r_v0: 0.7,
            eta_gen: 1.0,
            xi: 0.3,
        };
        let m = generation_state(&gen).unwrap().matrix().clone();
        for r in 0..4 {
            for q in 0..4 {
                let in_support = (r == 0 || r == 3) && (q == 0 || q == 3);
                if !in_support {
                    assert!(m.get(r, q).norm() < 1e-15, "unexpected entry at ({r},{q})");
                }
            }
        }
    }
}
