//! Simulation and certification toolkit for single-photon CHSH experiments
//! that entangle the momentum and polarization degrees of freedom of one
//! photon.
//!
//! The crate models a lossy Mach–Zehnder interferometer acting on the
//! momentum mode together with a polarization rotation, produces ideal and
//! realistic detection statistics, derives analytic error bounds between the
//! two, certifies extractable min-entropy from a measured CHSH value, and
//! models/estimates detector imperfections (afterpulsing, dead time, dark
//! counts) as a four-state Markov chain.
//!
//! Modules:
//! - [`mat`]: small dense complex-matrix algebra (2×2/4×4).
//! - [`optics`]: beam-splitter/mirror/phase operators and state generation.
//! - [`qprob`]: outcome distributions, correlations and CHSH values.
//! - [`bounds`]: analytic real-vs-ideal error bounds and their Monte-Carlo
//!   verification.
//! - [`certify`]: guessing-probability and min-entropy certification.
//! - [`detmodel`]: detector Markov model, stationary analysis, simulation.
//! - [`estimate`]: transition counting and maximum-likelihood estimation.

pub mod bounds;
pub mod certify;
pub mod detmodel;
pub mod estimate;
pub mod mat;
pub mod optics;
pub mod qprob;

use thiserror::Error as ThisError;

pub use bounds::{
    analytic_factorization_distance, bound_e, bound_etilde, channel_survival, compose_bounds,
    compose_bounds_from_generation, random_density, residual_norms, setup_angles,
    verify_etilde_montecarlo, verify_factorization_distance, verify_s_bound_montecarlo,
    BoundBundle, FactorizationDistanceReport, MonteCarloReport,
};
pub use certify::{pironio_entropy_bound, realistic_certificate, Certificate, TSIRELSON_BOUND};
pub use detmodel::{
    dcr_correct, first_order_inverse, invariant_distribution, invert_invariant, simulate,
    transition_matrix, DetectorSpec, InvariantReport, MarkovDetectorModel,
};
pub use estimate::{
    count_transitions, log_likelihood, mle, naive_frequency_estimate, EstimationResult,
    TransitionCounts,
};
pub use mat::{
    eigvalsh, hs_norm, is_density, is_hermitian, is_unitary, op_norm, tensor, ComplexMatrix,
};
pub use optics::{
    bs_operator, generation_state, mirror_swap, mzi_real_operator, normalize_bs, phase_operator,
    polarization_rotation, BeamSplitterSpec, BsAngles, GenerationSpec, MirrorSpec, SetupSpec,
};
pub use qprob::{
    chsh, correlation, factorized_ideal_distribution, factorized_optimal_angles,
    ideal_distribution, normalized_real_distribution, optimize_chsh_settings, real_distribution,
    DensityState, DistributionMode, MeasurementSetting, OutcomeDistribution,
};

/// Error type shared by every module in the crate.
#[derive(Debug, ThisError)]
pub enum Error {
    /// A matrix or vector had an unexpected shape.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch {
        /// What the operation required.
        expected: String,
        /// What it was given.
        found: String,
    },

    /// A matrix contained NaN or infinite entries.
    #[error("matrix entries must be finite")]
    NonFiniteEntries,

    /// An eigendecomposition was requested for a non-Hermitian matrix.
    #[error("matrix is not Hermitian")]
    NotHermitian,

    /// A state failed density-matrix validation.
    #[error("not a valid density matrix: {0}")]
    InvalidDensity(String),

    /// A beam-splitter specification would amplify the field.
    #[error("beam splitter is not passive: {0}")]
    NotPassive(String),

    /// A beam-splitter block (or generation coefficient pair) has zero norm,
    /// so its mixing angle is undefined.
    #[error("degenerate specification: {0}")]
    DegenerateSpec(String),

    /// Post-selection is impossible because the surviving-photon probability
    /// vanished.
    #[error("all photons lost: post-selected trace {0:.3e} is below threshold")]
    AllPhotonsLost(f64),

    /// A CHSH value outside the quantum range was supplied.
    #[error("CHSH value {0} exceeds the quantum bound 2*sqrt(2)")]
    SuperQuantum(f64),

    /// A probability vector was negative, non-normalized, or the wrong size.
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    /// A scalar parameter was outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative routine failed to reach its tolerance.
    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),

    /// Input data cannot support the requested estimate.
    #[error("estimation failed: {0}")]
    Estimation(String),
}
