//! Maximum-likelihood recovery of the per-event channel probabilities from
//! an observed, serially correlated outcome sequence.
//!
//! Under the detector chain the log-likelihood of a sequence is
//! `l(p) = ln p_{x₁} + Σ_ij N_ij · ln P_ij(p)`, with `N_ij` the lag-1
//! transition counts and `P` the transition matrix built from `(p, p_a, ε)`.
//! The afterpulse and dead-time parameters are calibration constants, so
//! only `p` is estimated: the simplex is reparametrized by three softmax
//! coordinates, the likelihood is maximized by a small BFGS ascent with an
//! analytic gradient, and Wald confidence intervals come from the observed
//! information at the optimum, mapped back to the simplex by the delta
//! method.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::detmodel::{invert_invariant, transition_matrix, MarkovDetectorModel};
use crate::Error;

/// Lag-1 transition counts of an outcome sequence, plus the first symbol
/// (which enters the likelihood separately).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    counts: [[u64; 4]; 4],
    first_symbol: u8,
    n_total: usize,
}

impl TransitionCounts {
    /// Count of transitions from channel `i` to channel `j`.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j]
    }

    /// The full 4×4 count matrix.
    pub fn counts(&self) -> &[[u64; 4]; 4] {
        &self.counts
    }

    /// First symbol of the sequence.
    pub fn first_symbol(&self) -> u8 {
        self.first_symbol
    }

    /// Sequence length (transitions + 1).
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Number of times each channel occurs in the sequence: transitions into
    /// it, plus one for the channel the sequence started in.
    pub fn symbol_counts(&self) -> [u64; 4] {
        let mut n = [0u64; 4];
        for row in &self.counts {
            for (j, &c) in row.iter().enumerate() {
                n[j] += c;
            }
        }
        n[self.first_symbol as usize] += 1;
        n
    }
}

/// Exact lag-1 transition counts of a channel sequence (symbols 0–3).
pub fn count_transitions(seq: &[u8]) -> Result<TransitionCounts, Error> {
    if seq.is_empty() {
        return Err(Error::Estimation("empty sequence".into()));
    }
    if let Some(&bad) = seq.iter().find(|&&s| s > 3) {
        return Err(Error::Estimation(format!(
            "sequence symbol {bad} outside the channel range 0..=3"
        )));
    }
    let mut counts = [[0u64; 4]; 4];
    for w in seq.windows(2) {
        counts[w[0] as usize][w[1] as usize] += 1;
    }
    Ok(TransitionCounts {
        counts,
        first_symbol: seq[0],
        n_total: seq.len(),
    })
}

/// Log-likelihood of the counts under the chain built from `(p, p_a, ε)`.
///
/// `p` is the per-event channel distribution after any dark-count
/// correction. Returns `−∞` (as a value, not an error) when a transition
/// with positive count has zero model probability.
pub fn log_likelihood(
    counts: &TransitionCounts,
    p: [f64; 4],
    p_a: f64,
    epsilon: f64,
) -> Result<f64, Error> {
    let model = transition_matrix(p, p_a, epsilon)?;
    Ok(log_likelihood_of_model(counts, &model))
}

fn log_likelihood_of_model(counts: &TransitionCounts, model: &MarkovDetectorModel) -> f64 {
    let p = model.p();
    let t = model.transition();
    let mut l = p[counts.first_symbol as usize].ln();
    for i in 0..4 {
        for j in 0..4 {
            let n = counts.counts[i][j];
            if n > 0 {
                if t[i][j] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                l += n as f64 * t[i][j].ln();
            }
        }
    }
    l
}

/// Channel frequencies corrected for the dead-time bias: empirical symbol
/// frequencies fed through the exact stationary-distribution inversion at
/// the calibrated `ε`.
///
/// Channels absent from the sequence are floored at 1e-12 (then the vector
/// is renormalized) so the inversion stays defined; such frequencies carry
/// no information anyway. Serves as the published rough estimate and as the
/// starting point of [`mle`].
pub fn naive_frequency_estimate(
    counts: &TransitionCounts,
    epsilon: f64,
) -> Result<[f64; 4], Error> {
    let n = counts.n_total as f64;
    let mut f = counts.symbol_counts().map(|c| c as f64 / n);
    let mut sum = 0.0;
    for v in f.iter_mut() {
        *v = v.max(1e-12);
        sum += *v;
    }
    for v in f.iter_mut() {
        *v /= sum;
    }
    invert_invariant(f, epsilon)
}

/// Maximum-likelihood estimate with confidence intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Estimated channel distribution.
    pub p_hat: [f64; 4],
    /// Log-likelihood at the estimate.
    pub loglik: f64,
    /// Lower confidence bounds, elementwise ≤ `p_hat`.
    pub ci_lower: [f64; 4],
    /// Upper confidence bounds, elementwise ≥ `p_hat`.
    pub ci_upper: [f64; 4],
    /// Two-sided confidence level the intervals were built for.
    pub level: f64,
    /// Whether the gradient tolerance was reached within the iteration cap.
    pub converged: bool,
}

const GRAD_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 500;
/// Softmax coordinates are confined to this box; it already allows
/// component probabilities down to ~1e-35, far below anything estimable.
const Z_BOX: f64 = 40.0;

fn softmax(z: &[f64; 3]) -> [f64; 4] {
    let mut w = [z[0], z[1], z[2], 0.0];
    let m = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in w.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    w.map(|v| v / sum)
}

/// Gradient of the log-likelihood in the three softmax coordinates.
///
/// Chains `∂l/∂p` through `∂p_m/∂z_k = p_m(δ_mk − p_k)`; the transition
/// matrix entries are linear or quadratic in `p`, so `∂P_ij/∂p_k` is
/// explicit: `(1−p_a)·(δ_jk(1+εp_i) + ε·δ_ik·p_j)` off the diagonal and
/// `δ_ik·(1−p_a)·(1−ε+2εp_i)` on it.
fn loglik_gradient(
    counts: &TransitionCounts,
    p: &[f64; 4],
    p_a: f64,
    epsilon: f64,
    t: &[[f64; 4]; 4],
) -> [f64; 3] {
    let mut dl_dp = [0.0; 4];
    dl_dp[counts.first_symbol as usize] += 1.0 / p[counts.first_symbol as usize];
    for i in 0..4 {
        for j in 0..4 {
            let n = counts.counts[i][j];
            if n == 0 {
                continue;
            }
            let w = n as f64 / t[i][j];
            if i == j {
                dl_dp[i] += w * (1.0 - p_a) * (1.0 - epsilon + 2.0 * epsilon * p[i]);
            } else {
                dl_dp[j] += w * (1.0 - p_a) * (1.0 + epsilon * p[i]);
                dl_dp[i] += w * (1.0 - p_a) * epsilon * p[j];
            }
        }
    }
    let inner: f64 = (0..4).map(|m| dl_dp[m] * p[m]).sum();
    let mut g = [0.0; 3];
    for k in 0..3 {
        g[k] = p[k] * (dl_dp[k] - inner);
    }
    g
}

fn eval(counts: &TransitionCounts, z: &[f64; 3], p_a: f64, epsilon: f64) -> (f64, [f64; 3]) {
    let p = softmax(z);
    // The iterates stay interior (softmax output is strictly positive), so
    // building the chain cannot fail.
    let model = transition_matrix(p, p_a, epsilon).expect("softmax point is interior");
    let l = log_likelihood_of_model(counts, &model);
    let g = loglik_gradient(counts, &p, p_a, epsilon, model.transition());
    (l, g)
}

/// Solves the symmetric 3×3 system `a·x = b` by Gaussian elimination with
/// partial pivoting; `None` when singular to working precision.
fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut rhs = *b;
    let mut perm = [0, 1, 2];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        perm.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Maximizes the log-likelihood over the channel distribution, holding
/// `(p_a, ε)` fixed as calibration constants, and attaches Wald confidence
/// intervals at the requested two-sided `level`.
///
/// Sequences shorter than ~10³ events give statistically weak estimates;
/// the routine still runs but the intervals widen accordingly.
pub fn mle(
    counts: &TransitionCounts,
    p_a: f64,
    epsilon: f64,
    level: f64,
) -> Result<EstimationResult, Error> {
    if counts.n_total < 2 {
        return Err(Error::Estimation(
            "need at least two events to estimate transition structure".into(),
        ));
    }
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "confidence level {level} must lie in (0, 1)"
        )));
    }

    // Interior starting point from the dead-time-corrected frequencies.
    let mut start = naive_frequency_estimate(counts, epsilon)?;
    let mut sum = 0.0;
    for v in start.iter_mut() {
        *v = v.max(1e-6);
        sum += *v;
    }
    for v in start.iter_mut() {
        *v /= sum;
    }
    let mut z = [
        (start[0] / start[3]).ln(),
        (start[1] / start[3]).ln(),
        (start[2] / start[3]).ln(),
    ];

    // BFGS ascent (inverse-Hessian approximation h, Armijo backtracking).
    let (mut l, mut g) = eval(counts, &z, p_a, epsilon);
    let mut h = [[0.0; 3]; 3];
    for (k, row) in h.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    let mut converged = false;
    for _ in 0..MAX_ITERS {
        let gnorm = g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if gnorm < GRAD_TOL {
            converged = true;
            break;
        }
        let mut dir = [0.0; 3];
        for r in 0..3 {
            for c in 0..3 {
                dir[r] += h[r][c] * g[c];
            }
        }
        let slope: f64 = (0..3).map(|k| dir[k] * g[k]).sum();
        let (dir, slope) = if slope > 0.0 {
            (dir, slope)
        } else {
            // Reset a non-ascent direction to steepest ascent.
            h = [[0.0; 3]; 3];
            for (k, row) in h.iter_mut().enumerate() {
                row[k] = 1.0;
            }
            let slope: f64 = g.iter().map(|v| v * v).sum();
            (g, slope)
        };
        let mut t = 1.0;
        let (z_new, l_new, g_new);
        loop {
            let mut cand = [0.0; 3];
            for k in 0..3 {
                cand[k] = (z[k] + t * dir[k]).clamp(-Z_BOX, Z_BOX);
            }
            let (lc, gc) = eval(counts, &cand, p_a, epsilon);
            if lc >= l + 1e-4 * t * slope || t < 1e-16 {
                z_new = cand;
                l_new = lc;
                g_new = gc;
                break;
            }
            t *= 0.5;
        }
        // BFGS update on the negated objective; skip when curvature
        // information is unusable.
        let s: [f64; 3] = [z_new[0] - z[0], z_new[1] - z[1], z_new[2] - z[2]];
        let y: [f64; 3] = [g[0] - g_new[0], g[1] - g_new[1], g[2] - g_new[2]];
        let sy: f64 = (0..3).map(|k| s[k] * y[k]).sum();
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * s_norm * y_norm {
            let rho = 1.0 / sy;
            // h ← (I − ρ s yᵀ) h (I − ρ y sᵀ) + ρ s sᵀ
            let mut hy = [0.0; 3];
            for r in 0..3 {
                for c in 0..3 {
                    hy[r] += h[r][c] * y[c];
                }
            }
            let yhy: f64 = (0..3).map(|k| y[k] * hy[k]).sum();
            let mut h_next = [[0.0; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    h_next[r][c] = h[r][c] - rho * (s[r] * hy[c] + hy[r] * s[c])
                        + rho * (1.0 + rho * yhy) * s[r] * s[c];
                }
            }
            h = h_next;
        }
        z = z_new;
        l = l_new;
        g = g_new;
    }

    let p_hat = softmax(&z);

    // Observed information: central-difference Hessian of l in z.
    let fd = 1e-5;
    let lp = |dz: [f64; 3]| {
        let pt = [z[0] + dz[0], z[1] + dz[1], z[2] + dz[2]];
        eval(counts, &pt, p_a, epsilon).0
    };
    let mut hess = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let mut e_pp = [0.0; 3];
            let mut e_pm = [0.0; 3];
            let mut e_mp = [0.0; 3];
            let mut e_mm = [0.0; 3];
            e_pp[a] += fd;
            e_pp[b] += fd;
            e_pm[a] += fd;
            e_pm[b] -= fd;
            e_mp[a] -= fd;
            e_mp[b] += fd;
            e_mm[a] -= fd;
            e_mm[b] -= fd;
            let v = (lp(e_pp) - lp(e_pm) - lp(e_mp) + lp(e_mm)) / (4.0 * fd * fd);
            hess[a][b] = v;
            hess[b][a] = v;
        }
    }

    // Covariance of z: inverse of the negated Hessian, column by column.
    let neg = {
        let mut m = hess;
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        m
    };
    let mut cov = [[0.0; 3]; 3];
    let mut information_ok = true;
    for col in 0..3 {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        match solve3(&neg, &e) {
            Some(x) => {
                for r in 0..3 {
                    cov[r][col] = x[r];
                }
            }
            None => {
                information_ok = false;
                break;
            }
        }
    }

    // Delta method onto the simplex: J_mk = ∂p_m/∂z_k = p_m(δ_mk − p_k).
    let z_crit = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let mut ci_lower = p_hat;
    let mut ci_upper = p_hat;
    for m in 0..4 {
        let jac: [f64; 3] = [
            p_hat[m] * (if m == 0 { 1.0 } else { 0.0 } - p_hat[0]),
            p_hat[m] * (if m == 1 { 1.0 } else { 0.0 } - p_hat[1]),
            p_hat[m] * (if m == 2 { 1.0 } else { 0.0 } - p_hat[2]),
        ];
        let mut var = 0.0;
        if information_ok {
            for r in 0..3 {
                for c in 0..3 {
                    var += jac[r] * cov[r][c] * jac[c];
                }
            }
        }
        let half = z_crit * var.max(0.0).sqrt();
        ci_lower[m] = (p_hat[m] - half).max(0.0);
        ci_upper[m] = (p_hat[m] + half).min(1.0);
    }

    Ok(EstimationResult {
        p_hat,
        loglik: l,
        ci_lower,
        ci_upper,
        level,
        converged,
    })
}
