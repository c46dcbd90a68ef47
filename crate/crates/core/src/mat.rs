//! Minimal dense complex-matrix algebra for the 2×2 and 4×4 operators used
//! throughout the toolkit: products, adjoints, tensor products, traces,
//! Hilbert–Schmidt and operator norms, and Hermiticity/unitarity/positivity
//! checks.
//!
//! The global basis convention is `{|0H⟩, |1H⟩, |0V⟩, |1V⟩}`: states are
//! grouped by polarization block (H first), and within each block ordered by
//! momentum mode. Every tensor product and projector in the crate respects
//! this single ordering, so polarization-diagonal operators come out
//! literally block-diagonal.

use num_complex::Complex64;

use crate::Error;

/// Default tolerance for validity predicates such as [`is_density`].
///
/// Chosen far above the ~1e-13 arithmetic noise floor of the eigensolver and
/// far below any physical parameter scale.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Convergence threshold (relative to the Frobenius norm) for the iterative
/// Hermitian eigensolver.
const JACOBI_TOL: f64 = 1e-13;

/// A dense complex matrix in row-major order.
///
/// Only 2×2 and 4×4 shapes occur in this crate, but the representation is
/// generic over small square and rectangular shapes (column vectors included).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// An all-zero `rows × cols` matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// The `n × n` identity.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from a row-major slice of rows.
    ///
    /// Returns an error if the rows are ragged or any entry is non-finite.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, Error> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch {
                expected: "a rectangular, non-empty row list".into(),
                found: format!("{nrows} rows"),
            });
        }
        let m = ComplexMatrix {
            rows: nrows,
            cols: ncols,
            entries: rows.iter().flatten().copied().collect(),
        };
        if !m.is_finite() {
            return Err(Error::NonFiniteEntries);
        }
        Ok(m)
    }

    /// Builds an `rows × cols` matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Entry at `(row, col)`.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols + col]
    }

    /// Overwrites the entry at `(row, col)`.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.cols + col] = value;
    }

    /// Row-major view of the entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// True when every entry is finite (no NaN or infinity).
    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Matrix product `self · other`.
    ///
    /// # Panics
    /// Panics when the inner dimensions disagree; shapes are static
    /// throughout this crate, so a mismatch is a programming error.
    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, other.rows,
            "inner dimensions must agree for a matrix product"
        );
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    /// Entry-wise sum.
    ///
    /// # Panics
    /// Panics on shape mismatch.
    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Entry-wise difference.
    ///
    /// # Panics
    /// Panics on shape mismatch.
    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Scalar multiple `c · self`.
    pub fn scale(&self, c: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| c * z).collect(),
        }
    }

    /// Conjugate transpose `self†`.
    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    /// Trace (sum of diagonal entries); requires a square matrix.
    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols, "trace requires a square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry-wise absolute difference to `other`.
    ///
    /// # Panics
    /// Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Kronecker product of a 2×2 momentum operator `a` with a 2×2 polarization
/// operator `b`, in the global `{|0H⟩, |1H⟩, |0V⟩, |1V⟩}` basis.
///
/// Because the basis groups by polarization first, the resulting 4×4 matrix
/// holds `b[p][p']·a` as its `(p, p')` block: `tensor(a, I₂)` is
/// block-diagonal with two copies of `a`, and `tensor(I₂, b)` interleaves
/// `b`'s entries across the momentum modes.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, Error> {
    if (a.nrows(), a.ncols()) != (2, 2) || (b.nrows(), b.ncols()) != (2, 2) {
        return Err(Error::DimensionMismatch {
            expected: "two 2×2 factors".into(),
            found: format!("{}×{} and {}×{}", a.nrows(), a.ncols(), b.nrows(), b.ncols()),
        });
    }
    let mut out = ComplexMatrix::zeros(4, 4);
    for p in 0..2 {
        for pp in 0..2 {
            for m in 0..2 {
                for mp in 0..2 {
                    out.set(2 * p + m, 2 * pp + mp, b.get(p, pp) * a.get(m, mp));
                }
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFiniteEntries);
    }
    Ok(out)
}

/// Operator (spectral) norm: the largest singular value of `m`, computed as
/// the square root of the largest eigenvalue of `m†m`.
pub fn op_norm(m: &ComplexMatrix) -> f64 {
    let gram = m.adjoint().mul(m);
    let eigs = eigvalsh(&gram).expect("m†m is Hermitian by construction");
    eigs.last().map_or(0.0, |&l| l.max(0.0).sqrt())
}

/// Hilbert–Schmidt (Frobenius) norm `sqrt(Tr[m†m])`.
pub fn hs_norm(m: &ComplexMatrix) -> f64 {
    m.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// True iff `m` is Hermitian within `tol` (largest entry of `m − m†`).
pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.nrows() == m.ncols() && m.max_abs_diff(&m.adjoint()) <= tol
}

/// True iff `m` is unitary within `tol` (largest entry of `m†m − I`).
pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    m.nrows() == m.ncols()
        && m.adjoint().mul(m).max_abs_diff(&ComplexMatrix::identity(m.nrows())) <= tol
}

/// True iff `m` is a valid density matrix within `tol`: Hermitian, all
/// eigenvalues ≥ −tol, and trace within `tol` of 1.
pub fn is_density(m: &ComplexMatrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() || !m.is_finite() || !is_hermitian(m, tol) {
        return false;
    }
    if (m.trace() - Complex64::new(1.0, 0.0)).norm() > tol {
        return false;
    }
    match eigvalsh(m) {
        Ok(eigs) => eigs.iter().all(|&l| l >= -tol),
        Err(_) => false,
    }
}

/// Eigenvalues of a Hermitian matrix, sorted ascending.
///
/// Uses cyclic complex Jacobi rotations with a fixed relative tolerance of
/// 1e-13; the input is symmetrized first, and an error is returned if it is
/// not Hermitian to begin with (beyond predicate tolerance) or non-finite.
pub fn eigvalsh(m: &ComplexMatrix) -> Result<Vec<f64>, Error> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: "a square matrix".into(),
            found: format!("{}×{}", m.nrows(), m.ncols()),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFiniteEntries);
    }
    if !is_hermitian(m, 1e-6 * hs_norm(m).max(1.0)) {
        return Err(Error::NotHermitian);
    }
    let n = m.nrows();
    // Work on the symmetrized copy so the diagonal is exactly real.
    let mut a = m.add(&m.adjoint()).scale(Complex64::new(0.5, 0.0));
    let threshold = JACOBI_TOL * hs_norm(&a).max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a.get(p, q).norm_sqr();
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let w = a.get(p, q);
                if w.norm() == 0.0 {
                    continue;
                }
                let phase = Complex64::from_polar(1.0, w.arg());
                let diff = (a.get(p, p) - a.get(q, q)).re;
                let theta = 0.5 * (2.0 * w.norm()).atan2(diff);
                let (c, s) = (theta.cos(), theta.sin());
                // Columns: right-multiply by the plane rotation.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp + s * phase.conj() * akq);
                    a.set(k, q, -s * phase * akp + c * akq);
                }
                // Rows: left-multiply by its adjoint.
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk + s * phase * aqk);
                    a.set(q, k, -s * phase.conj() * apk + c * aqk);
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(eigs)
}
