//! Dense complex linear algebra for Hermitian operators at small dimension.
//!
//! Everything downstream (strategies, second-player states, projector
//! factorizations) runs through this kernel, so tolerances are fixed here
//! once and referenced everywhere else.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Absolute max-entry tolerance for the Hermitian symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Relative tolerance for eigendecompositions and reconstructions.
pub const EIG_TOL: f64 = 1e-11;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero; below is an error.
pub const PSD_TOL: f64 = 1e-9;
/// Default rank threshold (relative to the largest eigenvalue) for supports.
pub const SUPPORT_TOL: f64 = 1e-8;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("Jacobi sweeps did not converge (remaining off-diagonal norm {off:.3e})")]
    NoConvergence { off: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn diag_real(d: &[f64]) -> Self {
        let mut m = CMatrix::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m.set(i, i, Complex64::new(x, 0.0));
        }
        m
    }

    /// Column vector as an n x 1 matrix.
    pub fn column(v: &[Complex64]) -> Self {
        let mut m = CMatrix::zeros(v.len(), 1);
        for (i, &x) in v.iter().enumerate() {
            m.set(i, 0, x);
        }
        m
    }

    /// Rank-one projector `v v†` (v need not be normalized).
    pub fn outer(v: &[Complex64], w: &[Complex64]) -> Self {
        CMatrix::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn dagger(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        self.scale_complex(Complex64::new(s, 0.0))
    }

    pub fn scale_complex(&self, s: Complex64) -> CMatrix {
        let mut m = self.clone();
        for x in &mut m.data {
            *x *= s;
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn trace_re(&self) -> f64 {
        self.trace().re
    }

    /// Trace inner product `Tr[self† other]`.
    pub fn inner(&self, other: &CMatrix) -> Complex64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    fn offdiag_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    s += self.get(i, j).norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    /// Max-entry deviation from `self†`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(M + M†)/2`.
    pub fn hermitize(&self) -> CMatrix {
        assert!(self.is_square());
        CMatrix::from_fn(self.rows, self.cols, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        })
    }

    /// Extract column `j` as a vector.
    pub fn col_vec(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self.get(i, j);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut m = self.clone();
        for (x, y) in m.data.iter_mut().zip(&rhs.data) {
            *x += y;
        }
        m
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut m = self.clone();
        for (x, y) in m.data.iter_mut().zip(&rhs.data) {
            *x -= y;
        }
        m
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matrix product dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }
}

/// Spectral decomposition of a Hermitian matrix.
pub struct EigDecomposition {
    /// Real eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl EigDecomposition {
    /// `sum_k f(lambda_k) v_k v_k†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvectors.rows();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            let v = self.eigenvectors.col_vec(k);
            for i in 0..n {
                for j in 0..n {
                    let x = out.get(i, j) + Complex64::new(w, 0.0) * v[i] * v[j].conj();
                    out.set(i, j, x);
                }
            }
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(m: &CMatrix) -> Result<EigDecomposition, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(NumericsError::NotHermitian { deviation: dev });
    }
    let n = m.rows();
    let mut a = m.hermitize();
    let mut v = CMatrix::identity(n);
    let scale = a.frob_norm();
    if scale == 0.0 || n == 1 {
        return Ok(sorted_decomposition(&a, &v));
    }
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if a.offdiag_norm() <= EIG_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a.get(p, q);
                let babs = beta.norm();
                if babs <= 1e-2 * EIG_TOL * scale / (n * n) as f64 {
                    continue;
                }
                let alpha = a.get(p, p).re;
                let delta = a.get(q, q).re;
                let phase = beta / Complex64::new(babs, 0.0);
                let tau = (delta - alpha) / (2.0 * babs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J acts on the (p,q) plane: J_pp = c, J_pq = s,
                // J_qp = -s*conj(phase), J_qq = c*conj(phase).
                // Apply A <- J† A J, V <- V J.
                let pc = phase.conj();
                for i in 0..n {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, aip * c - aiq * pc * s);
                    a.set(i, q, aip * s + aiq * pc * c);
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, vip * c - viq * pc * s);
                    v.set(i, q, vip * s + viq * pc * c);
                }
                for j in 0..n {
                    let apj = a.get(p, j);
                    let aqj = a.get(q, j);
                    a.set(p, j, apj * c - aqj * phase * s);
                    a.set(q, j, apj * s + aqj * phase * c);
                }
            }
        }
    }
    if !converged && a.offdiag_norm() > EIG_TOL * scale {
        return Err(NumericsError::NoConvergence {
            off: a.offdiag_norm(),
        });
    }
    Ok(sorted_decomposition(&a, &v))
}

fn sorted_decomposition(a: &CMatrix, v: &CMatrix) -> EigDecomposition {
    let n = a.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).re.partial_cmp(&a.get(i, i).re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i).re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, k| v.get(i, order[k]));
    EigDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Operator square root of a positive semidefinite matrix.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix, NumericsError> {
    let e = hermitian_eig(m)?;
    let min = e.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(NumericsError::NotPsd {
            min_eigenvalue: min,
        });
    }
    // eigenvalues below the solver's resolution are noise; taking their
    // square root would amplify them by many orders of magnitude
    let cut = EIG_TOL * e.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    Ok(e.apply(|lam| if lam > cut { lam.sqrt() } else { 0.0 }))
}

/// Inverse square root on the support of a PSD matrix (pseudoinverse off it).
pub fn psd_inv_sqrt(m: &CMatrix, rank_tol: f64) -> Result<CMatrix, NumericsError> {
    let e = hermitian_eig(m)?;
    let min = e.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(NumericsError::NotPsd {
            min_eigenvalue: min,
        });
    }
    let lmax = e.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cut = rank_tol * lmax;
    Ok(e.apply(|lam| if lam > cut { 1.0 / lam.sqrt() } else { 0.0 }))
}

/// Projector onto the span of eigenvectors with eigenvalue above
/// `tol * lambda_max`.
pub fn support_projector(m: &CMatrix, tol: f64) -> Result<CMatrix, NumericsError> {
    let e = hermitian_eig(m)?;
    let lmax = e.eigenvalues.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return Ok(CMatrix::zeros(m.rows(), m.cols()));
    }
    let cut = tol * lmax;
    Ok(e.apply(|lam| if lam > cut { 1.0 } else { 0.0 }))
}

/// Orthonormal columns spanning the support of a PSD matrix.
pub fn support_isometry(m: &CMatrix, tol: f64) -> Result<CMatrix, NumericsError> {
    let e = hermitian_eig(m)?;
    let lmax = e.eigenvalues.first().copied().unwrap_or(0.0);
    let cut = tol * lmax.max(0.0);
    let kept: Vec<usize> = e
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lam)| lam > cut && lmax > 0.0)
        .map(|(k, _)| k)
        .collect();
    if kept.is_empty() {
        return Err(NumericsError::NotPsd {
            min_eigenvalue: lmax,
        });
    }
    Ok(CMatrix::from_fn(m.rows(), kept.len(), |i, j| {
        e.eigenvectors.get(i, kept[j])
    }))
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> Result<f64, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::DimensionMismatch(
            "trace norm needs a square matrix".into(),
        ));
    }
    if m.is_hermitian(HERMITIAN_TOL) {
        let e = hermitian_eig(m)?;
        Ok(e.eigenvalues.iter().map(|l| l.abs()).sum())
    } else {
        let g = &m.dagger() * m;
        let e = hermitian_eig(&g)?;
        Ok(e.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum())
    }
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(m: &CMatrix) -> f64 {
    m.frob_norm()
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> Result<f64, NumericsError> {
    let g = &m.dagger() * m;
    let e = hermitian_eig(&g)?;
    Ok(e.eigenvalues.first().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Tensor product, first factor major: index `(i1*dim2 + i2)`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for ia in 0..a.rows() {
        for ja in 0..a.cols() {
            let x = a.get(ia, ja);
            if x.norm_sqr() == 0.0 {
                continue;
            }
            for ib in 0..b.rows() {
                for jb in 0..b.cols() {
                    out.set(ia * b.rows() + ib, ja * b.cols() + jb, x * b.get(ib, jb));
                }
            }
        }
    }
    out
}

/// Which tensor factor `partial_trace` removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceSide {
    /// Trace out the first factor, keeping the second.
    First,
    /// Trace out the second factor, keeping the first.
    Second,
}

/// Partial trace over one factor of a `dim_first x dim_second` tensor space.
pub fn partial_trace(
    m: &CMatrix,
    dim_first: usize,
    dim_second: usize,
    side: TraceSide,
) -> Result<CMatrix, NumericsError> {
    let d = dim_first * dim_second;
    if m.rows() != d || m.cols() != d {
        return Err(NumericsError::DimensionMismatch(format!(
            "partial trace of {}x{} matrix over {}x{} factors",
            m.rows(),
            m.cols(),
            dim_first,
            dim_second
        )));
    }
    match side {
        TraceSide::First => {
            let mut out = CMatrix::zeros(dim_second, dim_second);
            for j1 in 0..dim_second {
                for j2 in 0..dim_second {
                    let mut s = Complex64::new(0.0, 0.0);
                    for i in 0..dim_first {
                        s += m.get(i * dim_second + j1, i * dim_second + j2);
                    }
                    out.set(j1, j2, s);
                }
            }
            Ok(out)
        }
        TraceSide::Second => {
            let mut out = CMatrix::zeros(dim_first, dim_first);
            for i1 in 0..dim_first {
                for i2 in 0..dim_first {
                    let mut s = Complex64::new(0.0, 0.0);
                    for j in 0..dim_second {
                        s += m.get(i1 * dim_second + j, i2 * dim_second + j);
                    }
                    out.set(i1, i2, s);
                }
            }
            Ok(out)
        }
    }
}

/// Commutator `[A, B] = AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    &(a * b) - &(b * a)
}

/// Conjugation `A M A†`.
pub fn sandwich(a: &CMatrix, m: &CMatrix) -> CMatrix {
    &(a * m) * &a.dagger()
}
