//! Metric inner products and covariance matrices.
//!
//! For a state `D = U diag(λ) U*` and a kernel `g`, the spectral inner product
//! is
//!
//! ```text
//! (A, B)_{D,g} = Σ_{k,l} A'_{lk} B'_{kl} g(λ_k, λ_l),   A' = U* A U.
//! ```
//!
//! The monotone metric uses `g = 1 / m_f`; the classical, symmetric and
//! asymmetric covariances use the kernels of [`crate::monotone::Kernel`]. Each
//! covariance also has a second, independent route (trace formula, or the
//! metric applied to commutators/anticommutators) kept for cross-checking.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::monotone::{FopSpec, Kernel};
use crate::states::{center, hermitize, to_eigenbasis, trace_of_product, CMatrix, DensityMatrix, Observable, ObservableTuple};

/// Imaginary parts above this fraction of the summed magnitude are a bug.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;
/// Slack on the smallest eigenvalue of a covariance matrix, relative to
/// `max(1, max|M|)`.
pub const PSD_SLACK: f64 = 1e-9;
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    Classical,
    SymmetricF,
    AsymmetricF,
    GenericG,
    /// `-(i/2) Tr(D [A_h, A_j])`; antisymmetric rather than PSD.
    CommutatorBound,
}

impl CovKind {
    fn of(g: &Kernel) -> Self {
        match g {
            Kernel::Classical => CovKind::Classical,
            Kernel::SymmetricF(_) => CovKind::SymmetricF,
            Kernel::AsymmetricF(_) => CovKind::AsymmetricF,
            _ => CovKind::GenericG,
        }
    }
}

/// Real `N x N` matrix of pairwise covariances of an observable tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub kind: CovKind,
    /// Kernel or function this matrix was built from.
    pub label: String,
    /// Dimension of the underlying Hilbert space.
    pub n: usize,
    pub entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn det(&self) -> f64 {
        self.entries.clone().determinant()
    }

    /// Determinant of a symmetric matrix as the product of its eigenvalues,
    /// with eigenvalues of magnitude at most `rel * max|λ|` set to zero.
    /// Roundoff on a rank-deficient PSD matrix then gives exactly zero
    /// instead of a tiny value whose N-th root is far from zero.
    pub fn psd_det(&self, rel: f64) -> f64 {
        psd_determinant(&self.entries, rel)
    }

    /// `max(1, max|M_ij|)`, the scale all slacks are measured against.
    pub fn scale(&self) -> f64 {
        self.entries.amax().max(1.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        symmetric_eigenvalues(&self.entries)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Ratio of extreme eigenvalue magnitudes; infinite for singular matrices.
    pub fn condition_number(&self) -> f64 {
        let ev = symmetric_eigenvalues(&self.entries);
        let hi = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lo = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Entrywise difference; the result is tagged as a generic-kernel matrix.
    pub fn minus(&self, other: &CovarianceMatrix) -> Result<CovarianceMatrix> {
        if self.size() != other.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                got: other.size(),
            });
        }
        Ok(CovarianceMatrix {
            kind: CovKind::GenericG,
            label: format!("({})-({})", self.label, other.label),
            n: self.n,
            entries: &self.entries - &other.entries,
        })
    }

    fn validate(&self) -> Result<()> {
        let m = &self.entries;
        let scale = self.scale();
        let antisym = self.kind == CovKind::CommutatorBound;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let d = if antisym { m[(i, j)] + m[(j, i)] } else { m[(i, j)] - m[(j, i)] };
                if d.abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InternalConsistency(format!(
                        "{} matrix not {}symmetric at ({i}, {j}): {d:e}",
                        self.label,
                        if antisym { "anti" } else { "" }
                    )));
                }
            }
        }
        if !antisym {
            let min = self.min_eigenvalue();
            if min < -PSD_SLACK * scale {
                return Err(Error::InternalConsistency(format!(
                    "{} matrix has eigenvalue {min:e} below PSD slack",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

/// See [`CovarianceMatrix::psd_det`].
pub fn psd_determinant(m: &DMatrix<f64>, rel: f64) -> f64 {
    let ev = symmetric_eigenvalues(m);
    let cut = rel * ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    ev.into_iter()
        .map(|v| if v.abs() <= cut { 0.0 } else { v })
        .product()
}

/// `K_kl = g(λ_k, λ_l)`.
pub fn kernel_matrix(eigenvalues: &[f64], g: &Kernel) -> Result<DMatrix<f64>> {
    let n = eigenvalues.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = g.eval(eigenvalues[i], eigenvalues[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `Σ_{k,l} A'_{lk} B'_{kl} K_kl` for matrices already in the eigenbasis.
pub(crate) fn spectral_sum(ap: &CMatrix, bp: &CMatrix, k: &DMatrix<f64>) -> Result<f64> {
    let n = k.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for kk in 0..n {
        for l in 0..n {
            let term = ap[(l, kk)] * bp[(kk, l)] * k[(kk, l)];
            magnitude += term.norm();
            acc += term;
        }
    }
    if !acc.re.is_finite() || !acc.im.is_finite() {
        return Err(Error::InternalConsistency("non-finite spectral sum".into()));
    }
    if acc.im.abs() > IMAG_RESIDUE_TOL * magnitude {
        return Err(Error::InternalConsistency(format!(
            "spectral sum has imaginary part {:e} against magnitude {magnitude:e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// `(A, B)_{D,g}`.
pub fn inner_g(d: &DensityMatrix, a: &Observable, b: &Observable, g: &Kernel) -> Result<f64> {
    let ap = to_eigenbasis(a, d)?;
    let bp = to_eigenbasis(b, d)?;
    let k = kernel_matrix(d.eigenvalues(), g)?;
    spectral_sum(&ap, &bp, &k)
}

/// The monotone metric `<A, B>_{D,f}`: the spectral product with `1 / m_f`.
pub fn inner_f(d: &DensityMatrix, a: &Observable, b: &Observable, f: FopSpec) -> Result<f64> {
    inner_g(d, a, b, &Kernel::InverseMean(f))
}

/// Symmetrized covariance `½ Tr(D{A,B}) - Tr(DA) Tr(DB)` by the trace formula.
pub fn cov(d: &DensityMatrix, a: &Observable, b: &Observable) -> Result<f64> {
    d.check_dim(a)?;
    d.check_dim(b)?;
    let ab = a.matrix() * b.matrix();
    let dab = trace_of_product(d.matrix(), &ab);
    // Tr(DBA) = conj(Tr(DAB)) for Hermitian D, A, B
    Ok(dab.re - d.expectation(a)? * d.expectation(b)?)
}

/// The same covariance as a spectral sum over the centered observables with
/// the classical kernel.
pub fn cov_spectral(d: &DensityMatrix, a: &Observable, b: &Observable) -> Result<f64> {
    inner_g(d, &center(a, d)?, &center(b, d)?, &Kernel::Classical)
}

/// Asymmetric quantum covariance via the kernel `g^as_f`.
pub fn qcov_as(d: &DensityMatrix, f: FopSpec, a: &Observable, b: &Observable) -> Result<f64> {
    inner_g(d, a, b, &Kernel::AsymmetricF(f))
}

/// `(f(0)/2) <i[D,A], i[D,B]>_{D,f}`.
pub fn qcov_as_commutator(d: &DensityMatrix, f: FopSpec, a: &Observable, b: &Observable) -> Result<f64> {
    let ca = i_commutator(d, a)?;
    let cb = i_commutator(d, b)?;
    Ok(0.5 * f.f_zero() * inner_f(d, &ca, &cb, f)?)
}

/// Symmetric quantum covariance via the kernel `g^s_f`. Not invariant under
/// centering.
pub fn qcov_s(d: &DensityMatrix, f: FopSpec, a: &Observable, b: &Observable) -> Result<f64> {
    inner_g(d, a, b, &Kernel::SymmetricF(f))
}

/// `(f(0)/2) <{D,A}, {D,B}>_{D,f}`.
pub fn qcov_s_anticommutator(d: &DensityMatrix, f: FopSpec, a: &Observable, b: &Observable) -> Result<f64> {
    let ca = anticommutator(d, a)?;
    let cb = anticommutator(d, b)?;
    Ok(0.5 * f.f_zero() * inner_f(d, &ca, &cb, f)?)
}

/// `i (DA - AD)`.
fn i_commutator(d: &DensityMatrix, a: &Observable) -> Result<Observable> {
    d.check_dim(a)?;
    let (dm, am) = (d.matrix(), a.matrix());
    let c = (dm * am - am * dm) * Complex64::new(0.0, 1.0);
    Ok(Observable::from_matrix_unchecked(hermitize(c)))
}

/// `DA + AD`.
fn anticommutator(d: &DensityMatrix, a: &Observable) -> Result<Observable> {
    d.check_dim(a)?;
    let (dm, am) = (d.matrix(), a.matrix());
    Ok(Observable::from_matrix_unchecked(hermitize(dm * am + am * dm)))
}

/// Covariance matrix `(A0_i, A0_j)_{D,g}` of the centered tuple.
pub fn cov_matrix(d: &DensityMatrix, obs: &ObservableTuple, g: &Kernel) -> Result<CovarianceMatrix> {
    let k = kernel_matrix(d.eigenvalues(), g)?;
    let rotated = obs
        .iter()
        .map(|a| to_eigenbasis(&center(a, d)?, d))
        .collect::<Result<Vec<_>>>()?;
    let count = rotated.len();
    let mut entries = DMatrix::zeros(count, count);
    for i in 0..count {
        for j in 0..count {
            entries[(i, j)] = spectral_sum(&rotated[i], &rotated[j], &k)?;
        }
    }
    let m = CovarianceMatrix {
        kind: CovKind::of(g),
        label: g.to_string(),
        n: d.dim(),
        entries,
    };
    m.validate()?;
    Ok(m)
}

/// Robertson's lower-bound matrix `-(i/2) Tr(D [A_h, A_j])`.
pub fn commutator_bound_matrix(d: &DensityMatrix, obs: &ObservableTuple) -> Result<CovarianceMatrix> {
    let count = obs.len();
    let mut entries = DMatrix::zeros(count, count);
    for (h, a) in obs.iter().enumerate() {
        d.check_dim(a)?;
        for (j, b) in obs.iter().enumerate() {
            let comm = a.matrix() * b.matrix() - b.matrix() * a.matrix();
            let t = trace_of_product(d.matrix(), &comm) * Complex64::new(0.0, -0.5);
            let magnitude = a.matrix().norm() * b.matrix().norm();
            if t.im.abs() > IMAG_RESIDUE_TOL * magnitude.max(1.0) {
                return Err(Error::InternalConsistency(format!(
                    "commutator entry ({h}, {j}) has imaginary part {:e}",
                    t.im
                )));
            }
            entries[(h, j)] = t.re;
        }
    }
    let m = CovarianceMatrix {
        kind: CovKind::CommutatorBound,
        label: "commutator".into(),
        n: d.dim(),
        entries,
    };
    m.validate()?;
    Ok(m)
}
