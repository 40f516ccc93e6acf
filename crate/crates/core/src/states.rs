//! States and observables.
//!
//! A [`DensityMatrix`] is validated once at construction and carries its
//! eigendecomposition `D = U diag(λ) U*`, eigenvalues sorted descending.
//! Everything downstream works in that eigenbasis.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
/// Default lower bound on the spectrum of a state.
pub const DEFAULT_POSITIVITY_FLOOR: f64 = 1e-10;

/// Strictly positive, Hermitian, trace-one matrix with cached spectrum.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_floor(matrix, DEFAULT_POSITIVITY_FLOOR)
    }

    pub fn with_floor(matrix: CMatrix, floor: f64) -> Result<Self> {
        check_square(&matrix)?;
        check_hermitian(&matrix)?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Validation {
                invariant: "unit trace",
                index: None,
                detail: format!("trace is {} + {}i", tr.re, tr.im),
            });
        }
        let (eigenvalues, eigenvectors) = hermitian_eigen(&matrix)?;
        if let Some((position, &eigenvalue)) = eigenvalues
            .iter()
            .enumerate()
            .find(|(_, &l)| !(l >= floor))
        {
            return Err(Error::NotStrictlyPositive {
                eigenvalue,
                position,
                floor,
            });
        }
        Ok(DensityMatrix {
            matrix,
            eigenvalues,
            eigenvectors,
        })
    }

    /// `diag(p_1, ..., p_n)`.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(probs[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// `I / n`.
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary whose columns are eigenvectors matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// `Tr(D A)`.
    pub fn expectation(&self, a: &Observable) -> Result<f64> {
        self.check_dim(a)?;
        Ok(trace_of_product(&self.matrix, a.matrix()).re)
    }

    /// `V D V*` for a unitary `V`.
    pub fn conjugate(&self, v: &CMatrix) -> Result<Self> {
        check_same(self.dim(), v)?;
        let m = v * &self.matrix * v.adjoint();
        Self::new(hermitize(m))
    }

    pub(crate) fn check_dim(&self, a: &Observable) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.dim(),
            });
        }
        Ok(())
    }
}

/// A Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable(CMatrix);

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        check_hermitian(&matrix)?;
        Ok(Observable(matrix))
    }

    /// Build from a real symmetric matrix given row-major.
    pub fn from_real(n: usize, rows: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_row_iterator(
            n,
            n,
            rows.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    pub fn identity(n: usize) -> Self {
        Observable(CMatrix::identity(n, n))
    }

    pub fn pauli_x() -> Self {
        Observable(pauli(0))
    }

    pub fn pauli_y() -> Self {
        Observable(pauli(1))
    }

    pub fn pauli_z() -> Self {
        Observable(pauli(2))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Observable(self.0.map(|z| z * c))
    }

    /// `V A V*` for a unitary `V`.
    pub fn conjugate(&self, v: &CMatrix) -> Result<Self> {
        check_same(self.dim(), v)?;
        Ok(Observable(hermitize(v * &self.0 * v.adjoint())))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Observable(m)
    }
}

fn pauli(which: usize) -> CMatrix {
    let (o, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    let z = Complex64::new(0.0, 0.0);
    match which {
        0 => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        1 => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        _ => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// A nonempty list of nonzero observables of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableTuple(Vec<Observable>);

impl ObservableTuple {
    pub fn new(obs: Vec<Observable>) -> Result<Self> {
        let first = obs.first().ok_or_else(|| Error::Validation {
            invariant: "nonempty tuple",
            index: None,
            detail: "no observables given".into(),
        })?;
        let n = first.dim();
        for (k, a) in obs.iter().enumerate() {
            if a.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: a.dim(),
                });
            }
            if a.is_zero() {
                return Err(Error::Validation {
                    invariant: "nonzero observable",
                    index: None,
                    detail: format!("observable {k} is the zero matrix"),
                });
            }
        }
        Ok(ObservableTuple(obs))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.0[0].dim()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observable> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Observable] {
        &self.0
    }

    /// Every observable conjugated by the same unitary.
    pub fn conjugate(&self, v: &CMatrix) -> Result<Self> {
        Ok(ObservableTuple(
            self.0.iter().map(|a| a.conjugate(v)).collect::<Result<_>>()?,
        ))
    }

    pub fn scale(&self, c: f64) -> Self {
        ObservableTuple(self.0.iter().map(|a| a.scale(c)).collect())
    }
}

/// `A - Tr(D A) I`.
pub fn center(a: &Observable, d: &DensityMatrix) -> Result<Observable> {
    let mean = d.expectation(a)?;
    let mut m = a.matrix().clone();
    for k in 0..m.nrows() {
        m[(k, k)] -= Complex64::new(mean, 0.0);
    }
    Ok(Observable(m))
}

/// `U* A U` with `U` the eigenvectors of `D`.
pub fn to_eigenbasis(a: &Observable, d: &DensityMatrix) -> Result<CMatrix> {
    d.check_dim(a)?;
    let u = d.eigenvectors();
    Ok(u.adjoint() * a.matrix() * u)
}

/// Random state `W / Tr W` with `W = G G* / Tr(G G*) + min_gap I` and `G`
/// complex Ginibre. Every eigenvalue is at least `min_gap / (1 + n min_gap)`.
pub fn sample_density_with<R: Rng + ?Sized>(rng: &mut R, n: usize, min_gap: f64) -> Result<DensityMatrix> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
    }
    if !(min_gap >= 0.0) {
        return Err(Error::Domain(format!("min_gap must be nonnegative, got {min_gap}")));
    }
    loop {
        let g = ginibre(rng, n);
        let mut w = &g * g.adjoint();
        let tr = w.trace().re;
        if !(tr > 0.0) {
            continue;
        }
        w /= Complex64::new(tr, 0.0);
        for k in 0..n {
            w[(k, k)] += Complex64::new(min_gap, 0.0);
        }
        let tr = w.trace().re;
        w /= Complex64::new(tr, 0.0);
        let w = hermitize(w);
        // a Ginibre draw with min_gap = 0 can land under the floor; redraw
        match DensityMatrix::new(w) {
            Err(Error::NotStrictlyPositive { .. }) if min_gap == 0.0 => continue,
            other => return other,
        }
    }
}

pub fn sample_density(n: usize, seed: u64, min_gap: f64) -> Result<DensityMatrix> {
    sample_density_with(&mut ChaCha8Rng::seed_from_u64(seed), n, min_gap)
}

/// GUE-style Hermitian matrix `(G + G*) / 2`.
pub fn sample_observable_with<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<Observable> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
    }
    loop {
        let g = ginibre(rng, n);
        let h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
        let a = Observable(hermitize(h));
        if !a.is_zero() {
            return Ok(a);
        }
    }
}

pub fn sample_observable(n: usize, seed: u64) -> Result<Observable> {
    sample_observable_with(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix,
/// with the phases of `R`'s diagonal absorbed into `Q`.
pub fn sample_unitary_with<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let qr = ginibre(rng, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

/// `(M + M*) / 2`, with an exactly real diagonal.
pub(crate) fn hermitize(m: CMatrix) -> CMatrix {
    let n = m.nrows();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(m[(i, i)].re, 0.0)
        } else {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        }
    })
}

/// `Tr(A B)` without forming the product.
pub(crate) fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    if m.nrows() == 0 {
        return Err(Error::Validation {
            invariant: "nonempty matrix",
            index: None,
            detail: "matrix has dimension 0".into(),
        });
    }
    Ok(())
}

fn check_same(n: usize, v: &CMatrix) -> Result<()> {
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.nrows(),
        });
    }
    Ok(())
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let a = m[(i, j)];
            let b = m[(j, i)].conj();
            let diff = (a - b).norm();
            if !(diff <= HERMITIAN_TOL) {
                return Err(Error::Validation {
                    invariant: "Hermiticity",
                    index: Some((i, j)),
                    detail: format!("|M[{i},{j}] - conj(M[{j},{i}])| = {diff:e}"),
                });
            }
        }
    }
    Ok(())
}

/// Eigenvalues (descending) and matching unit eigenvectors.
fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}
