//! Dense complex linear algebra for small bipartite systems.
//!
//! Joint indices follow `i_A * d_B + i_B` everywhere; [`tensor`] is the
//! Kronecker product in that convention and every partial trace inverts it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Eigenvalues with magnitude below this are zero for rank decisions.
pub const RANK_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Structural predicates shared by every operator in the crate.
pub trait MatrixChecks {
    fn is_hermitian(&self, tol: f64) -> bool;
    fn is_unitary(&self, tol: f64) -> bool;
    fn is_projector(&self, tol: f64) -> bool;
    fn is_psd(&self, tol: f64) -> bool;
}

impl MatrixChecks for ComplexMatrix {
    fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && max_abs(&(self - self.adjoint())) <= tol
    }

    fn is_unitary(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let id = ComplexMatrix::identity(self.nrows(), self.ncols());
        max_abs(&(self.adjoint() * self - id)) <= tol
    }

    fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && max_abs(&(self * self - self)) <= tol
    }

    fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol.max(1e-12)) && min_eigenvalue(self) >= -tol
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of the Hermitian part of `m`, eigenvalues descending.
/// Column `k` of the returned matrix is the eigenvector of the `k`-th value.
pub fn eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn outer(u: &ComplexVector, v: &ComplexVector) -> ComplexMatrix {
    u * v.adjoint()
}

pub fn basis_vector(dim: usize, k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[k] = ONE;
    v
}

/// `|k⟩⟨k|` on a `dim`-dimensional space.
pub fn basis_projector(dim: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    m[(k, k)] = ONE;
    m
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Kronecker product, joint index `i_A * d_B + i_B`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn tensor_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    a.kronecker(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BipartiteDims {
    pub a: usize,
    pub b: usize,
}

impl BipartiteDims {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::Invalid(format!("subsystem dimensions must be positive, got ({a}, {b})")));
        }
        Ok(BipartiteDims { a, b })
    }

    pub fn joint(&self) -> usize {
        self.a * self.b
    }

    fn check_square(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.nrows() != self.joint() {
            return Err(Error::DimensionMismatch { expected: self.joint(), got: m.nrows() });
        }
        Ok(())
    }
}

/// `tr_A` of an operator on `A ⊗ B`.
pub fn partial_trace_a(m: &ComplexMatrix, dims: BipartiteDims) -> Result<ComplexMatrix> {
    dims.check_square(m)?;
    let db = dims.b;
    Ok(ComplexMatrix::from_fn(db, db, |i, j| {
        (0..dims.a).map(|k| m[(k * db + i, k * db + j)]).sum()
    }))
}

/// `tr_B` of an operator on `A ⊗ B`.
pub fn partial_trace_b(m: &ComplexMatrix, dims: BipartiteDims) -> Result<ComplexMatrix> {
    dims.check_square(m)?;
    let db = dims.b;
    Ok(ComplexMatrix::from_fn(dims.a, dims.a, |i, j| {
        (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()
    }))
}

/// A unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: ComplexVector,
}

impl Ket {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::Invalid(format!("ket norm is {norm}, expected 1")));
        }
        Ok(Ket { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(Error::Invalid("cannot normalize the zero vector".into()));
        }
        Ok(Ket { amplitudes: amplitudes.unscale(norm) })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Ket::new(ComplexVector::from_iterator(amps.len(), amps.iter().map(|&x| real(x))))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        Ket { amplitudes: basis_vector(dim, k) }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn into_vector(self) -> ComplexVector {
        self.amplitudes
    }

    pub fn projector(&self) -> ComplexMatrix {
        outer(&self.amplitudes, &self.amplitudes)
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        Ket { amplitudes: tensor_vec(&self.amplitudes, &other.amplitudes) }
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Ket) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;
    pub const PSD_TOL: f64 = 1e-10;

    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if !matrix.is_hermitian(Self::HERMITIAN_TOL) {
            return Err(Error::Invalid("density matrix is not Hermitian".into()));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::Invalid(format!("density matrix trace is {tr}, expected 1")));
        }
        let lmin = min_eigenvalue(&matrix);
        if lmin < -Self::PSD_TOL {
            return Err(Error::Invalid(format!("density matrix has eigenvalue {lmin:e}")));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn from_ket(psi: &Ket) -> Self {
        DensityMatrix { matrix: psi.projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { matrix: ComplexMatrix::identity(dim, dim).unscale(dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Nonnegative, descending, `min(d_A, d_B)` entries.
    pub coeffs: Vec<f64>,
    pub basis_a: Vec<ComplexVector>,
    pub basis_b: Vec<ComplexVector>,
}

impl SchmidtDecomposition {
    pub fn reconstruct(&self) -> ComplexVector {
        let n = self.basis_a[0].len() * self.basis_b[0].len();
        let mut psi = ComplexVector::zeros(n);
        for ((&s, u), v) in self.coeffs.iter().zip(&self.basis_a).zip(&self.basis_b) {
            psi += tensor_vec(u, v).scale(s);
        }
        psi
    }
}

pub fn schmidt(psi: &Ket, dims: BipartiteDims) -> Result<SchmidtDecomposition> {
    if psi.dim() != dims.joint() {
        return Err(Error::DimensionMismatch { expected: dims.joint(), got: psi.dim() });
    }
    let amps = psi.amplitudes();
    let m = ComplexMatrix::from_fn(dims.a, dims.b, |i, j| amps[i * dims.b + j]);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let k = dims.a.min(dims.b);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let coeffs = order.iter().map(|&i| svd.singular_values[i]).collect();
    let basis_a = order.iter().map(|&i| u.column(i).into_owned()).collect();
    let basis_b = order.iter().map(|&i| vt.row(i).transpose()).collect();
    Ok(SchmidtDecomposition { coeffs, basis_a, basis_b })
}

/// Schatten-1 norm: the sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(m.clone().svd(false, false).singular_values.iter().sum())
}

pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch { expected: r1.dim(), got: r2.dim() });
    }
    Ok(0.5 * trace_norm(&(r1.matrix() - r2.matrix()))?)
}

/// Multiplies `v` by the phase that makes its first nonzero amplitude real positive.
pub fn canonical_phase(v: &ComplexVector) -> ComplexVector {
    match v.iter().find(|z| z.norm() > 1e-12) {
        Some(z) => v * (z.conj() / z.norm()),
        None => v.clone(),
    }
}

/// Eigenbasis of a Hermitian matrix made deterministic: degenerate clusters
/// are re-spanned by Gram-Schmidt on the projected computational basis and
/// every vector gets the canonical phase. Values are descending.
pub fn canonical_eigenbasis(m: &ComplexMatrix) -> (Vec<f64>, Vec<ComplexVector>) {
    let n = m.nrows();
    let (values, vectors) = eigh(m);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end - 1] - values[end]).abs() <= 1e-10 {
            end += 1;
        }
        let size = end - start;
        if size == 1 {
            out.push(canonical_phase(&vectors.column(start).into_owned()));
        } else {
            let block = vectors.columns(start, size);
            let proj = &block * block.adjoint();
            let mut chosen: Vec<ComplexVector> = Vec::with_capacity(size);
            for j in 0..n {
                if chosen.len() == size {
                    break;
                }
                let mut w = proj.column(j).into_owned();
                for q in &chosen {
                    let overlap = q.dotc(&w);
                    w -= q * overlap;
                }
                let norm = w.norm();
                if norm > 1e-6 {
                    chosen.push(canonical_phase(&w.unscale(norm)));
                }
            }
            out.extend(chosen);
        }
        start = end;
    }
    (values, out)
}

/// Canonical purification `Σ_k √λ_k |k⟩_A |v_k⟩_B` with `d_A = rank(ρ)`.
pub fn purify(rho: &DensityMatrix) -> (Ket, BipartiteDims) {
    let db = rho.dim();
    let (values, vectors) = canonical_eigenbasis(rho.matrix());
    let kept: Vec<(f64, &ComplexVector)> =
        values.iter().cloned().zip(&vectors).filter(|(l, _)| *l > RANK_TOL).collect();
    let da = kept.len().max(1);
    let mut psi = ComplexVector::zeros(da * db);
    for (k, (lambda, v)) in kept.iter().enumerate() {
        psi.rows_mut(k * db, db).axpy(real(lambda.sqrt()), v, ONE);
    }
    let dims = BipartiteDims { a: da, b: db };
    (Ket::normalized(psi).expect("trace-one state has nonzero purification"), dims)
}

/// `exp(i δ H)` for Hermitian `H`.
pub fn expm_i_hermitian(h: &ComplexMatrix, delta: f64) -> ComplexMatrix {
    let (values, vectors) = eigh(h);
    let phases = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
        values.len(),
        values.iter().map(|&l| C64::from_polar(1.0, delta * l)),
    ));
    &vectors * phases * vectors.adjoint()
}

pub fn random_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexVector {
    ComplexVector::from_fn(dim, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_ket<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Ket {
    Ket::normalized(random_vector(dim, rng)).expect("gaussian vector is nonzero")
}

/// Random density matrix `G G† / tr(G G†)` with `G` a `dim × rank` Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, rank, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = trace(&m).re;
    DensityMatrix { matrix: hermitian_part(&m.unscale(tr)) }
}

/// Random Hermitian matrix with unit Frobenius norm.
pub fn random_hermitian_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let h = hermitian_part(&g);
    let norm = h.norm();
    h.unscale(norm)
}
