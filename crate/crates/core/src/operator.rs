//! Exact finite-dimensional quantum mechanics on dense matrices.
//!
//! Everything here works in units with ħ = 1. Operators are stored as dense
//! complex matrices; the exact engine is meant for desk-scale systems and
//! refuses to build spaces above [`max_dim`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Environment variable that caps the exact-engine Hilbert-space dimension.
pub const MAX_DIM_ENV: &str = "QWORKLAB_MAX_DIM";
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

/// Elementwise Hermiticity tolerance, relative to max(1, max |entry|).
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Current exact-engine dimension cap.
pub fn max_dim() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_MAX_DIM)
}

pub fn check_dim(dim: usize) -> Result<()> {
    let cap = max_dim();
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(())
}

/// `local_dim^cells`, or a cap error if it overflows or exceeds [`max_dim`].
pub fn space_dim(local_dim: usize, cells: usize) -> Result<usize> {
    let dim = u32::try_from(cells)
        .ok()
        .and_then(|c| local_dim.checked_pow(c))
        .ok_or(Error::DimensionCap {
            dim: usize::MAX,
            cap: max_dim(),
        })?;
    check_dim(dim)?;
    Ok(dim)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Dense Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let deviation = max_abs_diff(&matrix, &matrix.adjoint());
        if deviation > HERMITIAN_TOL * max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn from_real(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix.map(|x| Complex64::new(x, 0.0)))
    }

    /// Symmetrizes `(m + m^H)/2`; use only where `m` is Hermitian up to roundoff.
    pub(crate) fn symmetrized(matrix: CMatrix) -> Self {
        let adj = matrix.adjoint();
        Self {
            matrix: (matrix + adj) * Complex64::new(0.5, 0.0),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
        Self {
            matrix: CMatrix::from_diagonal(&d),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * Complex64::new(factor, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
        })
    }

    /// `shift * I - self`, the spectral inversion used for `E_max - H`.
    pub fn reflected(&self, shift: f64) -> Self {
        let mut m = -&self.matrix;
        for i in 0..self.dim() {
            m[(i, i)] += shift;
        }
        Self { matrix: m }
    }

    /// `U^H self U`.
    pub fn conjugated_by(&self, unitary: &CMatrix) -> Result<Self> {
        if unitary.nrows() != self.dim() || !unitary.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: unitary.nrows(),
            });
        }
        Ok(Self::symmetrized(unitary.adjoint() * &self.matrix * unitary))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    /// True when every entry has an exactly vanishing imaginary part.
    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|c| (0..n).all(|r| r == c || self.matrix[(r, c)] == ZERO))
    }

    /// Operator norm (largest |eigenvalue|).
    pub fn norm(&self) -> f64 {
        let spec = diagonalize(self);
        spec.eigenvalues()
            .iter()
            .map(|e| e.abs())
            .fold(0.0, f64::max)
    }
}

/// Single-qubit operators in the basis (|0>, |1>).
pub mod pauli {
    use super::*;

    pub fn x() -> HermitianOperator {
        HermitianOperator::from_real(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))
            .expect("sigma_x is Hermitian")
    }

    pub fn y() -> HermitianOperator {
        HermitianOperator::new(CMatrix::from_row_slice(
            2,
            2,
            &[ZERO, Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), ZERO],
        ))
        .expect("sigma_y is Hermitian")
    }

    /// sigma_z with |0> as the -1 eigenstate and |1> as the +1 eigenstate.
    pub fn z() -> HermitianOperator {
        HermitianOperator::diagonal(&[-1.0, 1.0])
    }

    /// (sigma_z + 1)/2 = |1><1|.
    pub fn number() -> HermitianOperator {
        HermitianOperator::diagonal(&[0.0, 1.0])
    }
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amplitudes })
    }

    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Skips the norm check; callers guarantee unitarity up to roundoff.
    pub(crate) fn from_unitary_image(amplitudes: CVector) -> Self {
        Self { amplitudes }
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: index,
            });
        }
        let mut v = CVector::zeros(dim);
        v[index] = ONE;
        Ok(Self { amplitudes: v })
    }

    /// Tensor product of local states, first factor most significant.
    pub fn product(factors: &[CVector]) -> Result<Self> {
        let mut acc = CVector::from_element(1, ONE);
        for f in factors {
            acc = acc.kronecker(f);
        }
        Self::normalized(acc)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        check_same(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }
}

fn check_same(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Contiguous run of (numerically) degenerate eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub energy: f64,
    pub start: usize,
    pub end: usize,
}

impl Level {
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn degeneracy(&self) -> usize {
        self.end - self.start
    }
}

/// `H = sum_i E_i |E_i><E_i|` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `sum_i f(E_i) |E_i><E_i|`.
    pub fn function(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let fe = f(e);
            for x in scaled.column_mut(j).iter_mut() {
                *x *= fe;
            }
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.function(|e| Complex64::new(e, 0.0))
    }

    /// `e^{-iHt}` as a dense matrix.
    pub fn unitary(&self, t: f64) -> CMatrix {
        self.function(|e| Complex64::from_polar(1.0, -e * t))
    }

    /// Max deviation of the eigenvector Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let g = self.eigenvectors.adjoint() * &self.eigenvectors;
        max_abs_diff(&g, &CMatrix::identity(self.dim(), self.dim()))
    }

    pub fn to_eigenbasis(&self, v: &CVector) -> CVector {
        self.eigenvectors.ad_mul(v)
    }

    pub fn from_eigenbasis(&self, c: &CVector) -> CVector {
        &self.eigenvectors * c
    }

    /// `f(H) v` through the eigenbasis.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64, v: &CVector) -> CVector {
        let mut c = self.to_eigenbasis(v);
        for (ci, &e) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= f(e);
        }
        self.from_eigenbasis(&c)
    }

    /// `e^{-iHt} v`.
    pub fn apply_exp(&self, t: f64, v: &CVector) -> CVector {
        self.apply_fn(|e| Complex64::from_polar(1.0, -e * t), v)
    }

    /// Groups ascending eigenvalues into levels; a level spans values within
    /// `tol` of its lowest member.
    pub fn levels(&self, tol: f64) -> Vec<Level> {
        let mut out: Vec<Level> = Vec::new();
        let mut start = 0;
        for i in 1..=self.dim() {
            if i == self.dim() || self.eigenvalues[i] - self.eigenvalues[start] > tol {
                let slice = &self.eigenvalues[start..i];
                let energy = slice.iter().sum::<f64>() / slice.len() as f64;
                out.push(Level {
                    energy,
                    start,
                    end: i,
                });
                start = i;
            }
        }
        out
    }

    /// Default level tolerance: `1e-9 * max(1, spectral radius)`.
    pub fn default_level_tol(&self) -> f64 {
        let radius = self.eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max);
        1e-9 * radius.max(1.0)
    }

    fn sorted(values: Vec<f64>, vectors: CMatrix) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let eigenvalues = order.iter().map(|&i| values[i]).collect();
        let mut eigenvectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &vectors.column(src));
        }
        SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        }
    }

    /// Assembles a decomposition from known eigenpairs (column `i` belongs to
    /// `values[i]`); pairs are sorted and the columns checked for orthonormality.
    pub fn from_parts(values: Vec<f64>, vectors: CMatrix) -> Result<Self> {
        let n = values.len();
        if vectors.nrows() != n || vectors.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: vectors.ncols(),
            });
        }
        let spec = Self::sorted(values, vectors);
        let dev = spec.gram_deviation();
        if dev > 1e-10 {
            return Err(Error::Invariant(format!(
                "eigenvectors are not orthonormal: Gram deviation {dev:.3e}"
            )));
        }
        Ok(spec)
    }

    /// [`Self::from_parts`] without the O(d^3) orthonormality check, for
    /// eigenpairs known in closed form.
    pub(crate) fn from_parts_trusted(values: Vec<f64>, vectors: CMatrix) -> Self {
        Self::sorted(values, vectors)
    }

    /// Spectral decomposition of `self ⊗ diag(d)` without diagonalizing the
    /// larger matrix; ordering is not sorted.
    pub(crate) fn kron_diagonal(&self, diag: &[f64]) -> (Vec<f64>, CMatrix) {
        let n = self.dim();
        let m = diag.len();
        let mut values = Vec::with_capacity(n * m);
        let mut vectors = CMatrix::zeros(n * m, n * m);
        for (i, &e) in self.eigenvalues.iter().enumerate() {
            for (s, &d) in diag.iter().enumerate() {
                let col = i * m + s;
                values.push(e * d);
                for r in 0..n {
                    vectors[(r * m + s, col)] = self.eigenvectors[(r, i)];
                }
            }
        }
        (values, vectors)
    }
}

/// Dense eigendecomposition with ascending eigenvalues.
///
/// Diagonal inputs are handled exactly; real symmetric inputs use the real
/// solver, which is several times faster than the complex one.
pub fn diagonalize(h: &HermitianOperator) -> SpectralDecomposition {
    let n = h.dim();
    let (values, vectors): (Vec<f64>, CMatrix) = if h.is_diagonal() {
        let vals = (0..n).map(|i| h.matrix[(i, i)].re).collect();
        (vals, CMatrix::identity(n, n))
    } else if h.is_real() {
        let eig = h.matrix.map(|z| z.re).symmetric_eigen();
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        )
    } else {
        let eig = h.matrix.clone().symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    SpectralDecomposition::sorted(values, vectors)
}

/// Validates the matrix and diagonalizes it.
pub fn diagonalize_matrix(matrix: CMatrix) -> Result<SpectralDecomposition> {
    Ok(diagonalize(&HermitianOperator::new(matrix)?))
}

/// `e^{-iHt} psi`.
pub fn evolve(psi: &PureState, h: &SpectralDecomposition, t: f64) -> Result<PureState> {
    check_same(h.dim(), psi.dim())?;
    if t == 0.0 {
        return Ok(psi.clone());
    }
    Ok(PureState::from_unitary_image(h.apply_exp(t, psi.amplitudes())))
}

/// Places `op` on `site` (1-based) of `cells` identical cells.
pub fn embed_local(op: &HermitianOperator, site: usize, cells: usize) -> Result<HermitianOperator> {
    embed_product(&[(site, op)], op.dim(), cells)
}

/// Tensor product with the given operators on distinct sites (1-based) and the
/// identity elsewhere; site 1 is the most significant factor.
pub fn embed_product(
    factors: &[(usize, &HermitianOperator)],
    local_dim: usize,
    cells: usize,
) -> Result<HermitianOperator> {
    space_dim(local_dim, cells)?;
    let mut slots: Vec<Option<&HermitianOperator>> = vec![None; cells];
    for &(site, op) in factors {
        if site == 0 || site > cells {
            return Err(Error::SiteOutOfRange { site, cells });
        }
        check_same(local_dim, op.dim())?;
        if slots[site - 1].is_some() {
            return Err(Error::param("site", format!("site {site} given twice")));
        }
        slots[site - 1] = Some(op);
    }
    // Runs of identities are folded into a single identity factor.
    let mut acc = CMatrix::identity(1, 1);
    let mut pending_identity = 1usize;
    for slot in slots {
        match slot {
            None => pending_identity *= local_dim,
            Some(op) => {
                if pending_identity > 1 {
                    acc = acc.kronecker(&CMatrix::identity(pending_identity, pending_identity));
                    pending_identity = 1;
                }
                acc = acc.kronecker(op.matrix());
            }
        }
    }
    if pending_identity > 1 {
        acc = acc.kronecker(&CMatrix::identity(pending_identity, pending_identity));
    }
    Ok(HermitianOperator { matrix: acc })
}

/// `sum_i op_i` with `op` on every cell.
pub fn sum_local(op: &HermitianOperator, cells: usize) -> Result<HermitianOperator> {
    let dim = space_dim(op.dim(), cells)?;
    let mut acc = HermitianOperator::zeros(dim);
    for site in 1..=cells {
        acc = acc.add(&embed_local(op, site, cells)?)?;
    }
    Ok(acc)
}

/// `<psi|X|psi>` for Hermitian `X`; the imaginary roundoff is dropped.
pub fn expectation(x: &HermitianOperator, psi: &PureState) -> Result<f64> {
    let z = expectation_matrix(x.matrix(), psi)?;
    let scale = max_abs(x.matrix()).max(1.0);
    if z.im.abs() > 1e-12 * scale * x.dim() as f64 {
        return Err(Error::Invariant(format!(
            "Hermitian expectation has imaginary part {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `<psi|X|psi>` for an arbitrary operator (e.g. a product of Hermitians).
pub fn expectation_matrix(x: &CMatrix, psi: &PureState) -> Result<Complex64> {
    check_same(x.nrows(), psi.dim())?;
    check_same(x.ncols(), psi.dim())?;
    let v = psi.amplitudes();
    Ok(v.dotc(&(x * v)))
}

/// `[a, b]`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_spectrum() {
        let spec = diagonalize(&HermitianOperator::identity(2));
        assert_eq!(spec.eigenvalues(), &[1.0, 1.0]);
    }

    #[test]
    fn off_diagonal_two_level() {
        let spec = diagonalize(&pauli::x());
        assert_abs_diff_eq!(spec.eigenvalues()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(spec.eigenvalues()[1], 1.0, epsilon = 1e-14);
        assert!(spec.gram_deviation() < 1e-12);
    }

    #[test]
    fn rank_two_collective_coupling_spectrum() {
        // lambda (|11><00| + h.c.) on two qubits.
        let mut m = CMatrix::zeros(4, 4);
        m[(3, 0)] = c(1.0, 0.0);
        m[(0, 3)] = c(1.0, 0.0);
        let spec = diagonalize_matrix(m).unwrap();
        let e = spec.eigenvalues();
        for (got, want) in e.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn complex_hermitian_round_trip() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(0.5, 0.3),
                c(0.0, -0.2),
                c(0.5, -0.3),
                c(-1.0, 0.0),
                c(0.7, 0.1),
                c(0.0, 0.2),
                c(0.7, -0.1),
                c(0.4, 0.0),
            ],
        );
        let spec = diagonalize_matrix(m.clone()).unwrap();
        assert!(max_abs_diff(&spec.reconstruct(), &m) < 1e-10);
        assert!(spec.gram_deviation() < 1e-10);
        assert!(spec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(HermitianOperator::new(rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let psi = PureState::normalized(CVector::from_vec(vec![c(0.6, 0.1), c(0.2, -0.3)])).unwrap();
        let spec = diagonalize(&pauli::y());
        assert_eq!(evolve(&psi, &spec, 0.0).unwrap(), psi);
    }

    #[test]
    fn evolve_dimension_mismatch() {
        let psi = PureState::basis(4, 0).unwrap();
        let spec = diagonalize(&pauli::x());
        assert!(matches!(
            evolve(&psi, &spec, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn embed_single_site_is_itself() {
        let z = pauli::z();
        assert_eq!(embed_local(&z, 1, 1).unwrap(), z);
    }

    #[test]
    fn local_energies_sum_to_diagonal() {
        // h = (sigma_z + 1)/2 on each of two cells.
        let h = pauli::z().add(&HermitianOperator::identity(2)).unwrap().scaled(0.5);
        let h0 = sum_local(&h, 2).unwrap();
        assert_eq!(h0, HermitianOperator::diagonal(&[0.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn two_site_x_string_is_antidiagonal() {
        let x = pauli::x();
        let xx = embed_product(&[(1, &x), (2, &x)], 2, 2).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let want = if r + col == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx.matrix()[(r, col)], c(want, 0.0));
            }
        }
    }

    #[test]
    fn embed_errors() {
        let x = pauli::x();
        assert!(matches!(embed_local(&x, 0, 3), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(embed_local(&x, 4, 3), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(embed_local(&x, 1, 40), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn identity_expectation_is_one() {
        let psi = PureState::normalized(CVector::from_vec(vec![c(0.3, 0.4), c(-0.1, 0.8)])).unwrap();
        let e = expectation(&HermitianOperator::identity(2), &psi).unwrap();
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn levels_group_degenerate_values() {
        let spec = diagonalize(&HermitianOperator::diagonal(&[2.0, 0.0, 1.0, 1.0 + 1e-13]));
        let levels = spec.levels(spec.default_level_tol());
        assert_eq!(levels.len(), 3);
        assert_eq!(levels[1].degeneracy(), 2);
        assert_abs_diff_eq!(levels[2].energy, 2.0);
    }

    #[test]
    fn kron_diagonal_matches_dense_kron() {
        let spec = diagonalize(&pauli::x());
        let (vals, vecs) = spec.kron_diagonal(&[-0.3, 0.7]);
        let mut d = CMatrix::zeros(4, 4);
        for (i, v) in vals.iter().enumerate() {
            d[(i, i)] = c(*v, 0.0);
        }
        let rebuilt = &vecs * d * vecs.adjoint();
        let direct = pauli::x().kron(&HermitianOperator::diagonal(&[-0.3, 0.7]));
        assert!(max_abs_diff(&rebuilt, direct.matrix()) < 1e-12);
    }
}
