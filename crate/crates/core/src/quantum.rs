//! Dense complex linear algebra on composite finite-dimensional spaces.
//!
//! Every [`Operator`] carries the ordered list of its subsystem dimensions so
//! that tensor products and partial traces can be checked structurally.
//! Hamiltonians are exponentiated through a Hermitian eigendecomposition
//! ([`HermitianEigen`]), which is kept around by the engines and reused for
//! every time on a grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::Float;

use crate::linalg::{self, CMatrix};
use crate::{Error, Result};

/// Default hard cap on the total Hilbert-space dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Hermiticity tolerance accepted by [`matexp_unitary`] and [`HermitianEigen`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A dense square operator on `⊗_k C^{dims[k]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    dims: Vec<usize>,
}

impl Operator {
    /// Wraps `matrix`, checking squareness, the subsystem product and finiteness.
    pub fn new(matrix: DMatrix<Complex64>, dims: Vec<usize>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(format!(
                "subsystem dimensions must be positive, got {dims:?}"
            )));
        }
        let product = checked_product(&dims)?;
        if product != matrix.nrows() as u128 {
            return Err(Error::DimensionMismatch(format!(
                "subsystem dimensions {dims:?} multiply to {product}, matrix has dimension {}",
                matrix.nrows()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("operator has non-finite entries".into()));
        }
        Ok(Self { matrix, dims })
    }

    /// Single-subsystem operator.
    pub fn single(matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(matrix, vec![d])
    }

    pub(crate) fn from_parts(matrix: CMatrix, dims: Vec<usize>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), matrix.nrows());
        Self { matrix, dims }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Self::from_parts(CMatrix::identity(d, d), dims.to_vec())
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Self::from_parts(CMatrix::zeros(d, d), dims.to_vec())
    }

    /// Diagonal operator with real entries.
    pub fn from_real_diagonal(diag: &[f64], dims: Vec<usize>) -> Result<Self> {
        let m = CMatrix::from_diagonal(&DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        Self::new(m, dims)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.matrix.adjoint(), self.dims.clone())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_parts(self.matrix.map(|z| z * factor), self.dims.clone())
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Operator product; both factors must share the subsystem structure.
    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        self.check_same_dims(rhs)?;
        Ok(Self::from_parts(linalg::matmul(&self.matrix, &rhs.matrix), self.dims.clone()))
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        self.check_same_dims(rhs)?;
        Ok(Self::from_parts(&self.matrix + &rhs.matrix, self.dims.clone()))
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Operator> {
        self.check_same_dims(rhs)?;
        Ok(Self::from_parts(&self.matrix - &rhs.matrix, self.dims.clone()))
    }

    /// max_ij |A_ij - B_ij|; the dimensions must agree.
    pub fn max_abs_diff(&self, rhs: &Operator) -> f64 {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in max_abs_diff");
        linalg::max_abs_diff(&self.matrix, &rhs.matrix)
    }

    /// max_ij |A_ij - conj(A_ji)|
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// max_ij |[A, B]_ij|
    pub fn commutator_norm(&self, rhs: &Operator) -> Result<f64> {
        self.check_same_dims(rhs)?;
        let ab = linalg::matmul(&self.matrix, &rhs.matrix);
        let ba = linalg::matmul(&rhs.matrix, &self.matrix);
        Ok(linalg::max_abs_diff(&ab, &ba))
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.matrix[(i, j)] == ZERO))
    }

    fn check_same_dims(&self, rhs: &Operator) -> Result<()> {
        if self.dims != rhs.dims {
            return Err(Error::DimensionMismatch(format!(
                "subsystem dimensions {:?} and {:?} differ",
                self.dims, rhs.dims
            )));
        }
        Ok(())
    }
}

fn checked_product(dims: &[usize]) -> Result<u128> {
    dims.iter().try_fold(1u128, |acc, &d| {
        acc.checked_mul(d as u128)
            .ok_or_else(|| Error::DimensionCap { requested: u128::MAX, cap: usize::MAX })
    })
}

/// Forecast of the total dimension of `dims`, saturating at `u128::MAX`.
pub fn dimension_forecast(dims: impl IntoIterator<Item = usize>) -> u128 {
    dims.into_iter().fold(1u128, |acc, d| acc.saturating_mul(d as u128))
}

/// Tensor product with the default dimension cap.
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    kron_capped(a, b, DEFAULT_DIMENSION_CAP)
}

/// Tensor product `a ⊗ b`; fails when the result would exceed `cap`.
pub fn kron_capped(a: &Operator, b: &Operator, cap: usize) -> Result<Operator> {
    let requested = a.dim() as u128 * b.dim() as u128;
    if requested > cap as u128 {
        return Err(Error::DimensionCap { requested, cap });
    }
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Ok(Operator::from_parts(a.matrix.kronecker(&b.matrix), dims))
}

/// Pauli matrix for `axis` ∈ {x, y, z}; σ_z = diag(1, -1).
pub fn pauli(axis: crate::model::Axis) -> Operator {
    use crate::model::Axis;
    let i = Complex64::new(0.0, 1.0);
    let m = match axis {
        Axis::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Axis::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        Axis::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    };
    Operator::from_parts(m, vec![2])
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct State(Operator);

impl State {
    pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
    pub const TRACE_TOLERANCE: f64 = 1e-12;
    pub const EIGENVALUE_FLOOR: f64 = -1e-10;

    /// Validates `op` as a density matrix.
    pub fn new(op: Operator) -> Result<Self> {
        let herm = op.hermiticity_error();
        if herm > Self::HERMITIAN_TOLERANCE {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > Self::TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        if !op.is_diagonal() {
            let eig = HermitianEigen::new(&op)?;
            let min = eig.values().iter().cloned().fold(f64::INFINITY, f64::min);
            if min < Self::EIGENVALUE_FLOOR {
                return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
            }
        } else if let Some(bad) = (0..op.dim())
            .map(|i| op.matrix[(i, i)].re)
            .find(|&p| p < Self::EIGENVALUE_FLOOR)
        {
            return Err(Error::InvalidState(format!("negative population {bad:e}")));
        }
        Ok(Self(op))
    }

    pub(crate) fn from_operator_unchecked(op: Operator) -> Self {
        Self(op)
    }

    /// I/d on the given subsystems.
    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        Self(Operator::identity(dims).scale(1.0 / d as f64))
    }

    /// |ψ⟩⟨ψ| for a normalised copy of `psi`.
    pub fn pure(psi: &[Complex64], dims: Vec<usize>) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("state vector has zero or non-finite norm".into()));
        }
        let v = DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        let m = &v * v.adjoint();
        Ok(Self(Operator::new(m, dims)?))
    }

    /// Computational-basis projector |index⟩⟨index|.
    pub fn basis(index: usize, dims: Vec<usize>) -> Result<Self> {
        let d = dimension_forecast(dims.iter().copied());
        if index as u128 >= d {
            return Err(Error::InvalidState(format!("basis index {index} outside dimension {d}")));
        }
        let mut m = CMatrix::zeros(d as usize, d as usize);
        m[(index, index)] = ONE;
        Ok(Self(Operator::new(m, dims)?))
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn dims(&self) -> &[usize] {
        self.0.dims()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        self.0.matrix()
    }
}

/// Truncated harmonic oscillator: levels `0..n_max`, frequency `omega`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockSpace {
    n_max: usize,
    omega: f64,
}

impl FockSpace {
    pub fn new(n_max: usize, omega: f64) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidParameter(format!("Fock cutoff must be >= 2, got {n_max}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("mode frequency must be > 0, got {omega}")));
        }
        Ok(Self { n_max, omega })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn with_cutoff(&self, n_max: usize) -> Result<Self> {
        Self::new(n_max, self.omega)
    }

    /// Truncated annihilation operator, `a|n⟩ = √n |n-1⟩`.
    pub fn annihilation(&self) -> Operator {
        let n = self.n_max;
        let mut m = CMatrix::zeros(n, n);
        for k in 1..n {
            m[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
        }
        Operator::from_parts(m, vec![n])
    }

    pub fn creation(&self) -> Operator {
        self.annihilation().adjoint()
    }

    /// ω a†a = diag(0, ω, 2ω, …).
    pub fn hamiltonian(&self) -> Operator {
        let diag: Vec<f64> = (0..self.n_max).map(|k| self.omega * k as f64).collect();
        Operator::from_real_diagonal(&diag, vec![self.n_max]).expect("finite diagonal")
    }
}

/// Normalised populations ∝ e^{-β ω n} over the truncated space.
pub fn thermal_populations(mode: &FockSpace, beta: f64) -> Result<Vec<f64>> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("inverse temperature must be > 0, got {beta}")));
    }
    let x = beta * mode.omega;
    let weights: Vec<f64> = (0..mode.n_max).map(|n| (-x * n as f64).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// e^{-βH}/Tr e^{-βH} for one truncated oscillator.
pub fn thermal_state(mode: &FockSpace, beta: f64) -> Result<State> {
    let p = thermal_populations(mode, beta)?;
    let op = Operator::from_real_diagonal(&p, vec![mode.n_max])?;
    Ok(State::from_operator_unchecked(op))
}

/// Spectral decomposition H = Q diag(E) Q† of a Hermitian operator.
///
/// Exactly decoupled blocks (connected components of the non-zero pattern)
/// are diagonalised separately, which is exact and much cheaper for the
/// block-diagonal joint Hamiltonians of dephasing models.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    values: Vec<f64>,
    vectors: CMatrix,
    dims: Vec<usize>,
}

impl HermitianEigen {
    pub fn new(h: &Operator) -> Result<Self> {
        let herm = h.hermiticity_error();
        if herm > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian(herm));
        }
        let n = h.dim();
        let m = h.matrix();
        let blocks = connected_blocks(m);
        let mut values = vec![0.0; n];
        let mut vectors = CMatrix::zeros(n, n);
        let mut col = 0;
        for block in &blocks {
            let k = block.len();
            let mut sub = CMatrix::zeros(k, k);
            for (a, &i) in block.iter().enumerate() {
                for (b, &j) in block.iter().enumerate() {
                    // symmetrise away the sub-tolerance anti-Hermitian part
                    sub[(a, b)] = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                }
            }
            let (vals, vecs) = if k == 1 {
                (vec![sub[(0, 0)].re], CMatrix::identity(1, 1))
            } else {
                let eig = sub.symmetric_eigen();
                (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
            };
            for c in 0..k {
                values[col + c] = vals[c];
                for (a, &i) in block.iter().enumerate() {
                    vectors[(i, col + c)] = vecs[(a, c)];
                }
            }
            col += k;
        }
        Ok(Self { values, vectors, dims: h.dims().to_vec() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Columns are the eigenvectors, in the order of [`Self::values`].
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// e^{-i E_k t} for every eigenvalue.
    pub fn phases(&self, t: f64) -> Vec<Complex64> {
        self.values.iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect()
    }

    /// e^{-iHt} = Q diag(e^{-iEt}) Q†.
    pub fn unitary(&self, t: f64) -> Operator {
        let phases = self.phases(t);
        let ones = vec![ONE; self.vectors.nrows()];
        let scaled = linalg::scale_rows_cols(&ones, &self.vectors, &phases);
        let u = linalg::matmul(&scaled, &self.vectors.adjoint());
        Operator::from_parts(u, self.dims.clone())
    }

    /// Q† A Q
    pub(crate) fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        linalg::matmul(&self.vectors.adjoint(), &linalg::matmul(a, &self.vectors))
    }
}

/// Groups indices into connected components of the graph with an edge i~j
/// whenever `m[(i, j)]` or `m[(j, i)]` is non-zero. Components are ordered by
/// their smallest index and each lists its indices in ascending order.
fn connected_blocks(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..j {
            if m[(i, j)] != ZERO || m[(j, i)] != ZERO {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                    parent[hi] = lo;
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[label[r]].push(i);
    }
    blocks
}

/// e^{-iHt} for Hermitian `h`.
pub fn matexp_unitary(h: &Operator, t: f64) -> Result<Operator> {
    Ok(HermitianEigen::new(h)?.unitary(t))
}

/// Reduced operator on the subsystems listed in `keep` (any order; the
/// result keeps them in ascending order).
pub fn partial_trace_operator(op: &Operator, keep: &[usize]) -> Result<Operator> {
    let dims = op.dims();
    let n_sub = dims.len();
    if keep.is_empty() {
        return Err(Error::InvalidSubsystems("keep set is empty".into()));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    if kept.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSubsystems(format!("duplicate indices in {keep:?}")));
    }
    if let Some(&bad) = kept.iter().find(|&&k| k >= n_sub) {
        return Err(Error::InvalidSubsystems(format!(
            "index {bad} out of range for {n_sub} subsystems"
        )));
    }
    let traced: Vec<usize> = (0..n_sub).filter(|k| !kept.contains(k)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // strides of each subsystem in the full (row-major digit) index
    let mut strides = vec![1usize; n_sub];
    for k in (0..n_sub.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let offsets = |sel: &[usize], sel_dims: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for p in (0..sel.len()).rev() {
            off += (idx % sel_dims[p]) * strides[sel[p]];
            idx /= sel_dims[p];
        }
        off
    };
    let kept_off: Vec<usize> = (0..dk).map(|a| offsets(&kept, &kept_dims, a)).collect();
    let traced_off: Vec<usize> = (0..dt).map(|c| offsets(&traced, &traced_dims, c)).collect();

    let m = op.matrix();
    let mut out = CMatrix::zeros(dk, dk);
    for b in 0..dk {
        for a in 0..dk {
            let mut acc = ZERO;
            for &c in &traced_off {
                acc += m[(kept_off[a] + c, kept_off[b] + c)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(Operator::from_parts(out, kept_dims))
}

/// Reduced density matrix on the subsystems in `keep`.
pub fn partial_trace(rho: &State, keep: &[usize]) -> Result<State> {
    Ok(State::from_operator_unchecked(partial_trace_operator(rho.operator(), keep)?))
}

/// Tr(ops[0] · ops[1] · … · ρ), folded left to right.
pub fn trace_product(ops: &[&Operator], rho: &State) -> Result<Complex64> {
    let mut acc: Option<CMatrix> = None;
    for op in ops {
        if op.dims() != rho.dims() {
            return Err(Error::DimensionMismatch(format!(
                "operator dims {:?} differ from state dims {:?}",
                op.dims(),
                rho.dims()
            )));
        }
        acc = Some(match acc {
            None => op.matrix().clone(),
            Some(p) => linalg::matmul(&p, op.matrix()),
        });
    }
    Ok(match acc {
        None => rho.operator().trace(),
        Some(p) => linalg::trace_of_product(&p, rho.matrix()),
    })
}
