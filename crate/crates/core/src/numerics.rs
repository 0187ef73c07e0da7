//! Dense complex matrices and the handful of linear-algebra primitives the
//! simulator is built on.
//!
//! Every system handled here is small (Hilbert dimension at most 16, joint
//! superoperators at most 256x256), so everything is dense and row-major.
//! Decompositions are delegated to `nalgebra`; exponentials, Kronecker
//! products and partial traces are implemented directly.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;
use thiserror::Error;

/// Relative Hermiticity tolerance used when a routine requires Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not Hermitian (max |M - M^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("decomposition failed: {0}")]
    DecompositionFailed(&'static str),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

pub const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        Self::from_fn(n, m, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// `|ket><bra|` for two column vectors.
    pub fn outer(ket: &[C64], bra: &[C64]) -> Self {
        Self::from_fn(ket.len(), bra.len(), |i, j| ket[i] * bra[j].conj())
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Max-norm distance to another matrix of the same shape.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// max |M - M^dagger|.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Hermitian within `tol` relative to the largest entry.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// (M + M^dagger)/2.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// One-norm (max column sum), used to pick the scaling in `expm_general`.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in row.iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Column-stacking vectorisation: `vec(M)[i + j*rows] = M[i][j]`.
    pub fn vectorize(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self[(i, j)]);
            }
        }
        v
    }

    /// Inverse of [`ComplexMatrix::vectorize`] for a `dim`x`dim` matrix.
    pub fn unvectorize(v: &[C64], dim: usize) -> Result<Self> {
        if v.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch(format!(
                "vector of length {} cannot be reshaped to {dim}x{dim}",
                v.len()
            )));
        }
        Ok(Self::from_fn(dim, dim, |i, j| v[i + j * dim]))
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(NumericsError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    fn require_hermitian(&self) -> Result<()> {
        self.require_square()?;
        if self.is_hermitian(HERMITIAN_TOL) {
            Ok(())
        } else {
            Err(NumericsError::NotHermitian {
                deviation: self.hermiticity_deviation(),
            })
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    ComplexMatrix::from_fn(a.rows * br, a.cols * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors
/// as the columns of the returned matrix.
pub fn hermitian_eigen(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    h.require_hermitian()?;
    let eig = h.hermitian_part().to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = h.rows;
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>> {
    hermitian_eigen(h).map(|(v, _)| v)
}

/// `exp(-i h t)` for Hermitian `h`, through its eigen-decomposition.
pub fn expm_hermitian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(h)?;
    let phases: Vec<C64> = values.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
    let n = h.rows;
    let scaled = ComplexMatrix::from_fn(n, n, |i, j| vectors[(i, j)] * phases[j]);
    Ok(&scaled * &vectors.adjoint())
}

const TAYLOR_TERMS: usize = 18;
const TAYLOR_RADIUS: f64 = 0.25;

/// `exp(l)` for a general square matrix by scaling and squaring around a
/// truncated Taylor series.
///
/// The argument is scaled by `2^-s` until its one-norm is below 1/4, where 18
/// Taylor terms leave a truncation error far below double precision, and the
/// result is squared `s` times.
pub fn expm_general(l: &ComplexMatrix) -> Result<ComplexMatrix> {
    l.require_square()?;
    let n = l.rows;
    let norm = l.norm_one();
    if !norm.is_finite() {
        return Err(NumericsError::DecompositionFailed("non-finite matrix entries"));
    }
    let mut squarings = 0u32;
    while norm / 2f64.powi(squarings as i32) > TAYLOR_RADIUS {
        squarings += 1;
    }
    let a = l.scale_real(2f64.powi(-(squarings as i32)));

    // Horner form: I + A(I + A/2(I + A/3(...)))
    let id = ComplexMatrix::identity(n);
    let mut acc = id.clone();
    for k in (1..=TAYLOR_TERMS).rev() {
        acc = &id + &(&a * &acc).scale_real(1.0 / k as f64);
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    Ok(acc)
}

/// Eigenvalues of a general square matrix (complex Schur form).
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    m.require_square()?;
    let schur = nalgebra::linalg::Schur::try_new(m.to_nalgebra(), 1e-15, 10_000)
        .ok_or(NumericsError::DecompositionFailed("Schur iteration did not converge"))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Right singular vector of the smallest singular value, and that value.
/// For a matrix `A - λI` this is the eigenvector belonging to `λ`.
pub fn null_vector(m: &ComplexMatrix) -> Result<(Vec<C64>, f64)> {
    m.require_square()?;
    let svd = m.to_nalgebra().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or(NumericsError::DecompositionFailed("SVD did not return V"))?;
    let (k, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bk, bv), (k, &s)| if s < bv { (k, s) } else { (bk, bv) });
    let v = (0..m.cols).map(|j| v_t[(k, j)].conj()).collect();
    Ok((v, smin))
}

/// Solves `a x = b` for square `a` (LU with partial pivoting).
pub fn solve(a: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    a.require_square()?;
    if b.len() != a.rows {
        return Err(NumericsError::DimensionMismatch(format!(
            "right-hand side of length {} for a {}x{} system",
            b.len(),
            a.rows,
            a.cols
        )));
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    a.to_nalgebra()
        .lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or(NumericsError::DecompositionFailed("singular linear system"))
}

/// Reduced matrix over the subsystems listed in `keep`.
///
/// `dims` lists the subsystem dimensions in tensor order (first factor is the
/// most significant index). The kept subsystems stay in their original order.
pub fn partial_trace(rho: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    rho.require_square()?;
    let total: usize = dims.iter().product();
    if total != rho.rows {
        return Err(NumericsError::DimensionMismatch(format!(
            "subsystem dims {dims:?} multiply to {total}, matrix is {}x{}",
            rho.rows, rho.cols
        )));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(NumericsError::DimensionMismatch(format!(
            "invalid kept subsystem set {keep:?} for {} subsystems",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let env_dim: usize = traced_dims.iter().product();

    // strides of each subsystem in the full index
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offset = |sites: &[usize], sdims: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for (pos, &site) in sites.iter().enumerate().rev() {
            off += (idx % sdims[pos]) * strides[site];
            idx /= sdims[pos];
        }
        off
    };

    let kept_offsets: Vec<usize> = (0..out_dim).map(|a| offset(&keep_sorted, &kept_dims, a)).collect();
    let env_offsets: Vec<usize> = (0..env_dim).map(|e| offset(&traced, &traced_dims, e)).collect();

    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for a in 0..out_dim {
        for b in 0..out_dim {
            let mut acc = C64::new(0.0, 0.0);
            for &e in &env_offsets {
                acc += rho[(kept_offsets[a] + e, kept_offsets[b] + e)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, m, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let a = random_matrix(rng, n, n);
        let p = &a * &a.adjoint();
        let tr = p.trace();
        p.scale(tr.inv())
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)])
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let zz = kron(&pauli_z(), &pauli_z());
        let expected = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(zz, expected);
        let big = kron(&ComplexMatrix::zeros(2, 2), &ComplexMatrix::zeros(4, 4));
        assert_eq!((big.rows(), big.cols()), (8, 8));
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 2, 2);
            let b = random_matrix(&mut rng, 3, 3);
            let cm = random_matrix(&mut rng, 2, 2);
            let d = random_matrix(&mut rng, 3, 3);
            let lhs = &kron(&a, &b) * &kron(&cm, &d);
            let rhs = kron(&(&a * &cm), &(&b * &d));
            assert!(lhs.max_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn expm_hermitian_zero_and_period() {
        let u = expm_hermitian(&ComplexMatrix::zeros(3, 3), 1.7).unwrap();
        assert!(u.max_diff(&ComplexMatrix::identity(3)) < 1e-15);

        let omega = 2.0 * std::f64::consts::PI * 1.3e3;
        let h = pauli_z().scale_real(omega / 2.0);
        let t = 2.0 * std::f64::consts::PI / omega;
        let u = expm_hermitian(&h, t).unwrap();
        // a full 2π rotation of a spin-1/2 is -I
        assert!(u.max_diff(&ComplexMatrix::identity(2).scale_real(-1.0)) < 1e-12);
        assert!((&u * &u.adjoint()).max_diff(&ComplexMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn expm_hermitian_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(expm_hermitian(&m, 1.0), Err(NumericsError::NotHermitian { .. })));
        let r = ComplexMatrix::zeros(2, 3);
        assert!(matches!(expm_hermitian(&r, 1.0), Err(NumericsError::NotSquare { .. })));
    }

    #[test]
    fn expm_hermitian_matches_series_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 8, 8);
            let h = (&a + &a.adjoint()).scale_real(2.0);
            let t = 0.37;
            let u = expm_hermitian(&h, t).unwrap();
            let series = expm_general(&h.scale(c(0.0, -t))).unwrap();
            assert!(u.max_diff(&series) < 1e-10, "{}", u.max_diff(&series));
            assert!((&u.adjoint() * &u).max_diff(&ComplexMatrix::identity(8)) < 1e-11);
        }
    }

    #[test]
    fn expm_general_basic_cases() {
        let z = expm_general(&ComplexMatrix::zeros(4, 4)).unwrap();
        assert_eq!(z, ComplexMatrix::identity(4));
        let d = [c(0.3, 1.0), c(-2.0, 0.5), c(4.0, -3.0)];
        let e = expm_general(&ComplexMatrix::diagonal(&d)).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).norm() <= 1e-10 * v.exp().norm());
        }
        assert!(matches!(
            expm_general(&ComplexMatrix::zeros(2, 3)),
            Err(NumericsError::NotSquare { .. })
        ));
    }

    #[test]
    fn expm_general_commutator_superoperator_matches_conjugation() {
        // exp(-i[H,.] t) acting on vec(rho) equals U rho U^dagger
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 4, 4);
        let h = (&a + &a.adjoint()).scale_real(3.0);
        let t = 0.8;
        let id = ComplexMatrix::identity(4);
        let generator = (&kron(&id, &h) - &kron(&h.transpose(), &id)).scale(c(0.0, -t));
        let prop = expm_general(&generator).unwrap();
        let u = expm_hermitian(&h, t).unwrap();
        let expected = &kron(&u.conj(), &u);
        assert!(prop.max_diff(expected) < 1e-10, "{}", prop.max_diff(expected));
    }

    #[test]
    fn partial_trace_product_and_bell() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let re = random_density(&mut rng, 2);
        let rn = random_density(&mut rng, 4);
        let joint = kron(&re, &rn);
        let reduced = partial_trace(&joint, &[2, 4], &[1]).unwrap();
        assert!(reduced.max_diff(&rn) < 1e-14);
        let reduced_e = partial_trace(&joint, &[2, 4], &[0]).unwrap();
        assert!(reduced_e.max_diff(&re) < 1e-14);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        let rho = ComplexMatrix::outer(&bell, &bell);
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        for keep in [0usize, 1] {
            let r = partial_trace(&rho, &[2, 2], &[keep]).unwrap();
            assert!(r.max_diff(&half) < 1e-15);
        }
    }

    #[test]
    fn partial_trace_matches_index_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let rho = random_density(&mut rng, 8);
            // trace out the middle qubit of three by explicit summation
            let mut naive = ComplexMatrix::zeros(4, 4);
            for a in 0..2 {
                for c_ in 0..2 {
                    for a2 in 0..2 {
                        for c2 in 0..2 {
                            let mut acc = C64::new(0.0, 0.0);
                            for b in 0..2 {
                                acc += rho[(a * 4 + b * 2 + c_, a2 * 4 + b * 2 + c2)];
                            }
                            naive[(a * 2 + c_, a2 * 2 + c2)] = acc;
                        }
                    }
                }
            }
            let r = partial_trace(&rho, &[2, 2, 2], &[0, 2]).unwrap();
            assert!(r.max_diff(&naive) < 1e-14);
            assert!((r.trace() - rho.trace()).norm() < 1e-13);
        }
    }

    #[test]
    fn partial_trace_dimension_errors() {
        let rho = ComplexMatrix::identity(4);
        assert!(partial_trace(&rho, &[2, 3], &[0]).is_err());
        assert!(partial_trace(&rho, &[2, 2], &[2]).is_err());
        assert!(partial_trace(&rho, &[2, 2], &[0, 0]).is_err());
    }

    #[test]
    fn eigenvalues_and_null_vector() {
        let m = ComplexMatrix::from_real_rows(&[&[2.0, 1.0], &[0.0, 3.0]]);
        let mut ev: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 2.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        let shifted = &m - &ComplexMatrix::identity(2).scale_real(3.0);
        let (v, smin) = null_vector(&shifted).unwrap();
        assert!(smin < 1e-12);
        let mv = m.mul_vec(&v);
        for (a, b) in mv.iter().zip(&v) {
            assert!((a - b * 3.0).norm() < 1e-12);
        }
    }

    #[test]
    fn vectorize_roundtrip_column_stacking() {
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let v = m.vectorize();
        assert_eq!(v, vec![c(1.0, 0.0), c(3.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert_eq!(ComplexMatrix::unvectorize(&v, 2).unwrap(), m);
    }

    proptest::proptest! {
        #[test]
        fn partial_trace_preserves_trace(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, 8);
            for keep in [&[0usize][..], &[1], &[2], &[0, 1], &[1, 2]] {
                let r = partial_trace(&rho, &[2, 2, 2], keep).unwrap();
                proptest::prop_assert!((r.trace() - rho.trace()).norm() < 1e-13);
            }
        }

        #[test]
        fn expm_hermitian_is_unitary(seed in 0u64..10_000, t in 0.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 6, 6);
            let h = &a + &a.adjoint();
            let u = expm_hermitian(&h, t).unwrap();
            proptest::prop_assert!((&u.adjoint() * &u).max_diff(&ComplexMatrix::identity(6)) < 1e-11);
        }
    }
}
