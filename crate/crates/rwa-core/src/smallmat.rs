//! Dense complex linear algebra for small systems (2 ≤ n ≤ 16).
//!
//! Matrices are row-major `Vec<C64>` values. The hot path of the propagator
//! is the 2×2 skew-Hermitian exponential, which is evaluated in closed form;
//! larger systems go through a cyclic Jacobi eigensolver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::math;

pub type C64 = Complex<f64>;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 16;

/// Tolerance for skew-Hermitian / Hermitian preconditions, relative to the
/// largest entry magnitude (absolute for matrices with entries below 1).
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Unit-norm tolerance for [`QuantumState`].
pub const NORM_TOL: f64 = 1e-9;
/// Off-diagonal convergence threshold of the Jacobi sweeps, relative to ‖H‖_F.
pub const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub(crate) fn cabs(z: C64) -> f64 {
    math::hypot(z.re, z.im)
}

#[inline]
pub(crate) fn cis(theta: f64) -> C64 {
    let (s, co) = math::sin_cos(theta);
    C64::new(co, s)
}

fn check_dim(n: usize) -> Result<()> {
    if !(MIN_DIM..=MAX_DIM).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "dimension {n} outside supported range {MIN_DIM}..={MAX_DIM}"
        )));
    }
    Ok(())
}

/// Square complex matrix of dimension `n`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries, checking the dimension range,
    /// the entry count and finiteness.
    pub fn from_row_major(n: usize, data: Vec<C64>) -> Result<Self> {
        check_dim(n)?;
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("matrix entry is not finite".into()));
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    /// `[[a, b], [c, d]]`
    pub fn new2(a: C64, b: C64, cc: C64, d: C64) -> Self {
        Self {
            n: 2,
            data: vec![a, b, cc, d],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self.data[i * self.n + j]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[C64]) {
        for (i, z) in col.iter().enumerate() {
            self.data[i * self.n + j] = *z;
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self.data[i * self.n + i]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().iter().sum()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.data[i * n..(i + 1) * n];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `out ← self · out`, using `scratch` as temporary storage.
    pub(crate) fn apply_in_place(&self, v: &mut [C64], scratch: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            scratch[i] = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        v.copy_from_slice(&scratch[..n]);
    }

    /// `out = a · b`
    pub(crate) fn mul_into(a: &Self, b: &Self, out: &mut Self) {
        let n = a.n;
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += a.data[i * n + k] * b.data[k * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| cabs(*z)).fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        math::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    /// Operator 2-norm: largest singular value, from the Jacobi eigenvalues
    /// of `M*M`.
    pub fn norm_op(&self) -> f64 {
        let gram = &self.adjoint() * self;
        let mut h = gram;
        // M*M is Hermitian up to rounding; symmetrize before decomposing.
        h.hermitize();
        let (vals, _) = jacobi_eigen(&h);
        let top = vals.into_iter().fold(0.0f64, f64::max);
        math::sqrt(top.max(0.0))
    }

    fn structure_scale(&self) -> f64 {
        self.max_abs().max(1.0)
    }

    /// max |G + G*| relative to max(1, max|G|).
    pub fn skew_hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = self.data[i * n + j] + self.data[j * n + i].conj();
                worst = worst.max(cabs(d));
            }
        }
        worst / self.structure_scale()
    }

    /// max |H − H*| relative to max(1, max|H|).
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = self.data[i * n + j] - self.data[j * n + i].conj();
                worst = worst.max(cabs(d));
            }
        }
        worst / self.structure_scale()
    }

    pub fn is_skew_hermitian(&self, tol: f64) -> bool {
        self.skew_hermitian_defect() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// max |U*U − Id| entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let g = &self.adjoint() * self;
        (&g - &Self::identity(self.n)).max_abs()
    }

    /// Replaces the matrix by its Hermitian part `(H + H*)/2`.
    pub(crate) fn hermitize(&mut self) {
        let n = self.n;
        for i in 0..n {
            let d = self.data[i * n + i].re;
            self.data[i * n + i] = C64::new(d, 0.0);
            for j in (i + 1)..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    /// Orthonormalizes the columns in place (modified Gram–Schmidt).
    pub fn orthonormalize_columns(&mut self) {
        let n = self.n;
        for j in 0..n {
            for k in 0..j {
                let mut dot = C64::new(0.0, 0.0);
                for i in 0..n {
                    dot += self.data[i * n + k].conj() * self.data[i * n + j];
                }
                for i in 0..n {
                    let sub = self.data[i * n + k] * dot;
                    self.data[i * n + j] -= sub;
                }
            }
            let norm = math::sqrt((0..n).map(|i| self.data[i * n + j].norm_sqr()).sum());
            if norm > 0.0 {
                for i in 0..n {
                    self.data[i * n + j] /= norm;
                }
            }
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, rhs.n, "matrix product dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.n);
        ComplexMatrix::mul_into(self, rhs, &mut out);
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, rhs.n, "matrix sum dimension mismatch");
        ComplexMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, rhs.n, "matrix difference dimension mismatch");
        ComplexMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Unit vector in `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    amps: Vec<C64>,
}

impl QuantumState {
    /// Accepts amplitudes whose norm is 1 within [`NORM_TOL`].
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("state amplitude is not finite".into()));
        }
        let norm = norm_vec(&amps);
        if math::abs(norm - 1.0) > NORM_TOL {
            return Err(Error::Contract(format!(
                "state norm {norm} differs from 1 by more than {NORM_TOL:e}"
            )));
        }
        Ok(Self { amps })
    }

    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm = norm_vec(&amps);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Contract("cannot normalize a zero or non-finite vector".into()));
        }
        Self::new(amps.into_iter().map(|z| z / norm).collect())
    }

    /// Canonical basis vector `e_{k+1}` (zero-based `k`).
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        check_dim(n)?;
        if k >= n {
            return Err(Error::InvalidArgument(format!(
                "basis index {k} out of range for n = {n}"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); n];
        amps[k] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    /// Wraps propagated amplitudes without re-checking the norm.
    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_vec(&self.amps)
    }

    /// `⟨self, other⟩ = Σ conj(self_i)·other_i`
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(inner_vec(&self.amps, &other.amps))
    }

    /// Euclidean distance without phase optimization.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(math::sqrt(
            self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum(),
        ))
    }

    pub fn apply(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        Ok(Self {
            amps: u.mul_vec(&self.amps),
        })
    }
}

pub(crate) fn norm_vec(v: &[C64]) -> f64 {
    math::sqrt(v.iter().map(|z| z.norm_sqr()).sum())
}

pub(crate) fn inner_vec(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending; column `j` of
/// `eigenvectors` pairs with `eigenvalues[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    /// `‖H − VΛV*‖_max`
    pub fn reconstruction_error(&self, h: &ComplexMatrix) -> f64 {
        let lam: Vec<C64> = self.eigenvalues.iter().map(|&l| C64::new(l, 0.0)).collect();
        let v = &self.eigenvectors;
        let rec = &(v * &ComplexMatrix::from_diagonal(&lam)) * &v.adjoint();
        (h - &rec).max_abs()
    }
}

/// Cyclic complex Jacobi on a Hermitian matrix. Returns unsorted eigenvalues
/// and the accumulated unitary.
fn jacobi_eigen(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.n;
    let mut a = h.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.norm_fro();
    let target = JACOBI_TOL * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += a.data[i * n + j].norm_sqr();
                    }
                }
            }
            math::sqrt(s)
        };
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.data[p * n + q];
                let mag = cabs(apq);
                if mag == 0.0 || mag < 1e-300 {
                    continue;
                }
                let app = a.data[p * n + p].re;
                let aqq = a.data[q * n + q].re;
                // Phase D = diag(1, e^{-iφ}) makes the pq block real; then a
                // real Jacobi rotation R = [[c, s], [-s, c]] zeroes it. The
                // combined 2×2 unitary is W = D·R.
                let ph = apq / mag; // e^{iφ}
                let theta = (aqq - app) / (2.0 * mag);
                let t = {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (math::abs(theta) + math::sqrt(theta * theta + 1.0))
                };
                let cth = 1.0 / math::sqrt(t * t + 1.0);
                let sth = t * cth;
                let w_pp = C64::new(cth, 0.0);
                let w_pq = C64::new(sth, 0.0);
                let w_qp = -ph.conj() * sth;
                let w_qq = ph.conj() * cth;

                // A ← A W (columns p, q)
                for k in 0..n {
                    let akp = a.data[k * n + p];
                    let akq = a.data[k * n + q];
                    a.data[k * n + p] = akp * w_pp + akq * w_qp;
                    a.data[k * n + q] = akp * w_pq + akq * w_qq;
                }
                // A ← W* A (rows p, q)
                for k in 0..n {
                    let apk = a.data[p * n + k];
                    let aqk = a.data[q * n + k];
                    a.data[p * n + k] = w_pp.conj() * apk + w_qp.conj() * aqk;
                    a.data[q * n + k] = w_pq.conj() * apk + w_qq.conj() * aqk;
                }
                a.data[p * n + q] = C64::new(0.0, 0.0);
                a.data[q * n + p] = C64::new(0.0, 0.0);
                a.data[p * n + p] = C64::new(a.data[p * n + p].re, 0.0);
                a.data[q * n + q] = C64::new(a.data[q * n + q].re, 0.0);

                for k in 0..n {
                    let vkp = v.data[k * n + p];
                    let vkq = v.data[k * n + q];
                    v.data[k * n + p] = vkp * w_pp + vkq * w_qp;
                    v.data[k * n + q] = vkp * w_pq + vkq * w_qq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a.data[i * n + i].re).collect();
    (vals, v)
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Eigenvector phases are arbitrary; eigenvectors of a degenerate cluster
/// are any orthonormal basis of the eigenspace.
pub fn eig_hermitian(h: &ComplexMatrix) -> Result<SpectralDecomposition> {
    check_dim(h.n)?;
    let defect = h.hermitian_defect();
    if defect > STRUCTURE_TOL {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian (relative defect {defect:e})"
        )));
    }
    let mut hh = h.clone();
    hh.hermitize();
    Ok(eig_hermitian_unchecked(&hh))
}

pub(crate) fn eig_hermitian_unchecked(h: &ComplexMatrix) -> SpectralDecomposition {
    let n = h.n;
    let (vals, vecs) = jacobi_eigen(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(core::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&i| vals[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, |r, col| vecs.data[r * n + order[col]]);
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// `exp(dt·G)` for skew-Hermitian `G`.
pub fn expm_skew(g: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    check_dim(g.n)?;
    if !dt.is_finite() {
        return Err(Error::InvalidArgument("time step is not finite".into()));
    }
    let defect = g.skew_hermitian_defect();
    if defect > STRUCTURE_TOL {
        return Err(Error::Contract(format!(
            "generator is not skew-Hermitian (relative defect {defect:e})"
        )));
    }
    let mut out = ComplexMatrix::zeros(g.n);
    expm_skew_into(g, dt, &mut out);
    Ok(out)
}

/// Unchecked exponential of the skew-Hermitian part of `g`, written to `out`.
pub(crate) fn expm_skew_into(g: &ComplexMatrix, dt: f64, out: &mut ComplexMatrix) {
    if g.n == 2 {
        expm_skew2(g.as_slice(), dt, out.as_mut_slice());
        return;
    }
    let n = g.n;
    // H = iG (Hermitian part), exp(dt G) = V diag(e^{-i dt λ}) V*.
    let mut h = g.scale(C64::new(0.0, 1.0));
    h.hermitize();
    let dec = eig_hermitian_unchecked(&h);
    let v = &dec.eigenvectors;
    let phases: Vec<C64> = dec.eigenvalues.iter().map(|&l| cis(-dt * l)).collect();
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += v.data[i * n + k] * phases[k] * v.data[j * n + k].conj();
            }
            out.data[i * n + j] = acc;
        }
    }
}

/// Closed-form `exp(dt·G)` for 2×2 `G = −i(a·Id + b·σ)`.
#[inline]
pub(crate) fn expm_skew2(g: &[C64], dt: f64, out: &mut [C64]) {
    // H = iG; use its Hermitian part.
    let h11 = -g[0].im;
    let h22 = -g[3].im;
    // H12 = i·G12, averaged with conj(H21) = conj(i·G21)
    let h12 = C64::new(-g[1].im, g[1].re);
    let h21c = C64::new(-g[2].im, g[2].re).conj();
    let off = (h12 + h21c) * 0.5;
    let a = 0.5 * (h11 + h22);
    let bz = 0.5 * (h11 - h22);
    // off = bx − i·by
    let bx = off.re;
    let by = -off.im;
    let bnorm = math::sqrt(bx * bx + by * by + bz * bz);
    let theta = dt * bnorm;
    let (s, co) = math::sin_cos(theta);
    // −i sinθ (b̂·σ); sinθ/|b| handled for |b| → 0
    let sb = if bnorm > 0.0 { s / bnorm } else { dt };
    let glob = cis(-dt * a);
    let m11 = C64::new(co, -sb * bz);
    let m22 = C64::new(co, sb * bz);
    // b̂·σ off-diagonals: (1,2) = bx − i by, (2,1) = bx + i by
    let m12 = C64::new(0.0, -sb) * C64::new(bx, -by);
    let m21 = C64::new(0.0, -sb) * C64::new(bx, by);
    out[0] = glob * m11;
    out[1] = glob * m12;
    out[2] = glob * m21;
    out[3] = glob * m22;
}

/// `min_θ ‖x − e^{iθ} y‖ = √(2 − 2|⟨x,y⟩|)` for unit vectors.
///
/// Evaluated as `‖x − p·y‖` with the optimal unimodular `p`, which avoids
/// the cancellation in `2 − 2|⟨x,y⟩|` near zero.
pub fn dist_up_to_phase(x: &QuantumState, y: &QuantumState) -> Result<f64> {
    let z = y.inner(x)?;
    let mag = cabs(z);
    let p = if mag > 0.0 { z / mag } else { C64::new(1.0, 0.0) };
    let d = math::sqrt(x.amps.iter().zip(&y.amps).map(|(a, b)| (a - p * b).norm_sqr()).sum());
    Ok(d.min(core::f64::consts::SQRT_2))
}

/// `|⟨x, y⟩|²`
pub fn fidelity(x: &QuantumState, y: &QuantumState) -> Result<f64> {
    Ok(x.inner(y)?.norm_sqr().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::new2(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.))
    }

    pub(crate) fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        m.hermitize();
        m
    }

    #[test]
    fn expm_zero_is_identity() {
        for n in [2, 3, 5] {
            let u = expm_skew(&ComplexMatrix::zeros(n), 0.7).unwrap();
            assert!((&u - &ComplexMatrix::identity(n)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn expm_pauli_rotation_flips_e1() {
        let g = sigma_x().scale(c(0.0, -FRAC_PI_2));
        let u = expm_skew(&g, 1.0).unwrap();
        let out = u.mul_vec(&[c(1., 0.), c(0., 0.)]);
        assert!(cabs(out[0]) < 1e-15);
        assert!(cabs(out[1] - c(0., -1.)) < 1e-15);
    }

    #[test]
    fn expm_rejects_non_skew_input() {
        let g = ComplexMatrix::new2(c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.));
        assert!(matches!(expm_skew(&g, 1.0), Err(Error::Contract(_))));
        assert!(matches!(
            expm_skew(&ComplexMatrix::zeros(2), f64::NAN),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn expm_2x2_closed_form_matches_general_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let h = random_hermitian(&mut rng, 2);
            let g = h.scale(c(0., -1.));
            let dt = rng.gen_range(-2.0..2.0);
            let mut closed = ComplexMatrix::zeros(2);
            expm_skew2(g.as_slice(), dt, closed.as_mut_slice());
            let dec = eig_hermitian(&h).unwrap();
            let lam: Vec<C64> = dec.eigenvalues.iter().map(|&l| cis(-dt * l)).collect();
            let v = &dec.eigenvectors;
            let general = &(v * &ComplexMatrix::from_diagonal(&lam)) * &v.adjoint();
            assert!((&closed - &general).max_abs() < 1e-13);
        }
    }

    #[test]
    fn eig_diagonal_case() {
        let h = ComplexMatrix::new2(c(0.5, 0.), c(0., 0.), c(0., 0.), c(-0.5, 0.));
        let d = eig_hermitian(&h).unwrap();
        assert_eq!(d.eigenvalues, vec![-0.5, 0.5]);
        // eigenvectors (e2, e1) up to phase
        assert!((cabs(d.eigenvectors[(1, 0)]) - 1.0).abs() < 1e-15);
        assert!((cabs(d.eigenvectors[(0, 1)]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_sigma_x() {
        let d = eig_hermitian(&sigma_x()).unwrap();
        assert!((d.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((d.eigenvalues[1] - 1.0).abs() < 1e-15);
        let v0 = d.eigenvectors.column(0);
        let v1 = d.eigenvectors.column(1);
        let minus = [c(FRAC_1_SQRT_2, 0.), c(-FRAC_1_SQRT_2, 0.)];
        let plus = [c(FRAC_1_SQRT_2, 0.), c(FRAC_1_SQRT_2, 0.)];
        assert!((cabs(inner_vec(&minus, &v0)) - 1.0).abs() < 1e-14);
        assert!((cabs(inner_vec(&plus, &v1)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let h = ComplexMatrix::new2(c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.));
        assert!(matches!(eig_hermitian(&h), Err(Error::Contract(_))));
    }

    #[test]
    fn eig_handles_degenerate_spectrum() {
        let h = ComplexMatrix::identity(4).scale_real(3.0);
        let d = eig_hermitian(&h).unwrap();
        assert!(d.eigenvalues.iter().all(|&l| (l - 3.0).abs() < 1e-15));
        assert!(d.eigenvectors.unitarity_defect() < 1e-15);
    }

    #[test]
    fn eig_random_reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 3, 4, 8, 16] {
            for _ in 0..20 {
                let h = random_hermitian(&mut rng, n);
                let d = eig_hermitian(&h).unwrap();
                assert!(d.eigenvectors.unitarity_defect() < 1e-10);
                assert!(d.reconstruction_error(&h) <= 1e-10 * h.norm_fro());
                assert!(d.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn dist_examples() {
        let e1 = QuantumState::basis(2, 0).unwrap();
        let e2 = QuantumState::basis(2, 1).unwrap();
        let phased = QuantumState::new(vec![cis(1.3), c(0., 0.)]).unwrap();
        assert!(dist_up_to_phase(&e1, &phased).unwrap() < 1e-15);
        assert!((dist_up_to_phase(&e1, &e2).unwrap() - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn dist_and_fidelity_dimension_mismatch() {
        let a = QuantumState::basis(2, 0).unwrap();
        let b = QuantumState::basis(3, 0).unwrap();
        assert!(matches!(dist_up_to_phase(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(fidelity(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fidelity_examples() {
        let e1 = QuantumState::basis(2, 0).unwrap();
        let e2 = QuantumState::basis(2, 1).unwrap();
        let plus = QuantumState::new(vec![c(FRAC_1_SQRT_2, 0.), c(FRAC_1_SQRT_2, 0.)]).unwrap();
        assert!((fidelity(&plus, &plus).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&e1, &e2).unwrap(), 0.0);
        assert!((fidelity(&e1, &plus).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn state_construction_checks() {
        assert!(QuantumState::new(vec![c(1.0, 0.), c(0.1, 0.)]).is_err());
        assert!(QuantumState::new(vec![c(1.0, 0.)]).is_err());
        assert!(QuantumState::new(vec![c(f64::NAN, 0.), c(0., 0.)]).is_err());
        assert!(QuantumState::normalized(vec![c(3.0, 0.), c(4.0, 0.)]).is_ok());
        assert!(ComplexMatrix::from_row_major(2, vec![c(0., 0.); 3]).is_err());
        assert!(ComplexMatrix::from_row_major(17, vec![c(0., 0.); 289]).is_err());
        assert!(ComplexMatrix::from_row_major(2, vec![c(f64::INFINITY, 0.), c(0., 0.), c(0., 0.), c(0., 0.)]).is_err());
    }

    #[test]
    fn operator_norm_of_known_matrices() {
        let d = ComplexMatrix::from_diagonal(&[c(3., 0.), c(0., -4.), c(1., 1.)]);
        assert!((d.norm_op() - 4.0).abs() < 1e-12);
        // rank-one e1 e2^T has norm 1
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 1)] = c(0., 2.);
        assert!((m.norm_op() - 2.0).abs() < 1e-12);
    }
}
