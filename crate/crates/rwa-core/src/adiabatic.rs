//! Smooth spectral paths of slow generators and the adiabatic reference flow.
//!
//! For a slow generator `A(τ)` with a spectral gap, the eigenpairs of `iA(τ)`
//! are tracked on a uniform grid with continuity-fixed phases. From them the
//! reference flow
//!
//! `Υ_ε(τ) = P(τ)·exp(−(i/ε)∫₀^τ Λ)·exp(∫₀^τ D)·P*(0)`
//!
//! is assembled, with `D` the diagonal part of `(dP*/dτ)·P`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::schrodinger::Generator;
use crate::smallmat::{c, cis, eig_hermitian_unchecked, ComplexMatrix, C64};

pub const DEFAULT_M: usize = 4096;
pub const MIN_M: usize = 64;
const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Eigenpairs of `iA(τ)` on `M + 1` uniform samples of `[0, 1]`.
#[derive(Clone, Debug)]
pub struct SpectralPath {
    grid: Vec<f64>,
    lambda: Vec<Vec<f64>>,
    p: Vec<ComplexMatrix>,
    gap_min: f64,
    gap_argmin: f64,
    a_max: f64,
}

impl SpectralPath {
    pub fn dim(&self) -> usize {
        self.p[0].dim()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[Vec<f64>] {
        &self.lambda
    }

    pub fn eigenvectors(&self) -> &[ComplexMatrix] {
        &self.p
    }

    /// Smallest pairwise eigenvalue separation over the grid.
    pub fn gap_min(&self) -> f64 {
        self.gap_min
    }

    pub fn gap_argmin(&self) -> f64 {
        self.gap_argmin
    }

    /// Largest sampled `max_abs(A(τ))`.
    pub fn generator_max(&self) -> f64 {
        self.a_max
    }

    fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// Largest eigenvalue spread `max_τ (λ_max − λ_min)`.
    pub fn spread_max(&self) -> f64 {
        self.lambda.iter().map(|l| l[l.len() - 1] - l[0]).fold(0.0, f64::max)
    }
}

fn min_separation(sorted: &[f64]) -> f64 {
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Samples `iA` on `m + 1` points and fixes eigenvector phases by discrete
/// parallel transport.
///
/// Fails with [`Error::GapViolation`] when the gap drops to `gap_floor` or
/// below, and with [`Error::Contract`] when a column jumps branch between
/// neighbouring samples.
pub fn spectral_path<G: Generator + ?Sized>(a: &G, m: usize, gap_floor: f64) -> Result<SpectralPath> {
    if m < MIN_M {
        return Err(Error::InvalidArgument(format!("M = {m} below minimum {MIN_M}")));
    }
    if !(gap_floor >= 0.0) {
        return Err(Error::InvalidArgument(format!("gap floor {gap_floor} must be >= 0")));
    }
    let n = a.dim();
    let mut grid = Vec::with_capacity(m + 1);
    let mut lambda = Vec::with_capacity(m + 1);
    let mut p: Vec<ComplexMatrix> = Vec::with_capacity(m + 1);
    let mut gap_min = f64::INFINITY;
    let mut gap_argmin = 0.0;
    let mut a_max: f64 = 0.0;
    let mut sample = ComplexMatrix::zeros(n);

    for i in 0..=m {
        let tau = i as f64 / m as f64;
        a.sample_into(tau, &mut sample);
        a_max = a_max.max(sample.max_abs());
        let mut h = sample.scale(c(0.0, 1.0));
        if h.hermitian_defect() > 1e-12 {
            return Err(Error::Contract(format!("iA is not Hermitian at tau = {tau}")));
        }
        h.hermitize();
        let dec = eig_hermitian_unchecked(&h);
        let rec = dec.reconstruction_error(&h);
        if rec > RECONSTRUCTION_TOL * h.max_abs().max(1.0) {
            return Err(Error::Contract(format!(
                "eigendecomposition residual {rec:e} at tau = {tau}"
            )));
        }
        let gap = min_separation(&dec.eigenvalues);
        if gap < gap_min {
            gap_min = gap;
            gap_argmin = tau;
        }
        if gap <= gap_floor {
            return Err(Error::GapViolation {
                tau,
                gap,
                floor: gap_floor,
            });
        }

        let mut vecs = dec.eigenvectors;
        if let Some(prev) = p.last() {
            align_columns(prev, &mut vecs, tau)?;
        }
        grid.push(tau);
        lambda.push(dec.eigenvalues);
        p.push(vecs);
    }

    Ok(SpectralPath {
        grid,
        lambda,
        p,
        gap_min,
        gap_argmin,
        a_max,
    })
}

/// Rotates each column of `next` so its overlap with the matching column of
/// `prev` is real positive. Matching is by largest overlap modulus and must
/// be the identity (ascending order is stable without crossings).
fn align_columns(prev: &ComplexMatrix, next: &mut ComplexMatrix, tau: f64) -> Result<()> {
    let n = prev.dim();
    for j in 0..n {
        let mut best = 0;
        let mut best_mag = -1.0;
        let mut best_ov = c(0.0, 0.0);
        for k in 0..n {
            let ov: C64 = (0..n).map(|r| prev[(r, j)].conj() * next[(r, k)]).sum();
            let mag = ov.norm();
            if mag > best_mag {
                best = k;
                best_mag = mag;
                best_ov = ov;
            }
        }
        if best != j {
            return Err(Error::Contract(format!(
                "eigenvector branch jump at tau = {tau} (column {j} matched {best}); refine the grid"
            )));
        }
        let rot = if best_mag > 0.0 {
            best_ov.conj() / best_mag
        } else {
            c(1.0, 0.0)
        };
        for r in 0..n {
            next[(r, j)] *= rot;
        }
    }
    Ok(())
}

/// Spectral path plus the diagonal drift `D` and cumulative integrals of
/// `Λ` and `D` on the grid.
#[derive(Clone, Debug)]
pub struct AdiabaticReference {
    path: SpectralPath,
    /// `Im D_jj(τ_m)`; the real part is zero for unit columns.
    d_im: Vec<Vec<f64>>,
    /// Largest discarded `|Re D_jj|` before projection.
    d_real_defect: f64,
    gamma: Vec<Vec<f64>>,
    int_d: Vec<Vec<f64>>,
}

/// Finite-difference `D = diag((dP*/dτ)·P)` and trapezoid integrals.
pub fn diagonal_drift(path: SpectralPath) -> AdiabaticReference {
    let m = path.steps();
    let n = path.dim();
    let h = 1.0 / m as f64;
    let mut d_im = Vec::with_capacity(m + 1);
    let mut d_real_defect: f64 = 0.0;
    for i in 0..=m {
        let dp = |r: usize, j: usize| -> C64 {
            let at = |k: usize| path.p[k][(r, j)];
            if i == 0 {
                (at(0) * -3.0 + at(1) * 4.0 - at(2)) / (2.0 * h)
            } else if i == m {
                (at(m) * 3.0 - at(m - 1) * 4.0 + at(m - 2)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            }
        };
        let row: Vec<f64> = (0..n)
            .map(|j| {
                // (dP*/dτ · P)_jj = Σ_r conj(P'_rj)·P_rj
                let z: C64 = (0..n).map(|r| dp(r, j).conj() * path.p[i][(r, j)]).sum();
                d_real_defect = d_real_defect.max(math::abs(z.re));
                z.im
            })
            .collect();
        d_im.push(row);
    }
    let gamma = cumulative_trapezoid(&path.lambda, h);
    let int_d = cumulative_trapezoid(&d_im, h);
    AdiabaticReference {
        path,
        d_im,
        d_real_defect,
        gamma,
        int_d,
    }
}

fn cumulative_trapezoid(f: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let n = f[0].len();
    let mut out = Vec::with_capacity(f.len());
    let mut acc = vec![0.0; n];
    out.push(acc.clone());
    for w in f.windows(2) {
        for j in 0..n {
            acc[j] += 0.5 * h * (w[0][j] + w[1][j]);
        }
        out.push(acc.clone());
    }
    out
}

#[inline]
fn hermite(s: f64, h: f64, f0: f64, d0: f64, f1: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * h * d0 + (3.0 * s2 - 2.0 * s3) * f1 + (s3 - s2) * h * d1
}

impl AdiabaticReference {
    pub fn path(&self) -> &SpectralPath {
        &self.path
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    /// `Im D_jj` per grid sample.
    pub fn drift(&self) -> &[Vec<f64>] {
        &self.d_im
    }

    pub fn drift_real_defect(&self) -> f64 {
        self.d_real_defect
    }

    /// `Γ(τ_m) = ∫₀^{τ_m} Λ` per grid sample.
    pub fn gamma(&self) -> &[Vec<f64>] {
        &self.gamma
    }

    /// `Im ∫₀^{τ_m} D` per grid sample.
    pub fn integrated_drift(&self) -> &[Vec<f64>] {
        &self.int_d
    }

    fn locate(&self, tau: f64) -> (usize, f64) {
        let m = self.path.steps();
        let x = tau.clamp(0.0, 1.0) * m as f64;
        let i = (x as usize).min(m - 1);
        (i, x - i as f64)
    }

    /// `Γ(τ)` by cubic Hermite interpolation with `Λ` as derivative.
    pub fn gamma_at(&self, tau: f64, out: &mut [f64]) {
        let (i, s) = self.locate(tau);
        let h = 1.0 / self.path.steps() as f64;
        let (g0, g1) = (&self.gamma[i], &self.gamma[i + 1]);
        let (l0, l1) = (&self.path.lambda[i], &self.path.lambda[i + 1]);
        for j in 0..out.len() {
            out[j] = hermite(s, h, g0[j], l0[j], g1[j], l1[j]);
        }
    }

    /// `Im ∫₀^τ D` by cubic Hermite interpolation with `D` as derivative.
    pub fn integrated_drift_at(&self, tau: f64, out: &mut [f64]) {
        let (i, s) = self.locate(tau);
        let h = 1.0 / self.path.steps() as f64;
        let (g0, g1) = (&self.int_d[i], &self.int_d[i + 1]);
        let (d0, d1) = (&self.d_im[i], &self.d_im[i + 1]);
        for j in 0..out.len() {
            out[j] = hermite(s, h, g0[j], d0[j], g1[j], d1[j]);
        }
    }

    /// `P(τ)`: linear interpolation followed by re-orthonormalization.
    pub fn eigenvectors_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let (i, s) = self.locate(tau);
        let (p0, p1) = (self.path.p[i].as_slice(), self.path.p[i + 1].as_slice());
        for (o, (a, b)) in out.as_mut_slice().iter_mut().zip(p0.iter().zip(p1)) {
            *o = a * (1.0 - s) + b * s;
        }
        if s != 0.0 {
            out.orthonormalize_columns();
        }
    }
}

/// Orthonormal eigenframe `P(τ)` and real diagonal phase `Γ(τ)`.
pub trait EigenFrame: Send + Sync {
    fn dim(&self) -> usize;

    fn frame_into(&self, tau: f64, p: &mut ComplexMatrix, gamma: &mut [f64]);

    /// Bound on `max_τ max_{j,k} |Γ_j'(τ) − Γ_k'(τ)|`.
    fn gamma_rate_bound(&self) -> f64;
}

impl<F: EigenFrame + ?Sized> EigenFrame for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn frame_into(&self, tau: f64, p: &mut ComplexMatrix, gamma: &mut [f64]) {
        (**self).frame_into(tau, p, gamma)
    }

    fn gamma_rate_bound(&self) -> f64 {
        (**self).gamma_rate_bound()
    }
}

impl EigenFrame for AdiabaticReference {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn frame_into(&self, tau: f64, p: &mut ComplexMatrix, gamma: &mut [f64]) {
        self.eigenvectors_into(tau, p);
        self.gamma_at(tau, gamma);
    }

    fn gamma_rate_bound(&self) -> f64 {
        self.path.spread_max()
    }
}

/// `Υ_ε(τ)`; off-grid `τ` uses the interpolants of [`AdiabaticReference`].
pub fn adiabatic_reference_flow(reference: &AdiabaticReference, epsilon: f64, tau: f64) -> ComplexMatrix {
    let n = reference.dim();
    let mut p = ComplexMatrix::zeros(n);
    reference.eigenvectors_into(tau, &mut p);
    let mut gamma = vec![0.0; n];
    let mut int_d = vec![0.0; n];
    reference.gamma_at(tau, &mut gamma);
    reference.integrated_drift_at(tau, &mut int_d);
    let phases: Vec<C64> = (0..n).map(|j| cis(int_d[j] - gamma[j] / epsilon)).collect();
    let mid = ComplexMatrix::from_diagonal(&phases);
    &(&p * &mid) * &reference.path.p[0].adjoint()
}

/// Minimum gap over a family of slow generators indexed by `δ`.
///
/// Fails on an empty grid and with [`Error::UniformGapViolation`] naming
/// `(δ, τ)` when some member drops to `gap_floor`.
pub fn uniform_gap_check<G, F>(family: F, deltas: &[f64], m: usize, gap_floor: f64) -> Result<f64>
where
    G: Generator,
    F: Fn(f64) -> G,
{
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("empty delta grid".into()));
    }
    let mut worst = f64::INFINITY;
    for &delta in deltas {
        match spectral_path(&family(delta), m, gap_floor) {
            Ok(path) => worst = worst.min(path.gap_min()),
            Err(Error::GapViolation { tau, gap, floor }) => {
                return Err(Error::UniformGapViolation { delta, tau, gap, floor })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controls::{rwa_generator, rwa_generator_scaled, ControlProfile};
    use crate::schrodinger::{propagate, ConstantGenerator, StepPolicy};
    use crate::smallmat::{dist_up_to_phase, QuantumState};

    fn sine_reference(m: usize) -> AdiabaticReference {
        diagonal_drift(spectral_path(&rwa_generator(&ControlProfile::sine()), m, 0.5).unwrap())
    }

    #[test]
    fn sine_path_endpoints_and_gap() {
        let path = spectral_path(&rwa_generator(&ControlProfile::sine()), DEFAULT_M, 0.5).unwrap();
        assert!((path.eigenvalues()[0][0] + 0.5).abs() < 1e-15);
        assert!((path.eigenvalues()[0][1] - 0.5).abs() < 1e-15);
        let p0 = &path.eigenvectors()[0];
        // iA(0) = diag(1/2, −1/2): ascending order puts e2 first
        assert!((p0[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((p0[(0, 1)].norm() - 1.0).abs() < 1e-14);

        // closed-form gap 2√(sin²πτ + cos²(πτ)/4) scanned densely
        let scan = (0..=100_000)
            .map(|i| {
                let t = i as f64 / 1e5;
                let s = (core::f64::consts::PI * t).sin();
                let c = (core::f64::consts::PI * t).cos();
                2.0 * (s * s + c * c / 4.0).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((path.gap_min() - scan).abs() < 1e-6);
        assert!((path.gap_min() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn continuity_invariants() {
        let path = spectral_path(&rwa_generator(&ControlProfile::sine()), 1024, 0.5).unwrap();
        let dt = 1.0 / 1024.0;
        let bound = 10.0 * path.generator_max() * dt;
        for w in path.eigenvectors().windows(2) {
            for j in 0..2 {
                let ov: C64 = (0..2).map(|r| w[0][(r, j)].conj() * w[1][(r, j)]).sum();
                assert!(ov.re > 0.0 && ov.im.abs() < 1e-12);
                let d: f64 = (0..2)
                    .map(|r| (w[1][(r, j)] - w[0][(r, j)]).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(d <= bound);
            }
        }
    }

    #[test]
    fn constant_generator_gives_constant_frame() {
        let a = ComplexMatrix::new2(c(0., 0.3), c(0.2, -0.1), c(-0.2, -0.1), c(0., -0.4));
        let g = ConstantGenerator::new(a).unwrap();
        let reference = diagonal_drift(spectral_path(&g, 128, 0.0).unwrap());
        let p0 = reference.path().eigenvectors()[0].clone();
        for p in reference.path().eigenvectors() {
            assert!((p - &p0).max_abs() < 1e-13);
        }
        for (d, i) in reference.drift().iter().zip(reference.integrated_drift()) {
            assert!(d.iter().all(|x| x.abs() < 1e-9));
            assert!(i.iter().all(|x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn gap_violation_is_reported() {
        let dead = rwa_generator_scaled(&ControlProfile::sine(), 0.1);
        match spectral_path(&dead, 256, 0.3) {
            Err(Error::GapViolation { tau, gap, .. }) => {
                assert!(gap <= 0.3);
                assert!(tau > 0.0 && tau < 1.0);
            }
            other => panic!("expected gap violation, got {other:?}"),
        }
        assert!(spectral_path(&dead, 16, 0.0).is_err());
    }

    #[test]
    fn real_symmetric_sine_profile_has_no_drift() {
        let reference = sine_reference(DEFAULT_M);
        assert!(reference.drift_real_defect() < 1e-6);
        for d in reference.drift() {
            assert!(d.iter().all(|x| x.abs() < 1e-9), "{d:?}");
        }
    }

    #[test]
    fn drift_refinement_converges() {
        // Twisted complex eigenvectors. The transported gauge leaves only
        // discretization error in D, which must shrink like M^-2.
        use crate::schrodinger::FnGenerator;
        let g = FnGenerator::new(2, 3.0, "twisted", |t: f64| {
            let th = 0.25 * core::f64::consts::PI * t;
            let ph = cis(2.0 * t);
            let (s, co) = (th.sin(), th.cos());
            let h = ComplexMatrix::new2(
                c(s * s - co * co, 0.0),
                ph.conj() * (-2.0 * s * co),
                ph * (-2.0 * s * co),
                c(co * co - s * s, 0.0),
            );
            h.scale(c(0.0, -1.0))
        });
        let stats = |m: usize| {
            let r = diagonal_drift(spectral_path(&g, m, 0.5).unwrap());
            let max_d = r.drift().iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
            (r.integrated_drift()[m][0], max_d)
        };
        let (i1, d1) = stats(256);
        let (i2, d2) = stats(512);
        let (i3, d3) = stats(1024);
        assert!(d1 / d2 > 3.5 && d2 / d3 > 3.5);
        assert!((i2 - i3).abs() <= 0.25 * (i1 - i2).abs() + 1e-15);
        assert!(i3.abs() < 1e-9);
    }

    #[test]
    fn reference_flow_properties() {
        let reference = sine_reference(DEFAULT_M);
        for eps in [1.0, 0.1, 0.01, 1e-3] {
            let id = adiabatic_reference_flow(&reference, eps, 0.0);
            assert!((&id - &ComplexMatrix::identity(2)).max_abs() < 1e-14);
            for i in 0..=40 {
                let t = i as f64 / 40.0 + 1e-4 * (i % 3) as f64;
                let u = adiabatic_reference_flow(&reference, eps, t.min(1.0));
                assert!(u.unitarity_defect() < 1e-9);
            }
            let e1 = QuantumState::basis(2, 0).unwrap();
            let e2 = QuantumState::basis(2, 1).unwrap();
            let end = e1.apply(&adiabatic_reference_flow(&reference, eps, 1.0)).unwrap();
            assert!(dist_up_to_phase(&end, &e2).unwrap() < 1e-12);
        }
    }

    #[test]
    fn refinement_stability() {
        let coarse = sine_reference(DEFAULT_M);
        let fine = sine_reference(2 * DEFAULT_M);
        assert!((coarse.path().gap_min() - fine.path().gap_min()).abs() <= 1e-6);
        let u = adiabatic_reference_flow(&coarse, 0.01, 1.0);
        let v = adiabatic_reference_flow(&fine, 0.01, 1.0);
        assert!((&u - &v).norm_op() <= 1e-6);
    }

    #[test]
    fn reference_tracks_slow_dynamics() {
        let reference = sine_reference(DEFAULT_M);
        let eps = 0.01;
        let g = crate::schrodinger::Scaled::new(rwa_generator(&ControlProfile::sine()), 1.0 / eps);
        let e1 = QuantumState::basis(2, 0).unwrap();
        let traj = propagate(&g, &e1, 1.0, &StepPolicy::default(), 50).unwrap();
        for (t, x) in traj.grid.iter().zip(&traj.states) {
            let y = e1.apply(&adiabatic_reference_flow(&reference, eps, *t)).unwrap();
            assert!(x.distance(&y).unwrap() < 10.0 * eps);
        }
    }

    #[test]
    fn uniform_gap_examples() {
        let sine = ControlProfile::sine();
        let deltas: Vec<f64> = (0..5).map(|k| 0.2 + 0.2 * k as f64).collect();
        let g = uniform_gap_check(|d| rwa_generator_scaled(&sine, d), &deltas, 1024, 0.3).unwrap();
        assert!((g - 0.4).abs() < 1e-6);
        let one = uniform_gap_check(|d| rwa_generator_scaled(&sine, d), &[1.0], 1024, 0.3).unwrap();
        assert!((one - 1.0).abs() < 1e-6);
        assert!(uniform_gap_check(|d| rwa_generator_scaled(&sine, d), &[], 1024, 0.3).is_err());
        match uniform_gap_check(|d| rwa_generator_scaled(&sine, d), &[1.0, 0.1], 1024, 0.3) {
            Err(Error::UniformGapViolation { delta, tau, .. }) => {
                assert_eq!(delta, 0.1);
                assert!((tau - 0.5).abs() < 0.1);
            }
            other => panic!("expected UGAP violation, got {other:?}"),
        }
    }
}
