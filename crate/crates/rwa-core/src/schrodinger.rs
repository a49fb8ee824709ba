//! Unitary flows of τ-dependent skew-Hermitian generators.
//!
//! Every propagation uses the exponential midpoint rule
//! `ψ_{k+1} = exp(h·G(τ_k + h/2))·ψ_k`, which is unitary by construction and
//! second order. The step is `min(h_max, 2π/(freq_bound·N_osc))`, rounded
//! down so that an integer number of steps lands exactly on `tau_final`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::phase::TWO_PI;
use crate::smallmat::{expm_skew_into, ComplexMatrix, QuantumState, C64};

/// A τ-dependent skew-Hermitian field on `[0, 1]`.
///
/// `freq_bound` must bound the fastest angular frequency present in the
/// samples (1/τ units); constructors compute it analytically.
pub trait Generator: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `G(τ)` into `out` (already sized `dim × dim`).
    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix);

    fn freq_bound(&self) -> f64;

    /// Human-readable parameter context used in error messages.
    fn describe(&self) -> String {
        String::from("generator")
    }

    fn sample(&self, tau: f64) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim());
        self.sample_into(tau, &mut m);
        m
    }

    /// `out += G(τ)`. Override to avoid the temporary.
    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let s = self.sample(tau);
        for (o, x) in out.as_mut_slice().iter_mut().zip(s.as_slice()) {
            *o += *x;
        }
    }
}

impl<G: Generator + ?Sized> Generator for &G {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        (**self).sample_into(tau, out)
    }
    fn freq_bound(&self) -> f64 {
        (**self).freq_bound()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        (**self).add_into(tau, out)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        (**self).sample_into(tau, out)
    }
    fn freq_bound(&self) -> f64 {
        (**self).freq_bound()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        (**self).add_into(tau, out)
    }
}

impl<G: Generator + ?Sized> Generator for Arc<G> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        (**self).sample_into(tau, out)
    }
    fn freq_bound(&self) -> f64 {
        (**self).freq_bound()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        (**self).add_into(tau, out)
    }
}

pub type DynGenerator = Arc<dyn Generator>;

/// The zero field.
#[derive(Clone, Debug)]
pub struct ZeroGenerator(pub usize);

impl Generator for ZeroGenerator {
    fn dim(&self) -> usize {
        self.0
    }
    fn sample_into(&self, _tau: f64, out: &mut ComplexMatrix) {
        out.as_mut_slice().iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    }
    fn add_into(&self, _tau: f64, _out: &mut ComplexMatrix) {}
    fn freq_bound(&self) -> f64 {
        0.0
    }
    fn describe(&self) -> String {
        String::from("zero")
    }
}

/// A τ-independent generator.
#[derive(Clone, Debug)]
pub struct ConstantGenerator {
    matrix: ComplexMatrix,
}

impl ConstantGenerator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let defect = matrix.skew_hermitian_defect();
        if defect > crate::smallmat::STRUCTURE_TOL {
            return Err(Error::Contract(format!(
                "constant generator is not skew-Hermitian (defect {defect:e})"
            )));
        }
        Ok(Self { matrix })
    }
}

impl Generator for ConstantGenerator {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }
    fn sample_into(&self, _tau: f64, out: &mut ComplexMatrix) {
        out.as_mut_slice().copy_from_slice(self.matrix.as_slice());
    }
    fn freq_bound(&self) -> f64 {
        self.matrix.norm_op()
    }
    fn describe(&self) -> String {
        String::from("constant")
    }
}

/// A generator from a closure plus an explicit frequency bound.
pub struct FnGenerator<F> {
    dim: usize,
    f: F,
    freq_bound: f64,
    label: String,
}

impl<F> FnGenerator<F>
where
    F: Fn(f64) -> ComplexMatrix + Send + Sync,
{
    pub fn new(dim: usize, freq_bound: f64, label: impl Into<String>, f: F) -> Self {
        Self {
            dim,
            f,
            freq_bound,
            label: label.into(),
        }
    }
}

impl<F> Generator for FnGenerator<F>
where
    F: Fn(f64) -> ComplexMatrix + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let m = (self.f)(tau);
        out.as_mut_slice().copy_from_slice(m.as_slice());
    }
    fn freq_bound(&self) -> f64 {
        self.freq_bound
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// `c·G(τ)` for real `c`.
#[derive(Clone)]
pub struct Scaled<G> {
    pub inner: G,
    pub factor: f64,
}

impl<G: Generator> Scaled<G> {
    pub fn new(inner: G, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl<G: Generator> Generator for Scaled<G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        self.inner.sample_into(tau, out);
        let f = self.factor;
        out.as_mut_slice().iter_mut().for_each(|z| *z *= f);
    }
    fn freq_bound(&self) -> f64 {
        math::abs(self.factor) * self.inner.freq_bound()
    }
    fn describe(&self) -> String {
        format!("{}*({})", self.factor, self.inner.describe())
    }
}

/// `A(τ) + B(τ)`
pub struct Sum<A, B> {
    pub a: A,
    pub b: B,
    scratch_dim: usize,
}

impl<A: Generator, B: Generator> Sum<A, B> {
    pub fn new(a: A, b: B) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        let scratch_dim = a.dim();
        Ok(Self { a, b, scratch_dim })
    }
}

impl<A: Generator, B: Generator> Generator for Sum<A, B> {
    fn dim(&self) -> usize {
        self.scratch_dim
    }
    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        self.a.sample_into(tau, out);
        self.b.add_into(tau, out);
    }
    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        self.a.add_into(tau, out);
        self.b.add_into(tau, out);
    }
    fn freq_bound(&self) -> f64 {
        self.a.freq_bound() + self.b.freq_bound()
    }
    fn describe(&self) -> String {
        format!("{} + {}", self.a.describe(), self.b.describe())
    }
}

/// `s ↦ −G(τ_final − s)`: the generator whose flow undoes `G` on `[0, τ_final]`.
pub struct Reversed<G> {
    pub inner: G,
    pub tau_final: f64,
}

impl<G: Generator> Generator for Reversed<G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        self.inner.sample_into(self.tau_final - tau, out);
        out.as_mut_slice().iter_mut().for_each(|z| *z = -*z);
    }
    fn freq_bound(&self) -> f64 {
        self.inner.freq_bound()
    }
    fn describe(&self) -> String {
        format!("reversed({})", self.inner.describe())
    }
}

pub const DEFAULT_N_OSC: u32 = 16;
pub const DEFAULT_H_MAX: f64 = 1e-3;
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;
/// Default cap on stored trajectory points.
pub const DEFAULT_MAX_STORED: usize = 10_000;

/// Step-size policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    /// Steps per period of the fastest frequency (≥ 4).
    pub n_osc: u32,
    /// Absolute cap on the step in τ.
    pub h_max: f64,
    /// Re-run at `h/2` and attach a global error estimate.
    pub richardson_check: bool,
    /// Hard cap on the number of steps.
    pub max_steps: u64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            n_osc: DEFAULT_N_OSC,
            h_max: DEFAULT_H_MAX,
            richardson_check: false,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl StepPolicy {
    pub fn with_richardson(mut self, on: bool) -> Self {
        self.richardson_check = on;
        self
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    pub fn with_n_osc(mut self, n_osc: u32) -> Self {
        self.n_osc = n_osc;
        self
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_osc < 4 {
            return Err(Error::InvalidArgument(format!("n_osc = {} < 4", self.n_osc)));
        }
        if !(self.h_max > 0.0) || !self.h_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "h_max = {} must be positive",
                self.h_max
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// The nominal step `min(h_max, 2π/(freq_bound·N_osc))`.
    pub fn step_for(&self, freq_bound: f64) -> Result<f64> {
        if !freq_bound.is_finite() || freq_bound < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "frequency bound {freq_bound} is missing or invalid"
            )));
        }
        if freq_bound > 0.0 {
            Ok(self.h_max.min(TWO_PI / (freq_bound * f64::from(self.n_osc))))
        } else {
            Ok(self.h_max)
        }
    }

    /// Number of uniform steps covering `[0, tau_final]` for `freq_bound`.
    pub fn step_count(&self, freq_bound: f64, tau_final: f64) -> Result<u64> {
        let h = self.step_for(freq_bound)?;
        let n = math::ceil(tau_final / h);
        Ok(if n < 1.0 { 1 } else { n as u64 })
    }
}

fn check_tau_final(tau_final: f64) -> Result<()> {
    if !(tau_final > 0.0 && tau_final <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tau_final = {tau_final} outside (0, 1]"
        )));
    }
    Ok(())
}

fn check_cap(policy: &StepPolicy, steps: u64, context: &str) -> Result<()> {
    if steps > policy.max_steps {
        return Err(Error::ResourceCap {
            what: "steps",
            needed: steps,
            cap: policy.max_steps,
            context: String::from(context),
        });
    }
    Ok(())
}

/// Sampled state path on a uniform τ-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub params_tag: String,
    /// Integrator steps taken.
    pub steps: u64,
    /// Step size used.
    pub step: f64,
    /// Richardson estimate of the global error of the stored states
    /// (max over stored points), when requested.
    pub error_estimate: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &QuantumState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_tau(&self) -> f64 {
        *self.grid.last().expect("trajectory is never empty")
    }

    /// max over stored points of `|‖ψ‖ − 1|`.
    pub fn max_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| math::abs(s.norm() - 1.0))
            .fold(0.0, f64::max)
    }
}

/// Stride that keeps at most [`DEFAULT_MAX_STORED`] stored points.
pub fn auto_stride(steps: u64) -> usize {
    let per = steps.div_ceil(DEFAULT_MAX_STORED as u64);
    per.max(1) as usize
}

/// Core stepping loop. Calls `visit(k, step_unitary)` for each step `k`.
fn step_loop<G, F>(g: &G, tau_final: f64, steps: u64, mut visit: F)
where
    G: Generator + ?Sized,
    F: FnMut(u64, &ComplexMatrix),
{
    let n = g.dim();
    let h = tau_final / steps as f64;
    let mut sample = ComplexMatrix::zeros(n);
    let mut unitary = ComplexMatrix::zeros(n);
    for k in 0..steps {
        let mid = (k as f64 + 0.5) * h;
        g.sample_into(mid, &mut sample);
        expm_skew_into(&sample, h, &mut unitary);
        visit(k, &unitary);
    }
}

/// Propagates with an explicit step count; stores every `stride`-th state
/// plus the final one.
pub fn propagate_steps<G: Generator + ?Sized>(
    g: &G,
    psi0: &QuantumState,
    tau_final: f64,
    steps: u64,
    stride: usize,
) -> Result<Trajectory> {
    check_tau_final(tau_final)?;
    if psi0.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: psi0.dim(),
        });
    }
    if steps == 0 || stride == 0 {
        return Err(Error::InvalidArgument("steps and stride must be positive".into()));
    }
    let n = g.dim();
    let h = tau_final / steps as f64;
    let mut psi: Vec<C64> = psi0.amplitudes().to_vec();
    let mut scratch = vec![C64::new(0.0, 0.0); n];
    let cap = (steps as usize / stride) + 2;
    let mut grid = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    grid.push(0.0);
    states.push(psi0.clone());
    let stride64 = stride as u64;
    step_loop(g, tau_final, steps, |k, u| {
        u.apply_in_place(&mut psi, &mut scratch);
        let done = k + 1;
        if done == steps {
            grid.push(tau_final);
            states.push(QuantumState::from_raw(psi.clone()));
        } else if done % stride64 == 0 {
            grid.push(done as f64 * h);
            states.push(QuantumState::from_raw(psi.clone()));
        }
    });
    Ok(Trajectory {
        grid,
        states,
        params_tag: g.describe(),
        steps,
        step: h,
        error_estimate: None,
    })
}

/// Propagates `dψ/dτ = G(τ)ψ` from `psi0` to `tau_final`.
///
/// With `policy.richardson_check` the run is repeated at half the step and
/// the stored states are compared point by point; the estimate attached to
/// the result is `(4/3)·max‖ψ_h − ψ_{h/2}‖`.
pub fn propagate<G: Generator + ?Sized>(
    g: &G,
    psi0: &QuantumState,
    tau_final: f64,
    policy: &StepPolicy,
    sample_stride: usize,
) -> Result<Trajectory> {
    policy.validate()?;
    check_tau_final(tau_final)?;
    let steps = policy.step_count(g.freq_bound(), tau_final)?;
    propagate_with_count(g, psi0, tau_final, policy, steps, sample_stride)
}

/// Like [`propagate`] but with the step count fixed by the caller, so that
/// several runs share one stored grid. Honors the policy's cap and
/// Richardson flag.
pub fn propagate_with_count<G: Generator + ?Sized>(
    g: &G,
    psi0: &QuantumState,
    tau_final: f64,
    policy: &StepPolicy,
    steps: u64,
    sample_stride: usize,
) -> Result<Trajectory> {
    let factor = if policy.richardson_check { 2 } else { 1 };
    check_cap(policy, steps.saturating_mul(factor), &g.describe())?;
    let mut traj = propagate_steps(g, psi0, tau_final, steps, sample_stride)?;
    if policy.richardson_check {
        let fine = propagate_steps(g, psi0, tau_final, steps * 2, sample_stride * 2)?;
        traj.error_estimate = Some(richardson_estimate(&traj, &fine));
    }
    Ok(traj)
}

/// `(4/3)·max_k ‖coarse_k − fine_k‖` over matching stored points.
pub fn richardson_estimate(coarse: &Trajectory, fine: &Trajectory) -> f64 {
    let worst = coarse
        .states
        .iter()
        .zip(&fine.states)
        .map(|(a, b)| a.distance(b).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    worst * 4.0 / 3.0
}

/// Flow matrix at `tau_final` (columns of the identity propagated).
pub fn flow<G: Generator + ?Sized>(g: &G, tau_final: f64, policy: &StepPolicy) -> Result<ComplexMatrix> {
    policy.validate()?;
    check_tau_final(tau_final)?;
    let steps = policy.step_count(g.freq_bound(), tau_final)?;
    check_cap(policy, steps, &g.describe())?;
    let path = flow_path_steps(g, tau_final, steps, steps as usize)?;
    Ok(path.1.into_iter().last().expect("flow path is never empty"))
}

/// Flow matrices at every `stride`-th step (plus τ = 0 and the final step).
pub fn flow_path_steps<G: Generator + ?Sized>(
    g: &G,
    tau_final: f64,
    steps: u64,
    stride: usize,
) -> Result<(Vec<f64>, Vec<ComplexMatrix>)> {
    check_tau_final(tau_final)?;
    if steps == 0 || stride == 0 {
        return Err(Error::InvalidArgument("steps and stride must be positive".into()));
    }
    let n = g.dim();
    let h = tau_final / steps as f64;
    let mut f = ComplexMatrix::identity(n);
    let mut tmp = ComplexMatrix::zeros(n);
    let mut grid = vec![0.0];
    let mut mats = vec![f.clone()];
    let stride64 = stride as u64;
    step_loop(g, tau_final, steps, |k, u| {
        ComplexMatrix::mul_into(u, &f, &mut tmp);
        core::mem::swap(&mut f, &mut tmp);
        let done = k + 1;
        if done == steps {
            grid.push(tau_final);
            mats.push(f.clone());
        } else if done % stride64 == 0 {
            grid.push(done as f64 * h);
            mats.push(f.clone());
        }
    });
    Ok((grid, mats))
}

/// Residual of the variation formula at `tau_final`:
/// `‖Flow(A+B)(τ) − P_τ·W_τ‖` where `P` is the flow of `A` and `W` the flow
/// of `τ ↦ P_τ*·B(τ)·P_τ`.
///
/// The three flows are advanced on one shared grid; the conjugating `P` at
/// each midpoint comes from a half step of the `A`-flow.
pub fn variation_check<A, B>(a: &A, b: &B, tau_final: f64, policy: &StepPolicy) -> Result<f64>
where
    A: Generator + ?Sized,
    B: Generator + ?Sized,
{
    policy.validate()?;
    check_tau_final(tau_final)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let n = a.dim();
    // The conjugated generator oscillates with B's frequencies plus the
    // spread of A's spectrum, bounded by A's own bound.
    let bound = a.freq_bound() + b.freq_bound();
    let steps = policy.step_count(bound, tau_final)?;
    check_cap(
        policy,
        steps,
        &format!("variation check: {} / {}", a.describe(), b.describe()),
    )?;
    let h = tau_final / steps as f64;

    let mut p = ComplexMatrix::identity(n);
    let mut w = ComplexMatrix::identity(n);
    let mut full = ComplexMatrix::identity(n);
    let mut sa = ComplexMatrix::zeros(n);
    let mut sb = ComplexMatrix::zeros(n);
    let mut u = ComplexMatrix::zeros(n);
    let mut tmp = ComplexMatrix::zeros(n);
    let mut half = ComplexMatrix::zeros(n);
    let mut p_mid = ComplexMatrix::zeros(n);

    for k in 0..steps {
        let t0 = k as f64 * h;
        let mid = t0 + 0.5 * h;

        // P at the midpoint: half step of A sampled at t0 + h/4.
        a.sample_into(t0 + 0.25 * h, &mut sa);
        expm_skew_into(&sa, 0.5 * h, &mut half);
        ComplexMatrix::mul_into(&half, &p, &mut p_mid);

        // W ← exp(h·P_mid* B(mid) P_mid)·W
        b.sample_into(mid, &mut sb);
        ComplexMatrix::mul_into(&sb, &p_mid, &mut tmp);
        let conj = &p_mid.adjoint() * &tmp;
        expm_skew_into(&conj, h, &mut u);
        ComplexMatrix::mul_into(&u, &w, &mut tmp);
        core::mem::swap(&mut w, &mut tmp);

        // Full flow of A + B.
        a.sample_into(mid, &mut sa);
        for (x, y) in sa.as_mut_slice().iter_mut().zip(sb.as_slice()) {
            *x += *y;
        }
        expm_skew_into(&sa, h, &mut u);
        ComplexMatrix::mul_into(&u, &full, &mut tmp);
        core::mem::swap(&mut full, &mut tmp);

        // P ← exp(h·A(mid))·P
        a.sample_into(mid, &mut sa);
        expm_skew_into(&sa, h, &mut u);
        ComplexMatrix::mul_into(&u, &p, &mut tmp);
        core::mem::swap(&mut p, &mut tmp);
    }
    let pw = &p * &w;
    Ok((&full - &pw).norm_op())
}
