//! Control pulses, the rotating frame, and the generators built from them.
//!
//! All fields use the rescaled time τ ∈ [0, 1]. With `E' = E/ε^{α+1}` and the
//! frame phase `θ(τ) = E'τ + φ(τ)/(2ε)`:
//!
//! * lab generator: `−i[[E', δu], [δu, −E']]`, `u = (2/ε)·v·cos(2θ)`
//! * complex generator: `−i[[E', conj(w)], [w, −E']]`, `w = (v/ε)·e^{2iθ}`
//! * rotating frame: `U = diag(e^{iθ}, e^{−iθ})`
//! * slow part: `A = −i[[−φ'/2, v], [v, φ'/2]]`
//! * residual: `B = (−i/ε)[[0, v·e^{4iθ}], [v·e^{−4iθ}, 0]]`
//!
//! With these conventions `U·G_lab·U* + U'·U* = A/ε + B` holds exactly and
//! the complex generator is mapped onto `A/ε` alone.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;
use crate::phase::reduced_phase;
use crate::schrodinger::Generator;
use crate::smallmat::{c, cis, ComplexMatrix, QuantumState, C64};

const PROFILE_SCAN_POINTS: usize = 10_001;
const ENDPOINT_TOL: f64 = 1e-12;

/// `constant + linear·τ + Σ_k sin_k·sin(kπτ) + cos_k·cos(kπτ)`, k = 1, 2, …
///
/// Closed under differentiation, so profiles built from it carry exact
/// derivatives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigSeries {
    pub constant: f64,
    pub linear: f64,
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl TrigSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            ..Self::default()
        }
    }

    pub fn value(&self, tau: f64) -> f64 {
        let mut acc = self.constant + self.linear * tau;
        let order = self.sin.len().max(self.cos.len());
        if order == 0 {
            return acc;
        }
        let (s1, c1) = math::sin_cos(PI * tau);
        let (mut sk, mut ck) = (s1, c1);
        for k in 0..order {
            if let Some(a) = self.sin.get(k) {
                acc += a * sk;
            }
            if let Some(b) = self.cos.get(k) {
                acc += b * ck;
            }
            // angle addition: (k+1)πτ
            let (sn, cn) = (sk * c1 + ck * s1, ck * c1 - sk * s1);
            sk = sn;
            ck = cn;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let order = self.sin.len().max(self.cos.len());
        let mut sin = vec![0.0; order];
        let mut cos = vec![0.0; order];
        for k in 0..order {
            let w = (k + 1) as f64 * PI;
            if let Some(a) = self.sin.get(k) {
                cos[k] += w * a;
            }
            if let Some(b) = self.cos.get(k) {
                sin[k] -= w * b;
            }
        }
        Self {
            constant: self.linear,
            linear: 0.0,
            sin,
            cos,
        }
    }

    /// Upper bound on `max_{τ∈[0,1]} |f(τ)|` from the coefficients.
    pub fn abs_bound(&self) -> f64 {
        math::abs(self.constant)
            + math::abs(self.linear)
            + self.sin.iter().map(|x| math::abs(*x)).sum::<f64>()
            + self.cos.iter().map(|x| math::abs(*x)).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.linear.is_finite() && self.sin.iter().chain(&self.cos).all(|x| x.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            linear: self.linear * s,
            sin: self.sin.iter().map(|x| x * s).collect(),
            cos: self.cos.iter().map(|x| x * s).collect(),
        }
    }
}

/// Envelope `v` and phase `φ` of a pulse, with `φ'` derived exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlProfile {
    name: String,
    v: TrigSeries,
    phi: TrigSeries,
    dphi: TrigSeries,
}

impl ControlProfile {
    /// Builds a profile; requires finite coefficients and `φ(0) = 0`.
    pub fn new(name: impl Into<String>, v: TrigSeries, phi: TrigSeries) -> Result<Self> {
        let name = name.into();
        if !v.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidProfile(format!("{name}: non-finite coefficient")));
        }
        let phi0 = phi.value(0.0);
        if math::abs(phi0) > ENDPOINT_TOL {
            return Err(Error::InvalidProfile(format!("{name}: phi(0) = {phi0} must be 0")));
        }
        let dphi = phi.derivative();
        Ok(Self { name, v, phi, dphi })
    }

    /// `v(τ) = sin(πτ)`, `φ(τ) = −sin(πτ)/π`.
    pub fn sine() -> Self {
        Self::new(
            "sine",
            TrigSeries {
                sin: vec![1.0],
                ..TrigSeries::default()
            },
            TrigSeries {
                sin: vec![-1.0 / PI],
                ..TrigSeries::default()
            },
        )
        .expect("catalog profile is valid")
    }

    /// `v ≡ 1`, `φ ≡ 0`: resonant Rabi driving.
    pub fn flat() -> Self {
        Self::new("flat", TrigSeries::constant(1.0), TrigSeries::zero()).expect("catalog profile is valid")
    }

    /// `v ≡ 0`, `φ(τ) = −τ`: no coupling, constant detuning.
    pub fn flat_phase_only() -> Self {
        Self::new(
            "flat-phase-only",
            TrigSeries::zero(),
            TrigSeries {
                linear: -1.0,
                ..TrigSeries::default()
            },
        )
        .expect("catalog profile is valid")
    }

    pub fn catalog() -> Vec<Self> {
        vec![Self::sine(), Self::flat(), Self::flat_phase_only()]
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::catalog().into_iter().find(|p| p.name == name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn v_series(&self) -> &TrigSeries {
        &self.v
    }

    pub fn phi_series(&self) -> &TrigSeries {
        &self.phi
    }

    #[inline]
    pub fn v(&self, tau: f64) -> f64 {
        self.v.value(tau)
    }

    #[inline]
    pub fn phi(&self, tau: f64) -> f64 {
        self.phi.value(tau)
    }

    #[inline]
    pub fn dphi(&self, tau: f64) -> f64 {
        self.dphi.value(tau)
    }

    pub fn max_abs_v(&self) -> f64 {
        self.v.abs_bound()
    }

    pub fn max_abs_dphi(&self) -> f64 {
        self.dphi.abs_bound()
    }

    fn scan(&self) -> impl Iterator<Item = f64> {
        (0..PROFILE_SCAN_POINTS).map(|i| i as f64 / (PROFILE_SCAN_POINTS - 1) as f64)
    }

    /// Minimum of `v² + φ'²/4` on a dense scan, with its location.
    pub fn gap_premise_min(&self) -> (f64, f64) {
        self.scan()
            .map(|t| {
                let v = self.v(t);
                let d = self.dphi(t);
                (v * v + 0.25 * d * d, t)
            })
            .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc })
    }

    /// Fails when `v² + φ'²/4` is not bounded away from zero.
    pub fn check_gap_premise(&self) -> Result<f64> {
        let (m, t) = self.gap_premise_min();
        if !(m > ENDPOINT_TOL) {
            return Err(Error::InvalidProfile(format!(
                "{}: v^2 + phi'^2/4 = {m:e} at tau = {t} (gap premise fails)",
                self.name
            )));
        }
        Ok(m)
    }

    /// Population-transfer shape: `v(0) = v(1) = 0`, `φ'(0)·φ'(1) < 0`,
    /// `v ≠ 0` on the open interval.
    pub fn check_transfer(&self) -> Result<()> {
        let (v0, v1) = (self.v(0.0), self.v(1.0));
        if math::abs(v0) > ENDPOINT_TOL || math::abs(v1) > ENDPOINT_TOL {
            return Err(Error::InvalidProfile(format!(
                "{}: v(0) = {v0}, v(1) = {v1} must vanish",
                self.name
            )));
        }
        let prod = self.dphi(0.0) * self.dphi(1.0);
        if !(prod < 0.0) {
            return Err(Error::InvalidProfile(format!(
                "{}: phi'(0)*phi'(1) = {prod} must be negative",
                self.name
            )));
        }
        let n = PROFILE_SCAN_POINTS - 1;
        for i in 1..n {
            let t = i as f64 / n as f64;
            if self.v(t) == 0.0 {
                return Err(Error::InvalidProfile(format!("{}: v vanishes at tau = {t}", self.name)));
            }
        }
        Ok(())
    }
}

/// Scale parameters of a synthesized control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseParams {
    pub epsilon: f64,
    pub alpha: f64,
    /// Half energy splitting `E`.
    pub energy: f64,
    /// Amplitude inhomogeneity factor `δ`.
    pub delta: f64,
}

impl PulseParams {
    pub fn new(epsilon: f64, alpha: f64, energy: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} outside (0, 1]")));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} is not finite")));
        }
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::InvalidArgument(format!("E = {energy} must be positive")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta = {delta} must be >= 0")));
        }
        Ok(Self {
            epsilon,
            alpha,
            energy,
            delta,
        })
    }

    /// ε = 0.01, α = 1.5, E = 1, δ = 1.
    pub fn reference() -> Self {
        Self {
            epsilon: 0.01,
            alpha: 1.5,
            energy: 1.0,
            delta: 1.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_energy(mut self, energy: f64) -> Self {
        self.energy = energy;
        self
    }

    /// `ε^{−(α+1)}`: the lab time `T` of the whole pulse.
    pub fn lab_time(&self) -> f64 {
        math::powf(self.epsilon, -(self.alpha + 1.0))
    }

    /// `E/ε^{α+1}`
    pub fn drift_rate(&self) -> f64 {
        self.energy * self.lab_time()
    }

    /// True outside the regime α > 1 where the combined approximation is
    /// proven. Such runs are allowed but flagged.
    pub fn regime_warning(&self) -> bool {
        !(self.alpha > 1.0)
    }

    pub fn tag(&self) -> String {
        format!(
            "eps={} alpha={} E={} delta={}",
            self.epsilon, self.alpha, self.energy, self.delta
        )
    }
}

/// Frame phase `θ(τ) = rate·τ + φ(τ)/(2ε)`, reduced into [−π, π].
#[inline]
fn frame_phase(profile: &ControlProfile, rate: f64, epsilon: f64, tau: f64) -> f64 {
    reduced_phase(rate, tau, profile.phi(tau) / (2.0 * epsilon))
}

/// Real control `u_ε(τ) = (2/ε)·v(τ)·cos(2E τ/ε^{α+1} + φ(τ)/ε)`.
#[derive(Clone, Debug)]
pub struct RealPulse {
    profile: Arc<ControlProfile>,
    params: PulseParams,
    rate: f64,
}

impl RealPulse {
    pub fn value(&self, tau: f64) -> f64 {
        let theta = frame_phase(&self.profile, self.rate, self.params.epsilon, tau);
        2.0 / self.params.epsilon * self.profile.v(tau) * math::cos(2.0 * theta)
    }
}

pub fn real_pulse(profile: &ControlProfile, params: &PulseParams) -> RealPulse {
    RealPulse {
        profile: Arc::new(profile.clone()),
        params: *params,
        rate: params.drift_rate(),
    }
}

/// Complex control `w_ε(τ) = (v(τ)/ε)·e^{i(2Eτ/ε^{α+1} + φ(τ)/ε)}`.
#[derive(Clone, Debug)]
pub struct ComplexPulse {
    profile: Arc<ControlProfile>,
    params: PulseParams,
    rate: f64,
}

impl ComplexPulse {
    pub fn value(&self, tau: f64) -> C64 {
        let theta = frame_phase(&self.profile, self.rate, self.params.epsilon, tau);
        cis(2.0 * theta) * (self.profile.v(tau) / self.params.epsilon)
    }
}

pub fn complex_pulse(profile: &ControlProfile, params: &PulseParams) -> ComplexPulse {
    ComplexPulse {
        profile: Arc::new(profile.clone()),
        params: *params,
        rate: params.drift_rate(),
    }
}

/// Lab-frame generator driven by the real pulse (scaled by δ).
///
/// `carrier_energy` fixes the pulse carrier independently of the drift `E`;
/// [`lab_generator`] uses the drift energy for both.
#[derive(Clone, Debug)]
pub struct LabGenerator {
    profile: Arc<ControlProfile>,
    params: PulseParams,
    drift_rate: f64,
    carrier_rate: f64,
    carrier_energy: f64,
}

impl Generator for LabGenerator {
    fn dim(&self) -> usize {
        2
    }

    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let m = out.as_mut_slice();
        m.fill(c(0.0, 0.0));
        self.add_into(tau, out);
    }

    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let eps = self.params.epsilon;
        let theta = frame_phase(&self.profile, self.carrier_rate, eps, tau);
        let u = self.params.delta * 2.0 / eps * self.profile.v(tau) * math::cos(2.0 * theta);
        let m = out.as_mut_slice();
        m[0] += c(0.0, -self.drift_rate);
        m[1] += c(0.0, -u);
        m[2] += c(0.0, -u);
        m[3] += c(0.0, self.drift_rate);
    }

    fn freq_bound(&self) -> f64 {
        let eps = self.params.epsilon;
        2.0 * self.params.energy.max(self.carrier_energy) * self.params.lab_time()
            + self.profile.max_abs_dphi() / eps
            + 2.0 * self.params.delta * self.profile.max_abs_v() / eps
    }

    fn describe(&self) -> String {
        format!(
            "lab[{}; {}; carrier E={}]",
            self.profile.name(),
            self.params.tag(),
            self.carrier_energy
        )
    }
}

pub fn lab_generator(profile: &ControlProfile, params: &PulseParams) -> LabGenerator {
    lab_generator_detuned(profile, params, params.energy)
}

/// Lab generator whose pulse carrier uses `carrier_energy` while the drift
/// uses `params.energy`.
pub fn lab_generator_detuned(profile: &ControlProfile, params: &PulseParams, carrier_energy: f64) -> LabGenerator {
    let lab_time = params.lab_time();
    LabGenerator {
        profile: Arc::new(profile.clone()),
        params: *params,
        drift_rate: params.energy * lab_time,
        carrier_rate: carrier_energy * lab_time,
        carrier_energy,
    }
}

/// Lab-frame generator driven by the co-rotating complex control.
#[derive(Clone, Debug)]
pub struct ComplexGenerator {
    profile: Arc<ControlProfile>,
    params: PulseParams,
    rate: f64,
}

impl Generator for ComplexGenerator {
    fn dim(&self) -> usize {
        2
    }

    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        out.as_mut_slice().fill(c(0.0, 0.0));
        self.add_into(tau, out);
    }

    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let eps = self.params.epsilon;
        let theta = frame_phase(&self.profile, self.rate, eps, tau);
        let w = cis(2.0 * theta) * (self.params.delta * self.profile.v(tau) / eps);
        let m = out.as_mut_slice();
        let mi = c(0.0, -1.0);
        m[0] += c(0.0, -self.rate);
        m[1] += mi * w.conj();
        m[2] += mi * w;
        m[3] += c(0.0, self.rate);
    }

    fn freq_bound(&self) -> f64 {
        let eps = self.params.epsilon;
        2.0 * self.rate + self.profile.max_abs_dphi() / eps + 2.0 * self.params.delta * self.profile.max_abs_v() / eps
    }

    fn describe(&self) -> String {
        format!("complex[{}; {}]", self.profile.name(), self.params.tag())
    }
}

pub fn complex_generator(profile: &ControlProfile, params: &PulseParams) -> ComplexGenerator {
    ComplexGenerator {
        profile: Arc::new(profile.clone()),
        params: *params,
        rate: params.drift_rate(),
    }
}

/// Diagonal change of variables `X = U(τ)·ψ` to the rotating frame.
#[derive(Clone, Debug)]
pub struct RotatingFrame {
    profile: Arc<ControlProfile>,
    params: PulseParams,
    rate: f64,
}

impl RotatingFrame {
    pub fn phase(&self, tau: f64) -> f64 {
        frame_phase(&self.profile, self.rate, self.params.epsilon, tau)
    }

    /// `diag(e^{iθ}, e^{−iθ})`
    pub fn unitary(&self, tau: f64) -> ComplexMatrix {
        let e = cis(self.phase(tau));
        ComplexMatrix::from_diagonal(&[e, e.conj()])
    }

    /// `dU/dτ = diag(iθ'e^{iθ}, −iθ'e^{−iθ})`, `θ' = E' + φ'/(2ε)`.
    pub fn derivative(&self, tau: f64) -> ComplexMatrix {
        let e = cis(self.phase(tau));
        let dtheta = self.rate + self.profile.dphi(tau) / (2.0 * self.params.epsilon);
        ComplexMatrix::from_diagonal(&[c(0.0, dtheta) * e, c(0.0, -dtheta) * e.conj()])
    }

    pub fn to_frame(&self, psi: &QuantumState, tau: f64) -> Result<QuantumState> {
        psi.apply(&self.unitary(tau))
    }

    pub fn from_frame(&self, x: &QuantumState, tau: f64) -> Result<QuantumState> {
        x.apply(&self.unitary(tau).adjoint())
    }
}

pub fn rotating_frame(profile: &ControlProfile, params: &PulseParams) -> RotatingFrame {
    RotatingFrame {
        profile: Arc::new(profile.clone()),
        params: *params,
        rate: params.drift_rate(),
    }
}

/// Slow rotating-frame generator `A(τ) = −i[[−φ'/2, δv], [δv, φ'/2]]`.
#[derive(Clone, Debug)]
pub struct RwaGenerator {
    profile: Arc<ControlProfile>,
    coupling: f64,
}

impl RwaGenerator {
    pub fn profile(&self) -> &ControlProfile {
        &self.profile
    }
}

impl Generator for RwaGenerator {
    fn dim(&self) -> usize {
        2
    }

    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        out.as_mut_slice().fill(c(0.0, 0.0));
        self.add_into(tau, out);
    }

    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let half = 0.5 * self.profile.dphi(tau);
        let v = self.coupling * self.profile.v(tau);
        let m = out.as_mut_slice();
        m[0] += c(0.0, half);
        m[1] += c(0.0, -v);
        m[2] += c(0.0, -v);
        m[3] += c(0.0, -half);
    }

    fn freq_bound(&self) -> f64 {
        0.5 * self.profile.max_abs_dphi() + math::abs(self.coupling) * self.profile.max_abs_v()
    }

    fn describe(&self) -> String {
        format!("rwa[{}; delta={}]", self.profile.name(), self.coupling)
    }
}

pub fn rwa_generator(profile: &ControlProfile) -> RwaGenerator {
    rwa_generator_scaled(profile, 1.0)
}

/// `A^δ`: the slow generator with the coupling scaled by `delta`.
pub fn rwa_generator_scaled(profile: &ControlProfile, delta: f64) -> RwaGenerator {
    RwaGenerator {
        profile: Arc::new(profile.clone()),
        coupling: delta,
    }
}

/// Counter-rotating residual `δ·B_ε(τ)` left over in the rotating frame.
#[derive(Clone, Debug)]
pub struct RwaResidual {
    profile: Arc<ControlProfile>,
    params: PulseParams,
    rate: f64,
}

impl Generator for RwaResidual {
    fn dim(&self) -> usize {
        2
    }

    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        out.as_mut_slice().fill(c(0.0, 0.0));
        self.add_into(tau, out);
    }

    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let eps = self.params.epsilon;
        let theta = frame_phase(&self.profile, self.rate, eps, tau);
        let amp = self.params.delta * self.profile.v(tau) / eps;
        let e = cis(4.0 * theta) * amp;
        let m = out.as_mut_slice();
        let mi = c(0.0, -1.0);
        m[1] += mi * e;
        m[2] += mi * e.conj();
    }

    /// S(α) bound with β = 4E, h = 2φ.
    fn freq_bound(&self) -> f64 {
        let eps = self.params.epsilon;
        4.0 * self.rate + 2.0 * self.profile.max_abs_dphi() / eps
    }

    fn describe(&self) -> String {
        format!("residual[{}; {}]", self.profile.name(), self.params.tag())
    }
}

pub fn rwa_residual(profile: &ControlProfile, params: &PulseParams) -> RwaResidual {
    RwaResidual {
        profile: Arc::new(profile.clone()),
        params: *params,
        rate: params.drift_rate(),
    }
}

/// Entrywise defect of `U·G_lab·U* + U'·U* − (A^δ/ε + δ·B_ε)` at `tau`,
/// relative to the largest entry among the terms (≥ 1).
pub fn frame_identity_defect(profile: &ControlProfile, params: &PulseParams, tau: f64) -> f64 {
    let frame = rotating_frame(profile, params);
    let lab = lab_generator(profile, params).sample(tau);
    let u = frame.unitary(tau);
    let du = frame.derivative(tau);
    let lhs = &(&(&u * &lab) * &u.adjoint()) + &(&du * &u.adjoint());
    let slow = rwa_generator_scaled(profile, params.delta)
        .sample(tau)
        .scale_real(1.0 / params.epsilon);
    let rhs = &slow + &rwa_residual(profile, params).sample(tau);
    let scale = lab.max_abs().max(du.max_abs()).max(rhs.max_abs()).max(1.0);
    (&lhs - &rhs).max_abs() / scale
}

/// `G(τ) = −i·H(τ)` for a Hermitian `H` whose entries are trig series.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianSeries {
    dim: usize,
    re: Vec<TrigSeries>,
    im: Vec<TrigSeries>,
}

impl HermitianSeries {
    /// The zero field of dimension `dim`.
    pub fn new(dim: usize) -> Result<Self> {
        if !(crate::smallmat::MIN_DIM..=crate::smallmat::MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} out of range")));
        }
        Ok(Self {
            dim,
            re: vec![TrigSeries::zero(); dim * dim],
            im: vec![TrigSeries::zero(); dim * dim],
        })
    }

    /// Sets `H_jk = re + i·im` (and `H_kj` to its conjugate) for `j ≤ k`.
    /// Diagonal entries must be real.
    pub fn set(&mut self, j: usize, k: usize, re: TrigSeries, im: TrigSeries) -> Result<()> {
        if j > k || k >= self.dim {
            return Err(Error::InvalidArgument(format!(
                "entry ({j}, {k}) is not upper triangular in dimension {}",
                self.dim
            )));
        }
        if j == k && im != TrigSeries::zero() {
            return Err(Error::InvalidArgument(format!(
                "diagonal entry ({j}, {j}) must be real"
            )));
        }
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite coefficient in ({j}, {k})")));
        }
        self.re[j * self.dim + k] = re;
        self.im[j * self.dim + k] = im;
        Ok(())
    }
}

impl Generator for HermitianSeries {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let n = self.dim;
        for j in 0..n {
            for k in j..n {
                let h = c(self.re[j * n + k].value(tau), self.im[j * n + k].value(tau));
                // G = −iH
                out[(j, k)] = c(h.im, -h.re);
                if j != k {
                    out[(k, j)] = c(-h.im, -h.re);
                }
            }
        }
    }

    /// Row-sum bound on `‖H‖`.
    fn freq_bound(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let (a, b) = if j <= k { (j, k) } else { (k, j) };
                        self.re[a * n + b].abs_bound() + self.im[a * n + b].abs_bound()
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn describe(&self) -> String {
        format!("hermitian-series n={}", self.dim)
    }
}

/// One upper-triangular entry `(j, k)`, `j < k`, of an S(α) perturbation:
/// `−(i/ε)·v(τ)·e^{i(βτ/ε^{α+1} + h(τ)/ε)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationEntry {
    pub j: usize,
    pub k: usize,
    pub beta: f64,
    pub v: TrigSeries,
    pub h: TrigSeries,
}

/// Structure of an S(α) family: zero diagonal, one entry per pair `j < k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub dim: usize,
    pub alpha: f64,
    pub entries: Vec<PerturbationEntry>,
}

impl PerturbationSpec {
    /// The two-level residual: β = 4E, v₁₂ = v, h₁₂ = 2φ.
    pub fn rwa_residual(profile: &ControlProfile, energy: f64, alpha: f64) -> Self {
        Self {
            dim: 2,
            alpha,
            entries: vec![PerturbationEntry {
                j: 0,
                k: 1,
                beta: 4.0 * energy,
                v: profile.v_series().clone(),
                h: profile.phi_series().scaled(2.0),
            }],
        }
    }

    /// Same pairs with every envelope set to zero.
    pub fn zeroed(&self) -> Self {
        let mut s = self.clone();
        for e in &mut s.entries {
            e.v = TrigSeries::zero();
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(crate::smallmat::MIN_DIM..=crate::smallmat::MAX_DIM).contains(&self.dim) {
            return Err(Error::InvalidSpec(format!("dimension {} out of range", self.dim)));
        }
        if !self.alpha.is_finite() || self.alpha == 0.0 {
            return Err(Error::InvalidSpec(format!(
                "alpha = {} must be a nonzero real",
                self.alpha
            )));
        }
        let n = self.dim;
        let mut seen = vec![false; n * n];
        for e in &self.entries {
            if e.j >= e.k || e.k >= n {
                return Err(Error::InvalidSpec(format!(
                    "entry ({}, {}) is not strictly upper triangular in dimension {n}",
                    e.j, e.k
                )));
            }
            if seen[e.j * n + e.k] {
                return Err(Error::InvalidSpec(format!("duplicate entry ({}, {})", e.j, e.k)));
            }
            seen[e.j * n + e.k] = true;
            if !(e.beta != 0.0) || !e.beta.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "beta for ({}, {}) must be a nonzero real, got {}",
                    e.j, e.k, e.beta
                )));
            }
            if !e.v.is_finite() || !e.h.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "non-finite coefficient in ({}, {})",
                    e.j, e.k
                )));
            }
        }
        for j in 0..n {
            for k in (j + 1)..n {
                if !seen[j * n + k] {
                    return Err(Error::InvalidSpec(format!("missing entry ({j}, {k})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct CompiledEntry {
    j: usize,
    k: usize,
    rate: f64,
    v: TrigSeries,
    h: TrigSeries,
}

/// Generator sampled from a [`PerturbationSpec`] at fixed ε.
#[derive(Clone, Debug)]
pub struct PerturbationGenerator {
    dim: usize,
    epsilon: f64,
    entries: Vec<CompiledEntry>,
    freq_bound: f64,
    alpha: f64,
}

impl Generator for PerturbationGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        out.as_mut_slice().fill(c(0.0, 0.0));
        self.add_into(tau, out);
    }

    fn add_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let eps = self.epsilon;
        for e in &self.entries {
            let phase = reduced_phase(e.rate, tau, e.h.value(tau) / eps);
            let z = c(0.0, -1.0) * cis(phase) * (e.v.value(tau) / eps);
            out[(e.j, e.k)] += z;
            out[(e.k, e.j)] -= z.conj();
        }
    }

    fn freq_bound(&self) -> f64 {
        self.freq_bound
    }

    fn describe(&self) -> String {
        format!("S(alpha) n={} eps={} alpha={}", self.dim, self.epsilon, self.alpha)
    }
}

pub fn perturbation_from_spec(spec: &PerturbationSpec, epsilon: f64) -> Result<PerturbationGenerator> {
    spec.validate()?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
    }
    let scale = math::powf(epsilon, -(spec.alpha + 1.0));
    let entries: Vec<CompiledEntry> = spec
        .entries
        .iter()
        .map(|e| CompiledEntry {
            j: e.j,
            k: e.k,
            rate: e.beta * scale,
            v: e.v.clone(),
            h: e.h.clone(),
        })
        .collect();
    let beta_max = spec.entries.iter().map(|e| math::abs(e.beta)).fold(0.0, f64::max);
    let dh_max = spec
        .entries
        .iter()
        .map(|e| e.h.derivative().abs_bound())
        .fold(0.0, f64::max);
    Ok(PerturbationGenerator {
        dim: spec.dim,
        epsilon,
        entries,
        freq_bound: beta_max * scale + dh_max / epsilon,
        alpha: spec.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smallmat::eig_hermitian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trig_series_derivative_matches_finite_difference() {
        let s = TrigSeries {
            constant: 0.3,
            linear: -0.7,
            sin: vec![1.0, 0.0, -0.25],
            cos: vec![0.5, 0.2],
        };
        let d = s.derivative();
        for i in 1..50 {
            let t = i as f64 / 50.0;
            let h = 1e-6;
            let fd = (s.value(t + h) - s.value(t - h)) / (2.0 * h);
            assert!((fd - d.value(t)).abs() < 1e-7);
        }
        // angle-addition recurrence against direct evaluation
        let t = 0.37;
        let direct = 0.3 - 0.7 * t + (PI * t).sin() - 0.25 * (3.0 * PI * t).sin()
            + 0.5 * (PI * t).cos()
            + 0.2 * (2.0 * PI * t).cos();
        assert!((s.value(t) - direct).abs() < 1e-14);
    }

    #[test]
    fn profile_invariants() {
        let sine = ControlProfile::sine();
        assert_eq!(sine.phi(0.0), 0.0);
        sine.check_transfer().unwrap();
        let (m, _) = sine.gap_premise_min();
        assert!((m - 0.25).abs() < 1e-12);
        assert!((sine.dphi(0.0) + 1.0).abs() < 1e-15);
        assert!((sine.dphi(1.0) - 1.0).abs() < 1e-15);

        assert!(ControlProfile::flat().check_transfer().is_err());
        ControlProfile::flat().check_gap_premise().unwrap();
        ControlProfile::flat_phase_only().check_gap_premise().unwrap();

        let dead = ControlProfile::new("dead", TrigSeries::zero(), TrigSeries::zero()).unwrap();
        assert!(dead.check_gap_premise().is_err());

        let shifted = TrigSeries {
            constant: 0.1,
            ..TrigSeries::default()
        };
        assert!(ControlProfile::new("bad", TrigSeries::zero(), shifted).is_err());
        assert!(ControlProfile::by_name("sine").is_some());
        assert!(ControlProfile::by_name("nope").is_none());
    }

    #[test]
    fn params_validation() {
        assert!(PulseParams::new(0.0, 1.5, 1.0, 1.0).is_err());
        assert!(PulseParams::new(1.5, 1.5, 1.0, 1.0).is_err());
        assert!(PulseParams::new(0.1, 1.5, 0.0, 1.0).is_err());
        assert!(PulseParams::new(0.1, 1.5, 1.0, -0.1).is_err());
        let p = PulseParams::new(0.1, 0.5, 1.0, 1.0).unwrap();
        assert!(p.regime_warning());
        assert!(!PulseParams::reference().regime_warning());
    }

    #[test]
    fn real_pulse_examples() {
        let sine = ControlProfile::sine();
        let p = PulseParams::reference();
        assert_eq!(real_pulse(&sine, &p).value(0.0), 0.0);

        let unit = ControlProfile::new("unit", TrigSeries::constant(1.0), TrigSeries::zero()).unwrap();
        let p2 = PulseParams::new(0.1, 1.0, 1.0, 1.0).unwrap();
        assert!((real_pulse(&unit, &p2).value(0.0) - 20.0).abs() < 1e-12);

        // 200·cos(1e5 − 100/π), reference via cos(a − b) with a = 1e5 exact
        let b = 100.0 / PI;
        let reference = 200.0 * (1e5f64.cos() * b.cos() + 1e5f64.sin() * b.sin());
        let u = real_pulse(&sine, &p).value(0.5);
        assert!((u - reference).abs() < 1e-8, "u = {u}, reference = {reference}");
        assert!(u.abs() <= 200.0);
    }

    #[test]
    fn real_pulse_is_twice_real_part_of_complex_pulse() {
        let sine = ControlProfile::sine();
        let p = PulseParams::reference();
        let (u, w) = (real_pulse(&sine, &p), complex_pulse(&sine, &p));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let t: f64 = rng.gen();
            assert!((u.value(t) - 2.0 * w.value(t).re).abs() <= 1e-12 * 200.0);
        }
    }

    #[test]
    fn lab_generator_examples() {
        let sine = ControlProfile::sine();
        let p = PulseParams::reference();
        let g = lab_generator(&sine, &p);
        let m = g.sample(0.3);
        // traceless, skew-Hermitian, diagonal magnitude 1e5
        assert!(m.trace().norm() < 1e-9);
        assert!(m.is_skew_hermitian(1e-15));
        assert!((m[(0, 0)].im.abs() - 1e5).abs() < 1e-6);
        let free = lab_generator(&sine, &p.with_delta(0.0));
        for t in [0.1, 0.5, 0.9] {
            let m = free.sample(t);
            assert_eq!(m[(0, 1)], c(0.0, 0.0));
            assert_eq!(m[(1, 0)], c(0.0, 0.0));
        }
        let expected = 2.0 * 1e5 + 1.0 / 0.01 + 2.0 / 0.01;
        assert!((g.freq_bound() - expected).abs() < 1e-6);
    }

    #[test]
    fn complex_generator_examples() {
        let sine = ControlProfile::sine();
        let p = PulseParams::reference();
        let g = complex_generator(&sine, &p);
        assert_eq!(g.sample(0.0)[(0, 1)].norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let t: f64 = rng.gen();
            let m = g.sample(t);
            assert!((m[(0, 1)].norm() - sine.v(t).abs() / p.epsilon).abs() < 1e-10);
            let h = m.scale(c(0.0, 1.0));
            assert!(h.hermitian_defect() <= 1e-15);
        }
    }

    #[test]
    fn rotating_frame_examples() {
        let sine = ControlProfile::sine();
        let p = PulseParams::reference();
        let f = rotating_frame(&sine, &p);
        assert!((&f.unitary(0.0) - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t: f64 = rng.gen();
            let u = f.unitary(t);
            let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
            assert!((det - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn rwa_generator_examples() {
        let sine = ControlProfile::sine();
        let a = rwa_generator(&sine);
        let a0 = a.sample(0.0);
        let want0 = ComplexMatrix::from_diagonal(&[c(0.0, -0.5), c(0.0, 0.5)]);
        assert!((&a0 - &want0).max_abs() < 1e-15);
        let ah = a.sample(0.5);
        let want_half = ComplexMatrix::new2(c(0., 0.), c(0., -1.), c(0., -1.), c(0., 0.));
        assert!((&ah - &want_half).max_abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let t: f64 = rng.gen();
            let h = a.sample(t).scale(c(0.0, 1.0));
            let d = eig_hermitian(&h).unwrap();
            let r = (sine.v(t).powi(2) + sine.dphi(t).powi(2) / 4.0).sqrt();
            assert!((d.eigenvalues[0] + r).abs() < 1e-13);
            assert!((d.eigenvalues[1] - r).abs() < 1e-13);
        }
        assert!((a.freq_bound() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rwa_residual_structure() {
        let sine = ControlProfile::sine();
        let p = PulseParams::reference();
        let b = rwa_residual(&sine, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let t: f64 = rng.gen();
            let m = b.sample(t);
            assert_eq!(m[(0, 0)], c(0.0, 0.0));
            assert_eq!(m[(1, 1)], c(0.0, 0.0));
            assert!((m[(0, 1)].norm() - sine.v(t).abs() / p.epsilon).abs() < 1e-10);
            assert!(m.is_skew_hermitian(1e-15));
        }
    }

    #[test]
    fn frame_identity_is_exact() {
        let sine = ControlProfile::sine();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for params in [
            PulseParams::reference(),
            PulseParams::new(0.08, 1.5, 1.0, 1.0).unwrap(),
            PulseParams::new(0.02, 2.5, 0.7, 0.4).unwrap(),
        ] {
            for _ in 0..1000 {
                let t: f64 = rng.gen();
                let d = frame_identity_defect(&sine, &params, t);
                assert!(d <= 1e-12, "defect {d} at tau {t} for {params:?}");
            }
        }
    }

    #[test]
    fn complex_generator_maps_onto_slow_part() {
        let sine = ControlProfile::sine();
        let p = PulseParams::new(0.05, 1.5, 1.0, 1.0).unwrap();
        let frame = rotating_frame(&sine, &p);
        let g = complex_generator(&sine, &p);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let u = frame.unitary(t);
            let lhs = &(&(&u * &g.sample(t)) * &u.adjoint()) + &(&frame.derivative(t) * &u.adjoint());
            let rhs = rwa_generator(&sine).sample(t).scale_real(1.0 / p.epsilon);
            assert!((&lhs - &rhs).max_abs() <= 1e-12 * p.drift_rate());
        }
    }

    #[test]
    fn perturbation_spec_cases() {
        let sine = ControlProfile::sine();
        let p = PulseParams::reference();
        let spec = PerturbationSpec::rwa_residual(&sine, p.energy, p.alpha);
        let g = perturbation_from_spec(&spec, p.epsilon).unwrap();
        let b = rwa_residual(&sine, &p);
        for i in 0..=200 {
            let t = i as f64 / 200.0;
            let d = (&g.sample(t) - &b.sample(t)).max_abs();
            assert!(d < 1e-8, "specialization mismatch {d} at {t}");
        }
        let z = perturbation_from_spec(&spec.zeroed(), p.epsilon).unwrap();
        assert_eq!(z.sample(0.3).max_abs(), 0.0);

        let mut bad = spec.clone();
        bad.entries[0].beta = 0.0;
        assert!(matches!(perturbation_from_spec(&bad, 0.1), Err(Error::InvalidSpec(_))));
        let mut missing = spec.clone();
        missing.dim = 3;
        assert!(perturbation_from_spec(&missing, 0.1).is_err());
    }

    #[test]
    fn hermitian_series_generator() {
        let mut h = HermitianSeries::new(3).unwrap();
        h.set(0, 0, TrigSeries::constant(0.5), TrigSeries::zero()).unwrap();
        h.set(
            0,
            2,
            TrigSeries {
                sin: vec![0.3],
                ..Default::default()
            },
            TrigSeries::constant(-0.2),
        )
        .unwrap();
        h.set(
            1,
            1,
            TrigSeries {
                linear: -1.0,
                ..Default::default()
            },
            TrigSeries::zero(),
        )
        .unwrap();
        assert!(h.set(1, 1, TrigSeries::zero(), TrigSeries::constant(1.0)).is_err());
        assert!(h.set(2, 0, TrigSeries::zero(), TrigSeries::zero()).is_err());
        let m = h.sample(0.5);
        assert!(m.is_skew_hermitian(1e-15));
        assert!((m[(0, 2)] - c(0.0, -1.0) * c(0.3, -0.2)).norm() < 1e-15);
        assert!((m[(1, 1)] - c(0.0, 0.5)).norm() < 1e-15);
        let bound = h.freq_bound();
        for i in 0..=20 {
            assert!(h.sample(i as f64 / 20.0).norm_op() <= bound + 1e-12);
        }
    }

    #[test]
    fn three_level_spec_is_skew_hermitian() {
        let spec = PerturbationSpec {
            dim: 3,
            alpha: 1.5,
            entries: vec![
                PerturbationEntry {
                    j: 0,
                    k: 1,
                    beta: 4.0,
                    v: TrigSeries {
                        sin: vec![1.0],
                        ..Default::default()
                    },
                    h: TrigSeries {
                        sin: vec![0.3],
                        ..Default::default()
                    },
                },
                PerturbationEntry {
                    j: 0,
                    k: 2,
                    beta: -2.5,
                    v: TrigSeries::constant(0.5),
                    h: TrigSeries::zero(),
                },
                PerturbationEntry {
                    j: 1,
                    k: 2,
                    beta: 3.0,
                    v: TrigSeries {
                        cos: vec![0.7],
                        ..Default::default()
                    },
                    h: TrigSeries {
                        linear: 1.0,
                        ..Default::default()
                    },
                },
            ],
        };
        let g = perturbation_from_spec(&spec, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let m = g.sample(rng.gen());
            assert!(m.is_skew_hermitian(1e-15));
            for j in 0..3 {
                assert_eq!(m[(j, j)], c(0.0, 0.0));
            }
        }
    }
}
