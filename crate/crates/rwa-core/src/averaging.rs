//! Averaging oracles: oscillatory integrals, conjugated perturbations,
//! flow closeness and log-log slope certification.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::adiabatic::EigenFrame;
use crate::controls::{perturbation_from_spec, PerturbationGenerator, PerturbationSpec};
use crate::error::{Error, Result};
use crate::math;
use crate::phase::reduced_phase;
use crate::schrodinger::{flow, flow_path_steps, Generator, StepPolicy, Sum};
use crate::smallmat::{c, cis, ComplexMatrix, C64};

/// Tolerance subtracted from expected exponents in every scaling verdict.
pub const SLOPE_TOL: f64 = 0.2;
/// Errors at or below `FLOOR_FACTOR × integrator tolerance` are not fitted.
pub const FLOOR_FACTOR: f64 = 10.0;
pub const PANELS_PER_PERIOD: f64 = 16.0;
pub const DEFAULT_MAX_PANELS: u64 = 50_000_000;

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// `∫₀^τ a(s)·e^{i(βs/ε^{α+1} + h(s)/ε)} ds` by composite Gauss–Legendre
/// (order 5) on panels of width at most `2π·ε^{α+1}/(16|β|)`.
pub fn osc_integral<A, H>(a: A, h: H, beta: f64, alpha: f64, epsilon: f64, tau: f64) -> Result<C64>
where
    A: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    osc_integral_path(a, h, beta, alpha, epsilon, tau, DEFAULT_MAX_PANELS).map(|p| p.value)
}

/// Value of an oscillatory integral plus the running maximum of its partial
/// integrals over panel endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscIntegral {
    pub value: C64,
    pub sup_partial: f64,
    pub panels: u64,
}

/// [`osc_integral`] with an explicit panel cap, also tracking
/// `max_{s ≤ τ} |∫₀^s …|` over panel endpoints.
pub fn osc_integral_path<A, H>(
    a: A,
    h: H,
    beta: f64,
    alpha: f64,
    epsilon: f64,
    tau: f64,
    max_panels: u64,
) -> Result<OscIntegral>
where
    A: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau = {tau} outside [0, 1]")));
    }
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be a nonzero real")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon = {epsilon}, alpha = {alpha} must be finite with epsilon > 0"
        )));
    }
    if tau == 0.0 {
        return Ok(OscIntegral {
            value: c(0.0, 0.0),
            sup_partial: 0.0,
            panels: 0,
        });
    }
    let scale = math::powf(epsilon, alpha + 1.0);
    let rate = beta / scale;
    let width = crate::phase::TWO_PI * scale / (PANELS_PER_PERIOD * math::abs(beta));
    let panels_f = math::ceil(tau / width);
    if !(panels_f <= max_panels as f64) {
        return Err(Error::ResourceCap {
            what: "panels",
            needed: if panels_f.is_finite() {
                panels_f as u64
            } else {
                u64::MAX
            },
            cap: max_panels,
            context: format!("osc_integral beta={beta} alpha={alpha} eps={epsilon}"),
        });
    }
    let panels = (panels_f as u64).max(1);
    let w = tau / panels as f64;
    let mut acc = c(0.0, 0.0);
    let mut sup: f64 = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * w;
        let mut part = c(0.0, 0.0);
        for (x, wt) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            let s = mid + 0.5 * w * x;
            let phase = reduced_phase(rate, s, h(s) / epsilon);
            part += cis(phase) * (wt * a(s));
        }
        acc += part * (0.5 * w);
        sup = sup.max(acc.norm());
    }
    Ok(OscIntegral {
        value: acc,
        sup_partial: sup,
        panels,
    })
}

/// `P ≡ Id`, `Γ ≡ 0`.
#[derive(Clone, Copy, Debug)]
pub struct IdentityFrame(pub usize);

impl EigenFrame for IdentityFrame {
    fn dim(&self) -> usize {
        self.0
    }

    fn frame_into(&self, _tau: f64, p: &mut ComplexMatrix, gamma: &mut [f64]) {
        let n = self.0;
        let m = p.as_mut_slice();
        m.fill(c(0.0, 0.0));
        for j in 0..n {
            m[j * n + j] = c(1.0, 0.0);
        }
        gamma.fill(0.0);
    }

    fn gamma_rate_bound(&self) -> f64 {
        0.0
    }
}

/// `M(τ) = e^{iΓ(τ)/ε}·P*(τ)·B(τ)·P(τ)·e^{−iΓ(τ)/ε}`.
pub struct ConjugatedPerturbation<F, B> {
    frame: F,
    b: B,
    epsilon: f64,
}

impl<F: EigenFrame, B: Generator> ConjugatedPerturbation<F, B> {
    pub fn new(frame: F, b: B, epsilon: f64) -> Result<Self> {
        if frame.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: frame.dim(),
                got: b.dim(),
            });
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
        }
        Ok(Self { frame, b, epsilon })
    }

    pub fn frame(&self) -> &F {
        &self.frame
    }

    pub fn perturbation(&self) -> &B {
        &self.b
    }
}

impl<F: EigenFrame, B: Generator> Generator for ConjugatedPerturbation<F, B> {
    fn dim(&self) -> usize {
        self.b.dim()
    }

    fn sample_into(&self, tau: f64, out: &mut ComplexMatrix) {
        let n = self.dim();
        let mut p = ComplexMatrix::zeros(n);
        let mut gamma = [0.0; crate::smallmat::MAX_DIM];
        self.frame.frame_into(tau, &mut p, &mut gamma[..n]);
        let mut b = ComplexMatrix::zeros(n);
        self.b.sample_into(tau, &mut b);
        let mut bp = ComplexMatrix::zeros(n);
        ComplexMatrix::mul_into(&b, &p, &mut bp);
        let pa = p.adjoint();
        ComplexMatrix::mul_into(&pa, &bp, out);
        let inv = 1.0 / self.epsilon;
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    out[(j, k)] *= cis((gamma[j] - gamma[k]) * inv);
                }
            }
        }
    }

    fn freq_bound(&self) -> f64 {
        self.b.freq_bound() + self.frame.gamma_rate_bound() / self.epsilon
    }

    fn describe(&self) -> String {
        format!("M[{}; eps={}]", self.b.describe(), self.epsilon)
    }
}

/// `M(P, Γ, ε)` for an S(α) spec.
pub fn conjugated_perturbation<F: EigenFrame>(
    frame: F,
    spec: &PerturbationSpec,
    epsilon: f64,
) -> Result<ConjugatedPerturbation<F, PerturbationGenerator>> {
    let b = perturbation_from_spec(spec, epsilon)?;
    ConjugatedPerturbation::new(frame, b, epsilon)
}

/// `‖Flow(G)(1) − Id‖` in operator norm.
pub fn flow_deviation_from_identity<G: Generator + ?Sized>(g: &G, policy: &StepPolicy) -> Result<f64> {
    let f = flow(g, 1.0, policy)?;
    Ok((&f - &ComplexMatrix::identity(g.dim())).norm_op())
}

/// Least-squares line through `(ln ε, ln error)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// `(ε, error)` pairs with an optional fitted power law.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    /// Sorted by strictly decreasing ε.
    pub pairs: Vec<(f64, f64)>,
    /// Per pair: error at or below `floor`, excluded from the fit.
    pub excluded: Vec<bool>,
    pub floor: f64,
    pub fit: Option<LineFit>,
    /// Minimum slope for a pass, when a verdict applies.
    pub min_slope: Option<f64>,
}

impl ScalingReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn below_floor(&self) -> bool {
        self.excluded.iter().any(|&x| x)
    }

    pub fn usable(&self) -> usize {
        self.excluded.iter().filter(|&&x| !x).count()
    }

    /// `Some(pass)` when both a fit and a threshold exist.
    pub fn verdict(&self) -> Option<bool> {
        match (self.fit, self.min_slope) {
            (Some(f), Some(m)) => Some(f.slope >= m),
            _ => None,
        }
    }

    pub fn with_min_slope(mut self, min_slope: f64) -> Self {
        self.min_slope = Some(min_slope);
        self
    }

    /// Errors are nonincreasing as ε decreases.
    pub fn monotone_in_epsilon(&self) -> bool {
        self.pairs.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

fn line_fit(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = points
            .iter()
            .map(|p| {
                let r = p.1 - (intercept + slope * p.0);
                r * r
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Builds a report; pairs with `error <= floor` are excluded. The fit is
/// absent when fewer than three usable pairs remain.
pub fn scaling_report(pairs: &[(f64, f64)], floor: f64) -> Result<ScalingReport> {
    let mut sorted = pairs.to_vec();
    for &(eps, err) in &sorted {
        if !(eps > 0.0) || !eps.is_finite() || !(err >= 0.0) || !err.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid pair ({eps}, {err})")));
        }
    }
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("duplicate epsilon".into()));
    }
    let excluded: Vec<bool> = sorted.iter().map(|p| !(p.1 > floor)).collect();
    let usable: Vec<(f64, f64)> = sorted
        .iter()
        .zip(&excluded)
        .filter(|(_, &x)| !x)
        .map(|(p, _)| (math::ln(p.0), math::ln(p.1)))
        .collect();
    let fit = if usable.len() >= 3 {
        Some(line_fit(&usable))
    } else {
        None
    };
    Ok(ScalingReport {
        pairs: sorted,
        excluded,
        floor,
        fit,
        min_slope: None,
    })
}

/// Log-log least squares over pairs with positive error; fails with fewer
/// than three of them.
pub fn fit_slope(pairs: &[(f64, f64)]) -> Result<ScalingReport> {
    fit_slope_with_floor(pairs, 0.0)
}

pub fn fit_slope_with_floor(pairs: &[(f64, f64)], floor: f64) -> Result<ScalingReport> {
    let report = scaling_report(pairs, floor)?;
    if report.fit.is_none() {
        return Err(Error::InsufficientData {
            usable: report.usable(),
        });
    }
    Ok(report)
}

/// Sup-over-τ distance between two flows with its noise floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowGap {
    /// `max_τ ‖Flow(A+B)(τ) − Flow(A)(τ)‖` over stored points.
    pub sup: f64,
    /// `FLOOR_FACTOR ×` integrator tolerance.
    pub floor: f64,
    pub steps: u64,
}

/// Compares the flows of `A + B` and `A` on one shared grid.
///
/// The integrator tolerance applies to the measured difference itself: with
/// `policy.richardson_check` both flows are repeated at half the step and the
/// tolerance is `(4/3)·max‖Δ_h − Δ_{h/2}‖`; otherwise it is `1e-12·√steps`.
/// Errors shared by both flows (such as phase errors of a common fast drift)
/// cancel in `Δ` and do not inflate the floor.
pub fn flow_gap<A, B>(a: &A, b: &B, policy: &StepPolicy) -> Result<FlowGap>
where
    A: Generator + ?Sized,
    B: Generator + ?Sized,
{
    policy.validate()?;
    let full = Sum::new(a, b)?;
    let steps = policy.step_count(full.freq_bound(), 1.0)?;
    let work = if policy.richardson_check {
        steps.saturating_mul(2)
    } else {
        steps
    };
    if work > policy.max_steps {
        return Err(Error::ResourceCap {
            what: "steps",
            needed: work,
            cap: policy.max_steps,
            context: full.describe(),
        });
    }
    let stride = crate::schrodinger::auto_stride(steps);
    let diffs = |steps: u64, stride: usize| -> Result<Vec<ComplexMatrix>> {
        let (_, perturbed) = flow_path_steps(&full, 1.0, steps, stride)?;
        let (_, plain) = flow_path_steps(a, 1.0, steps, stride)?;
        Ok(perturbed.iter().zip(&plain).map(|(x, y)| x - y).collect())
    };
    let coarse = diffs(steps, stride)?;
    let sup = coarse.iter().map(ComplexMatrix::norm_op).fold(0.0, f64::max);
    let tol = if policy.richardson_check {
        let fine = diffs(steps * 2, stride * 2)?;
        let worst = coarse
            .iter()
            .zip(&fine)
            .map(|(x, y)| (x - y).norm_op())
            .fold(0.0, f64::max);
        worst * 4.0 / 3.0
    } else {
        1e-12 * math::sqrt(steps as f64)
    };
    Ok(FlowGap {
        sup,
        floor: FLOOR_FACTOR * tol,
        steps,
    })
}

/// For each ε, `sup_τ ‖Flow(A+B_ε)(τ) − Flow(A)(τ)‖`, fitted in log-log.
/// The verdict requires a slope of at least `min(k_expected, 1) − 0.2`.
pub fn averaged_flow_check<A, B, F>(
    a: &A,
    b_family: F,
    k_expected: f64,
    epsilons: &[f64],
    policy: &StepPolicy,
) -> Result<ScalingReport>
where
    A: Generator + ?Sized,
    B: Generator,
    F: Fn(f64) -> Result<B>,
{
    if epsilons.len() < 3 {
        return Err(Error::InsufficientData { usable: epsilons.len() });
    }
    let mut pairs = Vec::with_capacity(epsilons.len());
    let mut floor: f64 = 0.0;
    for &eps in epsilons {
        let b = b_family(eps)?;
        let gap = flow_gap(a, &b, policy)?;
        floor = floor.max(gap.floor);
        pairs.push((eps, gap.sup));
    }
    Ok(scaling_report(&pairs, floor)?.with_min_slope(k_expected.min(1.0) - SLOPE_TOL))
}

/// Sup over panel endpoints of `|∫₀^s M_jk|` for every entry of a
/// conjugated S(α) perturbation, sampled on a uniform grid of `points`
/// intervals per unit τ with trapezoid sums.
pub fn conjugated_integral_sup<F: EigenFrame, B: Generator>(
    m: &ConjugatedPerturbation<F, B>,
    points: u64,
) -> Result<f64> {
    if points == 0 {
        return Err(Error::InvalidArgument("points must be positive".into()));
    }
    let n = m.dim();
    let h = 1.0 / points as f64;
    let mut acc = vec![c(0.0, 0.0); n * n];
    let mut prev = m.sample(0.0);
    let mut cur = ComplexMatrix::zeros(n);
    let mut sup: f64 = 0.0;
    for k in 1..=points {
        m.sample_into(k as f64 * h, &mut cur);
        for (a, (x, y)) in acc.iter_mut().zip(prev.as_slice().iter().zip(cur.as_slice())) {
            *a += (x + y) * (0.5 * h);
        }
        sup = sup.max(ComplexMatrix::from_row_major(n, acc.clone())?.norm_op());
        core::mem::swap(&mut prev, &mut cur);
    }
    Ok(sup)
}
