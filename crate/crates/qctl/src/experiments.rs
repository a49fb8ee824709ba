//! The configured experiments. Each returns rows, measurements and verdicts
//! that can be recomputed from the rows alone.

use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rwa_core::adiabatic::{
    adiabatic_reference_flow, diagonal_drift, spectral_path, uniform_gap_check, AdiabaticReference,
};
use rwa_core::averaging::{
    conjugated_perturbation, flow_gap, osc_integral_path, scaling_report, ScalingReport, DEFAULT_MAX_PANELS,
    FLOOR_FACTOR, SLOPE_TOL,
};
use rwa_core::controls::{
    complex_generator, frame_identity_defect, lab_generator, lab_generator_detuned, rotating_frame,
    rwa_generator_scaled, rwa_residual, HermitianSeries, PerturbationSpec, PulseParams, TrigSeries,
};
use rwa_core::schrodinger::{
    auto_stride, flow_path_steps, propagate, propagate_steps, propagate_with_count, variation_check, Generator, Scaled,
    StepPolicy, Sum, Trajectory, ZeroGenerator,
};
use rwa_core::{dist_up_to_phase, fidelity, ComplexMatrix, QuantumState};

use crate::config::{Config, Experiment};
use crate::plot::Plot;
use crate::runner::par_map;
use crate::RunError;

/// One pass/fail judgement. `pass` is `None` when the data admit no verdict
/// (exploratory regime, too few usable points).
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: Option<bool>,
    pub detail: String,
}

impl Verdict {
    fn new(name: impl Into<String>, pass: Option<bool>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub experiment: Experiment,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    /// Named measurements in a fixed order.
    pub summary: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
    pub plot: Plot,
    /// Interrupted before every grid point completed.
    pub partial: bool,
}

impl ExperimentResult {
    fn new(experiment: Experiment, columns: Vec<&'static str>) -> Self {
        Self {
            experiment,
            columns,
            rows: Vec::new(),
            summary: Vec::new(),
            verdicts: Vec::new(),
            plot: Plot::default(),
            partial: false,
        }
    }

    fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    fn verdict(&mut self, name: impl Into<String>, pass: Option<bool>, detail: impl Into<String>) {
        self.verdicts.push(Verdict::new(name, pass, detail));
    }

    /// No failed verdict and not partial.
    pub fn passed(&self) -> bool {
        !self.partial && self.verdicts.iter().all(|v| v.pass != Some(false))
    }

    pub fn verdict_named(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn run(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    match cfg.experiment {
        Experiment::Transfer => run_transfer(cfg),
        Experiment::RwaGap => run_rwa_gap(cfg, cancel),
        Experiment::Scaling => run_scaling(cfg, cancel),
        Experiment::DeltaSweep => run_delta_sweep(cfg, cancel),
        Experiment::ESweep => run_e_sweep(cfg, cancel),
        Experiment::LemmaFast => run_lemma_fast(cfg, cancel),
        Experiment::KillOscillations => run_kill_oscillations(cfg, cancel),
        Experiment::FrameCheck => run_frame_check(cfg),
        Experiment::VariationCheck => run_variation_check(cfg, cancel),
        Experiment::AdiabaticOrder => run_adiabatic_order(cfg, cancel),
    }
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

/// Grid value as a short key: `0.04` rather than `0.04000000000000001`.
fn short(x: f64) -> f64 {
    format!("{x:.12e}").parse().expect("formatted float parses")
}

fn e(n: usize, k: usize) -> QuantumState {
    QuantumState::basis(n, k).expect("basis index in range")
}

fn params(cfg: &Config) -> Result<PulseParams, RunError> {
    Ok(PulseParams::new(
        cfg.epsilon0(),
        cfg.alpha0(),
        cfg.energy0(),
        cfg.delta0(),
    )?)
}

fn stride_for(cfg: &Config, steps: u64) -> usize {
    cfg.stride.unwrap_or_else(|| auto_stride(steps))
}

fn check_cap(policy: &StepPolicy, steps: u64, context: String) -> Result<(), RunError> {
    let work = if policy.richardson_check {
        steps.saturating_mul(2)
    } else {
        steps
    };
    if work > policy.max_steps {
        return Err(rwa_core::Error::ResourceCap {
            what: "steps",
            needed: work,
            cap: policy.max_steps,
            context,
        }
        .into());
    }
    Ok(())
}

fn richardson_or_floor(
    policy: &StepPolicy,
    steps: u64,
    fine_diff: impl FnOnce() -> Result<f64, RunError>,
) -> Result<f64, RunError> {
    if policy.richardson_check {
        Ok(fine_diff()? * 4.0 / 3.0)
    } else {
        Ok(1e-12 * (steps as f64).sqrt())
    }
}

/// Slope verdict for an expected exponent `k`; `None` outside `α > 1`.
fn slope_verdict(report: &ScalingReport, min_slope: Option<f64>) -> (Option<bool>, String) {
    match (report.slope(), min_slope) {
        (_, None) => (None, "exploratory: no threshold applies".into()),
        (None, Some(m)) => (
            None,
            format!(
                "inconclusive: {} usable points above floor {} (need 3), threshold {m}",
                report.usable(),
                sci(report.floor)
            ),
        ),
        (Some(s), Some(m)) => (Some(s >= m), format!("slope {s:.4} >= {m:.4}")),
    }
}

fn report_notes(res: &mut ExperimentResult, key: &str, report: &ScalingReport) {
    res.note(
        format!("{key}.slope"),
        report.slope().map_or("none".into(), |s| format!("{s:.6}")),
    );
    res.note(
        format!("{key}.r_squared"),
        report.fit.map_or("none".into(), |f| format!("{:.6}", f.r_squared)),
    );
    res.note(format!("{key}.floor"), sci(report.floor));
    res.note(format!("{key}.usable"), report.usable());
    res.note(format!("{key}.below_floor"), report.below_floor());
    res.note(format!("{key}.monotone"), report.monotone_in_epsilon());
}

fn max_jump(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

fn run_transfer(cfg: &Config) -> Result<ExperimentResult, RunError> {
    let p = params(cfg)?;
    cfg.profile.check_gap_premise()?;
    let mut res = ExperimentResult::new(
        Experiment::Transfer,
        vec!["tau", "re_psi0", "im_psi0", "re_psi1", "im_psi1", "fidelity_e2"],
    );
    if let Err(err) = cfg.profile.check_transfer() {
        res.note("warning.profile", err);
    }
    let g = lab_generator(&cfg.profile, &p);
    let steps = cfg.policy.step_count(g.freq_bound(), 1.0)?;
    let traj = propagate_with_count(&g, &e(2, 0), 1.0, &cfg.policy, steps, stride_for(cfg, steps))?;
    let target = e(2, 1);
    let mut fid = Vec::with_capacity(traj.states.len());
    for (tau, psi) in traj.grid.iter().zip(&traj.states) {
        let a = psi.amplitudes();
        let f = fidelity(psi, &target)?;
        fid.push(f);
        res.rows.push(vec![*tau, a[0].re, a[0].im, a[1].re, a[1].im, f]);
    }
    let final_fid = *fid.last().expect("nonempty");
    let dist = dist_up_to_phase(traj.final_state(), &target)?;
    let drift = traj.max_norm_drift();
    let jump = max_jump(&fid);
    res.note("steps", traj.steps);
    res.note("step", sci(traj.step));
    res.note("stored_points", traj.grid.len());
    res.note("final_fidelity", format!("{final_fid:.9}"));
    res.note("final_dist_e2", sci(dist));
    res.note("max_norm_drift", sci(drift));
    res.note("max_fidelity_jump", sci(jump));
    res.note("richardson_estimate", traj.error_estimate.map_or("none".into(), sci));
    let c = &cfg.check;
    res.verdict(
        "final_fidelity",
        Some(final_fid >= c.min_fidelity),
        format!("{final_fid:.6} >= {}", c.min_fidelity),
    );
    res.verdict(
        "norm_preservation",
        Some(drift <= c.norm_tolerance),
        format!("{} <= {}", sci(drift), sci(c.norm_tolerance)),
    );
    res.verdict(
        "fidelity_continuity",
        Some(jump <= c.max_jump),
        format!("{} <= {}", sci(jump), c.max_jump),
    );
    res.plot = Plot::new(format!("Fidelity with e2 ({})", p.tag()), "tau", "|<psi, e2>|^2")
        .line(cfg.profile.name(), traj.grid.iter().copied().zip(fid).collect());
    Ok(res)
}

struct GapRun {
    eps: f64,
    grid: Vec<f64>,
    sq: Vec<f64>,
    floor: f64,
    steps: u64,
}

fn run_rwa_gap(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    let base = params(&Config {
        epsilon: vec![cfg.epsilon0()],
        ..cfg.clone()
    })?;
    cfg.profile.check_gap_premise()?;
    let policy = cfg.policy;
    let gathered = par_map(cfg.threads, &cfg.epsilon, cancel, |&eps| {
        let p = base.with_epsilon(eps);
        let lab = lab_generator(&cfg.profile, &p);
        let cx = complex_generator(&cfg.profile, &p);
        let steps = policy.step_count(lab.freq_bound().max(cx.freq_bound()), 1.0)?;
        check_cap(&policy, steps, format!("rwa-gap {}", p.tag()))?;
        let stride = stride_for(cfg, steps);
        let psi0 = e(2, 0);
        let run_pair = |steps: u64, stride: usize| -> Result<(Trajectory, Trajectory), RunError> {
            Ok((
                propagate_steps(&lab, &psi0, 1.0, steps, stride)?,
                propagate_steps(&cx, &psi0, 1.0, steps, stride)?,
            ))
        };
        let (a, b) = run_pair(steps, stride)?;
        let diffs: Vec<Vec<rwa_core::C64>> = a
            .states
            .iter()
            .zip(&b.states)
            .map(|(x, y)| x.amplitudes().iter().zip(y.amplitudes()).map(|(u, v)| u - v).collect())
            .collect();
        let tol = richardson_or_floor(&policy, steps, || {
            let (a2, b2) = run_pair(steps * 2, stride * 2)?;
            // The estimate targets the reported norm; a phase error shared
            // by both runs rotates the difference without changing it.
            Ok(diffs
                .iter()
                .zip(a2.states.iter().zip(&b2.states))
                .map(|(d, (x, y))| {
                    let coarse = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    (coarse - x.distance(y).unwrap_or(f64::INFINITY)).abs()
                })
                .fold(0.0, f64::max))
        })?;
        Ok(GapRun {
            eps,
            grid: a.grid,
            sq: diffs.iter().map(|d| d.iter().map(|z| z.norm_sqr()).sum()).collect(),
            floor: FLOOR_FACTOR * tol,
            steps,
        })
    })?;
    let mut res = ExperimentResult::new(Experiment::RwaGap, vec!["epsilon", "tau", "sq_diff", "floor"]);
    res.partial = gathered.partial();
    let mut pairs = Vec::new();
    let mut floor: f64 = 0.0;
    let mut plot = Plot::new(
        format!(
            "RWA gap |psi - psi_rwa|^2 (alpha={}, E={})",
            cfg.alpha0(),
            cfg.energy0()
        ),
        "tau",
        "squared norm difference",
    );
    for r in gathered.completed() {
        for (t, s) in r.grid.iter().zip(&r.sq) {
            res.rows.push(vec![r.eps, *t, *s, r.floor]);
        }
        let sup = r.sq.iter().copied().fold(0.0, f64::max).sqrt();
        res.note(format!("eps={}.sup_diff", short(r.eps)), sci(sup));
        res.note(format!("eps={}.floor", short(r.eps)), sci(r.floor));
        res.note(format!("eps={}.steps", short(r.eps)), r.steps);
        pairs.push((r.eps, sup));
        floor = floor.max(r.floor);
        plot = plot.line(
            format!("eps={}", short(r.eps)),
            r.grid.iter().copied().zip(r.sq.iter().copied()).collect(),
        );
    }
    res.plot = plot;
    let alpha = cfg.alpha0();
    if pairs.len() < 2 {
        res.note("fit", "single epsilon: curve only");
        return Ok(res);
    }
    let report = scaling_report(&pairs, floor)?;
    report_notes(&mut res, "fit", &report);
    let expected = (alpha - 1.0).min(1.0);
    res.note("expected_exponent", expected);
    let min_slope = (alpha > 1.0).then(|| cfg.check.min_slope.unwrap_or(expected - SLOPE_TOL));
    let (pass, detail) = slope_verdict(&report, min_slope);
    res.verdict("rwa_exponent", pass, detail);
    Ok(res)
}

/// Slow generator, either the two-level `A^δ` or the configured n-level one.
fn slow_generator(cfg: &Config) -> Arc<dyn Generator> {
    match &cfg.system {
        Some(s) => Arc::new(s.clone()) as Arc<dyn Generator>,
        None => Arc::new(rwa_generator_scaled(&cfg.profile, cfg.delta0())),
    }
}

fn perturbation_spec(cfg: &Config, alpha: f64) -> Result<PerturbationSpec, RunError> {
    let spec = match (&cfg.perturbation, &cfg.system) {
        (Some(entries), system) => PerturbationSpec {
            dim: system.as_ref().map_or(2, |s| s.dim()),
            alpha,
            entries: entries.clone(),
        },
        (None, _) => {
            let mut s = PerturbationSpec::rwa_residual(&cfg.profile, cfg.energy0(), alpha);
            for entry in &mut s.entries {
                entry.v = entry.v.scaled(cfg.delta0());
            }
            s
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn run_scaling(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    let a = slow_generator(cfg);
    let specs: Vec<PerturbationSpec> = cfg
        .alpha
        .iter()
        .map(|&al| perturbation_spec(cfg, al))
        .collect::<Result<_, _>>()?;
    let items: Vec<(usize, f64)> = (0..cfg.alpha.len())
        .flat_map(|i| cfg.epsilon.iter().map(move |&eps| (i, eps)))
        .collect();
    let gathered = par_map(cfg.threads, &items, cancel, |&(i, eps)| {
        let slow = Scaled::new(a.clone(), 1.0 / eps);
        let b = rwa_core::controls::perturbation_from_spec(&specs[i], eps)?;
        Ok((i, eps, flow_gap(&slow, &b, &cfg.policy)?))
    })?;
    let mut res = ExperimentResult::new(
        Experiment::Scaling,
        vec!["alpha", "epsilon", "sup_error", "floor", "steps"],
    );
    res.partial = gathered.partial();
    for (i, eps, gap) in gathered.completed() {
        res.rows
            .push(vec![cfg.alpha[*i], *eps, gap.sup, gap.floor, gap.steps as f64]);
    }
    let mut plot = Plot::new("Perturbed vs unperturbed rotating-frame flow", "epsilon", "sup error").log_log();
    for (i, &alpha) in cfg.alpha.iter().enumerate() {
        let mine: Vec<&(usize, f64, rwa_core::averaging::FlowGap)> =
            gathered.completed().filter(|r| r.0 == i).collect();
        let pairs: Vec<(f64, f64)> = mine.iter().map(|r| (r.1, r.2.sup)).collect();
        let floor = mine.iter().map(|r| r.2.floor).fold(0.0, f64::max);
        let key = format!("alpha={}", short(alpha));
        let expected = (alpha - 1.0).min(1.0);
        res.note(format!("{key}.expected_exponent"), expected);
        plot = plot.markers(key.clone(), pairs.clone());
        if pairs.len() < 2 {
            continue;
        }
        let report = scaling_report(&pairs, floor)?;
        report_notes(&mut res, &key, &report);
        let min_slope = (alpha > 1.0).then(|| cfg.check.min_slope.unwrap_or(expected - SLOPE_TOL));
        let (pass, detail) = slope_verdict(&report, min_slope);
        res.verdict(format!("drive_exponent.{key}"), pass, detail);
    }
    res.plot = plot;
    Ok(res)
}

fn final_fidelity<G: Generator>(g: &G, policy: &StepPolicy) -> Result<(f64, Option<f64>), RunError> {
    let steps = policy.step_count(g.freq_bound(), 1.0)?;
    let traj = propagate_with_count(g, &e(2, 0), 1.0, policy, steps, steps as usize)?;
    Ok((fidelity(traj.final_state(), &e(2, 1))?, traj.error_estimate))
}

fn run_delta_sweep(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    let base = params(&Config {
        delta: vec![1.0],
        ..cfg.clone()
    })?;
    let (a, b) = cfg.check.window;
    let inside = |d: f64| d >= a - 1e-12 && d <= b + 1e-12;
    let window: Vec<f64> = cfg.delta.iter().copied().filter(|&d| inside(d)).collect();
    if window.is_empty() {
        return Err(RunError::Config(format!(
            "delta-sweep: no grid point inside the window [{a}, {b}]"
        )));
    }
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = window.iter().copied().fold(0.0, f64::max);
    let mut ugap_grid = window.clone();
    for end in [lo, hi] {
        if !ugap_grid.contains(&end) {
            ugap_grid.push(end);
        }
    }
    let min_gap = uniform_gap_check(
        |d| rwa_generator_scaled(&cfg.profile, d),
        &ugap_grid,
        cfg.check.spectral_points,
        cfg.check.gap_floor,
    )?;
    let gathered = par_map(cfg.threads, &cfg.delta, cancel, |&d| {
        let g = lab_generator(&cfg.profile, &base.with_delta(d));
        Ok((d, final_fidelity(&g, &cfg.policy)?))
    })?;
    let mut res = ExperimentResult::new(Experiment::DeltaSweep, vec!["delta", "fidelity", "in_window"]);
    res.partial = gathered.partial();
    let mut worst = (f64::INFINITY, f64::NAN);
    let mut worst_err: f64 = 0.0;
    for (d, (f, err)) in gathered.completed() {
        let w = inside(*d);
        res.rows.push(vec![*d, *f, if w { 1.0 } else { 0.0 }]);
        if w {
            if *f < worst.0 {
                worst = (*f, *d);
            }
            worst_err = worst_err.max(err.unwrap_or(0.0));
        }
    }
    res.note("ugap_min_gap", format!("{min_gap:.9}"));
    res.note("ugap_floor", cfg.check.gap_floor);
    res.note("window", format!("{a},{b}"));
    res.note("window_points", window.len());
    res.note("exploratory_points", cfg.delta.len() - window.len());
    res.note("min_fidelity_window", format!("{:.9}", worst.0));
    res.note("argmin_delta", worst.1);
    res.note("max_richardson_estimate", sci(worst_err));
    let pass = worst.0.is_finite().then_some(worst.0 >= cfg.check.min_fidelity);
    res.verdict(
        "ensemble_fidelity",
        pass,
        format!("min over [{a}, {b}] {:.6} >= {}", worst.0, cfg.check.min_fidelity),
    );
    res.plot = Plot::new(
        format!("Final fidelity vs amplitude factor ({})", base.with_delta(1.0).tag()),
        "delta",
        "|<psi(1), e2>|^2",
    )
    .line("fidelity", res.rows.iter().map(|r| (r[0], r[1])).collect());
    Ok(res)
}

fn run_e_sweep(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    let base = params(&Config {
        energy: vec![1.0],
        ..cfg.clone()
    })?;
    let carrier = cfg.check.carrier_energy;
    let gathered = par_map(cfg.threads, &cfg.energy, cancel, |&en| {
        let g = lab_generator_detuned(&cfg.profile, &base.with_energy(en), carrier);
        Ok((en, final_fidelity(&g, &cfg.policy)?.0))
    })?;
    let mut res = ExperimentResult::new(Experiment::ESweep, vec!["E", "fidelity"]);
    res.partial = gathered.partial();
    for (en, f) in gathered.completed() {
        res.rows.push(vec![*en, *f]);
    }
    let c = &cfg.check;
    let at_carrier = res.rows.iter().find(|r| (r[0] - carrier).abs() <= 1e-12).map(|r| r[1]);
    let robust_reach = res
        .rows
        .iter()
        .filter(|r| r[1] >= c.detuned_max_fidelity)
        .map(|r| (r[0] - carrier).abs())
        .fold(0.0, f64::max);
    let detuned: Vec<f64> = res
        .rows
        .iter()
        .filter(|r| ((r[0] - carrier).abs() - c.detuning).abs() <= 1e-9)
        .map(|r| r[1])
        .collect();
    res.note("carrier_energy", carrier);
    res.note(
        "fidelity_at_carrier",
        at_carrier.map_or("none".into(), |f| format!("{f:.9}")),
    );
    res.note(
        "max_detuning_with_fidelity_at_least",
        format!("{} (threshold {})", robust_reach, c.detuned_max_fidelity),
    );
    res.note("symmetry_about_carrier", "not asserted");
    res.verdict(
        "fidelity_at_carrier",
        at_carrier.map(|f| f >= c.min_fidelity),
        format!(
            "{} >= {}",
            at_carrier.map_or("none".into(), |f| format!("{f:.6}")),
            c.min_fidelity
        ),
    );
    let min_detuned = detuned.iter().copied().fold(f64::INFINITY, f64::min);
    res.verdict(
        "detuned_loss",
        (!detuned.is_empty()).then_some(min_detuned <= c.detuned_max_fidelity),
        if detuned.is_empty() {
            format!("no grid point at |E - {carrier}| = {}", c.detuning)
        } else {
            format!(
                "min fidelity at |E - {carrier}| = {}: {min_detuned:.6} <= {}",
                c.detuning, c.detuned_max_fidelity
            )
        },
    );
    res.plot = Plot::new(
        format!("Final fidelity vs drift energy (carrier E0={carrier})"),
        "E",
        "|<psi(1), e2>|^2",
    )
    .line("fidelity", res.rows.iter().map(|r| (r[0], r[1])).collect());
    Ok(res)
}

fn lemma_data(cfg: &Config) -> Result<(TrigSeries, TrigSeries, f64), RunError> {
    let alpha = cfg.alpha0();
    let spec = perturbation_spec(cfg, alpha)?;
    let entry = spec
        .entries
        .first()
        .ok_or_else(|| RunError::Config("lemma-fast: empty perturbation".into()))?;
    Ok((entry.v.clone(), entry.h.clone(), entry.beta))
}

fn run_lemma_fast(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    let (v, h, beta) = lemma_data(cfg)?;
    let alpha = cfg.alpha0();
    let gathered = par_map(cfg.threads, &cfg.epsilon, cancel, |&eps| {
        let r = osc_integral_path(
            |s| v.value(s),
            |s| h.value(s),
            beta,
            alpha,
            eps,
            1.0,
            DEFAULT_MAX_PANELS,
        )?;
        Ok((eps, r))
    })?;
    let mut res = ExperimentResult::new(
        Experiment::LemmaFast,
        vec!["epsilon", "sup_partial", "abs_at_end", "panels"],
    );
    res.partial = gathered.partial();
    for (eps, r) in gathered.completed() {
        res.rows
            .push(vec![*eps, r.sup_partial, r.value.norm(), r.panels as f64]);
    }
    let sup: Vec<(f64, f64)> = res.rows.iter().map(|r| (r[0], r[1])).collect();
    let end: Vec<(f64, f64)> = res.rows.iter().map(|r| (r[0], r[2])).collect();
    let expected = alpha + 1.0;
    res.note("beta", beta);
    res.note("expected_exponent", expected);
    if sup.len() >= 2 {
        let report = scaling_report(&sup, 0.0)?;
        report_notes(&mut res, "sup", &report);
        let end_report = scaling_report(&end, 0.0)?;
        report_notes(&mut res, "end", &end_report);
        let w = cfg.check.slope_window;
        let (pass, detail) = match report.slope() {
            Some(s) => (
                Some((s - expected).abs() <= w),
                format!("slope {s:.4} within {expected} +/- {w}"),
            ),
            None => (None, format!("inconclusive: {} usable points", report.usable())),
        };
        res.verdict("fast_oscillation_order", pass, detail);
    }
    res.plot = Plot::new(
        format!("Oscillatory integral (beta={beta}, alpha={alpha})"),
        "epsilon",
        "|integral|",
    )
    .log_log()
    .markers("sup over tau", sup)
    .markers("at tau = 1", end);
    Ok(res)
}

fn reference(cfg: &Config) -> Result<AdiabaticReference, RunError> {
    let a = slow_generator(cfg);
    Ok(diagonal_drift(spectral_path(
        &a,
        cfg.check.spectral_points,
        cfg.check.gap_floor,
    )?))
}

fn run_kill_oscillations(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    let alpha = cfg.alpha0();
    let spec = perturbation_spec(cfg, alpha)?;
    let reference = reference(cfg)?;
    let policy = cfg.policy;
    let gathered = par_map(cfg.threads, &cfg.epsilon, cancel, |&eps| {
        let m = conjugated_perturbation(&reference, &spec, eps)?;
        let steps = policy.step_count(m.freq_bound(), 1.0)?;
        check_cap(&policy, steps, m.describe())?;
        let stride = stride_for(cfg, steps);
        let (_, path) = flow_path_steps(&m, 1.0, steps, stride)?;
        let id = ComplexMatrix::identity(m.dim());
        let dev: Vec<f64> = path.iter().map(|f| (f - &id).norm_op()).collect();
        let tol = richardson_or_floor(&policy, steps, || {
            let (_, fine) = flow_path_steps(&m, 1.0, steps * 2, stride * 2)?;
            Ok(path
                .iter()
                .zip(&fine)
                .map(|(x, y)| (x - y).norm_op())
                .fold(0.0, f64::max))
        })?;
        let sup = dev.iter().copied().fold(0.0, f64::max);
        Ok((eps, *dev.last().expect("nonempty"), sup, FLOOR_FACTOR * tol, steps))
    })?;
    let mut res = ExperimentResult::new(
        Experiment::KillOscillations,
        vec!["epsilon", "deviation_end", "sup_deviation", "floor", "steps"],
    );
    res.partial = gathered.partial();
    for (eps, end, sup, floor, steps) in gathered.completed() {
        res.rows.push(vec![*eps, *end, *sup, *floor, *steps as f64]);
    }
    let floor = res.rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    let sup: Vec<(f64, f64)> = res.rows.iter().map(|r| (r[0], r[2])).collect();
    let end: Vec<(f64, f64)> = res.rows.iter().map(|r| (r[0], r[1])).collect();
    let expected = (alpha - 1.0).min(1.0);
    res.note("expected_exponent", expected);
    res.note("spectral_gap_min", format!("{:.9}", reference.path().gap_min()));
    if sup.len() >= 2 {
        let report = scaling_report(&sup, floor)?;
        report_notes(&mut res, "sup", &report);
        report_notes(&mut res, "end", &scaling_report(&end, floor)?);
        let min_slope = (alpha > 1.0).then(|| cfg.check.min_slope.unwrap_or(expected - SLOPE_TOL));
        let (pass, detail) = slope_verdict(&report, min_slope);
        res.verdict("conjugated_flow_order", pass, detail);
    }
    res.plot = Plot::new(
        "Flow of the conjugated perturbation",
        "epsilon",
        "deviation from identity",
    )
    .log_log()
    .markers("sup over tau", sup)
    .markers("at tau = 1", end);
    Ok(res)
}

fn run_frame_check(cfg: &Config) -> Result<ExperimentResult, RunError> {
    let p = params(cfg)?;
    let lab = lab_generator(&cfg.profile, &p);
    let rot = Sum::new(
        Scaled::new(rwa_generator_scaled(&cfg.profile, p.delta), 1.0 / p.epsilon),
        rwa_residual(&cfg.profile, &p),
    )?;
    let frame = rotating_frame(&cfg.profile, &p);
    let steps = cfg.policy.step_count(lab.freq_bound().max(rot.freq_bound()), 1.0)?;
    let stride = stride_for(cfg, steps);
    let psi0 = e(2, 0);
    let lab_traj = propagate_with_count(&lab, &psi0, 1.0, &cfg.policy, steps, stride)?;
    let x0 = frame.to_frame(&psi0, 0.0)?;
    let rot_traj = propagate_with_count(&rot, &x0, 1.0, &cfg.policy, steps, stride)?;
    let tol = match (lab_traj.error_estimate, rot_traj.error_estimate) {
        (Some(a), Some(b)) => a.max(b),
        _ => 1e-12 * (steps as f64).sqrt(),
    };
    let mut res = ExperimentResult::new(
        Experiment::FrameCheck,
        vec!["tau", "mismatch", "identity_defect", "tolerance"],
    );
    let mut worst: f64 = 0.0;
    let mut worst_defect: f64 = 0.0;
    for ((tau, psi), x) in lab_traj.grid.iter().zip(&lab_traj.states).zip(&rot_traj.states) {
        let mismatch = frame.to_frame(psi, *tau)?.distance(x)?;
        let defect = frame_identity_defect(&cfg.profile, &p, *tau);
        worst = worst.max(mismatch);
        worst_defect = worst_defect.max(defect);
        res.rows.push(vec![*tau, mismatch, defect, tol]);
    }
    let c = &cfg.check;
    res.note("steps", steps);
    res.note("lab_richardson", lab_traj.error_estimate.map_or("none".into(), sci));
    res.note(
        "rotating_richardson",
        rot_traj.error_estimate.map_or("none".into(), sci),
    );
    res.note("max_mismatch", sci(worst));
    res.note("max_identity_defect", sci(worst_defect));
    res.verdict(
        "trajectory_match",
        Some(worst <= c.tolerance_factor * tol),
        format!("{} <= {} x {}", sci(worst), c.tolerance_factor, sci(tol)),
    );
    res.verdict(
        "generator_identity",
        Some(worst_defect <= c.identity_tolerance),
        format!("{} <= {}", sci(worst_defect), sci(c.identity_tolerance)),
    );
    res.plot = Plot::new(format!("Frame mismatch ({})", p.tag()), "tau", "|X - U psi|")
        .line("mismatch", res.rows.iter().map(|r| (r[0], r[1])).collect());
    Ok(res)
}

fn random_series(rng: &mut ChaCha8Rng, harmonics: usize) -> TrigSeries {
    TrigSeries {
        constant: rng.gen_range(-1.0..1.0),
        linear: rng.gen_range(-1.0..1.0),
        sin: (0..harmonics).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        cos: (0..harmonics).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

/// Random smooth `−i·H(τ)` with trig-series entries.
pub fn random_field(rng: &mut ChaCha8Rng, dim: usize, harmonics: usize) -> Result<HermitianSeries, RunError> {
    let mut h = HermitianSeries::new(dim)?;
    for j in 0..dim {
        for k in j..dim {
            let re = random_series(rng, harmonics);
            let im = if j == k {
                TrigSeries::zero()
            } else {
                random_series(rng, harmonics)
            };
            h.set(j, k, re, im)?;
        }
    }
    Ok(h)
}

fn run_variation_check(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    let c = &cfg.check;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut pairs = Vec::with_capacity(c.pairs);
    for i in 0..c.pairs {
        let a = random_field(&mut rng, c.dim, c.harmonics)?;
        let b = random_field(&mut rng, c.dim, c.harmonics)?;
        pairs.push((i, a, (!c.b_zero).then_some(b)));
    }
    let gathered = par_map(cfg.threads, &pairs, cancel, |(i, a, b)| {
        let r = match b {
            Some(b) => variation_check(a, b, 1.0, &cfg.policy)?,
            None => variation_check(a, &ZeroGenerator(c.dim), 1.0, &cfg.policy)?,
        };
        Ok((*i, r, a.freq_bound()))
    })?;
    let mut res = ExperimentResult::new(Experiment::VariationCheck, vec!["pair", "residual", "a_bound"]);
    res.partial = gathered.partial();
    for (i, r, bound) in gathered.completed() {
        res.rows.push(vec![*i as f64, *r, *bound]);
    }
    let worst = res.rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    res.note("max_residual", sci(worst));
    res.note("b_zero", c.b_zero);
    res.verdict(
        "variation_formula",
        Some(worst <= c.threshold),
        format!("{} <= {}", sci(worst), sci(c.threshold)),
    );
    res.plot = Plot::new(
        format!("Variation formula residual (dim {})", c.dim),
        "pair",
        "residual",
    )
    .markers("residual", res.rows.iter().map(|r| (r[0], r[1])).collect());
    Ok(res)
}

fn run_adiabatic_order(cfg: &Config, cancel: &AtomicBool) -> Result<ExperimentResult, RunError> {
    let a = slow_generator(cfg);
    let reference = reference(cfg)?;
    let n = reference.dim();
    let p0 = &reference.path().eigenvectors()[0];
    let p1 = reference.path().eigenvectors().last().expect("nonempty path");
    // Start on the branch carrying most of e1; the target is where it ends.
    let branch = (0..n)
        .max_by(|&i, &j| p0[(0, i)].norm().total_cmp(&p0[(0, j)].norm()))
        .expect("dim >= 2");
    let x0 = QuantumState::new(p0.column(branch))?;
    let target = QuantumState::new(p1.column(branch))?;
    let gathered = par_map(cfg.threads, &cfg.epsilon, cancel, |&eps| {
        let slow = Scaled::new(a.clone(), 1.0 / eps);
        let traj = propagate(&slow, &x0, 1.0, &cfg.policy, 1)?;
        let stride = stride_for(cfg, traj.steps);
        let mut track: f64 = 0.0;
        for (k, (tau, x)) in traj.grid.iter().zip(&traj.states).enumerate() {
            if k % stride != 0 && k + 1 != traj.grid.len() {
                continue;
            }
            let ups = adiabatic_reference_flow(&reference, eps, *tau);
            track = track.max(x.distance(&x0.apply(&ups)?)?);
        }
        let end = dist_up_to_phase(traj.final_state(), &target)?;
        Ok((eps, track, end, traj.error_estimate.unwrap_or(0.0), traj.steps))
    })?;
    let mut res = ExperimentResult::new(
        Experiment::AdiabaticOrder,
        vec!["epsilon", "sup_tracking", "endpoint_dist", "richardson", "steps"],
    );
    res.partial = gathered.partial();
    for (eps, track, end, err, steps) in gathered.completed() {
        res.rows.push(vec![*eps, *track, *end, *err, *steps as f64]);
    }
    res.note("spectral_gap_min", format!("{:.9}", reference.path().gap_min()));
    res.note("branch", branch);
    let track: Vec<(f64, f64)> = res.rows.iter().map(|r| (r[0], r[1])).collect();
    let end: Vec<(f64, f64)> = res.rows.iter().map(|r| (r[0], r[2])).collect();
    let floor = FLOOR_FACTOR * res.rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    if track.len() >= 2 {
        let min_slope = Some(cfg.check.min_slope.unwrap_or(1.0 - SLOPE_TOL));
        let tr = scaling_report(&track, floor)?;
        report_notes(&mut res, "tracking", &tr);
        let (pass, detail) = slope_verdict(&tr, min_slope);
        res.verdict("tracking_order", pass, detail);
        let er = scaling_report(&end, floor)?;
        report_notes(&mut res, "endpoint", &er);
        let (pass, detail) = slope_verdict(&er, min_slope);
        res.verdict("endpoint_order", pass, detail);
    }
    res.plot = Plot::new("Slow dynamics vs adiabatic reference", "epsilon", "distance")
        .log_log()
        .markers("sup tracking error", track)
        .markers("endpoint distance to target", end);
    Ok(res)
}
