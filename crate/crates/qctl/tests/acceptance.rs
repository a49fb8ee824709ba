//! One PASS/FAIL line per acceptance criterion. Exits nonzero unless the
//! failing set equals `KNOWN_RED`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use qctl::{Config, ConfigFile, Experiment, ExperimentResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rwa_core::{dist_up_to_phase, expm_skew, ComplexMatrix, QuantumState, C64};

/// Criteria expected to fail, with the reason recorded alongside the build.
const KNOWN_RED: &[usize] = &[6];

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn run(experiment: Experiment, toml: &str) -> Result<ExperimentResult, String> {
    let file = ConfigFile::parse(toml).map_err(|e| e.to_string())?;
    let cfg = Config::resolve(experiment, &file).map_err(|e| e.to_string())?;
    qctl::run(&cfg, &AtomicBool::new(false)).map_err(|e| e.to_string())
}

fn col(res: &ExperimentResult, name: &str) -> Result<Vec<f64>, String> {
    res.column(name).ok_or_else(|| format!("missing column {name}"))
}

fn verdict(res: &ExperimentResult, name: &str) -> Result<bool, String> {
    let v = res
        .verdict_named(name)
        .ok_or_else(|| format!("missing verdict {name}"))?;
    v.pass.ok_or_else(|| format!("{name}: {}", v.detail))
}

/// Least-squares slope of `ln err` against `ln eps` over pairs above `floor`.
fn slope(pairs: &[(f64, f64)], floor: f64) -> Result<f64, String> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.1 > floor)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(format!("{} points above floor {floor:e}", pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn max_norm_drift(res: &ExperimentResult) -> Result<f64, String> {
    let cols: Vec<Vec<f64>> = ["re_psi0", "im_psi0", "re_psi1", "im_psi1"]
        .iter()
        .map(|c| col(res, c))
        .collect::<Result<_, _>>()?;
    Ok((0..cols[0].len())
        .map(|i| ((0..4).map(|k| cols[k][i].powi(2)).sum::<f64>().sqrt() - 1.0).abs())
        .fold(0.0, f64::max))
}

fn norm_preservation() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n_osc in [16, 128] {
        let res = run(
            Experiment::Transfer,
            &format!(
                "[params]\nepsilon = 0.01\nalpha = 1.5\n[policy]\nn_osc = {n_osc}\n[check]\nnorm_tolerance = 1e-9\n"
            ),
        )?;
        let drift = max_norm_drift(&res)?;
        let steps = res.value("steps").unwrap_or("?");
        ok &= drift <= 1e-9 && verdict(&res, "norm_preservation")?;
        parts.push(format!("n_osc={n_osc}: {steps} steps, drift {drift:.2e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn frame_exactness() -> Outcome {
    let res = run(
        Experiment::FrameCheck,
        "[params]\nepsilon = 0.01\nalpha = 1.5\nE = 1.0\n",
    )?;
    let mismatch = col(&res, "mismatch")?;
    let tol = col(&res, "tolerance")?;
    let defect = col(&res, "identity_defect")?.into_iter().fold(0.0, f64::max);
    let within = mismatch.iter().zip(&tol).all(|(m, t)| *m <= 5.0 * t);
    let worst = mismatch.iter().copied().fold(0.0, f64::max);
    Ok((
        within && verdict(&res, "trajectory_match")? && verdict(&res, "generator_identity")?,
        format!(
            "max mismatch {worst:.3e} <= 5 x integrator estimate {:.3e}; identity defect {defect:.1e}",
            tol[0]
        ),
    ))
}

fn transfer_fidelity() -> Outcome {
    let res = run(
        Experiment::Transfer,
        "[params]\nepsilon = 0.01\nalpha = 1.5\nE = 1.0\n[profile]\nname = \"sine\"\n",
    )?;
    let f = *col(&res, "fidelity_e2")?.last().ok_or("empty trajectory")?;
    Ok((f >= 0.99, format!("final fidelity {f:.6} >= 0.99")))
}

fn rwa_exponent() -> Outcome {
    let res = run(
        Experiment::RwaGap,
        "[params]\nepsilon = [0.08, 0.04, 0.02, 0.01]\nalpha = 1.5\n",
    )?;
    let eps = col(&res, "epsilon")?;
    let sq = col(&res, "sq_diff")?;
    let floors = col(&res, "floor")?;
    let mut sup: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for i in 0..eps.len() {
        let e = sup.entry(eps[i].to_bits()).or_insert((eps[i], 0.0));
        e.1 = e.1.max(sq[i].sqrt());
    }
    let floor = floors.iter().copied().fold(0.0, f64::max);
    let s = slope(&sup.into_values().collect::<Vec<_>>(), floor)?;
    Ok((
        s >= 0.3 && verdict(&res, "rwa_exponent")?,
        format!("slope {s:.3} >= 0.3"),
    ))
}

fn drive_exponent() -> Outcome {
    let res = run(
        Experiment::Scaling,
        "[params]\nepsilon = [0.08, 0.04, 0.02]\nalpha = 2.5\n[policy]\nn_osc = 32\n",
    )?;
    let pairs: Vec<(f64, f64)> = col(&res, "epsilon")?.into_iter().zip(col(&res, "sup_error")?).collect();
    let floor = col(&res, "floor")?.into_iter().fold(0.0, f64::max);
    let s = slope(&pairs, floor)?;
    Ok((
        s >= 0.8 && verdict(&res, "drive_exponent.alpha=2.5")?,
        format!("slope {s:.3} >= 0.8"),
    ))
}

fn adiabatic_order() -> Outcome {
    let res = run(Experiment::AdiabaticOrder, "[params]\nepsilon = [0.04, 0.02, 0.01]\n")?;
    let eps = col(&res, "epsilon")?;
    let track: Vec<(f64, f64)> = eps.iter().copied().zip(col(&res, "sup_tracking")?).collect();
    let end: Vec<(f64, f64)> = eps.iter().copied().zip(col(&res, "endpoint_dist")?).collect();
    let floor = 10.0 * col(&res, "richardson")?.into_iter().fold(0.0, f64::max);
    let st = slope(&track, floor)?;
    let se = slope(&end, floor)?;
    Ok((
        st >= 0.8 && se >= 0.8,
        format!("tracking slope {st:.3}, endpoint slope {se:.3}, both >= 0.8"),
    ))
}

fn fast_oscillation() -> Outcome {
    let res = run(
        Experiment::LemmaFast,
        "[params]\nepsilon = [0.2, 0.1, 0.05]\nalpha = 1.5\nE = 1.0\n[profile]\nname = \"sine\"\n",
    )?;
    let beta: f64 = res
        .value("beta")
        .ok_or("missing beta")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    let pairs: Vec<(f64, f64)> = col(&res, "epsilon")?
        .into_iter()
        .zip(col(&res, "sup_partial")?)
        .collect();
    let s = slope(&pairs, 0.0)?;
    Ok((
        beta == 4.0 && (s - 2.5).abs() <= 0.3 && verdict(&res, "fast_oscillation_order")?,
        format!("beta {beta}, slope {s:.3} within 2.5 +/- 0.3"),
    ))
}

fn kill_oscillations() -> Outcome {
    let res = run(
        Experiment::KillOscillations,
        "[params]\nepsilon = [0.08, 0.04, 0.02]\nalpha = 1.5\n",
    )?;
    let pairs: Vec<(f64, f64)> = col(&res, "epsilon")?
        .into_iter()
        .zip(col(&res, "sup_deviation")?)
        .collect();
    let floor = col(&res, "floor")?.into_iter().fold(0.0, f64::max);
    let s = slope(&pairs, floor)?;
    Ok((
        s >= 0.3 && verdict(&res, "conjugated_flow_order")?,
        format!("slope {s:.3} >= 0.3"),
    ))
}

fn ensemble_fidelity() -> Outcome {
    let res = run(
        Experiment::DeltaSweep,
        "[params]\nepsilon = 0.01\nalpha = 1.5\nE = 1.0\ndelta = \"linspace(0.2, 1, 50)\"\n[check]\ngap_floor = 0.3\nwindow = [0.2, 1.0]\n",
    )?;
    let fid = col(&res, "fidelity")?;
    let gap: f64 = res
        .value("ugap_min_gap")
        .ok_or("missing gap")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    let worst = fid.iter().copied().fold(1.0, f64::min);
    Ok((
        fid.len() == 50 && gap >= 0.3 && worst >= 0.95,
        format!(
            "{} points, min gap {gap:.4} >= 0.3, min fidelity {worst:.6} >= 0.95",
            fid.len()
        ),
    ))
}

fn detuning_loss() -> Outcome {
    let res = run(
        Experiment::ESweep,
        "[params]\nepsilon = 0.01\nalpha = 1.5\nE = \"linspace(0.5, 1.5, 21)\"\n[check]\ncarrier_energy = 1.0\n",
    )?;
    let es = col(&res, "E")?;
    let fid = col(&res, "fidelity")?;
    let at = |target: f64| es.iter().position(|e| (e - target).abs() < 1e-9).map(|i| fid[i]);
    let carrier = at(1.0).ok_or("no grid point at E = 1")?;
    let detuned = [at(0.8), at(1.2)].into_iter().flatten().fold(1.0, f64::min);
    Ok((
        carrier >= 0.99 && detuned <= 0.5,
        format!("fidelity {carrier:.6} at E=1, {detuned:.3e} at |E-1|=0.2"),
    ))
}

fn random_skew(rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let n = rng.gen_range(2..=4);
    let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
    let mut h = ComplexMatrix::zeros(n);
    for j in 0..n {
        h[(j, j)] = C64::new(rng.gen_range(-scale..scale), 0.0);
        for k in j + 1..n {
            let z = C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
            h[(j, k)] = z;
            h[(k, j)] = z.conj();
        }
    }
    h.scale(C64::new(0.0, -1.0))
}

fn taylor_expm(g: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    let a = g.scale_real(dt);
    let mut squarings = 0u32;
    while a.norm_fro() / 2f64.powi(squarings as i32) > 0.5 {
        squarings += 1;
    }
    let a = a.scale_real(2f64.powi(-(squarings as i32)));
    let mut sum = ComplexMatrix::identity(g.dim());
    let mut term = sum.clone();
    for k in 1..=50 {
        term = (&term * &a).scale_real(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> QuantumState {
    let amps = (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    QuantumState::normalized(amps).expect("nonzero draw")
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut expm_err: f64 = 0.0;
    for _ in 0..10_000 {
        let g = random_skew(&mut rng);
        let dt = rng.gen_range(-1.0..1.0);
        let u = expm_skew(&g, dt).map_err(|e| e.to_string())?;
        expm_err = expm_err.max((&u - &taylor_expm(&g, dt)).max_abs());
    }
    let mut dist_err: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=4);
        let (x, y) = (random_state(&mut rng, n), random_state(&mut rng, n));
        let grid = 20_000;
        let brute = (0..grid)
            .map(|i| {
                let p = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / grid as f64);
                let py = QuantumState::new(y.amplitudes().iter().map(|z| p * z).collect()).expect("unit");
                x.distance(&py).expect("same dim")
            })
            .fold(f64::INFINITY, f64::min);
        dist_err = dist_err.max((dist_up_to_phase(&x, &y).map_err(|e| e.to_string())? - brute).abs());
    }
    let res = run(Experiment::VariationCheck, "[check]\ndim = 3\nthreshold = 1e-6\n")?;
    let residual = col(&res, "residual")?.into_iter().fold(0.0, f64::max);
    Ok((
        expm_err <= 1e-10 && dist_err <= 1e-6 && residual <= 1e-6,
        format!(
            "expm {expm_err:.1e} <= 1e-10, phase distance {dist_err:.1e} <= 1e-6, variation {residual:.1e} <= 1e-6"
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("norm preservation", norm_preservation),
        ("frame exactness", frame_exactness),
        ("transfer fidelity", transfer_fidelity),
        ("rotating-wave exponent", rwa_exponent),
        ("drive exponent at alpha 2.5", drive_exponent),
        ("adiabatic order", adiabatic_order),
        ("fast oscillation order", fast_oscillation),
        ("conjugated flow order", kill_oscillations),
        ("ensemble fidelity over delta", ensemble_fidelity),
        ("detuning sensitivity", detuning_loss),
        ("oracle equivalence", oracles),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let known = if KNOWN_RED.contains(&id) { " (known red)" } else { "" };
        println!(
            "{} {id:>2} {name}: {detail} [{:.1} s]{}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            if pass { "" } else { known }
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed == KNOWN_RED {
        println!(
            "acceptance: {} of 11 pass; failures match the known set {KNOWN_RED:?}",
            11 - failed.len()
        );
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failures {failed:?} differ from the known set {KNOWN_RED:?}");
        ExitCode::FAILURE
    }
}
