use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qctl::config::{Config, ConfigFile, Experiment, Overrides};
use qctl::output::write_outputs;
use qctl::RunError;
use rwa_core::controls::ControlProfile;

#[derive(Parser)]
#[command(
    name = "qctl",
    version,
    about = "Chirped-pulse rotating-wave and adiabatic experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Scalar or grid: `0.01`, `0.08,0.04`, `geomspace(0.08,0.01,4)`.
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "E")]
    energy: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    profile: Option<String>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            epsilon: self.epsilon.clone(),
            alpha: self.alpha.clone(),
            energy: self.energy.clone(),
            delta: self.delta.clone(),
            profile: self.profile.clone(),
            out: self.out.clone(),
            threads: self.threads,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Population transfer in the lab frame.
    Transfer(RunArgs),
    /// Real vs complex control: squared-norm gap and its epsilon exponent.
    RwaGap(RunArgs),
    /// Rotating-frame perturbed vs unperturbed flows per alpha.
    Scaling(RunArgs),
    /// Final fidelity across the amplitude factor delta.
    DeltaSweep(RunArgs),
    /// Final fidelity across the drift energy E with a fixed carrier.
    ESweep(RunArgs),
    /// Order of the fast oscillatory integral.
    LemmaFast(RunArgs),
    /// Flow of the eigenframe-conjugated perturbation.
    KillOscillations(RunArgs),
    /// Lab trajectory vs rotating-frame trajectory.
    FrameCheck(RunArgs),
    /// Variation formula residual on random smooth pairs.
    VariationCheck(RunArgs),
    /// Slow dynamics vs the adiabatic reference flow.
    AdiabaticOrder(RunArgs),
    /// Lists the built-in control profiles.
    ListProfiles,
    /// Parses and resolves a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Experiment to resolve for; defaults to the file's `experiment` key.
        #[arg(long)]
        experiment: Option<String>,
    },
}

fn experiment_of(cmd: &Command) -> Option<(Experiment, &RunArgs)> {
    Some(match cmd {
        Command::Transfer(a) => (Experiment::Transfer, a),
        Command::RwaGap(a) => (Experiment::RwaGap, a),
        Command::Scaling(a) => (Experiment::Scaling, a),
        Command::DeltaSweep(a) => (Experiment::DeltaSweep, a),
        Command::ESweep(a) => (Experiment::ESweep, a),
        Command::LemmaFast(a) => (Experiment::LemmaFast, a),
        Command::KillOscillations(a) => (Experiment::KillOscillations, a),
        Command::FrameCheck(a) => (Experiment::FrameCheck, a),
        Command::VariationCheck(a) => (Experiment::VariationCheck, a),
        Command::AdiabaticOrder(a) => (Experiment::AdiabaticOrder, a),
        Command::ListProfiles | Command::Validate { .. } => return None,
    })
}

fn list_profiles() {
    for p in ControlProfile::catalog() {
        let (gap, tau) = p.gap_premise_min();
        let transfer = if p.check_transfer().is_ok() { "transfer" } else { "-" };
        println!(
            "{:<18} max|v| = {:.3}  max|phi'| = {:.3}  min(v^2 + phi'^2/4) = {gap:.3} at tau = {tau:.3}  {transfer}",
            p.name(),
            p.max_abs_v(),
            p.max_abs_dphi()
        );
    }
}

fn validate(path: &Path, experiment: Option<&str>) -> Result<(), RunError> {
    let file = ConfigFile::load(path)?;
    let name = experiment
        .or(file.experiment.as_deref())
        .ok_or_else(|| RunError::Config("no experiment given and the config has no experiment key".into()))?;
    let exp: Experiment = name.parse().map_err(RunError::Config)?;
    let cfg = Config::resolve(exp, &file)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    for (k, v) in cfg.provenance() {
        println!("{k} = {v}");
    }
    println!("valid = true");
    Ok(())
}

fn run(exp: Experiment, args: &RunArgs, cancel: &AtomicBool) -> Result<bool, RunError> {
    let cfg = Config::load(exp, &args.config, &args.overrides())?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let start = Instant::now();
    let result = qctl::run(&cfg, cancel)?;
    let written = write_outputs(&cfg, &result)?;
    for v in &result.verdicts {
        let tag = match v.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "NONE",
        };
        println!("{tag} {}: {}", v.name, v.detail);
    }
    if result.partial {
        eprintln!("interrupted: partial results written");
    }
    eprintln!(
        "wrote {}, {}, {} in {:.2} s",
        written.csv.display(),
        written.svg.display(),
        written.summary.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(result.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::ListProfiles => {
            list_profiles();
            Ok(true)
        }
        Command::Validate { config, experiment } => validate(config, experiment.as_deref()).map(|_| true),
        cmd => {
            let (exp, args) = experiment_of(cmd).expect("experiment subcommand");
            let cancel = Arc::new(AtomicBool::new(false));
            let flag = cancel.clone();
            if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed)) {
                eprintln!("warning: cannot install interrupt handler: {e}");
            }
            run(exp, args, &cancel)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
