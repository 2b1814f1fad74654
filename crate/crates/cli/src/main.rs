//! `swarmsim`: scenario simulation, body synthesis and harmonic fitting.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use swarm_core::body_model::{load_mascons, synth_ellipsoid_body, Vec3};
use swarm_core::driver::{
    format_table, run_with_threads, write_events_csv, write_summary_json, write_trajectory_csv, SimOutput,
};
use swarm_core::gravimetry::{
    coeff_error, fit_harmonics, mascon_to_harmonics, read_samples_csv, write_samples_csv, HarmonicCoeffs,
    COEFFS_CSV_HEADER,
};
use swarm_core::scenario::{parse_override, preset, BodySource, ScenarioConfig, ScenarioFile};
use swarm_core::SwarmError;

/// Exit codes.
const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FAULT: u8 = 3;
const EXIT_RANK: u8 = 4;
const EXIT_USAGE: u8 = 64;

const SUMMARY_FILE: &str = "summary.json";
const EVENTS_FILE: &str = "events.csv";
const TRAJECTORY_FILE: &str = "trajectory.csv";
const SAMPLES_FILE: &str = "samples.csv";
const COEFFS_FILE: &str = "coefficients.csv";

#[derive(Parser)]
#[command(name = "swarmsim", version, about = "CubeSat swarm operations around small bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the summary, event log, trajectory, samples and fitted coefficients.
    Simulate(SimulateArgs),
    /// Write a uniform-density ellipsoid as a mascon CSV.
    GenBody(GenBodyArgs),
    /// Fit spherical-harmonic coefficients to a samples CSV.
    Fit(FitArgs),
    /// Print the resolved scenario without running it.
    Inspect(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: itokawa, bennu, ryugu or synthetic.
    #[arg(long)]
    preset: Option<String>,
    /// Swarm size for a preset.
    #[arg(long, default_value_t = 5)]
    size: usize,
    /// Scenario seed (same as `--override sim.seed=N`).
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario field override, `dotted.key=value`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 1 selects the serial path.
    #[arg(long, env = "SWARMSIM_THREADS")]
    threads: Option<usize>,
    /// Degree of the harmonic fit to the recorded samples.
    #[arg(long, default_value_t = 4)]
    fit_degree: usize,
}

#[derive(Args)]
struct GenBodyArgs {
    /// Semi-axes a,b,c [km].
    #[arg(long, value_delimiter = ',', required = true)]
    semi_axes: Vec<f64>,
    /// Number of mascons.
    #[arg(long)]
    n: usize,
    /// Total GM [km³/s²].
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Samples CSV (`t_s,x_km,y_km,z_km,ax,ay,az,sc_id`).
    #[arg(long)]
    samples: PathBuf,
    /// Maximum degree.
    #[arg(long, short = 'L', default_value_t = 4)]
    degree: usize,
    /// Reference radius [km].
    #[arg(long)]
    r0: f64,
    /// GM [km³/s²]; taken from the reference body when omitted.
    #[arg(long)]
    mu: Option<f64>,
    /// Mascon file whose exact coefficients are compared with the fit.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<SwarmError> for Failure {
    fn from(e: SwarmError) -> Self {
        let code = match &e {
            SwarmError::Io { .. } => EXIT_IO,
            SwarmError::Singular { .. } | SwarmError::StepUnderflow { .. } | SwarmError::OutOfSpan { .. } => EXIT_FAULT,
            SwarmError::RankDeficient { .. } => EXIT_RANK,
            SwarmError::InvalidArgument(_)
            | SwarmError::Format { .. }
            | SwarmError::Config(_)
            | SwarmError::Csv(_)
            | SwarmError::Json(_) => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_CONFIG, message: message.into() }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::GenBody(args) => cmd_gen_body(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Inspect(args) => cmd_inspect(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("swarmsim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_scenario(args: &ScenarioArgs) -> CliResult<ScenarioConfig> {
    let mut overrides = args.overrides.iter().map(|o| parse_override(o)).collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = args.seed {
        overrides.push(("sim.seed".to_string(), seed.to_string()));
    }
    let cfg = match (&args.scenario, &args.preset) {
        (Some(path), _) => {
            let file = ScenarioFile::load(path, &overrides)?;
            let base = path.parent().unwrap_or(Path::new("."));
            file.resolve(base)?
        }
        (None, Some(name)) => preset(name, args.size)?.with_overrides(&overrides)?.resolve(Path::new("."))?,
        (None, None) => return Err(config_failure("either --scenario or --preset is required")),
    };
    if let BodySource::SyntheticFallback(missing) = &cfg.body_source {
        eprintln!("swarmsim: mascon file {} not found, using the synthetic body", missing.display());
    }
    Ok(cfg)
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let cfg = load_scenario(&args.scenario)?;
    let threads = args.threads.unwrap_or_else(default_threads);
    if threads == 0 {
        return Err(config_failure("--threads must be at least 1"));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|source| Failure::from(SwarmError::Io { path: args.out.clone(), source }))?;

    let started = Instant::now();
    let SimOutput { report, world } = run_with_threads(cfg.clone(), threads)?;
    let wall = started.elapsed().as_secs_f64();

    let out = &args.out;
    write_summary_json(&out.join(SUMMARY_FILE), &report)?;
    write_events_csv(&out.join(EVENTS_FILE), &world.events)?;
    write_trajectory_csv(&out.join(TRAJECTORY_FILE), &world.trajectory)?;
    write_samples_csv(&out.join(SAMPLES_FILE), &world.samples)?;

    let r0 = cfg.region.safety_semi_axes().max();
    match fit_harmonics(&world.samples, args.fit_degree, r0, cfg.mu_total()) {
        Ok(fit) => {
            fit.write_csv(&out.join(COEFFS_FILE))?;
            if let Ok(reference) = mascon_to_harmonics(&cfg.model, args.fit_degree, r0) {
                println!("{}", error_table(&fit, &reference)?);
            }
        }
        Err(e) => {
            eprintln!("swarmsim: no harmonic fit ({e}); coefficients file left empty");
            std::fs::write(out.join(COEFFS_FILE), format!("{COEFFS_CSV_HEADER}\n"))
                .map_err(|source| Failure::from(SwarmError::Io { path: out.join(COEFFS_FILE), source }))?;
        }
    }

    println!("{}", format_table(&[(format!("N={}", report.swarm_size), &report.summary)]));
    for flag in &report.flags {
        eprintln!("swarmsim: flagged t = {} s, spacecraft {}: {}", flag.t_s, flag.sc_id, flag.reason);
    }
    let t = report.timing;
    eprintln!(
        "swarmsim: {} timesteps in {wall:.2} s on {threads} thread(s); propagation {:.2} s, screening {:.2} s",
        report.epochs,
        t.propagation.as_secs_f64(),
        t.screening.as_secs_f64()
    );
    Ok(())
}

fn error_table(fit: &HarmonicCoeffs, reference: &HarmonicCoeffs) -> CliResult<String> {
    let errors = coeff_error(fit, reference)?;
    let mut out = String::from("degree  relative error\n");
    for (l, e) in errors.iter().enumerate() {
        out.push_str(&format!("{l:>6}  {e:.3e}\n"));
    }
    Ok(out)
}

fn cmd_gen_body(args: &GenBodyArgs) -> CliResult<()> {
    let [a, b, c] = args.semi_axes[..] else {
        return Err(config_failure(format!("--semi-axes needs three values, got {}", args.semi_axes.len())));
    };
    let axes = Vec3::new(a, b, c);
    let model = synth_ellipsoid_body(axes, args.n, args.mu, args.seed)?;
    model.save_csv(&args.out)?;
    println!("wrote {} mascons to {}", model.len(), args.out.display());
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let samples = read_samples_csv(&args.samples)?;
    let reference = args.reference.as_deref().map(load_mascons).transpose()?;
    let mu = match (args.mu, &reference) {
        (Some(mu), _) => mu,
        (None, Some(model)) => model.total_mu(),
        (None, None) => return Err(config_failure("--mu is required without --reference")),
    };
    let fit = fit_harmonics(&samples, args.degree, args.r0, mu)?;
    fit.write_csv(&args.out)?;
    println!("fitted degree {} to {} samples, wrote {}", args.degree, samples.len(), args.out.display());
    if let Some(model) = reference {
        let exact = mascon_to_harmonics(&model, args.degree, args.r0)?;
        println!("{}", error_table(&fit, &exact)?);
    }
    Ok(())
}

fn cmd_inspect(args: &ScenarioArgs) -> CliResult<()> {
    let cfg = load_scenario(args)?;
    let source = match &cfg.body_source {
        BodySource::File(p) => format!("file {}", p.display()),
        BodySource::Synthetic => "synthetic".to_string(),
        BodySource::SyntheticFallback(missing) => format!("synthetic (missing {})", missing.display()),
    };
    let axes = cfg.region.safety_semi_axes();
    println!("scenario          {}", cfg.name);
    println!("body              {} ({source})", cfg.model.name);
    println!("mascons           {}", cfg.model.len());
    println!("mu                {:e} km^3/s^2", cfg.mu_total());
    println!("rotation period   {}", cfg.rotation.period().map_or("none".into(), |p| format!("{p} s")));
    println!("safety semi-axes  {} {} {} km", axes.x, axes.y, axes.z);
    println!("exit radius       {} km", cfg.region.exit_radius());
    println!("swarm size        {}", cfg.swarm_size);
    println!("timestep          {:.3} s", cfg.dt_c());
    println!("timesteps         {}", cfg.epochs());
    println!("duration          {} s", cfg.duration);
    println!("seed              {}", cfg.seed);
    println!("srp               {}", if cfg.srp.is_some() { "on" } else { "off" });
    Ok(())
}
