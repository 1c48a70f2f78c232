use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fowfsim::error::Error;
use fowfsim::scenario::{
    compare_runs, files, load_config, load_run_setup, load_summary, replay_field, run_scenario,
    write_run, write_search_trace, write_setpoints, RunContext, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "fowfsim",
    version,
    about = "Dynamic floating offshore wind farm simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        /// Config file, or `preset:<name>` for a bundled preset.
        config: String,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy and effective-speed gains of run A over run B.
    Compare { run_a: PathBuf, run_b: PathBuf },
    /// Search for lateral targets only and write a setpoints file.
    Optimize {
        config: String,
        /// Setpoints file; defaults to setpoints.toml in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the velocity field of a finished run at time `t`.
    Field {
        run: PathBuf,
        /// Time of the snapshot, s.
        #[arg(long)]
        t: f64,
        /// Grid file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a config, printing it with defaults filled.
    Validate { config: String },
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

/// A failure and the exit code it maps to.
struct Failure(u8, Error);

fn validation(e: Error) -> Failure {
    Failure(EXIT_VALIDATION, e)
}

fn runtime(e: Error) -> Failure {
    match e {
        Error::Infeasible(_) | Error::PowerShortfall { .. } => Failure(EXIT_INFEASIBLE, e),
        _ => Failure(EXIT_RUNTIME, e),
    }
}

fn load(config: &str) -> Result<ScenarioConfig, Failure> {
    load_config(config).map_err(validation)
}

fn run(config: &str, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = load(config)?;
    if let Some(dir) = out {
        cfg.run.output_dir = dir;
    }
    let output = run_scenario(&cfg).map_err(runtime)?;
    let dir = &cfg.run.output_dir;
    write_run(&output, dir).map_err(runtime)?;
    let m = &output.metrics;
    println!("wrote {}", dir.display());
    println!("targets_m = {:?}", output.plan.targets);
    println!("total_energy_J = {}", m.total_energy);
    println!("mean_farm_power_W = {}", m.mean_farm_power);
    for (i, t) in m.turbines.iter().enumerate() {
        println!(
            "turbine {}: mean_power_W = {:.0}, settle_s = {}, lateral_rmse_m = {}",
            i + 1,
            t.mean_power,
            t.settle_time.map_or("none".into(), |s| s.to_string()),
            t.lateral_rmse.map_or("none".into(), |s| format!("{s:.3}")),
        );
    }
    if let Some(r) = m.power_tracking_rmse {
        println!("power_tracking_rmse_W = {r:.0}");
    }
    Ok(())
}

fn compare(a: &Path, b: &Path) -> Result<(), Failure> {
    let with = load_summary(a).map_err(validation)?;
    let without = load_summary(b).map_err(validation)?;
    let c = compare_runs(&with, &without).map_err(validation)?;
    print!("{}", toml::to_string(&c).expect("comparison serializes"));
    Ok(())
}

fn optimize(config: &str, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = load(config)?;
    cfg.run.repositioning = true;
    let ctx = RunContext::new(&cfg).map_err(runtime)?;
    let plan = ctx.plan(&cfg).map_err(runtime)?;
    let path = out.unwrap_or_else(|| cfg.run.output_dir.join(files::SETPOINTS));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| runtime(e.into()))?;
    }
    write_setpoints(&plan, &path).map_err(runtime)?;
    if let Some(s) = &plan.search {
        let trace = path.with_file_name(files::SEARCH_TRACE);
        let f = std::fs::File::create(&trace).map_err(|e| runtime(e.into()))?;
        write_search_trace(s, std::io::BufWriter::new(f)).map_err(runtime)?;
        println!(
            "best score {} after {} evaluations, final mesh {} m",
            s.best.score,
            s.trace.len(),
            s.final_mesh
        );
    }
    println!("targets_m = {:?}", plan.targets);
    println!("power_targets_W = {:?}", plan.power_targets);
    println!("wrote {}", path.display());
    Ok(())
}

fn field(run: &Path, t: f64, out: Option<PathBuf>) -> Result<(), Failure> {
    let (cfg, plan) = load_run_setup(run).map_err(validation)?;
    let f = replay_field(&cfg, &plan, t).map_err(|e| match e {
        Error::InvalidInput(_) => validation(e),
        other => runtime(other),
    })?;
    match out {
        Some(path) => {
            let file = std::fs::File::create(&path).map_err(|e| runtime(e.into()))?;
            f.write_to(std::io::BufWriter::new(file)).map_err(runtime)?;
            println!("wrote {}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f.write_to(&mut lock).map_err(runtime)?;
            lock.flush().map_err(|e| runtime(e.into()))?;
        }
    }
    Ok(())
}

fn validate(config: &str) -> Result<(), Failure> {
    let cfg = load(config)?;
    cfg.physical_params().map_err(validation)?;
    println!("# {} is valid", cfg.source);
    print!("{}", cfg.to_toml());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Compare { run_a, run_b } => compare(&run_a, &run_b),
        Command::Optimize { config, out } => optimize(&config, out),
        Command::Field { run, t, out } => field(&run, t, out),
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
