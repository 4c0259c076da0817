use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use windfarm::aero::AeroTables;
use windfarm::analysis::{build_acl, spectrum, sweep_patterns, write_reports, SweepMode};
use windfarm::scenario::{compare_cases, read_metrics, run_scenario, ScenarioConfig};
use windfarm::sysid::{fit_first_order, run_step_experiment, IdentifyConfig, LinearThrustModel};
use windfarm::turbine::TurbineParams;
use windfarm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "windfarm",
    about = "Wind-farm active power control simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a farm scenario and write the time-series CSV and metrics summary
    Simulate { config: PathBuf },
    /// Run a thrust step-response experiment and fit the first-order model
    Identify { config: PathBuf },
    /// Eigenvalue analysis of the thrust-balance closed loop for a model file
    Analyze {
        model: PathBuf,
        /// Sweep saturation patterns (exhaustive up to 4 turbines, sampled above)
        #[arg(long)]
        sweep: bool,
        /// Farm size for the assembled closed loop
        #[arg(long, default_value_t = 9)]
        n: usize,
        /// Diagonal integral gain applied to every turbine
        #[arg(long, default_value_t = 0.5)]
        gain: f64,
        /// Report output path [default: <model stem>_spectrum.txt]
        #[arg(long)]
        report: Option<PathBuf>,
        /// Eigenvalue CSV output path [default: <model stem>_spectrum.csv]
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare the metrics summaries of two runs
    Compare { run_a: PathBuf, run_b: PathBuf },
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IdentifyFileConfig {
    turbine: TurbineParams,
    identify: IdentifyConfig,
    output: IdentifyOutput,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IdentifyOutput {
    model: Option<PathBuf>,
    csv: Option<PathBuf>,
}

fn with_stem(base: &Path, suffix: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    base.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_simulate(config: &Path) -> Result<()> {
    let cfg = ScenarioConfig::from_file(config)?;
    let out = run_scenario(&cfg)?;
    let csv_path = cfg
        .output
        .csv
        .clone()
        .unwrap_or_else(|| with_stem(config, "_timeseries.csv"));
    let metrics_path = cfg
        .output
        .metrics
        .clone()
        .unwrap_or_else(|| with_stem(config, "_metrics.txt"));
    out.write_csv(&csv_path)?;
    out.metrics.write_file(&metrics_path)?;
    print!("{}", out.metrics.to_text());
    println!("timeseries = {}", csv_path.display());
    println!("metrics = {}", metrics_path.display());
    Ok(())
}

fn cmd_identify(config: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).map_err(|source| Error::Read {
        path: config.to_path_buf(),
        source,
    })?;
    let cfg: IdentifyFileConfig = toml::from_str(&text).map_err(|e| Error::Parse {
        path: config.to_path_buf(),
        msg: e.to_string(),
    })?;
    cfg.turbine.validate().map_err(Error::Config)?;
    let tables = Arc::new(AeroTables::generate());
    let exp = run_step_experiment(&cfg.turbine, tables, &cfg.identify)?;
    let model = fit_first_order(&exp)?;
    let model_path = cfg
        .output
        .model
        .clone()
        .unwrap_or_else(|| with_stem(config, "_model.txt"));
    let csv_path = cfg
        .output
        .csv
        .clone()
        .unwrap_or_else(|| with_stem(config, "_experiment.csv"));
    model.write_file(&model_path)?;
    exp.write_csv(&csv_path)?;
    println!("k1 = {:.9e}", model.k1);
    println!("t1 = {:.6}", model.t1);
    println!("a = {:.9}", model.a);
    println!("b = {:.9e}", model.b);
    println!("fit_percent = {:.2}", model.fit_percent);
    println!("model = {}", model_path.display());
    println!("experiment = {}", csv_path.display());
    Ok(())
}

fn cmd_analyze(
    model_path: &Path,
    sweep: bool,
    n: usize,
    gain: f64,
    report: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("farm size must be at least 1".into()));
    }
    let model = LinearThrustModel::from_file(model_path)?;
    let gains = vec![gain; n];
    let sys = build_acl(model.a, model.b, &gains, &vec![true; n], model.ts)?;
    let baseline = spectrum(&sys.a_cl)?;
    let sweep_report = if sweep {
        let mode = if n <= 4 {
            SweepMode::Exhaustive
        } else {
            SweepMode::Sampled {
                count: 200,
                seed: 0,
            }
        };
        Some(sweep_patterns(model.a, model.b, &gains, model.ts, mode)?)
    } else {
        None
    };
    let report_path = report.unwrap_or_else(|| with_stem(model_path, "_spectrum.txt"));
    let csv_path = csv.unwrap_or_else(|| with_stem(model_path, "_spectrum.csv"));
    write_reports(&report_path, &csv_path, &baseline, sweep_report.as_ref())?;
    println!(
        "unit_circle_eigenvalues = {}",
        baseline.count_on_unit_circle
    );
    println!(
        "max_interior_modulus = {:.9}",
        baseline.max_interior_modulus
    );
    println!("stable = {}", baseline.stable);
    if let Some(s) = &sweep_report {
        println!("sweep_patterns = {}", s.entries.len());
        println!("sweep_all_ok = {}", s.all_ok);
    }
    println!("report = {}", report_path.display());
    println!("csv = {}", csv_path.display());
    Ok(())
}

fn cmd_compare(run_a: &Path, run_b: &Path) -> Result<()> {
    let a = read_metrics(run_a)?;
    let b = read_metrics(run_b)?;
    print!("{}", compare_cases(&a, &b)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config } => cmd_simulate(&config),
        Command::Identify { config } => cmd_identify(&config),
        Command::Analyze {
            model,
            sweep,
            n,
            gain,
            report,
            csv,
        } => cmd_analyze(&model, sweep, n, gain, report, csv),
        Command::Compare { run_a, run_b } => cmd_compare(&run_a, &run_b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
