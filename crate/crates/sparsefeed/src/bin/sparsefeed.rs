//! Experiment CLI: run one config, sweep a grid, validate the diagnostic
//! suite, or compare several configs into plot data.
//!
//! Exit codes: 0 ok, 1 check failure, 2 config error, 3 I/O.

use clap::{Parser, Subcommand};
use sparsefeed::config::{parse_config, ExperimentConfig, OutputRuleSpec, ProblemSpec};
use sparsefeed::diagnostics::{format_report_table, run_suite, SuiteProfile};
use sparsefeed::error::Error;
use sparsefeed::optimizers::{select_output, OutputRule};
use sparsefeed::report::{
    aggregate_series, emit_plot_data, logreg_curves, parse_grid, plot_series, sweep,
    write_metrics, Metric,
};
use sparsefeed::rng::Streams;
use sparsefeed::simulator::{run_experiment, SPLIT_SEED};
use sparsefeed::trace::Trace;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sparsefeed",
    about = "Sparsified SGD with error feedback and Nesterov acceleration, simulated on one node"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Write logged metrics CSV here (per repeat: suffix _repN for N > 0).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross product of a config template and a grid file.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Output directory for per-run metrics and summary.csv.
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
    },
    /// Run the diagnostic checks and print their table.
    Validate {
        /// fast or full
        #[arg(long, default_value = "fast")]
        suite: String,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
    },
    /// Run several configs and emit aligned plot data per method.
    Compare {
        configs: Vec<PathBuf>,
        #[arg(long)]
        emit_plots: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Invalid(_) => 2,
        Error::Io(_) | Error::Data(_) => 3,
        Error::ShadowIdentity { .. } => 1,
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    if let Ok(seed) = std::env::var("SPARSEFEED_SEED") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::Config(format!("SPARSEFEED_SEED: not an integer: '{seed}'")))?;
        config.seed = seed;
    }
    Ok(config)
}

fn print_run_banner(config: &ExperimentConfig) {
    println!(
        "method={} fingerprint={:016x} seed={}",
        config.method,
        config.fingerprint(),
        config.seed
    );
}

fn run_repeats(config: &ExperimentConfig) -> Result<Vec<Trace>, Error> {
    let mut traces = Vec::with_capacity(config.repeats);
    for rep in 0..config.repeats {
        let mut c = config.clone();
        c.seed = config.seed + rep as u64;
        traces.push(run_experiment(&c)?);
    }
    Ok(traces)
}

fn report_selected(config: &ExperimentConfig, trace: &Trace) -> Result<(), Error> {
    if let Some(s) = trace.selected_stage {
        println!("selected stage: {s} of {}", trace.stages.len());
        return Ok(());
    }
    let rule = match config.output_rule {
        OutputRuleSpec::Last => OutputRule::Last,
        OutputRuleSpec::Uniform => OutputRule::Uniform,
        OutputRuleSpec::Geometric => {
            let mu = config.mu_hint.unwrap_or(0.0);
            if !(config.eta * mu > 0.0 && config.eta * mu < 1.0) {
                println!("selected iterate: (geometric rule needs 0 < eta*mu < 1; skipping)");
                return Ok(());
            }
            OutputRule::Geometric { eta: config.eta, mu }
        }
    };
    let mut rng = Streams::new(trace.seed).run_level(2);
    let (t, _) = select_output(trace, rule, &mut rng)?;
    println!("selected iterate: round {t}");
    Ok(())
}

fn cmd_run(config_path: &Path, out: Option<&Path>) -> Result<(), Error> {
    let config = load_config(config_path)?;
    print_run_banner(&config);
    let traces = run_repeats(&config)?;
    for (rep, trace) in traces.iter().enumerate() {
        let rec = trace.final_record();
        println!(
            "repeat {rep}: rounds={} final_loss={:.6e} grad_norm_sq={:.6e} comm_raw={} comm_capped={}",
            trace.rounds, rec.loss, rec.grad_norm_sq, rec.comm_raw_cum, rec.comm_capped_cum
        );
        if let Some(out) = out {
            let path = if rep == 0 {
                out.to_path_buf()
            } else {
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
                let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
                out.with_file_name(format!("{stem}_rep{rep}.{ext}"))
            };
            write_metrics(trace, &path)?;
            println!("repeat {rep}: metrics -> {}", path.display());
        }
    }
    report_selected(&config, &traces[0])?;
    Ok(())
}

fn cmd_sweep(config_path: &Path, grid_path: &Path, out: &Path) -> Result<(), Error> {
    let config = load_config(config_path)?;
    let grid_text = std::fs::read_to_string(grid_path)
        .map_err(|e| Error::Data(format!("{}: {e}", grid_path.display())))?;
    let grid = parse_grid(&grid_text)?;
    print_run_banner(&config);
    let cells = sweep(&config, &grid, out)?;
    println!("{} cells -> {}", cells.len(), out.display());
    for c in &cells {
        let overrides: Vec<String> = c.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "cell {:03} [{}]: mean final loss {:.6e} (std {:.2e}, {} repeats)",
            c.index,
            overrides.join(", "),
            c.mean_final_loss,
            c.std_final_loss,
            c.final_losses.len()
        );
    }
    Ok(())
}

fn cmd_validate(suite: &str, seed: u64) -> Result<bool, Error> {
    let profile = match suite {
        "fast" => SuiteProfile::Fast,
        "full" => SuiteProfile::Full,
        other => {
            return Err(Error::Config(format!(
                "--suite: expected fast or full, got '{other}'"
            )))
        }
    };
    let reports = run_suite(profile, seed)?;
    print!("{}", format_report_table(&reports));
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!(
        "{} checks, {} failed (suite={suite}, seed={seed})",
        reports.len(),
        failed
    );
    Ok(failed == 0)
}

fn cmd_compare(config_paths: &[PathBuf], plot_dir: &Path) -> Result<(), Error> {
    if config_paths.is_empty() {
        return Err(Error::Config("compare: need at least one config".into()));
    }
    let mut series = Vec::new();
    for path in config_paths {
        let config = load_config(path)?;
        print_run_banner(&config);
        let traces = run_repeats(&config)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("run")
            .to_string();
        for metric in [Metric::Loss, Metric::GradNormSq, Metric::MemNormSq] {
            series.push((
                format!("{stem}_{}", metric.name()),
                plot_series(&traces, metric)?,
            ));
        }
        // classification curves for dataset problems, from stored iterates
        if let ProblemSpec::LogReg { path: data_path, l2, label_column, normalize } =
            &config.problem
        {
            let mut dataset = if data_path.extension().and_then(|e| e.to_str()) == Some("csv") {
                sparsefeed::data::load_csv(data_path, label_column.unwrap_or(0))?
            } else {
                sparsefeed::data::load_libsvm(data_path)?
            };
            if *normalize {
                sparsefeed::data::normalize_features(&mut dataset.features);
            }
            let classes = dataset.classes();
            let (train, test) = sparsefeed::data::split_train_test(&dataset, 0.2, SPLIT_SEED);
            let mut named: std::collections::BTreeMap<String, Vec<Vec<(u64, f64)>>> =
                Default::default();
            for trace in &traces {
                for (name, pts) in logreg_curves(trace, &train, &test, classes, *l2) {
                    named.entry(name).or_default().push(pts);
                }
            }
            for (name, runs) in named {
                series.push((format!("{stem}_{name}"), aggregate_series(&runs)?));
            }
        }
        let last = traces[0].final_record();
        println!(
            "{stem} ({}): final loss {:.6e}, ||grad||^2 {:.6e}",
            config.method, last.loss, last.grad_norm_sq
        );
    }
    let files = emit_plot_data(plot_dir, &series)?;
    println!("{} plot files -> {}", files.len(), plot_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, Error> = match &cli.command {
        Command::Run { config, out } => cmd_run(config, out.as_deref()).map(|_| true),
        Command::Sweep { config, grid, out } => cmd_sweep(config, grid, out).map(|_| true),
        Command::Validate { suite, seed } => cmd_validate(suite, *seed),
        Command::Compare { configs, emit_plots } => {
            cmd_compare(configs, emit_plots).map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
