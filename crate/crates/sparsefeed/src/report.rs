//! Metrics serialization, sweep execution, and plot-data emission.
//!
//! Metrics files are deterministic: floats print with 17 significant digits,
//! so re-running an identical config reproduces the file byte for byte.

use crate::config::ExperimentConfig;
use crate::data::{argmax_accuracy, multinomial_ce_loss, Dataset};
use crate::error::{Error, Result};
use crate::simulator::run_experiment;
use crate::trace::Trace;
use crate::vecops::norm_sq;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a trace's logged records as CSV.
pub fn write_metrics(trace: &Trace, path: &Path) -> Result<()> {
    let mut out = String::from("iter,loss,grad_norm_sq,mem_norm_sq,comm_raw_cum,comm_capped_cum\n");
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.t,
            fmt17(r.loss),
            fmt17(r.grad_norm_sq),
            fmt17(r.mem_norm_sq),
            r.comm_raw_cum,
            r.comm_capped_cum
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Which logged column a plot series draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Loss,
    GradNormSq,
    MemNormSq,
    CommRawCum,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Loss => "loss",
            Metric::GradNormSq => "grad_norm_sq",
            Metric::MemNormSq => "mem_norm_sq",
            Metric::CommRawCum => "comm_raw_cum",
        }
    }

    fn extract(&self, trace: &Trace) -> Vec<(u64, f64)> {
        trace
            .records
            .iter()
            .map(|r| {
                let v = match self {
                    Metric::Loss => r.loss,
                    Metric::GradNormSq => r.grad_norm_sq,
                    Metric::MemNormSq => r.mem_norm_sq,
                    Metric::CommRawCum => r.comm_raw_cum as f64,
                };
                (r.t, v)
            })
            .collect()
    }
}

/// One aggregated plot row: iteration, mean over runs, sample std.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub iter: u64,
    pub mean: f64,
    pub std: f64,
}

/// Aggregate per-run `(iteration, value)` series into mean/std rows.
/// Mismatched logging grids resample onto the coarsest one (the run with the
/// fewest points); each run contributes its latest value at or before the
/// target iteration.
pub fn aggregate_series(runs: &[Vec<(u64, f64)>]) -> Result<Vec<SeriesPoint>> {
    if runs.is_empty() || runs.iter().any(|r| r.is_empty()) {
        return Err(Error::Invalid("aggregate_series: empty input series".into()));
    }
    let grid: Vec<u64> = runs
        .iter()
        .min_by_key(|r| r.len())
        .unwrap()
        .iter()
        .map(|(t, _)| *t)
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for &t in &grid {
        let mut vals = Vec::with_capacity(runs.len());
        for run in runs {
            let v = run
                .iter()
                .take_while(|(tt, _)| *tt <= t)
                .last()
                .map(|(_, v)| *v)
                .unwrap_or(run[0].1);
            vals.push(v);
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        points.push(SeriesPoint { iter: t, mean, std });
    }
    Ok(points)
}

/// Aggregate a logged metric across repeated runs.
pub fn plot_series(traces: &[Trace], metric: Metric) -> Result<Vec<SeriesPoint>> {
    let runs: Vec<Vec<(u64, f64)>> = traces.iter().map(|t| metric.extract(t)).collect();
    aggregate_series(&runs)
}

/// Write one whitespace-delimited plot file per named series:
/// columns `iter mean std`. Returns the written paths.
pub fn emit_plot_data(
    dir: &Path,
    series: &[(String, Vec<SeriesPoint>)],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, points) in series {
        let mut out = String::from("# iter mean std\n");
        for p in points {
            out.push_str(&format!("{} {} {}\n", p.iter, fmt17(p.mean), fmt17(p.std)));
        }
        let path = dir.join(format!("{name}.dat"));
        std::fs::write(&path, out)?;
        written.push(path);
    }
    Ok(written)
}

/// Post-hoc classification curves for a logistic-regression run, evaluated
/// at the stored iterates: regularized and plain train loss, test loss, and
/// argmax accuracies.
pub fn logreg_curves(
    trace: &Trace,
    train: &Dataset,
    test: &Dataset,
    classes: usize,
    l2: f64,
) -> Vec<(String, Vec<(u64, f64)>)> {
    let mut train_loss = Vec::new();
    let mut train_loss_plain = Vec::new();
    let mut train_acc = Vec::new();
    let mut test_loss = Vec::new();
    let mut test_acc = Vec::new();
    for (t, x) in &trace.stored_iterates {
        let plain = multinomial_ce_loss(train, classes, x);
        let reg = plain + 0.5 * l2 * norm_sq(x);
        train_loss.push((*t, reg));
        train_loss_plain.push((*t, plain));
        train_acc.push((*t, argmax_accuracy(train, classes, x)));
        if !test.is_empty() {
            test_loss.push((*t, multinomial_ce_loss(test, classes, x)));
            test_acc.push((*t, argmax_accuracy(test, classes, x)));
        }
    }
    let mut out = vec![
        ("train_loss".to_string(), train_loss),
        ("train_loss_plain".to_string(), train_loss_plain),
        ("train_accuracy".to_string(), train_acc),
    ];
    if !test.is_empty() {
        out.push(("test_loss".to_string(), test_loss));
        out.push(("test_accuracy".to_string(), test_acc));
    }
    out
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// A sweep grid: ordered axes of `key -> candidate values`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axes: Vec<(String, Vec<String>)>,
}

/// Parse a grid file: one `key = v1, v2, v3` line per axis.
pub fn parse_grid(text: &str) -> Result<SweepGrid> {
    let mut axes = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, values)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "grid line {}: expected 'key = v1, v2, ...'",
                lineno + 1
            )));
        };
        let values: Vec<String> =
            values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::Config(format!(
                "grid line {}: axis '{}' has no values",
                lineno + 1,
                key.trim()
            )));
        }
        axes.push((key.trim().to_string(), values));
    }
    if axes.is_empty() {
        return Err(Error::Config("grid: no axes given".into()));
    }
    Ok(SweepGrid { axes })
}

/// Apply one `key = value` override to a config.
pub fn apply_override(config: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let bad = |kind: &str| Error::Config(format!("sweep override {key}: expected {kind}, got '{value}'"));
    match key {
        "eta" => config.eta = value.parse().map_err(|_| bad("a number"))?,
        "gamma" => config.gamma = Some(value.parse().map_err(|_| bad("a number"))?),
        "mu_hint" => config.mu_hint = Some(value.parse().map_err(|_| bad("a number"))?),
        "sigma" => config.sigma = Some(value.parse().map_err(|_| bad("a number"))?),
        "k" => config.k = crate::config::KSpec::Absolute(value.parse().map_err(|_| bad("an integer"))?),
        "k_ratio" => {
            config.k = crate::config::KSpec::Ratio(value.parse().map_err(|_| bad("a fraction"))?)
        }
        "workers" => config.workers = value.parse().map_err(|_| bad("an integer"))?,
        "rounds" => config.rounds = value.parse().map_err(|_| bad("an integer"))?,
        "stages" => config.stages = value.parse().map_err(|_| bad("an integer"))?,
        "seed" => config.seed = value.parse().map_err(|_| bad("an integer"))?,
        "method" => config.method = crate::config::Method::parse(value)?,
        other => {
            return Err(Error::Config(format!(
                "sweep override {other}: not a sweepable key (eta, gamma, mu_hint, sigma, k, \
                 k_ratio, workers, rounds, stages, seed, method)"
            )))
        }
    }
    Ok(())
}

/// One executed sweep cell.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub index: usize,
    pub overrides: Vec<(String, String)>,
    pub final_losses: Vec<f64>,
    pub mean_final_loss: f64,
    pub std_final_loss: f64,
    pub metric_files: Vec<PathBuf>,
}

/// Cross-product sweep: every grid cell runs `repeats` times with seeds
/// `seed, seed+1, ...`; each run's metrics land in `out_dir`, and a
/// `summary.csv` records the mean and sample std of the final loss per cell.
/// Cells run concurrently; outputs are keyed by cell index so the result is
/// scheduling-independent.
pub fn sweep(
    template: &ExperimentConfig,
    grid: &SweepGrid,
    out_dir: &Path,
) -> Result<Vec<SweepCell>> {
    std::fs::create_dir_all(out_dir)?;
    // enumerate the cross product, first axis slowest
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in &grid.axes {
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for cell in &cells {
            for v in values {
                let mut c = cell.clone();
                c.push((key.clone(), v.clone()));
                next.push(c);
            }
        }
        cells = next;
    }

    let results: Vec<Result<SweepCell>> = cells
        .par_iter()
        .enumerate()
        .map(|(index, overrides)| {
            let mut config = template.clone();
            for (k, v) in overrides {
                apply_override(&mut config, k, v)?;
            }
            config.validate()?;
            let mut final_losses = Vec::with_capacity(config.repeats);
            let mut metric_files = Vec::with_capacity(config.repeats);
            for rep in 0..config.repeats {
                let mut run_cfg = config.clone();
                run_cfg.seed = config.seed + rep as u64;
                let trace = run_experiment(&run_cfg)?;
                let path = out_dir.join(format!("cell{index:03}_rep{rep}.csv"));
                write_metrics(&trace, &path)?;
                final_losses.push(trace.final_loss());
                metric_files.push(path);
            }
            let n = final_losses.len() as f64;
            let mean = final_losses.iter().sum::<f64>() / n;
            let std = if final_losses.len() > 1 {
                (final_losses.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            Ok(SweepCell {
                index,
                overrides: overrides.clone(),
                final_losses,
                mean_final_loss: mean,
                std_final_loss: std,
                metric_files,
            })
        })
        .collect();

    let mut cells: Vec<SweepCell> = results.into_iter().collect::<Result<_>>()?;
    cells.sort_by_key(|c| c.index);

    let mut summary = String::from("cell,overrides,repeats,mean_final_loss,std_final_loss\n");
    for c in &cells {
        let overrides: Vec<String> =
            c.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            c.index,
            overrides.join(";"),
            c.final_losses.len(),
            fmt17(c.mean_final_loss),
            fmt17(c.std_final_loss)
        ));
    }
    std::fs::write(out_dir.join("summary.csv"), summary)?;
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{KSpec, Method, OutputRuleSpec, ProblemSpec};
    use crate::optimizers::ZCorrection;

    fn tmpdir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("sparsefeed-report-tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            method: Method::SSgdEf,
            problem: ProblemSpec::Quadratic {
                d: 8,
                l: 2.0,
                mu: 0.5,
                n_per_worker: 3,
                seed: 7,
                center_scale: 1.0,
            },
            workers: 2,
            k: KSpec::Absolute(2),
            eta: 0.05,
            mu_hint: None,
            gamma: None,
            sigma: None,
            rounds: 20,
            stages: 1,
            seed: 5,
            log_every: Some(5),
            repeats: 1,
            output_rule: OutputRuleSpec::Last,
            shadow: false,
            full_batch: false,
            z_correction: ZCorrection::Combined,
        }
    }

    #[test]
    fn metrics_file_deterministic_and_row_counted() {
        let dir = tmpdir("metrics");
        let cfg = small_config();
        let trace = run_experiment(&cfg).unwrap();
        let p1 = dir.join("a.csv");
        let p2 = dir.join("b.csv");
        write_metrics(&trace, &p1).unwrap();
        write_metrics(&run_experiment(&cfg).unwrap(), &p2).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b, "re-run must be byte-identical");
        let text = String::from_utf8(a).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,loss,grad_norm_sq,mem_norm_sq,comm_raw_cum,comm_capped_cum");
        // header + t=0 + t=5,10,15,20
        assert_eq!(lines.len(), 1 + trace.records.len());
        assert_eq!(trace.records.len(), 5);
    }

    #[test]
    fn zero_round_metrics_has_header_plus_one_row() {
        let dir = tmpdir("metrics0");
        let mut cfg = small_config();
        cfg.rounds = 0;
        let trace = run_experiment(&cfg).unwrap();
        let p = dir.join("zero.csv");
        write_metrics(&trace, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn single_run_err_column_zero() {
        let cfg = small_config();
        let trace = run_experiment(&cfg).unwrap();
        let pts = plot_series(&[trace], Metric::Loss).unwrap();
        assert!(pts.iter().all(|p| p.std == 0.0));
    }

    #[test]
    fn repeats_std_matches_hand_computation() {
        let cfg = small_config();
        let traces: Vec<Trace> = (0..4)
            .map(|r| {
                let mut c = cfg.clone();
                c.seed = cfg.seed + r;
                run_experiment(&c).unwrap()
            })
            .collect();
        let pts = plot_series(&traces, Metric::Loss).unwrap();
        // row 0 is t=0: all runs start at the same x0, so std is exactly 0
        assert_eq!(pts[0].std, 0.0);
        // hand-recompute the sample std on the final row
        let finals: Vec<f64> = traces.iter().map(|t| t.final_loss()).collect();
        let mean = finals.iter().sum::<f64>() / 4.0;
        let std = (finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0).sqrt();
        let last = pts.last().unwrap();
        assert!((last.mean - mean).abs() < 1e-15);
        assert!((last.std - std).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_resample_to_coarsest() {
        let mut c1 = small_config();
        c1.log_every = Some(2);
        let mut c2 = small_config();
        c2.log_every = Some(5);
        let t1 = run_experiment(&c1).unwrap();
        let t2 = run_experiment(&c2).unwrap();
        let pts = plot_series(&[t1, t2.clone()], Metric::Loss).unwrap();
        // coarsest grid is the log_every=5 run's
        let expect: Vec<u64> = t2.records.iter().map(|r| r.t).collect();
        let got: Vec<u64> = pts.iter().map(|p| p.iter).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn emit_plot_data_one_file_per_series() {
        let dir = tmpdir("plots");
        let cfg = small_config();
        let t1 = run_experiment(&cfg).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.method = Method::ParallelSgd;
        let t2 = run_experiment(&cfg2).unwrap();
        let series = vec![
            ("s_sgd_ef_loss".to_string(), plot_series(&[t1], Metric::Loss).unwrap()),
            ("parallel_sgd_loss".to_string(), plot_series(&[t2], Metric::Loss).unwrap()),
        ];
        let files = emit_plot_data(&dir, &series).unwrap();
        assert_eq!(files.len(), 2);
        for f in files {
            let text = std::fs::read_to_string(f).unwrap();
            assert!(text.starts_with("# iter mean std\n"));
            assert!(text.lines().count() > 1);
        }
    }

    #[test]
    fn sweep_single_cell_equals_run_experiment() {
        let dir = tmpdir("sweep1");
        let cfg = small_config();
        let grid = parse_grid("eta = 0.05\n").unwrap();
        let cells = sweep(&cfg, &grid, &dir).unwrap();
        assert_eq!(cells.len(), 1);
        let direct = run_experiment(&cfg).unwrap();
        assert_eq!(cells[0].final_losses[0], direct.final_loss());
        assert_eq!(cells[0].std_final_loss, 0.0);
        assert!(dir.join("summary.csv").exists());
    }

    #[test]
    fn sweep_cross_product_and_repeats() {
        let dir = tmpdir("sweep2");
        let mut cfg = small_config();
        cfg.repeats = 4;
        cfg.rounds = 10;
        let grid = parse_grid("eta = 0.05, 0.01\nk = 2, 4\n").unwrap();
        let cells = sweep(&cfg, &grid, &dir).unwrap();
        assert_eq!(cells.len(), 4);
        for c in &cells {
            assert_eq!(c.final_losses.len(), 4);
            // distinct seeds produce distinct traces
            assert!(c.final_losses.windows(2).any(|w| w[0] != w[1]));
            assert_eq!(c.metric_files.len(), 4);
        }
        let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 5);
        // identical repeats -> mean equals the single value
        let mut cfg1 = small_config();
        cfg1.repeats = 1;
        let one = sweep(&cfg1, &parse_grid("k = 2\n").unwrap(), &tmpdir("sweep3")).unwrap();
        assert_eq!(one[0].mean_final_loss, one[0].final_losses[0]);
    }

    #[test]
    fn grid_parser_rejects_junk() {
        assert!(parse_grid("").is_err());
        assert!(parse_grid("eta\n").is_err());
        assert!(parse_grid("eta =\n").is_err());
        let g = parse_grid("# comment\neta = 1e-1, 1e-2 # tuning\n").unwrap();
        assert_eq!(g.axes[0].1.len(), 2);
    }

    #[test]
    fn override_rejects_unknown_key() {
        let mut cfg = small_config();
        assert!(apply_override(&mut cfg, "bogus", "1").is_err());
        assert!(apply_override(&mut cfg, "eta", "fast").is_err());
        apply_override(&mut cfg, "eta", "0.25").unwrap();
        assert_eq!(cfg.eta, 0.25);
    }

    #[test]
    fn logreg_curves_names_and_lengths() {
        use crate::data::make_blobs;
        let ds = make_blobs(60, 3, 2, 4);
        let (train, test) = crate::data::split_train_test(&ds, 0.2, 1);
        let mut cfg = small_config();
        let dir = tmpdir("logreg");
        let csv = dir.join("train.csv");
        crate::data::write_csv(&train, 0, &csv).unwrap();
        cfg.problem = ProblemSpec::LogReg {
            path: csv,
            l2: 1e-4,
            label_column: Some(0),
            normalize: false,
        };
        cfg.rounds = 10;
        cfg.log_every = Some(5);
        let trace = run_experiment(&cfg).unwrap();
        let curves = logreg_curves(&trace, &train, &test, 2, 1e-4);
        assert_eq!(curves.len(), 5);
        for (name, pts) in &curves {
            assert!(!pts.is_empty(), "{name} empty");
        }
        // regularized loss >= plain loss everywhere
        let reg = &curves[0].1;
        let plain = &curves[1].1;
        for (r, p) in reg.iter().zip(plain) {
            assert!(r.1 >= p.1);
        }
    }
}
