//! Experiment configuration: key=value text with optional `[problem]`
//! section, strict unknown-key rejection, and a stable fingerprint.

use crate::error::{Error, Result};
use crate::optimizers::ZCorrection;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

/// Optimization method to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ParallelSgd,
    NaiveSparse,
    TopkEf,
    SSgdEf,
    Snag,
    SSnagEf,
    RegSSnagEf,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "parallel_sgd" => Method::ParallelSgd,
            "naive_sparse" => Method::NaiveSparse,
            "topk_ef" => Method::TopkEf,
            "s_sgd_ef" => Method::SSgdEf,
            "snag" => Method::Snag,
            "s_snag_ef" => Method::SSnagEf,
            "reg_s_snag_ef" => Method::RegSSnagEf,
            other => {
                return Err(Error::Config(format!(
                    "method: unknown value '{other}' (expected parallel_sgd, naive_sparse, \
                     topk_ef, s_sgd_ef, snag, s_snag_ef, reg_s_snag_ef)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::ParallelSgd => "parallel_sgd",
            Method::NaiveSparse => "naive_sparse",
            Method::TopkEf => "topk_ef",
            Method::SSgdEf => "s_sgd_ef",
            Method::Snag => "snag",
            Method::SSnagEf => "s_snag_ef",
            Method::RegSSnagEf => "reg_s_snag_ef",
        }
    }

    /// Methods that track error-feedback memory.
    pub fn has_memory(&self) -> bool {
        !matches!(self, Method::ParallelSgd | Method::Snag)
    }

    /// Methods built on the three-sequence transition.
    pub fn is_accelerated(&self) -> bool {
        matches!(self, Method::Snag | Method::SSnagEf | Method::RegSSnagEf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which problem the run optimizes.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic { d: usize, l: f64, mu: f64, n_per_worker: usize, seed: u64, center_scale: f64 },
    LogReg { path: PathBuf, l2: f64, label_column: Option<usize>, normalize: bool },
    Nonconvex { d: usize, n_per_worker: usize, seed: u64 },
}

/// Kept-coordinate budget: absolute or as a fraction of the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSpec {
    Absolute(usize),
    Ratio(f64),
}

impl KSpec {
    /// Resolve against the problem dimension. Ratios round half up, clamp to
    /// `[min_k, d]`.
    pub fn resolve(&self, d: usize, min_k: usize) -> Result<usize> {
        let k = match self {
            KSpec::Absolute(k) => *k,
            KSpec::Ratio(r) => {
                if !(*r > 0.0 && *r <= 1.0) {
                    return Err(Error::Config(format!(
                        "k_ratio: must lie in (0, 1], got {r}"
                    )));
                }
                (r * d as f64 + 0.5).floor() as usize
            }
        };
        let k = k.max(min_k).min(d);
        if k == 0 {
            return Err(Error::Config("k: resolved to 0".into()));
        }
        Ok(k)
    }
}

/// Output-selection rule named in a config; the geometric rule resolves its
/// rate from `eta` and `mu_hint` at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputRuleSpec {
    Last,
    Geometric,
    Uniform,
}

/// Everything a run needs, plus the repetition and logging policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub problem: ProblemSpec,
    pub workers: usize,
    pub k: KSpec,
    pub eta: f64,
    pub mu_hint: Option<f64>,
    /// Error-feedback scale; defaults to `0.5 * k/d` at resolution time.
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub rounds: u64,
    pub stages: u64,
    pub seed: u64,
    /// Logging cadence; defaults to `max(1, rounds/500)`.
    pub log_every: Option<u64>,
    pub repeats: usize,
    pub output_rule: OutputRuleSpec,
    /// Maintain the uncompressed shadow trajectory and assert the
    /// real-minus-shadow identity every round.
    pub shadow: bool,
    /// Use exact partition gradients instead of single-sample draws.
    pub full_batch: bool,
    pub z_correction: ZCorrection,
}

impl ExperimentConfig {
    pub fn effective_log_every(&self) -> u64 {
        self.log_every.unwrap_or_else(|| (self.rounds / 500).max(1))
    }

    /// Default feedback scale per the tuning guidance: `0.5 * k/d`.
    pub fn effective_gamma(&self, k: usize, d: usize) -> f64 {
        self.gamma.unwrap_or(0.5 * k as f64 / d as f64)
    }

    /// Smallest admissible k for the method (the accelerated method sends
    /// two messages per worker).
    pub fn min_k(&self) -> usize {
        if matches!(self.method, Method::SSnagEf | Method::RegSSnagEf) {
            2
        } else {
            1
        }
    }

    /// Cross-field validation beyond per-key parsing.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers: must be >= 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config("eta: must be > 0".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats: must be >= 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!("gamma: must lie in [0, 1], got {g}")));
            }
        }
        // the staged method derives its inner strong convexity from sigma,
        // so mu_hint is only required for the single-stage accelerated runs
        match self.method {
            Method::SSnagEf | Method::Snag => {
                let mu = self.mu_hint.ok_or_else(|| {
                    Error::Config(format!(
                        "mu_hint: required by method {} (accelerated schedule input)",
                        self.method
                    ))
                })?;
                if !(mu > 0.0) {
                    return Err(Error::Config("mu_hint: must be > 0".into()));
                }
            }
            _ => {}
        }
        if self.method == Method::RegSSnagEf {
            match self.sigma {
                Some(s) if s > 0.0 => {}
                _ => {
                    return Err(Error::Config(
                        "sigma: reg_s_snag_ef requires sigma > 0".into(),
                    ))
                }
            }
            if self.stages == 0 {
                return Err(Error::Config("stages: reg_s_snag_ef requires stages >= 1".into()));
            }
        }
        Ok(())
    }

    /// Canonical text rendering; parseable, key-sorted, suitable for
    /// fingerprinting and round-tripping.
    pub fn to_canonical_text(&self) -> String {
        let mut root: BTreeMap<&str, String> = BTreeMap::new();
        root.insert("method", self.method.name().into());
        root.insert("workers", self.workers.to_string());
        match self.k {
            KSpec::Absolute(k) => root.insert("k", k.to_string()),
            KSpec::Ratio(r) => root.insert("k_ratio", fmt_f64(r)),
        };
        root.insert("eta", fmt_f64(self.eta));
        if let Some(v) = self.mu_hint {
            root.insert("mu_hint", fmt_f64(v));
        }
        if let Some(v) = self.gamma {
            root.insert("gamma", fmt_f64(v));
        }
        if let Some(v) = self.sigma {
            root.insert("sigma", fmt_f64(v));
        }
        root.insert("rounds", self.rounds.to_string());
        root.insert("stages", self.stages.to_string());
        root.insert("seed", self.seed.to_string());
        if let Some(v) = self.log_every {
            root.insert("log_every", v.to_string());
        }
        root.insert("repeats", self.repeats.to_string());
        root.insert(
            "output_rule",
            match self.output_rule {
                OutputRuleSpec::Last => "last",
                OutputRuleSpec::Geometric => "geometric",
                OutputRuleSpec::Uniform => "uniform",
            }
            .into(),
        );
        root.insert("shadow", self.shadow.to_string());
        root.insert("full_batch", self.full_batch.to_string());
        root.insert(
            "z_correction",
            match self.z_correction {
                ZCorrection::Combined => "combined",
                ZCorrection::Conservative => "conservative",
            }
            .into(),
        );

        let mut problem: BTreeMap<&str, String> = BTreeMap::new();
        match &self.problem {
            ProblemSpec::Quadratic { d, l, mu, n_per_worker, seed, center_scale } => {
                problem.insert("kind", "quadratic".into());
                problem.insert("d", d.to_string());
                problem.insert("l", fmt_f64(*l));
                problem.insert("mu", fmt_f64(*mu));
                problem.insert("n_per_worker", n_per_worker.to_string());
                problem.insert("seed", seed.to_string());
                problem.insert("center_scale", fmt_f64(*center_scale));
            }
            ProblemSpec::LogReg { path, l2, label_column, normalize } => {
                problem.insert("kind", "logreg".into());
                problem.insert("path", path.display().to_string());
                problem.insert("l2", fmt_f64(*l2));
                if let Some(c) = label_column {
                    problem.insert("label_column", c.to_string());
                }
                problem.insert("normalize", normalize.to_string());
            }
            ProblemSpec::Nonconvex { d, n_per_worker, seed } => {
                problem.insert("kind", "nonconvex".into());
                problem.insert("d", d.to_string());
                problem.insert("n_per_worker", n_per_worker.to_string());
                problem.insert("seed", seed.to_string());
            }
        }

        let mut out = String::new();
        for (k, v) in &root {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str("\n[problem]\n");
        for (k, v) in &problem {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// FNV-1a hash of the canonical text.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.to_canonical_text().as_bytes())
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip representation
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct RawConfig {
    root: BTreeMap<String, String>,
    problem: BTreeMap<String, String>,
}

fn split_sections(text: &str) -> Result<RawConfig> {
    let mut root = BTreeMap::new();
    let mut problem = BTreeMap::new();
    let mut section: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Config(format!(
                    "line {}: malformed section header '{line}'",
                    lineno + 1
                )));
            }
            let name = line[1..line.len() - 1].trim().to_string();
            if name != "problem" {
                return Err(Error::Config(format!(
                    "line {}: unknown section '[{name}]' (only [problem] is allowed)",
                    lineno + 1
                )));
            }
            section = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let target = match section.as_deref() {
            Some(_) => &mut problem,
            None => &mut root,
        };
        if target.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(RawConfig { root, problem })
}

struct KeyReader<'a> {
    map: &'a BTreeMap<String, String>,
    scope: &'a str,
    used: std::cell::RefCell<Vec<String>>,
}

impl<'a> KeyReader<'a> {
    fn new(map: &'a BTreeMap<String, String>, scope: &'a str) -> Self {
        Self { map, scope, used: std::cell::RefCell::new(Vec::new()) }
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.used.borrow_mut().push(key.to_string());
        self.map.get(key).map(|s| s.as_str())
    }

    fn required(&self, key: &str) -> Result<&'a str> {
        self.raw(key).ok_or_else(|| {
            Error::Config(format!("{}{key}: missing required key", self.scope))
        })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, kind: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("{}{key}: expected {kind}, got '{v}'", self.scope))
            }),
        }
    }

    fn parse_required<T: std::str::FromStr>(&self, key: &str, kind: &str) -> Result<T> {
        self.required(key)?;
        Ok(self.parse::<T>(key, kind)?.unwrap())
    }

    fn reject_unknown(&self) -> Result<()> {
        let used = self.used.borrow();
        for key in self.map.keys() {
            if !used.iter().any(|u| u == key) {
                return Err(Error::Config(format!("{}{key}: unknown key", self.scope)));
            }
        }
        Ok(())
    }
}

fn parse_bool(reader: &KeyReader, key: &str, default: bool) -> Result<bool> {
    match reader.raw(key) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(v) => Err(Error::Config(format!(
            "{}{key}: expected true or false, got '{v}'",
            reader.scope
        ))),
    }
}

/// Parse a configuration from key=value text with an optional `[problem]`
/// section. Unknown keys are hard errors; every error names the offending
/// key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw = split_sections(text)?;
    let root = KeyReader::new(&raw.root, "");
    let prob = KeyReader::new(&raw.problem, "problem.");

    let method = Method::parse(root.required("method")?)?;

    let kind = prob.required("kind")?;
    let problem = match kind {
        "quadratic" => ProblemSpec::Quadratic {
            d: prob.parse_required("d", "a positive integer")?,
            l: prob.parse_required("l", "a number")?,
            mu: prob.parse_required("mu", "a number")?,
            n_per_worker: prob.parse_required("n_per_worker", "a positive integer")?,
            seed: prob.parse::<u64>("seed", "an integer")?.unwrap_or(0),
            center_scale: prob.parse::<f64>("center_scale", "a number")?.unwrap_or(1.0),
        },
        "logreg" => ProblemSpec::LogReg {
            path: PathBuf::from(prob.required("path")?),
            l2: prob.parse::<f64>("l2", "a number")?.unwrap_or(1e-4),
            label_column: prob.parse::<usize>("label_column", "a column index")?,
            normalize: parse_bool(&prob, "normalize", false)?,
        },
        "nonconvex" => ProblemSpec::Nonconvex {
            d: prob.parse_required("d", "a positive integer")?,
            n_per_worker: prob.parse_required("n_per_worker", "a positive integer")?,
            seed: prob.parse::<u64>("seed", "an integer")?.unwrap_or(0),
        },
        other => {
            return Err(Error::Config(format!(
                "problem.kind: unknown value '{other}' (expected quadratic, logreg, nonconvex)"
            )))
        }
    };

    let k_abs = root.parse::<usize>("k", "a positive integer")?;
    let k_ratio = root.parse::<f64>("k_ratio", "a fraction in (0, 1]")?;
    let k = match (k_abs, k_ratio) {
        (Some(k), None) => KSpec::Absolute(k),
        (None, Some(r)) => KSpec::Ratio(r),
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "k, k_ratio: exactly one may be given, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Config("k: either k or k_ratio is required".into()))
        }
    };

    let output_rule = match root.raw("output_rule") {
        None | Some("last") => OutputRuleSpec::Last,
        Some("geometric") => OutputRuleSpec::Geometric,
        Some("uniform") => OutputRuleSpec::Uniform,
        Some(v) => {
            return Err(Error::Config(format!(
                "output_rule: unknown value '{v}' (expected last, geometric, uniform)"
            )))
        }
    };
    let z_correction = match root.raw("z_correction") {
        None | Some("combined") => ZCorrection::Combined,
        Some("conservative") => ZCorrection::Conservative,
        Some(v) => {
            return Err(Error::Config(format!(
                "z_correction: unknown value '{v}' (expected combined, conservative)"
            )))
        }
    };

    let config = ExperimentConfig {
        method,
        problem,
        workers: root.parse_required("workers", "a positive integer")?,
        k,
        eta: root.parse_required("eta", "a number")?,
        mu_hint: root.parse("mu_hint", "a number")?,
        gamma: root.parse("gamma", "a number")?,
        sigma: root.parse("sigma", "a number")?,
        rounds: root.parse_required("rounds", "an integer")?,
        stages: root.parse::<u64>("stages", "an integer")?.unwrap_or(1),
        seed: root.parse::<u64>("seed", "an integer")?.unwrap_or(0),
        log_every: root.parse("log_every", "an integer")?,
        repeats: root.parse::<usize>("repeats", "an integer")?.unwrap_or(1),
        output_rule,
        shadow: parse_bool(&root, "shadow", false)?,
        full_batch: parse_bool(&root, "full_batch", false)?,
        z_correction,
    };
    root.reject_unknown()?;
    prob.reject_unknown()?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
method = s_sgd_ef
workers = 4
k_ratio = 0.1
eta = 0.01
rounds = 100
seed = 3

[problem]
kind = quadratic
d = 20
l = 2.0
mu = 0.5
n_per_worker = 5
seed = 7
";

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.method, Method::SSgdEf);
        assert_eq!(c.stages, 1);
        assert_eq!(c.repeats, 1);
        assert_eq!(c.output_rule, OutputRuleSpec::Last);
        assert_eq!(c.effective_log_every(), 1);
        // gamma defaults to 0.5 * k/d
        let k = c.k.resolve(20, c.min_k()).unwrap();
        assert_eq!(k, 2);
        assert!((c.effective_gamma(k, 20) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn k_ratio_rounds_half_up_with_min_two() {
        // 0.01 * 3072 = 30.72 -> 31
        assert_eq!(KSpec::Ratio(0.01).resolve(3072, 2).unwrap(), 31);
        // tiny ratios clamp to the method minimum
        assert_eq!(KSpec::Ratio(0.0001).resolve(100, 2).unwrap(), 2);
        assert_eq!(KSpec::Ratio(0.0001).resolve(100, 1).unwrap(), 1);
        // exact halves round up
        assert_eq!(KSpec::Ratio(0.25).resolve(10, 1).unwrap(), 3); // 2.5 -> 3
    }

    #[test]
    fn both_k_and_ratio_rejected() {
        let text = MINIMAL.replace("k_ratio = 0.1", "k_ratio = 0.1\nk = 4");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("exactly one"));
    }

    #[test]
    fn unknown_key_is_hard_error_naming_key() {
        let text = format!("{MINIMAL}\nbogus_key = 1\n");
        // appended after the [problem] section, so it lands there
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        let text = MINIMAL.replace("eta = 0.01", "eta = 0.01\nmystery = 2");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn missing_required_key_names_it() {
        let text = MINIMAL.replace("eta = 0.01\n", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("eta"), "{err}");
    }

    #[test]
    fn type_mismatch_names_key() {
        let text = MINIMAL.replace("rounds = 100", "rounds = lots");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("rounds"), "{err}");
    }

    #[test]
    fn accelerated_requires_mu_hint() {
        let text = MINIMAL.replace("method = s_sgd_ef", "method = s_snag_ef");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("mu_hint"), "{err}");
        let ok = MINIMAL.replace("method = s_sgd_ef", "method = s_snag_ef\nmu_hint = 0.5");
        assert!(parse_config(&ok).is_ok());
    }

    #[test]
    fn reg_method_requires_sigma_and_stages() {
        let text = MINIMAL.replace(
            "method = s_sgd_ef",
            "method = reg_s_snag_ef\nmu_hint = 0.5",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = parse_config(MINIMAL).unwrap();
        let text = c.to_canonical_text();
        let reparsed = parse_config(&text).unwrap();
        assert_eq!(c, reparsed);
        assert_eq!(c.fingerprint(), reparsed.fingerprint());
    }

    #[test]
    fn fingerprint_changes_with_any_field() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = a.clone();
        b.seed = 4;
        assert_ne!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.eta = 0.02;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = format!("# experiment\n\n{MINIMAL}\n# done\n");
        assert!(parse_config(&text).is_ok());
    }
}
