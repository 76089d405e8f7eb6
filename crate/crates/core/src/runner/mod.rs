//! Configuration-driven experiments: named cases, parameter sweeps and report
//! emission with a pass/fail gate.

mod sweep;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::{evolve, FlowParams, FlowState};
use crate::theorem::{
    verify_theorem_b, write_summary_csv, Case, Geometry, LhsOptions, TheoremBReport, Thresholds,
    VerifyOptions,
};
use crate::yamabe::{critical_exponent, solve_subcritical, SubcriticalProblem};

pub use sweep::{convergence_sweep, write_orders_csv, OrderRow};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "YAMABE_LAB_OUT";

/// A geometry given by name with default parameters, or in full.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseSpec {
    Named(String),
    Full(Geometry),
}

impl CaseSpec {
    pub fn geometry(&self) -> Result<Geometry> {
        match self {
            CaseSpec::Full(g) => Ok(g.clone()),
            CaseSpec::Named(name) => match name.as_str() {
                "cylinder" => Ok(Geometry::Cylinder { radius: 1.0 }),
                "hemisphere" => Ok(Geometry::Hemisphere),
                "perturbed_cylinder" => Ok(Geometry::PerturbedCylinder { amplitude: 0.05 }),
                other => Err(LabError::Config(format!(
                    "unknown case {other:?} (expected cylinder, hemisphere or perturbed_cylinder)"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(t) => vec![t.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_n() -> usize {
    3
}

fn default_intervals() -> usize {
    128
}

fn default_true() -> bool {
    true
}

/// An experiment: every case is run at every exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: OneOrMany<CaseSpec>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(rename = "N", default = "default_intervals")]
    pub intervals: usize,
    pub p_list: Vec<f64>,
    /// Time step of the rate difference; `1e-4 / max |R|` when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_true")]
    pub richardson: bool,
    /// Flow parameters; a positive `t_end` also writes a trajectory per case.
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Every case with its geometry resolved.
    pub fn cases(&self) -> Result<Vec<Case>> {
        self.case
            .to_vec()
            .iter()
            .map(|c| Ok(Case::new(c.geometry()?, self.n, self.intervals)))
            .collect()
    }

    /// Checks every parameter before anything is computed.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if self.intervals < 8 {
            return bad(format!("N must be at least 8, got {}", self.intervals));
        }
        if self.p_list.is_empty() {
            return bad("p_list is empty".into());
        }
        let crit = critical_exponent(self.n);
        for &p in &self.p_list {
            if !(p > 1.0 && p <= crit * (1.0 + 1e-12)) {
                return bad(format!(
                    "exponent {p} outside (1, {crit}] for n = {}",
                    self.n
                ));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        self.flow
            .validate()
            .map_err(|e| LabError::Config(e.to_string()))?;
        let t = &self.thresholds;
        for (name, v) in [
            ("rel_error", t.rel_error),
            ("rel_floor", t.rel_floor),
            ("equality_rate", t.equality_rate),
            ("equality_rhs", t.equality_rhs),
            ("einstein", t.einstein),
        ] {
            if !(v > 0.0) {
                return bad(format!("threshold {name} must be positive, got {v}"));
            }
        }
        for c in self.cases()? {
            c.geometry.validate()?;
        }
        Ok(())
    }

    fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            thresholds: self.thresholds.clone(),
            lhs: LhsOptions {
                richardson: self.richardson,
                flow: self.flow.clone(),
                ..LhsOptions::default()
            },
        }
    }
}

/// Output root: explicit value, then the environment, then `yamabe-lab-out`.
pub fn output_root(explicit: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("yamabe-lab-out"))
}

/// Everything produced for one case.
#[derive(Clone, Debug, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub dir: PathBuf,
    pub reports: Vec<TheoremBReport>,
    /// Computation errors; the case's other exponents still run.
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub root: PathBuf,
    pub cases: Vec<CaseOutcome>,
}

impl RunSummary {
    pub fn reports(&self) -> impl Iterator<Item = &TheoremBReport> {
        self.cases.iter().flat_map(|c| c.reports.iter())
    }

    /// A trusted report above its threshold fails the run.
    pub fn failed(&self) -> bool {
        self.reports().any(|r| r.trusted && !r.passed)
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed())
    }
}

fn p_tag(p: f64) -> String {
    format!("{p}").replace('.', "_")
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

/// Unique directory names, suffixed with an index when a name repeats.
fn case_dirs(cases: &[Case]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for c in cases {
        *seen.entry(c.name()).or_default() += 1;
    }
    cases
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let name = c.name();
            if seen[&name] > 1 {
                format!("{name}_{k}")
            } else {
                name
            }
        })
        .collect()
}

fn run_case(case: &Case, dir: &Path, config: &ExperimentConfig) -> Result<CaseOutcome> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut outcome = CaseOutcome {
        name: case.name(),
        dir: dir.to_path_buf(),
        reports: Vec::new(),
        errors: Vec::new(),
    };
    let wm = match case.build() {
        Ok(wm) => wm,
        Err(e) => {
            outcome.errors.push(e.to_string());
            write_file(&dir.join("errors.txt"), format!("{e}\n"))?;
            return Ok(outcome);
        }
    };
    write_file(&dir.join("metric.json"), wm.to_json()?)?;
    let opts = config.verify_options();
    for &p in &config.p_list {
        let tag = p_tag(p);
        let solved =
            SubcriticalProblem::new(wm.clone(), p).and_then(|prob| solve_subcritical(&prob, None));
        match solved {
            Ok(sol) => {
                write_file(&dir.join(format!("solution_p{tag}.json")), sol.to_json()?)?;
                let file = dir.join(format!("history_p{tag}.csv"));
                let f = fs::File::create(&file).map_err(|e| LabError::io(&file, e))?;
                sol.write_history_csv(f)?;
            }
            Err(e) => outcome.errors.push(format!("p = {p}: {e}")),
        }
        match verify_theorem_b(case, p, config.dt, &opts) {
            Ok(r) => {
                write_file(&dir.join(format!("theorem_b_p{tag}.json")), r.to_json()?)?;
                outcome.reports.push(r);
            }
            Err(e) => outcome.errors.push(format!("p = {p}: {e}")),
        }
    }
    if config.flow.t_end > 0.0 {
        let traj = match evolve(&FlowState::new(wm), &config.flow) {
            Ok(t) => t,
            Err(failure) => {
                outcome.errors.push(format!("flow: {}", failure.error));
                failure.partial
            }
        };
        let file = dir.join("trajectory.csv");
        let f = fs::File::create(&file).map_err(|e| LabError::io(&file, e))?;
        traj.write_csv(f)?;
    }
    if !outcome.errors.is_empty() {
        write_file(&dir.join("errors.txt"), outcome.errors.join("\n") + "\n")?;
    }
    Ok(outcome)
}

fn summary_markdown(summary: &RunSummary) -> String {
    let mut s = String::from("# Summary\n\n");
    s.push_str("| case | p | Y | lhs | rhs | rel_error | equality | trusted | passed |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in summary.reports() {
        let _ = writeln!(
            s,
            "| {} | {} | {:.10} | {:.10} | {:.10} | {:.3e} | {} | {} | {} |",
            r.case,
            r.p,
            r.y,
            r.lhs_fd,
            r.rhs_total,
            r.rel_error,
            r.equality_case,
            r.trusted,
            r.passed
        );
    }
    let errors: Vec<_> = summary
        .cases
        .iter()
        .flat_map(|c| c.errors.iter().map(move |e| (c.name.as_str(), e)))
        .collect();
    if !errors.is_empty() {
        s.push_str("\n## Errors\n\n");
        for (case, e) in errors {
            let _ = writeln!(s, "- {case}: {e}");
        }
    }
    let _ = writeln!(
        s,
        "\nstatus: {}",
        if summary.failed() { "FAIL" } else { "PASS" }
    );
    s
}

/// Runs every case on `jobs` threads (all cores when `None`) and writes
/// per-case directories plus `summary.md` and `summary.csv` under `root`.
pub fn run(config: &ExperimentConfig, root: &Path, jobs: Option<usize>) -> Result<RunSummary> {
    config.validate()?;
    let cases = config.cases()?;
    let dirs = case_dirs(&cases);
    fs::create_dir_all(root).map_err(|e| LabError::io(root, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| LabError::Config(e.to_string()))?;
    let outcomes: Vec<Result<CaseOutcome>> = pool.install(|| {
        cases
            .par_iter()
            .zip(dirs.par_iter())
            .map(|(case, dir)| run_case(case, &root.join(dir), config))
            .collect()
    });
    let cases = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = RunSummary {
        root: root.to_path_buf(),
        cases,
    };
    write_file(&root.join("summary.md"), summary_markdown(&summary))?;
    let file = root.join("summary.csv");
    let f = fs::File::create(&file).map_err(|e| LabError::io(&file, e))?;
    write_summary_csv(summary.reports(), f)?;
    Ok(summary)
}
