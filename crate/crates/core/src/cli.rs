//! Batch front end: config ingestion, command dispatch and report output.
//!
//! Every command reads a JSON [`ConfigDoc`] and writes JSON reports plus CSV
//! histories into the output directory. Exit codes follow
//! [`Error::exit_code`]: 0 success, 1 config or i/o, 2 precondition,
//! 3 no convergence, 4 cone breach.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{compute_c0, functional_report, DEFAULT_T_STEPS};
use crate::hermitian_cone::{lemmas, HermitianMatrix};
use crate::pde_solver::{
    continuity_path_dhym, continuity_path_j, newton_solve, DhymEquation, JEquation, SolveFailure,
    SolveReport, SolverConfig,
};
use crate::stability::{
    coordinate_subtori, dhym_hypothesis_check, max_uniform_epsilon, EpsilonBound, HypothesisReport,
    IntersectionData, DEFAULT_SAMPLES, DEFAULT_T_MAX,
};
use crate::torus_field::{integrate, write_field, FormField, ScalarField, TorusGeometry, TrigTerm};

#[derive(Debug, Parser)]
#[command(name = "kahlerlab", version, about = "J-equation and dHYM solvers on flat complex tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every randomized suite.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Trials per property suite (verify-lemmas).
    #[arg(long, global = true, default_value_t = 10_000)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve the J-equation (continuity path or plain Newton).
    SolveJ,
    /// Solve the dHYM equation.
    SolveDhym,
    /// Slope test, uniform epsilon and angle-branch check on intersection data.
    CheckStability,
    /// Evaluate c0 and the energy functionals.
    Functionals,
    /// Run the randomized matrix-inequality suites.
    VerifyLemmas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub n: usize,
    #[serde(rename = "N")]
    pub grid: usize,
}

/// `base + i ddbar (sum of trig terms)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub base: HermitianMatrix,
    #[serde(default)]
    pub potential: Vec<TrigTerm>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
    /// Replace `constant` by the value the integrability identity demands.
    #[serde(default)]
    pub auto_constant: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Path,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    #[serde(default)]
    pub datasets: Vec<IntersectionData>,
    /// Append the coordinate subtori of the constant parts of `chi`, `omega0`.
    #[serde(default)]
    pub coordinate_subtori: bool,
    /// Slope constant; defaults to the top-dimensional `c0` when subtori are generated.
    pub c: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    /// Enables the angle-branch check.
    pub theta_hat: Option<f64>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_t_steps() -> usize {
    DEFAULT_T_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalsSpec {
    /// Potential at which the functionals are evaluated.
    #[serde(default)]
    pub phi: Vec<TrigTerm>,
    /// Potentials of the coercivity scatter.
    #[serde(default)]
    pub samples: Vec<Vec<TrigTerm>>,
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
}

impl Default for FunctionalsSpec {
    fn default() -> Self {
        Self { phi: Vec::new(), samples: Vec::new(), t_steps: DEFAULT_T_STEPS }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    /// When present, must match the subcommand.
    pub problem: Option<Command>,
    pub geometry: Option<GeometrySpec>,
    pub chi: Option<FormSpec>,
    pub omega0: Option<FormSpec>,
    #[serde(default)]
    pub f: FSpec,
    pub c: Option<f64>,
    pub theta0: Option<f64>,
    pub theta_hat: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub method: Method,
    /// Starting potential for `method = "newton"`.
    #[serde(default)]
    pub initial_phi: Vec<TrigTerm>,
    pub stability: Option<StabilitySpec>,
    #[serde(default)]
    pub functionals: FunctionalsSpec,
    pub output: Option<PathBuf>,
}

impl ConfigDoc {
    /// Parses JSON, reporting the line, column and field path of the first error.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::Config(format!(
                "{origin}:{}:{}: field `{}`: {inner}",
                inner.line(),
                inner.column(),
                e.path()
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn geometry(&self) -> Result<TorusGeometry> {
        let g = self.geometry.ok_or_else(|| Error::Config("missing field `geometry`".into()))?;
        TorusGeometry::new(g.n, g.grid).map_err(|e| Error::Config(format!("geometry: {e}")))
    }

    fn form(&self, name: &str, spec: &Option<FormSpec>, geom: TorusGeometry) -> Result<FormField> {
        let spec = spec.as_ref().ok_or_else(|| Error::Config(format!("missing field `{name}`")))?;
        check_positive(&spec.base, name)?;
        let potential = ScalarField::from_trig(geom, &spec.potential).map_err(|e| at(name, e))?;
        let form = FormField::new(spec.base.clone(), potential).map_err(|e| at(name, e))?;
        let (margin, point) = form.positivity_margin();
        if !(margin > 0.0) {
            return Err(Error::Domain(format!("{name} is not positive at grid point {point} (margin {margin:e})")));
        }
        Ok(form)
    }

    fn theta0(&self, n: usize) -> Result<f64> {
        match (self.theta0, self.theta_hat) {
            (Some(t), None) => Ok(t),
            (None, Some(h)) => Ok(n as f64 * std::f64::consts::FRAC_PI_2 - h),
            (Some(_), Some(_)) => Err(Error::Config("give only one of `theta0`, `theta_hat`".into())),
            (None, None) => Err(Error::Config("missing field `theta0` (or `theta_hat`)".into())),
        }
    }
}

fn at(field: &str, e: Error) -> Error {
    match e {
        Error::Config(m) | Error::Usage(m) | Error::Data(m) => Error::Config(format!("field `{field}`: {m}")),
        other => other,
    }
}

/// Hermitian positive to `1e-10` relative to the largest eigenvalue.
fn check_positive(m: &HermitianMatrix, name: &str) -> Result<()> {
    let ev = m.eigenvalues();
    let top = ev.iter().copied().fold(0.0_f64, |a, v| a.max(v.abs()));
    if !(ev[0] > 1e-10 * top.max(1.0)) {
        return Err(Error::Config(format!("field `{name}.base` is not positive definite (eigenvalue {:e})", ev[0])));
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// What a command left behind.
#[derive(Debug)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    /// Human-readable summary for stdout.
    pub summary: String,
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }

    fn csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r.as_ref()).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }
}

fn write_solve(out: &mut Output, report: &SolveReport, base: &HermitianMatrix) -> Result<()> {
    out.json("report.json", report)?;
    let hist: Vec<Vec<String>> = report
        .residual_history
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), format!("{r:e}")])
        .collect();
    out.csv("residual_history.csv", &["iteration", "residual"], &hist)?;
    if !report.path.is_empty() {
        let rows: Vec<Vec<String>> = report
            .path
            .iter()
            .map(|s| {
                vec![
                    s.stage.to_string(),
                    format!("{:e}", s.t),
                    s.newton_iterations.to_string(),
                    format!("{:e}", s.residual),
                    format!("{:e}", s.cone_margin),
                    format!("{:e}", s.solvability_integral),
                ]
            })
            .collect();
        out.csv(
            "path.csv",
            &["stage", "t", "newton_iterations", "residual", "cone_margin", "solvability_integral"],
            &rows,
        )?;
    }
    let header = write_field(&out.dir.join("phi"), &report.phi, Some(base))?;
    out.written.push(header.with_extension("bin"));
    out.written.push(header);
    Ok(())
}

fn finish_solve(
    out: &mut Output,
    result: std::result::Result<SolveReport, SolveFailure>,
    base: &HermitianMatrix,
) -> Result<String> {
    match result {
        Ok(rep) => {
            write_solve(out, &rep, base)?;
            Ok(format!(
                "converged: residual {:e} after {} Newton iterations",
                rep.final_residual(),
                rep.newton_iterations
            ))
        }
        Err(fail) => {
            if let Some(rep) = &fail.report {
                write_solve(out, rep, base)?;
            }
            Err(fail.error)
        }
    }
}

/// `f` for the J-equation, with the integrability constant filled in on request.
fn j_forcing(cfg: &ConfigDoc, chi: &FormField, omega0: &FormField, c: f64) -> Result<ScalarField> {
    let geom = *chi.geometry();
    let n = geom.n();
    let f = ScalarField::from_trig(geom, &cfg.f.terms).map_err(|e| at("f", e))?;
    if !cfg.f.auto_constant {
        return Ok(f.add_constant(cfg.f.constant));
    }
    let one = ScalarField::constant(geom, 1.0);
    let vol = integrate(&one, &[(omega0.field(), n)])? / factorial(n);
    let mixed = integrate(&one, &[(chi.field(), 1), (omega0.field(), n - 1)])? / factorial(n - 1);
    let chi_vol = integrate(&one, &[(chi.field(), n)])? / factorial(n);
    let varying = integrate(&f, &[(chi.field(), n)])? / factorial(n);
    Ok(f.add_constant((c * vol - mixed - varying) / chi_vol))
}

fn solve_j(cfg: &ConfigDoc, out: &mut Output) -> Result<String> {
    let geom = cfg.geometry()?;
    let chi = cfg.form("chi", &cfg.chi, geom)?;
    let omega0 = cfg.form("omega0", &cfg.omega0, geom)?;
    let c = match cfg.c {
        Some(c) => c,
        None => compute_c0(&chi, &omega0)?,
    };
    let f = j_forcing(cfg, &chi, &omega0, c)?;
    let result = match cfg.method {
        Method::Path => continuity_path_j(&chi, &omega0, &f, c, &cfg.solver),
        Method::Newton => {
            let phi0 = ScalarField::from_trig(geom, &cfg.initial_phi).map_err(|e| at("initial_phi", e))?;
            JEquation::new(chi, omega0.clone(), f, c)
                .map_err(SolveFailure::from)
                .and_then(|eq| newton_solve(&eq, &phi0, &cfg.solver))
        }
    };
    finish_solve(out, result, omega0.base())
}

fn solve_dhym(cfg: &ConfigDoc, out: &mut Output) -> Result<String> {
    let geom = cfg.geometry()?;
    let chi = cfg.form("chi", &cfg.chi, geom)?;
    let omega0 = cfg.form("omega0", &cfg.omega0, geom)?;
    let theta0 = cfg.theta0(geom.n())?;
    let mut f = ScalarField::from_trig(geom, &cfg.f.terms).map_err(|e| at("f", e))?;
    if cfg.f.auto_constant {
        let n = geom.n();
        let base = crate::pde_solver::dhym_constant(&chi, &omega0, theta0)?;
        let chi_vol = integrate(&ScalarField::constant(geom, 1.0), &[(chi.field(), n)])?;
        let varying = integrate(&f, &[(chi.field(), n)])?;
        f = f.add_constant(base - varying / chi_vol);
    } else {
        f = f.add_constant(cfg.f.constant);
    }
    let result = match cfg.method {
        Method::Path => continuity_path_dhym(&chi, &omega0, &f, theta0, &cfg.solver),
        Method::Newton => {
            let phi0 = ScalarField::from_trig(geom, &cfg.initial_phi).map_err(|e| at("initial_phi", e))?;
            DhymEquation::new(chi, omega0.clone(), f, theta0)
                .map_err(SolveFailure::from)
                .and_then(|eq| newton_solve(&eq, &phi0, &cfg.solver))
        }
    };
    finish_solve(out, result, omega0.base())
}

#[derive(Debug, Serialize)]
struct StabilityOutput {
    c: f64,
    datasets: Vec<IntersectionData>,
    warnings: Vec<String>,
    epsilon_bound: EpsilonBound,
    #[serde(skip_serializing_if = "Option::is_none")]
    hypothesis: Option<HypothesisReport>,
}

fn stability_table(o: &StabilityOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>2} {:>14} {:>12} {:>12} {:>6}", "dataset", "p", "slope@eps=0", "theta(1)", "lower", "ok");
    for d in &o.datasets {
        let margin = crate::stability::slope_test(d, o.c, 0.0).unwrap_or(f64::NAN);
        let v = o.hypothesis.as_ref().and_then(|h| h.verdicts.iter().find(|v| v.label == d.label));
        let th = v.and_then(|v| v.theta_at_1).map_or("-".to_owned(), |t| format!("{t:.6}"));
        let lo = v.map_or("-".to_owned(), |v| format!("{:.6}", v.lower));
        let ok = v.map_or(margin >= 0.0, |v| v.passed && margin >= 0.0);
        let _ = writeln!(s, "{:<16} {:>2} {:>14.6e} {:>12} {:>12} {:>6}", d.label, d.p, margin, th, lo, ok);
    }
    match &o.epsilon_bound {
        EpsilonBound::Feasible { epsilon: Some(e), binding } => {
            let _ = writeln!(s, "max uniform epsilon {e:.6e} (binding {})", binding.as_deref().unwrap_or("-"));
        }
        EpsilonBound::Feasible { epsilon: None, .. } => {
            let _ = writeln!(s, "max uniform epsilon unbounded");
        }
        EpsilonBound::Infeasible { label, margin } => {
            let _ = writeln!(s, "infeasible: {label} fails at epsilon = 0 (margin {margin:e})");
        }
    }
    if let Some(h) = &o.hypothesis {
        let _ = writeln!(s, "angle-branch hypothesis ({}): {}", h.kind, if h.passed { "passed" } else { "failed" });
    }
    s
}

fn check_stability(cfg: &ConfigDoc, out: &mut Output) -> Result<String> {
    let spec = cfg.stability.as_ref().ok_or_else(|| Error::Config("missing field `stability`".into()))?;
    let mut datasets = spec.datasets.clone();
    let mut c_default = None;
    if spec.coordinate_subtori {
        let chi = cfg.chi.as_ref().ok_or_else(|| Error::Config("coordinate_subtori needs `chi`".into()))?;
        let om = cfg.omega0.as_ref().ok_or_else(|| Error::Config("coordinate_subtori needs `omega0`".into()))?;
        check_positive(&chi.base, "chi")?;
        check_positive(&om.base, "omega0")?;
        let generated = coordinate_subtori(&chi.base, &om.base)?;
        if let Some(m) = generated.iter().find(|d| d.is_top()) {
            // the top-dimensional test is an equality at c0
            c_default = Some(m.p as f64 * m.a[1] / m.a[0]);
        }
        datasets.extend(generated);
    }
    if datasets.is_empty() {
        return Err(Error::Config("field `stability.datasets`: no datasets".into()));
    }
    for (i, d) in datasets.iter().enumerate() {
        d.validate().map_err(|e| Error::Config(format!("field `stability.datasets[{i}]`: {e}")))?;
    }
    let c = spec
        .c
        .or(cfg.c)
        .or(c_default)
        .ok_or_else(|| Error::Config("missing field `stability.c`".into()))?;
    let epsilon_bound = max_uniform_epsilon(&datasets, c)?;
    let hypothesis = match spec.theta_hat.or(cfg.theta_hat) {
        Some(th) => Some(dhym_hypothesis_check(&datasets, th, spec.epsilon, spec.t_max, spec.samples)?),
        None => None,
    };
    let warnings = datasets.iter().filter_map(|d| d.positivity_warning()).collect();
    let o = StabilityOutput { c, datasets, warnings, epsilon_bound, hypothesis };
    out.json("stability.json", &o)?;
    let table = stability_table(&o);
    out.text("stability.txt", &table)?;
    if let EpsilonBound::Infeasible { label, margin } = &o.epsilon_bound {
        return Err(Error::Precondition(format!("slope test fails for dataset {label} (margin {margin:e})")));
    }
    if let Some(h) = o.hypothesis.as_ref().filter(|h| !h.passed) {
        let bad: Vec<&str> = h.verdicts.iter().filter(|v| !v.passed).map(|v| v.label.as_str()).collect();
        return Err(Error::Precondition(format!("angle-branch hypothesis fails for {}", bad.join(", "))));
    }
    Ok(table)
}

fn functionals(cfg: &ConfigDoc, out: &mut Output) -> Result<String> {
    let geom = cfg.geometry()?;
    let chi = cfg.form("chi", &cfg.chi, geom)?;
    let omega0 = cfg.form("omega0", &cfg.omega0, geom)?;
    let spec = &cfg.functionals;
    let phi = ScalarField::from_trig(geom, &spec.phi).map_err(|e| at("functionals.phi", e))?;
    let samples = spec
        .samples
        .iter()
        .enumerate()
        .map(|(i, t)| ScalarField::from_trig(geom, t).map_err(|e| at(&format!("functionals.samples[{i}]"), e)))
        .collect::<Result<Vec<_>>>()?;
    let report = functional_report(&chi, &omega0, &phi, &samples, spec.t_steps)?;
    out.json("functionals.json", &report)?;
    let path = out.dir.join("coercivity.csv");
    report.coercivity.write_csv(&path)?;
    out.written.push(path);
    Ok(format!(
        "c0 {:e}, J_chi {:e}, I {:e}, J_omega0 {:e}",
        report.c0, report.j_chi, report.aubin_i, report.j_omega0
    ))
}

#[derive(Debug, Serialize)]
struct LemmaOutput {
    seed: u64,
    trials: usize,
    suites: Vec<lemmas::SuiteSummary>,
    passed: bool,
}

fn verify_lemmas(seed: u64, trials: usize, out: &mut Output) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = lemmas::fuzz_schur_trace(&mut rng, trials)?;
    let arctan = lemmas::fuzz_schur_arctan(&mut rng, trials)?;
    let f = lemmas::fuzz_f_operator(&mut rng, trials)?;
    let suites = vec![
        trace,
        arctan,
        f.gradient_positive,
        f.gradient_ordering,
        f.zero_set_concavity,
        f.boundary_negative,
    ];
    let passed = suites.iter().all(|s| s.passed());
    let rows: Vec<Vec<String>> = suites
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                s.trials.to_string(),
                format!("{:e}", s.worst_slack),
                s.violations.to_string(),
                format!("{:e}", s.tolerance),
            ]
        })
        .collect();
    out.csv("lemmas.csv", &["suite", "trials", "worst_slack", "violations", "tolerance"], &rows)?;
    let o = LemmaOutput { seed, trials, suites, passed };
    out.json("lemmas.json", &o)?;
    if !passed {
        let bad: Vec<&str> = o.suites.iter().filter(|s| !s.passed()).map(|s| s.name.as_str()).collect();
        return Err(Error::Precondition(format!("property violations in {}", bad.join(", "))));
    }
    let mut s = String::new();
    for r in &rows {
        let _ = writeln!(s, "{:<28} worst slack {}", r[0], r[2]);
    }
    Ok(s)
}

/// Runs one command. Reports are written before any error is returned.
pub fn run(command: Command, cfg: &ConfigDoc, cli: &Cli) -> Result<Outcome> {
    if let Some(p) = cfg.problem {
        if p != command {
            return Err(Error::Config(format!("field `problem`: config is for {p:?}, command is {command:?}")));
        }
    }
    cfg.solver.validate().map_err(|e| at("solver", e))?;
    let dir = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Output::new(dir)?;
    let result = match command {
        Command::SolveJ => solve_j(cfg, &mut out),
        Command::SolveDhym => solve_dhym(cfg, &mut out),
        Command::CheckStability => check_stability(cfg, &mut out),
        Command::Functionals => functionals(cfg, &mut out),
        Command::VerifyLemmas => verify_lemmas(cli.seed, cli.trials, &mut out),
    };
    result.map(|summary| Outcome { written: out.written, summary })
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(o) => {
            print!("{}", o.summary);
            if !o.summary.ends_with('\n') {
                println!();
            }
            0
        }
        Err(e) => {
            eprintln!("kahlerlab: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        // fails only if a pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let cfg = match &cli.config {
        Some(p) => ConfigDoc::load(p)?,
        None if cli.command == Command::VerifyLemmas => ConfigDoc::default(),
        None => return Err(Error::Config("--config is required".into())),
    };
    run(cli.command, &cfg, cli)
}
