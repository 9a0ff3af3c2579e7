//! Front end for the `kirchhoff` binary. [`run`] parses arguments, runs one
//! subcommand and returns the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use kirchhoff_core::constants::{self, GammaOptions, Prepared};
use kirchhoff_core::continuation::{bifurcation_diagram_with, diagram_csv, diagram_svg, DiagramOptions};
use kirchhoff_core::eigen::EigenPair;
use kirchhoff_core::solvers::{self, CensusOptions, SearchOptions, SolveResult};
use kirchhoff_core::verify::{run_suite, Suite};
use kirchhoff_core::{canonical_problem, EigenOptions, Error, Field, Mode, Model, ProblemSpec};

mod output;

use output::Output;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_BAD_ARGS: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "kirchhoff",
    version,
    about = "Numerical workbench for Kirchhoff problems with a steep potential well"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Canonical problem name (TP-CUBE-P5, TP-BALL-P5, TP-BALL-P3-NEG, TP-BALL-P3-POS).
    #[arg(long, global = true)]
    pub problem: Option<String>,
    /// Key-value problem config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Kirchhoff coefficient; `a0`, `0.5a0`, `2a0` scale the computed a₀(p).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p: Option<f64>,
    /// Spectral parameter; `lambda1`, `0.9lambda1` scale the computed λ₁(f_Ω).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Sign-tuning parameter of the bump-shaped g.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Nodes per axis (tensor) or radial nodes.
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<GridMode>,
    /// Directory for JSON, binary, CSV and SVG artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GridMode {
    Tensor,
    Radial,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Principal and second eigenpairs on Ω and at μ.
    Eigen,
    /// Every explicit constant of the existence theory.
    Constants,
    /// Sphere minimum and e₀ at a radius.
    Geometry {
        /// Sphere radius; defaults to the regime's geometry radius.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// One positive solution by the chosen method.
    Solve {
        #[arg(long, value_enum, default_value_t = Method::MountainPass)]
        method: Method,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// All positive solutions the searches find at the problem's λ.
    Census,
    /// Bifurcation diagram over a λ grid and a list of `a` values.
    Branch {
        /// First grid λ (number or `<c>lambda1`).
        #[arg(long, default_value = "0.2lambda1")]
        from: String,
        #[arg(long, default_value = "1.1lambda1")]
        to: String,
        #[arg(long, default_value_t = 10)]
        points: usize,
        /// Comma-separated `a` values; defaults to the problem's `a`.
        #[arg(long, value_delimiter = ',')]
        a_list: Vec<String>,
    },
    /// Acceptance checks.
    Verify {
        /// grid, eigen, functional, constants, thm1, thm2, thm3, branch or all.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Method {
    MountainPass,
    BallMin,
    ExteriorMin,
}

#[derive(Debug)]
struct BadArgs(String);

impl std::fmt::Display for BadArgs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadArgs {}

/// A check that ran and failed.
#[derive(Debug)]
struct Failed(String);

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    BadArgs(msg.into()).into()
}

/// Exit code for an error chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<BadArgs>() {
            return EXIT_BAD_ARGS;
        }
        if cause.is::<Failed>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::UnknownProblem(_) | Error::Config { .. } => EXIT_BAD_ARGS,
                Error::NoConvergence { .. } | Error::Degenerate { .. } => EXIT_NO_CONVERGENCE,
                _ => EXIT_VALIDATION,
            };
        }
    }
    EXIT_VALIDATION
}

/// Runs the command line `argv` (program name first), printing the main
/// JSON document on stdout and errors on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_BAD_ARGS } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(doc) => {
            let mut out = std::io::stdout().lock();
            let _ = serde_json::to_writer_pretty(&mut out, &doc);
            let _ = writeln!(out);
            match doc.get("passed") {
                Some(Value::Bool(false)) => EXIT_VALIDATION,
                _ => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

struct Run {
    model: Model,
    prep: Prepared,
    seed: u64,
    verbose: u8,
    out: Output,
    overrides: Value,
}

impl Run {
    fn log(&self, msg: &str) {
        if self.verbose > 0 {
            eprintln!("kirchhoff: {msg}");
        }
    }

    /// Envelope shared by every JSON document.
    fn envelope(&self, command: &str, result: impl Serialize) -> anyhow::Result<Value> {
        Ok(json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "config": self.config(),
            "result": serde_json::to_value(result)?,
        }))
    }

    fn config(&self) -> Value {
        json!({
            "seed": self.seed,
            "overrides": self.overrides,
            "problem": self.model.spec,
            "config_text": self.model.spec.to_config(),
        })
    }

    fn field(&self, stem: &str, u: &Field, meta: Value) -> anyhow::Result<()> {
        self.out.field(&self.config(), &self.model.spec.grid, stem, u, meta)
    }

    fn lambda1(&self) -> f64 {
        self.prep.eigen.omega1.value
    }
}

fn execute(cli: &Cli) -> anyhow::Result<Value> {
    if let Command::Verify { suite } = &cli.command {
        let suite: Suite = suite.parse().map_err(|_| bad(format!("unknown suite `{suite}`")))?;
        let report = run_suite(suite, cli.common.seed);
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "verify",
            "config": { "seed": cli.common.seed, "suite": suite.name() },
            "passed": report.passed,
            "result": report,
        });
        Output::new(cli.common.out.as_deref())?.json("verify.json", &doc)?;
        return Ok(doc);
    }
    let ctx = resolve(&cli.common)?;
    match &cli.command {
        Command::Eigen => eigen_cmd(&ctx),
        Command::Constants => constants_cmd(&ctx),
        Command::Geometry { rho } => geometry_cmd(&ctx, *rho),
        Command::Solve { method, rho } => solve_cmd(&ctx, *method, *rho),
        Command::Census => census_cmd(&ctx),
        Command::Branch {
            from,
            to,
            points,
            a_list,
        } => branch_cmd(&ctx, from, to, *points, a_list),
        Command::Verify { .. } => unreachable!(),
    }
}

/// Parses `x`, `<c>name` or `name` with `name` standing for `unit`.
fn scaled(value: &str, name: &str, unit: impl FnOnce() -> anyhow::Result<f64>) -> anyhow::Result<f64> {
    let v = value.trim();
    if let Ok(x) = v.parse::<f64>() {
        return Ok(x);
    }
    let Some(coef) = v.strip_suffix(name) else {
        return Err(bad(format!("cannot parse `{value}` as a number or `<c>{name}`")));
    };
    let c = if coef.is_empty() {
        1.0
    } else {
        coef.trim_end_matches('*')
            .parse::<f64>()
            .map_err(|_| bad(format!("cannot parse coefficient in `{value}`")))?
    };
    Ok(c * unit()?)
}

fn eigen_opts(seed: u64) -> EigenOptions {
    EigenOptions {
        seed,
        ..Default::default()
    }
}

fn prepare(model: &Model, seed: u64) -> anyhow::Result<Prepared> {
    Ok(constants::prepare(
        model,
        &eigen_opts(seed),
        &GammaOptions {
            seed,
            ..Default::default()
        },
    )?)
}

fn a0_of(prep: &Prepared, p: f64) -> anyhow::Result<f64> {
    prep.a0(p)
        .ok_or_else(|| bad(format!("a0 is defined only for p < 4 (p = {p})")))
}

fn resolve(c: &Common) -> anyhow::Result<Run> {
    let mut spec = match (&c.problem, &c.config) {
        (Some(_), Some(_)) => return Err(bad("give either --problem or --config, not both")),
        (None, None) => return Err(bad("one of --problem or --config is required")),
        (Some(name), None) => canonical_problem(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
            ProblemSpec::from_config(&text)?
        }
    };
    let mut overrides = serde_json::Map::new();
    if let Some(p) = c.p {
        spec.p = p;
        overrides.insert("p".into(), json!(p));
    }
    if let Some(mu) = c.mu {
        spec.mu = mu;
        overrides.insert("mu".into(), json!(mu));
    }
    if let Some(n) = c.grid_n {
        spec.grid.nodes_per_axis = n;
        overrides.insert("grid_n".into(), json!(n));
    }
    if let Some(m) = c.mode {
        spec.grid.mode = match m {
            GridMode::Tensor => Mode::Tensor,
            GridMode::Radial => Mode::Radial,
        };
        overrides.insert("mode".into(), json!(spec.grid.mode));
    }
    if let Some(k) = c.kappa {
        spec = spec.with_kappa(k)?;
        overrides.insert("kappa".into(), json!(k));
    }
    spec.check_parameters().context("problem parameters")?;
    let mut model = Model::new(spec).context("problem setup")?;
    if c.verbose > 0 {
        eprintln!("kirchhoff: solving the eigenproblems");
    }
    let prep = prepare(&model, c.seed)?;
    let l1 = prep.eigen.omega1.value;
    if let Some(a) = &c.a {
        let value = scaled(a, "a0", || a0_of(&prep, model.p()))?;
        model = model.with_a(value)?;
        overrides.insert("a".into(), json!(a));
    }
    if let Some(l) = &c.lambda {
        let value = scaled(l, "lambda1", || Ok(l1))?;
        model = model.with_lambda(value)?;
        overrides.insert("lambda".into(), json!(l));
    }
    Ok(Run {
        model,
        prep,
        seed: c.seed,
        verbose: c.verbose,
        out: Output::new(c.out.as_deref())?,
        overrides: Value::Object(overrides),
    })
}

fn pair_json(e: &EigenPair) -> Value {
    json!({ "value": e.value, "residual": e.residual, "f_mass": e.f_mass, "orth": e.orth })
}

fn eigen_cmd(ctx: &Run) -> anyhow::Result<Value> {
    let e = &ctx.prep.eigen;
    let validation = kirchhoff_core::problem::validate_conditions(&ctx.model)?;
    let doc = ctx.envelope(
        "eigen",
        json!({
            "spectrum": e.spectrum(),
            "omega1": pair_json(&e.omega1),
            "omega2": pair_json(&e.omega2),
            "mu1": pair_json(&e.mu1),
            "mu2": pair_json(&e.mu2),
            "conditions": validation,
        }),
    )?;
    ctx.out.json("eigen.json", &doc)?;
    ctx.field("phi1_omega", &e.omega1.field, json!({ "eigenvalue": e.omega1.value }))?;
    ctx.field("phi1_mu", &e.mu1.field, json!({ "eigenvalue": e.mu1.value }))?;
    Ok(doc)
}

fn report(ctx: &Run) -> anyhow::Result<constants::ConstantsReport> {
    Ok(constants::constants_report(&ctx.model, &ctx.prep, None)?)
}

fn constants_cmd(ctx: &Run) -> anyhow::Result<Value> {
    ctx.log("evaluating constants");
    let doc = ctx.envelope("constants", report(ctx)?)?;
    ctx.out.json("constants.json", &doc)?;
    Ok(doc)
}

fn default_rho(ctx: &Run) -> anyhow::Result<f64> {
    let r = report(ctx)?;
    r.rho_geometry
        .or(r.rho_a_lambda)
        .or(r.rho_bar_a)
        .or(r.rho_a)
        .ok_or_else(|| anyhow!(Failed("no geometry radius applies to this problem; pass --rho".into())))
}

fn geometry_cmd(ctx: &Run, rho: Option<f64>) -> anyhow::Result<Value> {
    let rho = match rho {
        Some(r) => r,
        None => default_rho(ctx)?,
    };
    ctx.log(&format!("sphere search at rho = {rho}"));
    let g = solvers::geometry(&ctx.model, rho, &search(ctx))?;
    let mut doc = ctx.envelope("geometry", g.summary())?;
    doc["passed"] = json!(g.pass);
    ctx.out.json("geometry.json", &doc)?;
    ctx.field("sphere_argmin", &g.sphere_argmin, json!({ "rho": rho }))?;
    if let Some(e0) = &g.e0 {
        ctx.field("e0", e0, json!({ "energy": g.j_e0, "norm_mu": g.e0_norm_mu }))?;
    }
    Ok(doc)
}

fn search(ctx: &Run) -> SearchOptions {
    SearchOptions {
        seed: ctx.seed,
        ..Default::default()
    }
}

fn solution_json(s: &SolveResult) -> Value {
    serde_json::to_value(s.summary()).unwrap_or(Value::Null)
}

fn solve_cmd(ctx: &Run, method: Method, rho: Option<f64>) -> anyhow::Result<Value> {
    let rho = match rho {
        Some(r) => r,
        None => default_rho(ctx)?,
    };
    let m = &ctx.model;
    let opts = search(ctx);
    ctx.log(&format!("{method:?} at rho = {rho}"));
    let s = match method {
        Method::MountainPass => {
            let e0 = solvers::find_e0(m, rho)?;
            solvers::mountain_pass(m, &e0)?
        }
        Method::BallMin => solvers::ball_min_with(m, rho, &opts)?,
        Method::ExteriorMin => solvers::exterior_min_with(m, rho, &opts)?,
    };
    let doc = ctx.envelope("solve", json!({ "rho": rho, "solution": solution_json(&s) }))?;
    ctx.out.json("solve.json", &doc)?;
    ctx.field("solution", &s.field, solution_json(&s))?;
    Ok(doc)
}

fn census_cmd(ctx: &Run) -> anyhow::Result<Value> {
    ctx.log(&format!("census at lambda = {}", ctx.model.lambda()));
    let opts = CensusOptions {
        seed: ctx.seed,
        ..Default::default()
    };
    let c = solvers::multiplicity_census_with(&ctx.model, ctx.model.lambda(), &opts)?;
    let doc = ctx.envelope(
        "census",
        json!({
            "regime": c.regime,
            "expected": c.expected,
            "found": c.solutions.len(),
            "energy_signs": c.energy_signs(),
            "mu_ladder": c.mu_ladder,
            "final_mu": c.final_mu,
            "rho": c.rho,
            "notes": c.notes,
            "solutions": c.solutions.iter().map(solution_json).collect::<Vec<_>>(),
        }),
    )?;
    ctx.out.json("census.json", &doc)?;
    for (k, s) in c.solutions.iter().enumerate() {
        ctx.field(&format!("solution_{k}"), &s.field, solution_json(s))?;
    }
    Ok(doc)
}

fn branch_cmd(ctx: &Run, from: &str, to: &str, points: usize, a_list: &[String]) -> anyhow::Result<Value> {
    let l1 = ctx.lambda1();
    let lo = scaled(from, "lambda1", || Ok(l1))?;
    let hi = scaled(to, "lambda1", || Ok(l1))?;
    if points == 0 {
        return Err(bad("--points must be positive"));
    }
    let grid: Vec<f64> = if points == 1 {
        vec![lo]
    } else {
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    };
    let a_values = if a_list.is_empty() {
        vec![ctx.model.a()]
    } else {
        a_list
            .iter()
            .map(|a| scaled(a, "a0", || a0_of(&ctx.prep, ctx.model.p())))
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    ctx.log(&format!(
        "tracing {} a values over {} grid points",
        a_values.len(),
        grid.len()
    ));
    let opts = DiagramOptions {
        census: CensusOptions {
            seed: ctx.seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let rows = bifurcation_diagram_with(&ctx.model, &grid, &a_values, &opts)?;
    let mut ids: Vec<usize> = rows.iter().map(|r| r.branch_id).collect();
    ids.dedup();
    let branches: Vec<Value> = ids
        .iter()
        .map(|id| {
            let b: Vec<_> = rows.iter().filter(|r| r.branch_id == *id).collect();
            json!({
                "branch_id": id,
                "a": b[0].a,
                "points": b.len(),
                "folds": b.iter().filter(|r| r.fold_flag).map(|r| r.lambda).collect::<Vec<_>>(),
                "lambda_min": b.iter().map(|r| r.lambda).fold(f64::INFINITY, f64::min),
                "lambda_max": b.iter().map(|r| r.lambda).fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect();
    let doc = ctx.envelope(
        "branch",
        json!({
            "lambda1": l1,
            "lambda_grid": grid,
            "a_list": a_values,
            "rows": rows.len(),
            "branches": branches,
        }),
    )?;
    ctx.out.json("branch.json", &doc)?;
    ctx.out.text("branches.csv", &with_header(ctx, &diagram_csv(&rows)?))?;
    ctx.out
        .text("branches.svg", &svg_with_header(ctx, &diagram_svg(&rows, Some(l1))))?;
    Ok(doc)
}

/// Prefixes CSV text with the resolved config as `#` comment lines.
fn with_header(ctx: &Run, csv: &str) -> String {
    let mut s = format!("# schema_version = {SCHEMA_VERSION}\n# seed = {}\n", ctx.seed);
    for line in ctx.model.spec.to_config().lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(csv);
    s
}

/// Inserts the resolved config as an XML comment after the opening tag.
fn svg_with_header(ctx: &Run, svg: &str) -> String {
    let config = with_header(ctx, "").replace("--", "- -");
    match svg.find('>') {
        Some(i) => format!("{}\n<!--\n{config}-->{}", &svg[..=i], &svg[i + 1..]),
        None => svg.to_string(),
    }
}

/// Reads a field written by `--out` back as nodal values.
pub fn read_field(bin: &Path) -> anyhow::Result<Vec<f64>> {
    output::read_f64le(bin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthand_scales_the_unit() {
        let unit = || Ok(4.0);
        assert_eq!(scaled("2.5", "a0", unit).unwrap(), 2.5);
        assert_eq!(scaled("a0", "a0", unit).unwrap(), 4.0);
        assert_eq!(scaled("0.5a0", "a0", unit).unwrap(), 2.0);
        assert_eq!(scaled("2*a0", "a0", unit).unwrap(), 8.0);
        assert_eq!(exit_code(&scaled("xa0", "a0", unit).unwrap_err()), EXIT_BAD_ARGS);
        assert_eq!(exit_code(&scaled("big", "a0", unit).unwrap_err()), EXIT_BAD_ARGS);
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        let e = |err: Error| exit_code(&anyhow::Error::from(err).context("while testing"));
        assert_eq!(e(Error::UnknownProblem("x".into())), EXIT_BAD_ARGS);
        assert_eq!(
            e(Error::NoConvergence {
                op: "newton",
                detail: String::new()
            }),
            EXIT_NO_CONVERGENCE
        );
        assert_eq!(e(Error::InvalidParameter("mu".into())), EXIT_VALIDATION);
    }
}
