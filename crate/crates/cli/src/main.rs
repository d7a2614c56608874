use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sparse_damage::experiments::{
    run_damage_study_with, run_monte_carlo, DamageStudy, ExperimentError, ScenarioDocument,
    StudyRow, SweepDocument,
};
use sparse_damage::fem::{canonical_truss, load_model, ModelError, StiffnessParams};
use sparse_damage::modal::solve_modes;
use sparse_damage::sensitivity::{linearize, SensitivityError};
use sparse_damage::solvers::{self, Method, ProblemDocument, SignConstraint, SolverError};
use sparse_damage::updating::{one_shot, run_update, EpsilonRule, UpdateError};
use sparse_damage::{SparseProblem, TrussModel, UpdateConfig, UpdateResult};

#[derive(Parser, Debug)]
#[command(name = "sparse-damage", version, about = "Sparse damage identification for planar trusses")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress informational messages on standard error.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a model and list its elements.
    Model {
        /// Model file, or `canonical`.
        #[arg(long)]
        model: String,
    },
    /// Natural frequencies (Hz) and mode shapes.
    Modal {
        #[arg(long)]
        model: String,
        /// Number of modes.
        #[arg(long)]
        count: usize,
        /// Stiffness multipliers, one per element (plain list).
        #[arg(long)]
        theta: Option<PathBuf>,
    },
    /// Solve a standalone sparse problem file.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Exponent for lp_irls.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        /// Residual bound for l1_ineq; overrides the file.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Identify damage from measured frequencies.
    Identify {
        #[arg(long)]
        model: String,
        /// Measured frequencies in Hz (plain list).
        #[arg(long)]
        measured: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Number of frequencies used.
        #[arg(long)]
        m: usize,
        #[command(flatten)]
        update: UpdateArgs,
        /// Stop after the first linearization.
        #[arg(long)]
        one_shot: bool,
        /// Write the first linearized system as a problem file.
        #[arg(long)]
        dump_system: Option<PathBuf>,
    },
    /// Monte Carlo success-rate sweep.
    Mc {
        /// Sweep file; defaults to the built-in sweep.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        /// Override the number of realizations.
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Per-iteration damage estimates for an errorless scenario.
    Study {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        m: usize,
        #[command(flatten)]
        update: UpdateArgs,
    },
}

#[derive(Args, Debug)]
struct UpdateArgs {
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Fixed residual bound for l1_ineq.
    #[arg(long, conflicts_with = "noise_percent")]
    epsilon: Option<f64>,
    /// Assumed noise level (%); l1_ineq uses (percent/100)·√m.
    #[arg(long)]
    noise_percent: Option<f64>,
    #[arg(long, default_value_t = 20)]
    max_iterations: usize,
    /// Restrict parameter changes to stiffness loss.
    #[arg(long)]
    nonpositive: bool,
}

impl UpdateArgs {
    fn config(&self, method: Method, m: usize) -> UpdateConfig {
        let mut config = UpdateConfig::new(method, m);
        config.p = self.p;
        config.max_iterations = self.max_iterations;
        config.epsilon_rule = match (self.epsilon, self.noise_percent) {
            (Some(e), _) => Some(EpsilonRule::Fixed(e)),
            (None, Some(pct)) => Some(EpsilonRule::NoiseDerived {
                assumed_percent: pct,
            }),
            (None, None) => None,
        };
        if self.nonpositive {
            config.sign_constraint = SignConstraint::Nonpositive;
        }
        config
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

/// Exit status 1 for bad input, 2 for numerical failure.
#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Mechanism => Failure::Numerical(e.to_string()),
            e => Failure::Input(e.to_string()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(format!("solve: {e}"))
        } else {
            Failure::Input(format!("solve: {e}"))
        }
    }
}

impl From<SensitivityError> for Failure {
    fn from(e: SensitivityError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<UpdateError> for Failure {
    fn from(e: UpdateError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(format!("update: {e}"))
        } else {
            Failure::Input(format!("update: {e}"))
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{line}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let g = &cli.global;
    let output = match &cli.command {
        Command::Model { model } => cmd_model(g, model)?,
        Command::Modal {
            model,
            count,
            theta,
        } => cmd_modal(g, model, *count, theta.as_deref())?,
        Command::Solve {
            problem,
            method,
            p,
            epsilon,
        } => cmd_solve(g, problem, *method, *p, *epsilon)?,
        Command::Identify {
            model,
            measured,
            method,
            m,
            update,
            one_shot,
            dump_system,
        } => cmd_identify(g, model, measured, *method, *m, update, *one_shot, dump_system.as_deref())?,
        Command::Mc {
            config,
            model,
            realizations,
        } => cmd_mc(g, config.as_deref(), model.as_deref(), *realizations)?,
        Command::Study {
            scenario,
            model,
            method,
            m,
            update,
        } => cmd_study(g, scenario, model.as_deref(), *method, *m, update)?,
    };
    emit(g, &output)
}

fn emit(g: &Global, bytes: &[u8]) -> Result<(), Failure> {
    match &g.output {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::input(format!("cannot write output: {e}"))),
    }
}

fn info(g: &Global, msg: &str) {
    if !g.quiet {
        eprintln!("{msg}");
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load(source: Option<&str>) -> Result<TrussModel, Failure> {
    match source {
        None | Some("canonical") => Ok(canonical_truss()),
        Some(path) => Ok(load_model(&read(Path::new(path))?)?),
    }
}

/// Whitespace- or comma-separated numbers; `#` starts a comment.
fn read_list(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = read(path)?;
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: f64 = token.parse().map_err(|_| {
                Failure::input(format!("{}:{}: not a number: {token}", path.display(), n + 1))
            })?;
            if !v.is_finite() {
                return Err(Failure::input(format!("{}:{}: non-finite value", path.display(), n + 1)));
            }
            values.push(v);
        }
    }
    Ok(values)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| Failure::input(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| Failure::input(e.to_string()))
}

#[derive(Serialize)]
struct ElementRow {
    element: usize,
    node_i: usize,
    node_j: usize,
    length: f64,
    elastic_modulus: f64,
    area: f64,
    density: f64,
}

fn cmd_model(g: &Global, source: &str) -> Result<Vec<u8>, Failure> {
    let model = load(Some(source))?;
    info(
        g,
        &format!(
            "{} nodes, {} elements, {} free DOFs",
            model.nodes().len(),
            model.n_elements(),
            model.n_dof()
        ),
    );
    match g.format {
        Format::Json => to_json(&model.to_document()),
        Format::Csv => {
            let rows: Vec<ElementRow> = model
                .elements()
                .iter()
                .enumerate()
                .map(|(i, e)| ElementRow {
                    element: i + 1,
                    node_i: e.node_i,
                    node_j: e.node_j,
                    length: model.element_length(i).unwrap_or(f64::NAN),
                    elastic_modulus: e.elastic_modulus,
                    area: e.area,
                    density: e.density,
                })
                .collect();
            to_csv(rows)
        }
    }
}

#[derive(Serialize)]
struct ModeRow {
    mode: usize,
    frequency_hz: f64,
}

#[derive(Serialize)]
struct ModalOutput {
    frequencies_hz: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// One mass-normalized shape per mode, over the free DOFs.
    mode_shapes: Vec<Vec<f64>>,
}

fn cmd_modal(g: &Global, source: &str, count: usize, theta: Option<&Path>) -> Result<Vec<u8>, Failure> {
    let model = load(Some(source))?;
    let params = match theta {
        Some(path) => StiffnessParams::from_slice(&read_list(path)?),
        None => StiffnessParams::nominal(model.n_elements()),
    };
    let k = sparse_damage::fem::assemble_stiffness(&model, &params)?;
    let mass = sparse_damage::fem::assemble_mass(&model);
    if count == 0 || count > model.n_dof() {
        return Err(Failure::input(format!("--count must be between 1 and {}", model.n_dof())));
    }
    let modal = solve_modes(&k, &mass, count).map_err(|e| Failure::Numerical(e.to_string()))?;
    match g.format {
        Format::Json => to_json(&ModalOutput {
            frequencies_hz: modal.frequencies.iter().copied().collect(),
            eigenvalues: modal.eigenvalues.iter().copied().collect(),
            mode_shapes: (0..count).map(|j| modal.mode(j).iter().copied().collect()).collect(),
        }),
        Format::Csv => to_csv(modal.frequencies.iter().enumerate().map(|(j, f)| ModeRow {
            mode: j + 1,
            frequency_hz: *f,
        })),
    }
}

#[derive(Serialize)]
struct ValueRow {
    index: usize,
    value: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    method: Method,
    x: Vec<f64>,
    /// 1-based.
    support: Vec<usize>,
    objective: f64,
    iterations: usize,
    converged: bool,
    residual_norm: f64,
}

fn cmd_solve(
    g: &Global,
    path: &Path,
    method: Method,
    p: f64,
    epsilon: Option<f64>,
) -> Result<Vec<u8>, Failure> {
    let doc: ProblemDocument = parse_json(path)?;
    let mut problem: SparseProblem = doc.to_problem()?;
    if let Some(eps) = epsilon {
        problem = problem.with_epsilon(eps)?;
    }
    if method == Method::L1Ineq && problem.epsilon.is_none() {
        return Err(Failure::input("l1_ineq needs an epsilon (in the file or --epsilon)"));
    }
    if method != Method::L1Ineq && problem.epsilon.is_some() {
        problem.epsilon = None;
        info(g, "epsilon ignored by this method");
    }
    let s = solvers::solve(&problem, method, p)?;
    info(g, &format!("{} iterations, residual {:.3e}", s.iterations, s.residual_norm));
    match g.format {
        Format::Json => to_json(&SolveOutput {
            method,
            x: s.x.iter().copied().collect(),
            support: s.support.iter().map(|i| i + 1).collect(),
            objective: s.objective,
            iterations: s.iterations,
            converged: s.converged,
            residual_norm: s.residual_norm,
        }),
        Format::Csv => to_csv(s.x.iter().enumerate().map(|(i, v)| ValueRow {
            index: i + 1,
            value: *v,
        })),
    }
}

#[derive(Serialize)]
struct IdentifyRow {
    /// Iteration number, or `final`.
    iteration: String,
    element: usize,
    damage_estimate: f64,
}

#[derive(Serialize)]
struct IterationOutput {
    iteration: usize,
    damage: Vec<f64>,
    /// 1-based labels.
    support: Vec<usize>,
    residual_before: f64,
    residual_after: f64,
    solver_iterations: usize,
    solver_converged: bool,
}

#[derive(Serialize)]
struct IdentifyOutput {
    method: Method,
    m: usize,
    converged: bool,
    iterations_used: usize,
    support_changed_after_first: bool,
    damage: Vec<f64>,
    iterations: Vec<IterationOutput>,
}

impl IdentifyOutput {
    fn new(method: Method, m: usize, r: &UpdateResult) -> Self {
        Self {
            method,
            m,
            converged: r.converged,
            iterations_used: r.iterations_used,
            support_changed_after_first: r.support_changed_after_first,
            damage: r.damage_estimates.iter().copied().collect(),
            iterations: r
                .per_iteration
                .iter()
                .map(|rec| IterationOutput {
                    iteration: rec.iteration,
                    damage: rec.damage.iter().copied().collect(),
                    support: rec.support.iter().map(|i| i + 1).collect(),
                    residual_before: rec.residual_before,
                    residual_after: rec.residual_after,
                    solver_iterations: rec.solver_iterations,
                    solver_converged: rec.solver_converged,
                })
                .collect(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_identify(
    g: &Global,
    source: &str,
    measured: &Path,
    method: Method,
    m: usize,
    update: &UpdateArgs,
    single: bool,
    dump: Option<&Path>,
) -> Result<Vec<u8>, Failure> {
    let model = load(Some(source))?;
    let f = read_list(measured)?;
    let config = update.config(method, m);
    if let Some(path) = dump {
        let nominal = StiffnessParams::nominal(model.n_elements());
        let (system, _) = linearize(&model, &nominal, &f, m)?;
        let mut problem = SparseProblem::new(system.jacobian, system.residual)?
            .with_sign(config.sign_constraint);
        if let Some(rule) = config.epsilon_rule {
            let eps = rule.epsilon(m);
            if eps > 0.0 {
                problem = problem.with_epsilon(eps)?;
            }
        }
        let bytes = to_json(&ProblemDocument::from_problem(&problem))?;
        fs::write(path, bytes)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }
    let result = if single {
        one_shot(&model, &f, &config)?
    } else {
        run_update(&model, &f, &config)?
    };
    info(
        g,
        &format!(
            "{} iterations, converged: {}",
            result.iterations_used, result.converged
        ),
    );
    match g.format {
        Format::Json => to_json(&IdentifyOutput::new(method, m, &result)),
        Format::Csv => {
            let mut rows = Vec::new();
            for rec in &result.per_iteration {
                for (i, d) in rec.damage.iter().enumerate() {
                    rows.push(IdentifyRow {
                        iteration: rec.iteration.to_string(),
                        element: i + 1,
                        damage_estimate: *d,
                    });
                }
            }
            for (i, d) in result.damage_estimates.iter().enumerate() {
                rows.push(IdentifyRow {
                    iteration: "final".into(),
                    element: i + 1,
                    damage_estimate: *d,
                });
            }
            to_csv(rows)
        }
    }
}

#[derive(Serialize)]
struct RateRow<'a> {
    method: &'a str,
    m: usize,
    noise_pct: f64,
    successes: usize,
    realizations: usize,
    rate: f64,
}

fn cmd_mc(
    g: &Global,
    config: Option<&Path>,
    model: Option<&str>,
    realizations: Option<usize>,
) -> Result<Vec<u8>, Failure> {
    let model = load(model)?;
    let doc: SweepDocument = match config {
        Some(path) => parse_json(path)?,
        None => serde_json::from_str("{}").expect("empty sweep document"),
    };
    let mut config = doc.to_config(g.seed)?;
    if let Some(r) = realizations {
        config.realizations = r;
    }
    let report = run_monte_carlo(&model, &config)?;
    info(
        g,
        &format!(
            "{} cells x {} realizations in {:.1} s (l1_ineq uses the generator's noise level for epsilon)",
            report.cells.len(),
            report.realizations,
            report.runtime.as_secs_f64()
        ),
    );
    match g.format {
        Format::Json => to_json(&report),
        Format::Csv => to_csv(report.cells.iter().map(|c| RateRow {
            method: &c.method,
            m: c.m,
            noise_pct: c.noise_pct,
            successes: c.successes,
            realizations: c.realizations,
            rate: c.rate,
        })),
    }
}

#[derive(Serialize)]
struct StudyOutput<'a> {
    scenario: ScenarioDocument,
    m: usize,
    method: Method,
    converged: bool,
    iterations_used: usize,
    support_changed_after_first: bool,
    rows: &'a [StudyRow],
}

fn cmd_study(
    g: &Global,
    scenario: &Path,
    model: Option<&str>,
    method: Method,
    m: usize,
    update: &UpdateArgs,
) -> Result<Vec<u8>, Failure> {
    let model = load(model)?;
    let doc: ScenarioDocument = parse_json(scenario)?;
    let scenario = doc.to_scenario()?;
    let config = update.config(method, m);
    let study: DamageStudy = run_damage_study_with(&model, &scenario, &config)?;
    info(
        g,
        &format!(
            "{} iterations, mean error on damaged elements {:.3e}",
            study.result.iterations_used,
            study.final_damaged_error()
        ),
    );
    let rows = study.rows();
    match g.format {
        Format::Json => to_json(&StudyOutput {
            scenario: doc,
            m,
            method,
            converged: study.result.converged,
            iterations_used: study.result.iterations_used,
            support_changed_after_first: study.result.support_changed_after_first,
            rows: &rows,
        }),
        Format::Csv => to_csv(rows.iter()),
    }
}
