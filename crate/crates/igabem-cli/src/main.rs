//! Command-line front end: parse a model, assemble, solve, write results.
//!
//! Exit codes: 0 success, 1 failed verification, 2 model/parse errors,
//! 3 assembly errors, 4 solver errors, 5 output/IO errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use igabem::assembly::{assemble, AssemblyContext, AssemblyError};
use igabem::model::{MethodSpec, Model, ModelError};
use igabem::oracles::verification_suite;
use igabem::results::{build_bundle, write_convergence_csv, write_results, OutputError, SweepRow};
use igabem::solver::{solve, SolveError, SolveMethod, SolveOptions};
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "igabem",
    version,
    about = "Isogeometric BEM solver for elastic domains with inclusions"
)]
struct Cli {
    /// Log level (overrides the IGABEM_LOG environment variable).
    #[arg(long, global = true)]
    log_level: Option<String>,
    /// Cap the worker thread count (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Machine-readable JSON on stdout instead of human text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Onestep,
    Coupled,
    Newton,
}

#[derive(Args)]
struct SolveArgs {
    /// Model file (JSON).
    model: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
    /// Override the solution method from the model file.
    #[arg(long)]
    method: Option<MethodArg>,
    /// Override the Newton tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the Newton iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Override the base surface quadrature order.
    #[arg(long)]
    quad_order: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Model file (JSON).
    model: PathBuf,
    /// Parameter to sweep: internal_points | quadrature_order.
    #[arg(long)]
    parameter: String,
    /// Values, either comma-separated (2,5,9) or an inclusive range (2..21).
    #[arg(long)]
    values: String,
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model and write results.
    Solve(SolveArgs),
    /// Run the built-in verification checks.
    Verify,
    /// Solve a model repeatedly over a parameter sweep.
    Sweep(SweepArgs),
    /// Print a model summary without solving.
    Info {
        /// Model file (JSON).
        model: PathBuf,
    },
}

enum CliError {
    Model(ModelError),
    Assembly(AssemblyError),
    Solve(SolveError),
    Output(OutputError),
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(_) | CliError::Usage(_) => 2,
            CliError::Assembly(_) => 3,
            CliError::Solve(_) => 4,
            CliError::Output(_) => 5,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Model(e) => format!("model error: {e}"),
            CliError::Assembly(e) => format!("assembly error: {e}"),
            CliError::Solve(e) => format!("solver error: {e}"),
            CliError::Output(e) => format!("output error: {e}"),
            CliError::Usage(m) => format!("usage error: {m}"),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e)
    }
}
impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        CliError::Assembly(e)
    }
}
impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Solve(e)
    }
}
impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::Output(e)
    }
}

fn main() {
    let cli = Cli::parse();
    init_logging(cli.log_level.as_deref());
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .ok();
    }
    #[cfg(not(feature = "parallel"))]
    if let Some(n) = cli.threads {
        log::warn!("built without the parallel feature; --threads {n} ignored");
    }

    let json_mode = cli.json;
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            if json_mode {
                println!(
                    "{}",
                    json!({ "status": "error", "exit_code": e.exit_code(), "message": e.message() })
                );
            } else {
                eprintln!("{}", e.message());
            }
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn init_logging(override_level: Option<&str>) {
    let env = env_logger::Env::new().filter_or("IGABEM_LOG", "warn");
    let mut builder = env_logger::Builder::from_env(env);
    if let Some(level) = override_level {
        builder.parse_filters(level);
    }
    builder.target(env_logger::Target::Stderr).try_init().ok();
}

fn solve_options(
    model: &Model,
    method: Option<MethodArg>,
    tol: Option<f64>,
    max_iter: Option<usize>,
) -> SolveOptions {
    let base_method = match model.file.solver.method {
        MethodSpec::OneStep => SolveMethod::OneStep,
        MethodSpec::Coupled => SolveMethod::Coupled,
        MethodSpec::Newton => SolveMethod::Newton,
    };
    SolveOptions {
        method: match method {
            Some(MethodArg::Onestep) => SolveMethod::OneStep,
            Some(MethodArg::Coupled) => SolveMethod::Coupled,
            Some(MethodArg::Newton) => SolveMethod::Newton,
            None => base_method,
        },
        tol: tol.unwrap_or(model.file.solver.tol),
        max_iter: max_iter.unwrap_or(model.file.solver.max_iter),
    }
}

fn load_model(path: &std::path::Path, quad_order: Option<usize>) -> Result<Model, CliError> {
    let mut model = Model::from_path(path)?;
    if let Some(order) = quad_order {
        model.file.quadrature.surface_order = order;
        model.file.quadrature.volume_order = order.min(8);
    }
    Ok(model)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args, cli.json),
        Command::Verify => cmd_verify(cli.json),
        Command::Sweep(args) => cmd_sweep(args, cli.json),
        Command::Info { model } => cmd_info(model, cli.json),
    }
}

fn cmd_solve(args: SolveArgs, json_mode: bool) -> Result<i32, CliError> {
    let t_total = Instant::now();
    let model = load_model(&args.model, args.quad_order)?;
    let opts = solve_options(&model, args.method, args.tol, args.max_iter);
    // provenance must reflect overrides
    let mut model = model;
    model.file.solver.tol = opts.tol;
    model.file.solver.max_iter = opts.max_iter;
    model.file.solver.method = match opts.method {
        SolveMethod::OneStep => MethodSpec::OneStep,
        SolveMethod::Coupled => MethodSpec::Coupled,
        SolveMethod::Newton => MethodSpec::Newton,
    };

    let t_assembly = Instant::now();
    let ctx = AssemblyContext::build(&model)?;
    let sys = assemble(&ctx)?;
    let assembly_seconds = t_assembly.elapsed().as_secs_f64();

    let t_solve = Instant::now();
    let sol = solve(&sys, &opts)?;
    let solve_seconds = t_solve.elapsed().as_secs_f64();

    let bundle = build_bundle(&model, &ctx, &sys, &sol)?;
    let files = write_results(&bundle, &model, &args.output)?;
    log::info!(
        "solved {} unknowns with {:?} in {:.3}s",
        sys.n_unknowns,
        opts.method,
        solve_seconds
    );

    // wall-clock timings live outside results.json so reruns stay
    // byte-identical
    let timings = json!({
        "model_hash": model.hash,
        "assembly_seconds": assembly_seconds,
        "solve_seconds": solve_seconds,
        "total_seconds": t_total.elapsed().as_secs_f64(),
    });
    let timing_path = args.output.join("timings.json");
    std::fs::write(&timing_path, timings.to_string()).map_err(|source| OutputError::Io {
        path: timing_path.display().to_string(),
        source,
    })?;

    if json_mode {
        println!(
            "{}",
            json!({
                "status": "ok",
                "exit_code": 0,
                "unknowns": sys.n_unknowns,
                "grid_points": sys.grid.len(),
                "residual": sol.residual,
                "iterations": sol.increments.len(),
                "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            })
        );
    } else {
        println!(
            "solved {} ({} unknowns, {} grid points)",
            model.file.name,
            sys.n_unknowns,
            sys.grid.len()
        );
        for p in &bundle.probes {
            println!(
                "  probe {:16} u = ({:+.6e}, {:+.6e}, {:+.6e})",
                p.id, p.u[0], p.u[1], p.u[2]
            );
        }
        for f in &files {
            println!("  wrote {}", f.display());
        }
    }
    Ok(0)
}

fn cmd_verify(json_mode: bool) -> Result<i32, CliError> {
    let reports = verification_suite();
    let all_pass = reports.iter().all(|r| r.pass);
    if json_mode {
        let rows: Vec<_> = reports
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "measured": r.measured,
                    "tolerance": r.tolerance,
                    "pass": r.pass,
                    "detail": r.detail,
                })
            })
            .collect();
        println!(
            "{}",
            json!({ "status": if all_pass { "ok" } else { "failed" },
                    "exit_code": if all_pass { 0 } else { 1 },
                    "checks": rows })
        );
    } else {
        println!("{:-^74}", " verification ");
        for r in &reports {
            println!(
                "{} {:44} measured {:9.3e}  tol {:7.1e}",
                if r.pass { "PASS" } else { "FAIL" },
                r.id,
                r.measured,
                r.tolerance
            );
        }
        println!(
            "{:-^74}",
            if all_pass {
                " all checks passed "
            } else {
                " FAILURES "
            }
        );
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn parse_values(spec: &str) -> Result<Vec<usize>, CliError> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let lo: usize = a
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad range start '{a}'")))?;
        let hi: usize = b
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad range end '{b}'")))?;
        if hi < lo {
            return Err(CliError::Usage(format!("empty range {lo}..{hi}")));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad value '{v}'")))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs, json_mode: bool) -> Result<i32, CliError> {
    let values = parse_values(&args.values)?;
    if values.is_empty() {
        return Err(CliError::Usage("no sweep values given".into()));
    }
    let base = Model::from_path(&args.model)?;
    let mut rows = Vec::new();
    for &value in &values {
        let mut file = base.file.clone();
        match args.parameter.as_str() {
            "internal_points" => {
                let mut any = false;
                for incl in &mut file.inclusions {
                    if let igabem::model::InclusionSpec::Linear {
                        internal_points, ..
                    } = incl
                    {
                        *internal_points = value;
                        any = true;
                    }
                }
                if !any {
                    return Err(CliError::Usage(
                        "model has no linear inclusion to sweep".into(),
                    ));
                }
            }
            "quadrature_order" => {
                file.quadrature.surface_order = value;
                file.quadrature.volume_order = value.min(8);
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown sweep parameter '{other}' (expected internal_points or quadrature_order)"
                )));
            }
        }
        let text = serde_json::to_string(&file).map_err(|e| CliError::Model(e.into()))?;
        let model = Model::from_file(file, &text)?;
        let ctx = AssemblyContext::build(&model)?;
        let sys = assemble(&ctx)?;
        let opts = solve_options(&model, None, None, None);
        let sol = solve(&sys, &opts)?;
        let bundle = build_bundle(&model, &ctx, &sys, &sol)?;
        log::info!("sweep {} = {value}: done", args.parameter);
        rows.push(SweepRow {
            value: value as f64,
            probes: bundle.probes,
        });
    }
    let path = write_convergence_csv(&rows, &base.hash, &args.output)?;
    if json_mode {
        println!(
            "{}",
            json!({
                "status": "ok",
                "exit_code": 0,
                "rows": rows.len(),
                "file": path.display().to_string(),
            })
        );
    } else {
        println!(
            "swept {} over {} values, wrote {}",
            args.parameter,
            rows.len(),
            path.display()
        );
    }
    Ok(0)
}

fn cmd_info(path: PathBuf, json_mode: bool) -> Result<i32, CliError> {
    let model = Model::from_path(&path)?;
    let ctx = AssemblyContext::build(&model)?;
    let n_elements: usize = ctx.elements.iter().map(|e| e.len()).sum();
    let grid_points: usize = model
        .inclusions
        .iter()
        .map(|i| match i {
            igabem::assembly::Inclusion::General(g) => g.dims.iter().product::<usize>(),
            igabem::assembly::Inclusion::Bar(b) => b.internal_points,
        })
        .sum();
    if json_mode {
        println!(
            "{}",
            json!({
                "status": "ok",
                "exit_code": 0,
                "name": model.file.name,
                "hash": model.hash,
                "patches": model.patches.len(),
                "elements": n_elements,
                "collocation_points": ctx.n_collocation(),
                "unknowns": ctx.dof.n_unknowns,
                "inclusions": model.inclusions.len(),
                "grid_points": grid_points,
            })
        );
    } else {
        println!("model     : {} ({})", model.file.name, model.hash);
        println!(
            "patches   : {} ({} elements)",
            model.patches.len(),
            n_elements
        );
        println!(
            "unknowns  : {} ({} collocation points)",
            ctx.dof.n_unknowns,
            ctx.n_collocation()
        );
        println!(
            "inclusions: {} ({} grid points)",
            model.inclusions.len(),
            grid_points
        );
    }
    Ok(0)
}
