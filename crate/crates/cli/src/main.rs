//! Command-line front end: classify graphs, compute ground and bound states,
//! estimate optimal constants, rearrange profiles, and run the
//! nonrelativistic limit, with machine-readable outputs.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gratwave_core::dirac::{assemble_dirac, nonrel_limit, NonrelLimitOptions};
use gratwave_core::error::SolveError;
use gratwave_core::export::{spinor_csv, state_csv};
use gratwave_core::graph::{classify_topology, parse_graph, MetricGraph};
use gratwave_core::grid::build_grid;
use gratwave_core::nls::{
    classify_critical, classify_subcritical, critical_mass_from_constant, gn_constant,
    nonexistence_check, GnOptions, GnVariant, GridParams, NlsProblem, SolveOptions,
};
use gratwave_core::rearrange::{decreasing_rearrangement, profile_csv, symmetric_rearrangement};

use output::*;

const EXIT_INPUT: u8 = 2;
const EXIT_REFUSED: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser)]
#[command(
    name = "gratwave",
    version,
    about = "Standing waves of NLS and Dirac equations on metric graphs with localized nonlinearity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Graph description file
    #[arg(long)]
    graph: PathBuf,
    /// Grid step
    #[arg(long, default_value_t = 0.02)]
    h: f64,
    /// Half-line truncation length
    #[arg(long, default_value_t = 30.0)]
    trunc: f64,
    /// Solver tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration budget
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Output basename; writes `<out>.json` and CSV companions
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print on stdout
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Topological classification plus existence/nonexistence verdicts
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        /// Nonlinearity exponent in (2, 6]
        #[arg(long)]
        p: f64,
        /// Mass constraint (required for subcritical verdicts)
        #[arg(long)]
        mass: Option<f64>,
        /// Refinement levels for constant estimation
        #[arg(long, default_value_t = 2)]
        gn_levels: usize,
    },
    /// Ground state of prescribed mass by normalized gradient flow
    GroundState {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        mass: f64,
        /// Delta-coupling strength at vertices (0 = Kirchhoff)
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
    },
    /// Optimal functional-inequality constant estimation
    Gn {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 6.0)]
        p: f64,
        #[arg(long, value_enum, default_value_t = VariantArg::CoreRestricted)]
        variant: VariantArg,
        #[arg(long, default_value_t = 2)]
        levels: usize,
    },
    /// NLDE bound state at fixed frequency inside the spectral gap
    BoundState {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Bound states along a schedule of relativistic parameters
    NonrelLimit {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        p: f64,
        /// NLSE frequency (must be negative)
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Comma-separated increasing schedule, e.g. 2,4,8,16
        #[arg(long, value_delimiter = ',')]
        c_schedule: Vec<f64>,
    },
    /// Decreasing and symmetric rearrangements of a stored state
    Rearrange {
        #[command(flatten)]
        common: CommonArgs,
        /// State CSV produced by ground-state (edge,x,value)
        #[arg(long)]
        state: PathBuf,
    },
    /// Coordinate-format dump of the assembled operators
    DumpOperators {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Also dump the Dirac matrix at these parameters
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Run job files concurrently (each a JSON array of CLI argument lists)
    Sweep {
        /// JSON file: [["classify", "--graph", "g.txt", ...], ...]
        #[arg(long)]
        jobs: PathBuf,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    WholeGraph,
    CoreRestricted,
    SupNorm,
}

impl From<VariantArg> for GnVariant {
    fn from(v: VariantArg) -> GnVariant {
        match v {
            VariantArg::WholeGraph => GnVariant::WholeGraph,
            VariantArg::CoreRestricted => GnVariant::CoreRestricted,
            VariantArg::SupNorm => GnVariant::SupNorm,
        }
    }
}

pub(crate) enum CliError {
    Input(String),
    Refused(String),
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Refused(_) => EXIT_REFUSED,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Refused(m) | CliError::Solver(m) => m,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::RefusedRegime(_) | SolveError::OutsideSpectralGap { .. } => {
                CliError::Refused(e.to_string())
            }
            SolveError::InvalidParameter(_)
            | SolveError::GridMismatch { .. }
            | SolveError::ZeroMass => CliError::Input(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

fn load_graph(path: &PathBuf) -> Result<MetricGraph, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_graph(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_out(path: &PathBuf, suffix: &str, contents: &str) -> Result<(), CliError> {
    let mut p = path.clone();
    let stem = p
        .file_name()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_default();
    p.set_file_name(format!("{stem}{suffix}"));
    std::fs::write(&p, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display())))
}

fn emit(
    common: &CommonArgs,
    doc_json: String,
    csv: Option<(&str, String)>,
) -> Result<(), CliError> {
    match common.format {
        Format::Json => println!("{doc_json}"),
        Format::Csv => {
            if let Some((_, ref body)) = csv {
                print!("{body}");
            } else {
                println!("{doc_json}");
            }
        }
    }
    if let Some(out) = &common.out {
        write_out(out, ".json", &(doc_json + "\n"))?;
        if let Some((suffix, body)) = csv {
            write_out(out, suffix, &body)?;
        }
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Classify {
            common,
            p,
            mass,
            gn_levels,
        } => cmd_classify(common, p, mass, gn_levels),
        Command::GroundState {
            common,
            p,
            mass,
            alpha,
        } => cmd_ground_state(common, p, mass, alpha),
        Command::Gn {
            common,
            p,
            variant,
            levels,
        } => cmd_gn(common, p, variant, levels),
        Command::BoundState {
            common,
            p,
            omega,
            m,
            c,
        } => cmd_bound_state(common, p, omega, m, c),
        Command::NonrelLimit {
            common,
            p,
            lambda,
            m,
            c_schedule,
        } => cmd_nonrel_limit(common, p, lambda, m, c_schedule),
        Command::Rearrange { common, state } => cmd_rearrange(common, state),
        Command::DumpOperators {
            common,
            alpha,
            m,
            c,
        } => cmd_dump(common, alpha, m, c),
        Command::Sweep { jobs } => cmd_sweep(jobs),
    }
}

fn cmd_classify(
    common: CommonArgs,
    p: f64,
    mass: Option<f64>,
    gn_levels: usize,
) -> Result<(), CliError> {
    if !(p > 2.0 && p <= 6.0) {
        return Err(CliError::Input(format!("p must lie in (2, 6], got {p}")));
    }
    let graph = load_graph(&common.graph)?;
    let topology = classify_topology(&graph);
    let gn_opts = GnOptions {
        h: common.h,
        l_trunc: common.trunc,
        levels: gn_levels,
        ..GnOptions::default()
    };

    let mut doc = ClassifyDoc {
        config: resolved(&common, "classify").with_p(p).with_mass_opt(mass),
        graph_hash: graph.content_hash(),
        topology,
        regime: String::new(),
        subcritical: None,
        nonexistence: None,
        critical: None,
    };
    if (p - 6.0).abs() < 1e-12 {
        doc.regime = "critical".into();
        doc.critical = Some(classify_critical(&graph, &gn_opts)?);
    } else if p >= 4.0 {
        doc.regime = "subcritical".into();
        let mu =
            mass.ok_or_else(|| CliError::Input("subcritical classification needs --mass".into()))?;
        let (verdict, certificate) = classify_subcritical(&graph, mu, p, &gn_opts)?;
        doc.subcritical = Some(SubcriticalDoc {
            verdict,
            certificate,
        });
        doc.nonexistence = Some(nonexistence_check(&graph, mu, p, &gn_opts)?);
    } else {
        // ground states exist for every mass below p = 4
        doc.regime = "subcritical-all-masses".into();
    }
    let json = serde_json::to_string_pretty(&doc).expect("serializable");
    emit(&common, json, None)
}

fn cmd_ground_state(common: CommonArgs, p: f64, mass: f64, alpha: f64) -> Result<(), CliError> {
    let graph = load_graph(&common.graph)?;
    let params = GridParams {
        h: common.h,
        l_trunc: common.trunc,
    };
    let prob = NlsProblem::new(&graph, p, mass, params, alpha)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let opts = SolveOptions {
        tol: common.tol,
        max_iter: common.max_iter,
    };
    let report = prob.ground_state(None, &opts)?;
    let csv = state_csv(prob.grid(), &report.state);
    let doc = GroundStateDoc {
        config: resolved(&common, "ground-state")
            .with_p(p)
            .with_mass(mass)
            .with_alpha(alpha),
        graph_hash: graph.content_hash(),
        energy: report.energy,
        lagrange: report.lagrange,
        residual: report.residual,
        mass: report.mass,
        iterations: report.iterations,
        flow_iterations: report.flow_iterations,
        newton_iterations: report.newton_iterations,
        converged: report.converged,
    };
    let json = serde_json::to_string_pretty(&doc).expect("serializable");
    emit(&common, json, Some((".csv", csv)))
}

fn cmd_gn(common: CommonArgs, p: f64, variant: VariantArg, levels: usize) -> Result<(), CliError> {
    let graph = load_graph(&common.graph)?;
    let opts = GnOptions {
        h: common.h,
        l_trunc: common.trunc,
        levels,
        ..GnOptions::default()
    };
    let est = gn_constant(&graph, p, variant.into(), &opts)?;
    let critical_mass = ((p - 6.0).abs() < 1e-12 && variant != VariantArg::SupNorm)
        .then(|| critical_mass_from_constant(est.constant));
    let csv = state_csv(&est.grid, &est.maximizer);
    let doc = GnDoc {
        config: resolved(&common, "gn").with_p(p),
        graph_hash: graph.content_hash(),
        variant: est.variant,
        constant: est.constant,
        critical_mass,
        history: est.history,
    };
    let json = serde_json::to_string_pretty(&doc).expect("serializable");
    emit(&common, json, Some((".csv", csv)))
}

fn cmd_bound_state(common: CommonArgs, p: f64, omega: f64, m: f64, c: f64) -> Result<(), CliError> {
    let graph = load_graph(&common.graph)?;
    let grid =
        build_grid(&graph, common.h, common.trunc).map_err(|e| CliError::Input(e.to_string()))?;
    let op = assemble_dirac(&grid, m, c)?;
    let opts = SolveOptions {
        tol: common.tol,
        max_iter: common.max_iter,
    };
    let report = op.bound_state(omega, p, None, &opts)?;
    let csv = spinor_csv(&grid, &report.spinor);
    let doc = BoundStateDoc {
        config: resolved(&common, "bound-state")
            .with_p(p)
            .with_dirac(m, c)
            .with_omega(omega),
        graph_hash: graph.content_hash(),
        omega: report.omega,
        action: report.action,
        residual: report.residual,
        iterations: report.iterations,
        converged: report.converged,
        chi_l2: op.chi_l2(&report.spinor),
        phi_l2: op.phi_l2(&report.spinor),
        spectral_gap: op.spectral_gap()?,
    };
    let json = serde_json::to_string_pretty(&doc).expect("serializable");
    emit(&common, json, Some((".csv", csv)))
}

fn cmd_nonrel_limit(
    common: CommonArgs,
    p: f64,
    lambda: f64,
    m: f64,
    c_schedule: Vec<f64>,
) -> Result<(), CliError> {
    let graph = load_graph(&common.graph)?;
    let opts = NonrelLimitOptions {
        p,
        lambda,
        m,
        schedule: c_schedule.clone(),
        grid: GridParams {
            h: common.h,
            l_trunc: common.trunc,
        },
        solve: SolveOptions {
            tol: common.tol,
            max_iter: common.max_iter,
        },
    };
    let table = nonrel_limit(&graph, &opts)?;
    let csv = table.to_csv();
    let doc = NonrelLimitDoc {
        config: resolved(&common, "nonrel-limit")
            .with_p(p)
            .with_lambda(lambda)
            .with_schedule(m, c_schedule),
        graph_hash: graph.content_hash(),
        stages: table.stages.clone(),
        target_mass: table.target_mass,
        aborted: table.aborted.clone(),
    };
    let json = serde_json::to_string_pretty(&doc).expect("serializable");
    emit(&common, json, Some((".csv", csv)))?;
    if let Some(reason) = table.aborted {
        return Err(CliError::Solver(format!(
            "continuation aborted with partial table: {reason}"
        )));
    }
    Ok(())
}

fn cmd_rearrange(common: CommonArgs, state: PathBuf) -> Result<(), CliError> {
    let graph = load_graph(&common.graph)?;
    let grid =
        build_grid(&graph, common.h, common.trunc).map_err(|e| CliError::Input(e.to_string()))?;
    let text = std::fs::read_to_string(&state)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", state.display())))?;
    let field = read_state_csv(&grid, &text)?;
    let star = decreasing_rearrangement(&grid, &field, common.h)?;
    let hat = symmetric_rearrangement(&grid, &field, common.h)?;
    let star_csv = profile_csv(&star);
    let hat_csv = profile_csv(&hat);
    let doc = RearrangeDoc {
        config: resolved(&common, "rearrange"),
        graph_hash: graph.content_hash(),
        total_length: grid.total_length(),
        samples: star.values.len(),
    };
    let json = serde_json::to_string_pretty(&doc).expect("serializable");
    match common.format {
        Format::Json => println!("{json}"),
        Format::Csv => print!("{star_csv}"),
    }
    if let Some(out) = &common.out {
        write_out(out, ".json", &(json + "\n"))?;
        write_out(out, ".decreasing.csv", &star_csv)?;
        write_out(out, ".symmetric.csv", &hat_csv)?;
    }
    Ok(())
}

/// Parse an (edge,x,value) CSV back onto the grid's nodes.
fn read_state_csv(
    grid: &gratwave_core::grid::Grid,
    text: &str,
) -> Result<gratwave_core::field::Field, CliError> {
    let mut field = gratwave_core::field::Field::zeros(grid);
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Input(format!(
                "state CSV line {}: expected edge,x,value",
                lineno + 1
            )));
        }
        let (label, x, value) = (parts[0], parts[1], parts[2]);
        let x: f64 = x
            .parse()
            .map_err(|_| CliError::Input(format!("state CSV line {}: bad x", lineno + 1)))?;
        let value: f64 = value
            .parse()
            .map_err(|_| CliError::Input(format!("state CSV line {}: bad value", lineno + 1)))?;
        let eg = grid
            .edge_grids
            .iter()
            .find(|eg| eg.label == label)
            .ok_or_else(|| CliError::Input(format!("unknown edge `{label}` in state CSV")))?;
        let k = (x / eg.step).round() as usize;
        if k >= eg.nodes.len() || (x - k as f64 * eg.step).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(CliError::Input(format!(
                "state CSV line {}: x = {x} is not a grid node of `{label}`",
                lineno + 1
            )));
        }
        field.values[eg.nodes[k]] = value;
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Input("state CSV holds no rows".into()));
    }
    Ok(field)
}

fn cmd_dump(
    common: CommonArgs,
    alpha: f64,
    m: Option<f64>,
    c: Option<f64>,
) -> Result<(), CliError> {
    use gratwave_core::assemble::{assemble_laplacian, dump_coordinate};
    let graph = load_graph(&common.graph)?;
    let grid =
        build_grid(&graph, common.h, common.trunc).map_err(|e| CliError::Input(e.to_string()))?;
    let ops = assemble_laplacian(&grid, alpha);
    let out = common
        .out
        .clone()
        .ok_or_else(|| CliError::Input("dump-operators needs --out".into()))?;
    write_out(&out, ".stiffness.txt", &dump_coordinate(&ops.stiffness))?;
    write_out(&out, ".mass.txt", &dump_coordinate(&ops.mass))?;
    write_out(&out, ".core_mass.txt", &dump_coordinate(&ops.core_mass))?;
    if let (Some(m), Some(c)) = (m, c) {
        let dirac = assemble_dirac(&grid, m, c)?;
        write_out(&out, ".dirac.txt", &dump_coordinate(dirac.matrix()))?;
    }
    println!("{{\"dumped\": true, \"n_free\": {}}}", grid.n_free());
    Ok(())
}

fn cmd_sweep(jobs: PathBuf) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&jobs)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", jobs.display())))?;
    let parsed: Vec<Vec<String>> = serde_json::from_str(&text).map_err(|e| {
        CliError::Input(format!(
            "jobs file must be a JSON array of argument lists: {e}"
        ))
    })?;
    if parsed.is_empty() {
        return Err(CliError::Input("jobs file holds no jobs".into()));
    }
    let threads = std::env::var("GRATWAVE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    let exe = std::env::current_exe()
        .map_err(|e| CliError::Input(format!("cannot locate executable: {e}")))?;

    let mut failures = 0usize;
    for chunk in parsed.chunks(threads) {
        let handles: Vec<_> = chunk
            .iter()
            .cloned()
            .map(|args| {
                let exe = exe.clone();
                std::thread::spawn(move || {
                    std::process::Command::new(&exe)
                        .args(&args)
                        .status()
                        .map(|s| s.code().unwrap_or(-1))
                        .unwrap_or(-1)
                })
            })
            .collect();
        for (job, handle) in chunk.iter().zip(handles) {
            let code = handle.join().unwrap_or(-1);
            println!("{} -> exit {code}", job.join(" "));
            if code != 0 {
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Solver(format!("{failures} sweep job(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
