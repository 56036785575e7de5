//! Command-line front end for rule-based model composition: compose two
//! models and emit the composed model plus its trace, weave traceability
//! into a specification, query a trace file, or validate a
//! specification against its metamodels.
//!
//! Exit codes: 0 on success, 1 for diagnosable input problems (parse or
//! type errors, unreadable files, failed preconditions, unknown link
//! ids), 2 for errors raised while the composition runs (rule
//! ambiguity, evaluation failures, unresolvable elements).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mcomp_core::engine::{execute_seeded, EngineError};
use mcomp_core::model::{
    to_json_string, Metamodel, MetamodelRegistry, Model, TRACE_MM_NAME,
};
use mcomp_core::spec::{check_spec, parse_spec, print_spec, CompositionSpec};
use mcomp_core::trace::{export_dot, trace_execution, ElementSide, TraceModel};
use mcomp_core::weaver::{trace_from_woven_target, weave_traceability};

#[derive(Parser)]
#[command(
    name = "mcomp",
    version,
    about = "Rule-based model composition with traceability generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compose a left and right model and write the composed model,
    /// its trace, and the execution log into a directory.
    Compose(ComposeArgs),
    /// Rewrite a specification so its execution also emits the trace
    /// model as a second target.
    Weave {
        /// Specification to instrument.
        #[arg(long)]
        spec: PathBuf,
        /// File the woven specification is written to; a weave
        /// report is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Look up links in a trace file.
    Query {
        /// Trace file, as written by `compose`.
        #[arg(long)]
        trace: PathBuf,
        #[command(subcommand)]
        query: Query,
    },
    /// Parse and type-check a specification against its metamodels.
    Validate {
        /// Specification to check.
        #[arg(long)]
        spec: PathBuf,
        /// Metamodel files, one per `--mm`.
        #[arg(long = "mm", required = true)]
        metamodels: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct ComposeArgs {
    /// Composition specification.
    #[arg(long)]
    spec: PathBuf,
    /// Left source model.
    #[arg(long)]
    left: PathBuf,
    /// Right source model.
    #[arg(long)]
    right: PathBuf,
    /// Metamodel files, one per `--mm`.
    #[arg(long = "mm", required = true)]
    metamodels: Vec<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Also write the trace as a Graphviz file (trace.dot).
    #[arg(long)]
    dot: bool,
    /// Also write the correspondences found by the match phase
    /// (match-trace.json).
    #[arg(long = "match-trace")]
    match_trace: bool,
    /// Weave the specification first and read the trace from the woven
    /// run's second target instead of building it natively.
    #[arg(long = "via-weaver")]
    via_weaver: bool,
    /// Number the first generated element id starts at (default 1).
    #[arg(long = "id-seed")]
    id_seed: Option<u64>,
}

#[derive(Subcommand)]
enum Query {
    /// Links nested under the given link.
    Children { id: String },
    /// Links the given link is nested under.
    Parents { id: String },
    /// Links involving the given element on the given side.
    Element { id: String, side: SideArg },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
    Target,
}

impl From<SideArg> for ElementSide {
    fn from(side: SideArg) -> Self {
        match side {
            SideArg::Left => ElementSide::Left,
            SideArg::Right => ElementSide::Right,
            SideArg::Target => ElementSide::Target,
        }
    }
}

/// A failed run: the lines to print on stderr and the exit code.
struct Failure {
    code: u8,
    lines: Vec<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 1, lines: vec![message.into()] }
    }

    fn diagnostics(lines: Vec<String>) -> Self {
        Failure { code: 1, lines }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure { code: 2, lines: vec![message.into()] }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Compose(args) => cmd_compose(args),
        Command::Weave { spec, out } => cmd_weave(&spec, &out),
        Command::Query { trace, query } => cmd_query(&trace, query),
        Command::Validate { spec, metamodels } => cmd_validate(&spec, &metamodels),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            for line in &failure.lines {
                eprintln!("{line}");
            }
            ExitCode::from(failure.code)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<CompositionSpec, Failure> {
    let text = read_text(path)?;
    parse_spec(&text)
        .map_err(|diags| Failure::diagnostics(diags.iter().map(|d| d.to_string()).collect()))
}

fn load_registry(paths: &[PathBuf]) -> Result<MetamodelRegistry, Failure> {
    let mut registry = MetamodelRegistry::new();
    for path in paths {
        let metamodel: Metamodel = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Failure::input(format!("{} is not a metamodel: {e}", path.display())))?;
        registry
            .add(metamodel)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    Ok(registry)
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Failure::input(format!("{} is not a model: {e}", path.display())))
}

fn require_clean(spec: &CompositionSpec, registry: &MetamodelRegistry) -> Result<(), Failure> {
    let diags = check_spec(spec, registry);
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Failure::diagnostics(diags.iter().map(|d| d.to_string()).collect()))
    }
}

fn cmd_compose(args: ComposeArgs) -> Result<(), Failure> {
    let spec = load_spec(&args.spec)?;
    let registry = load_registry(&args.metamodels)?;
    require_clean(&spec, &registry)?;
    let run_spec = if args.via_weaver {
        let (woven, _) = weave_traceability(&spec).map_err(|e| Failure::input(e.to_string()))?;
        woven
    } else {
        spec
    };
    let left = load_model(&args.left)?;
    let right = load_model(&args.right)?;
    let result =
        execute_seeded(&run_spec, &left, &right, &registry, args.id_seed.unwrap_or(1)).map_err(
            |e| match e {
                EngineError::Setup(_) => Failure::input(e.to_string()),
                other => Failure::runtime(other.to_string()),
            },
        )?;

    // A run whose second target is typed by the trace metamodel already
    // encodes its own trace; otherwise the trace is built from the
    // execution record.
    let self_tracing = run_spec.targets.len() == 2
        && run_spec.targets[1].metamodel == TRACE_MM_NAME;
    let trace = if self_tracing {
        trace_from_woven_target(&result.targets[1]).map_err(|e| Failure::runtime(e.to_string()))?
    } else {
        trace_execution(&result).map_err(|e| Failure::runtime(e.to_string()))?
    };

    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", args.out.display())))?;
    write_text(&args.out.join("composed.json"), &to_json_string(result.composed()))?;
    write_text(&args.out.join("trace.json"), &trace.to_json())?;
    write_text(&args.out.join("execution-log.json"), &to_json_string(&result.log_json()))?;
    if result.targets.len() == 2 {
        write_text(&args.out.join("second-target.json"), &to_json_string(&result.targets[1]))?;
    }
    if args.dot {
        let targets: Vec<&Model> = result.targets.iter().collect();
        write_text(&args.out.join("trace.dot"), &export_dot(&trace, &left, &right, &targets))?;
    }
    if args.match_trace {
        write_text(&args.out.join("match-trace.json"), &to_json_string(&result.match_trace))?;
    }
    Ok(())
}

fn cmd_weave(spec_path: &Path, out_path: &Path) -> Result<(), Failure> {
    let spec = load_spec(spec_path)?;
    let (woven, report) = weave_traceability(&spec).map_err(|e| Failure::input(e.to_string()))?;
    write_text(out_path, &print_spec(&woven))?;
    let report_path = out_path.with_file_name("weave-report.json");
    write_text(&report_path, &to_json_string(&report))?;
    Ok(())
}

fn cmd_query(trace_path: &Path, query: Query) -> Result<(), Failure> {
    let trace = TraceModel::from_json(&read_text(trace_path)?)
        .map_err(|e| Failure::input(e.to_string()))?;
    let ids: Vec<&str> = match &query {
        Query::Children { id } => trace
            .children(id)
            .map_err(|e| Failure::input(e.to_string()))?
            .iter()
            .map(|l| l.id.as_str())
            .collect(),
        Query::Parents { id } => trace
            .parents(id)
            .map_err(|e| Failure::input(e.to_string()))?
            .iter()
            .map(|l| l.id.as_str())
            .collect(),
        Query::Element { id, side } => trace
            .links_for_element((*side).into(), id)
            .iter()
            .map(|l| l.id.as_str())
            .collect(),
    };
    for id in ids {
        println!("{id}");
    }
    Ok(())
}

fn cmd_validate(spec_path: &Path, metamodels: &[PathBuf]) -> Result<(), Failure> {
    let spec = load_spec(spec_path)?;
    let registry = load_registry(metamodels)?;
    require_clean(&spec, &registry)
}
