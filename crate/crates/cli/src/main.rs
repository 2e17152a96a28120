use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use silentdfs_core::doc::{to_dot, GraphDocument, VerdictReport};
use silentdfs_core::experiments::bench::{BenchConfig, InitKind};
use silentdfs_core::experiments::config::{
    Envelope, ExperimentConfig, ExperimentResult, GraphSource, InitSpec, SimulateConfig,
    TokensConfig,
};
use silentdfs_core::experiments::fuzz::FuzzConfig;
use silentdfs_core::graph::{generate_with, GraphKind, PortOrder};
use silentdfs_core::stabilizer::{legal_configuration, ActivationMode, Corruption, DaemonSchedule};
use silentdfs_core::token::{CirculationOptions, Fault, ScheduledFault, TreeStart};
use silentdfs_core::verifier::{verify_all, VerifyMode};

/// Exit status for input that could not be read or parsed.
const MALFORMED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "silentdfs",
    version,
    about = "First-DFS marking, verification and self-stabilization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a port-ordered graph document.
    Gen(GenArgs),
    /// Label a graph with the first-DFS marker.
    Mark(MarkArgs),
    /// Run the local verifier on a labeled document.
    Verify(VerifyArgs),
    /// Run the self-stabilizing construction to silence.
    Simulate(SimulateArgs),
    /// Corrupt legal labelings and check every corruption is detected.
    Fuzz(FuzzArgs),
    /// Stabilization time and register width over a range of sizes.
    Bench(BenchArgs),
    /// DFS-order token circulation on the stabilized tree.
    Tokens(TokensArgs),
    /// Re-run a saved config or report.
    Replay(ReplayArgs),
}

#[derive(Args, Clone)]
struct GraphSpec {
    #[arg(long, default_value = "random_connected")]
    kind: GraphKind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `shuffled` or `sorted`.
    #[arg(long, default_value = "shuffled", value_parser = parse_port_order)]
    port_order: PortOrder,
}

impl GraphSpec {
    /// Generated graph if `--n` is given, else a document read from `input`.
    fn source(&self, input: Option<&Path>) -> Result<GraphSource, Failure> {
        match self.n {
            Some(n) => Ok(GraphSource::Generated {
                kind: self.kind,
                n,
                seed: self.seed,
                port_order: self.port_order,
            }),
            None => Ok(GraphSource::Inline {
                document: read_document(input)?,
            }),
        }
    }
}

fn parse_port_order(s: &str) -> Result<PortOrder, String> {
    match s {
        "shuffled" => Ok(PortOrder::Shuffled),
        "sorted" => Ok(PortOrder::Sorted),
        _ => Err(format!("unknown port order `{s}`")),
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    graph: GraphSpec,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MarkArgs {
    /// Graph document; stdin if omitted or `-`.
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write a DOT rendering of the tree.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Labeled document; stdin if omitted or `-`.
    input: Option<PathBuf>,
    /// `first-dfs` or `some-dfs`.
    #[arg(long, default_value = "first-dfs")]
    mode: VerifyMode,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphSpec,
    /// Graph document used when `--n` is absent; stdin if omitted or `-`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// null, legal, garbage or document.
    #[arg(long, default_value = "null")]
    init: String,
    /// Seed for `--init garbage`.
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
    /// Register overwrites, e.g. `node=2,field=out,value=99;node=0,field=in,value=3`.
    #[arg(long)]
    inject: Option<String>,
    #[command(flatten)]
    daemon: DaemonArgs,
    #[arg(long)]
    round_limit: Option<usize>,
    /// Write the per-round trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the metrics document here.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Full report (config + results); stdout if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct DaemonArgs {
    /// synchronous, random-subset or adversarial-single.
    #[arg(long, default_value = "synchronous")]
    daemon: ActivationMode,
    #[arg(long, default_value_t = 0)]
    daemon_seed: u64,
    /// Override the mode's fairness bound.
    #[arg(long)]
    fairness_bound: Option<usize>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    n_min: usize,
    #[arg(long, default_value_t = 32)]
    n_max: usize,
    #[arg(long, default_value = "random_connected")]
    kind: GraphKind,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 64, 128, 256])]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
    seeds: Vec<u64>,
    #[arg(long, default_value = "random_connected")]
    kind: GraphKind,
    #[arg(long, default_value = "synchronous")]
    daemon: ActivationMode,
    #[arg(long, value_delimiter = ',', default_value = "null,corrupted,garbage")]
    inits: Vec<InitKind>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TokensArgs {
    #[command(flatten)]
    graph: GraphSpec,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    rounds: usize,
    #[command(flatten)]
    daemon: DaemonArgs,
    /// Start the tree layer from all-null registers instead of the legal labeling.
    #[arg(long)]
    null_tree: bool,
    /// `ROUND:NODE`, a second token at NODE.
    #[arg(long)]
    duplicate_at: Vec<String>,
    /// `ROUND`, remove the token.
    #[arg(long)]
    delete_at: Vec<usize>,
    /// `ROUND:SEED`, random token registers everywhere.
    #[arg(long)]
    garbage_at: Vec<String>,
    /// `ROUND:SPEC`, tree-register overwrites as in `simulate --inject`.
    #[arg(long)]
    tree_fault_at: Vec<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Saved config or report; stdin if omitted or `-`.
    input: Option<PathBuf>,
    /// Exit 1 unless the new report matches the input byte for byte.
    #[arg(long)]
    check: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: MALFORMED,
            error: e.into(),
        }
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => {
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
        }
        _ => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .context("reading stdin")?;
            Ok(s)
        }
    }
}

fn read_document(path: Option<&Path>) -> Result<GraphDocument> {
    Ok(GraphDocument::parse(&read_input(path)?)?)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    let text = if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    };
    match path {
        Some(p) if p != Path::new("-") => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        _ => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("documents always serialize")
}

fn status(ok: bool) -> u8 {
    u8::from(!ok)
}

fn split_at_colon(s: &str) -> Result<(usize, &str)> {
    let (r, rest) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("expected ROUND:VALUE, got `{s}`"))?;
    Ok((
        r.parse().with_context(|| format!("bad round in `{s}`"))?,
        rest,
    ))
}

fn schedule(args: &DaemonArgs, n: usize) -> DaemonSchedule {
    let mut s = DaemonSchedule::for_mode(args.daemon, n, args.daemon_seed);
    if let Some(b) = args.fairness_bound {
        s.fairness_bound = b;
    }
    s
}

fn emit(envelope: &Envelope, output: Option<&Path>) -> Result<u8, Failure> {
    write_output(output, &envelope.to_json())?;
    Ok(status(envelope.report.success()))
}

fn cmd_gen(a: GenArgs) -> Result<u8, Failure> {
    let n = a.graph.n.ok_or_else(|| anyhow!("--n is required"))?;
    let g = generate_with(a.graph.kind, n, a.graph.seed, a.graph.port_order)?;
    write_output(
        a.output.as_deref(),
        &GraphDocument::from_graph(&g).to_json(),
    )?;
    Ok(0)
}

fn cmd_mark(a: MarkArgs) -> Result<u8, Failure> {
    let g = read_document(a.input.as_deref())?.graph()?;
    let c = legal_configuration(&g);
    if let Some(p) = &a.dot {
        write_output(Some(p), &to_dot(&g, &c))?;
    }
    write_output(
        a.output.as_deref(),
        &GraphDocument::with_config(&g, &c).to_json(),
    )?;
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> Result<u8, Failure> {
    let (g, c) = read_document(a.input.as_deref())?.labeled()?;
    let vm = verify_all(&g, &c, a.mode);
    let report = VerdictReport::from(&vm);
    write_output(a.output.as_deref(), &json(&report))?;
    if !report.summary.accepted {
        eprintln!("rejected at nodes {:?}", report.summary.detecting_nodes);
    }
    Ok(status(report.summary.accepted))
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8, Failure> {
    let init = match a.init.as_str() {
        "null" => InitSpec::Null,
        "legal" => InitSpec::Legal,
        "garbage" => InitSpec::Garbage { seed: a.init_seed },
        "document" => InitSpec::Document,
        other => return Err(anyhow!("unknown initial configuration `{other}`").into()),
    };
    let inject = a
        .inject
        .as_deref()
        .map(Corruption::parse_list)
        .transpose()?
        .unwrap_or_default();
    let config = SimulateConfig {
        graph: a.graph.source(a.input.as_deref())?,
        init,
        inject,
        mode: a.daemon.daemon,
        daemon_seed: a.daemon.daemon_seed,
        fairness_bound: a.daemon.fairness_bound,
        round_limit: a.round_limit,
        trace: a.trace.is_some(),
    };
    let envelope = ExperimentConfig::Simulate(config).execute()?;
    if let ExperimentResult::Simulate(r) = &envelope.report {
        if let (Some(p), Some(t)) = (&a.trace, &r.trace) {
            write_output(Some(p), &json(t))?;
        }
        if let Some(p) = &a.metrics {
            write_output(Some(p), &json(&r.metrics))?;
        }
        if !r.metrics.converged {
            eprintln!("no silence within {} rounds", r.metrics.rounds_run);
        }
    }
    emit(&envelope, a.output.as_deref())
}

fn cmd_fuzz(a: FuzzArgs) -> Result<u8, Failure> {
    if a.trials == 0 {
        return Err(anyhow!("--trials must be positive").into());
    }
    if a.n_min == 0 || a.n_min > a.n_max {
        return Err(anyhow!("need 1 <= --n-min <= --n-max").into());
    }
    let cfg = FuzzConfig {
        trials: a.trials,
        seed: a.seed,
        n_min: a.n_min,
        n_max: a.n_max,
        kind: a.kind,
    };
    let envelope = ExperimentConfig::Fuzz(cfg).execute()?;
    if let ExperimentResult::Fuzz(r) = &envelope.report {
        eprintln!(
            "detected {}/{} (excluded {} shift-equivalent)",
            r.detected, r.evaluated, r.excluded_shift_equivalent
        );
    }
    emit(&envelope, a.output.as_deref())
}

fn cmd_bench(a: BenchArgs) -> Result<u8, Failure> {
    if a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(anyhow!("--sizes must be a nonempty list of positive sizes").into());
    }
    let cfg = BenchConfig {
        sizes: a.sizes,
        seeds: a.seeds,
        kind: a.kind,
        mode: a.daemon,
        inits: a.inits,
        ..BenchConfig::default()
    };
    let envelope = ExperimentConfig::Bench(cfg).execute()?;
    if let ExperimentResult::Bench(r) = &envelope.report {
        for (init, fit) in &r.fits {
            eprintln!(
                "{:>9}: rounds = {:.3} n + {:.2}  (R^2 {:.4})",
                init.name(),
                fit.slope,
                fit.intercept,
                fit.r_squared
            );
        }
        eprintln!("max rounds/n {:.3}", r.max_rounds_per_node);
    }
    emit(&envelope, a.output.as_deref())
}

fn cmd_tokens(a: TokensArgs) -> Result<u8, Failure> {
    let graph = a.graph.source(a.input.as_deref())?;
    let n = graph.build()?.0.node_count();
    let mut faults = Vec::new();
    for s in &a.duplicate_at {
        let (round, node) = split_at_colon(s)?;
        faults.push(ScheduledFault {
            round,
            fault: Fault::DuplicateToken {
                node: node.parse()?,
            },
        });
    }
    for &round in &a.delete_at {
        faults.push(ScheduledFault {
            round,
            fault: Fault::DeleteToken,
        });
    }
    for s in &a.garbage_at {
        let (round, seed) = split_at_colon(s)?;
        faults.push(ScheduledFault {
            round,
            fault: Fault::TokenGarbage {
                seed: seed.parse()?,
            },
        });
    }
    for s in &a.tree_fault_at {
        let (round, spec) = split_at_colon(s)?;
        faults.push(ScheduledFault {
            round,
            fault: Fault::Tree {
                corruptions: Corruption::parse_list(spec)?,
            },
        });
    }
    faults.sort_by_key(|f| f.round);
    let options = CirculationOptions {
        rounds: a.rounds,
        schedule: schedule(&a.daemon, n),
        tree_start: if a.null_tree {
            TreeStart::Null
        } else {
            TreeStart::Legal
        },
        faults,
    };
    let envelope = ExperimentConfig::Tokens(TokensConfig { graph, options }).execute()?;
    if let ExperimentResult::Tokens(r) = &envelope.report {
        match r.legitimate_from {
            Some(from) => eprintln!(
                "single token in DFS order from round {from} ({} full cycles)",
                r.cycles_checked
            ),
            None => eprintln!("circulation did not settle in {} rounds", a.rounds),
        }
    }
    emit(&envelope, a.output.as_deref())
}

fn cmd_replay(a: ReplayArgs) -> Result<u8, Failure> {
    let text = read_input(a.input.as_deref())?;
    let config = ExperimentConfig::from_json(&text)?;
    let envelope = config.execute()?;
    let fresh = envelope.to_json();
    write_output(a.output.as_deref(), &fresh)?;
    if a.check {
        let same = fresh == text;
        if !same {
            eprintln!("replayed report differs from input");
        }
        return Ok(status(same));
    }
    Ok(status(envelope.report.success()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Mark(a) => cmd_mark(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fuzz(a) => cmd_fuzz(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Tokens(a) => cmd_tokens(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            // some messages already embed their cause
            let mut msg = f.error.to_string();
            for cause in f.error.chain().skip(1) {
                let c = cause.to_string();
                if !msg.ends_with(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(f.code)
        }
    }
}
