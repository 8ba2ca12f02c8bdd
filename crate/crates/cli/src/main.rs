//! `lumharch`: solve, compare and batch-run multicast routing in WDM meshes.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input (including structure
//! dumps that fail validation), 3 infeasible session, 4 solver limit hit.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lumharch::experiment::{run_experiment, ExperimentConfig};
use lumharch::hierarchy::{cps_nodes, dump, parse_dump, validate};
use lumharch::network::load_topology;
use lumharch::{build_model, solve, IlpModel, Mode, MulticastSession, Network, SolveOptions, SolveReport, SolveStatus};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(name = "lumharch", version, about = "Cost-optimal light-hierarchy multicast routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one session and print the optimal structures.
    Solve {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value = "lh")]
        mode: Mode,
        /// Drop the connectivity rows (shows the floating-cycle pathology).
        #[arg(long)]
        no_connectivity: bool,
        /// Write the optimal assignment in `name value` form.
        #[arg(long)]
        write_solution: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Solve one session as light-hierarchy and as light-trees.
    Compare {
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Random sessions on a topology; per-session CSV plus totals.
    Batch {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long, default_value_t = 2)]
        group_size: usize,
        #[arg(long, default_value_t = 100)]
        sessions: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "lh,lt")]
        modes: Vec<Mode>,
        /// CSV destination; stdout when omitted.
        #[arg(long = "out", short)]
        output: Option<PathBuf>,
        /// Record wall-clock milliseconds (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Check a structure dump against the light-hierarchy rules.
    Validate {
        #[command(flatten)]
        session: SessionArgs,
        /// Lines of the form `λk: (s(l_s1,1(...)))`.
        dump: PathBuf,
    },
    /// Write the integer program in LP format.
    EmitLp {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value = "lh")]
        mode: Mode,
        #[arg(long)]
        no_connectivity: bool,
        #[arg(long = "out", short)]
        output: Option<PathBuf>,
    },
    /// Read an external solver's solution and check it against the model.
    ImportSol {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value = "lh")]
        mode: Mode,
        #[arg(long)]
        no_connectivity: bool,
        /// `name value` per line; unlisted variables are zero.
        solution: PathBuf,
    },
}

#[derive(Args)]
struct NetworkArgs {
    /// Built-in (fig3, fig5, nsf, cost239) or a network file.
    #[arg(long, short)]
    topology: String,
    /// Nodes with splitters; all others become MI. Keeps file labels if omitted.
    #[arg(long, value_delimiter = ',')]
    splitters: Option<Vec<String>>,
    #[arg(long, short)]
    wavelengths: Option<usize>,
}

#[derive(Args)]
struct SessionArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, short)]
    source: String,
    #[arg(long, short, value_delimiter = ',', required = true)]
    dest: Vec<String>,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long, default_value_t = 1_000_000)]
    node_limit: u64,
    #[arg(long)]
    time_limit_ms: Option<u64>,
    #[arg(long, short, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl LimitArgs {
    fn options(&self) -> Result<SolveOptions> {
        if self.node_limit == 0 || self.time_limit_ms == Some(0) {
            bail!("limits must be positive");
        }
        Ok(SolveOptions {
            node_limit: self.node_limit,
            time_limit_ms: self.time_limit_ms,
            verbosity: self.verbose,
            ..SolveOptions::default()
        })
    }
}

/// `--splitters ""` means "no splitters".
fn nonempty(list: &[String]) -> Vec<String> {
    list.iter().filter(|s| !s.is_empty()).cloned().collect()
}

impl NetworkArgs {
    fn load(&self) -> Result<Network> {
        let mut net = load_topology(&self.topology).map_err(|e| anyhow::anyhow!("topology {}: {e}", self.topology))?;
        if let Some(s) = &self.splitters {
            net = net.with_splitters(&nonempty(s))?;
        }
        if let Some(w) = self.wavelengths {
            net = net.with_wavelengths(w)?;
        }
        Ok(net)
    }
}

impl SessionArgs {
    fn load(&self) -> Result<(Network, MulticastSession)> {
        let net = self.net.load()?;
        let ms = MulticastSession::from_names(&net, &self.source, &self.dest)?;
        Ok((net, ms))
    }
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::LimitReached => EXIT_LIMIT,
    }
}

fn print_report(out: &mut String, net: &Network, model: &IlpModel, r: &SolveReport) {
    writeln!(out, "mode: {}", model.mode()).unwrap();
    writeln!(out, "status: {}", r.status).unwrap();
    if let (Some(obj), Some((cost, w))) = (r.objective, r.cost_and_wavelengths(model)) {
        writeln!(out, "objective: {obj}").unwrap();
        writeln!(out, "cost: {cost}").unwrap();
        writeln!(out, "wavelengths: {w}").unwrap();
    }
    writeln!(out, "nodes explored: {}", r.nodes_explored).unwrap();
    writeln!(out, "lp iterations: {}", r.lp_iterations).unwrap();
    if let Some(set) = &r.structures {
        let cps: Vec<&str> = set
            .structures
            .iter()
            .flat_map(|ls| cps_nodes(ls, net))
            .map(|n| net.name(n))
            .collect();
        writeln!(out, "cps nodes: {}", if cps.is_empty() { "none".to_string() } else { cps.join(",") }).unwrap();
        write!(out, "{}", dump(set, net)).unwrap();
    }
}

fn write_or_print(out: &mut String, path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            write!(out, "{text}").unwrap();
            Ok(())
        }
    }
}

fn run(cli: Cli, out: &mut String) -> Result<u8> {
    match cli.command {
        Command::Solve { session, mode, no_connectivity, write_solution, limits } => {
            let (net, ms) = session.load()?;
            let model = build_model(&net, &ms, mode, !no_connectivity);
            let r = solve(&model, &limits.options()?);
            print_report(out, &net, &model, &r);
            if let (Some(path), Some(a)) = (write_solution, &r.assignment) {
                fs::write(&path, model.write_solution(a)).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(status_code(r.status))
        }
        Command::Compare { session, limits } => {
            let (net, ms) = session.load()?;
            let opts = limits.options()?;
            let mut costs = Vec::new();
            let mut code = 0;
            for mode in [Mode::Lh, Mode::Lt] {
                let model = build_model(&net, &ms, mode, true);
                let r = solve(&model, &opts);
                print_report(out, &net, &model, &r);
                writeln!(out).unwrap();
                code = code.max(status_code(r.status));
                costs.push((r.status, r.cost_and_wavelengths(&model)));
            }
            match (costs[0], costs[1]) {
                ((SolveStatus::Optimal, Some((h, hw))), (SolveStatus::Optimal, Some((t, tw)))) => {
                    writeln!(out, "cost LH {h} vs LT {t}: saving {} ({:.1}%)", t - h, (t - h) as f64 / t as f64 * 100.0).unwrap();
                    writeln!(out, "wavelengths LH {hw} vs LT {tw}").unwrap();
                }
                _ => writeln!(out, "no comparison: both modes must solve to optimality").unwrap(),
            }
            // an LT-only infeasibility is a finding, not a failure
            Ok(if costs[0].0 == SolveStatus::Optimal && code == EXIT_INFEASIBLE { 0 } else { code })
        }
        Command::Batch { net, group_size, sessions, seed, modes, output, timing, limits } => {
            let threads = match std::env::var("LUMHARCH_THREADS") {
                Ok(v) => v.parse().with_context(|| format!("LUMHARCH_THREADS={v} is not a thread count"))?,
                Err(_) => 0,
            };
            let cfg = ExperimentConfig {
                topology: net.topology,
                splitters: nonempty(&net.splitters.unwrap_or_default()),
                group_size,
                session_count: sessions,
                seed,
                wavelengths: net.wavelengths.unwrap_or(2),
                modes,
                sessions: None,
                solve: limits.options()?,
                threads,
                record_timing: timing,
            };
            let result = run_experiment(&cfg)?;
            write_or_print(out, output.as_ref(), &result.to_csv()?)?;
            eprintln!("{}", result.metrics);
            for v in result.property_violations() {
                eprintln!("warning: {v}");
            }
            let limited = result.metrics.totals.iter().any(|t| t.limited > 0);
            Ok(if limited { EXIT_LIMIT } else { 0 })
        }
        Command::Validate { session, dump: path } => {
            let (net, ms) = session.load()?;
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let set = parse_dump(&text, &net, &ms)?;
            let report = validate(&net, &set);
            if report.ok() {
                writeln!(out, "ok: cost {}, {} wavelength(s)", lumharch::hierarchy::cost(&set, &net), set.wavelength_count()).unwrap();
                Ok(0)
            } else {
                for v in &report.violations {
                    writeln!(out, "{v}").unwrap();
                }
                Ok(EXIT_INPUT)
            }
        }
        Command::EmitLp { session, mode, no_connectivity, output } => {
            let (net, ms) = session.load()?;
            write_or_print(out, output.as_ref(), &build_model(&net, &ms, mode, !no_connectivity).emit_lp())?;
            Ok(0)
        }
        Command::ImportSol { session, mode, no_connectivity, solution } => {
            let (net, ms) = session.load()?;
            let model = build_model(&net, &ms, mode, !no_connectivity);
            let text = fs::read_to_string(&solution).with_context(|| format!("reading {}", solution.display()))?;
            let a = model.import_solution(&text)?;
            let obj = model.evaluate(&a);
            let (cost, w) = model.decompose(obj);
            writeln!(out, "objective: {obj}").unwrap();
            writeln!(out, "cost: {cost}").unwrap();
            writeln!(out, "wavelengths: {w}").unwrap();
            let report = model.check_feasible(&a);
            if !report.ok() {
                for v in &report.violations {
                    writeln!(out, "violated: {v}").unwrap();
                }
                return Ok(EXIT_INPUT);
            }
            write!(out, "{}", dump(&model.extract_structures(&a), &net)).unwrap();
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut out = String::new();
    let result = run(cli, &mut out);
    // a closed pipe (`| head`) is not an error worth reporting
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
