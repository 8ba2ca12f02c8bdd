//! Batch experiments: random sessions on a topology, solved per mode, with
//! per-session CSV rows and aggregate metrics.
//!
//! Sessions come from a SplitMix64 stream: the source is drawn uniformly,
//! then the destinations are the prefix of a partial Fisher–Yates shuffle of
//! the remaining nodes. The source is never a destination.

use std::fmt;

use rand::{RngExt, SeedableRng};
use rand::seq::SliceRandom;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use thiserror::Error;

use crate::hierarchy::Mode;
use crate::model::build_model;
use crate::network::{load_topology, MulticastSession, Network, NetworkError, SessionError};
use crate::solver::{solve, SolveOptions, SolveStatus};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("topology: {0}")]
    Topology(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("group size {size} must be between 1 and {max} on a {nodes}-node network")]
    GroupSize { size: usize, max: usize, nodes: usize },
    #[error("session count must be at least 1")]
    NoSessions,
    #[error("no modes requested")]
    NoModes,
    #[error("thread pool: {0}")]
    Threads(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Built-in name or path to a network file.
    pub topology: String,
    /// Nodes equipped with splitters; all others are MI. Empty means none.
    pub splitters: Vec<String>,
    pub group_size: usize,
    pub session_count: usize,
    pub seed: u64,
    pub wavelengths: usize,
    pub modes: Vec<Mode>,
    /// Explicit `(source, destinations)` sessions used instead of random ones.
    pub sessions: Option<Vec<(String, Vec<String>)>>,
    pub solve: SolveOptions,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Fill the `ms` column. Off by default so identical configs give
    /// byte-identical CSV.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: "nsf".into(),
            splitters: Vec::new(),
            group_size: 2,
            session_count: 100,
            seed: 1,
            wavelengths: 2,
            modes: vec![Mode::Lh, Mode::Lt],
            sessions: None,
            solve: SolveOptions::default(),
            threads: 0,
            record_timing: false,
        }
    }
}

/// `count` sessions with `size` destinations each, deterministic in `seed`.
pub fn generate_sessions(
    net: &Network,
    size: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<MulticastSession>, ExperimentError> {
    let n = net.node_count();
    if size == 0 || size >= n {
        return Err(ExperimentError::GroupSize { size, max: n.saturating_sub(1), nodes: n });
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let source = rng.random_range(0..n);
            let mut others: Vec<usize> = (0..n).filter(|&v| v != source).collect();
            let (picked, _) = others.partial_shuffle(&mut rng, size);
            Ok(MulticastSession::new(net, source, picked.to_vec())?)
        })
        .collect()
}

/// Outcome of one session in one mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRow {
    pub session_id: usize,
    pub source: String,
    /// Space-separated destination ids.
    pub destinations: String,
    pub mode: Mode,
    pub cost: Option<i64>,
    pub wavelengths: Option<i64>,
    pub cps_used: bool,
    pub status: SolveStatus,
    pub nodes_explored: u64,
    pub ms: Option<u128>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeTotals {
    pub mode: Mode,
    /// Summed over sessions solved to optimality in every requested mode.
    pub total_cost: i64,
    pub total_wavelengths: i64,
    pub optimal: usize,
    pub infeasible: usize,
    pub limited: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub group_size: usize,
    pub sessions: usize,
    /// Sessions solved to optimality in every requested mode; the totals
    /// and the saving are computed over these only.
    pub comparable: usize,
    pub totals: Vec<ModeTotals>,
    /// `(LT - LH) / LT * 100`, when both modes ran.
    pub cost_saving_percent: Option<f64>,
    /// Comparable sessions whose LH solution crosses pairs somewhere.
    pub r_cps: Option<usize>,
}

impl MetricsRow {
    pub fn totals(&self, mode: Mode) -> Option<&ModeTotals> {
        self.totals.iter().find(|t| t.mode == mode)
    }
}

impl fmt::Display for MetricsRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "group size {}, {} sessions, {} comparable", self.group_size, self.sessions, self.comparable)?;
        for t in &self.totals {
            writeln!(
                f,
                "{}: total cost {}, wavelengths {}, optimal {}, infeasible {}, limit {}",
                t.mode, t.total_cost, t.total_wavelengths, t.optimal, t.infeasible, t.limited
            )?;
        }
        match self.cost_saving_percent {
            Some(p) => writeln!(f, "cost saving {p:.1}%")?,
            None => writeln!(f, "cost saving n/a")?,
        }
        match self.r_cps {
            Some(r) => write!(f, "sessions using cross pair switching {r}"),
            None => write!(f, "sessions using cross pair switching n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<SessionRow>,
    pub metrics: MetricsRow,
}

pub const CSV_HEADER: [&str; 10] = [
    "session_id",
    "source",
    "destinations",
    "mode",
    "cost",
    "wavelengths",
    "cps_used",
    "solve_status",
    "nodes_explored",
    "ms",
];

impl ExperimentResult {
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        let opt = |x: Option<i64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.session_id.to_string(),
                r.source.clone(),
                r.destinations.clone(),
                r.mode.to_string(),
                opt(r.cost),
                opt(r.wavelengths),
                r.cps_used.to_string(),
                r.status.to_string(),
                r.nodes_explored.to_string(),
                r.ms.map(|m| m.to_string()).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| ExperimentError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is built from UTF-8 fields"))
    }

    /// Sessions breaking the expected LH/LT relations: LH costlier than LT,
    /// or cheaper without crossing pairs.
    pub fn property_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for lh in self.rows.iter().filter(|r| r.mode == Mode::Lh && r.status == SolveStatus::Optimal) {
            let Some(lt) = self
                .rows
                .iter()
                .find(|r| r.session_id == lh.session_id && r.mode == Mode::Lt && r.status == SolveStatus::Optimal)
            else {
                continue;
            };
            match (lh.cost, lt.cost) {
                (Some(h), Some(t)) if h > t => out.push(format!("session {}: LH cost {h} > LT cost {t}", lh.session_id)),
                (Some(h), Some(t)) if h < t && !lh.cps_used => {
                    out.push(format!("session {}: LH saves {} without crossing pairs", lh.session_id, t - h))
                }
                _ => {}
            }
        }
        out
    }
}

/// Network the config describes: topology, splitter placement, wavelengths.
pub fn prepare_network(cfg: &ExperimentConfig) -> Result<Network, ExperimentError> {
    let net = load_topology(&cfg.topology).map_err(|e| ExperimentError::Topology(e.to_string()))?;
    Ok(net.with_splitters(&cfg.splitters)?.with_wavelengths(cfg.wavelengths)?)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    if cfg.modes.is_empty() {
        return Err(ExperimentError::NoModes);
    }
    let net = prepare_network(cfg)?;
    let sessions = match &cfg.sessions {
        Some(list) => list
            .iter()
            .map(|(s, ds)| MulticastSession::from_names(&net, s, ds))
            .collect::<Result<Vec<_>, _>>()?,
        None => {
            if cfg.session_count == 0 {
                return Err(ExperimentError::NoSessions);
            }
            generate_sessions(&net, cfg.group_size, cfg.session_count, cfg.seed)?
        }
    };
    if sessions.is_empty() {
        return Err(ExperimentError::NoSessions);
    }
    let mut modes = cfg.modes.clone();
    modes.sort_by_key(|m| *m == Mode::Lt);
    modes.dedup();

    let jobs: Vec<(usize, &MulticastSession, Mode)> =
        sessions.iter().enumerate().flat_map(|(i, ms)| modes.iter().map(move |&m| (i, ms, m))).collect();
    let run = |&(id, ms, mode): &(usize, &MulticastSession, Mode)| {
        let start = std::time::Instant::now();
        let model = build_model(&net, ms, mode, true);
        let report = solve(&model, &cfg.solve);
        let elapsed = start.elapsed().as_millis();
        let (cost, wavelengths) = match report.cost_and_wavelengths(&model) {
            Some((c, w)) => (Some(c), Some(w)),
            None => (None, None),
        };
        SessionRow {
            session_id: id,
            source: net.name(ms.source()).to_string(),
            destinations: ms.destinations().iter().map(|&d| net.name(d)).collect::<Vec<_>>().join(" "),
            mode,
            cost,
            wavelengths,
            cps_used: report.structures.as_ref().is_some_and(|s| s.uses_cps(&net)),
            status: report.status,
            nodes_explored: report.nodes_explored,
            ms: cfg.record_timing.then_some(elapsed),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| ExperimentError::Threads(e.to_string()))?;
    // collect preserves job order, so rows come out by session id whatever
    // the scheduling
    let rows: Vec<SessionRow> = pool.install(|| jobs.par_iter().map(run).collect());

    let metrics = aggregate(cfg_group_size(cfg, &sessions), sessions.len(), &modes, &rows);
    Ok(ExperimentResult { rows, metrics })
}

fn cfg_group_size(cfg: &ExperimentConfig, sessions: &[MulticastSession]) -> usize {
    match &cfg.sessions {
        Some(_) => sessions.iter().map(|s| s.group_size()).max().unwrap_or(0),
        None => cfg.group_size,
    }
}

fn aggregate(group_size: usize, sessions: usize, modes: &[Mode], rows: &[SessionRow]) -> MetricsRow {
    let comparable: Vec<usize> = (0..sessions)
        .filter(|&id| rows.iter().filter(|r| r.session_id == id).all(|r| r.status == SolveStatus::Optimal))
        .collect();
    let totals: Vec<ModeTotals> = modes
        .iter()
        .map(|&mode| {
            let of_mode = || rows.iter().filter(move |r| r.mode == mode);
            let counted = || of_mode().filter(|r| comparable.binary_search(&r.session_id).is_ok());
            ModeTotals {
                mode,
                total_cost: counted().filter_map(|r| r.cost).sum(),
                total_wavelengths: counted().filter_map(|r| r.wavelengths).sum(),
                optimal: of_mode().filter(|r| r.status == SolveStatus::Optimal).count(),
                infeasible: of_mode().filter(|r| r.status == SolveStatus::Infeasible).count(),
                limited: of_mode().filter(|r| r.status == SolveStatus::LimitReached).count(),
            }
        })
        .collect();
    let total = |m: Mode| totals.iter().find(|t| t.mode == m).map(|t| t.total_cost);
    let cost_saving_percent = match (total(Mode::Lh), total(Mode::Lt)) {
        (Some(h), Some(t)) if t > 0 => Some((t - h) as f64 / t as f64 * 100.0),
        _ => None,
    };
    let r_cps = modes.contains(&Mode::Lh).then(|| {
        rows.iter()
            .filter(|r| r.mode == Mode::Lh && r.cps_used && comparable.binary_search(&r.session_id).is_ok())
            .count()
    });
    MetricsRow { group_size, sessions, comparable: comparable.len(), totals, cost_saving_percent, r_cps }
}
