//! Exact branch-and-bound over the LP relaxation of an [`IlpModel`].
//!
//! Only link (`L`) and wavelength (`w`) variables are branched on. Once they
//! are integral, the remaining flow rows describe a network flow whose
//! constraint matrix is totally unimodular, so an integral flow exists
//! whenever a fractional one does; [`integralize_flows`] recovers it with a
//! max-flow instead of further branching.
//!
//! Nodes are explored best-first on their LP bound, ties in creation order.
//! Every incumbent is re-checked against the integer rows (and, for models
//! with connectivity rows, against the light-hierarchy validator) before it
//! is accepted, so an `Optimal` report never carries an unchecked answer.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::time::Instant;

use crate::hierarchy::{commodity_flow, validate, LightStructure, LightStructureSet};
use crate::model::{Assignment, IlpModel, VarKind, INTEGRALITY_TOLERANCE};
use crate::network::{Link, MulticastSession, Network, NodeId};
use crate::simplex::{solve_lp, LpProblem, LpRow, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchRule {
    #[default]
    MostFractional,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOptions {
    pub node_limit: u64,
    /// Wall-clock budget. Setting it makes results depend on machine speed.
    pub time_limit_ms: Option<u64>,
    pub branch_rule: BranchRule,
    /// 0 is silent; 1 prints a summary to stderr; 2 adds periodic progress.
    pub verbosity: u8,
    /// Seed the search with a cheap constructive solution when one is valid.
    pub greedy_incumbent: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            node_limit: 1_000_000,
            time_limit_ms: None,
            branch_rule: BranchRule::MostFractional,
            verbosity: 0,
            greedy_incumbent: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    LimitReached,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::LimitReached => "limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective of the best assignment found, if any.
    pub objective: Option<i64>,
    pub assignment: Option<Assignment>,
    pub structures: Option<LightStructureSet>,
    /// LP relaxations solved (one per branch-and-bound node).
    pub nodes_explored: u64,
    pub lp_iterations: u64,
    /// Nodes abandoned because their LP failed numerically. Any such node
    /// voids the optimality proof.
    pub numerical_failures: u64,
    /// Integer candidates that failed the independent re-check.
    pub rejected_candidates: u64,
    /// Value of the root relaxation, if it was solved.
    pub root_bound: Option<f64>,
}

impl SolveReport {
    /// `(cost, wavelengths)` of the reported objective.
    pub fn cost_and_wavelengths(&self, model: &IlpModel) -> Option<(i64, i64)> {
        self.objective.map(|o| model.decompose(o))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRelaxation {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
}

fn base_problem(model: &IlpModel) -> LpProblem {
    let n = model.vars().len();
    let mut cost = vec![0.0; n];
    for &(v, c) in model.objective() {
        cost[v] += c as f64;
    }
    LpProblem {
        cost,
        lower: model.vars().iter().map(|v| v.lower as f64).collect(),
        upper: model.vars().iter().map(|v| v.upper as f64).collect(),
        rows: model
            .constraints()
            .iter()
            .map(|c| LpRow {
                terms: c.terms.iter().map(|&(v, a)| (v, a as f64)).collect(),
                relation: c.relation,
                rhs: c.rhs as f64,
            })
            .collect(),
    }
}

fn relax(problem: &LpProblem) -> LpRelaxation {
    let s = solve_lp(problem);
    LpRelaxation { status: s.status, value: s.value, point: s.x, iterations: s.iterations }
}

/// Continuous relaxation of `model`.
pub fn lp_relax(model: &IlpModel) -> LpRelaxation {
    relax(&base_problem(model))
}

/// Continuous relaxation with some variables fixed to integer values, as at
/// a branch-and-bound node.
pub fn lp_relax_fixed(model: &IlpModel, fixings: &[(usize, i64)]) -> LpRelaxation {
    let mut p = base_problem(model);
    for &(v, x) in fixings {
        p.lower[v] = x as f64;
        p.upper[v] = x as f64;
    }
    relax(&p)
}

/// Replaces the flow variables of `a` with an integral flow over the links
/// it selects. `None` if no such flow exists, i.e. the link pattern cannot
/// serve every destination. Models without flow variables pass through.
pub fn integralize_flows(model: &IlpModel, a: &Assignment) -> Option<Assignment> {
    let flow_vars: HashMap<(NodeId, NodeId, usize), usize> = model
        .vars()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| match v.kind {
            VarKind::Flow { from, to, wavelength } => Some(((from, to, wavelength), i)),
            _ => None,
        })
        .collect();
    if flow_vars.is_empty() {
        return Some(a.clone());
    }
    let set = model.extract_structures(a);
    let flows = commodity_flow(model.network().node_count(), model.session(), &set.structures)?;
    let mut out = a.clone();
    for &i in flow_vars.values() {
        out.values[i] = 0;
    }
    for (ls, f) in set.structures.iter().zip(&flows) {
        for (l, &x) in ls.links.iter().zip(f) {
            let i = *flow_vars.get(&(l.from, l.to, ls.wavelength))?;
            out.values[i] = x as i64;
        }
    }
    Some(out)
}

#[derive(Debug)]
struct Node {
    bound: f64,
    seq: u64,
    fixings: Vec<(usize, i64)>,
    point: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node,
    // must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Integer lower bound implied by an LP value (objectives are integral).
fn integer_bound(lp: f64) -> i64 {
    (lp - 1e-6).ceil() as i64
}

fn most_fractional(model: &IlpModel, point: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, var) in model.vars().iter().enumerate() {
        if !var.is_structural() {
            continue;
        }
        let x = point[i];
        let dist = (x - x.floor()).min(x.ceil() - x);
        if dist > INTEGRALITY_TOLERANCE && best.is_none_or(|(_, d)| dist > d) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i)
}

struct Search<'a> {
    model: &'a IlpModel,
    base: LpProblem,
    opts: &'a SolveOptions,
    incumbent: Option<(i64, Assignment)>,
    nodes: u64,
    lp_iterations: u64,
    numerical_failures: u64,
    rejected: u64,
    seq: u64,
}

impl Search<'_> {
    fn evaluate(&mut self, fixings: Vec<(usize, i64)>) -> Option<Node> {
        let mut p = self.base.clone();
        for &(v, x) in &fixings {
            p.lower[v] = x as f64;
            p.upper[v] = x as f64;
        }
        let lp = relax(&p);
        self.nodes += 1;
        self.lp_iterations += lp.iterations as u64;
        match lp.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return None,
            LpStatus::NumericalFailure => {
                self.numerical_failures += 1;
                return None;
            }
        }
        let node = Node { bound: lp.value, seq: self.seq, fixings, point: lp.point };
        self.seq += 1;
        Some(node)
    }

    fn dominated(&self, bound: f64) -> bool {
        self.incumbent.as_ref().is_some_and(|(best, _)| integer_bound(bound) >= *best)
    }

    /// Accepts `a` as incumbent if it passes the independent checks and
    /// improves on the current one.
    fn offer(&mut self, a: Assignment, from_search: bool) {
        let value = self.model.evaluate(&a);
        if self.incumbent.as_ref().is_some_and(|(best, _)| value >= *best) {
            return;
        }
        if !verify(self.model, &a) {
            // only a search leaf failing the re-check signals trouble;
            // constructive guesses are expected to miss often
            self.rejected += u64::from(from_search);
            return;
        }
        if self.opts.verbosity >= 2 {
            eprintln!("incumbent {} after {} nodes", value, self.nodes);
        }
        self.incumbent = Some((value, a));
    }

    /// Rounds the structural part of an LP point and recovers integral flows.
    fn leaf(&mut self, point: &[f64]) {
        let mut a = self.model.zero_assignment();
        for (i, var) in self.model.vars().iter().enumerate() {
            if var.is_structural() {
                a.values[i] = point[i].round() as i64;
            }
        }
        if let Some(a) = integralize_flows(self.model, &a) {
            self.offer(a, true);
        }
    }
}

/// Integer rows, plus the light-hierarchy validator when the model carries
/// connectivity rows.
fn verify(model: &IlpModel, a: &Assignment) -> bool {
    if !model.check_feasible(a).ok() {
        return false;
    }
    !model.connectivity() || validate(model.network(), &model.extract_structures(a)).ok()
}

pub fn solve(model: &IlpModel, opts: &SolveOptions) -> SolveReport {
    let start = Instant::now();
    let mut search = Search {
        model,
        base: base_problem(model),
        opts,
        incumbent: None,
        nodes: 0,
        lp_iterations: 0,
        numerical_failures: 0,
        rejected: 0,
        seq: 0,
    };
    if opts.greedy_incumbent {
        for a in greedy_candidates(model) {
            search.offer(a, false);
        }
    }

    let mut heap = BinaryHeap::new();
    let root = search.evaluate(Vec::new());
    let root_bound = root.as_ref().map(|n| n.bound);
    heap.extend(root);
    let mut limited = false;

    while let Some(node) = heap.pop() {
        if search.dominated(node.bound) {
            continue;
        }
        let out_of_time = opts.time_limit_ms.is_some_and(|ms| start.elapsed().as_millis() >= ms as u128);
        if search.nodes >= opts.node_limit || out_of_time {
            limited = true;
            break;
        }
        let Some(v) = most_fractional(model, &node.point) else {
            search.leaf(&node.point);
            continue;
        };
        for value in [1, 0] {
            let mut fixings = node.fixings.clone();
            fixings.push((v, value));
            if let Some(child) = search.evaluate(fixings) {
                if !search.dominated(child.bound) {
                    heap.push(child);
                }
            }
        }
        if opts.verbosity >= 2 && search.nodes % 1000 < 2 {
            eprintln!("{} nodes, {} open, bound {:.3}", search.nodes, heap.len(), node.bound);
        }
    }

    let proven = !limited && search.numerical_failures == 0 && search.rejected == 0;
    let status = match (&search.incumbent, proven) {
        (Some(_), true) => SolveStatus::Optimal,
        (None, true) => SolveStatus::Infeasible,
        _ => SolveStatus::LimitReached,
    };
    let (objective, assignment) = match search.incumbent {
        Some((o, a)) => (Some(o), Some(a)),
        None => (None, None),
    };
    let report = SolveReport {
        status,
        objective,
        structures: assignment.as_ref().map(|a| model.extract_structures(a)),
        assignment,
        nodes_explored: search.nodes,
        lp_iterations: search.lp_iterations,
        numerical_failures: search.numerical_failures,
        rejected_candidates: search.rejected,
        root_bound,
    };
    if opts.verbosity >= 1 {
        eprintln!(
            "{}: objective {:?}, {} nodes, {} LP iterations, {} ms",
            report.status,
            report.objective,
            report.nodes_explored,
            report.lp_iterations,
            start.elapsed().as_millis()
        );
    }
    report
}

/// Cheapest path from `from` to any node in `targets` using no banned link
/// and never entering `avoid`. Ties go to the lower node id.
fn shortest_path(
    net: &Network,
    from: NodeId,
    targets: &BTreeSet<NodeId>,
    banned: &BTreeSet<Link>,
    avoid: NodeId,
) -> Option<Vec<NodeId>> {
    let n = net.node_count();
    let mut dist = vec![u64::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    dist[from] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(std::cmp::Reverse((0u64, from)));
    while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if targets.contains(&u) {
            let mut path = vec![u];
            let mut v = u;
            while v != from {
                v = prev[v];
                path.push(v);
            }
            path.reverse();
            return Some(path);
        }
        for v in net.neighbors(u) {
            let link = Link::new(u, v);
            if v == avoid || banned.contains(&link) {
                continue;
            }
            let nd = d + net.link_cost(link)?;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(std::cmp::Reverse((nd, v)));
            }
        }
    }
    None
}

/// Constructive solutions on wavelength 0: the shortest-path tree to all
/// destinations, and a single walk visiting destinations nearest-first.
/// Candidates are unchecked; the search verifies them before use.
fn greedy_candidates(model: &IlpModel) -> Vec<Assignment> {
    let net = model.network();
    let ms = model.session();
    let mut out = Vec::new();
    let mut consider = |links: Vec<Link>| {
        let set = LightStructureSet::new(ms.clone(), vec![LightStructure::new(0, ms.source(), links)]);
        if let Some(a) = integralize_flows(model, &model.assignment_from_structures(&set)) {
            out.push(a);
        }
    };
    if let Some(links) = shortest_path_tree(net, ms) {
        consider(links);
    }
    if let Some(links) = nearest_first_walk(net, ms) {
        consider(links);
    }
    out
}

fn shortest_path_tree(net: &Network, ms: &MulticastSession) -> Option<Vec<Link>> {
    let mut links = BTreeSet::new();
    for &d in ms.destinations() {
        let path = shortest_path(net, ms.source(), &BTreeSet::from([d]), &BTreeSet::new(), ms.source())?;
        links.extend(path.windows(2).map(|w| Link::new(w[0], w[1])));
    }
    Some(links.into_iter().collect())
}

fn nearest_first_walk(net: &Network, ms: &MulticastSession) -> Option<Vec<Link>> {
    let mut remaining: BTreeSet<NodeId> = ms.destinations().iter().copied().collect();
    let mut used = BTreeSet::new();
    let mut walk = Vec::new();
    let mut at = ms.source();
    while !remaining.is_empty() {
        let path = shortest_path(net, at, &remaining, &used, ms.source())?;
        for w in path.windows(2) {
            let l = Link::new(w[0], w[1]);
            used.insert(l);
            walk.push(l);
            remaining.remove(&w[1]);
        }
        at = *path.last()?;
    }
    Some(walk)
}
