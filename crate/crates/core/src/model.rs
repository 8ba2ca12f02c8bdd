//! Integer linear program for cost-optimal light-hierarchies.
//!
//! Variables per wavelength `k` and directed link `m -> n`:
//! `L_m_n_k` (binary, link used), `F_m_n_k` (integer commodity flow, only
//! with connectivity constraints) and per wavelength `w_k` (binary,
//! wavelength used). The objective is `delta * cost + wavelengths` with
//! `delta = |W| + 1`, which orders solutions by cost first and wavelength
//! count second.
//!
//! Two constraint layers are built: the structure layer (root, destination,
//! MC, MI, leaf and wavelength coupling rows) and, optionally, the
//! commodity-flow layer that rules out floating cycles. LT mode adds
//! per-wavelength in-degree <= 1 for every non-source node and out-degree
//! <= 1 for MI non-source nodes.

use std::collections::HashMap;
use std::fmt::{self, Write};

use thiserror::Error;

pub use crate::hierarchy::Mode;
use crate::hierarchy::{LightStructure, LightStructureSet};
use crate::network::{Link, MulticastSession, Network, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Link `from -> to` carries the session on `wavelength`.
    Link { from: NodeId, to: NodeId, wavelength: usize },
    /// Destinations served through `from -> to` on `wavelength`.
    Flow { from: NodeId, to: NodeId, wavelength: usize },
    /// `wavelength` is used by the session.
    Wavelength { wavelength: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub kind: VarKind,
    pub name: String,
    pub lower: i64,
    pub upper: i64,
}

impl Variable {
    /// L and w variables are branched on; F is recovered from a flow.
    pub fn is_structural(&self) -> bool {
        !matches!(self.kind, VarKind::Flow { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Eq => lhs == rhs,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// Constraint families, one per row type of the formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// No link enters the source.
    SourceIn,
    /// Source emits between 1 and |D| links over all wavelengths.
    SourceOut,
    /// Each destination is entered between 1 and |D| - 1 times.
    DestinationIn,
    /// An MC node has at most one input per wavelength.
    McIn,
    /// An MC node only emits when it receives.
    McOut,
    /// An MI node never emits more links than it receives.
    MiOut,
    /// Non-members cannot be leaves.
    Leaf,
    /// `w >= L`.
    WavelengthUse,
    /// `w <= sum L`.
    WavelengthIdle,
    /// Source emits |D| units of flow.
    SourceFlow,
    /// Every destination consumes exactly one unit in total.
    DestinationConsume,
    /// A destination consumes at most one unit per wavelength.
    DestinationPerWavelength,
    /// Flow is conserved at non-members.
    FlowConservation,
    /// Used links carry flow.
    FlowLower,
    /// Flow only on used links, at most |D|.
    FlowUpper,
    /// LT mode: at most one input per node and wavelength.
    TreeIn,
    /// LT mode: MI nodes forward on at most one output.
    TreeOut,
}

impl Family {
    pub fn is_connectivity(self) -> bool {
        matches!(
            self,
            Family::SourceFlow
                | Family::DestinationConsume
                | Family::DestinationPerWavelength
                | Family::FlowConservation
                | Family::FlowLower
                | Family::FlowUpper
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub family: Family,
    pub terms: Vec<(usize, i64)>,
    pub relation: Relation,
    pub rhs: i64,
}

impl Constraint {
    pub fn lhs(&self, values: &[i64]) -> i64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }
}

/// Complete ILP for one (network, session, mode) triple.
#[derive(Debug, Clone)]
pub struct IlpModel {
    net: Network,
    session: MulticastSession,
    mode: Mode,
    connectivity: bool,
    delta: i64,
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, i64)>,
    by_name: HashMap<String, usize>,
}

/// Integer value per model variable, in variable order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub values: Vec<i64>,
}

struct Rows {
    constraints: Vec<Constraint>,
}

impl Rows {
    fn push(&mut self, name: String, family: Family, terms: Vec<(usize, i64)>, relation: Relation, rhs: i64) {
        self.constraints.push(Constraint { name, family, terms, relation, rhs });
    }
}

/// Builds the ILP. `connectivity = false` keeps only the structure layer,
/// which admits disconnected optima.
pub fn build_model(net: &Network, ms: &MulticastSession, mode: Mode, connectivity: bool) -> IlpModel {
    let w = net.wavelengths();
    let links: Vec<Link> = net.links().collect();
    let nl = links.len();
    let group = ms.group_size() as i64;
    let delta = w as i64 + 1;
    let s = ms.source();
    let name = |n: NodeId| net.name(n);

    let mut vars = Vec::new();
    for k in 0..w {
        for l in &links {
            vars.push(Variable {
                kind: VarKind::Link { from: l.from, to: l.to, wavelength: k },
                name: format!("L_{}_{}_{}", name(l.from), name(l.to), k),
                lower: 0,
                upper: 1,
            });
        }
    }
    if connectivity {
        for k in 0..w {
            for l in &links {
                vars.push(Variable {
                    kind: VarKind::Flow { from: l.from, to: l.to, wavelength: k },
                    name: format!("F_{}_{}_{}", name(l.from), name(l.to), k),
                    lower: 0,
                    upper: group,
                });
            }
        }
    }
    let w_base = vars.len();
    for k in 0..w {
        vars.push(Variable { kind: VarKind::Wavelength { wavelength: k }, name: format!("w_{k}"), lower: 0, upper: 1 });
    }

    let lv = |k: usize, i: usize| k * nl + i;
    let fv = |k: usize, i: usize| w * nl + k * nl + i;
    let wv = |k: usize| w_base + k;
    let ins = |m: NodeId| links.iter().enumerate().filter(move |(_, l)| l.to == m).map(|(i, _)| i);
    let outs = |m: NodeId| links.iter().enumerate().filter(move |(_, l)| l.from == m).map(|(i, _)| i);

    let objective: Vec<(usize, i64)> = (0..w)
        .flat_map(|k| links.iter().enumerate().map(move |(i, l)| (k, i, l)))
        .map(|(k, i, l)| (lv(k, i), delta * net.link_cost(*l).unwrap() as i64))
        .chain((0..w).map(|k| (wv(k), 1)))
        .collect();

    let mut rows = Rows { constraints: Vec::new() };
    let all_k = |f: &dyn Fn(usize) -> Vec<(usize, i64)>| (0..w).flat_map(f).collect::<Vec<_>>();

    // source
    rows.push(
        format!("source_in_{}", name(s)),
        Family::SourceIn,
        all_k(&|k| ins(s).map(|i| (lv(k, i), 1)).collect()),
        Relation::Eq,
        0,
    );
    let src_out = all_k(&|k| outs(s).map(|i| (lv(k, i), 1)).collect());
    rows.push(format!("source_out_lb_{}", name(s)), Family::SourceOut, src_out.clone(), Relation::Ge, 1);
    rows.push(format!("source_out_ub_{}", name(s)), Family::SourceOut, src_out, Relation::Le, group);

    // destinations
    for &d in ms.destinations() {
        let din = all_k(&|k| ins(d).map(|i| (lv(k, i), 1)).collect());
        rows.push(format!("dest_in_lb_{}", name(d)), Family::DestinationIn, din.clone(), Relation::Ge, 1);
        if group >= 2 {
            rows.push(format!("dest_in_ub_{}", name(d)), Family::DestinationIn, din, Relation::Le, group - 1);
        }
    }

    // per-node, per-wavelength structure rows
    for m in (0..net.node_count()).filter(|&m| m != s) {
        let deg = net.degree(m) as i64;
        for k in 0..w {
            let inn: Vec<(usize, i64)> = ins(m).map(|i| (lv(k, i), 1)).collect();
            let out: Vec<(usize, i64)> = outs(m).map(|i| (lv(k, i), 1)).collect();
            let out_minus = |scale: i64| -> Vec<(usize, i64)> {
                out.iter().copied().chain(inn.iter().map(|&(v, _)| (v, -scale))).collect()
            };
            match net.kind(m) {
                NodeKind::Mc => {
                    rows.push(format!("mc_in_{}_{k}", name(m)), Family::McIn, inn.clone(), Relation::Le, 1);
                    rows.push(format!("mc_out_{}_{k}", name(m)), Family::McOut, out_minus(deg), Relation::Le, 0);
                }
                NodeKind::Mi => {
                    rows.push(format!("mi_out_{}_{k}", name(m)), Family::MiOut, out_minus(1), Relation::Le, 0);
                }
            }
            if !ms.is_destination(m) {
                rows.push(format!("leaf_{}_{k}", name(m)), Family::Leaf, out_minus(1), Relation::Ge, 0);
            }
            if mode == Mode::Lt {
                rows.push(format!("tree_in_{}_{k}", name(m)), Family::TreeIn, inn.clone(), Relation::Le, 1);
                if net.kind(m) == NodeKind::Mi {
                    rows.push(format!("tree_out_{}_{k}", name(m)), Family::TreeOut, out.clone(), Relation::Le, 1);
                }
            }
        }
    }

    // wavelength coupling
    for k in 0..w {
        for (i, l) in links.iter().enumerate() {
            rows.push(
                format!("wl_use_{}_{}_{k}", name(l.from), name(l.to)),
                Family::WavelengthUse,
                vec![(wv(k), 1), (lv(k, i), -1)],
                Relation::Ge,
                0,
            );
        }
        let mut terms = vec![(wv(k), 1)];
        terms.extend((0..nl).map(|i| (lv(k, i), -1)));
        rows.push(format!("wl_idle_{k}"), Family::WavelengthIdle, terms, Relation::Le, 0);
    }

    if connectivity {
        rows.push(
            format!("source_flow_{}", name(s)),
            Family::SourceFlow,
            all_k(&|k| outs(s).map(|i| (fv(k, i), 1)).collect()),
            Relation::Eq,
            group,
        );
        let net_in = |m: NodeId, k: usize| -> Vec<(usize, i64)> {
            ins(m).map(|i| (fv(k, i), 1)).chain(outs(m).map(|i| (fv(k, i), -1))).collect()
        };
        for &d in ms.destinations() {
            rows.push(
                format!("dest_consume_{}", name(d)),
                Family::DestinationConsume,
                all_k(&|k| net_in(d, k)),
                Relation::Eq,
                1,
            );
            for k in 0..w {
                let terms = net_in(d, k);
                rows.push(format!("dest_take_max_{}_{k}", name(d)), Family::DestinationPerWavelength, terms.clone(), Relation::Le, 1);
                rows.push(format!("dest_take_min_{}_{k}", name(d)), Family::DestinationPerWavelength, terms, Relation::Ge, 0);
            }
        }
        for m in (0..net.node_count()).filter(|&m| m != s && !ms.is_destination(m)) {
            for k in 0..w {
                rows.push(format!("conserve_{}_{k}", name(m)), Family::FlowConservation, net_in(m, k), Relation::Eq, 0);
            }
        }
        for k in 0..w {
            for (i, l) in links.iter().enumerate() {
                let tag = format!("{}_{}_{k}", name(l.from), name(l.to));
                rows.push(format!("flow_lb_{tag}"), Family::FlowLower, vec![(fv(k, i), 1), (lv(k, i), -1)], Relation::Ge, 0);
                rows.push(format!("flow_ub_{tag}"), Family::FlowUpper, vec![(fv(k, i), 1), (lv(k, i), -group)], Relation::Le, 0);
            }
        }
    }

    let by_name = vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
    IlpModel {
        net: net.clone(),
        session: ms.clone(),
        mode,
        connectivity,
        delta,
        vars,
        constraints: rows.constraints,
        objective,
        by_name,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ImportError {
    #[error("line {line}: expected `name value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: usize, name: String },
    #[error("line {line}: variable `{name}` assigned twice")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: `{name}` = {value} is not integral")]
    NonIntegral { line: usize, name: String, value: f64 },
    #[error("line {line}: `{name}` = {value} outside [{lower}, {upper}]")]
    OutOfBounds { line: usize, name: String, value: i64, lower: i64, upper: i64 },
}

/// Values within this distance of an integer are rounded on import.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintViolation {
    /// Row index, or `None` for a variable bound.
    pub index: Option<usize>,
    pub name: String,
    pub family: Option<Family>,
    pub lhs: i64,
    pub relation: Relation,
    pub rhs: i64,
}

impl ConstraintViolation {
    /// Signed distance to satisfaction; negative when violated.
    pub fn slack(&self) -> i64 {
        match self.relation {
            Relation::Le => self.rhs - self.lhs,
            Relation::Ge => self.lhs - self.rhs,
            Relation::Eq => -(self.lhs - self.rhs).abs(),
        }
    }
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} {} {} (slack {})", self.name, self.lhs, self.relation, self.rhs, self.slack())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<ConstraintViolation>,
}

impl FeasibilityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, family: Family) -> bool {
        self.violations.iter().any(|v| v.family == Some(family))
    }
}

impl IlpModel {
    /// Assembles a model from explicit parts. Intended for tests and tools
    /// that reuse the solver on hand-made programs over a network's links.
    pub fn from_parts(
        net: &Network,
        session: &MulticastSession,
        vars: Vec<Variable>,
        constraints: Vec<Constraint>,
        objective: Vec<(usize, i64)>,
    ) -> Self {
        let by_name = vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        IlpModel {
            net: net.clone(),
            session: session.clone(),
            mode: Mode::Lh,
            connectivity: false,
            delta: net.wavelengths() as i64 + 1,
            vars,
            constraints,
            objective,
            by_name,
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn session(&self) -> &MulticastSession {
        &self.session
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn connectivity(&self) -> bool {
        self.connectivity
    }

    pub fn delta(&self) -> i64 {
        self.delta
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(usize, i64)] {
        &self.objective
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn evaluate(&self, a: &Assignment) -> i64 {
        self.objective.iter().map(|&(v, c)| c * a.values[v]).sum()
    }

    /// Splits an objective value into `(cost, wavelengths)`.
    pub fn decompose(&self, objective: i64) -> (i64, i64) {
        (objective / self.delta, objective % self.delta)
    }

    pub fn zero_assignment(&self) -> Assignment {
        Assignment { values: self.vars.iter().map(|v| v.lower.max(0).min(v.upper)).collect() }
    }

    /// Evaluates every bound and row.
    pub fn check_feasible(&self, a: &Assignment) -> FeasibilityReport {
        let mut report = FeasibilityReport::default();
        for (var, &x) in self.vars.iter().zip(&a.values) {
            if x < var.lower {
                report.violations.push(ConstraintViolation {
                    index: None,
                    name: format!("bound_{}", var.name),
                    family: None,
                    lhs: x,
                    relation: Relation::Ge,
                    rhs: var.lower,
                });
            }
            if x > var.upper {
                report.violations.push(ConstraintViolation {
                    index: None,
                    name: format!("bound_{}", var.name),
                    family: None,
                    lhs: x,
                    relation: Relation::Le,
                    rhs: var.upper,
                });
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let lhs = c.lhs(&a.values);
            if !c.relation.holds(lhs, c.rhs) {
                report.violations.push(ConstraintViolation {
                    index: Some(i),
                    name: c.name.clone(),
                    family: Some(c.family),
                    lhs,
                    relation: c.relation,
                    rhs: c.rhs,
                });
            }
        }
        report
    }

    /// Reads the structures chosen by `a`: one per wavelength that carries
    /// at least one link.
    pub fn extract_structures(&self, a: &Assignment) -> LightStructureSet {
        let mut per_wavelength: Vec<Vec<Link>> = vec![Vec::new(); self.net.wavelengths()];
        for (var, &x) in self.vars.iter().zip(&a.values) {
            if let VarKind::Link { from, to, wavelength } = var.kind {
                if x == 1 {
                    per_wavelength[wavelength].push(Link::new(from, to));
                }
            }
        }
        let structures = per_wavelength
            .into_iter()
            .enumerate()
            .filter(|(_, links)| !links.is_empty())
            .map(|(k, links)| LightStructure::new(k, self.session.source(), links))
            .collect();
        LightStructureSet::new(self.session.clone(), structures)
    }

    /// Assignment that selects exactly the links of `set` (and the matching
    /// wavelength flags). Flow variables are left at zero.
    pub fn assignment_from_structures(&self, set: &LightStructureSet) -> Assignment {
        let mut a = self.zero_assignment();
        for ls in &set.structures {
            for l in &ls.links {
                let name = format!("L_{}_{}_{}", self.net.name(l.from), self.net.name(l.to), ls.wavelength);
                if let Some(v) = self.var_index(&name) {
                    a.values[v] = 1;
                }
            }
            if let Some(v) = self.var_index(&format!("w_{}", ls.wavelength)) {
                a.values[v] = 1;
            }
        }
        a
    }

    /// CPLEX LP text. Variable and row order follow the model.
    pub fn emit_lp(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "\\ {} model, connectivity {}, delta {}",
            self.mode,
            if self.connectivity { "on" } else { "off" },
            self.delta
        );
        out.push_str("Minimize\n obj:");
        write_terms(&mut out, &self.objective, &self.vars);
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.name);
            write_terms(&mut out, &c.terms, &self.vars);
            let _ = writeln!(out, " {} {}", c.relation, c.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.vars {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
        }
        let general: Vec<&str> = self.vars.iter().filter(|v| !v.is_structural()).map(|v| v.name.as_str()).collect();
        let binary: Vec<&str> = self.vars.iter().filter(|v| v.is_structural()).map(|v| v.name.as_str()).collect();
        if !general.is_empty() {
            out.push_str("General\n");
            write_names(&mut out, &general);
        }
        if !binary.is_empty() {
            out.push_str("Binary\n");
            write_names(&mut out, &binary);
        }
        out.push_str("End\n");
        out
    }

    /// Reads `name value` lines. Unlisted variables default to zero.
    pub fn import_solution(&self, text: &str) -> Result<Assignment, ImportError> {
        let mut a = self.zero_assignment();
        let mut seen = vec![false; self.vars.len()];
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut parts = content.split_whitespace();
            let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ImportError::Syntax { line });
            };
            let value: f64 = value.parse().map_err(|_| ImportError::Syntax { line })?;
            let v = self
                .var_index(name)
                .ok_or_else(|| ImportError::UnknownVariable { line, name: name.to_string() })?;
            if std::mem::replace(&mut seen[v], true) {
                return Err(ImportError::Duplicate { line, name: name.to_string() });
            }
            let rounded = value.round();
            if !value.is_finite() || (value - rounded).abs() > INTEGRALITY_TOLERANCE {
                return Err(ImportError::NonIntegral { line, name: name.to_string(), value });
            }
            let x = rounded as i64;
            let var = &self.vars[v];
            if x < var.lower || x > var.upper {
                return Err(ImportError::OutOfBounds {
                    line,
                    name: name.to_string(),
                    value: x,
                    lower: var.lower,
                    upper: var.upper,
                });
            }
            a.values[v] = x;
        }
        Ok(a)
    }

    /// `name value` lines for every variable, in model order.
    pub fn write_solution(&self, a: &Assignment) -> String {
        self.vars
            .iter()
            .zip(&a.values)
            .map(|(v, x)| format!("{} {}\n", v.name, x))
            .collect()
    }
}

const TERMS_PER_LINE: usize = 8;

fn write_terms(out: &mut String, terms: &[(usize, i64)], vars: &[Variable]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (i, &(v, c)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0 { '-' } else { '+' };
        if i == 0 && c >= 0 {
            let _ = write!(out, " {} {}", c, vars[v].name);
        } else {
            let _ = write!(out, " {} {} {}", sign, c.abs(), vars[v].name);
        }
    }
}

fn write_names(out: &mut String, names: &[&str]) {
    for chunk in names.chunks(TERMS_PER_LINE) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
}
