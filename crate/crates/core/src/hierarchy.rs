//! Light-structures: per-wavelength directed link sets rooted at the source.
//!
//! A light-hierarchy may revisit a node (cross pair switching at an MI node,
//! or a round trip over both fibers of an edge) but never reuses a directed
//! link. [`validate`] checks a whole [`LightStructureSet`] against the
//! structural rules and the session's service requirements; [`serialize`]
//! and [`parse_structure`] convert a structure to and from the nested
//! enumeration `(s(l_s1,1(l_12,2)))`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::flow::{feasible_circulation, BoundedArc};
use crate::network::{Link, MulticastSession, Network, NetworkError, NodeId, NodeKind};

/// Routing structure family: light-hierarchies (cycles through MI nodes
/// allowed) or light-trees (every node entered at most once).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Lh,
    Lt,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Lh => "LH",
            Mode::Lt => "LT",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lh" => Ok(Mode::Lh),
            "lt" => Ok(Mode::Lt),
            _ => Err(format!("unknown mode `{s}` (expected lh or lt)")),
        }
    }
}

/// Links carried on one wavelength, rooted at the session source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LightStructure {
    pub wavelength: usize,
    pub root: NodeId,
    /// Kept as a list so that malformed input (repeated links) can be
    /// represented and reported.
    pub links: Vec<Link>,
}

impl LightStructure {
    pub fn new(wavelength: usize, root: NodeId, links: Vec<Link>) -> Self {
        LightStructure { wavelength, root, links }
    }

    pub fn in_degree(&self, n: NodeId) -> usize {
        self.links.iter().filter(|l| l.to == n).count()
    }

    pub fn out_degree(&self, n: NodeId) -> usize {
        self.links.iter().filter(|l| l.from == n).count()
    }

    fn degrees(&self, nodes: usize) -> (Vec<usize>, Vec<usize>) {
        let mut indeg = vec![0; nodes];
        let mut outdeg = vec![0; nodes];
        for l in &self.links {
            outdeg[l.from] += 1;
            indeg[l.to] += 1;
        }
        (indeg, outdeg)
    }

    /// Sum of link costs. Links that are not fibers of `net` count as zero.
    pub fn cost(&self, net: &Network) -> u64 {
        self.links.iter().map(|&l| net.link_cost(l).unwrap_or(0)).sum()
    }
}

/// The structures serving one multicast session, one per wavelength.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LightStructureSet {
    pub session: MulticastSession,
    pub structures: Vec<LightStructure>,
}

impl LightStructureSet {
    pub fn new(session: MulticastSession, structures: Vec<LightStructure>) -> Self {
        LightStructureSet { session, structures }
    }

    pub fn wavelength_count(&self) -> usize {
        self.structures.len()
    }

    /// True if any structure switches two signals through one MI node.
    pub fn uses_cps(&self, net: &Network) -> bool {
        self.structures.iter().any(|ls| !cps_nodes(ls, net).is_empty())
    }
}

/// Total cost of a set: the sum of its structures' link costs.
pub fn cost(set: &LightStructureSet, net: &Network) -> u64 {
    set.structures.iter().map(|ls| ls.cost(net)).sum()
}

/// Light-trees are the light-hierarchies in which no node is entered twice.
pub fn is_light_tree(ls: &LightStructure) -> bool {
    let mut seen = BTreeSet::new();
    ls.links.iter().all(|l| seen.insert(l.to))
}

/// MI nodes entered by two or more links, i.e. nodes doing cross pair
/// switching.
pub fn cps_nodes(ls: &LightStructure, net: &Network) -> BTreeSet<NodeId> {
    let mut incoming: BTreeMap<NodeId, usize> = BTreeMap::new();
    for l in &ls.links {
        *incoming.entry(l.to).or_default() += 1;
    }
    incoming
        .into_iter()
        .filter(|&(n, c)| c >= 2 && net.kind(n) == NodeKind::Mi)
        .map(|(n, _)| n)
        .collect()
}

/// Which rule a violation breaks. `A`..`F` are the light-hierarchy
/// characters; cycles (character (c)) are always permitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// A directed link is used more than once.
    A,
    /// A non-root node forwards a signal it never receives.
    B,
    /// Wavelength out of range or shared by two structures.
    D,
    /// More than two links between a node pair, or two in the same direction.
    E,
    /// Node in/out link counts incompatible with its splitting capability.
    F,
    /// Links not reachable from the root.
    Connectivity,
    /// Session-level requirement: source fan-out, destination coverage,
    /// one consuming structure per destination.
    Service,
    /// Link does not correspond to a fiber of the network.
    Topology,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::A => "a",
            Rule::B => "b",
            Rule::D => "d",
            Rule::E => "e",
            Rule::F => "f",
            Rule::Connectivity => "connectivity",
            Rule::Service => "service",
            Rule::Topology => "topology",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// Offending node or link, by name.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn rules(&self) -> BTreeSet<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }

    fn push(&mut self, rule: Rule, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { rule, subject: subject.into(), message: message.into() });
    }
}

fn link_name(net: &Network, l: Link) -> String {
    format!("l_{}{}", net.name(l.from), net.name(l.to))
}

/// Checks every structural and service rule; all violations are reported.
pub fn validate(net: &Network, set: &LightStructureSet) -> ValidationReport {
    let mut report = ValidationReport::default();
    let ms = &set.session;
    let group = ms.group_size();
    let n = net.node_count();

    if set.structures.is_empty() {
        report.push(Rule::Service, "set", "no light-structure serves the session");
    }
    if set.structures.len() > group {
        report.push(
            Rule::Service,
            "set",
            format!("{} structures exceed the group size {}", set.structures.len(), group),
        );
    }
    let mut used_wavelengths = BTreeSet::new();
    for ls in &set.structures {
        let tag = format!("λ{}", ls.wavelength);
        if ls.wavelength >= net.wavelengths() {
            report.push(Rule::D, &tag, format!("only {} wavelengths available", net.wavelengths()));
        }
        if !used_wavelengths.insert(ls.wavelength) {
            report.push(Rule::D, &tag, "wavelength occupied by two structures");
        }
        if ls.root != ms.source() {
            report.push(Rule::Service, &tag, format!("rooted at {} instead of the source", net.name(ls.root)));
        }
        validate_structure(net, ms, ls, &tag, &mut report);
    }

    let mut source_out = 0;
    let mut dest_in: BTreeMap<NodeId, usize> = ms.destinations().iter().map(|&d| (d, 0)).collect();
    for ls in &set.structures {
        for l in &ls.links {
            if l.from == ms.source() {
                source_out += 1;
            }
            if let Some(c) = dest_in.get_mut(&l.to) {
                *c += 1;
            }
        }
    }
    let src = net.name(ms.source());
    if !set.structures.is_empty() && source_out == 0 {
        report.push(Rule::Service, src, "source emits no link");
    }
    if source_out > group {
        report.push(Rule::Service, src, format!("source emits {source_out} links, more than |D| = {group}"));
    }
    for (&d, &c) in &dest_in {
        if c == 0 {
            report.push(Rule::Service, net.name(d), "destination is not spanned by any structure");
        } else if group >= 2 && c > group - 1 {
            report.push(
                Rule::Service,
                net.name(d),
                format!("destination entered {c} times, more than |D| - 1 = {}", group - 1),
            );
        }
    }
    if !set.structures.is_empty() && commodity_flow(n, ms, &set.structures).is_none() {
        report.push(
            Rule::Service,
            "set",
            "no commodity flow lets every destination consume exactly one signal",
        );
    }
    report
}

fn validate_structure(net: &Network, ms: &MulticastSession, ls: &LightStructure, tag: &str, report: &mut ValidationReport) {
    if ls.links.is_empty() {
        report.push(Rule::Service, tag, "structure carries no link");
        return;
    }
    for &l in &ls.links {
        if l.from >= net.node_count() || l.to >= net.node_count() {
            report.push(Rule::Topology, tag, "link endpoint out of range");
            return;
        }
    }
    let mut per_link: BTreeMap<Link, usize> = BTreeMap::new();
    let mut per_pair: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    for &l in &ls.links {
        if net.link_index(l).is_none() {
            report.push(Rule::Topology, format!("{tag} {}", link_name(net, l)), "no fiber between these nodes");
        }
        *per_link.entry(l).or_default() += 1;
        *per_pair.entry((l.from.min(l.to), l.from.max(l.to))).or_default() += 1;
    }
    for (&l, &c) in &per_link {
        if c > 1 {
            report.push(Rule::A, format!("{tag} {}", link_name(net, l)), format!("link used {c} times"));
        }
    }
    for (&(u, v), &c) in &per_pair {
        let forward = per_link.get(&Link::new(u, v)).copied().unwrap_or(0);
        let backward = per_link.get(&Link::new(v, u)).copied().unwrap_or(0);
        if c > 2 || forward > 1 || backward > 1 {
            report.push(
                Rule::E,
                format!("{tag} {}-{}", net.name(u), net.name(v)),
                format!("{c} links between the pair; at most one per direction"),
            );
        }
    }

    let (indeg, outdeg) = ls.degrees(net.node_count());
    for m in 0..net.node_count() {
        let (i, o) = (indeg[m], outdeg[m]);
        if i == 0 && o == 0 {
            continue;
        }
        let subject = format!("{tag} {}", net.name(m));
        if m == ls.root {
            if i > 0 {
                report.push(Rule::F, subject, "root has incoming links");
            }
            continue;
        }
        if o > 0 && i == 0 {
            report.push(Rule::B, &subject, "forwards links without any predecessor link");
        }
        match net.kind(m) {
            NodeKind::Mc if i > 1 => {
                report.push(Rule::F, &subject, format!("MC node has {i} incoming links"));
            }
            NodeKind::Mi if o > i && i > 0 => {
                report.push(Rule::F, &subject, format!("MI node has {o} outgoing but {i} incoming links"));
            }
            _ => {}
        }
        if !ms.is_destination(m) && o < i {
            report.push(Rule::F, &subject, "non-member node terminates a signal");
        }
    }

    let reached = reachable_nodes(ls, net.node_count());
    for &l in &ls.links {
        if !reached[l.from] {
            report.push(
                Rule::Connectivity,
                format!("{tag} {}", link_name(net, l)),
                format!("{} is not reachable from the root", net.name(l.from)),
            );
        }
    }
}

fn reachable_nodes(ls: &LightStructure, nodes: usize) -> Vec<bool> {
    let mut reached = vec![false; nodes];
    reached[ls.root] = true;
    let mut stack = vec![ls.root];
    while let Some(m) = stack.pop() {
        for l in ls.links.iter().filter(|l| l.from == m) {
            if !reached[l.to] {
                reached[l.to] = true;
                stack.push(l.to);
            }
        }
    }
    reached
}

/// Integral commodity flow over the given structures: the source emits
/// `|D|` units, every link carries between 1 and `|D|`, non-members conserve
/// flow and every destination consumes exactly one unit in exactly one
/// structure. Returns per-structure, per-link flows aligned with `links`.
pub fn commodity_flow(
    nodes: usize,
    ms: &MulticastSession,
    structures: &[LightStructure],
) -> Option<Vec<Vec<u64>>> {
    let group = ms.group_size() as i64;
    let k = structures.len();
    let super_source = k * nodes;
    let super_sink = super_source + 1;
    let hub = |j: usize| super_sink + 1 + j;
    let mut arcs = Vec::new();
    for (i, ls) in structures.iter().enumerate() {
        for l in &ls.links {
            arcs.push(BoundedArc { from: i * nodes + l.from, to: i * nodes + l.to, lower: 1, upper: group });
        }
    }
    let link_arcs = arcs.len();
    for i in 0..k {
        arcs.push(BoundedArc { from: super_source, to: i * nodes + ms.source(), lower: 0, upper: group });
        for (j, &d) in ms.destinations().iter().enumerate() {
            arcs.push(BoundedArc { from: i * nodes + d, to: hub(j), lower: 0, upper: 1 });
        }
    }
    for j in 0..ms.group_size() {
        arcs.push(BoundedArc { from: hub(j), to: super_sink, lower: 1, upper: 1 });
    }
    arcs.push(BoundedArc { from: super_sink, to: super_source, lower: group, upper: group });
    let flows = feasible_circulation(hub(ms.group_size()), &arcs)?;
    let mut it = flows[..link_arcs].iter();
    Some(
        structures
            .iter()
            .map(|ls| ls.links.iter().map(|_| *it.next().unwrap() as u64).collect())
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Enumeration format

/// For every link, the links that continue its signal. MI nodes pair each
/// incoming link with at most one outgoing link; MC nodes and the root hand
/// all their outgoing links to the first incoming link.
struct Pairing {
    successors: Vec<Vec<usize>>,
    roots: Vec<usize>,
}

const PAIRING_SEARCH_LIMIT: usize = 100_000;

fn build_pairing(ls: &LightStructure, net: &Network) -> Pairing {
    let links = &ls.links;
    let by_head = |a: &usize, b: &usize| (links[*a].to, *a).cmp(&(links[*b].to, *b));
    let by_tail = |a: &usize, b: &usize| (links[*a].from, *a).cmp(&(links[*b].from, *b));

    let mut roots: Vec<usize> = (0..links.len()).filter(|&i| links[i].from == ls.root).collect();
    roots.sort_by(by_head);

    let mut successors = vec![Vec::new(); links.len()];
    // MI nodes other than the root whose signals must be paired
    let mut choice_nodes = Vec::new();
    for m in 0..net.node_count() {
        if m == ls.root {
            continue;
        }
        let mut ins: Vec<usize> = (0..links.len()).filter(|&i| links[i].to == m).collect();
        let mut outs: Vec<usize> = (0..links.len()).filter(|&i| links[i].from == m).collect();
        if ins.is_empty() || outs.is_empty() {
            continue;
        }
        ins.sort_by(by_tail);
        outs.sort_by(by_head);
        if net.kind(m) == NodeKind::Mc || ins.len() == 1 {
            successors[ins[0]] = outs;
        } else {
            choice_nodes.push((ins, outs));
        }
    }

    // Enumerate the pairings at MI nodes in lexicographic order and keep the
    // first one that reaches the most links from the root.
    let mut best: Option<(usize, Vec<Vec<usize>>)> = None;
    let mut budget = PAIRING_SEARCH_LIMIT;
    let mut current = successors.clone();
    search_pairings(&choice_nodes, 0, &mut current, &roots, links.len(), &mut best, &mut budget);
    Pairing { successors: best.map(|(_, s)| s).unwrap_or(successors), roots }
}

fn search_pairings(
    nodes: &[(Vec<usize>, Vec<usize>)],
    at: usize,
    current: &mut Vec<Vec<usize>>,
    roots: &[usize],
    total: usize,
    best: &mut Option<(usize, Vec<Vec<usize>>)>,
    budget: &mut usize,
) {
    if *budget == 0 || best.as_ref().is_some_and(|(c, _)| *c == total) {
        return;
    }
    if at == nodes.len() {
        *budget -= 1;
        let covered = covered_links(current, roots, total);
        if best.as_ref().is_none_or(|(c, _)| covered > *c) {
            *best = Some((covered, current.clone()));
        }
        return;
    }
    let (ins, outs) = &nodes[at];
    let mut used = vec![false; outs.len()];
    assign_ins(nodes, at, ins, outs, 0, &mut used, current, roots, total, best, budget);
}

#[allow(clippy::too_many_arguments)]
fn assign_ins(
    nodes: &[(Vec<usize>, Vec<usize>)],
    at: usize,
    ins: &[usize],
    outs: &[usize],
    k: usize,
    used: &mut Vec<bool>,
    current: &mut Vec<Vec<usize>>,
    roots: &[usize],
    total: usize,
    best: &mut Option<(usize, Vec<Vec<usize>>)>,
    budget: &mut usize,
) {
    if k == ins.len() {
        search_pairings(nodes, at + 1, current, roots, total, best, budget);
        return;
    }
    let free = used.iter().filter(|u| !**u).count();
    for j in 0..outs.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        current[ins[k]] = vec![outs[j]];
        assign_ins(nodes, at, ins, outs, k + 1, used, current, roots, total, best, budget);
        used[j] = false;
    }
    // leave this signal unforwarded only if the remaining outputs still fit
    if free < ins.len() - k {
        current[ins[k]].clear();
        assign_ins(nodes, at, ins, outs, k + 1, used, current, roots, total, best, budget);
    }
    current[ins[k]].clear();
}

fn covered_links(successors: &[Vec<usize>], roots: &[usize], total: usize) -> usize {
    let mut seen = vec![false; total];
    let mut stack: Vec<usize> = roots.to_vec();
    let mut count = 0;
    while let Some(l) = stack.pop() {
        if std::mem::replace(&mut seen[l], true) {
            continue;
        }
        count += 1;
        stack.extend(successors[l].iter().copied());
    }
    count
}

fn write_subtree(net: &Network, ls: &LightStructure, p: &Pairing, link: usize, emitted: &mut [bool], out: &mut String) {
    emitted[link] = true;
    let l = ls.links[link];
    out.push_str(&link_name(net, l));
    out.push(',');
    out.push_str(net.name(l.to));
    let next: Vec<usize> = p.successors[link].iter().copied().filter(|&s| !emitted[s]).collect();
    write_children(net, ls, p, &next, emitted, out);
}

fn write_children(net: &Network, ls: &LightStructure, p: &Pairing, children: &[usize], emitted: &mut [bool], out: &mut String) {
    if children.is_empty() {
        return;
    }
    out.push('(');
    let mut first = true;
    for &c in children {
        // a sibling's subtree may already have emitted this link through a cycle
        if emitted[c] {
            continue;
        }
        if !first {
            out.push(',');
        }
        first = false;
        write_subtree(net, ls, p, c, emitted, out);
    }
    out.push(')');
}

/// Nested enumeration of a structure, e.g. `(s(l_s1,1(l_1d,d)))`. Children
/// are ordered by node index. Links that cannot be reached from the root are
/// appended as extra parenthesized fragments.
pub fn serialize(ls: &LightStructure, net: &Network) -> String {
    let p = build_pairing(ls, net);
    let mut emitted = vec![false; ls.links.len()];
    let mut out = String::from("(");
    out.push_str(net.name(ls.root));
    write_children(net, ls, &p, &p.roots, &mut emitted, &mut out);
    out.push(')');
    while let Some(start) = fragment_start(ls, &p, &emitted) {
        out.push_str(" (");
        out.push_str(net.name(ls.links[start].from));
        write_children(net, ls, &p, &[start], &mut emitted, &mut out);
        out.push(')');
    }
    out
}

fn fragment_start(ls: &LightStructure, p: &Pairing, emitted: &[bool]) -> Option<usize> {
    let pending: Vec<usize> = (0..ls.links.len()).filter(|&i| !emitted[i]).collect();
    let has_pending_pred = |i: usize| pending.iter().any(|&j| p.successors[j].contains(&i));
    pending
        .iter()
        .copied()
        .find(|&i| !has_pending_pred(i))
        .or_else(|| pending.first().copied())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("link label `{label}` does not match `l_{from}{to}`")]
    LinkLabel { label: String, from: String, to: String },
    #[error("line {line}: {message}")]
    Dump { line: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.text[self.pos..].chars().next().unwrap().len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a node name"));
        }
        Ok(&self.text[start..self.pos])
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { pos: self.pos, message: message.into() }
    }
}

fn parse_node<'a>(c: &mut Cursor<'a>, links: &mut Vec<(&'a str, &'a str)>) -> Result<&'a str, ParseError> {
    let name = c.ident()?;
    if c.peek() == Some('(') {
        c.expect('(')?;
        loop {
            if !c.text[c.pos..].starts_with("l_") {
                return Err(c.error("expected a link label `l_...`"));
            }
            c.pos += 2;
            let label = c.ident()?;
            c.expect(',')?;
            let child = parse_node(c, links)?;
            if label != format!("{name}{child}") {
                return Err(ParseError::LinkLabel {
                    label: format!("l_{label}"),
                    from: name.to_string(),
                    to: child.to_string(),
                });
            }
            links.push((name, child));
            match c.peek() {
                Some(',') => c.expect(',')?,
                Some(')') => break,
                _ => return Err(c.error("expected `,` or `)`")),
            }
        }
        c.expect(')')?;
    }
    Ok(name)
}

/// Parses one or more enumeration fragments. The first fragment's top node
/// is the root; returns `(root, links)` with links in reading order.
pub fn parse_enumeration(text: &str) -> Result<(String, Vec<(String, String)>), ParseError> {
    let mut c = Cursor { text, pos: 0 };
    let mut links = Vec::new();
    let mut root = None;
    c.skip_ws();
    while c.peek().is_some() {
        c.expect('(')?;
        let top = parse_node(&mut c, &mut links)?;
        c.expect(')')?;
        root.get_or_insert(top);
        c.skip_ws();
    }
    let root = root.ok_or_else(|| c.error("empty enumeration"))?;
    Ok((
        root.to_string(),
        links.into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
    ))
}

/// Parses an enumeration into a structure on `wavelength`, resolving names
/// against `net`.
pub fn parse_structure(text: &str, net: &Network, wavelength: usize) -> Result<LightStructure, ParseError> {
    let (root, names) = parse_enumeration(text)?;
    let root = net.id(&root)?;
    let links = names
        .iter()
        .map(|(a, b)| Ok(Link::new(net.id(a)?, net.id(b)?)))
        .collect::<Result<Vec<_>, NetworkError>>()?;
    Ok(LightStructure::new(wavelength, root, links))
}

/// One line per structure: `λ<k>: <enumeration>`.
pub fn dump(set: &LightStructureSet, net: &Network) -> String {
    set.structures
        .iter()
        .map(|ls| format!("λ{}: {}\n", ls.wavelength, serialize(ls, net)))
        .collect()
}

/// Reads a structure dump for `session`. Blank lines and `#` comments are
/// skipped.
pub fn parse_dump(text: &str, net: &Network, session: &MulticastSession) -> Result<LightStructureSet, ParseError> {
    let mut structures = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let dump_err = |message: String| ParseError::Dump { line, message };
        let rest = content
            .strip_prefix('λ')
            .ok_or_else(|| dump_err("expected `λ<k>:`".into()))?;
        let (k, body) = rest
            .split_once(':')
            .ok_or_else(|| dump_err("expected `:` after the wavelength".into()))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| dump_err(format!("bad wavelength `{k}`")))?;
        let ls = parse_structure(body, net, k).map_err(|e| dump_err(e.to_string()))?;
        structures.push(ls);
    }
    Ok(LightStructureSet::new(session.clone(), structures))
}

/// Convenience for building structures from `(from, to)` name pairs.
pub fn structure_from_names(net: &Network, wavelength: usize, root: &str, links: &[(&str, &str)]) -> Result<LightStructure, NetworkError> {
    let names: HashMap<&str, NodeId> = net.nodes().iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let get = |s: &str| names.get(s).copied().ok_or_else(|| NetworkError::UnknownNode(s.into()));
    Ok(LightStructure::new(
        wavelength,
        get(root)?,
        links.iter().map(|&(a, b)| Ok(Link::new(get(a)?, get(b)?))).collect::<Result<_, NetworkError>>()?,
    ))
}

/// Structure following a node path, e.g. `["s", "1", "d"]`.
pub fn path_structure(net: &Network, wavelength: usize, path: &[&str]) -> Result<LightStructure, NetworkError> {
    let pairs: Vec<(&str, &str)> = path.windows(2).map(|w| (w[0], w[1])).collect();
    structure_from_names(net, wavelength, path[0], &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{builtin_topology, Builtin};

    fn fig3() -> (Network, MulticastSession) {
        let net = builtin_topology(Builtin::Fig3);
        let ms = MulticastSession::from_names(&net, "s", &["d1", "d2"]).unwrap();
        (net, ms)
    }

    fn fig3_lh(net: &Network) -> LightStructure {
        path_structure(net, 0, &["s", "1", "2", "3", "5", "d1", "4", "3", "d2"]).unwrap()
    }

    fn fig3_lt(net: &Network) -> Vec<LightStructure> {
        vec![
            path_structure(net, 0, &["s", "1", "2", "3", "5", "d1"]).unwrap(),
            path_structure(net, 1, &["s", "1", "2", "3", "d2"]).unwrap(),
        ]
    }

    #[test]
    fn fig3_light_hierarchy() {
        let (net, ms) = fig3();
        let set = LightStructureSet::new(ms, vec![fig3_lh(&net)]);
        let report = validate(&net, &set);
        assert!(report.ok(), "{:?}", report.violations);
        assert_eq!(cost(&set, &net), 8);
        assert!(!is_light_tree(&set.structures[0]));
        let three = net.id("3").unwrap();
        assert_eq!(cps_nodes(&set.structures[0], &net), BTreeSet::from([three]));
    }

    #[test]
    fn fig3_light_forest() {
        let (net, ms) = fig3();
        let set = LightStructureSet::new(ms, fig3_lt(&net));
        assert!(validate(&net, &set).ok());
        assert_eq!(cost(&set, &net), 9);
        for ls in &set.structures {
            assert!(is_light_tree(ls));
            assert!(cps_nodes(ls, &net).is_empty());
        }
    }

    #[test]
    fn fig5_floating_cycle() {
        let net = builtin_topology(Builtin::Fig5);
        let ms = MulticastSession::from_names(&net, "s", &["d1", "d2", "d3"]).unwrap();
        let ls = structure_from_names(&net, 0, "s", &[("s", "d1"), ("d2", "d3"), ("d3", "d2")]).unwrap();
        let report = validate(&net, &LightStructureSet::new(ms, vec![ls]));
        assert!(report.has(Rule::Connectivity));
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == Rule::Connectivity && v.subject.contains("l_d2d3")));
    }

    #[test]
    fn single_link() {
        let net = crate::network::parse_network("NODE s MI\nNODE d MI\nEDGE s d 1\nWAVELENGTHS 1").unwrap();
        let ms = MulticastSession::from_names(&net, "s", &["d"]).unwrap();
        let ls = path_structure(&net, 0, &["s", "d"]).unwrap();
        assert!(is_light_tree(&ls));
        assert_eq!(serialize(&ls, &net), "(s(l_sd,d))");
        let set = LightStructureSet::new(ms, vec![ls]);
        assert!(validate(&net, &set).ok());
        assert_eq!(cost(&set, &net), 1);
    }

    fn fig4a() -> Network {
        Network::new(
            ["s", "1", "2", "3", "4", "d1", "d2"]
                .iter()
                .map(|n| (n.to_string(), if *n == "1" { NodeKind::Mc } else { NodeKind::Mi }))
                .collect(),
            [("s", "1"), ("1", "2"), ("1", "3"), ("2", "4"), ("3", "4"), ("4", "d1"), ("4", "d2")]
                .iter()
                .map(|&(a, b)| (a.to_string(), b.to_string(), 1))
                .collect(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn fig4a_enumeration_matches_published_form() {
        let net = fig4a();
        let ls = structure_from_names(
            &net,
            0,
            "s",
            &[("s", "1"), ("1", "2"), ("1", "3"), ("2", "4"), ("3", "4"), ("4", "d1"), ("4", "d2")],
        )
        .unwrap();
        assert_eq!(serialize(&ls, &net), "(s(l_s1,1(l_12,2(l_24,4(l_4d1,d1)),l_13,3(l_34,4(l_4d2,d2)))))");
        let ms = MulticastSession::from_names(&net, "s", &["d1", "d2"]).unwrap();
        assert!(validate(&net, &LightStructureSet::new(ms, vec![ls.clone()])).ok());
        assert_eq!(cps_nodes(&ls, &net), BTreeSet::from([net.id("4").unwrap()]));
    }

    #[test]
    fn round_trip_structure() {
        let net = Network::new(
            ["s", "2", "d1", "d2"].iter().map(|n| (n.to_string(), NodeKind::Mi)).collect(),
            [("s", "2"), ("2", "d1"), ("2", "d2")]
                .iter()
                .map(|&(a, b)| (a.to_string(), b.to_string(), 1))
                .collect(),
            1,
        )
        .unwrap();
        let ls = path_structure(&net, 0, &["s", "2", "d1", "2", "d2"]).unwrap();
        let text = serialize(&ls, &net);
        assert!(text.contains("l_2d1") && text.contains("l_d12"), "{text}");
        assert_eq!(text, "(s(l_s2,2(l_2d1,d1(l_d12,2(l_2d2,d2)))))");
        let back = parse_structure(&text, &net, 0).unwrap();
        let mut a = back.links.clone();
        let mut b = ls.links.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(cps_nodes(&ls, &net), BTreeSet::from([net.id("2").unwrap()]));
        let ms = MulticastSession::from_names(&net, "s", &["d1", "d2"]).unwrap();
        assert!(validate(&net, &LightStructureSet::new(ms, vec![ls])).ok());
    }

    #[test]
    fn floating_fragment_serializes() {
        let net = builtin_topology(Builtin::Fig5);
        let ls = structure_from_names(&net, 0, "s", &[("s", "d1"), ("d2", "d3"), ("d3", "d2")]).unwrap();
        let text = serialize(&ls, &net);
        assert_eq!(text, "(s(l_sd1,d1)) (d2(l_d2d3,d3(l_d3d2,d2)))");
        let back = parse_structure(&text, &net, 0).unwrap();
        assert_eq!(back.links.len(), 3);
        assert_eq!(back.root, net.id("s").unwrap());
    }

    #[test]
    fn parse_rejects_bad_labels() {
        assert!(matches!(parse_enumeration("(s(l_sx,d))"), Err(ParseError::LinkLabel { .. })));
        assert!(matches!(parse_enumeration("(s(l_sd,d)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_enumeration(""), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn mi_branching_is_rule_f() {
        let (net, ms) = fig3();
        // MI node 3 splitting one input onto two outputs
        let ls = structure_from_names(
            &net,
            0,
            "s",
            &[("s", "1"), ("1", "2"), ("2", "3"), ("3", "d2"), ("3", "5"), ("5", "d1")],
        )
        .unwrap();
        let report = validate(&net, &LightStructureSet::new(ms.clone(), vec![ls.clone()]));
        assert!(report.has(Rule::F), "{report:?}");
        // the same pattern is fine once node 3 carries a splitter
        let mc = net.with_kind("3", NodeKind::Mc).unwrap();
        assert!(validate(&mc, &LightStructureSet::new(ms, vec![ls])).ok());
    }

    #[test]
    fn destination_consuming_twice() {
        let (net, _) = fig3();
        let ms = MulticastSession::from_names(&net, "s", &["d1", "d2", "5"]).unwrap();
        // d1 reached as a leaf on two wavelengths: it cannot consume both signals
        let a = path_structure(&net, 0, &["s", "1", "2", "3", "5", "d1"]).unwrap();
        let b = path_structure(&net, 1, &["s", "1", "2", "3", "4", "d1"]).unwrap();
        let report = validate(&net, &LightStructureSet::new(ms, vec![a, b]));
        assert!(report.has(Rule::Service), "{report:?}");
    }

    #[test]
    fn commodity_flow_on_fig3_lh() {
        let (net, ms) = fig3();
        let ls = fig3_lh(&net);
        let flows = commodity_flow(net.node_count(), &ms, std::slice::from_ref(&ls)).unwrap();
        // s-1, 1-2, 2-3 carry both units; the loop through d1 and 4 returns one
        assert_eq!(flows[0], vec![2, 2, 2, 2, 2, 1, 1, 1]);
    }
}
