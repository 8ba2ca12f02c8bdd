//! Sparse-splitting WDM topologies.
//!
//! A [`Network`] is an undirected graph whose every edge carries two opposite
//! directed fibers of equal cost. Nodes are either multicast incapable (MI,
//! tap-and-continue only) or multicast capable (MC, equipped with a splitter).
//! Node and edge order is preserved from construction and defines the
//! canonical indexing used by the ILP model and the serializers.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Dense index of a node in its [`Network`].
pub type NodeId = usize;

/// Splitting capability of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Multicast incapable: tap-and-continue, no splitter.
    Mi,
    /// Multicast capable: may copy one input onto several outputs.
    Mc,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Mi => f.write_str("MI"),
            NodeKind::Mc => f.write_str("MC"),
        }
    }
}

impl FromStr for NodeKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MI" => Ok(NodeKind::Mi),
            "MC" => Ok(NodeKind::Mc),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

/// Undirected edge; induces the directed links `u -> v` and `v -> u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub cost: u64,
}

/// A directed fiber link. Link `2e` runs `u -> v` of edge `e`, link `2e + 1`
/// runs `v -> u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
}

impl Link {
    pub fn new(from: NodeId, to: NodeId) -> Self {
        Link { from, to }
    }

    pub fn reversed(self) -> Self {
        Link::new(self.to, self.from)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate node id `{id}`")]
    DuplicateNode { line: usize, id: String },
    #[error("line {line}: node `{id}` is not declared")]
    UndefinedNode { line: usize, id: String },
    #[error("line {line}: edge cost must be a positive integer, got `{value}`")]
    NonPositiveCost { line: usize, value: String },
    #[error("line {line}: self-loop on `{id}`")]
    SelfLoop { line: usize, id: String },
    #[error("line {line}: duplicate edge between `{u}` and `{v}`")]
    DuplicateEdge { line: usize, u: String, v: String },
    #[error("line {line}: wavelength count must be a positive integer, got `{value}`")]
    ZeroWavelengths { line: usize, value: String },
    #[error("missing WAVELENGTHS line")]
    MissingWavelengths,
    #[error("network has no nodes")]
    Empty,
    #[error("network is disconnected: `{id}` is unreachable from `{root}`")]
    Disconnected { root: String, id: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown built-in topology `{0}` (expected fig3, fig5, nsf or cost239)")]
    UnknownTopology(String),
    #[error("invalid node id `{0}`: ids must be non-empty ASCII alphanumeric")]
    InvalidId(String),
}

/// Validated, immutable WDM topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    wavelengths: usize,
    /// Per node: `(neighbor, edge index)` in edge order.
    adjacency: Vec<Vec<(NodeId, usize)>>,
    index: HashMap<String, NodeId>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric())
}

impl Network {
    /// Builds and validates a network from named nodes and `(u, v, cost)` edges.
    pub fn new(
        nodes: Vec<(String, NodeKind)>,
        edges: Vec<(String, String, u64)>,
        wavelengths: usize,
    ) -> Result<Self, NetworkError> {
        let mut b = Builder::default();
        for (i, (name, kind)) in nodes.into_iter().enumerate() {
            b.node(i + 1, name, kind)?;
        }
        for (i, (u, v, c)) in edges.into_iter().enumerate() {
            b.edge(i + 1, &u, &v, c)?;
        }
        if wavelengths == 0 {
            return Err(NetworkError::ZeroWavelengths { line: 0, value: "0".into() });
        }
        b.wavelengths = Some(wavelengths);
        b.finish()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn wavelengths(&self) -> usize {
        self.wavelengths
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id].kind
    }

    pub fn id(&self, name: &str) -> Result<NodeId, NetworkError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| NetworkError::UnknownNode(name.to_string()))
    }

    /// Neighbors of `m`. Since fibers come in opposite pairs this is both
    /// the in-neighbor and the out-neighbor set.
    pub fn neighbors(&self, m: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[m].iter().map(|&(n, _)| n)
    }

    pub fn degree(&self, m: NodeId) -> usize {
        self.adjacency[m].len()
    }

    /// Degree by node name.
    pub fn degree_of(&self, name: &str) -> Result<usize, NetworkError> {
        Ok(self.degree(self.id(name)?))
    }

    /// All `2|E|` directed links in canonical order.
    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.edges
            .iter()
            .flat_map(|e| [Link::new(e.u, e.v), Link::new(e.v, e.u)])
    }

    pub fn link_count(&self) -> usize {
        2 * self.edges.len()
    }

    /// Canonical index of a directed link, if the underlying edge exists.
    pub fn link_index(&self, link: Link) -> Option<usize> {
        let from = self.adjacency.get(link.from)?;
        from.iter().find(|&&(n, _)| n == link.to).map(|&(_, e)| {
            if self.edges[e].u == link.from {
                2 * e
            } else {
                2 * e + 1
            }
        })
    }

    /// Directed link with the given canonical index.
    pub fn link(&self, index: usize) -> Link {
        let e = self.edges[index / 2];
        if index.is_multiple_of(2) {
            Link::new(e.u, e.v)
        } else {
            Link::new(e.v, e.u)
        }
    }

    /// Cost of a directed link, `None` when the nodes are not adjacent.
    pub fn link_cost(&self, link: Link) -> Option<u64> {
        self.link_index(link).map(|i| self.edges[i / 2].cost)
    }

    /// Copy of this network with the named nodes turned into MC nodes and all
    /// others MI.
    pub fn with_splitters<S: AsRef<str>>(&self, splitters: &[S]) -> Result<Network, NetworkError> {
        let mut net = self.clone();
        for node in &mut net.nodes {
            node.kind = NodeKind::Mi;
        }
        for s in splitters {
            let id = net.id(s.as_ref())?;
            net.nodes[id].kind = NodeKind::Mc;
        }
        Ok(net)
    }

    pub fn with_kind(&self, name: &str, kind: NodeKind) -> Result<Network, NetworkError> {
        let mut net = self.clone();
        let id = net.id(name)?;
        net.nodes[id].kind = kind;
        Ok(net)
    }

    pub fn with_wavelengths(&self, wavelengths: usize) -> Result<Network, NetworkError> {
        if wavelengths == 0 {
            return Err(NetworkError::ZeroWavelengths { line: 0, value: "0".into() });
        }
        let mut net = self.clone();
        net.wavelengths = wavelengths;
        Ok(net)
    }

    /// Renders the line-oriented network file format.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!("NODE {} {}\n", n.name, n.kind));
        }
        for e in &self.edges {
            out.push_str(&format!("EDGE {} {} {}\n", self.name(e.u), self.name(e.v), e.cost));
        }
        out.push_str(&format!("WAVELENGTHS {}\n", self.wavelengths));
        out
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<String, NodeId>,
    adjacency: Vec<Vec<(NodeId, usize)>>,
    wavelengths: Option<usize>,
}

impl Builder {
    fn node(&mut self, line: usize, name: String, kind: NodeKind) -> Result<(), NetworkError> {
        if !valid_id(&name) {
            return Err(NetworkError::InvalidId(name));
        }
        if self.index.contains_key(&name) {
            return Err(NetworkError::DuplicateNode { line, id: name });
        }
        self.index.insert(name.clone(), self.nodes.len());
        self.nodes.push(Node { name, kind });
        self.adjacency.push(Vec::new());
        Ok(())
    }

    fn lookup(&self, line: usize, id: &str) -> Result<NodeId, NetworkError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::UndefinedNode { line, id: id.to_string() })
    }

    fn edge(&mut self, line: usize, u: &str, v: &str, cost: u64) -> Result<(), NetworkError> {
        let a = self.lookup(line, u)?;
        let b = self.lookup(line, v)?;
        if a == b {
            return Err(NetworkError::SelfLoop { line, id: u.to_string() });
        }
        if cost == 0 {
            return Err(NetworkError::NonPositiveCost { line, value: "0".into() });
        }
        if self.adjacency[a].iter().any(|&(n, _)| n == b) {
            return Err(NetworkError::DuplicateEdge { line, u: u.into(), v: v.into() });
        }
        let e = self.edges.len();
        self.edges.push(Edge { u: a, v: b, cost });
        self.adjacency[a].push((b, e));
        self.adjacency[b].push((a, e));
        Ok(())
    }

    fn finish(self) -> Result<Network, NetworkError> {
        let wavelengths = self.wavelengths.ok_or(NetworkError::MissingWavelengths)?;
        if self.nodes.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(m) = queue.pop_front() {
            for &(n, _) in &self.adjacency[m] {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(NetworkError::Disconnected {
                root: self.nodes[0].name.clone(),
                id: self.nodes[lost].name.clone(),
            });
        }
        Ok(Network {
            nodes: self.nodes,
            edges: self.edges,
            wavelengths,
            adjacency: self.adjacency,
            index: self.index,
        })
    }
}

fn syntax(line: usize, message: impl Into<String>) -> NetworkError {
    NetworkError::Syntax { line, message: message.into() }
}

/// Parses the line-oriented network format:
///
/// ```text
/// # comment
/// NODE <id> MI|MC
/// EDGE <id> <id> <positive-int>
/// WAVELENGTHS <positive-int>
/// ```
pub fn parse_network(text: &str) -> Result<Network, NetworkError> {
    let mut b = Builder::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields.as_slice() {
            ["NODE", id, kind] => {
                let kind = kind
                    .parse::<NodeKind>()
                    .map_err(|_| syntax(line, format!("node kind must be MI or MC, got `{kind}`")))?;
                b.node(line, id.to_string(), kind).map_err(|e| match e {
                    NetworkError::InvalidId(id) => syntax(line, format!("invalid node id `{id}`")),
                    other => other,
                })?;
            }
            ["EDGE", u, v, cost] => {
                let c = cost
                    .parse::<i64>()
                    .ok()
                    .filter(|&c| c > 0)
                    .ok_or_else(|| NetworkError::NonPositiveCost { line, value: cost.to_string() })?;
                b.edge(line, u, v, c as u64)?;
            }
            ["WAVELENGTHS", w] => {
                if b.wavelengths.is_some() {
                    return Err(syntax(line, "WAVELENGTHS given twice"));
                }
                let w = w
                    .parse::<i64>()
                    .ok()
                    .filter(|&w| w > 0)
                    .ok_or_else(|| NetworkError::ZeroWavelengths { line, value: w.to_string() })?;
                b.wavelengths = Some(w as usize);
            }
            _ => return Err(syntax(line, format!("unrecognized line `{content}`"))),
        }
    }
    b.finish()
}

/// Topologies shipped with the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// Eight-node example where an MI node of degree 4 makes a light-hierarchy
    /// cheaper (8) than the best light-forest (9).
    Fig3,
    /// Chain `s - d1 - d2 - d3` with costs 1, 3, 1 on which the structure
    /// constraints alone admit a disconnected optimum.
    Fig5,
    /// 14-node, 21-edge NSFNET.
    Nsf,
    /// 11-node, 26-edge European COST-239.
    Cost239,
}

impl FromStr for Builtin {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fig3" => Ok(Builtin::Fig3),
            "fig5" => Ok(Builtin::Fig5),
            "nsf" => Ok(Builtin::Nsf),
            "cost239" => Ok(Builtin::Cost239),
            _ => Err(NetworkError::UnknownTopology(s.to_string())),
        }
    }
}

/// Default wavelength count of the built-in topologies.
pub const BUILTIN_WAVELENGTHS: usize = 2;

const FIG3_EDGES: &[(&str, &str, u64)] = &[
    ("s", "1", 1),
    ("1", "2", 1),
    ("2", "3", 1),
    ("3", "4", 1),
    ("3", "5", 1),
    ("4", "d1", 1),
    ("5", "d1", 1),
    ("3", "d2", 1),
];

const FIG5_EDGES: &[(&str, &str, u64)] = &[("s", "d1", 1), ("d1", "d2", 3), ("d2", "d3", 1)];

const NSF_EDGES: &[(u32, u32)] = &[
    (1, 2),
    (1, 3),
    (1, 8),
    (2, 3),
    (2, 4),
    (3, 6),
    (4, 5),
    (4, 11),
    (5, 6),
    (5, 7),
    (6, 10),
    (6, 13),
    (7, 8),
    (8, 9),
    (9, 10),
    (9, 12),
    (9, 14),
    (11, 12),
    (11, 14),
    (12, 13),
    (13, 14),
];

// 1 Copenhagen, 2 London, 3 Amsterdam, 4 Berlin, 5 Brussels, 6 Luxembourg,
// 7 Prague, 8 Paris, 9 Zurich, 10 Vienna, 11 Milan
const COST239_EDGES: &[(u32, u32)] = &[
    (1, 2),
    (1, 3),
    (1, 4),
    (1, 7),
    (2, 3),
    (2, 5),
    (2, 8),
    (3, 4),
    (3, 5),
    (3, 6),
    (4, 7),
    (4, 8),
    (4, 10),
    (5, 6),
    (5, 8),
    (5, 11),
    (6, 8),
    (6, 7),
    (6, 9),
    (7, 10),
    (7, 9),
    (8, 9),
    (8, 11),
    (9, 10),
    (9, 11),
    (10, 11),
];

fn named(nodes: &[&str], edges: &[(&str, &str, u64)]) -> Network {
    Network::new(
        nodes.iter().map(|n| (n.to_string(), NodeKind::Mi)).collect(),
        edges.iter().map(|&(u, v, c)| (u.to_string(), v.to_string(), c)).collect(),
        BUILTIN_WAVELENGTHS,
    )
    .expect("built-in topology is valid")
}

fn numbered(count: u32, edges: &[(u32, u32)]) -> Network {
    Network::new(
        (1..=count).map(|i| (i.to_string(), NodeKind::Mi)).collect(),
        edges.iter().map(|&(u, v)| (u.to_string(), v.to_string(), 1)).collect(),
        BUILTIN_WAVELENGTHS,
    )
    .expect("built-in topology is valid")
}

/// Built-in topology; all nodes MI, [`BUILTIN_WAVELENGTHS`] wavelengths.
/// NSF and COST-239 use unit edge costs.
pub fn builtin_topology(name: Builtin) -> Network {
    match name {
        Builtin::Fig3 => named(&["s", "1", "2", "3", "4", "5", "d1", "d2"], FIG3_EDGES),
        Builtin::Fig5 => named(&["s", "d1", "d2", "d3"], FIG5_EDGES),
        Builtin::Nsf => numbered(14, NSF_EDGES),
        Builtin::Cost239 => numbered(11, COST239_EDGES),
    }
}

/// Resolves a built-in name or reads a network file.
pub fn load_topology(name_or_path: &str) -> Result<Network, Box<dyn std::error::Error + Send + Sync>> {
    match name_or_path.parse::<Builtin>() {
        Ok(b) => Ok(builtin_topology(b)),
        Err(_) => {
            let text = std::fs::read_to_string(name_or_path)?;
            Ok(parse_network(&text)?)
        }
    }
}

/// Multicast request `ms(s, D)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MulticastSession {
    source: NodeId,
    destinations: Vec<NodeId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("session needs at least one destination")]
    NoDestinations,
    #[error("source is listed as a destination")]
    SourceInDestinations,
    #[error("destination listed twice")]
    DuplicateDestination,
    #[error("node index {0} out of range")]
    OutOfRange(NodeId),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl MulticastSession {
    /// Destinations are kept sorted by node index.
    pub fn new(net: &Network, source: NodeId, mut destinations: Vec<NodeId>) -> Result<Self, SessionError> {
        if destinations.is_empty() {
            return Err(SessionError::NoDestinations);
        }
        for &n in destinations.iter().chain(std::iter::once(&source)) {
            if n >= net.node_count() {
                return Err(SessionError::OutOfRange(n));
            }
        }
        destinations.sort_unstable();
        if destinations.windows(2).any(|w| w[0] == w[1]) {
            return Err(SessionError::DuplicateDestination);
        }
        if destinations.contains(&source) {
            return Err(SessionError::SourceInDestinations);
        }
        Ok(MulticastSession { source, destinations })
    }

    pub fn from_names<S: AsRef<str>>(net: &Network, source: &str, destinations: &[S]) -> Result<Self, SessionError> {
        let s = net.id(source)?;
        let ds = destinations
            .iter()
            .map(|d| net.id(d.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(net, s, ds)
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn destinations(&self) -> &[NodeId] {
        &self.destinations
    }

    pub fn is_destination(&self, n: NodeId) -> bool {
        self.destinations.binary_search(&n).is_ok()
    }

    pub fn group_size(&self) -> usize {
        self.destinations.len()
    }
}
