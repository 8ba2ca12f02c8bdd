//! Brute-force optimum for tiny instances.
//!
//! Enumerates every subset of directed links per wavelength, keeps the sets
//! that [`validate`] accepts (and that are light-trees in LT mode) and returns
//! the lexicographic `(cost, wavelength count)` minimum. It shares no code with
//! the ILP path except the validator, so it serves as the reference the
//! solver is tested against.

use thiserror::Error;

use crate::hierarchy::{is_light_tree, validate, LightStructure, LightStructureSet, Mode};
use crate::network::{Link, MulticastSession, Network, NodeKind};

pub const MAX_NODES: usize = 8;
pub const MAX_WAVELENGTHS: usize = 2;
pub const MAX_GROUP: usize = 3;
/// Directed links; each wavelength ranges over `2^links` subsets.
pub const MAX_LINKS: usize = 24;
/// Unpruned enumeration visits `2^(links * |W|)` combinations.
pub const MAX_UNPRUNED_BITS: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub best_cost: u64,
    pub best_wavelengths: usize,
    pub witness: LightStructureSet,
    /// Candidate sets handed to the validator.
    pub explored: u64,
}

struct Instance<'a> {
    net: &'a Network,
    ms: &'a MulticastSession,
    mode: Mode,
    links: Vec<Link>,
    costs: Vec<u64>,
    in_mask: Vec<u32>,
    out_mask: Vec<u32>,
    /// Per-structure cap on links entering a destination.
    dest_cap: usize,
}

impl<'a> Instance<'a> {
    fn new(net: &'a Network, ms: &'a MulticastSession, mode: Mode) -> Self {
        let links: Vec<Link> = net.links().collect();
        let costs = links.iter().map(|&l| net.link_cost(l).unwrap()).collect();
        let mut in_mask = vec![0u32; net.node_count()];
        let mut out_mask = vec![0u32; net.node_count()];
        for (i, l) in links.iter().enumerate() {
            in_mask[l.to] |= 1 << i;
            out_mask[l.from] |= 1 << i;
        }
        let g = ms.group_size();
        Instance {
            net,
            ms,
            mode,
            links,
            costs,
            in_mask,
            out_mask,
            dest_cap: if g >= 2 { g - 1 } else { usize::MAX },
        }
    }

    fn cost(&self, mask: u32) -> u64 {
        bits(mask).map(|i| self.costs[i]).sum()
    }

    /// Necessary per-structure conditions; cheap enough to run on every
    /// subset before the full validator sees combinations.
    fn locally_valid(&self, mask: u32) -> bool {
        if mask == 0 {
            return false;
        }
        let root = self.ms.source();
        for m in 0..self.net.node_count() {
            let i = (mask & self.in_mask[m]).count_ones() as usize;
            let o = (mask & self.out_mask[m]).count_ones() as usize;
            if m == root {
                if i > 0 || o > self.ms.group_size() {
                    return false;
                }
                continue;
            }
            if o > 0 && i == 0 {
                return false;
            }
            if self.mode == Mode::Lt && i > 1 {
                return false;
            }
            match self.net.kind(m) {
                NodeKind::Mc if i > 1 => return false,
                NodeKind::Mi if o > i => return false,
                _ => {}
            }
            if self.ms.is_destination(m) {
                if i > self.dest_cap {
                    return false;
                }
            } else if o < i {
                return false;
            }
        }
        self.reaches_all(mask)
    }

    fn reaches_all(&self, mask: u32) -> bool {
        let mut reached = 1u64 << self.ms.source();
        let mut used = 0u32;
        loop {
            let mut grew = false;
            for i in bits(mask & !used) {
                if reached & (1 << self.links[i].from) != 0 {
                    used |= 1 << i;
                    reached |= 1 << self.links[i].to;
                    grew = true;
                }
            }
            if !grew {
                return used == mask;
            }
        }
    }

    fn structure(&self, wavelength: usize, mask: u32) -> LightStructure {
        LightStructure::new(wavelength, self.ms.source(), bits(mask).map(|i| self.links[i]).collect())
    }

    fn set(&self, masks: &[(usize, u32)]) -> LightStructureSet {
        LightStructureSet::new(
            self.ms.clone(),
            masks.iter().map(|&(w, m)| self.structure(w, m)).collect(),
        )
    }

    fn accepts(&self, set: &LightStructureSet) -> bool {
        validate(self.net, set).ok() && (self.mode == Mode::Lh || set.structures.iter().all(is_light_tree))
    }

    /// Cheap cross-structure filter: source fan-out, destination coverage
    /// and destination in-link caps.
    fn pair_plausible(&self, a: u32, b: u32) -> bool {
        let s = self.ms.source();
        let fanout = (a & self.out_mask[s]).count_ones() + (b & self.out_mask[s]).count_ones();
        if fanout as usize > self.ms.group_size() {
            return false;
        }
        self.ms.destinations().iter().all(|&d| {
            let i = (a & self.in_mask[d]).count_ones() + (b & self.in_mask[d]).count_ones();
            i >= 1 && (i as usize) <= self.dest_cap
        })
    }
}

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask & (1 << i) != 0)
}

fn guard(net: &Network, ms: &MulticastSession) -> Result<(), OracleError> {
    if net.node_count() > MAX_NODES {
        return Err(OracleError::TooLarge(format!("{} nodes > {MAX_NODES}", net.node_count())));
    }
    if net.wavelengths() > MAX_WAVELENGTHS {
        return Err(OracleError::TooLarge(format!("{} wavelengths > {MAX_WAVELENGTHS}", net.wavelengths())));
    }
    if ms.group_size() > MAX_GROUP {
        return Err(OracleError::TooLarge(format!("|D| = {} > {MAX_GROUP}", ms.group_size())));
    }
    if net.link_count() > MAX_LINKS {
        return Err(OracleError::TooLarge(format!("{} directed links > {MAX_LINKS}", net.link_count())));
    }
    Ok(())
}

/// Exhaustive optimum with structural pruning. `Ok(None)` means no feasible
/// set exists.
pub fn enumerate_optimal(net: &Network, ms: &MulticastSession, mode: Mode) -> Result<Option<OracleResult>, OracleError> {
    guard(net, ms)?;
    let inst = Instance::new(net, ms, mode);
    let mut candidates: Vec<(u64, u32)> = (1..(1u32 << inst.links.len()))
        .filter(|&m| inst.locally_valid(m))
        .map(|m| (inst.cost(m), m))
        .collect();
    // cheaper first, then fewer links, then canonical link order
    candidates.sort_by_key(|&(c, m)| (c, m.count_ones(), m));

    let mut explored = 0u64;
    let mut best: Option<(u64, Vec<u32>)> = None;
    for &(c, m) in &candidates {
        explored += 1;
        if inst.accepts(&inst.set(&[(0, m)])) {
            best = Some((c, vec![m]));
            break;
        }
    }

    let max_k = net.wavelengths().min(ms.group_size());
    if max_k >= 2 {
        let mut bound = best.as_ref().map_or(u64::MAX, |(c, _)| *c);
        for (i, &(ci, mi)) in candidates.iter().enumerate() {
            if ci.saturating_mul(2) >= bound {
                break;
            }
            for &(cj, mj) in &candidates[i..] {
                if ci + cj >= bound {
                    break;
                }
                if !inst.pair_plausible(mi, mj) {
                    continue;
                }
                explored += 1;
                if inst.accepts(&inst.set(&[(0, mi), (1, mj)])) {
                    bound = ci + cj;
                    best = Some((bound, vec![mi, mj]));
                    break;
                }
            }
        }
    }

    Ok(best.map(|(cost, masks)| {
        let tagged: Vec<(usize, u32)> = masks.iter().copied().enumerate().collect();
        OracleResult { best_cost: cost, best_wavelengths: masks.len(), witness: inst.set(&tagged), explored }
    }))
}

/// Plain enumeration over every combination of per-wavelength subsets,
/// validated in full. Only for very small instances; used to check that
/// the pruning in [`enumerate_optimal`] loses nothing.
pub fn enumerate_unpruned(net: &Network, ms: &MulticastSession, mode: Mode) -> Result<Option<OracleResult>, OracleError> {
    guard(net, ms)?;
    let bits_needed = net.link_count() * net.wavelengths();
    if net.node_count() > 5 || bits_needed > MAX_UNPRUNED_BITS {
        return Err(OracleError::TooLarge(format!(
            "unpruned enumeration needs |V| <= 5 and links*|W| <= {MAX_UNPRUNED_BITS}"
        )));
    }
    let inst = Instance::new(net, ms, mode);
    let per = 1u64 << net.link_count();
    let w = net.wavelengths();
    let mut explored = 0u64;
    // (cost, wavelengths, per-wavelength masks)
    type Best = (u64, usize, Vec<(usize, u32)>);
    let mut best: Option<Best> = None;
    for combo in 1..(1u64 << bits_needed) {
        let masks: Vec<(usize, u32)> = (0..w)
            .map(|k| (k, ((combo / per.pow(k as u32)) % per) as u32))
            .filter(|&(_, m)| m != 0)
            .collect();
        explored += 1;
        let set = inst.set(&masks);
        if !inst.accepts(&set) {
            continue;
        }
        let cost: u64 = masks.iter().map(|&(_, m)| inst.cost(m)).sum();
        let key = (cost, masks.len());
        if best.as_ref().is_none_or(|(c, k, _)| key < (*c, *k)) {
            best = Some((cost, masks.len(), masks));
        }
    }
    Ok(best.map(|(cost, k, masks)| OracleResult {
        best_cost: cost,
        best_wavelengths: k,
        witness: inst.set(&masks),
        explored,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{cps_nodes, cost};
    use crate::network::{builtin_topology, Builtin};

    #[test]
    fn fig3_optima() {
        let net = builtin_topology(Builtin::Fig3);
        let ms = MulticastSession::from_names(&net, "s", &["d1", "d2"]).unwrap();
        let lh = enumerate_optimal(&net, &ms, Mode::Lh).unwrap().unwrap();
        // the round trip 3 -> d2 -> 3 undercuts the 8-link hierarchy through d1 and 4
        assert_eq!((lh.best_cost, lh.best_wavelengths), (7, 1));
        assert_eq!(cost(&lh.witness, &net), 7);
        assert_eq!(
            crate::hierarchy::serialize(&lh.witness.structures[0], &net),
            "(s(l_s1,1(l_12,2(l_23,3(l_3d2,d2(l_d23,3(l_34,4(l_4d1,d1))))))))"
        );
        assert_eq!(cps_nodes(&lh.witness.structures[0], &net), [net.id("3").unwrap()].into());
        let lt = enumerate_optimal(&net, &ms, Mode::Lt).unwrap().unwrap();
        assert_eq!((lt.best_cost, lt.best_wavelengths), (9, 2));
        assert!(validate(&net, &lt.witness).ok());
    }

    #[test]
    fn fig5_connected_path() {
        let net = builtin_topology(Builtin::Fig5);
        let ms = MulticastSession::from_names(&net, "s", &["d1", "d2", "d3"]).unwrap();
        let r = enumerate_optimal(&net, &ms, Mode::Lh).unwrap().unwrap();
        assert_eq!((r.best_cost, r.best_wavelengths), (5, 1));
        let expect = crate::hierarchy::path_structure(&net, 0, &["s", "d1", "d2", "d3"]).unwrap();
        assert_eq!(r.witness.structures, vec![expect]);
    }

    #[test]
    fn guard_refuses_large_instances() {
        let net = builtin_topology(Builtin::Nsf);
        let ms = MulticastSession::from_names(&net, "1", &["2"]).unwrap();
        assert!(matches!(enumerate_optimal(&net, &ms, Mode::Lh), Err(OracleError::TooLarge(_))));
        let fig5 = builtin_topology(Builtin::Fig5);
        let ms = MulticastSession::from_names(&fig5, "s", &["d1", "d2", "d3"]).unwrap();
        assert!(enumerate_optimal(&fig5.with_wavelengths(3).unwrap(), &ms, Mode::Lh).is_err());
    }

    #[test]
    fn chain_sessions() {
        let net = Network::new(
            ["a", "b", "c"].iter().map(|n| (n.to_string(), NodeKind::Mi)).collect(),
            vec![("a".into(), "b".into(), 1), ("b".into(), "c".into(), 1)],
            1,
        )
        .unwrap();
        // b taps the signal and continues it to c
        let ms = MulticastSession::from_names(&net, "a", &["b", "c"]).unwrap();
        let r = enumerate_optimal(&net, &ms, Mode::Lh).unwrap().unwrap();
        assert_eq!((r.best_cost, r.best_wavelengths), (2, 1));
        // the source's fan-out is bounded only across wavelengths, so an MI
        // source may feed both neighbors on one wavelength
        let ms = MulticastSession::from_names(&net, "b", &["a", "c"]).unwrap();
        let lt = enumerate_optimal(&net, &ms, Mode::Lt).unwrap().unwrap();
        assert_eq!((lt.best_cost, lt.best_wavelengths), (2, 1));
    }

    #[test]
    fn light_tree_needs_a_wavelength_per_leaf() {
        // a light-tree through an MI hub serves one leaf per wavelength; a
        // hierarchy can return through the hub after a round trip
        let net = Network::new(
            ["s", "h", "x", "y"].iter().map(|n| (n.to_string(), NodeKind::Mi)).collect(),
            [("s", "h"), ("h", "x"), ("h", "y")]
                .iter()
                .map(|&(u, v)| (u.to_string(), v.to_string(), 1))
                .collect(),
            1,
        )
        .unwrap();
        let ms = MulticastSession::from_names(&net, "s", &["x", "y"]).unwrap();
        assert_eq!(enumerate_optimal(&net, &ms, Mode::Lt).unwrap(), None);
        let lh = enumerate_optimal(&net, &ms, Mode::Lh).unwrap().unwrap();
        assert_eq!((lh.best_cost, lh.best_wavelengths), (4, 1));
        let two = net.with_wavelengths(2).unwrap();
        let lt = enumerate_optimal(&two, &ms, Mode::Lt).unwrap().unwrap();
        assert_eq!((lt.best_cost, lt.best_wavelengths), (4, 2));
    }

    #[test]
    fn pruned_matches_unpruned_on_small_graphs() {
        let net = Network::new(
            ["s", "a", "b", "c"]
                .iter()
                .map(|n| (n.to_string(), NodeKind::Mi))
                .collect(),
            [("s", "a"), ("a", "b"), ("a", "c"), ("b", "c")]
                .iter()
                .map(|&(u, v)| (u.to_string(), v.to_string(), 1))
                .collect(),
            2,
        )
        .unwrap();
        for dests in [&["b"][..], &["b", "c"], &["a", "b", "c"]] {
            let ms = MulticastSession::from_names(&net, "s", dests).unwrap();
            for mode in [Mode::Lh, Mode::Lt] {
                let fast = enumerate_optimal(&net, &ms, mode).unwrap().map(|r| (r.best_cost, r.best_wavelengths));
                let slow = enumerate_unpruned(&net, &ms, mode).unwrap().map(|r| (r.best_cost, r.best_wavelengths));
                assert_eq!(fast, slow, "{dests:?} {mode}");
            }
        }
    }
}
