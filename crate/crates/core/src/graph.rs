//! Contention graphs and their feasible transmission states.
//!
//! Links are identified externally by 1-based ids `1..=n`. Internally link
//! `i` occupies bit `i - 1` of a state mask, so the mask `0b101` on a
//! three-link graph means links 1 and 3 are transmitting.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Largest graph the adjacency representation supports.
pub const MAX_LINKS: usize = 64;

/// Largest graph [`ContentionGraph::enumerate_states`] will enumerate exactly.
pub const ENUMERATION_CAP: usize = 24;

/// 1-based link identifier.
pub type LinkId = usize;

/// A set of links encoded as a bit mask (bit `i - 1` is link `i`).
pub type StateMask = u32;

/// Undirected carrier-sense conflict relation among `n` links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentionGraph {
    n: usize,
    neighbors: Vec<u64>,
}

impl ContentionGraph {
    /// Builds a graph from 1-based edge pairs. Duplicate and reversed pairs
    /// are merged.
    pub fn new(n: usize, edges: &[(LinkId, LinkId)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if n > MAX_LINKS {
            return Err(Error::TooManyLinks { n, max: MAX_LINKS });
        }
        let mut neighbors = vec![0u64; n];
        for &(a, b) in edges {
            for link in [a, b] {
                if link == 0 || link > n {
                    return Err(Error::LinkOutOfRange { link, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            neighbors[a - 1] |= 1 << (b - 1);
            neighbors[b - 1] |= 1 << (a - 1);
        }
        Ok(Self { n, neighbors })
    }

    /// A graph with `n` links and no conflicts.
    pub fn isolated(n: usize) -> Result<Self> {
        Self::new(n, &[])
    }

    /// The path `1 - 2 - ... - n`.
    pub fn chain(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
        Self::new(n, &edges)
    }

    /// Every pair of links conflicts.
    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                edges.push((a, b));
            }
        }
        Self::new(n, &edges)
    }

    pub fn link_count(&self) -> usize {
        self.n
    }

    /// Neighbor set of the link at 0-based bit position `index`.
    pub fn neighbor_mask(&self, index: usize) -> u64 {
        self.neighbors[index]
    }

    /// 1-based neighbor ids of `link`, ascending.
    pub fn neighbors(&self, link: LinkId) -> Result<Vec<LinkId>> {
        self.check_link(link)?;
        Ok(bits(self.neighbors[link - 1]).map(|i| i + 1).collect())
    }

    pub fn are_adjacent(&self, a: LinkId, b: LinkId) -> bool {
        a >= 1 && a <= self.n && b >= 1 && b <= self.n && self.neighbors[a - 1] >> (b - 1) & 1 == 1
    }

    /// Normalized edge list with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(LinkId, LinkId)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in bits(self.neighbors[a]).filter(|&b| b > a) {
                out.push((a + 1, b + 1));
            }
        }
        out
    }

    pub fn degree(&self, link: LinkId) -> Result<usize> {
        self.check_link(link)?;
        Ok(self.neighbors[link - 1].count_ones() as usize)
    }

    /// True when no two links in `mask` conflict.
    pub fn is_independent(&self, mask: u64) -> bool {
        bits(mask).all(|i| self.neighbors[i] & mask == 0)
    }

    pub fn check_link(&self, link: LinkId) -> Result<()> {
        if link == 0 || link > self.n {
            Err(Error::LinkOutOfRange { link, n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// Splits the graph into connected sub-networks, each relabelled to
    /// local ids `1..=k` in ascending order of the original ids.
    pub fn connected_components(&self) -> Vec<Component> {
        let mut seen = 0u64;
        let mut out = Vec::new();
        for start in 0..self.n {
            if seen >> start & 1 == 1 {
                continue;
            }
            let mut members = 1u64 << start;
            let mut frontier = members;
            while frontier != 0 {
                let mut next = 0u64;
                for i in bits(frontier) {
                    next |= self.neighbors[i];
                }
                frontier = next & !members;
                members |= next;
            }
            seen |= members;
            let links: Vec<LinkId> = bits(members).map(|i| i + 1).collect();
            let edges: Vec<_> = self
                .edges()
                .into_iter()
                .filter_map(|(a, b)| {
                    let la = links.iter().position(|&x| x == a)?;
                    let lb = links.iter().position(|&x| x == b)?;
                    Some((la + 1, lb + 1))
                })
                .collect();
            let graph = ContentionGraph::new(links.len(), &edges)
                .expect("component of a valid graph is valid");
            out.push(Component { graph, links });
        }
        out
    }

    /// Enumerates every independent set (including the empty set) by
    /// branch-and-prune over the links, returned in ascending mask order.
    pub fn enumerate_states(&self) -> Result<StateSpace> {
        if self.n > ENUMERATION_CAP {
            return Err(Error::EnumerationCap {
                n: self.n,
                cap: ENUMERATION_CAP,
            });
        }
        let mut states = Vec::new();
        let all = if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        };
        self.branch(0, 0, all, &mut states);
        states.sort_unstable();
        Ok(StateSpace { n: self.n, states })
    }

    fn branch(&self, index: usize, chosen: u64, allowed: u64, out: &mut Vec<StateMask>) {
        if index == self.n {
            out.push(chosen as StateMask);
            return;
        }
        self.branch(index + 1, chosen, allowed, out);
        if allowed >> index & 1 == 1 {
            self.branch(
                index + 1,
                chosen | 1 << index,
                allowed & !self.neighbors[index],
                out,
            );
        }
    }
}

/// One connected sub-network together with its id mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub graph: ContentionGraph,
    /// `links[k]` is the original id of local link `k + 1`.
    pub links: Vec<LinkId>,
}

impl Component {
    pub fn to_global(&self, local: LinkId) -> Option<LinkId> {
        local
            .checked_sub(1)
            .and_then(|k| self.links.get(k).copied())
    }

    pub fn to_local(&self, global: LinkId) -> Option<LinkId> {
        self.links.iter().position(|&l| l == global).map(|k| k + 1)
    }
}

/// The feasible ICN states of a graph: all independent sets, ascending by mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    n: usize,
    states: Vec<StateMask>,
}

impl StateSpace {
    pub fn link_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateMask] {
        &self.states
    }

    pub fn index_of(&self, mask: StateMask) -> Option<usize> {
        self.states.binary_search(&mask).ok()
    }

    pub fn contains(&self, mask: StateMask) -> bool {
        self.index_of(mask).is_some()
    }

    /// Number of states in which the link at bit `index` transmits.
    pub fn occupancy(&self, index: usize) -> usize {
        self.states.iter().filter(|&&s| s >> index & 1 == 1).count()
    }

    /// Renders a state the way the literature writes it, e.g. `[1,0,1]`.
    pub fn format_state(&self, mask: StateMask) -> String {
        let inner: Vec<String> = (0..self.n).map(|i| (mask >> i & 1).to_string()).collect();
        format!("[{}]", inner.join(","))
    }

    /// Distinct sets of links, for callers that want 1-based ids.
    pub fn link_sets(&self) -> Vec<BTreeSet<LinkId>> {
        self.states
            .iter()
            .map(|&s| bits(s as u64).map(|i| i + 1).collect())
            .collect()
    }
}

/// Iterates the 0-based positions of set bits, ascending.
pub fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}
