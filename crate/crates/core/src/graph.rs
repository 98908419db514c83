//! Graph representation and independent-set machinery.
//!
//! Vertices are labeled `0..n-1` with `n <= 64`, so any vertex subset fits in
//! a single `u64` and set algebra is exact machine arithmetic. A
//! [`Config`] is such a subset; it is *feasible* on a graph when it is an
//! independent set (no edge has both endpoints inside).

use crate::error::Error;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Hard width bound: a configuration is one machine word.
pub const MAX_VERTICES: usize = 64;

#[inline(always)]
const fn bit(v: usize) -> u64 {
    1u64 << v
}

/// A set of vertices encoded as a bitmask; bit `v` set means vertex `v` is in.
///
/// Ordering is by raw bitmask value, which is the canonical enumeration order
/// used throughout (stationary vectors, transition-matrix indices).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Config(u64);

impl Config {
    pub const EMPTY: Config = Config(0);

    #[inline(always)]
    pub fn from_bits(bits: u64) -> Self {
        Config(bits)
    }

    pub fn from_vertices(vertices: &[usize]) -> Self {
        let mut bits = 0u64;
        for &v in vertices {
            debug_assert!(v < MAX_VERTICES);
            bits |= bit(v);
        }
        Config(bits)
    }

    #[inline(always)]
    pub fn bits(self) -> u64 {
        self.0
    }

    #[inline(always)]
    pub fn contains(self, v: usize) -> bool {
        self.0 & bit(v) != 0
    }

    #[inline(always)]
    pub fn with(self, v: usize) -> Self {
        Config(self.0 | bit(v))
    }

    #[inline(always)]
    pub fn without(self, v: usize) -> Self {
        Config(self.0 & !bit(v))
    }

    #[inline(always)]
    pub fn union(self, other: Self) -> Self {
        Config(self.0 | other.0)
    }

    #[inline(always)]
    pub fn intersection(self, other: Self) -> Self {
        Config(self.0 & other.0)
    }

    #[inline(always)]
    pub fn difference(self, other: Self) -> Self {
        Config(self.0 & !other.0)
    }

    /// Symmetric difference, the set of vertices where the two configurations differ.
    #[inline(always)]
    pub fn sym_diff(self, other: Self) -> Self {
        Config(self.0 ^ other.0)
    }

    #[inline(always)]
    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline(always)]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline(always)]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Iterates member vertices in ascending order.
    #[inline]
    pub fn vertices(self) -> BitIter {
        BitIter(self.0)
    }

    pub fn to_vertices(self) -> Vec<usize> {
        self.vertices().collect()
    }
}

/// Ascending iterator over the set bits of a mask.
#[derive(Clone, Copy)]
pub struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    #[inline(always)]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let v = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(v)
        }
    }
}

impl fmt::Debug for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.vertices().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Undirected simple graph on `n <= 64` vertices, stored as per-vertex
/// neighbor bitmasks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<u64>,
    edge_count: usize,
}

/// Deterministic graph generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GraphKind {
    Path { n: usize },
    Cycle { n: usize },
    Star { n: usize },
    Grid { rows: usize, cols: usize },
    Band { n: usize, width: usize },
    ErdosRenyi { n: usize, p: f64, seed: u64 },
}

impl Graph {
    /// Creates an edgeless graph on `n` vertices (`1 <= n <= 64`).
    pub fn new(n: usize) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one vertex".into(),
            ));
        }
        if n > MAX_VERTICES {
            return Err(Error::TooManyVertices {
                n,
                max: MAX_VERTICES,
            });
        }
        Ok(Graph {
            n,
            adj: vec![0; n],
            edge_count: 0,
        })
    }

    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, Error> {
        let mut g = Graph::new(n)?;
        for (u, v) in edges {
            g.insert_edge(u, v)?;
        }
        Ok(g)
    }

    fn insert_edge(&mut self, u: usize, v: usize) -> Result<(), Error> {
        if u >= self.n {
            return Err(Error::VertexOutOfRange { v: u, n: self.n });
        }
        if v >= self.n {
            return Err(Error::VertexOutOfRange { v, n: self.n });
        }
        if u == v {
            return Err(Error::SelfLoop { v });
        }
        if self.adj[u] & bit(v) == 0 {
            self.adj[u] |= bit(v);
            self.adj[v] |= bit(u);
            self.edge_count += 1;
        }
        Ok(())
    }

    #[inline(always)]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline(always)]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Neighbor set of `v` as a bitmask.
    #[inline(always)]
    pub fn neighbors(&self, v: usize) -> u64 {
        self.adj[v]
    }

    #[inline(always)]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u] & bit(v) != 0
    }

    #[inline(always)]
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones() as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    /// Mask with one bit per vertex of the graph.
    #[inline(always)]
    pub fn vertex_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    /// Union of the neighbor sets of every vertex in `mask`.
    pub fn neighbors_of_set(&self, mask: u64) -> u64 {
        let mut out = 0u64;
        let mut t = mask;
        while t != 0 {
            let v = t.trailing_zeros() as usize;
            t &= t - 1;
            out |= self.adj[v];
        }
        out
    }

    /// Edges as `(u, v)` pairs with `u < v`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for u in 0..self.n {
            let mut t = self.adj[u] & !(bit(u) | (bit(u) - 1));
            while t != 0 {
                let v = t.trailing_zeros() as usize;
                t &= t - 1;
                out.push((u, v));
            }
        }
        out
    }

    /// True when `s` fits the graph width (no bits at or above `n`).
    #[inline(always)]
    pub fn fits(&self, s: Config) -> bool {
        s.bits() & !self.vertex_mask() == 0
    }

    /// True iff no edge has both endpoints in `s`.
    pub fn is_independent(&self, s: Config) -> bool {
        debug_assert!(self.fits(s), "configuration wider than graph");
        let mask = s.bits();
        let mut t = mask;
        while t != 0 {
            let v = t.trailing_zeros() as usize;
            t &= t - 1;
            if self.adj[v] & mask != 0 {
                return false;
            }
        }
        true
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = bit(0);
        let mut frontier = bit(0);
        while frontier != 0 {
            let mut next = 0u64;
            let mut t = frontier;
            while t != 0 {
                let v = t.trailing_zeros() as usize;
                t &= t - 1;
                next |= self.adj[v] & !seen;
            }
            seen |= next;
            frontier = next;
        }
        seen == self.vertex_mask()
    }

    /// Enumerates every independent set in ascending bitmask order.
    ///
    /// The first element is always the empty configuration. Aborts with
    /// [`Error::EnumerationCap`] once the count would exceed `cap`.
    pub fn enumerate_independent_sets(&self, cap: usize) -> Result<Vec<Config>, Error> {
        if cap == 0 {
            return Err(Error::InvalidParameter(
                "enumeration cap must be positive".into(),
            ));
        }
        let mut out = Vec::new();
        self.enumerate_rec(self.n, 0, 0, cap, &mut out)?;
        Ok(out)
    }

    /// Independent subsets of vertices `0..k` avoiding `forbidden`, each
    /// unioned with `acc`, emitted in ascending bitmask order.
    fn enumerate_rec(
        &self,
        k: usize,
        forbidden: u64,
        acc: u64,
        cap: usize,
        out: &mut Vec<Config>,
    ) -> Result<(), Error> {
        if k == 0 {
            if out.len() >= cap {
                return Err(Error::EnumerationCap {
                    cap,
                    lower_bound: out.len() + 1,
                });
            }
            out.push(Config(acc));
            return Ok(());
        }
        let v = k - 1;
        self.enumerate_rec(v, forbidden, acc, cap, out)?;
        if forbidden & bit(v) == 0 {
            self.enumerate_rec(v, forbidden | self.adj[v], acc | bit(v), cap, out)?;
        }
        Ok(())
    }

    /// Parses the edge-list text format: first non-comment line is `n`, each
    /// following line is `u v`; `#` starts a comment line.
    pub fn load_edge_list(text: &str) -> Result<Self, Error> {
        let mut graph: Option<Graph> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            match graph {
                None => {
                    let n: usize = line.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("expected vertex count, got {line:?}"),
                    })?;
                    graph = Some(Graph::new(n)?);
                }
                Some(ref mut g) => {
                    let mut parts = line.split_whitespace();
                    let (u, v) = match (parts.next(), parts.next(), parts.next()) {
                        (Some(a), Some(b), None) => {
                            let u: usize = a.parse().map_err(|_| Error::Parse {
                                line: lineno,
                                msg: format!("bad vertex {a:?}"),
                            })?;
                            let v: usize = b.parse().map_err(|_| Error::Parse {
                                line: lineno,
                                msg: format!("bad vertex {b:?}"),
                            })?;
                            (u, v)
                        }
                        _ => {
                            return Err(Error::Parse {
                                line: lineno,
                                msg: format!("expected \"u v\", got {line:?}"),
                            })
                        }
                    };
                    g.insert_edge(u, v)?;
                }
            }
        }
        graph.ok_or(Error::Parse {
            line: 0,
            msg: "empty edge-list document".into(),
        })
    }

    /// Serializes to the edge-list text format accepted by [`Graph::load_edge_list`].
    pub fn to_edge_list_string(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (u, v) in self.edges() {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    /// Builds a graph from a deterministic generator spec.
    pub fn generate(kind: &GraphKind) -> Result<Self, Error> {
        match *kind {
            GraphKind::Path { n } => Graph::from_edges(n, (1..n).map(|i| (i - 1, i))),
            GraphKind::Cycle { n } => {
                if n < 3 {
                    return Err(Error::InvalidParameter("cycle needs n >= 3".into()));
                }
                let mut g = Graph::from_edges(n, (1..n).map(|i| (i - 1, i)))?;
                g.insert_edge(n - 1, 0)?;
                Ok(g)
            }
            GraphKind::Star { n } => Graph::from_edges(n, (1..n).map(|i| (0, i))),
            GraphKind::Grid { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return Err(Error::InvalidParameter("grid needs rows, cols >= 1".into()));
                }
                let n = rows
                    .checked_mul(cols)
                    .ok_or_else(|| Error::InvalidParameter("grid size overflow".into()))?;
                let mut g = Graph::new(n)?;
                for r in 0..rows {
                    for c in 0..cols {
                        let v = r * cols + c;
                        if c + 1 < cols {
                            g.insert_edge(v, v + 1)?;
                        }
                        if r + 1 < rows {
                            g.insert_edge(v, v + cols)?;
                        }
                    }
                }
                Ok(g)
            }
            GraphKind::Band { n, width } => {
                if width == 0 {
                    return Err(Error::InvalidParameter("band width must be >= 1".into()));
                }
                let mut g = Graph::new(n)?;
                for i in 0..n {
                    for j in (i + 1)..n.min(i + width + 1) {
                        g.insert_edge(i, j)?;
                    }
                }
                Ok(g)
            }
            GraphKind::ErdosRenyi { n, p, seed } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!(
                        "edge probability {p} not in [0,1]"
                    )));
                }
                let mut g = Graph::new(n)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for u in 0..n {
                    for v in (u + 1)..n {
                        if rng.random_bool(p) {
                            g.insert_edge(u, v)?;
                        }
                    }
                }
                Ok(g)
            }
        }
    }
}
