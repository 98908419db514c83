//! Single-site analysis over the full configuration cube: blocked and
//! unblocked neighborhoods, the shortest-path metric with activity-dependent
//! edge lengths, the heterogeneous-fugacity mixing bound, and the exact
//! verifier for its core contraction inequality.
//!
//! Unlike the weighted-Hamming machinery, everything here works on all of
//! `{0,1}^n`, feasible or not; states and path intermediates may violate
//! independence.

use crate::bounds::{BoundReport, Formula, InequalityCheck};
use crate::dynamics::Fugacities;
use crate::error::Error;
use crate::graph::{Config, Graph};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

/// Width cap for shortest paths over the `2^n` configuration cube.
pub const CUBE_METRIC_MAX_VERTICES: usize = 16;

/// Width cap for the exact contraction-inequality verifier.
pub const CONTRACTION_CHECK_MAX_VERTICES: usize = 12;

/// Splits the neighbors of `v` into blocked and unblocked sets with respect
/// to `sigma` (any configuration, feasible or not).
///
/// `w` is blocked when it is occupied or has an occupied neighbor; unblocked
/// neighbors are exactly those that could join the configuration next move.
pub fn blocked_neighbors(g: &Graph, sigma: Config, v: usize) -> (Config, Config) {
    let mut blocked = 0u64;
    for w in Config::from_bits(g.neighbors(v)).vertices() {
        if sigma.contains(w) || g.neighbors(w) & sigma.bits() != 0 {
            blocked |= 1 << w;
        }
    }
    let unblocked = g.neighbors(v) & !blocked;
    (Config::from_bits(blocked), Config::from_bits(unblocked))
}

/// Length of the single-flip edge `(sigma, sigma + v)`:
/// `1 + (1/2) sum of lambda_w over unblocked neighbors of v in sigma`.
pub fn edge_length(g: &Graph, fug: &Fugacities, sigma: Config, v: usize) -> Result<f64, Error> {
    if v >= g.n() {
        return Err(Error::VertexOutOfRange { v, n: g.n() });
    }
    if sigma.contains(v) {
        return Err(Error::Precondition(format!(
            "vertex {v} must not be in the configuration"
        )));
    }
    let (_, unblocked) = blocked_neighbors(g, sigma, v);
    Ok(1.0 + 0.5 * unblocked.vertices().map(|w| fug.lambda(w)).sum::<f64>())
}

/// Shortest-path metric on the configuration cube with single-flip edges;
/// each edge's length is determined by its endpoint not containing the
/// flipped vertex. Distances from a source are computed by Dijkstra and
/// cached, so repeated queries against few sources are cheap.
pub struct CubeMetric<'a> {
    g: &'a Graph,
    fug: &'a Fugacities,
    dist_from: HashMap<u64, Vec<f64>>,
}

struct HeapEntry {
    dist: f64,
    node: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance (lengths are finite and never NaN).
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<'a> CubeMetric<'a> {
    pub fn new(g: &'a Graph, fug: &'a Fugacities) -> Result<Self, Error> {
        if g.n() > CUBE_METRIC_MAX_VERTICES {
            return Err(Error::TooManyVertices {
                n: g.n(),
                max: CUBE_METRIC_MAX_VERTICES,
            });
        }
        if fug.len() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                got: fug.len(),
            });
        }
        Ok(CubeMetric {
            g,
            fug,
            dist_from: HashMap::new(),
        })
    }

    /// Exact metric value between two configurations.
    pub fn distance(&mut self, sigma: Config, eta: Config) -> f64 {
        if sigma == eta {
            return 0.0;
        }
        // The metric is symmetric; key the cache on the smaller endpoint.
        let (source, target) = if sigma.bits() <= eta.bits() {
            (sigma, eta)
        } else {
            (eta, sigma)
        };
        let g = self.g;
        let fug = self.fug;
        let dists = self
            .dist_from
            .entry(source.bits())
            .or_insert_with(|| dijkstra(g, fug, source));
        dists[target.bits() as usize]
    }

    /// Triangle set `N_v intersect N_u`.
    pub fn triangle_set(&self, v: usize, u: usize) -> Config {
        Config::from_bits(self.g.neighbors(v) & self.g.neighbors(u))
    }
}

fn dijkstra(g: &Graph, fug: &Fugacities, source: Config) -> Vec<f64> {
    let size = 1usize << g.n();
    let mut dist = vec![f64::INFINITY; size];
    dist[source.bits() as usize] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        dist: 0.0,
        node: source.bits(),
    });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node as usize] {
            continue;
        }
        let tau = Config::from_bits(node);
        for v in 0..g.n() {
            let base = tau.without(v);
            let len = 1.0
                + 0.5
                    * blocked_neighbors(g, base, v)
                        .1
                        .vertices()
                        .map(|w| fug.lambda(w))
                        .sum::<f64>();
            let next = node ^ (1 << v);
            let nd = d + len;
            if nd < dist[next as usize] {
                dist[next as usize] = nd;
                heap.push(HeapEntry {
                    dist: nd,
                    node: next,
                });
            }
        }
    }
    dist
}

/// One-shot metric evaluation (`n <= 16`).
pub fn cube_distance(
    g: &Graph,
    fug: &Fugacities,
    sigma: Config,
    eta: Config,
) -> Result<f64, Error> {
    let mut metric = CubeMetric::new(g, fug)?;
    Ok(metric.distance(sigma, eta))
}

/// Parameters of the heterogeneous-fugacity single-site bound.
#[derive(Clone, Debug, Serialize)]
pub struct CubeMetricParams {
    /// `a = max_v sum of lambda_w over the neighbors of v`.
    pub a: f64,
    /// `gamma = sum of (1 + lambda_y)`.
    pub gamma: f64,
    /// Selection weights `q_y = (1 + lambda_y) / gamma`.
    pub q: Vec<f64>,
}

pub fn cube_metric_params(g: &Graph, fug: &Fugacities) -> CubeMetricParams {
    let a = (0..g.n())
        .map(|v| {
            Config::from_bits(g.neighbors(v))
                .vertices()
                .map(|w| fug.lambda(w))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let gamma: f64 = (0..g.n()).map(|y| 1.0 + fug.lambda(y)).sum();
    let q = (0..g.n()).map(|y| (1.0 + fug.lambda(y)) / gamma).collect();
    CubeMetricParams { a, gamma, q }
}

/// Single-site mixing bound `(gamma / (1 - a/2)) ln(n (1 + a/2) / epsilon)`,
/// applicable when `a < 2` and the selection weights are `(1 + lambda_y)/gamma`.
/// The looser `3n` closing form is reported alongside when `gamma <= 3n`.
pub fn cube_metric_bound(g: &Graph, fug: &Fugacities, epsilon: f64) -> BoundReport {
    let params = cube_metric_params(g, fug);
    let n = g.n() as f64;
    if params.a >= 2.0 {
        let mut report = BoundReport::inapplicable(
            Formula::CubeMetric,
            epsilon,
            format!("a = {} is not below 2", params.a),
        );
        report.a = Some(params.a);
        report.gamma = Some(params.gamma);
        return report;
    }
    let margin = 1.0 - params.a / 2.0;
    let big_d = n * (1.0 + params.a / 2.0);
    let bound = params.gamma / margin * (big_d / epsilon).ln();
    let loose = if params.gamma <= 3.0 * n {
        Some(3.0 * n / margin * (2.0 * n / epsilon).ln())
    } else {
        None
    };
    BoundReport {
        formula: Formula::CubeMetric,
        epsilon,
        applicable: true,
        theta: None,
        b: None,
        a: Some(params.a),
        gamma: Some(params.gamma),
        beta: Some(1.0 + (-1.0 + params.a / 2.0) / params.gamma),
        big_d: Some(big_d),
        bound: Some(bound),
        loose_bound: loose,
        sufficient_condition: None,
        failed_condition: None,
    }
}

/// Exact check of the contraction inequality
/// `2 sum_y (1 + lambda_y) E[delta^y Phi] <= -2 + sum_{w in N_v} lambda_w`
/// for the adjacent pair `(sigma, sigma + v)` under the shared-move coupling.
///
/// Every conditional expectation is evaluated by applying the attempted move
/// to both components and measuring the exact metric change; requires
/// `v` not in `sigma`, `a < 2`, and `n <= 12`.
pub fn cube_contraction_check(
    g: &Graph,
    fug: &Fugacities,
    sigma: Config,
    v: usize,
) -> Result<InequalityCheck, Error> {
    let mut metric = CubeMetric::new(g, fug)?;
    cube_contraction_check_with(&mut metric, sigma, v)
}

/// As [`cube_contraction_check`], reusing a metric context across many checks.
pub fn cube_contraction_check_with(
    metric: &mut CubeMetric<'_>,
    sigma: Config,
    v: usize,
) -> Result<InequalityCheck, Error> {
    let g = metric.g;
    let fug = metric.fug;
    if g.n() > CONTRACTION_CHECK_MAX_VERTICES {
        return Err(Error::TooManyVertices {
            n: g.n(),
            max: CONTRACTION_CHECK_MAX_VERTICES,
        });
    }
    if v >= g.n() {
        return Err(Error::VertexOutOfRange { v, n: g.n() });
    }
    if !g.fits(sigma) {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: 64,
        });
    }
    if sigma.contains(v) {
        return Err(Error::Precondition(format!(
            "vertex {v} must not be in sigma"
        )));
    }
    let params = cube_metric_params(g, fug);
    if params.a >= 2.0 {
        return Err(Error::Precondition(format!(
            "a = {} is not below 2",
            params.a
        )));
    }

    let eta = sigma.with(v);
    let phi0 = metric.distance(sigma, eta);
    // Attempting to add y succeeds only on an empty neighborhood and is a
    // no-op otherwise; attempting to remove y always succeeds. On feasible
    // states this coincides with the slot update rule; on the rest of the
    // cube the failed add must leave the configuration unchanged.
    let attempt_add = |tau: Config, y: usize| -> Config {
        if g.neighbors(y) & tau.bits() == 0 {
            tau.with(y)
        } else {
            tau
        }
    };
    let mut lhs = 0.0;
    for y in 0..g.n() {
        let d_add = metric.distance(attempt_add(sigma, y), attempt_add(eta, y)) - phi0;
        let d_remove = metric.distance(sigma.without(y), eta.without(y)) - phi0;
        let e_y = fug.p(y) * d_add + fug.p_bar(y) * d_remove;
        lhs += 2.0 * (1.0 + fug.lambda(y)) * e_y;
    }
    let rhs = -2.0
        + Config::from_bits(g.neighbors(v))
            .vertices()
            .map(|w| fug.lambda(w))
            .sum::<f64>();
    Ok(InequalityCheck::le(
        format!("cube contraction sigma={sigma} v={v}"),
        lhs,
        rhs,
        1e-9,
    ))
}
