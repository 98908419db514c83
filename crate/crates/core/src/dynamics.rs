//! The parallel Glauber dynamics: per-vertex fugacities, update-set
//! distributions, single-slot stepping, trajectory simulation, and the exact
//! one-step transition probability.
//!
//! One slot works as follows. An independent *update set* `m` is drawn from
//! the configured distribution; every vertex `v` in `m` whose neighborhood is
//! empty in the previous configuration resamples its occupancy (occupied with
//! probability `p_v = lambda_v / (1 + lambda_v)`), every blocked vertex in `m`
//! turns off, and vertices outside `m` keep their state. Feasibility is
//! preserved for every independent `m`.
//!
//! Coin discipline: exactly one uniform in `[0,1)` is consumed per vertex of
//! the update set, in ascending vertex order. Coupled chains rely on this to
//! share coins between components.

use crate::error::Error;
use crate::graph::{Config, Graph};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Supported width for exact random-greedy marginals (dynamic programming
/// over activation subsets).
pub const GREEDY_EXACT_MARGINALS_MAX: usize = 20;

/// Supported width for converting a random-greedy distribution to explicit
/// form (requires the full distribution over result sets).
pub const GREEDY_EXPLICIT_MAX: usize = 12;

/// Two-sided 99% normal quantile, for Monte Carlo confidence half-widths.
const Z_99: f64 = 2.5758293035489004;

/// Per-vertex positive activities and the derived flip probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fugacities {
    lambda: Vec<f64>,
}

impl Fugacities {
    pub fn from_values(lambda: Vec<f64>) -> Result<Self, Error> {
        if lambda.is_empty() {
            return Err(Error::InvalidParameter("fugacity vector is empty".into()));
        }
        for (v, &l) in lambda.iter().enumerate() {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "fugacity at vertex {v} must be positive and finite, got {l}"
                )));
            }
        }
        Ok(Fugacities { lambda })
    }

    pub fn uniform(n: usize, lambda: f64) -> Result<Self, Error> {
        Fugacities::from_values(vec![lambda; n])
    }

    #[inline(always)]
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    #[inline(always)]
    pub fn lambda(&self, v: usize) -> f64 {
        self.lambda[v]
    }

    pub fn values(&self) -> &[f64] {
        &self.lambda
    }

    /// Activation probability `p_v = lambda_v / (1 + lambda_v)`.
    #[inline(always)]
    pub fn p(&self, v: usize) -> f64 {
        self.lambda[v] / (1.0 + self.lambda[v])
    }

    /// Complement `1 / (1 + lambda_v)`.
    #[inline(always)]
    pub fn p_bar(&self, v: usize) -> f64 {
        1.0 / (1.0 + self.lambda[v])
    }

    /// Parses the fugacity file format: lines `v lambda_v`, `#` comments.
    /// Vertices not listed fall back to `default`, which must be supplied if
    /// any vertex is omitted.
    pub fn parse(text: &str, n: usize, default: Option<f64>) -> Result<Self, Error> {
        let mut values: Vec<Option<f64>> = vec![None; n];
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let mut parts = line.split_whitespace();
            let (v, l) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => {
                    let v: usize = a.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad vertex {a:?}"),
                    })?;
                    let l: f64 = b.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad fugacity {b:?}"),
                    })?;
                    (v, l)
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected \"v lambda\", got {line:?}"),
                    })
                }
            };
            if v >= n {
                return Err(Error::VertexOutOfRange { v, n });
            }
            values[v] = Some(l);
        }
        let filled: Result<Vec<f64>, Error> = values
            .iter()
            .enumerate()
            .map(|(v, l)| match (l, default) {
                (Some(l), _) => Ok(*l),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(Error::InvalidParameter(format!(
                    "vertex {v} has no fugacity and no default was supplied"
                ))),
            })
            .collect();
        Fugacities::from_values(filled?)
    }
}

/// Distribution over update sets (decision schedules).
#[derive(Clone, Debug, PartialEq)]
pub enum UpdateDist {
    /// Finite support list `(m, q_m)`; every `m` must be independent.
    Explicit { sets: Vec<(Config, f64)> },
    /// One vertex per slot, selected with the given positive weights.
    SingleSite { weights: Vec<f64> },
    /// Per-vertex activation coins `a_v` in `(0,1]`; activated vertices are
    /// visited in a seeded random order and greedily added when no neighbor
    /// is already in the set.
    RandomGreedy { activation: Vec<f64> },
}

/// Outcome of checking an update-set distribution against a graph.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub support_independent: bool,
    pub first_dependent_set: Option<Config>,
    pub total_mass: f64,
    pub normalized: bool,
    /// Irreducibility support condition: `q_v > 0` for every vertex.
    pub covers_all_vertices: bool,
    pub uncovered_vertices: Vec<usize>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.support_independent && self.normalized && self.covers_all_vertices
    }
}

/// Per-vertex update marginals `q_v`, with a 99% confidence half-width per
/// vertex when estimated by Monte Carlo (zero in exact mode).
#[derive(Clone, Debug, Serialize)]
pub struct Marginals {
    pub q: Vec<f64>,
    pub half_width: Vec<f64>,
}

/// How to compute update marginals.
#[derive(Clone, Copy, Debug)]
pub enum MarginalMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

impl UpdateDist {
    pub fn explicit(sets: Vec<(Config, f64)>) -> Result<Self, Error> {
        if sets.is_empty() {
            return Err(Error::InvalidParameter(
                "explicit distribution has empty support".into(),
            ));
        }
        for &(_, q) in &sets {
            if !q.is_finite() || q < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "set probability {q} invalid"
                )));
            }
        }
        Ok(UpdateDist::Explicit { sets })
    }

    pub fn single_site_uniform(n: usize) -> Self {
        UpdateDist::SingleSite {
            weights: vec![1.0; n],
        }
    }

    pub fn single_site(weights: Vec<f64>) -> Result<Self, Error> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("weight vector is empty".into()));
        }
        for (v, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "selection weight at vertex {v} must be positive, got {w}"
                )));
            }
        }
        Ok(UpdateDist::SingleSite { weights })
    }

    pub fn random_greedy(activation: Vec<f64>) -> Result<Self, Error> {
        if activation.is_empty() {
            return Err(Error::InvalidParameter("activation vector is empty".into()));
        }
        for (v, &a) in activation.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 || a > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "activation probability at vertex {v} must be in (0,1], got {a}"
                )));
            }
        }
        Ok(UpdateDist::RandomGreedy { activation })
    }

    /// Number of vertices this distribution is defined over, when fixed by
    /// the variant (`None` for explicit supports, which carry no width).
    pub fn width(&self) -> Option<usize> {
        match self {
            UpdateDist::Explicit { .. } => None,
            UpdateDist::SingleSite { weights } => Some(weights.len()),
            UpdateDist::RandomGreedy { activation } => Some(activation.len()),
        }
    }

    /// Checks support independence, normalization, and the irreducibility
    /// support condition (`q_v > 0` for all `v`). Failures are reported, not
    /// raised.
    pub fn validate(&self, g: &Graph) -> ValidationReport {
        match self {
            UpdateDist::Explicit { sets } => {
                let mut support_independent = true;
                let mut first_dependent_set = None;
                let mut total = 0.0;
                let mut covered = 0u64;
                for &(m, q) in sets {
                    if !g.fits(m) || !g.is_independent(m) {
                        if support_independent {
                            first_dependent_set = Some(m);
                        }
                        support_independent = false;
                    }
                    total += q;
                    if q > 0.0 {
                        covered |= m.bits();
                    }
                }
                let uncovered: Vec<usize> =
                    Config::from_bits(g.vertex_mask() & !covered).to_vertices();
                ValidationReport {
                    support_independent,
                    first_dependent_set,
                    total_mass: total,
                    normalized: (total - 1.0).abs() <= 1e-12,
                    covers_all_vertices: uncovered.is_empty(),
                    uncovered_vertices: uncovered,
                }
            }
            UpdateDist::SingleSite { weights } => {
                let dim_ok = weights.len() == g.n();
                let uncovered: Vec<usize> = if dim_ok {
                    weights
                        .iter()
                        .enumerate()
                        .filter(|(_, &w)| w <= 0.0 || w.is_nan())
                        .map(|(v, _)| v)
                        .collect()
                } else {
                    (0..g.n()).collect()
                };
                ValidationReport {
                    support_independent: true,
                    first_dependent_set: None,
                    total_mass: 1.0,
                    normalized: true,
                    covers_all_vertices: dim_ok && uncovered.is_empty(),
                    uncovered_vertices: uncovered,
                }
            }
            UpdateDist::RandomGreedy { activation } => {
                let dim_ok = activation.len() == g.n();
                let uncovered: Vec<usize> = if dim_ok {
                    activation
                        .iter()
                        .enumerate()
                        .filter(|(_, &a)| a <= 0.0 || a.is_nan())
                        .map(|(v, _)| v)
                        .collect()
                } else {
                    (0..g.n()).collect()
                };
                ValidationReport {
                    support_independent: true,
                    first_dependent_set: None,
                    total_mass: 1.0,
                    normalized: true,
                    covers_all_vertices: dim_ok && uncovered.is_empty(),
                    uncovered_vertices: uncovered,
                }
            }
        }
    }

    /// Per-vertex update probabilities `q_v = sum over sets containing v`.
    pub fn update_marginals(&self, g: &Graph, mode: MarginalMode) -> Result<Marginals, Error> {
        match mode {
            MarginalMode::Exact => self.exact_marginals(g),
            MarginalMode::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::InvalidParameter("samples must be positive".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut hits = vec![0u64; g.n()];
                for _ in 0..samples {
                    let m = self.sample_update_set(g, &mut rng)?;
                    for v in m.vertices() {
                        hits[v] += 1;
                    }
                }
                let q: Vec<f64> = hits.iter().map(|&h| h as f64 / samples as f64).collect();
                let half_width = q
                    .iter()
                    .map(|&p| Z_99 * (p * (1.0 - p) / samples as f64).sqrt())
                    .collect();
                Ok(Marginals { q, half_width })
            }
        }
    }

    fn exact_marginals(&self, g: &Graph) -> Result<Marginals, Error> {
        let n = g.n();
        let q = match self {
            UpdateDist::Explicit { sets } => {
                let total: f64 = sets.iter().map(|&(_, q)| q).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::NotNormalized { total });
                }
                let mut q = vec![0.0; n];
                for &(m, qm) in sets {
                    if !g.fits(m) {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            got: 64,
                        });
                    }
                    for v in m.vertices() {
                        q[v] += qm;
                    }
                }
                q
            }
            UpdateDist::SingleSite { weights } => {
                if weights.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: weights.len(),
                    });
                }
                let total: f64 = weights.iter().sum();
                weights.iter().map(|w| w / total).collect()
            }
            UpdateDist::RandomGreedy { activation } => {
                if activation.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: activation.len(),
                    });
                }
                if n > GREEDY_EXACT_MARGINALS_MAX {
                    return Err(Error::TooManyVertices {
                        n,
                        max: GREEDY_EXACT_MARGINALS_MAX,
                    });
                }
                random_greedy_exact_marginals(g, activation)
            }
        };
        let half_width = vec![0.0; n];
        Ok(Marginals { q, half_width })
    }

    /// Draws one update set; the result is always independent in `g`.
    pub fn sample_update_set<R: Rng>(&self, g: &Graph, rng: &mut R) -> Result<Config, Error> {
        match self {
            UpdateDist::Explicit { sets } => {
                let total: f64 = sets.iter().map(|&(_, q)| q).sum();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for &(m, q) in sets {
                    acc += q;
                    if u < acc {
                        return Ok(m);
                    }
                }
                Ok(sets.last().expect("non-empty support").0)
            }
            UpdateDist::SingleSite { weights } => {
                if weights.len() != g.n() {
                    return Err(Error::DimensionMismatch {
                        expected: g.n(),
                        got: weights.len(),
                    });
                }
                let total: f64 = weights.iter().sum();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for (v, &w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return Ok(Config::EMPTY.with(v));
                    }
                }
                Ok(Config::EMPTY.with(weights.len() - 1))
            }
            UpdateDist::RandomGreedy { activation } => {
                if activation.len() != g.n() {
                    return Err(Error::DimensionMismatch {
                        expected: g.n(),
                        got: activation.len(),
                    });
                }
                // One activation coin per vertex, ascending, then a seeded
                // shuffle of the activated vertices.
                let mut active: Vec<usize> = Vec::with_capacity(g.n());
                for (v, &a) in activation.iter().enumerate() {
                    if rng.random::<f64>() < a {
                        active.push(v);
                    }
                }
                use rand::seq::SliceRandom;
                active.shuffle(rng);
                let mut chosen = 0u64;
                for &v in &active {
                    if g.neighbors(v) & chosen == 0 {
                        chosen |= 1 << v;
                    }
                }
                Ok(Config::from_bits(chosen))
            }
        }
    }

    /// Rewrites the distribution in explicit form over its full support.
    ///
    /// Single-site distributions become their singleton supports; the
    /// random-greedy law is computed exactly by dynamic programming over
    /// subsets (`n <= 12`).
    pub fn to_explicit(&self, g: &Graph) -> Result<UpdateDist, Error> {
        match self {
            UpdateDist::Explicit { .. } => Ok(self.clone()),
            UpdateDist::SingleSite { weights } => {
                if weights.len() != g.n() {
                    return Err(Error::DimensionMismatch {
                        expected: g.n(),
                        got: weights.len(),
                    });
                }
                let total: f64 = weights.iter().sum();
                let sets = weights
                    .iter()
                    .enumerate()
                    .map(|(v, &w)| (Config::EMPTY.with(v), w / total))
                    .collect();
                Ok(UpdateDist::Explicit { sets })
            }
            UpdateDist::RandomGreedy { activation } => {
                if activation.len() != g.n() {
                    return Err(Error::DimensionMismatch {
                        expected: g.n(),
                        got: activation.len(),
                    });
                }
                if g.n() > GREEDY_EXPLICIT_MAX {
                    return Err(Error::TooManyVertices {
                        n: g.n(),
                        max: GREEDY_EXPLICIT_MAX,
                    });
                }
                let sets = random_greedy_explicit(g, activation);
                Ok(UpdateDist::Explicit { sets })
            }
        }
    }

    /// Reads the JSON document format:
    /// `{"variant": "explicit"|"single_site"|"random_greedy", "sets": [...], "weights": [...], "activation": [...]}`.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let file: DistFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        match file.variant.as_str() {
            "explicit" => {
                let sets = file
                    .sets
                    .iter()
                    .map(|s| (Config::from_vertices(&s.vertices), s.q))
                    .collect();
                UpdateDist::explicit(sets)
            }
            "single_site" => UpdateDist::single_site(file.weights),
            "random_greedy" => UpdateDist::random_greedy(file.activation),
            other => Err(Error::InvalidParameter(format!(
                "unknown variant {other:?}"
            ))),
        }
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            UpdateDist::Explicit { sets } => DistFile {
                variant: "explicit".into(),
                sets: sets
                    .iter()
                    .map(|&(m, q)| DistSet {
                        vertices: m.to_vertices(),
                        q,
                    })
                    .collect(),
                weights: vec![],
                activation: vec![],
            },
            UpdateDist::SingleSite { weights } => DistFile {
                variant: "single_site".into(),
                sets: vec![],
                weights: weights.clone(),
                activation: vec![],
            },
            UpdateDist::RandomGreedy { activation } => DistFile {
                variant: "random_greedy".into(),
                sets: vec![],
                weights: vec![],
                activation: activation.clone(),
            },
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }
}

#[derive(Serialize, Deserialize)]
struct DistFile {
    variant: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    sets: Vec<DistSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    activation: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistSet {
    vertices: Vec<usize>,
    q: f64,
}

/// Exact `q_v` for the random-greedy law.
///
/// The process is equivalent to visiting all vertices in a uniform random
/// order, flipping each vertex's activation coin on arrival, and greedily
/// adding activated vertices. On an "alive" subset `S` (vertices that are
/// neither decided nor dominated), the first visited vertex is uniform on
/// `S`; if it activates it joins the set and its closed neighborhood leaves
/// `S`, otherwise only the vertex leaves. Membership probabilities follow by
/// a sweep over subsets in increasing mask order.
fn random_greedy_exact_marginals(g: &Graph, activation: &[f64]) -> Vec<f64> {
    let n = g.n();
    let full = g.vertex_mask() as usize;
    let mut q = vec![0.0; n];
    let mut table = vec![0.0f64; full + 1];
    for (v, qv) in q.iter_mut().enumerate() {
        let vbit = 1u64 << v;
        for s in 1..=full {
            let s64 = s as u64;
            if s64 & vbit == 0 {
                table[s] = 0.0;
                continue;
            }
            let mut acc = 0.0;
            let mut rem = s64;
            while rem != 0 {
                let u = rem.trailing_zeros() as usize;
                rem &= rem - 1;
                let a = activation[u];
                if u == v {
                    acc += a;
                } else {
                    let after_add = s64 & !(g.neighbors(u) | (1 << u));
                    acc += a * table[after_add as usize];
                    let after_skip = s64 & !(1 << u);
                    acc += (1.0 - a) * table[after_skip as usize];
                }
            }
            table[s] = acc / s64.count_ones() as f64;
        }
        *qv = table[full];
    }
    q
}

/// Full distribution over greedy result sets, by the same alive-set recursion.
fn random_greedy_explicit(g: &Graph, activation: &[f64]) -> Vec<(Config, f64)> {
    let full = g.vertex_mask() as usize;
    let mut dists: Vec<Vec<(u64, f64)>> = Vec::with_capacity(full + 1);
    dists.push(vec![(0u64, 1.0)]);
    for s in 1..=full {
        let s64 = s as u64;
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        let inv = 1.0 / s64.count_ones() as f64;
        let mut rem = s64;
        while rem != 0 {
            let u = rem.trailing_zeros() as usize;
            rem &= rem - 1;
            let a = activation[u];
            let after_add = (s64 & !(g.neighbors(u) | (1 << u))) as usize;
            for &(m, p) in &dists[after_add] {
                *acc.entry(m | (1 << u)).or_insert(0.0) += inv * a * p;
            }
            let after_skip = (s64 & !(1u64 << u)) as usize;
            for &(m, p) in &dists[after_skip] {
                *acc.entry(m).or_insert(0.0) += inv * (1.0 - a) * p;
            }
        }
        dists.push(acc.into_iter().collect());
    }
    dists[full]
        .iter()
        .map(|&(m, p)| (Config::from_bits(m), p))
        .collect()
}

/// Applies one slot of the dynamics to `sigma` with update set `m` and the
/// given per-vertex coins (one per vertex of `m`, ascending vertex order).
///
/// For `v` in `m`: if no neighbor of `v` is occupied in `sigma`, the result
/// occupies `v` iff `coin_v < p_v`; otherwise `v` is vacated. All other
/// vertices keep their state.
pub fn step(
    g: &Graph,
    fug: &Fugacities,
    sigma: Config,
    m: Config,
    coins: &[f64],
) -> Result<Config, Error> {
    if !g.fits(sigma) || !g.is_independent(sigma) {
        return Err(Error::Infeasible { bits: sigma.bits() });
    }
    if !g.fits(m) || !g.is_independent(m) {
        return Err(Error::NotIndependent { bits: m.bits() });
    }
    if coins.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: m.len(),
            got: coins.len(),
        });
    }
    let mut next = sigma.bits();
    for (i, v) in m.vertices().enumerate() {
        let blocked = g.neighbors(v) & sigma.bits() != 0;
        if !blocked && coins[i] < fug.p(v) {
            next |= 1 << v;
        } else {
            next &= !(1 << v);
        }
    }
    Ok(Config::from_bits(next))
}

/// Updates the vertices of an update set one at a time, in the given order,
/// against the evolving configuration. Coins are indexed by the vertex's rank
/// in ascending order of the set, so a vertex sees the same coin regardless
/// of its position in `order`.
///
/// For independent update sets this agrees with [`step`] for every ordering.
pub fn step_sequential(
    g: &Graph,
    fug: &Fugacities,
    sigma: Config,
    order: &[usize],
    coins: &[f64],
) -> Result<Config, Error> {
    if !g.fits(sigma) || !g.is_independent(sigma) {
        return Err(Error::Infeasible { bits: sigma.bits() });
    }
    let mut m = 0u64;
    for &v in order {
        if v >= g.n() {
            return Err(Error::VertexOutOfRange { v, n: g.n() });
        }
        if m & (1 << v) != 0 {
            return Err(Error::InvalidParameter(format!(
                "vertex {v} repeated in order"
            )));
        }
        m |= 1 << v;
    }
    if coins.len() != order.len() {
        return Err(Error::DimensionMismatch {
            expected: order.len(),
            got: coins.len(),
        });
    }
    let mut cur = sigma.bits();
    for &v in order {
        let rank = (m & ((1u64 << v) - 1)).count_ones() as usize;
        let blocked = g.neighbors(v) & cur != 0;
        if !blocked && coins[rank] < fug.p(v) {
            cur |= 1 << v;
        } else {
            cur &= !(1 << v);
        }
    }
    Ok(Config::from_bits(cur))
}

/// Draws the randomness for one slot: an update set and its coins.
pub fn draw_update<R: Rng>(
    dist: &UpdateDist,
    g: &Graph,
    rng: &mut R,
) -> Result<(Config, Vec<f64>), Error> {
    let m = dist.sample_update_set(g, rng)?;
    let coins: Vec<f64> = (0..m.len()).map(|_| rng.random::<f64>()).collect();
    Ok((m, coins))
}

/// Samples a feasible configuration: vertices are visited in a shuffled
/// order and occupied with probability `p_v` when unblocked.
pub fn sample_feasible<R: Rng>(g: &Graph, fug: &Fugacities, rng: &mut R) -> Config {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.shuffle(rng);
    let mut chosen = 0u64;
    for &v in &order {
        if g.neighbors(v) & chosen == 0 && rng.random::<f64>() < fug.p(v) {
            chosen |= 1 << v;
        }
    }
    Config::from_bits(chosen)
}

/// One chain with its own seeded generator.
#[derive(Clone, Debug)]
pub struct Chain {
    pub config: Config,
    pub slot: u64,
    rng: ChaCha8Rng,
}

impl Chain {
    pub fn new(start: Config, seed: u64) -> Self {
        Chain {
            config: start,
            slot: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Advances one slot and returns the new configuration.
    pub fn advance(
        &mut self,
        g: &Graph,
        fug: &Fugacities,
        dist: &UpdateDist,
    ) -> Result<Config, Error> {
        let (m, coins) = draw_update(dist, g, &mut self.rng)?;
        self.config = step(g, fug, self.config, m, &coins)?;
        self.slot += 1;
        Ok(self.config)
    }
}

/// Options for [`run_chain`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub slots: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Collect per-configuration visit counts (errors beyond `config_cap`
    /// distinct configurations).
    pub count_configs: bool,
    pub config_cap: usize,
    /// Record the full per-slot trace of configuration bitmasks.
    pub record_trace: bool,
}

impl RunOptions {
    pub fn new(slots: u64, burn_in: u64, seed: u64) -> Self {
        RunOptions {
            slots,
            burn_in,
            seed,
            count_configs: true,
            config_cap: 1 << 20,
            record_trace: false,
        }
    }
}

/// Trajectory summary: visit counts after burn-in plus per-vertex occupancy.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub slots: u64,
    pub burn_in: u64,
    /// Number of slots that contributed to counts (`slots - burn_in`, or 0).
    pub counted: u64,
    /// Visit counts keyed by configuration bitmask, when requested.
    pub counts: Option<BTreeMap<u64, u64>>,
    /// Post-burn-in occupancy frequency per vertex.
    pub occupancy: Vec<f64>,
    pub final_config: Config,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<u64>>,
}

impl Trajectory {
    /// Normalized empirical distribution over visited configurations.
    pub fn empirical(&self) -> Option<BTreeMap<u64, f64>> {
        let counts = self.counts.as_ref()?;
        if self.counted == 0 {
            return Some(BTreeMap::new());
        }
        let total = self.counted as f64;
        Some(
            counts
                .iter()
                .map(|(&k, &c)| (k, c as f64 / total))
                .collect(),
        )
    }
}

/// Runs the dynamics from the empty configuration for `slots` slots,
/// collecting statistics strictly after the burn-in slot. Deterministic
/// given the seed.
pub fn run_chain(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    opts: &RunOptions,
) -> Result<Trajectory, Error> {
    if fug.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: fug.len(),
        });
    }
    let mut chain = Chain::new(Config::EMPTY, opts.seed);
    let mut counts: Option<BTreeMap<u64, u64>> = if opts.count_configs {
        Some(BTreeMap::new())
    } else {
        None
    };
    let mut occupancy_hits = vec![0u64; g.n()];
    let mut trace: Option<Vec<u64>> = if opts.record_trace {
        Some(Vec::new())
    } else {
        None
    };
    let mut counted = 0u64;
    for t in 1..=opts.slots {
        let config = chain.advance(g, fug, dist)?;
        if let Some(tr) = trace.as_mut() {
            tr.push(config.bits());
        }
        if t > opts.burn_in {
            counted += 1;
            for v in config.vertices() {
                occupancy_hits[v] += 1;
            }
            if let Some(map) = counts.as_mut() {
                *map.entry(config.bits()).or_insert(0) += 1;
                if map.len() > opts.config_cap {
                    return Err(Error::CapExceeded {
                        size: map.len(),
                        cap: opts.config_cap,
                    });
                }
            }
        }
    }
    let occupancy = occupancy_hits
        .iter()
        .map(|&h| {
            if counted == 0 {
                0.0
            } else {
                h as f64 / counted as f64
            }
        })
        .collect();
    Ok(Trajectory {
        slots: opts.slots,
        burn_in: opts.burn_in,
        counted,
        counts,
        occupancy,
        final_config: chain.config,
        trace,
    })
}

/// Exact one-step transition probability between feasible configurations
/// under an explicit update-set distribution.
///
/// Returns 0 when the union is infeasible or no support set contains the
/// symmetric difference; otherwise sums, over support sets `m` containing
/// `sigma (+) eta`, the product of `p_bar` over vacated vertices, `p` over
/// newly occupied vertices, `p` over kept vertices of `m`, and `p_bar` over
/// free vertices of `m` (outside the union and not adjacent to it). The
/// formula applies uniformly, including `eta = sigma`.
pub fn transition_probability(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    sigma: Config,
    eta: Config,
) -> Result<f64, Error> {
    let UpdateDist::Explicit { sets } = dist else {
        return Err(Error::NotExplicit);
    };
    if !g.fits(sigma) || !g.is_independent(sigma) {
        return Err(Error::Infeasible { bits: sigma.bits() });
    }
    if !g.fits(eta) || !g.is_independent(eta) {
        return Err(Error::Infeasible { bits: eta.bits() });
    }
    let union = sigma.union(eta);
    if !g.is_independent(union) {
        return Ok(0.0);
    }
    let delta = sigma.sym_diff(eta);
    let kept = sigma.intersection(eta);
    let union_neighbors = g.neighbors_of_set(union.bits());

    let mut prefactor = 1.0;
    for v in sigma.difference(eta).vertices() {
        prefactor *= fug.p_bar(v);
    }
    for v in eta.difference(sigma).vertices() {
        prefactor *= fug.p(v);
    }

    let mut total = 0.0;
    for &(m, q) in sets {
        if q <= 0.0 || !delta.is_subset_of(m) {
            continue;
        }
        let mut term = q;
        for v in m.intersection(kept).vertices() {
            term *= fug.p(v);
        }
        let free = m.bits() & !union.bits() & !union_neighbors;
        for v in Config::from_bits(free).vertices() {
            term *= fug.p_bar(v);
        }
        total += term;
    }
    Ok(prefactor * total)
}
