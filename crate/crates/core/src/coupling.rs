//! Coupled-chain machinery: the weighted Hamming metric, the shared-randomness
//! coupling (same update set, same coins for both components), the exact
//! expected drift for adjacent pairs, and coalescence experiments.

use crate::dynamics::{self, draw_update, Fugacities, MarginalMode, UpdateDist};
use crate::error::Error;
use crate::graph::{Config, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Positive per-vertex weights `f(v)` for the weighted Hamming distance.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    f: Vec<f64>,
}

impl WeightFunction {
    pub fn from_values(f: Vec<f64>) -> Result<Self, Error> {
        if f.is_empty() {
            return Err(Error::InvalidParameter("weight vector is empty".into()));
        }
        for (v, &w) in f.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "weight at vertex {v} must be positive and finite, got {w}"
                )));
            }
        }
        Ok(WeightFunction { f })
    }

    pub fn uniform(n: usize) -> Self {
        WeightFunction { f: vec![1.0; n] }
    }

    #[inline(always)]
    pub fn value(&self, v: usize) -> f64 {
        self.f[v]
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// Minimum weight `m_f`.
    pub fn min(&self) -> f64 {
        self.f.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Maximum weight `M_f`.
    pub fn max(&self) -> f64 {
        self.f.iter().copied().fold(0.0, f64::max)
    }

    /// Spread `xi = M_f / m_f >= 1`.
    pub fn xi(&self) -> f64 {
        self.max() / self.min()
    }
}

/// Weighted Hamming distance `sum of f(v) over vertices where the
/// configurations differ`.
pub fn weighted_hamming(sigma: Config, eta: Config, f: &WeightFunction) -> f64 {
    sigma.sym_diff(eta).vertices().map(|v| f.value(v)).sum()
}

/// Two chain states evolving under shared randomness. Equality is absorbing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoupledPair {
    pub sigma: Config,
    pub eta: Config,
}

impl CoupledPair {
    pub fn new(sigma: Config, eta: Config) -> Self {
        CoupledPair { sigma, eta }
    }

    pub fn is_coalesced(&self) -> bool {
        self.sigma == self.eta
    }
}

/// Advances both components one slot with the same update set and the same
/// per-vertex coins. Each component individually follows [`dynamics::step`],
/// so the marginal law of either component is the original chain's law.
pub fn coupled_step(
    g: &Graph,
    fug: &Fugacities,
    pair: CoupledPair,
    m: Config,
    coins: &[f64],
) -> Result<CoupledPair, Error> {
    let sigma = dynamics::step(g, fug, pair.sigma, m, coins)?;
    let eta = dynamics::step(g, fug, pair.eta, m, coins)?;
    Ok(CoupledPair { sigma, eta })
}

/// Exact one-slot drift of the weighted Hamming distance for an adjacent pair
/// `(sigma, sigma + v)`, together with the path-coupling upper bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AdjacentDrift {
    /// Exact `E[delta Phi]`: `-q_v f(v)` plus `q_w p_w f(w)` over the
    /// neighbors of `v` that are unblocked in `sigma`.
    pub exact: f64,
    /// The bound with every neighbor counted, blocked or not.
    pub rhs: f64,
    /// `rhs - exact >= 0`.
    pub slack: f64,
}

/// Computes the exact expected distance change for the coupled pair differing
/// only at `v` (with `sigma_v = 0`), given per-vertex update marginals `q`.
///
/// Requires `v` not in `sigma` and no neighbor of `v` in `sigma`, so that
/// `sigma + v` is feasible.
pub fn exact_adjacent_drift(
    g: &Graph,
    fug: &Fugacities,
    q: &[f64],
    f: &WeightFunction,
    sigma: Config,
    v: usize,
) -> Result<AdjacentDrift, Error> {
    if v >= g.n() {
        return Err(Error::VertexOutOfRange { v, n: g.n() });
    }
    if q.len() != g.n() || f.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: q.len().min(f.len()),
        });
    }
    if !g.fits(sigma) || !g.is_independent(sigma) {
        return Err(Error::Infeasible { bits: sigma.bits() });
    }
    if sigma.contains(v) {
        return Err(Error::Precondition(format!("vertex {v} already occupied")));
    }
    if g.neighbors(v) & sigma.bits() != 0 {
        return Err(Error::Precondition(format!(
            "a neighbor of vertex {v} is occupied, the adjacent pair is not feasible"
        )));
    }
    let mut exact = -q[v] * f.value(v);
    let mut rhs = exact;
    for w in Config::from_bits(g.neighbors(v)).vertices() {
        let gain = q[w] * fug.p(w) * f.value(w);
        rhs += gain;
        let w_blocked = g.neighbors(w) & sigma.bits() != 0;
        if !w_blocked {
            exact += gain;
        }
    }
    Ok(AdjacentDrift {
        exact,
        rhs,
        slack: rhs - exact,
    })
}

/// Convenience wrapper computing exact marginals from the distribution first.
pub fn exact_adjacent_drift_for_dist(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    f: &WeightFunction,
    sigma: Config,
    v: usize,
) -> Result<AdjacentDrift, Error> {
    let marginals = dist.update_marginals(g, MarginalMode::Exact)?;
    exact_adjacent_drift(g, fug, &marginals.q, f, sigma, v)
}

/// Per-slot aggregate statistics of a coalescence experiment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoalescenceSlot {
    pub slot: u64,
    pub coalesced_fraction: f64,
    pub mean_phi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoalescenceReport {
    pub pairs: usize,
    pub per_slot: Vec<CoalescenceSlot>,
}

/// Runs `pairs` coupled chains from random feasible pairs for `slots` slots
/// and reports the coalesced fraction and the mean weighted Hamming distance
/// per slot. Deterministic given the seed.
pub fn coalescence_experiment(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    f: &WeightFunction,
    pairs: usize,
    slots: u64,
    seed: u64,
) -> Result<CoalescenceReport, Error> {
    if pairs == 0 {
        return Err(Error::InvalidParameter("pairs must be positive".into()));
    }
    let mut coalesced = vec![0u64; slots as usize + 1];
    let mut phi_sum = vec![0.0f64; slots as usize + 1];
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let pair_seed = master.random::<u64>();
        let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
        let sigma = dynamics::sample_feasible(g, fug, &mut rng);
        let eta = dynamics::sample_feasible(g, fug, &mut rng);
        let mut pair = CoupledPair::new(sigma, eta);
        record(&mut coalesced, &mut phi_sum, 0, pair, f);
        for t in 1..=slots {
            let (m, coins) = draw_update(dist, g, &mut rng)?;
            let next = coupled_step(g, fug, pair, m, &coins)?;
            debug_assert!(
                !pair.is_coalesced() || next.is_coalesced(),
                "coalescence must absorb"
            );
            pair = next;
            record(&mut coalesced, &mut phi_sum, t as usize, pair, f);
        }
    }
    let per_slot = (0..=slots as usize)
        .map(|t| CoalescenceSlot {
            slot: t as u64,
            coalesced_fraction: coalesced[t] as f64 / pairs as f64,
            mean_phi: phi_sum[t] / pairs as f64,
        })
        .collect();
    Ok(CoalescenceReport { pairs, per_slot })
}

fn record(
    coalesced: &mut [u64],
    phi_sum: &mut [f64],
    t: usize,
    pair: CoupledPair,
    f: &WeightFunction,
) {
    if pair.is_coalesced() {
        coalesced[t] += 1;
    }
    phi_sum[t] += weighted_hamming(pair.sigma, pair.eta, f);
}
