//! Ground-truth machinery on small graphs: the product-form stationary
//! distribution, the full transition matrix, detailed balance, total-variation
//! distance, and exact mixing time by direct iteration.
//!
//! All objects are indexed by the canonical enumeration of feasible
//! configurations (ascending bitmask order), so indices are reproducible
//! across runs.

use crate::dynamics::{transition_probability, Fugacities, UpdateDist};
use crate::error::Error;
use crate::graph::{Config, Graph};
use serde::Serialize;

/// Default cap on the number of enumerated feasible configurations.
pub const DEFAULT_OMEGA_CAP: usize = 1 << 20;

/// Default cap for dense transition-matrix construction.
pub const DEFAULT_MATRIX_CAP: usize = 4096;

/// Default iteration cap for the exact mixing-time computation.
pub const DEFAULT_ITERATION_CAP: u64 = 1_000_000;

/// The product-form distribution `pi(sigma) = prod_{v in sigma} lambda_v / Z`.
#[derive(Clone, Debug, Serialize)]
pub struct StationaryDistribution {
    pub omega: Vec<Config>,
    pub pi: Vec<f64>,
    pub z: f64,
}

/// Computes the exact stationary distribution over the enumerated feasible
/// configurations, together with the partition function `Z`.
pub fn product_form(
    g: &Graph,
    fug: &Fugacities,
    cap: usize,
) -> Result<StationaryDistribution, Error> {
    if fug.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: fug.len(),
        });
    }
    let omega = g.enumerate_independent_sets(cap)?;
    let weights: Vec<f64> = omega
        .iter()
        .map(|c| c.vertices().map(|v| fug.lambda(v)).product())
        .collect();
    let z: f64 = weights.iter().sum();
    let pi = weights.iter().map(|w| w / z).collect();
    Ok(StationaryDistribution { omega, pi, z })
}

/// Dense row-stochastic transition matrix over the canonical configuration
/// list.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    omega: Vec<Config>,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[Config] {
        &self.omega
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.omega.len() + j]
    }

    #[inline(always)]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.omega.len();
        &self.entries[i * n..(i + 1) * n]
    }

    /// Index of a configuration in the canonical ordering.
    pub fn index_of(&self, c: Config) -> Option<usize> {
        self.omega.binary_search(&c).ok()
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.size())
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Adds `delta` to one entry. Fault injection for verification drills.
    pub fn perturb_entry(&mut self, i: usize, j: usize, delta: f64) {
        let n = self.omega.len();
        self.entries[i * n + j] += delta;
    }
}

/// Builds the one-step transition matrix of the parallel dynamics.
///
/// Non-explicit distributions are first rewritten in explicit form, so every
/// entry comes from the same transition-probability formula.
pub fn build_matrix(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    cap: usize,
) -> Result<TransitionMatrix, Error> {
    let explicit = dist.to_explicit(g)?;
    let omega = g.enumerate_independent_sets(cap)?;
    let n = omega.len();
    let mut entries = vec![0.0; n * n];
    for (i, &sigma) in omega.iter().enumerate() {
        for (j, &eta) in omega.iter().enumerate() {
            entries[i * n + j] = transition_probability(g, fug, &explicit, sigma, eta)?;
        }
    }
    Ok(TransitionMatrix { omega, entries })
}

/// Detailed-balance audit: the largest `|pi_i P_ij - pi_j P_ji|` and where it
/// occurs.
#[derive(Clone, Debug, Serialize)]
pub struct DetailedBalanceReport {
    pub max_violation: f64,
    pub worst_pair: (usize, usize),
    pub tolerance: f64,
    pub passed: bool,
}

pub fn check_detailed_balance(
    p: &TransitionMatrix,
    pi: &[f64],
    tol: f64,
) -> Result<DetailedBalanceReport, Error> {
    let n = p.size();
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.len(),
        });
    }
    let mut max_violation = 0.0;
    let mut worst_pair = (0, 0);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (pi[i] * p.get(i, j) - pi[j] * p.get(j, i)).abs();
            if v > max_violation {
                max_violation = v;
                worst_pair = (i, j);
            }
        }
    }
    Ok(DetailedBalanceReport {
        max_violation,
        worst_pair,
        tolerance: tol,
        passed: max_violation <= tol,
    })
}

/// Total-variation distance `(1/2) sum |mu - nu|`. Both inputs must be
/// normalized within 1e-9.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64, Error> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    for dist in [mu, nu] {
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { total });
        }
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Infinity-norm of `pi P - pi`; zero for an exactly stationary vector.
pub fn stationary_residual(p: &TransitionMatrix, pi: &[f64]) -> f64 {
    let n = p.size();
    let mut residual = 0.0f64;
    for j in 0..n {
        let mut acc = 0.0;
        for (i, &pi_i) in pi.iter().enumerate() {
            acc += pi_i * p.get(i, j);
        }
        residual = residual.max((acc - pi[j]).abs());
    }
    residual
}

/// True when every state communicates with state 0 in both directions
/// (entries are structural: exactly zero when unreachable in one step).
pub fn is_irreducible(p: &TransitionMatrix) -> bool {
    let n = p.size();
    if n == 0 {
        return false;
    }
    let forward = reach(n, |i, j| p.get(i, j) > 0.0);
    let backward = reach(n, |i, j| p.get(j, i) > 0.0);
    forward.iter().all(|&r| r) && backward.iter().all(|&r| r)
}

fn reach(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for (j, s) in seen.iter_mut().enumerate() {
            if !*s && edge(i, j) {
                *s = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Exact worst-start mixing time and the max-over-starts TV curve.
#[derive(Clone, Debug, Serialize)]
pub struct MixingReport {
    pub epsilon: f64,
    pub t_mix: u64,
    pub worst_start: Config,
    /// `tv_curve[t]` is the max over starts of the TV distance to stationarity
    /// after `t` slots, for `t = 0..=t_mix`.
    pub tv_curve: Vec<f64>,
}

/// Computes `max_x inf { t : || P^t(x,.) - pi ||_var <= epsilon }` by dense
/// iteration from every start state.
///
/// Per-start TV distances are non-increasing in `t`, so a start is final once
/// it crosses the threshold. The worst start is the one whose own threshold
/// time is largest (smallest index on ties).
pub fn exact_mixing_time(
    p: &TransitionMatrix,
    pi: &[f64],
    epsilon: f64,
    iteration_cap: u64,
) -> Result<MixingReport, Error> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = p.size();
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.len(),
        });
    }
    if !is_irreducible(p) {
        return Err(Error::Reducible);
    }

    let tv_of =
        |row: &[f64]| -> f64 { 0.5 * row.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>() };

    // t = 0: point masses.
    let mut t_per_start: Vec<Option<u64>> = vec![None; n];
    let mut active: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut tv0_max = 0.0f64;
    for x in 0..n {
        let mut row = vec![0.0; n];
        row[x] = 1.0;
        let tv = tv_of(&row);
        tv0_max = tv0_max.max(tv);
        if tv <= epsilon {
            t_per_start[x] = Some(0);
        } else {
            active.push((x, row));
        }
    }
    let mut tv_curve = vec![tv0_max];

    let mut t = 0u64;
    let mut scratch = vec![0.0f64; n];
    while !active.is_empty() {
        if t >= iteration_cap {
            return Err(Error::IterationCap { cap: iteration_cap });
        }
        t += 1;
        let mut tv_max = 0.0f64;
        let mut still_active = Vec::with_capacity(active.len());
        for (x, mut row) in active {
            scratch.iter_mut().for_each(|e| *e = 0.0);
            for (i, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    let p_row = p.row(i);
                    for (s, &pij) in scratch.iter_mut().zip(p_row) {
                        *s += w * pij;
                    }
                }
            }
            std::mem::swap(&mut row, &mut scratch);
            let tv = tv_of(&row);
            tv_max = tv_max.max(tv);
            if tv <= epsilon {
                t_per_start[x] = Some(t);
            } else {
                still_active.push((x, row));
            }
        }
        debug_assert!(
            tv_max <= tv_curve.last().copied().unwrap_or(1.0) + 1e-12,
            "per-start TV distances must not increase"
        );
        tv_curve.push(tv_max);
        active = still_active;
    }

    let t_mix = t_per_start
        .iter()
        .map(|t| t.expect("all starts finished"))
        .max()
        .unwrap_or(0);
    let worst = t_per_start
        .iter()
        .position(|&tx| tx == Some(t_mix))
        .expect("worst start exists");
    Ok(MixingReport {
        epsilon,
        t_mix,
        worst_start: p.omega[worst],
        tv_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;

    fn single_edge() -> (Graph, Fugacities) {
        let g = Graph::load_edge_list("2\n0 1").unwrap();
        let fug = Fugacities::uniform(2, 1.0).unwrap();
        (g, fug)
    }

    #[test]
    fn product_form_single_edge_uniform() {
        let (g, fug) = single_edge();
        let st = product_form(&g, &fug, 100).unwrap();
        assert_eq!(st.omega.len(), 3);
        assert!((st.z - 3.0).abs() < 1e-15);
        for &p in &st.pi {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn product_form_single_vertex() {
        let g = Graph::new(1).unwrap();
        let fug = Fugacities::uniform(1, 3.0).unwrap();
        let st = product_form(&g, &fug, 100).unwrap();
        assert!((st.z - 4.0).abs() < 1e-15);
        assert!((st.pi[0] - 0.25).abs() < 1e-15);
        assert!((st.pi[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn product_form_triangle_heterogeneous() {
        let g = Graph::generate(&GraphKind::Cycle { n: 3 }).unwrap();
        let fug = Fugacities::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        let st = product_form(&g, &fug, 100).unwrap();
        assert!((st.z - 7.0).abs() < 1e-15);
        let expected = [1.0 / 7.0, 1.0 / 7.0, 2.0 / 7.0, 3.0 / 7.0];
        for (p, e) in st.pi.iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn matrix_single_vertex_singleton_updates() {
        let g = Graph::new(1).unwrap();
        let fug = Fugacities::uniform(1, 1.0).unwrap();
        let dist = UpdateDist::single_site_uniform(1);
        let p = build_matrix(&g, &fug, &dist, 100).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.get(i, j) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn matrix_single_edge_entry() {
        let (g, fug) = single_edge();
        let dist = UpdateDist::single_site_uniform(2);
        let p = build_matrix(&g, &fug, &dist, 100).unwrap();
        let i = p.index_of(Config::EMPTY).unwrap();
        let j = p.index_of(Config::from_vertices(&[0])).unwrap();
        assert!((p.get(i, j) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn matrix_rows_are_stochastic() {
        let g = Graph::generate(&GraphKind::ErdosRenyi {
            n: 7,
            p: 0.35,
            seed: 4,
        })
        .unwrap();
        let fug = Fugacities::from_values((0..7).map(|v| 0.3 + 0.2 * v as f64).collect()).unwrap();
        for dist in [
            UpdateDist::single_site_uniform(7),
            UpdateDist::random_greedy(vec![0.6; 7]).unwrap(),
        ] {
            let p = build_matrix(&g, &fug, &dist, 1000).unwrap();
            assert!(
                p.max_row_sum_deviation() <= 1e-12,
                "dev {}",
                p.max_row_sum_deviation()
            );
        }
    }

    #[test]
    fn detailed_balance_holds_on_p3() {
        let g = Graph::generate(&GraphKind::Path { n: 3 }).unwrap();
        let fug = Fugacities::uniform(3, 0.5).unwrap();
        let dist = UpdateDist::single_site_uniform(3);
        let p = build_matrix(&g, &fug, &dist, 100).unwrap();
        let st = product_form(&g, &fug, 100).unwrap();
        let report = check_detailed_balance(&p, &st.pi, 1e-12).unwrap();
        assert!(report.passed, "violation {}", report.max_violation);
    }

    #[test]
    fn detailed_balance_detects_injected_fault() {
        let (g, fug) = single_edge();
        let dist = UpdateDist::single_site_uniform(2);
        let mut p = build_matrix(&g, &fug, &dist, 100).unwrap();
        p.perturb_entry(0, 1, 1e-3);
        let st = product_form(&g, &fug, 100).unwrap();
        let report = check_detailed_balance(&p, &st.pi, 1e-12).unwrap();
        assert!(!report.passed);
        assert!((report.max_violation - 1e-3 * st.pi[0]).abs() < 1e-12);
    }

    #[test]
    fn reducible_chain_detected_and_balance_still_holds() {
        // Updates touch only vertex 0 of P3: vertices 1, 2 never change.
        let g = Graph::generate(&GraphKind::Path { n: 3 }).unwrap();
        let fug = Fugacities::uniform(3, 1.0).unwrap();
        let dist = UpdateDist::explicit(vec![(Config::from_vertices(&[0]), 1.0)]).unwrap();
        let p = build_matrix(&g, &fug, &dist, 100).unwrap();
        assert!(!is_irreducible(&p));
        let st = product_form(&g, &fug, 100).unwrap();
        let report = check_detailed_balance(&p, &st.pi, 1e-12).unwrap();
        assert!(
            report.passed,
            "reversible on reachable classes, violation {}",
            report.max_violation
        );
        assert!(matches!(
            exact_mixing_time(&p, &st.pi, 0.01, 1000),
            Err(Error::Reducible)
        ));
    }

    #[test]
    fn tv_distance_basics() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.75, 0.25], &[0.5, 0.5]).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            tv_distance(&[0.9, 0.0], &[0.5, 0.5]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            tv_distance(&[1.0], &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mixing_time_single_vertex_is_one() {
        let g = Graph::new(1).unwrap();
        let fug = Fugacities::uniform(1, 1.0).unwrap();
        let dist = UpdateDist::single_site_uniform(1);
        let p = build_matrix(&g, &fug, &dist, 100).unwrap();
        let st = product_form(&g, &fug, 100).unwrap();
        let report = exact_mixing_time(&p, &st.pi, 0.01, 1000).unwrap();
        assert_eq!(report.t_mix, 1);
        assert_eq!(report.tv_curve.len(), 2);
    }

    #[test]
    fn mixing_time_trivial_for_large_epsilon() {
        let (g, fug) = single_edge();
        let dist = UpdateDist::single_site_uniform(2);
        let p = build_matrix(&g, &fug, &dist, 100).unwrap();
        let st = product_form(&g, &fug, 100).unwrap();
        let report = exact_mixing_time(&p, &st.pi, 1.0, 1000).unwrap();
        assert_eq!(report.t_mix, 0);
    }

    #[test]
    fn tv_curve_is_monotone_nonincreasing() {
        let (g, fug) = single_edge();
        let dist = UpdateDist::single_site_uniform(2);
        let p = build_matrix(&g, &fug, &dist, 100).unwrap();
        let st = product_form(&g, &fug, 100).unwrap();
        let report = exact_mixing_time(&p, &st.pi, 0.01, 10_000).unwrap();
        for w in report.tv_curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(report.t_mix >= 1);
    }

    #[test]
    fn stationarity_residual_small() {
        let g = Graph::generate(&GraphKind::ErdosRenyi {
            n: 6,
            p: 0.4,
            seed: 12,
        })
        .unwrap();
        let fug = Fugacities::from_values((0..6).map(|v| 0.2 + 0.3 * v as f64).collect()).unwrap();
        let dist = UpdateDist::single_site_uniform(6);
        let p = build_matrix(&g, &fug, &dist, 1000).unwrap();
        let st = product_form(&g, &fug, 1000).unwrap();
        assert!(stationary_residual(&p, &st.pi) <= 1e-10);
    }

    #[test]
    fn matrix_cap_enforced() {
        let g = Graph::new(12).unwrap();
        let fug = Fugacities::uniform(12, 1.0).unwrap();
        let dist = UpdateDist::single_site_uniform(12);
        assert!(matches!(
            build_matrix(&g, &fug, &dist, 100),
            Err(Error::EnumerationCap { .. })
        ));
    }
}
