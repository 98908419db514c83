//! Mixing-time bound calculators for the parallel dynamics under the weighted
//! Hamming metric.
//!
//! Every formula needs only the per-vertex update marginals `q_v`, not the
//! full update-set distribution, so each calculator comes in two forms: one
//! taking a marginal vector directly and one taking an [`UpdateDist`] whose
//! exact marginals are computed first. Applicability conditions are strict
//! exactly as stated (`theta > 0`, `b < 1`); on failure the report names the
//! violated condition instead of producing a bound.
//!
//! Bounds use the natural logarithm and are returned as reals; callers
//! compare `ceil(bound)` against integer mixing times.

use crate::coupling::WeightFunction;
use crate::dynamics::{Fugacities, MarginalMode, UpdateDist};
use crate::error::Error;
use crate::graph::{Config, Graph};
use serde::Serialize;

/// Which bound a report came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    CustomWeight,
    ActivityWeight,
    InverseMarginal,
    DegreeWeight,
    CubeMetric,
}

/// Result of evaluating one bound formula.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub formula: Formula,
    pub epsilon: f64,
    pub applicable: bool,
    /// Contraction margin for the weighted-Hamming family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Blocking mass `b = max_v sum of p_w over neighbors`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Peak neighborhood activity `a = max_v sum of lambda_w`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Total activity weight `gamma = sum of (1 + lambda_y)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// One-step contraction factor `beta < 1` when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Diameter ratio `D = D_max / D_min` fed to the coupling argument.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_d: Option<f64>,
    /// Mixing-time bound in slots; finite iff applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Looser closing form of the cube-metric bound, reported when
    /// `gamma <= 3n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loose_bound: Option<f64>,
    /// Per-vertex sufficient condition `lambda_v < 1/(d_v - 1)` of the
    /// degree-weight bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sufficient_condition: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_condition: Option<String>,
}

impl BoundReport {
    pub(crate) fn inapplicable(formula: Formula, epsilon: f64, why: String) -> Self {
        BoundReport {
            formula,
            epsilon,
            applicable: false,
            theta: None,
            b: None,
            a: None,
            gamma: None,
            beta: None,
            big_d: None,
            bound: None,
            loose_bound: None,
            sufficient_condition: None,
            failed_condition: Some(why),
        }
    }
}

/// A single verified inequality, as emitted by the verification sweeps.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub context: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    /// `lhs <= rhs + tol`.
    pub fn le(context: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        InequalityCheck {
            context: context.into(),
            lhs,
            rhs,
            holds: lhs <= rhs + tol,
        }
    }
}

/// Contraction margin
/// `theta = min_v { q_v f(v) - sum_{w in N_v} q_w p_w f(w) }`.
///
/// May be non-positive, in which case the weighted-Hamming bound does not
/// apply.
pub fn theta(g: &Graph, fug: &Fugacities, q: &[f64], f: &WeightFunction) -> f64 {
    (0..g.n())
        .map(|v| {
            let drain: f64 = Config::from_bits(g.neighbors(v))
                .vertices()
                .map(|w| q[w] * fug.p(w) * f.value(w))
                .sum();
            q[v] * f.value(v) - drain
        })
        .fold(f64::INFINITY, f64::min)
}

/// Path-coupling bound `(M_f / theta) ln(n xi / epsilon)` for a user-supplied
/// weight function, from per-vertex marginals.
pub fn custom_weight_bound_from_marginals(
    g: &Graph,
    fug: &Fugacities,
    q: &[f64],
    f: &WeightFunction,
    epsilon: f64,
) -> BoundReport {
    let th = theta(g, fug, q, f);
    finish_weight_bound(Formula::CustomWeight, g, th, f, epsilon, None, None)
}

pub fn custom_weight_bound(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    f: &WeightFunction,
    epsilon: f64,
) -> Result<BoundReport, Error> {
    let m = dist.update_marginals(g, MarginalMode::Exact)?;
    Ok(custom_weight_bound_from_marginals(g, fug, &m.q, f, epsilon))
}

fn finish_weight_bound(
    formula: Formula,
    g: &Graph,
    th: f64,
    f: &WeightFunction,
    epsilon: f64,
    b: Option<f64>,
    sufficient: Option<bool>,
) -> BoundReport {
    let n = g.n() as f64;
    let xi = f.xi();
    let big_m = f.max();
    if th <= 0.0 || th.is_nan() {
        let mut report =
            BoundReport::inapplicable(formula, epsilon, format!("theta = {th} is not positive"));
        report.theta = Some(th);
        report.b = b;
        report.sufficient_condition = sufficient;
        return report;
    }
    let bound = big_m / th * (n * xi / epsilon).ln();
    BoundReport {
        formula,
        epsilon,
        applicable: true,
        theta: Some(th),
        b,
        a: None,
        gamma: None,
        beta: Some(1.0 - th / big_m),
        big_d: Some(n * xi),
        bound: Some(bound),
        loose_bound: None,
        sufficient_condition: sufficient,
        failed_condition: None,
    }
}

/// Weight choice `f(v) = (1 + lambda_v) / q_v`; the margin reduces to
/// `theta = min_v { 1 + lambda_v - sum_{w in N_v} lambda_w }`.
pub fn activity_weight_bound_from_marginals(
    g: &Graph,
    fug: &Fugacities,
    q: &[f64],
    epsilon: f64,
) -> BoundReport {
    if let Some(v) = (0..g.n()).find(|&v| q[v] <= 0.0 || q[v].is_nan()) {
        return BoundReport::inapplicable(
            Formula::ActivityWeight,
            epsilon,
            format!("q_{v} = 0, weight (1 + lambda)/q undefined"),
        );
    }
    let th = (0..g.n())
        .map(|v| {
            let drain: f64 = Config::from_bits(g.neighbors(v))
                .vertices()
                .map(|w| fug.lambda(w))
                .sum();
            1.0 + fug.lambda(v) - drain
        })
        .fold(f64::INFINITY, f64::min);
    let f = WeightFunction::from_values((0..g.n()).map(|v| (1.0 + fug.lambda(v)) / q[v]).collect())
        .expect("positive weights");
    finish_weight_bound(Formula::ActivityWeight, g, th, &f, epsilon, None, None)
}

pub fn activity_weight_bound(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    epsilon: f64,
) -> Result<BoundReport, Error> {
    let m = dist.update_marginals(g, MarginalMode::Exact)?;
    Ok(activity_weight_bound_from_marginals(g, fug, &m.q, epsilon))
}

/// Weight choice `f(v) = 1 / q_v`; applicable when
/// `b = max_v sum_{w in N_v} p_w < 1`, giving
/// `ln(n xi / epsilon) / (q_min (1 - b))` with `xi = q_max / q_min`.
pub fn inverse_marginal_bound_from_marginals(
    g: &Graph,
    fug: &Fugacities,
    q: &[f64],
    epsilon: f64,
) -> BoundReport {
    let b = (0..g.n())
        .map(|v| {
            Config::from_bits(g.neighbors(v))
                .vertices()
                .map(|w| fug.p(w))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    if let Some(v) = (0..g.n()).find(|&v| q[v] <= 0.0 || q[v].is_nan()) {
        let mut report = BoundReport::inapplicable(
            Formula::InverseMarginal,
            epsilon,
            format!("q_{v} = 0, weight 1/q undefined"),
        );
        report.b = Some(b);
        return report;
    }
    if b >= 1.0 {
        let mut report = BoundReport::inapplicable(
            Formula::InverseMarginal,
            epsilon,
            format!("b = {b} is not below 1"),
        );
        report.b = Some(b);
        report.theta = Some(1.0 - b);
        return report;
    }
    let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let q_max = q.iter().copied().fold(0.0, f64::max);
    let xi = q_max / q_min;
    let n = g.n() as f64;
    BoundReport {
        formula: Formula::InverseMarginal,
        epsilon,
        applicable: true,
        theta: Some(1.0 - b),
        b: Some(b),
        a: None,
        gamma: None,
        beta: Some(1.0 - q_min * (1.0 - b)),
        big_d: Some(n * xi),
        bound: Some((n * xi / epsilon).ln() / (q_min * (1.0 - b))),
        loose_bound: None,
        sufficient_condition: None,
        failed_condition: None,
    }
}

pub fn inverse_marginal_bound(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    epsilon: f64,
) -> Result<BoundReport, Error> {
    let m = dist.update_marginals(g, MarginalMode::Exact)?;
    Ok(inverse_marginal_bound_from_marginals(g, fug, &m.q, epsilon))
}

/// Weight choice `f(v) = d_v / q_v`. Rejects graphs with isolated vertices
/// (the weight would vanish); use the inverse-marginal bound there instead.
///
/// Reports both the per-vertex sufficient condition
/// `lambda_v < 1/(d_v - 1)` (no constraint when `d_v = 1`) and the actual
/// margin `theta = min_v { d_v - sum_{w in N_v} d_w p_w }`.
pub fn degree_weight_bound_from_marginals(
    g: &Graph,
    fug: &Fugacities,
    q: &[f64],
    epsilon: f64,
) -> Result<BoundReport, Error> {
    if let Some(v) = (0..g.n()).find(|&v| g.degree(v) == 0) {
        return Err(Error::Precondition(format!(
            "vertex {v} has degree 0, the degree weight is undefined"
        )));
    }
    if let Some(v) = (0..g.n()).find(|&v| q[v] <= 0.0 || q[v].is_nan()) {
        return Ok(BoundReport::inapplicable(
            Formula::DegreeWeight,
            epsilon,
            format!("q_{v} = 0, weight d/q undefined"),
        ));
    }
    let sufficient = (0..g.n()).all(|v| {
        let d = g.degree(v);
        d == 1 || fug.lambda(v) < 1.0 / (d as f64 - 1.0)
    });
    let th = (0..g.n())
        .map(|v| {
            let drain: f64 = Config::from_bits(g.neighbors(v))
                .vertices()
                .map(|w| g.degree(w) as f64 * fug.p(w))
                .sum();
            g.degree(v) as f64 - drain
        })
        .fold(f64::INFINITY, f64::min);
    let f = WeightFunction::from_values((0..g.n()).map(|v| g.degree(v) as f64 / q[v]).collect())
        .expect("positive weights");
    Ok(finish_weight_bound(
        Formula::DegreeWeight,
        g,
        th,
        &f,
        epsilon,
        None,
        Some(sufficient),
    ))
}

pub fn degree_weight_bound(
    g: &Graph,
    fug: &Fugacities,
    dist: &UpdateDist,
    epsilon: f64,
) -> Result<BoundReport, Error> {
    let m = dist.update_marginals(g, MarginalMode::Exact)?;
    degree_weight_bound_from_marginals(g, fug, &m.q, epsilon)
}

/// Degree-based marginals `q_v = 1/(d_v + 1)`, the bounded-degree choice
/// behind the logarithmic-mixing remark.
pub fn degree_marginals(g: &Graph) -> Vec<f64> {
    (0..g.n())
        .map(|v| 1.0 / (g.degree(v) as f64 + 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;

    #[test]
    fn theta_p3_example() {
        let g = Graph::generate(&GraphKind::Path { n: 3 }).unwrap();
        let fug = Fugacities::uniform(3, 0.2).unwrap();
        let q = vec![1.0 / 3.0; 3];
        let f = WeightFunction::from_values(vec![3.0; 3]).unwrap();
        let th = theta(&g, &fug, &q, &f);
        assert!((th - 2.0 / 3.0).abs() < 1e-12, "theta {th}");
    }

    #[test]
    fn theta_isolated_vertices_positive() {
        let g = Graph::new(4).unwrap();
        let fug = Fugacities::uniform(4, 5.0).unwrap();
        let q = vec![0.25; 4];
        let f = WeightFunction::uniform(4);
        assert!((theta(&g, &fug, &q, &f) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn theta_negative_for_huge_fugacity() {
        // At the P3 center, theta = q (1 - 2p) < 0 once lambda exceeds 1.
        let g = Graph::generate(&GraphKind::Path { n: 3 }).unwrap();
        let fug = Fugacities::uniform(3, 100.0).unwrap();
        let q = vec![1.0 / 3.0; 3];
        let f = WeightFunction::uniform(3);
        assert!(theta(&g, &fug, &q, &f) < 0.0);
        let report = custom_weight_bound_from_marginals(&g, &fug, &q, &f, 0.01);
        assert!(!report.applicable);
        assert!(report.bound.is_none());
        assert!(report.failed_condition.is_some());
    }

    #[test]
    fn custom_weight_bound_p3_plugin_value() {
        let g = Graph::generate(&GraphKind::Path { n: 3 }).unwrap();
        let fug = Fugacities::uniform(3, 0.2).unwrap();
        let q = vec![1.0 / 3.0; 3];
        let f = WeightFunction::from_values(vec![3.0; 3]).unwrap();
        let report = custom_weight_bound_from_marginals(&g, &fug, &q, &f, 0.01);
        assert!(report.applicable);
        let expected = 4.5 * (300.0f64).ln();
        assert!((report.bound.unwrap() - expected).abs() < 1e-12);
        assert!((expected - 25.66).abs() < 0.1);
        assert!(report.beta.unwrap() < 1.0);
    }

    #[test]
    fn activity_weight_bound_p3_cases() {
        let g = Graph::generate(&GraphKind::Path { n: 3 }).unwrap();
        let q = vec![1.0 / 3.0; 3];
        let ok = activity_weight_bound_from_marginals(
            &g,
            &Fugacities::uniform(3, 0.4).unwrap(),
            &q,
            0.01,
        );
        assert!(ok.applicable);
        assert!((ok.theta.unwrap() - 0.6).abs() < 1e-12);
        let bad = activity_weight_bound_from_marginals(
            &g,
            &Fugacities::uniform(3, 1.2).unwrap(),
            &q,
            0.01,
        );
        assert!(!bad.applicable, "center has 2.2 - 2.4 < 0");
    }

    #[test]
    fn activity_weight_bound_single_vertex_always_applies() {
        let g = Graph::new(1).unwrap();
        let fug = Fugacities::uniform(1, 10.0).unwrap();
        let report = activity_weight_bound_from_marginals(&g, &fug, &[1.0], 0.01);
        assert!(report.applicable);
        assert!((report.theta.unwrap() - 11.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_marginal_bound_star_example() {
        let g = Graph::generate(&GraphKind::Star { n: 4 }).unwrap();
        let fug = Fugacities::uniform(4, 0.2).unwrap();
        let q = degree_marginals(&g);
        let report = inverse_marginal_bound_from_marginals(&g, &fug, &q, 0.01);
        assert!(report.applicable);
        assert!((report.b.unwrap() - 0.5).abs() < 1e-12);
        let expected = 8.0 * (800.0f64).ln();
        assert!((report.bound.unwrap() - expected).abs() < 1e-9);
        assert!((expected - 53.47).abs() < 0.1);
    }

    #[test]
    fn inverse_marginal_bound_dominates_exact_mixing_on_single_edge() {
        use crate::dynamics::UpdateDist;
        use crate::exact;
        let g = Graph::load_edge_list("2\n0 1").unwrap();
        let fug = Fugacities::uniform(2, 1.0).unwrap();
        let dist = UpdateDist::single_site_uniform(2);
        let p = exact::build_matrix(&g, &fug, &dist, 100).unwrap();
        let st = exact::product_form(&g, &fug, 100).unwrap();
        let t_mix = exact::exact_mixing_time(&p, &st.pi, 0.01, 100_000)
            .unwrap()
            .t_mix;
        let report = inverse_marginal_bound_from_marginals(&g, &fug, &[0.5, 0.5], 0.01);
        assert!(report.applicable);
        assert!(report.bound.unwrap().ceil() as u64 >= t_mix);
    }

    #[test]
    fn inverse_marginal_bound_inapplicable_when_b_reaches_one() {
        let g = Graph::generate(&GraphKind::Star { n: 4 }).unwrap();
        let fug = Fugacities::uniform(4, 1.0).unwrap();
        let q = degree_marginals(&g);
        let report = inverse_marginal_bound_from_marginals(&g, &fug, &q, 0.01);
        assert!((report.b.unwrap() - 1.5).abs() < 1e-12);
        assert!(!report.applicable);
    }

    // With q_v = 1/(d_v + 1) the inverse-marginal bound never exceeds the
    // bounded-degree closing form.
    #[test]
    fn inverse_marginal_bound_matches_degree_closed_form() {
        for (kind, lam) in [
            (GraphKind::Path { n: 8 }, 0.2),
            (GraphKind::Cycle { n: 7 }, 0.3),
            (GraphKind::Star { n: 5 }, 0.15),
            (GraphKind::Band { n: 9, width: 2 }, 0.1),
        ] {
            let g = Graph::generate(&kind).unwrap();
            let fug = Fugacities::uniform(g.n(), lam).unwrap();
            let q = degree_marginals(&g);
            let report = inverse_marginal_bound_from_marginals(&g, &fug, &q, 0.01);
            assert!(report.applicable, "{kind:?}");
            let delta = g.max_degree() as f64;
            let small_delta = g.min_degree() as f64;
            let b = report.b.unwrap();
            let remark = (delta + 1.0) / (1.0 - b)
                * ((delta + 1.0) / (small_delta + 1.0) * g.n() as f64 / 0.01).ln();
            assert!(report.bound.unwrap() <= remark + 1e-9, "{kind:?}");
        }
    }

    #[test]
    fn degree_weight_bound_p3_and_boundary() {
        let g = Graph::generate(&GraphKind::Path { n: 3 }).unwrap();
        let q = vec![1.0 / 3.0; 3];
        let ok =
            degree_weight_bound_from_marginals(&g, &Fugacities::uniform(3, 0.9).unwrap(), &q, 0.01)
                .unwrap();
        assert_eq!(ok.sufficient_condition, Some(true));
        assert!(ok.theta.unwrap() > 0.0);
        assert!(ok.applicable);
        // lambda exactly 1/(d-1) at the center fails the strict inequality.
        let boundary =
            degree_weight_bound_from_marginals(&g, &Fugacities::uniform(3, 1.0).unwrap(), &q, 0.01)
                .unwrap();
        assert_eq!(boundary.sufficient_condition, Some(false));
    }

    // Star with a constrained center and free leaves: the degree-weight
    // condition holds while the inverse-marginal bound is ruled out, because the
    // center's neighbor sum piles up all six leaf activities.
    #[test]
    fn degree_weight_bound_diverges_from_inverse_marginal_on_star() {
        let g = Graph::generate(&GraphKind::Star { n: 7 }).unwrap();
        let mut lambda = vec![0.9; 7];
        lambda[0] = 0.15;
        let fug = Fugacities::from_values(lambda).unwrap();
        let q = degree_marginals(&g);
        let c3 = degree_weight_bound_from_marginals(&g, &fug, &q, 0.01).unwrap();
        assert_eq!(
            c3.sufficient_condition,
            Some(true),
            "center 0.15 < 1/5, leaves unconditional"
        );
        assert!(c3.applicable);
        let c2 = inverse_marginal_bound_from_marginals(&g, &fug, &q, 0.01);
        let b = c2.b.unwrap();
        assert!((b - 6.0 * (0.9 / 1.9)).abs() < 1e-12);
        assert!(!c2.applicable, "b = {b} >= 1");
    }

    #[test]
    fn degree_weight_bound_rejects_isolated_vertices() {
        let g = Graph::new(3).unwrap();
        let fug = Fugacities::uniform(3, 0.5).unwrap();
        let q = vec![1.0 / 3.0; 3];
        assert!(matches!(
            degree_weight_bound_from_marginals(&g, &fug, &q, 0.01),
            Err(Error::Precondition(_))
        ));
    }
}
