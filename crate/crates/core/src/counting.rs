//! Partition-function estimation for the hardcore model: self-reducible
//! telescoping over an elimination order, fixed-schedule annealing, and the
//! bipartite degree-condition check.
//!
//! Telescoping rests on the per-step identity
//! `mu_{G_{i-1}}(v_i) * Z(G_{i-1}, lambda) = lambda * Z(G_i, lambda)`, where
//! `G_i` removes the closed neighborhood of `v_i` from `G_{i-1}`: occupying
//! `v_i` contributes `lambda` times the partition function of the graph
//! without `N[v_i]`. Telescoped over the surviving steps,
//! `log Z(G) = sum_i (log lambda - log mu_i) + log Z(G_m)`.

use serde::{Deserialize, Serialize};

use crate::exact::enumerate_with_cap;
use crate::glauber::{estimate_marginal, McmcParams};
use crate::graph::{BipartitePartition, Graph};
use crate::par::Parallelism;
use crate::spin::{Pinning, SpinSystem};
use crate::{Error, Result};

/// How per-step occupation marginals are obtained.
#[derive(Clone, Copy, Debug)]
pub enum MarginalMode {
    Exact,
    Mcmc(McmcParams),
}

/// One elimination step of the telescoping product.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TelescopeStep {
    pub vertex: usize,
    /// True when the vertex was already removed by an earlier closed
    /// neighborhood; such steps contribute factor 1.
    pub skipped: bool,
    /// `mu_{G_{i-1}, lambda}(v_i)`, absent for skipped steps.
    pub marginal: Option<f64>,
    /// Monte Carlo standard error of the marginal, when estimated.
    pub std_error: Option<f64>,
    /// `log lambda - log marginal`, the step's contribution to `log Z`.
    pub log_z_delta: f64,
    /// Vertex count of `G_{i-1}`.
    pub graph_size_before: usize,
}

/// Full audit trail of a telescoping run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TelescopeTrace {
    pub lambda: f64,
    pub order: Vec<usize>,
    pub steps: Vec<TelescopeStep>,
    /// Vertices and edges of the residual graph `G_m`.
    pub residual_vertices: usize,
    pub residual_edges: usize,
    pub log_z_final: f64,
    pub log_z: f64,
}

/// Telescoping estimate of `log Z(G, lambda)` over an elimination order.
/// Vertices already removed by earlier neighborhoods are skipped with a
/// trace note. The residual graph is handled exactly: in closed form when
/// edgeless, by enumeration (within `cap`) otherwise.
pub fn telescoping_partition(
    g: &Graph,
    lambda: f64,
    order: &[usize],
    mode: &MarginalMode,
    cap: u64,
    parallelism: Parallelism,
) -> Result<TelescopeTrace> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParam(format!("fugacity must be > 0, got {lambda}")));
    }
    {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != order.len() {
            return Err(Error::InvalidParam("elimination order repeats a vertex".into()));
        }
        if sorted.iter().any(|&v| v >= g.n()) {
            return Err(Error::InvalidParam("elimination order names a missing vertex".into()));
        }
    }

    let mut alive = vec![true; g.n()];
    let mut steps = Vec::with_capacity(order.len());
    let mut log_z = 0.0;
    for (step_index, &v) in order.iter().enumerate() {
        let size_before = alive.iter().filter(|&&a| a).count();
        if !alive[v] {
            steps.push(TelescopeStep {
                vertex: v,
                skipped: true,
                marginal: None,
                std_error: None,
                log_z_delta: 0.0,
                graph_size_before: size_before,
            });
            continue;
        }
        let keep: Vec<usize> = (0..g.n()).filter(|&u| alive[u]).collect();
        let (sub, map) = g.induced(&keep);
        let local_v = map.binary_search(&v).expect("alive vertex is present");
        let sys = SpinSystem::hardcore(sub, lambda)?;
        let (marginal, std_error) = match mode {
            MarginalMode::Exact => {
                let space = enumerate_with_cap(&sys, cap)?;
                (space.marginal_given(&Pinning::empty(), local_v, 1)?, None)
            }
            MarginalMode::Mcmc(params) => {
                // Disjoint seeds per step keep chains independent across steps.
                let mut p = *params;
                p.seed = params
                    .seed
                    .wrapping_add((step_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let stats = estimate_marginal(&sys, None, local_v, 1, &p, parallelism)?;
                (stats.estimate, Some(stats.std_error))
            }
        };
        if !(marginal > 0.0 && marginal < 1.0) {
            return Err(Error::Numerical(format!(
                "marginal estimate {marginal} at vertex {v} is outside (0, 1)"
            )));
        }
        let log_z_delta = lambda.ln() - marginal.ln();
        log_z += log_z_delta;
        steps.push(TelescopeStep {
            vertex: v,
            skipped: false,
            marginal: Some(marginal),
            std_error,
            log_z_delta,
            graph_size_before: size_before,
        });
        alive[v] = false;
        for &u in g.neighbors(v) {
            alive[u] = false;
        }
    }

    let keep: Vec<usize> = (0..g.n()).filter(|&u| alive[u]).collect();
    let (residual, _) = g.induced(&keep);
    let log_z_final = if residual.m() == 0 {
        residual.n() as f64 * (1.0 + lambda).ln()
    } else {
        let sys = SpinSystem::hardcore(residual.clone(), lambda)?;
        enumerate_with_cap(&sys, cap)?.log_z()
    };
    log_z += log_z_final;
    Ok(TelescopeTrace {
        lambda,
        order: order.to_vec(),
        steps,
        residual_vertices: residual.n(),
        residual_edges: residual.m(),
        log_z_final,
        log_z,
    })
}

/// Degree-condition report for bipartite independent-set counting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BisReport {
    /// Max degree on the left; 0 when the left side is empty.
    pub delta_l: usize,
    /// Min degree on the right; `None` when the right side is empty, in
    /// which case the condition holds vacuously.
    pub delta_r: Option<usize>,
    /// `2^delta_l`.
    pub threshold: f64,
    pub condition_met: bool,
    pub left_degrees: Vec<(usize, usize)>,
    pub right_degrees: Vec<(usize, usize)>,
}

/// Checks `delta_R >= 2^(Delta_L)` over a bipartition.
pub fn bis_condition_check(g: &Graph, part: &BipartitePartition) -> BisReport {
    let left_degrees: Vec<(usize, usize)> = part.left.iter().map(|&v| (v, g.degree(v))).collect();
    let right_degrees: Vec<(usize, usize)> = part.right.iter().map(|&v| (v, g.degree(v))).collect();
    let delta_l = left_degrees.iter().map(|&(_, d)| d).max().unwrap_or(0);
    let delta_r = right_degrees.iter().map(|&(_, d)| d).min();
    let threshold = 2f64.powi(delta_l as i32);
    let condition_met = delta_r.map_or(true, |d| d as f64 >= threshold);
    BisReport { delta_l, delta_r, threshold, condition_met, left_degrees, right_degrees }
}

/// Telescopes over an enumeration of the left side of a bipartition. Every
/// edge touches the left, so the residual graph is edgeless and its
/// partition function is `(1 + lambda)^(residual vertices)` exactly. The
/// reduction runs whether or not the degree condition holds; the condition
/// only governs the approximation guarantee.
pub fn fptas_reduction(
    g: &Graph,
    part: &BipartitePartition,
    lambda: f64,
    mode: &MarginalMode,
    cap: u64,
    parallelism: Parallelism,
) -> Result<TelescopeTrace> {
    let mut order = part.left.clone();
    order.sort_unstable();
    let trace = telescoping_partition(g, lambda, &order, mode, cap, parallelism)?;
    debug_assert_eq!(trace.residual_edges, 0, "left orders leave an edgeless residual");
    Ok(trace)
}

/// Parameters for fixed-schedule annealing.
#[derive(Clone, Copy, Debug)]
pub struct AnnealParams {
    /// Number of ratio levels; defaults to `ceil(8 n ln(1 + lambda))`.
    pub schedule_length: Option<usize>,
    pub steps_per_level: u64,
    pub burnin: u64,
    pub chains: usize,
    pub lag: u64,
    pub seed: u64,
    /// Anchor fugacity; defaults to `min(1/(2n), 1e-3/n)` and must satisfy
    /// `lambda0 <= 1/(2n)`.
    pub lambda0: Option<f64>,
    /// Levels whose ratio estimate has a relative standard error above this
    /// are flagged.
    pub rel_se_threshold: f64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            schedule_length: None,
            steps_per_level: 20_000,
            burnin: 2_000,
            chains: 8,
            lag: 1,
            seed: 0,
            lambda0: None,
            rel_se_threshold: 0.05,
        }
    }
}

/// One annealing level: the estimated ratio `Z(lambda_to) / Z(lambda_from)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnealLevel {
    pub lambda_from: f64,
    pub lambda_to: f64,
    pub ratio: f64,
    pub rel_std_error: f64,
    pub flagged: bool,
}

/// Annealing estimate of `log Z` with per-level diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnealReport {
    pub log_z: f64,
    /// Delta-method standard error of `log_z` from the per-level errors.
    pub std_error: f64,
    pub anchor_lambda: f64,
    /// `ln(1 + n * lambda0)`, the anchor value.
    pub anchor_log_z: f64,
    /// Rigorous bound on `log Z(lambda0) - anchor_log_z`: at most
    /// `(n * lambda0)^2 / 2`.
    pub anchor_remainder_bound: f64,
    pub levels: Vec<AnnealLevel>,
}

/// Estimates one level ratio `Z(lambda_to) / Z(lambda_from)` as the Gibbs
/// mean of `(lambda_to / lambda_from)^|occupied|` under fugacity
/// `lambda_from`.
pub fn anneal_level_ratio(
    graph: &Graph,
    lambda_from: f64,
    lambda_to: f64,
    params: &McmcParams,
    parallelism: Parallelism,
) -> Result<(f64, f64)> {
    let sys = SpinSystem::hardcore(graph.clone(), lambda_from)?;
    let rho = lambda_to / lambda_from;
    let stats = crate::glauber::estimate_observable(&sys, None, params, parallelism, |cfg| {
        let occupied = cfg.spins().iter().filter(|&&s| s == 1).count() as i32;
        rho.powi(occupied)
    })?;
    Ok((stats.estimate, stats.std_error))
}

/// Fixed geometric-schedule annealing for a hardcore system. The schedule is
/// geometric in `1 + lambda`; the anchor uses `Z(lambda0) ~ 1 + n lambda0`
/// with its explicit remainder bound.
pub fn annealing_partition(
    sys: &SpinSystem,
    params: &AnnealParams,
    parallelism: Parallelism,
) -> Result<AnnealReport> {
    let lambda_target = hardcore_fugacity(sys)?;
    let graph = sys.graph();
    let n = graph.n();
    if n == 0 {
        return Err(Error::InvalidParam("annealing needs at least one vertex".into()));
    }
    let nf = n as f64;
    let lambda0 = params.lambda0.unwrap_or_else(|| (0.5 / nf).min(1e-3 / nf));
    if !(lambda0 > 0.0 && lambda0 <= 0.5 / nf) {
        return Err(Error::InvalidParam(format!(
            "anchor fugacity must lie in (0, 1/(2n)], got {lambda0}"
        )));
    }
    if lambda0 > lambda_target {
        return Err(Error::InvalidParam("anchor fugacity exceeds the target".into()));
    }
    let levels = params
        .schedule_length
        .unwrap_or_else(|| (8.0 * nf * (1.0 + lambda_target).ln()).ceil().max(1.0) as usize);

    let anchor_log_z = (1.0 + nf * lambda0).ln();
    let anchor_remainder_bound = (nf * lambda0).powi(2) / 2.0;

    // Geometric in (1 + lambda): interpolate ln(1 + lambda) linearly.
    let u0 = (1.0 + lambda0).ln();
    let u1 = (1.0 + lambda_target).ln();
    let lambda_at =
        |i: usize| -> f64 { (u0 + (u1 - u0) * i as f64 / levels as f64).exp() - 1.0 };

    let mut log_z = anchor_log_z;
    let mut variance_log = 0.0;
    let mut level_reports = Vec::with_capacity(levels);
    for i in 0..levels {
        let from = lambda_at(i);
        let to = lambda_at(i + 1);
        let mcmc = McmcParams {
            steps: params.steps_per_level,
            burnin: params.burnin,
            chains: params.chains,
            lag: params.lag,
            seed: params
                .seed
                .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        };
        let (ratio, se) = anneal_level_ratio(graph, from, to, &mcmc, parallelism)?;
        if !(ratio > 0.0) {
            return Err(Error::Numerical(format!("level {i} ratio estimate is {ratio}")));
        }
        let rel = se / ratio;
        log_z += ratio.ln();
        variance_log += rel * rel;
        level_reports.push(AnnealLevel {
            lambda_from: from,
            lambda_to: to,
            ratio,
            rel_std_error: rel,
            flagged: rel > params.rel_se_threshold,
        });
    }
    Ok(AnnealReport {
        log_z,
        std_error: variance_log.sqrt(),
        anchor_lambda: lambda0,
        anchor_log_z,
        anchor_remainder_bound,
        levels: level_reports,
    })
}

/// Extracts the fugacity of a hardcore-shaped system.
fn hardcore_fugacity(sys: &SpinSystem) -> Result<f64> {
    let is_hardcore = sys.q() == 2
        && sys.interaction(0, 0) == 1.0
        && sys.interaction(0, 1) == 1.0
        && sys.interaction(1, 1) == 0.0
        && sys.field(0) == 1.0;
    if !is_hardcore {
        return Err(Error::InvalidParam("annealing expects a hardcore system".into()));
    }
    Ok(sys.field(1))
}

/// Exact log-partition function of the hardcore model on `g`, used as an
/// oracle by callers comparing estimates.
pub fn exact_hardcore_log_z(g: &Graph, lambda: f64, cap: u64) -> Result<f64> {
    let sys = SpinSystem::hardcore(g.clone(), lambda)?;
    Ok(enumerate_with_cap(&sys, cap)?.log_z())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphFamily};

    const CAP: u64 = 1 << 22;

    #[test]
    fn telescope_p3_through_middle_vertex() {
        let p3 = generate(&GraphFamily::Path { n: 3 }, 0).unwrap();
        let trace =
            telescoping_partition(&p3, 1.0, &[1], &MarginalMode::Exact, CAP, Parallelism::Sequential)
                .unwrap();
        let mu = trace.steps[0].marginal.unwrap();
        assert!((mu - 0.2).abs() < 1e-12, "middle-vertex occupancy is 1/5");
        assert_eq!(trace.residual_vertices, 0);
        assert!((trace.log_z - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn telescope_single_vertex() {
        let g = crate::graph::Graph::new(1, Vec::new()).unwrap();
        let trace =
            telescoping_partition(&g, 2.0, &[0], &MarginalMode::Exact, CAP, Parallelism::Sequential)
                .unwrap();
        let mu = trace.steps[0].marginal.unwrap();
        assert!((mu - 2.0 / 3.0).abs() < 1e-12);
        assert!((trace.log_z - 3f64.ln()).abs() < 1e-12, "Z = 1 + lambda");
    }

    #[test]
    fn telescope_c4_full_order_with_skips() {
        let c4 = generate(&GraphFamily::Cycle { n: 4 }, 0).unwrap();
        let trace = telescoping_partition(
            &c4,
            1.0,
            &[0, 1, 2, 3],
            &MarginalMode::Exact,
            CAP,
            Parallelism::Sequential,
        )
        .unwrap();
        assert!((trace.log_z - 7f64.ln()).abs() < 1e-10, "Z(C4) = 7");
        assert!(trace.steps.iter().any(|s| s.skipped), "neighbors of step one get skipped");
    }

    #[test]
    fn per_step_identity_holds_exactly() {
        let c5 = generate(&GraphFamily::Cycle { n: 5 }, 0).unwrap();
        let lambda = 1.5;
        let trace = telescoping_partition(
            &c5,
            lambda,
            &[0, 2],
            &MarginalMode::Exact,
            CAP,
            Parallelism::Sequential,
        )
        .unwrap();
        // Replay the elimination, checking mu_i * Z(G_{i-1}) = lambda * Z(G_i).
        let mut alive = vec![true; 5];
        for step in &trace.steps {
            if step.skipped {
                continue;
            }
            let keep: Vec<usize> = (0..5).filter(|&u| alive[u]).collect();
            let (before, _) = c5.induced(&keep);
            let z_before = exact_hardcore_log_z(&before, lambda, CAP).unwrap().exp();
            alive[step.vertex] = false;
            for &u in c5.neighbors(step.vertex) {
                alive[u] = false;
            }
            let keep: Vec<usize> = (0..5).filter(|&u| alive[u]).collect();
            let z_after = if keep.is_empty() {
                1.0
            } else {
                let (after, _) = c5.induced(&keep);
                exact_hardcore_log_z(&after, lambda, CAP).unwrap().exp()
            };
            let mu = step.marginal.unwrap();
            assert!(
                (mu * z_before - lambda * z_after).abs() < 1e-10,
                "identity violated: {} vs {}",
                mu * z_before,
                lambda * z_after
            );
        }
    }

    #[test]
    fn bis_check_examples() {
        // L = {0, 1}, R = {2}, both left vertices attached to the right one.
        let g = crate::graph::Graph::new(3, vec![(0, 2), (1, 2)]).unwrap();
        let part = BipartitePartition { left: vec![0, 1], right: vec![2] };
        let report = bis_condition_check(&g, &part);
        assert_eq!((report.delta_l, report.delta_r), (1, Some(2)));
        assert!(report.condition_met, "2 >= 2^1");

        let k22 = generate(&GraphFamily::CompleteBipartite { a: 2, b: 2 }, 0).unwrap();
        let part = k22.bipartite_partition().unwrap();
        let report = bis_condition_check(&k22, &part);
        assert!(!report.condition_met, "2 < 2^2");

        let edgeless = crate::graph::Graph::new(3, Vec::new()).unwrap();
        let part = BipartitePartition { left: vec![0, 1], right: vec![2] };
        let report = bis_condition_check(&edgeless, &part);
        assert_eq!(report.delta_r, Some(0));
        assert!(!report.condition_met, "0 < 2^0 = 1");
    }

    #[test]
    fn fptas_reduction_examples() {
        let g = crate::graph::Graph::new(3, vec![(0, 2), (1, 2)]).unwrap();
        let part = BipartitePartition { left: vec![0, 1], right: vec![2] };
        let trace =
            fptas_reduction(&g, &part, 1.0, &MarginalMode::Exact, CAP, Parallelism::Sequential)
                .unwrap();
        assert!((trace.log_z - 5f64.ln()).abs() < 1e-10, "independent sets: {{}}, a, b, r, ab");

        let k22 = generate(&GraphFamily::CompleteBipartite { a: 2, b: 2 }, 0).unwrap();
        let part = k22.bipartite_partition().unwrap();
        let trace =
            fptas_reduction(&k22, &part, 1.0, &MarginalMode::Exact, CAP, Parallelism::Sequential)
                .unwrap();
        assert!((trace.log_z - 7f64.ln()).abs() < 1e-10, "Z(K22) = 7");
    }

    #[test]
    fn anneal_level_ratio_is_exactly_one_at_equal_fugacities() {
        let c4 = generate(&GraphFamily::Cycle { n: 4 }, 0).unwrap();
        let params = McmcParams { steps: 500, burnin: 10, chains: 2, lag: 1, seed: 3 };
        let (ratio, se) =
            anneal_level_ratio(&c4, 0.7, 0.7, &params, Parallelism::Sequential).unwrap();
        assert_eq!(ratio, 1.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn annealing_single_vertex() {
        let g = crate::graph::Graph::new(1, Vec::new()).unwrap();
        let sys = SpinSystem::hardcore(g, 1.0).unwrap();
        let report = annealing_partition(
            &sys,
            &AnnealParams { steps_per_level: 4_000, burnin: 200, seed: 11, ..AnnealParams::default() },
            Parallelism::Sequential,
        )
        .unwrap();
        let exact = 2f64.ln();
        assert!(
            (report.log_z - exact).abs() <= 3.0 * report.std_error + report.anchor_remainder_bound,
            "estimate {} vs exact {exact} (se {})",
            report.log_z,
            report.std_error
        );
    }

    #[test]
    fn annealing_rejects_non_hardcore_systems() {
        let g = generate(&GraphFamily::Cycle { n: 4 }, 0).unwrap();
        let sys = SpinSystem::coloring(g, 3).unwrap();
        assert!(annealing_partition(&sys, &AnnealParams::default(), Parallelism::Sequential).is_err());
    }
}
