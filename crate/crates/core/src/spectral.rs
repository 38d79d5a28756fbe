//! Exact spectral computations: Glauber and down-up transition matrices and
//! their gaps, influence matrices, spectral-independence profiles, local
//! walks, and the exact approximate-tensorization constant.
//!
//! Reversible kernels are symmetrized as `D^{1/2} P D^{-1/2}` with
//! `D = diag(stationary)` before a full symmetric eigensolve. The influence
//! matrix is generally non-symmetric: its eigenvalues are computed by a
//! general solver, realness is asserted (imaginary parts below 1e-8), never
//! assumed. Pinning sweeps are independent tasks merged by max-reduction and
//! parallelize cleanly.

use std::collections::HashMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{
    level_distribution, site_partition, sum_site_variances, variance, FunctionTable,
    LevelDistribution, PartialConfig, StateSpace,
};
use crate::par::{map_indexed, try_map_indexed, Parallelism};
use crate::spin::{Pinning, SpinSystem};
use crate::{Caps, Error, Result};

/// A row-stochastic kernel with its stationary distribution.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub matrix: DMatrix<f64>,
    pub stationary: Vec<f64>,
}

/// Eigenvalues and gap of a reversible kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Absolute spectral gap `1 - max(|lambda_2|, |lambda_min|)`; 1 for a
    /// single-state kernel.
    pub gap: f64,
    /// `1 / gap`; infinite for reducible kernels.
    pub relaxation_time: f64,
    pub state_count: usize,
}

/// Max residual of detailed balance `pi_i P_ij = pi_j P_ji`.
pub fn reversibility_residual(kernel: &Kernel) -> f64 {
    let n = kernel.stationary.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let lhs = kernel.stationary[i] * kernel.matrix[(i, j)];
            let rhs = kernel.stationary[j] * kernel.matrix[(j, i)];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

/// Full spectrum of a reversible kernel via symmetrization.
pub fn spectral_gap(kernel: &Kernel) -> Result<SpectrumReport> {
    let n = kernel.stationary.len();
    if n == 0 {
        return Err(Error::InvalidParam("empty kernel".into()));
    }
    let residual = reversibility_residual(kernel);
    if residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "kernel is not reversible: residual {residual:.3e}"
        )));
    }
    if n == 1 {
        return Ok(SpectrumReport {
            eigenvalues: vec![1.0],
            gap: 1.0,
            relaxation_time: 1.0,
            state_count: 1,
        });
    }
    let mut sym = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] =
                (kernel.stationary[i] / kernel.stationary[j]).sqrt() * kernel.matrix[(i, j)];
        }
    }
    // Entrywise round-off can leave a ~1e-16 skew; average it away.
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());

    if (eigenvalues[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Numerical(format!(
            "leading eigenvalue {:.12} is not 1",
            eigenvalues[0]
        )));
    }
    let lambda_2 = eigenvalues[1];
    let lambda_min = *eigenvalues.last().unwrap();
    let gap = (1.0 - lambda_2.abs().max(lambda_min.abs())).clamp(0.0, 2.0);
    Ok(SpectrumReport {
        eigenvalues,
        gap,
        relaxation_time: 1.0 / gap,
        state_count: n,
    })
}

/// Exact Glauber transition matrix over the feasible states consistent with
/// the pinning. `P(sigma, sigma') = (1/m) mu(sigma'_v | sigma_{-v})` for
/// states differing at one unpinned vertex `v`, with the holding mass
/// aggregated on the diagonal; `m` counts unpinned vertices. Also returns
/// the global state indices backing the rows.
pub fn glauber_kernel(
    sys: &SpinSystem,
    space: &StateSpace,
    pinning: Option<&Pinning>,
) -> Result<(Kernel, Vec<usize>)> {
    glauber_kernel_capped(sys, space, pinning, Caps::default().matrix)
}

pub fn glauber_kernel_capped(
    sys: &SpinSystem,
    space: &StateSpace,
    pinning: Option<&Pinning>,
    matrix_cap: usize,
) -> Result<(Kernel, Vec<usize>)> {
    let unpinned: Vec<usize> = (0..sys.n())
        .filter(|&v| pinning.map_or(true, |p| !p.is_pinned(v)))
        .collect();
    if unpinned.is_empty() {
        return Err(Error::InvalidParam("every vertex is pinned".into()));
    }
    let support: Vec<usize> = (0..space.len())
        .filter(|&i| pinning.map_or(true, |p| p.matches(&space.states()[i])))
        .collect();
    if support.is_empty() {
        return Err(Error::Infeasible("pinning has no feasible state".into()));
    }
    if support.len() > matrix_cap {
        return Err(Error::CapExceeded(format!(
            "{} states exceed the matrix cap {matrix_cap}",
            support.len()
        )));
    }
    let local: HashMap<usize, usize> = support.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let d = support.len();
    let m = unpinned.len() as f64;
    let mut matrix = DMatrix::zeros(d, d);
    for (row, &gi) in support.iter().enumerate() {
        let cfg = &space.states()[gi];
        let mut buf = cfg.spins().to_vec();
        for &v in &unpinned {
            let weights: Vec<f64> = (0..sys.q() as u8)
                .map(|s| sys.local_weight(cfg, v, s))
                .collect();
            let total: f64 = weights.iter().sum();
            debug_assert!(total > 0.0);
            let old = buf[v];
            for (s, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    buf[v] = s as u8;
                    let gj = space
                        .index_of_spins(&buf)
                        .expect("positive-weight neighbor state is feasible");
                    let col = local[&gj];
                    matrix[(row, col)] += w / (total * m);
                }
            }
            buf[v] = old;
        }
    }
    let total_mass: f64 = support.iter().map(|&g| space.prob(g)).sum();
    let stationary = support.iter().map(|&g| space.prob(g) / total_mass).collect();
    Ok((Kernel { matrix, stationary }, support))
}

/// Pairwise influence matrix under a pinning: rows and columns are the
/// feasible `(vertex, spin)` pairs off the pinned set, entries are the shift
/// of the conditional marginal of the column pair when additionally
/// conditioning on the row pair. The whole same-vertex block is zero:
/// influences are defined between distinct vertices only.
#[derive(Clone, Debug)]
pub struct InfluenceMatrix {
    pub index: Vec<(usize, u8)>,
    pub matrix: DMatrix<f64>,
}

/// Joint pair statistics of the conditional distribution under one pinning.
struct PairStats {
    unpinned: Vec<usize>,
    q: usize,
    total: f64,
    marg: Vec<f64>,
    joint: Vec<f64>,
}

impl PairStats {
    fn new(unpinned: Vec<usize>, q: usize) -> PairStats {
        let d = unpinned.len() * q;
        PairStats {
            unpinned,
            q,
            total: 0.0,
            marg: vec![0.0; d],
            joint: vec![0.0; d * d],
        }
    }

    fn slot(&self, u_pos: usize, spin: u8) -> usize {
        u_pos * self.q + spin as usize
    }

    fn add(&mut self, spins: &[u8], p: f64) {
        self.total += p;
        let d = self.marg.len();
        for (a, &u) in self.unpinned.iter().enumerate() {
            let sa = self.slot(a, spins[u]);
            self.marg[sa] += p;
            for (b, &v) in self.unpinned.iter().enumerate().skip(a + 1) {
                let sb = self.slot(b, spins[v]);
                self.joint[sa * d + sb] += p;
                self.joint[sb * d + sa] += p;
            }
        }
    }

    /// Feasible `(vertex, spin)` pairs: positive conditional marginal.
    fn feasible_pairs(&self) -> Vec<(usize, usize, u8)> {
        let mut out = Vec::new();
        for (a, &u) in self.unpinned.iter().enumerate() {
            for s in 0..self.q as u8 {
                if self.marg[self.slot(a, s)] > 0.0 {
                    out.push((a, u, s));
                }
            }
        }
        out
    }

    fn influence(&self) -> InfluenceMatrix {
        let pairs = self.feasible_pairs();
        let d = self.marg.len();
        let k = pairs.len();
        let mut matrix = DMatrix::zeros(k, k);
        for (row, &(a, u, i)) in pairs.iter().enumerate() {
            let sa = self.slot(a, i);
            for (col, &(b, v, j)) in pairs.iter().enumerate() {
                if u == v {
                    continue;
                }
                let sb = self.slot(b, j);
                let conditional = self.joint[sa * d + sb] / self.marg[sa];
                let unconditional = self.marg[sb] / self.total;
                matrix[(row, col)] = conditional - unconditional;
            }
        }
        InfluenceMatrix {
            index: pairs.into_iter().map(|(_, u, s)| (u, s)).collect(),
            matrix,
        }
    }
}

fn stats_for_pinning(space: &StateSpace, pinning: &Pinning) -> Result<PairStats> {
    let unpinned: Vec<usize> = (0..space.n()).filter(|&v| !pinning.is_pinned(v)).collect();
    let mut stats = PairStats::new(unpinned, space.q());
    for (i, cfg) in space.states().iter().enumerate() {
        if pinning.matches(cfg) {
            stats.add(cfg.spins(), space.prob(i));
        }
    }
    if stats.total <= 0.0 {
        return Err(Error::Infeasible("pinning has no feasible extension".into()));
    }
    Ok(stats)
}

/// Influence matrix for one boundary condition; needs at least two unpinned
/// vertices.
pub fn influence_matrix(space: &StateSpace, pinning: &Pinning) -> Result<InfluenceMatrix> {
    if pinning.len() + 2 > space.n() {
        return Err(Error::InvalidParam(
            "influence matrix needs at least two unpinned vertices".into(),
        ));
    }
    Ok(stats_for_pinning(space, pinning)?.influence())
}

/// Largest eigenvalue of the (non-symmetric) influence matrix: maximum real
/// part, with every imaginary part asserted below 1e-8.
pub fn influence_lambda_max(influence: &InfluenceMatrix) -> Result<f64> {
    let eigenvalues = influence.matrix.clone().complex_eigenvalues();
    let mut max_real = f64::NEG_INFINITY;
    for e in eigenvalues.iter() {
        if e.im.abs() > 1e-8 {
            return Err(Error::Numerical(format!(
                "influence eigenvalue has imaginary part {:.3e}",
                e.im
            )));
        }
        max_real = max_real.max(e.re);
    }
    Ok(max_real)
}

/// A witness pinning attaining the per-size maximum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiWitness {
    pub pinned: Vec<(usize, u8)>,
    pub lambda_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SiMode {
    Exhaustive,
    /// Random feasible pinnings per size; `coverage` estimates the fraction
    /// of all feasible pinnings visited.
    Sampled { per_size: usize, coverage: f64 },
}

/// Spectral-independence profile: `etas[k]` is the maximum influence
/// eigenvalue over all pinnings of `k` vertices, for `k = 0 .. n-2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiProfile {
    pub etas: Vec<f64>,
    pub witnesses: Vec<SiWitness>,
    /// `max_k etas[k]`, clamped at 0.
    pub fitted_c: f64,
    /// `max_k etas[k] / (n - k - 1)`, clamped at 0.
    pub fitted_eta: f64,
    pub mode: SiMode,
}

fn fit_profile(etas: Vec<f64>, witnesses: Vec<SiWitness>, n: usize, mode: SiMode) -> SiProfile {
    let fitted_c = etas.iter().copied().fold(0.0f64, f64::max);
    let fitted_eta = etas
        .iter()
        .enumerate()
        .map(|(k, &e)| e / (n - k - 1) as f64)
        .fold(0.0f64, f64::max);
    SiProfile { etas, witnesses, fitted_c, fitted_eta, mode }
}

/// Exhaustive profile with default caps and parallelism.
pub fn si_profile(space: &StateSpace) -> Result<SiProfile> {
    si_profile_with(space, Parallelism::default(), Caps::default().si_exhaustive_n)
}

/// Exhaustive profile: sweeps every pinning of every size `0 ..= n-2`.
pub fn si_profile_with(space: &StateSpace, mode: Parallelism, max_n: usize) -> Result<SiProfile> {
    let n = space.n();
    if n < 2 {
        return Err(Error::InvalidParam("profiles need n >= 2".into()));
    }
    if n > max_n {
        return Err(Error::CapExceeded(format!(
            "exhaustive sweep needs n <= {max_n}, got {n}; use the sampled mode"
        )));
    }
    let mut etas = Vec::with_capacity(n - 1);
    let mut witnesses = Vec::with_capacity(n - 1);
    for k in 0..=(n - 2) {
        let lambdas: Vec<Vec<usize>> = (0..n).combinations(k).collect();
        let per_lambda = try_map_indexed(mode, lambdas.len(), |li| {
            let lambda = &lambdas[li];
            let mut best: Option<SiWitness> = None;
            for (pins, stats) in restriction_stats(space, lambda) {
                let lm = influence_lambda_max(&stats.influence())?;
                if best.as_ref().map_or(true, |w| lm > w.lambda_max) {
                    best = Some(SiWitness { pinned: pins, lambda_max: lm });
                }
            }
            Ok(best.expect("every vertex set has a feasible restriction"))
        })?;
        let best = per_lambda
            .into_iter()
            .max_by(|a, b| a.lambda_max.partial_cmp(&b.lambda_max).unwrap())
            .expect("at least one vertex set per size");
        etas.push(best.lambda_max);
        witnesses.push(best);
    }
    Ok(fit_profile(etas, witnesses, n, SiMode::Exhaustive))
}

/// Groups the feasible boundary conditions on `lambda` with their pair
/// statistics in one pass over the support.
fn restriction_stats(space: &StateSpace, lambda: &[usize]) -> Vec<(Vec<(usize, u8)>, PairStats)> {
    let unpinned: Vec<usize> = crate::exact::complement(space.n(), lambda);
    let mut by_restriction: HashMap<Vec<u8>, PairStats> = HashMap::new();
    for (i, cfg) in space.states().iter().enumerate() {
        let key: Vec<u8> = lambda.iter().map(|&v| cfg.spin(v)).collect();
        by_restriction
            .entry(key)
            .or_insert_with(|| PairStats::new(unpinned.clone(), space.q()))
            .add(cfg.spins(), space.prob(i));
    }
    let mut out: Vec<_> = by_restriction
        .into_iter()
        .map(|(key, stats)| {
            let pins: Vec<(usize, u8)> = lambda.iter().copied().zip(key).collect();
            (pins, stats)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Sampled-pinning profile for instances too large to sweep exhaustively.
/// Draws `per_size` uniform feasible pinnings per size; the reported
/// coverage is `per_size` over the estimated feasible-pinning count.
pub fn si_profile_sampled(
    space: &StateSpace,
    per_size: usize,
    seed: u64,
    mode: Parallelism,
) -> Result<SiProfile> {
    let n = space.n();
    if n < 2 {
        return Err(Error::InvalidParam("profiles need n >= 2".into()));
    }
    if per_size == 0 {
        return Err(Error::InvalidParam("per_size must be >= 1".into()));
    }
    let mut etas = Vec::with_capacity(n - 1);
    let mut witnesses = Vec::with_capacity(n - 1);
    let mut total_feasible_estimate = 0.0;
    let mut total_sampled = 0usize;
    for k in 0..=(n - 2) {
        let samples = try_map_indexed(mode, per_size, |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64) << 32);
            rng.set_stream(s as u64 + 1);
            // Uniform k-subset, then a uniform feasible restriction on it.
            let mut pool: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.gen_range(i..n);
                pool.swap(i, j);
            }
            let mut lambda = pool[..k].to_vec();
            lambda.sort_unstable();
            let stats = restriction_stats(space, &lambda);
            let (pins, chosen) = &stats[rng.gen_range(0..stats.len())];
            let lm = influence_lambda_max(&chosen.influence())?;
            Ok((SiWitness { pinned: pins.clone(), lambda_max: lm }, stats.len()))
        })?;
        let mean_feasible: f64 =
            samples.iter().map(|(_, c)| *c as f64).sum::<f64>() / per_size as f64;
        total_feasible_estimate += crate::exact::binomial_f64(n, k) * mean_feasible;
        total_sampled += per_size;
        let best = samples
            .into_iter()
            .map(|(w, _)| w)
            .max_by(|a, b| a.lambda_max.partial_cmp(&b.lambda_max).unwrap())
            .expect("per_size >= 1");
        etas.push(best.lambda_max);
        witnesses.push(best);
    }
    let coverage = (total_sampled as f64 / total_feasible_estimate).min(1.0);
    Ok(fit_profile(etas, witnesses, n, SiMode::Sampled { per_size, coverage }))
}

/// Second eigenvalue of the non-lazy local walk under a pinning, reported
/// next to the influence eigenvalue scaled by the unpinned count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalWalkReport {
    /// Second largest eigenvalue of the de-lazified 1↔2 up-down walk on the
    /// feasible `(vertex, spin)` pairs.
    pub second_eigenvalue: f64,
    /// `lambda_max(influence) / (m - 1)` with `m` unpinned vertices.
    pub influence_scaled: f64,
    /// `|second_eigenvalue - influence_scaled|`. Equality of the two routes
    /// is reported as a diagnostic, not asserted.
    pub deviation: f64,
    pub deviation_flagged: bool,
}

/// Builds the 1↔2 up-down kernel on singleton pairs, removes the laziness by
/// conditioning each row on leaving the current pair, renormalizes, and
/// eigensolves after reversible symmetrization.
pub fn local_walk_second_eigenvalue(
    space: &StateSpace,
    pinning: &Pinning,
) -> Result<LocalWalkReport> {
    if pinning.len() + 2 > space.n() {
        return Err(Error::InvalidParam(
            "the local walk needs at least two unpinned vertices".into(),
        ));
    }
    let stats = stats_for_pinning(space, pinning)?;
    let pairs = stats.feasible_pairs();
    let k = pairs.len();
    let d = stats.marg.len();
    let m = stats.unpinned.len() as f64;

    // Lazy 1<->2 up-down kernel: extend the singleton to a feasible pair
    // proportionally to the level-2 measure, then keep either element
    // uniformly. The diagonal mass is exactly 1/2.
    let mut lazy = DMatrix::zeros(k, k);
    for (row, &(a, _, i)) in pairs.iter().enumerate() {
        let sa = stats.slot(a, i);
        let row_total: f64 = pairs
            .iter()
            .map(|&(b, _, j)| stats.joint[sa * d + stats.slot(b, j)])
            .sum();
        debug_assert!(row_total > 0.0);
        for (col, &(b, _, j)) in pairs.iter().enumerate() {
            let up = stats.joint[sa * d + stats.slot(b, j)] / row_total;
            lazy[(row, col)] = 0.5 * up;
        }
        lazy[(row, row)] += 0.5;
    }
    // De-lazify: zero the diagonal and renormalize each row.
    let mut matrix = lazy;
    for row in 0..k {
        matrix[(row, row)] -= 0.5;
        let total: f64 = matrix.row(row).iter().sum();
        for col in 0..k {
            matrix[(row, col)] /= total;
        }
    }
    let stationary: Vec<f64> = pairs
        .iter()
        .map(|&(a, _, i)| stats.marg[stats.slot(a, i)] / (stats.total * m))
        .collect();
    let report = spectral_gap(&Kernel { matrix, stationary })?;
    let second_eigenvalue = report.eigenvalues[1];

    let influence_scaled = influence_lambda_max(&stats.influence())? / (m - 1.0);
    let deviation = (second_eigenvalue - influence_scaled).abs();
    Ok(LocalWalkReport {
        second_eigenvalue,
        influence_scaled,
        deviation,
        deviation_flagged: deviation > 1e-8,
    })
}

/// Exact s↔r down-up kernel on the level-s distribution of the subset
/// encoding: drop to a uniform r-subset, re-extend proportionally to the
/// level-s weights.
pub fn down_up_kernel(
    space: &StateSpace,
    s: usize,
    r: usize,
    caps: &Caps,
) -> Result<(Kernel, LevelDistribution)> {
    if r > s || s > space.n() {
        return Err(Error::InvalidParam(format!(
            "need r <= s <= n, got r = {r}, s = {s}, n = {}",
            space.n()
        )));
    }
    if space.n() > caps.down_up_n {
        return Err(Error::CapExceeded(format!(
            "down-up kernels need n <= {}, got {}",
            caps.down_up_n,
            space.n()
        )));
    }
    let dist_s = level_distribution(space, s)?;
    let dist_r = level_distribution(space, r)?;
    if dist_s.len() > caps.matrix {
        return Err(Error::CapExceeded(format!(
            "{} level-{s} states exceed the matrix cap {}",
            dist_s.len(),
            caps.matrix
        )));
    }

    // Feasible level-s extensions of each level-r subset, with weights.
    let mut extensions: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dist_r.len()];
    let mut subset_ids: Vec<Vec<usize>> = Vec::with_capacity(dist_s.len());
    for (i, item) in dist_s.items().iter().enumerate() {
        let mut ids = Vec::new();
        for sub in item.pairs().iter().copied().combinations(r) {
            let t = PartialConfig::from_pairs(sub).expect("distinct vertices");
            let ti = dist_r
                .index_of(&t)
                .expect("a subset of a feasible set is feasible");
            extensions[ti].push((i, dist_s.probs()[i]));
            ids.push(ti);
        }
        subset_ids.push(ids);
    }
    let totals: Vec<f64> = extensions
        .iter()
        .map(|list| list.iter().map(|&(_, w)| w).sum())
        .collect();

    let k = dist_s.len();
    let choose = crate::exact::binomial_f64(s, r);
    let mut matrix = DMatrix::zeros(k, k);
    for (i, ids) in subset_ids.iter().enumerate() {
        for &ti in ids {
            for &(j, w) in &extensions[ti] {
                matrix[(i, j)] += w / (totals[ti] * choose);
            }
        }
    }
    let kernel = Kernel { matrix, stationary: dist_s.probs().to_vec() };
    Ok((kernel, dist_s))
}

/// Exact approximate-tensorization constant `1 / (n * gap)`, or `None` with
/// a reachability diagnosis when the chain is reducible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorizationReport {
    pub constant: Option<f64>,
    /// Poincare gap `1 - lambda_2` of the Glauber kernel. The kernel is an
    /// average of projections, so this equals the absolute gap.
    pub gap: f64,
    pub diagnosis: Option<String>,
}

pub fn tensorization_constant(sys: &SpinSystem, space: &StateSpace) -> Result<TensorizationReport> {
    let (kernel, _) = glauber_kernel(sys, space, None)?;
    let report = spectral_gap(&kernel)?;
    let gap = if report.state_count == 1 {
        1.0
    } else {
        1.0 - report.eigenvalues[1]
    };
    if gap <= 1e-12 {
        let classes = communicating_classes(&kernel);
        return Ok(TensorizationReport {
            constant: None,
            gap,
            diagnosis: Some(format!(
                "reducible chain: single-site moves split the support into {classes} classes"
            )),
        });
    }
    Ok(TensorizationReport {
        constant: Some(1.0 / (space.n() as f64 * gap)),
        gap,
        diagnosis: None,
    })
}

fn communicating_classes(kernel: &Kernel) -> usize {
    let n = kernel.stationary.len();
    let mut seen = vec![false; n];
    let mut classes = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        classes += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                // Reversibility makes reachability symmetric.
                if !seen[j] && kernel.matrix[(i, j)] > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    classes
}

/// Independent cross-check of the tensorization constant: maximizes the
/// variance ratio `Var(f) / sum_v E[Var_v(f)]` over random functions, then
/// refines the best starts by deflated power iteration on the Glauber
/// kernel. The ratio itself is always evaluated through the enumeration-
/// based variance functionals, not through the matrix.
pub fn tensorization_rayleigh(
    sys: &SpinSystem,
    space: &StateSpace,
    random_starts: usize,
    refine_starts: usize,
    max_iters: usize,
    seed: u64,
    mode: Parallelism,
) -> Result<f64> {
    let (kernel, _) = glauber_kernel(sys, space, None)?;
    let partition = site_partition(space);
    let quotient = |values: &[f64]| -> f64 {
        let f = FunctionTable::from_values(space, values.to_vec()).expect("aligned");
        let denominator = sum_site_variances(space, &partition, &f);
        if denominator <= 0.0 {
            return 0.0;
        }
        variance(space, &f) / denominator
    };

    let starts: Vec<(f64, Vec<f64>)> = map_indexed(mode, random_starts, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let values: Vec<f64> = (0..space.len()).map(|_| rng.gen::<f64>()).collect();
        (quotient(&values), values)
    });
    let mut best = starts
        .iter()
        .map(|&(q, _)| q)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| starts[b].0.partial_cmp(&starts[a].0).unwrap());
    let refined = try_map_indexed(mode, refine_starts.min(order.len()), |rank| {
        let mut f = DVector::from_vec(starts[order[rank]].1.clone());
        let pi = DVector::from_vec(kernel.stationary.clone());
        let mut last = f64::NEG_INFINITY;
        let mut local_best = f64::NEG_INFINITY;
        for _ in 0..max_iters {
            f = &kernel.matrix * f;
            // Project out the constant eigenfunction in L2(pi) and renormalize.
            let mean = pi.dot(&f);
            f.add_scalar_mut(-mean);
            let norm = f
                .iter()
                .zip(pi.iter())
                .map(|(x, w)| w * x * x)
                .sum::<f64>()
                .sqrt();
            if norm <= 0.0 {
                break;
            }
            f /= norm;
            let q = quotient(f.as_slice());
            local_best = local_best.max(q);
            if (q - last).abs() <= 1e-13 * q.abs().max(1.0) {
                break;
            }
            last = q;
        }
        Ok(local_best)
    })?;
    for q in refined {
        best = best.max(q);
    }
    Ok(best)
}

/// `matrix^t` by binary exponentiation.
pub fn matrix_power(matrix: &DMatrix<f64>, t: u64) -> DMatrix<f64> {
    let n = matrix.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = matrix.clone();
    let mut t = t;
    while t > 0 {
        if t & 1 == 1 {
            result = &result * &base;
        }
        t >>= 1;
        if t > 0 {
            base = &base * &base;
        }
    }
    result
}

/// TV distance to stationarity after `t` steps from every starting state.
pub fn tv_from_all_states(kernel: &Kernel, t: u64) -> Vec<f64> {
    let power = matrix_power(&kernel.matrix, t);
    (0..kernel.stationary.len())
        .map(|i| {
            0.5 * power
                .row(i)
                .iter()
                .zip(&kernel.stationary)
                .map(|(p, pi)| (p - pi).abs())
                .sum::<f64>()
        })
        .collect()
}

/// Worst-start TV distance after `t` steps.
pub fn worst_tv_at(kernel: &Kernel, t: u64) -> f64 {
    tv_from_all_states(kernel, t)
        .into_iter()
        .fold(0.0, f64::max)
}

/// TV decay curve from one starting state, for `t = 0 ..= t_max`.
pub fn tv_decay_from(kernel: &Kernel, start: usize, t_max: u64) -> Vec<f64> {
    let n = kernel.stationary.len();
    let mut row = RowDVector::zeros(n);
    row[start] = 1.0;
    let mut out = Vec::with_capacity(t_max as usize + 1);
    for _ in 0..=t_max {
        let tv = 0.5
            * row
                .iter()
                .zip(&kernel.stationary)
                .map(|(p, pi)| (p - pi).abs())
                .sum::<f64>();
        out.push(tv);
        row *= &kernel.matrix;
    }
    out
}
