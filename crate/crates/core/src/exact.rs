//! Brute-force ground truth on small instances: feasible-state enumeration,
//! partition functions, conditional marginals, variance functionals, and
//! total-variation distances.
//!
//! Enumeration backtracks over vertices in index order and prunes zero-weight
//! prefixes, so colorings remain tractable even when `q^n` is large. States
//! are kept in lexicographic spin order, which fixes matrix indices across
//! the toolkit. Probability arithmetic stays in log space until final
//! normalization.

use std::collections::HashMap;

use itertools::Itertools;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::spin::{Configuration, LogWeight, Pinning, SpinSystem};
use crate::{Caps, Error, Result};

/// The enumerated support of a Gibbs distribution with exact probabilities.
#[derive(Clone, Debug)]
pub struct StateSpace {
    n: usize,
    q: usize,
    states: Vec<Configuration>,
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    log_z: f64,
    index: HashMap<Vec<u8>, usize>,
}

impl StateSpace {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Feasible configurations in lexicographic order.
    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_weights[i]
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn index_of(&self, cfg: &Configuration) -> Option<usize> {
        self.index.get(cfg.spins()).copied()
    }

    pub fn index_of_spins(&self, spins: &[u8]) -> Option<usize> {
        self.index.get(spins).copied()
    }

    /// Samples a state index exactly from the Gibbs distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if x < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    /// Exact conditional probability of `spin` at `v` given a pinning.
    pub fn marginal_given(&self, pinning: &Pinning, v: usize, spin: u8) -> Result<f64> {
        if v >= self.n {
            return Err(Error::InvalidParam(format!("vertex {v} out of range")));
        }
        if pinning.is_pinned(v) {
            return Err(Error::InvalidParam(format!("vertex {v} is pinned")));
        }
        let mut all = Vec::new();
        let mut hit = Vec::new();
        for (i, cfg) in self.states.iter().enumerate() {
            if pinning.matches(cfg) {
                all.push(self.log_weights[i]);
                if cfg.spin(v) == spin {
                    hit.push(self.log_weights[i]);
                }
            }
        }
        if all.is_empty() {
            return Err(Error::Infeasible("pinning has no feasible extension".into()));
        }
        if hit.is_empty() {
            return Ok(0.0);
        }
        Ok((logsumexp(&hit) - logsumexp(&all)).exp())
    }
}

/// Enumerates the feasible configurations with the default cap.
pub fn enumerate(sys: &SpinSystem) -> Result<StateSpace> {
    enumerate_with_cap(sys, Caps::default().enumeration)
}

/// Enumerates with an explicit trial cap. A full `q^n` search within the cap
/// is always allowed; otherwise the pruned search may spend at most `cap`
/// (vertex, spin) trials.
pub fn enumerate_with_cap(sys: &SpinSystem, cap: u64) -> Result<StateSpace> {
    let n = sys.n();
    let q = sys.q();
    let full = (q as f64).powi(n as i32);
    let budget = if full <= cap as f64 { u64::MAX } else { cap };

    let mut states = Vec::new();
    let mut log_weights = Vec::new();
    let mut cfg = Configuration::constant(n, 0);
    let mut trials = 0u64;
    enumerate_rec(sys, &mut cfg, 0, 0.0, budget, &mut trials, &mut |c, lw| {
        states.push(c.clone());
        log_weights.push(lw);
    })?;
    if states.is_empty() {
        return Err(Error::Infeasible("no feasible configuration".into()));
    }

    let log_z = logsumexp(&log_weights);
    let probs: Vec<f64> = log_weights.iter().map(|&lw| (lw - log_z).exp()).collect();
    let index = states
        .iter()
        .enumerate()
        .map(|(i, c)| (c.spins().to_vec(), i))
        .collect();
    Ok(StateSpace { n, q, states, log_weights, probs, log_z, index })
}

fn enumerate_rec(
    sys: &SpinSystem,
    cfg: &mut Configuration,
    v: usize,
    log_prefix: f64,
    budget: u64,
    trials: &mut u64,
    emit: &mut impl FnMut(&Configuration, f64),
) -> Result<()> {
    if v == sys.n() {
        emit(cfg, log_prefix);
        return Ok(());
    }
    for s in 0..sys.q() as u8 {
        *trials += 1;
        if *trials > budget {
            return Err(Error::CapExceeded(format!(
                "enumeration exceeded {budget} trials"
            )));
        }
        // Field factor plus interactions into the assigned prefix.
        let mut factor = LogWeight::from_value(sys.field(s));
        for &u in sys.graph().neighbors(v) {
            if u < v {
                factor *= LogWeight::from_value(sys.interaction(s, cfg.spin(u)));
                if factor.is_zero() {
                    break;
                }
            }
        }
        if let Some(lf) = factor.ln() {
            cfg.set(v, s);
            enumerate_rec(sys, cfg, v + 1, log_prefix + lf, budget, trials, emit)?;
        }
    }
    Ok(())
}

/// Stable log of a sum of exponentials.
pub fn logsumexp(vals: &[f64]) -> f64 {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// A real-valued function on the enumerated support, aligned to state order.
#[derive(Clone, Debug)]
pub struct FunctionTable {
    values: Vec<f64>,
}

impl FunctionTable {
    pub fn from_values(space: &StateSpace, values: Vec<f64>) -> Result<FunctionTable> {
        if values.len() != space.len() {
            return Err(Error::InvalidParam(
                "function table length must match the state space".into(),
            ));
        }
        Ok(FunctionTable { values })
    }

    pub fn from_fn(space: &StateSpace, f: impl Fn(&Configuration) -> f64) -> FunctionTable {
        FunctionTable {
            values: space.states().iter().map(f).collect(),
        }
    }

    pub fn constant(space: &StateSpace, c: f64) -> FunctionTable {
        FunctionTable { values: vec![c; space.len()] }
    }

    /// IID uniform `[0, 1)` values; the non-negative test functions used by
    /// the variance inequalities.
    pub fn random<R: Rng + ?Sized>(space: &StateSpace, rng: &mut R) -> FunctionTable {
        FunctionTable {
            values: (0..space.len()).map(|_| rng.gen::<f64>()).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Global variance of `f` under the Gibbs distribution.
pub fn variance(space: &StateSpace, f: &FunctionTable) -> f64 {
    weighted_variance(space.probs(), f.values(), &(0..space.len()).collect::<Vec<_>>())
}

/// Two-pass weighted variance over the given member indices; non-negative by
/// construction.
fn weighted_variance(probs: &[f64], values: &[f64], members: &[usize]) -> f64 {
    let w: f64 = members.iter().map(|&i| probs[i]).sum();
    if w <= 0.0 {
        return 0.0;
    }
    let mean: f64 = members.iter().map(|&i| probs[i] * values[i]).sum::<f64>() / w;
    members
        .iter()
        .map(|&i| probs[i] * (values[i] - mean).powi(2))
        .sum::<f64>()
        / w
}

/// `E[Var(f | spins on `conditioned`)]` under the Gibbs distribution, or
/// under its restriction to states matching `filter` (renormalized).
pub fn mean_conditional_variance(
    space: &StateSpace,
    f: &FunctionTable,
    filter: Option<&Pinning>,
    conditioned: &[usize],
) -> Result<f64> {
    if f.values().len() != space.len() {
        return Err(Error::InvalidParam("function table does not match space".into()));
    }
    let mut groups: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    for (i, cfg) in space.states().iter().enumerate() {
        if let Some(p) = filter {
            if !p.matches(cfg) {
                continue;
            }
        }
        let key: Vec<u8> = conditioned.iter().map(|&v| cfg.spin(v)).collect();
        groups.entry(key).or_default().push(i);
    }
    if groups.is_empty() {
        return Err(Error::Infeasible("filter has no feasible state".into()));
    }
    let total: f64 = groups
        .values()
        .flat_map(|members| members.iter())
        .map(|&i| space.prob(i))
        .sum();
    let mut acc = 0.0;
    for members in groups.values() {
        let w: f64 = members.iter().map(|&i| space.prob(i)).sum();
        acc += (w / total) * weighted_variance(space.probs(), f.values(), members);
    }
    Ok(acc)
}

pub(crate) fn complement(n: usize, s: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; n];
    for &v in s {
        inside[v] = true;
    }
    (0..n).filter(|&v| !inside[v]).collect()
}

/// `Var_S(f)`: expected conditional variance of `f` on `S`, averaging the
/// boundary over the Gibbs marginal on the complement of `S`.
pub fn var_s(space: &StateSpace, f: &FunctionTable, s: &[usize]) -> Result<f64> {
    for &v in s {
        if v >= space.n() {
            return Err(Error::InvalidParam(format!("vertex {v} out of range")));
        }
    }
    mean_conditional_variance(space, f, None, &complement(space.n(), s))
}

/// `Var_S^tau(f)`: conditional variance of `f` on `S` under the boundary
/// condition `tau`, which must pin exactly the complement of `S`.
pub fn var_s_tau(space: &StateSpace, f: &FunctionTable, s: &[usize], tau: &Pinning) -> Result<f64> {
    let expected = complement(space.n(), s);
    let pinned: Vec<usize> = tau.vertices().collect();
    if pinned != expected {
        return Err(Error::InvalidParam(
            "pinning must cover exactly the complement of S".into(),
        ));
    }
    mean_conditional_variance(space, f, Some(tau), &[])
}

/// Total variation distance between two distributions over the same ordered
/// support.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidParam(format!(
            "length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// A feasible subset of the pair ground set `V x [q]` with distinct
/// vertices: a partial configuration in the subset encoding.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartialConfig {
    pairs: Vec<(usize, u8)>,
}

impl PartialConfig {
    pub fn from_pairs(mut pairs: Vec<(usize, u8)>) -> Result<PartialConfig> {
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParam("duplicate vertex in partial configuration".into()));
        }
        Ok(PartialConfig { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, u8)] {
        &self.pairs
    }

    pub fn contains(&self, pair: (usize, u8)) -> bool {
        self.pairs.binary_search(&pair).is_ok()
    }

    pub fn is_superset_of(&self, other: &PartialConfig) -> bool {
        other.pairs.iter().all(|&p| self.contains(p))
    }

    /// The restriction of a full configuration to the vertex set `w`.
    pub fn restriction(cfg: &Configuration, w: &[usize]) -> PartialConfig {
        PartialConfig {
            pairs: w.iter().map(|&v| (v, cfg.spin(v))).collect(),
        }
    }

    pub fn to_pinning(&self) -> Pinning {
        Pinning::from_pairs(self.pairs.iter().copied()).expect("vertices are distinct")
    }
}

/// The level-`s` distribution of the subset encoding: a uniformly random
/// `s`-subset of a Gibbs-distributed full assignment. Weights are the vertex
/// marginals scaled by `1 / binom(n, s)` and sum to one.
#[derive(Clone, Debug)]
pub struct LevelDistribution {
    level: usize,
    items: Vec<PartialConfig>,
    probs: Vec<f64>,
    index: HashMap<PartialConfig, usize>,
}

impl LevelDistribution {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[PartialConfig] {
        &self.items
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, item: &PartialConfig) -> Option<usize> {
        self.index.get(item).copied()
    }
}

/// Builds the level-`s` distribution.
pub fn level_distribution(space: &StateSpace, level: usize) -> Result<LevelDistribution> {
    Ok(level_distribution_with_means(space, level, None)?.0)
}

/// Builds the level-`s` distribution and, when `f` is given, the projection
/// of `f` to that level: the conditional mean of `f` given the partial
/// configuration.
pub fn level_distribution_with_means(
    space: &StateSpace,
    level: usize,
    f: Option<&FunctionTable>,
) -> Result<(LevelDistribution, Option<Vec<f64>>)> {
    if level > space.n() {
        return Err(Error::InvalidParam(format!(
            "level {level} exceeds n = {}",
            space.n()
        )));
    }
    let mut acc: std::collections::BTreeMap<PartialConfig, (f64, f64)> =
        std::collections::BTreeMap::new();
    for w in (0..space.n()).combinations(level) {
        for (i, cfg) in space.states().iter().enumerate() {
            let key = PartialConfig::restriction(cfg, &w);
            let entry = acc.entry(key).or_insert((0.0, 0.0));
            entry.0 += space.prob(i);
            entry.1 += space.prob(i) * f.map_or(0.0, |t| t.values()[i]);
        }
    }
    let scale = binomial_f64(space.n(), level);
    let mut items = Vec::with_capacity(acc.len());
    let mut probs = Vec::with_capacity(acc.len());
    let mut means = Vec::with_capacity(acc.len());
    for (item, (w, wf)) in acc {
        items.push(item);
        probs.push(w / scale);
        means.push(wf / w);
    }
    let index = items.iter().enumerate().map(|(i, pc)| (pc.clone(), i)).collect();
    let dist = LevelDistribution { level, items, probs, index };
    Ok((dist, f.map(|_| means)))
}

/// Residual of the exact decomposition
/// `Var(f) - Var_{level n-l}(proj f) = (1 / binom(n, l)) * sum_S Var_S(f)`
/// over vertex subsets `S` of size `l`. The left side is computed through
/// the subset encoding, the right side through conditional-variance
/// grouping, so the two routes are independent.
pub fn variance_decomposition_residual(
    space: &StateSpace,
    f: &FunctionTable,
    ell: usize,
) -> Result<f64> {
    let n = space.n();
    if ell == 0 || ell > n {
        return Err(Error::InvalidParam(format!("need 1 <= l <= n, got l = {ell}")));
    }
    let (dist, means) = level_distribution_with_means(space, n - ell, Some(f))?;
    let means = means.expect("means requested");
    let mean_total: f64 = dist.probs().iter().zip(&means).map(|(p, m)| p * m).sum();
    let projected_var: f64 = dist
        .probs()
        .iter()
        .zip(&means)
        .map(|(p, m)| p * (m - mean_total).powi(2))
        .sum();
    let lhs = variance(space, f) - projected_var;

    let mut rhs = 0.0;
    for s in (0..n).combinations(ell) {
        rhs += var_s(space, f, &s)?;
    }
    rhs /= binomial_f64(n, ell);
    Ok((lhs - rhs).abs())
}

/// Precomputed per-vertex partitions of the state list by the configuration
/// off the vertex. Makes repeated evaluation of the single-site variance sum
/// linear in the state count.
#[derive(Clone, Debug)]
pub struct SitePartition {
    per_vertex: Vec<Vec<Vec<usize>>>,
}

pub fn site_partition(space: &StateSpace) -> SitePartition {
    let n = space.n();
    let mut per_vertex = Vec::with_capacity(n);
    for v in 0..n {
        let mut groups: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
        for (i, cfg) in space.states().iter().enumerate() {
            let mut key = cfg.spins().to_vec();
            key[v] = u8::MAX;
            groups.entry(key).or_default().push(i);
        }
        per_vertex.push(groups.into_values().collect());
    }
    SitePartition { per_vertex }
}

/// `sum_v E[Var_v(f)]`, the single-site conditional-variance sum of the
/// approximate-tensorization inequality.
pub fn sum_site_variances(space: &StateSpace, partition: &SitePartition, f: &FunctionTable) -> f64 {
    let mut acc = 0.0;
    for groups in &partition.per_vertex {
        for members in groups {
            let w: f64 = members.iter().map(|&i| space.prob(i)).sum();
            acc += w * weighted_variance(space.probs(), f.values(), members);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Graph, GraphFamily};
    use crate::spin::SpinSystem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hardcore_k2() -> StateSpace {
        let g = generate(&GraphFamily::Complete { n: 2 }, 0).unwrap();
        enumerate(&SpinSystem::hardcore(g, 1.0).unwrap()).unwrap()
    }

    fn hardcore_p3() -> StateSpace {
        let g = generate(&GraphFamily::Path { n: 3 }, 0).unwrap();
        enumerate(&SpinSystem::hardcore(g, 1.0).unwrap()).unwrap()
    }

    /// Independent oracle: count independent sets by scanning vertex subsets.
    fn independent_set_count(g: &Graph) -> usize {
        (0..(1usize << g.n()))
            .filter(|&mask| {
                g.edges()
                    .iter()
                    .all(|&(u, v)| (mask >> u) & 1 == 0 || (mask >> v) & 1 == 0)
            })
            .count()
    }

    #[test]
    fn enumerate_hardcore_k2() {
        let space = hardcore_k2();
        assert_eq!(space.len(), 3);
        assert!((space.log_z().exp() - 3.0).abs() < 1e-10);
        for &p in space.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        let states: Vec<&[u8]> = space.states().iter().map(|c| c.spins()).collect();
        assert_eq!(states, vec![&[0, 0][..], &[0, 1][..], &[1, 0][..]]);
    }

    #[test]
    fn enumerate_matches_subset_oracle() {
        let p3 = generate(&GraphFamily::Path { n: 3 }, 0).unwrap();
        assert_eq!(independent_set_count(&p3), 5);
        let space = hardcore_p3();
        assert_eq!(space.len(), 5);
        assert!((space.log_z().exp() - 5.0).abs() < 1e-10);

        for g in [
            generate(&GraphFamily::Cycle { n: 5 }, 0).unwrap(),
            generate(&GraphFamily::Cycle { n: 6 }, 0).unwrap(),
            generate(&GraphFamily::CompleteBipartite { a: 2, b: 2 }, 0).unwrap(),
        ] {
            let count = independent_set_count(&g);
            let space = enumerate(&SpinSystem::hardcore(g, 1.0).unwrap()).unwrap();
            assert_eq!(space.len(), count);
            assert!((space.log_z().exp() - count as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn enumerate_colorings_of_k3() {
        let k3 = generate(&GraphFamily::Complete { n: 3 }, 0).unwrap();
        let space = enumerate(&SpinSystem::coloring(k3, 3).unwrap()).unwrap();
        assert_eq!(space.len(), 6);
        assert!((space.log_z().exp() - 6.0).abs() < 1e-10);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let g = generate(&GraphFamily::Path { n: 12 }, 0).unwrap();
        let sys = SpinSystem::coloring(g, 4).unwrap();
        assert!(matches!(
            enumerate_with_cap(&sys, 1000),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn probabilities_sum_to_one() {
        for space in [hardcore_k2(), hardcore_p3()] {
            let total: f64 = space.probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_examples() {
        let space = hardcore_k2();
        let m = space.marginal_given(&Pinning::empty(), 0, 1).unwrap();
        assert!((m - 1.0 / 3.0).abs() < 1e-12);

        let pin_v = Pinning::from_pairs([(1, 1)]).unwrap();
        let m = space.marginal_given(&pin_v, 0, 1).unwrap();
        assert_eq!(m, 0.0);

        let single = Graph::new(1, Vec::new()).unwrap();
        for lambda in [0.5, 1.0, 3.5] {
            let sp = enumerate(&SpinSystem::hardcore(single.clone(), lambda).unwrap()).unwrap();
            let m = sp.marginal_given(&Pinning::empty(), 0, 1).unwrap();
            assert!((m - lambda / (1.0 + lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_sums_to_one_over_spins() {
        let space = hardcore_p3();
        let pin = Pinning::from_pairs([(0, 0)]).unwrap();
        let total: f64 = (0..2u8)
            .map(|s| space.marginal_given(&pin, 1, s).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variance_examples() {
        let space = hardcore_k2();
        let constant = FunctionTable::constant(&space, 3.25);
        assert_eq!(var_s_tau(&space, &constant, &[0], &Pinning::from_pairs([(1, 0)]).unwrap()).unwrap(), 0.0);

        let indicator = FunctionTable::from_fn(&space, |c| (c.spin(0) == 1) as u8 as f64);
        // v unoccupied leaves u Bernoulli(1/2).
        let tau0 = Pinning::from_pairs([(1, 0)]).unwrap();
        assert!((var_s_tau(&space, &indicator, &[0], &tau0).unwrap() - 0.25).abs() < 1e-12);
        // v occupied forces u unoccupied: a point mass.
        let tau1 = Pinning::from_pairs([(1, 1)]).unwrap();
        assert!(var_s_tau(&space, &indicator, &[0], &tau1).unwrap().abs() < 1e-15);
        // Weighted over the boundary: (2/3) * 1/4 + (1/3) * 0 = 1/6.
        assert!((var_s(&space, &indicator, &[0]).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        // S = V is the global variance: mean 1/3, variance 2/9.
        let all = var_s(&space, &indicator, &[0, 1]).unwrap();
        assert!((all - variance(&space, &indicator)).abs() < 1e-14);
        assert!((all - 2.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn tv_distance_examples() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn variance_decomposition_residual_examples() {
        let space = hardcore_k2();
        let constant = FunctionTable::constant(&space, 1.0);
        assert!(variance_decomposition_residual(&space, &constant, 1).unwrap() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = FunctionTable::random(&space, &mut rng);
        assert!(variance_decomposition_residual(&space, &f, 1).unwrap() < 1e-10);

        let p3 = hardcore_p3();
        let occupancy = FunctionTable::from_fn(&p3, |c| {
            c.spins().iter().map(|&s| s as f64).sum()
        });
        assert!(variance_decomposition_residual(&p3, &occupancy, 2).unwrap() < 1e-10);
    }

    #[test]
    fn site_partition_matches_direct_sum() {
        let space = hardcore_p3();
        let part = site_partition(&space);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let f = FunctionTable::random(&space, &mut rng);
            let fast = sum_site_variances(&space, &part, &f);
            let slow: f64 = (0..space.n())
                .map(|v| var_s(&space, &f, &[v]).unwrap())
                .sum();
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn level_distribution_is_normalized() {
        let space = hardcore_p3();
        for level in 0..=3 {
            let dist = level_distribution(&space, level).unwrap();
            let total: f64 = dist.probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "level {level}");
        }
        // Level n reproduces the state probabilities in the same order.
        let dist = level_distribution(&space, 3).unwrap();
        assert_eq!(dist.len(), space.len());
        for (i, item) in dist.items().iter().enumerate() {
            let spins: Vec<u8> = item.pairs().iter().map(|&(_, s)| s).collect();
            assert_eq!(&spins, space.states()[i].spins());
            assert!((dist.probs()[i] - space.prob(i)).abs() < 1e-12);
        }
    }
}
