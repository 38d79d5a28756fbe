//! Sampling engines: single-site Glauber dynamics, the general s↔r down-up
//! walk on the subset encoding, and Monte Carlo marginal estimators.
//!
//! One Glauber step picks a uniformly random unpinned vertex and resamples
//! its spin from the exact conditional given every other spin; the
//! conditional includes the current spin, so no extra laziness is added.
//! Chains are deterministic given a seed. Independent chains own disjoint
//! counter-based RNG streams derived from `(seed, chain index)` and may run
//! concurrently; a single chain is strictly sequential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{LevelDistribution, PartialConfig, StateSpace};
use crate::par::{try_map_indexed, Parallelism};
use crate::spin::{Configuration, Pinning, SpinSystem};
use crate::{Error, Result};

/// A running chain: current configuration, step counter, and RNG state.
#[derive(Clone, Debug)]
pub struct ChainState {
    config: Configuration,
    step: u64,
    rng: ChaCha8Rng,
}

impl ChainState {
    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Initial-state strategies.
#[derive(Clone, Debug)]
pub enum Init<'a> {
    /// A caller-supplied feasible configuration.
    Explicit(Configuration),
    /// An exact sample from the enumerated Gibbs distribution.
    Warm(&'a StateSpace),
    /// Scan vertices in order, taking the first spin with positive weight
    /// against the assigned prefix and all pinned vertices.
    Greedy,
}

/// Builds a chain state on RNG stream `stream` of `seed`.
pub fn init_chain(
    sys: &SpinSystem,
    init: &Init,
    pinning: Option<&Pinning>,
    seed: u64,
    stream: u64,
) -> Result<ChainState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let config = match init {
        Init::Explicit(cfg) => {
            if cfg.len() != sys.n() {
                return Err(Error::InvalidParam("configuration length mismatch".into()));
            }
            if sys.weight(cfg).is_zero() {
                return Err(Error::Infeasible("initial configuration has zero weight".into()));
            }
            if let Some(p) = pinning {
                if !p.matches(cfg) {
                    return Err(Error::Infeasible(
                        "initial configuration contradicts the pinning".into(),
                    ));
                }
            }
            cfg.clone()
        }
        Init::Warm(space) => {
            match pinning {
                None => space.states()[space.sample(&mut rng)].clone(),
                Some(p) => {
                    // Rejection against the pinning; desk scale only.
                    let mut found = None;
                    for _ in 0..100_000 {
                        let cfg = &space.states()[space.sample(&mut rng)];
                        if p.matches(cfg) {
                            found = Some(cfg.clone());
                            break;
                        }
                    }
                    found.ok_or_else(|| {
                        Error::Infeasible("no warm-start sample consistent with the pinning".into())
                    })?
                }
            }
        }
        Init::Greedy => greedy_feasible(sys, pinning)?,
    };
    Ok(ChainState { config, step: 0, rng })
}

/// First-fit feasible configuration respecting the pinning.
pub fn greedy_feasible(sys: &SpinSystem, pinning: Option<&Pinning>) -> Result<Configuration> {
    let mut cfg = Configuration::constant(sys.n(), 0);
    let mut assigned = vec![false; sys.n()];
    if let Some(p) = pinning {
        for (v, s) in p.pairs() {
            if v >= sys.n() || s as usize >= sys.q() {
                return Err(Error::InvalidParam("pinning out of range".into()));
            }
            cfg.set(v, s);
            assigned[v] = true;
        }
    }
    for v in 0..sys.n() {
        if assigned[v] {
            continue;
        }
        let choice = (0..sys.q() as u8).find(|&s| {
            sys.field(s) > 0.0
                && sys
                    .graph()
                    .neighbors(v)
                    .iter()
                    .filter(|&&u| assigned[u])
                    .all(|&u| sys.interaction(s, cfg.spin(u)) > 0.0)
        });
        match choice {
            Some(s) => {
                cfg.set(v, s);
                assigned[v] = true;
            }
            None => {
                return Err(Error::Infeasible(format!(
                    "greedy initialization dead-ends at vertex {v}"
                )))
            }
        }
    }
    if sys.weight(&cfg).is_zero() {
        return Err(Error::Infeasible("greedy initialization reached a zero-weight state".into()));
    }
    Ok(cfg)
}

/// One Glauber update. Pinned vertices are never touched.
pub fn glauber_step(sys: &SpinSystem, st: &mut ChainState, pinning: Option<&Pinning>) {
    let v = match pinning {
        None => st.rng.gen_range(0..sys.n()),
        Some(p) => {
            let unpinned: Vec<usize> = (0..sys.n()).filter(|&v| !p.is_pinned(v)).collect();
            assert!(!unpinned.is_empty(), "no unpinned vertex to update");
            unpinned[st.rng.gen_range(0..unpinned.len())]
        }
    };
    let weights: Vec<f64> = (0..sys.q() as u8)
        .map(|s| sys.local_weight(&st.config, v, s))
        .collect();
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "conditional with zero mass from a feasible state");
    let mut x = st.rng.gen::<f64>() * total;
    let mut chosen = sys.q() - 1;
    for (s, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            chosen = s;
            if x < w {
                break;
            }
            x -= w;
        }
    }
    st.config.set(v, chosen as u8);
    st.step += 1;
    debug_assert!(sys.weight(&st.config).is_positive(), "feasibility lost");
}

/// Trajectory summary of a single chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub final_config: Configuration,
    pub steps: u64,
    /// Number of sampled time points.
    pub samples: u64,
    /// Per-vertex frequency of each spin across sampled points (n x q).
    pub spin_frequencies: Vec<Vec<f64>>,
}

/// Runs a chain and invokes `observer` after every `lag`-th post-burnin step.
pub fn run_chain_observed(
    sys: &SpinSystem,
    init: &Init,
    steps: u64,
    burnin: u64,
    lag: u64,
    seed: u64,
    stream: u64,
    pinning: Option<&Pinning>,
    mut observer: impl FnMut(u64, &Configuration),
) -> Result<ChainState> {
    if lag == 0 {
        return Err(Error::InvalidParam("lag must be >= 1".into()));
    }
    let mut st = init_chain(sys, init, pinning, seed, stream)?;
    for _ in 0..burnin {
        glauber_step(sys, &mut st, pinning);
    }
    for t in 1..=steps {
        glauber_step(sys, &mut st, pinning);
        if t % lag == 0 {
            observer(t, &st.config);
        }
    }
    Ok(st)
}

/// Runs a chain for `steps` updates, sampling statistics at every step.
/// With `steps = 0` the initial configuration is returned unchanged.
pub fn run_chain(
    sys: &SpinSystem,
    init: &Init,
    steps: u64,
    seed: u64,
    pinning: Option<&Pinning>,
) -> Result<Trajectory> {
    let mut counts = vec![vec![0u64; sys.q()]; sys.n()];
    let mut samples = 0u64;
    let st = run_chain_observed(sys, init, steps, 0, 1, seed, 0, pinning, |_, cfg| {
        samples += 1;
        for v in 0..cfg.len() {
            counts[v][cfg.spin(v) as usize] += 1;
        }
    })?;
    let spin_frequencies = counts
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|c| if samples == 0 { 0.0 } else { c as f64 / samples as f64 })
                .collect()
        })
        .collect();
    Ok(Trajectory {
        final_config: st.config,
        steps,
        samples,
        spin_frequencies,
    })
}

/// Monte Carlo parameters for multi-chain estimators.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McmcParams {
    pub steps: u64,
    pub burnin: u64,
    pub chains: usize,
    pub lag: u64,
    pub seed: u64,
}

impl Default for McmcParams {
    fn default() -> Self {
        McmcParams { steps: 100_000, burnin: 1_000, chains: 8, lag: 1, seed: 0 }
    }
}

/// A multi-chain estimate with its across-chain jackknife standard error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleStats {
    pub estimate: f64,
    /// Jackknife standard error across independent chains; NaN with a single
    /// chain.
    pub std_error: f64,
    pub chain_means: Vec<f64>,
}

/// Leave-one-out jackknife standard error of the mean of `means`.
fn jackknife_se(means: &[f64]) -> f64 {
    let c = means.len();
    if c < 2 {
        return f64::NAN;
    }
    let total: f64 = means.iter().sum();
    let loo: Vec<f64> = means.iter().map(|m| (total - m) / (c - 1) as f64).collect();
    let loo_mean = loo.iter().sum::<f64>() / c as f64;
    let ss: f64 = loo.iter().map(|x| (x - loo_mean).powi(2)).sum();
    ((c - 1) as f64 / c as f64 * ss).sqrt()
}

/// Mean of `observable` over post-burnin lagged samples, averaged across
/// independent greedy-started chains.
pub fn estimate_observable(
    sys: &SpinSystem,
    pinning: Option<&Pinning>,
    params: &McmcParams,
    mode: Parallelism,
    observable: impl Fn(&Configuration) -> f64 + Sync,
) -> Result<SampleStats> {
    if params.chains == 0 {
        return Err(Error::InvalidParam("need at least one chain".into()));
    }
    if params.steps == 0 || params.steps < params.lag {
        return Err(Error::InvalidParam("need at least one sampled step".into()));
    }
    let chain_means = try_map_indexed(mode, params.chains, |chain| {
        let mut acc = 0.0;
        let mut count = 0u64;
        run_chain_observed(
            sys,
            &Init::Greedy,
            params.steps,
            params.burnin,
            params.lag,
            params.seed,
            chain as u64 + 1,
            pinning,
            |_, cfg| {
                acc += observable(cfg);
                count += 1;
            },
        )?;
        Ok(acc / count as f64)
    })?;
    let estimate = chain_means.iter().sum::<f64>() / chain_means.len() as f64;
    let std_error = jackknife_se(&chain_means);
    Ok(SampleStats { estimate, std_error, chain_means })
}

/// Monte Carlo estimate of `mu(sigma_v = spin | pinning)`.
pub fn estimate_marginal(
    sys: &SpinSystem,
    pinning: Option<&Pinning>,
    v: usize,
    spin: u8,
    params: &McmcParams,
    mode: Parallelism,
) -> Result<SampleStats> {
    if v >= sys.n() {
        return Err(Error::InvalidParam(format!("vertex {v} out of range")));
    }
    if pinning.is_some_and(|p| p.is_pinned(v)) {
        return Err(Error::InvalidParam(format!("vertex {v} is pinned")));
    }
    estimate_observable(sys, pinning, params, mode, |cfg| {
        (cfg.spin(v) == spin) as u8 as f64
    })
}

/// A point of the s↔r down-up walk: a feasible s-subset of the pair ground
/// set, one pair per distinct vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetState {
    subset: PartialConfig,
}

impl SubsetState {
    pub fn new(subset: PartialConfig) -> SubsetState {
        SubsetState { subset }
    }

    /// The full-level encoding of a configuration: one `(v, spin)` pair per
    /// vertex.
    pub fn from_configuration(cfg: &Configuration) -> SubsetState {
        let pairs = (0..cfg.len()).map(|v| (v, cfg.spin(v))).collect();
        SubsetState {
            subset: PartialConfig::from_pairs(pairs).expect("vertices are distinct"),
        }
    }

    pub fn subset(&self) -> &PartialConfig {
        &self.subset
    }

    /// Decodes a full-level state back into a configuration.
    pub fn to_configuration(&self, n: usize) -> Result<Configuration> {
        if self.subset.len() != n {
            return Err(Error::InvalidParam("subset is not at the full level".into()));
        }
        let mut cfg = Configuration::constant(n, 0);
        for &(v, s) in self.subset.pairs() {
            cfg.set(v, s);
        }
        Ok(cfg)
    }
}

/// One s↔r down-up move: drop to a uniformly random r-subset, then re-extend
/// to level s proportionally to the level-s distribution.
pub fn down_up_step<R: Rng + ?Sized>(
    dist: &LevelDistribution,
    st: &mut SubsetState,
    r: usize,
    rng: &mut R,
) -> Result<()> {
    let s = st.subset.len();
    if dist.level() != s {
        return Err(Error::InvalidParam(format!(
            "state has level {s} but the distribution is at level {}",
            dist.level()
        )));
    }
    if r > s {
        return Err(Error::InvalidParam(format!("need r <= s, got r = {r}, s = {s}")));
    }
    // Partial Fisher-Yates over the s pair slots.
    let mut slots: Vec<usize> = (0..s).collect();
    for i in 0..r {
        let j = rng.gen_range(i..s);
        slots.swap(i, j);
    }
    let kept: Vec<(usize, u8)> = slots[..r].iter().map(|&i| st.subset.pairs()[i]).collect();
    let dropped = PartialConfig::from_pairs(kept).expect("subset of distinct vertices");

    let mut total = 0.0;
    for (item, &p) in dist.items().iter().zip(dist.probs()) {
        if item.is_superset_of(&dropped) {
            total += p;
        }
    }
    if total <= 0.0 {
        return Err(Error::Infeasible("no feasible extension of the dropped subset".into()));
    }
    let mut x = rng.gen::<f64>() * total;
    for (item, &p) in dist.items().iter().zip(dist.probs()) {
        if item.is_superset_of(&dropped) {
            if x < p {
                st.subset = item.clone();
                return Ok(());
            }
            x -= p;
        }
    }
    // Floating round-off: take the last feasible extension.
    let last = dist
        .items()
        .iter()
        .rposition(|item| item.is_superset_of(&dropped))
        .expect("total mass was positive");
    st.subset = dist.items()[last].clone();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{enumerate, level_distribution};
    use crate::graph::{generate, Graph, GraphFamily};

    fn single_vertex(lambda: f64) -> SpinSystem {
        SpinSystem::hardcore(Graph::new(1, Vec::new()).unwrap(), lambda).unwrap()
    }

    #[test]
    fn single_vertex_one_step_occupancy() {
        let sys = single_vertex(1.0);
        let trials = 200_000u64;
        let mut st = init_chain(&sys, &Init::Greedy, None, 5, 0).unwrap();
        let mut occupied = 0u64;
        for _ in 0..trials {
            st.config = Configuration::constant(1, 0);
            glauber_step(&sys, &mut st, None);
            occupied += st.config.spin(0) as u64;
        }
        let freq = occupied as f64 / trials as f64;
        let se = (0.25 / trials as f64).sqrt();
        assert!((freq - 0.5).abs() <= 4.0 * se, "freq = {freq}");
    }

    #[test]
    fn k2_one_step_transition_frequencies() {
        let g = generate(&GraphFamily::Complete { n: 2 }, 0).unwrap();
        let sys = SpinSystem::hardcore(g, 1.0).unwrap();
        let from_u = Configuration::new(vec![1, 0]);
        let trials = 200_000u64;
        let mut st = init_chain(&sys, &Init::Explicit(from_u.clone()), None, 9, 0).unwrap();
        let mut counts = [0u64; 3]; // empty, {u}, {v}
        for _ in 0..trials {
            st.config = from_u.clone();
            glauber_step(&sys, &mut st, None);
            match (st.config.spin(0), st.config.spin(1)) {
                (0, 0) => counts[0] += 1,
                (1, 0) => counts[1] += 1,
                (0, 1) => counts[2] += 1,
                _ => panic!("infeasible state reached"),
            }
        }
        let freq = |c: u64| c as f64 / trials as f64;
        let se = |p: f64| (p * (1.0 - p) / trials as f64).sqrt();
        assert!((freq(counts[0]) - 0.25).abs() <= 4.0 * se(0.25));
        assert!((freq(counts[1]) - 0.75).abs() <= 4.0 * se(0.75));
        assert_eq!(counts[2], 0, "a blocked transition must never occur");
    }

    #[test]
    fn coloring_never_reaches_zero_weight() {
        let g = generate(&GraphFamily::Complete { n: 2 }, 0).unwrap();
        let sys = SpinSystem::coloring(g, 3).unwrap();
        let init = Init::Explicit(Configuration::new(vec![0, 1]));
        run_chain_observed(&sys, &init, 10_000, 0, 1, 3, 0, None, |_, cfg| {
            assert_ne!(cfg.spin(0), cfg.spin(1));
        })
        .unwrap();
    }

    #[test]
    fn run_chain_zero_steps_and_determinism() {
        let g = generate(&GraphFamily::Cycle { n: 5 }, 0).unwrap();
        let sys = SpinSystem::hardcore(g, 1.0).unwrap();
        let init = Init::Greedy;
        let t0 = run_chain(&sys, &init, 0, 42, None).unwrap();
        assert_eq!(t0.final_config, greedy_feasible(&sys, None).unwrap());
        assert_eq!(t0.samples, 0);

        let a = run_chain(&sys, &init, 5_000, 42, None).unwrap();
        let b = run_chain(&sys, &init, 5_000, 42, None).unwrap();
        assert_eq!(a.final_config, b.final_config);
        assert_eq!(a.spin_frequencies, b.spin_frequencies);
    }

    #[test]
    fn long_chain_matches_exact_marginal_on_c5() {
        let g = generate(&GraphFamily::Cycle { n: 5 }, 0).unwrap();
        let sys = SpinSystem::hardcore(g, 1.0).unwrap();
        let space = enumerate(&sys).unwrap();
        let exact = space
            .marginal_given(&crate::spin::Pinning::empty(), 0, 1)
            .unwrap();
        assert!((exact - 3.0 / 11.0).abs() < 1e-12, "Z(C5) = 11 with 3/11 occupancy");

        let steps = 1_000_000u64;
        let traj = run_chain(&sys, &Init::Greedy, steps, 17, None).unwrap();
        let freq = traj.spin_frequencies[0][1];
        // Conservative i.i.d. standard error; correlated samples only widen it.
        let se = (exact * (1.0 - exact) / steps as f64).sqrt();
        assert!((freq - exact).abs() <= 40.0 * se, "freq = {freq}, exact = {exact}");
    }

    #[test]
    fn estimate_marginal_examples() {
        let sys = single_vertex(1.0);
        let params = McmcParams { steps: 20_000, burnin: 100, chains: 4, lag: 1, seed: 3 };
        let est = estimate_marginal(&sys, None, 0, 1, &params, Parallelism::Sequential).unwrap();
        assert!((est.estimate - 0.5).abs() <= 4.0 * est.std_error);

        let g = generate(&GraphFamily::Complete { n: 2 }, 0).unwrap();
        let sys = SpinSystem::hardcore(g, 1.0).unwrap();
        let est = estimate_marginal(&sys, None, 0, 1, &params, Parallelism::Sequential).unwrap();
        assert!((est.estimate - 1.0 / 3.0).abs() <= 4.0 * est.std_error);

        let pin = Pinning::from_pairs([(1, 1)]).unwrap();
        let est = estimate_marginal(&sys, Some(&pin), 0, 1, &params, Parallelism::Sequential).unwrap();
        assert_eq!(est.estimate, 0.0, "a hard constraint is never violated");
    }

    #[test]
    fn estimates_identical_across_modes() {
        let g = generate(&GraphFamily::Cycle { n: 5 }, 0).unwrap();
        let sys = SpinSystem::hardcore(g, 1.0).unwrap();
        let params = McmcParams { steps: 5_000, burnin: 50, chains: 4, lag: 1, seed: 8 };
        let seq = estimate_marginal(&sys, None, 0, 1, &params, Parallelism::Sequential).unwrap();
        let par = estimate_marginal(&sys, None, 0, 1, &params, Parallelism::Rayon).unwrap();
        assert_eq!(seq.chain_means, par.chain_means);
    }

    #[test]
    fn down_up_identity_when_r_equals_s() {
        let g = generate(&GraphFamily::Path { n: 3 }, 0).unwrap();
        let sys = SpinSystem::hardcore(g, 1.0).unwrap();
        let space = enumerate(&sys).unwrap();
        let dist = level_distribution(&space, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = SubsetState::new(dist.items()[0].clone());
        let mut st = start.clone();
        for _ in 0..50 {
            down_up_step(&dist, &mut st, 2, &mut rng).unwrap();
            assert_eq!(st, start);
        }
    }

    #[test]
    fn down_up_redraws_from_conditional_on_product_measure() {
        // Two isolated vertices at fugacity 2: occupancy marginal 2/3 each.
        let g = Graph::new(2, Vec::new()).unwrap();
        let sys = SpinSystem::hardcore(g, 2.0).unwrap();
        let space = enumerate(&sys).unwrap();
        let dist = level_distribution(&space, 2).unwrap();
        let start = SubsetState::from_configuration(&Configuration::new(vec![0, 0]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 100_000u64;
        let (mut v1_occupied, mut v0_occupied) = (0u64, 0u64);
        for _ in 0..trials {
            let mut st = start.clone();
            down_up_step(&dist, &mut st, 1, &mut rng).unwrap();
            if st.subset().contains((1, 1)) {
                v1_occupied += 1;
            }
            if st.subset().contains((0, 1)) {
                v0_occupied += 1;
            }
        }
        // From (0, 0): either pair is kept w.p. 1/2 and the other vertex is
        // redrawn from its marginal, so P[(v, 1)] = 1/2 * 2/3 = 1/3.
        let se = (1.0 / 3.0 * 2.0 / 3.0 / trials as f64).sqrt();
        for count in [v0_occupied, v1_occupied] {
            let freq = count as f64 / trials as f64;
            assert!((freq - 1.0 / 3.0).abs() <= 4.0 * se, "freq = {freq}");
        }
    }
}
