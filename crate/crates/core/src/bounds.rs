//! Closed-form bounds, constants, and thresholds as pure evaluable formulas.
//!
//! Conventions: `0^0 = 1` and empty products are 1 (needed at `C = 0`);
//! `ceil(2C)` carries an epsilon guard so `C = 0.5` yields 1 rather than 2
//! from floating noise; logarithms are natural throughout. Two universal
//! constants in the literature statements are unspecified; they are pinned
//! to the nominal value 1 and labeled as such in the outputs, and no test
//! asserts them against exact quantities.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `ceil(2C)` with an epsilon guard against floating noise at half-integers.
pub fn ceil_2c(c: f64) -> u32 {
    assert!(c >= 0.0);
    (2.0 * c - 1e-12).ceil().max(0.0) as u32
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidParam(format!("eta must be in [0, 1), got {eta}")));
    }
    Ok(())
}

fn check_c(c: f64) -> Result<()> {
    if !(c >= 0.0) {
        return Err(Error::InvalidParam(format!("C must be >= 0, got {c}")));
    }
    Ok(())
}

/// Product-form lower bound on the spectral gap of the full-level down-up
/// walk (equivalently Glauber dynamics) from an exact spectral-independence
/// profile `eta_0 .. eta_{n-2}`:
/// `(1/n) * prod_i (1 - eta_i / (n - i - 1))`.
///
/// Factors may reach zero (frozen directions); negative factors are a domain
/// error.
pub fn alo_gap_bound(etas: &[f64]) -> Result<f64> {
    let n = etas.len() + 1;
    let mut product = 1.0;
    for (i, &eta) in etas.iter().enumerate() {
        let denom = (n - i - 1) as f64;
        let factor = 1.0 - eta / denom;
        if factor < 0.0 {
            return Err(Error::InvalidParam(format!(
                "eta_{i} = {eta} exceeds n - i - 1 = {denom}"
            )));
        }
        product *= factor;
    }
    Ok(product / n as f64)
}

/// The `(C, eta)` form of the same bound:
/// `(1 - eta)^(2 + 2C) / n^(2C) * (1/n)`.
pub fn alo_gap_bound_ch(n: usize, c: f64, eta: f64) -> Result<f64> {
    check_c(c)?;
    check_eta(eta)?;
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    let nf = n as f64;
    Ok((1.0 - eta).powf(2.0 + 2.0 * c) / nf.powf(2.0 * c) / nf)
}

/// The headline gap bound with its degree-based denominator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MainGapBound {
    /// `(1 - eta)^(1 + 2C) / (25 * Delta * ceil(2C))^(5 * ceil(2C)) / n`,
    /// scaled by the nominal constant.
    pub value: f64,
    /// Whether `50 * ceil(2C) * Delta <= n` holds.
    pub precondition_met: bool,
    /// The unspecified universal constant, pinned nominally to 1. Reported,
    /// never asserted.
    pub nominal_constant: f64,
}

/// Gap lower bound `c * (1-eta)^(1+2C) / (25 Delta ceil(2C))^(5 ceil(2C)) / n`
/// with precondition `50 * ceil(2C) * Delta <= n`.
pub fn main_gap_bound(n: usize, max_degree: usize, c: f64, eta: f64) -> Result<MainGapBound> {
    check_c(c)?;
    check_eta(eta)?;
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    let m = ceil_2c(c);
    let base = 25.0 * max_degree as f64 * m as f64;
    // 0^0 = 1 when ceil(2C) = 0.
    let denom = if m == 0 { 1.0 } else { base.powi(5 * m as i32) };
    let value = (1.0 - eta).powf(1.0 + 2.0 * c) / denom / n as f64;
    let precondition_met = 50 * m as usize * max_degree <= n;
    Ok(MainGapBound { value, precondition_met, nominal_constant: 1.0 })
}

/// `kappa_{r,s}` lower bound on the spectral gap of the `s <-> r` down-up
/// walk for a `(C, eta)`-spectrally independent distribution on `n`-subsets:
/// `kappa = (sum_{k=r}^{s-1} a_0..a_{k-1}) / (sum_{k=0}^{s-1} a_0..a_{k-1})`
/// with `a_i = (1 - min(eta, C/(n-i-1))) / (1 + min(eta, C/(n-i-1)))`.
pub fn kappa_rs(n: usize, r: usize, s: usize, c: f64, eta: f64) -> Result<f64> {
    check_c(c)?;
    check_eta(eta)?;
    if r > s || s > n {
        return Err(Error::InvalidParam(format!(
            "need 0 <= r <= s <= n, got r = {r}, s = {s}, n = {n}"
        )));
    }
    if r == s {
        return Ok(0.0);
    }
    // prefix[k] = a_0 * ... * a_{k-1}, with the empty product equal to 1.
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut prefix = 1.0;
    for k in 0..s {
        if k >= r {
            numerator += prefix;
        }
        denominator += prefix;
        let zeta = eta.min(c / (n - k - 1) as f64);
        prefix *= (1.0 - zeta) / (1.0 + zeta);
    }
    Ok(numerator / denominator)
}

/// Exact-form constant for `l`-uniform block factorization of variance:
/// `(l/n) / kappa_{n-l, n}`.
pub fn block_factorization_constant(n: usize, ell: usize, c: f64, eta: f64) -> Result<f64> {
    if ell == 0 || ell > n {
        return Err(Error::InvalidParam(format!("need 1 <= l <= n, got l = {ell}")));
    }
    let kappa = kappa_rs(n, n - ell, n, c, eta)?;
    Ok((ell as f64 / n as f64) / kappa)
}

/// Simple closed-form block-factorization bound `(2/theta)^(ceil(2C) + 1)`,
/// valid when `theta * n >= 4 * ceil(2C)`.
pub fn bf_simple_bound(theta: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParam(format!("theta must be in (0, 1], got {theta}")));
    }
    Ok((2.0 / theta).powi(ceil_2c(c) as i32 + 1))
}

/// Both block-factorization forms side by side.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BlockFactorization {
    pub exact: f64,
    /// `None` when the simple bound's precondition `theta n >= 4 ceil(2C)`
    /// fails; the exact form still applies.
    pub simple: Option<f64>,
    pub simple_precondition_met: bool,
}

/// Evaluates the exact block-factorization constant and, when its
/// precondition holds, the simple bound at `theta = l / n`.
pub fn block_factorization(n: usize, ell: usize, c: f64, eta: f64) -> Result<BlockFactorization> {
    let exact = block_factorization_constant(n, ell, c, eta)?;
    let theta = ell as f64 / n as f64;
    let precondition = theta * n as f64 >= 4.0 * ceil_2c(c) as f64;
    let simple = if precondition { Some(bf_simple_bound(theta, c)?) } else { None };
    Ok(BlockFactorization { exact, simple, simple_precondition_met: precondition })
}

/// The explicit intermediate constant of the block-to-single-site
/// comparison: `C_l / (1-eta)^(1+2C) * sum_{k=1}^{l} k^(2C) (2 e Delta theta)^(k-1)`,
/// valid for `theta <= 1/(4 e Delta)`.
pub fn at_chain_bound(
    c_ell: f64,
    c: f64,
    eta: f64,
    max_degree: usize,
    theta: f64,
    ell: usize,
) -> Result<f64> {
    check_c(c)?;
    check_eta(eta)?;
    if max_degree == 0 {
        return Err(Error::InvalidParam("max degree must be >= 1".into()));
    }
    let limit = 1.0 / (4.0 * std::f64::consts::E * max_degree as f64);
    if theta > limit {
        return Err(Error::InvalidParam(format!(
            "theta = {theta} exceeds 1/(4 e Delta) = {limit}"
        )));
    }
    let ratio = 2.0 * std::f64::consts::E * max_degree as f64 * theta;
    let sum: f64 = (1..=ell)
        .map(|k| (k as f64).powf(2.0 * c) * ratio.powi(k as i32 - 1))
        .sum();
    Ok(c_ell / (1.0 - eta).powf(1.0 + 2.0 * c) * sum)
}

/// Tail bound on the component of `v` in a uniformly random subset of size
/// `ceil(theta n)`: `P[|S_v| = k] <= (l/n) * (2 e Delta theta)^(k-1)`.
/// The bound may exceed 1 and is reported as-is.
pub fn component_tail_bound(n: usize, max_degree: usize, theta: f64, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    let ell = (theta * n as f64).ceil();
    let ratio = 2.0 * std::f64::consts::E * max_degree as f64 * theta;
    Ok(ell / n as f64 * ratio.powi(k as i32 - 1))
}

/// Tree uniqueness threshold for the hardcore model:
/// `lambda_c(Delta) = (Delta-1)^(Delta-1) / (Delta-2)^Delta`.
pub fn lambda_critical(max_degree: usize) -> Result<f64> {
    if max_degree < 3 {
        return Err(Error::InvalidParam(format!(
            "lambda_c needs Delta >= 3, got {max_degree}"
        )));
    }
    let d = max_degree as f64;
    Ok((d - 1.0).powf(d - 1.0) / (d - 2.0).powf(d))
}

/// The unique solution of `x = exp(1/x)`, by bisection on [1.5, 2] to 1e-12.
pub fn alpha_star() -> f64 {
    let residual = |x: f64| x - (1.0 / x).exp();
    let (mut lo, mut hi) = (1.5, 2.0);
    debug_assert!(residual(lo) < 0.0 && residual(hi) > 0.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mixing-time bounds derived from the relaxation time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MixingRelations {
    /// `tau_rel * ln(warm_ratio / eps)`; needs the warm-start density ratio.
    pub warm_bound: Option<f64>,
    /// `tau_rel * ln(1 / (eps * min_mu))`; needs the minimum stationary mass.
    pub worst_bound: Option<f64>,
    /// `(tau_rel - 1) * ln(1 / (2 eps))`.
    pub lower_bound: f64,
}

pub fn mixing_relations(
    tau_rel: f64,
    epsilon: f64,
    min_mu: Option<f64>,
    warm_ratio: Option<f64>,
) -> Result<MixingRelations> {
    if !(tau_rel >= 1.0) {
        return Err(Error::InvalidParam(format!("tau_rel must be >= 1, got {tau_rel}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParam(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    if let Some(m) = min_mu {
        if !(m > 0.0 && m <= 1.0) {
            return Err(Error::InvalidParam(format!("min_mu must be in (0, 1], got {m}")));
        }
    }
    if let Some(r) = warm_ratio {
        if !(r >= 1.0) {
            return Err(Error::InvalidParam(format!("warm_ratio must be >= 1, got {r}")));
        }
    }
    Ok(MixingRelations {
        warm_bound: warm_ratio.map(|r| tau_rel * (r / epsilon).ln()),
        worst_bound: min_mu.map(|m| tau_rel * (1.0 / (epsilon * m)).ln()),
        lower_bound: (tau_rel - 1.0) * (1.0 / (2.0 * epsilon)).ln(),
    })
}

/// Parameter-regime inputs for the three application models.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// Proper colorings on a triangle-free graph: slack `delta`, colors `k`.
    Coloring { n: usize, max_degree: usize, delta: f64, k: usize },
    /// Hardcore below the uniqueness threshold with slack `delta`.
    Hardcore { max_degree: usize, delta: f64, lambda: f64 },
    /// Monomer-dimer at fugacity 1.
    Matching { max_degree: usize },
}

/// Regime-check output: concrete thresholds plus flags; asymptotic constants
/// that the source statements leave as `O(...)` are reported as
/// non-evaluable notes, never invented.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegimeReport {
    Coloring {
        alpha_star: f64,
        /// `(1 + delta) * alpha_star * Delta`.
        coupling_threshold: f64,
        /// `288 * ln(96 n^3 / delta) / delta^2`.
        high_degree_threshold: f64,
        meets_coupling: bool,
        meets_high_degree: bool,
        meets_both: bool,
        si_c_note: String,
        si_eta_note: String,
    },
    Hardcore {
        lambda_c: f64,
        /// `(1 - delta) * lambda_c(Delta)`.
        lambda_threshold: f64,
        in_regime: bool,
        /// `lambda / (1 + lambda)`, the evaluable independence parameter.
        eta: f64,
        si_c_note: String,
    },
    Matching {
        /// `2 * sqrt(1 + Delta)`.
        si_c: f64,
        /// `lambda / (1 + lambda)` at `lambda = 1`.
        eta: f64,
    },
}

pub fn regime_checks(regime: &Regime) -> Result<RegimeReport> {
    match *regime {
        Regime::Coloring { n, max_degree, delta, k } => {
            if !(delta > 0.0) {
                return Err(Error::InvalidParam("delta must be > 0".into()));
            }
            let a = alpha_star();
            let coupling = (1.0 + delta) * a * max_degree as f64;
            let high_degree = 288.0 * (96.0 * (n as f64).powi(3) / delta).ln() / (delta * delta);
            Ok(RegimeReport::Coloring {
                alpha_star: a,
                coupling_threshold: coupling,
                high_degree_threshold: high_degree,
                meets_coupling: k as f64 >= coupling,
                meets_high_degree: k as f64 >= high_degree,
                meets_both: k as f64 >= coupling.max(high_degree),
                si_c_note: "O(delta^-2): constant not evaluable".into(),
                si_eta_note: "1 - k^-O(delta^-2): constant not evaluable".into(),
            })
        }
        Regime::Hardcore { max_degree, delta, lambda } => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::InvalidParam("delta must be in (0, 1)".into()));
            }
            if !(lambda > 0.0) {
                return Err(Error::InvalidParam("lambda must be > 0".into()));
            }
            let lc = lambda_critical(max_degree)?;
            let threshold = (1.0 - delta) * lc;
            Ok(RegimeReport::Hardcore {
                lambda_c: lc,
                lambda_threshold: threshold,
                in_regime: lambda <= threshold,
                eta: lambda / (1.0 + lambda),
                si_c_note: "O(delta^-1): constant not evaluable".into(),
            })
        }
        Regime::Matching { max_degree } => Ok(RegimeReport::Matching {
            si_c: 2.0 * (1.0 + max_degree as f64).sqrt(),
            eta: 0.5,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_2c_guard() {
        assert_eq!(ceil_2c(0.0), 0);
        assert_eq!(ceil_2c(0.5), 1);
        assert_eq!(ceil_2c(0.500000001), 2);
        assert_eq!(ceil_2c(1.0), 2);
        assert_eq!(ceil_2c(1.2), 3);
    }

    #[test]
    fn alo_bound_examples() {
        assert!((alo_gap_bound(&[0.0, 0.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((alo_gap_bound(&[0.5]).unwrap() - 0.25).abs() < 1e-15);
        assert!((alo_gap_bound_ch(10, 0.0, 0.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(alo_gap_bound(&[2.5]).is_err());
    }

    #[test]
    fn main_gap_bound_examples() {
        let b = main_gap_bound(10, 3, 0.0, 0.0).unwrap();
        assert!(b.precondition_met);
        assert!((b.value - 0.1).abs() < 1e-15);

        let b = main_gap_bound(100, 3, 1.0, 0.5).unwrap();
        assert!(!b.precondition_met);

        let b = main_gap_bound(400, 3, 1.0, 0.5).unwrap();
        assert!(b.precondition_met);
        let expected = 0.5f64.powi(3) / 150f64.powi(10) / 400.0;
        assert!((b.value - expected).abs() <= 1e-15 * expected.abs().max(1.0));
        assert_eq!(b.nominal_constant, 1.0);
        assert!(main_gap_bound(10, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn kappa_examples() {
        // All alpha_i = 1 collapses to (s - r) / s.
        for n in 1..=12usize {
            for s in 0..=n {
                for r in 0..=s {
                    let k = kappa_rs(n, r, s, 0.0, 0.0).unwrap();
                    let expected = if s == 0 || r == s { 0.0 } else { (s - r) as f64 / s as f64 };
                    assert!((k - expected).abs() < 1e-12, "n={n} r={r} s={s}");
                }
            }
        }
        assert_eq!(kappa_rs(4, 2, 2, 1.0, 0.9).unwrap(), 0.0);
        let k = kappa_rs(4, 2, 4, 1.0, 0.9).unwrap();
        assert!(k > 0.0 && k < 1.0);
    }

    #[test]
    fn kappa_monotonicity() {
        for &(c, eta) in &[(0.0, 0.0), (1.0, 0.5), (2.5, 0.9)] {
            for n in 1..=12usize {
                for s in 1..=n {
                    for r in 1..s {
                        let k_low = kappa_rs(n, r, s, c, eta).unwrap();
                        let k_next_r = kappa_rs(n, r - 1, s, c, eta).unwrap();
                        assert!(k_next_r >= k_low - 1e-12, "decreasing r must not decrease kappa");
                        if s < n {
                            let k_next_s = kappa_rs(n, r, s + 1, c, eta).unwrap();
                            assert!(k_next_s >= k_low - 1e-12, "increasing s must not decrease kappa");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn block_factorization_examples() {
        // C = 0, eta = 0: the exact form is exactly 1 for every l.
        for n in 2..=10usize {
            for ell in 1..=n {
                let exact = block_factorization_constant(n, ell, 0.0, 0.0).unwrap();
                assert!((exact - 1.0).abs() < 1e-12);
            }
        }
        assert!((bf_simple_bound(0.5, 0.0).unwrap() - 4.0).abs() < 1e-15);

        let bf = block_factorization(40, 16, 1.0, 0.5).unwrap();
        assert!(bf.simple_precondition_met);
        let simple = bf.simple.unwrap();
        assert!((simple - 125.0).abs() < 1e-9);
        assert!(bf.exact <= simple);
    }

    #[test]
    fn bf_exact_below_simple_on_grid() {
        for &n in &[12usize, 20, 40] {
            for &theta in &[0.3, 0.5, 0.8] {
                for &(c, eta) in &[(0.0, 0.0), (0.5, 0.3), (1.0, 0.5), (1.5, 0.7)] {
                    let ell = (theta * n as f64).ceil() as usize;
                    if (ell as f64) < 4.0 * ceil_2c(c) as f64 {
                        continue;
                    }
                    let bf = block_factorization(n, ell, c, eta).unwrap();
                    let simple = bf.simple.expect("precondition holds");
                    assert!(
                        bf.exact <= simple + 1e-9,
                        "n={n} ell={ell} c={c} eta={eta}: {} > {}",
                        bf.exact,
                        simple
                    );
                }
            }
        }
    }

    #[test]
    fn at_chain_examples() {
        // theta at the boundary makes the ratio 1/2: the sum is under 2.
        for delta in 1..=5usize {
            let theta = 1.0 / (4.0 * std::f64::consts::E * delta as f64);
            let b = at_chain_bound(1.0, 0.0, 0.0, delta, theta, 50).unwrap();
            assert!(b < 2.0);
        }
        let single = at_chain_bound(4.0, 1.0, 0.5, 2, 0.01, 1).unwrap();
        assert!((single - 4.0 / 0.5f64.powi(3)).abs() < 1e-12);

        let mut last = 0.0;
        for ell in 1..=10 {
            let b = at_chain_bound(4.0, 1.0, 0.5, 2, 1.0 / (8.0 * std::f64::consts::E), ell).unwrap();
            assert!(b > last);
            last = b;
        }
        assert!(at_chain_bound(1.0, 0.0, 0.0, 2, 0.1, 3).is_err());
    }

    #[test]
    fn component_tail_examples() {
        assert!((component_tail_bound(20, 2, 0.25, 1).unwrap() - 0.25).abs() < 1e-15);
        let b = component_tail_bound(20, 2, 0.25, 3).unwrap();
        let e = std::f64::consts::E;
        assert!((b - 0.25 * e * e).abs() < 1e-12);
        assert!(b > 1.0, "the bound may exceed 1 and is reported as-is");
        assert!(component_tail_bound(20, 2, 0.25, 0).is_err());
    }

    #[test]
    fn lambda_critical_values() {
        assert!((lambda_critical(3).unwrap() - 4.0).abs() < 1e-12);
        assert!((lambda_critical(4).unwrap() - 27.0 / 16.0).abs() < 1e-12);
        assert!((lambda_critical(6).unwrap() - 3125.0 / 4096.0).abs() < 1e-12);
        assert!(lambda_critical(2).is_err());
    }

    #[test]
    fn lambda_critical_strictly_decreasing() {
        let mut last = f64::INFINITY;
        for d in 3..=50 {
            let lc = lambda_critical(d).unwrap();
            assert!(lc < last);
            last = lc;
        }
    }

    #[test]
    fn alpha_star_value() {
        let a = alpha_star();
        assert!((1.7632..=1.7633).contains(&a));
        assert!((a - (1.0 / a).exp()).abs() <= 1e-11);
        assert_eq!(a, alpha_star());
    }

    #[test]
    fn mixing_relation_examples() {
        let r = mixing_relations(4.0, 0.25, None, None).unwrap();
        assert!((r.lower_bound - 3.0 * 2f64.ln()).abs() < 1e-12);

        let r = mixing_relations(7.0, 0.1, None, Some(1.0)).unwrap();
        assert!((r.warm_bound.unwrap() - 7.0 * 10f64.ln()).abs() < 1e-12);

        let r = mixing_relations(4.0, 0.01, Some(1.0 / 3.0), None).unwrap();
        assert!((r.worst_bound.unwrap() - 4.0 * 300f64.ln()).abs() < 1e-12);
        assert!(mixing_relations(0.5, 0.1, None, None).is_err());
        assert!(mixing_relations(4.0, 1.5, None, None).is_err());
    }

    #[test]
    fn regime_check_examples() {
        let report = regime_checks(&Regime::Coloring { n: 50, max_degree: 3, delta: 0.1, k: 6 }).unwrap();
        match report {
            RegimeReport::Coloring { coupling_threshold, meets_coupling, .. } => {
                assert!((coupling_threshold - 5.819).abs() < 5e-3);
                assert!(meets_coupling);
            }
            _ => panic!("wrong variant"),
        }

        let report = regime_checks(&Regime::Hardcore { max_degree: 3, delta: 0.5, lambda: 1.9 }).unwrap();
        match report {
            RegimeReport::Hardcore { in_regime, lambda_threshold, .. } => {
                assert!((lambda_threshold - 2.0).abs() < 1e-12);
                assert!(in_regime);
            }
            _ => panic!("wrong variant"),
        }

        let report = regime_checks(&Regime::Matching { max_degree: 3 }).unwrap();
        match report {
            RegimeReport::Matching { si_c, eta } => {
                assert!((si_c - 4.0).abs() < 1e-12);
                assert!((eta - 0.5).abs() < 1e-15);
            }
            _ => panic!("wrong variant"),
        }
    }
}
