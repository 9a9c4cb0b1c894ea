//! Smoothing and regularity parameters, high-influence coordinates, and
//! checks that random restrictions leave only low influences.
//!
//! Parameters that can be astronomically small or large are carried as
//! natural logarithms (`ln_*` fields); the plain float fields underflow to 0
//! or overflow to ∞ in that regime and are informational only.

use std::f64::consts::{E, LN_2};

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::fourier::{hypercontractivity_constant, FourierPolynomial, TailBound};
use crate::num::{wilson_interval, Magnitude, Z95};
use crate::prob::{digits, stream_rng, JointDistribution};

/// Above this many restrictions `Auto` switches to Monte Carlo.
pub const EXACT_RESTRICTIONS: u64 = 100_000;
/// Hard limit for explicit exhaustive sweeps.
pub const EXACT_HARD_CAP: u64 = 10_000_000;
const CHUNK: u64 = 4096;
/// Coefficients below 1e-14 are dropped, so tail noise stays below this.
const TAIL_SLACK: f64 = 1e-24;
const VAR_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingParams {
    pub rho: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// `ln(1/(1−γ))`, kept because γ rounds to 1 for tiny ε.
    pub ln_inv_one_minus_gamma: f64,
    pub eta: f64,
    pub ln_eta: f64,
    pub d: usize,
    pub c_smooth: f64,
}

/// Noise rate and degree cutoff for the smoothing step.
pub fn smoothing_params(rho: f64, lambda: f64, eta: f64, c_smooth: f64) -> Result<SmoothingParams> {
    if !(eta > 0.0 && eta <= 1.0) {
        return param(format!("tail budget eta {eta} outside (0, 1]"));
    }
    smoothing_params_ln(rho, lambda.ln(), eta.ln(), c_smooth)
}

/// As [`smoothing_params`] with λ and η given by their logarithms.
pub fn smoothing_params_ln(rho: f64, ln_lambda: f64, ln_eta: f64, c_smooth: f64) -> Result<SmoothingParams> {
    if !(ln_lambda < 0.0) {
        return param(format!("loss budget lambda {} outside (0, 1)", ln_lambda.exp()));
    }
    if !(ln_eta <= 0.0) {
        return param(format!("tail budget eta {} outside (0, 1]", ln_eta.exp()));
    }
    if !(c_smooth > 0.0 && c_smooth.is_finite()) {
        return param(format!("smoothing constant {c_smooth} must be positive"));
    }
    if rho >= 1.0 {
        return Err(Error::Undefined("smoothing needs maximal correlation below 1; d is unbounded at rho = 1".into()));
    }
    if !(rho >= 0.0) {
        return param(format!("maximal correlation {rho} outside [0, 1)"));
    }
    let ln_eps = ln_lambda - LN_2;
    // 1 − γ = C(1−ρ)ε/ln(1/ε), clamped so γ stays in (0, 1)
    let ln_x = (c_smooth * (1.0 - rho)).ln() + ln_eps - (-ln_eps).ln();
    let ln_x = ln_x.min((1.0 - 1e-12f64).ln());
    let x = ln_x.exp();
    let ln_gamma = (-x).ln_1p();
    if !(ln_gamma < 0.0) {
        return Err(Error::Undefined(format!("noise rate rounds to 1 (1 - gamma = {x:e})")));
    }
    let mut d = (ln_eta / (2.0 * ln_gamma)).ceil().max(1.0);
    while 2.0 * d * ln_gamma > ln_eta {
        d += 1.0;
    }
    if d >= 9_007_199_254_740_992.0 {
        return Err(Error::Resource(format!("degree cutoff {d:e} is too large")));
    }
    Ok(SmoothingParams {
        rho,
        lambda: ln_lambda.exp(),
        epsilon: ln_eps.exp(),
        gamma: 1.0 - x,
        ln_inv_one_minus_gamma: -ln_x,
        eta: ln_eta.exp(),
        ln_eta,
        d: d as usize,
        c_smooth,
    })
}

/// How the influence cutoff was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRoute {
    /// `1/β = X (ln X)^d`, `X = (2C₄)^d/(c^d τ)`.
    Formula,
    /// The closed form is undefined or too large a β to make the bucket
    /// sum at most τ; β was solved from that sum directly.
    Solved,
}

/// Cutoff and coordinate bound for one party.
#[derive(Clone, Debug, Serialize)]
pub struct PartyRegularity {
    pub alpha: f64,
    pub c4: f64,
    /// `c = αd/e`.
    pub c_conc: f64,
    /// Influence threshold this party's lemma is applied at.
    pub tau: f64,
    pub ln_tau: f64,
    pub beta: f64,
    pub ln_beta: f64,
    pub route: BetaRoute,
    /// `⌈d/β⌉`.
    pub h: Magnitude,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityParams {
    pub d: usize,
    pub tau: f64,
    pub ln_tau: f64,
    /// `τ²/16`.
    pub eta: f64,
    pub ln_eta: f64,
    pub parties: Vec<PartyRegularity>,
    /// Sum of the parties' `h`.
    pub h_bound: Magnitude,
}

impl RegularityParams {
    /// Degree-d lemma for a single space at threshold τ.
    pub fn single(alpha: f64, d: usize, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Self::single_ln(alpha, d, tau.ln())
    }

    pub fn single_ln(alpha: f64, d: usize, ln_tau: f64) -> Result<Self> {
        let party = party_regularity(alpha, d, ln_tau)?;
        Ok(Self::assemble(d, ln_tau, vec![party]))
    }

    /// Joint lemma: each party at τ/4 with its own marginal's smallest atom.
    pub fn joint(dist: &JointDistribution, d: usize, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Self::joint_ln(dist.rows().alpha(), dist.cols().alpha(), d, tau.ln())
    }

    pub fn joint_ln(alpha_a: f64, alpha_b: f64, d: usize, ln_tau: f64) -> Result<Self> {
        let quarter = ln_tau - 4f64.ln();
        let a = party_regularity(alpha_a, d, quarter)?;
        let b = party_regularity(alpha_b, d, quarter)?;
        Ok(Self::assemble(d, ln_tau, vec![a, b]))
    }

    fn assemble(d: usize, ln_tau: f64, parties: Vec<PartyRegularity>) -> Self {
        let h_bound = parties.iter().skip(1).fold(parties[0].h, |acc, p| acc.add(&p.h));
        let ln_eta = 2.0 * ln_tau - 16f64.ln();
        RegularityParams { d, tau: ln_tau.exp(), ln_tau, eta: ln_eta.exp(), ln_eta, parties, h_bound }
    }

    /// Smallest cutoff over the parties.
    pub fn ln_beta(&self) -> f64 {
        self.parties.iter().map(|p| p.ln_beta).fold(f64::INFINITY, f64::min)
    }

    pub fn beta(&self) -> f64 {
        self.ln_beta().exp()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return param(format!("influence threshold tau {tau} outside (0, 1)"));
    }
    Ok(())
}

/// β and h for one party at threshold `e^ln_tau`.
pub fn party_regularity(alpha: f64, d: usize, ln_tau: f64) -> Result<PartyRegularity> {
    if d == 0 {
        return param("regularity needs degree d >= 1");
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return param(format!("alpha {alpha} outside (0, 1]"));
    }
    if !(ln_tau < 0.0) {
        return param(format!("influence threshold {} outside (0, 1)", ln_tau.exp()));
    }
    let alpha = alpha.min(0.5);
    let c4 = hypercontractivity_constant(4.0, alpha)?;
    let df = d as f64;
    let c = alpha * df / E;
    let b_formula = formula_ln_inv_beta(df, c, c4, ln_tau);
    let b_solved = solved_ln_inv_beta(df, c, c4, ln_tau);
    let (ln_inv_beta, route) =
        if b_formula >= b_solved { (b_formula, BetaRoute::Formula) } else { (b_solved, BetaRoute::Solved) };
    Ok(PartyRegularity {
        alpha,
        c4,
        c_conc: c,
        tau: ln_tau.exp(),
        ln_tau,
        beta: (-ln_inv_beta).exp(),
        ln_beta: -ln_inv_beta,
        route,
        h: Magnitude::ceil_exp(df.ln() + ln_inv_beta),
    })
}

/// `ln(1/β)` from the closed form; −∞ when `ln X ≤ 0`.
fn formula_ln_inv_beta(d: f64, c: f64, c4: f64, ln_tau: f64) -> f64 {
    let ln_x = d * (2.0 * c4).ln() - d * c.ln() - ln_tau;
    if ln_x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    ln_x + d * ln_x.ln()
}

/// Upper bound on `ln Σ_j exp(−c r_j^{1/d}) 2^{j+1} d/β`, `r_j = τ2^j/(βC₄^d)`,
/// at `B = ln(1/β)`.
///
/// With `a = c r_0^{1/d}` the log-terms `t(j) = −a 2^{j/d} + B + (j+1)ln 2 + ln d`
/// are concave in j and decreasing once `a > d`, so the sum is at most
/// `e^{t(0)} (1 + 1/|t'(0)|)`.
fn ln_bucket_sum_bound(b: f64, d: f64, ln_k: f64) -> f64 {
    let a = (ln_k + b / d).exp();
    if !(a > d) {
        return f64::INFINITY;
    }
    let t0 = -a + b + LN_2 + d.ln();
    t0 + (1.0 / (LN_2 * (a / d - 1.0))).ln_1p()
}

/// Smallest `ln(1/β)` with `r_0 ≥ e^d` and bucket sum at most τ.
fn solved_ln_inv_beta(d: f64, c: f64, c4: f64, ln_tau: f64) -> f64 {
    let ln_k = c.ln() + ln_tau / d - c4.ln();
    let valid = d * (1.0 + c4.ln()) - ln_tau;
    let past_peak = d * (d.ln() - ln_k);
    let ok = |b: f64| ln_bucket_sum_bound(b, d, ln_k) <= ln_tau;
    let mut lo = valid.max(past_peak);
    if ok(lo) {
        return lo;
    }
    let mut step = lo.abs().max(1.0) * 1e-3;
    let mut hi = lo + step;
    while !ok(hi) {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    hi
}

/// `{i : Inf_i(p) ≥ β}`.
pub fn high_influence_set(p: &FourierPolynomial, beta: f64) -> Vec<usize> {
    p.influences().iter().enumerate().filter(|(_, &v)| v > 0.0 && v >= beta).map(|(i, _)| i).collect()
}

fn high_influence_set_ln(p: &FourierPolynomial, ln_beta: f64) -> Vec<usize> {
    p.influences().iter().enumerate().filter(|(_, &v)| v > 0.0 && v.ln() >= ln_beta).map(|(i, _)| i).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct JointSplit {
    /// `H_A ∪ H_B`, sorted.
    pub h: Vec<usize>,
    pub h_a: Vec<usize>,
    pub h_b: Vec<usize>,
    pub tail_p: f64,
    pub tail_q: f64,
}

/// High-influence coordinates of the degree-d parts of `p` and `q`.
///
/// `params` must come from [`RegularityParams::joint`] (two parties).
pub fn joint_high_influence_set(
    p: &FourierPolynomial,
    q: &FourierPolynomial,
    params: &RegularityParams,
) -> Result<JointSplit> {
    if p.n() != q.n() {
        return Err(Error::Shape(format!("functions have n = {} and n = {}", p.n(), q.n())));
    }
    if params.parties.len() != 2 {
        return param("joint split needs two-party regularity parameters");
    }
    let mut tails = [0.0; 2];
    for (k, (f, name)) in [(p, "P"), (q, "Q")].into_iter().enumerate() {
        let var = f.variance();
        if var > 1.0 + VAR_SLACK {
            return Err(Error::Precondition(format!("Var[{name}] = {var} exceeds 1")));
        }
        tails[k] = f.degree_tail_mass(params.d);
        if tails[k].ln() > params.ln_eta && tails[k] > TAIL_SLACK {
            return Err(Error::Precondition(format!(
                "degree-{} tail of {name} is {:e}, above eta = {:e}",
                params.d, tails[k], params.eta
            )));
        }
    }
    let h_a = high_influence_set_ln(&p.truncate_degree(params.d), params.parties[0].ln_beta);
    let h_b = high_influence_set_ln(&q.truncate_degree(params.d), params.parties[1].ln_beta);
    let mut h: Vec<usize> = h_a.iter().chain(&h_b).copied().collect();
    h.sort_unstable();
    h.dedup();
    Ok(JointSplit { h, h_a, h_b, tail_p: tails[0], tail_q: tails[1] })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    /// Every restriction, weighted by its probability.
    Exact,
    MonteCarlo {
        samples: u64,
        seed: u64,
    },
    /// Exact up to [`EXACT_RESTRICTIONS`] restrictions, else Monte Carlo.
    Auto {
        samples: u64,
        seed: u64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityEstimate {
    pub probability: f64,
    /// Wilson 95% interval for Monte Carlo; equal to `probability` when exact.
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    pub restrictions: u64,
}

/// Probability over ξ that every coordinate outside `h` has
/// `Inf_i(p_ξ) ≤ τ`.
pub fn restriction_regular_probability(
    p: &FourierPolynomial,
    h: &[usize],
    tau: f64,
    mode: SweepMode,
) -> Result<RegularityEstimate> {
    let q = p.q() as u64;
    let count = q.checked_pow(h.len() as u32);
    let exact = match mode {
        SweepMode::Exact => true,
        SweepMode::MonteCarlo { .. } => false,
        SweepMode::Auto { .. } => count.is_some_and(|c| c <= EXACT_RESTRICTIONS),
    };
    let regular = |xi: &[usize]| -> Result<bool> {
        let r = p.restrict(h, xi)?;
        Ok(r.influences().iter().all(|&v| v <= tau))
    };
    if exact {
        let total = match count {
            Some(c) if c <= EXACT_HARD_CAP => c,
            _ => {
                return Err(Error::Resource(format!(
                    "{q}^{} restrictions exceed the exhaustive limit {EXACT_HARD_CAP}",
                    h.len()
                )))
            }
        };
        let probs = p.basis().space().probs();
        let chunks: Vec<f64> = (0..total.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| -> Result<f64> {
                let mut xi = vec![0usize; h.len()];
                let mut acc = 0.0;
                for k in c * CHUNK..((c + 1) * CHUNK).min(total) {
                    digits(k as usize, q as usize, &mut xi);
                    if regular(&xi)? {
                        acc += xi.iter().map(|&a| probs[a]).product::<f64>();
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let prob = chunks.iter().sum::<f64>().min(1.0);
        return Ok(RegularityEstimate {
            probability: prob,
            lower: prob,
            upper: prob,
            exact: true,
            restrictions: total,
        });
    }
    let (samples, seed) = match mode {
        SweepMode::MonteCarlo { samples, seed } | SweepMode::Auto { samples, seed } => (samples, seed),
        SweepMode::Exact => unreachable!(),
    };
    if samples == 0 {
        return param("Monte Carlo sweep needs at least one sample");
    }
    let atom = WeightedIndex::new(p.basis().space().probs()).map_err(|e| Error::Distribution(e.to_string()))?;
    let hits: Vec<u64> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<u64> {
            let mut rng = stream_rng(seed, c);
            let mut xi = vec![0usize; h.len()];
            let mut hits = 0;
            for _ in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                xi.iter_mut().for_each(|v| *v = atom.sample(&mut rng));
                hits += regular(&xi)? as u64;
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    let hits: u64 = hits.iter().sum();
    let (lower, upper) = wilson_interval(hits, samples, Z95);
    Ok(RegularityEstimate {
        probability: hits as f64 / samples as f64,
        lower,
        upper,
        exact: false,
        restrictions: samples,
    })
}

/// `Pr[Inf_i(P_ξ) > r C₄^d Inf_i(P)] ≤ exp(−c r^{1/d})`, `c = αd/e`,
/// asserted for `r ≥ e^d`.
pub fn restriction_influence_tail_bound(d: usize, alpha: f64, r: f64) -> Result<TailBound> {
    if d == 0 {
        return param("restriction bound needs degree d >= 1");
    }
    if !(alpha > 0.0) {
        return param(format!("alpha {alpha} must be positive"));
    }
    if !(r >= 0.0) {
        return param(format!("ratio r = {r} must be nonnegative"));
    }
    let df = d as f64;
    let c = alpha.min(0.5) * df / E;
    Ok(TailBound { value: (-c * r.powf(1.0 / df)).exp(), asserted: r >= df.exp() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::build_basis;
    use crate::prob::FiniteSpace;
    use std::sync::Arc;

    fn bits() -> Arc<crate::fourier::OrthonormalBasis> {
        Arc::new(build_basis(&FiniteSpace::uniform_bit()))
    }

    fn dictator(n: usize, i: usize) -> FourierPolynomial {
        let mut s = vec![0; n];
        s[i] = 1;
        FourierPolynomial::from_terms(n, bits(), vec![(s, 1.0)]).unwrap()
    }

    #[test]
    fn smoothing_example() {
        let s = smoothing_params(0.5, 0.1, 0.01, 1.0).unwrap();
        let gamma = 1.0 - 0.5 * 0.05 / 20f64.ln();
        assert!((s.gamma - gamma).abs() < 1e-15);
        assert_eq!(s.d, (0.01f64.ln() / (2.0 * gamma.ln())).ceil() as usize);
        assert!(s.gamma.powi(2 * s.d as i32) <= 0.01);
        assert_eq!(smoothing_params(0.5, 0.1, 1.0, 1.0).unwrap().d, 1);
        assert!(matches!(smoothing_params(1.0, 0.1, 0.01, 1.0), Err(Error::Undefined(_))));
        assert!(smoothing_params(0.5, 1.0, 0.01, 1.0).is_err());
        assert!(smoothing_params(0.5, 0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn smoothing_tail_on_grid() {
        for rho in [0.0, 0.3, 0.6, 0.9, 0.99] {
            for lambda in [0.5, 0.1, 0.01] {
                for eta in [0.9, 0.1, 1e-3, 1e-8] {
                    let s = smoothing_params(rho, lambda, eta, 1.0).unwrap();
                    assert!(2.0 * s.d as f64 * s.gamma.ln() <= eta.ln() + 1e-12);
                    assert!(s.gamma > 0.0 && s.gamma < 1.0);
                }
            }
        }
    }

    #[test]
    fn huge_constant_clamps_gamma() {
        let s = smoothing_params(0.0, 0.5, 0.5, 1e6).unwrap();
        assert!(s.gamma > 0.0 && s.gamma < 1e-6);
        assert_eq!(s.d, 1);
    }

    #[test]
    fn beta_small_case() {
        let p = party_regularity(0.5, 1, 0.1f64.ln()).unwrap();
        assert_eq!(p.route, BetaRoute::Formula);
        let x: f64 = 6.0 / (0.5 / E * 0.1);
        assert!((1.0 / p.beta - x * x.ln()).abs() / (x * x.ln()) < 1e-12);
        assert_eq!(p.h.exact, Some((1.0 / p.beta).ceil() as u64));
    }

    #[test]
    fn beta_solved_when_formula_degenerates() {
        let p = party_regularity(1.0 / 3.0, 40, (1e-30f64).ln()).unwrap();
        assert_eq!(p.route, BetaRoute::Solved);
        let ln_k = p.c_conc.ln() + p.ln_tau / 40.0 - p.c4.ln();
        assert!(ln_bucket_sum_bound(-p.ln_beta, 40.0, ln_k) <= p.ln_tau);
        assert!(-p.ln_beta >= 40.0 * (1.0 + p.c4.ln()) - p.ln_tau);
    }

    #[test]
    fn beta_shrinks_with_tau_and_grows_h_with_d() {
        let mut prev = f64::INFINITY;
        for k in 1..30 {
            let p = party_regularity(0.5, 3, -(k as f64)).unwrap();
            assert!(p.ln_beta <= prev);
            prev = p.ln_beta;
        }
        let mut prev = 0.0;
        for d in 1..60 {
            let p = party_regularity(0.25, d, 0.05f64.ln()).unwrap();
            assert!(p.h.ln >= prev);
            prev = p.h.ln;
        }
    }

    #[test]
    fn joint_params_sum_parties() {
        let dist = crate::prob::make_dsbs(0.4).unwrap();
        let r = RegularityParams::joint(&dist, 2, 0.2).unwrap();
        assert!((r.eta - 0.04 / 16.0).abs() < 1e-15);
        assert!((r.parties[0].tau - 0.05).abs() < 1e-15);
        let h = r.parties[0].h.exact.unwrap() + r.parties[1].h.exact.unwrap();
        assert_eq!(r.h_bound.exact, Some(h));
    }

    #[test]
    fn high_influence_examples() {
        assert_eq!(high_influence_set(&dictator(3, 0), 0.5), vec![0]);
        assert!(high_influence_set(&FourierPolynomial::constant(3, bits(), 0.7), 1e-9).is_empty());
        let params = RegularityParams::joint(&crate::prob::make_dsbs(0.5).unwrap(), 1, 0.5).unwrap();
        let s = joint_high_influence_set(&dictator(3, 0), &dictator(3, 0), &params).unwrap();
        assert_eq!(s.h, vec![0]);
        let s = joint_high_influence_set(&dictator(3, 0), &dictator(3, 1), &params).unwrap();
        assert_eq!(s.h, vec![0, 1]);
    }

    #[test]
    fn joint_rejects_heavy_tail() {
        let parity = FourierPolynomial::from_terms(3, bits(), vec![(vec![1, 1, 1], 1.0)]).unwrap();
        let params = RegularityParams::joint(&crate::prob::make_dsbs(0.5).unwrap(), 2, 0.5).unwrap();
        match joint_high_influence_set(&parity, &dictator(3, 0), &params) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("tail")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn restriction_examples() {
        let dict = dictator(3, 0);
        let est = restriction_regular_probability(&dict, &[0], 0.1, SweepMode::Exact).unwrap();
        assert_eq!(est.probability, 1.0);
        let est = restriction_regular_probability(&dict, &[], 0.9, SweepMode::Exact).unwrap();
        assert_eq!(est.probability, 0.0);
        let est = restriction_regular_probability(&dict, &[0, 1, 2], 0.0, SweepMode::Exact).unwrap();
        assert_eq!(est.probability, 1.0);
        let c = FourierPolynomial::constant(3, bits(), 0.3);
        let est = restriction_regular_probability(&c, &[], 0.0, SweepMode::Auto { samples: 10, seed: 1 }).unwrap();
        assert!(est.exact && est.probability == 1.0);
    }

    #[test]
    fn monte_carlo_sweep_brackets_exact() {
        // biased bits: fixing x0 leaves a coefficient 0.6χ(x0) + 0.2 on x1
        let basis = Arc::new(build_basis(&FiniteSpace::bernoulli(0.3).unwrap()));
        let p = FourierPolynomial::from_terms(2, basis, vec![(vec![1, 1], 0.6), (vec![0, 1], 0.2)]).unwrap();
        let exact = restriction_regular_probability(&p, &[0], 0.5, SweepMode::Exact).unwrap();
        assert!((exact.probability - 0.7).abs() < 1e-12);
        let mc =
            restriction_regular_probability(&p, &[0], 0.5, SweepMode::MonteCarlo { samples: 5000, seed: 9 }).unwrap();
        assert!(mc.lower <= exact.probability && exact.probability <= mc.upper);
    }

    #[test]
    fn tail_bound_examples() {
        let b = restriction_influence_tail_bound(1, 0.5, E).unwrap();
        assert!((b.value - (-0.5f64).exp()).abs() < 1e-15 && b.asserted);
        assert!(!restriction_influence_tail_bound(2, 0.5, 3.0).unwrap().asserted);
        assert!(restriction_influence_tail_bound(2, 0.5, 1e12).unwrap().value < 1e-100);
    }
}
