//! Normal CDF and quantile, bivariate quadrant probabilities, Gaussian
//! stability of threshold functions and the Berry-Esseen sample count.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use rand::Rng;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::num::ceil_tol;
use crate::prob::seeded_rng;

const SQRT_PI: f64 = 1.772_453_850_905_516;
/// Below this argument erfc is computed from the erf series.
const SERIES_LIMIT: f64 = 2.5;
/// Correlations within this distance of ±1 use the degenerate formulas.
const RHO_EDGE: f64 = 1e-12;
const GL_ORDER: usize = 96;

/// Complementary error function.
pub fn erfc(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        return 2.0 - erfc_pos(-z);
    }
    erfc_pos(z)
}

fn erfc_pos(z: f64) -> f64 {
    if z < SERIES_LIMIT {
        // erf(z) = 2/√π · e^{-z²} · Σ (2z²)^k z / (1·3·…·(2k+1)), all terms positive
        let z2 = z * z;
        let mut term = z;
        let mut sum = z;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= 2.0 * z2 / (2.0 * k + 1.0);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        return 1.0 - 2.0 / SQRT_PI * (-z2).exp() * sum;
    }
    if z > 27.3 {
        return 0.0;
    }
    // erfc(z) = 2z e^{-z²}/√π · 1/(2z²+1 − 1·2/(2z²+5 − 3·4/(2z²+9 − …))), modified Lentz
    let z2 = z * z;
    let tiny = 1e-300;
    let mut f = 2.0 * z2 + 1.0;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..500 {
        let jf = j as f64;
        let a = -(2.0 * jf - 1.0) * (2.0 * jf);
        let b = 2.0 * z2 + 1.0 + 4.0 * jf;
        d = b + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    2.0 * z * (-z2).exp() / SQRT_PI / f
}

/// Φ(x).
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Φ⁻¹(p) for `0 < p < 1`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return param(format!("quantile argument {p} outside (0, 1)"));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

/// Φ⁻¹ extended by ±∞ at 1 and 0.
pub fn threshold_for_prob(p: f64) -> f64 {
    if p >= 1.0 {
        f64::INFINITY
    } else if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        std_normal_quantile(p).expect("p in (0,1)")
    }
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = initial_quantile(p);
    for _ in 0..100 {
        let dx = (std_normal_cdf(x) - p) / std_normal_pdf(x);
        if !dx.is_finite() {
            break;
        }
        x -= dx;
        if dx.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Rational approximation with relative error about 1e-9 (Acklam).
fn initial_quantile(p: f64) -> f64 {
    #[allow(clippy::excessive_precision)]
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut xs = vec![0.0; n];
        let mut ws = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            xs[i] = -x;
            xs[n - 1 - i] = x;
            ws[i] = w;
            ws[n - 1 - i] = w;
        }
        (xs, ws)
    })
}

/// `Pr[G₁ ≤ a, G₂ ≤ b]` for standard normals with correlation ρ.
///
/// Uses `Φ₂ = Φ(a)Φ(b) + (1/2π)∫₀^{asin ρ} exp(−(a² − 2ab sin θ + b²)/(2cos²θ)) dθ`,
/// the ρ-integral of the density after substituting `r = sin θ`.
pub fn bivariate_cdf(a: f64, b: f64, rho: f64) -> f64 {
    if a.is_nan() || b.is_nan() || rho.is_nan() {
        return f64::NAN;
    }
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return 0.0;
    }
    if a == f64::INFINITY {
        return std_normal_cdf(b);
    }
    if b == f64::INFINITY {
        return std_normal_cdf(a);
    }
    let rho = rho.clamp(-1.0, 1.0);
    if rho >= 1.0 - RHO_EDGE {
        return std_normal_cdf(a.min(b));
    }
    if rho <= -1.0 + RHO_EDGE {
        return (std_normal_cdf(a) - std_normal_cdf(-b)).max(0.0);
    }
    let base = std_normal_cdf(a) * std_normal_cdf(b);
    if rho == 0.0 {
        return base;
    }
    let top = rho.asin();
    let (xs, ws) = gauss_legendre();
    let half = 0.5 * top;
    let mut sum = 0.0;
    for (x, w) in xs.iter().zip(ws) {
        let theta = half * (x + 1.0);
        let (s, c) = theta.sin_cos();
        sum += w * (-(a * a - 2.0 * a * b * s + b * b) / (2.0 * c * c)).exp();
    }
    (base + half * sum / (2.0 * PI)).clamp(0.0, 1.0)
}

fn check_mean(m: f64, name: &str) -> Result<()> {
    if !(-1.0..=1.0).contains(&m) {
        return param(format!("{name} = {m} outside [-1, 1]"));
    }
    Ok(())
}

/// Threshold `Φ⁻¹((1+μ)/2)` of the mean-μ lower-threshold function.
pub fn mean_threshold(mu: f64) -> f64 {
    threshold_for_prob((1.0 + mu) / 2.0)
}

/// `Γ̄_ρ(μ, ν) = E[P̄_μ(X) Q̄_ν(Y)]` with `P̄_μ(X) = 1` iff `X ≤ Φ⁻¹((1+μ)/2)`.
pub fn gamma_bar(rho: f64, mu: f64, nu: f64) -> Result<f64> {
    check_mean(mu, "mu")?;
    check_mean(nu, "nu")?;
    if !(-1.0..=1.0).contains(&rho) {
        return param(format!("correlation {rho} outside [-1, 1]"));
    }
    let both = bivariate_cdf(mean_threshold(mu), mean_threshold(nu), rho);
    Ok((4.0 * both - 1.0 - mu - nu).clamp(-1.0, 1.0))
}

/// `−Γ̄_ρ(μ, −ν)`: the antipodal pairing.
pub fn gamma_under(rho: f64, mu: f64, nu: f64) -> Result<f64> {
    check_mean(nu, "nu")?;
    Ok(-gamma_bar(rho, mu, -nu)?)
}

/// Which side of the threshold maps to +1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// `+1` iff `x ≤ t`.
    PlusBelow,
    /// `+1` iff `x > t`.
    PlusAbove,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdStrategy {
    pub threshold: f64,
    pub polarity: Polarity,
}

impl ThresholdStrategy {
    /// Borell strategy `P̄_μ`.
    pub fn for_mean(mu: f64) -> Result<Self> {
        check_mean(mu, "mu")?;
        Ok(ThresholdStrategy { threshold: mean_threshold(mu), polarity: Polarity::PlusBelow })
    }

    /// `−P̄_{−ν}`: mean ν with +1 on the upper side.
    pub fn antipodal_for_mean(nu: f64) -> Result<Self> {
        check_mean(nu, "nu")?;
        Ok(ThresholdStrategy { threshold: mean_threshold(-nu), polarity: Polarity::PlusAbove })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let below = x <= self.threshold;
        match (self.polarity, below) {
            (Polarity::PlusBelow, true) | (Polarity::PlusAbove, false) => 1.0,
            _ => -1.0,
        }
    }

    /// Mean under a standard normal input.
    pub fn mean(&self) -> f64 {
        let m = 2.0 * std_normal_cdf(self.threshold) - 1.0;
        match self.polarity {
            Polarity::PlusBelow => m,
            Polarity::PlusAbove => -m,
        }
    }
}

/// Standard normal pair with correlation ρ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianPair {
    pub rho: f64,
}

impl GaussianPair {
    pub fn new(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return param(format!("correlation {rho} outside [-1, 1]"));
        }
        Ok(GaussianPair { rho })
    }

    /// `G₂ = ρG₁ + √(1−ρ²)Z` from Box-Muller normals.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = seeded_rng(seed);
        let s = (1.0 - self.rho * self.rho).sqrt();
        (0..n)
            .map(|_| {
                let (g, z) = box_muller(&mut rng);
                (g, self.rho * g + s * z)
            })
            .collect()
    }
}

/// Two independent standard normals.
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

/// `C·(1+ρ)/(α(1−ρ)³ζ²)` before rounding.
pub fn berry_esseen_raw(rho: f64, alpha: f64, zeta: f64, c_be: f64) -> Result<f64> {
    if rho >= 1.0 {
        return Err(Error::Undefined(format!("correlation {rho} >= 1 needs infinitely many samples")));
    }
    if !(0.0..1.0).contains(&rho) {
        return param(format!("correlation {rho} outside [0, 1)"));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return param(format!("accuracy zeta = {zeta} outside (0, 1]"));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return param(format!("alpha = {alpha} outside (0, 1/2]"));
    }
    if !(c_be > 0.0) {
        return param(format!("constant C_be = {c_be} must be positive"));
    }
    Ok(c_be * (1.0 + rho) / (alpha * (1.0 - rho).powi(3) * zeta * zeta))
}

/// `w = ⌈C·(1+ρ)/(α(1−ρ)³ζ²)⌉`.
pub fn berry_esseen_sample_count(rho: f64, alpha: f64, zeta: f64, c_be: f64) -> Result<u64> {
    let raw = ceil_tol(berry_esseen_raw(rho, alpha, zeta, c_be)?);
    if raw > u64::MAX as f64 {
        return Err(Error::Resource(format!("sample count {raw:.3e} does not fit in 64 bits")));
    }
    Ok(raw as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_basics() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        for k in -80..=80 {
            let x = k as f64 / 10.0;
            assert!((std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))).abs() < 1e-14);
        }
        assert!(std_normal_cdf(-40.0) >= 0.0 && std_normal_cdf(40.0) == 1.0);
    }

    #[test]
    fn quantile_round_trip() {
        assert!((std_normal_quantile(0.75).unwrap() - 0.674_489_750_196_081_7).abs() < 1e-12);
        for k in 1..1000 {
            let p = k as f64 / 1000.0;
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() <= 1e-12);
        }
        for p in [1e-300, 1e-20, 1e-8, 1.0 - 1e-12] {
            let x = std_normal_quantile(p).unwrap();
            assert!(((std_normal_cdf(x) - p) / p).abs() < 1e-9);
        }
        assert!(std_normal_quantile(0.0).is_err() && std_normal_quantile(1.0).is_err());
    }

    #[test]
    fn quadrant_identity() {
        for k in -99..=99 {
            let rho = k as f64 / 100.0;
            let exact = 0.25 + rho.asin() / (2.0 * PI);
            assert!((bivariate_cdf(0.0, 0.0, rho) - exact).abs() < 1e-12);
        }
        assert_eq!(bivariate_cdf(0.3, -0.2, 0.0), std_normal_cdf(0.3) * std_normal_cdf(-0.2));
        assert_eq!(bivariate_cdf(f64::INFINITY, f64::INFINITY, 0.4), 1.0);
        assert_eq!(bivariate_cdf(0.1, 0.7, 1.0), std_normal_cdf(0.1));
        assert_eq!(bivariate_cdf(0.1, -0.7, -1.0), 0.0);
    }

    #[test]
    fn stability_examples() {
        assert!((gamma_bar(0.5, 0.0, 0.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((gamma_bar(0.0, 0.2, -0.4).unwrap() + 0.08).abs() < 1e-12);
        assert_eq!(gamma_bar(1.0, 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(gamma_under(1.0, 0.0, 0.0).unwrap(), -1.0);
        assert!(gamma_bar(0.5, 1.2, 0.0).is_err());
    }

    #[test]
    fn threshold_strategies() {
        let p = ThresholdStrategy::for_mean(0.3).unwrap();
        assert!((p.mean() - 0.3).abs() < 1e-12);
        let q = ThresholdStrategy::antipodal_for_mean(0.3).unwrap();
        assert!((q.mean() - 0.3).abs() < 1e-12);
        let one = ThresholdStrategy::for_mean(1.0).unwrap();
        assert_eq!(one.eval(1e300), 1.0);
    }

    #[test]
    fn berry_esseen_examples() {
        assert_eq!(berry_esseen_sample_count(0.5, 0.25, 0.1, 1.0).unwrap(), 4800);
        assert_eq!(berry_esseen_sample_count(0.0, 0.5, 1.0, 1.0).unwrap(), 2);
        assert_eq!(berry_esseen_sample_count(0.5, 1.0 / 3.0, 0.1, 1.0).unwrap(), 3600);
        assert_eq!(berry_esseen_sample_count(0.5, 0.25, 0.05, 1.0).unwrap(), 19200);
        let a = berry_esseen_raw(0.3, 0.2, 0.2, 1.0).unwrap();
        let b = berry_esseen_raw(0.3, 0.2, 0.1, 1.0).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
        assert!(matches!(berry_esseen_sample_count(1.0, 0.25, 0.1, 1.0), Err(Error::Undefined(_))));
    }

    #[test]
    fn pair_sampling_is_seeded() {
        let g = GaussianPair::new(0.4).unwrap();
        assert_eq!(g.sample(10, 1), g.sample(10, 1));
        let s = g.sample(200_000, 2);
        let c: f64 = s.iter().map(|(a, b)| a * b).sum::<f64>() / s.len() as f64;
        assert!((c - 0.4).abs() < 0.015);
    }
}
