//! Witsenhausen's rounding: strategies on `𝒜^h × ℝ` are lifted to strategies
//! on `𝒜^{h+w}` by replacing the Gaussian with a normalized sum of witness
//! values over `w` fresh samples.

use rand::distributions::Distribution;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::gaussian::{std_normal_cdf, ThresholdStrategy};
use crate::maxcorr::maximal_correlation;
use crate::prob::{digits, from_digits, stream_rng, EmpiricalJoint2x2, JointDistribution, JointSampler};

/// Exact enumeration is used while `|support|^n` stays at or below this.
pub const EXACT_STATS_CAP: f64 = 1e8;
const CHUNK: u64 = 1 << 16;
/// Witness values carry rounding noise; sums this close to a threshold are ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    /// Row side, `𝒜`.
    A,
    /// Column side, `ℬ`.
    B,
}

/// Which side of the inner threshold is +1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `+1` iff `r ≥ t(x)`.
    Standard,
    /// `+1` iff `r < t(x)`.
    Antipodal,
}

/// `f₂(x, r)` determined by a threshold per prefix `x ∈ 𝒜^h`.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridStrategy {
    pub h: usize,
    /// Indexed by the base-q code of the prefix; ±∞ allowed.
    pub inner: Vec<f64>,
    pub form: Form,
}

impl HybridStrategy {
    /// Thresholds chosen so the conditional mean given the prefix is `means[x]`.
    pub fn from_means(h: usize, means: &[f64], form: Form) -> Result<Self> {
        let inner = means
            .iter()
            .map(|&m| {
                if !(-1.0..=1.0).contains(&m) {
                    return param(format!("conditional mean {m} outside [-1, 1]"));
                }
                let p = (1.0 - m) / 2.0;
                Ok(match form {
                    Form::Standard => crate::gaussian::threshold_for_prob(p),
                    Form::Antipodal => crate::gaussian::threshold_for_prob(1.0 - p),
                })
            })
            .collect::<Result<_>>()?;
        Ok(HybridStrategy { h, inner, form })
    }

    /// `E[f₂(x, r) | x]` for a standard normal r.
    pub fn conditional_mean(&self, prefix: usize) -> f64 {
        let below = 2.0 * std_normal_cdf(self.inner[prefix]) - 1.0;
        match self.form {
            Form::Standard => -below,
            Form::Antipodal => below,
        }
        .clamp(-1.0, 1.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LiftedFile {
    h: usize,
    w: usize,
    q: usize,
    prefix_means: Vec<f64>,
    witness: Vec<f64>,
    form: Form,
}

/// `f₃(x₁, x₂) = P_{ν(x₁)}(x₂)` on `𝒜^{h+w}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "LiftedFile", into = "LiftedFile")]
pub struct LiftedStrategy {
    h: usize,
    w: usize,
    q: usize,
    prefix_means: Vec<f64>,
    witness: Vec<f64>,
    form: Form,
    thresholds: Vec<ThresholdStrategy>,
}

impl TryFrom<LiftedFile> for LiftedStrategy {
    type Error = Error;

    fn try_from(f: LiftedFile) -> Result<Self> {
        LiftedStrategy::new(f.h, f.w, f.q, f.prefix_means, f.witness, f.form)
    }
}

impl From<LiftedStrategy> for LiftedFile {
    fn from(s: LiftedStrategy) -> Self {
        LiftedFile { h: s.h, w: s.w, q: s.q, prefix_means: s.prefix_means, witness: s.witness, form: s.form }
    }
}

impl LiftedStrategy {
    pub fn new(h: usize, w: usize, q: usize, prefix_means: Vec<f64>, witness: Vec<f64>, form: Form) -> Result<Self> {
        if w == 0 {
            return param("lifted strategy needs w >= 1");
        }
        if witness.len() != q {
            return Err(Error::Shape(format!("witness has {} values for {q} atoms", witness.len())));
        }
        let prefixes = q.checked_pow(h as u32).filter(|&c| c <= 1 << 24);
        if prefixes != Some(prefix_means.len()) {
            return Err(Error::Shape(format!("{} prefix means for q = {q}, h = {h}", prefix_means.len())));
        }
        let prefix_means: Vec<f64> = prefix_means.into_iter().map(|m| m.clamp(-1.0, 1.0)).collect();
        let thresholds = prefix_means
            .iter()
            .map(|&m| match form {
                Form::Standard => ThresholdStrategy::for_mean(m),
                Form::Antipodal => ThresholdStrategy::antipodal_for_mean(m),
            })
            .collect::<Result<_>>()?;
        Ok(LiftedStrategy { h, w, q, prefix_means, witness, form, thresholds })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn n(&self) -> usize {
        self.h + self.w
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn prefix_means(&self) -> &[f64] {
        &self.prefix_means
    }

    pub fn witness(&self) -> &[f64] {
        &self.witness
    }

    /// Value given the prefix code and the normalized witness sum. Sums
    /// within [`TIE_TOL`] of the threshold count as equal to it, so ties do
    /// not depend on summation order.
    pub fn eval_sum(&self, prefix: usize, f: f64) -> f64 {
        let t = &self.thresholds[prefix];
        let f = if (f - t.threshold).abs() <= TIE_TOL { t.threshold } else { f };
        t.eval(f)
    }

    pub fn eval(&self, x: &[usize]) -> f64 {
        let prefix = from_digits(&x[..self.h], self.q);
        let s: f64 = x[self.h..].iter().map(|&a| self.witness[a]).sum();
        self.eval_sum(prefix, s / (self.w as f64).sqrt())
    }
}

/// A strategy of one party on `n` coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Values in [−1, 1] indexed by the base-q code of the point.
    Table {
        n: usize,
        values: Vec<f64>,
    },
    Lifted(LiftedStrategy),
}

impl Strategy {
    pub fn constant(n: usize, q: usize, v: f64) -> Strategy {
        Strategy::Table { n, values: vec![v; q.pow(n as u32)] }
    }

    pub fn n(&self) -> usize {
        match self {
            Strategy::Table { n, .. } => *n,
            Strategy::Lifted(l) => l.n(),
        }
    }

    pub fn eval(&self, x: &[usize], q: usize) -> f64 {
        match self {
            Strategy::Table { values, .. } => values[from_digits(x, q)],
            Strategy::Lifted(l) => l.eval(x),
        }
    }

    fn check(&self, q: usize, name: &str) -> Result<()> {
        match self {
            Strategy::Table { n, values } => {
                let len = q.checked_pow(*n as u32);
                if len != Some(values.len()) {
                    return Err(Error::Input(format!("{name} has {} values, expected {q}^{n}", values.len())));
                }
                if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
                    return Err(Error::Input(format!("{name} takes value {v} outside [-1, 1]")));
                }
            }
            Strategy::Lifted(l) if l.q != q => {
                return Err(Error::Input(format!("{name} is lifted over {} atoms, space has {q}", l.q)));
            }
            Strategy::Lifted(_) => {}
        }
        Ok(())
    }
}

fn witnesses(dist: &JointDistribution) -> Result<(Vec<f64>, Vec<f64>)> {
    let rep = maximal_correlation(dist)?;
    if rep.degenerate {
        return Err(Error::Precondition("a side with a single atom gives no witness to sum".into()));
    }
    Ok((rep.f_witness, rep.g_witness))
}

/// `P_{ν₁}` on `𝒜^w` and `Q_{ν₂}` on `ℬ^w`: threshold the normalized witness sums.
pub fn gaussian_simulator_strategy(
    dist: &JointDistribution,
    nu_f: f64,
    nu_g: f64,
    w: usize,
) -> Result<(LiftedStrategy, LiftedStrategy)> {
    let (wf, wg) = witnesses(dist)?;
    Ok((
        LiftedStrategy::new(0, w, dist.n_rows(), vec![nu_f], wf, Form::Standard)?,
        LiftedStrategy::new(0, w, dist.n_cols(), vec![nu_g], wg, Form::Standard)?,
    ))
}

/// Lifts `strat` for `party` with `w` witness samples after the prefix.
pub fn lift_hybrid(strat: &HybridStrategy, party: Party, dist: &JointDistribution, w: usize) -> Result<LiftedStrategy> {
    let (wf, wg) = witnesses(dist)?;
    let (witness, q) = match party {
        Party::A => (wf, dist.n_rows()),
        Party::B => (wg, dist.n_cols()),
    };
    let means = (0..strat.inner.len()).map(|k| strat.conditional_mean(k)).collect();
    LiftedStrategy::new(strat.h, w, q, means, witness, strat.form)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsMode {
    /// Exact when the support power fits [`EXACT_STATS_CAP`], else sampled.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyStats {
    pub mean_f: f64,
    pub mean_g: f64,
    pub mean_fg: f64,
    pub se_f: f64,
    pub se_g: f64,
    pub se_fg: f64,
    /// `E[(1±f)(1±g)/4]`, the law of independently rounded outputs.
    pub table: EmpiricalJoint2x2,
    pub exact: bool,
    pub samples: u64,
}

/// Running sums: f, g, fg, f², g², (fg)², then the four cells.
type Sums = [f64; 10];

fn accumulate(s: &mut Sums, f: f64, g: f64, weight: f64) {
    let fg = f * g;
    s[0] += weight * f;
    s[1] += weight * g;
    s[2] += weight * fg;
    s[3] += weight * f * f;
    s[4] += weight * g * g;
    s[5] += weight * fg * fg;
    s[6] += weight * (1.0 + f) * (1.0 + g) / 4.0;
    s[7] += weight * (1.0 + f) * (1.0 - g) / 4.0;
    s[8] += weight * (1.0 - f) * (1.0 + g) / 4.0;
    s[9] += weight * (1.0 - f) * (1.0 - g) / 4.0;
}

fn add(mut a: Sums, b: &Sums) -> Sums {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// Means, standard errors and the induced 2×2 law of `(f(x), g(y))` under
/// `dist^{⊗n}`.
pub fn estimate_strategy_stats(
    f: &Strategy,
    g: &Strategy,
    dist: &JointDistribution,
    samples: u64,
    seed: u64,
    mode: StatsMode,
) -> Result<StrategyStats> {
    let n = f.n();
    if g.n() != n {
        return Err(Error::Input(format!("strategies act on {} and {} coordinates", n, g.n())));
    }
    f.check(dist.n_rows(), "f")?;
    g.check(dist.n_cols(), "g")?;
    let support: Vec<(usize, usize, f64)> = dist.support().collect();
    let fits = (support.len() as f64).powi(n as i32) <= EXACT_STATS_CAP;
    let exact = match mode {
        StatsMode::Exact if !fits => {
            return Err(Error::Resource(format!(
                "{}^{n} support tuples exceed the enumeration cap {EXACT_STATS_CAP:e}",
                support.len()
            )))
        }
        StatsMode::Exact => true,
        StatsMode::Auto => fits,
        StatsMode::MonteCarlo => false,
    };
    if exact {
        let sums = enumerate(f, g, dist, &support, n);
        return finish(sums, 1.0, true, None);
    }
    if samples < 2 {
        return param("Monte Carlo estimates need at least two samples");
    }
    let sums = match (f, g) {
        (Strategy::Lifted(a), Strategy::Lifted(b)) if a.h == b.h && a.w == b.w => {
            let sampler = JointSampler::new(dist);
            run_chunks(samples, seed, |rng, count, s| {
                for _ in 0..count {
                    let (fv, gv) = lifted_pair_draw(a, b, &sampler, &support, rng);
                    accumulate(s, fv, gv, 1.0);
                }
            })
        }
        _ => {
            let sampler = JointSampler::new(dist);
            let (qa, qb) = (dist.n_rows(), dist.n_cols());
            run_chunks(samples, seed, |rng, count, s| {
                let mut x = vec![0usize; n];
                let mut y = vec![0usize; n];
                for _ in 0..count {
                    for i in 0..n {
                        (x[i], y[i]) = sampler.sample(rng);
                    }
                    accumulate(s, f.eval(&x, qa), g.eval(&y, qb), 1.0);
                }
            })
        }
    };
    finish(sums, samples as f64, false, Some(samples))
}

/// Splits `samples` into fixed chunks, each with its own seed stream, so the
/// result does not depend on the thread count.
fn run_chunks<F>(samples: u64, seed: u64, body: F) -> Sums
where
    F: Fn(&mut ChaCha8Rng, u64, &mut Sums) + Sync,
{
    let chunks: Vec<Sums> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c);
            let mut s = [0.0; 10];
            body(&mut rng, CHUNK.min(samples - c * CHUNK), &mut s);
            s
        })
        .collect();
    chunks.iter().fold([0.0; 10], add)
}

fn enumerate(f: &Strategy, g: &Strategy, dist: &JointDistribution, support: &[(usize, usize, f64)], n: usize) -> Sums {
    let total = support.len().pow(n as u32) as u64;
    let (qa, qb) = (dist.n_rows(), dist.n_cols());
    let chunks: Vec<Sums> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = [0.0; 10];
            let mut k = vec![0usize; n];
            let mut x = vec![0usize; n];
            let mut y = vec![0usize; n];
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                digits(idx as usize, support.len(), &mut k);
                let mut p = 1.0;
                for i in 0..n {
                    let (a, b, m) = support[k[i]];
                    x[i] = a;
                    y[i] = b;
                    p *= m;
                }
                accumulate(&mut s, f.eval(&x, qa), g.eval(&y, qb), p);
            }
            s
        })
        .collect();
    chunks.iter().fold([0.0; 10], add)
}

/// One draw for two lifted strategies sharing `(h, w)`: the suffix only
/// matters through how often each support pair occurs, so counts are drawn
/// as a multinomial by sequential binomials.
fn lifted_pair_draw(
    a: &LiftedStrategy,
    b: &LiftedStrategy,
    sampler: &JointSampler,
    support: &[(usize, usize, f64)],
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let (mut pa, mut pb) = (0usize, 0usize);
    for _ in 0..a.h {
        let (x, y) = sampler.sample(rng);
        pa = pa * a.q + x;
        pb = pb * b.q + y;
    }
    let (mut fs, mut gs) = (0.0, 0.0);
    let mut rem = a.w as u64;
    let mut mass = 1.0;
    for (k, &(x, y, p)) in support.iter().enumerate() {
        if rem == 0 {
            break;
        }
        let c = if k + 1 == support.len() {
            rem
        } else {
            let pr = (p / mass).clamp(0.0, 1.0);
            Binomial::new(rem, pr).expect("probability in [0, 1]").sample(rng)
        };
        rem -= c;
        mass -= p;
        fs += c as f64 * a.witness[x];
        gs += c as f64 * b.witness[y];
    }
    let scale = 1.0 / (a.w as f64).sqrt();
    (a.eval_sum(pa, fs * scale), b.eval_sum(pb, gs * scale))
}

fn finish(s: Sums, total: f64, exact: bool, samples: Option<u64>) -> Result<StrategyStats> {
    let m: Vec<f64> = s.iter().map(|v| v / total).collect();
    let se = |mean: f64, sq: f64| {
        if exact {
            0.0
        } else {
            ((sq - mean * mean).max(0.0) / (total - 1.0)).sqrt()
        }
    };
    let mut cells = [m[6], m[7], m[8], m[9]];
    cells.iter_mut().for_each(|c| *c = c.clamp(0.0, 1.0));
    let mut table = EmpiricalJoint2x2::from_probs(cells)?;
    table.samples = samples;
    Ok(StrategyStats {
        mean_f: m[0],
        mean_g: m[1],
        mean_fg: m[2],
        se_f: se(m[0], m[3]),
        se_g: se(m[1], m[4]),
        se_fg: se(m[2], m[5]),
        table,
        exact,
        samples: samples.unwrap_or(0),
    })
}
