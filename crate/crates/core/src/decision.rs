//! The decision layer: the n₀ parameter chain, the grid search for balanced
//! inner products, rounding of [−1, 1] strategies, and the gap decision for
//! 2×2 targets.

use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::gaussian::berry_esseen_sample_count;
use crate::maxcorr::maximal_correlation;
use crate::num::{ceil_tol, Magnitude};
use crate::prob::{
    from_digits, seeded_rng, stream_rng, tensor_power_capped, EmpiricalJoint2x2, FiniteSpace, JointDistribution,
    JointSampler, DEFAULT_CELL_CAP,
};
use crate::regularity::{smoothing_params_ln, RegularityParams, SmoothingParams};
use crate::rounding::Strategy;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainConstants {
    pub c_smooth: f64,
    pub c_tau: f64,
    pub c_be: f64,
}

impl Default for ChainConstants {
    fn default() -> Self {
        ChainConstants { c_smooth: 1.0, c_tau: 1.0, c_be: 1.0 }
    }
}

/// Source quantities the chain depends on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainInputs {
    pub rho: f64,
    /// Smallest nonzero mass of the joint table.
    pub alpha: f64,
    /// Smallest masses of the two marginals.
    pub alpha_a: f64,
    pub alpha_b: f64,
}

impl ChainInputs {
    pub fn of(dist: &JointDistribution) -> Result<Self> {
        Ok(ChainInputs {
            rho: maximal_correlation(dist)?.rho,
            alpha: dist.alpha_min(),
            alpha_a: dist.rows().alpha(),
            alpha_b: dist.cols().alpha(),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParameterChain {
    pub delta: f64,
    pub inputs: ChainInputs,
    pub lambda: f64,
    pub gamma_budget: f64,
    pub zeta: f64,
    /// τ = γ^k.
    pub tau_exponent: u64,
    pub tau: f64,
    pub ln_tau: f64,
    pub eta: f64,
    pub ln_eta: f64,
    pub smoothing: SmoothingParams,
    pub d: usize,
    pub regularity: RegularityParams,
    pub h: Magnitude,
    pub w: u64,
    pub n0: Magnitude,
    pub constants: ChainConstants,
    /// All three absolute constants are at their default of 1.
    pub default_constants: bool,
}

/// `n₀ = h + w` with λ = γ = ζ = δ/3.
pub fn n0_chain(dist: &JointDistribution, delta: f64, constants: ChainConstants) -> Result<ParameterChain> {
    n0_chain_from(ChainInputs::of(dist)?, delta, constants)
}

pub fn n0_chain_from(inputs: ChainInputs, delta: f64, constants: ChainConstants) -> Result<ParameterChain> {
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("gap delta {delta} outside (0, 1)"));
    }
    let ChainInputs { rho, alpha, alpha_a, alpha_b } = inputs;
    if rho >= 1.0 {
        return Err(Error::Undefined("the chain is undefined at maximal correlation 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return param(format!("smallest atom mass {alpha} outside (0, 1/2]"));
    }
    if !(constants.c_tau > 0.0) {
        return param(format!("constant C_tau = {} must be positive", constants.c_tau));
    }
    let budget = delta / 3.0;
    let ln_inv = -budget.ln();
    let k = ceil_tol(constants.c_tau * ln_inv * (1.0 / alpha).ln() / ((1.0 - rho) * budget)).max(1.0);
    if k > 1e15 {
        return Err(Error::Resource(format!("tau exponent {k:e} is too large")));
    }
    let ln_tau = -k * ln_inv;
    let ln_eta = 2.0 * ln_tau - 16f64.ln();
    let smoothing = smoothing_params_ln(rho, budget.ln(), ln_eta, constants.c_smooth)?;
    let regularity = RegularityParams::joint_ln(alpha_a, alpha_b, smoothing.d, ln_tau)?;
    let w = berry_esseen_sample_count(rho, alpha, budget, constants.c_be)?;
    let h = regularity.h_bound;
    let n0 = h.add(&Magnitude::from_u64(w));
    Ok(ParameterChain {
        delta,
        inputs,
        lambda: budget,
        gamma_budget: budget,
        zeta: budget,
        tau_exponent: k as u64,
        tau: ln_tau.exp(),
        ln_tau,
        eta: ln_eta.exp(),
        ln_eta,
        d: smoothing.d,
        smoothing,
        regularity,
        h,
        w,
        n0,
        constants,
        default_constants: constants == ChainConstants::default(),
    })
}

/// Spacing `δ²/10` of the value grid.
pub fn grid_step(delta: f64) -> f64 {
    delta * delta / 10.0
}

fn grid_kmax(delta: f64) -> i64 {
    ceil_tol(10.0 / (delta * delta)) as i64 - 1
}

/// `{kδ²/10 : |k| < 10/δ²}`.
pub fn discretize_range(delta: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    let kmax = grid_kmax(delta);
    if kmax > 50_000_000 {
        return Err(Error::Resource(format!("grid with {} values is too large to list", 2 * kmax + 1)));
    }
    Ok((-kmax..=kmax).map(|k| k as f64 * delta * delta / 10.0).collect())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return param(format!("gap delta {delta} outside (0, 1]"));
    }
    Ok(())
}

/// Nearest point of the search grid: the value grid plus the endpoints ±1.
pub fn snap_to_grid(v: f64, delta: f64) -> f64 {
    if v >= 1.0 || v <= -1.0 {
        return v.signum();
    }
    let kmax = grid_kmax(delta);
    let k = ((v / grid_step(delta)).round() as i64).clamp(-kmax, kmax);
    let snapped = k as f64 * delta * delta / 10.0;
    // an endpoint can be closer than the last interior point
    if (v.abs() - 1.0).abs() < (v - snapped).abs() {
        v.signum()
    } else {
        snapped
    }
}

/// Direction of the correlation requirement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `E[fg] ≥ threshold`.
    AtLeast,
    /// `E[fg] ≤ threshold`.
    AtMost,
}

/// Constraints of one search: `|E[f] − center_f| ≤ cap_f`, likewise for g,
/// and the correlation requirement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub center_f: f64,
    pub center_g: f64,
    pub cap_f: f64,
    pub cap_g: f64,
    pub corr_threshold: f64,
    pub sense: Sense,
    /// Added to the caps when checking a grid witness.
    pub mean_slack: f64,
    /// Subtracted from (or added to) the correlation threshold likewise.
    pub corr_slack: f64,
}

impl Thresholds {
    pub fn balanced(cap_f: f64, cap_g: f64, rho_target: f64, delta: f64) -> Self {
        Thresholds {
            center_f: 0.0,
            center_g: 0.0,
            cap_f,
            cap_g,
            corr_threshold: rho_target,
            sense: Sense::AtLeast,
            mean_slack: delta * delta / 5.0,
            corr_slack: delta * delta / 4.0,
        }
    }

    /// Whether exact statistics of a witness meet the slackened constraints.
    pub fn admits(&self, a: &Achieved) -> bool {
        const TOL: f64 = 1e-12;
        let mean_ok = (a.mean_f - self.center_f).abs() <= self.cap_f + self.mean_slack + TOL
            && (a.mean_g - self.center_g).abs() <= self.cap_g + self.mean_slack + TOL;
        let corr_ok = match self.sense {
            Sense::AtLeast => a.mean_fg >= self.corr_threshold - self.corr_slack - TOL,
            Sense::AtMost => a.mean_fg <= self.corr_threshold + self.corr_slack + TOL,
        };
        mean_ok && corr_ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Achieved {
    pub mean_f: f64,
    pub mean_g: f64,
    pub mean_fg: f64,
}

/// Strategy values indexed by the base-q codes of `𝒜ⁿ` and `ℬⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub n: usize,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl Witness {
    pub fn strategies(&self) -> (Strategy, Strategy) {
        (Strategy::Table { n: self.n, values: self.f.clone() }, Strategy::Table { n: self.n, values: self.g.clone() })
    }

    /// Exact moments under `dist^{⊗n}`.
    pub fn achieved(&self, dist: &JointDistribution) -> Result<Achieved> {
        let t = tensor_power_capped(dist, self.n, DEFAULT_CELL_CAP)?;
        if self.f.len() != t.n_rows() || self.g.len() != t.n_cols() {
            return Err(Error::Shape(format!(
                "witness of sizes {}x{} for a {}x{} table",
                self.f.len(),
                self.g.len(),
                t.n_rows(),
                t.n_cols()
            )));
        }
        Ok(Achieved {
            mean_f: t.mean_rows(&self.f),
            mean_g: t.mean_cols(&self.g),
            mean_fg: t.expect_product(&self.f, &self.g),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

/// Outcome at one depth n.
#[derive(Clone, Debug, Serialize)]
pub struct DepthReport {
    pub n: usize,
    /// Best continuous value of the objective under the exact caps.
    pub optimum: f64,
    /// Best continuous value with caps widened by the mean slack.
    pub relaxed_optimum: f64,
    pub accepted: bool,
    /// For a rejection: no grid witness can pass at this depth.
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub thresholds: Thresholds,
    /// Depth of the accepting witness.
    pub n: Option<usize>,
    pub witness: Option<Witness>,
    pub achieved: Option<Achieved>,
    /// Witness moved toward the target's constant means so its correlation
    /// matches the target, for rounding into a simulation.
    pub calibrated: Option<Witness>,
    pub calibrated_achieved: Option<Achieved>,
    pub depths: Vec<DepthReport>,
    /// Set on rejection: the search only covered depths up to `n_search`.
    pub bounded_depth: bool,
    pub caveat: Option<String>,
    pub n0: Option<Magnitude>,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Branch-and-bound node limit per depth.
    pub work_cap: u64,
    pub constants: ChainConstants,
    /// Attach `n₀` from the parameter chain to rejections.
    pub report_n0: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { work_cap: 200_000_000, constants: ChainConstants::default(), report_n0: true }
    }
}

/// A bilinear program `max fᵀMg` over boxes with one mean interval per side.
struct Bilinear {
    m: usize,
    k: usize,
    mat: Vec<f64>,
    wa: Vec<f64>,
    wb: Vec<f64>,
    f_range: (f64, f64),
    g_range: (f64, f64),
}

#[derive(Clone, Debug)]
struct Optimum {
    value: f64,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl Bilinear {
    fn transpose(&self) -> Bilinear {
        let mut t = vec![0.0; self.m * self.k];
        for x in 0..self.m {
            for y in 0..self.k {
                t[y * self.m + x] = self.mat[x * self.k + y];
            }
        }
        Bilinear {
            m: self.k,
            k: self.m,
            mat: t,
            wa: self.wb.clone(),
            wb: self.wa.clone(),
            f_range: self.g_range,
            g_range: self.f_range,
        }
    }

    fn row(&self, x: usize) -> &[f64] {
        &self.mat[x * self.k..(x + 1) * self.k]
    }
}

/// `max cᵀg` over `g ∈ [−1,1]^k` with `lo ≤ w·g ≤ hi`; `None` if infeasible.
fn box_lp(c: &[f64], w: &[f64], (lo, hi): (f64, f64)) -> Option<(f64, Vec<f64>)> {
    if lo > 1.0 + 1e-12 || hi < -1.0 - 1e-12 || lo > hi {
        return None;
    }
    let mut g: Vec<f64> = c.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
    let mut mean: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
    let (dir, need) = if mean > hi {
        (-1.0, mean - hi)
    } else if mean < lo {
        (1.0, lo - mean)
    } else {
        (0.0, 0.0)
    };
    if dir != 0.0 {
        // move the coordinates that lose least per unit of mass first
        let mut order: Vec<usize> = (0..c.len()).filter(|&y| g[y] == -dir).collect();
        order.sort_by(|&a, &b| (-dir * c[a] / w[a]).total_cmp(&(-dir * c[b] / w[b])).then(a.cmp(&b)));
        let mut left = need;
        for y in order {
            let room = 2.0 * w[y];
            if room >= left {
                g[y] = -dir + dir * left / w[y];
                left = 0.0;
                break;
            }
            g[y] = dir;
            left -= room;
        }
        if left > 1e-12 {
            return None;
        }
        mean = g.iter().zip(w).map(|(a, b)| a * b).sum();
        debug_assert!(mean >= lo - 1e-9 && mean <= hi + 1e-9);
    }
    let value = c.iter().zip(&g).map(|(a, b)| a * b).sum();
    Some((value, g))
}

/// Order-preserving map from f64 to u64 for an atomic running maximum.
fn key(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn unkey(k: u64) -> f64 {
    if k >> 63 == 1 {
        f64::from_bits(k & !(1 << 63))
    } else {
        f64::from_bits(!k)
    }
}

/// Nodes whose bound is below the best value by more than this are pruned.
const PRUNE_MARGIN: f64 = 1e-9;
const SPLIT_DEPTH: usize = 5;
const FEAS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Choice {
    Plus,
    Minus,
    Frac,
}

struct Dfs<'a> {
    p: &'a Bilinear,
    tail: &'a [f64],
    shared: &'a AtomicU64,
    work: &'a AtomicU64,
    abort: &'a AtomicBool,
    cap: u64,
    nodes: u64,
    f: Vec<f64>,
    c: Vec<Vec<f64>>,
    mean: Vec<f64>,
    frac: Option<usize>,
    best: Option<Optimum>,
}

impl Dfs<'_> {
    fn apply(&mut self, j: usize, choice: Choice) {
        let (s, frac) = match choice {
            Choice::Plus => (1.0, false),
            Choice::Minus => (-1.0, false),
            Choice::Frac => (0.0, true),
        };
        if frac {
            self.frac = Some(j);
        }
        self.f[j] = s;
        let (head, rest) = self.c.split_at_mut(j + 1);
        let row = self.p.row(j);
        for ((out, prev), r) in rest[0].iter_mut().zip(&head[j]).zip(row) {
            *out = prev + s * r;
        }
        self.mean[j + 1] = self.mean[j] + s * self.p.wa[j];
    }

    fn undo(&mut self, choice: Choice) {
        if choice == Choice::Frac {
            self.frac = None;
        }
    }

    fn run(&mut self, j: usize) {
        if self.abort.load(Ordering::Relaxed) {
            return;
        }
        self.nodes += 1;
        if self.nodes.is_multiple_of(4096) && self.work.fetch_add(4096, Ordering::Relaxed) + 4096 > self.cap {
            self.abort.store(true, Ordering::Relaxed);
            return;
        }
        let free = self.tail[j] + self.frac.map_or(0.0, |x| self.p.wa[x]);
        let (lo, hi) = self.p.f_range;
        if self.mean[j] + free < lo - FEAS_TOL || self.mean[j] - free > hi + FEAS_TOL {
            return;
        }
        let bound: f64 = self.c[j].iter().map(|v| v.abs()).sum::<f64>() + free;
        if bound < unkey(self.shared.load(Ordering::Relaxed)) - PRUNE_MARGIN {
            return;
        }
        if j == self.p.m {
            self.leaf();
            return;
        }
        for choice in [Choice::Plus, Choice::Minus, Choice::Frac] {
            if choice == Choice::Frac && self.frac.is_some() {
                continue;
            }
            self.apply(j, choice);
            self.run(j + 1);
            self.undo(choice);
        }
    }

    fn leaf(&mut self) {
        let m = self.p.m;
        let (lo, hi) = self.p.f_range;
        match self.frac {
            None => {
                let mean = self.mean[m];
                if mean >= lo - FEAS_TOL && mean <= hi + FEAS_TOL {
                    let c = self.c[m].clone();
                    self.consider(&c, self.f.clone());
                }
            }
            Some(x) => {
                let bounds: &[f64] = if lo == hi { &[lo] } else { &[lo, hi] };
                for &b in bounds {
                    let t = (b - self.mean[m]) / self.p.wa[x];
                    if t > -1.0 && t < 1.0 {
                        let c: Vec<f64> = self.c[m].iter().zip(self.p.row(x)).map(|(a, r)| a + t * r).collect();
                        let mut f = self.f.clone();
                        f[x] = t;
                        self.consider(&c, f);
                    }
                }
            }
        }
    }

    fn consider(&mut self, c: &[f64], f: Vec<f64>) {
        if let Some((value, g)) = box_lp(c, &self.p.wb, self.p.g_range) {
            if self.best.as_ref().is_none_or(|b| value > b.value) {
                self.shared.fetch_max(key(value), Ordering::Relaxed);
                self.best = Some(Optimum { value, f, g });
            }
        }
    }
}

/// Exact maximum of the bilinear program: vertices of the smaller side's
/// polytope (±1 coordinates with at most one fractional one on a mean
/// boundary) by branch and bound, the other side by its box LP.
fn solve_bilinear(p: &Bilinear, work_cap: u64) -> Result<Option<Optimum>> {
    if p.m > p.k {
        return Ok(solve_bilinear(&p.transpose(), work_cap)?.map(|o| Optimum { value: o.value, f: o.g, g: o.f }));
    }
    let m = p.m;
    let mut tail = vec![0.0; m + 1];
    for x in (0..m).rev() {
        tail[x] = tail[x + 1] + p.wa[x];
    }
    let split = SPLIT_DEPTH.min(m);
    let mut prefixes: Vec<Vec<Choice>> = vec![vec![]];
    for _ in 0..split {
        prefixes = prefixes
            .into_iter()
            .flat_map(|pre| {
                let has_frac = pre.contains(&Choice::Frac);
                [Choice::Plus, Choice::Minus, Choice::Frac]
                    .into_iter()
                    .filter(move |c| !(has_frac && *c == Choice::Frac))
                    .map(move |c| {
                        let mut v = pre.clone();
                        v.push(c);
                        v
                    })
            })
            .collect();
    }
    let shared = AtomicU64::new(key(f64::NEG_INFINITY));
    let work = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let results: Vec<Option<Optimum>> = prefixes
        .par_iter()
        .map(|pre| {
            let mut dfs = Dfs {
                p,
                tail: &tail,
                shared: &shared,
                work: &work,
                abort: &abort,
                cap: work_cap,
                nodes: 0,
                f: vec![0.0; m],
                c: vec![vec![0.0; p.k]; m + 1],
                mean: vec![0.0; m + 1],
                frac: None,
                best: None,
            };
            for (j, &ch) in pre.iter().enumerate() {
                dfs.apply(j, ch);
            }
            dfs.run(split);
            dfs.best
        })
        .collect();
    if abort.load(Ordering::Relaxed) {
        return Err(Error::Resource(format!(
            "branch and bound exceeded the work cap of {work_cap} nodes on a {}x{} table",
            p.m, p.k
        )));
    }
    let mut best: Option<Optimum> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    Ok(best)
}

fn mean_range(center: f64, cap: f64) -> (f64, f64) {
    ((center - cap).max(-1.0), (center + cap).min(1.0))
}

/// One depth of the search in maximization form (`Sense::AtLeast`).
fn search_depth(
    dist: &JointDistribution,
    n: usize,
    th: &Thresholds,
    delta: f64,
    work_cap: u64,
) -> Result<(DepthReport, Option<(Witness, Achieved)>)> {
    debug_assert_eq!(th.sense, Sense::AtLeast);
    let t = tensor_power_capped(dist, n, DEFAULT_CELL_CAP)?;
    let build = |extra: f64| Bilinear {
        m: t.n_rows(),
        k: t.n_cols(),
        mat: t.table().to_vec(),
        wa: t.rows().probs().to_vec(),
        wb: t.cols().probs().to_vec(),
        f_range: mean_range(th.center_f, th.cap_f + extra),
        g_range: mean_range(th.center_g, th.cap_g + extra),
    };
    let exact = solve_bilinear(&build(0.0), work_cap)?;
    let relaxed = solve_bilinear(&build(th.mean_slack), work_cap)?;
    let value = |o: &Option<Optimum>| o.as_ref().map_or(f64::NEG_INFINITY, |o| o.value);
    let mut report =
        DepthReport { n, optimum: value(&exact), relaxed_optimum: value(&relaxed), accepted: false, certified: false };
    for cand in [&exact, &relaxed].into_iter().flatten() {
        let w = Witness {
            n,
            f: cand.f.iter().map(|&v| snap_to_grid(v, delta)).collect(),
            g: cand.g.iter().map(|&v| snap_to_grid(v, delta)).collect(),
        };
        let a =
            Achieved { mean_f: t.mean_rows(&w.f), mean_g: t.mean_cols(&w.g), mean_fg: t.expect_product(&w.f, &w.g) };
        if th.admits(&a) {
            report.accepted = true;
            report.certified = true;
            return Ok((report, Some((w, a))));
        }
    }
    report.certified = report.relaxed_optimum < th.corr_threshold - th.corr_slack;
    Ok((report, None))
}

/// Case II searches minimize `E[fg]`; they run as maximization with g negated.
fn negate_g(th: &Thresholds) -> Thresholds {
    Thresholds { center_g: -th.center_g, corr_threshold: -th.corr_threshold, sense: Sense::AtLeast, ..*th }
}

fn search_depth_any(
    dist: &JointDistribution,
    n: usize,
    th: &Thresholds,
    delta: f64,
    work_cap: u64,
) -> Result<(DepthReport, Option<(Witness, Achieved)>)> {
    match th.sense {
        Sense::AtLeast => search_depth(dist, n, th, delta, work_cap),
        Sense::AtMost => {
            let (mut rep, found) = search_depth(dist, n, &negate_g(th), delta, work_cap)?;
            rep.optimum = -rep.optimum;
            rep.relaxed_optimum = -rep.relaxed_optimum;
            let found = found.map(|(mut w, a)| {
                w.g.iter_mut().for_each(|v| *v = -*v);
                (w, Achieved { mean_f: a.mean_f, mean_g: -a.mean_g, mean_fg: -a.mean_fg })
            });
            Ok((rep, found))
        }
    }
}

/// Grid search at depth n for balanced strategies with `E[fg] ≥ rho_target`.
pub fn brute_force_bmip(
    dist: &JointDistribution,
    n: usize,
    rho_target: f64,
    delta: f64,
    caps: (f64, f64),
    opts: &SearchOptions,
) -> Result<Verdict> {
    check_delta(delta)?;
    if n == 0 {
        return param("search depth n must be at least 1");
    }
    if !(caps.0 >= 0.0 && caps.1 >= 0.0) {
        return param(format!("mean caps {caps:?} must be nonnegative"));
    }
    let th = Thresholds::balanced(caps.0, caps.1, rho_target, delta);
    let (report, found) = search_depth(dist, n, &th, delta, opts.work_cap)?;
    Ok(assemble(th, vec![report], found, None, None))
}

fn assemble(
    thresholds: Thresholds,
    depths: Vec<DepthReport>,
    found: Option<(Witness, Achieved)>,
    calibrated: Option<(Witness, Achieved)>,
    n0: Option<Magnitude>,
) -> Verdict {
    let accepted = found.is_some();
    let (witness, achieved) = found.map_or((None, None), |(w, a)| (Some(w), Some(a)));
    let (calibrated, calibrated_achieved) = calibrated.map_or((None, None), |(w, a)| (Some(w), Some(a)));
    Verdict {
        decision: if accepted { Decision::Accept } else { Decision::Reject },
        thresholds,
        n: witness.as_ref().map(|w| w.n),
        witness,
        achieved,
        calibrated,
        calibrated_achieved,
        bounded_depth: !accepted,
        caveat: None,
        n0,
        depths,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    /// `E[UV] ≥ E[U]E[V]`.
    I,
    II,
}

/// A target distribution on `{±1}²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Target2x2 {
    pub table: EmpiricalJoint2x2,
    pub mean_u: f64,
    pub mean_v: f64,
    pub mean_uv: f64,
    pub case: Case,
}

impl Target2x2 {
    /// Cells in the order `++, +−, −+, −−`.
    pub fn new(probs: [f64; 4]) -> Result<Self> {
        let table = EmpiricalJoint2x2::from_probs(probs)?;
        let (mean_u, mean_v, mean_uv) = (table.mean_u(), table.mean_v(), table.mean_uv());
        let case = if mean_uv >= mean_u * mean_v - 1e-12 { Case::I } else { Case::II };
        Ok(Target2x2 { table, mean_u, mean_v, mean_uv, case })
    }

    pub fn dsbs(rho: f64) -> Result<Self> {
        Self::new(EmpiricalJoint2x2::dsbs(rho)?.probs)
    }
}

impl FromStr for Target2x2 {
    type Err = Error;

    /// `dsbs:ρ` or `2x2:p++,p+-,p-+,p--`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("target {s:?} is not dsbs:<rho> or 2x2:<p++>,<p+->,<p-+>,<p-->"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "dsbs" => Target2x2::dsbs(rest.trim().parse().map_err(|_| bad())?),
            "2x2" => {
                let v: Vec<f64> = rest
                    .split(',')
                    .map(|t| t.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad())?;
                let probs: [f64; 4] = v.try_into().map_err(|_| bad())?;
                Target2x2::new(probs)
            }
            _ => Err(bad()),
        }
    }
}

/// Gap decision for simulating a DSBS(ρ) target.
pub fn decide_gap_nis(
    dist: &JointDistribution,
    rho: f64,
    delta: f64,
    n_search: usize,
    opts: &SearchOptions,
) -> Result<Verdict> {
    decide_2x2(dist, &Target2x2::dsbs(rho)?, delta, n_search, opts)
}

/// Searches depths `1..=n_search` for grid strategies with
/// `|E[f] − E[U]|, |E[g] − E[V]| ≤ 8δ/3` and `E[fg] ≥ E[UV] − 3δ`
/// (Case I) or `E[fg] ≤ E[UV] + 3δ` (Case II), each up to the grid slack.
pub fn decide_2x2(
    dist: &JointDistribution,
    target: &Target2x2,
    delta: f64,
    n_search: usize,
    opts: &SearchOptions,
) -> Result<Verdict> {
    check_delta(delta)?;
    if n_search == 0 {
        return param("search depth n must be at least 1");
    }
    let cap = 8.0 * delta / 3.0;
    let (corr_threshold, sense) = match target.case {
        Case::I => (target.mean_uv - 3.0 * delta, Sense::AtLeast),
        Case::II => (target.mean_uv + 3.0 * delta, Sense::AtMost),
    };
    let th = Thresholds {
        center_f: target.mean_u,
        center_g: target.mean_v,
        cap_f: cap,
        cap_g: cap,
        corr_threshold,
        sense,
        mean_slack: delta * delta / 5.0,
        corr_slack: delta * delta / 4.0,
    };
    let mut depths = Vec::new();
    for n in 1..=n_search {
        let (rep, found) = search_depth_any(dist, n, &th, delta, opts.work_cap)?;
        depths.push(rep);
        if let Some((w, a)) = found {
            let cal = calibrate(&w, &a, target, dist)?;
            return Ok(assemble(th, depths, Some((w, a)), Some(cal), None));
        }
    }
    let n0 = if opts.report_n0 { n0_chain(dist, delta, opts.constants).ok().map(|c| c.n0) } else { None };
    let mut v = assemble(th, depths, None, None, n0);
    v.caveat = Some(match n0 {
        Some(n0) => {
            format!("bounded-depth rejection: searched n <= {n_search}; sound only at n = n0 = 10^{:.3}", n0.log10())
        }
        None if opts.report_n0 => {
            format!("bounded-depth rejection: searched n <= {n_search}; n0 is unavailable for this source")
        }
        None => format!("bounded-depth rejection: searched n <= {n_search}; sound only at n = n0 (not computed)"),
    });
    Ok(v)
}

/// `f₁ = (1−a)·E[U] + a·f`, `g₁ = (1−a)·E[V] + a·g` with `a ∈ [0,1]` chosen
/// so `E[f₁g₁] = E[UV]` when the witness overshoots the target.
fn calibrate(w: &Witness, a: &Achieved, target: &Target2x2, dist: &JointDistribution) -> Result<(Witness, Achieved)> {
    let (u, v) = (target.mean_u, target.mean_v);
    let phi =
        |s: f64| (1.0 - s) * (1.0 - s) * u * v + s * (1.0 - s) * (u * a.mean_g + v * a.mean_f) + s * s * a.mean_fg;
    let over = |val: f64| match target.case {
        Case::I => val > target.mean_uv,
        Case::II => val < target.mean_uv,
    };
    let s = if !over(a.mean_fg) || over(phi(0.0)) {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if over(phi(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let cal = Witness {
        n: w.n,
        f: w.f.iter().map(|&x| ((1.0 - s) * u + s * x).clamp(-1.0, 1.0)).collect(),
        g: w.g.iter().map(|&y| ((1.0 - s) * v + s * y).clamp(-1.0, 1.0)).collect(),
    };
    let achieved = cal.achieved(dist)?;
    Ok((cal, achieved))
}

/// `(|ΔE[U]| + |ΔE[V]| + |ΔE[UV]|)/2` bounds the TV distance between two
/// distributions on `{±1}²`.
pub fn moment_tv_bound(a: &Achieved, target: &Target2x2) -> f64 {
    ((a.mean_f - target.mean_u).abs() + (a.mean_g - target.mean_v).abs() + (a.mean_fg - target.mean_uv).abs()) / 2.0
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    /// Best value found by alternation (a lower bound on the maximum).
    pub value: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `min(1, max over allowed means of E[f]E[g] + ρ·σ_f·σ_g)`.
    pub upper_bound: f64,
    pub heuristic: bool,
}

const ORACLE_MAX_SIDE: usize = 64;
const ORACLE_RANDOM_STARTS: usize = 256;

/// Alternating maximization of `E[fg]` over `[−1,1]` strategies with
/// `|E[f] − center| ≤ cap` on each side.
pub fn oracle_max_balanced_ip(
    dist: &JointDistribution,
    n: usize,
    centers: (f64, f64),
    caps: (f64, f64),
    seed: u64,
) -> Result<OracleResult> {
    let t = tensor_power_capped(dist, n, DEFAULT_CELL_CAP)?;
    let (m, k) = (t.n_rows(), t.n_cols());
    if m > ORACLE_MAX_SIDE || k > ORACLE_MAX_SIDE {
        return Err(Error::Resource(format!("oracle handles at most {ORACLE_MAX_SIDE} values per side, got {m}x{k}")));
    }
    let fr = mean_range(centers.0, caps.0);
    let gr = mean_range(centers.1, caps.1);
    let (wa, wb) = (t.rows().probs(), t.cols().probs());
    let mat = t.table();
    let mg = |g: &[f64]| -> Vec<f64> { (0..m).map(|x| (0..k).map(|y| mat[x * k + y] * g[y]).sum()).collect() };
    let mtf = |f: &[f64]| -> Vec<f64> { (0..k).map(|y| (0..m).map(|x| mat[x * k + y] * f[x]).sum()).collect() };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if m <= 12 {
        for bits in 0..1usize << m {
            starts.push((0..m).map(|x| if bits >> x & 1 == 1 { -1.0 } else { 1.0 }).collect());
        }
    } else {
        let mut rng = seeded_rng(seed);
        for _ in 0..ORACLE_RANDOM_STARTS {
            starts.push((0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect());
        }
    }
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for start in starts {
        let mut f = start;
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..100 {
            let Some((_, g)) = box_lp(&mtf(&f), wb, gr) else { break };
            let Some((val, nf)) = box_lp(&mg(&g), wa, fr) else { break };
            f = nf;
            let Some((val2, g2)) = box_lp(&mtf(&f), wb, gr) else { break };
            let val = val.max(val2);
            if best.as_ref().is_none_or(|b| val2 > b.0) {
                best = Some((val2, f.clone(), g2));
            }
            if val <= prev + 1e-15 {
                break;
            }
            prev = val;
        }
    }
    let rho = maximal_correlation(dist)?.rho;
    let upper_bound = correlation_ceiling(rho, fr, gr);
    match best {
        Some((value, f, g)) => Ok(OracleResult { value, f, g, upper_bound, heuristic: true }),
        None => Err(Error::Precondition("mean constraints leave no feasible strategies".into())),
    }
}

/// Largest `ab + ρ√(1−a²)√(1−b²)` over `a ∈ fr`, `b ∈ gr`. With `a = cos s`,
/// `b = cos t` this is `(1+ρ)/2·cos(s−t) + (1−ρ)/2·cos(s+t)`; each cosine is
/// maximized over its interval separately.
pub fn correlation_ceiling(rho: f64, fr: (f64, f64), gr: (f64, f64)) -> f64 {
    let (s1, s2) = (fr.1.clamp(-1.0, 1.0).acos(), fr.0.clamp(-1.0, 1.0).acos());
    let (t1, t2) = (gr.1.clamp(-1.0, 1.0).acos(), gr.0.clamp(-1.0, 1.0).acos());
    let max_cos = |lo: f64, hi: f64| {
        let two_pi = 2.0 * std::f64::consts::PI;
        if (lo..=hi).contains(&0.0) || (lo..=hi).contains(&two_pi) {
            1.0
        } else {
            lo.cos().max(hi.cos())
        }
    };
    let diff = max_cos(s1 - t2, s2 - t1);
    let sum = max_cos(s1 + t1, s2 + t2);
    ((1.0 + rho) / 2.0 * diff + (1.0 - rho) / 2.0 * sum).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RoundingMode {
    /// Private coins from an RNG.
    Simulation,
    /// Extra source coordinates: `k` further samples from the party's
    /// marginal, thresholded by cumulative mass; conditional means are off by
    /// at most `(max μ)^k / 2`, which must not exceed `resolution`.
    ExtraCoordinates { k: usize, resolution: f64 },
}

/// A ±1 strategy obtained from a [−1, 1] one.
#[derive(Clone, Debug)]
pub enum Rounded {
    /// Output +1 with probability `(1 + f(x))/2`.
    Coins {
        n: usize,
        values: Vec<f64>,
    },
    Deterministic(Strategy),
}

impl Rounded {
    pub fn n(&self) -> usize {
        match self {
            Rounded::Coins { n, .. } => *n,
            Rounded::Deterministic(s) => s.n(),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, x: &[usize], q: usize, rng: &mut R) -> f64 {
        match self {
            Rounded::Coins { values, .. } => {
                let p = (1.0 + values[from_digits(x, q)]) / 2.0;
                if rng.gen::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            }
            Rounded::Deterministic(s) => s.eval(x, q),
        }
    }
}

/// Limit on the table produced by extra-coordinate rounding.
const ROUNDED_TABLE_CAP: usize = 1 << 26;

/// Rounds a [−1, 1] table strategy over `space^n` to ±1 outputs.
pub fn randomized_round(f: &Strategy, space: &FiniteSpace, mode: RoundingMode) -> Result<Rounded> {
    let Strategy::Table { n, values } = f else {
        return param("only table strategies take [-1, 1] values to round");
    };
    let q = space.len();
    if q.checked_pow(*n as u32) != Some(values.len()) {
        return Err(Error::Shape(format!("{} values for {q}^{n} points", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::Input(format!("value {v} outside [-1, 1]")));
    }
    match mode {
        RoundingMode::Simulation => Ok(Rounded::Coins { n: *n, values: values.clone() }),
        RoundingMode::ExtraCoordinates { k, resolution } => {
            let pmax = space.probs().iter().cloned().fold(0.0, f64::max);
            let achievable = pmax.powi(k as i32) / 2.0;
            if achievable > resolution {
                return Err(Error::Precondition(format!(
                    "{k} extra coordinates give resolution {achievable:e}, coarser than the requested {resolution:e}"
                )));
            }
            let zs = q
                .checked_pow(k as u32)
                .filter(|z| z.saturating_mul(values.len()) <= ROUNDED_TABLE_CAP)
                .ok_or_else(|| Error::Resource(format!("rounded table over {q}^{} points is too large", n + k)))?;
            let mut mids = Vec::with_capacity(zs);
            let mut cum = 0.0;
            let mut z = vec![0usize; k];
            for code in 0..zs {
                crate::prob::digits(code, q, &mut z);
                let mass: f64 = z.iter().map(|&a| space.probs()[a]).product();
                mids.push(cum + mass / 2.0);
                cum += mass;
            }
            let mut out = Vec::with_capacity(values.len() * zs);
            for &v in values {
                let p = (1.0 + v) / 2.0;
                out.extend(mids.iter().map(|&mid| if mid < p { 1.0 } else { -1.0 }));
            }
            Ok(Rounded::Deterministic(Strategy::Table { n: n + k, values: out }))
        }
    }
}

/// Samples `(f(x), g(y))` from `dist^{⊗n}` with the rounding randomness.
pub fn sample_rounded_pair(
    f: &Rounded,
    g: &Rounded,
    dist: &JointDistribution,
    samples: u64,
    seed: u64,
) -> Result<EmpiricalJoint2x2> {
    let n = f.n();
    if g.n() != n {
        return Err(Error::Input(format!("rounded strategies act on {n} and {} coordinates", g.n())));
    }
    if samples == 0 {
        return param("need at least one sample");
    }
    let sampler = JointSampler::new(dist);
    let (qa, qb) = (dist.n_rows(), dist.n_cols());
    const CHUNK: u64 = 1 << 16;
    let counts: Vec<[u64; 4]> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c);
            let mut x = vec![0usize; n];
            let mut y = vec![0usize; n];
            let mut counts = [0u64; 4];
            for _ in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                for i in 0..n {
                    (x[i], y[i]) = sampler.sample(&mut rng);
                }
                let u = f.draw(&x, qa, &mut rng);
                let v = g.draw(&y, qb, &mut rng);
                counts[(u < 0.0) as usize * 2 + (v < 0.0) as usize] += 1;
            }
            counts
        })
        .collect();
    let mut total = [0u64; 4];
    for c in counts {
        total.iter_mut().zip(c).for_each(|(t, v)| *t += v);
    }
    EmpiricalJoint2x2::from_counts(total)
}
