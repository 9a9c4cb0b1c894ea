//! Finite probability spaces, joint tables, tensor powers, sampling and
//! total-variation distance.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Absolute tolerance on normalization after construction.
pub const PROB_TOL: f64 = 1e-12;
/// Largest accepted deviation of an input's total mass from 1 before renormalizing.
pub const INPUT_TOL: f64 = 1e-6;
/// Residuals at or below this are left alone so stored tables round-trip bit-exactly.
const RENORM_SKIP: f64 = 1e-13;
/// Default cap on `|A|^n * |B|^n` for tensor powers.
pub const DEFAULT_CELL_CAP: u64 = 100_000_000;
/// Separator between coordinate labels of a tensor-power atom.
pub const TUPLE_SEP: char = '|';

fn check_label(label: &str) -> Result<()> {
    if label.contains(TUPLE_SEP) {
        return Err(Error::Input(format!("atom label {label:?} contains the reserved separator '{TUPLE_SEP}'")));
    }
    Ok(())
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Distribution(format!("duplicate {what} atom {l:?}")));
        }
    }
    Ok(())
}

fn check_mass(values: impl IntoIterator<Item = f64>) -> Result<f64> {
    let mut sum = 0.0;
    for (i, p) in values.into_iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Distribution(format!(
                "probability #{i} is {p}; entries must be finite and nonnegative"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > INPUT_TOL {
        return Err(Error::Distribution(format!("probabilities sum to {sum}, not 1 (tolerance {INPUT_TOL})")));
    }
    Ok(sum)
}

/// A finite probability space with strictly positive atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSpace {
    atoms: Vec<String>,
    probs: Vec<f64>,
    dropped: Vec<String>,
    residual: f64,
}

impl FiniteSpace {
    /// Builds a space, dropping zero-probability atoms and renormalizing once.
    pub fn new(atoms: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if atoms.len() != probs.len() {
            return Err(Error::Shape(format!("{} atoms but {} probabilities", atoms.len(), probs.len())));
        }
        check_unique(&atoms, "space")?;
        let sum = check_mass(probs.iter().copied())?;
        let residual = sum - 1.0;
        let scale = if residual.abs() > RENORM_SKIP { 1.0 / sum } else { 1.0 };
        let mut kept_atoms = Vec::new();
        let mut kept_probs = Vec::new();
        let mut dropped = Vec::new();
        for (a, p) in atoms.into_iter().zip(probs) {
            if p > 0.0 {
                kept_atoms.push(a);
                kept_probs.push(p * scale);
            } else {
                dropped.push(a);
            }
        }
        if kept_atoms.is_empty() {
            return Err(Error::Distribution("space has no atom with positive mass".into()));
        }
        Ok(FiniteSpace { atoms: kept_atoms, probs: kept_probs, dropped, residual })
    }

    /// Uniform measure on the given labels.
    pub fn uniform(atoms: Vec<String>) -> Result<Self> {
        let q = atoms.len();
        Self::new(atoms, vec![1.0 / q as f64; q])
    }

    /// Bernoulli space on `{"0","1"}` with `p(0) = p0`.
    pub fn bernoulli(p0: f64) -> Result<Self> {
        Self::new(vec!["0".into(), "1".into()], vec![p0, 1.0 - p0])
    }

    /// Uniform ±1 bit with atoms `"+1"`, `"-1"`.
    pub fn uniform_bit() -> Self {
        Self::uniform(vec!["+1".into(), "-1".into()]).expect("valid bit space")
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// α(μ): the smallest atom probability.
    pub fn alpha(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a == label)
    }

    /// Labels removed at construction because their mass was zero.
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    /// Total mass minus one, measured before renormalization.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    atoms: Vec<String>,
    probs: Vec<f64>,
}

impl Serialize for FiniteSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpaceFile { atoms: self.atoms.clone(), probs: self.probs.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SpaceFile::deserialize(d)?;
        for a in &raw.atoms {
            check_label(a).map_err(serde::de::Error::custom)?;
        }
        FiniteSpace::new(raw.atoms, raw.probs).map_err(serde::de::Error::custom)
    }
}

/// Joint probability table over `A x B`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    rows: FiniteSpace,
    cols: FiniteSpace,
    table: Vec<f64>,
    alpha_min: f64,
}

/// On-disk form: `{"row_atoms": [...], "col_atoms": [...], "probs": [[...]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionFile {
    pub row_atoms: Vec<String>,
    pub col_atoms: Vec<String>,
    pub probs: Vec<Vec<f64>>,
}

impl JointDistribution {
    /// Builds a joint distribution from labelled rows, columns and a table.
    ///
    /// Rows or columns with zero marginal mass are dropped and remembered on the
    /// marginal spaces. Entries inside the table may be zero.
    pub fn new(row_atoms: Vec<String>, col_atoms: Vec<String>, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != row_atoms.len() {
            return Err(Error::Shape(format!("{} row atoms but {} table rows", row_atoms.len(), probs.len())));
        }
        for (i, r) in probs.iter().enumerate() {
            if r.len() != col_atoms.len() {
                return Err(Error::Shape(format!(
                    "table row {i} has {} entries, expected {}",
                    r.len(),
                    col_atoms.len()
                )));
            }
        }
        let flat: Vec<f64> = probs.into_iter().flatten().collect();
        Self::from_flat(row_atoms, col_atoms, flat)
    }

    /// Same as [`JointDistribution::new`] with a row-major flat table.
    pub fn from_flat(row_atoms: Vec<String>, col_atoms: Vec<String>, table: Vec<f64>) -> Result<Self> {
        let (r, c) = (row_atoms.len(), col_atoms.len());
        if r == 0 || c == 0 {
            return Err(Error::Distribution("empty row or column alphabet".into()));
        }
        if table.len() != r * c {
            return Err(Error::Shape(format!("table has {} cells, expected {}", table.len(), r * c)));
        }
        check_unique(&row_atoms, "row")?;
        check_unique(&col_atoms, "column")?;
        let sum = check_mass(table.iter().copied())?;
        let residual = sum - 1.0;
        let mut table = table;
        if residual.abs() > RENORM_SKIP {
            table.iter_mut().for_each(|p| *p /= sum);
        }

        let row_mass: Vec<f64> = (0..r).map(|i| table[i * c..(i + 1) * c].iter().sum()).collect();
        let col_mass: Vec<f64> = (0..c).map(|j| (0..r).map(|i| table[i * c + j]).sum()).collect();
        let keep_r: Vec<usize> = (0..r).filter(|&i| row_mass[i] > 0.0).collect();
        let keep_c: Vec<usize> = (0..c).filter(|&j| col_mass[j] > 0.0).collect();

        let mut kept = Vec::with_capacity(keep_r.len() * keep_c.len());
        for &i in &keep_r {
            for &j in &keep_c {
                kept.push(table[i * c + j]);
            }
        }
        let mut rows = FiniteSpace {
            atoms: keep_r.iter().map(|&i| row_atoms[i].clone()).collect(),
            probs: keep_r.iter().map(|&i| row_mass[i]).collect(),
            dropped: (0..r).filter(|i| row_mass[*i] <= 0.0).map(|i| row_atoms[i].clone()).collect(),
            residual,
        };
        let mut cols = FiniteSpace {
            atoms: keep_c.iter().map(|&j| col_atoms[j].clone()).collect(),
            probs: keep_c.iter().map(|&j| col_mass[j]).collect(),
            dropped: (0..c).filter(|j| col_mass[*j] <= 0.0).map(|j| col_atoms[j].clone()).collect(),
            residual,
        };
        // marginals are exact row/column sums of the stored table
        let nc = keep_c.len();
        rows.probs = (0..keep_r.len()).map(|i| kept[i * nc..(i + 1) * nc].iter().sum()).collect();
        cols.probs = (0..nc).map(|j| (0..keep_r.len()).map(|i| kept[i * nc + j]).sum()).collect();
        let alpha_min = kept.iter().copied().filter(|&p| p > 0.0).fold(f64::INFINITY, f64::min);
        Ok(JointDistribution { rows, cols, table: kept, alpha_min })
    }

    /// Product measure `μ_A x μ_B`.
    pub fn product(a: &FiniteSpace, b: &FiniteSpace) -> Result<Self> {
        let table = a.probs.iter().flat_map(|p| b.probs.iter().map(move |q| p * q)).collect();
        Self::from_flat(a.atoms.clone(), b.atoms.clone(), table)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(s)?;
        Self::try_from(file)
    }

    pub fn to_file(&self) -> DistributionFile {
        DistributionFile {
            row_atoms: self.rows.atoms.clone(),
            col_atoms: self.cols.atoms.clone(),
            probs: self.table.chunks(self.cols.len()).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("serializable")
    }

    pub fn rows(&self) -> &FiniteSpace {
        &self.rows
    }

    pub fn cols(&self) -> &FiniteSpace {
        &self.cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// Row-major table over the retained atoms.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.cols.len() + y]
    }

    /// Smallest strictly positive table entry.
    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    /// Cells with positive mass as `(x, y, p)`.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let c = self.cols.len();
        self.table.iter().enumerate().filter(|(_, p)| **p > 0.0).map(move |(k, p)| (k / c, k % c, *p))
    }

    /// `E[f(X)]` under the row marginal.
    pub fn mean_rows(&self, f: &[f64]) -> f64 {
        self.rows.probs.iter().zip(f).map(|(p, v)| p * v).sum()
    }

    /// `E[g(Y)]` under the column marginal.
    pub fn mean_cols(&self, g: &[f64]) -> f64 {
        self.cols.probs.iter().zip(g).map(|(p, v)| p * v).sum()
    }

    /// `E[f(X) g(Y)]` under the joint table.
    pub fn expect_product(&self, f: &[f64], g: &[f64]) -> f64 {
        self.support().map(|(x, y, p)| p * f[x] * g[y]).sum()
    }

    /// Swaps the roles of the two parties.
    pub fn transpose(&self) -> JointDistribution {
        let (r, c) = (self.n_rows(), self.n_cols());
        let table = (0..c).flat_map(|j| (0..r).map(move |i| (i, j))).map(|(i, j)| self.table[i * c + j]).collect();
        JointDistribution::from_flat(self.cols.atoms.clone(), self.rows.atoms.clone(), table)
            .expect("transpose of a valid table")
    }
}

impl TryFrom<DistributionFile> for JointDistribution {
    type Error = Error;

    fn try_from(f: DistributionFile) -> Result<Self> {
        for a in f.row_atoms.iter().chain(&f.col_atoms) {
            check_label(a)?;
        }
        JointDistribution::new(f.row_atoms, f.col_atoms, f.probs)
    }
}

impl Serialize for JointDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = DistributionFile::deserialize(d)?;
        JointDistribution::try_from(f).map_err(serde::de::Error::custom)
    }
}

/// Doubly symmetric binary source on atoms `"+1"`, `"-1"`.
pub fn make_dsbs(rho: f64) -> Result<JointDistribution> {
    if !(-1.0..=1.0).contains(&rho) {
        return param(format!("DSBS correlation {rho} outside [-1, 1]"));
    }
    let on = (1.0 + rho) / 4.0;
    let off = (1.0 - rho) / 4.0;
    JointDistribution::from_flat(vec!["+1".into(), "-1".into()], vec!["+1".into(), "-1".into()], vec![on, off, off, on])
}

/// `n`-fold product with the default cell cap.
pub fn tensor_power(dist: &JointDistribution, n: usize) -> Result<JointDistribution> {
    tensor_power_capped(dist, n, DEFAULT_CELL_CAP)
}

/// `n`-fold product. Coordinate 0 is the most significant digit of the row and
/// column indices.
pub fn tensor_power_capped(dist: &JointDistribution, n: usize, cap: u64) -> Result<JointDistribution> {
    if n == 0 {
        return param("tensor power needs n >= 1");
    }
    let cells = (dist.n_rows() as f64 * dist.n_cols() as f64).powi(n as i32);
    if cells > cap as f64 {
        return Err(Error::Resource(format!("tensor power has {cells:.3e} cells, above the cap of {cap}")));
    }
    if n == 1 {
        return Ok(dist.clone());
    }
    let rows = power_labels(dist.rows.atoms(), n);
    let cols = power_labels(dist.cols.atoms(), n);
    let (r1, c1) = (dist.n_rows(), dist.n_cols());
    let (rn, cn) = (rows.len(), cols.len());
    let mut table = vec![0.0; rn * cn];
    let mut xs = vec![0usize; n];
    let mut ys = vec![0usize; n];
    for x in 0..rn {
        digits(x, r1, &mut xs);
        for y in 0..cn {
            digits(y, c1, &mut ys);
            table[x * cn + y] = xs.iter().zip(&ys).map(|(&a, &b)| dist.get(a, b)).product();
        }
    }
    JointDistribution::from_flat(rows, cols, table)
}

fn power_labels(atoms: &[String], n: usize) -> Vec<String> {
    let q = atoms.len();
    let total = q.pow(n as u32);
    let mut d = vec![0usize; n];
    (0..total)
        .map(|k| {
            digits(k, q, &mut d);
            d.iter().map(|&i| atoms[i].as_str()).collect::<Vec<_>>().join(&TUPLE_SEP.to_string())
        })
        .collect()
}

/// Writes the base-`q` digits of `k` into `out`, most significant first.
pub fn digits(mut k: usize, q: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = k % q;
        k /= q;
    }
}

/// Inverse of [`digits`].
pub fn from_digits(d: &[usize], q: usize) -> usize {
    d.iter().fold(0, |acc, &x| acc * q + x)
}

/// Half the ℓ1 distance between two tables over identical atoms.
pub fn tv_distance(p: &JointDistribution, q: &JointDistribution) -> Result<f64> {
    if p.rows.atoms() != q.rows.atoms() || p.cols.atoms() != q.cols.atoms() {
        return Err(Error::Shape(format!(
            "outcome sets differ: {}x{} vs {}x{} or different labels",
            p.n_rows(),
            p.n_cols(),
            q.n_rows(),
            q.n_cols()
        )));
    }
    tv_distance_tables(&p.table, &q.table)
}

/// Half the ℓ1 distance between two probability vectors of equal length.
pub fn tv_distance_tables(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", p.len(), q.len())));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Distribution of a pair of ±1 outputs, ordered `(+1,+1), (+1,-1), (-1,+1), (-1,-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalJoint2x2 {
    pub probs: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<u64>,
}

impl EmpiricalJoint2x2 {
    pub fn from_probs(probs: [f64; 4]) -> Result<Self> {
        let sum = check_mass(probs)?;
        Ok(EmpiricalJoint2x2 { probs: probs.map(|p| p / sum), samples: None })
    }

    pub fn from_counts(counts: [u64; 4]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::Input("no samples".into()));
        }
        Ok(EmpiricalJoint2x2 { probs: counts.map(|c| c as f64 / n as f64), samples: Some(n) })
    }

    /// Table of `(U, V)` from their moments; errors if the moments are infeasible.
    pub fn from_moments(eu: f64, ev: f64, euv: f64) -> Result<Self> {
        let probs = [
            (1.0 + eu + ev + euv) / 4.0,
            (1.0 + eu - ev - euv) / 4.0,
            (1.0 - eu + ev - euv) / 4.0,
            (1.0 - eu - ev + euv) / 4.0,
        ];
        if probs.iter().any(|&p| p < -1e-12) {
            return Err(Error::Distribution(format!(
                "moments (E[U]={eu}, E[V]={ev}, E[UV]={euv}) give a negative cell"
            )));
        }
        Ok(EmpiricalJoint2x2 { probs: probs.map(|p| p.max(0.0)), samples: None })
    }

    pub fn dsbs(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return param(format!("DSBS correlation {rho} outside [-1, 1]"));
        }
        Self::from_moments(0.0, 0.0, rho)
    }

    pub fn point_mass(u: i8, v: i8) -> Self {
        let idx = match (u > 0, v > 0) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        let mut probs = [0.0; 4];
        probs[idx] = 1.0;
        EmpiricalJoint2x2 { probs, samples: None }
    }

    pub fn mean_u(&self) -> f64 {
        let [a, b, c, d] = self.probs;
        a + b - c - d
    }

    pub fn mean_v(&self) -> f64 {
        let [a, b, c, d] = self.probs;
        a - b + c - d
    }

    pub fn mean_uv(&self) -> f64 {
        let [a, b, c, d] = self.probs;
        a - b - c + d
    }

    pub fn tv_distance(&self, other: &EmpiricalJoint2x2) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Sampler over the support of a joint table.
#[derive(Clone, Debug)]
pub struct JointSampler {
    cells: Vec<(usize, usize)>,
    index: WeightedIndex<f64>,
}

impl JointSampler {
    pub fn new(dist: &JointDistribution) -> Self {
        let (cells, weights): (Vec<_>, Vec<_>) = dist.support().map(|(x, y, p)| ((x, y), p)).unzip();
        let index = WeightedIndex::new(weights).expect("support has positive mass");
        JointSampler { cells, index }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        self.cells[self.index.sample(rng)]
    }
}

/// Deterministic generator used throughout the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for the `stream`-th independent batch under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. draws of `(x, y)` atom indices.
pub fn sample_joint(dist: &JointDistribution, n: usize, seed: u64) -> Vec<(usize, usize)> {
    let sampler = JointSampler::new(dist);
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| sampler.sample(&mut rng)).collect()
}

/// Empirical frequencies of `samples` laid out like `dist.table()`.
pub fn empirical_table(dist: &JointDistribution, samples: &[(usize, usize)]) -> Vec<f64> {
    let c = dist.n_cols();
    let mut t = vec![0.0; dist.table().len()];
    for &(x, y) in samples {
        t[x * c + y] += 1.0;
    }
    let n = samples.len().max(1) as f64;
    t.iter_mut().for_each(|v| *v /= n);
    t
}
