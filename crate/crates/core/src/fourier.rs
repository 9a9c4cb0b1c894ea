//! Fourier analysis over `L²(Aⁿ, μ⊗ⁿ)`.
//!
//! Degree sequences σ ∈ ℤ_qⁿ are stored as base-q integers with coordinate 0
//! as the most significant digit, the same layout used for points of `Aⁿ`
//! in a [`ValueTable`].

use std::collections::BTreeMap;
use std::f64::consts::E;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::prob::{digits, FiniteSpace};

/// Coefficients smaller than this in magnitude are not stored.
pub const DROP_TOL: f64 = 1e-14;
/// Gram-Schmidt residuals below this mark a dependent vector.
const GS_TOL: f64 = 1e-12;
/// Largest dense table the transforms will allocate.
pub const DENSE_CAP: u64 = 1 << 26;

/// Orthonormal characters of a finite space, `chars[0] ≡ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    space: FiniteSpace,
    chars: Vec<Vec<f64>>,
}

/// Gram-Schmidt over the constant function followed by the atom indicators.
pub fn build_basis(space: &FiniteSpace) -> OrthonormalBasis {
    let mu = space.probs();
    let q = mu.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(mu).map(|((x, y), p)| x * y * p).sum::<f64>();
    let mut chars: Vec<Vec<f64>> = vec![vec![1.0; q]];
    for a in 0..q {
        if chars.len() == q {
            break;
        }
        let mut v = vec![0.0; q];
        v[a] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for c in &chars {
                let proj = dot(&v, c);
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < GS_TOL {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        chars.push(v);
    }
    OrthonormalBasis { space: space.clone(), chars }
}

impl OrthonormalBasis {
    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn q(&self) -> usize {
        self.chars.len()
    }

    pub fn chars(&self) -> &[Vec<f64>] {
        &self.chars
    }

    /// `X_k(atom)`.
    pub fn value(&self, k: usize, atom: usize) -> f64 {
        self.chars[k][atom]
    }
}

/// Pointwise function on `Aⁿ`, row-major in atom order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueTable {
    pub n: usize,
    pub space: FiniteSpace,
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn new(n: usize, space: FiniteSpace, values: Vec<f64>) -> Result<Self> {
        let expected = checked_pow(space.len(), n)?;
        if values.len() as u64 != expected {
            return Err(Error::Shape(format!("value table has {} entries, expected {expected}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("value table contains a non-finite entry".into()));
        }
        Ok(ValueTable { n, space, values })
    }

    pub fn q(&self) -> usize {
        self.space.len()
    }

    /// Product-measure weight of every point.
    pub fn weights(&self) -> Vec<f64> {
        point_weights(&self.space, self.n)
    }

    pub fn mean(&self) -> f64 {
        self.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    /// `(E|f|^p)^{1/p}`.
    pub fn norm(&self, p: f64) -> f64 {
        let s: f64 = self.weights().iter().zip(&self.values).map(|(w, v)| w * v.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }
}

/// `μ⊗ⁿ(x)` for every `x ∈ Aⁿ` in row-major order.
pub fn point_weights(space: &FiniteSpace, n: usize) -> Vec<f64> {
    let mut w = vec![1.0];
    for _ in 0..n {
        w = w.iter().flat_map(|a| space.probs().iter().map(move |p| a * p)).collect();
    }
    w
}

fn checked_pow(q: usize, n: usize) -> Result<u64> {
    (q as u64)
        .checked_pow(n as u32)
        .filter(|&v| v <= DENSE_CAP)
        .ok_or_else(|| Error::Resource(format!("{q}^{n} points exceeds the dense cap of {DENSE_CAP}")))
}

/// Sparse Fourier expansion `f = Σ_σ f̂(σ) X_σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierPolynomial {
    n: usize,
    basis: Arc<OrthonormalBasis>,
    coeffs: BTreeMap<u64, f64>,
}

impl FourierPolynomial {
    /// Builds a polynomial from encoded σ keys; small coefficients are dropped.
    pub fn new(n: usize, basis: Arc<OrthonormalBasis>, coeffs: BTreeMap<u64, f64>) -> Result<Self> {
        let q = basis.q() as u64;
        let limit = q.checked_pow(n as u32).ok_or_else(|| Error::Resource(format!("{q}^{n} overflows")))?;
        for (&k, &c) in &coeffs {
            if k >= limit {
                return Err(Error::Input(format!("degree sequence code {k} is out of range for q={q}, n={n}")));
            }
            if !c.is_finite() {
                return Err(Error::Input(format!("coefficient at {k} is not finite")));
            }
        }
        let coeffs = coeffs.into_iter().filter(|(_, c)| c.abs() >= DROP_TOL).collect();
        Ok(FourierPolynomial { n, basis, coeffs })
    }

    /// Builds a polynomial from explicit degree sequences.
    pub fn from_terms(
        n: usize,
        basis: Arc<OrthonormalBasis>,
        terms: impl IntoIterator<Item = (Vec<usize>, f64)>,
    ) -> Result<Self> {
        let q = basis.q();
        let mut map = BTreeMap::new();
        for (sigma, c) in terms {
            if sigma.len() != n || sigma.iter().any(|&s| s >= q) {
                return Err(Error::Input(format!("degree sequence {sigma:?} invalid for q={q}, n={n}")));
            }
            *map.entry(encode(&sigma, q)).or_insert(0.0) += c;
        }
        Self::new(n, basis, map)
    }

    pub fn constant(n: usize, basis: Arc<OrthonormalBasis>, c: f64) -> Self {
        Self::new(n, basis, BTreeMap::from([(0, c)])).expect("constant polynomial")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.basis.q()
    }

    pub fn basis(&self) -> &Arc<OrthonormalBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &BTreeMap<u64, f64> {
        &self.coeffs
    }

    pub fn coeff(&self, sigma: &[usize]) -> f64 {
        self.coeffs.get(&encode(sigma, self.q())).copied().unwrap_or(0.0)
    }

    /// Digits of an encoded degree sequence.
    pub fn sigma(&self, code: u64) -> Vec<usize> {
        decode(code, self.q(), self.n)
    }

    /// `|σ|`: number of nonzero entries.
    pub fn weight(&self, code: u64) -> usize {
        sigma_weight(code, self.q() as u64)
    }

    /// Largest `|σ|` with a stored coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.keys().map(|&k| self.weight(k)).max().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.coeffs.get(&0).copied().unwrap_or(0.0)
    }

    /// `E[f²]` by Parseval.
    pub fn sq_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sq_norm().sqrt()
    }

    pub fn variance(&self) -> f64 {
        self.coeffs.iter().filter(|(k, _)| **k != 0).map(|(_, c)| c * c).sum()
    }

    /// Evaluates at a point given as atom indices.
    pub fn eval(&self, x: &[usize]) -> f64 {
        let q = self.q() as u64;
        self.coeffs
            .iter()
            .map(|(&code, &c)| {
                let mut k = code;
                let mut prod = c;
                for i in (0..self.n).rev() {
                    let s = (k % q) as usize;
                    k /= q;
                    if s != 0 {
                        prod *= self.basis.value(s, x[i]);
                    }
                }
                prod
            })
            .sum()
    }

    /// `Inf_i(f) = Σ_{σ_i ≠ 0} f̂(σ)²`, coordinates counted from 0.
    pub fn influence(&self, i: usize) -> f64 {
        assert!(i < self.n, "coordinate {i} out of range for n={}", self.n);
        let q = self.q() as u64;
        let place = q.pow((self.n - 1 - i) as u32);
        self.coeffs.iter().filter(|(k, _)| !(**k / place).is_multiple_of(q)).map(|(_, c)| c * c).sum()
    }

    pub fn influences(&self) -> Vec<f64> {
        let q = self.q() as u64;
        let mut out = vec![0.0; self.n];
        for (&code, &c) in &self.coeffs {
            let mut k = code;
            for i in (0..self.n).rev() {
                if k % q != 0 {
                    out[i] += c * c;
                }
                k /= q;
            }
        }
        out
    }

    /// `Σ_σ |σ| f̂(σ)²`.
    pub fn total_influence(&self) -> f64 {
        self.coeffs.iter().map(|(&k, c)| self.weight(k) as f64 * c * c).sum()
    }

    /// `Σ_{|σ| > d} f̂(σ)²`.
    pub fn degree_tail_mass(&self, d: usize) -> f64 {
        self.coeffs.iter().filter(|(k, _)| self.weight(**k) > d).fold(0.0, |a, (_, c)| a + c * c)
    }

    /// Keeps only `|σ| ≤ d`.
    pub fn truncate_degree(&self, d: usize) -> FourierPolynomial {
        let coeffs = self.coeffs.iter().filter(|(k, _)| self.weight(**k) <= d).map(|(k, c)| (*k, *c)).collect();
        FourierPolynomial { n: self.n, basis: self.basis.clone(), coeffs }
    }

    /// Bonami-Beckner operator: `f̂(σ) ↦ γ^{|σ|} f̂(σ)`.
    pub fn noise_operator(&self, gamma: f64) -> Result<FourierPolynomial> {
        if !(0.0..=1.0).contains(&gamma) {
            return param(format!("noise rate {gamma} outside [0, 1]"));
        }
        let coeffs = self.coeffs.iter().map(|(&k, &c)| (k, c * gamma.powi(self.weight(k) as i32))).collect();
        FourierPolynomial::new(self.n, self.basis.clone(), coeffs)
    }

    /// Fixes the coordinates in `h` to the atoms `xi`; the result lives on
    /// the remaining coordinates in their original order.
    pub fn restrict(&self, h: &[usize], xi: &[usize]) -> Result<FourierPolynomial> {
        if h.len() != xi.len() {
            return Err(Error::Shape(format!("{} restricted coordinates but {} values", h.len(), xi.len())));
        }
        let mut fixed = vec![None; self.n];
        for (&i, &a) in h.iter().zip(xi) {
            if i >= self.n {
                return Err(Error::Input(format!("coordinate {i} out of range for n={}", self.n)));
            }
            if a >= self.basis.space().len() {
                return Err(Error::Input(format!("atom index {a} is not in the space")));
            }
            if fixed[i].replace(a).is_some() {
                return Err(Error::Input(format!("coordinate {i} restricted twice")));
            }
        }
        let q = self.q();
        let rest = self.n - h.len();
        let mut out: BTreeMap<u64, f64> = BTreeMap::new();
        let mut sig = vec![0usize; self.n];
        for (&code, &c) in &self.coeffs {
            decode_into(code, q, &mut sig);
            let mut weight = c;
            let mut key = 0u64;
            for (i, &s) in sig.iter().enumerate() {
                match fixed[i] {
                    Some(a) => weight *= self.basis.value(s, a),
                    None => key = key * q as u64 + s as u64,
                }
            }
            *out.entry(key).or_insert(0.0) += weight;
        }
        FourierPolynomial::new(rest, self.basis.clone(), out)
    }

    /// `C_p(α)^{d/2} ‖f‖₂` with `d` the degree and α the smallest atom mass.
    pub fn hypercontractive_norm_bound(&self, p: f64) -> Result<f64> {
        let c = hypercontractivity_constant(p, self.basis.space().alpha())?;
        Ok(c.powf(self.degree() as f64 / 2.0) * self.l2_norm())
    }

    pub fn to_file(&self) -> FunctionFile {
        FunctionFile::Coeffs {
            n: self.n,
            space: self.basis.space().clone(),
            coeffs: self.coeffs.iter().map(|(k, c)| (k.to_string(), *c)).collect(),
        }
    }
}

/// Base-q encoding of a degree sequence, first coordinate most significant.
pub fn encode(sigma: &[usize], q: usize) -> u64 {
    sigma.iter().fold(0u64, |acc, &s| acc * q as u64 + s as u64)
}

pub fn decode(code: u64, q: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    decode_into(code, q, &mut out);
    out
}

fn decode_into(mut code: u64, q: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = (code % q as u64) as usize;
        code /= q as u64;
    }
}

fn sigma_weight(mut code: u64, q: u64) -> usize {
    let mut w = 0;
    while code > 0 {
        if !code.is_multiple_of(q) {
            w += 1;
        }
        code /= q;
    }
    w
}

/// Applies a `q_out x q_in` matrix along every coordinate of a dense tensor.
fn per_coordinate(values: &[f64], n: usize, q: usize, mat: &[Vec<f64>]) -> Vec<f64> {
    let mut cur = values.to_vec();
    let mut next = vec![0.0; cur.len()];
    for i in 0..n {
        let stride = q.pow((n - 1 - i) as u32);
        let block = stride * q;
        for base in (0..cur.len()).step_by(block) {
            for off in 0..stride {
                for (k, row) in mat.iter().enumerate() {
                    let mut s = 0.0;
                    for (a, m) in row.iter().enumerate() {
                        s += m * cur[base + a * stride + off];
                    }
                    next[base + k * stride + off] = s;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// `f̂(σ) = E[f X_σ]`.
pub fn transform(f: &ValueTable) -> FourierPolynomial {
    let basis = Arc::new(build_basis(&f.space));
    transform_with(f, basis).expect("basis built from the table's own space")
}

/// Transform against a given basis of the table's space.
pub fn transform_with(f: &ValueTable, basis: Arc<OrthonormalBasis>) -> Result<FourierPolynomial> {
    if basis.space() != &f.space {
        return Err(Error::Input("basis belongs to a different space".into()));
    }
    let mu = f.space.probs();
    let mat: Vec<Vec<f64>> = basis.chars().iter().map(|c| c.iter().zip(mu).map(|(x, p)| x * p).collect()).collect();
    let hat = per_coordinate(&f.values, f.n, f.q(), &mat);
    let coeffs = hat.into_iter().enumerate().map(|(k, c)| (k as u64, c)).collect();
    FourierPolynomial::new(f.n, basis, coeffs)
}

/// Dense evaluation on every point of `Aⁿ`.
pub fn inverse_transform(p: &FourierPolynomial) -> Result<ValueTable> {
    let q = p.q();
    let len = checked_pow(q, p.n)? as usize;
    let mut dense = vec![0.0; len];
    for (&k, &c) in &p.coeffs {
        dense[k as usize] = c;
    }
    let mat: Vec<Vec<f64>> = (0..q).map(|a| (0..q).map(|k| p.basis.value(k, a)).collect()).collect();
    let values = per_coordinate(&dense, p.n, q, &mat);
    ValueTable::new(p.n, p.basis.space().clone(), values)
}

/// `C_p(α) = sinh(L/p')/sinh(L/p)` with `L = ln((1−α)/α)`; `p − 1` at α = 1/2.
pub fn hypercontractivity_constant(p: f64, alpha: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return param(format!("norm exponent {p} must be at least 2"));
    }
    if !(alpha > 0.0) {
        return param(format!("alpha {alpha} must be positive"));
    }
    let alpha = alpha.min(0.5);
    let l = ((1.0 - alpha) / alpha).ln();
    if l < 1e-8 {
        return Ok(p - 1.0);
    }
    let q = p / (p - 1.0);
    Ok((l / q).sinh() / (l / p).sinh())
}

/// A probability bound with a flag for whether its validity condition holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailBound {
    pub value: f64,
    /// False when the argument is below the range where the bound is proven.
    pub asserted: bool,
}

/// `Pr[|f| > t‖f‖₂] ≤ exp(−c t^{2/d})`, `c = αd/e`, proven for `t > e^{d/2}`.
pub fn concentration_tail_bound(d: usize, alpha: f64, t: f64) -> Result<TailBound> {
    if d == 0 {
        return param("concentration bound needs degree d >= 1");
    }
    let alpha = alpha.min(0.5);
    let df = d as f64;
    let c = alpha * df / E;
    Ok(TailBound { value: (-c * t.powf(2.0 / df)).exp(), asserted: t > (df / 2.0).exp() })
}

/// Function file: either pointwise values or sparse coefficients keyed by the
/// encoded degree sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionFile {
    Values { n: usize, space: FiniteSpace, values: Vec<f64> },
    Coeffs { n: usize, space: FiniteSpace, coeffs: BTreeMap<String, f64> },
}

impl FunctionFile {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn into_polynomial(self) -> Result<FourierPolynomial> {
        match self {
            FunctionFile::Values { n, space, values } => Ok(transform(&ValueTable::new(n, space, values)?)),
            FunctionFile::Coeffs { n, space, coeffs } => {
                let basis = Arc::new(build_basis(&space));
                let mut map = BTreeMap::new();
                for (k, c) in coeffs {
                    let code: u64 = k
                        .parse()
                        .map_err(|_| Error::Input(format!("coefficient key {k:?} is not a nonnegative integer")))?;
                    map.insert(code, c);
                }
                FourierPolynomial::new(n, basis, map)
            }
        }
    }

    /// Dense values, evaluating a coefficient file if needed.
    pub fn into_values(self) -> Result<ValueTable> {
        match self {
            FunctionFile::Values { n, space, values } => ValueTable::new(n, space, values),
            other => inverse_transform(&other.into_polynomial()?),
        }
    }
}

/// Iterates all points of `Aⁿ` as digit vectors.
pub fn for_each_point(q: usize, n: usize, mut f: impl FnMut(usize, &[usize])) {
    let total = q.pow(n as u32);
    let mut x = vec![0usize; n];
    for k in 0..total {
        digits(k, q, &mut x);
        f(k, &x);
    }
}
