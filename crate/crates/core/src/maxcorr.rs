//! Maximal correlation and Witsenhausen's bounds on the best simulable DSBS.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::fourier::build_basis;
use crate::linalg::svd;
use crate::prob::{FiniteSpace, JointDistribution};

/// Top singular value must equal 1 to this tolerance.
const TOP_TOL: f64 = 1e-9;
/// Second and third singular values closer than this are flagged.
const MULTIPLICITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationReport {
    pub rho: f64,
    pub f_witness: Vec<f64>,
    pub g_witness: Vec<f64>,
    pub dsbs_lower: f64,
    pub dsbs_upper: f64,
    /// Singular values of the normalized operator, descending.
    pub singular_values: Vec<f64>,
    /// One side has a single atom.
    pub degenerate: bool,
    /// Second and third singular values coincide; the witness is one of many.
    pub multiplicity: bool,
}

/// Maximal correlation of `dist` with optimizing witnesses.
///
/// `M(x,y) = μ(x,y)/√(μ_A(x) μ_B(y))` has top singular value 1 with singular
/// vectors `√μ_A`, `√μ_B`; ρ is the next one. Witnesses are read off the
/// operator with that trivial pair removed, so they are centered even when
/// the top singular value is repeated.
pub fn maximal_correlation(dist: &JointDistribution) -> Result<CorrelationReport> {
    let (r, c) = (dist.n_rows(), dist.n_cols());
    let sa: Vec<f64> = dist.rows().probs().iter().map(|p| p.sqrt()).collect();
    let sb: Vec<f64> = dist.cols().probs().iter().map(|p| p.sqrt()).collect();
    let m: Vec<f64> = (0..r * c).map(|k| dist.table()[k] / (sa[k / c] * sb[k % c])).collect();
    let full = svd(&m, r, c);
    if (full.s[0] - 1.0).abs() > TOP_TOL {
        return Err(Error::Precondition(format!(
            "top singular value {} differs from 1; table is not a normalized joint distribution",
            full.s[0]
        )));
    }
    if r == 1 || c == 1 {
        return Ok(CorrelationReport {
            rho: 0.0,
            f_witness: vec![0.0; r],
            g_witness: vec![0.0; c],
            dsbs_lower: 0.0,
            dsbs_upper: 0.0,
            singular_values: full.s,
            degenerate: true,
            multiplicity: false,
        });
    }
    let rho = full.s[1].min(1.0);
    let multiplicity = full.s.len() > 2 && (full.s[1] - full.s[2]).abs() < MULTIPLICITY_TOL;

    let deflated: Vec<f64> = (0..r * c).map(|k| m[k] - sa[k / c] * sb[k % c]).collect();
    let top = svd(&deflated, r, c);
    let (mut f, mut g) = if top.s[0] > 1e-14 {
        let u = top.left(0);
        let v = top.right(0);
        (
            u.iter().zip(&sa).map(|(a, s)| a / s).collect::<Vec<_>>(),
            v.iter().zip(&sb).map(|(a, s)| a / s).collect::<Vec<_>>(),
        )
    } else {
        (first_character(dist.rows()), first_character(dist.cols()))
    };
    if f[0] < 0.0 {
        f.iter_mut().for_each(|v| *v = -*v);
        g.iter_mut().for_each(|v| *v = -*v);
    }
    let (dsbs_lower, dsbs_upper) = witsenhausen_bounds(rho)?;
    Ok(CorrelationReport {
        rho,
        f_witness: f,
        g_witness: g,
        dsbs_lower,
        dsbs_upper,
        singular_values: full.s,
        degenerate: false,
        multiplicity,
    })
}

fn first_character(space: &FiniteSpace) -> Vec<f64> {
    build_basis(space).chars()[1].clone()
}

/// `(1 − 2·arccos(ρ)/π, ρ)`.
pub fn witsenhausen_bounds(rho: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&rho) {
        return param(format!("maximal correlation {rho} outside [0, 1]"));
    }
    Ok((1.0 - 2.0 * rho.acos() / PI, rho))
}
