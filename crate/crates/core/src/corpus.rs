//! Bundled source distributions.
//!
//! The α-graph is an 8×8 bipartite source: a 6×6 low-correlation block of
//! mass 1−α and two matched pairs of mass α/2 each. Its maximal correlation
//! is 1 for every α > 0, yet with n copies the chance that some coordinate
//! lands in the matched block is 1 − (1−α)ⁿ, so searches at n well below 1/α
//! see mostly the low block and under-perform; the achievable correlation
//! jumps toward 1 once n grows past 1/α.

use crate::error::{param, Result};
use crate::prob::{make_dsbs, JointDistribution};

pub const NAMES: [&str; 3] = ["triple", "dsbs", "alpha-graph"];

/// Uniform on `{(0,0), (0,1), (1,0)}`.
pub fn triple() -> JointDistribution {
    let third = 1.0 / 3.0;
    JointDistribution::new(
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into()],
        vec![vec![third, third], vec![third, 0.0]],
    )
    .expect("triple table is valid")
}

pub fn dsbs(rho: f64) -> Result<JointDistribution> {
    make_dsbs(rho)
}

/// `low_corr ∈ [0, 1)` mixes the low block between independent uniform
/// (0) and the identity (1, excluded).
pub fn alpha_graph(alpha: f64, low_corr: f64) -> Result<JointDistribution> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return param(format!("alpha {alpha} outside (0, 1)"));
    }
    if !(0.0..1.0).contains(&low_corr) {
        return param(format!("low-block correlation {low_corr} outside [0, 1)"));
    }
    let labels: Vec<String> = (1..=8).map(|i| i.to_string()).collect();
    let mut table = vec![0.0; 64];
    for i in 0..6 {
        for j in 0..6 {
            let diag = if i == j { low_corr / 6.0 } else { 0.0 };
            table[i * 8 + j] = (1.0 - alpha) * ((1.0 - low_corr) / 36.0 + diag);
        }
    }
    table[6 * 8 + 6] = alpha / 2.0;
    table[7 * 8 + 7] = alpha / 2.0;
    JointDistribution::from_flat(labels.clone(), labels, table)
}

/// Looks up a corpus entry; `param` is ρ for `dsbs` and α for `alpha-graph`.
pub fn by_name(name: &str, param_value: Option<f64>, low_corr: f64) -> Result<JointDistribution> {
    match name {
        "triple" => Ok(triple()),
        "dsbs" => dsbs(param_value.unwrap_or(0.5)),
        "alpha-graph" => alpha_graph(param_value.unwrap_or(0.25), low_corr),
        _ => Err(crate::Error::Input(format!("unknown example {name:?}; known: {}", NAMES.join(", ")))),
    }
}
