//! Small numeric helpers shared by the parameter formulas.

use serde::Serialize;

/// Largest integer reported exactly; above it only the logarithm is kept.
const EXACT_LIMIT: f64 = 9_007_199_254_740_992.0;

/// Ceiling that treats values within relative 1e-9 of an integer as that integer,
/// so float noise in closed-form products does not add one.
pub fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// A positive integer-valued bound that may exceed any machine integer.
///
/// `ln` is the natural logarithm of the value; `exact` is present when the
/// value is below 2^53.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Magnitude {
    pub ln: f64,
    pub exact: Option<u64>,
}

impl Magnitude {
    /// `⌈e^ln⌉`, kept symbolic when too large.
    pub fn ceil_exp(ln: f64) -> Magnitude {
        if ln < EXACT_LIMIT.ln() {
            let v = ceil_tol(ln.exp()).max(1.0);
            if v < EXACT_LIMIT {
                return Magnitude { ln: v.ln(), exact: Some(v as u64) };
            }
        }
        Magnitude { ln, exact: None }
    }

    pub fn from_u64(v: u64) -> Magnitude {
        Magnitude { ln: (v as f64).ln(), exact: Some(v) }
    }

    pub fn log10(&self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }

    pub fn add(&self, other: &Magnitude) -> Magnitude {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) if ((a as f64) + (b as f64)) < EXACT_LIMIT => Magnitude::from_u64(a + b),
            _ => Magnitude { ln: log_add_exp(self.ln, other.ln), exact: None },
        }
    }

    /// The value as a float; infinite when it overflows.
    pub fn to_f64(&self) -> f64 {
        match self.exact {
            Some(v) => v as f64,
            None => self.ln.exp(),
        }
    }
}

impl Serialize for Magnitude {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Magnitude", 2)?;
        st.serialize_field("log10", &self.log10())?;
        st.serialize_field("exact", &self.exact)?;
        st.end()
    }
}

/// z for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the endpoints cancel exactly at the boundaries
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes >= trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}
