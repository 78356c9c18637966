//! Randomization-based instrumental-variable inference: the adjusted-outcome
//! test statistic and the Fieller-Creasy confidence set obtained by
//! inverting it.

use serde::{Deserialize, Serialize};

use crate::distlib::std_normal_quantile;
use crate::error::{Error, Result};
use crate::popstats::moments_of;

/// Binary assignment `z` (true = treated), dose `d` and response `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IVData {
    z: Vec<bool>,
    d: Vec<f64>,
    y: Vec<f64>,
}

impl IVData {
    pub fn new(z: Vec<bool>, d: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = z.len();
        if d.len() != n || y.len() != n {
            return Err(Error::InvalidInput(format!(
                "column lengths differ: z {n}, d {}, y {}",
                d.len(),
                y.len()
            )));
        }
        if n < 2 {
            return Err(Error::InsufficientData("need at least two units".into()));
        }
        if d.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("doses and responses must be finite".into()));
        }
        let n1 = z.iter().filter(|&&t| t).count();
        if n1 == 0 || n1 == n {
            return Err(Error::ArmTooSmall {
                arm: if n1 == 0 { 1 } else { 2 },
                size: 0,
                required: 1,
            });
        }
        Ok(Self { z, d, y })
    }

    pub fn z(&self) -> &[bool] {
        &self.z
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n_units(&self) -> usize {
        self.z.len()
    }

    pub fn n_treated(&self) -> usize {
        self.z.iter().filter(|&&t| t).count()
    }

    /// Same outcomes under a different assignment vector.
    pub fn with_assignment(&self, z: Vec<bool>) -> Result<Self> {
        Self::new(z, self.d.clone(), self.y.clone())
    }

    fn diff(&self, v: &[f64]) -> f64 {
        let (mut s1, mut s0) = (0.0, 0.0);
        for (x, &t) in v.iter().zip(&self.z) {
            if t {
                s1 += x;
            } else {
                s0 += x;
            }
        }
        let n1 = self.n_treated() as f64;
        s1 / n1 - s0 / (self.n_units() as f64 - n1)
    }
}

/// Pooled summaries entering the confidence set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IVSummary {
    pub n: usize,
    pub n1: usize,
    pub n0: usize,
    pub tau_hat_y: f64,
    pub tau_hat_d: f64,
    pub s2_y: f64,
    pub s2_d: f64,
    pub s_yd: f64,
    pub alpha: f64,
    /// `N / (n1 n0) * Phi^-1(alpha / 2)^2`.
    pub eta: f64,
}

pub fn summarize(data: &IVData, alpha: f64) -> Result<IVSummary> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = data.n_units();
    let n1 = data.n_treated();
    let n0 = n - n1;
    let my = moments_of(&data.y);
    let md = moments_of(&data.d);
    let s_yd = data
        .y
        .iter()
        .zip(&data.d)
        .map(|(y, d)| (y - my.mean) * (d - md.mean))
        .sum::<f64>()
        / (n as f64 - 1.0);
    let z = std_normal_quantile(alpha / 2.0)?;
    Ok(IVSummary {
        n,
        n1,
        n0,
        tau_hat_y: data.diff(&data.y),
        tau_hat_d: data.diff(&data.d),
        s2_y: my.variance,
        s2_d: md.variance,
        s_yd,
        alpha,
        eta: n as f64 / (n1 as f64 * n0 as f64) * z * z,
    })
}

/// `tau_hat_A` for the adjusted outcome `A = Y - beta D`, computed three
/// ways and cross-checked, with its null variance.
pub fn adjusted_stat(data: &IVData, beta: f64) -> Result<(f64, f64)> {
    let n = data.n_units() as f64;
    let n1 = data.n_treated() as f64;
    let n0 = n - n1;
    let a: Vec<f64> = data.y.iter().zip(&data.d).map(|(y, d)| y - beta * d).collect();

    let direct = data.diff(&a);
    let split = data.diff(&data.y) - beta * data.diff(&data.d);
    let a_bar = a.iter().sum::<f64>() / n;
    let treated_mean = a.iter().zip(&data.z).filter(|(_, &t)| t).map(|(v, _)| v).sum::<f64>() / n1;
    let pooled = n / n0 * (treated_mean - a_bar);

    let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs())) * (n / n0.min(n1));
    if (direct - split).abs() > 1e-10 * scale || (direct - pooled).abs() > 1e-10 * scale {
        return Err(Error::Internal(format!(
            "adjusted statistic forms disagree: {direct}, {split}, {pooled}"
        )));
    }
    let s = summarize_moments(data);
    let var0 = n / (n1 * n0) * (s.0 + beta * beta * s.1 - 2.0 * beta * s.2);
    Ok((direct, var0.max(0.0)))
}

fn summarize_moments(data: &IVData) -> (f64, f64, f64) {
    let n = data.n_units() as f64;
    let my = moments_of(&data.y);
    let md = moments_of(&data.d);
    let s_yd = data
        .y
        .iter()
        .zip(&data.d)
        .map(|(y, d)| (y - my.mean) * (d - md.mean))
        .sum::<f64>()
        / (n - 1.0);
    (my.variance, md.variance, s_yd)
}

/// Solution set of `a beta^2 - 2 b beta + c <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadraticSet {
    Empty,
    Point { at: f64 },
    Interval { lower: f64, upper: f64 },
    /// `[lower, inf)`.
    HalfLineUp { lower: f64 },
    /// `(-inf, upper]`.
    HalfLineDown { upper: f64 },
    /// `(-inf, lower] U [upper, inf)`.
    Complement { lower: f64, upper: f64 },
    WholeLine,
}

impl QuadraticSet {
    pub fn contains(&self, beta: f64) -> bool {
        match *self {
            QuadraticSet::Empty => false,
            QuadraticSet::Point { at } => beta == at,
            QuadraticSet::Interval { lower, upper } => lower <= beta && beta <= upper,
            QuadraticSet::HalfLineUp { lower } => beta >= lower,
            QuadraticSet::HalfLineDown { upper } => beta <= upper,
            QuadraticSet::Complement { lower, upper } => beta <= lower || beta >= upper,
            QuadraticSet::WholeLine => true,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            QuadraticSet::Empty => "empty",
            QuadraticSet::Point { .. } => "point",
            QuadraticSet::Interval { .. } => "interval",
            QuadraticSet::HalfLineUp { .. } => "half_line_up",
            QuadraticSet::HalfLineDown { .. } => "half_line_down",
            QuadraticSet::Complement { .. } => "complement",
            QuadraticSet::WholeLine => "whole_line",
        }
    }

    pub fn endpoints(&self) -> Vec<f64> {
        match *self {
            QuadraticSet::Empty | QuadraticSet::WholeLine => vec![],
            QuadraticSet::Point { at } => vec![at],
            QuadraticSet::HalfLineUp { lower } => vec![lower],
            QuadraticSet::HalfLineDown { upper } => vec![upper],
            QuadraticSet::Interval { lower, upper } | QuadraticSet::Complement { lower, upper } => {
                vec![lower, upper]
            }
        }
    }

    /// Image under `beta -> beta * s` for `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            QuadraticSet::Empty => QuadraticSet::Empty,
            QuadraticSet::WholeLine => QuadraticSet::WholeLine,
            QuadraticSet::Point { at } => QuadraticSet::Point { at: at * s },
            QuadraticSet::HalfLineUp { lower } => QuadraticSet::HalfLineUp { lower: lower * s },
            QuadraticSet::HalfLineDown { upper } => QuadraticSet::HalfLineDown { upper: upper * s },
            QuadraticSet::Interval { lower, upper } => QuadraticSet::Interval {
                lower: lower * s,
                upper: upper * s,
            },
            QuadraticSet::Complement { lower, upper } => QuadraticSet::Complement {
                lower: lower * s,
                upper: upper * s,
            },
        }
    }
}

/// Relative width of the band around zero in which the discriminant
/// `4b^2 - 4ac` counts as zero.
pub const DISCRIMINANT_TOL: f64 = 1e-12;

/// Classify the solution set of `a beta^2 - 2 b beta + c <= 0`.
pub fn classify_quadratic(a: f64, b: f64, c: f64) -> QuadraticSet {
    if a == 0.0 {
        return if b > 0.0 {
            QuadraticSet::HalfLineUp { lower: c / (2.0 * b) }
        } else if b < 0.0 {
            QuadraticSet::HalfLineDown { upper: c / (2.0 * b) }
        } else if c > 0.0 {
            QuadraticSet::Empty
        } else {
            QuadraticSet::WholeLine
        };
    }
    let bb = 4.0 * b * b;
    let ac = 4.0 * a * c;
    let mut delta = bb - ac;
    if delta.abs() <= DISCRIMINANT_TOL * bb.max(ac.abs()) {
        delta = 0.0;
    }
    if a > 0.0 {
        if delta < 0.0 {
            QuadraticSet::Empty
        } else if delta == 0.0 {
            QuadraticSet::Point { at: b / a }
        } else {
            let (lower, upper) = roots(a, b, c, delta);
            QuadraticSet::Interval { lower, upper }
        }
    } else if delta <= 0.0 {
        QuadraticSet::WholeLine
    } else {
        let (lower, upper) = roots(a, b, c, delta);
        QuadraticSet::Complement { lower, upper }
    }
}

fn roots(a: f64, b: f64, c: f64, delta: f64) -> (f64, f64) {
    let q = b + b.signum() * (delta / 4.0).sqrt();
    let (r1, r2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / a, c / q)
    };
    (r1.min(r2), r1.max(r2))
}

/// Coefficients `(a, b, c)` of the inverted test at the given summary.
pub fn quadratic_coefficients(s: &IVSummary) -> (f64, f64, f64) {
    (
        s.tau_hat_d * s.tau_hat_d - s.eta * s.s2_d,
        s.tau_hat_d * s.tau_hat_y - s.eta * s.s_yd,
        s.tau_hat_y * s.tau_hat_y - s.eta * s.s2_y,
    )
}

/// Set of `beta` not rejected by the normal-approximation test at level
/// `alpha`.
pub fn iv_confidence_set(data: &IVData, alpha: f64) -> Result<QuadraticSet> {
    Ok(iv_confidence(data, alpha)?.0)
}

pub fn iv_confidence(data: &IVData, alpha: f64) -> Result<(QuadraticSet, IVSummary)> {
    let s = summarize(data, alpha)?;
    let (a, b, c) = quadratic_coefficients(&s);
    Ok((classify_quadratic(a, b, c), s))
}

/// Weak-instrument regularity diagnostic for a sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvCondition {
    pub value: f64,
    /// Set when a partial variance vanishes, e.g. `d` proportional to `y`.
    pub degenerate: bool,
}

pub fn iv_condition_stat(data: &IVData, n: usize) -> Result<IvCondition> {
    let big = data.n_units();
    if n == 0 || n >= big {
        return Err(Error::Argument(format!("sample size {n} outside 1..{big}")));
    }
    let my = moments_of(&data.y);
    let md = moments_of(&data.d);
    let (s2y, s2d, syd) = summarize_moments(data);
    let partial_y = if s2d > 0.0 { s2y - syd * syd / s2d } else { 0.0 };
    let partial_d = if s2y > 0.0 { s2d - syd * syd / s2y } else { 0.0 };
    let degenerate = !(partial_y > 1e-12 * s2y) || !(partial_d > 1e-12 * s2d);
    if degenerate {
        return Ok(IvCondition {
            value: f64::INFINITY,
            degenerate,
        });
    }
    let k = n.min(big - n) as f64;
    Ok(IvCondition {
        value: (my.max_sq_dev / partial_y + md.max_sq_dev / partial_d) / k,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(z: &[u8], d: &[f64], y: &[f64]) -> IVData {
        IVData::new(z.iter().map(|&v| v == 1).collect(), d.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(classify_quadratic(1.0, 0.0, -1.0), QuadraticSet::Interval { lower: -1.0, upper: 1.0 });
        assert_eq!(classify_quadratic(1.0, 0.0, 1.0), QuadraticSet::Empty);
        assert_eq!(classify_quadratic(-1.0, 0.0, -1.0), QuadraticSet::WholeLine);
        assert_eq!(classify_quadratic(0.0, 1.0, 0.0), QuadraticSet::HalfLineUp { lower: 0.0 });
        assert_eq!(classify_quadratic(-1.0, 0.0, 1.0), QuadraticSet::Complement { lower: -1.0, upper: 1.0 });
    }

    #[test]
    fn all_nine_rows() {
        assert_eq!(classify_quadratic(1.0, 0.0, 1.0).kind(), "empty");
        assert_eq!(classify_quadratic(1.0, 1.0, 1.0), QuadraticSet::Point { at: 1.0 });
        assert_eq!(classify_quadratic(1.0, 1.0, 0.0), QuadraticSet::Interval { lower: 0.0, upper: 2.0 });
        assert_eq!(classify_quadratic(-1.0, 1.0, -1.0), QuadraticSet::WholeLine);
        assert_eq!(classify_quadratic(-1.0, 0.0, -4.0), QuadraticSet::WholeLine);
        assert_eq!(classify_quadratic(-1.0, 0.0, 4.0), QuadraticSet::Complement { lower: -2.0, upper: 2.0 });
        assert_eq!(classify_quadratic(0.0, 2.0, 4.0), QuadraticSet::HalfLineUp { lower: 1.0 });
        assert_eq!(classify_quadratic(0.0, -2.0, 4.0), QuadraticSet::HalfLineDown { upper: -1.0 });
        assert_eq!(classify_quadratic(0.0, 0.0, 1.0), QuadraticSet::Empty);
        assert_eq!(classify_quadratic(0.0, 0.0, 0.0), QuadraticSet::WholeLine);
        assert_eq!(classify_quadratic(0.0, 0.0, -1.0), QuadraticSet::WholeLine);
    }

    #[test]
    fn serde_round_trip() {
        for s in [
            QuadraticSet::Empty,
            QuadraticSet::Point { at: 1.5 },
            QuadraticSet::Complement { lower: -1.0, upper: 2.0 },
        ] {
            let j = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<QuadraticSet>(&j).unwrap(), s);
        }
        assert_eq!(
            serde_json::to_string(&QuadraticSet::HalfLineUp { lower: 0.0 }).unwrap(),
            r#"{"kind":"half_line_up","lower":0.0}"#
        );
    }

    #[test]
    fn adjusted_stat_reductions() {
        let d = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let y: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
        let data = iv(&[1, 1, 1, 0, 0, 0], &d, &y);
        let (t, _) = adjusted_stat(&data, 2.0).unwrap();
        assert_eq!(t, 0.0);

        let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
        let data = iv(&[1, 0, 1, 0, 1, 0], &d, &y);
        let (t, v) = adjusted_stat(&data, 0.0).unwrap();
        let s = summarize(&data, 0.05).unwrap();
        assert!((t - s.tau_hat_y).abs() < 1e-14);
        assert!((v - 6.0 / 9.0 * s.s2_y).abs() < 1e-14);
    }

    #[test]
    fn exact_ratio_is_covered() {
        let d = [0.2, 1.3, 0.9, 0.1, 0.7, 0.4, 1.1, 0.0];
        let y: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
        let data = iv(&[1, 1, 0, 0, 1, 0, 1, 0], &d, &y);
        assert!(iv_confidence_set(&data, 0.05).unwrap().contains(2.0));
    }

    #[test]
    fn condition_stat() {
        let d = [1.0, 2.0, 3.0, 4.0];
        let data = iv(&[1, 1, 0, 0], &d, &[2.0, 4.0, 6.0, 8.0]);
        assert!(iv_condition_stat(&data, 2).unwrap().degenerate);

        // uncorrelated, unit variances
        let y = [1.0, -1.0, 1.0, -1.0];
        let dd = [1.0, 1.0, -1.0, -1.0];
        let s = (4.0_f64 / 3.0).sqrt();
        let y: Vec<f64> = y.iter().map(|v| v / s).collect();
        let dd: Vec<f64> = dd.iter().map(|v| v / s).collect();
        let data = iv(&[1, 0, 1, 0], &dd, &y);
        let c = iv_condition_stat(&data, 2).unwrap();
        assert!(!c.degenerate);
        assert!((c.value - (0.75 + 0.75) / 2.0).abs() < 1e-12);
    }
}
