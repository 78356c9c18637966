//! Special functions used by the inference layer.
//!
//! The normal CDF and the regularized lower incomplete gamma come from
//! `statrs`; the quantiles, the equal-threshold bivariate orthant and the
//! joint-test critical value are computed here.

use serde::{Deserialize, Serialize};
use statrs::function::gamma;

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Correlations with `|rho|` above this are treated as perfectly (anti)correlated.
const DEGENERATE_RHO: f64 = 1.0 - 1e-12;

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Inverse of [`std_normal_cdf`].
///
/// Acklam's rational approximation seeds a few Halley steps on the CDF, which
/// brings `|cdf(q) - p|` below 1e-10 across `(0, 1)`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    if p > 0.5 {
        // 1 - p is exact here
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = acklam(p);
    for _ in 0..4 {
        let err = std_normal_cdf(x) - p;
        if err == 0.0 {
            break;
        }
        let u = err * SQRT_2PI * (0.5 * x * x).exp();
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_671_010_584_946,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
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

/// Chi-square CDF with `df` degrees of freedom.
pub fn chi2_cdf(df: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma::gamma_lr(df as f64 / 2.0, x / 2.0)
}

/// Chi-square upper tail `P(X > x)`.
pub fn chi2_sf(df: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(df as f64 / 2.0, x / 2.0)
}

/// Inverse of [`chi2_cdf`] by bracketing bisection.
pub fn chi2_quantile(df: usize, p: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::Argument("chi-square needs df >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!(
            "chi-square quantile needs p in (0, 1), got {p}"
        )));
    }
    let mut lo = 0.0_f64;
    let mut hi = (df as f64).max(1.0) * 2.0;
    while chi2_cdf(df, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_cdf(df, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Threshold and correlation for an equal-threshold lower orthant query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthantQuery {
    pub c: f64,
    pub rho: f64,
}

impl OrthantQuery {
    pub fn new(c: f64, rho: f64) -> Result<Self> {
        if c.is_nan() {
            return Err(Error::InvalidInput("orthant threshold is NaN".into()));
        }
        if !(rho.abs() <= 1.0) {
            return Err(Error::Argument(format!("correlation {rho} outside [-1, 1]")));
        }
        Ok(Self { c, rho })
    }

    /// `P(X <= c, Y <= c)` for a standard bivariate normal with correlation `rho`.
    pub fn probability(&self) -> f64 {
        bvn_lower_orthant(self.c, self.rho)
    }
}

/// `P(X <= c, Y <= c)` for a standard bivariate normal pair with correlation `rho`.
///
/// Integrates `phi(x) * Phi((c - rho x) / sqrt(1 - rho^2))` over `x <= c`. The
/// result is clamped to the Fréchet bounds `[max(0, 2 Phi(c) - 1), Phi(c)]`.
pub fn bvn_lower_orthant(c: f64, rho: f64) -> f64 {
    let upper = std_normal_cdf(c);
    let lower = (2.0 * upper - 1.0).max(0.0);
    if c == f64::INFINITY {
        return 1.0;
    }
    if c == f64::NEG_INFINITY {
        return 0.0;
    }
    if rho >= DEGENERATE_RHO {
        return upper;
    }
    if rho <= -DEGENERATE_RHO {
        return lower;
    }
    const FLOOR: f64 = -12.0;
    if c <= FLOOR {
        return lower.max(0.0).min(upper);
    }
    let scale = (1.0 - rho * rho).sqrt();
    let integrand = |x: f64| std_normal_pdf(x) * std_normal_cdf((c - rho * x) / scale);

    // The inner CDF switches over near x = c / rho; split there so the
    // adaptive rule sees the step on a panel boundary.
    let mut breaks = vec![FLOOR, c];
    if rho != 0.0 {
        let knee = c / rho;
        if knee > FLOOR && knee < c {
            breaks.insert(1, knee);
        }
    }
    let total: f64 = breaks
        .windows(2)
        .map(|w| adaptive_gk15(&integrand, w[0], w[1], 1e-14, 60))
        .sum();
    total.clamp(lower, upper)
}

/// `gamma_rho(c) = 1 - P(X <= c, Y <= c)`: the probability that the larger of
/// two standardized statistics with correlation `rho` exceeds `c`.
pub fn gamma_rho(c: f64, rho: f64) -> f64 {
    1.0 - bvn_lower_orthant(c, rho)
}

/// Critical value `c` solving `gamma_rho(c) = alpha`.
///
/// The root is bracketed by the Fréchet bounds:
/// `Phi^-1(1 - alpha) <= c <= Phi^-1(1 - alpha / 2)`.
pub fn solve_gamma_c(rho: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha {alpha} outside (0, 1)")));
    }
    if !(rho.abs() <= 1.0) {
        return Err(Error::Argument(format!("correlation {rho} outside [-1, 1]")));
    }
    let mut lo = std_normal_quantile(1.0 - alpha)?;
    let mut hi = std_normal_quantile(1.0 - alpha / 2.0)?;
    if rho >= DEGENERATE_RHO {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_rho(mid, rho) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

pub(crate) fn adaptive_gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-12 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive_gk15(f, a, mid, 0.5 * tol, depth - 1) + adaptive_gk15(f, mid, b, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// erf by its Maclaurin series, good to ~1e-15 for |x| <= 3.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    fn cdf_oracle(x: f64) -> f64 {
        0.5 * (1.0 + erf_series(x / SQRT_2))
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for i in -40..=40 {
            let x = i as f64 * 0.075;
            assert!((std_normal_cdf(x) - cdf_oracle(x)).abs() < 1e-13, "x = {x}");
        }
        assert_eq!(std_normal_cdf(0.0), 0.5);
    }

    #[test]
    fn cdf_symmetry() {
        for i in 1..=60 {
            let x = i as f64 * 0.1;
            assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_of_0975() {
        // frozen from bisection on the series oracle
        let mut lo = 1.9;
        let mut hi = 2.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cdf_oracle(mid) < 0.975 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 1.959_963_984_540_054).abs() < 1e-12);
        let q = std_normal_quantile(0.975).unwrap();
        assert!((q - 1.959_964).abs() < 1e-5);
        assert!((q - 1.959_963_984_540_054).abs() < 1e-10);
    }

    #[test]
    fn quantile_round_trip_everywhere() {
        let ps = [1e-300, 1e-20, 1e-10, 1e-5, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999, 1.0 - 1e-9];
        for &p in &ps {
            let q = std_normal_quantile(p).unwrap();
            let back = std_normal_cdf(q);
            assert!((back - p).abs() <= 1e-10_f64.max(1e-10 * p), "p = {p}, back = {back}");
        }
    }

    #[test]
    fn quantile_rejects_bad_p() {
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn chi2_df1_is_squared_normal() {
        let z = std_normal_quantile(0.975).unwrap();
        let q = chi2_quantile(1, 0.95).unwrap();
        assert!((q - z * z).abs() < 1e-8 * q);
        assert!((q - 3.841_46).abs() < 1e-5);
    }

    #[test]
    fn chi2_df2_closed_form() {
        let q = chi2_quantile(2, 0.95).unwrap();
        assert!((q - (-2.0 * 0.05_f64.ln())).abs() < 1e-8 * q);
        assert!((q - 5.991_46).abs() < 1e-5);
    }

    #[test]
    fn chi2_round_trip() {
        for df in 1..=10 {
            for &p in &[0.01, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99] {
                let q = chi2_quantile(df, p).unwrap();
                assert!((chi2_cdf(df, q) - p).abs() < 1e-8, "df {df} p {p}");
            }
        }
        assert!(chi2_quantile(0, 0.5).is_err());
        assert!(chi2_quantile(3, 1.0).is_err());
    }

    #[test]
    fn orthant_closed_forms() {
        assert!((bvn_lower_orthant(0.0, 0.0) - 0.25).abs() < 1e-12);
        assert!((bvn_lower_orthant(0.0, 0.5) - 1.0 / 3.0).abs() < 1e-9);
        for &c in &[-2.0, -0.3, 0.0, 1.1, 2.5] {
            assert_eq!(bvn_lower_orthant(c, 1.0), std_normal_cdf(c));
            let indep = std_normal_cdf(c).powi(2);
            assert!((bvn_lower_orthant(c, 0.0) - indep).abs() < 1e-12);
        }
        // zero-threshold arcsine law on several correlations
        for &r in &[-0.9_f64, -0.4, 0.2, 0.7, 0.99] {
            let want = 0.25 + r.asin() / (2.0 * std::f64::consts::PI);
            assert!((bvn_lower_orthant(0.0, r) - want).abs() < 1e-9, "rho {r}");
        }
    }

    #[test]
    fn orthant_near_degenerate_correlation() {
        let c = 0.8;
        let p = bvn_lower_orthant(c, 0.999_999);
        assert!((p - std_normal_cdf(c)).abs() < 1e-3);
        let m = bvn_lower_orthant(c, -0.999_999);
        assert!((m - (2.0 * std_normal_cdf(c) - 1.0)).abs() < 1e-3);
    }

    #[test]
    fn gamma_c_examples() {
        let c = solve_gamma_c(1.0, 0.05).unwrap();
        assert!((c - 1.644_853_626_951_472_2).abs() < 1e-7);
        let c = solve_gamma_c(0.0, 0.05).unwrap();
        let want = std_normal_quantile(0.95_f64.sqrt()).unwrap();
        assert!((c - want).abs() < 1e-7);
        assert!((c - 1.954_50).abs() < 1e-5);
        let c = solve_gamma_c(-1.0, 0.5).unwrap();
        assert!((c - 0.674_489_750_196_081_7).abs() < 1e-7);
    }
}
