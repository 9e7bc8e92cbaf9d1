//! Small-sample statistics: Student-t confidence intervals and a one-sided
//! paired t-test.
//!
//! The t distribution is evaluated through the regularized incomplete beta
//! function (continued fraction, Lentz's method) with a Lanczos log-gamma;
//! quantiles come from bisection on the CDF. Accuracy is far beyond what the
//! experiment statistics need.

use crate::error::{Error, Result};

/// Lanczos approximation of `ln(Gamma(x))` for `x > 0`.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        return std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (Lentz's method).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t distribution with `dof` degrees of freedom.
pub fn t_cdf(t: f64, dof: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * reg_inc_beta(dof / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Quantile of Student's t distribution (inverse CDF) by bisection.
pub fn t_quantile(p: f64, dof: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Parameter(format!("t_quantile: p {p} outside (0, 1)")));
    }
    if dof < 1.0 {
        return Err(Error::Parameter(format!("t_quantile: dof {dof} below 1")));
    }
    if (p - 0.5).abs() < 1e-15 {
        return Ok(0.0);
    }
    // Symmetric: solve for the upper tail and mirror.
    let target = p.max(1.0 - p);
    let mut lo = 0.0;
    let mut hi = 2.0;
    while t_cdf(hi, dof) < target {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, dof) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    Ok(if p >= 0.5 { q } else { -q })
}

/// Sample mean.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator). Exactly zero for constant
/// input, with no rounding residue from the mean.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.iter().all(|&v| v == values[0]) {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Half-width of the 95% Student-t confidence interval for the mean:
/// `t(0.975, n-1) * sd / sqrt(n)`. Needs at least two values.
pub fn ci_halfwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Parameter(format!(
            "ci_halfwidth: need at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let t = t_quantile(0.975, n - 1.0)?;
    Ok(t * sample_sd(values) / n.sqrt())
}

/// One-sided paired t-test p-value for the hypothesis `mean(a - b) > 0`.
///
/// With zero variance in the differences, the p-value degenerates to 0, 1,
/// or 0.5 depending on the sign of the mean difference.
pub fn paired_t_test_one_sided(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Parameter(format!(
            "paired t-test: {} vs {} observations",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Parameter(
            "paired t-test: need at least 2 pairs".to_string(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let m = mean(&diffs);
    let sd = sample_sd(&diffs);
    if sd == 0.0 {
        return Ok(if m > 0.0 {
            0.0
        } else if m < 0.0 {
            1.0
        } else {
            0.5
        });
    }
    let t = m / (sd / n.sqrt());
    Ok(1.0 - t_cdf(t, n - 1.0))
}
