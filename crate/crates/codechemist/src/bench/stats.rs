//! Welch's two-sample t-test.
//!
//! The p-value comes from the Student-t survival function evaluated through
//! the regularized incomplete beta function (Lentz's continued fraction),
//! which is numerically stable across the degrees-of-freedom range the
//! Welch–Satterthwaite approximation produces.

use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    /// Set when both samples had zero variance; the p-value is then defined
    /// as 1 for equal means and 0 otherwise.
    pub degenerate: bool,
}

/// Two-sided Welch two-sample t-test.
pub fn welch_t_test(sample_a: &[f64], sample_b: &[f64]) -> Result<WelchTest, BenchError> {
    if sample_a.len() < 2 || sample_b.len() < 2 {
        return Err(BenchError::DomainViolation(
            "welch_t_test requires at least two values per sample".to_string(),
        ));
    }
    let (mean_a, var_a) = mean_and_variance(sample_a);
    let (mean_b, var_b) = mean_and_variance(sample_b);
    let na = sample_a.len() as f64;
    let nb = sample_b.len() as f64;

    if var_a == 0.0 && var_b == 0.0 {
        let equal = mean_a == mean_b;
        return Ok(WelchTest {
            t: if equal { 0.0 } else { f64::INFINITY },
            df: na + nb - 2.0,
            p_value: if equal { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }

    let se_a = var_a / na;
    let se_b = var_b / nb;
    let t = (mean_a - mean_b) / (se_a + se_b).sqrt();
    let df = (se_a + se_b).powi(2)
        / (se_a.powi(2) / (na - 1.0) + se_b.powi(2) / (nb - 1.0));
    let p_value = 2.0 * student_t_sf(t.abs(), df);
    Ok(WelchTest {
        t,
        df,
        p_value: p_value.min(1.0),
        degenerate: false,
    })
}

fn mean_and_variance(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let variance = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, variance)
}

/// P(T > t) for Student's t with `df` degrees of freedom, t >= 0.
fn student_t_sf(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let x = df / (df + t * t);
    0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
}

/// I_x(a, b) via the continued-fraction expansion, with the symmetry
/// transform applied when x is past the central cut.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz's method for the incomplete beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, 9 coefficients).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_9;
    for (i, coeff) in COEFFS.iter().enumerate() {
        acc += coeff / (x + (i as f64) + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_p_one() {
        let result = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(!result.degenerate);
        assert_eq!(result.p_value, 1.0);
        assert_eq!(result.t, 0.0);
    }

    #[test]
    fn zero_variance_distinct_means_is_degenerate() {
        let result = welch_t_test(&[0.0, 0.0, 0.0], &[5.0, 5.0, 5.0]).unwrap();
        assert!(result.degenerate);
        assert_eq!(result.p_value, 0.0);

        let equal = welch_t_test(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert!(equal.degenerate);
        assert_eq!(equal.p_value, 1.0);
    }

    #[test]
    fn clearly_separated_samples_are_significant() {
        let a = [2.1, 2.5, 2.3, 2.2, 2.4];
        let b = [3.1, 3.0, 3.2, 2.9, 3.3];
        let result = welch_t_test(&a, &b).unwrap();
        assert!(result.p_value < 0.001, "p = {}", result.p_value);
    }

    #[test]
    fn symmetric_in_sample_order() {
        let a = [1.0, 2.0, 4.0, 3.5];
        let b = [2.5, 2.6, 2.8];
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        assert!((ab.p_value - ba.p_value).abs() < 1e-15);
        assert!((ab.t + ba.t).abs() < 1e-15);
    }

    #[test]
    fn too_small_samples_are_rejected() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_t_test(&[], &[]).is_err());
    }

    #[test]
    fn matches_statrs_student_t_cdf() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for (t, df) in [(0.5, 3.0), (1.2, 7.4), (2.8, 2.3), (0.01, 30.0), (4.0, 12.5)] {
            let reference = StudentsT::new(0.0, 1.0, df).unwrap();
            let ours = student_t_sf(t, df);
            let theirs = 1.0 - reference.cdf(t);
            assert!(
                (ours - theirs).abs() < 1e-12,
                "t={t} df={df}: {ours} vs {theirs}"
            );
        }
    }
}
