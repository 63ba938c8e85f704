use serde::{Deserialize, Serialize};

use super::MetricsError;

/// P-values below this are reported as this bound with `p_underflow` set.
pub const P_FLOOR: f64 = 1e-300;

/// Why a test result was fixed by convention instead of computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degenerate {
    /// Both samples constant with equal values: p = 1.
    EqualConstants,
    /// Both samples constant with different values: p = 0.
    DistinctConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom (`n_a + n_b - 2` when degenerate).
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<Degenerate>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub p_underflow: bool,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Two-sided Welch t-test for a difference in means.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, MetricsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(MetricsError::SampleTooSmall(s.len()));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            TTestResult {
                t: 0.0,
                df,
                p: 1.0,
                degenerate: Some(Degenerate::EqualConstants),
                p_underflow: false,
            }
        } else {
            TTestResult {
                t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                df,
                p: 0.0,
                degenerate: Some(Degenerate::DistinctConstants),
                p_underflow: false,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = student_t_two_sided(t, df);
    let p_underflow = p < P_FLOOR;
    Ok(TTestResult {
        t,
        df,
        p: if p_underflow { P_FLOOR } else { p },
        degenerate: None,
        p_underflow,
    })
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    incomplete_beta(x, y, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// I_x(a, b), the regularized incomplete beta function.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    incomplete_beta(x, 1.0 - x, a, b)
}

/// I_x(a, b) with `y = 1 - x` supplied separately to keep precision near 1.
fn incomplete_beta(x: f64, y: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(y, b, a) / b
    }
}

/// Continued fraction for the incomplete beta, evaluated with the modified
/// Lentz method.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 200_000;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
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
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_cases() {
        // df = 1 is Cauchy: p = 1 - 2 atan(|t|) / pi.
        for t in [0.3, 1.0, 4.0, 30.0] {
            let want = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_sided(t, 1.0) - want).abs() < 1e-13, "t={t}");
        }
        // df = 2: p = 1 - |t| / sqrt(2 + t^2).
        for t in [0.1f64, 2.0, 9.0] {
            let want = 1.0 - t / (2.0 + t * t).sqrt();
            assert!((student_t_two_sided(t, 2.0) - want).abs() < 1e-13, "t={t}");
        }
        assert!((regularized_incomplete_beta(0.3, 1.0, 1.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let r = welch_t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((r.p, r.degenerate), (1.0, Some(Degenerate::EqualConstants)));
        let r = welch_t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert_eq!((r.p, r.degenerate), (0.0, Some(Degenerate::DistinctConstants)));
        assert_eq!(welch_t_test(&[1.0], &[1.0, 2.0]), Err(MetricsError::SampleTooSmall(1)));
        assert_eq!(welch_t_test(&[1.0, f64::NAN], &[1.0, 2.0]), Err(MetricsError::NonFinite));
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 4.0, 2.5, 7.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn tiny_p_is_floored_and_flagged() {
        let a: Vec<f64> = (0..200).map(|i| 1000.0 + (i % 3) as f64 * 1e-3).collect();
        let b: Vec<f64> = (0..200).map(|i| (i % 3) as f64 * 1e-3).collect();
        let r = welch_t_test(&a, &b).unwrap();
        assert!(r.p_underflow);
        assert_eq!(r.p, P_FLOOR);
    }
}
