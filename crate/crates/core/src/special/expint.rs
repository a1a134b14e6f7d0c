use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_ITER: usize = 500;

/// Exponential integral `Ei(x) = −∫_{−x}^∞ e^{−t}/t dt` (principal value for `x > 0`).
///
/// Negative arguments go through `E1(−x)`: its power series for `−x ≤ 1`
/// and a continued fraction beyond. Positive arguments use the power
/// series up to `−ln ε` and the asymptotic expansion above it.
pub fn expint_ei<S: Scalar>(x: S) -> Result<S> {
    if x.is_nan() {
        return Err(Error::Domain {
            what: "x",
            requirement: "a number",
            value: f64::NAN,
        });
    }
    if x == S::zero() {
        return Err(Error::Pole);
    }
    if x.abs() > S::ln_max() {
        return Err(Error::Range { x: x.as_f64() });
    }
    if x < S::zero() {
        return expint_e1(-x).map(|e1| -e1);
    }
    let eps = S::epsilon();
    if x < -eps.ln() {
        // γ + ln x + Σ x^k / (k·k!)
        let mut fact = S::one();
        let mut sum = S::zero();
        for k in 1..MAX_ITER {
            let k = S::lit(k as f64);
            fact = fact * x / k;
            let term = fact / k;
            sum = sum + term;
            if term < eps * sum {
                break;
            }
        }
        Ok(sum + x.ln() + S::euler_gamma())
    } else {
        // e^x / x · Σ k! / x^k, truncated at the smallest term
        let mut sum = S::zero();
        let mut term = S::one();
        for k in 1..MAX_ITER {
            let prev = term;
            term = term * S::lit(k as f64) / x;
            if term < eps {
                break;
            }
            if term < prev {
                sum = sum + term;
            } else {
                sum = sum - prev;
                break;
            }
        }
        Ok(x.exp() * (S::one() + sum) / x)
    }
}

/// `E1(z) = ∫_1^∞ e^{−zt}/t dt` for `z > 0`.
pub fn expint_e1<S: Scalar>(z: S) -> Result<S> {
    check_positive(z)?;
    if z <= S::one() {
        Ok(e1_series(z))
    } else {
        if z > S::ln_max() {
            return Err(Error::Range { x: (-z).as_f64() });
        }
        Ok(e1_continued_fraction(z) * (-z).exp())
    }
}

/// `e^z E1(z)` for `z > 0`; finite for every finite `z`, so closed forms can
/// use `e^{z} Ei(−z) = −e1_scaled(z)` without forming the huge and tiny factors.
pub fn e1_scaled<S: Scalar>(z: S) -> Result<S> {
    check_positive(z)?;
    if z <= S::one() {
        Ok(z.exp() * e1_series(z))
    } else if z.is_infinite() {
        Ok(S::zero())
    } else {
        Ok(e1_continued_fraction(z))
    }
}

fn check_positive<S: Scalar>(z: S) -> Result<()> {
    if z > S::zero() {
        Ok(())
    } else if z == S::zero() {
        Err(Error::Pole)
    } else {
        Err(Error::Domain {
            what: "z",
            requirement: "> 0",
            value: z.as_f64(),
        })
    }
}

/// −γ − ln z − Σ (−z)^k / (k·k!), for `0 < z ≤ 1`.
fn e1_series<S: Scalar>(z: S) -> S {
    let eps = S::epsilon();
    let mut fact = S::one();
    let mut sum = S::zero();
    for k in 1..MAX_ITER {
        let kf = S::lit(k as f64);
        fact = -fact * z / kf;
        let term = fact / kf;
        sum = sum + term;
        if term.abs() < eps * sum.abs() {
            break;
        }
    }
    -S::euler_gamma() - z.ln() - sum
}

/// Modified Lentz evaluation of `e^z E1(z)` for `z > 1`.
fn e1_continued_fraction<S: Scalar>(z: S) -> S {
    let tiny = S::min_positive_value() / S::epsilon();
    let eps = S::epsilon();
    let two = S::lit(2.0);
    let mut b = z + S::one();
    let mut c = S::one() / tiny;
    let mut d = S::one() / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let i = S::lit(i as f64);
        let an = -i * i;
        b = b + two;
        d = S::one() / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h = h * del;
        if (del - S::one()).abs() < eps {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Ei via its defining series summed in compensated (Kahan) arithmetic.
    /// Kept separate from the implementation's branch selection.
    fn ei_series_oracle(x: f64) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        let mut fact = 1.0f64;
        for k in 1..400 {
            fact *= x / k as f64;
            let term = fact / k as f64;
            let yk = term - comp;
            let t = sum + yk;
            comp = (t - sum) - yk;
            sum = t;
            if term.abs() < 1e-30 {
                break;
            }
        }
        0.577_215_664_901_532_860_6 + x.abs().ln() + sum
    }

    #[test]
    fn reference_values() {
        // values from a 30-digit series evaluation
        assert!(rel(expint_ei(-1.0).unwrap(), -0.219_383_934_395_520_27) < 1e-14);
        assert!(rel(expint_ei(1.0).unwrap(), 1.895_117_816_355_936_8) < 1e-14);
        assert!(rel(expint_ei(-1e-8).unwrap(), -17.843_465_089_050_833) < 1e-14);
        assert!(expint_ei(-1e-8f64).unwrap().abs() > 17.0);
    }

    #[test]
    fn agrees_with_compensated_series_where_it_is_reliable() {
        for x in [-3.0, -2.0, -0.5, -0.01, 0.01, 0.5, 2.0, 5.0, 10.0, 20.0] {
            let v = expint_ei(x).unwrap();
            assert!(rel(v, ei_series_oracle(x)) < 1e-12, "x={x}: {v}");
        }
    }

    #[test]
    fn branch_boundaries_are_continuous() {
        let eps_ln = -f64::EPSILON.ln();
        for x in [-1.0, eps_ln] {
            let lo = expint_ei(x * (1.0 - 1e-12)).unwrap();
            let hi = expint_ei(x * (1.0 + 1e-12)).unwrap();
            assert!(rel(lo, hi) < 1e-10, "x={x}: {lo} {hi}");
        }
    }

    #[test]
    fn large_arguments() {
        // Ei(50) and Ei(−50) from a 30-digit evaluation
        assert!(rel(expint_ei(50.0).unwrap(), 1.058_563_689_713_169_1e20) < 1e-13);
        assert!(rel(expint_ei(-50.0).unwrap(), -3.783_264_029_550_459_7e-24) < 1e-13);
        assert!(expint_ei(700.0f64).unwrap().is_finite());
        assert!(expint_ei(-700.0).unwrap() < 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(expint_ei(0.0f64), Err(Error::Pole));
        assert!(matches!(expint_ei(800.0f64), Err(Error::Range { .. })));
        assert!(matches!(expint_ei(-800.0f64), Err(Error::Range { .. })));
        assert!(expint_ei(f64::NAN).is_err());
        assert!(e1_scaled(-1.0f64).is_err());
    }

    #[test]
    fn sign_change_near_root() {
        for x in [-10.0, -1.0, -1e-3] {
            assert!(expint_ei(x).unwrap() < 0.0);
        }
        for x in [0.373, 0.5, 1.0, 30.0] {
            assert!(expint_ei(x).unwrap() > 0.0);
        }
        assert!(expint_ei(0.37).unwrap() < 0.0);
    }

    #[test]
    fn scaled_e1_consistent() {
        for z in [1e-6f64, 0.3, 1.0, 1.5, 10.0, 300.0] {
            let direct = z.exp() * expint_e1(z).unwrap();
            assert!(rel(e1_scaled(z).unwrap(), direct) < 1e-13, "z={z}");
        }
        // e^z E1(z) ~ 1/z (1 − 1/z + 2/z²) for large z
        let z = 1e6;
        let asym = (1.0 - 1.0 / z + 2.0 / (z * z)) / z;
        assert!(rel(e1_scaled(z).unwrap(), asym) < 1e-15);
    }

    #[test]
    fn single_precision() {
        let v: f32 = expint_ei(-1.0f32).unwrap();
        assert!((v + 0.219_383_93).abs() < 1e-6);
    }
}
