use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gauss hypergeometric function at `(a, b, c) = (1, 2, 3)`, for `z < 1`.
///
/// Uses `₂F₁(1, 2; 3; z) = −2(ln(1 − z) + z)/z²`, which covers the analytic
/// continuation to `z ≤ −1`, and the Maclaurin series `Σ 2zⁿ/(n + 2)` for
/// `|z| < 0.1`, where the closed form loses digits to cancellation.
pub fn hyp2f1_1_2_3<S: Scalar>(z: S) -> Result<S> {
    if !(z < S::one()) {
        return Err(Error::Domain {
            what: "z",
            requirement: "< 1",
            value: z.as_f64(),
        });
    }
    let two = S::lit(2.0);
    if z.abs() < S::lit(0.1) {
        let mut sum = S::zero();
        let mut pow = S::one();
        let mut n = 0.0;
        loop {
            let term = two * pow / S::lit(n + 2.0);
            sum = sum + term;
            if term.abs() <= S::epsilon() * sum.abs() {
                break;
            }
            pow = pow * z;
            n += 1.0;
        }
        return Ok(sum);
    }
    // divided in two steps so that z² cannot overflow
    Ok(-two * ((-z).ln_1p() / z + S::one()) / z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Truncated Gauss series Σ (a)_n (b)_n / (c)_n zⁿ/n!, |z| < 1.
    fn gauss_series(a: f64, b: f64, c: f64, z: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..20_000 {
            let n = n as f64;
            term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    #[test]
    fn examples() {
        assert_eq!(hyp2f1_1_2_3(0.0f64).unwrap(), 1.0);
        assert!(rel(hyp2f1_1_2_3(0.5).unwrap(), 1.545_177_444_479_562_5) < 1e-14);
        // −2(ln 3 − 2)/4
        assert!(rel(hyp2f1_1_2_3(-2.0).unwrap(), 0.450_693_855_665_945_15) < 1e-14);
    }

    #[test]
    fn domain() {
        assert!(hyp2f1_1_2_3(1.0f64).is_err());
        assert!(hyp2f1_1_2_3(1.5f64).is_err());
        assert!(hyp2f1_1_2_3(f64::NAN).is_err());
        assert!(hyp2f1_1_2_3(-1e300f64).unwrap() >= 0.0);
    }

    #[test]
    fn matches_gauss_series_inside_unit_disc() {
        let mut s = 12345u64;
        for _ in 0..200 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let z = -0.9 + 1.8 * ((s >> 11) as f64 / (1u64 << 53) as f64);
            let v = hyp2f1_1_2_3(z).unwrap();
            assert!(rel(v, gauss_series(1.0, 2.0, 3.0, z)) < 1e-11, "z={z}");
        }
    }

    #[test]
    fn series_and_closed_form_meet_at_switch() {
        for z in [0.1, -0.1] {
            for side in [z * (1.0 - 1e-9), z * (1.0 + 1e-9)] {
                let v = hyp2f1_1_2_3(side).unwrap();
                assert!(rel(v, gauss_series(1.0, 2.0, 3.0, side)) < 1e-14, "z={side}");
            }
        }
    }
}
