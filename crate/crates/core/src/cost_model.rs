//! Cost functions `f_s` and the per-update quantities derived from them.
//!
//! For update `i` with interarrival time `y` and system time `t` the cost
//! just before delivery is `f_s(y + t)` (the peak), it drops to `f_s(t)` on
//! delivery, and the sawtooth contributes `∫_t^{y+t} f_s(u) du` of area.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostFamily {
    /// `f_s(t) = αt`
    Linear,
    /// `f_s(t) = e^{αt} − 1`
    #[serde(rename = "exp")]
    Exponential,
    /// `f_s(t) = ln(αt + 1)`
    #[serde(rename = "log")]
    Logarithmic,
}

impl CostFamily {
    pub const ALL: [CostFamily; 3] = [
        CostFamily::Linear,
        CostFamily::Exponential,
        CostFamily::Logarithmic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostFamily::Linear => "linear",
            CostFamily::Exponential => "exp",
            CostFamily::Logarithmic => "log",
        }
    }
}

impl fmt::Display for CostFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(CostFamily::Linear),
            "exp" | "exponential" => Ok(CostFamily::Exponential),
            "log" | "logarithmic" => Ok(CostFamily::Logarithmic),
            other => Err(Error::Config(format!(
                "unknown cost family {other:?} (expected linear, exp or log)"
            ))),
        }
    }
}

/// One cost family together with its shape parameter `α > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel<S> {
    family: CostFamily,
    alpha: S,
}

/// A point on the VoIU-versus-reduction curve at a fixed `y + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionPoint<S> {
    /// Interarrival part `y` of the fixed sum (the drop in elapsed time).
    pub time_drop: S,
    /// Cost reduction `D = f_s(y + t) − f_s(t)`.
    pub cost_drop: S,
    /// `V = D / f_s(y + t)`.
    pub value: S,
}

impl<S: Scalar> CostModel<S> {
    pub fn new(family: CostFamily, alpha: S) -> Result<Self> {
        if !(alpha.is_finite() && alpha > S::zero()) {
            return Err(Error::Domain {
                what: "alpha",
                requirement: "finite and > 0",
                value: alpha.as_f64(),
            });
        }
        Ok(Self { family, alpha })
    }

    pub fn linear(alpha: S) -> Result<Self> {
        Self::new(CostFamily::Linear, alpha)
    }

    pub fn exponential(alpha: S) -> Result<Self> {
        Self::new(CostFamily::Exponential, alpha)
    }

    pub fn logarithmic(alpha: S) -> Result<Self> {
        Self::new(CostFamily::Logarithmic, alpha)
    }

    pub fn family(&self) -> CostFamily {
        self.family
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    /// `f_s(t)`.
    pub fn eval(&self, t: S) -> Result<S> {
        check_time("t", t)?;
        let x = self.alpha * t;
        match self.family {
            CostFamily::Linear => Ok(x),
            CostFamily::Exponential => {
                self.check_exp_range(x)?;
                Ok(x.exp_m1())
            }
            CostFamily::Logarithmic => Ok(x.ln_1p()),
        }
    }

    /// Area `Q = ∫_t^{y+t} f_s(u) du` contributed by one update.
    ///
    /// Evaluated as a sum of nonnegative terms so that small `αy` or `αt`
    /// do not cancel.
    pub fn area_between_updates(&self, y: S, t: S) -> Result<S> {
        check_time("y", y)?;
        check_time("t", t)?;
        if y == S::zero() {
            return Ok(S::zero());
        }
        let a = self.alpha;
        let (ay, at) = (a * y, a * t);
        match self.family {
            CostFamily::Linear => Ok(a * (y * t + y * y / S::lit(2.0))),
            CostFamily::Exponential => {
                self.check_exp_range(ay + at)?;
                // e^{αt}(e^{αy} − 1 − αy) + αy(e^{αt} − 1), all over α
                let q = (at.exp() * expm1_minus_x(ay) + ay * at.exp_m1()) / a;
                if q.is_finite() {
                    Ok(q)
                } else {
                    Err(Error::Overflow {
                        alpha: a.as_f64(),
                        argument: (ay + at).as_f64(),
                    })
                }
            }
            CostFamily::Logarithmic => {
                // (1 + αt) h(αy / (1 + αt)) + αy ln(1 + αt), h(x) = (1 + x)ln(1 + x) − x
                let one_at = S::one() + at;
                Ok((one_at * one_plus_x_log_minus_x(ay / one_at) + ay * at.ln_1p()) / a)
            }
        }
    }

    /// Peak cost `f_s(y + t)` reached just before delivery.
    pub fn peak(&self, y: S, t: S) -> Result<S> {
        check_time("y", y)?;
        check_time("t", t)?;
        self.eval(y + t)
    }

    /// Value of information of update, `(f_s(y + t) − f_s(t)) / f_s(y + t)`.
    pub fn voiu(&self, y: S, t: S) -> Result<S> {
        check_time("y", y)?;
        check_time("t", t)?;
        let sum = y + t;
        if sum == S::zero() {
            return Err(Error::Domain {
                what: "y + t",
                requirement: "> 0 (VoIU is 0/0 otherwise)",
                value: 0.0,
            });
        }
        if t == S::zero() {
            return Ok(S::one());
        }
        let a = self.alpha;
        let v = match self.family {
            CostFamily::Linear => y / sum,
            // (1 − e^{−αy}) / (1 − e^{−α(y+t)}) stays bounded for any α(y+t)
            CostFamily::Exponential => {
                let den = (-(a * sum)).exp_m1();
                if den == S::zero() {
                    y / sum
                } else {
                    (-(a * y)).exp_m1() / den
                }
            }
            CostFamily::Logarithmic => {
                let den = (a * sum).ln_1p();
                if den == S::zero() {
                    y / sum
                } else {
                    (a * y / (S::one() + a * t)).ln_1p() / den
                }
            }
        };
        Ok(v.max(S::zero()).min(S::one()))
    }

    /// Reduction triple at a fixed `y + t = total` when `time_drop = y`.
    pub fn reduction_at_fixed_sum(&self, total: S, time_drop: S) -> Result<ReductionPoint<S>> {
        check_time("total", total)?;
        check_time("time_drop", time_drop)?;
        if time_drop > total || total == S::zero() {
            return Err(Error::Domain {
                what: "time_drop",
                requirement: "within [0, total] with total > 0",
                value: time_drop.as_f64(),
            });
        }
        let peak = self.eval(total)?;
        let remaining = self.eval(total - time_drop)?;
        Ok(ReductionPoint {
            time_drop,
            cost_drop: peak - remaining,
            value: self.voiu(time_drop, total - time_drop)?,
        })
    }

    fn check_exp_range(&self, x: S) -> Result<()> {
        if x > S::ln_max() {
            Err(Error::Overflow {
                alpha: self.alpha.as_f64(),
                argument: x.as_f64(),
            })
        } else {
            Ok(())
        }
    }
}

/// VoIU parameterised by the cost drop: `V = D / A` for peak `A` and drop `D ∈ [0, A]`.
pub fn voiu_from_cost_drop<S: Scalar>(peak: S, cost_drop: S) -> Result<S> {
    if !(peak.is_finite() && peak > S::zero()) {
        return Err(Error::Domain {
            what: "peak",
            requirement: "finite and > 0",
            value: peak.as_f64(),
        });
    }
    if !(cost_drop >= S::zero() && cost_drop <= peak) {
        return Err(Error::Domain {
            what: "cost_drop",
            requirement: "within [0, peak]",
            value: cost_drop.as_f64(),
        });
    }
    Ok(cost_drop / peak)
}

fn check_time<S: Scalar>(what: &'static str, t: S) -> Result<()> {
    if t.is_finite() && t >= S::zero() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            requirement: "finite and >= 0",
            value: t.as_f64(),
        })
    }
}

/// `e^x − 1 − x` without cancellation for small `|x|`.
pub(crate) fn expm1_minus_x<S: Scalar>(x: S) -> S {
    if x.abs() < S::lit(0.5) {
        let mut term = x * x / S::lit(2.0);
        let mut sum = term;
        let mut k = 3.0;
        while term.abs() > S::epsilon() * sum.abs() {
            term = term * x / S::lit(k);
            sum = sum + term;
            k += 1.0;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `(1 + x) ln(1 + x) − x` without cancellation for small `|x|`.
pub(crate) fn one_plus_x_log_minus_x<S: Scalar>(x: S) -> S {
    if x.abs() < S::lit(0.25) {
        // Σ_{k≥2} (−1)^k x^k / (k(k − 1))
        let mut pow = x * x;
        let mut sum = pow / S::lit(2.0);
        let mut k = 3.0;
        loop {
            pow = -pow * x;
            let term = pow / S::lit(k * (k - 1.0));
            sum = sum + term;
            if term.abs() <= S::epsilon() * sum.abs() {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        (S::one() + x) * x.ln_1p() - x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lin(a: f64) -> CostModel<f64> {
        CostModel::linear(a).unwrap()
    }
    fn exp(a: f64) -> CostModel<f64> {
        CostModel::exponential(a).unwrap()
    }
    fn log(a: f64) -> CostModel<f64> {
        CostModel::logarithmic(a).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Composite Simpson rule, used only as an independent check on the areas.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn eval_examples() {
        assert_eq!(lin(2.0).eval(3.0).unwrap(), 6.0);
        assert_eq!(exp(0.1).eval(0.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((log(1.0).eval(e - 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_negative_time() {
        for m in [lin(1.0), exp(1.0), log(1.0)] {
            assert!(matches!(m.eval(-1e-3), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn alpha_must_be_positive() {
        assert!(CostModel::linear(0.0).is_err());
        assert!(CostModel::exponential(-1.0).is_err());
        assert!(CostModel::logarithmic(f64::NAN).is_err());
    }

    #[test]
    fn area_examples() {
        assert_eq!(lin(2.0).area_between_updates(1.0, 2.0).unwrap(), 5.0);
        // (e^{0.2} − e^{0.1}) / 0.1 − 1
        let q = exp(0.1).area_between_updates(1.0, 1.0).unwrap();
        assert!(rel(q, 0.162_318_400_845_222_09) < 1e-14, "{q}");
        let q = log(1.0).area_between_updates(1.0, 0.0).unwrap();
        assert!(rel(q, 2.0 * 2f64.ln() - 1.0) < 1e-14);
        for m in [lin(0.3), exp(0.3), log(0.3)] {
            assert_eq!(m.area_between_updates(0.0, 7.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn area_matches_printed_forms_away_from_cancellation() {
        let (y, t, a) = (1.7f64, 2.3f64, 0.4f64);
        let printed_exp = ((a * (y + t)).exp() - (a * t).exp()) / a - y;
        assert!(rel(exp(a).area_between_updates(y, t).unwrap(), printed_exp) < 1e-13);
        let g = |x: f64| (a * x + 1.0) * (a * x + 1.0).ln();
        let printed_log = (g(y + t) - g(t)) / a - y;
        assert!(rel(log(a).area_between_updates(y, t).unwrap(), printed_log) < 1e-13);
        let printed_lin = 0.5 * a * (t + y).powi(2) - 0.5 * a * t * t;
        assert!(rel(lin(a).area_between_updates(y, t).unwrap(), printed_lin) < 1e-14);
    }

    #[test]
    fn area_stays_accurate_for_tiny_alpha() {
        // Q ≈ α(yt + y²/2) as α → 0 for every family
        let (y, t, a) = (1.0, 2.0, 1e-9);
        let expected = a * (y * t + y * y / 2.0);
        assert!(rel(exp(a).area_between_updates(y, t).unwrap(), expected) < 1e-8);
        assert!(rel(log(a).area_between_updates(y, t).unwrap(), expected) < 1e-8);
    }

    #[test]
    fn exponential_overflow_is_an_error() {
        let m = exp(1.0);
        assert!(matches!(m.area_between_updates(400.0, 400.0), Err(Error::Overflow { .. })));
        assert!(matches!(m.peak(800.0, 0.0), Err(Error::Overflow { .. })));
        assert!(matches!(m.eval(710.0), Err(Error::Overflow { .. })));
        // VoIU uses the bounded form and does not overflow
        let v = m.voiu(800.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn peak_examples() {
        assert_eq!(lin(1.0).peak(2.0, 2.0).unwrap(), 4.0);
        let p = exp(0.1).peak(5.0, 5.0).unwrap();
        assert!(rel(p, std::f64::consts::E - 1.0) < 1e-15);
        assert_eq!(log(0.3).peak(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn voiu_examples() {
        assert_eq!(lin(5.0).voiu(3.0, 1.0).unwrap(), 0.75);
        assert_eq!(lin(1.0).voiu(1.0, 1.0).unwrap(), 0.5);
        for m in [lin(0.7), exp(0.7), log(0.7)] {
            assert_eq!(m.voiu(2.5, 0.0).unwrap(), 1.0);
            assert!(matches!(m.voiu(0.0, 0.0), Err(Error::Domain { .. })));
        }
        assert!((exp(0.1).voiu(1e4, 3.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_voiu_matches_printed_form() {
        let (y, t, a) = (2.0f64, 3.0f64, 0.3f64);
        let printed = ((a * (y + t)).exp() - (a * t).exp()) / ((a * (y + t)).exp() - 1.0);
        assert!(rel(exp(a).voiu(y, t).unwrap(), printed) < 1e-14);
        // t → ∞ limit is 1 − e^{−αy}
        let v = exp(a).voiu(y, 500.0).unwrap();
        assert!((v - (1.0 - (-a * y).exp())).abs() < 1e-12);
    }

    #[test]
    fn fixed_sum_reduction() {
        let m = exp(0.3);
        let p = m.reduction_at_fixed_sum(10.0, 4.0).unwrap();
        let peak = m.eval(10.0).unwrap();
        assert!(rel(p.cost_drop, peak - m.eval(6.0).unwrap()) < 1e-15);
        assert!(rel(p.value, p.cost_drop / peak) < 1e-13);
        assert!(rel(voiu_from_cost_drop(peak, p.cost_drop).unwrap(), p.value) < 1e-13);
        assert!(m.reduction_at_fixed_sum(10.0, 11.0).is_err());
        assert!(voiu_from_cost_drop(1.0, 2.0).is_err());
    }

    #[test]
    fn area_matches_simpson_quadrature() {
        // 100 deterministic pseudo-random (y, t) pairs per family
        let mut state = 0x9e37_79b9_7f4a_7c15_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for family in CostFamily::ALL {
            for _ in 0..100 {
                let (y, t) = (10.0 * next(), 10.0 * next());
                let a = 0.05 + next();
                let m = CostModel::new(family, a).unwrap();
                let f = |u: f64| m.eval(u).unwrap();
                let oracle = simpson(f, 0.0, y + t, 4000) - simpson(f, 0.0, t, 4000);
                let q = m.area_between_updates(y, t).unwrap();
                assert!(
                    (q - oracle).abs() <= 1e-9 * oracle.abs().max(1e-300),
                    "{family} a={a} y={y} t={t}: {q} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn helper_series_agree_with_direct_forms() {
        for x in [0.3, 0.1, -0.2, 0.49, 0.51, 1.5] {
            assert!(rel(expm1_minus_x(x), x.exp_m1() - x) < 1e-12);
        }
        for x in [0.2, 0.1, -0.2, 0.24, 0.26, 3.0] {
            assert!(rel(one_plus_x_log_minus_x(x), (1.0 + x) * x.ln_1p() - x) < 1e-12);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let m = CostModel::<f32>::exponential(0.1).unwrap();
        let q = m.area_between_updates(1.0, 1.0).unwrap();
        assert!((q - 0.162_318_4).abs() < 1e-6);
    }

    fn family() -> impl Strategy<Value = CostFamily> {
        prop_oneof![
            Just(CostFamily::Linear),
            Just(CostFamily::Exponential),
            Just(CostFamily::Logarithmic)
        ]
    }

    proptest! {
        #[test]
        fn voiu_identity_and_bounds(fam in family(), a in 0.01f64..2.0, y in 0.0f64..20.0, t in 0.0f64..20.0) {
            prop_assume!(y + t > 1e-6);
            let m = CostModel::new(fam, a).unwrap();
            let v = m.voiu(y, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            let peak = m.peak(y, t).unwrap();
            let drop = peak - m.eval(t).unwrap();
            prop_assert!((v * peak - drop).abs() <= 1e-12 * peak.max(1.0));
        }

        #[test]
        fn linear_voiu_is_alpha_free(a1 in 0.01f64..100.0, a2 in 0.01f64..100.0, y in 0.0f64..50.0, t in 0.001f64..50.0) {
            prop_assert_eq!(lin(a1).voiu(y, t).unwrap(), lin(a2).voiu(y, t).unwrap());
        }

        #[test]
        fn eval_strictly_increasing(fam in family(), a in 0.01f64..2.0, t1 in 0.001f64..50.0, dt in 0.001f64..50.0) {
            let m = CostModel::new(fam, a).unwrap();
            prop_assert!(m.eval(t1 + dt).unwrap() > m.eval(t1).unwrap());
        }

        #[test]
        fn voiu_nondecreasing_in_y(fam in family(), a in 0.01f64..2.0, y in 0.001f64..20.0, dy in 0.001f64..5.0, t in 0.001f64..20.0) {
            let m = CostModel::new(fam, a).unwrap();
            prop_assert!(m.voiu(y + dy, t).unwrap() >= m.voiu(y, t).unwrap());
        }

        #[test]
        fn area_nonnegative(fam in family(), a in 0.01f64..2.0, y in 0.0f64..20.0, t in 0.0f64..20.0) {
            let m = CostModel::new(fam, a).unwrap();
            prop_assert!(m.area_between_updates(y, t).unwrap() >= 0.0);
        }
    }
}
