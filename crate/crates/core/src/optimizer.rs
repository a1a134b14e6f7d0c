//! Search over the server utilization `ρ` at fixed `μ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::{self, QueueParams};
use crate::cost_model::{CostFamily, CostModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Points in the unimodality guard grid.
pub const GUARD_POINTS: usize = 50;

/// Distance kept from the exponential-family regime edges, in units of `ρ`.
pub const EXP_BRACKET_MARGIN: f64 = 1e-6;

/// Minimizes `f` on `[lo, hi]` by Brent's method (golden section with
/// parabolic steps). Returns `(x*, f(x*))` with `x*` within about `tol` of
/// the minimizer when `f` is unimodal on the interval.
pub fn minimize_scalar<S, F>(mut f: F, lo: S, hi: S, tol: S) -> Result<(S, S)>
where
    S: Scalar,
    F: FnMut(S) -> Result<S>,
{
    if !(lo < hi) || !(tol > S::zero()) {
        return Err(Error::Config(format!(
            "minimize_scalar needs lo < hi and tol > 0 (lo = {lo}, hi = {hi}, tol = {tol})"
        )));
    }
    let mut eval = |x: S| -> Result<S> {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective { x: x.as_f64() })
        }
    };
    let half = S::lit(0.5);
    let cgold = S::lit(0.381_966_011_250_105_1);
    let sqrt_eps = S::epsilon().sqrt();
    let (mut a, mut b) = (lo, hi);
    let mut x = a + cgold * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (S::zero(), S::zero());

    for _ in 0..500 {
        let xm = half * (a + b);
        let tol1 = sqrt_eps * x.abs() + tol / S::lit(3.0);
        let tol2 = S::lit(2.0) * tol1;
        if (x - xm).abs() <= tol2 - half * (b - a) {
            break;
        }
        let mut take_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = S::lit(2.0) * (q - r);
            if q > S::zero() {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (half * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                take_golden = false;
            }
        }
        if take_golden {
            e = if x >= xm { a - x } else { b - x };
            d = cgold * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = eval(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Minimize the average CoUD.
    Coud,
    /// Minimize the average PCoUD.
    Pcoud,
    /// Maximize the average VoIU.
    Voiu,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Coud => "coud",
            Objective::Pcoud => "pcoud",
            Objective::Voiu => "voiu",
        }
    }

    pub fn maximizes(self) -> bool {
        self == Objective::Voiu
    }

    pub fn evaluate<S: Scalar>(self, p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
        match self {
            Objective::Coud => analytics::coud(p, model),
            Objective::Pcoud => analytics::pcoud(p, model),
            Objective::Voiu => analytics::voiu(p, model),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coud" => Ok(Objective::Coud),
            "pcoud" => Ok(Objective::Pcoud),
            "voiu" => Ok(Objective::Voiu),
            other => Err(Error::Config(format!(
                "unknown objective {other:?} (expected coud, pcoud or voiu)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeSpec<S> {
    pub objective: Objective,
    pub model: CostModel<S>,
    pub mu: S,
    /// Search interval for `ρ`.
    pub bracket: (S, S),
    /// Tolerance on `ρ*`.
    pub tol: S,
}

impl<S: Scalar> OptimizeSpec<S> {
    pub fn new(objective: Objective, model: CostModel<S>, mu: S) -> Self {
        Self {
            objective,
            model,
            mu,
            bracket: (S::lit(0.01), S::lit(0.99)),
            tol: S::lit(1e-6),
        }
    }

    pub fn with_bracket(mut self, lo: S, hi: S) -> Self {
        self.bracket = (lo, hi);
        self
    }

    pub fn with_tol(mut self, tol: S) -> Self {
        self.tol = tol;
        self
    }

    /// The bracket intersected with the region where the objective exists:
    /// for exponential CoUD and PCoUD, `α/μ < ρ < 1 − α/μ` shrunk by a
    /// `1e-6` margin.
    pub fn effective_bracket(&self) -> Result<(S, S)> {
        let (mut lo, mut hi) = self.bracket;
        if !(lo > S::zero() && hi < S::one() && lo < hi) {
            return Err(Error::Config(format!(
                "bracket must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
            )));
        }
        if !(self.tol > S::zero()) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.mu.is_finite() && self.mu > S::zero()) {
            return Err(Error::Config(format!("mu must be finite and > 0, got {}", self.mu)));
        }
        if self.model.family() == CostFamily::Exponential && self.objective != Objective::Voiu {
            let edge = self.model.alpha() / self.mu;
            let margin = S::lit(EXP_BRACKET_MARGIN);
            lo = lo.max(edge + margin);
            hi = hi.min(S::one() - edge - margin);
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "no utilization satisfies alpha/mu < rho < 1 - alpha/mu for alpha = {}, mu = {}",
                    self.model.alpha(),
                    self.mu
                )));
            }
        }
        Ok((lo, hi))
    }

    fn objective_at(&self, rho: S) -> Result<S> {
        let p = QueueParams::from_rho(rho, self.mu)?;
        self.objective.evaluate(&p, &self.model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Optimum<S> {
    pub rho: S,
    /// Objective value at `rho` (the VoIU itself when maximizing).
    pub value: S,
}

/// Tabulates `g` on [`GUARD_POINTS`] evenly spaced points of `[lo, hi]` and
/// returns the grid neighbours of the smallest value. More than one
/// interior local minimum is an error.
pub fn guarded_bracket<S, F>(g: F, lo: S, hi: S) -> Result<(S, S)>
where
    S: Scalar,
    F: Fn(S) -> Result<S>,
{
    let step = (hi - lo) / S::lit((GUARD_POINTS - 1) as f64);
    let xs: Vec<S> = (0..GUARD_POINTS)
        .map(|i| if i == GUARD_POINTS - 1 { hi } else { lo + step * S::lit(i as f64) })
        .collect();
    let ys = xs.iter().map(|&x| g(x)).collect::<Result<Vec<S>>>()?;
    if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
        return Err(Error::NonFiniteObjective { x: xs[i].as_f64() });
    }
    let minima: Vec<usize> = (1..GUARD_POINTS - 1)
        .filter(|&i| ys[i] < ys[i - 1] && ys[i] <= ys[i + 1])
        .collect();
    if minima.len() > 1 {
        return Err(Error::Multimodal {
            locations: minima.iter().map(|&i| xs[i].as_f64()).collect(),
        });
    }
    let best = (0..GUARD_POINTS)
        .min_by(|&i, &j| ys[i].partial_cmp(&ys[j]).expect("finite objective"))
        .expect("nonempty grid");
    Ok((xs[best.saturating_sub(1)], xs[(best + 1).min(GUARD_POINTS - 1)]))
}

/// Optimal utilization for `spec`.
///
/// The objective is first tabulated on a 50-point grid over the effective
/// bracket; more than one interior local minimum is an error. Brent's
/// method then refines between the grid neighbours of the best point.
pub fn optimal_rho<S: Scalar>(spec: &OptimizeSpec<S>) -> Result<Optimum<S>> {
    let (lo, hi) = spec.effective_bracket()?;
    let sign = if spec.objective.maximizes() { -S::one() } else { S::one() };
    let g = |rho: S| -> Result<S> {
        let v = spec.objective_at(rho)?;
        if v.is_finite() {
            Ok(sign * v)
        } else {
            Err(Error::NonFiniteObjective { x: rho.as_f64() })
        }
    };

    let (a, b) = guarded_bracket(&g, lo, hi)?;
    let (rho, gv) = minimize_scalar(g, a, b, spec.tol)?;
    Ok(Optimum { rho, value: sign * gv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(objective: Objective, family: CostFamily, alpha: f64) -> OptimizeSpec<f64> {
        OptimizeSpec::new(objective, CostModel::new(family, alpha).unwrap(), 1.0)
    }

    #[test]
    fn quadratic_and_kink() {
        let (x, fx) = minimize_scalar(|x: f64| Ok((x - 0.3).powi(2)), 0.0, 1.0, 1e-8).unwrap();
        assert!((x - 0.3).abs() < 1e-7 && fx < 1e-14);
        let (x, _) = minimize_scalar(|x: f64| Ok((x - 0.5).abs()), 0.0, 1.0, 1e-8).unwrap();
        assert!((x - 0.5).abs() < 1e-7);
        let (x, _) = minimize_scalar(|x: f64| Ok((x - 0.123).abs().sqrt()), 0.0, 1.0, 1e-8).unwrap();
        assert!((x - 0.123).abs() < 1e-7);
    }

    #[test]
    fn minimizer_at_bracket_edge() {
        let (x, _) = minimize_scalar(|x: f64| Ok(x), 0.2, 0.7, 1e-8).unwrap();
        assert!((x - 0.2).abs() < 1e-7);
    }

    #[test]
    fn non_finite_objective_reports_abscissa() {
        let r = minimize_scalar(|x: f64| Ok(if x > 0.3 { f64::NAN } else { x }), 0.0, 1.0, 1e-6);
        assert!(matches!(r, Err(Error::NonFiniteObjective { x }) if x > 0.3));
    }

    #[test]
    fn bad_arguments() {
        assert!(minimize_scalar(|x: f64| Ok(x), 1.0, 0.0, 1e-6).is_err());
        assert!(minimize_scalar(|x: f64| Ok(x), 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn linear_coud_optimum() {
        let o = optimal_rho(&spec(Objective::Coud, CostFamily::Linear, 1.0)).unwrap();
        assert!((o.rho - 0.53101).abs() < 1e-3, "{}", o.rho);
        let p = QueueParams::from_rho(o.rho, 1.0).unwrap();
        assert_eq!(o.value, analytics::coud_linear(&p, 1.0).unwrap());
    }

    #[test]
    fn linear_coud_argmin_alpha_invariant() {
        let r: Vec<f64> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&a| optimal_rho(&spec(Objective::Coud, CostFamily::Linear, a)).unwrap().rho)
            .collect();
        assert!((r[0] - r[1]).abs() < 1e-5 && (r[1] - r[2]).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn voiu_linear_optimum_ignores_alpha() {
        let a = optimal_rho(&spec(Objective::Voiu, CostFamily::Linear, 0.1)).unwrap();
        let b = optimal_rho(&spec(Objective::Voiu, CostFamily::Linear, 7.0)).unwrap();
        assert!((a.rho - 0.614369).abs() < 1e-3);
        assert_eq!(a, b);
    }

    #[test]
    fn local_optimality() {
        for (obj, fam, a) in [
            (Objective::Coud, CostFamily::Linear, 1.0),
            (Objective::Coud, CostFamily::Exponential, 0.1),
            (Objective::Coud, CostFamily::Logarithmic, 0.3),
            (Objective::Pcoud, CostFamily::Exponential, 0.1),
        ] {
            let s = spec(obj, fam, a);
            let o = optimal_rho(&s).unwrap();
            for x in [o.rho - 10.0 * s.tol, o.rho + 10.0 * s.tol] {
                assert!(o.value <= s.objective_at(x).unwrap(), "{obj} {fam}");
            }
        }
    }

    #[test]
    fn exp_bracket_shrinks_and_can_be_empty() {
        let s = spec(Objective::Coud, CostFamily::Exponential, 0.3);
        let (lo, hi) = s.effective_bracket().unwrap();
        assert!((lo - (0.3 + 1e-6)).abs() < 1e-12 && (hi - (0.7 - 1e-6)).abs() < 1e-12);
        assert!(matches!(
            optimal_rho(&spec(Objective::Coud, CostFamily::Exponential, 0.6)),
            Err(Error::Config(_))
        ));
        // VoIU exists everywhere, so its bracket is left alone
        let v = spec(Objective::Voiu, CostFamily::Exponential, 0.6);
        assert_eq!(v.effective_bracket().unwrap(), (0.01, 0.99));
    }

    #[test]
    fn multimodal_guard() {
        let two_basins = |x: f64| Ok((6.0 * std::f64::consts::PI * x).cos());
        match guarded_bracket(two_basins, 0.01, 0.99) {
            Err(Error::Multimodal { locations }) => assert_eq!(locations.len(), 3),
            other => panic!("expected multimodal error, got {other:?}"),
        }
        let (a, b) = guarded_bracket(|x: f64| Ok((x - 0.3).powi(2)), 0.01, 0.99).unwrap();
        assert!(a < 0.3 && 0.3 < b && b - a < 0.05);
    }

    #[test]
    fn objective_parsing() {
        assert_eq!("PCoUD".parse::<Objective>().unwrap(), Objective::Pcoud);
        assert!("aoi".parse::<Objective>().is_err());
    }
}
