//! Closed-form averages for the M/M/1 FCFS status-update queue.
//!
//! Every average has a second route through [`coud_by_density`],
//! [`pcoud_by_density`] or [`voiu_by_quadrature`] that integrates the cost
//! function against a stationary density instead of using the closed form.
//!
//! The logarithmic forms are written in terms of `g(x) = e^x E1(x)`, which
//! equals `−e^x Ei(−x)` but never overflows.

use serde::{Deserialize, Serialize};

use crate::cost_model::{CostFamily, CostModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{e1_scaled, hyp2f1_1_2_3, try_integrate_semi_infinite, QuadratureSpec};

/// Relative distance to `α = λ` or `α = μ − λ` (in units of `μ`) inside which
/// the exponential closed forms are refused.
pub const EXP_REGIME_MARGIN: f64 = 1e-9;

/// Relative distance to `λ = μ/2` (in units of `μ`) inside which the
/// logarithmic bound uses its limit expression.
pub const LOG_BOUND_POLE_BAND: f64 = 1e-6;

/// Relative headroom `(μ − λ)/μ` below which the stationary densities are
/// too ill-conditioned to evaluate.
pub const DENSITY_CONDITIONING: f64 = 1e-9;

/// Arrival rate `λ` and service rate `μ` of a stable M/M/1 queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams<S> {
    lambda: S,
    mu: S,
}

impl<S: Scalar> QueueParams<S> {
    pub fn new(lambda: S, mu: S) -> Result<Self> {
        positive("lambda", lambda)?;
        positive("mu", mu)?;
        if !(lambda < mu) {
            return Err(Error::Unstable {
                rho: (lambda / mu).as_f64(),
            });
        }
        Ok(Self { lambda, mu })
    }

    /// Parameters with `λ = ρμ`.
    pub fn from_rho(rho: S, mu: S) -> Result<Self> {
        positive("rho", rho)?;
        positive("mu", mu)?;
        if !(rho < S::one()) {
            return Err(Error::Unstable { rho: rho.as_f64() });
        }
        Self::new(rho * mu, mu)
    }

    pub fn lambda(&self) -> S {
        self.lambda
    }

    pub fn mu(&self) -> S {
        self.mu
    }

    pub fn rho(&self) -> S {
        self.lambda / self.mu
    }

    /// `μ − λ`, the rate of the stationary system time.
    pub fn headroom(&self) -> S {
        self.mu - self.lambda
    }
}

fn positive<S: Scalar>(what: &'static str, x: S) -> Result<()> {
    if x.is_finite() && x > S::zero() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            requirement: "finite and > 0",
            value: x.as_f64(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    RegimeViolation,
}

impl Validity {
    pub fn is_valid(self) -> bool {
        self == Validity::Valid
    }
}

/// Which of the reported averages exist for a `(params, model)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityFlags {
    pub coud: Validity,
    pub pcoud: Validity,
    pub voiu: Validity,
    pub coud_upper_bound: Validity,
}

impl ValidityFlags {
    pub fn all_valid(&self) -> bool {
        self.coud.is_valid()
            && self.pcoud.is_valid()
            && self.voiu.is_valid()
            && self.coud_upper_bound.is_valid()
    }
}

/// Linear and logarithmic averages exist whenever the queue is stable. The
/// exponential CoUD, PCoUD and bound need `α < λ` and `α < μ − λ`; VoIU is
/// bounded and always exists.
pub fn validity<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> ValidityFlags {
    let moments = match model.family() {
        CostFamily::Exponential if exp_regime(p, model.alpha()).is_err() => Validity::RegimeViolation,
        _ => Validity::Valid,
    };
    ValidityFlags {
        coud: moments,
        pcoud: moments,
        voiu: Validity::Valid,
        coud_upper_bound: moments,
    }
}

fn exp_regime<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<()> {
    positive("alpha", alpha)?;
    let margin = S::lit(EXP_REGIME_MARGIN) * p.mu;
    if alpha < p.lambda - margin && alpha < p.headroom() - margin {
        Ok(())
    } else {
        Err(Error::Regime(format!(
            "exponential cost needs alpha < lambda and alpha < mu - lambda \
             (alpha = {}, lambda = {}, mu - lambda = {})",
            alpha,
            p.lambda,
            p.headroom()
        )))
    }
}

/// Average CoUD for `f_s(t) = αt`; at `α = 1` this is the M/M/1 average AoI.
pub fn coud_linear<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    positive("alpha", alpha)?;
    let rho = p.rho();
    Ok(alpha / p.mu * (S::one() + S::one() / rho + rho * rho / (S::one() - rho)))
}

/// Average PCoUD for `f_s(t) = αt`; at `α = 1` the average peak AoI.
pub fn pcoud_linear<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    positive("alpha", alpha)?;
    Ok(alpha * (S::one() / p.lambda + S::one() / p.headroom()))
}

/// Upper bound on the linear CoUD, `E[α(Ȳ + T)]` with `Ȳ` independent of `T`.
/// It coincides with the linear PCoUD.
pub fn coud_linear_bound<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    pcoud_linear(p, alpha)
}

/// Average CoUD for `f_s(t) = e^{αt} − 1`.
pub fn coud_exp<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    exp_regime(p, alpha)?;
    let (l, m, a, k) = (p.lambda, p.mu, alpha, p.headroom());
    // the last two terms 1/(α − k) + 1/k are combined to keep the α → 0 limit
    let first = (a - (l + m)) / ((l - a) * (a - m) * (a - m));
    let rest = S::one() / (k * (a - k));
    Ok(m * (p.rho() - S::one()) * a * (first + rest))
}

/// Average PCoUD for `f_s(t) = e^{αt} − 1`.
pub fn pcoud_exp<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    exp_regime(p, alpha)?;
    let (l, m, a) = (p.lambda, p.mu, alpha);
    let three = S::lit(3.0);
    let num = three * a * a * m - a * a * a + a * (l * l - l * m - three * m * m) + m * m * m;
    Ok(a * num / ((l - a) * (a - m) * (a - m) * (m - l - a)))
}

/// Upper bound on the exponential CoUD, written as the product of the
/// moment generating functions of `Ȳ` and `T`, minus one.
pub fn coud_exp_bound<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    exp_regime(p, alpha)?;
    let (l, a, k) = (p.lambda, alpha, p.headroom());
    Ok(l / a * (k / (a - k) * (l / (a - l) + S::one())) - S::one())
}

/// `E[e^{α(Ȳ + T)} − 1] = α(μ − α)/((α − λ)(α + λ − μ))`.
pub fn indep_sum_exp_moment<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    exp_regime(p, alpha)?;
    let (l, m, a) = (p.lambda, p.mu, alpha);
    Ok(a * (m - a) / ((a - l) * (a + l - m)))
}

/// Average CoUD for `f_s(t) = ln(αt + 1)`.
pub fn coud_log<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    positive("alpha", alpha)?;
    let (l, m, a, k) = (p.lambda, p.mu, alpha, p.headroom());
    let gm = e1_scaled(m / a)?;
    let gl = e1_scaled(l / a)?;
    let gk = e1_scaled(k / a)?;
    let num = -(a * m + l * l - l * m) * gm + a * m * gl + a * k * gk - a * l * k / m;
    Ok(num / (a * k))
}

/// Average PCoUD for `f_s(t) = ln(αt + 1)`.
pub fn pcoud_log<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    positive("alpha", alpha)?;
    let (l, m, a, k) = (p.lambda, p.mu, alpha, p.headroom());
    let gm = e1_scaled(m / a)?;
    let gl = e1_scaled(l / a)?;
    let gk = e1_scaled(k / a)?;
    let num = a * k * (l - m * gk) + (a * (l * l - l * m + m * m) + l * m * (l - m)) * gm - a * l * m * gl;
    Ok(num / (a * l * (l - m)))
}

/// Upper bound on the logarithmic CoUD, `E[ln(α(Ȳ + T) + 1)]`.
///
/// The expression has a removable singularity at `λ = μ/2` and is even in
/// `2λ − μ`, so inside a band of width `1e-6·μ` the limit is returned.
pub fn coud_log_bound<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    positive("alpha", alpha)?;
    let (l, m, a, k) = (p.lambda, p.mu, alpha, p.headroom());
    let gap = m - S::lit(2.0) * l;
    if gap.abs() < S::lit(LOG_BOUND_POLE_BAND) * m {
        return log_bound_limit(m, a);
    }
    Ok((k * e1_scaled(l / a)? - l * e1_scaled(k / a)?) / gap)
}

/// `1 + (1 − x) g(x)` with `x = μ/(2α)`: the logarithmic bound at `λ = μ/2`.
pub fn log_bound_limit<S: Scalar>(mu: S, alpha: S) -> Result<S> {
    positive("mu", mu)?;
    positive("alpha", alpha)?;
    let x = mu / (S::lit(2.0) * alpha);
    Ok(S::one() + (S::one() - x) * e1_scaled(x)?)
}

/// Average VoIU for `f_s(t) = αt`, `λ(1 − ρ)/(2ρ) · ₂F₁(1, 2; 3; 2 − 1/ρ)`.
/// Like the other VoIU averages it treats the interarrival time and the
/// system time of an update as independent.
pub fn voiu_linear<S: Scalar>(p: &QueueParams<S>) -> Result<S> {
    let rho = p.rho();
    let two = S::lit(2.0);
    Ok(p.lambda * (S::one() - rho) / (two * rho) * hyp2f1_1_2_3(two - S::one() / rho)?)
}

/// Average VoIU for `f_s(t) = e^{αt} − 1`.
pub fn voiu_exp<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    voiu_by_quadrature(p, &CostModel::exponential(alpha)?)
}

/// Average VoIU for `f_s(t) = ln(αt + 1)`.
pub fn voiu_log<S: Scalar>(p: &QueueParams<S>, alpha: S) -> Result<S> {
    voiu_by_quadrature(p, &CostModel::logarithmic(alpha)?)
}

/// `λ E[V(Y, T)]` with `Y ~ Exp(λ)` and `T ~ Exp(μ − λ)` independent, by
/// nested quadrature (inner over `T`, outer over `Y`).
pub fn voiu_by_quadrature<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
    let (l, k) = (p.lambda, p.headroom());
    let inner_spec = QuadratureSpec::default().with_rel_tol(tol(1e-10));
    let outer_spec = QuadratureSpec::default().with_rel_tol(tol(1e-8));
    let outer = try_integrate_semi_infinite(
        |y| {
            let fy = l * (-l * y).exp();
            if y == S::zero() || fy == S::zero() {
                return Ok(S::zero());
            }
            let inner = try_integrate_semi_infinite(
                |t| {
                    let ft = k * (-k * t).exp();
                    if ft == S::zero() {
                        return Ok(S::zero());
                    }
                    Ok(ft * model.voiu(y, t)?)
                },
                S::one() / k,
                &inner_spec,
            )?;
            Ok(fy * inner.value)
        },
        S::one() / l,
        &outer_spec,
    )?;
    Ok(l * outer.value)
}

fn tol<S: Scalar>(rel: f64) -> S {
    S::lit(rel).max(S::lit(1000.0) * S::epsilon())
}

/// `Cov[W, Y] = −1/μ²` between the waiting time of an update and its
/// interarrival time. The same value holds for `Cov[T, Y]`.
pub fn cov_wy<S: Scalar>(p: &QueueParams<S>) -> S {
    -S::one() / (p.mu * p.mu)
}

fn check_density_args<S: Scalar>(p: &QueueParams<S>, t: S) -> Result<()> {
    if !(t.is_finite() && t >= S::zero()) {
        return Err(Error::Domain {
            what: "t",
            requirement: "finite and >= 0",
            value: t.as_f64(),
        });
    }
    if p.headroom() < S::lit(DENSITY_CONDITIONING) * p.mu {
        return Err(Error::Conditioning(format!(
            "mu - lambda = {} is too small relative to mu = {}",
            p.headroom(),
            p.mu
        )));
    }
    Ok(())
}

/// Density of `(Y, T)` mapped to `t`: the weight with which the CoUD average
/// sees elapsed time `t`, so that `C = ∫ f_s(t) C(t) dt`.
pub fn coud_density<S: Scalar>(p: &QueueParams<S>, t: S) -> Result<S> {
    check_density_args(p, t)?;
    let (l, m, k) = (p.lambda, p.mu, p.headroom());
    let em = (-m * t).exp();
    let v = (l * l / (l - m) - m) * em + l * m / k * (-l * t).exp() - l * m * t * em + k * (-k * t).exp();
    Ok(v.max(S::zero()))
}

/// Density of the peak age `Y + T`, so that `A = ∫ f_s(t) A(t) dt`.
pub fn pcoud_density<S: Scalar>(p: &QueueParams<S>, t: S) -> Result<S> {
    check_density_args(p, t)?;
    let (l, m, k) = (p.lambda, p.mu, p.headroom());
    let two = S::lit(2.0);
    let em = (-m * t).exp();
    let v = m * (two * l * l - two * l * m + m * m) / (l * (l - m)) * em + m * k / l * (-k * t).exp()
        + l * m / k * (-l * t).exp()
        - m * m * t * em;
    Ok(v.max(S::zero()))
}

/// Density of `Ȳ + T` for independent `Ȳ ~ Exp(λ)` and `T ~ Exp(μ − λ)`
/// (hypoexponential; Erlang-2 at `λ = μ/2`).
pub fn indep_sum_density<S: Scalar>(p: &QueueParams<S>, t: S) -> Result<S> {
    if !(t.is_finite() && t >= S::zero()) {
        return Err(Error::Domain {
            what: "t",
            requirement: "finite and >= 0",
            value: t.as_f64(),
        });
    }
    let (l, k) = (p.lambda, p.headroom());
    let (slow, fast) = if l < k { (l, k) } else { (k, l) };
    let d = fast - slow;
    // (e^{−slow·t} − e^{−fast·t})/d, tending to t·e^{−slow·t} as d → 0
    let shape = if d == S::zero() {
        t
    } else {
        -(-d * t).exp_m1() / d
    };
    Ok(l * k * (-slow * t).exp() * shape)
}

fn decay_rate<S: Scalar>(p: &QueueParams<S>) -> S {
    p.lambda.min(p.headroom())
}

fn expectation<S, D>(p: &QueueParams<S>, model: &CostModel<S>, density: D) -> Result<S>
where
    S: Scalar,
    D: Fn(&QueueParams<S>, S) -> Result<S>,
{
    let mut rate = decay_rate(p);
    if model.family() == CostFamily::Exponential {
        exp_regime(p, model.alpha())?;
        rate = rate - model.alpha();
    }
    let spec = QuadratureSpec::default().with_rel_tol(tol(1e-11));
    let integral = try_integrate_semi_infinite(
        |t| {
            let d = density(p, t)?;
            if d == S::zero() {
                return Ok(S::zero());
            }
            Ok(model.eval(t)? * d)
        },
        S::one() / rate,
        &spec,
    )?;
    Ok(integral.value)
}

/// `∫ f_s(t) C(t) dt`, the average CoUD by quadrature.
pub fn coud_by_density<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
    expectation(p, model, coud_density)
}

/// `∫ f_s(t) A(t) dt`, the average PCoUD by quadrature.
pub fn pcoud_by_density<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
    expectation(p, model, pcoud_density)
}

/// `E[f_s(Ȳ + T)]` by quadrature against [`indep_sum_density`].
pub fn indep_sum_expectation<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
    expectation(p, model, indep_sum_density)
}

/// Average CoUD for any family.
pub fn coud<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
    let a = model.alpha();
    match model.family() {
        CostFamily::Linear => coud_linear(p, a),
        CostFamily::Exponential => coud_exp(p, a),
        CostFamily::Logarithmic => coud_log(p, a),
    }
}

/// Average PCoUD for any family.
pub fn pcoud<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
    let a = model.alpha();
    match model.family() {
        CostFamily::Linear => pcoud_linear(p, a),
        CostFamily::Exponential => pcoud_exp(p, a),
        CostFamily::Logarithmic => pcoud_log(p, a),
    }
}

/// Average VoIU for any family.
pub fn voiu<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
    let a = model.alpha();
    match model.family() {
        CostFamily::Linear => voiu_linear(p),
        CostFamily::Exponential => voiu_exp(p, a),
        CostFamily::Logarithmic => voiu_log(p, a),
    }
}

/// Upper bound on the average CoUD for any family.
pub fn coud_bound<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<S> {
    let a = model.alpha();
    match model.family() {
        CostFamily::Linear => coud_linear_bound(p, a),
        CostFamily::Exponential => coud_exp_bound(p, a),
        CostFamily::Logarithmic => coud_log_bound(p, a),
    }
}

/// All averages for one `(params, model)` pair. Entries outside the
/// parameter regime are `None` and flagged in `validity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticReport<S> {
    pub params: QueueParams<S>,
    pub model: CostModel<S>,
    pub coud: Option<S>,
    pub pcoud: Option<S>,
    pub voiu: Option<S>,
    pub coud_upper_bound: Option<S>,
    pub validity: ValidityFlags,
}

pub fn report<S: Scalar>(p: &QueueParams<S>, model: &CostModel<S>) -> Result<AnalyticReport<S>> {
    let validity = validity(p, model);
    let when = |v: Validity, f: &dyn Fn() -> Result<S>| -> Result<Option<S>> {
        if v.is_valid() {
            f().map(Some)
        } else {
            Ok(None)
        }
    };
    Ok(AnalyticReport {
        params: *p,
        model: *model,
        coud: when(validity.coud, &|| coud(p, model))?,
        pcoud: when(validity.pcoud, &|| pcoud(p, model))?,
        voiu: when(validity.voiu, &|| voiu(p, model))?,
        coud_upper_bound: when(validity.coud_upper_bound, &|| coud_bound(p, model))?,
        validity,
    })
}
