use std::convert::Infallible;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerances for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec<S> {
    pub rel_tol: S,
    pub abs_tol: S,
    pub max_subdivisions: usize,
}

impl<S: Scalar> Default for QuadratureSpec<S> {
    fn default() -> Self {
        // 1e-10 is below f32 resolution; never ask for less than 50 ulps
        let floor = S::lit(50.0) * S::epsilon();
        Self {
            rel_tol: S::lit(1e-10).max(floor),
            abs_tol: S::lit(1e-12),
            max_subdivisions: 2000,
        }
    }
}

impl<S: Scalar> QuadratureSpec<S> {
    pub fn new(rel_tol: S, abs_tol: S, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_rel_tol(mut self, rel_tol: S) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > S::zero() && self.abs_tol > S::zero()) {
            return Err(Error::Config("quadrature tolerances must be > 0".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Config("max_subdivisions must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<S> {
    pub value: S,
    pub abs_error: S,
    pub subdivisions: usize,
    pub evaluations: usize,
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_292_644_630,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct Panel<S> {
    a: S,
    b: S,
    value: S,
    error: S,
}

fn eval<S: Scalar, E, F>(f: &mut F, x: S) -> Result<S, Either<E>>
where
    F: FnMut(S) -> Result<S, E>,
{
    let v = f(x).map_err(Either::Inner)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Either::Outer(Error::NonFiniteIntegrand { t: x.as_f64() }))
    }
}

enum Either<E> {
    Inner(E),
    Outer(Error),
}

/// One 21-point Gauss–Kronrod panel with QUADPACK's error heuristic.
fn kronrod21<S: Scalar, E, F>(f: &mut F, a: S, b: S) -> Result<Panel<S>, Either<E>>
where
    F: FnMut(S) -> Result<S, E>,
{
    let half = S::lit(0.5);
    let centre = half * (a + b);
    let half_len = half * (b - a);
    let fc = eval(f, centre)?;
    let mut res_g = S::zero();
    let mut res_k = S::lit(WGK[10]) * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [S::zero(); 10];
    let mut fv2 = [S::zero(); 10];
    for j in 0..10 {
        let dx = half_len * S::lit(XGK[j]);
        let f1 = eval(f, centre - dx)?;
        let f2 = eval(f, centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let w = S::lit(WGK[j]);
        res_k = res_k + w * (f1 + f2);
        res_abs = res_abs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + S::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = res_k * half;
    let mut res_asc = S::lit(WGK[10]) * (fc - mean).abs();
    for j in 0..10 {
        res_asc = res_asc + S::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half_len.abs();
    let value = res_k * half_len;
    res_abs = res_abs * scale;
    res_asc = res_asc * scale;
    let mut error = ((res_k - res_g) * half_len).abs();
    if res_asc != S::zero() && error != S::zero() {
        let ratio = (S::lit(200.0) * error / res_asc).powf(S::lit(1.5));
        error = res_asc * ratio.min(S::one());
    }
    let fifty_eps = S::lit(50.0) * S::epsilon();
    if res_abs > S::min_positive_value() / fifty_eps {
        error = error.max(fifty_eps * res_abs);
    }
    Ok(Panel { a, b, value, error })
}

/// Globally adaptive bisection driven by the largest panel error.
fn adaptive<S: Scalar, E, F>(
    mut f: F,
    a: S,
    b: S,
    spec: &QuadratureSpec<S>,
) -> Result<Integral<S>, Either<E>>
where
    F: FnMut(S) -> Result<S, E>,
{
    spec.validate().map_err(Either::Outer)?;
    let mut panels = vec![kronrod21(&mut f, a, b)?];
    let mut evaluations = 21;
    loop {
        let value = panels.iter().fold(S::zero(), |acc, p| acc + p.value);
        let error = panels.iter().fold(S::zero(), |acc, p| acc + p.error);
        let target = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= target {
            return Ok(Integral {
                value,
                abs_error: error,
                subdivisions: panels.len(),
                evaluations,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let p = &panels[worst];
        let mid = S::lit(0.5) * (p.a + p.b);
        let too_narrow = (p.b - p.a).abs() <= S::lit(100.0) * S::epsilon() * mid.abs().max(S::min_positive_value());
        if panels.len() >= spec.max_subdivisions || too_narrow {
            return Err(Either::Outer(Error::Convergence {
                estimate: value.as_f64(),
                error: error.as_f64(),
                subdivisions: panels.len(),
            }));
        }
        let (pa, pb) = (p.a, p.b);
        let left = kronrod21(&mut f, pa, mid)?;
        let right = kronrod21(&mut f, mid, pb)?;
        evaluations += 42;
        panels[worst] = left;
        panels.push(right);
    }
}

/// Integral over `[a, b]` of an integrand that may fail.
pub fn try_integrate<S, F>(f: F, a: S, b: S, spec: &QuadratureSpec<S>) -> Result<Integral<S>>
where
    S: Scalar,
    F: FnMut(S) -> Result<S>,
{
    adaptive(f, a, b, spec).map_err(|e| match e {
        Either::Inner(e) | Either::Outer(e) => e,
    })
}

/// Integral over `[a, b]`.
pub fn integrate<S, F>(mut f: F, a: S, b: S, spec: &QuadratureSpec<S>) -> Result<Integral<S>>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    adaptive(|x| Ok::<S, Infallible>(f(x)), a, b, spec).map_err(|e| match e {
        Either::Inner(never) => match never {},
        Either::Outer(e) => e,
    })
}

/// Integral over `[0, ∞)` of an integrand that may fail, after mapping
/// `t = scale·(1 − u)/u` onto `u ∈ (0, 1]`. `scale` should be the length
/// scale on which the integrand decays.
pub fn try_integrate_semi_infinite<S, F>(
    mut f: F,
    scale: S,
    spec: &QuadratureSpec<S>,
) -> Result<Integral<S>>
where
    S: Scalar,
    F: FnMut(S) -> Result<S>,
{
    if !(scale.is_finite() && scale > S::zero()) {
        return Err(Error::Config("integration scale must be finite and > 0".into()));
    }
    let mapped = move |u: S| -> Result<S> {
        let t = scale * (S::one() - u) / u;
        let v = f(t)?;
        if v == S::zero() {
            return Ok(v);
        }
        Ok(v * scale / (u * u))
    };
    try_integrate(mapped, S::zero(), S::one(), spec)
}

/// `∫_0^∞ f(t) dt` with the integrand's decay length given by `scale`.
pub fn integrate_semi_infinite_scaled<S, F>(
    mut f: F,
    scale: S,
    spec: &QuadratureSpec<S>,
) -> Result<Integral<S>>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    try_integrate_semi_infinite(|t| Ok(f(t)), scale, spec)
}

/// `∫_0^∞ f(t) dt`.
pub fn integrate_semi_infinite<S, F>(f: F, spec: &QuadratureSpec<S>) -> Result<Integral<S>>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    integrate_semi_infinite_scaled(f, S::one(), spec)
}
