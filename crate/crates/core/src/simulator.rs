//! Sample-path simulation of the M/M/1 FCFS update queue.
//!
//! A single FCFS server needs no event calendar: the waiting time of each
//! update follows from the previous system time by the Lindley recursion
//! `W_i = max(0, T_{i−1} − Y_i)`.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analytics::{validity, QueueParams};
use crate::cost_model::{CostFamily, CostModel};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::scalar::Scalar;

pub const MIN_UPDATES: usize = 1000;
pub const DEFAULT_WARMUP: usize = 10_000;
pub const DEFAULT_BATCHES: usize = 100;

/// One delivered update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateSample<S> {
    /// Interarrival time `Y_i`.
    pub y: S,
    /// Waiting time `W_i`.
    pub w: S,
    /// Service time `S_i`.
    pub s: S,
    /// System time `T_i = W_i + S_i`.
    pub t_sys: S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindleyState<S> {
    prev_t_sys: S,
}

impl<S: Scalar> LindleyState<S> {
    /// State after the first update reached an empty system and spent
    /// `first_service` in it.
    pub fn new(first_service: S) -> Self {
        Self {
            prev_t_sys: first_service,
        }
    }

    pub fn prev_system_time(&self) -> S {
        self.prev_t_sys
    }

    pub fn advance(&mut self, y: S, s: S) -> UpdateSample<S> {
        let w = (self.prev_t_sys - y).max(S::zero());
        let t_sys = w + s;
        self.prev_t_sys = t_sys;
        UpdateSample { y, w, s, t_sys }
    }
}

/// Draws `Y ~ Exp(λ)` then `S ~ Exp(μ)` from `stream` and advances `state`.
pub fn next_update<S: Scalar>(
    state: &mut LindleyState<S>,
    stream: &mut Stream,
    params: &QueueParams<S>,
) -> UpdateSample<S> {
    let y = S::lit(stream.exponential(params.lambda().as_f64()));
    let s = S::lit(stream.exponential(params.mu().as_f64()));
    state.advance(y, s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<S> {
    pub params: QueueParams<S>,
    pub models: Vec<CostModel<S>>,
    /// Updates counted after warmup.
    pub n_updates: usize,
    /// Leading updates discarded.
    pub warmup: usize,
    /// Batches for the batch-means confidence intervals.
    pub batches: usize,
    pub seed: u64,
}

impl<S: Scalar> SimConfig<S> {
    pub fn new(params: QueueParams<S>, models: Vec<CostModel<S>>, n_updates: usize, seed: u64) -> Self {
        Self {
            params,
            models,
            n_updates,
            warmup: DEFAULT_WARMUP,
            batches: DEFAULT_BATCHES,
            seed,
        }
    }

    pub fn with_warmup(mut self, warmup: usize) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_updates < MIN_UPDATES {
            return Err(Error::Config(format!(
                "n_updates must be at least {MIN_UPDATES}, got {}",
                self.n_updates
            )));
        }
        if self.batches < 2 || self.batches > self.n_updates {
            return Err(Error::Config(format!(
                "batches must be in [2, n_updates], got {}",
                self.batches
            )));
        }
        Ok(())
    }
}

/// Point estimate with its standard error and 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<S> {
    pub value: S,
    pub std_error: S,
    pub half_width: S,
}

impl<S: Scalar> Estimate<S> {
    /// Estimate `value` with the spread of the independent (or batch)
    /// estimates `parts`.
    fn from_parts(value: S, parts: &[S]) -> Self {
        let n = parts.len();
        let nf = S::lit(n as f64);
        let mean = parts.iter().fold(S::zero(), |a, &x| a + x) / nf;
        let ss = parts.iter().fold(S::zero(), |a, &x| a + (x - mean) * (x - mean));
        let std_error = (ss / (nf - S::one()) / nf).sqrt();
        Self {
            value,
            std_error,
            half_width: S::lit(t_quantile_975(n - 1)) * std_error,
        }
    }

    /// Whether `[value − half_width, value + half_width]` contains `x`.
    pub fn covers(&self, x: S) -> bool {
        (self.value - x).abs() <= self.half_width
    }
}

fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("degrees of freedom are positive")
        .inverse_cdf(0.975)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelEstimates<S> {
    pub model: CostModel<S>,
    /// Time-average CoUD, total area over the window duration.
    pub coud: Estimate<S>,
    /// Mean peak cost per update.
    pub pcoud: Estimate<S>,
    /// Time-average VoIU, summed per-update values over the window duration.
    pub voiu: Estimate<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary<S> {
    pub seed: u64,
    pub n_updates: usize,
    pub warmup: usize,
    /// Simulated time from the delivery preceding the first counted update
    /// to the delivery of the last one.
    pub elapsed: S,
    /// Counted updates per unit of simulated time.
    pub lambda_hat: S,
    pub models: Vec<ModelEstimates<S>>,
    pub mean_y: Estimate<S>,
    pub mean_t: Estimate<S>,
    pub cov_wy: Estimate<S>,
    pub cov_ty: Estimate<S>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct Sums<S> {
    count: usize,
    window: S,
    y: S,
    w: S,
    t: S,
    wy: S,
    ty: S,
    area: Vec<S>,
    peak: Vec<S>,
    value: Vec<S>,
}

impl<S: Scalar> Sums<S> {
    fn new(models: usize) -> Self {
        Self {
            count: 0,
            window: S::zero(),
            y: S::zero(),
            w: S::zero(),
            t: S::zero(),
            wy: S::zero(),
            ty: S::zero(),
            area: vec![S::zero(); models],
            peak: vec![S::zero(); models],
            value: vec![S::zero(); models],
        }
    }

    fn absorb(&mut self, other: &Sums<S>) {
        self.count += other.count;
        self.window = self.window + other.window;
        self.y = self.y + other.y;
        self.w = self.w + other.w;
        self.t = self.t + other.t;
        self.wy = self.wy + other.wy;
        self.ty = self.ty + other.ty;
        for j in 0..self.area.len() {
            self.area[j] = self.area[j] + other.area[j];
            self.peak[j] = self.peak[j] + other.peak[j];
            self.value[j] = self.value[j] + other.value[j];
        }
    }

    fn n(&self) -> S {
        S::lit(self.count as f64)
    }

    fn mean_y(&self) -> S {
        self.y / self.n()
    }

    fn mean_t(&self) -> S {
        self.t / self.n()
    }

    fn cov(&self, xy: S, x: S) -> S {
        let n = self.n();
        (xy - x * self.y / n) / (n - S::one())
    }

    fn cov_wy(&self) -> S {
        self.cov(self.wy, self.w)
    }

    fn cov_ty(&self) -> S {
        self.cov(self.ty, self.t)
    }
}

/// Simulates `warmup + n_updates` updates from an empty system and
/// estimates every model's averages over the counted updates.
pub fn simulate<S: Scalar>(config: &SimConfig<S>) -> Result<MetricsSummary<S>> {
    config.validate()?;
    let p = &config.params;
    let models = &config.models;
    let mut warnings = Vec::new();
    for m in models {
        if m.family() == CostFamily::Exponential && !validity(p, m).coud.is_valid() {
            warnings.push(format!(
                "exp alpha={}: outside the closed-form regime (alpha < lambda, alpha < mu - lambda); \
                 analytics unavailable, sample mean may diverge",
                m.alpha()
            ));
        }
    }

    let mut stream = Stream::new(config.seed);
    let mut state = LindleyState::new(S::lit(stream.exponential(p.mu().as_f64())));
    for _ in 0..config.warmup {
        next_update(&mut state, &mut stream, p);
    }

    let n = config.n_updates;
    let nb = config.batches;
    let mut batches: Vec<Sums<S>> = Vec::with_capacity(nb);
    let mut current = Sums::new(models.len());
    let mut current_batch = 0;
    for i in 0..n {
        let b = i * nb / n;
        if b != current_batch {
            batches.push(std::mem::replace(&mut current, Sums::new(models.len())));
            current_batch = b;
        }
        let prev_t = state.prev_system_time();
        let u = next_update(&mut state, &mut stream, p);
        current.count += 1;
        // time between the two deliveries
        current.window = current.window + u.y + u.t_sys - prev_t;
        current.y = current.y + u.y;
        current.w = current.w + u.w;
        current.t = current.t + u.t_sys;
        current.wy = current.wy + u.w * u.y;
        current.ty = current.ty + u.t_sys * u.y;
        for (j, m) in models.iter().enumerate() {
            let per_update = || -> Result<(S, S, S)> {
                Ok((
                    m.area_between_updates(u.y, u.t_sys)?,
                    m.peak(u.y, u.t_sys)?,
                    m.voiu(u.y, u.t_sys)?,
                ))
            };
            let (q, a, v) = per_update().map_err(|e| Error::Sample {
                index: config.warmup + 1 + i,
                alpha: m.alpha().as_f64(),
                y: u.y.as_f64(),
                t: u.t_sys.as_f64(),
                source: Box::new(e),
            })?;
            current.area[j] = current.area[j] + q;
            current.peak[j] = current.peak[j] + a;
            current.value[j] = current.value[j] + v;
        }
    }
    batches.push(current);

    let mut total = Sums::new(models.len());
    for b in &batches {
        total.absorb(b);
    }
    let parts = |f: &dyn Fn(&Sums<S>) -> S| -> Vec<S> { batches.iter().map(f).collect() };
    let model_estimates = models
        .iter()
        .enumerate()
        .map(|(j, m)| ModelEstimates {
            model: *m,
            coud: Estimate::from_parts(total.area[j] / total.window, &parts(&|b| b.area[j] / b.window)),
            pcoud: Estimate::from_parts(total.peak[j] / total.n(), &parts(&|b| b.peak[j] / b.n())),
            voiu: Estimate::from_parts(total.value[j] / total.window, &parts(&|b| b.value[j] / b.window)),
        })
        .collect();

    Ok(MetricsSummary {
        seed: config.seed,
        n_updates: n,
        warmup: config.warmup,
        elapsed: total.window,
        lambda_hat: total.n() / total.window,
        models: model_estimates,
        mean_y: Estimate::from_parts(total.mean_y(), &parts(&|b| b.mean_y())),
        mean_t: Estimate::from_parts(total.mean_t(), &parts(&|b| b.mean_t())),
        cov_wy: Estimate::from_parts(total.cov_wy(), &parts(&|b| b.cov_wy())),
        cov_ty: Estimate::from_parts(total.cov_ty(), &parts(&|b| b.cov_ty())),
        warnings,
    })
}

/// Replication means with their spread across replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledSummary<S> {
    pub replications: usize,
    pub models: Vec<ModelEstimates<S>>,
    pub mean_y: Estimate<S>,
    pub mean_t: Estimate<S>,
    pub cov_wy: Estimate<S>,
    pub cov_ty: Estimate<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replicated<S> {
    pub runs: Vec<MetricsSummary<S>>,
    pub pooled: PooledSummary<S>,
}

/// Runs `n_reps` independent simulations with seeds `seed, seed + 1, …`.
/// Runs may execute concurrently; results are kept in replication order.
pub fn replicate<S: Scalar>(config: &SimConfig<S>, n_reps: usize) -> Result<Replicated<S>> {
    if n_reps < 2 {
        return Err(Error::Config(format!("n_reps must be at least 2, got {n_reps}")));
    }
    config.validate()?;
    let results: Vec<Result<MetricsSummary<S>>> = (0..n_reps)
        .into_par_iter()
        .map(|i| simulate(&config.clone().with_seed(config.seed.wrapping_add(i as u64))))
        .collect();
    let mut runs = Vec::with_capacity(n_reps);
    for (index, r) in results.into_iter().enumerate() {
        runs.push(r.map_err(|e| Error::Replication {
            index,
            source: Box::new(e),
        })?);
    }
    let pooled = pool(&runs);
    Ok(Replicated { runs, pooled })
}

fn pool<S: Scalar>(runs: &[MetricsSummary<S>]) -> PooledSummary<S> {
    let pooled = |f: &dyn Fn(&MetricsSummary<S>) -> S| -> Estimate<S> {
        let xs: Vec<S> = runs.iter().map(f).collect();
        let mean = xs.iter().fold(S::zero(), |a, &x| a + x) / S::lit(xs.len() as f64);
        Estimate::from_parts(mean, &xs)
    };
    let models = runs[0]
        .models
        .iter()
        .enumerate()
        .map(|(j, m)| ModelEstimates {
            model: m.model,
            coud: pooled(&|r| r.models[j].coud.value),
            pcoud: pooled(&|r| r.models[j].pcoud.value),
            voiu: pooled(&|r| r.models[j].voiu.value),
        })
        .collect();
    PooledSummary {
        replications: runs.len(),
        models,
        mean_y: pooled(&|r| r.mean_y.value),
        mean_t: pooled(&|r| r.mean_t.value),
        cov_wy: pooled(&|r| r.cov_wy.value),
        cov_ty: pooled(&|r| r.cov_ty.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{coud_linear, pcoud_linear};

    fn params() -> QueueParams<f64> {
        QueueParams::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn lindley_examples() {
        let mut st = LindleyState::new(2.0);
        let u = st.advance(5.0, 1.0);
        assert_eq!((u.w, u.t_sys), (0.0, 1.0));
        let mut st = LindleyState::new(2.0);
        let u = st.advance(0.5, 1.0);
        assert_eq!((u.w, u.t_sys), (1.5, 2.5));
        assert_eq!(st.prev_system_time(), 2.5);
    }

    #[test]
    fn recursion_invariants_along_a_path() {
        let p = params();
        let mut stream = Stream::new(9);
        let mut st = LindleyState::new(stream.exponential(1.0));
        for _ in 0..10_000 {
            let prev = st.prev_system_time();
            let u = next_update(&mut st, &mut stream, &p);
            assert!(u.y > 0.0 && u.s > 0.0 && u.w >= 0.0);
            assert_eq!(u.t_sys, u.w + u.s);
            assert_eq!(u.w, (prev - u.y).max(0.0));
        }
    }

    #[test]
    fn config_validation() {
        let m = vec![CostModel::linear(1.0).unwrap()];
        assert!(simulate(&SimConfig::new(params(), m.clone(), 999, 1)).is_err());
        assert!(simulate(&SimConfig::new(params(), m.clone(), 1000, 1).with_batches(1)).is_err());
        assert!(replicate(&SimConfig::new(params(), m, 1000, 1), 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let models = vec![
            CostModel::linear(1.0).unwrap(),
            CostModel::exponential(0.1).unwrap(),
            CostModel::logarithmic(0.3).unwrap(),
        ];
        let cfg = SimConfig::new(params(), models, 20_000, 42).with_warmup(100);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate(&cfg.clone().with_seed(43)).unwrap());
        let r1 = replicate(&cfg, 4).unwrap();
        let r2 = replicate(&cfg, 4).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.runs[1], simulate(&cfg.clone().with_seed(43)).unwrap());
    }

    #[test]
    fn short_linear_run_is_close() {
        let cfg = SimConfig::new(params(), vec![CostModel::linear(1.0).unwrap()], 200_000, 5);
        let s = simulate(&cfg).unwrap();
        let c = &s.models[0];
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(c.coud.value, coud_linear(&params(), 1.0).unwrap()) < 0.05);
        assert!(rel(c.pcoud.value, pcoud_linear(&params(), 1.0).unwrap()) < 0.05);
        assert!(c.voiu.value >= 0.0 && c.voiu.value <= s.lambda_hat);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn exp_outside_regime_warns_or_fails_loudly() {
        let cfg = SimConfig::new(params(), vec![CostModel::exponential(0.8).unwrap()], 1000, 3);
        let s = simulate(&cfg).unwrap();
        assert_eq!(s.warnings.len(), 1);
        let cfg = SimConfig::new(params(), vec![CostModel::exponential(200.0).unwrap()], 1000, 3);
        match simulate(&cfg) {
            Err(Error::Sample { alpha, source, .. }) => {
                assert_eq!(alpha, 200.0);
                assert!(matches!(*source, Error::Overflow { .. }));
            }
            other => panic!("expected a sample error, got {other:?}"),
        }
    }

    #[test]
    fn replication_error_carries_index() {
        let cfg = SimConfig::new(params(), vec![CostModel::exponential(200.0).unwrap()], 1000, 3);
        assert!(matches!(replicate(&cfg, 3), Err(Error::Replication { index: 0, .. })));
    }

    #[test]
    fn single_precision_runs() {
        let p = QueueParams::<f32>::new(0.5, 1.0).unwrap();
        let cfg = SimConfig::new(p, vec![CostModel::linear(1.0f32).unwrap()], 50_000, 11);
        let s = simulate(&cfg).unwrap();
        assert!((s.models[0].coud.value - 3.5).abs() < 0.35);
    }
}
