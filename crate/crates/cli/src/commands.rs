use std::fmt;
use std::io::Write;
use std::str::FromStr;

use coud_core::analytics::{self, coud_density, indep_sum_density, pcoud_density, report, validity, QueueParams};
use coud_core::optimizer::{optimal_rho, Objective, OptimizeSpec};
use coud_core::simulator::{
    replicate, simulate as run_simulation, Estimate, ModelEstimates, SimConfig, DEFAULT_BATCHES, DEFAULT_WARMUP,
};
use coud_core::special::{try_integrate_semi_infinite, QuadratureSpec};
use coud_core::{CostFamily, CostModel};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::output::{fmt_num, sort_rows, write_records, write_rows, Format, Row, Source};
use crate::{
    AnalyticArgs, CliError, ModelArgs, OptimizeArgs, QueueArgs, SimArgs, SimulateArgs, Status, SweepArgs,
    ValidateArgs,
};

const DEFAULT_ALPHA: f64 = 0.1;
const DEFAULT_N: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Coud,
    Pcoud,
    Voiu,
    Bounds,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Coud, Metric::Pcoud, Metric::Voiu, Metric::Bounds];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Coud => "coud",
            Metric::Pcoud => "pcoud",
            Metric::Voiu => "voiu",
            Metric::Bounds => "bounds",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coud" => Ok(Metric::Coud),
            "pcoud" => Ok(Metric::Pcoud),
            "voiu" => Ok(Metric::Voiu),
            "bounds" | "bound" => Ok(Metric::Bounds),
            other => Err(format!("unknown metric {other:?} (expected coud, pcoud, voiu or bounds)")),
        }
    }
}

fn queue(args: &QueueArgs, config: &Config) -> Result<QueueParams<f64>, CliError> {
    let mu = config.pick(args.mu, "mu", 1.0)?;
    // a flag beats either key in the file
    let (lambda, rho) = match (args.lambda, args.rho) {
        (Some(l), _) => (Some(l), None),
        (None, Some(r)) => (None, Some(r)),
        (None, None) => (config.get("lambda")?, config.get("rho")?),
    };
    match (lambda, rho) {
        (Some(l), None) => Ok(QueueParams::new(l, mu)?),
        (None, Some(r)) => Ok(QueueParams::from_rho(r, mu)?),
        (Some(_), Some(_)) => Err(CliError::Usage("give only one of lambda and rho".into())),
        (None, None) => Err(CliError::Usage("one of --lambda or --rho is required".into())),
    }
}

fn models(args: &ModelArgs, config: &Config) -> Result<Vec<CostModel<f64>>, CliError> {
    let families = config.pick_list(args.family.clone(), "family", CostFamily::ALL.to_vec())?;
    let alphas = config.pick_list(args.alpha.clone(), "alpha", vec![DEFAULT_ALPHA])?;
    let mut out = Vec::new();
    for f in &families {
        for &a in &alphas {
            out.push(CostModel::new(*f, a)?);
        }
    }
    Ok(out)
}

fn format(f: Option<Format>, config: &Config) -> Result<Format, CliError> {
    config.pick(f, "format", Format::Csv)
}

struct SimSettings {
    n: usize,
    warmup: usize,
    batches: usize,
    reps: usize,
    seed: u64,
}

fn sim_settings(args: &SimArgs, config: &Config) -> Result<SimSettings, CliError> {
    let seed = config
        .pick_opt(args.seed, "seed")?
        .ok_or_else(|| CliError::Usage("--seed is required so that runs are reproducible".into()))?;
    let reps = config.pick(args.reps, "reps", 1)?;
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    Ok(SimSettings {
        n: config.pick(args.n, "n", DEFAULT_N)?,
        warmup: config.pick(args.warmup, "warmup", DEFAULT_WARMUP)?,
        batches: config.pick(args.batches, "batches", DEFAULT_BATCHES)?,
        reps,
        seed,
    })
}

/// Simulated model estimates plus the shared queue statistics, pooled over
/// replications when there are several.
struct SimOutcome {
    models: Vec<ModelEstimates<f64>>,
    mean_y: Estimate<f64>,
    mean_t: Estimate<f64>,
    cov_wy: Estimate<f64>,
    cov_ty: Estimate<f64>,
}

fn run_sim(p: QueueParams<f64>, models: Vec<CostModel<f64>>, s: &SimSettings) -> Result<SimOutcome, CliError> {
    let cfg = SimConfig::new(p, models, s.n, s.seed)
        .with_warmup(s.warmup)
        .with_batches(s.batches);
    if s.reps == 1 {
        let r = run_simulation(&cfg)?;
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
        Ok(SimOutcome {
            models: r.models,
            mean_y: r.mean_y,
            mean_t: r.mean_t,
            cov_wy: r.cov_wy,
            cov_ty: r.cov_ty,
        })
    } else {
        let r = replicate(&cfg, s.reps)?;
        for w in &r.runs[0].warnings {
            eprintln!("warning: {w}");
        }
        let pooled = r.pooled;
        Ok(SimOutcome {
            models: pooled.models,
            mean_y: pooled.mean_y,
            mean_t: pooled.mean_t,
            cov_wy: pooled.cov_wy,
            cov_ty: pooled.cov_ty,
        })
    }
}

fn base_row(p: &QueueParams<f64>, model: Option<&CostModel<f64>>, metric: &str, source: Source) -> Row {
    Row {
        rho: p.rho(),
        lambda: p.lambda(),
        mu: p.mu(),
        alpha: model.map(|m| m.alpha()),
        family: model.map(|m| m.family()),
        metric: metric.to_string(),
        source,
        value: None,
        seed: None,
        n_updates: None,
    }
}

/// Closed-form rows for one model; `None` values mark regime violations.
fn analytic_rows(p: &QueueParams<f64>, m: &CostModel<f64>, metrics: &[Metric]) -> Result<Vec<Row>, CliError> {
    let r = report(p, m)?;
    let mut rows = Vec::new();
    for metric in metrics {
        let (name, source, value) = match metric {
            Metric::Coud => ("coud", Source::Analytic, r.coud),
            Metric::Pcoud => ("pcoud", Source::Analytic, r.pcoud),
            Metric::Voiu => ("voiu", Source::Analytic, r.voiu),
            Metric::Bounds => ("coud", Source::Bound, r.coud_upper_bound),
        };
        rows.push(Row {
            value,
            ..base_row(p, Some(m), name, source)
        });
    }
    Ok(rows)
}

fn note_invalid(rows: &[Row]) {
    let invalid = rows.iter().filter(|r| r.value.is_none()).count();
    if invalid > 0 {
        eprintln!(
            "note: {invalid} row(s) left empty: exponential cost needs alpha < lambda and alpha < mu - lambda"
        );
    }
}

pub fn analytic(args: &AnalyticArgs, config: &Config, out: &mut dyn Write) -> Result<Status, CliError> {
    let p = queue(&args.queue, config)?;
    let models = models(&args.models, config)?;
    let fmt = format(args.output.format, config)?;
    let mut rows = Vec::new();
    for m in &models {
        rows.extend(analytic_rows(&p, m, &Metric::ALL)?);
    }
    sort_rows(&mut rows);
    note_invalid(&rows);
    write_rows(out, &rows, fmt)?;
    Ok(Status::Success)
}

fn sim_rows(p: &QueueParams<f64>, sim: &SimOutcome, s: &SimSettings, metrics: &[Metric], shared: bool) -> Vec<Row> {
    let stamp = |mut r: Row, value: f64| {
        r.value = Some(value);
        r.seed = Some(s.seed);
        r.n_updates = Some(s.n);
        r
    };
    let mut rows = Vec::new();
    for est in &sim.models {
        let m = Some(&est.model);
        for metric in metrics {
            let (name, e) = match metric {
                Metric::Coud => ("coud", est.coud),
                Metric::Pcoud => ("pcoud", est.pcoud),
                Metric::Voiu => ("voiu", est.voiu),
                Metric::Bounds => continue,
            };
            rows.push(stamp(base_row(p, m, name, Source::Sim), e.value));
            rows.push(stamp(base_row(p, m, &format!("{name}_half_width"), Source::Sim), e.half_width));
        }
    }
    if shared {
        let refs = [
            ("mean_y", sim.mean_y, 1.0 / p.lambda()),
            ("mean_t", sim.mean_t, 1.0 / p.headroom()),
            ("cov_wy", sim.cov_wy, analytics::cov_wy(p)),
            ("cov_ty", sim.cov_ty, analytics::cov_wy(p)),
        ];
        for (name, e, reference) in refs {
            rows.push(stamp(base_row(p, None, name, Source::Sim), e.value));
            rows.push(stamp(base_row(p, None, &format!("{name}_half_width"), Source::Sim), e.half_width));
            rows.push(Row {
                value: Some(reference),
                ..base_row(p, None, name, Source::Analytic)
            });
        }
    }
    rows
}

pub fn simulate(args: &SimulateArgs, config: &Config, out: &mut dyn Write) -> Result<Status, CliError> {
    let p = queue(&args.queue, config)?;
    let models = models(&args.models, config)?;
    let s = sim_settings(&args.sim, config)?;
    let fmt = format(args.output.format, config)?;
    let sim = run_sim(p, models.clone(), &s)?;
    let metrics = [Metric::Coud, Metric::Pcoud, Metric::Voiu];
    let mut rows = sim_rows(&p, &sim, &s, &metrics, true);
    for m in &models {
        rows.extend(
            analytic_rows(&p, m, &metrics)?
                .into_iter()
                .filter(|r| r.value.is_some()),
        );
    }
    sort_rows(&mut rows);
    write_rows(out, &rows, fmt)?;
    Ok(Status::Success)
}

fn rho_grid(args: &SweepArgs, config: &Config) -> Result<Vec<f64>, CliError> {
    let explicit = config.pick_list(args.rho.clone(), "rho", vec![])?;
    let grid = if !explicit.is_empty() {
        explicit
    } else {
        let lo = config.pick(args.rho_lo, "rho_lo", 0.05)?;
        let hi = config.pick(args.rho_hi, "rho_hi", 0.95)?;
        let step = config.pick(args.rho_step, "rho_step", 0.05)?;
        if !(step > 0.0) || !(lo <= hi) {
            return Err(CliError::Usage(format!(
                "rho grid needs step > 0 and lo <= hi (lo = {lo}, hi = {hi}, step = {step})"
            )));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| lo + step * i as f64).collect()
    };
    if let Some(bad) = grid.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(CliError::Usage(format!("rho values must lie in (0, 1), got {bad}")));
    }
    Ok(grid)
}

#[derive(Debug, Clone, Serialize)]
struct FixedSumRow {
    family: CostFamily,
    alpha: f64,
    total: f64,
    time_drop: f64,
    cost_drop: f64,
    value: f64,
}

fn fixed_sum(
    total: f64,
    models: &[CostModel<f64>],
    points: usize,
    fmt: Format,
    out: &mut dyn Write,
) -> Result<Status, CliError> {
    if points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let mut rows = Vec::new();
    for m in models {
        for i in 0..points {
            let time_drop = total * i as f64 / (points - 1) as f64;
            let r = m.reduction_at_fixed_sum(total, time_drop)?;
            rows.push(FixedSumRow {
                family: m.family(),
                alpha: m.alpha(),
                total,
                time_drop: r.time_drop,
                cost_drop: r.cost_drop,
                value: r.value,
            });
        }
    }
    write_records(out, &rows, fmt, "family,alpha,total,time_drop,cost_drop,value", |r| {
        format!(
            "{},{},{},{},{},{}",
            r.family,
            fmt_num(r.alpha),
            fmt_num(r.total),
            fmt_num(r.time_drop),
            fmt_num(r.cost_drop),
            fmt_num(r.value)
        )
    })?;
    Ok(Status::Success)
}

pub fn sweep(args: &SweepArgs, config: &Config, out: &mut dyn Write) -> Result<Status, CliError> {
    let models = models(&args.models, config)?;
    let fmt = format(args.output.format, config)?;
    if let Some(total) = config.pick_opt(args.fixed_sum, "fixed_sum")? {
        let points = config.pick(args.points, "points", 101)?;
        return fixed_sum(total, &models, points, fmt, out);
    }
    let mu = config.pick(args.mu, "mu", 1.0)?;
    let metrics = config.pick_list(args.metrics.clone(), "metrics", Metric::ALL.to_vec())?;
    let grid = rho_grid(args, config)?;
    let with_sim = config.pick_switch(args.with_sim, "with_sim")?;
    let sim = if with_sim { Some(sim_settings(&args.sim, config)?) } else { None };

    let per_point: Vec<Result<Vec<Row>, CliError>> = grid
        .par_iter()
        .map(|&rho| {
            let p = QueueParams::from_rho(rho, mu)?;
            let mut rows = Vec::new();
            for m in &models {
                rows.extend(analytic_rows(&p, m, &metrics)?);
            }
            if let Some(s) = &sim {
                let outcome = run_sim(p, models.clone(), s)?;
                rows.extend(sim_rows(&p, &outcome, s, &metrics, false));
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    sort_rows(&mut rows);
    note_invalid(&rows);
    write_rows(out, &rows, fmt)?;
    Ok(Status::Success)
}

#[derive(Debug, Clone, Serialize)]
struct OptimumRow {
    objective: Objective,
    family: CostFamily,
    alpha: f64,
    mu: f64,
    rho_star: f64,
    value: f64,
}

pub fn optimize(args: &OptimizeArgs, config: &Config, out: &mut dyn Write) -> Result<Status, CliError> {
    let objective = config.pick(args.objective, "objective", Objective::Coud)?;
    let mu = config.pick(args.mu, "mu", 1.0)?;
    let models = models(&args.models, config)?;
    let lo = config.pick(args.lo, "lo", 0.01)?;
    let hi = config.pick(args.hi, "hi", 0.99)?;
    let tol = config.pick(args.tol, "tol", 1e-6)?;
    let fmt = format(args.output.format, config)?;
    let mut rows = Vec::new();
    for m in models {
        let spec = OptimizeSpec::new(objective, m, mu).with_bracket(lo, hi).with_tol(tol);
        let o = optimal_rho(&spec)?;
        rows.push(OptimumRow {
            objective,
            family: m.family(),
            alpha: m.alpha(),
            mu,
            rho_star: o.rho,
            value: o.value,
        });
    }
    write_records(out, &rows, fmt, "objective,family,alpha,mu,rho_star,value", |r| {
        format!(
            "{},{},{},{},{},{}",
            r.objective,
            r.family,
            fmt_num(r.alpha),
            fmt_num(r.mu),
            fmt_num(r.rho_star),
            fmt_num(r.value)
        )
    })?;
    Ok(Status::Success)
}

const LINEAR_LOG_GATE: f64 = 0.02;
const EXP_GATE: f64 = 0.05;
const COV_GATE: f64 = 0.05;
const DENSITY_GATE: f64 = 1e-8;

pub fn validate(args: &ValidateArgs, config: &Config, out: &mut dyn Write) -> Result<Status, CliError> {
    let mu = config.pick(args.mu, "mu", 1.0)?;
    let rhos = config.pick_list(args.rho.clone(), "rho", vec![0.3, 0.5, 0.7])?;
    let families = config.pick_list(args.models.family.clone(), "family", CostFamily::ALL.to_vec())?;
    let alphas = config.pick_list(args.models.alpha.clone(), "alpha", vec![0.1, 0.3])?;
    let s = SimSettings {
        n: config.pick(args.sim.n, "n", DEFAULT_N)?,
        warmup: config.pick(args.sim.warmup, "warmup", DEFAULT_WARMUP)?,
        batches: config.pick(args.sim.batches, "batches", DEFAULT_BATCHES)?,
        reps: config.pick(args.sim.reps, "reps", 10)?,
        seed: config.pick(args.sim.seed, "seed", 42)?,
    };
    if s.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    writeln!(
        out,
        "validate: mu={} rho={:?} alpha={:?} n={} reps={} seed={}",
        fmt_num(mu),
        rhos,
        alphas,
        s.n,
        s.reps,
        s.seed
    )?;

    let mut checks = 0;
    let mut failed = 0;
    let mut bound_violations = 0;
    let mut worst_density: f64 = 0.0;
    let mut tally = |ok: bool| {
        checks += 1;
        if !ok {
            failed += 1;
        }
        if ok {
            "ok"
        } else {
            "FAIL"
        }
    };

    for &rho in &rhos {
        let p = QueueParams::from_rho(rho, mu)?;
        let mut valid = Vec::new();
        for &f in &families {
            for &a in &alphas {
                let m = CostModel::new(f, a)?;
                if validity(&p, &m).all_valid() {
                    valid.push(m);
                } else {
                    writeln!(
                        out,
                        "rho={} {} alpha={}: invalid (outside closed-form regime), not simulated",
                        fmt_num(rho),
                        f,
                        fmt_num(a)
                    )?;
                }
            }
        }
        for m in &valid {
            if analytics::coud_bound(&p, m)? < analytics::coud(&p, m)? {
                bound_violations += 1;
            }
            if m.family() == CostFamily::Logarithmic
                && analytics::coud_log_bound(&p, m.alpha())? > analytics::pcoud_log(&p, m.alpha())?
            {
                bound_violations += 1;
            }
        }
        let spec = QuadratureSpec::default().with_rel_tol(1e-12);
        let scale = 1.0 / p.lambda().min(p.headroom());
        let densities: [fn(&QueueParams<f64>, f64) -> coud_core::Result<f64>; 3] =
            [coud_density, pcoud_density, indep_sum_density];
        for d in densities {
            let mass = try_integrate_semi_infinite(|t| d(&p, t), scale, &spec)?.value;
            worst_density = worst_density.max((mass - 1.0).abs());
        }

        let sim = run_sim(p, valid.clone(), &s)?;
        for est in &sim.models {
            let m = &est.model;
            let gate = if m.family() == CostFamily::Exponential { EXP_GATE } else { LINEAR_LOG_GATE };
            let metrics = [
                ("coud", est.coud.value, analytics::coud(&p, m)?),
                ("pcoud", est.pcoud.value, analytics::pcoud(&p, m)?),
                ("voiu", est.voiu.value, analytics::voiu(&p, m)?),
            ];
            for (name, simulated, closed) in metrics {
                let err = ((simulated - closed) / closed).abs();
                let verdict = tally(err < gate);
                writeln!(
                    out,
                    "rho={} {} alpha={} {name}: sim={} analytic={} rel_err={:.3}% gate={}% {verdict}",
                    fmt_num(rho),
                    m.family(),
                    fmt_num(m.alpha()),
                    fmt_num(simulated),
                    fmt_num(closed),
                    100.0 * err,
                    fmt_num(100.0 * gate)
                )?;
            }
        }
        let target = analytics::cov_wy(&p);
        for (name, e) in [("cov_wy", sim.cov_wy), ("cov_ty", sim.cov_ty)] {
            let err = ((e.value - target) / target).abs();
            let verdict = tally(err < COV_GATE);
            writeln!(
                out,
                "rho={} {name}: sim={} analytic={} rel_err={:.3}% gate={}% {verdict}",
                fmt_num(rho),
                fmt_num(e.value),
                fmt_num(target),
                100.0 * err,
                fmt_num(100.0 * COV_GATE)
            )?;
        }
    }
    let verdict = tally(bound_violations == 0);
    writeln!(out, "bound violations: {bound_violations} {verdict}")?;
    let verdict = tally(worst_density < DENSITY_GATE);
    writeln!(out, "density normalization max residual: {worst_density:.3e} {verdict}")?;
    if failed == 0 {
        writeln!(out, "PASS ({checks} checks)")?;
        Ok(Status::Success)
    } else {
        writeln!(out, "FAIL ({failed} of {checks} checks outside tolerance)")?;
        Ok(Status::ValidationFailed)
    }
}
