use anyhow::Context;
use hyplab::hyptimes::hyperbolic_time_density;
use hyplab::mc_engine::{
    correlation_decay, ensemble_birkhoff, gbt_test, pushforward_test, Observable, SampleConfig, TailEstimate,
};
use hyplab::partition::{asymptotic_report, DEFAULT_EPS_FLOOR, DEFAULT_K_MAX};
use hyplab::tower_stats::{default_return_fit_range, hyp_tails, ld_tail, return_tail};
use hyplab::{build_partition, derive_params, fit, FactorMap, HypParams, PartitionTable, Point};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CommonArgs, ConfigError, ExperimentConfig};
use crate::output::Output;
use crate::Command;

struct Ctx {
    cfg: ExperimentConfig,
    map: FactorMap,
}

impl Ctx {
    fn new(args: &CommonArgs) -> anyhow::Result<Self> {
        let cfg = args.resolve()?;
        let map = FactorMap::new(cfg.map.build()?)?;
        Ok(Ctx { cfg, map })
    }

    fn table(&self) -> anyhow::Result<PartitionTable> {
        Ok(build_partition(&self.map, DEFAULT_EPS_FLOOR, DEFAULT_K_MAX)?)
    }

    fn params(&self, t: &PartitionTable) -> anyhow::Result<HypParams> {
        Ok(derive_params(&self.map, t, self.cfg.b, &self.cfg.overrides)?)
    }

    fn sampling(&self, default_n: usize) -> SampleConfig {
        let s = self.cfg.sampling;
        SampleConfig::new(s.seed, s.n_samples.unwrap_or(default_n)).with_workers(s.workers)
    }

    fn fit_range(&self, default: (u64, u64)) -> (u64, u64) {
        self.cfg.fit_range.unwrap_or(default)
    }

    fn n_max(&self, default: u64) -> u64 {
        self.cfg.n_max.unwrap_or(default)
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Params(a) => params(&a),
        Command::Partition(a) => partition(&a),
        Command::Asymptotics(a) => asymptotics(&a),
        Command::HTail(a) => h_tail(&a),
        Command::ReturnTail(a) => return_tail_cmd(&a),
        Command::LdTail(a) => ld_tail_cmd(&a),
        Command::Density(a) => density(&a),
        Command::Lyapunov(a) => lyapunov(&a),
        Command::Invariance(a) => invariance(&a),
        Command::Correlation(a) => correlation(&a),
        Command::Validate(a) => validate(&a),
    }
}

fn params(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let t = ctx.table()?;
    let p = ctx.params(&t)?;
    let out = Output::new(a.out.clone(), "params")?;
    match &a.out {
        Some(dir) => std::fs::write(dir.join("params.json"), serde_json::to_string_pretty(&p)? + "\n")
            .context("writing params.json")?,
        None => println!("{}", serde_json::to_string_pretty(&p)?),
    }
    out.finish(&ctx.cfg, Some(&p), json!({ "table_depth": t.depth(), "a": ctx.map.a() }))
}

#[derive(Serialize)]
struct PartitionRow {
    k: usize,
    x: f64,
    one_minus_y: f64,
    xp_minus_a: f64,
    a_minus_yp: f64,
    m_j: f64,
    m_jp: f64,
    m_i: f64,
    m_ip: f64,
}

fn partition(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let t = ctx.table()?;
    let rows = ctx.n_max(t.depth() as u64).min(t.depth() as u64) as usize;
    let mut out = Output::new(a.out.clone(), "partition")?;
    out.table(
        "partition",
        (1..=rows).map(|k| PartitionRow {
            k,
            x: t.x(k),
            one_minus_y: t.one_minus_y(k),
            xp_minus_a: t.xp_offset(k),
            a_minus_yp: t.yp_offset(k),
            m_j: t.m_j(k),
            m_jp: t.m_jp(k),
            m_i: t.m_i(k),
            m_ip: t.m_ip(k),
        }),
    )?;
    let (x0, y0) = (t.x0(), t.y0());
    out.finish(
        &ctx.cfg,
        None,
        json!({ "depth": t.depth(), "a": ctx.map.a(), "x0": x0, "y0": y0, "kac_sum": t.kac_sum() }),
    )
}

fn asymptotics(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let t = ctx.table()?;
    let (lo, hi) = ctx.fit_range((100, 10_000));
    let r = asymptotic_report(&t, &ctx.map, lo as usize, hi as usize)?;
    let mut out = Output::new(a.out.clone(), "asymptotics")?;
    out.table("asymptotics", &r.fits)?;
    out.finish(&ctx.cfg, None, json!({ "passed": r.passed(), "warnings": r.warnings }))
}

fn estimate_json(e: &TailEstimate) -> Value {
    json!({
        "exponent": e.exponent,
        "intercept": e.intercept,
        "ci_low": e.ci_low,
        "ci_high": e.ci_high,
        "fit_range": e.fit_range,
        "n_samples": e.n_samples,
        "n_censored": e.n_censored,
    })
}

fn h_tail(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let t = ctx.table()?;
    let p = ctx.params(&t)?;
    let cfg = ctx.sampling(1_000_000);
    let r = hyp_tails(&ctx.map, &p, &cfg, ctx.fit_range((30, 3000)), ctx.n_max(10_000))?;
    let mut out = Output::new(a.out.clone(), "h-tail")?;
    out.table("h_tail", &r.h_rows)?;
    out.table("H_tail", &r.escape_rows)?;
    out.finish(
        &ctx.cfg,
        Some(&p),
        json!({
            "h": estimate_json(&r.h),
            "H": estimate_json(&r.escape),
            "sandwich_failures": r.sandwich_failures,
            "escape_not_hyperbolic": r.escape_not_hyperbolic,
            "order_violations": r.order_violations,
            "warnings": r.warnings,
        }),
    )
}

fn return_tail_cmd(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let t = ctx.table()?;
    let cfg = ctx.sampling(1_000_000);
    let range = ctx.fit_range(default_return_fit_range(&t, cfg.n_samples));
    let r = return_tail(&ctx.map, &t, &cfg, range)?;
    let mut out = Output::new(a.out.clone(), "return-tail")?;
    out.table("return_tail", &r.rows)?;
    out.table("return_check", &r.check)?;
    out.finish(
        &ctx.cfg,
        None,
        json!({
            "R": estimate_json(&r.estimate),
            "expected_exponent": -1.0 - 1.0 / ctx.map.cut().alpha(),
            "max_abs_z": r.max_abs_z(),
            "mismatches": r.mismatches,
            "censored": r.censored,
            "kac_sum": t.kac_sum(),
            "warnings": r.warnings,
        }),
    )
}

#[derive(Serialize)]
struct LdRow {
    n: u64,
    count: u64,
    fraction: f64,
    stderr: f64,
}

fn ld_tail_cmd(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let t = ctx.table()?;
    let p = ctx.params(&t)?;
    let cfg = ctx.sampling(1_000_000);
    let eps = ctx.cfg.epsilon.unwrap_or(-p.mean_counter / 2.0);
    let grid = match &ctx.cfg.n_grid {
        Some(g) => g.clone(),
        None => {
            let (lo, hi) = ctx.fit_range((10, 1000));
            fit::geometric_grid(lo, hi, 20)
        }
    };
    let r = ld_tail(&ctx.map, &p, &cfg, eps, &grid)?;
    let used = (cfg.n_samples - r.truncated) as f64;
    let mut out = Output::new(a.out.clone(), "ld-tail")?;
    out.table(
        "ld_tail",
        r.records.iter().map(|rec| LdRow {
            n: rec.n,
            count: rec.count,
            fraction: rec.fraction,
            stderr: (rec.fraction * (1.0 - rec.fraction) / used).sqrt(),
        }),
    )?;
    out.finish(
        &ctx.cfg,
        Some(&p),
        json!({
            "epsilon": eps,
            "mean_counter": r.mean_counter,
            "slope": r.slope,
            "inclusion_checked": r.inclusion_checked,
            "inclusion_violations": r.inclusion_violations,
            "truncated": r.truncated,
        }),
    )
}

#[derive(Serialize)]
struct DensityRow {
    n: u64,
    theta: f64,
}

fn density(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let t = ctx.table()?;
    let p = ctx.params(&t)?;
    let x0 = ctx.cfg.x0.unwrap_or(0.3);
    let r = hyperbolic_time_density(&ctx.map, &p, x0, ctx.n_max(100_000))?;
    let mut out = Output::new(a.out.clone(), "density")?;
    out.table("density", r.checkpoints.iter().map(|&(n, theta)| DensityRow { n, theta }))?;
    out.finish(
        &ctx.cfg,
        Some(&p),
        json!({
            "x0": x0,
            "theta": r.theta,
            "last_half_variation": r.last_half_variation(),
            "steps": r.steps,
            "truncated": r.truncated,
        }),
    )
}

#[derive(Serialize)]
struct StartRow {
    start: usize,
    mean: f64,
}

fn lyapunov(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let cfg = ctx.sampling(100);
    let steps = ctx.n_max(10_000_000);
    let r = ensemble_birkhoff(&ctx.map, &Observable::LogDerivative, &cfg, steps)?;
    let k = ctx.map.cut().entropy_integral()?;
    let mut out = Output::new(a.out.clone(), "lyapunov")?;
    out.table(
        "lyapunov",
        r.per_start.iter().enumerate().map(|(start, &mean)| StartRow { start, mean }),
    )?;
    out.finish(
        &ctx.cfg,
        None,
        json!({
            "steps": steps,
            "mean": r.mean,
            "stderr": r.stderr,
            "truncated": r.truncated,
            "K": k,
        }),
    )
}

fn invariance(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let cfg = ctx.sampling(1_000_000);
    let push = pushforward_test(&ctx.map, &cfg, 100)?;
    let gbt = gbt_test(&ctx.map, &cfg, 20)?;
    #[derive(Serialize)]
    struct Row {
        test: &'static str,
        statistic: f64,
        dof: usize,
        critical: f64,
        pass: bool,
    }
    let rows = [("pushforward_100_bins", push), ("square_map_20x20", gbt)].map(|(test, c)| Row {
        test,
        statistic: c.statistic,
        dof: c.dof,
        critical: c.critical,
        pass: c.pass,
    });
    let mut out = Output::new(a.out.clone(), "invariance")?;
    out.table("invariance", &rows)?;
    out.finish(&ctx.cfg, None, json!({ "passed": push.pass && gbt.pass }))
}

fn correlation(a: &CommonArgs) -> anyhow::Result<()> {
    let ctx = Ctx::new(a)?;
    let cfg = ctx.sampling(10_000_000);
    let grid = match &ctx.cfg.n_grid {
        Some(g) => g.clone(),
        None => {
            let (lo, hi) = ctx.fit_range((5, 100));
            (lo..=hi).collect()
        }
    };
    let centered = |p: Point| p.x() - 0.5;
    let r = correlation_decay(&ctx.map, centered, centered, &grid, &cfg)?;
    let mut out = Output::new(a.out.clone(), "correlation")?;
    out.table("correlation", &r.rows)?;
    out.finish(
        &ctx.cfg,
        None,
        json!({ "slope": r.slope, "usable": r.usable, "warnings": r.warnings }),
    )
}

fn validate(a: &CommonArgs) -> anyhow::Result<()> {
    let cfg = a.resolve()?;
    let cut = cfg.map.build()?;
    let grid = cfg.n_max.unwrap_or(10_000) as usize;
    let report = cut.validate(grid);
    let out = Output::new(a.out.clone(), "validate")?;
    let passed = report.passed();
    match &a.out {
        Some(dir) => std::fs::write(dir.join("validation.json"), serde_json::to_string_pretty(&report)? + "\n")
            .context("writing validation.json")?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    out.finish(&cfg, None, json!({ "passed": passed }))?;
    if !passed {
        return Err(invalid("cut function failed validation"));
    }
    Ok(())
}
