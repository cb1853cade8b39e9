//! `stable-lfd`: generate demonstrations, fit stable models, roll them out,
//! evaluate them and export plot data.
//!
//! Exit codes: 0 success, 1 runtime or model error, 2 usage error.

mod disturbance;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use stable_lfd::bench::{self, BenchConfig};
use stable_lfd::controller::ControllerConfig;
use stable_lfd::dataset::{
    load_csv, preprocess, synthetic_trajectories, write_csv, Dataset, PreprocessConfig, RawTrajectory,
    Shape, SyntheticSpec,
};
use stable_lfd::learn::{fit, LearnConfig};
use stable_lfd::metrics::evaluate;
use stable_lfd::model::StableModel;
use stable_lfd::sim::{energy_grid, rollout, write_grid_csv, write_trace_csv, Disturbance, RolloutConfig};

const TOOL: &str = "stable-lfd";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "stable-lfd", version, about = "Learn stable motion primitives from demonstrations")]
struct Cli {
    /// Seed for every random choice (data generation, clustering).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic demonstrations to CSV.
    Generate(GenerateArgs),
    /// Preprocess a demonstration CSV and fit a stable model.
    Fit(FitArgs),
    /// Simulate the learned field from given or recorded start states.
    Rollout(RolloutArgs),
    /// Reproduce every demonstration and report swept area and RMSE.
    Eval(EvalArgs),
    /// Sample the energy and the closed-loop field on a grid.
    Field(FieldArgs),
    /// Time the objective over a grid of problem sizes.
    Bench(BenchArgs),
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse::<Shape>().map_err(|_| {
        let names: Vec<&str> = Shape::ALL.iter().map(|s| s.name()).collect();
        format!("unknown shape '{s}' (expected one of: {})", names.join(", "))
    })
}

fn parse_lonlat(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [lon, lat] => Ok([*lon, *lat]),
        _ => Err("expected lon,lat".into()),
    }
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_shape)]
    #[serde(serialize_with = "ser_display")]
    shape: Shape,
    /// Number of demonstrations.
    #[arg(short = 'M', long = "demos", default_value_t = 3)]
    demos: usize,
    /// Samples per demonstration.
    #[arg(short = 'N', long = "points", default_value_t = 500)]
    points: usize,
    /// Standard deviation (m) of the per-demo path deformation.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Record the course angle as a heading column.
    #[arg(long)]
    heading: bool,
    #[arg(short, long)]
    #[serde(skip)]
    out: PathBuf,
}

fn ser_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Args, Debug, Serialize)]
struct PreprocessArgs {
    /// Treat positions as lon/lat degrees projected around this origin.
    #[arg(long, value_parser = parse_lonlat)]
    origin: Option<[f64; 2]>,
    /// Replace planar position + heading by (distance, heading).
    #[arg(long)]
    polar: bool,
    /// Largest final-state miss (m) the endpoint correction accepts.
    #[arg(long, default_value_t = 10.0)]
    r_corr: f64,
}

impl PreprocessArgs {
    fn config(&self) -> PreprocessConfig {
        PreprocessConfig {
            origin_lonlat: self.origin,
            polar: self.polar,
            r_corr: self.r_corr,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[arg(short, long)]
    #[serde(skip)]
    input: PathBuf,
    /// Mixture components [default: 5 for planar data, 12 with heading]
    #[arg(short = 'K', long = "components")]
    k: Option<usize>,
    /// Asymmetric CLF terms.
    #[arg(short = 'L', long = "clf-terms", default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 0.2)]
    rho0: f64,
    /// Radius (recording units) of the arrival ball.
    #[arg(long, default_value_t = 0.5)]
    target_radius: f64,
    /// Stop once J falls below this [default: 1% of the mean squared speed]
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Fit in recording units instead of per-axis normalized units.
    #[arg(long)]
    no_scale: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pre: PreprocessArgs,
    #[arg(short, long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct RolloutArgs {
    #[arg(short, long)]
    #[serde(skip)]
    model: PathBuf,
    /// Start state relative to the target, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "from_demo_starts")]
    x0: Option<Vec<f64>>,
    /// Start from the first state of every demonstration in --data.
    #[arg(long, requires = "data")]
    from_demo_starts: bool,
    /// Demonstration CSV, preprocessed like the model's training data.
    #[arg(short, long)]
    #[serde(skip)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// none | drift:vx,vy | localized:t0,dur,vx,vy | engine-off:t0,dur,vx,vy
    #[arg(long, default_value = "none", value_parser = disturbance::parse)]
    #[serde(skip)]
    disturbance: Disturbance,
    /// Integrate the regression estimate alone.
    #[arg(long)]
    no_control: bool,
    #[arg(long, default_value_t = 10.0)]
    r_corr: f64,
    /// Output CSV; several traces get `_<i>` appended to the file stem.
    #[arg(short, long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(short, long)]
    #[serde(skip)]
    model: PathBuf,
    #[arg(short, long)]
    #[serde(skip)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 10.0)]
    r_corr: f64,
    #[arg(short, long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct FieldArgs {
    #[arg(short, long)]
    #[serde(skip)]
    model: PathBuf,
    /// Lower grid corner [default: −1.1 × data extent on every axis]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lo: Option<Vec<f64>>,
    /// Upper grid corner [default: 1.1 × data extent on every axis]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    hi: Option<Vec<f64>>,
    /// Points per axis; one value applies to every axis.
    #[arg(long, value_delimiter = ',', default_value = "50")]
    resolution: Vec<usize>,
    #[arg(short, long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8")]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "100,200")]
    ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    ds: Vec<usize>,
    #[arg(short = 'M', long = "demos", default_value_t = 3)]
    demos: usize,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Also time a complete fit for every combination.
    #[arg(long)]
    full_fit: bool,
    #[arg(short, long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

struct Ctx {
    seed: u64,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    /// `# ` lines identifying the tool and its effective configuration.
    fn header(&self, command: &str, cfg: &impl Serialize) -> AnyResult<Vec<String>> {
        Ok(vec![
            format!("{TOOL} {VERSION}"),
            format!("command: {command}"),
            format!("config: {}", self.config_json(cfg)?),
        ])
    }

    fn config_json(&self, cfg: &impl Serialize) -> AnyResult<serde_json::Value> {
        let mut v = serde_json::to_value(cfg)?;
        if let Some(obj) = v.as_object_mut() {
            obj.insert("seed".into(), json!(self.seed));
        }
        Ok(v)
    }
}

fn create(path: &Path) -> AnyResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("cannot write {}: {e}", path.display()).into())
}

fn load(path: &Path) -> AnyResult<Vec<RawTrajectory>> {
    load_csv(path, None).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_model(path: &Path) -> AnyResult<StableModel> {
    StableModel::load(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

/// Preprocesses recorded data exactly like the model's training data.
fn data_for_model(model: &StableModel, path: &Path, r_corr: f64) -> AnyResult<Dataset> {
    let cfg = PreprocessConfig {
        origin_lonlat: model.meta.origin_lonlat,
        polar: model.meta.polar,
        r_corr,
    };
    let ds = preprocess(&load(path)?, &cfg)?;
    if ds.dim != model.dim() {
        return Err(format!(
            "model is {}-dimensional but the data is {}-dimensional",
            model.dim(),
            ds.dim
        )
        .into());
    }
    Ok(ds)
}

fn cmd_generate(ctx: &Ctx, a: &GenerateArgs) -> AnyResult<()> {
    let spec = SyntheticSpec::new(a.shape, a.demos, a.points, a.noise, ctx.seed).with_heading(a.heading);
    let trajs = synthetic_trajectories(&spec)?;
    let mut out = create(&a.out)?;
    write_csv(&trajs, &ctx.header("generate", a)?, &mut out)?;
    out.flush()?;
    let ds = preprocess(&trajs, &PreprocessConfig::default())?;
    ctx.say(format!(
        "wrote {}: M={} N={} d={} extent={:.3}",
        a.out.display(),
        trajs.len(),
        a.points,
        trajs[0].dim() + usize::from(a.heading),
        ds.meta.extent
    ));
    Ok(())
}

fn cmd_fit(ctx: &Ctx, a: &FitArgs) -> AnyResult<()> {
    let raw = load(&a.input)?;
    let has_heading = raw.first().is_some_and(|t| t.heading.is_some());
    let data = preprocess(&raw, &a.pre.config())?;
    let k = a.k.unwrap_or(if has_heading || a.pre.polar { 12 } else { 5 });
    let mut cfg = LearnConfig::new(k, a.l, ctx.seed);
    cfg.controller = ControllerConfig::new(a.rho0, a.target_radius)?;
    cfg.threshold = a.threshold;
    cfg.max_outer_iters = a.max_iters;
    cfg.scale_normalization = !a.no_scale;
    let mut effective = ctx.config_json(a)?;
    effective["K"] = json!(k);
    ctx.say(format!("config: {effective}"));
    ctx.say(format!(
        "data: M={} points={} d={}{}",
        data.demos.len(),
        data.num_points(),
        data.dim,
        if a.pre.polar { " (polar)" } else { "" }
    ));
    let start = Instant::now();
    let mut model = fit(&data, &cfg)?;
    let wall = start.elapsed().as_secs_f64();
    model.provenance = Some(json!({
        "tool": TOOL,
        "version": VERSION,
        "command": "fit",
        "config": effective,
    }));
    model.save(&a.out)?;
    ctx.say(format!("J_init: {:.6e}", model.j_init));
    ctx.say(format!("J_final: {:.6e}", model.j_final));
    ctx.say(format!("iterations: {}", model.iterations));
    ctx.say(format!("converged: {}", model.converged));
    ctx.say(format!("wall_time_s: {wall:.3}"));
    if !model.converged {
        eprintln!("warning: converged:false (threshold not reached); best parameters were saved");
    }
    ctx.say(format!("wrote {}", a.out.display()));
    Ok(())
}

fn numbered(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{i}.{ext}"),
        None => format!("{stem}_{i}"),
    };
    path.with_file_name(name)
}

fn cmd_rollout(ctx: &Ctx, a: &RolloutArgs) -> AnyResult<()> {
    let model = load_model(&a.model)?;
    if let Err(e) = a.disturbance.validate(model.dim()) {
        Cli::command()
            .error(ErrorKind::ValueValidation, format!("invalid --disturbance: {e}"))
            .exit();
    }
    let starts: Vec<Vec<f64>> = if a.from_demo_starts {
        let path = a.data.as_ref().expect("clap enforces --data");
        let ds = data_for_model(&model, path, a.r_corr)?;
        ds.demos.iter().map(|d| d.start().to_vec()).collect()
    } else if let Some(x0) = &a.x0 {
        vec![x0.clone()]
    } else {
        Cli::command()
            .error(ErrorKind::MissingRequiredArgument, "give --x0 or --from-demo-starts")
            .exit();
    };
    let cfg = RolloutConfig {
        dt: a.dt,
        max_steps: a.steps,
        disturbance: a.disturbance.clone(),
        control: !a.no_control,
    };
    let mut header = ctx.header("rollout", a)?;
    header.push(format!("disturbance: {:?}", a.disturbance));
    for (i, x0) in starts.iter().enumerate() {
        let trace = rollout(&model, x0, &cfg)?;
        let path = if starts.len() == 1 { a.out.clone() } else { numbered(&a.out, i) };
        let mut out = create(&path)?;
        write_trace_csv(&trace, &header, &mut out)?;
        out.flush()?;
        let status = if trace.reached_target {
            "reached"
        } else if trace.diverged {
            "diverged"
        } else {
            "not reached"
        };
        ctx.say(format!(
            "trace {i}: {status} after {} steps -> {}",
            trace.steps_used,
            path.display()
        ));
    }
    Ok(())
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> AnyResult<()> {
    let model = load_model(&a.model)?;
    let ds = data_for_model(&model, &a.data, a.r_corr)?;
    let cfg = RolloutConfig {
        dt: a.dt,
        max_steps: a.steps,
        ..Default::default()
    };
    let report = evaluate(&model, &ds, &cfg)?;
    // Polar states mix metres and radians.
    let units = if model.meta.polar { "state units²" } else { "m²" };
    let doc = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": "eval",
        "config": ctx.config_json(a)?,
        "area_units": units,
        "per_demo": report.per_demo,
        "totals": report.totals,
    });
    let mut out = create(&a.out)?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    for r in &report.per_demo {
        ctx.say(format!(
            "demo {}: sea={:.6} {units} rmse={:.6} reached={} steps={}",
            r.demo, r.sea, r.rmse, r.reached_target, r.steps
        ));
    }
    ctx.say(format!(
        "total: sea={:.6} {units} rmse={:.6} reached {}/{}",
        report.totals.sea, report.totals.rmse, report.totals.reached, report.totals.demos
    ));
    Ok(())
}

fn cmd_field(ctx: &Ctx, a: &FieldArgs) -> AnyResult<()> {
    let model = load_model(&a.model)?;
    let d = model.dim();
    let e = 1.1 * model.meta.extent;
    let lo = a.lo.clone().unwrap_or_else(|| vec![-e; d]);
    let hi = a.hi.clone().unwrap_or_else(|| vec![e; d]);
    let res = if a.resolution.len() == 1 {
        vec![a.resolution[0]; d]
    } else {
        a.resolution.clone()
    };
    let grid = energy_grid(&model, &lo, &hi, &res)?;
    let mut header = ctx.header("field", a)?;
    header.push(format!("bounds: lo={lo:?} hi={hi:?} resolution={res:?}"));
    let mut out = create(&a.out)?;
    write_grid_csv(&grid, &header, &mut out)?;
    out.flush()?;
    ctx.say(format!("wrote {} grid points to {}", grid.len(), a.out.display()));
    Ok(())
}

fn cmd_bench(ctx: &Ctx, a: &BenchArgs) -> AnyResult<()> {
    let cfg = BenchConfig {
        ks: a.ks.clone(),
        ns: a.ns.clone(),
        ds: a.ds.clone(),
        demos: a.demos,
        reps: a.reps,
        seed: ctx.seed,
        full_fit: a.full_fit,
        ..Default::default()
    };
    let report = bench::run(&cfg)?;
    let m = &report.machine;
    let mut lines = ctx.header("bench", a)?;
    lines.push(format!("machine: os={} arch={} threads={}", m.os, m.arch, m.threads));
    lines.push(format!("slope_vs_KMN: {:.4}", report.slope));
    let mut text = String::new();
    for l in &lines {
        text.push_str(&format!("# {l}\n"));
    }
    text.push_str("k,n,m,d,rep,kmn,objective_seconds,fit_seconds\n");
    for r in &report.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{:.6e},{}\n",
            r.k,
            r.n,
            r.m,
            r.d,
            r.rep,
            r.kmn,
            r.objective_seconds,
            r.fit_seconds.map_or(String::new(), |s| format!("{s:.4}"))
        ));
    }
    if let Some(path) = &a.out {
        let mut out = create(path)?;
        out.write_all(text.as_bytes())?;
        out.flush()?;
    }
    if !ctx.quiet {
        print!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Warn
        } else {
            log::LevelFilter::Info
        })
        .parse_default_env()
        .init();
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Rollout(a) => cmd_rollout(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Field(a) => cmd_field(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
