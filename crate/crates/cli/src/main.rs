use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qworklab::advantage::{
    inversion_symmetry_check, kappa3_decomposition, lemma1_metric_exact, locality_bound,
    short_time_expansion_check, theorem_pipeline, PipelineConfig, RRule,
};
use qworklab::detector::{reconstruct_xq, simulate_readout, DetectorSpec};
use qworklab::models::{
    inversion_unitary, random_charging_process, random_process, BatteryModel, ChargingProcess,
    RunSpec, SpinBlock,
};
use qworklab::quasi::{linspace, WorkQuasiDistribution};
use qworklab::tpm::lg_for_process;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "qworklab", version, about = "Work quasiprobabilities of quantum battery charging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Atoms and binned histogram of p_q(w).
    Histogram(HistogramArgs),
    /// Spin-block family sweep with a negativity/advantage verdict.
    Sweep(SweepArgs),
    /// Cumulant, symmetry, locality and route diagnostics for one model.
    Diagnose(EngineArgs),
    /// Reconstruct X_q(u) from a simulated qubit detector.
    Detector(DetectorArgs),
    /// Leggett-Garg-type variance inequality.
    Lg(EngineArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for random models.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance for route and readout comparisons.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    /// JSON file, inline JSON object, or `random:<N>` / `random-charging:<N>`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Preset {
    Fig1,
    Fig2,
}

#[derive(Args)]
struct HistogramArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, conflicts_with = "model")]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 101)]
    bins: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated cell counts.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// `fixed:<int>` or `pow:<float>`.
    #[arg(long, default_value = "pow:0.75")]
    r_rule: String,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 101)]
    bins: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EngineArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DetectorArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Grid is `points` values evenly spaced in `[-u_max, u_max]`.
    #[arg(long, default_value_t = 2.0)]
    u_max: f64,
    #[arg(long, default_value_t = 21)]
    points: usize,
    /// Detector level splitting.
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[command(flatten)]
    common: Common,
}

/// A resolved model: a named battery or a seeded random process.
enum Source {
    Battery(RunSpec),
    Random { n: usize, charging: bool },
}

impl Source {
    fn parse(args: &ModelArgs) -> anyhow::Result<Self> {
        let text = args.model.as_deref().context("--model is required")?;
        for (prefix, charging) in [("random-charging:", true), ("random:", false)] {
            if let Some(n) = text.strip_prefix(prefix) {
                let n = n.parse().with_context(|| format!("bad cell count in `{text}`"))?;
                if args.q.is_some_and(|q| !q.is_finite()) {
                    bail!("q: expected a finite number");
                }
                return Ok(Source::Random { n, charging });
            }
        }
        let raw = if text.trim_start().starts_with('{') {
            text.to_string()
        } else {
            fs::read_to_string(text).with_context(|| format!("cannot read model file `{text}`"))?
        };
        let mut value: Value = serde_json::from_str(&raw).context("model spec is not valid JSON")?;
        if let Some(obj) = value.as_object_mut() {
            if let Some(q) = args.q {
                obj.insert("q".into(), json!(q));
            }
            if let Some(t1) = args.t1 {
                obj.insert("t1".into(), json!(t1));
            }
        }
        Ok(Source::Battery(RunSpec::from_value(&value)?))
    }

    fn q(&self, args: &ModelArgs) -> f64 {
        match self {
            Source::Battery(spec) => spec.q,
            Source::Random { .. } => args.q.unwrap_or(0.5),
        }
    }

    fn process(&self, args: &ModelArgs, seed: u64) -> anyhow::Result<ChargingProcess> {
        let process = match self {
            Source::Battery(spec) => ChargingProcess::from_model(&spec.model, Some(spec.t1_or_default()))?,
            Source::Random { n, charging } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = if *charging {
                    random_charging_process(*n, &mut rng)?
                } else {
                    random_process(*n, &mut rng)?
                };
                match args.t1 {
                    Some(t1) => p.with_t1(t1)?,
                    None => p,
                }
            }
        };
        Ok(process)
    }

    fn describe(&self, seed: u64) -> Value {
        match self {
            Source::Battery(spec) => json!(spec),
            Source::Random { n, charging } => json!({
                "model": if *charging { "random_charging" } else { "random" },
                "N": n,
                "seed": seed,
            }),
        }
    }
}

fn q_checked(q: f64) -> anyhow::Result<f64> {
    if !q.is_finite() {
        bail!("q: expected a finite number");
    }
    Ok(q)
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write `{}`", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write `{}`", path.display()))?,
    ))
}

fn write_timing(dir: &Path, start: Instant) -> anyhow::Result<()> {
    let text = format!("wall_time_s {:.6}\n", start.elapsed().as_secs_f64());
    fs::write(dir.join("timing.txt"), text).context("cannot write timing.txt")
}

fn invariant(msg: String) -> anyhow::Error {
    qworklab::Error::Invariant(msg).into()
}

fn cmd_histogram(args: HistogramArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    if args.bins == 0 {
        bail!("bins: must be positive");
    }
    let (source, preset) = match args.preset {
        Some(p) => {
            let alpha = match p {
                Preset::Fig1 => 0.0,
                Preset::Fig2 => 1.0,
            };
            let model = BatteryModel::SpinBlock(SpinBlock::new(1024, 256, 256.0, 1.0, alpha)?);
            let q = q_checked(args.model.q.unwrap_or(0.5))?;
            (Source::Battery(RunSpec { model, q, t1: args.model.t1 }), Some(p))
        }
        None => (Source::parse(&args.model)?, None),
    };
    let q = q_checked(source.q(&args.model))?;
    let (dist, snapped) = match &source {
        Source::Battery(spec) => {
            let snapped = match spec.model {
                BatteryModel::SpinBlock(m) => json!({"N": m.n(), "r": m.r(), "k": m.k()}),
                BatteryModel::TwoLevel(m) => json!({"N": m.n()}),
            };
            (spec.model.pq_closed(q)?, snapped)
        }
        Source::Random { n, .. } => {
            let p = source.process(&args.model, args.common.seed)?;
            (p.pq(q)?, json!({"N": n}))
        }
    };
    let out = &args.common.out;
    prepare_out(out)?;
    let atoms_path = out.join("atoms.csv");
    dist.write_csv(create(&atoms_path)?)?;
    let reread = WorkQuasiDistribution::read_csv(File::open(&atoms_path)?, dist.merge_tol())?;
    if reread.len() != dist.len() {
        return Err(invariant(format!(
            "atoms.csv round trip changed the atom count from {} to {}",
            dist.len(),
            reread.len()
        )));
    }
    let hist = dist.histogram(args.bins);
    hist.write_csv(create(&out.join("histogram.csv"))?)?;
    let requested = preset.map(|_| json!({"N": 1000, "r": 1000f64.powf(0.75)}));
    let meta = json!({
        "command": "histogram",
        "version": VERSION,
        "preset": preset,
        "model": source.describe(args.common.seed),
        "q": q,
        "bins": args.bins,
        "requested": requested,
        "snapped": snapped,
        "atoms": dist.len(),
        "total_weight": dist.total_weight(),
        "negativity": dist.negativity(),
        "min_weight": dist.min_weight(),
        "min_bin_mass": hist.min_mass(),
        "negative_bins": hist.masses.iter().filter(|&&m| m < -1e-12).count(),
    });
    write_json(&out.join("metadata.json"), &meta)?;
    write_timing(out, start)?;
    println!(
        "{} atoms, negativity {:.6}, min weight {:.3e}",
        dist.len(),
        dist.negativity(),
        dist.min_weight()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let rule = RRule::parse(&args.r_rule)?;
    if args.bins == 0 {
        bail!("bins: must be positive");
    }
    let config = PipelineConfig {
        q: q_checked(args.q)?,
        bins: args.bins,
        ..PipelineConfig::default()
    };
    let sweep = theorem_pipeline(&args.n_list, rule, &config)?;
    let out = &args.common.out;
    prepare_out(out)?;
    sweep.write_csv(create(&out.join("sweep.csv"))?)?;
    write_json(&out.join("verdict.json"), &sweep)?;
    let snapped: Vec<Value> = sweep
        .rows
        .iter()
        .map(|r| json!({"N": r.n, "r": r.r, "k": r.k, "requested_r": r.requested_r}))
        .collect();
    let meta = json!({
        "command": "sweep",
        "version": VERSION,
        "rule": rule.label(),
        "n_list": args.n_list,
        "q": config.q,
        "bins": config.bins,
        "snapped": snapped,
        "skipped": sweep.skipped,
    });
    write_json(&out.join("metadata.json"), &meta)?;
    write_timing(out, start)?;
    for s in &sweep.skipped {
        eprintln!("skipped N = {}: {}", s.n, s.reason);
    }
    println!(
        "{}: {} rows, implication holds {}, converse counterexample {}",
        sweep.verdict.family,
        sweep.rows.len(),
        sweep.verdict.implication_holds,
        sweep.verdict.converse_counterexample
    );
    Ok(())
}

fn cells_of(process: &ChargingProcess) -> usize {
    process.dim().trailing_zeros() as usize
}

fn cmd_diagnose(args: EngineArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let source = Source::parse(&args.model)?;
    let q = q_checked(source.q(&args.model))?;
    let process = source.process(&args.model, args.common.seed)?;
    let tol = args.common.tol.unwrap_or(1e-9);
    let n = cells_of(&process);
    let dist = process.pq(q)?;
    let kappa3 = kappa3_decomposition(&process, q)?;
    let analytic = process.analytic_moments(q)?;
    let numeric = [dist.moment(1), dist.moment(2), dist.moment(3)];
    let scale = process.e0_max().max(1.0);
    let moment_dev = (0..3)
        .map(|i| (analytic[i] - numeric[i]).abs() / scale.powi(i as i32 + 1))
        .fold(0.0, f64::max);
    let u_i = inversion_unitary(n)?;
    let symmetry = inversion_symmetry_check(process.h1(), &u_i, Some(&process))?;
    let tau = process.tau();
    let short_time = short_time_expansion_check(&process, &[1e-3 * tau, 2e-3 * tau, 4e-3 * tau])?;
    let exact_metric = lemma1_metric_exact(&process, n);
    let mut route = Value::Null;
    let mut locality = Value::Null;
    let mut structural = Value::Null;
    let mut failures = Vec::new();
    if let Source::Battery(spec) = &source {
        let closed = spec.model.pq_closed(q)?;
        let dev = closed.max_deviation(&dist, 1e-9 * scale);
        route = json!({"max_deviation": dev, "tolerance": tol, "agrees": dev <= tol});
        if dev > tol {
            failures.push(format!("closed-form route differs from direct build by {dev:.3e}"));
        }
        let metric = spec.model.lemma1_metric();
        structural = json!(metric);
        let terms = spec.model.h1_terms();
        let report = locality_bound(&terms, n, spec.model.epsilon0(), metric * n as f64)?;
        locality = json!(report);
    }
    if moment_dev > tol {
        failures.push(format!("analytic moments differ from p_q moments by {moment_dev:.3e}"));
    }
    if !kappa3.consistent {
        failures.push("third-cumulant decomposition does not close".into());
    }
    let report = json!({
        "command": "diagnose",
        "version": VERSION,
        "model": source.describe(args.common.seed),
        "q": q,
        "t1": process.t1(),
        "tau": tau,
        "dim": process.dim(),
        "negativity": dist.negativity(),
        "min_weight": dist.min_weight(),
        "moments": {"distribution": numeric, "analytic": analytic, "max_scaled_deviation": moment_dev},
        "kappa3": kappa3,
        "inversion_symmetry": symmetry,
        "short_time": short_time,
        "lemma1_metric": {"exact": exact_metric, "structural": structural},
        "locality": locality,
        "route_check": route,
        "failures": failures,
    });
    let out = &args.common.out;
    prepare_out(out)?;
    write_json(&out.join("diagnose.json"), &report)?;
    write_timing(out, start)?;
    if !failures.is_empty() {
        return Err(invariant(failures.join("; ")));
    }
    println!(
        "kappa3 {:.6} = kappa3' {:.6} + correction {:.6}",
        kappa3.kappa3, kappa3.kappa3_prime, kappa3.correction
    );
    Ok(())
}

fn cmd_detector(args: DetectorArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    if args.points < 2 || !(args.u_max > 0.0) {
        bail!("points: need at least 2 points and a positive u_max");
    }
    let source = Source::parse(&args.model)?;
    let q = q_checked(source.q(&args.model))?;
    let process = source.process(&args.model, args.common.seed)?;
    let tol = args.common.tol.unwrap_or(1e-10);
    let grid = linspace(-args.u_max, args.u_max, args.points);
    let template = DetectorSpec::plus_state(args.omega);
    let samples = reconstruct_xq(&process, &grid, q, &template)?;
    let mut max_trace = 0.0f64;
    let mut max_closed: Option<f64> = None;
    let mut min_purity = f64::INFINITY;
    let mut max_formula = 0.0f64;
    for (&u, &x) in grid.iter().zip(samples.values()) {
        max_trace = max_trace.max((x - process.xq(u, q)?).norm());
        if let Source::Battery(spec) = &source {
            if let Ok(c) = spec.model.xq_closed(u, q) {
                max_closed = Some(max_closed.unwrap_or(0.0).max((x - c).norm()));
            }
        }
        let r = simulate_readout(&process, process.t1(), process.tau(), &template.with_schedule(u, q))?;
        min_purity = min_purity.min(r.system_purity);
        max_formula = max_formula.max(r.deviation);
    }
    let agrees = max_trace <= tol && max_closed.is_none_or(|d| d <= tol);
    let out = &args.common.out;
    prepare_out(out)?;
    samples.write_csv(create(&out.join("readout.csv"))?)?;
    let report = json!({
        "command": "detector",
        "version": VERSION,
        "model": source.describe(args.common.seed),
        "q": q,
        "t1": process.t1(),
        "tau": process.tau(),
        "omega": args.omega,
        "points": args.points,
        "u_max": args.u_max,
        "max_deviation_trace": max_trace,
        "max_deviation_closed_form": max_closed,
        "max_deviation_readout_formula": max_formula,
        "min_system_purity": min_purity,
        "tolerance": tol,
        "agrees": agrees,
    });
    write_json(&out.join("detector.json"), &report)?;
    write_timing(out, start)?;
    if !agrees {
        return Err(invariant(format!(
            "detector readout differs from X_q by {max_trace:.3e} (tolerance {tol:.1e})"
        )));
    }
    println!("max |reconstructed - direct| = {max_trace:.3e}");
    Ok(())
}

fn cmd_lg(args: EngineArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let source = Source::parse(&args.model)?;
    let q = q_checked(source.q(&args.model))?;
    let process = source.process(&args.model, args.common.seed)?;
    let report = lg_for_process(&process, q)?;
    let mut by_q = Vec::new();
    for qq in [0.0, 0.5, 1.0] {
        by_q.push(json!({"q": qq, "sigma2": process.pq(qq)?.variance()}));
    }
    let dist = process.pq(q)?;
    let out = &args.common.out;
    prepare_out(out)?;
    let mut value = serde_json::to_value(&report)?;
    let obj = value.as_object_mut().expect("report serializes to an object");
    obj.insert("version".into(), json!(VERSION));
    obj.insert("model".into(), source.describe(args.common.seed));
    obj.insert("q".into(), json!(q));
    obj.insert("t1".into(), json!(process.t1()));
    obj.insert("sigma2_by_q".into(), json!(by_q));
    obj.insert("negativity".into(), json!(dist.negativity()));
    write_json(&out.join("lg.json"), &value)?;
    write_timing(out, start)?;
    println!(
        "lhs {:.6e} rhs {:.6e} violated {}",
        report.lhs, report.rhs, report.violated
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Histogram(a) => cmd_histogram(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Detector(a) => cmd_detector(a),
        Command::Lg(a) => cmd_lg(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invariant = e
                .downcast_ref::<qworklab::Error>()
                .is_some_and(|e| e.is_invariant_failure());
            ExitCode::from(if invariant { 2 } else { 1 })
        }
    }
}
