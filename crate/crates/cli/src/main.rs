use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gridla::bench::{self, format_matrix, run_bench, Report, RunSpec, SweepSpec};
use gridla::dense::generate;
use gridla::perf::{fit_params, predict_time, Run};
use serde_json::{json, Map, Value};

/// Distributed dense linear algebra on a simulated processor grid.
#[derive(Parser)]
#[command(name = "gridla", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test matrix in text form.
    Gen(GenArgs),
    /// Run one factorization or solve and emit a JSON report.
    Bench(BenchArgs),
    /// Run a grid of (n, s) benchmarks and fit the cost model.
    Sweep(SweepArgs),
    /// Fit the cost model to measured runs from a CSV file (columns n,s,time).
    Fit(FitArgs),
    /// Re-run the spec embedded in a report and compare the output byte for byte.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// random-uniform, identity, upper-triangular, band or hilbert.
    #[arg(long, default_value = "random-uniform")]
    kind: String,
    /// Half bandwidth for --kind band.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Run-spec fields settable from the command line. Each overrides the
/// corresponding field of `--config`.
#[derive(Args, Default)]
struct SpecFlags {
    /// JSON file with a run spec supplying defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// lu, solve, qr-householder, qr-givens, svd or eig.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// column-wrapped, row-wrapped, blocked or scattered.
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    s: Option<usize>,
    /// store-and-forward or wormhole.
    #[arg(long)]
    routing: Option<String>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    tau_f: Option<f64>,
    #[arg(long)]
    hop_delay: Option<f64>,
    #[arg(long)]
    virtual_factor: Option<usize>,
    #[arg(long)]
    omega: Option<usize>,
    /// Input family: random-uniform, identity, upper-triangular, band or hilbert.
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    band_width: Option<usize>,
    /// Seed; falls back to GRIDLA_SEED when neither flag nor config sets it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// cyclic-rows or tournament.
    #[arg(long)]
    ordering: Option<String>,
    #[arg(long)]
    extra_step_even_n: Option<bool>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    spec: SpecFlags,
    /// Report path; stdout when absent.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecFlags,
    /// JSON file holding a whole sweep (`base`, `orders`, `sides`, `holdout`).
    #[arg(long, conflicts_with = "config")]
    sweep_config: Option<PathBuf>,
    /// Comma-separated problem orders.
    #[arg(long, value_delimiter = ',')]
    orders: Vec<usize>,
    /// Comma-separated grid sides.
    #[arg(long, value_delimiter = ',')]
    sides: Vec<usize>,
    /// Held-out runs as `n:s`, predicted but not fitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    holdout: Vec<(usize, usize)>,
    /// Fit and per-run rows as JSON; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-run table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    input: PathBuf,
    /// Predict the time of these `n:s` runs from the fit.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    predict: Vec<(usize, usize)>,
}

#[derive(Args)]
struct VerifyArgs {
    report: PathBuf,
}

/// Problems with the invocation or its inputs, as opposed to runs that fail.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (n, side) = s.split_once(':').ok_or_else(|| format!("expected n:s, got {s:?}"))?;
    Ok((
        n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?,
        side.trim().parse().map_err(|e| format!("{side:?}: {e}"))?,
    ))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())).into())
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("GRIDLA_SEED") {
        Ok(v) => match v.trim().parse() {
            Ok(seed) => Ok(Some(seed)),
            Err(_) => usage(format!("GRIDLA_SEED={v:?} is not an unsigned integer")),
        },
        Err(_) => Ok(None),
    }
}

fn matrix_value(kind: &str, width: Option<usize>) -> Value {
    match width {
        Some(w) => json!({ "kind": kind, "width": w }),
        None => json!({ "kind": kind }),
    }
}

impl SpecFlags {
    /// Layer flags over the config file (if any) and deserialize, so that
    /// defaults and unknown-field rejection come from `RunSpec` itself.
    fn merge(&self, base: Value, output: Option<&str>) -> Result<RunSpec> {
        let mut obj = match base {
            Value::Object(map) => map,
            Value::Null => Map::new(),
            _ => return usage("a run spec must be a JSON object"),
        };
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                obj.insert(key.into(), v);
            }
        };
        set("algorithm", self.algorithm.clone().map(Value::from));
        set("n", self.n.map(Value::from));
        set("m", self.m.map(Value::from));
        set("layout", self.layout.clone().map(Value::from));
        set("s", self.s.map(Value::from));
        set("routing", self.routing.clone().map(Value::from));
        set("c0", self.c0.map(Value::from));
        set("c1", self.c1.map(Value::from));
        set("tau_f", self.tau_f.map(Value::from));
        set("hop_delay", self.hop_delay.map(Value::from));
        set("virtual_factor", self.virtual_factor.map(Value::from));
        set("omega", self.omega.map(Value::from));
        set("seed", self.seed.map(Value::from));
        set("output", output.map(Value::from));
        match (&self.matrix, self.band_width) {
            (Some(kind), w) => set("matrix", Some(matrix_value(kind, w))),
            (None, Some(w)) => set("matrix", Some(matrix_value("band", Some(w)))),
            (None, None) => {}
        }
        let jacobi = [
            ("tol", self.tol.map(Value::from)),
            ("max_sweeps", self.max_sweeps.map(Value::from)),
            ("ordering", self.ordering.clone().map(Value::from)),
            ("extra_step_even_n", self.extra_step_even_n.map(Value::from)),
        ];
        if jacobi.iter().any(|(_, v)| v.is_some()) {
            let entry = obj.entry("jacobi").or_insert_with(|| json!({}));
            let Value::Object(j) = entry else {
                return usage("jacobi must be a JSON object");
            };
            for (k, v) in jacobi {
                if let Some(v) = v {
                    j.insert(k.into(), v);
                }
            }
        }
        if !obj.contains_key("seed") {
            if let Some(seed) = env_seed()? {
                obj.insert("seed".into(), seed.into());
            }
        }
        let spec: RunSpec =
            serde_json::from_value(Value::Object(obj)).map_err(|e| Usage(format!("invalid run spec: {e}")))?;
        spec.validate().map_err(|e| Usage(e.to_string()))?;
        Ok(spec)
    }

    fn load(&self, output: Option<&str>) -> Result<RunSpec> {
        let base = match &self.config {
            Some(path) => read_json(path)?,
            None => Value::Null,
        };
        self.merge(base, output)
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(args: &GenArgs) -> Result<ExitCode> {
    let kind: gridla::MatrixKind = serde_json::from_value(matrix_value(&args.kind, args.width))
        .map_err(|e| Usage(format!("matrix kind: {e}")))?;
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let a = generate(kind, args.rows, args.cols.unwrap_or(args.rows), seed).map_err(|e| Usage(e.to_string()))?;
    emit(args.output.as_deref(), &format_matrix(&a))?;
    Ok(ExitCode::SUCCESS)
}

fn report_outcome(report: &Report) -> ExitCode {
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    let mut code = ExitCode::SUCCESS;
    for c in report.failed_checks() {
        eprintln!("check failed: {} = {:e} (threshold {:e})", c.name, c.value, c.threshold);
        code = ExitCode::from(1);
    }
    code
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    let spec = args.spec.load(args.output.as_deref())?;
    let report = run_bench(&spec).map_err(|e| Usage(e.to_string()))?;
    emit(spec.output.as_deref().map(Path::new), &report.to_json())?;
    Ok(report_outcome(&report))
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode> {
    let sweep_spec = match &args.sweep_config {
        Some(path) => {
            let mut v = read_json(path)?;
            let base = v.get_mut("base").map(Value::take).unwrap_or(Value::Null);
            v["base"] = serde_json::to_value(args.spec.merge(base, None)?)?;
            let mut s: SweepSpec =
                serde_json::from_value(v).map_err(|e| Usage(format!("invalid sweep spec: {e}")))?;
            if !args.orders.is_empty() {
                s.orders.clone_from(&args.orders);
            }
            if !args.sides.is_empty() {
                s.sides.clone_from(&args.sides);
            }
            if !args.holdout.is_empty() {
                s.holdout.clone_from(&args.holdout);
            }
            s
        }
        None => {
            let mut v = match &args.spec.config {
                Some(p) => read_json(p)?,
                None => json!({}),
            };
            // `n` is swept, so the base spec need not name one.
            if let (Value::Object(map), Some(&n)) = (&mut v, args.orders.first()) {
                map.entry("n").or_insert(n.into());
            }
            let base = args.spec.merge(v, None)?;
            SweepSpec {
                base,
                orders: args.orders.clone(),
                sides: args.sides.clone(),
                holdout: args.holdout.clone(),
            }
        }
    };
    if sweep_spec.orders.is_empty() || sweep_spec.sides.is_empty() {
        return usage("a sweep needs --orders and --sides");
    }
    let result = bench::sweep(&sweep_spec).map_err(|e| match e {
        gridla::Error::InvalidSpec(_) | gridla::Error::InvalidArgument(_) => Usage(e.to_string()).into(),
        e => anyhow::Error::from(e),
    })?;
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for row in &result.rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    emit(args.output.as_deref(), &text)?;
    let failed: Vec<_> = result.rows.iter().filter(|r| !r.passed).map(|r| (r.n, r.s)).collect();
    if !failed.is_empty() {
        eprintln!("runs with failed checks (n, s): {failed:?}");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(args: &FitArgs) -> Result<ExitCode> {
    let mut reader = csv::Reader::from_path(&args.input).map_err(|e| Usage(format!("{}: {e}", args.input.display())))?;
    let runs: Vec<Run> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Usage(format!("{}: {e}", args.input.display())))?;
    let fit = fit_params(&runs)?;
    let predictions: Vec<Value> = args
        .predict
        .iter()
        .map(|&(n, s)| json!({ "n": n, "s": s, "time": predict_time(&fit.params, n as f64, s as f64) }))
        .collect();
    let mut out = serde_json::to_value(&fit)?;
    if !predictions.is_empty() {
        out["predictions"] = Value::Array(predictions);
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.report).map_err(|e| Usage(format!("{}: {e}", args.report.display())))?;
    let original = Report::from_json(&text).map_err(|e| Usage(e.to_string()))?;
    let rerun = run_bench(&original.spec).map_err(|e| Usage(e.to_string()))?.to_json();
    if rerun == text {
        println!("reproduced {} bytes exactly", text.len());
        return Ok(ExitCode::SUCCESS);
    }
    let line = text.lines().zip(rerun.lines()).position(|(a, b)| a != b);
    match line {
        Some(i) => eprintln!("report differs from the re-run at line {}", i + 1),
        None => eprintln!("report differs from the re-run in length"),
    }
    Ok(ExitCode::from(1))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) if e.is::<Usage>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
