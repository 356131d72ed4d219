//! `memix`: generate traces, collect miss logs, run and sweep the simulator.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation error.

mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use memix_core::model::{bench_inference, load_weights};
use memix_core::par::Execution;
use memix_core::sim::{self, CandidateLog};
use memix_core::trace::{
    gen_synthetic, load_trace, load_trace_csv, save_trace, save_trace_csv, Workload, WorkloadParams,
};
use memix_core::{write_atomic, FutureMapStore, ModelConfig, ModelWeights, Policy, SimConfig, Trace};

use config::FileConfig;
use error::{CliError, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "memix", version, about = "Far-memory prefetching simulator")]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic full-access trace.
    Gen(GenArgs),
    /// Record the miss stream of a trace without prefetching.
    Misslog(MisslogArgs),
    /// Simulate one policy at one capacity and print a JSON report.
    Run(RunArgs),
    /// Simulate policies across capacities and print a CSV table.
    Sweep(SweepArgs),
    /// Measure per-token inference latency.
    Bench(BenchArgs),
    /// Print the shape and statistics of a weights file.
    InspectWeights(InspectArgs),
    /// Build future maps from a miss stream and print them as JSON.
    DumpFuturemaps(DumpArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// seq, stride, linked, tree or graph.
    #[arg(long)]
    workload: Workload,
    /// Footprint in pages (nodes for linked, tree and graph).
    #[arg(long)]
    pages: u64,
    /// Passes over the footprint.
    #[arg(long, default_value_t = 1)]
    iters: u32,
    #[arg(long)]
    seed: Option<u64>,
    /// First page number.
    #[arg(long, default_value_t = 0)]
    base: u64,
    /// Page stride for the stride workload.
    #[arg(long, default_value_t = 1)]
    stride: u64,
    /// Output path; a `.csv` extension writes CSV, anything else MXT1.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MisslogArgs {
    /// Full-access trace (MXT1 or .csv).
    #[arg(long)]
    trace: PathBuf,
    /// Local memory as a fraction of the footprint, in (0, 1].
    #[arg(long)]
    capacity: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Default)]
struct SimArgs {
    /// Weights file; required by the memix policy.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Local access cost in ns.
    #[arg(long)]
    t_local: Option<u64>,
    /// Far fetch cost in ns.
    #[arg(long)]
    t_far: Option<u64>,
    /// Inference cost per miss in ns (memix only).
    #[arg(long)]
    t_inf: Option<u64>,
    /// Outstanding prefetch limit.
    #[arg(long)]
    max_inflight: Option<usize>,
    /// Ordinals considered per miss (memix).
    #[arg(long)]
    top_n: Option<usize>,
    /// Probability threshold for prefetching (memix); 1.0 disables it.
    #[arg(long)]
    min_prob: Option<f32>,
    /// Speculative chain length (memix).
    #[arg(long)]
    depth: Option<usize>,
    /// Miss-history length kept by the predictor.
    #[arg(long)]
    history: Option<usize>,
    /// Pages fetched per sequential trigger (readahead).
    #[arg(long)]
    readahead_window: Option<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    trace: PathBuf,
    /// none, readahead, stride, leap, memix or oracle.
    #[arg(long)]
    policy: Option<Policy>,
    #[arg(long)]
    capacity: Option<f64>,
    #[command(flatten)]
    sim: SimArgs,
    /// Report path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write issued prefetches as `miss_vpn,candidate_vpn,prob` CSV.
    #[arg(long)]
    candidates_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Comma-separated capacity fractions.
    #[arg(long, value_delimiter = ',')]
    capacities: Vec<f64>,
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',')]
    policies: Vec<Policy>,
    #[command(flatten)]
    sim: SimArgs,
    /// Worker threads; 1 runs sequentially. Defaults to MEMIX_SIM_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// CSV path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Weights file; seeded random default-shape weights if omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Measured tokens.
    #[arg(long, default_value_t = 10_000)]
    tokens: usize,
    /// Unmeasured warm-up tokens.
    #[arg(long, default_value_t = 1_000)]
    warmup: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    path: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct DumpArgs {
    /// A miss log, or a full-access trace whose misses are derived at `--capacity`.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    capacity: Option<f64>,
    /// Slots per map.
    #[arg(long, default_value_t = memix_core::DEFAULT_VOCAB)]
    vocab: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("memix: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Gen(a) => cmd_gen(a, &file),
        Command::Misslog(a) => cmd_misslog(a, &file),
        Command::Run(a) => cmd_run(a, &file),
        Command::Sweep(a) => cmd_sweep(a, &file),
        Command::Bench(a) => cmd_bench(a, &file),
        Command::InspectWeights(a) => cmd_inspect(a),
        Command::DumpFuturemaps(a) => cmd_dump(a, &file),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_trace(path: &Path) -> Result<Trace, CliError> {
    let t = if is_csv(path) { load_trace_csv(path) } else { load_trace(path) };
    t.map_err(|e| CliError::from(e).context(path.display()))
}

fn write_trace(trace: &Trace, path: &Path) -> Result<(), CliError> {
    let r = if is_csv(path) { save_trace_csv(trace, path) } else { save_trace(trace, path) };
    r.map_err(|e| CliError::from(e).context(path.display()))
}

fn read_weights(path: &Path) -> Result<Arc<ModelWeights>, CliError> {
    load_weights(path).map(Arc::new).map_err(|e| CliError::from(e).context(path.display()))
}

/// Writes to `out` atomically, or to stdout.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, bytes).map_err(|e| CliError::io(e).context(path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(bytes).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn parse_policies(names: &[String]) -> Result<Vec<Policy>, CliError> {
    names.iter().map(|n| n.parse().map_err(CliError::invalid)).collect()
}

fn capacity(flag: Option<f64>, file: &FileConfig) -> Result<f64, CliError> {
    flag.or(file.capacity).ok_or_else(|| CliError::usage("--capacity is required (flag or config file)"))
}

fn sim_config(args: &SimArgs, file: &FileConfig, policy: Policy, capacity_fraction: f64) -> SimConfig {
    let d = SimConfig::default();
    let (t, p) = (&file.timing, &file.predictor);
    SimConfig {
        capacity_fraction,
        t_local_ns: args.t_local.or(t.t_local_ns).unwrap_or(d.t_local_ns),
        t_far_ns: args.t_far.or(t.t_far_ns).unwrap_or(d.t_far_ns),
        t_inf_ns: args.t_inf.or(t.t_inf_ns).unwrap_or(d.t_inf_ns),
        max_inflight_prefetch: args.max_inflight.or(t.max_inflight).unwrap_or(d.max_inflight_prefetch),
        policy,
        predictor: memix_core::PredictorConfig {
            history: args.history.or(p.history).unwrap_or(d.predictor.history),
            top_n: args.top_n.or(p.top_n).unwrap_or(d.predictor.top_n),
            min_prob: args.min_prob.or(p.min_prob).unwrap_or(d.predictor.min_prob),
            depth: args.depth.or(p.depth).unwrap_or(d.predictor.depth),
        },
        readahead_window: args.readahead_window.or(file.readahead_window).unwrap_or(d.readahead_window),
        futuremap_capacity: d.futuremap_capacity,
    }
}

/// Loads weights if memix is among `policies`, failing before any work if
/// no path was given.
fn weights_for(policies: &[Policy], args: &SimArgs, file: &FileConfig) -> Result<Option<Arc<ModelWeights>>, CliError> {
    if !policies.contains(&Policy::Memix) {
        return Ok(None);
    }
    let path = args
        .weights
        .as_ref()
        .or(file.weights.as_ref())
        .ok_or_else(|| CliError::invalid("policy memix requires --weights"))?;
    read_weights(path).map(Some)
}

fn cmd_gen(a: GenArgs, file: &FileConfig) -> Result<(), CliError> {
    let params = WorkloadParams::new(a.pages, a.iters).with_base(a.base).with_stride(a.stride);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let trace = gen_synthetic(a.workload, params, seed)?;
    write_trace(&trace, &a.out)
}

fn cmd_misslog(a: MisslogArgs, file: &FileConfig) -> Result<(), CliError> {
    let cf = capacity(a.capacity, file)?;
    let trace = read_trace(&a.trace)?;
    let cfg = SimConfig { capacity_fraction: cf, ..SimConfig::default() };
    let log = sim::collect_miss_log(&trace, &cfg)?;
    write_trace(&log, &a.out)
}

fn cmd_run(a: RunArgs, file: &FileConfig) -> Result<(), CliError> {
    let policy = match a.policy {
        Some(p) => p,
        None => match &file.policy {
            Some(name) => name.parse().map_err(CliError::invalid)?,
            None => Policy::None,
        },
    };
    let cfg = sim_config(&a.sim, file, policy, capacity(a.capacity, file)?);
    cfg.validate()?;
    let weights = weights_for(&[policy], &a.sim, file)?;
    let trace = read_trace(&a.trace)?;

    let mut log = CandidateLog::default();
    let mut report = sim::simulate(&trace, &cfg, weights.as_ref(), &mut log)?;
    let baseline = sim::run(&trace, &cfg.with_policy(Policy::None), None)?;
    report.baseline_misses = baseline.misses;
    report.coverage = if baseline.misses == 0 { 0.0 } else { 1.0 - report.misses as f64 / baseline.misses as f64 };
    if let Some(path) = &a.candidates_out {
        emit(Some(path), log.to_csv().as_bytes())?;
    }
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    emit(a.out.as_deref(), &json)
}

fn cmd_sweep(a: SweepArgs, file: &FileConfig) -> Result<(), CliError> {
    let capacities = if a.capacities.is_empty() {
        file.capacities.clone().unwrap_or_else(|| vec![0.3, 0.5, 0.7, 0.9])
    } else {
        a.capacities.clone()
    };
    let policies = if a.policies.is_empty() {
        match &file.policies {
            Some(names) => parse_policies(names)?,
            None => vec![Policy::None, Policy::Readahead],
        }
    } else {
        a.policies.clone()
    };
    let base = sim_config(&a.sim, file, Policy::None, 1.0);
    base.validate()?;
    for &c in &capacities {
        base.with_capacity(c).validate()?;
    }
    let weights = weights_for(&policies, &a.sim, file)?;
    let exec = match a.threads.or(file.threads) {
        Some(n) => Execution::from_threads(n),
        None => Execution::from_env(),
    };
    let trace = read_trace(&a.trace)?;
    let rows = sim::sweep(&trace, &capacities, &policies, &base, weights.as_ref(), exec)?;
    let mut buf = Vec::new();
    sim::write_sweep_csv(&rows, &mut buf).map_err(CliError::io)?;
    emit(a.out.as_deref(), &buf)
}

fn cmd_bench(a: BenchArgs, file: &FileConfig) -> Result<(), CliError> {
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let weights = match a.weights.as_ref().or(file.weights.as_ref()) {
        Some(path) => read_weights(path)?,
        None => Arc::new(ModelWeights::random(ModelConfig::default(), seed, 0.3)?),
    };
    if a.tokens == 0 {
        return Err(CliError::invalid("--tokens must be positive"));
    }
    let k = weights.config.vocab;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream: Vec<(usize, usize)> =
        (0..a.warmup + a.tokens).map(|_| (rng.random_range(0..k), rng.random_range(0..k))).collect();
    let b = bench_inference(&weights, &stream, a.warmup)?;
    let c = &weights.config;
    let out = json!({
        "vocab": c.vocab,
        "hidden": c.hidden,
        "layers": c.layers,
        "parameters": weights.param_count(),
        "tokens": a.tokens,
        "warmup": a.warmup,
        "mean_ns": b.mean_ns(),
        "p50_ns": b.percentile_ns(50.0),
        "p99_ns": b.p99_ns(),
        "max_ns": b.percentile_ns(100.0),
    });
    let mut text = serde_json::to_vec_pretty(&out)?;
    text.push(b'\n');
    emit(a.out.as_deref(), &text)
}

const TENSOR_NAMES: [&str; 6] = ["w_q", "w_k", "w_v", "w_o", "ffn_up", "ffn_down"];

fn cmd_inspect(a: InspectArgs) -> Result<(), CliError> {
    let w = read_weights(&a.path)?;
    let mut names = vec!["embed_addr".to_string(), "embed_pc".to_string()];
    for l in 0..w.config.layers {
        names.extend(TENSOR_NAMES.iter().map(|t| format!("layer{l}.{t}")));
    }
    names.push("head".into());
    let tensors: Vec<_> = names
        .iter()
        .zip(w.tensors())
        .map(|(name, t)| {
            let min = t.iter().copied().fold(f32::INFINITY, f32::min);
            let max = t.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let rms = (t.iter().map(|x| (*x as f64).powi(2)).sum::<f64>() / t.len().max(1) as f64).sqrt();
            json!({ "name": name, "len": t.len(), "min": min, "max": max, "rms": rms })
        })
        .collect();
    let c = &w.config;
    let text = if a.json {
        let v = json!({
            "vocab": c.vocab,
            "hidden": c.hidden,
            "layers": c.layers,
            "ffn_mult": c.ffn_mult,
            "decay": c.decay,
            "parameters": w.param_count(),
            "tensors": tensors,
        });
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        s
    } else {
        let mut s = format!(
            "vocab {}  hidden {}  layers {}  ffn_mult {}\nparameters {}\ndecay {:?}\n",
            c.vocab,
            c.hidden,
            c.layers,
            c.ffn_mult,
            w.param_count(),
            c.decay
        );
        for t in &tensors {
            s.push_str(&format!(
                "{:<16} {:>6}  min {:>9.4}  max {:>9.4}  rms {:>8.4}\n",
                t["name"].as_str().unwrap_or(""),
                t["len"],
                t["min"].as_f64().unwrap_or(f64::NAN),
                t["max"].as_f64().unwrap_or(f64::NAN),
                t["rms"].as_f64().unwrap_or(f64::NAN),
            ));
        }
        s
    };
    emit(None, text.as_bytes())
}

fn cmd_dump(a: DumpArgs, file: &FileConfig) -> Result<(), CliError> {
    if a.vocab < 2 {
        return Err(CliError::invalid("--vocab must be at least 2"));
    }
    let trace = read_trace(&a.trace)?;
    let misses = match trace.kind {
        memix_core::TraceKind::MissLog { .. } => trace,
        memix_core::TraceKind::FullAccess => {
            let cfg = SimConfig { capacity_fraction: capacity(a.capacity, file)?, ..SimConfig::default() };
            sim::collect_miss_log(&trace, &cfg)?
        }
    };
    let mut store = FutureMapStore::with_vocab(a.vocab);
    for w in misses.events.windows(2) {
        store.observe_transition(w[0].vpn, w[1].vpn);
    }
    let mut text = store.dump_json();
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())
}
