use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use interank_core::harness::{
    export_results, generate, result_rows, run_grid, ExportFormat, GridResults, PoolData, SynthConfig,
};
use interank_core::ingest::{load_gold, load_pool, load_priors, save_pool, save_scores, PoolFormat};
use interank_core::{Learner, SessionConfig, Strategy, WarmStart};
use interank_service::AppState;

#[derive(Parser)]
#[command(name = "interank", version, about = "Interactive preference ranking with simulated or human users")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulated session and export its metric trace.
    Run(RunArgs),
    /// Run every config of a JSONL file on every pool.
    Grid(GridArgs),
    /// Write a synthetic pool with gold scores (and optionally priors).
    Synth(SynthArgs),
    /// Serve the HTTP API for live sessions.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    priors: Option<PathBuf>,
    #[arg(long, default_value = "gppl")]
    learner: Learner,
    #[arg(long, default_value = "eig")]
    strategy: Strategy,
    #[arg(long, default_value = "none")]
    warm_start: WarmStart,
    #[arg(long, default_value_t = 10)]
    interactions: usize,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oracle temperature.
    #[arg(long, default_value_t = 0.3)]
    t: f64,
    /// L2 weight of the BT learner.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Inducing points for the GPPL learner; dense inference when absent.
    #[arg(long)]
    inducing: Option<usize>,
    /// Cut-off of the NDCG column.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Trace file; the format follows the extension (.csv, otherwise JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Also write the final scores as `{"id", "score"}` lines.
    #[arg(long)]
    ranking: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// JSONL file with one session config per line.
    #[arg(long)]
    config: PathBuf,
    /// Pool files; repeat for several pools.
    #[arg(long, required = true)]
    pool: Vec<PathBuf>,
    /// Gold files, one per pool, in the same order.
    #[arg(long, required = true)]
    gold: Vec<PathBuf>,
    /// Prior files, one per pool, in the same order.
    #[arg(long)]
    priors: Vec<PathBuf>,
    /// Repeats of stochastic strategies.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long)]
    out: PathBuf,
    /// Per-config summary, JSONL.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the gold noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Also emit priors correlated with the gold utility at this level.
    #[arg(long)]
    prior_correlation: Option<f64>,
    /// Output prefix; writes `<prefix>.pool.jsonl` and `<prefix>.gold.jsonl`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for session event logs; existing logs are replayed on start.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// Pools clients may refer to by topic id; repeatable.
    #[arg(long)]
    pool: Vec<PathBuf>,
}

fn format_for(path: &Path) -> ExportFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => ExportFormat::Csv,
        _ => ExportFormat::Jsonl,
    }
}

fn load_pool_data(pool: &Path, gold: &Path, priors: Option<&Path>) -> Result<PoolData> {
    let p = load_pool(pool, PoolFormat::Jsonl).with_context(|| format!("loading pool {}", pool.display()))?;
    let g = load_gold(gold, &p).with_context(|| format!("loading gold scores {}", gold.display()))?;
    let mu = match priors {
        Some(path) => Some(load_priors(path, &p).with_context(|| format!("loading priors {}", path.display()))?),
        None => None,
    };
    Ok(PoolData {
        pool: Arc::new(p),
        gold: g,
        priors: mu,
    })
}

fn first_failure(results: &GridResults) -> Option<String> {
    results.runs.iter().find_map(|r| {
        r.error.as_ref().map(|e| {
            format!(
                "config {} on {} (repeat {}): {e}",
                r.config_index, results.topics[r.pool_index], r.repeat
            )
        })
    })
}

fn run(args: RunArgs) -> Result<()> {
    let data = load_pool_data(&args.pool, &args.gold, args.priors.as_deref())?;
    let mut cfg = SessionConfig::new(args.learner, args.strategy, args.warm_start, args.interactions, args.seed);
    cfg.batch_size = args.batch_size;
    cfg.oracle.t = args.t;
    cfg.bt_lambda = args.lambda;
    cfg.inducing_count = args.inducing;
    cfg.ndcg_k = args.k;
    cfg.validate()?;
    let results = run_grid(&[cfg], &[data], 1)?;
    if let Some(msg) = first_failure(&results) {
        bail!("session failed: {msg}");
    }
    let result = results.runs[0].result.as_ref().expect("successful run has a result");
    export_results(&result_rows(&results), &args.out, format_for(&args.out))?;
    if let Some(path) = &args.ranking {
        save_scores(&result.final_utilities, path)?;
    }
    let last = result.final_row();
    println!(
        "labels={} accuracy={} ndcg@{}={:.4} pearson_r={:.4}",
        last.labels, last.accuracy, args.k, last.ndcg_at_k, last.pearson_r
    );
    Ok(())
}

fn read_configs(path: &Path) -> Result<Vec<SessionConfig>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut configs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cfg: SessionConfig =
            serde_json::from_str(line).with_context(|| format!("{}:{}: invalid session config", path.display(), i + 1))?;
        cfg.validate()
            .with_context(|| format!("{}:{}: invalid session config", path.display(), i + 1))?;
        configs.push(cfg);
    }
    if configs.is_empty() {
        bail!("{} contains no configs", path.display());
    }
    Ok(configs)
}

fn grid(args: GridArgs) -> Result<()> {
    if args.pool.len() != args.gold.len() {
        bail!("{} pools but {} gold files", args.pool.len(), args.gold.len());
    }
    if !args.priors.is_empty() && args.priors.len() != args.pool.len() {
        bail!("{} pools but {} prior files", args.pool.len(), args.priors.len());
    }
    let configs = read_configs(&args.config)?;
    let pools = (0..args.pool.len())
        .map(|i| load_pool_data(&args.pool[i], &args.gold[i], args.priors.get(i).map(PathBuf::as_path)))
        .collect::<Result<Vec<_>>>()?;
    let results = run_grid(&configs, &pools, args.repeats)?;
    export_results(&result_rows(&results), &args.out, format_for(&args.out))?;
    if let Some(path) = &args.summary {
        let mut text = String::new();
        for row in &results.summary {
            text.push_str(&serde_json::to_string(row)?);
            text.push('\n');
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "config\tlearner\tstrategy\twarm_start\tbudget\truns\tfailures\taccuracy\tndcg\tpearson_r")?;
    for s in &results.summary {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.4}±{:.4}\t{:.4}±{:.4}\t{:.4}±{:.4}",
            s.config_index,
            s.learner,
            s.strategy,
            s.warm_start,
            s.max_interactions,
            s.runs,
            s.failures,
            s.accuracy.mean,
            s.accuracy.stdev,
            s.ndcg_at_k.mean,
            s.ndcg_at_k.stdev,
            s.pearson_r.mean,
            s.pearson_r.stdev
        )?;
    }
    if let Some(msg) = first_failure(&results) {
        eprintln!("warning: some sessions failed; first: {msg}");
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut sc = SynthConfig::new(args.n, args.d, args.seed);
    if let Some(noise) = args.noise {
        sc.noise = noise;
    }
    sc.prior_correlation = args.prior_correlation;
    let data = generate(&sc)?;
    let prefix = args.out.unwrap_or_else(|| PathBuf::from(format!("synth-{}", args.seed)));
    let pool_path = with_suffix(&prefix, ".pool.jsonl");
    let gold_path = with_suffix(&prefix, ".gold.jsonl");
    save_pool(&data.pool, &pool_path)?;
    save_scores(&data.gold.scores, &gold_path)?;
    println!("{}", pool_path.display());
    println!("{}", gold_path.display());
    if let Some(priors) = &data.priors {
        let path = with_suffix(&prefix, ".priors.jsonl");
        save_scores(&priors.mu, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let state = match &args.log_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            AppState::restore(dir).context("replaying session logs")?
        }
        None => AppState::new(),
    };
    for path in &args.pool {
        let pool = load_pool(path, PoolFormat::Jsonl).with_context(|| format!("loading pool {}", path.display()))?;
        eprintln!("pool {} ({} candidates)", pool.topic_id, pool.len());
        state.register_pool(pool.topic_id.clone(), pool);
    }
    let restored = state.session_ids().len();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        println!("listening on http://{}", listener.local_addr()?);
        if restored > 0 {
            println!("restored {restored} sessions");
        }
        std::io::stdout().flush()?;
        interank_service::serve(listener, state).await?;
        Ok(())
    })
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    let mut last = msg.clone();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !last.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        last = text;
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Grid(a) => grid(a),
        Command::Synth(a) => synth(a),
        Command::Serve(a) => serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
