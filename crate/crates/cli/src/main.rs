mod model_file;
mod models;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use extorder::angular::{default_k, estimate_support, polarize, AacConfig};
use extorder::bench::{
    parse_pair_manifest, run_benchmark, run_pair_benchmark, write_pair_table, write_table,
    BenchConfig, PairBenchConfig,
};
use extorder::discovery::{pairwise_direction, score_matrix_from_data};
use extorder::graph::{ancestral_violation_rate, Dag};
use extorder::io::{load_csv, save_csv, write_csv};
use extorder::margins::{orientations, pareto_transform, Sample, TailIndex};
use extorder::{ease_order, Error, Result};

use crate::models::SimModel;

/// Exit status when a benchmark finished with failed replications or pairs.
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "extorder", version, about = "Causal order discovery from joint extremes")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Suppress diagnostics on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank-transform every column to standard Pareto margins.
    Transform {
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long = "in")]
        input: PathBuf,
        /// Output CSV (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Angular support interval and asymmetry coefficient of one column pair.
    Aac {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Write the polar (w, r) series as CSV.
        #[arg(long)]
        dump_polar: Option<PathBuf>,
    },
    /// Causal order of all columns by extremal ancestral search.
    Order {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Write the score matrix as CSV.
        #[arg(long)]
        scores_out: Option<PathBuf>,
        /// True DAG; the ancestral violation rate is reported on stderr.
        #[arg(long)]
        dag_file: Option<PathBuf>,
    },
    /// Pairwise causal direction decision.
    Pairdir {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Scores inside [-threshold, threshold] give NO_DECISION.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        /// Report all four sign-flip orientations.
        #[arg(long)]
        orientations: bool,
    },
    /// Generate data from one of the built-in models.
    Simulate(SimulateArgs),
    /// Replication benchmark (--config) or cause-effect pair benchmark (--pairs).
    Bench {
        #[arg(long, required_unless_present = "pairs", conflicts_with = "pairs")]
        config: Option<PathBuf>,
        /// Manifest of `path label weight` lines.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Penalty weight for the pair benchmark.
        #[arg(long, default_value_t = 1.0, requires = "pairs")]
        lambda: f64,
        /// Output table (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PairArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Two 1-based column indices, `i,j`.
    #[arg(long, value_parser = parse_cols)]
    cols: (usize, usize),
}

#[derive(Args)]
struct EstimatorArgs {
    /// Number of extreme points (default: round(1.5 sqrt(n))).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Target tail index of the marginal transform.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Use the data as given, without the marginal transform.
    #[arg(long)]
    no_transform: bool,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    model: SimModel,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Tail index of the Pareto innovations.
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    avg_degree: Option<f64>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the generating DAG in text form.
    #[arg(long)]
    emit_dag: Option<PathBuf>,
    /// Model file with `key = value` and `edge u v coeff` lines.
    #[arg(long)]
    spec: Option<PathBuf>,
}

fn parse_cols(s: &str) -> std::result::Result<(usize, usize), String> {
    let (i, j) = s.split_once(',').ok_or("expected two indices as i,j")?;
    let i: usize = i.trim().parse().map_err(|_| format!("bad column index {i:?}"))?;
    let j: usize = j.trim().parse().map_err(|_| format!("bad column index {j:?}"))?;
    if i == 0 || j == 0 || i == j {
        return Err("column indices are 1-based and must differ".into());
    }
    Ok((i, j))
}

impl EstimatorArgs {
    fn config(&self, n: usize) -> Result<AacConfig> {
        Ok(AacConfig::new(self.k.unwrap_or_else(|| default_k(n)), self.lambda)?
            .with_gamma(self.gamma)?
            .with_alpha(TailIndex::new(self.alpha)?))
    }

    fn prepare(&self, sample: Sample, quiet: bool) -> Result<Sample> {
        if self.no_transform {
            return Ok(sample);
        }
        let t = pareto_transform(&sample, TailIndex::new(self.alpha)?)?;
        warn_degenerate(&t.degenerate_columns, &sample, quiet);
        Ok(t.sample)
    }
}

fn warn_degenerate(cols: &[usize], sample: &Sample, quiet: bool) {
    if quiet {
        return;
    }
    let names = sample.names_or_default();
    for &j in cols {
        eprintln!("warning: column {} is constant", names[j]);
    }
}

fn select(sample: &Sample, (i, j): (usize, usize)) -> Result<Sample> {
    if i > sample.ncols() || j > sample.ncols() {
        return Err(Error::Param(format!(
            "column index out of range for {} columns",
            sample.ncols()
        )));
    }
    sample.select_pair(i - 1, j - 1)
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut buf = Vec::new();
            f(&mut buf)?;
            fs::write(p, buf)?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let quiet = cli.quiet;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Param("workers must be at least 1".into()));
        }
        // fails only if a pool was already set up
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match cli.command {
        Command::Transform { alpha, input, out } => {
            let sample = load_csv(&input)?;
            let t = pareto_transform(&sample, TailIndex::new(alpha)?)?;
            warn_degenerate(&t.degenerate_columns, &sample, quiet);
            match out {
                Some(p) => save_csv(&t.sample, p)?,
                None => write_csv(&t.sample, io::stdout().lock())?,
            }
        }
        Command::Aac { pair, est, dump_polar } => {
            let sample = select(&load_csv(&pair.input)?, pair.cols)?;
            let data = est.prepare(sample, quiet)?;
            let cfg = est.config(data.nrows())?;
            let series = polarize(&data)?;
            if let Some(p) = dump_polar {
                fs::write(p, series.to_csv())?;
            }
            let sup = estimate_support(&series, &cfg)?;
            if !quiet && !sup.report.converged {
                eprintln!("warning: simplex search hit the iteration cap");
            }
            println!("a_hat\tb_hat\ttau\tobjective\tconverged");
            println!(
                "{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
                sup.a_hat, sup.b_hat, sup.tau, sup.objective_value, sup.report.converged
            );
        }
        Command::Order {
            input,
            est,
            scores_out,
            dag_file,
        } => {
            let sample = load_csv(&input)?;
            let names = sample.names_or_default();
            let cfg = est.config(sample.nrows())?;
            let scores = score_matrix_from_data(&sample, &cfg, !est.no_transform)?;
            if !est.no_transform && !quiet {
                let t = pareto_transform(&sample, cfg.alpha)?;
                warn_degenerate(&t.degenerate_columns, &sample, quiet);
            }
            if let Some(p) = scores_out {
                fs::write(p, scores.to_csv(&names))?;
            }
            let order = ease_order(&scores)?;
            let mut out = io::stdout().lock();
            for v in order.sequence() {
                writeln!(out, "{}\t{}", names[v - 1], order.rank(v))?;
            }
            if let Some(p) = dag_file {
                let dag = Dag::parse_text(&fs::read_to_string(p)?)?;
                let rate = ancestral_violation_rate(&dag, &order)?;
                if !quiet {
                    eprintln!(
                        "ancestral violation rate {:.4} ({} of {} ancestral pairs)",
                        rate.rate, rate.violated, rate.ancestral_pairs
                    );
                }
            }
        }
        Command::Pairdir {
            pair,
            est,
            threshold,
            orientations: all,
        } => {
            let sample = select(&load_csv(&pair.input)?, pair.cols)?;
            let cfg = est.config(sample.nrows())?;
            let variants = orientations(&sample)?;
            let take = if all { 4 } else { 1 };
            println!("orientation\ttau\tdecision");
            for (o, oriented) in variants.into_iter().take(take) {
                let data = est.prepare(oriented, quiet)?;
                let pair = extorder::aac_pair(&data.column(0), &data.column(1), &cfg)?;
                let dir = pairwise_direction(pair.tau_uv, threshold)?;
                println!("{}\t{:.6}\t{}", o.label(), pair.tau_uv, dir.label());
            }
        }
        Command::Simulate(args) => {
            let out = models::simulate(&args, cli.seed.unwrap_or(0))?;
            if let Some(p) = &args.emit_dag {
                let dag = out.dag.as_ref().ok_or_else(|| {
                    Error::Param("so2pair has no DAG to emit".into())
                })?;
                fs::write(p, dag.to_text())?;
            }
            emit(args.out.as_deref(), |w| write_csv(&out.sample, w))?;
        }
        Command::Bench {
            config,
            pairs,
            lambda,
            out,
        } => {
            if let Some(manifest) = pairs {
                let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
                let cases = parse_pair_manifest(&fs::read_to_string(&manifest)?, &base)?;
                let cfg = PairBenchConfig {
                    lambda,
                    ..Default::default()
                };
                let result = run_pair_benchmark(&cases, &cfg)?;
                if !quiet {
                    for o in &result.outcomes {
                        if let Err(e) = &o.decisions {
                            eprintln!("pair {} failed: {e}", o.path.display());
                        }
                    }
                    if result.partial() {
                        eprintln!(
                            "weights renormalized over {} of {} pairs",
                            result.pairs_used,
                            result.outcomes.len()
                        );
                    }
                }
                emit(out.as_deref(), |w| write_pair_table(&result, w))?;
                return Ok(if result.partial() { EXIT_PARTIAL } else { 0 });
            }
            let path = config.expect("clap requires --config without --pairs");
            let mut cfg = BenchConfig::parse(&fs::read_to_string(path)?)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(w) = cli.workers {
                cfg.workers = w;
            }
            let result = run_benchmark(&cfg)?;
            emit(out.as_deref(), |w| write_table(&result, w))?;
            if !quiet {
                for line in result.provenance().lines() {
                    eprintln!("# {line}");
                }
                eprintln!("# elapsed {:.2}s", result.elapsed.as_secs_f64());
                if result.edgeless_reps() > 0 {
                    eprintln!("# {} reps drew a DAG without ancestral pairs", result.edgeless_reps());
                }
                for (rep, seed, err) in result.failures() {
                    eprintln!("rep {rep} (seed {seed}) failed: {err}");
                }
            }
            return Ok(if result.partial() { EXIT_PARTIAL } else { 0 });
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
