//! Seeded replication runner for ancestral-violation benchmarks and the
//! weighted cause-effect pair benchmark.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::angular::{aac_pair, AacConfig};
use crate::discovery::{ease_order, pairwise_direction, score_matrices_for_ks, Direction};
use crate::error::{Error, Result};
use crate::graph::{ancestral_violation_rate, random_dag, ViolationRate};
use crate::io::load_csv;
use crate::margins::{orientations, pareto_transform, Orientation, TailIndex};
use crate::seeding::{derive_seed, rng_for};
use crate::simulate::{simulate_scm, CoeffLaw, ScmModel, ScmSpec};

/// Coefficient bounds of the benchmark SCMs.
pub const COEFF_LO: f64 = 0.04;
pub const COEFF_HI: f64 = 0.4;
/// Probability the lognormal coefficient law puts on `[COEFF_LO, COEFF_HI]`.
pub const COEFF_COVERAGE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchModel {
    Sl0,
    Sl1,
    Ml0,
    Ml1,
}

impl BenchModel {
    pub fn label(self) -> &'static str {
        match self {
            BenchModel::Sl0 => "sl0",
            BenchModel::Sl1 => "sl1",
            BenchModel::Ml0 => "ml0",
            BenchModel::Ml1 => "ml1",
        }
    }

    pub fn scm_model(self) -> ScmModel {
        match self {
            BenchModel::Sl0 | BenchModel::Sl1 => ScmModel::SumLinear,
            BenchModel::Ml0 | BenchModel::Ml1 => ScmModel::MaxLinear,
        }
    }

    /// Uniform coefficients for the `*0` models, matched lognormal for `*1`.
    pub fn coeff_law(self) -> Result<CoeffLaw> {
        match self {
            BenchModel::Sl0 | BenchModel::Ml0 => CoeffLaw::uniform(COEFF_LO, COEFF_HI),
            BenchModel::Sl1 | BenchModel::Ml1 => {
                CoeffLaw::lognormal_matched(COEFF_LO, COEFF_HI, COEFF_COVERAGE)
            }
        }
    }
}

impl FromStr for BenchModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sl0" => Ok(BenchModel::Sl0),
            "sl1" => Ok(BenchModel::Sl1),
            "ml0" => Ok(BenchModel::Ml0),
            "ml1" => Ok(BenchModel::Ml1),
            _ => Err(Error::param(format!(
                "unknown benchmark model {s:?} (expected sl0, sl1, ml0 or ml1)"
            ))),
        }
    }
}

/// Whether edge coefficients are redrawn for every row or once per dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffDraw {
    Row,
    Dataset,
}

impl CoeffDraw {
    pub fn label(self) -> &'static str {
        match self {
            CoeffDraw::Row => "row",
            CoeffDraw::Dataset => "dataset",
        }
    }
}

impl FromStr for CoeffDraw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "row" => Ok(CoeffDraw::Row),
            "dataset" => Ok(CoeffDraw::Dataset),
            _ => Err(Error::param(format!("coefficient draw must be row or dataset, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub model: BenchModel,
    pub d: usize,
    pub n: usize,
    pub reps: usize,
    pub k_list: Vec<usize>,
    pub lambda: f64,
    pub gamma: f64,
    /// Target tail index of the marginal transform.
    pub alpha: f64,
    /// Tail index of the Pareto innovations.
    pub alpha0: f64,
    pub avg_degree: f64,
    pub coeff_draw: CoeffDraw,
    pub seed: u64,
    pub transform: bool,
    pub workers: usize,
}

/// `round(c √n)` for `c ∈ {0.5, 1.5, 2.5}`, each at least 2.
pub fn sqrt_n_sweep(n: usize) -> Vec<usize> {
    let r = (n as f64).sqrt();
    let mut ks: Vec<usize> = [0.5, 1.5, 2.5]
        .iter()
        .map(|c| ((c * r).round() as usize).max(2))
        .collect();
    ks.dedup();
    ks
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            model: BenchModel::Sl0,
            d: 5,
            n: 1000,
            reps: 100,
            k_list: sqrt_n_sweep(1000),
            lambda: 2.0,
            gamma: 0.5,
            alpha: 2.0,
            alpha0: 3.0,
            avg_degree: 3.0,
            coeff_draw: CoeffDraw::Row,
            seed: 0,
            transform: true,
            workers: 1,
        }
    }
}

const KEYS: [&str; 14] = [
    "model",
    "d",
    "n",
    "reps",
    "k_list",
    "lambda",
    "gamma",
    "alpha",
    "alpha0",
    "avg_degree",
    "coeff_draw",
    "seed",
    "transform",
    "workers",
];

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("invalid value {value:?} for {key}"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config {
            line,
            message: format!("invalid boolean {value:?} for {key}"),
        }),
    }
}

impl BenchConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment;
    /// unknown or repeated keys are errors. `k_list` is comma-separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key {key:?}"),
                });
            }
            if seen.contains(&key) {
                return Err(Error::Config {
                    line,
                    message: format!("key {key:?} given twice"),
                });
            }
            seen.push(key);
            match key {
                "model" => {
                    cfg.model = value.parse().map_err(|e: Error| Error::Config {
                        line,
                        message: e.to_string(),
                    })?
                }
                "coeff_draw" => {
                    cfg.coeff_draw = value.parse().map_err(|e: Error| Error::Config {
                        line,
                        message: e.to_string(),
                    })?
                }
                "d" => cfg.d = parse_value(line, key, value)?,
                "n" => cfg.n = parse_value(line, key, value)?,
                "reps" => cfg.reps = parse_value(line, key, value)?,
                "k_list" => {
                    cfg.k_list = value
                        .split(',')
                        .map(|k| parse_value(line, key, k.trim()))
                        .collect::<Result<_>>()?
                }
                "lambda" => cfg.lambda = parse_value(line, key, value)?,
                "gamma" => cfg.gamma = parse_value(line, key, value)?,
                "alpha" => cfg.alpha = parse_value(line, key, value)?,
                "alpha0" => cfg.alpha0 = parse_value(line, key, value)?,
                "avg_degree" => cfg.avg_degree = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "transform" => cfg.transform = parse_bool(line, key, value)?,
                "workers" => cfg.workers = parse_value(line, key, value)?,
                _ => unreachable!(),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every field as `key = value`, parseable by [`BenchConfig::parse`].
    pub fn to_text(&self) -> String {
        let ks: Vec<String> = self.k_list.iter().map(usize::to_string).collect();
        let mut out = String::new();
        let _ = writeln!(out, "model = {}", self.model.label());
        let _ = writeln!(out, "d = {}", self.d);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "reps = {}", self.reps);
        let _ = writeln!(out, "k_list = {}", ks.join(","));
        let _ = writeln!(out, "lambda = {:?}", self.lambda);
        let _ = writeln!(out, "gamma = {:?}", self.gamma);
        let _ = writeln!(out, "alpha = {:?}", self.alpha);
        let _ = writeln!(out, "alpha0 = {:?}", self.alpha0);
        let _ = writeln!(out, "avg_degree = {:?}", self.avg_degree);
        let _ = writeln!(out, "coeff_draw = {}", self.coeff_draw.label());
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "transform = {}", self.transform);
        let _ = writeln!(out, "workers = {}", self.workers);
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::param("reps must be at least 1"));
        }
        if self.d < 2 {
            return Err(Error::param(format!("d must be at least 2, got {}", self.d)));
        }
        if self.workers == 0 {
            return Err(Error::param("workers must be at least 1"));
        }
        if self.k_list.is_empty() {
            return Err(Error::param("k_list is empty"));
        }
        if let Some(k) = self.k_list.iter().find(|&&k| k < 2 || k > self.n) {
            return Err(Error::param(format!("k = {k} must satisfy 2 <= k <= n = {}", self.n)));
        }
        if !(self.avg_degree > 0.0 && self.avg_degree <= (self.d - 1) as f64) {
            return Err(Error::param(format!(
                "avg_degree must lie in (0, {}], got {}",
                self.d - 1,
                self.avg_degree
            )));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::param(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        self.aac_config(self.k_list[0])?;
        Ok(())
    }

    fn aac_config(&self, k: usize) -> Result<AacConfig> {
        Ok(AacConfig::new(k, self.lambda)?
            .with_gamma(self.gamma)?
            .with_alpha(TailIndex::new(self.alpha)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    /// One rate per entry of `k_list`, or the failure message.
    pub rates: std::result::Result<Vec<ViolationRate>, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSummary {
    pub k: usize,
    pub mean: f64,
    /// Standard error of the mean over successful reps.
    pub se: f64,
    pub min: f64,
    pub max: f64,
    /// Number of successful reps aggregated.
    pub reps: usize,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub reps: Vec<RepOutcome>,
    pub summaries: Vec<KSummary>,
    pub elapsed: Duration,
}

impl BenchResult {
    /// True if at least one rep failed.
    pub fn partial(&self) -> bool {
        self.reps.iter().any(|r| r.rates.is_err())
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, u64, &str)> {
        self.reps
            .iter()
            .filter_map(|r| r.rates.as_ref().err().map(|e| (r.rep, r.seed, e.as_str())))
    }

    /// Reps whose DAG had no ancestral pairs (rate defined as 0).
    pub fn edgeless_reps(&self) -> usize {
        self.reps
            .iter()
            .filter(|r| matches!(&r.rates, Ok(v) if v.first().is_some_and(ViolationRate::no_ancestral_pairs)))
            .count()
    }

    /// The config echo, parseable by [`BenchConfig::parse`].
    pub fn provenance(&self) -> String {
        self.config.to_text()
    }
}

fn run_rep(cfg: &BenchConfig, ks: &[usize], rep: usize) -> Result<Vec<ViolationRate>> {
    let mut rng = rng_for(cfg.seed, rep as u64);
    let dag = random_dag(cfg.d, cfg.avg_degree, &mut rng)?;
    let mut spec = ScmSpec::new(dag, cfg.model.scm_model(), cfg.model.coeff_law()?, cfg.alpha0)?;
    if cfg.coeff_draw == CoeffDraw::Dataset {
        spec = spec.freeze_coefficients(&mut rng);
    }
    let sample = simulate_scm(&spec, cfg.n, &mut rng)?;
    let matrices = score_matrices_for_ks(&sample, ks, &cfg.aac_config(ks[0])?, cfg.transform)?;
    matrices
        .iter()
        .map(|m| ancestral_violation_rate(&spec.dag, &ease_order(m)?))
        .collect()
}

fn summarize(k: usize, rates: &[f64]) -> KSummary {
    let m = rates.len();
    if m == 0 {
        return KSummary {
            k,
            mean: f64::NAN,
            se: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
            reps: 0,
        };
    }
    let mean = rates.iter().sum::<f64>() / m as f64;
    let se = if m > 1 && rates.iter().any(|&r| r != rates[0]) {
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    } else {
        0.0
    };
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    KSummary {
        k,
        // summation error must not push the mean outside the observed range
        mean: mean.clamp(min, max),
        se,
        min,
        max,
        reps: m,
    }
}

/// Runs `cfg.reps` independent replications on a pool of `cfg.workers`
/// threads. Rep `i` uses the stream seeded by `derive_seed(cfg.seed, i)`; a
/// failing rep is recorded and the remaining reps continue.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut ks = cfg.k_list.clone();
    ks.sort_unstable();
    ks.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    let reps: Vec<RepOutcome> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| RepOutcome {
                rep,
                seed: derive_seed(cfg.seed, rep as u64),
                rates: run_rep(cfg, &ks, rep).map_err(|e| e.to_string()),
            })
            .collect()
    });
    let summaries = ks
        .iter()
        .enumerate()
        .map(|(ki, &k)| {
            let rates: Vec<f64> = reps
                .iter()
                .filter_map(|r| r.rates.as_ref().ok().map(|v| v[ki].rate))
                .collect();
            summarize(k, &rates)
        })
        .collect();
    Ok(BenchResult {
        config: cfg.clone(),
        reps,
        summaries,
        elapsed: start.elapsed(),
    })
}

fn fmt_rate(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "NA".into()
    }
}

/// Tab-separated table, one row per k in ascending order. `reps` counts the
/// successful reps behind each row.
pub fn write_table<W: Write>(result: &BenchResult, mut out: W) -> Result<()> {
    writeln!(out, "model\td\tn\tk\tmean_rate\tse\treps\tseed")?;
    let cfg = &result.config;
    for s in &result.summaries {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            cfg.model.label(),
            cfg.d,
            cfg.n,
            s.k,
            fmt_rate(s.mean),
            fmt_rate(s.se),
            s.reps,
            cfg.seed
        )?;
    }
    Ok(())
}

pub fn emit_table(result: &BenchResult, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_table(result, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// One labelled cause-effect pair file.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCase {
    pub path: PathBuf,
    /// `UCausesV` for first column → second column.
    pub truth: Direction,
    pub weight: f64,
}

/// Parses a manifest of `path label weight` lines, label `1->2` or `2->1`.
/// Relative paths are resolved against `base`.
pub fn parse_pair_manifest(text: &str, base: &Path) -> Result<Vec<PairCase>> {
    let mut cases = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [path, label, weight] = fields[..] else {
            return Err(Error::Config {
                line,
                message: format!("expected `path label weight`, got {content:?}"),
            });
        };
        let truth = match label {
            "1->2" => Direction::UCausesV,
            "2->1" => Direction::VCausesU,
            _ => {
                return Err(Error::Config {
                    line,
                    message: format!("label must be 1->2 or 2->1, got {label:?}"),
                })
            }
        };
        let weight: f64 = parse_value(line, "weight", weight)?;
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Config {
                line,
                message: format!("weight must be positive, got {weight}"),
            });
        }
        let path = Path::new(path);
        cases.push(PairCase {
            path: if path.is_absolute() { path.into() } else { base.join(path) },
            truth,
            weight,
        });
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBenchConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub transform: bool,
    pub threshold: f64,
}

impl Default for PairBenchConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: 0.5,
            alpha: 2.0,
            transform: true,
            threshold: 0.0,
        }
    }
}

/// `round(0.5 √n)`, at least 2.
pub fn pair_k(n: usize) -> usize {
    ((0.5 * (n as f64).sqrt()).round() as usize).max(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub path: PathBuf,
    /// Decision per orientation, in [`Orientation::ALL`] order.
    pub decisions: std::result::Result<[Direction; 4], String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationAccuracy {
    pub orientation: Orientation,
    pub accuracy: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairBenchResult {
    pub outcomes: Vec<PairOutcome>,
    pub accuracy: Vec<OrientationAccuracy>,
    /// Pairs that contributed to the weighted sums.
    pub pairs_used: usize,
}

impl PairBenchResult {
    pub fn partial(&self) -> bool {
        self.pairs_used < self.outcomes.len()
    }
}

fn decide_pair(case: &PairCase, cfg: &PairBenchConfig) -> Result<[Direction; 4]> {
    let sample = load_csv(&case.path)?;
    if sample.ncols() != 2 {
        return Err(Error::param(format!("expected 2 columns, found {}", sample.ncols())));
    }
    let alpha = TailIndex::new(cfg.alpha)?;
    let aac = AacConfig::new(pair_k(sample.nrows()), cfg.lambda)?
        .with_gamma(cfg.gamma)?
        .with_alpha(alpha);
    let mut out = [Direction::NoDecision; 4];
    for (slot, (_, oriented)) in out.iter_mut().zip(orientations(&sample)?) {
        let data = if cfg.transform {
            pareto_transform(&oriented, alpha)?.sample
        } else {
            oriented
        };
        let pair = aac_pair(&data.column(0), &data.column(1), &aac)?;
        *slot = pairwise_direction(pair.tau_uv, cfg.threshold)?;
    }
    Ok(out)
}

/// Weighted accuracy of the pairwise direction decision for each of the four
/// sign-flip orientations. Weights are renormalized over the pairs that
/// could be scored; NO_DECISION counts as incorrect.
pub fn run_pair_benchmark(cases: &[PairCase], cfg: &PairBenchConfig) -> Result<PairBenchResult> {
    if cases.is_empty() {
        return Err(Error::InsufficientData("pair benchmark needs at least one pair".into()));
    }
    let outcomes: Vec<PairOutcome> = cases
        .par_iter()
        .map(|case| PairOutcome {
            path: case.path.clone(),
            decisions: decide_pair(case, cfg).map_err(|e| e.to_string()),
        })
        .collect();
    let decisions: Vec<([Direction; 4], Direction, f64)> = cases
        .iter()
        .zip(&outcomes)
        .filter_map(|(c, o)| o.decisions.as_ref().ok().map(|d| (*d, c.truth, c.weight)))
        .collect();
    Ok(PairBenchResult {
        accuracy: weighted_accuracy(&decisions),
        pairs_used: decisions.len(),
        outcomes,
    })
}

/// Per-orientation `Σ ŵ 1{correct}` with normalized weights `ŵ`, and the
/// normal-approximation half-width `1.96 √(acc (1 − acc) Σ ŵ²)`.
pub fn weighted_accuracy(decisions: &[([Direction; 4], Direction, f64)]) -> Vec<OrientationAccuracy> {
    let total: f64 = decisions.iter().map(|x| x.2).sum();
    let sum_sq: f64 = decisions.iter().map(|x| (x.2 / total).powi(2)).sum();
    Orientation::ALL
        .iter()
        .enumerate()
        .map(|(oi, &orientation)| {
            if decisions.is_empty() {
                return OrientationAccuracy {
                    orientation,
                    accuracy: f64::NAN,
                    half_width: f64::NAN,
                };
            }
            let accuracy: f64 = decisions
                .iter()
                .filter(|(d, truth, _)| d[oi] == *truth)
                .map(|x| x.2 / total)
                .sum();
            OrientationAccuracy {
                orientation,
                accuracy,
                half_width: 1.96 * (accuracy * (1.0 - accuracy) * sum_sq).max(0.0).sqrt(),
            }
        })
        .collect()
}

pub fn write_pair_table<W: Write>(result: &PairBenchResult, mut out: W) -> Result<()> {
    writeln!(out, "orientation\taccuracy\thalf_width\tpairs")?;
    for a in &result.accuracy {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            a.orientation.label(),
            fmt_rate(a.accuracy),
            fmt_rate(a.half_width),
            result.pairs_used
        )?;
    }
    Ok(())
}
