//! Builds the `simulate` models from flags, an optional model file and
//! defaults, in that order of precedence.
//!
//! The structure (DAG and any frozen coefficients) is drawn from the stream
//! `(seed, 0)`; rows come from chunked streams under `derive_seed(seed, 1)`,
//! so the graph does not depend on `n`.

use std::fs;

use clap::ValueEnum;
use extorder::bench::{CoeffDraw, COEFF_COVERAGE, COEFF_HI, COEFF_LO};
use extorder::graph::{random_dag, Dag};
use extorder::margins::{Sample, TailIndex};
use extorder::seeding::{derive_seed, rng_for};
use extorder::simulate::{
    generate_seeded, Conditional, CoeffLaw, EdgeCoeffs, EscmSpec, NoiseLaw, Prelimit, RowModel,
    ScmModel, ScmSpec, Structural,
};
use extorder::{Error, Result};
use rand::Rng;

use crate::model_file::ModelFile;
use crate::SimulateArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModel {
    Sl0,
    Sl1,
    Ml0,
    Ml1,
    Mlnoise,
    Hr,
    Escm,
    So2pair,
}

pub struct SimOutput {
    pub sample: Sample,
    pub dag: Option<Dag>,
}

const DEFAULT_D: usize = 5;
const DEFAULT_AVG_DEGREE: f64 = 3.0;
const DEFAULT_ALPHA0: f64 = 3.0;
const DEFAULT_ALPHA: f64 = 2.0;

fn rows<M: RowModel>(model: &M, n: usize, seed: u64) -> Result<Sample> {
    let (values, _) = generate_seeded(model, n, derive_seed(seed, 1));
    Sample::from_row_major(n, model.ncols(), values)
}

/// Node count from flag, file or default; must agree when both are given.
fn node_count(args: &SimulateArgs, file: &ModelFile) -> Result<usize> {
    let from_file: Option<usize> = file.get("d")?;
    match (args.d, from_file) {
        (Some(a), Some(b)) if a != b => Err(Error::Param(format!(
            "--d {a} disagrees with d = {b} in the model file"
        ))),
        (Some(a), _) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => Ok(DEFAULT_D),
    }
}

/// The DAG from `edge` lines if any, otherwise a random one.
fn structure<R: Rng>(args: &SimulateArgs, file: &ModelFile, rng: &mut R) -> Result<Dag> {
    let d = node_count(args, file)?;
    if !file.edges.is_empty() {
        if args.avg_degree.is_some() || file.has("avg_degree") {
            return Err(Error::Param("avg_degree conflicts with explicit edge lines".into()));
        }
        return Dag::new(d, file.edges.iter().map(|&(u, v, _)| (u, v)));
    }
    let avg = args
        .avg_degree
        .or(file.get("avg_degree")?)
        .unwrap_or(DEFAULT_AVG_DEGREE)
        .min((d.max(2) - 1) as f64);
    random_dag(d, avg, rng)
}

fn edge_coeffs<R: Rng>(dag: &Dag, file: &ModelFile, rng: &mut R) -> EdgeCoeffs {
    if file.edges.is_empty() {
        dag.edges()
            .map(|e| (e, rng.random_range(COEFF_LO..COEFF_HI)))
            .collect()
    } else {
        file.edge_coeffs()
    }
}

fn alpha(file: &ModelFile) -> Result<TailIndex> {
    TailIndex::new(file.get("alpha")?.unwrap_or(DEFAULT_ALPHA))
}

fn activation(file: &ModelFile, d: usize, default: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    Ok(file
        .list("activation")?
        .unwrap_or_else(|| (1..=d).map(default).collect()))
}

pub fn simulate(args: &SimulateArgs, seed: u64) -> Result<SimOutput> {
    let file = match &args.spec {
        Some(p) => ModelFile::parse(&fs::read_to_string(p)?)?,
        None => ModelFile::default(),
    };
    let mut rng = rng_for(seed, 0);
    let graph_keys = ["d", "avg_degree"];
    let n = args.n;
    match args.model {
        SimModel::Sl0 | SimModel::Sl1 | SimModel::Ml0 | SimModel::Ml1 => {
            file.restrict("scm", &[&graph_keys[..], &["alpha0", "coeff", "coeff_draw"]].concat())?;
            let model = match args.model {
                SimModel::Sl0 | SimModel::Sl1 => ScmModel::SumLinear,
                _ => ScmModel::MaxLinear,
            };
            let law = match file.coeff_law()? {
                Some(law) => law,
                None if matches!(args.model, SimModel::Sl0 | SimModel::Ml0) => {
                    CoeffLaw::uniform(COEFF_LO, COEFF_HI)?
                }
                None => CoeffLaw::lognormal_matched(COEFF_LO, COEFF_HI, COEFF_COVERAGE)?,
            };
            let alpha0 = args.alpha0.or(file.get("alpha0")?).unwrap_or(DEFAULT_ALPHA0);
            let dag = structure(args, &file, &mut rng)?;
            let mut spec = ScmSpec::new(dag, model, law, alpha0)?;
            let draw: CoeffDraw = file.get("coeff_draw")?.unwrap_or(CoeffDraw::Row);
            if !file.edges.is_empty() {
                if file.has("coeff") || file.has("coeff_draw") {
                    return Err(Error::Param(
                        "edge lines fix the coefficients; drop coeff and coeff_draw".into(),
                    ));
                }
                spec = spec.with_fixed_coefficients(file.edge_coeffs())?;
            } else if draw == CoeffDraw::Dataset {
                spec = spec.freeze_coefficients(&mut rng);
            }
            Ok(SimOutput {
                sample: rows(&spec, n, seed)?,
                dag: Some(spec.dag),
            })
        }
        SimModel::Mlnoise | SimModel::Escm => {
            let keys: &[&str] = if args.model == SimModel::Escm {
                &["d", "avg_degree", "alpha", "activation", "eps", "structural"]
            } else {
                &["d", "avg_degree", "alpha", "activation", "eps"]
            };
            file.restrict("eSCM", keys)?;
            if args.alpha0.is_some() {
                return Err(Error::Param("--alpha0 applies to sl/ml models only; use alpha in the model file".into()));
            }
            let dag = structure(args, &file, &mut rng)?;
            let d = dag.node_count();
            let coeffs = edge_coeffs(&dag, &file, &mut rng);
            let eps = file
                .noise_law()?
                .unwrap_or(NoiseLaw::LogNormal { mu: 0.0, sigma: 0.5 });
            let kind = match (args.model, file.raw("structural")) {
                (SimModel::Mlnoise, _) | (_, Some((_, "maxnoise"))) => "maxnoise",
                (_, None) | (_, Some((_, "sum"))) => "sum",
                (_, Some((_, "max"))) => "max",
                (_, Some((line, other))) => {
                    return Err(Error::Config {
                        line,
                        message: format!("structural must be sum, max or maxnoise, got {other:?}"),
                    })
                }
            };
            if kind != "maxnoise" && file.has("eps") {
                return Err(Error::Param("eps applies to the maxnoise family only".into()));
            }
            let structural = match kind {
                "sum" => Structural::SimpleSum(coeffs),
                "max" => Structural::SimpleMax(coeffs),
                _ => Structural::MaxNoise { coeffs, eps },
            };
            let spec = EscmSpec::new(dag, activation(&file, d, |_| 1.0)?, structural, alpha(&file)?)?;
            let sample = if args.model == SimModel::Escm {
                rows(&Conditional::new(&spec)?, n, seed)?
            } else {
                rows(&Prelimit(&spec), n, seed)?
            };
            Ok(SimOutput {
                sample,
                dag: Some(spec.dag),
            })
        }
        SimModel::Hr => {
            file.restrict("hr", &["d", "avg_degree", "alpha", "activation", "mu", "sigma"])?;
            if args.alpha0.is_some() {
                return Err(Error::Param("--alpha0 applies to sl/ml models only; use alpha in the model file".into()));
            }
            let mut dag = structure(args, &file, &mut rng)?;
            let d = dag.node_count();
            if file.edges.is_empty() {
                dag = single_rooted(&dag)?;
            }
            let b: EdgeCoeffs = if file.edges.is_empty() {
                dag.edges()
                    .map(|(u, v)| ((u, v), 1.0 / dag.parents(v).len() as f64))
                    .collect()
            } else {
                file.edge_coeffs()
            };
            let root = dag.roots()[0];
            let spec = EscmSpec::new(
                dag,
                activation(&file, d, |v| if v == root { 1.0 } else { 0.0 })?,
                Structural::HuslerReiss {
                    b,
                    mu: file.list("mu")?.unwrap_or_else(|| vec![0.0; d]),
                    sigma: file.list("sigma")?.unwrap_or_else(|| vec![1.0; d]),
                },
                alpha(&file)?,
            )?;
            Ok(SimOutput {
                sample: rows(&Prelimit(&spec), n, seed)?,
                dag: Some(spec.dag),
            })
        }
        SimModel::So2pair => {
            if args.d.is_some() || args.avg_degree.is_some() || args.alpha0.is_some() {
                return Err(Error::Param("so2pair takes no --d, --avg-degree or --alpha0".into()));
            }
            if !file.edges.is_empty() {
                return Err(Error::Param("so2pair takes no edge lines".into()));
            }
            let spec = file.second_order_pair()?;
            Ok(SimOutput {
                sample: rows(&spec, n, seed)?,
                dag: None,
            })
        }
    }
}

/// Adds an edge from the first root in topological order to every other root.
fn single_rooted(dag: &Dag) -> Result<Dag> {
    let roots = dag.roots();
    let first = dag.topological_order()[0];
    let extra = roots.into_iter().filter(|&r| r != first).map(|r| (first, r));
    Dag::new(dag.node_count(), dag.edges().chain(extra))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rooted_keeps_edges_and_leaves_one_root() {
        let dag = Dag::new(4, [(1, 3), (2, 4)]).unwrap();
        let one = single_rooted(&dag).unwrap();
        assert_eq!(one.roots().len(), 1);
        assert!(dag.edges().all(|(u, v)| one.has_edge(u, v)));
    }
}
