//! Causal order search over a pairwise score matrix, and pairwise
//! cause/effect decisions from the sign of the AAC.

use rayon::prelude::*;

use crate::angular::{pair_series, AacConfig};
use crate::error::{Error, Result};
use crate::graph::CausalOrder;
use crate::margins::{pareto_transform, Sample};

/// Pairwise scores `tau[u][v]` over nodes `1..=d`; the diagonal is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    d: usize,
    tau: Vec<f64>,
    skew: bool,
}

impl ScoreMatrix {
    /// From a dense `d × d` table (0-based rows and columns). The skew flag
    /// is set iff `tau[u][v] + tau[v][u] == 0` exactly off the diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::param("score matrix must be square"));
        }
        let mut tau = Vec::with_capacity(d * d);
        for (u, row) in rows.iter().enumerate() {
            for (v, &x) in row.iter().enumerate() {
                tau.push(if u == v { f64::NAN } else { x });
            }
        }
        let mut m = Self { d, tau, skew: false };
        m.skew = m.check_skew();
        Ok(m)
    }

    /// Builds a matrix from `f(u, v)` over 1-based node ids, `u ≠ v`.
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut tau = vec![f64::NAN; d * d];
        for u in 1..=d {
            for v in 1..=d {
                if u != v {
                    tau[(u - 1) * d + (v - 1)] = f(u, v);
                }
            }
        }
        let mut m = Self { d, tau, skew: false };
        m.skew = m.check_skew();
        m
    }

    fn check_skew(&self) -> bool {
        (1..=self.d).all(|u| ((u + 1)..=self.d).all(|v| self.get(u, v) + self.get(v, u) == 0.0))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `tau(u, v)` for 1-based ids.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.tau[(u - 1) * self.d + (v - 1)]
    }

    pub fn is_skew(&self) -> bool {
        self.skew
    }

    /// CSV dump with a `node` header column; the diagonal is left empty.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("node");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for u in 1..=self.d {
            out.push_str(&names[u - 1]);
            for v in 1..=self.d {
                out.push(',');
                if u != v {
                    out.push_str(&format!("{}", self.get(u, v)));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Extremal ancestral search: repeatedly removes the remaining node whose
/// largest incoming score `max_u τ(u, v)` is smallest, assigning it the next
/// rank. Ties go to the smallest node id. O(d²) score lookups.
pub fn ease_order(scores: &ScoreMatrix) -> Result<CausalOrder> {
    let d = scores.d();
    if d < 2 {
        return Err(Error::param(format!("causal order search needs d >= 2, got {d}")));
    }
    for u in 1..=d {
        for v in 1..=d {
            if u != v && !scores.get(u, v).is_finite() {
                return Err(Error::NonFiniteScore { u, v });
            }
        }
    }

    let mut remaining = vec![true; d + 1];
    remaining[0] = false;
    let mut sequence = Vec::with_capacity(d);
    for _ in 0..d {
        let mut best: Option<(usize, f64)> = None;
        for v in 1..=d {
            if !remaining[v] {
                continue;
            }
            let m = (1..=d)
                .filter(|&u| u != v && remaining[u])
                .map(|u| scores.get(u, v))
                .fold(f64::NEG_INFINITY, f64::max);
            if best.is_none_or(|(_, b)| m < b) {
                best = Some((v, m));
            }
        }
        let (v, _) = best.expect("at least one node remains");
        remaining[v] = false;
        sequence.push(v);
    }
    CausalOrder::from_sequence(&sequence)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    UCausesV,
    VCausesU,
    NoDecision,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::UCausesV => "U_CAUSES_V",
            Direction::VCausesU => "V_CAUSES_U",
            Direction::NoDecision => "NO_DECISION",
        }
    }
}

/// Sign rule with a dead band: `τ > threshold` names u as the cause,
/// `τ < −threshold` names v, anything else (including the boundary) abstains.
pub fn pairwise_direction(tau_uv: f64, threshold: f64) -> Result<Direction> {
    if !tau_uv.is_finite() {
        return Err(Error::param(format!("score must be finite, got {tau_uv}")));
    }
    if !(threshold >= 0.0) {
        return Err(Error::param(format!("threshold must be nonnegative, got {threshold}")));
    }
    Ok(if tau_uv > threshold {
        Direction::UCausesV
    } else if tau_uv < -threshold {
        Direction::VCausesU
    } else {
        Direction::NoDecision
    })
}

/// A pairwise causal score that can drive [`ease_order`].
pub trait PairScore: Sync {
    fn name(&self) -> &'static str;

    /// Returns `(τ(u, v), τ(v, u))` for two data columns.
    fn score(&self, u: &[f64], v: &[f64]) -> Result<(f64, f64)>;
}

/// Angular asymmetry coefficient.
#[derive(Debug, Clone, Copy)]
pub struct AacScore(pub AacConfig);

impl PairScore for AacScore {
    fn name(&self) -> &'static str {
        "aac"
    }

    fn score(&self, u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
        let p = pair_series(u, v)?.aac(&self.0)?;
        Ok((p.tau_uv, p.tau_vu))
    }
}

/// Slot for the causal tail coefficient baseline; not provided.
#[derive(Debug, Clone, Copy, Default)]
pub struct CausalTailCoefficient;

impl PairScore for CausalTailCoefficient {
    fn name(&self) -> &'static str {
        "ctc"
    }

    fn score(&self, _u: &[f64], _v: &[f64]) -> Result<(f64, f64)> {
        Err(Error::Unsupported("the causal tail coefficient"))
    }
}

/// Fills a score matrix by evaluating `scorer` once per unordered pair.
pub fn score_matrix_with(sample: &Sample, scorer: &dyn PairScore) -> Result<ScoreMatrix> {
    let d = sample.ncols();
    if d < 2 {
        return Err(Error::param(format!("need at least two columns, got {d}")));
    }
    let columns = sample.columns();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|u| ((u + 1)..d).map(move |v| (u, v)))
        .collect();
    let scored: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(u, v)| scorer.score(&columns[u], &columns[v]))
        .collect::<Result<_>>()?;
    let mut rows = vec![vec![0.0; d]; d];
    for (&(u, v), &(uv, vu)) in pairs.iter().zip(&scored) {
        rows[u][v] = uv;
        rows[v][u] = vu;
    }
    ScoreMatrix::from_rows(&rows)
}

/// AAC score matrix of a sample, optionally transforming each column to
/// α-Pareto margins first (α from `cfg`).
pub fn score_matrix_from_data(sample: &Sample, cfg: &AacConfig, transform: bool) -> Result<ScoreMatrix> {
    let mut out = score_matrices_for_ks(sample, &[cfg.k], cfg, transform)?;
    Ok(out.remove(0))
}

/// One AAC score matrix per entry of `ks`, sharing the marginal transform
/// and the polar decomposition of each pair. `cfg.k` is ignored.
pub fn score_matrices_for_ks(
    sample: &Sample,
    ks: &[usize],
    cfg: &AacConfig,
    transform: bool,
) -> Result<Vec<ScoreMatrix>> {
    let d = sample.ncols();
    if d < 2 {
        return Err(Error::param(format!("need at least two columns, got {d}")));
    }
    let transformed;
    let data = if transform {
        transformed = pareto_transform(sample, cfg.alpha)?.sample;
        &transformed
    } else {
        sample
    };
    let columns = data.columns();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|u| ((u + 1)..d).map(move |v| (u, v)))
        .collect();
    let per_pair: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(u, v)| {
            let ps = pair_series(&columns[u], &columns[v])?;
            ks.iter()
                .map(|&k| Ok(ps.aac(&AacConfig { k, ..*cfg })?.tau_uv))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..ks.len())
        .map(|ki| {
            let mut tau = vec![f64::NAN; d * d];
            for (&(u, v), taus) in pairs.iter().zip(&per_pair) {
                tau[u * d + v] = taus[ki];
                tau[v * d + u] = -taus[ki];
            }
            ScoreMatrix { d, tau, skew: true }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skew(d: usize, upper: &[((usize, usize), f64)]) -> ScoreMatrix {
        ScoreMatrix::from_fn(d, |u, v| {
            upper
                .iter()
                .find_map(|&((a, b), t)| {
                    if (a, b) == (u, v) {
                        Some(t)
                    } else if (b, a) == (u, v) {
                        Some(-t)
                    } else {
                        None
                    }
                })
                .unwrap_or(0.0)
        })
    }

    #[test]
    fn two_nodes() {
        let m = skew(2, &[((1, 2), 0.4)]);
        assert!(m.is_skew());
        let o = ease_order(&m).unwrap();
        assert_eq!((o.rank(1), o.rank(2)), (1, 2));
    }

    #[test]
    fn chain_of_three() {
        let m = skew(3, &[((1, 2), 0.3), ((1, 3), 0.3), ((2, 3), 0.3)]);
        assert_eq!(ease_order(&m).unwrap().ranks(), &[1, 2, 3]);
    }

    #[test]
    fn all_zero_scores_tie_break_by_id() {
        let m = skew(3, &[]);
        assert_eq!(ease_order(&m).unwrap().ranks(), &[1, 2, 3]);
    }

    #[test]
    fn reversed_chain() {
        let m = skew(3, &[((3, 2), 0.3), ((3, 1), 0.3), ((2, 1), 0.3)]);
        assert_eq!(ease_order(&m).unwrap().sequence(), vec![3, 2, 1]);
    }

    #[test]
    fn non_finite_scores_are_named() {
        let m = ScoreMatrix::from_fn(3, |u, v| if (u, v) == (2, 3) { f64::INFINITY } else { 0.0 });
        assert!(matches!(ease_order(&m), Err(Error::NonFiniteScore { u: 2, v: 3 })));
        let single = ScoreMatrix::from_fn(1, |_, _| 0.0);
        assert!(ease_order(&single).is_err());
    }

    #[test]
    fn direction_examples() {
        assert_eq!(pairwise_direction(0.5, 0.0).unwrap(), Direction::UCausesV);
        assert_eq!(pairwise_direction(-0.01, 0.05).unwrap(), Direction::NoDecision);
        assert_eq!(pairwise_direction(0.0, 0.0).unwrap(), Direction::NoDecision);
        assert_eq!(pairwise_direction(-0.2, 0.1).unwrap(), Direction::VCausesU);
        assert!(pairwise_direction(f64::NAN, 0.0).is_err());
        assert!(pairwise_direction(0.1, -1.0).is_err());
    }

    #[test]
    fn causal_tail_slot_is_empty() {
        let s = Sample::from_columns(&[vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]]).unwrap();
        assert!(matches!(
            score_matrix_with(&s, &CausalTailCoefficient),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn skew_flag_detects_asymmetric_input() {
        let m = ScoreMatrix::from_rows(&[vec![0.0, 0.2], vec![0.1, 0.0]]).unwrap();
        assert!(!m.is_skew());
        let m = ScoreMatrix::from_rows(&[vec![0.0, 0.2], vec![-0.2, 0.0]]).unwrap();
        assert!(m.is_skew());
    }

    #[test]
    fn csv_dump_layout() {
        let m = skew(2, &[((1, 2), 0.25)]);
        let csv = m.to_csv(&["a".into(), "b".into()]);
        assert_eq!(csv, "node,a,b\na,,0.25\nb,-0.25,\n");
    }
}
