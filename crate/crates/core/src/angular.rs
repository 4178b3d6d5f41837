//! L1 polar decomposition of bivariate extremes, the penalized angular
//! support objective, and the angular asymmetry coefficient (AAC).
//!
//! For a nonnegative pair `(x1, x2)` the radius is `r = x1 + x2` and the
//! angle `w = x1 / r`. The support interval `[a, b] ⊂ [0, 1]` of the angles
//! of the largest radii is estimated by minimizing
//!
//! ```text
//! g(s, t) = t − s + λ k^γ D_k(s, t),
//! D_k(s, t) = (1/k) Σ_{i ≤ k} d(W_(i), s, t) · L(R_(i) / R_(k)),
//! ```
//!
//! with `d` the distance from a point to `[s, t]` and `L(r) = r log r`.
//! The AAC is `τ = 1 − b − a`; it is positive when the first variable
//! causes the second.

use crate::error::{Error, Result};
use crate::margins::{Sample, TailIndex};
use crate::optim::{minimize_simplex, OptimizerReport, SimplexOptions};

/// Default penalty exponent γ.
pub const DEFAULT_GAMMA: f64 = 0.5;
/// Default penalty weight λ.
pub const DEFAULT_LAMBDA: f64 = 2.0;

/// Deterministic Nelder–Mead start grid over Δ.
pub const START_GRID: [(f64, f64); 6] = [
    (0.0, 1.0),
    (0.0, 0.5),
    (0.5, 1.0),
    (0.25, 0.75),
    (0.0, 0.25),
    (0.75, 1.0),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub w: f64,
    pub r: f64,
}

/// Polar coordinates sorted by radius, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSeries {
    entries: Vec<PolarPoint>,
    source_n: usize,
    dropped_zero_rows: usize,
}

impl PolarSeries {
    /// Builds a series from points in any order; sorts by `r` descending
    /// with ties kept in input order.
    pub fn from_points(points: Vec<PolarPoint>) -> Result<Self> {
        for p in &points {
            if !(p.r > 0.0 && p.r.is_finite()) || !(0.0..=1.0).contains(&p.w) {
                return Err(Error::param(format!(
                    "polar point (w = {}, r = {}) outside [0, 1] x (0, inf)",
                    p.w, p.r
                )));
            }
        }
        let n = points.len();
        let mut entries = points;
        entries.sort_by(|a, b| b.r.total_cmp(&a.r));
        Ok(Self {
            entries,
            source_n: n,
            dropped_zero_rows: 0,
        })
    }

    pub fn entries(&self) -> &[PolarPoint] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_n(&self) -> usize {
        self.source_n
    }

    pub fn dropped_zero_rows(&self) -> usize {
        self.dropped_zero_rows
    }

    /// The same radii with every angle reflected, `w ↦ 1 − w`, i.e. the
    /// series of the coordinate-swapped pair.
    pub fn swapped(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|p| PolarPoint { w: 1.0 - p.w, r: p.r })
                .collect(),
            ..*self
        }
    }

    /// Plot-ready CSV with header `w,r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w,r\n");
        for p in &self.entries {
            out.push_str(&format!("{},{}\n", p.w, p.r));
        }
        out
    }
}

/// L1 polar decomposition of two nonnegative columns. Rows with
/// `x1 + x2 = 0` are dropped and counted; ties in radius keep row order.
pub fn polarize_columns(x1: &[f64], x2: &[f64]) -> Result<PolarSeries> {
    if x1.len() != x2.len() {
        return Err(Error::param("polar decomposition needs equal-length columns"));
    }
    let mut entries = Vec::with_capacity(x1.len());
    let mut dropped = 0;
    for (i, (&a, &b)) in x1.iter().zip(x2).enumerate() {
        if a < 0.0 || b < 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::Csv {
                row: i + 1,
                column: if a < 0.0 || !a.is_finite() { 1 } else { 2 },
                message: "polar decomposition needs finite nonnegative values".into(),
            });
        }
        let r = a + b;
        if r == 0.0 {
            dropped += 1;
            continue;
        }
        entries.push(PolarPoint { w: a / r, r });
    }
    if entries.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} nonzero rows remain after dropping {dropped} zero rows; need at least 2",
            entries.len()
        )));
    }
    // stable sort keeps original row order among equal radii
    entries.sort_by(|a, b| b.r.total_cmp(&a.r));
    Ok(PolarSeries {
        entries,
        source_n: x1.len(),
        dropped_zero_rows: dropped,
    })
}

pub fn polarize(pair: &Sample) -> Result<PolarSeries> {
    if pair.ncols() != 2 {
        return Err(Error::param(format!(
            "polar decomposition needs two columns, got {}",
            pair.ncols()
        )));
    }
    polarize_columns(&pair.column(0), &pair.column(1))
}

/// Distance from `w` to `[s, t]`: `(s − w) ∨ (w − t) ∨ 0`.
pub fn interval_distance(w: f64, s: f64, t: f64) -> Result<f64> {
    if s > t {
        return Err(Error::param(format!("interval [{s}, {t}] has s > t")));
    }
    Ok(distance(w, s, t))
}

#[inline]
fn distance(w: f64, s: f64, t: f64) -> f64 {
    (s - w).max(w - t).max(0.0)
}

/// Radial weight `L(r) = r ln r` for `r ≥ 1`.
pub fn radial_weight(r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::param(format!("radial weight needs r >= 1, got {r}")));
    }
    Ok(r * r.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AacConfig {
    /// Number of radially largest points used.
    pub k: usize,
    pub lambda: f64,
    pub gamma: f64,
    /// Target tail index of the marginal transform.
    pub alpha: TailIndex,
}

impl AacConfig {
    pub fn new(k: usize, lambda: f64) -> Result<Self> {
        let cfg = Self {
            k,
            lambda,
            gamma: DEFAULT_GAMMA,
            alpha: TailIndex::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: TailIndex) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// `round(1.5 √n)`, the middle of the usual `{0.5, 1.5, 2.5} · √n` sweep.
pub fn default_k(n: usize) -> usize {
    ((1.5 * (n as f64).sqrt()).round() as usize).max(2)
}

/// The penalized objective with the top-`k` weights precomputed.
#[derive(Debug, Clone)]
pub struct SupportObjective {
    angles: Vec<f64>,
    weights: Vec<f64>,
    k: usize,
    penalty: f64,
}

impl SupportObjective {
    pub fn new(series: &PolarSeries, cfg: &AacConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.k > series.len() {
            return Err(Error::param(format!(
                "k = {} exceeds the {} available polar points",
                cfg.k,
                series.len()
            )));
        }
        let top = &series.entries[..cfg.k];
        let r_k = top[cfg.k - 1].r;
        let mut angles = Vec::with_capacity(cfg.k);
        let mut weights = Vec::with_capacity(cfg.k);
        for p in top {
            let ratio = p.r / r_k;
            angles.push(p.w);
            weights.push(ratio * ratio.ln());
        }
        Ok(Self {
            angles,
            weights,
            k: cfg.k,
            penalty: cfg.lambda * (cfg.k as f64).powf(cfg.gamma),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `D_k(s, t)`; assumes `s ≤ t`.
    pub fn d_k(&self, s: f64, t: f64) -> f64 {
        let sum: f64 = self
            .angles
            .iter()
            .zip(&self.weights)
            .map(|(&w, &l)| distance(w, s, t) * l)
            .sum();
        sum / self.k as f64
    }

    /// `g(s, t) = t − s + λ k^γ D_k(s, t)`; assumes `s ≤ t`.
    pub fn value(&self, s: f64, t: f64) -> f64 {
        t - s + self.penalty * self.d_k(s, t)
    }
}

fn check_interval(s: f64, t: f64) -> Result<()> {
    if !(0.0 <= s && s <= t && t <= 1.0) {
        return Err(Error::param(format!(
            "(s, t) = ({s}, {t}) is outside 0 <= s <= t <= 1"
        )));
    }
    Ok(())
}

pub fn d_k(series: &PolarSeries, cfg: &AacConfig, s: f64, t: f64) -> Result<f64> {
    check_interval(s, t)?;
    Ok(SupportObjective::new(series, cfg)?.d_k(s, t))
}

pub fn objective(series: &PolarSeries, cfg: &AacConfig, s: f64, t: f64) -> Result<f64> {
    check_interval(s, t)?;
    Ok(SupportObjective::new(series, cfg)?.value(s, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    pub a_hat: f64,
    pub b_hat: f64,
    /// `1 − b̂ − â`.
    pub tau: f64,
    pub objective_value: f64,
    pub report: OptimizerReport,
}

pub fn estimate_support(series: &PolarSeries, cfg: &AacConfig) -> Result<SupportInterval> {
    estimate_support_with(series, cfg, &SimplexOptions::default())
}

pub fn estimate_support_with(
    series: &PolarSeries,
    cfg: &AacConfig,
    opts: &SimplexOptions,
) -> Result<SupportInterval> {
    if cfg.k < 2 {
        return Err(Error::param(format!("support estimation needs k >= 2, got {}", cfg.k)));
    }
    let obj = SupportObjective::new(series, cfg)?;
    let m = minimize_simplex(|s, t| obj.value(s, t), &START_GRID, opts)?;
    Ok(SupportInterval {
        a_hat: m.s,
        b_hat: m.t,
        tau: 1.0 - m.t - m.s,
        objective_value: m.value,
        report: m.report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AacPair {
    /// τ(u, v): positive when u causes v.
    pub tau_uv: f64,
    /// Always exactly `-tau_uv`.
    pub tau_vu: f64,
    pub support: SupportInterval,
    pub dropped_zero_rows: usize,
    pub points_used: usize,
}

/// AAC of the ordered pair `(u, v)`. The support is estimated once, on the
/// lexicographically smaller column ordering, and `tau_vu` is its exact
/// negation; hence `aac_pair(v, u)` returns exactly the negated values.
/// The returned support interval is expressed in the `(u, v)` orientation.
pub fn aac_pair(u: &[f64], v: &[f64], cfg: &AacConfig) -> Result<AacPair> {
    pair_series(u, v)?.aac(cfg)
}

/// Polar series of a column pair in canonical orientation, reusable across
/// several AAC configurations.
#[derive(Debug, Clone)]
pub struct PairSeries {
    pub series: PolarSeries,
    /// True when the series was built from `(v, u)`.
    pub swapped: bool,
}

pub fn pair_series(u: &[f64], v: &[f64]) -> Result<PairSeries> {
    let swapped = lexicographic(u, v) == std::cmp::Ordering::Greater;
    let series = if swapped {
        polarize_columns(v, u)?
    } else {
        polarize_columns(u, v)?
    };
    Ok(PairSeries { series, swapped })
}

impl PairSeries {
    pub fn aac(&self, cfg: &AacConfig) -> Result<AacPair> {
        let canon = aac_from_series(&self.series, cfg)?;
        if !self.swapped {
            return Ok(canon);
        }
        let s = canon.support;
        Ok(AacPair {
            tau_uv: canon.tau_vu,
            tau_vu: canon.tau_uv,
            support: SupportInterval {
                a_hat: 1.0 - s.b_hat,
                b_hat: 1.0 - s.a_hat,
                tau: canon.tau_vu,
                ..s
            },
            ..canon
        })
    }
}

fn lexicographic(u: &[f64], v: &[f64]) -> std::cmp::Ordering {
    u.iter()
        .zip(v)
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| u.len().cmp(&v.len()))
}

pub fn aac_from_series(series: &PolarSeries, cfg: &AacConfig) -> Result<AacPair> {
    let support = estimate_support(series, cfg)?;
    Ok(AacPair {
        tau_uv: support.tau,
        tau_vu: -support.tau,
        support,
        dropped_zero_rows: series.dropped_zero_rows(),
        points_used: series.len(),
    })
}

/// Limit of `D_k(s, t)` for a discrete angular measure with atoms
/// `(w_j, p_j)` and standard α-Pareto radial ratios:
/// `Σ_j p_j d(w_j, s, t) · α / (α − 1)²`.
pub fn dk_limit_oracle(atoms: &[(f64, f64)], alpha: TailIndex, s: f64, t: f64) -> Result<f64> {
    let a = alpha.value();
    if a <= 1.0 {
        return Err(Error::Divergent(format!(
            "the r ln r radial moment is infinite for alpha = {a} <= 1"
        )));
    }
    check_interval(s, t)?;
    if atoms.is_empty() {
        return Err(Error::param("angular measure needs at least one atom"));
    }
    let mut total = 0.0;
    let mut mass = 0.0;
    for &(w, p) in atoms {
        if !(0.0..=1.0).contains(&w) || !(p >= 0.0) {
            return Err(Error::param(format!("invalid atom (w = {w}, p = {p})")));
        }
        total += p * distance(w, s, t);
        mass += p;
    }
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!("atom masses sum to {mass}, not 1")));
    }
    Ok(total * a / ((a - 1.0) * (a - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn series(points: &[(f64, f64)]) -> PolarSeries {
        PolarSeries::from_points(points.iter().map(|&(w, r)| PolarPoint { w, r }).collect())
            .unwrap()
    }

    #[test]
    fn polarize_examples() {
        let s = polarize_columns(&[3.0, 0.0, 0.0], &[1.0, 2.0, 0.0]).unwrap();
        assert_eq!(
            s.entries(),
            &[PolarPoint { w: 0.75, r: 4.0 }, PolarPoint { w: 0.0, r: 2.0 }]
        );
        assert_eq!(s.dropped_zero_rows(), 1);
        assert_eq!(s.source_n(), 3);

        let s = polarize_columns(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(
            s.entries(),
            &[PolarPoint { w: 0.5, r: 4.0 }, PolarPoint { w: 0.5, r: 2.0 }]
        );

        let s = polarize_columns(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(
            s.entries(),
            &[PolarPoint { w: 1.0, r: 1.0 }, PolarPoint { w: 0.0, r: 1.0 }]
        );
    }

    #[test]
    fn polarize_errors() {
        assert!(matches!(
            polarize_columns(&[1.0, 0.0], &[1.0, 0.0]),
            Err(Error::InsufficientData(_))
        ));
        assert!(polarize_columns(&[-1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(interval_distance(0.5, 0.2, 0.8).unwrap(), 0.0);
        assert!((interval_distance(0.1, 0.2, 0.8).unwrap() - 0.1).abs() < 1e-15);
        assert!((interval_distance(0.95, 0.2, 0.8).unwrap() - 0.15).abs() < 1e-15);
        assert!(interval_distance(0.5, 0.8, 0.2).is_err());
    }

    #[test]
    fn radial_weight_examples() {
        assert_eq!(radial_weight(1.0).unwrap(), 0.0);
        assert!((radial_weight(E).unwrap() - E).abs() < 1e-14);
        assert!((radial_weight(10.0).unwrap() - 23.025850929940457).abs() < 1e-12);
        assert!(radial_weight(0.5).is_err());
    }

    #[test]
    fn d_k_examples() {
        let two = series(&[(0.0, E), (0.0, 1.0)]);
        let cfg = AacConfig::new(2, 2.0).unwrap();
        assert_eq!(d_k(&two, &cfg, 0.0, 1.0).unwrap(), 0.0);
        assert!((d_k(&two, &cfg, 0.5, 1.0).unwrap() - E / 4.0).abs() < 1e-14);

        let cfg1 = AacConfig::new(1, 2.0).unwrap();
        assert_eq!(d_k(&two, &cfg1, 0.5, 1.0).unwrap(), 0.0);

        let cfg3 = AacConfig::new(3, 2.0).unwrap();
        assert!(d_k(&two, &cfg3, 0.0, 1.0).is_err());
    }

    #[test]
    fn objective_examples() {
        let two = series(&[(0.0, E), (0.0, 1.0)]);
        let cfg = AacConfig::new(2, 2.0).unwrap();
        assert_eq!(objective(&two, &cfg, 0.0, 1.0).unwrap(), 1.0);
        let expected = 0.5 + 2.0 * 2.0_f64.sqrt() * E / 4.0;
        assert!((objective(&two, &cfg, 0.5, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 2.42212).abs() < 1e-5);

        let ray = series(&[(0.3, 5.0), (0.3, 2.0), (0.3, 1.5)]);
        let cfg = AacConfig::new(3, 2.0).unwrap();
        assert_eq!(objective(&ray, &cfg, 0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn oracle_examples() {
        let a2 = TailIndex::new(2.0).unwrap();
        let a3 = TailIndex::new(3.0).unwrap();
        assert_eq!(dk_limit_oracle(&[(0.4, 1.0)], a2, 0.2, 0.8).unwrap(), 0.0);
        assert!((dk_limit_oracle(&[(0.0, 1.0)], a2, 0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((dk_limit_oracle(&[(0.0, 1.0)], a3, 0.2, 1.0).unwrap() - 0.15).abs() < 1e-15);
        let a1 = TailIndex::new(1.0).unwrap();
        assert!(matches!(
            dk_limit_oracle(&[(0.0, 1.0)], a1, 0.5, 1.0),
            Err(Error::Divergent(_))
        ));
    }

    /// ∫_1^∞ r ln r · α r^{−α−1} dr by Simpson's rule after `r = e^x`.
    fn radial_moment_quadrature(alpha: f64) -> f64 {
        let (upper, steps) = (80.0, 200_000);
        let h = upper / steps as f64;
        let f = |x: f64| alpha * x * ((1.0 - alpha) * x).exp();
        let mut sum = f(0.0) + f(upper);
        for i in 1..steps {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += c * f(i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn oracle_constant_matches_quadrature() {
        assert!((radial_moment_quadrature(2.0) - 2.0).abs() < 1e-8);
        assert!((radial_moment_quadrature(3.0) - 0.75).abs() < 1e-8);
        for alpha in [1.5, 2.5, 4.0] {
            let closed = alpha / ((alpha - 1.0) * (alpha - 1.0));
            assert!((radial_moment_quadrature(alpha) - closed).abs() < 1e-6);
        }
    }

    #[test]
    fn config_validation() {
        assert!(AacConfig::new(0, 2.0).is_err());
        assert!(AacConfig::new(5, 0.0).is_err());
        assert!(AacConfig::new(5, 2.0).unwrap().with_gamma(-1.0).is_err());
        assert_eq!(default_k(1000), 47);
        assert_eq!(default_k(100), 15);
    }

    #[test]
    fn single_ray_support_collapses() {
        let pts: Vec<(f64, f64)> = (1..=200).map(|i| (0.4, 1.0 + i as f64)).collect();
        let est = estimate_support(&series(&pts), &AacConfig::new(100, 2.0).unwrap()).unwrap();
        assert!((est.a_hat - 0.4).abs() < 1e-4 && (est.b_hat - 0.4).abs() < 1e-4, "{est:?}");
        assert!((est.tau - 0.2).abs() < 2e-4);
    }

    #[test]
    fn aac_is_skew_by_construction() {
        let u = [5.0, 1.0, 0.5, 3.0, 8.0, 0.1];
        let v = [1.0, 2.0, 4.0, 0.3, 2.5, 7.0];
        let cfg = AacConfig::new(4, 2.0).unwrap();
        let p = aac_pair(&u, &v, &cfg).unwrap();
        assert_eq!(p.tau_uv, -p.tau_vu);
        assert!(p.support.a_hat <= p.support.b_hat);
        let q = aac_pair(&v, &u, &cfg).unwrap();
        assert_eq!(q.tau_uv, -p.tau_uv);
        assert_eq!(q.tau_vu, -p.tau_vu);
    }
}
