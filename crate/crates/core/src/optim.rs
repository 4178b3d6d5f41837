//! Multi-start Nelder–Mead over the triangle `Δ = {(s, t) : 0 ≤ s ≤ t ≤ 1}`.
//!
//! Trial points outside Δ are evaluated at their projection onto Δ plus a
//! linear barrier proportional to the constraint violation, so the simplex
//! is pushed back inside while every reported point stays feasible.

use crate::error::{Error, Result};

/// Barrier weight applied to the total constraint violation.
pub const BARRIER_WEIGHT: f64 = 1e6;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Objective values closer than this are treated as tied across restarts.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Simplex diameter below which a run counts as converged.
    pub tol: f64,
    /// Iteration cap per restart.
    pub max_iter: usize,
    /// Edge length of the initial simplex around each start.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OptimizerReport {
    /// Iterations summed over all restarts.
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    /// Whether the restart that produced the returned point converged.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexMinimum {
    pub s: f64,
    pub t: f64,
    pub value: f64,
    pub report: OptimizerReport,
}

/// Projection onto Δ: clamp both coordinates to [0, 1], swap if `s > t`.
pub fn project(s: f64, t: f64) -> (f64, f64) {
    let s = s.clamp(0.0, 1.0);
    let t = t.clamp(0.0, 1.0);
    if s > t {
        (t, s)
    } else {
        (s, t)
    }
}

/// Total amount by which `(s, t)` violates the constraints of Δ.
pub fn violation(s: f64, t: f64) -> f64 {
    (-s).max(0.0) + (s - 1.0).max(0.0) + (-t).max(0.0) + (t - 1.0).max(0.0) + (s - t).max(0.0)
}

pub fn is_feasible(s: f64, t: f64) -> bool {
    (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) && s <= t
}

struct Run {
    point: [f64; 2],
    value: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

struct Penalized<'a, F> {
    f: &'a mut F,
    evaluations: usize,
}

impl<F: FnMut(f64, f64) -> f64> Penalized<'_, F> {
    fn eval(&mut self, x: [f64; 2]) -> Result<f64> {
        let (s, t) = project(x[0], x[1]);
        let value = (self.f)(s, t);
        self.evaluations += 1;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective { s, t, value });
        }
        Ok(value + BARRIER_WEIGHT * violation(x[0], x[1]))
    }
}

fn diameter(simplex: &[[f64; 2]; 3]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let dx = simplex[i][0] - simplex[j][0];
            let dy = simplex[i][1] - simplex[j][1];
            d = d.max((dx * dx + dy * dy).sqrt());
        }
    }
    d
}

fn nelder_mead<F: FnMut(f64, f64) -> f64>(
    f: &mut F,
    start: (f64, f64),
    opts: &SimplexOptions,
) -> Result<Run> {
    let mut pf = Penalized { f, evaluations: 0 };
    let h = opts.initial_step;
    let x0 = [start.0, start.1];
    let mut simplex = [x0, [x0[0] + h, x0[1]], [x0[0], x0[1] + h]];
    let mut values = [0.0; 3];
    for (v, x) in values.iter_mut().zip(&simplex) {
        *v = pf.eval(*x)?;
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // order: best, middle, worst
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.map(|i| simplex[i]);
        values = idx.map(|i| values[i]);

        if diameter(&simplex) < opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |coef: f64| {
            [
                centroid[0] + coef * (simplex[2][0] - centroid[0]),
                centroid[1] + coef * (simplex[2][1] - centroid[1]),
            ]
        };

        let xr = along(-REFLECT);
        let fr = pf.eval(xr)?;
        if fr < values[0] {
            let xe = along(-EXPAND);
            let fe = pf.eval(xe)?;
            if fe < fr {
                simplex[2] = xe;
                values[2] = fe;
            } else {
                simplex[2] = xr;
                values[2] = fr;
            }
            continue;
        }
        if fr < values[1] {
            simplex[2] = xr;
            values[2] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[2] {
            let xc = along(-CONTRACT);
            (xc, pf.eval(xc)?)
        } else {
            let xc = along(CONTRACT);
            (xc, pf.eval(xc)?)
        };
        if fc < values[2].min(fr) {
            simplex[2] = xc;
            values[2] = fc;
            continue;
        }
        for i in 1..3 {
            simplex[i] = [
                simplex[0][0] + SHRINK * (simplex[i][0] - simplex[0][0]),
                simplex[0][1] + SHRINK * (simplex[i][1] - simplex[0][1]),
            ];
            values[i] = pf.eval(simplex[i])?;
        }
    }

    let (s, t) = project(simplex[0][0], simplex[0][1]);
    let value = (pf.f)(s, t);
    pf.evaluations += 1;
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective { s, t, value });
    }
    Ok(Run {
        point: [s, t],
        value,
        iterations,
        evaluations: pf.evaluations,
        converged,
    })
}

fn better(candidate: &Run, incumbent: &Run) -> bool {
    let scale = incumbent.value.abs().max(1.0);
    if candidate.value < incumbent.value - TIE_EPS * scale {
        return true;
    }
    if candidate.value > incumbent.value + TIE_EPS * scale {
        return false;
    }
    let len_c = candidate.point[1] - candidate.point[0];
    let len_i = incumbent.point[1] - incumbent.point[0];
    if len_c != len_i {
        return len_c < len_i;
    }
    candidate.point[0] < incumbent.point[0]
}

/// Minimizes `f` over Δ by running Nelder–Mead from each feasible start and
/// keeping the best feasible point. Ties in objective value go to the
/// shorter interval `t − s`, then to the smaller `s`.
pub fn minimize_simplex<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    starts: &[(f64, f64)],
    opts: &SimplexOptions,
) -> Result<SimplexMinimum> {
    if !(opts.tol > 0.0) {
        return Err(Error::param(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut report = OptimizerReport::default();
    let mut best: Option<Run> = None;
    for &(s, t) in starts {
        if !is_feasible(s, t) {
            continue;
        }
        let run = nelder_mead(&mut f, (s, t), opts)?;
        report.restarts += 1;
        report.iterations += run.iterations;
        report.evaluations += run.evaluations;
        if best.as_ref().is_none_or(|b| better(&run, b)) {
            best = Some(run);
        }
    }
    let best = best.ok_or_else(|| Error::param("no start point lies in the feasible triangle"))?;
    report.converged = best.converged;
    Ok(SimplexMinimum {
        s: best.point[0],
        t: best.point[1],
        value: best.value,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: [(f64, f64); 6] = [
        (0.0, 1.0),
        (0.0, 0.5),
        (0.5, 1.0),
        (0.25, 0.75),
        (0.0, 0.25),
        (0.75, 1.0),
    ];

    #[test]
    fn smooth_quadratic() {
        let m = minimize_simplex(
            |s, t| (s - 0.3).powi(2) + (t - 0.7).powi(2),
            &GRID,
            &SimplexOptions::default(),
        )
        .unwrap();
        assert!((m.s - 0.3).abs() < 1e-6 && (m.t - 0.7).abs() < 1e-6, "{m:?}");
        assert!(m.report.converged);
        assert_eq!(m.report.restarts, 6);
    }

    #[test]
    fn linear_objective_lands_on_diagonal() {
        let m = minimize_simplex(|s, t| t - s, &GRID, &SimplexOptions::default()).unwrap();
        assert!(m.t - m.s <= 1e-6, "{m:?}");
        assert!(is_feasible(m.s, m.t));
    }

    #[test]
    fn constrained_minimum_outside_triangle_is_projected() {
        // unconstrained minimum at (0.8, 0.2) violates s <= t
        let m = minimize_simplex(
            |s, t| (s - 0.8).powi(2) + (t - 0.2).powi(2),
            &GRID,
            &SimplexOptions::default(),
        )
        .unwrap();
        assert!(is_feasible(m.s, m.t));
        assert!((m.s - 0.5).abs() < 1e-4 && (m.t - 0.5).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let err = minimize_simplex(|_, _| f64::NAN, &GRID, &SimplexOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective { .. }));
    }

    #[test]
    fn rejects_bad_inputs() {
        let opts = SimplexOptions { tol: 0.0, ..Default::default() };
        assert!(minimize_simplex(|s, t| s + t, &GRID, &opts).is_err());
        assert!(minimize_simplex(|s, t| s + t, &[(0.7, 0.2)], &SimplexOptions::default()).is_err());
    }

    #[test]
    fn projection_and_violation() {
        assert_eq!(project(0.7, 0.2), (0.2, 0.7));
        assert_eq!(project(-0.5, 1.5), (0.0, 1.0));
        assert_eq!(violation(0.3, 0.4), 0.0);
        assert!((violation(-0.1, 1.2) - 0.3).abs() < 1e-15);
    }
}
