//! Finite-difference prices by perturbing and re-solving.
//!
//! Every estimate takes the optimal cost at the base point and at the two
//! perturbed points. When the one-sided slopes disagree the row sits on a
//! kink (an active-set change) and the dual is only a subgradient, so the
//! estimate is flagged degenerate instead of compared.

use std::env;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{DispatchError, DispatchProblem, DispatchSolution, Family};
use crate::qp::{self, QpSettings};

/// Default load perturbation, MW.
pub const ENERGY_EPS: f64 = 1e-4;
/// Default temperature perturbation, degrees.
pub const GRADE_EPS: f64 = 1e-3;
/// Relative disagreement of the one-sided slopes above which a row is
/// reported as degenerate.
pub const KINK_TOLERANCE: f64 = 1e-3;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "HGP_THREADS";

/// A thread pool sized by `HGP_THREADS` when set, otherwise by rayon.
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// A finite-difference slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    /// Central difference, or the available one-sided slope.
    pub value: f64,
    pub forward: Option<f64>,
    pub backward: Option<f64>,
    /// One of the perturbed problems could not be solved.
    pub one_sided: bool,
    /// The one-sided slopes disagree.
    pub degenerate: bool,
}

impl FdEstimate {
    /// Whether `x` lies between the one-sided slopes (with slack `tol`).
    pub fn brackets(&self, x: f64, tol: f64) -> bool {
        match (self.forward, self.backward) {
            (Some(f), Some(b)) => x >= f.min(b) - tol && x <= f.max(b) + tol,
            _ => false,
        }
    }
}

fn optimal_cost(problem: &DispatchProblem, settings: &QpSettings) -> Option<f64> {
    let sol = qp::solve(&problem.qp, settings).ok()?;
    sol.is_optimal().then_some(sol.objective)
}

fn estimate(
    base: &DispatchProblem,
    base_cost: f64,
    eps: f64,
    settings: &QpSettings,
    perturb: impl Fn(&mut DispatchProblem, f64),
) -> Result<FdEstimate, DispatchError> {
    let at = |delta: f64| {
        let mut p = base.clone();
        perturb(&mut p, delta);
        optimal_cost(&p, settings)
    };
    let forward = at(eps).map(|c| (c - base_cost) / eps);
    let backward = at(-eps).map(|c| (base_cost - c) / eps);
    let (value, one_sided) = match (forward, backward) {
        (Some(f), Some(b)) => ((f + b) / 2.0, false),
        (Some(f), None) => (f, true),
        (None, Some(b)) => (b, true),
        (None, None) => {
            return Err(DispatchError::Infeasible {
                diagnostic: "both perturbed problems are infeasible".into(),
            })
        }
    };
    let degenerate = match (forward, backward) {
        (Some(f), Some(b)) => (f - b).abs() > KINK_TOLERANCE * f.abs().max(b.abs()).max(1e-2),
        _ => true,
    };
    Ok(FdEstimate {
        value,
        forward,
        backward,
        one_sided,
        degenerate,
    })
}

fn base_cost(problem: &DispatchProblem, settings: &QpSettings) -> Result<f64, DispatchError> {
    Ok(problem.solve(settings)?.objective)
}

/// Marginal cost of load at `node` in `period`, $/MWh.
pub fn fd_energy_price(
    problem: &DispatchProblem,
    node: usize,
    period: usize,
    eps: f64,
    settings: &QpSettings,
) -> Result<FdEstimate, DispatchError> {
    let c0 = base_cost(problem, settings)?;
    let dt = problem.case.interval_hours();
    let mut e = estimate(problem, c0, eps, settings, |p, d| {
        p.shift_load(node, period, d)
    })?;
    e.value /= dt;
    e.forward = e.forward.map(|v| v / dt);
    e.backward = e.backward.map(|v| v / dt);
    Ok(e)
}

/// Marginal cost of raising the lower temperature bound at `location` in
/// `period`, $ per degree.
pub fn fd_grade_price(
    problem: &DispatchProblem,
    location: usize,
    period: usize,
    eps: f64,
    settings: &QpSettings,
) -> Result<FdEstimate, DispatchError> {
    let c0 = base_cost(problem, settings)?;
    estimate(problem, c0, eps, settings, |p, d| {
        p.shift_bound(Family::TemperatureMin, location, period, d)
    })
}

/// Marginal cost of raising the upper temperature bound; matches `−μ`.
pub fn fd_upper_bound_price(
    problem: &DispatchProblem,
    location: usize,
    period: usize,
    eps: f64,
    settings: &QpSettings,
) -> Result<FdEstimate, DispatchError> {
    let c0 = base_cost(problem, settings)?;
    estimate(problem, c0, eps, settings, |p, d| {
        p.shift_bound(Family::TemperatureMax, location, period, d)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceKind {
    /// LMP of a node, compared with λ.
    Energy,
    /// Lower bound of a location, compared with β.
    Grade,
    /// Upper bound of a location, compared with −μ.
    UpperBound,
}

/// One dual compared against its finite-difference estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub kind: PriceKind,
    /// Node for energy rows, location otherwise.
    pub entity: usize,
    pub period: usize,
    pub dual: f64,
    pub fd: FdEstimate,
    /// `|dual − fd| / max(|dual|, 0.01)`
    pub relative_error: f64,
}

impl OracleRow {
    pub fn passes(&self, tolerance: f64) -> bool {
        if self.fd.degenerate {
            // subgradient: only require the dual to lie between the slopes
            return self.fd.one_sided
                || self
                    .fd
                    .brackets(self.dual, tolerance * self.dual.abs().max(0.01));
        }
        self.relative_error <= tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn non_degenerate(&self) -> impl Iterator<Item = &OracleRow> {
        self.rows.iter().filter(|r| !r.fd.degenerate)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OracleRow> {
        self.rows.iter().filter(|r| !r.passes(self.tolerance))
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Which rows [`verify_prices`] checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub energy_eps: f64,
    pub grade_eps: f64,
    /// Relative agreement required of non-degenerate rows.
    pub tolerance: f64,
    /// Check every `stride`-th period (1 = all).
    pub period_stride: usize,
    pub settings: QpSettings,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            energy_eps: ENERGY_EPS,
            grade_eps: GRADE_EPS,
            tolerance: 0.01,
            period_stride: 1,
            settings: QpSettings::with_tolerance(1e-10),
        }
    }
}

/// Compares every node LMP, and every binding temperature bound, with its
/// finite-difference estimate. Runs on [`thread_pool`].
pub fn verify_prices(
    problem: &DispatchProblem,
    solution: &DispatchSolution,
    options: &OracleOptions,
) -> Result<OracleReport, DispatchError> {
    const BINDING: f64 = 1e-6;
    let case = &problem.case;
    let dt = case.interval_hours();
    let mut jobs = Vec::new();
    for t in (0..solution.periods()).step_by(options.period_stride.max(1)) {
        for node in 0..case.network.num_nodes() {
            let dual = solution.lambda[t][problem.system.balance_row(node)] / dt;
            jobs.push((PriceKind::Energy, node, t, dual));
        }
        for loc in 0..case.num_locations() {
            if solution.beta[t][loc] > BINDING {
                jobs.push((PriceKind::Grade, loc, t, solution.beta[t][loc]));
            }
            if solution.mu[t][loc] > BINDING {
                jobs.push((PriceKind::UpperBound, loc, t, -solution.mu[t][loc]));
            }
        }
    }
    let c0 = base_cost(problem, &options.settings)?;
    let run = |&(kind, entity, period, dual): &(PriceKind, usize, usize, f64)| {
        let mut fd = match kind {
            PriceKind::Energy => estimate(
                problem,
                c0,
                options.energy_eps,
                &options.settings,
                |p, d| p.shift_load(entity, period, d),
            )?,
            PriceKind::Grade => {
                estimate(problem, c0, options.grade_eps, &options.settings, |p, d| {
                    p.shift_bound(Family::TemperatureMin, entity, period, d)
                })?
            }
            PriceKind::UpperBound => {
                estimate(problem, c0, options.grade_eps, &options.settings, |p, d| {
                    p.shift_bound(Family::TemperatureMax, entity, period, d)
                })?
            }
        };
        if kind == PriceKind::Energy {
            fd.value /= dt;
            fd.forward = fd.forward.map(|v| v / dt);
            fd.backward = fd.backward.map(|v| v / dt);
        }
        Ok(OracleRow {
            kind,
            entity,
            period,
            dual,
            fd,
            relative_error: (dual - fd.value).abs() / dual.abs().max(0.01),
        })
    };
    let rows = thread_pool().install(|| {
        jobs.par_iter()
            .map(run)
            .collect::<Result<Vec<_>, DispatchError>>()
    })?;
    Ok(OracleReport {
        rows,
        tolerance: options.tolerance,
    })
}
