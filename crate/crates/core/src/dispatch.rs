//! Multi-period economic dispatch as a convex QP.
//!
//! Variables are laid out period by period: the outputs of every source
//! followed by the temperature of every location. Equality rows are the
//! system rows of each period, written as
//! `C1 T_t + C2 T_{t−1} − G = −R_t − D`, so their multipliers are the
//! energy prices λ directly. Inequality rows, per period, are the source
//! capacity bounds and the upper and lower temperature bounds of every
//! location.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::CaseDefinition;
use crate::network::{assemble_system, NetworkError, RowKind, SystemMatrices};
use crate::qp::{self, KktResiduals, QpError, QpSettings, QpSolution, QpStatus, QuadraticProgram};
use crate::units::TemperatureUnit;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("malformed problem: {0}")]
    Problem(#[from] QpError),
    #[error("dispatch is infeasible: {diagnostic}")]
    Infeasible { diagnostic: String },
    #[error("solver stopped with status {status} (max KKT residual {residual:.3e})")]
    Solver { status: QpStatus, residual: f64 },
}

/// Relative slack above which a bound counts as inactive.
const SLACK_CUTOFF: f64 = 1e-6;

/// Constraint families of the dispatch QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// System row (entity = row index of [`SystemMatrices`]).
    Balance,
    /// `G ≤ Ḡ` (entity = source).
    SourceMax,
    /// `G ≥ G̲` (entity = source).
    SourceMin,
    /// `T ≤ T_sa` (entity = location).
    TemperatureMax,
    /// `T ≥ T_Q` (entity = location).
    TemperatureMin,
}

/// Identifies one QP row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub family: Family,
    pub entity: usize,
    pub period: usize,
}

/// Maps between [`RowKey`]s and QP row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMap {
    num_rows: usize,
    num_sources: usize,
    num_locations: usize,
}

impl RowMap {
    fn ineq_block(&self) -> usize {
        2 * self.num_sources + 2 * self.num_locations
    }

    /// Equality row of a system row.
    pub fn balance(&self, row: usize, period: usize) -> usize {
        period * self.num_rows + row
    }

    /// Inequality row of a bound.
    pub fn bound(&self, family: Family, entity: usize, period: usize) -> usize {
        let (ns, nl) = (self.num_sources, self.num_locations);
        let offset = match family {
            Family::SourceMax => entity,
            Family::SourceMin => ns + entity,
            Family::TemperatureMax => 2 * ns + entity,
            Family::TemperatureMin => 2 * ns + nl + entity,
            Family::Balance => panic!("balance rows are equalities"),
        };
        period * self.ineq_block() + offset
    }

    pub fn equality_key(&self, row: usize) -> RowKey {
        RowKey {
            family: Family::Balance,
            entity: row % self.num_rows,
            period: row / self.num_rows,
        }
    }

    pub fn inequality_key(&self, row: usize) -> RowKey {
        let (ns, nl) = (self.num_sources, self.num_locations);
        let period = row / self.ineq_block();
        let r = row % self.ineq_block();
        let (family, entity) = if r < ns {
            (Family::SourceMax, r)
        } else if r < 2 * ns {
            (Family::SourceMin, r - ns)
        } else if r < 2 * ns + nl {
            (Family::TemperatureMax, r - 2 * ns)
        } else {
            (Family::TemperatureMin, r - 2 * ns - nl)
        };
        RowKey {
            family,
            entity,
            period,
        }
    }
}

/// The assembled dispatch QP together with its case.
#[derive(Debug, Clone)]
pub struct DispatchProblem {
    pub case: CaseDefinition,
    pub system: SystemMatrices,
    pub qp: QuadraticProgram,
    pub rows: RowMap,
}

impl DispatchProblem {
    pub fn new(case: &CaseDefinition) -> Result<Self, DispatchError> {
        let system = assemble_system(&case.network, case.interval_s)?;
        let qp = build_problem(case, &system);
        let rows = RowMap {
            num_rows: system.dim(),
            num_sources: case.sources.len(),
            num_locations: case.num_locations(),
        };
        Ok(Self {
            case: case.clone(),
            system,
            qp,
            rows,
        })
    }

    pub fn block(&self) -> usize {
        self.case.sources.len() + self.case.num_locations()
    }

    pub fn generation_var(&self, source: usize, period: usize) -> usize {
        period * self.block() + source
    }

    pub fn temperature_var(&self, location: usize, period: usize) -> usize {
        period * self.block() + self.case.sources.len() + location
    }

    /// Describes a row for diagnostics, e.g. `upper bound of NH1^S in period 3`.
    pub fn describe(&self, key: RowKey) -> String {
        let net = &self.case.network;
        let what = match key.family {
            Family::Balance => match self.system.rows[key.entity].kind {
                RowKind::NodeBalance { node } => {
                    format!("heat balance of {}", net.nodes[node].name)
                }
                RowKind::Mixing => format!(
                    "mixing at {}",
                    net.location_name(self.system.rows[key.entity].location)
                ),
            },
            Family::SourceMax => format!("capacity of {}", self.case.sources[key.entity].name),
            Family::SourceMin => {
                format!("minimum output of {}", self.case.sources[key.entity].name)
            }
            Family::TemperatureMax => {
                format!(
                    "upper temperature bound at {}",
                    net.location_name(key.entity)
                )
            }
            Family::TemperatureMin => {
                format!(
                    "lower temperature bound at {}",
                    net.location_name(key.entity)
                )
            }
        };
        format!("{what} in period {}", key.period + 1)
    }

    /// Adds `delta` MW to the load of `node` in `period`.
    pub fn shift_load(&mut self, node: usize, period: usize, delta: f64) {
        let row = self.rows.balance(self.system.balance_row(node), period);
        self.qp.eq_rhs[row] -= delta;
    }

    /// Shifts a temperature bound of `location` in `period` by `delta`.
    pub fn shift_bound(&mut self, family: Family, location: usize, period: usize, delta: f64) {
        let row = self.rows.bound(family, location, period);
        match family {
            Family::TemperatureMax => self.qp.ineq_rhs[row] += delta,
            Family::TemperatureMin => self.qp.ineq_rhs[row] -= delta,
            _ => panic!("not a temperature bound"),
        }
    }

    pub fn solve(&self, settings: &QpSettings) -> Result<DispatchSolution, DispatchError> {
        let sol = qp::solve(&self.qp, settings)?;
        match sol.status {
            QpStatus::Optimal => Ok(self.unpack(&sol)),
            QpStatus::Infeasible => Err(DispatchError::Infeasible {
                diagnostic: self.infeasibility_diagnostic(&sol),
            }),
            status => Err(DispatchError::Solver {
                status,
                residual: sol.residuals.max_residual(),
            }),
        }
    }

    fn infeasibility_diagnostic(&self, sol: &QpSolution) -> String {
        let case = &self.case;
        for t in 0..case.periods {
            let load: f64 = case.loads.iter().map(|l| l[t]).sum();
            let cap: f64 = case.sources.iter().map(|s| s.g_max[t]).sum();
            if cap < load {
                return format!(
                    "capacity shortfall in period {}: loads {load:.3} MW exceed total capacity {cap:.3} MW",
                    t + 1
                );
            }
        }
        // the largest multiplier of the certificate points at the binding
        // constraint
        let worst = sol
            .duals_ineq
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| self.rows.inequality_key(i));
        match worst {
            Some(key) => format!("{} cannot be met", self.describe(key)),
            None => "equality constraints are inconsistent".into(),
        }
    }

    fn unpack(&self, sol: &QpSolution) -> DispatchSolution {
        let case = &self.case;
        let (ns, nl) = (case.sources.len(), case.num_locations());
        let x = &sol.primal;
        // multipliers of clearly slack rows are interior-point noise; zero
        // them so that slack requirements carry no price at all
        let slacks = sol.slacks(&self.qp);
        let duals_ineq: Vec<f64> = sol
            .duals_ineq
            .iter()
            .zip(&slacks)
            .zip(&self.qp.ineq_rhs)
            .map(|((&z, &s), &h)| {
                if s > SLACK_CUTOFF * (1.0 + h.abs()) && z < SLACK_CUTOFF {
                    0.0
                } else {
                    z
                }
            })
            .collect();
        let per_period = |f: &dyn Fn(usize) -> Vec<f64>| (0..case.periods).map(f).collect();
        let ineq = |family, n: usize| -> Vec<Vec<f64>> {
            per_period(&|t| {
                (0..n)
                    .map(|e| duals_ineq[self.rows.bound(family, e, t)])
                    .collect()
            })
        };
        DispatchSolution {
            unit: case.unit,
            interval_hours: case.interval_hours(),
            status: sol.status,
            objective: sol.objective,
            iterations: sol.iterations,
            residuals: sol.residuals,
            generation: per_period(&|t| (0..ns).map(|s| x[self.generation_var(s, t)]).collect()),
            temperatures: per_period(&|t| (0..nl).map(|l| x[self.temperature_var(l, t)]).collect()),
            lambda: per_period(&|t| {
                (0..self.system.dim())
                    .map(|r| sol.duals_eq[self.rows.balance(r, t)])
                    .collect()
            }),
            mu: ineq(Family::TemperatureMax, nl),
            beta: ineq(Family::TemperatureMin, nl),
            gamma_max: ineq(Family::SourceMax, ns),
            gamma_min: ineq(Family::SourceMin, ns),
        }
    }
}

/// Builds the dispatch QP of `case` on the assembled `system`.
pub fn build_problem(case: &CaseDefinition, system: &SystemMatrices) -> QuadraticProgram {
    let ns = case.sources.len();
    let nl = case.num_locations();
    let block = ns + nl;
    let dt = case.interval_hours();
    let mut qp = QuadraticProgram::new(block * case.periods);
    let t0 = case.initial_vector();

    for t in 0..case.periods {
        let g = |s: usize| t * block + s;
        let temp = |l: usize| t * block + ns + l;
        for (s, src) in case.sources.iter().enumerate() {
            qp.linear[g(s)] = src.linear_coeff * dt;
            qp.hessian.add(g(s), g(s), 2.0 * src.quadratic_coeff * dt);
        }

        let r_t = system.ambient_term(&case.ambient_vector(t));
        let carry: DVector<f64> = if t == 0 {
            &system.c2 * &t0
        } else {
            DVector::zeros(nl)
        };
        for (r, row) in system.rows.iter().enumerate() {
            let mut coeffs = Vec::new();
            for l in 0..nl {
                let c1 = system.c1[(r, l)];
                if c1 != 0.0 {
                    coeffs.push((temp(l), c1));
                }
                if t > 0 {
                    let c2 = system.c2[(r, l)];
                    if c2 != 0.0 {
                        coeffs.push(((t - 1) * block + ns + l, c2));
                    }
                }
            }
            let mut rhs = -r_t[r] - carry[r];
            if let RowKind::NodeBalance { node } = row.kind {
                for (s, _) in case.sources_at(node) {
                    coeffs.push((g(s), -1.0));
                }
                rhs -= case.loads[node][t];
            }
            qp.add_equality(&coeffs, rhs);
        }

        for (s, src) in case.sources.iter().enumerate() {
            qp.add_inequality(&[(g(s), 1.0)], src.g_max[t]);
        }
        for (s, src) in case.sources.iter().enumerate() {
            qp.add_inequality(&[(g(s), -1.0)], -src.g_min[t]);
        }
        for (l, req) in case.requirements.iter().enumerate() {
            qp.add_inequality(&[(temp(l), 1.0)], req.upper[t]);
        }
        for (l, req) in case.requirements.iter().enumerate() {
            qp.add_inequality(&[(temp(l), -1.0)], -req.lower[t]);
        }
    }
    qp
}

/// Operating cost of a schedule `generation[t][source]`, $.
pub fn evaluate_cost(case: &CaseDefinition, generation: &[Vec<f64>]) -> f64 {
    let dt = case.interval_hours();
    generation
        .iter()
        .map(|g| {
            case.sources
                .iter()
                .zip(g)
                .map(|(s, &v)| s.cost_rate(v) * dt)
                .sum::<f64>()
        })
        .sum()
}

/// Optimal schedule with every multiplier, indexed `[period][…]`.
///
/// `lambda` follows the system row order; `mu` and `beta` (upper and lower
/// temperature bounds) follow location order; `gamma_max` and `gamma_min`
/// follow source order. Multipliers are per period: divide by
/// `interval_hours` for hourly rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub unit: TemperatureUnit,
    pub interval_hours: f64,
    pub status: QpStatus,
    pub objective: f64,
    pub iterations: usize,
    pub residuals: KktResiduals,
    pub generation: Vec<Vec<f64>>,
    pub temperatures: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma_max: Vec<Vec<f64>>,
    pub gamma_min: Vec<Vec<f64>>,
}

impl DispatchSolution {
    pub fn periods(&self) -> usize {
        self.generation.len()
    }

    /// `λ_{t}` as a vector, zero past the horizon.
    pub fn lambda_vector(&self, t: usize) -> DVector<f64> {
        match self.lambda.get(t) {
            Some(l) => DVector::from_column_slice(l),
            None => DVector::zeros(self.lambda.first().map_or(0, Vec::len)),
        }
    }

    pub fn temperature_vector(&self, t: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.temperatures[t])
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Balance => "balance",
            Family::SourceMax => "source_max",
            Family::SourceMin => "source_min",
            Family::TemperatureMax => "temperature_max",
            Family::TemperatureMin => "temperature_min",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    fn toy_one_period() -> CaseDefinition {
        let mut case = scenarios::toy();
        case.periods = 1;
        case.loads.iter_mut().for_each(|l| l.truncate(1));
        case.ambient.truncate(1);
        for s in &mut case.sources {
            s.g_min.truncate(1);
            s.g_max.truncate(1);
        }
        for r in &mut case.requirements {
            r.lower.truncate(1);
            r.upper.truncate(1);
        }
        case
    }

    #[test]
    fn toy_problem_shape() {
        let p = DispatchProblem::new(&toy_one_period()).unwrap();
        assert_eq!(p.qp.num_vars(), 5);
        assert_eq!(p.qp.num_eq(), 4);
        assert_eq!(p.qp.num_ineq(), 10);
    }

    #[test]
    fn row_map_round_trips() {
        let p = DispatchProblem::new(&scenarios::fournode()).unwrap();
        for i in 0..p.qp.num_ineq() {
            let key = p.rows.inequality_key(i);
            assert_eq!(p.rows.bound(key.family, key.entity, key.period), i);
        }
        for i in 0..p.qp.num_eq() {
            let key = p.rows.equality_key(i);
            assert_eq!(p.rows.balance(key.entity, key.period), i);
        }
    }

    #[test]
    fn toy_dispatch_matches_hand_solution() {
        let p = DispatchProblem::new(&scenarios::toy()).unwrap();
        let sol = p.solve(&QpSettings::default()).unwrap();
        for t in 0..3 {
            let g = sol.generation[t][0];
            assert!((g - 2.134).abs() < 2e-3, "G = {g}");
            let temps = &sol.temperatures[t];
            assert!(
                (temps[2] - 60.0).abs() < 1e-6,
                "supply at load {}",
                temps[2]
            );
            assert!((temps[0] - 60.058).abs() < 2e-3);
            assert!((temps[3] - 58.278).abs() < 2e-3);
            assert!((temps[1] - 58.221).abs() < 2e-3);
            // only the supply requirement at the load binds
            assert!(sol.beta[t][2] > 1e-3);
            for l in [0, 1, 3] {
                assert!(sol.beta[t][l] < 1e-7 && sol.mu[t][l] < 1e-7);
            }
        }
    }

    #[test]
    fn cost_matches_objective() {
        let case = scenarios::fournode();
        let p = DispatchProblem::new(&case).unwrap();
        let sol = p.solve(&QpSettings::default()).unwrap();
        let cost = evaluate_cost(&case, &sol.generation);
        assert!((cost - sol.objective).abs() < 1e-6 * cost.abs());
    }

    #[test]
    fn capacity_shortfall_is_named() {
        let mut case = scenarios::toy();
        case.sources[0].g_max = vec![1.0; case.periods];
        let err = DispatchProblem::new(&case)
            .unwrap()
            .solve(&QpSettings::default())
            .unwrap_err();
        assert!(err.to_string().contains("capacity shortfall"), "{err}");
    }

    #[test]
    fn unreachable_temperature_is_named() {
        let mut case = scenarios::toy();
        // the load cannot be kept at 60 °C if the source may not exceed 59 °C
        case.requirements[0].upper = vec![59.0; case.periods];
        let err = DispatchProblem::new(&case)
            .unwrap()
            .solve(&QpSettings::default())
            .unwrap_err();
        match err {
            DispatchError::Infeasible { diagnostic } => {
                assert!(diagnostic.contains("temperature bound"), "{diagnostic}")
            }
            other => panic!("unexpected {other}"),
        }
    }
}
