//! Decomposition of the double-rule merchandise surplus.
//!
//! Per period,
//!
//! ```text
//! CR_t = μ_tᵀ(T_sa,t − T_a,t)
//! IL_t = −λ_tᵀ C2 (T_{t−1} − T_a,t)
//! IU_t = λ_{t+1}ᵀ C2 (T_t − T_a,t)        with λ_{T+1} = 0
//! ```
//!
//! and `Υ_t = CR_t + IL_t + IU_t` whenever the ambient temperature is
//! uniform across locations within the period. Over the horizon the IL/IU
//! pairs of neighbouring periods leave `IL_1` plus an ambient drift term
//! `Σ_t λ_{t+1}ᵀ C2 1 (T_a,t+1 − T_a,t)`, which vanishes at constant ambient.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::case::{convert_units, CaseDefinition};
use crate::dispatch::{DispatchError, DispatchProblem, DispatchSolution};
use crate::network::{RowKind, SystemMatrices};
use crate::pricing::{extract_prices, settle_double_rule, settle_energy_rule, Settlement};
use crate::qp::QpSettings;
use crate::units::TemperatureUnit;

/// Components of one period, $.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodComponents {
    pub cr: f64,
    pub il: f64,
    pub iu: f64,
}

impl PeriodComponents {
    pub fn sum(&self) -> f64 {
        self.cr + self.il + self.iu
    }
}

fn ambient_vec(case: &CaseDefinition, t: usize) -> DVector<f64> {
    case.ambient_vector(t)
}

/// CR, IL and IU of period `t`, from the duals alone.
pub fn decompose_period(
    solution: &DispatchSolution,
    system: &SystemMatrices,
    case: &CaseDefinition,
    t: usize,
) -> PeriodComponents {
    let amb = ambient_vec(case, t);
    let mu = DVector::from_column_slice(&solution.mu[t]);
    let cr = mu.dot(&(case.upper_bounds(t) - &amb));
    let prev = if t == 0 {
        case.initial_vector()
    } else {
        solution.temperature_vector(t - 1)
    };
    let il = -solution.lambda_vector(t).dot(&(&system.c2 * (prev - &amb)));
    let iu = solution
        .lambda_vector(t + 1)
        .dot(&(&system.c2 * (solution.temperature_vector(t) - &amb)));
    PeriodComponents { cr, il, iu }
}

/// `Υ_t − (CR_t + IL_t + IU_t)` with `Υ_t` taken from the settlement.
pub fn verify_period_identity(
    solution: &DispatchSolution,
    system: &SystemMatrices,
    case: &CaseDefinition,
    settlement: &Settlement,
    t: usize,
) -> f64 {
    settlement.surplus[t] - decompose_period(solution, system, case, t).sum()
}

/// Horizon totals and the residual of the total identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalIdentity {
    pub surplus: f64,
    pub congestion_total: f64,
    /// `−λ_1ᵀ C2 (T_0 − T_a,1)`
    pub initial_state_term: f64,
    /// Zero at constant ambient.
    pub ambient_drift: f64,
    /// `surplus − (congestion_total + initial_state_term + ambient_drift)`
    pub residual: f64,
    pub constant_ambient: bool,
}

pub fn verify_total_identity(
    solution: &DispatchSolution,
    system: &SystemMatrices,
    case: &CaseDefinition,
    settlement: &Settlement,
) -> TotalIdentity {
    let periods = solution.periods();
    let congestion_total: f64 = (0..periods)
        .map(|t| {
            let amb = ambient_vec(case, t);
            DVector::from_column_slice(&solution.mu[t]).dot(&(case.upper_bounds(t) - amb))
        })
        .sum();
    let initial_state_term = -solution
        .lambda_vector(0)
        .dot(&(&system.c2 * (case.initial_vector() - ambient_vec(case, 0))));
    let ambient_drift: f64 = (0..periods.saturating_sub(1))
        .map(|t| {
            let step = ambient_vec(case, t + 1) - ambient_vec(case, t);
            solution.lambda_vector(t + 1).dot(&(&system.c2 * step))
        })
        .sum();
    let surplus = settlement.total();
    TotalIdentity {
        surplus,
        congestion_total,
        initial_state_term,
        ambient_drift,
        residual: surplus - (congestion_total + initial_state_term + ambient_drift),
        constant_ambient: case.has_constant_ambient(),
    }
}

/// Stationarity residuals of period `t`: the temperature block
/// `C1ᵀλ_t + C2ᵀλ_{t+1} + μ_t − β_t` and the balance check
/// `λ_tᵀH_t − Σ λ_i (G_i − D_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityResidual {
    pub temperature: f64,
    pub balance: f64,
}

pub fn verify_kkt_stationarity(
    solution: &DispatchSolution,
    system: &SystemMatrices,
    case: &CaseDefinition,
    t: usize,
) -> StationarityResidual {
    let lambda = solution.lambda_vector(t);
    let grad = system.c1.tr_mul(&lambda)
        + system.c2.tr_mul(&solution.lambda_vector(t + 1))
        + DVector::from_column_slice(&solution.mu[t])
        - DVector::from_column_slice(&solution.beta[t]);
    let temperature = grad.amax();

    let prev = if t == 0 {
        case.initial_vector()
    } else {
        solution.temperature_vector(t - 1)
    };
    let h = system.evaluate(
        &solution.temperature_vector(t),
        &prev,
        &ambient_vec(case, t),
    );
    let mut injections = 0.0;
    for (r, row) in system.rows.iter().enumerate() {
        if let RowKind::NodeBalance { node } = row.kind {
            let g: f64 = case
                .sources_at(node)
                .map(|(s, _)| solution.generation[t][s])
                .sum();
            injections += lambda[r] * (g - case.loads[node][t]);
        }
    }
    StationarityResidual {
        temperature,
        balance: (lambda.dot(&h) - injections).abs(),
    }
}

/// Per-period row of a [`SurplusReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodSurplus {
    pub period: usize,
    pub cr: f64,
    pub il: f64,
    pub iu: f64,
    pub ms_energy: f64,
    pub ms_double: f64,
    /// `ms_double − (cr + il + iu)`
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurplusReport {
    pub periods: Vec<PeriodSurplus>,
    pub total: TotalIdentity,
    pub energy_total: f64,
    pub max_stationarity: f64,
    /// Sign departures (`CR < 0`, `IL < 0` or `IU > 0` beyond the
    /// tolerance), one message each.
    pub warnings: Vec<String>,
}

impl SurplusReport {
    pub fn max_period_residual(&self) -> f64 {
        self.periods
            .iter()
            .map(|p| p.residual.abs())
            .fold(0.0, f64::max)
    }
}

/// Sign tolerance of the components, $.
pub const SIGN_TOLERANCE: f64 = 1e-6;

pub fn surplus_report(
    problem: &DispatchProblem,
    solution: &DispatchSolution,
    energy: &Settlement,
    double: &Settlement,
) -> SurplusReport {
    let case = &problem.case;
    let system = &problem.system;
    let mut warnings = Vec::new();
    let periods: Vec<PeriodSurplus> = (0..solution.periods())
        .map(|t| {
            let c = decompose_period(solution, system, case, t);
            for (name, value, bad) in [
                ("CR", c.cr, c.cr < -SIGN_TOLERANCE),
                ("IL", c.il, c.il < -SIGN_TOLERANCE),
                ("IU", c.iu, c.iu > SIGN_TOLERANCE),
            ] {
                if bad {
                    warnings.push(format!(
                        "period {}: {name} = {value:.6e} has an unexpected sign",
                        t + 1
                    ));
                }
            }
            PeriodSurplus {
                period: t,
                cr: c.cr,
                il: c.il,
                iu: c.iu,
                ms_energy: energy.surplus[t],
                ms_double: double.surplus[t],
                residual: double.surplus[t] - c.sum(),
            }
        })
        .collect();
    let max_stationarity = (0..solution.periods())
        .map(|t| {
            let r = verify_kkt_stationarity(solution, system, case, t);
            r.temperature.max(r.balance)
        })
        .fold(0.0, f64::max);
    SurplusReport {
        periods,
        total: verify_total_identity(solution, system, case, double),
        energy_total: energy.total(),
        max_stationarity,
        warnings,
    }
}

/// Solves `case` and builds its surplus report together with the two
/// settlements.
pub fn analyse(case: &CaseDefinition, settings: &QpSettings) -> Result<Analysis, DispatchError> {
    let problem = DispatchProblem::new(case)?;
    let solution = problem.solve(settings)?;
    let prices = extract_prices(&problem, &solution).expect("solution is optimal");
    let energy = settle_energy_rule(&problem, &solution, &prices);
    let double = settle_double_rule(&problem, &solution, &prices);
    let report = surplus_report(&problem, &solution, &energy, &double);
    Ok(Analysis {
        problem,
        solution,
        prices,
        energy,
        double,
        report,
    })
}

/// Everything derived from one solve.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub problem: DispatchProblem,
    pub solution: DispatchSolution,
    pub prices: crate::pricing::PriceSchedule,
    pub energy: Settlement,
    pub double: Settlement,
    pub report: SurplusReport,
}

/// One unit's view in [`UnitComparison`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitView {
    pub unit: TemperatureUnit,
    pub periods: Vec<PeriodSurplus>,
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
}

/// Comparison of a case solved in °C, °F and K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitComparison {
    pub views: Vec<UnitView>,
    /// Largest relative disagreement of any surplus quantity with the °C view.
    pub surplus_deviation: f64,
    /// Largest relative disagreement of λ with the °C view.
    pub lambda_deviation: f64,
    /// Largest relative disagreement of `𝒦·μ` with the °C μ.
    pub mu_deviation: f64,
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

/// Re-solves `case` in every temperature unit and compares the results.
/// Surplus quantities are compared relative to the largest component of the
/// period, duals relative to the largest dual of their family.
pub fn verify_unit_invariance(
    case: &CaseDefinition,
    settings: &QpSettings,
) -> Result<UnitComparison, DispatchError> {
    let views: Vec<UnitView> = TemperatureUnit::ALL
        .par_iter()
        .map(|&unit| {
            let converted = convert_units(case, unit);
            let a = analyse(&converted, settings)?;
            Ok(UnitView {
                unit,
                periods: a.report.periods,
                lambda: a.solution.lambda,
                mu: a.solution.mu,
            })
        })
        .collect::<Result<_, DispatchError>>()?;

    let base = &views[0];
    let mut surplus_deviation: f64 = 0.0;
    let mut lambda_deviation: f64 = 0.0;
    let mut mu_deviation: f64 = 0.0;
    let lambda_scale = base
        .lambda
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let mu_scale = base
        .mu
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    for view in &views[1..] {
        let (k, _) = TemperatureUnit::Celsius.affine_to(view.unit);
        for (p, q) in base.periods.iter().zip(&view.periods) {
            let scale = [p.cr, p.il, p.iu, p.ms_energy, p.ms_double]
                .iter()
                .fold(1e-9_f64, |m, v| m.max(v.abs()));
            for (a, b) in [
                (p.cr, q.cr),
                (p.il, q.il),
                (p.iu, q.iu),
                (p.ms_energy, q.ms_energy),
                (p.ms_double, q.ms_double),
            ] {
                surplus_deviation = surplus_deviation.max(rel(a, b, scale));
            }
        }
        for (a, b) in base
            .lambda
            .iter()
            .flatten()
            .zip(view.lambda.iter().flatten())
        {
            lambda_deviation = lambda_deviation.max(rel(*a, *b, lambda_scale));
        }
        if mu_scale > 0.0 {
            for (a, b) in base.mu.iter().flatten().zip(view.mu.iter().flatten()) {
                mu_deviation = mu_deviation.max(rel(*a, k * b, mu_scale));
            }
        }
    }
    Ok(UnitComparison {
        views,
        surplus_deviation,
        lambda_deviation,
        mu_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    fn run(case: &CaseDefinition) -> Analysis {
        analyse(case, &QpSettings::default()).unwrap()
    }

    #[test]
    fn toy_components_vanish() {
        let a = run(&scenarios::toy());
        for p in &a.report.periods {
            assert!(p.cr.abs() < 1e-9);
            assert!((p.il + p.iu).abs() < 1e-9);
            assert!(p.residual.abs() < 1e-6);
        }
        assert!(a.report.total.residual.abs() < 1e-6);
    }

    #[test]
    fn toy_stationarity() {
        let a = run(&scenarios::toy());
        for t in 0..3 {
            let r = verify_kkt_stationarity(&a.solution, &a.problem.system, &a.problem.case, t);
            assert!(r.temperature < 1e-7 && r.balance < 1e-7, "{r:?}");
        }
    }

    #[test]
    fn identities_hold_on_bundled_cases() {
        for case in scenarios::all() {
            let a = run(&case);
            assert!(a.report.max_period_residual() < 1e-5, "{}", case.name);
            assert!(a.report.total.residual.abs() < 1e-5, "{}", case.name);
            assert!(a.report.max_stationarity < 1e-6, "{}", case.name);
        }
    }

    #[test]
    fn interval_identity_without_inertia() {
        // two periods, lossless pipes, nothing binding: both sides are zero
        let mut case = scenarios::toy();
        case.periods = 2;
        for b in &mut case.network.branches {
            if let crate::network::BranchKind::Pipe(p) = &mut b.kind {
                p.heat_transfer_coeff = 0.0;
            }
        }
        case.loads.iter_mut().for_each(|l| l.truncate(2));
        case.ambient.truncate(2);
        for s in &mut case.sources {
            s.g_min.truncate(2);
            s.g_max.truncate(2);
        }
        for r in &mut case.requirements {
            r.lower = vec![-16.0; 2];
            r.upper = vec![150.0; 2];
        }
        let a = run(&case);
        for p in &a.report.periods {
            assert!(p.ms_double.abs() < 1e-6 && p.cr.abs() < 1e-9, "{p:?}");
            assert!((p.il + p.iu).abs() < 1e-9);
        }
    }

    #[test]
    fn toy_is_unit_invariant() {
        let cmp = verify_unit_invariance(&scenarios::toy(), &QpSettings::default()).unwrap();
        assert!(cmp.surplus_deviation < 1e-6, "{cmp:?}");
        assert!(cmp.lambda_deviation < 1e-4);
    }
}
