//! Prices from duals and settlements under the two pricing rules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{DispatchProblem, DispatchSolution};
use crate::network::{HeatNetwork, NodeRole, Side};
use crate::qp::QpStatus;

#[derive(Debug, Error, PartialEq)]
pub enum PricingError {
    #[error("prices need an optimal solution, solver status is {0}")]
    NotOptimal(QpStatus),
}

/// Prices of one node in one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePrice {
    pub node: usize,
    pub period: usize,
    /// $/MWh
    pub lmp: f64,
    /// $/degree at the supply location, per period.
    pub grade_supply: f64,
    /// $/degree at the return location, per period.
    pub grade_return: f64,
}

/// `prices[period][node]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSchedule {
    pub interval_hours: f64,
    pub prices: Vec<Vec<NodePrice>>,
}

impl PriceSchedule {
    pub fn get(&self, node: usize, period: usize) -> &NodePrice {
        &self.prices[period][node]
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodePrice> {
        self.prices.iter().flatten()
    }
}

/// Reads the energy price of each node from its balance row and the grade
/// prices from the lower temperature bounds at its two locations.
pub fn extract_prices(
    problem: &DispatchProblem,
    solution: &DispatchSolution,
) -> Result<PriceSchedule, PricingError> {
    if solution.status != QpStatus::Optimal {
        return Err(PricingError::NotOptimal(solution.status));
    }
    let dt = problem.case.interval_hours();
    let prices = (0..solution.periods())
        .map(|t| {
            (0..problem.case.network.num_nodes())
                .map(|node| NodePrice {
                    node,
                    period: t,
                    lmp: solution.lambda[t][problem.system.balance_row(node)] / dt,
                    grade_supply: solution.beta[t][HeatNetwork::location_of(node, Side::Supply)],
                    grade_return: solution.beta[t][HeatNetwork::location_of(node, Side::Return)],
                })
                .collect()
        })
        .collect();
    Ok(PriceSchedule {
        interval_hours: dt,
        prices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Energy,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Pays,
    Receives,
}

/// What one node pays or receives in one period. Both flows are gross
/// amounts in $, signed by `direction`; a source's grade flow is deducted
/// from its energy receipt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlementLine {
    pub node: usize,
    pub period: usize,
    pub rule: Rule,
    pub energy_flow: f64,
    pub grade_flow: f64,
    pub direction: Direction,
}

impl SettlementLine {
    /// Net amount collected by the operator.
    pub fn to_operator(&self) -> f64 {
        match self.direction {
            Direction::Pays => self.energy_flow + self.grade_flow,
            Direction::Receives => -(self.energy_flow - self.grade_flow),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub rule: Rule,
    pub lines: Vec<SettlementLine>,
    /// Merchandise surplus of each period, $.
    pub surplus: Vec<f64>,
}

impl Settlement {
    pub fn total(&self) -> f64 {
        self.surplus.iter().sum()
    }
}

/// Load pays `p·D`, sources receive `p·G`.
pub fn settle_energy_rule(
    problem: &DispatchProblem,
    solution: &DispatchSolution,
    prices: &PriceSchedule,
) -> Settlement {
    settle(problem, solution, prices, Rule::Energy)
}

/// As [`settle_energy_rule`], plus grade payments `p_g·(T_Q − T_a)` at the
/// supply and return locations of every node.
pub fn settle_double_rule(
    problem: &DispatchProblem,
    solution: &DispatchSolution,
    prices: &PriceSchedule,
) -> Settlement {
    settle(problem, solution, prices, Rule::Double)
}

fn settle(
    problem: &DispatchProblem,
    solution: &DispatchSolution,
    prices: &PriceSchedule,
    rule: Rule,
) -> Settlement {
    let case = &problem.case;
    let dt = prices.interval_hours;
    let mut lines = Vec::new();
    let mut surplus = vec![0.0; solution.periods()];
    for (t, period_surplus) in surplus.iter_mut().enumerate() {
        for (node, n) in case.network.nodes.iter().enumerate() {
            let p = prices.get(node, t);
            let grade_flow = match rule {
                Rule::Energy => 0.0,
                Rule::Double => {
                    let s = HeatNetwork::location_of(node, Side::Supply);
                    let r = HeatNetwork::location_of(node, Side::Return);
                    p.grade_supply * (case.requirements[s].lower[t] - case.ambient[t][s])
                        + p.grade_return * (case.requirements[r].lower[t] - case.ambient[t][r])
                }
            };
            let (energy_mwh, direction) = match n.role {
                NodeRole::Load => (case.loads[node][t] * dt, Direction::Pays),
                NodeRole::Source => {
                    let g: f64 = case
                        .sources_at(node)
                        .map(|(s, _)| solution.generation[t][s])
                        .sum();
                    (g * dt, Direction::Receives)
                }
            };
            let line = SettlementLine {
                node,
                period: t,
                rule,
                energy_flow: p.lmp * energy_mwh,
                grade_flow,
                direction,
            };
            *period_surplus += line.to_operator();
            lines.push(line);
        }
    }
    Settlement {
        rule,
        lines,
        surplus,
    }
}
