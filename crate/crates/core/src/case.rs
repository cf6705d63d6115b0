//! Complete dispatch scenarios and their validation.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::network::{BranchKind, HeatNetwork, NodeRole};
use crate::units::{TemperatureUnit, SECONDS_PER_HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Chp,
    Boiler,
}

/// A heat source with cost `linear·G + quadratic·G²` ($/h, G in MW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: String,
    pub node: usize,
    pub kind: SourceKind,
    /// $/MWh
    pub linear_coeff: f64,
    /// $/(MW²h)
    pub quadratic_coeff: f64,
    /// MW, per period
    pub g_min: Vec<f64>,
    /// MW, per period
    pub g_max: Vec<f64>,
}

impl SourceSpec {
    /// Cost rate in $/h at output `g` MW.
    pub fn cost_rate(&self, g: f64) -> f64 {
        self.linear_coeff * g + self.quadratic_coeff * g * g
    }

    pub fn marginal_cost(&self, g: f64) -> f64 {
        self.linear_coeff + 2.0 * self.quadratic_coeff * g
    }
}

/// Lower (quality) and upper (security) temperature bounds of one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureRequirement {
    pub location: usize,
    /// per period
    pub lower: Vec<f64>,
    /// per period
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseDefinition {
    pub name: String,
    pub description: String,
    pub network: HeatNetwork,
    pub periods: usize,
    /// Dispatch interval, s.
    pub interval_s: f64,
    /// `loads[node][t]`, MW. Source nodes carry zeros.
    pub loads: Vec<Vec<f64>>,
    pub sources: Vec<SourceSpec>,
    /// Indexed by location.
    pub requirements: Vec<TemperatureRequirement>,
    /// `ambient[t][location]`
    pub ambient: Vec<Vec<f64>>,
    /// Location temperatures before the first period.
    pub initial_temperatures: Vec<f64>,
    /// Scale of every temperature in the case; the network's heat capacity
    /// and heat transfer coefficients are per degree of this scale.
    pub unit: TemperatureUnit,
}

impl CaseDefinition {
    pub fn interval_hours(&self) -> f64 {
        self.interval_s / SECONDS_PER_HOUR
    }

    pub fn num_locations(&self) -> usize {
        self.network.num_locations()
    }

    pub fn ambient_vector(&self, t: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.ambient[t])
    }

    pub fn lower_bounds(&self, t: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.requirements.len(),
            self.requirements.iter().map(|r| r.lower[t]),
        )
    }

    pub fn upper_bounds(&self, t: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.requirements.len(),
            self.requirements.iter().map(|r| r.upper[t]),
        )
    }

    pub fn initial_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.initial_temperatures)
    }

    /// Ambient temperature is the same in every period (location by
    /// location).
    pub fn has_constant_ambient(&self) -> bool {
        self.ambient.windows(2).all(|w| w[0] == w[1])
    }

    pub fn sources_at(&self, node: usize) -> impl Iterator<Item = (usize, &SourceSpec)> {
        self.sources
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.node == node)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.network.nodes.iter().position(|n| n.name == name)
    }
}

/// A single validation finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Relative tolerance on per-location mass conservation.
const MASS_BALANCE_RTOL: f64 = 1e-9;

/// Checks every structural and physical invariant of a case. An empty
/// result means the case can be dispatched.
pub fn validate_case(case: &CaseDefinition) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let net = &case.network;
    let n = net.num_nodes();
    let nl = net.num_locations();
    let periods = case.periods;

    if periods == 0 {
        out.push(Diagnostic::new(
            "horizon.periods",
            "horizon must contain at least one period",
        ));
    }
    if !(case.interval_s > 0.0) || !case.interval_s.is_finite() {
        out.push(Diagnostic::new(
            "horizon.interval_s",
            "dispatch interval must be positive",
        ));
    }

    let mut len_check = |field: String, len: usize| {
        if len != periods {
            out.push(Diagnostic::new(
                field,
                format!("series has {len} periods, horizon has {periods}"),
            ));
        }
    };
    len_check("ambient".into(), case.ambient.len());
    if case.loads.len() != n {
        len_check("loads".into(), usize::MAX);
    }
    for (i, series) in case.loads.iter().enumerate() {
        len_check(format!("nodes[{}].load", net.nodes[i].name), series.len());
    }
    for s in &case.sources {
        len_check(format!("sources[{}].min", s.name), s.g_min.len());
        len_check(format!("sources[{}].max", s.name), s.g_max.len());
    }
    for r in &case.requirements {
        let name = net.location_name(r.location.min(nl.saturating_sub(1)));
        len_check(format!("requirements[{name}].min"), r.lower.len());
        len_check(format!("requirements[{name}].max"), r.upper.len());
    }

    for (t, row) in case.ambient.iter().enumerate() {
        if row.len() != nl {
            out.push(Diagnostic::new(
                format!("ambient[{t}]"),
                format!("expected {nl} locations, got {}", row.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            out.push(Diagnostic::new(
                format!("ambient[{t}]"),
                "non-finite temperature",
            ));
        }
    }
    if case.initial_temperatures.len() != nl {
        out.push(Diagnostic::new(
            "initial_temperatures",
            format!(
                "expected {nl} locations, got {}",
                case.initial_temperatures.len()
            ),
        ));
    }
    if case.initial_temperatures.iter().any(|v| !v.is_finite()) {
        out.push(Diagnostic::new(
            "initial_temperatures",
            "non-finite temperature",
        ));
    }

    for (i, series) in case.loads.iter().enumerate().take(n) {
        let node = &net.nodes[i];
        if series.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            out.push(Diagnostic::new(
                format!("nodes[{}].load", node.name),
                "loads must be finite and nonnegative",
            ));
        }
        if node.role == NodeRole::Source && series.iter().any(|&d| d != 0.0) {
            out.push(Diagnostic::new(
                format!("nodes[{}].load", node.name),
                "source nodes cannot carry load",
            ));
        }
    }

    for s in &case.sources {
        let field = format!("sources[{}]", s.name);
        if s.node >= n {
            out.push(Diagnostic::new(&field, format!("unknown node {}", s.node)));
            continue;
        }
        if net.nodes[s.node].role != NodeRole::Source {
            out.push(Diagnostic::new(
                &field,
                format!("node {} is not a source node", net.nodes[s.node].name),
            ));
        }
        if !(s.quadratic_coeff >= 0.0) || !s.linear_coeff.is_finite() {
            out.push(Diagnostic::new(
                &field,
                "cost coefficients must be finite with a nonnegative quadratic term",
            ));
        }
        for (lo, hi) in s.g_min.iter().zip(&s.g_max) {
            if !(*lo >= 0.0 && lo <= hi && hi.is_finite()) {
                out.push(Diagnostic::new(
                    &field,
                    format!("capacity bounds must satisfy 0 <= min <= max (got {lo} > {hi})"),
                ));
                break;
            }
        }
    }
    for (i, node) in net.nodes.iter().enumerate() {
        if node.role == NodeRole::Source && case.sources_at(i).next().is_none() {
            out.push(Diagnostic::new(
                format!("nodes[{}]", node.name),
                "source node has no heat source",
            ));
        }
    }

    if case.requirements.len() != nl {
        out.push(Diagnostic::new(
            "requirements",
            format!(
                "expected one requirement per location ({nl}), got {}",
                case.requirements.len()
            ),
        ));
    }
    for (idx, r) in case.requirements.iter().enumerate() {
        if r.location != idx {
            out.push(Diagnostic::new(
                "requirements",
                format!("requirement {idx} refers to location {}", r.location),
            ));
            continue;
        }
        let name = net.location_name(r.location);
        for (lo, hi) in r.lower.iter().zip(&r.upper) {
            if !(lo <= hi) {
                out.push(Diagnostic::new(
                    format!("requirements[{name}]"),
                    format!("lower bound {lo} exceeds upper bound {hi}"),
                ));
                break;
            }
        }
    }

    if case.interval_s > 0.0 {
        for b in net.pipes() {
            let psi = b.psi(&net.water, case.interval_s);
            if psi > 1.0 {
                out.push(Diagnostic::new(
                    format!("pipes[{}]", b.name),
                    format!("psi = {psi:.4} > 1: residence time exceeds the dispatch interval"),
                ));
            }
            if let BranchKind::Pipe(p) = b.kind {
                if !p.length.is_finite() || !p.heat_transfer_coeff.is_finite() {
                    out.push(Diagnostic::new(
                        format!("pipes[{}]", b.name),
                        "non-finite parameter",
                    ));
                }
            }
        }
    }

    let mut throughput = vec![0.0; nl];
    for b in &net.branches {
        throughput[b.to] += b.mass_flow;
    }
    for (loc, imbalance) in net.mass_imbalance().into_iter().enumerate() {
        if imbalance.abs() > MASS_BALANCE_RTOL * throughput[loc].max(1.0) {
            out.push(Diagnostic::new(
                format!("locations[{}]", net.location_name(loc)),
                format!("mass flow is not conserved (net inflow {imbalance:.6} kg/s)"),
            ));
        }
    }
    out
}

/// Expresses the case in another temperature scale.
///
/// Temperatures are mapped affinely; heat capacity and heat transfer
/// coefficients are rescaled to the new degree so that every physical
/// quantity (power, loss factors, delays) is unchanged.
pub fn convert_units(case: &CaseDefinition, target: TemperatureUnit) -> CaseDefinition {
    let from = case.unit;
    if from == target {
        return case.clone();
    }
    let (k, _) = from.affine_to(target);
    let conv = |v: &f64| from.convert(*v, target);
    let mut out = case.clone();
    out.unit = target;
    out.network.water.heat_capacity /= k;
    for b in &mut out.network.branches {
        if let BranchKind::Pipe(p) = &mut b.kind {
            p.heat_transfer_coeff /= k;
        }
    }
    for r in &mut out.requirements {
        r.lower = r.lower.iter().map(conv).collect();
        r.upper = r.upper.iter().map(conv).collect();
    }
    out.ambient = case
        .ambient
        .iter()
        .map(|row| row.iter().map(conv).collect())
        .collect();
    out.initial_temperatures = case.initial_temperatures.iter().map(conv).collect();
    out
}

/// Converts a list of temperatures between scales.
pub fn convert_temperatures(
    values: &[f64],
    from: TemperatureUnit,
    to: TemperatureUnit,
) -> Vec<f64> {
    values.iter().map(|&v| from.convert(v, to)).collect()
}
