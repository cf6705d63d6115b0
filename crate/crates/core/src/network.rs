//! Supply/return heat network topology and its linear thermal model.
//!
//! A network of `n` heat nodes has `2n` locations: every node owns one
//! location in the supply network and one in the return network. Water moves
//! along `n + k` branches, the `k` pipes plus one exchanger branch per node.
//! A load's exchanger carries water from its supply location to its return
//! location; a source's exchanger carries it the other way.
//!
//! Writing the energy balance at every location gives one linear equation
//! per location,
//!
//! ```text
//! H_t = C1 T_t + C2 T_{t-1} + R_t
//! C1  = A_out Gc A_outᵀ − A_in Gc D a A_outᵀ
//! C2  = −A_in Gc D b A_outᵀ
//! R_t = A_in Gc (D − I) A_outᵀ T_a,t
//! ```
//!
//! where `A_out`/`A_in` mark each branch's start and end location, `Gc = c·m`,
//! `D` holds the pipe loss factors `exp(−vL/(cm))`, `b = ψ = ρSL/(mΔt)` is
//! the share of a pipe's outlet water that entered during the previous
//! interval and `a = 1 − ψ`. The row at the downstream end of a node's
//! exchanger is that node's heat balance (`H = G − D`); every other row is a
//! mixing equation (`H = 0`). All coefficients are in MW per degree.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::W_PER_MW;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("topology error: {0}")]
    Topology(String),
    #[error("invalid parameter on {branch}: {message}")]
    Parameter { branch: String, message: String },
    #[error("pipe {branch}: psi = {psi:.4} exceeds 1; water residence time is longer than the dispatch interval")]
    ModelValidity { branch: String, psi: f64 },
    #[error("assembly error: {0}")]
    Assembly(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Supply,
    Return,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Supply => "S",
            Side::Return => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub id: usize,
    pub node: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Source,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatNode {
    pub name: String,
    pub role: NodeRole,
    /// Mass flow through the node's exchanger, kg/s.
    pub exchanger_mass_flow: f64,
}

/// Physical data of a pipe branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeParams {
    /// m
    pub length: f64,
    /// m²; zero means the water crosses the pipe within one interval
    pub cross_section: f64,
    /// W/(m·degree)
    pub heat_transfer_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BranchKind {
    Pipe(PipeParams),
    Exchanger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub name: String,
    pub kind: BranchKind,
    pub from: usize,
    pub to: usize,
    /// kg/s
    pub mass_flow: f64,
}

impl Branch {
    pub fn is_pipe(&self) -> bool {
        matches!(self.kind, BranchKind::Pipe(_))
    }

    /// `exp(−vL/(cm))`; exactly 1 for exchangers and lossless pipes.
    pub fn loss_factor(&self, water: &Water) -> f64 {
        match self.kind {
            BranchKind::Pipe(p) if p.heat_transfer_coeff != 0.0 => {
                (-p.heat_transfer_coeff * p.length / (water.heat_capacity * self.mass_flow)).exp()
            }
            _ => 1.0,
        }
    }

    /// `ρSL/(mΔt)`; zero for exchangers.
    pub fn psi(&self, water: &Water, interval_s: f64) -> f64 {
        match self.kind {
            BranchKind::Pipe(p) => {
                water.density * p.cross_section * p.length / (self.mass_flow * interval_s)
            }
            BranchKind::Exchanger => 0.0,
        }
    }
}

/// Water properties. The heat capacity is per degree of whatever
/// temperature scale the surrounding case uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Water {
    /// J/(kg·degree)
    pub heat_capacity: f64,
    /// kg/m³
    pub density: f64,
}

impl Default for Water {
    fn default() -> Self {
        Self {
            heat_capacity: 4182.0,
            density: 1000.0,
        }
    }
}

/// Pipe as given by a case: joins two nodes on one side of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeSpec {
    pub name: String,
    pub side: Side,
    pub from_node: usize,
    pub to_node: usize,
    pub params: PipeParams,
    pub mass_flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    /// 1 at (from-location, branch)
    pub outset: DMatrix<f64>,
    /// 1 at (to-location, branch)
    pub extremity: DMatrix<f64>,
}

/// Builds the outset and extremity incidence matrices (`2n × (n+k)`).
pub fn build_incidence(
    locations: &[Location],
    branches: &[Branch],
) -> Result<Incidence, NetworkError> {
    let nl = locations.len();
    for (i, loc) in locations.iter().enumerate() {
        if loc.id != i {
            return Err(NetworkError::Topology(format!(
                "location at position {i} has id {}",
                loc.id
            )));
        }
    }
    let mut outset = DMatrix::zeros(nl, branches.len());
    let mut extremity = DMatrix::zeros(nl, branches.len());
    for (b, branch) in branches.iter().enumerate() {
        for end in [branch.from, branch.to] {
            if end >= nl {
                return Err(NetworkError::Topology(format!(
                    "branch {} references missing location {end}",
                    branch.name
                )));
            }
        }
        outset[(branch.from, b)] = 1.0;
        extremity[(branch.to, b)] = 1.0;
    }
    for loc in locations {
        let touched = (0..branches.len())
            .any(|b| outset[(loc.id, b)] != 0.0 || extremity[(loc.id, b)] != 0.0);
        if !touched {
            return Err(NetworkError::Topology(format!(
                "location {} (node {}, {:?}) has no incident branch",
                loc.id, loc.node, loc.side
            )));
        }
    }
    Ok(Incidence { outset, extremity })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatNetwork {
    pub nodes: Vec<HeatNode>,
    pub locations: Vec<Location>,
    /// Pipes first (input order), then one exchanger per node (node order).
    pub branches: Vec<Branch>,
    pub water: Water,
    pub incidence: Incidence,
}

impl HeatNetwork {
    /// Location id of a node's supply or return side.
    pub fn location_of(node: usize, side: Side) -> usize {
        match side {
            Side::Supply => 2 * node,
            Side::Return => 2 * node + 1,
        }
    }

    pub fn new(
        nodes: Vec<HeatNode>,
        pipes: Vec<PipeSpec>,
        water: Water,
    ) -> Result<Self, NetworkError> {
        if nodes.is_empty() {
            return Err(NetworkError::Topology("network has no nodes".into()));
        }
        let locations: Vec<Location> = (0..nodes.len())
            .flat_map(|node| {
                [Side::Supply, Side::Return].map(|side| Location {
                    id: Self::location_of(node, side),
                    node,
                    side,
                })
            })
            .collect();
        let mut branches = Vec::with_capacity(pipes.len() + nodes.len());
        for pipe in pipes {
            for end in [pipe.from_node, pipe.to_node] {
                if end >= nodes.len() {
                    return Err(NetworkError::Topology(format!(
                        "pipe {} references missing node {end}",
                        pipe.name
                    )));
                }
            }
            if pipe.from_node == pipe.to_node {
                return Err(NetworkError::Topology(format!(
                    "pipe {} starts and ends at the same node",
                    pipe.name
                )));
            }
            branches.push(Branch {
                from: Self::location_of(pipe.from_node, pipe.side),
                to: Self::location_of(pipe.to_node, pipe.side),
                name: pipe.name,
                kind: BranchKind::Pipe(pipe.params),
                mass_flow: pipe.mass_flow,
            });
        }
        for (i, node) in nodes.iter().enumerate() {
            let (from, to) = match node.role {
                NodeRole::Load => (Side::Supply, Side::Return),
                NodeRole::Source => (Side::Return, Side::Supply),
            };
            branches.push(Branch {
                name: format!("{}:exchanger", node.name),
                kind: BranchKind::Exchanger,
                from: Self::location_of(i, from),
                to: Self::location_of(i, to),
                mass_flow: node.exchanger_mass_flow,
            });
        }
        Self::from_parts(nodes, locations, branches, water)
    }

    /// Builds a network from explicit locations and branches.
    pub fn from_parts(
        nodes: Vec<HeatNode>,
        locations: Vec<Location>,
        branches: Vec<Branch>,
        water: Water,
    ) -> Result<Self, NetworkError> {
        if water.heat_capacity <= 0.0 || water.density <= 0.0 {
            return Err(NetworkError::Parameter {
                branch: "water".into(),
                message: "heat capacity and density must be positive".into(),
            });
        }
        if locations.len() != 2 * nodes.len() {
            return Err(NetworkError::Topology(format!(
                "{} nodes need {} locations, got {}",
                nodes.len(),
                2 * nodes.len(),
                locations.len()
            )));
        }
        for (i, _) in nodes.iter().enumerate() {
            for side in [Side::Supply, Side::Return] {
                let count = locations
                    .iter()
                    .filter(|l| l.node == i && l.side == side)
                    .count();
                if count != 1 {
                    return Err(NetworkError::Topology(format!(
                        "node {i} owns {count} {side:?} locations"
                    )));
                }
            }
        }
        for branch in &branches {
            validate_branch(branch, &locations)?;
        }
        let exchangers = branches.iter().filter(|b| !b.is_pipe()).count();
        if exchangers != nodes.len() {
            return Err(NetworkError::Topology(format!(
                "expected one exchanger per node ({}), found {exchangers}",
                nodes.len()
            )));
        }
        let incidence = build_incidence(&locations, &branches)?;
        let net = Self {
            nodes,
            locations,
            branches,
            water,
            incidence,
        };
        debug_assert_eq!(net.incidence.outset.nrows(), 2 * net.nodes.len());
        debug_assert_eq!(
            net.incidence.outset.ncols(),
            net.nodes.len() + net.num_pipes()
        );
        Ok(net)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn num_pipes(&self) -> usize {
        self.branches.iter().filter(|b| b.is_pipe()).count()
    }

    pub fn pipes(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.is_pipe())
    }

    /// The exchanger branch of `node`.
    pub fn exchanger(&self, node: usize) -> &Branch {
        self.branches
            .iter()
            .filter(|b| !b.is_pipe())
            .find(|b| self.locations[b.to].node == node)
            .expect("every node has an exchanger")
    }

    /// Location whose energy balance is the node's heat balance.
    pub fn balance_location(&self, node: usize) -> usize {
        self.exchanger(node).to
    }

    pub fn location_name(&self, loc: usize) -> String {
        let l = self.locations[loc];
        format!("{}^{}", self.nodes[l.node].name, l.side.label())
    }

    /// `diag(c·m)` over branches, W per degree.
    pub fn conductance(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.branches.len(),
            self.branches
                .iter()
                .map(|b| self.water.heat_capacity * b.mass_flow),
        )
    }

    /// `(A_in − A_out) · Gc · 1`, the net heat-capacity flow into every
    /// location (W per degree). Zero when mass flows are consistent.
    pub fn hydraulic_imbalance(&self) -> DVector<f64> {
        let diff = &self.incidence.extremity - &self.incidence.outset;
        diff * self.conductance()
    }

    /// Mass-flow imbalance per location, kg/s.
    pub fn mass_imbalance(&self) -> Vec<f64> {
        let mut net = vec![0.0; self.num_locations()];
        for b in &self.branches {
            net[b.to] += b.mass_flow;
            net[b.from] -= b.mass_flow;
        }
        net
    }
}

fn validate_branch(branch: &Branch, locations: &[Location]) -> Result<(), NetworkError> {
    let bad = |message: &str| NetworkError::Parameter {
        branch: branch.name.clone(),
        message: message.to_string(),
    };
    if !(branch.mass_flow > 0.0) || !branch.mass_flow.is_finite() {
        return Err(bad("mass flow must be positive"));
    }
    for end in [branch.from, branch.to] {
        if end >= locations.len() {
            return Err(NetworkError::Topology(format!(
                "branch {} references missing location {end}",
                branch.name
            )));
        }
    }
    let from = locations[branch.from];
    let to = locations[branch.to];
    match branch.kind {
        BranchKind::Pipe(p) => {
            if from.side != to.side {
                return Err(NetworkError::Topology(format!(
                    "pipe {} crosses between supply and return networks",
                    branch.name
                )));
            }
            if !(p.length > 0.0) {
                return Err(bad("length must be positive"));
            }
            if !(p.cross_section >= 0.0) {
                return Err(bad("cross-section must be nonnegative"));
            }
            if !(p.heat_transfer_coeff >= 0.0) {
                return Err(bad("heat transfer coefficient must be nonnegative"));
            }
        }
        BranchKind::Exchanger => {
            if from.node != to.node || from.side == to.side {
                return Err(NetworkError::Topology(format!(
                    "exchanger {} must join the two locations of one node",
                    branch.name
                )));
            }
        }
    }
    Ok(())
}

/// Outlet temperature of a pipe from its inlet temperatures at the current
/// and previous interval.
pub fn pipe_outlet_temperature(
    pipe: &Branch,
    water: &Water,
    inlet_now: f64,
    inlet_prev: f64,
    ambient: f64,
    interval_s: f64,
) -> Result<f64, NetworkError> {
    if !pipe.is_pipe() {
        return Err(NetworkError::Parameter {
            branch: pipe.name.clone(),
            message: "not a pipe".into(),
        });
    }
    if !(interval_s > 0.0) {
        return Err(NetworkError::Parameter {
            branch: pipe.name.clone(),
            message: "dispatch interval must be positive".into(),
        });
    }
    let psi = pipe.psi(water, interval_s);
    if psi > 1.0 {
        return Err(NetworkError::ModelValidity {
            branch: pipe.name.clone(),
            psi,
        });
    }
    let blended = (1.0 - psi) * inlet_now + psi * inlet_prev;
    Ok((blended - ambient) * pipe.loss_factor(water) + ambient)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    /// Heat balance of a node: `H = G − D`.
    NodeBalance { node: usize },
    /// Temperature mixing at a location: `H = 0`.
    Mixing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRow {
    pub kind: RowKind,
    /// Location whose energy balance this row expresses.
    pub location: usize,
}

/// Assembled coefficients of `H_t = C1 T_t + C2 T_{t−1} + R_t`.
///
/// Rows are ordered node balances first (node order), then mixing rows
/// (location order). Columns follow location order. Units: MW per degree.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    /// `R_t = ambient_coeff · T_a,t`
    pub ambient_coeff: DMatrix<f64>,
    pub rows: Vec<SystemRow>,
    /// Per branch, in network branch order (1 for exchangers).
    pub loss_factors: Vec<f64>,
    /// Per branch, in network branch order (0 for exchangers).
    pub psi: Vec<f64>,
}

impl SystemMatrices {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn ambient_term(&self, ambient: &DVector<f64>) -> DVector<f64> {
        &self.ambient_coeff * ambient
    }

    /// `H_t` for the given location temperatures.
    pub fn evaluate(
        &self,
        now: &DVector<f64>,
        prev: &DVector<f64>,
        ambient: &DVector<f64>,
    ) -> DVector<f64> {
        &self.c1 * now + &self.c2 * prev + self.ambient_term(ambient)
    }

    /// Row index of `node`'s heat balance.
    pub fn balance_row(&self, node: usize) -> usize {
        self.rows
            .iter()
            .position(|r| r.kind == RowKind::NodeBalance { node })
            .expect("every node has a balance row")
    }
}

/// Assembles the thermal system for a dispatch interval of `interval_s`.
pub fn assemble_system(net: &HeatNetwork, interval_s: f64) -> Result<SystemMatrices, NetworkError> {
    if !(interval_s > 0.0) {
        return Err(NetworkError::Assembly(
            "dispatch interval must be positive".into(),
        ));
    }
    let nb = net.branches.len();
    let nl = net.num_locations();
    let mut psi = Vec::with_capacity(nb);
    let mut loss = Vec::with_capacity(nb);
    for b in &net.branches {
        let p = b.psi(&net.water, interval_s);
        if p > 1.0 {
            return Err(NetworkError::ModelValidity {
                branch: b.name.clone(),
                psi: p,
            });
        }
        psi.push(p);
        loss.push(b.loss_factor(&net.water));
    }
    let inflow = net.incidence.extremity.column_sum();
    for (loc, &count) in inflow.iter().enumerate() {
        if count == 0.0 {
            return Err(NetworkError::Assembly(format!(
                "location {} receives no water",
                net.location_name(loc)
            )));
        }
    }

    let gc = net.conductance() / W_PER_MW;
    let a_out = &net.incidence.outset;
    let a_in = &net.incidence.extremity;
    let gc_d_a = DVector::from_iterator(nb, (0..nb).map(|b| gc[b] * loss[b] * (1.0 - psi[b])));
    let gc_d_b = DVector::from_iterator(nb, (0..nb).map(|b| gc[b] * loss[b] * psi[b]));
    let gc_d_i = DVector::from_iterator(nb, (0..nb).map(|b| gc[b] * (loss[b] - 1.0)));

    let scale_cols = |m: &DMatrix<f64>, d: &DVector<f64>| {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= d[j];
        }
        out
    };
    let out_t = a_out.transpose();
    let c1_loc = scale_cols(a_out, &gc) * &out_t - scale_cols(a_in, &gc_d_a) * &out_t;
    let c2_loc = -(scale_cols(a_in, &gc_d_b) * &out_t);
    let amb_loc = scale_cols(a_in, &gc_d_i) * &out_t;

    let mut rows = Vec::with_capacity(nl);
    for node in 0..net.num_nodes() {
        rows.push(SystemRow {
            kind: RowKind::NodeBalance { node },
            location: net.balance_location(node),
        });
    }
    for loc in 0..nl {
        if !rows.iter().any(|r| r.location == loc) {
            rows.push(SystemRow {
                kind: RowKind::Mixing,
                location: loc,
            });
        }
    }
    debug_assert_eq!(rows.len(), nl);
    let permute = |m: &DMatrix<f64>| DMatrix::from_fn(nl, nl, |r, c| m[(rows[r].location, c)]);

    Ok(SystemMatrices {
        c1: permute(&c1_loc),
        c2: permute(&c2_loc),
        ambient_coeff: permute(&amb_loc),
        rows: rows.clone(),
        loss_factors: loss,
        psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const T_PER_H: f64 = 1000.0 / 3600.0;

    fn node(name: &str, role: NodeRole) -> HeatNode {
        HeatNode {
            name: name.into(),
            role,
            exchanger_mass_flow: 1000.0 * T_PER_H,
        }
    }

    fn pipe(name: &str, side: Side, from: usize, to: usize, v: f64, s: f64) -> PipeSpec {
        PipeSpec {
            name: name.into(),
            side,
            from_node: from,
            to_node: to,
            params: PipeParams {
                length: 9000.0,
                cross_section: s,
                heat_transfer_coeff: v,
            },
            mass_flow: 1000.0 * T_PER_H,
        }
    }

    fn toy(v: f64, s: f64) -> HeatNetwork {
        HeatNetwork::new(
            vec![node("NH1", NodeRole::Source), node("NH2", NodeRole::Load)],
            vec![
                pipe("b1", Side::Supply, 0, 1, v, s),
                pipe("b2", Side::Return, 1, 0, v, s),
            ],
            Water::default(),
        )
        .unwrap()
    }

    #[test]
    fn toy_incidence_has_table_sizes() {
        let net = toy(0.099, 0.0);
        assert_eq!(net.incidence.outset.shape(), (4, 4));
        assert_eq!(net.incidence.extremity.shape(), (4, 4));
        for m in [&net.incidence.outset, &net.incidence.extremity] {
            for col in m.column_iter() {
                assert_eq!(col.sum(), 1.0);
            }
        }
        // b1 runs NH1^S -> NH2^S
        assert_eq!(net.incidence.outset[(0, 0)], 1.0);
        assert_eq!(net.incidence.extremity[(2, 0)], 1.0);
    }

    #[test]
    fn single_exchanger_self_loop() {
        let locations = vec![
            Location {
                id: 0,
                node: 0,
                side: Side::Supply,
            },
            Location {
                id: 1,
                node: 0,
                side: Side::Return,
            },
        ];
        let branches = vec![Branch {
            name: "x".into(),
            kind: BranchKind::Exchanger,
            from: 0,
            to: 1,
            mass_flow: 1.0,
        }];
        let inc = build_incidence(&locations, &branches).unwrap();
        assert_eq!(inc.outset.as_slice(), &[1.0, 0.0]);
        assert_eq!(inc.extremity.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn incidence_errors() {
        let locations = vec![
            Location {
                id: 0,
                node: 0,
                side: Side::Supply,
            },
            Location {
                id: 1,
                node: 0,
                side: Side::Return,
            },
            Location {
                id: 2,
                node: 1,
                side: Side::Supply,
            },
        ];
        let dangling = vec![Branch {
            name: "x".into(),
            kind: BranchKind::Exchanger,
            from: 0,
            to: 7,
            mass_flow: 1.0,
        }];
        assert!(matches!(
            build_incidence(&locations, &dangling),
            Err(NetworkError::Topology(_))
        ));
        let isolated = vec![Branch {
            name: "x".into(),
            kind: BranchKind::Exchanger,
            from: 0,
            to: 1,
            mass_flow: 1.0,
        }];
        let err = build_incidence(&locations, &isolated).unwrap_err();
        assert!(err.to_string().contains("no incident branch"));
    }

    #[test]
    fn pipe_rejects_mixed_sides_and_bad_parameters() {
        let mut bad = pipe("b1", Side::Supply, 0, 1, 0.1, 0.0);
        bad.mass_flow = 0.0;
        let err = HeatNetwork::new(
            vec![node("a", NodeRole::Source), node("b", NodeRole::Load)],
            vec![bad],
            Water::default(),
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::Parameter { .. }));

        let locations = vec![
            Location {
                id: 0,
                node: 0,
                side: Side::Supply,
            },
            Location {
                id: 1,
                node: 0,
                side: Side::Return,
            },
        ];
        let crossing = Branch {
            name: "p".into(),
            kind: BranchKind::Pipe(PipeParams {
                length: 1.0,
                cross_section: 0.0,
                heat_transfer_coeff: 0.0,
            }),
            from: 0,
            to: 1,
            mass_flow: 1.0,
        };
        assert!(validate_branch(&crossing, &locations).is_err());
    }

    #[test]
    fn lossless_zero_delay_outlet_equals_inlet() {
        let net = toy(0.0, 0.0);
        let b1 = &net.branches[0];
        let out = pipe_outlet_temperature(b1, &net.water, 71.3, 12.0, -16.0, 3600.0).unwrap();
        assert_eq!(out, 71.3);
        assert_eq!(b1.loss_factor(&net.water), 1.0);
    }

    #[test]
    fn toy_pipe_outlet_temperatures() {
        let net = toy(0.099, 0.0);
        let b1 = &net.branches[0];
        let loss = b1.loss_factor(&net.water);
        assert!((loss - 0.999233).abs() < 5e-7);
        let supply = pipe_outlet_temperature(b1, &net.water, 60.06, 60.06, -16.0, 3600.0).unwrap();
        assert!((supply - 60.00).abs() < 0.005);
        let ret = pipe_outlet_temperature(b1, &net.water, 58.29, 58.29, -16.0, 3600.0).unwrap();
        assert!((ret - 58.23).abs() < 0.005);
    }

    #[test]
    fn psi_above_one_is_rejected() {
        // ρSL/(mΔt) = 1000·0.2·9000/(277.8·3600) ≈ 1.8
        let net = toy(0.099, 0.2);
        let b1 = &net.branches[0];
        assert!(matches!(
            pipe_outlet_temperature(b1, &net.water, 60.0, 60.0, -16.0, 3600.0),
            Err(NetworkError::ModelValidity { .. })
        ));
        assert!(matches!(
            assemble_system(&net, 3600.0),
            Err(NetworkError::ModelValidity { .. })
        ));
    }

    #[test]
    fn lossless_zero_delay_system_has_no_memory() {
        let sys = assemble_system(&toy(0.0, 0.0), 3600.0).unwrap();
        assert!(sys.c2.iter().all(|&v| v == 0.0));
        assert!(sys.ambient_coeff.iter().all(|&v| v == 0.0));
        for r in 0..sys.dim() {
            let sum: f64 = sys.c1.row(r).sum();
            assert!(sum.abs() < 1e-12, "row {r} sums to {sum}");
        }
    }

    #[test]
    fn row_order_is_balances_then_mixing() {
        let net = toy(0.099, 0.0);
        let sys = assemble_system(&net, 3600.0).unwrap();
        assert_eq!(
            sys.rows[0],
            SystemRow {
                kind: RowKind::NodeBalance { node: 0 },
                location: 0
            }
        );
        assert_eq!(
            sys.rows[1],
            SystemRow {
                kind: RowKind::NodeBalance { node: 1 },
                location: 3
            }
        );
        assert_eq!(
            sys.rows[2],
            SystemRow {
                kind: RowKind::Mixing,
                location: 1
            }
        );
        assert_eq!(
            sys.rows[3],
            SystemRow {
                kind: RowKind::Mixing,
                location: 2
            }
        );
    }

    #[test]
    fn toy_balances_at_reported_temperatures() {
        let net = toy(0.099, 0.0);
        let sys = assemble_system(&net, 3600.0).unwrap();
        // locations: NH1^S, NH1^R, NH2^S, NH2^R
        let t = DVector::from_vec(vec![60.06, 58.23, 60.0, 58.29]);
        let amb = DVector::from_element(4, -16.0);
        let h = sys.evaluate(&t, &t, &amb);
        let g = h[sys.balance_row(0)];
        let d = -h[sys.balance_row(1)];
        assert!((2.10..2.16).contains(&g), "G = {g}");
        assert!((1.9..2.1).contains(&d), "D = {d}");
    }

    #[test]
    fn hydraulic_balance_of_consistent_flows() {
        let net = toy(0.099, 0.05);
        assert!(net.hydraulic_imbalance().iter().all(|&v| v == 0.0));
        assert!(net.mass_imbalance().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delayed_rows_sum_to_zero_without_losses() {
        let sys = assemble_system(&toy(0.0, 0.05), 3600.0).unwrap();
        assert!(sys.c2.iter().any(|&v| v != 0.0));
        let total = &sys.c1 + &sys.c2;
        for r in 0..sys.dim() {
            assert!(total.row(r).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let net = toy(0.099, 0.05);
        let a = assemble_system(&net, 3600.0).unwrap();
        let b = assemble_system(&net, 3600.0).unwrap();
        assert_eq!(a, b);
    }
}
