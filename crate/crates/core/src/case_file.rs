//! JSON case files.
//!
//! Every dimensional field names its unit in the key. Where two units are
//! accepted (`mass_flow_t_per_h` / `mass_flow_kg_per_s`, `load_mw` /
//! `load_kw`, `interval_s` / `interval_h`) exactly one must be present.
//! Temperatures are in `temperature_unit` (default `C`); heat capacity and
//! heat transfer coefficients are always per kelvin. Per-period quantities
//! accept a scalar (broadcast over the horizon) or a list with one value per
//! period.
//!
//! ```json
//! {
//!   "name": "toy",
//!   "temperature_unit": "C",
//!   "horizon": { "periods": 1, "interval_s": 3600 },
//!   "ambient": -16,
//!   "nodes": [
//!     { "name": "NH1", "role": "source", "exchanger_mass_flow_t_per_h": 1000,
//!       "supply": { "min": 60, "max": 100, "initial": 60.06 },
//!       "return": { "min": 40, "max": 100, "initial": 58.23 } }
//!   ],
//!   "pipes": [
//!     { "name": "b1", "side": "supply", "from": "NH1", "to": "NH2",
//!       "length_m": 9000, "cross_section_m2": 0, "heat_transfer_w_per_m_k": 0.099,
//!       "mass_flow_t_per_h": 1000 }
//!   ],
//!   "sources": [
//!     { "name": "CHP1", "node": "NH1", "kind": "chp", "linear_cost": 14.8,
//!       "quadratic_cost": 0.0245, "min_mw": 0, "max_mw": 4 }
//!   ]
//! }
//! ```
//!
//! Omitted `min` defaults to the ambient temperature and omitted `max` to
//! 150 °C, so missing requirements never bind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{
    convert_units, validate_case, CaseDefinition, Diagnostic, SourceKind, SourceSpec,
    TemperatureRequirement,
};
use crate::network::{
    BranchKind, HeatNetwork, HeatNode, NetworkError, NodeRole, PipeParams, PipeSpec, Side, Water,
};
use crate::units::{TemperatureUnit, KG_PER_S_PER_T_PER_H, SECONDS_PER_HOUR};

/// Upper bound applied when a location gives none, °C.
pub const DEFAULT_UPPER_BOUND_C: f64 = 150.0;

#[derive(Debug, Error)]
pub enum CaseFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("case file is empty: missing root object")]
    MissingRoot,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("network: {0}")]
    Network(#[from] NetworkError),
    #[error("case is invalid:\n{}", list(.0))]
    Invalid(Vec<Diagnostic>),
}

fn list(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  - {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Series {
    Scalar(f64),
    List(Vec<f64>),
}

impl Series {
    fn expand(&self, periods: usize, field: &str) -> Result<Vec<f64>, CaseFileError> {
        match self {
            Series::Scalar(v) => Ok(vec![*v; periods]),
            Series::List(v) if v.len() == periods => Ok(v.clone()),
            Series::List(v) => Err(CaseFileError::Field {
                field: field.to_string(),
                message: format!(
                    "series has {} values, horizon has {periods} periods",
                    v.len()
                ),
            }),
        }
    }

    /// Collapses constant series to a scalar.
    fn compact(values: &[f64]) -> Self {
        match values.first() {
            Some(&first) if values.iter().all(|&v| v == first) => Series::Scalar(first),
            _ => Series::List(values.to_vec()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
    #[serde(default)]
    temperature_unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    water: Option<WaterFile>,
    horizon: HorizonFile,
    ambient: Series,
    nodes: Vec<NodeFile>,
    #[serde(default)]
    pipes: Vec<PipeFile>,
    #[serde(default)]
    sources: Vec<SourceFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaterFile {
    heat_capacity_j_per_kg_k: f64,
    density_kg_per_m3: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HorizonFile {
    periods: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interval_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interval_h: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    name: String,
    role: NodeRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exchanger_mass_flow_t_per_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exchanger_mass_flow_kg_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    load_mw: Option<Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    load_kw: Option<Series>,
    supply: LocationFile,
    #[serde(rename = "return")]
    ret: LocationFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<Series>,
    initial: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipeFile {
    name: String,
    side: Side,
    from: String,
    to: String,
    length_m: f64,
    #[serde(default)]
    cross_section_m2: f64,
    heat_transfer_w_per_m_k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass_flow_t_per_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass_flow_kg_per_s: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceFile {
    name: String,
    node: String,
    kind: SourceKind,
    linear_cost: f64,
    quadratic_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_mw: Option<Series>,
    max_mw: Series,
}

fn one_of(
    field: &str,
    a: Option<f64>,
    a_factor: f64,
    b: Option<f64>,
    b_factor: f64,
) -> Result<f64, CaseFileError> {
    match (a, b) {
        (Some(v), None) => Ok(v * a_factor),
        (None, Some(v)) => Ok(v * b_factor),
        (None, None) => Err(CaseFileError::Field {
            field: field.to_string(),
            message: "missing value".into(),
        }),
        (Some(_), Some(_)) => Err(CaseFileError::Field {
            field: field.to_string(),
            message: "give the value in exactly one unit".into(),
        }),
    }
}

/// Parses and validates a case from JSON text. The result is expressed in
/// degrees Celsius whatever the file's temperature unit.
pub fn parse_case(text: &str) -> Result<CaseDefinition, CaseFileError> {
    if text.trim().is_empty() {
        return Err(CaseFileError::MissingRoot);
    }
    let file: CaseFile = serde_json::from_str(text).map_err(|e| CaseFileError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let case = build_case(file)?;
    let diags = validate_case(&case);
    if !diags.is_empty() {
        return Err(CaseFileError::Invalid(diags));
    }
    Ok(convert_units(&case, TemperatureUnit::Celsius))
}

/// Reads a case file from disk.
pub fn load_case(path: impl AsRef<Path>) -> Result<CaseDefinition, CaseFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CaseFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_case(&text)
}

fn build_case(file: CaseFile) -> Result<CaseDefinition, CaseFileError> {
    let unit: TemperatureUnit = match &file.temperature_unit {
        Some(s) => s
            .parse()
            .map_err(|e: crate::units::UnknownUnit| CaseFileError::Field {
                field: "temperature_unit".into(),
                message: e.to_string(),
            })?,
        None => TemperatureUnit::Celsius,
    };
    let (k, _) = TemperatureUnit::Celsius.affine_to(unit);
    let periods = file.horizon.periods;
    let interval_s = one_of(
        "horizon.interval",
        file.horizon.interval_s,
        1.0,
        file.horizon.interval_h,
        SECONDS_PER_HOUR,
    )?;
    let water = file
        .water
        .map(|w| Water {
            heat_capacity: w.heat_capacity_j_per_kg_k,
            density: w.density_kg_per_m3,
        })
        .unwrap_or_default();
    let water = Water {
        heat_capacity: water.heat_capacity / k,
        ..water
    };

    let node_index = |name: &str, field: &str| {
        file.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| CaseFileError::Field {
                field: field.to_string(),
                message: format!("unknown node `{name}`"),
            })
    };

    let mut nodes = Vec::with_capacity(file.nodes.len());
    let mut loads = Vec::with_capacity(file.nodes.len());
    for (i, n) in file.nodes.iter().enumerate() {
        if file.nodes[..i].iter().any(|o| o.name == n.name) {
            return Err(CaseFileError::Field {
                field: format!("nodes[{}]", n.name),
                message: "duplicate node name".into(),
            });
        }
        let field = format!("nodes[{}]", n.name);
        let mass_flow = one_of(
            &format!("{field}.exchanger_mass_flow"),
            n.exchanger_mass_flow_t_per_h,
            KG_PER_S_PER_T_PER_H,
            n.exchanger_mass_flow_kg_per_s,
            1.0,
        )?;
        let load = match (&n.load_mw, &n.load_kw) {
            (Some(s), None) => s.expand(periods, &format!("{field}.load_mw"))?,
            (None, Some(s)) => s
                .expand(periods, &format!("{field}.load_kw"))?
                .into_iter()
                .map(|v| v / 1000.0)
                .collect(),
            (None, None) => vec![0.0; periods],
            (Some(_), Some(_)) => {
                return Err(CaseFileError::Field {
                    field: format!("{field}.load"),
                    message: "give the value in exactly one unit".into(),
                })
            }
        };
        nodes.push(HeatNode {
            name: n.name.clone(),
            role: n.role,
            exchanger_mass_flow: mass_flow,
        });
        loads.push(load);
    }

    let mut pipes = Vec::with_capacity(file.pipes.len());
    for p in &file.pipes {
        let field = format!("pipes[{}]", p.name);
        pipes.push(PipeSpec {
            name: p.name.clone(),
            side: p.side,
            from_node: node_index(&p.from, &format!("{field}.from"))?,
            to_node: node_index(&p.to, &format!("{field}.to"))?,
            params: PipeParams {
                length: p.length_m,
                cross_section: p.cross_section_m2,
                heat_transfer_coeff: p.heat_transfer_w_per_m_k / k,
            },
            mass_flow: one_of(
                &format!("{field}.mass_flow"),
                p.mass_flow_t_per_h,
                KG_PER_S_PER_T_PER_H,
                p.mass_flow_kg_per_s,
                1.0,
            )?,
        });
    }
    let network = HeatNetwork::new(nodes, pipes, water)?;

    let ambient_series = file.ambient.expand(periods, "ambient")?;
    let nl = network.num_locations();
    let ambient: Vec<Vec<f64>> = ambient_series.iter().map(|&a| vec![a; nl]).collect();

    let mut requirements = Vec::with_capacity(nl);
    let mut initial = vec![0.0; nl];
    let default_upper = TemperatureUnit::Celsius.convert(DEFAULT_UPPER_BOUND_C, unit);
    for (i, n) in file.nodes.iter().enumerate() {
        for (side, loc_file) in [(Side::Supply, &n.supply), (Side::Return, &n.ret)] {
            let loc = HeatNetwork::location_of(i, side);
            let field = format!(
                "nodes[{}].{}",
                n.name,
                if side == Side::Supply {
                    "supply"
                } else {
                    "return"
                }
            );
            let lower = match &loc_file.min {
                Some(s) => s.expand(periods, &format!("{field}.min"))?,
                None => ambient_series.clone(),
            };
            let upper = match &loc_file.max {
                Some(s) => s.expand(periods, &format!("{field}.max"))?,
                None => vec![default_upper; periods],
            };
            initial[loc] = loc_file.initial;
            requirements.push((
                loc,
                TemperatureRequirement {
                    location: loc,
                    lower,
                    upper,
                },
            ));
        }
    }
    requirements.sort_by_key(|(loc, _)| *loc);
    let requirements = requirements.into_iter().map(|(_, r)| r).collect();

    let mut sources = Vec::with_capacity(file.sources.len());
    for s in &file.sources {
        let field = format!("sources[{}]", s.name);
        sources.push(SourceSpec {
            name: s.name.clone(),
            node: node_index(&s.node, &format!("{field}.node"))?,
            kind: s.kind,
            linear_coeff: s.linear_cost,
            quadratic_coeff: s.quadratic_cost,
            g_min: match &s.min_mw {
                Some(v) => v.expand(periods, &format!("{field}.min_mw"))?,
                None => vec![0.0; periods],
            },
            g_max: s.max_mw.expand(periods, &format!("{field}.max_mw"))?,
        });
    }

    Ok(CaseDefinition {
        name: file.name,
        description: file.description,
        network,
        periods,
        interval_s,
        loads,
        sources,
        requirements,
        ambient,
        initial_temperatures: initial,
        unit,
    })
}

/// Serializes a case to the file schema, in the case's own temperature unit.
/// Mass flows are written in kg/s so that reloading is exact.
pub fn to_json(case: &CaseDefinition) -> Result<String, CaseFileError> {
    let net = &case.network;
    let (k, _) = TemperatureUnit::Celsius.affine_to(case.unit);
    let mut ambient = Vec::with_capacity(case.periods);
    for (t, row) in case.ambient.iter().enumerate() {
        let first = row.first().copied().unwrap_or(0.0);
        if row.iter().any(|&v| v != first) {
            return Err(CaseFileError::Field {
                field: format!("ambient[{t}]"),
                message: "case files hold one ambient temperature per period".into(),
            });
        }
        ambient.push(first);
    }

    let nodes = net
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let loc_file = |side| {
                let loc = HeatNetwork::location_of(i, side);
                let r = &case.requirements[loc];
                LocationFile {
                    min: Some(Series::compact(&r.lower)),
                    max: Some(Series::compact(&r.upper)),
                    initial: case.initial_temperatures[loc],
                }
            };
            NodeFile {
                name: n.name.clone(),
                role: n.role,
                exchanger_mass_flow_t_per_h: None,
                exchanger_mass_flow_kg_per_s: Some(n.exchanger_mass_flow),
                load_mw: (n.role == NodeRole::Load).then(|| Series::compact(&case.loads[i])),
                load_kw: None,
                supply: loc_file(Side::Supply),
                ret: loc_file(Side::Return),
            }
        })
        .collect();

    let pipes = net
        .branches
        .iter()
        .filter_map(|b| match b.kind {
            BranchKind::Pipe(p) => Some(PipeFile {
                name: b.name.clone(),
                side: net.locations[b.from].side,
                from: net.nodes[net.locations[b.from].node].name.clone(),
                to: net.nodes[net.locations[b.to].node].name.clone(),
                length_m: p.length,
                cross_section_m2: p.cross_section,
                heat_transfer_w_per_m_k: p.heat_transfer_coeff * k,
                mass_flow_t_per_h: None,
                mass_flow_kg_per_s: Some(b.mass_flow),
            }),
            BranchKind::Exchanger => None,
        })
        .collect();

    let sources = case
        .sources
        .iter()
        .map(|s| SourceFile {
            name: s.name.clone(),
            node: net.nodes[s.node].name.clone(),
            kind: s.kind,
            linear_cost: s.linear_coeff,
            quadratic_cost: s.quadratic_coeff,
            min_mw: Some(Series::compact(&s.g_min)),
            max_mw: Series::compact(&s.g_max),
        })
        .collect();

    let file = CaseFile {
        name: case.name.clone(),
        description: case.description.clone(),
        temperature_unit: Some(case.unit.symbol().to_string()),
        water: Some(WaterFile {
            heat_capacity_j_per_kg_k: net.water.heat_capacity * k,
            density_kg_per_m3: net.water.density,
        }),
        horizon: HorizonFile {
            periods: case.periods,
            interval_s: Some(case.interval_s),
            interval_h: None,
        },
        ambient: Series::compact(&ambient),
        nodes,
        pipes,
        sources,
    };
    Ok(serde_json::to_string_pretty(&file).expect("case file serializes") + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn empty_file_names_missing_root() {
        let err = parse_case("  \n").unwrap_err();
        assert!(matches!(err, CaseFileError::MissingRoot));
        assert!(err.to_string().contains("root object"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_case("{\n  \"name\": \"x\",\n  \"horizon\": }").unwrap_err();
        match err {
            CaseFileError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = scenarios::TOY.replace("\"length_m\"", "\"lenght_m\"");
        let err = parse_case(&text).unwrap_err();
        assert!(err.to_string().contains("lenght_m"), "{err}");
    }

    #[test]
    fn mass_flow_needs_exactly_one_unit() {
        let text = scenarios::TOY.replacen(
            "\"mass_flow_t_per_h\": 1000.0",
            "\"mass_flow_t_per_h\": 1000.0, \"mass_flow_kg_per_s\": 277.0",
            1,
        );
        let err = parse_case(&text).unwrap_err();
        assert!(matches!(err, CaseFileError::Field { .. }), "{err}");
    }

    #[test]
    fn toy_file_matches_table() {
        let case = scenarios::toy();
        assert_eq!(case.network.num_nodes(), 2);
        assert_eq!(case.network.num_pipes(), 2);
        assert!((case.network.branches[0].mass_flow - 1000.0 / 3.6).abs() < 1e-12);
        assert_eq!(case.loads[1][0], 2.0);
        assert_eq!(case.sources[0].g_max[0], 4.0);
        assert_eq!(case.requirements[3].lower[0], 30.0);
        assert_eq!(case.ambient[0][0], -16.0);
    }

    #[test]
    fn invalid_cases_aggregate_diagnostics() {
        let text = scenarios::TOY.replace("\"max_mw\": 4.0", "\"max_mw\": -1.0");
        match parse_case(&text).unwrap_err() {
            CaseFileError::Invalid(diags) => assert!(!diags.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fahrenheit_files_load_in_celsius() {
        let case = scenarios::fournode();
        let f = convert_units(&case, TemperatureUnit::Fahrenheit);
        let back = parse_case(&to_json(&f).unwrap()).unwrap();
        assert_eq!(back.unit, TemperatureUnit::Celsius);
        for (a, b) in back
            .initial_temperatures
            .iter()
            .zip(&case.initial_temperatures)
        {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
