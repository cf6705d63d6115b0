//! Bundled cases.

use crate::case::CaseDefinition;
use crate::case_file::parse_case;

pub const TOY: &str = include_str!("../../../scenarios/toy.case");
pub const FOURNODE: &str = include_str!("../../../scenarios/fournode.case");
pub const ISLAND: &str = include_str!("../../../scenarios/island.case");

/// Two nodes, one source, steady state.
pub fn toy() -> CaseDefinition {
    parse_case(TOY).expect("bundled toy case parses")
}

/// Four nodes, two sources, 24 hourly periods.
pub fn fournode() -> CaseDefinition {
    parse_case(FOURNODE).expect("bundled fournode case parses")
}

/// Ten nodes, three sources, 24 hourly periods with varying ambient.
pub fn island() -> CaseDefinition {
    parse_case(ISLAND).expect("bundled island case parses")
}

pub fn all() -> Vec<CaseDefinition> {
    vec![toy(), fournode(), island()]
}

/// Looks a bundled case up by name.
pub fn by_name(name: &str) -> Option<CaseDefinition> {
    match name {
        "toy" => Some(toy()),
        "fournode" => Some(fournode()),
        "island" => Some(island()),
        _ => None,
    }
}
