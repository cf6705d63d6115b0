//! Unit constants and affine temperature scales.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const W_PER_MW: f64 = 1.0e6;
pub const KG_PER_S_PER_T_PER_H: f64 = 1000.0 / 3600.0;
pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown temperature unit `{0}` (expected C, F or K)")]
pub struct UnknownUnit(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TemperatureUnit {
    #[default]
    #[serde(rename = "C")]
    Celsius,
    #[serde(rename = "F")]
    Fahrenheit,
    #[serde(rename = "K")]
    Kelvin,
}

impl TemperatureUnit {
    pub const ALL: [TemperatureUnit; 3] = [Self::Celsius, Self::Fahrenheit, Self::Kelvin];

    /// `(K, H)` with `T_unit = K · T_celsius + H`.
    pub fn from_celsius(self) -> (f64, f64) {
        match self {
            Self::Celsius => (1.0, 0.0),
            Self::Fahrenheit => (1.8, 32.0),
            Self::Kelvin => (1.0, 273.15),
        }
    }

    /// `(K, H)` with `T_target = K · T_self + H`.
    pub fn affine_to(self, target: TemperatureUnit) -> (f64, f64) {
        let (k1, h1) = self.from_celsius();
        let (k2, h2) = target.from_celsius();
        // T_c = (T_self − h1)/k1 ; T_target = k2 T_c + h2
        let k = k2 / k1;
        (k, h2 - k * h1)
    }

    pub fn convert(self, value: f64, target: TemperatureUnit) -> f64 {
        if self == target {
            return value;
        }
        let (k, h) = self.affine_to(target);
        k * value + h
    }

    /// Converts a temperature difference (no offset).
    pub fn convert_delta(self, delta: f64, target: TemperatureUnit) -> f64 {
        delta * self.affine_to(target).0
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Celsius => "C",
            Self::Fahrenheit => "F",
            Self::Kelvin => "K",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Celsius => "Centigrade",
            Self::Fahrenheit => "Fahrenheit",
            Self::Kelvin => "Kelvins",
        }
    }
}

impl fmt::Display for TemperatureUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for TemperatureUnit {
    type Err = UnknownUnit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" | "°c" | "celsius" | "centigrade" => Ok(Self::Celsius),
            "f" | "°f" | "fahrenheit" => Ok(Self::Fahrenheit),
            "k" | "kelvin" | "kelvins" => Ok(Self::Kelvin),
            _ => Err(UnknownUnit(s.to_string())),
        }
    }
}
