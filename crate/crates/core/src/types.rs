use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directional entry road into the studied area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    WB,
    EB,
    NB,
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Approach::WB => "WB",
            Approach::EB => "EB",
            Approach::NB => "NB",
        };
        f.write_str(s)
    }
}

pub type SpotId = u8;
pub type RouteId = u8;

/// Fixed measurement point where vehicle crossings are counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spot {
    pub id: SpotId,
    pub approach: Approach,
    pub label: String,
}

/// Directed origin-destination pair between two spots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub id: RouteId,
    pub entry_spot: SpotId,
    pub exit_spot: SpotId,
    /// Unimpeded entry-to-exit travel time in seconds.
    pub free_flow_time_s: f64,
}

impl Route {
    pub fn validate(&self) -> Result<()> {
        if self.entry_spot == self.exit_spot {
            return Err(Error::Config(format!(
                "route {} has identical entry and exit spot",
                self.id
            )));
        }
        if !(self.free_flow_time_s > 0.0) {
            return Err(Error::Config(format!(
                "route {} free flow time must be positive",
                self.id
            )));
        }
        Ok(())
    }
}

/// Ground-truth record of one vehicle traversing one route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrace {
    pub vehicle_id: String,
    pub route_id: RouteId,
    /// Timestamp of crossing the route entry spot, seconds.
    pub t_in_s: f64,
    /// Timestamp of crossing the route exit spot, seconds.
    pub t_out_s: f64,
}

/// Kind of detection a sensor produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    CountOnly,
    Plate,
    Mac,
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SensorKind::CountOnly => "count_only",
            SensorKind::Plate => "plate",
            SensorKind::Mac => "mac",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "count_only" => Ok(SensorKind::CountOnly),
            "plate" => Ok(SensorKind::Plate),
            "mac" => Ok(SensorKind::Mac),
            other => Err(format!("unknown sensor kind '{other}'")),
        }
    }
}

/// One sensor observation of a vehicle passing a spot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sighting {
    pub spot_id: SpotId,
    /// Re-identification token; `None` for count-only sensors.
    pub token: Option<String>,
    pub t_s: f64,
}

/// The full output of one emulated sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub sensor_id: String,
    pub kind: SensorKind,
    pub sightings: Vec<Sighting>,
}

impl DetectionSet {
    pub fn validate(&self) -> Result<()> {
        for s in &self.sightings {
            match self.kind {
                SensorKind::CountOnly if s.token.is_some() => {
                    return Err(Error::Series(format!(
                        "count-only sensor {} carries a token",
                        self.sensor_id
                    )))
                }
                SensorKind::Plate | SensorKind::Mac if s.token.is_none() => {
                    return Err(Error::Series(format!(
                        "tokenizing sensor {} has a token-less sighting",
                        self.sensor_id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
