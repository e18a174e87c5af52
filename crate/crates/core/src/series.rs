use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::IntervalGrid;

/// Physical unit of a sampled series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    VehPerH,
    Seconds,
    Dimensionless,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::VehPerH => "veh_per_h",
            Unit::Seconds => "seconds",
            Unit::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "veh_per_h" => Ok(Unit::VehPerH),
            "seconds" => Ok(Unit::Seconds),
            "dimensionless" => Ok(Unit::Dimensionless),
            other => Err(format!("unknown unit '{other}'")),
        }
    }
}

/// Uniformly sampled time series with explicit missing markers. Missing is a
/// first-class value so smoothing and metrics can skip or renormalize instead
/// of imputing zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    grid: IntervalGrid,
    values: Vec<Option<f64>>,
    unit: Unit,
}

impl SampledSeries {
    pub fn new(grid: IntervalGrid, values: Vec<Option<f64>>, unit: Unit) -> Result<Self> {
        if values.len() != grid.num_intervals() {
            return Err(Error::Series(format!(
                "series length {} does not match grid interval count {}",
                values.len(),
                grid.num_intervals()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if let Some(x) = v {
                if !x.is_finite() {
                    return Err(Error::Series(format!("non-finite value at interval {i}")));
                }
                match unit {
                    Unit::VehPerH if *x < 0.0 => {
                        return Err(Error::Series(format!("negative flow at interval {i}")))
                    }
                    Unit::Seconds if *x <= 0.0 => {
                        return Err(Error::Series(format!(
                            "non-positive travel time at interval {i}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { grid, values, unit })
    }

    /// All-missing series over `grid`.
    pub fn all_missing(grid: IntervalGrid, unit: Unit) -> Self {
        let n = grid.num_intervals();
        Self {
            grid,
            values: vec![None; n],
            unit,
        }
    }

    pub fn grid(&self) -> &IntervalGrid {
        &self.grid
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied().flatten()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Indices where the value is present.
    pub fn present_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|_| i))
    }

    pub fn same_grid(&self, other: &SampledSeries) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Copy of the series with values outside `indices` blanked to missing.
    pub fn restricted_to(&self, indices: &[usize]) -> SampledSeries {
        let mut values = vec![None; self.values.len()];
        for &i in indices {
            if i < values.len() {
                values[i] = self.values[i];
            }
        }
        Self {
            grid: self.grid,
            values,
            unit: self.unit,
        }
    }
}
