//! Time discretization and per-slot trace containers.
//!
//! A billing cycle is split into `slot_count` slots of `slot_length_hours`
//! each. Every series in the simulator (demand, weather, generation, grid
//! draw) is a [`Trace`] over one [`TimeGrid`].

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_DAY: f64 = 24.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub slot_length_hours: f64,
    pub slot_count: usize,
    /// Informational only, e.g. `2020-06-01T00:00`.
    #[serde(default = "default_cycle_start")]
    pub cycle_start: String,
}

fn default_cycle_start() -> String {
    "2020-06-01T00:00".to_string()
}

impl Default for TimeGrid {
    /// One 30-day billing cycle of hourly slots.
    fn default() -> Self {
        Self {
            slot_length_hours: 1.0,
            slot_count: 720,
            cycle_start: default_cycle_start(),
        }
    }
}

impl TimeGrid {
    pub fn new(slot_length_hours: f64, slot_count: usize) -> Result<Self> {
        let grid = Self {
            slot_length_hours,
            slot_count,
            cycle_start: default_cycle_start(),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Hourly grid covering `days` whole days.
    pub fn days(days: usize) -> Self {
        Self {
            slot_length_hours: 1.0,
            slot_count: days * 24,
            cycle_start: default_cycle_start(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slot_length_hours > 0.0) || !self.slot_length_hours.is_finite() {
            return Err(Error::NonPositive {
                name: "slot_length_hours",
                value: self.slot_length_hours,
            });
        }
        if self.slot_count == 0 {
            return Err(Error::NonPositive {
                name: "slot_count",
                value: 0.0,
            });
        }
        Ok(())
    }

    pub fn duration_hours(&self) -> f64 {
        self.slot_length_hours * self.slot_count as f64
    }

    /// Number of slots in one day, if the slot length divides a day evenly.
    pub fn slots_per_day(&self) -> Option<usize> {
        let n = HOURS_PER_DAY / self.slot_length_hours;
        let rounded = n.round();
        ((n - rounded).abs() < 1e-9 && rounded >= 1.0).then_some(rounded as usize)
    }

    /// Whole days covered by the grid, if it covers whole days.
    pub fn whole_days(&self) -> Option<usize> {
        let per_day = self.slots_per_day()?;
        (self.slot_count % per_day == 0).then_some(self.slot_count / per_day)
    }

    /// Hour of day (0..24) at the start of `slot`.
    pub fn hour_of_day(&self, slot: usize) -> f64 {
        (slot as f64 * self.slot_length_hours).rem_euclid(HOURS_PER_DAY)
    }

    pub fn day_index(&self, slot: usize) -> usize {
        (slot as f64 * self.slot_length_hours / HOURS_PER_DAY).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Demand,
    Ghi,
    Temperature,
    WindSpeed,
    Generation,
    GridPower,
}

impl TraceKind {
    fn nonnegative(self) -> bool {
        matches!(
            self,
            TraceKind::Demand | TraceKind::Generation | TraceKind::GridPower
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Demand => "demand",
            TraceKind::Ghi => "ghi",
            TraceKind::Temperature => "temperature",
            TraceKind::WindSpeed => "wind_speed",
            TraceKind::Generation => "generation",
            TraceKind::GridPower => "grid_power",
        }
    }
}

/// A uniformly sampled series over one [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    grid: TimeGrid,
    kind: TraceKind,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    slot: usize,
    value: f64,
}

impl Trace {
    pub fn new(grid: TimeGrid, kind: TraceKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.slot_count {
            return Err(Error::DimensionMismatch(format!(
                "{} trace has {} values for a grid of {} slots",
                kind.name(),
                values.len(),
                grid.slot_count
            )));
        }
        if let Some((slot, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse(format!(
                "{} trace slot {slot} is not finite ({v})",
                kind.name()
            )));
        }
        if kind.nonnegative() {
            if let Some((slot, &v)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{} trace slot {slot} is negative ({v})",
                    kind.name()
                )));
            }
        }
        Ok(Self { grid, kind, values })
    }

    pub fn zeros(grid: TimeGrid, kind: TraceKind) -> Self {
        let values = vec![0.0; grid.slot_count];
        Self { grid, kind, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> TraceKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Same grid and kind with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.kind, values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (slot, &value) in self.values.iter().enumerate() {
            w.serialize(TraceRow { slot, value })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `slot,value` CSV. Slots must run 0..T-1 in order.
    pub fn read_csv<R: Read>(reader: R, grid: TimeGrid, kind: TraceKind) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "slot" || &headers[1] != "value" {
            return Err(Error::Parse(format!(
                "expected header `slot,value`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut values = Vec::with_capacity(grid.slot_count);
        for (i, row) in r.deserialize::<TraceRow>().enumerate() {
            let row = row?;
            if row.slot != i {
                return Err(Error::Parse(format!("expected slot {i}, found {}", row.slot)));
            }
            values.push(row.value);
        }
        Self::new(grid, kind, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path, grid: TimeGrid, kind: TraceKind) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), grid, kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_grid_is_thirty_days() {
        let g = TimeGrid::default();
        assert_eq!(g.duration_hours(), 720.0);
        assert_eq!(g.whole_days(), Some(30));
        assert_eq!(g.hour_of_day(25), 1.0);
        assert_eq!(g.day_index(47), 1);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert_eq!(TimeGrid::new(0.25, 96).unwrap().whole_days(), Some(1));
        assert_eq!(TimeGrid::new(5.0, 10).unwrap().slots_per_day(), None);
    }

    #[test]
    fn trace_length_and_sign_checked() {
        let g = TimeGrid::days(1);
        assert!(Trace::new(g.clone(), TraceKind::Demand, vec![1.0; 23]).is_err());
        let mut v = vec![1.0; 24];
        v[3] = -0.1;
        assert!(Trace::new(g.clone(), TraceKind::Demand, v.clone()).is_err());
        // Temperatures may be negative.
        assert!(Trace::new(g, TraceKind::Temperature, v).is_ok());
    }

    #[test]
    fn csv_rejects_wrong_header_and_gaps() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let bad_header = "t,value\n0,1\n1,2\n";
        assert!(Trace::read_csv(bad_header.as_bytes(), g.clone(), TraceKind::Ghi).is_err());
        let gap = "slot,value\n0,1\n2,2\n";
        assert!(Trace::read_csv(gap.as_bytes(), g.clone(), TraceKind::Ghi).is_err());
        let short = "slot,value\n0,1\n";
        assert!(Trace::read_csv(short.as_bytes(), g, TraceKind::Ghi).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(values in prop::collection::vec(0.0f64..1e6, 1..200)) {
            let grid = TimeGrid::new(1.0, values.len()).unwrap();
            let trace = Trace::new(grid.clone(), TraceKind::Demand, values).unwrap();
            let mut buf = Vec::new();
            trace.write_csv(&mut buf).unwrap();
            let back = Trace::read_csv(buf.as_slice(), grid, TraceKind::Demand).unwrap();
            let a: Vec<u64> = trace.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
