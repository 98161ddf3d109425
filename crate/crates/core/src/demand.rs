//! Base-station power demand: weekly archetype shapes and calibration to
//! billed totals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, Trace, TraceKind};
use crate::rng::stream_rng;

const DEMAND_DOMAIN: u64 = 0xDE3A_0002;

/// Area type served by the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsType {
    /// Type I.
    Resident,
    /// Type II.
    Office,
    /// Type III.
    Comprehensive,
}

impl BsType {
    pub const ALL: [BsType; 3] = [BsType::Resident, BsType::Office, BsType::Comprehensive];

    pub fn name(self) -> &'static str {
        match self {
            BsType::Resident => "resident",
            BsType::Office => "office",
            BsType::Comprehensive => "comprehensive",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "resident" | "i" | "type1" => Ok(BsType::Resident),
            "office" | "ii" | "type2" => Ok(BsType::Office),
            "comprehensive" | "iii" | "type3" => Ok(BsType::Comprehensive),
            _ => Err(Error::Unknown {
                kind: "bs type",
                name: name.to_string(),
            }),
        }
    }

    /// Grid-only monthly bill `(energy $, demand $)` the calibration anchors to.
    pub fn reference_bill(self) -> (f64, f64) {
        match self {
            BsType::Resident => (44.6, 23.1),
            BsType::Office => (40.1, 20.2),
            BsType::Comprehensive => (45.6, 22.8),
        }
    }

    /// Mean and peak demand (kW) implied by [`BsType::reference_bill`] under the
    /// reference prices ($0.049/kWh, $16.08/kW) over a 720 h cycle.
    pub fn calibration_target(self) -> CalibrationTarget {
        let (energy, demand) = self.reference_bill();
        CalibrationTarget {
            mean_kw: energy / (REFERENCE_ENERGY_PRICE * REFERENCE_CYCLE_HOURS),
            peak_kw: demand / REFERENCE_DEMAND_PRICE,
        }
    }
}

pub const REFERENCE_ENERGY_PRICE: f64 = 0.049;
pub const REFERENCE_DEMAND_PRICE: f64 = 16.08;
pub const REFERENCE_CYCLE_HOURS: f64 = 720.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub mean_kw: f64,
    pub peak_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub bs_type: BsType,
    pub base_kw: f64,
    pub peak_kw: f64,
    pub weekday_shape: [f64; 24],
    pub weekend_shape: [f64; 24],
}

#[rustfmt::skip]
const RESIDENT_WEEKDAY: [f64; 24] = [
    0.20, 0.05, 0.00, 0.00, 0.00, 0.00, 0.10, 0.25, 0.35, 0.35, 0.30, 0.30,
    0.35, 0.30, 0.30, 0.30, 0.40, 0.55, 0.70, 0.85, 1.00, 1.00, 0.80, 0.45,
];
#[rustfmt::skip]
const RESIDENT_WEEKEND: [f64; 24] = [
    0.25, 0.10, 0.00, 0.00, 0.00, 0.00, 0.05, 0.20, 0.40, 0.55, 0.60, 0.60,
    0.65, 0.60, 0.60, 0.60, 0.65, 0.70, 0.80, 0.90, 1.00, 1.00, 0.85, 0.50,
];
#[rustfmt::skip]
const OFFICE_WEEKDAY: [f64; 24] = [
    0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.05, 0.20, 0.60, 0.90, 1.00, 1.00,
    0.90, 0.95, 1.00, 1.00, 0.95, 0.80, 0.50, 0.30, 0.20, 0.10, 0.05, 0.00,
];
#[rustfmt::skip]
const OFFICE_WEEKEND: [f64; 24] = [
    0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.05, 0.10, 0.20, 0.25, 0.30,
    0.30, 0.30, 0.30, 0.25, 0.20, 0.15, 0.10, 0.10, 0.05, 0.05, 0.00, 0.00,
];
#[rustfmt::skip]
const COMPREHENSIVE_WEEKDAY: [f64; 24] = [
    0.30, 0.15, 0.05, 0.00, 0.00, 0.00, 0.10, 0.35, 0.70, 0.85, 0.90, 0.95,
    0.95, 0.90, 0.90, 0.95, 0.95, 1.00, 1.00, 1.00, 0.95, 0.85, 0.70, 0.50,
];
#[rustfmt::skip]
const COMPREHENSIVE_WEEKEND: [f64; 24] = [
    0.35, 0.20, 0.05, 0.00, 0.00, 0.00, 0.05, 0.25, 0.60, 0.80, 0.90, 0.95,
    0.95, 0.95, 0.90, 0.90, 0.95, 1.00, 1.00, 1.00, 0.95, 0.90, 0.75, 0.55,
];

impl DemandProfile {
    pub fn default_for(bs_type: BsType) -> Self {
        let (base_kw, peak_kw, weekday_shape, weekend_shape) = match bs_type {
            BsType::Resident => (1.0, 1.45, RESIDENT_WEEKDAY, RESIDENT_WEEKEND),
            BsType::Office => (0.9, 1.3, OFFICE_WEEKDAY, OFFICE_WEEKEND),
            BsType::Comprehensive => (1.0, 1.42, COMPREHENSIVE_WEEKDAY, COMPREHENSIVE_WEEKEND),
        };
        Self {
            bs_type,
            base_kw,
            peak_kw,
            weekday_shape,
            weekend_shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_kw > 0.0) {
            return Err(Error::NonPositive {
                name: "demand.base_kw",
                value: self.base_kw,
            });
        }
        if !(self.base_kw <= self.peak_kw) {
            return Err(Error::InvalidConfig(format!(
                "demand base {} kW exceeds peak {} kW",
                self.base_kw, self.peak_kw
            )));
        }
        let all = self.weekday_shape.iter().chain(&self.weekend_shape);
        if all.clone().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidConfig("demand shape weights must lie in [0, 1]".into()));
        }
        if all.copied().fold(0.0, f64::max) != 1.0 {
            return Err(Error::InvalidConfig("demand shape must reach weight 1".into()));
        }
        Ok(())
    }

    /// Shape weight for a slot starting at `hour` on day `day_index`
    /// (day 0 is a Monday).
    pub fn weight(&self, day_index: usize, hour: f64) -> f64 {
        let h = (hour.floor() as usize).min(23);
        if is_weekend(day_index) {
            self.weekend_shape[h]
        } else {
            self.weekday_shape[h]
        }
    }
}

pub fn is_weekend(day_index: usize) -> bool {
    day_index % 7 >= 5
}

/// Synthesizes a demand trace. `noise_fraction` bounds the uniform noise as
/// a fraction of the profile peak; zero disables it.
pub fn synth_demand(
    profile: &DemandProfile,
    grid: &TimeGrid,
    seed: u64,
    noise_fraction: f64,
) -> Result<Trace> {
    profile.validate()?;
    if grid.whole_days().is_none() {
        return Err(Error::DimensionMismatch(
            "demand synthesis needs a grid of whole days".into(),
        ));
    }
    let mut rng = stream_rng(seed, DEMAND_DOMAIN, 0);
    let span = profile.peak_kw - profile.base_kw;
    let half_width = noise_fraction.abs() * profile.peak_kw;
    let values = (0..grid.slot_count)
        .map(|slot| {
            let w = profile.weight(grid.day_index(slot), grid.hour_of_day(slot));
            let u: f64 = rng.gen_range(-1.0..=1.0);
            (profile.base_kw + span * w + half_width * u).clamp(0.0, profile.peak_kw)
        })
        .collect();
    Trace::new(grid.clone(), TraceKind::Demand, values)
}

/// Affine rescale so the trace's mean and maximum hit the targets.
pub fn calibrate_demand(trace: &Trace, target_mean_kw: f64, target_peak_kw: f64) -> Result<Trace> {
    if !(target_mean_kw > 0.0) || !(target_peak_kw >= target_mean_kw) {
        return Err(Error::InfeasibleCalibration(format!(
            "targets need 0 < mean <= peak, got mean {target_mean_kw} peak {target_peak_kw}"
        )));
    }
    let mean = trace.mean();
    let max = trace.max();
    let spread = max - mean;
    if !(spread > 0.0) {
        return Err(Error::InfeasibleCalibration("trace is constant".into()));
    }
    let scale = (target_peak_kw - target_mean_kw) / spread;
    let values: Vec<f64> = trace
        .values()
        .iter()
        .map(|&v| target_mean_kw + scale * (v - mean))
        .collect();
    if let Some(&low) = values.iter().find(|&&v| v < 0.0) {
        return Err(Error::InfeasibleCalibration(format!(
            "rescaled trace goes negative ({low} kW)"
        )));
    }
    trace.with_values(values)
}
