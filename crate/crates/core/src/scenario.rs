//! Scenario configuration: everything needed to rebuild one billing cycle
//! of demand, weather and generation deterministically.
//!
//! A scenario serializes to a single JSON document. Every field has a
//! default, so a file only needs the fields it overrides:
//!
//! ```json
//! { "bs_type": "resident", "city": "shanghai", "rng_seed": 7 }
//! ```
//!
//! When `city` is set and `weather_calendar` is empty the built-in calendar
//! for that city is used. `traces` may point at `slot,value` CSV files that
//! replace the synthesized series; relative paths resolve against the
//! scenario file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::battery::BatteryConfig;
use crate::billing::{EquipmentConfig, Tariff};
use crate::demand::{calibrate_demand, synth_demand, BsType, CalibrationTarget, DemandProfile};
use crate::error::{Error, Result};
use crate::grid::{TimeGrid, Trace, TraceKind, HOURS_PER_DAY};
use crate::renewables::{
    generation_trace, synth_weather, Generation, PvConfig, Weather, WeatherDayClass,
    WeatherParams, WindConfig,
};

/// Reward shaping applied to the per-slot cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// `exp(-cost)`.
    #[default]
    Exponential,
    /// `-cost`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandSettings {
    /// Overrides the archetype's default profile.
    pub profile: Option<DemandProfile>,
    pub noise_fraction: f64,
    pub calibrate: bool,
    /// Overrides the archetype's default calibration target.
    pub target: Option<CalibrationTarget>,
}

impl Default for DemandSettings {
    fn default() -> Self {
        Self {
            profile: None,
            noise_fraction: 0.02,
            calibrate: true,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceFiles {
    pub demand: Option<PathBuf>,
    pub ghi: Option<PathBuf>,
    pub temperature: Option<PathBuf>,
    pub wind_speed: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub bs_type: BsType,
    pub city: Option<String>,
    pub grid: TimeGrid,
    pub weather_calendar: Vec<WeatherDayClass>,
    pub weather: WeatherParams,
    pub demand: DemandSettings,
    pub tariff: Tariff,
    pub battery: BatteryConfig,
    pub initial_soc: f64,
    pub pv: PvConfig,
    pub wind: WindConfig,
    pub equipment: EquipmentConfig,
    /// False models the reference site with no generators: generation is
    /// zero and no generator costs accrue.
    pub renewables_installed: bool,
    pub reward: RewardMode,
    pub rng_seed: u64,
    pub traces: TraceFiles,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            bs_type: BsType::Resident,
            city: Some("shanghai".into()),
            grid: TimeGrid::default(),
            weather_calendar: city_calendar("shanghai").expect("built-in calendar"),
            weather: WeatherParams::default(),
            demand: DemandSettings::default(),
            tariff: Tariff::default(),
            battery: BatteryConfig::default(),
            initial_soc: 0.5,
            pv: PvConfig::default(),
            wind: WindConfig::default(),
            equipment: EquipmentConfig::default(),
            renewables_installed: true,
            reward: RewardMode::Exponential,
            rng_seed: 2020,
            traces: TraceFiles::default(),
        }
    }
}

impl ScenarioConfig {
    /// 30-day scenario for a base-station type in one of the built-in cities.
    pub fn for_city(bs_type: BsType, city: &str, rng_seed: u64) -> Result<Self> {
        Ok(Self {
            bs_type,
            city: Some(city.to_ascii_lowercase()),
            weather_calendar: city_calendar(city)?,
            rng_seed,
            ..Self::default()
        })
    }

    /// One-day scenario with a fixed weather class.
    pub fn single_day(bs_type: BsType, class: WeatherDayClass, rng_seed: u64) -> Self {
        Self {
            bs_type,
            city: None,
            grid: TimeGrid::days(1),
            weather_calendar: vec![class],
            rng_seed,
            ..Self::default()
        }
    }

    /// The same site with no generators installed.
    pub fn without_renewables(&self) -> Self {
        Self {
            renewables_installed: false,
            ..self.clone()
        }
    }

    pub fn demand_profile(&self) -> DemandProfile {
        self.demand
            .profile
            .clone()
            .unwrap_or_else(|| DemandProfile::default_for(self.bs_type))
    }

    pub fn calibration_target(&self) -> CalibrationTarget {
        self.demand
            .target
            .unwrap_or_else(|| self.bs_type.calibration_target())
    }

    /// Fills an empty calendar from `city`.
    pub fn resolve_calendar(&mut self) -> Result<()> {
        if self.weather_calendar.is_empty() {
            if let Some(city) = &self.city {
                self.weather_calendar = city_calendar(city)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let calendar_hours = self.weather_calendar.len() as f64 * HOURS_PER_DAY;
        if (calendar_hours - self.grid.duration_hours()).abs() > 1e-9 {
            return Err(Error::DimensionMismatch(format!(
                "weather calendar covers {} days but the grid spans {} h",
                self.weather_calendar.len(),
                self.grid.duration_hours()
            )));
        }
        self.tariff.validate()?;
        self.battery.validate()?;
        self.pv.validate()?;
        self.wind.validate()?;
        self.weather.validate()?;
        self.equipment.validate()?;
        self.demand_profile().validate()?;
        if self.demand.calibrate {
            let t = self.calibration_target();
            if !(t.mean_kw > 0.0) || !(t.peak_kw >= t.mean_kw) {
                return Err(Error::InvalidConfig(format!(
                    "calibration target needs 0 < mean <= peak, got {t:?}"
                )));
            }
        }
        if !(self.demand.noise_fraction >= 0.0 && self.demand.noise_fraction < 1.0) {
            return Err(Error::InvalidConfig("demand.noise_fraction must lie in [0, 1)".into()));
        }
        if !(self.battery.soc_min <= self.initial_soc && self.initial_soc <= self.battery.soc_max) {
            return Err(Error::InvalidConfig(format!(
                "initial SoC {} outside [{}, {}]",
                self.initial_soc, self.battery.soc_min, self.battery.soc_max
            )));
        }
        Ok(())
    }

    /// Returns the config unchanged if it is valid.
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut cfg: ScenarioConfig = serde_json::from_str(s)?;
        cfg.resolve_calendar()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

pub const CITIES: [&str; 3] = ["beijing", "shanghai", "guangzhou"];

// C/P/O = clear/partial cloudy/overcast (cloudy); H/M/L = wind class.
// beijing:   16 C, 9 P, 5 O;  10 H, 12 M, 8 L
// shanghai:   8 C, 12 P, 10 O; 18 H, 6 M, 6 L
// guangzhou:  6 C, 10 P, 14 O;  6 H, 10 M, 14 L
const BEIJING: &str = "PM CM CM CL CH CL OM PL OM CH PL CM CM CM PL CL PH CH OH PH CM CH CM OH CH PM PL CM OH PL";
const SHANGHAI: &str = "PM PH CH CH CH PH PH OH OH CH PM OM OL OL CL OL PH CM PH PL PH CH OH CH PM PH OH OH PL OM";
const GUANGZHOU: &str = "PM PL OM PL PL CL CL CL OH CM OL OM PL OL PL OM OM OM CL PL OH PL OH CM OM OL OM PH PH OH";

/// Built-in 30-day weather calendar for a city.
pub fn city_calendar(city: &str) -> Result<Vec<WeatherDayClass>> {
    let codes = match city.to_ascii_lowercase().as_str() {
        "beijing" => BEIJING,
        "shanghai" => SHANGHAI,
        "guangzhou" => GUANGZHOU,
        _ => {
            return Err(Error::Unknown {
                kind: "city",
                name: city.to_string(),
            })
        }
    };
    codes.split_whitespace().map(parse_day_code).collect()
}

/// Parses a two-letter day code such as `CH` (clear, high wind).
pub fn parse_day_code(code: &str) -> Result<WeatherDayClass> {
    WeatherDayClass::from_code(code)
}

/// Reads a calendar file: a JSON array of either `{"solar": .., "wind": ..}`
/// objects or two-letter day codes.
pub fn parse_calendar(json: &str) -> Result<Vec<WeatherDayClass>> {
    Ok(serde_json::from_str(json)?)
}

/// All per-slot series of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTraces {
    pub demand: Trace,
    pub weather: Weather,
    pub generation: Generation,
}

impl ScenarioTraces {
    /// Synthesizes (or loads) every series for `cfg`. `base_dir` anchors
    /// relative trace-file paths.
    pub fn build(cfg: &ScenarioConfig, base_dir: Option<&Path>) -> Result<Self> {
        cfg.validate()?;
        let grid = &cfg.grid;
        let resolve = |p: &PathBuf| match base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.clone(),
        };

        let demand = match &cfg.traces.demand {
            Some(path) => Trace::load(&resolve(path), grid.clone(), TraceKind::Demand)?,
            None => {
                let raw = synth_demand(
                    &cfg.demand_profile(),
                    grid,
                    cfg.rng_seed,
                    cfg.demand.noise_fraction,
                )?;
                if cfg.demand.calibrate {
                    let t = cfg.calibration_target();
                    calibrate_demand(&raw, t.mean_kw, t.peak_kw)?
                } else {
                    raw
                }
            }
        };

        let synth = || synth_weather(&cfg.weather_calendar, grid, cfg.rng_seed, &cfg.weather);
        let files = &cfg.traces;
        let weather = if files.ghi.is_some() || files.temperature.is_some() || files.wind_speed.is_some()
        {
            let base = synth()?;
            let pick = |p: &Option<PathBuf>, kind, fallback: Trace| -> Result<Trace> {
                match p {
                    Some(path) => Trace::load(&resolve(path), grid.clone(), kind),
                    None => Ok(fallback),
                }
            };
            Weather {
                ghi: pick(&files.ghi, TraceKind::Ghi, base.ghi)?,
                temperature: pick(&files.temperature, TraceKind::Temperature, base.temperature)?,
                wind_speed: pick(&files.wind_speed, TraceKind::WindSpeed, base.wind_speed)?,
            }
        } else {
            synth()?
        };

        let generation = if cfg.renewables_installed {
            generation_trace(&weather, &cfg.pv, &cfg.wind)?
        } else {
            let zero = Trace::zeros(grid.clone(), TraceKind::Generation);
            Generation {
                solar: zero.clone(),
                wind: zero.clone(),
                total: zero,
            }
        };
        Ok(Self {
            demand,
            weather,
            generation,
        })
    }

    /// Traces from explicit demand and per-source generation values.
    pub fn from_values(grid: TimeGrid, demand: Vec<f64>, solar: Vec<f64>, wind: Vec<f64>) -> Result<Self> {
        let demand = Trace::new(grid.clone(), TraceKind::Demand, demand)?;
        let solar = Trace::new(grid.clone(), TraceKind::Generation, solar)?;
        let wind = Trace::new(grid.clone(), TraceKind::Generation, wind)?;
        let total = solar.with_values(
            solar.values().iter().zip(wind.values()).map(|(a, b)| a + b).collect(),
        )?;
        Ok(Self {
            demand,
            weather: Weather {
                ghi: Trace::zeros(grid.clone(), TraceKind::Ghi),
                temperature: Trace::zeros(grid.clone(), TraceKind::Temperature),
                wind_speed: Trace::zeros(grid, TraceKind::WindSpeed),
            },
            generation: Generation { solar, wind, total },
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.demand.grid()
    }
}
