//! Weather synthesis from day classes and weather-to-power conversion for
//! the PV array and the wind turbine.
//!
//! The PV and wind models are parametric surrogates that keep the inputs a
//! full irradiance/turbine model would take (irradiance, ambient temperature,
//! time of day; wind speed and hub height) while staying closed-form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, Trace, TraceKind, HOURS_PER_DAY};
use crate::rng::stream_rng;

const WEATHER_DOMAIN: u64 = 0x5EA7_0001;
const REFERENCE_CELL_TEMP_C: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvConfig {
    pub rating_kw: f64,
    /// Reference irradiance (W/m²) at which the array delivers its rating.
    pub ghi_stc: f64,
    /// Fractional power change per °C of cell temperature above 25 °C.
    pub temp_coeff: f64,
    /// Cell heating above ambient per W/m² of irradiance.
    pub cell_temp_gain: f64,
}

impl Default for PvConfig {
    fn default() -> Self {
        // 15 modules x 330 W.
        Self {
            rating_kw: 4.95,
            ghi_stc: 1000.0,
            temp_coeff: -0.004,
            cell_temp_gain: 0.03,
        }
    }
}

impl PvConfig {
    pub fn validate(&self) -> Result<()> {
        positive("pv.rating_kw", self.rating_kw)?;
        positive("pv.ghi_stc", self.ghi_stc)?;
        if !(self.temp_coeff <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pv.temp_coeff must be <= 0, got {}",
                self.temp_coeff
            )));
        }
        if !(self.cell_temp_gain >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pv.cell_temp_gain must be >= 0, got {}",
                self.cell_temp_gain
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindConfig {
    pub rating_kw: f64,
    pub cut_in_ms: f64,
    pub rated_ms: f64,
    pub cut_out_ms: f64,
    pub hub_height_m: f64,
    /// Height at which the wind-speed trace is measured.
    pub ref_height_m: f64,
    pub shear_exponent: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self {
            rating_kw: 6.0,
            cut_in_ms: 3.0,
            rated_ms: 12.0,
            cut_out_ms: 25.0,
            hub_height_m: 30.0,
            ref_height_m: 10.0,
            shear_exponent: 0.14,
        }
    }
}

impl WindConfig {
    pub fn validate(&self) -> Result<()> {
        positive("wind.rating_kw", self.rating_kw)?;
        positive("wind.hub_height_m", self.hub_height_m)?;
        positive("wind.ref_height_m", self.ref_height_m)?;
        if !(0.0 < self.cut_in_ms && self.cut_in_ms < self.rated_ms && self.rated_ms < self.cut_out_ms)
        {
            return Err(Error::InvalidConfig(format!(
                "wind speeds must satisfy 0 < cut_in < rated < cut_out, got {}/{}/{}",
                self.cut_in_ms, self.rated_ms, self.cut_out_ms
            )));
        }
        if !(self.shear_exponent >= 0.0) {
            return Err(Error::InvalidConfig("wind.shear_exponent must be >= 0".into()));
        }
        Ok(())
    }

    /// Power-law correction from measurement height to hub height.
    pub fn hub_factor(&self) -> f64 {
        (self.hub_height_m / self.ref_height_m).powf(self.shear_exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolarClass {
    Clear,
    PartialCloudy,
    Cloudy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindClass {
    High,
    Middle,
    Low,
}

/// Solar and wind class of one day. Deserializes from either the full
/// object or a two-letter code such as `"CH"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "DayClassRepr")]
pub struct WeatherDayClass {
    pub solar: SolarClass,
    pub wind: WindClass,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DayClassRepr {
    Code(String),
    Full { solar: SolarClass, wind: WindClass },
}

impl TryFrom<DayClassRepr> for WeatherDayClass {
    type Error = Error;

    fn try_from(r: DayClassRepr) -> Result<Self> {
        match r {
            DayClassRepr::Code(code) => Self::from_code(&code),
            DayClassRepr::Full { solar, wind } => Ok(Self::new(solar, wind)),
        }
    }
}

impl WeatherDayClass {
    pub const fn new(solar: SolarClass, wind: WindClass) -> Self {
        Self { solar, wind }
    }

    /// Parses a code such as `CH`: C/P/O for clear, partially cloudy or
    /// cloudy, then H/M/L for the wind class.
    pub fn from_code(code: &str) -> Result<Self> {
        let mut chars = code.chars();
        let (Some(s), Some(w), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(Error::Parse(format!("bad weather day code `{code}`")));
        };
        let solar = match s.to_ascii_uppercase() {
            'C' => SolarClass::Clear,
            'P' => SolarClass::PartialCloudy,
            'O' => SolarClass::Cloudy,
            _ => return Err(Error::Parse(format!("bad solar class in `{code}`"))),
        };
        let wind = match w.to_ascii_uppercase() {
            'H' => WindClass::High,
            'M' => WindClass::Middle,
            'L' => WindClass::Low,
            _ => return Err(Error::Parse(format!("bad wind class in `{code}`"))),
        };
        Ok(Self::new(solar, wind))
    }

    /// The nine solar x wind combinations.
    pub fn all() -> [WeatherDayClass; 9] {
        use SolarClass::*;
        use WindClass::*;
        let mut out = [WeatherDayClass::new(Clear, High); 9];
        let mut i = 0;
        for s in [Clear, PartialCloudy, Cloudy] {
            for w in [High, Middle, Low] {
                out[i] = WeatherDayClass::new(s, w);
                i += 1;
            }
        }
        out
    }

    pub fn label(&self) -> String {
        let s = match self.solar {
            SolarClass::Clear => "clear",
            SolarClass::PartialCloudy => "partial_cloudy",
            SolarClass::Cloudy => "cloudy",
        };
        let w = match self.wind {
            WindClass::High => "high",
            WindClass::Middle => "middle",
            WindClass::Low => "low",
        };
        format!("{s}_{w}_wind")
    }
}

/// Numeric profile of each weather class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherParams {
    pub clear_peak_ghi: f64,
    /// Lower end of the per-slot attenuation drawn on partially cloudy days.
    pub partial_dip_min: f64,
    pub cloudy_scale: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    /// Mean wind speed at measurement height for high/middle/low days (m/s).
    pub wind_mean_ms: [f64; 3],
    /// Half-width of the uniform wind noise as a fraction of the class mean.
    pub wind_noise_fraction: f64,
    /// Daily mean ambient temperature for clear/partial/cloudy days (°C).
    pub temp_mean_c: [f64; 3],
    /// Diurnal temperature half-swing for clear/partial/cloudy days (°C).
    pub temp_swing_c: [f64; 3],
}

impl Default for WeatherParams {
    fn default() -> Self {
        Self {
            clear_peak_ghi: 1000.0,
            partial_dip_min: 0.3,
            cloudy_scale: 0.3,
            sunrise_hour: 6.0,
            sunset_hour: 18.0,
            wind_mean_ms: [10.0, 7.0, 4.0],
            wind_noise_fraction: 0.2,
            temp_mean_c: [27.0, 25.0, 23.0],
            temp_swing_c: [5.0, 4.0, 2.0],
        }
    }
}

impl WeatherParams {
    pub fn validate(&self) -> Result<()> {
        positive("weather.clear_peak_ghi", self.clear_peak_ghi)?;
        if !(0.0..=1.0).contains(&self.partial_dip_min) || !(0.0..=1.0).contains(&self.cloudy_scale)
        {
            return Err(Error::InvalidConfig(
                "weather dip/scale factors must lie in [0, 1]".into(),
            ));
        }
        if !(0.0 <= self.sunrise_hour && self.sunrise_hour < self.sunset_hour && self.sunset_hour <= 24.0)
        {
            return Err(Error::InvalidConfig("weather daylight window is invalid".into()));
        }
        if self.wind_mean_ms.iter().any(|v| !(*v >= 0.0))
            || !(0.0..=1.0).contains(&self.wind_noise_fraction)
        {
            return Err(Error::InvalidConfig("weather wind parameters are invalid".into()));
        }
        Ok(())
    }

    /// Clear-sky half-sine irradiance at `hour` (W/m²).
    pub fn clear_sky_ghi(&self, hour: f64) -> f64 {
        if hour < self.sunrise_hour || hour > self.sunset_hour {
            return 0.0;
        }
        let phase = (hour - self.sunrise_hour) / (self.sunset_hour - self.sunrise_hour);
        (self.clear_peak_ghi * (std::f64::consts::PI * phase).sin()).max(0.0)
    }

    fn wind_mean(&self, class: WindClass) -> f64 {
        match class {
            WindClass::High => self.wind_mean_ms[0],
            WindClass::Middle => self.wind_mean_ms[1],
            WindClass::Low => self.wind_mean_ms[2],
        }
    }

    fn solar_index(class: SolarClass) -> usize {
        match class {
            SolarClass::Clear => 0,
            SolarClass::PartialCloudy => 1,
            SolarClass::Cloudy => 2,
        }
    }
}

/// Weather series over a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Weather {
    pub ghi: Trace,
    pub temperature: Trace,
    pub wind_speed: Trace,
}

/// Synthesizes one day of weather for `class`.
///
/// The random stream depends only on `(seed, day_index)`, so a day is
/// reproducible on its own and independent of the rest of the calendar.
pub fn synth_weather_day(
    class: WeatherDayClass,
    day_index: usize,
    seed: u64,
    params: &WeatherParams,
    slot_length_hours: f64,
) -> Result<Weather> {
    let grid = TimeGrid::new(slot_length_hours, 1)?;
    let per_day = grid.slots_per_day().ok_or_else(|| {
        Error::InvalidConfig(format!(
            "slot length {slot_length_hours} h does not divide a day"
        ))
    })?;
    let grid = TimeGrid::new(slot_length_hours, per_day)?;
    let mut rng = stream_rng(seed, WEATHER_DOMAIN, day_index as u64);

    let si = WeatherParams::solar_index(class.solar);
    let wind_mean = params.wind_mean(class.wind);
    let wind_half_width = params.wind_noise_fraction * wind_mean;

    let mut ghi = Vec::with_capacity(per_day);
    let mut temp = Vec::with_capacity(per_day);
    let mut wind = Vec::with_capacity(per_day);
    for slot in 0..per_day {
        let hour = grid.hour_of_day(slot);
        // Draw every variate on every slot so the stream stays aligned
        // across classes.
        let dip: f64 = rng.gen_range(params.partial_dip_min..=1.0);
        let gust: f64 = rng.gen_range(-1.0..=1.0);

        let clear = params.clear_sky_ghi(hour);
        let g = match class.solar {
            SolarClass::Clear => clear,
            SolarClass::PartialCloudy => clear * dip,
            SolarClass::Cloudy => clear * params.cloudy_scale,
        };
        ghi.push(g);

        let phase = 2.0 * std::f64::consts::PI * (hour - 9.0) / HOURS_PER_DAY;
        temp.push(params.temp_mean_c[si] + params.temp_swing_c[si] * phase.sin());

        wind.push((wind_mean + wind_half_width * gust).max(0.0));
    }
    Ok(Weather {
        ghi: Trace::new(grid.clone(), TraceKind::Ghi, ghi)?,
        temperature: Trace::new(grid.clone(), TraceKind::Temperature, temp)?,
        wind_speed: Trace::new(grid, TraceKind::WindSpeed, wind)?,
    })
}

/// Concatenates one synthesized day per calendar entry over `grid`.
pub fn synth_weather(
    calendar: &[WeatherDayClass],
    grid: &TimeGrid,
    seed: u64,
    params: &WeatherParams,
) -> Result<Weather> {
    let days = grid.whole_days().ok_or_else(|| {
        Error::DimensionMismatch("weather synthesis needs a grid of whole days".into())
    })?;
    if days != calendar.len() {
        return Err(Error::DimensionMismatch(format!(
            "calendar has {} days, grid covers {days}",
            calendar.len()
        )));
    }
    let mut ghi = Vec::with_capacity(grid.slot_count);
    let mut temp = Vec::with_capacity(grid.slot_count);
    let mut wind = Vec::with_capacity(grid.slot_count);
    for (day, class) in calendar.iter().enumerate() {
        let w = synth_weather_day(*class, day, seed, params, grid.slot_length_hours)?;
        ghi.extend_from_slice(w.ghi.values());
        temp.extend_from_slice(w.temperature.values());
        wind.extend_from_slice(w.wind_speed.values());
    }
    Ok(Weather {
        ghi: Trace::new(grid.clone(), TraceKind::Ghi, ghi)?,
        temperature: Trace::new(grid.clone(), TraceKind::Temperature, temp)?,
        wind_speed: Trace::new(grid.clone(), TraceKind::WindSpeed, wind)?,
    })
}

/// PV array output (kW) for irradiance `ghi` (W/m²) and ambient `temp_c`.
pub fn pv_output(ghi: f64, temp_c: f64, cfg: &PvConfig) -> f64 {
    if !(ghi > 0.0) {
        return 0.0;
    }
    let cell_temp = temp_c + cfg.cell_temp_gain * ghi;
    let derate = 1.0 + cfg.temp_coeff * (cell_temp - REFERENCE_CELL_TEMP_C);
    (cfg.rating_kw * (ghi / cfg.ghi_stc) * derate).clamp(0.0, cfg.rating_kw)
}

/// Turbine output (kW) for a wind speed measured at `ref_height_m`.
pub fn wind_output(wind_speed: f64, cfg: &WindConfig) -> f64 {
    power_curve(wind_speed * cfg.hub_factor(), cfg)
}

/// Power curve evaluated at hub-height speed `v_hub`.
pub fn power_curve(v_hub: f64, cfg: &WindConfig) -> f64 {
    if v_hub < cfg.cut_in_ms || v_hub > cfg.cut_out_ms {
        0.0
    } else if v_hub >= cfg.rated_ms {
        cfg.rating_kw
    } else {
        let ci3 = cfg.cut_in_ms.powi(3);
        cfg.rating_kw * (v_hub.powi(3) - ci3) / (cfg.rated_ms.powi(3) - ci3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub solar: Trace,
    pub wind: Trace,
    pub total: Trace,
}

pub fn generation_trace(weather: &Weather, pv: &PvConfig, wt: &WindConfig) -> Result<Generation> {
    let grid = weather.ghi.grid();
    if weather.temperature.grid() != grid || weather.wind_speed.grid() != grid {
        return Err(Error::DimensionMismatch(
            "weather traces do not share one time grid".into(),
        ));
    }
    let solar: Vec<f64> = weather
        .ghi
        .values()
        .iter()
        .zip(weather.temperature.values())
        .map(|(&g, &t)| pv_output(g, t, pv))
        .collect();
    let wind: Vec<f64> = weather
        .wind_speed
        .values()
        .iter()
        .map(|&v| wind_output(v, wt))
        .collect();
    let total: Vec<f64> = solar.iter().zip(&wind).map(|(s, w)| s + w).collect();
    Ok(Generation {
        solar: Trace::new(grid.clone(), TraceKind::Generation, solar)?,
        wind: Trace::new(grid.clone(), TraceKind::Generation, wind)?,
        total: Trace::new(grid.clone(), TraceKind::Generation, total)?,
    })
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}
