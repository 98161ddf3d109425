//! Policy evaluation against the grid-only reference, bill tables, ROI and
//! stacked-supply plot data.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::battery::BatteryConfig;
use crate::billing::{roi, CostBreakdown, EquipmentConfig, Tariff};
use crate::demand::BsType;
use crate::dqn::{DqnPolicy, QNetwork};
use crate::env::{replay, rollout, BessEnv, Rollout, SlotReport};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::oracle::exhaustive_oracle;
use crate::policy::{GridOnly, Greedy};
use crate::renewables::WeatherDayClass;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    GridOnly,
    Greedy,
    Dqn(PathBuf),
    Oracle,
}

impl PolicyKind {
    pub fn parse(name: &str, checkpoint: Option<&Path>) -> Result<Self> {
        match name {
            "grid_only" => Ok(Self::GridOnly),
            "greedy" => Ok(Self::Greedy),
            "oracle" => Ok(Self::Oracle),
            "dqn" => checkpoint
                .map(|p| Self::Dqn(p.to_path_buf()))
                .ok_or_else(|| Error::InvalidConfig("the dqn policy needs a checkpoint".into())),
            other => Err(Error::Unknown {
                kind: "policy",
                name: other.into(),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GridOnly => "grid_only",
            Self::Greedy => "greedy",
            Self::Dqn(_) => "dqn",
            Self::Oracle => "oracle",
        }
    }
}

/// One line of the bill table. `total` is the operating bill; generator
/// amortization is reported separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub bs_type: String,
    pub city: String,
    pub policy: String,
    pub energy: f64,
    pub demand: f64,
    /// Battery wear.
    pub investment: f64,
    pub total: f64,
    pub saving: f64,
    pub ratio: f64,
    pub generator_amortization: f64,
}

impl TableRow {
    pub fn new(
        bs_type: BsType,
        city: &str,
        policy: &str,
        breakdown: &CostBreakdown,
        baseline: &CostBreakdown,
    ) -> Self {
        let total = breakdown.operating_total();
        let reference = baseline.operating_total();
        let saving = reference - total;
        Self {
            bs_type: bs_type.name().into(),
            city: city.into(),
            policy: policy.into(),
            energy: breakdown.energy,
            demand: breakdown.demand,
            investment: breakdown.investment.battery,
            total,
            saving,
            ratio: if reference > 0.0 { saving / reference } else { 0.0 },
            generator_amortization: breakdown.investment.generators(),
        }
    }
}

/// Hourly supply split for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyPoint {
    pub day: usize,
    pub hour: f64,
    pub demand: f64,
    pub renewable_direct: f64,
    pub battery_discharge: f64,
    pub grid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub bs_type: BsType,
    pub city: String,
    pub policy: String,
    pub tariff: Tariff,
    pub equipment: EquipmentConfig,
    pub battery: BatteryConfig,
    pub breakdown: CostBreakdown,
    pub baseline: CostBreakdown,
    pub row: TableRow,
    pub weather_calendar: Vec<WeatherDayClass>,
    pub supply: Vec<SupplyPoint>,
    #[serde(skip)]
    pub reports: Vec<SlotReport>,
}

/// Runs `policy` on the scenario and the grid-only reference on the same
/// scenario without renewables.
pub fn evaluate(cfg: &ScenarioConfig, base_dir: Option<&Path>, policy: &PolicyKind) -> Result<Evaluation> {
    let mut reference_env = BessEnv::from_file_base(&cfg.without_renewables(), base_dir)?;
    let baseline = rollout(&mut reference_env, &mut GridOnly)?;

    let run: Rollout = match policy {
        PolicyKind::GridOnly => baseline.clone(),
        PolicyKind::Greedy => rollout(&mut BessEnv::from_file_base(cfg, base_dir)?, &mut Greedy)?,
        PolicyKind::Dqn(path) => {
            let net = QNetwork::load(path)?;
            let mut env = BessEnv::from_file_base(cfg, base_dir)?;
            check_net(&net, &env)?;
            rollout(&mut env, &mut DqnPolicy::new(net))?
        }
        PolicyKind::Oracle => {
            let env = BessEnv::from_file_base(cfg, base_dir)?;
            let best = exhaustive_oracle(&env)?;
            replay(&mut env.clone(), &best.actions)?
        }
    };
    let city = cfg.city.clone().unwrap_or_else(|| "custom".into());
    let row = TableRow::new(cfg.bs_type, &city, policy.name(), &run.breakdown, &baseline.breakdown);
    Ok(Evaluation {
        bs_type: cfg.bs_type,
        city,
        policy: policy.name().into(),
        tariff: cfg.tariff,
        equipment: cfg.equipment,
        battery: cfg.battery.clone(),
        breakdown: run.breakdown,
        baseline: baseline.breakdown,
        row,
        weather_calendar: cfg.weather_calendar.clone(),
        supply: supply_points(&run.reports, &cfg.grid),
        reports: run.reports,
    })
}

fn check_net(net: &QNetwork, env: &BessEnv) -> Result<()> {
    let expected = (crate::env::OBSERVATION_LEN, env.actions().len());
    if (net.input_len(), net.output_len()) != expected {
        return Err(Error::ArchitectureMismatch(
            net.sizes(),
            vec![expected.0, expected.1],
        ));
    }
    Ok(())
}

pub fn supply_points(reports: &[SlotReport], grid: &TimeGrid) -> Vec<SupplyPoint> {
    reports
        .iter()
        .map(|r| SupplyPoint {
            day: grid.day_index(r.slot),
            hour: grid.hour_of_day(r.slot),
            demand: r.demand_kw,
            renewable_direct: r.renewable_used_kw,
            battery_discharge: r.battery_delivered_kw,
            grid: r.grid_kw,
        })
        .collect()
}

/// Mean supply split per weather class and hour of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSupply {
    pub weather: String,
    pub hour: f64,
    pub days: usize,
    pub demand: f64,
    pub renewable_direct: f64,
    pub battery_discharge: f64,
    pub grid: f64,
}

pub fn supply_by_class(supply: &[SupplyPoint], calendar: &[WeatherDayClass]) -> Vec<ClassSupply> {
    // (label, hour bits) -> (count, sums)
    let mut acc: BTreeMap<(String, u64), (usize, [f64; 4])> = BTreeMap::new();
    for p in supply {
        let Some(class) = calendar.get(p.day) else { continue };
        let e = acc
            .entry((class.label(), p.hour.to_bits()))
            .or_insert((0, [0.0; 4]));
        e.0 += 1;
        for (s, v) in e.1.iter_mut().zip([p.demand, p.renewable_direct, p.battery_discharge, p.grid]) {
            *s += v;
        }
    }
    let mut out: Vec<ClassSupply> = acc
        .into_iter()
        .map(|((weather, hour), (n, s))| {
            let k = n as f64;
            ClassSupply {
                weather,
                hour: f64::from_bits(hour),
                days: n,
                demand: s[0] / k,
                renewable_direct: s[1] / k,
                battery_discharge: s[2] / k,
                grid: s[3] / k,
            }
        })
        .collect();
    out.sort_by(|a, b| a.weather.cmp(&b.weather).then(a.hour.total_cmp(&b.hour)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiRow {
    pub bs_type: String,
    pub city: String,
    pub policy: String,
    pub saving: f64,
    pub roi: f64,
}

/// Merged results of several evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<TableRow>,
    pub roi: Vec<RoiRow>,
    pub class_supply: Vec<ClassSupply>,
}

pub fn build_report(evals: &[Evaluation]) -> Result<Report> {
    let Some(first) = evals.first() else {
        return Err(Error::InvalidConfig("no evaluations to report".into()));
    };
    for e in evals {
        if e.tariff != first.tariff {
            return Err(Error::InvalidConfig(format!(
                "tariff of {}/{}/{} differs from {}/{}/{}",
                e.row.bs_type, e.city, e.policy, first.row.bs_type, first.city, first.policy
            )));
        }
    }
    let rows: Vec<TableRow> = evals.iter().map(|e| e.row.clone()).collect();
    let roi_rows = evals
        .iter()
        .map(|e| RoiRow {
            bs_type: e.row.bs_type.clone(),
            city: e.city.clone(),
            policy: e.policy.clone(),
            saving: e.row.saving,
            roi: roi(e.row.saving, &e.equipment, &e.battery),
        })
        .collect();
    let mut supply = Vec::new();
    let mut calendar = Vec::new();
    for e in evals.iter().filter(|e| e.policy != "grid_only") {
        let offset = calendar.len();
        supply.extend(e.supply.iter().map(|p| SupplyPoint {
            day: p.day + offset,
            ..*p
        }));
        calendar.extend_from_slice(&e.weather_calendar);
    }
    Ok(Report {
        rows,
        roi: roi_rows,
        class_supply: supply_by_class(&supply, &calendar),
    })
}

pub fn write_rows_csv<W: Write>(rows: &[TableRow], writer: W) -> Result<()> {
    write_serialized(rows, writer)
}

pub fn write_roi_csv<W: Write>(rows: &[RoiRow], writer: W) -> Result<()> {
    write_serialized(rows, writer)
}

pub fn write_class_supply_csv<W: Write>(rows: &[ClassSupply], writer: W) -> Result<()> {
    write_serialized(rows, writer)
}

pub fn write_supply_csv<W: Write>(
    points: &[SupplyPoint],
    calendar: &[WeatherDayClass],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["day", "weather", "hour", "demand", "renewable_direct", "battery_discharge", "grid"])?;
    for p in points {
        let weather = calendar.get(p.day).map(|c| c.label()).unwrap_or_default();
        w.write_record(&[
            p.day.to_string(),
            weather,
            p.hour.to_string(),
            p.demand.to_string(),
            p.renewable_direct.to_string(),
            p.battery_discharge.to_string(),
            p.grid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// ROI as a BS-type by city grid; cells without a run are left empty.
pub fn write_roi_matrix_csv<W: Write>(rows: &[RoiRow], policy: &str, writer: W) -> Result<()> {
    let mut cities: Vec<String> = Vec::new();
    for r in rows.iter().filter(|r| r.policy == policy) {
        if !cities.contains(&r.city) {
            cities.push(r.city.clone());
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["bs_type".to_string()];
    header.extend(cities.iter().cloned());
    w.write_record(&header)?;
    for bs in BsType::ALL {
        let mut record = vec![bs.name().to_string()];
        for c in &cities {
            let cell = rows
                .iter()
                .find(|r| r.policy == policy && r.bs_type == bs.name() && &r.city == c)
                .map(|r| r.roi.to_string())
                .unwrap_or_default();
            record.push(cell);
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn write_serialized<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewables::{SolarClass, WindClass};

    #[test]
    fn grid_only_saves_nothing() {
        let cfg = ScenarioConfig::default();
        let e = evaluate(&cfg, None, &PolicyKind::GridOnly).unwrap();
        assert_eq!(e.row.saving, 0.0);
        assert_eq!(e.row.ratio, 0.0);
        assert_eq!(e.breakdown.investment.total(), 0.0);
    }

    #[test]
    fn row_columns_add_up() {
        let cfg = ScenarioConfig::default();
        let e = evaluate(&cfg, None, &PolicyKind::Greedy).unwrap();
        let r = &e.row;
        assert!((r.energy + r.demand + r.investment - r.total).abs() < 1e-12);
        assert!(r.saving > 0.0);
    }

    #[test]
    fn roi_follows_saving() {
        let mut cfg = ScenarioConfig::default();
        cfg.grid = TimeGrid::days(2);
        cfg.weather_calendar.truncate(2);
        let e = evaluate(&cfg, None, &PolicyKind::Greedy).unwrap();
        let report = build_report(&[e.clone()]).unwrap();
        assert_eq!(report.rows.len(), 1);
        let expected = roi(e.row.saving, &cfg.equipment, &cfg.battery);
        assert_eq!(report.roi[0].roi, expected);
    }

    #[test]
    fn mixed_tariffs_rejected() {
        let mut cfg = ScenarioConfig::single_day(
            BsType::Office,
            WeatherDayClass::new(SolarClass::Cloudy, WindClass::Low),
            3,
        );
        let a = evaluate(&cfg, None, &PolicyKind::Greedy).unwrap();
        cfg.tariff.energy_price = 0.1;
        let b = evaluate(&cfg, None, &PolicyKind::Greedy).unwrap();
        assert!(build_report(&[a, b]).is_err());
    }

    #[test]
    fn class_profiles_average_days() {
        let pts = vec![
            SupplyPoint { day: 0, hour: 0.0, demand: 1.0, renewable_direct: 1.0, battery_discharge: 0.0, grid: 0.0 },
            SupplyPoint { day: 1, hour: 0.0, demand: 3.0, renewable_direct: 1.0, battery_discharge: 0.0, grid: 2.0 },
        ];
        let class = WeatherDayClass::new(SolarClass::Clear, WindClass::High);
        let out = supply_by_class(&pts, &[class, class]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].days, 2);
        assert_eq!(out[0].demand, 2.0);
        assert_eq!(out[0].grid, 1.0);
    }

    #[test]
    fn oracle_policy_needs_short_horizon() {
        assert!(evaluate(&ScenarioConfig::default(), None, &PolicyKind::Oracle).is_err());
    }

    #[test]
    fn policy_names() {
        assert_eq!(PolicyKind::parse("greedy", None).unwrap(), PolicyKind::Greedy);
        assert!(PolicyKind::parse("dqn", None).is_err());
        assert!(matches!(
            PolicyKind::parse("random", None),
            Err(Error::Unknown { .. })
        ));
    }
}
