//! Per-slot cost accounting: energy charge, incremental demand charge,
//! generator amortization and battery degradation.

use serde::{Deserialize, Serialize};

use crate::battery::BatteryConfig;
use crate::error::{Error, Result};

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    /// USD per kWh drawn from the grid.
    pub energy_price: f64,
    /// USD per kW of cycle peak grid draw.
    pub demand_price: f64,
}

impl Default for Tariff {
    fn default() -> Self {
        Self {
            energy_price: 0.049,
            demand_price: 16.08,
        }
    }
}

impl Tariff {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("tariff.energy_price", self.energy_price),
            ("tariff.demand_price", self.demand_price),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Purchase prices and rated lifetimes of the two generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquipmentConfig {
    pub pv_price: f64,
    pub pv_lifetime_hours: f64,
    pub wind_price: f64,
    pub wind_lifetime_hours: f64,
}

impl Default for EquipmentConfig {
    fn default() -> Self {
        Self {
            pv_price: 3950.0,
            pv_lifetime_hours: 25.0 * HOURS_PER_YEAR,
            wind_price: 4500.0,
            wind_lifetime_hours: 20.0 * HOURS_PER_YEAR,
        }
    }
}

impl EquipmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("equipment.pv_price", self.pv_price),
            ("equipment.pv_lifetime_hours", self.pv_lifetime_hours),
            ("equipment.wind_price", self.wind_price),
            ("equipment.wind_lifetime_hours", self.wind_lifetime_hours),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositive { name, value });
            }
        }
        Ok(())
    }

    /// A book with both generators new.
    pub fn new_book(&self) -> EquipmentBook {
        EquipmentBook {
            equipment: *self,
            pv_remaining: self.pv_lifetime_hours,
            wind_remaining: self.wind_lifetime_hours,
            pv_replacements: 0,
            wind_replacements: 0,
        }
    }
}

/// Remaining generator lifetimes over a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquipmentBook {
    pub equipment: EquipmentConfig,
    pub pv_remaining: f64,
    pub wind_remaining: f64,
    pub pv_replacements: u32,
    pub wind_replacements: u32,
}

impl EquipmentBook {
    /// Charges one slot of PV use; `using` means strictly positive output.
    pub fn use_pv(&mut self, using: bool, dt: f64) -> f64 {
        let e = self.equipment;
        let (cost, remaining, replaced) =
            generator_use_cost(using, e.pv_price, e.pv_lifetime_hours, dt, self.pv_remaining);
        self.pv_remaining = remaining;
        self.pv_replacements += u32::from(replaced);
        cost
    }

    pub fn use_wind(&mut self, using: bool, dt: f64) -> f64 {
        let e = self.equipment;
        let (cost, remaining, replaced) = generator_use_cost(
            using,
            e.wind_price,
            e.wind_lifetime_hours,
            dt,
            self.wind_remaining,
        );
        self.wind_remaining = remaining;
        self.wind_replacements += u32::from(replaced);
        cost
    }
}

/// Linear amortization of a generator over its rated running hours.
///
/// Returns `(cost, remaining lifetime, replaced)`. When the lifetime runs out
/// the unit is replaced and its remaining lifetime resets.
pub fn generator_use_cost(
    using: bool,
    price: f64,
    lifetime_hours: f64,
    dt: f64,
    remaining_hours: f64,
) -> (f64, f64, bool) {
    if !using {
        return (0.0, remaining_hours, false);
    }
    let cost = price * dt / lifetime_hours;
    let remaining = remaining_hours - dt;
    if remaining <= 0.0 {
        (cost, lifetime_hours + remaining, true)
    } else {
        (cost, remaining, false)
    }
}

pub fn energy_charge(p_kw: f64, dt: f64, tariff: &Tariff) -> Result<f64> {
    if p_kw < 0.0 {
        return Err(Error::NegativePower(p_kw));
    }
    Ok(tariff.energy_price * p_kw * dt)
}

/// Demand charge on the increase of the running peak; returns the charge
/// and the updated peak.
pub fn demand_charge_step(p_kw: f64, p_max_kw: f64, tariff: &Tariff) -> (f64, f64) {
    let increment = (p_kw - p_max_kw).max(0.0);
    (tariff.demand_price * increment, p_kw.max(p_max_kw))
}

/// Degradation cost of a capacity-fade step, valued against the pack's
/// replacement cost.
pub fn battery_degradation_cost(delta_soe: f64, cfg: &BatteryConfig) -> f64 {
    cfg.replacement_value() * delta_soe.max(0.0)
}

/// Total up-front investment: both generators plus the battery pack.
pub fn total_investment(equipment: &EquipmentConfig, battery: &BatteryConfig) -> f64 {
    equipment.pv_price + equipment.wind_price + battery.replacement_value()
}

/// Annualized return on investment of a monthly saving.
pub fn roi(monthly_saving: f64, equipment: &EquipmentConfig, battery: &BatteryConfig) -> f64 {
    12.0 * monthly_saving / total_investment(equipment, battery)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InvestmentSplit {
    pub pv: f64,
    pub wind: f64,
    pub battery: f64,
}

impl InvestmentSplit {
    pub fn total(&self) -> f64 {
        self.pv + self.wind + self.battery
    }

    pub fn generators(&self) -> f64 {
        self.pv + self.wind
    }
}

/// Per-slot cost components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotCost {
    pub energy: f64,
    pub demand: f64,
    pub investment: InvestmentSplit,
}

impl SlotCost {
    pub fn total(&self) -> f64 {
        self.energy + self.demand + self.investment.total()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub energy: f64,
    pub demand: f64,
    pub investment: InvestmentSplit,
    /// Sum of the per-slot totals in slot order.
    pub total: f64,
    pub peak_kw: f64,
}

impl CostBreakdown {
    pub fn add(&mut self, slot: &SlotCost, p_kw: f64) {
        self.energy += slot.energy;
        self.demand += slot.demand;
        self.investment.pv += slot.investment.pv;
        self.investment.wind += slot.investment.wind;
        self.investment.battery += slot.investment.battery;
        self.total += slot.total();
        self.peak_kw = self.peak_kw.max(p_kw);
    }

    /// Bill the operator can influence by dispatch: grid charges plus
    /// battery wear, leaving out generator amortization.
    pub fn operating_total(&self) -> f64 {
        self.energy + self.demand + self.investment.battery
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn energy_charge_examples() {
        let t = Tariff::default();
        assert_eq!(energy_charge(0.0, 1.0, &t).unwrap(), 0.0);
        assert!((energy_charge(1.2, 1.0, &t).unwrap() - 0.0588).abs() < 1e-12);
        let month: f64 = (0..720).map(|_| energy_charge(1.293, 1.0, &t).unwrap()).sum();
        assert!((month - 45.62).abs() < 0.01);
        assert!(energy_charge(-0.1, 1.0, &t).is_err());
    }

    #[test]
    fn demand_charge_examples() {
        let t = Tariff::default();
        assert_eq!(demand_charge_step(1.0, 1.5, &t), (0.0, 1.5));
        let (c, p) = demand_charge_step(1.437, 0.0, &t);
        assert!((c - 23.107).abs() < 1e-3);
        assert_eq!(p, 1.437);
    }

    #[test]
    fn generator_cost_examples() {
        let e = EquipmentConfig::default();
        let mut book = e.new_book();
        assert_eq!(book.use_pv(false, 1.0), 0.0);
        assert_eq!(book.pv_remaining, e.pv_lifetime_hours);
        let pv = book.use_pv(true, 1.0);
        assert!((pv - 0.018_037).abs() < 1e-6);
        assert_eq!(book.pv_remaining, e.pv_lifetime_hours - 1.0);
        let wind = book.use_wind(true, 1.0);
        assert!((wind - 0.025_685).abs() < 1e-6);
    }

    #[test]
    fn generator_replacement_resets_lifetime() {
        let (cost, remaining, replaced) = generator_use_cost(true, 100.0, 10.0, 1.0, 0.5);
        assert!(replaced);
        assert_eq!(cost, 10.0);
        assert_eq!(remaining, 9.5);
    }

    #[test]
    fn degradation_examples() {
        let b = BatteryConfig::default();
        assert_eq!(battery_degradation_cost(0.0, &b), 0.0);
        assert!((battery_degradation_cost(5.714e-5, &b) - 0.1549).abs() < 1e-4);
        assert!((battery_degradation_cost(0.2, &b) - 542.0).abs() < 1e-9);
    }

    #[test]
    fn roi_examples() {
        let e = EquipmentConfig::default();
        let b = BatteryConfig::default();
        assert_eq!(total_investment(&e, &b), 11160.0);
        assert!((roi(50.7, &e, &b) - 0.0545).abs() < 5e-5);
        assert!((roi(47.0, &e, &b) - 0.0505).abs() < 5e-5);
        assert_eq!(roi(0.0, &e, &b), 0.0);
    }

    #[test]
    fn breakdown_total_is_component_sum() {
        let mut cb = CostBreakdown::default();
        let s = SlotCost {
            energy: 0.1,
            demand: 2.0,
            investment: InvestmentSplit { pv: 0.01, wind: 0.02, battery: 0.03 },
        };
        cb.add(&s, 1.3);
        cb.add(&s, 0.7);
        let sum = cb.energy + cb.demand + cb.investment.total();
        assert!((cb.total - sum).abs() < 1e-12);
        assert_eq!(cb.peak_kw, 1.3);
        assert!((cb.operating_total() - 2.0 * 2.13).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn demand_charges_telescope(p in prop::collection::vec(0.0f64..5.0, 1..500)) {
            let t = Tariff::default();
            let mut peak = 0.0;
            let mut sum = 0.0;
            for &x in &p {
                let (c, np) = demand_charge_step(x, peak, &t);
                sum += c;
                peak = np;
            }
            let brute = t.demand_price * p.iter().copied().fold(0.0, f64::max);
            prop_assert!((sum - brute).abs() <= 1e-12 * brute.max(1.0));
        }
    }
}
