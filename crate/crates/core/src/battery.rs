//! Battery state evolution, operating limits and depth-of-discharge driven
//! capacity fade.
//!
//! Sign convention: `b > 0` discharges the battery toward the load, `b < 0`
//! charges it from surplus renewable power, `b == 0` is idle. `b` is always
//! measured at the battery terminals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking an operation against its limits.
const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub capacity_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// Effective-capacity fraction at which the battery must be replaced.
    pub soe_ineffective: f64,
    /// Fraction of source power stored while charging.
    pub eta_charge: f64,
    /// Fraction of terminal power delivered to the load while discharging.
    pub eta_discharge: f64,
    pub max_charge_kw: f64,
    pub max_discharge_kw: f64,
    /// `(depth of discharge, cycles to end of life)` knots, ascending in depth.
    pub cycle_table: Vec<(f64, f64)>,
    /// Replacement cost per kWh of capacity (USD).
    pub unit_cost_per_kwh: f64,
}

pub fn default_cycle_table() -> Vec<(f64, f64)> {
    vec![
        (0.1, 15000.0),
        (0.2, 9000.0),
        (0.3, 6000.0),
        (0.4, 4500.0),
        (0.5, 3500.0),
        (0.6, 2800.0),
        (0.7, 2300.0),
        (0.8, 1900.0),
        (0.9, 1600.0),
        (1.0, 1400.0),
    ]
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            capacity_kwh: 10.0,
            soc_min: 0.1,
            soc_max: 1.0,
            soe_ineffective: 0.8,
            eta_charge: 0.999,
            eta_discharge: 0.85,
            max_charge_kw: 16.0,
            max_discharge_kw: 8.0,
            cycle_table: default_cycle_table(),
            unit_cost_per_kwh: 271.0,
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("battery.capacity_kwh", self.capacity_kwh),
            ("battery.max_charge_kw", self.max_charge_kw),
            ("battery.max_discharge_kw", self.max_discharge_kw),
            ("battery.unit_cost_per_kwh", self.unit_cost_per_kwh),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositive { name, value: v });
            }
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "SoC bounds must satisfy 0 <= min < max <= 1, got [{}, {}]",
                self.soc_min, self.soc_max
            )));
        }
        if !(0.0 < self.soe_ineffective && self.soe_ineffective < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "soe_ineffective must lie in (0, 1), got {}",
                self.soe_ineffective
            )));
        }
        for (name, eta) in [("eta_charge", self.eta_charge), ("eta_discharge", self.eta_discharge)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {eta}")));
            }
        }
        if self.cycle_table.is_empty() {
            return Err(Error::InvalidConfig("cycle table is empty".into()));
        }
        for w in self.cycle_table.windows(2) {
            if !(w[0].0 < w[1].0 && w[0].1 > w[1].1) {
                return Err(Error::InvalidConfig(
                    "cycle table depths must increase and cycle counts decrease".into(),
                ));
            }
        }
        if self
            .cycle_table
            .iter()
            .any(|&(dod, n)| !(dod > 0.0 && dod <= 1.0 && n > 0.0))
        {
            return Err(Error::InvalidConfig(
                "cycle table depths must lie in (0, 1] with positive counts".into(),
            ));
        }
        Ok(())
    }

    /// Replacement value of the whole pack (USD).
    pub fn replacement_value(&self) -> f64 {
        self.unit_cost_per_kwh * self.capacity_kwh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    /// Effective capacity as a fraction of the initial capacity.
    pub soe: f64,
    pub soc: f64,
    pub dod: f64,
}

impl BatteryState {
    pub fn fresh(soc: f64) -> Self {
        Self {
            soe: 1.0,
            soc,
            dod: 0.0,
        }
    }
}

/// Cycles to end of life at depth `dod`, interpolated linearly between the
/// table knots and held constant beyond the first and last knot.
pub fn cycle_life(dod: f64, cfg: &BatteryConfig) -> Result<f64> {
    if !(dod > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "depth of discharge must be positive, got {dod}"
        )));
    }
    let table = &cfg.cycle_table;
    let (first, last) = (table[0], table[table.len() - 1]);
    if dod <= first.0 {
        return Ok(first.1);
    }
    if dod >= last.0 {
        return Ok(last.1);
    }
    let i = table.partition_point(|&(d, _)| d <= dod);
    let (d0, n0) = table[i - 1];
    let (d1, n1) = table[i];
    Ok(n0 + (n1 - n0) * (dod - d0) / (d1 - d0))
}

/// Feasible operation range `(b_min, b_max)` in kW for one slot.
///
/// With surplus renewable power the battery may only charge, and the source
/// draw `|b| / eta_charge` may not exceed the surplus. With a deficit it may
/// only discharge. One side of the range is always zero.
pub fn feasible_bounds(
    state: &BatteryState,
    surplus_kw: f64,
    cfg: &BatteryConfig,
    dt: f64,
) -> (f64, f64) {
    let energy_per_kw = dt / cfg.capacity_kwh;
    if surplus_kw >= 0.0 {
        let headroom = ((cfg.soc_max - state.soc) / energy_per_kw).max(0.0);
        let limit = cfg
            .max_charge_kw
            .min(cfg.eta_charge * surplus_kw)
            .min(headroom);
        // `-0.0` would leak a negative zero into reports.
        (if limit > 0.0 { -limit } else { 0.0 }, 0.0)
    } else {
        let available = ((state.soc - cfg.soc_min) / energy_per_kw).max(0.0);
        (0.0, cfg.max_discharge_kw.min(available))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operation {
    pub next: BatteryState,
    /// Power reaching the load (kW); zero unless discharging.
    pub load_side_kw: f64,
    pub delta_soe: f64,
    /// The pack crossed its end-of-life threshold this slot and `next` is a
    /// replacement pack.
    pub replaced: bool,
}

/// Applies terminal power `b_kw` for one slot.
pub fn apply_operation(
    state: &BatteryState,
    b_kw: f64,
    cfg: &BatteryConfig,
    dt: f64,
) -> Result<Operation> {
    if !b_kw.is_finite() {
        return Err(Error::BoundViolation {
            b_kw,
            min_kw: -cfg.max_charge_kw,
            max_kw: cfg.max_discharge_kw,
        });
    }
    let energy_frac = b_kw * dt / cfg.capacity_kwh;
    let soc_next = state.soc - energy_frac;
    let min_kw = -cfg
        .max_charge_kw
        .min((cfg.soc_max - state.soc).max(0.0) * cfg.capacity_kwh / dt);
    let max_kw = cfg
        .max_discharge_kw
        .min((state.soc - cfg.soc_min).max(0.0) * cfg.capacity_kwh / dt);
    if b_kw > max_kw + BOUND_TOL || b_kw < min_kw - BOUND_TOL {
        return Err(Error::BoundViolation {
            b_kw,
            min_kw,
            max_kw,
        });
    }
    let soc = soc_next.clamp(cfg.soc_min, cfg.soc_max);

    if b_kw > 0.0 {
        let delta_dod = energy_frac;
        let depth = (state.dod + delta_dod).min(1.0);
        let delta_soe = (1.0 - cfg.soe_ineffective) / cycle_life(depth, cfg)?;
        let soe = state.soe - delta_soe;
        let replaced = soe < cfg.soe_ineffective;
        let next = if replaced {
            BatteryState {
                soe: 1.0,
                soc,
                dod: depth,
            }
        } else {
            BatteryState {
                soe,
                soc,
                dod: depth,
            }
        };
        Ok(Operation {
            next,
            load_side_kw: cfg.eta_discharge * b_kw,
            delta_soe,
            replaced,
        })
    } else if b_kw < 0.0 {
        Ok(Operation {
            next: BatteryState {
                soe: state.soe,
                soc,
                dod: (state.dod + energy_frac).max(0.0),
            },
            load_side_kw: 0.0,
            delta_soe: 0.0,
            replaced: false,
        })
    } else {
        Ok(Operation {
            next: *state,
            load_side_kw: 0.0,
            delta_soe: 0.0,
            replaced: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> BatteryConfig {
        BatteryConfig::default()
    }

    #[test]
    fn cycle_life_examples() {
        let c = cfg();
        assert_eq!(cycle_life(0.3, &c).unwrap(), 6000.0);
        assert!((cycle_life(0.25, &c).unwrap() - 7500.0).abs() < 1e-9);
        assert_eq!(cycle_life(0.05, &c).unwrap(), 15000.0);
        assert_eq!(cycle_life(1.0, &c).unwrap(), 1400.0);
        assert!(cycle_life(0.0, &c).is_err());
        assert!(cycle_life(-0.1, &c).is_err());
    }

    #[test]
    fn bounds_full_battery_with_surplus() {
        let s = BatteryState::fresh(1.0);
        assert_eq!(feasible_bounds(&s, 5.0, &cfg(), 1.0), (0.0, 0.0));
    }

    #[test]
    fn bounds_discharge_headroom() {
        let s = BatteryState::fresh(0.5);
        assert_eq!(feasible_bounds(&s, -1.0, &cfg(), 1.0), (0.0, 4.0));
    }

    #[test]
    fn bounds_charge_limited_by_source_draw() {
        let s = BatteryState::fresh(0.5);
        let (lo, hi) = feasible_bounds(&s, 3.0, &cfg(), 1.0);
        assert!((lo + 2.997).abs() < 1e-12);
        assert_eq!(hi, 0.0);
    }

    #[test]
    fn idle_leaves_state() {
        let s = BatteryState { soe: 0.95, soc: 0.4, dod: 0.2 };
        let op = apply_operation(&s, 0.0, &cfg(), 1.0).unwrap();
        assert_eq!(op.next, s);
        assert_eq!(op.load_side_kw, 0.0);
        assert_eq!(op.delta_soe, 0.0);
    }

    #[test]
    fn discharge_example() {
        let s = BatteryState { soe: 1.0, soc: 0.5, dod: 0.3 };
        let op = apply_operation(&s, 2.0, &cfg(), 1.0).unwrap();
        assert!((op.next.soc - 0.3).abs() < 1e-12);
        assert!((op.load_side_kw - 1.7).abs() < 1e-12);
        assert!((op.next.dod - 0.5).abs() < 1e-12);
        // 0.2 / h(0.5) = 0.2 / 3500
        assert!((op.delta_soe - 5.714_285_714_285_714e-5).abs() < 1e-15);
        assert!((op.next.soe - (1.0 - op.delta_soe)).abs() < 1e-15);
    }

    #[test]
    fn charge_example() {
        let s = BatteryState { soe: 1.0, soc: 0.5, dod: 0.4 };
        let op = apply_operation(&s, -3.0, &cfg(), 1.0).unwrap();
        assert!((op.next.soc - 0.8).abs() < 1e-12);
        assert_eq!(op.delta_soe, 0.0);
        assert!((op.next.dod - 0.1).abs() < 1e-12);
        assert_eq!(op.load_side_kw, 0.0);
    }

    #[test]
    fn violations_rejected() {
        let s = BatteryState::fresh(0.5);
        assert!(apply_operation(&s, 4.5, &cfg(), 1.0).is_err());
        assert!(apply_operation(&s, -5.5, &cfg(), 1.0).is_err());
        let tight = BatteryConfig { max_discharge_kw: 1.0, ..cfg() };
        assert!(apply_operation(&s, 1.5, &tight, 1.0).is_err());
        assert!(apply_operation(&s, f64::NAN, &cfg(), 1.0).is_err());
    }

    #[test]
    fn replacement_signalled_at_end_of_life() {
        let s = BatteryState { soe: 0.80001, soc: 0.9, dod: 0.0 };
        let op = apply_operation(&s, 8.0, &cfg(), 1.0).unwrap();
        assert!(op.replaced);
        assert_eq!(op.next.soe, 1.0);
    }

    #[test]
    fn config_validation() {
        cfg().validate().unwrap();
        assert!(BatteryConfig { soc_min: 0.9, soc_max: 0.5, ..cfg() }.validate().is_err());
        assert!(BatteryConfig { capacity_kwh: 0.0, ..cfg() }.validate().is_err());
        let mut bad = cfg();
        bad.cycle_table[3].1 = 99999.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn round_trip_energy_bookkeeping() {
        let c = cfg();
        let s = BatteryState::fresh(0.5);
        let surplus = 4.0;
        let (b_min, _) = feasible_bounds(&s, surplus, &c, 1.0);
        let charged = apply_operation(&s, b_min, &c, 1.0).unwrap();
        let source_draw = -b_min / c.eta_charge;
        assert!((source_draw - surplus).abs() < 1e-12);
        let discharged = apply_operation(&charged.next, -b_min, &c, 1.0).unwrap();
        assert!((discharged.load_side_kw - c.eta_discharge * (-b_min)).abs() < 1e-12);
        assert!((discharged.next.soc - s.soc).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cycle_life_nonincreasing(a in 0.001f64..1.2, b in 0.001f64..1.2) {
            let c = cfg();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(cycle_life(lo, &c).unwrap() >= cycle_life(hi, &c).unwrap());
        }

        #[test]
        fn trajectories_stay_feasible(
            steps in prop::collection::vec((-3.0f64..3.0, -1.0f64..1.0), 1..200)
        ) {
            let c = cfg();
            let mut s = BatteryState::fresh(0.5);
            for (surplus, frac) in steps {
                let (lo, hi) = feasible_bounds(&s, surplus, &c, 1.0);
                prop_assert!(lo <= 0.0 && hi >= 0.0 && (lo == 0.0 || hi == 0.0));
                let b = if frac < 0.0 { -frac * lo } else { frac * hi };
                let op = apply_operation(&s, b, &c, 1.0).unwrap();
                prop_assert!(op.next.soc >= c.soc_min && op.next.soc <= c.soc_max);
                prop_assert!(op.next.soe <= s.soe);
                if b <= 0.0 {
                    prop_assert_eq!(op.delta_soe, 0.0);
                }
                prop_assert!((0.0..=1.0).contains(&op.next.dod));
                s = op.next;
            }
        }
    }
}
