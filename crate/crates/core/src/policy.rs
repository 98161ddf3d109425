//! Reference dispatch policies.

use crate::env::{BessEnv, Policy};

/// Never touches the battery.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridOnly;

impl Policy for GridOnly {
    fn choose(&mut self, env: &BessEnv) -> usize {
        env.actions().idle_index()
    }

    fn name(&self) -> String {
        "grid_only".into()
    }
}

/// Myopic rule: soak up every surplus, and on a deficit discharge as much as
/// possible without pushing power past the load.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl Greedy {
    pub fn action(env: &BessEnv) -> usize {
        let actions = env.actions();
        let surplus = env.surplus_kw();
        if surplus >= 0.0 {
            return actions.max_charge_index();
        }
        let deficit = -surplus;
        let (_, b_max) = env.bounds();
        let eta = env.config().battery.eta_discharge;
        (actions.idle_index() + 1..actions.len())
            .rev()
            .find(|&i| eta * actions.level(i) * b_max <= deficit)
            .filter(|_| b_max > 0.0)
            .unwrap_or(actions.idle_index())
    }
}

impl Policy for Greedy {
    fn choose(&mut self, env: &BessEnv) -> usize {
        Self::action(env)
    }

    fn name(&self) -> String {
        "greedy".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::BsType;
    use crate::env::ActionGrid;
    use crate::grid::TimeGrid;
    use crate::renewables::WeatherDayClass;
    use crate::scenario::{ScenarioConfig, ScenarioTraces};

    fn env_with(demand: f64, generation: f64, soc: f64) -> BessEnv {
        let mut cfg = ScenarioConfig::single_day(BsType::Resident, WeatherDayClass::all()[0], 1);
        cfg.grid = TimeGrid::new(1.0, 1).unwrap();
        cfg.initial_soc = soc;
        let traces =
            ScenarioTraces::from_values(cfg.grid.clone(), vec![demand], vec![generation], vec![0.0])
                .unwrap();
        BessEnv::with_traces(&cfg, traces, ActionGrid::default()).unwrap()
    }

    #[test]
    fn grid_only_is_idle() {
        let env = env_with(1.0, 0.0, 0.5);
        assert_eq!(GridOnly.choose(&env), 4);
    }

    #[test]
    fn greedy_charges_on_surplus() {
        let env = env_with(1.0, 4.0, 0.5);
        assert_eq!(Greedy.choose(&env), 0);
    }

    #[test]
    fn greedy_skips_discharge_past_the_deficit() {
        // soc 0.18: b_max = 0.8 kW, smallest level delivers 0.85 * 0.2 = 0.17 kW.
        let env = env_with(0.1, 0.0, 0.18);
        assert_eq!(Greedy.choose(&env), 4);
        // A 1 kW deficit with b_max = 4 kW: level 0.25 delivers 0.85 kW.
        let env = env_with(1.0, 0.0, 0.5);
        assert_eq!(Greedy.choose(&env), 5);
        let env = env_with(10.0, 0.0, 0.5);
        assert_eq!(Greedy.choose(&env), 8);
    }

    #[test]
    fn greedy_idles_on_empty_battery() {
        let env = env_with(1.0, 0.0, 0.1);
        assert_eq!(Greedy.choose(&env), 4);
    }
}
