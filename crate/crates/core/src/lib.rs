//! Simulation and control of a renewable-powered cellular base station with
//! a battery: weather and demand synthesis, generator and battery models,
//! electricity billing, the dispatch environment, a deep Q-network
//! controller, baseline policies and reporting.

pub mod battery;
pub mod billing;
pub mod demand;
pub mod dqn;
pub mod env;
pub mod error;
pub mod grid;
pub mod oracle;
pub mod renewables;
pub mod report;
pub mod policy;
pub mod rng;
pub mod scenario;

pub use battery::{BatteryConfig, BatteryState};
pub use billing::{CostBreakdown, EquipmentBook, EquipmentConfig, InvestmentSplit, SlotCost, Tariff};
pub use dqn::{DqnPolicy, Hyperparams, QNetwork};
pub use demand::{BsType, CalibrationTarget, DemandProfile};
pub use env::{ActionGrid, BessEnv, EnvState, Observation, Policy, Rollout, SlotReport};
pub use error::{Error, Result};
pub use grid::{TimeGrid, Trace, TraceKind};
pub use renewables::{PvConfig, SolarClass, WeatherDayClass, WindClass, WindConfig};
pub use scenario::{RewardMode, ScenarioConfig, ScenarioTraces};
pub use oracle::{exhaustive_oracle, OracleResult};
pub use report::{Evaluation, PolicyKind, TableRow};
