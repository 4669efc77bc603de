//! Fire-sale clearing under risk-weighted capital requirements.
//!
//! Banks hold marketable assets whose prices fall as they are sold. When a
//! bank's capital ratio drops below the regulatory minimum it liquidates
//! assets, which depresses prices for everyone. This crate computes the
//! resulting clearing prices, their sensitivities to model parameters and a
//! family of derivative-based policy metrics.

pub mod banking;
pub mod calibration;
pub mod case_study;
pub mod clearing;
pub mod error;
pub mod liquidation;
pub mod market;
pub mod param;
pub mod policy;
pub mod scenario;
pub mod sensitivity;
pub mod sweep;

pub use banking::{Bank, BankingSystem, PricePair, Regulation, SolvencyClass};
pub use error::{Error, Result};
pub use liquidation::{LiquidationMatrix, LiquidationStrategy, UtilitySpec};
pub use market::{BookLevel, DemandFamily, InverseDemand, Market};
pub use param::ParamTag;
pub use clearing::{ClearingResult, Direction, SolverOptions};
pub use scenario::{ScenarioConfig, StrategyChoice};
