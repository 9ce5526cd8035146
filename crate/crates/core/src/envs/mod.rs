//! Task environments: a two-stage decision tree with closed-form return
//! moments, a heavy-tailed three-armed bandit, an illiquid-asset portfolio
//! allocation task, a consumption/investment task with default risk, and
//! randomly generated finite MDPs for cross-checking learned values against
//! dynamic programming.

pub mod bandit;
pub mod consumption;
pub mod portfolio;
pub mod tabular;
pub mod tree;

pub use bandit::{BanditParams, ThreeArmBandit};
pub use consumption::{ConsumptionEnv, ConsumptionParams};
pub use portfolio::{PortfolioEnv, PortfolioParams};
pub use tabular::TabularMdp;
pub use tree::{tree_exact_moments, TreeMdp, TreeMoments, TreeState};
