//! Constructive-interference symbol-level precoding for the multi-user MISO
//! downlink: problem construction, a parallelizable ADMM solver, a KKT
//! certified reference solver and the PM/SB power-scaling map.

pub mod ci_model;
pub mod constellation;
pub mod duality;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod pif;
pub mod sim;
pub mod validate;

pub use ci_model::{build_ci_system, BlockPartition, CiSystem, ComplexChannel, PartitionStrategy};
pub use constellation::{ConstellationSpec, Dof, ModulationKind, SymbolFrame};
pub use duality::{bisection_sb, evaluate_balance, pm_to_sb, sb_to_pm, Balance, SbResult};
pub use error::{Error, Result};
pub use oracle::{kkt_check, solve_pm_dual, KktReport, OracleConfig, OracleSolution};
pub use pif::{default_config, solve_pm, Mode, PjAdmmConfig, SolverReport, Tau};
