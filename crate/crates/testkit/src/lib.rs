//! Independent oracles and fixture builders shared by the integration and
//! acceptance suites.
//!
//! Nothing here calls into the engine paths it checks: the expression oracle
//! has its own evaluator, the path oracle its own domain extraction and
//! priority selection, the reference walker reads raw JSON.

pub mod exprs;
pub mod fixtures;
pub mod graph;
pub mod windows;
