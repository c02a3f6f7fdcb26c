//! Scenario loading, run orchestration, and file export around the
//! coexistence engine in `coexsim-core`.

pub mod export;
pub mod scenario;
