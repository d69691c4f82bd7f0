//! Reference computations shared by the integration tests and the
//! acceptance run. Each check returns what it measured; callers decide.
#![allow(dead_code)]

pub mod oracles;
pub mod sim;
