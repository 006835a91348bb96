//! Fixtures shared by the integration suites and the acceptance runner.
#![allow(dead_code)]

pub mod mock;
pub mod oracle;
pub mod synth;
