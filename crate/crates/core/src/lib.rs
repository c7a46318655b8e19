//! Checks iOS privacy labels against observed data flows and privacy-policy
//! statements.

pub mod binary_scan;
pub mod config;
pub mod consistency;
pub mod error;
pub mod ontology;
pub mod pipeline;
pub mod policy;
pub mod purpose;
pub mod report;
pub mod taxonomy;
pub mod traffic;

pub use error::{Error, Result};
