//! Isolation analysis for shared web hosting servers.
//!
//! The crate models a hosting server — OS accounts, a filesystem snapshot
//! with POSIX permissions, virtual-host configuration and the script
//! execution mode — and answers three questions about it:
//!
//! * what can each site's scripts actually reach ([`access`]),
//! * which of the ten classic cross-tenant attacks are feasible, with an
//!   evidence chain per finding ([`attack`]),
//! * and what ordered configuration changes make every finding go away
//!   ([`remediation`]).
//!
//! Scenarios are loaded from a directory of four plain-text files (see
//! [`manifest`]) and reports are rendered as text or a stable JSON schema
//! (see [`report`]).

pub mod access;
pub mod attack;
pub mod fixture;
pub mod manifest;
pub mod model;
pub mod paths;
pub mod remediation;
pub mod report;

pub use model::{validate_scenario, Scenario};
