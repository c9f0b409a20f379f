//! Packet-level simulator of k-pod fat-tree data center networks with a
//! distributed flow scheduler (DiFS) and an ECMP baseline.

pub mod difs;
pub mod error;
pub mod fabric;
pub mod harness;
pub mod network;
pub mod sim;
pub mod tcp;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
