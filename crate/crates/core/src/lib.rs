//! Failure-aware composition of drone-swarm delivery services over a skyway
//! network.

pub mod bench;
pub mod composer;
pub mod config;
pub mod energy;
pub mod failure;
pub mod fed;
pub mod flightlog;
pub mod net;
