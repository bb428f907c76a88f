//! Token-incentivized device-to-device relaying in cellular networks.
//!
//! * [`mdp`]: the per-device cooperation MDP and its solvers.
//! * [`table`]: offline policy tables over a parameter grid.
//! * [`agent`]: the online learner each device runs.
//! * [`radio`]: channel, SINR and relay-power computations.
//! * [`sim`]: the time-slotted network simulator and its config files.
//! * [`experiment`]: presets, sweeps and CSV output.

pub mod agent;
pub mod experiment;
pub mod mdp;
pub mod radio;
pub mod sim;
pub mod table;
