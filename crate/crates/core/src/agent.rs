//! The online learner each device runs.
//!
//! Every slot a device updates moving-average estimates of its outbound relay
//! success rate and inbound demand rate; on an inbound request it snaps those
//! estimates (and the offered energy cost) onto the policy table grid and
//! answers with the stored threshold policy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::Action;
use crate::table::PolicyTable;

/// Default starting value for both estimates.
pub const DEFAULT_INITIAL_ESTIMATE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid token event: {0}")]
    InvalidEvent(String),
}

/// How a device answers relay requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CooperationMode {
    /// Self-interested: policy-table lookup, pays and earns tokens.
    TokenLearning,
    /// Always relays while it has relay energy left.
    ObedientFinite,
    /// Always relays; relay energy is never consumed.
    ObedientInfinite,
    /// Never relays.
    NeverCooperate,
}

impl CooperationMode {
    pub const ALL: [CooperationMode; 4] = [
        CooperationMode::TokenLearning,
        CooperationMode::ObedientFinite,
        CooperationMode::ObedientInfinite,
        CooperationMode::NeverCooperate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CooperationMode::TokenLearning => "token-learning",
            CooperationMode::ObedientFinite => "obedient-finite",
            CooperationMode::ObedientInfinite => "obedient-infinite",
            CooperationMode::NeverCooperate => "never-cooperate",
        }
    }

    /// Whether relaying is paid for with tokens.
    pub fn uses_tokens(self) -> bool {
        matches!(
            self,
            CooperationMode::TokenLearning | CooperationMode::NeverCooperate
        )
    }
}

impl fmt::Display for CooperationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CooperationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown cooperation mode '{s}'"))
    }
}

/// What a device observed during one slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotObservation {
    /// A paid-for outbound relay request was R-ACK'd.
    pub outbound_success: bool,
    /// An inbound relay request arrived while the device had relay energy.
    pub inbound_request: bool,
    /// Energy the inbound relay would cost, Joules.
    pub inbound_cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenEvent {
    /// Relayed for someone: earn a token, spend energy.
    Provided,
    /// Was relayed for: spend a token.
    Received,
}

/// Relay-energy bin: 0 iff `p` is exhausted, else `ceil((bins-1) * p / p_max)`.
pub fn quantize_energy(p: f64, p_max: f64, bins: usize) -> usize {
    if p <= 0.0 {
        return 0;
    }
    let top = bins - 1;
    let bin = ((top as f64) * p / p_max).ceil() as usize;
    bin.clamp(1, top)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub tokens: usize,
    pub max_tokens: usize,
    /// Remaining relay energy, Joules.
    pub energy: f64,
    pub p_max: f64,
    pub energy_bins: usize,
    pub pi_hat: f64,
    pub mu_hat: f64,
    pub window: u32,
    pub mode: CooperationMode,
}

impl AgentState {
    pub fn new(
        mode: CooperationMode,
        tokens: usize,
        max_tokens: usize,
        p_max: f64,
        energy_bins: usize,
        window: u32,
    ) -> Self {
        assert!(window >= 1, "learning window must be at least 1");
        assert!(tokens <= max_tokens);
        Self {
            tokens,
            max_tokens,
            energy: p_max,
            p_max,
            energy_bins,
            pi_hat: DEFAULT_INITIAL_ESTIMATE,
            mu_hat: DEFAULT_INITIAL_ESTIMATE,
            window,
            mode,
        }
    }

    pub fn energy_bin(&self) -> usize {
        quantize_energy(self.energy, self.p_max, self.energy_bins)
    }

    /// Still taking part in relaying (not in the dead state).
    pub fn is_alive(&self) -> bool {
        self.energy > 0.0
    }

    /// One exponential-moving-average step for both estimates.
    pub fn update_estimates(&mut self, obs: &SlotObservation) {
        let w = self.window as f64;
        let step = |est: f64, hit: bool| (if hit { 1.0 } else { 0.0 }) / w + (w - 1.0) / w * est;
        self.pi_hat = step(self.pi_hat, obs.outbound_success);
        self.mu_hat = step(self.mu_hat, obs.inbound_request);
    }

    /// Answer to an inbound request that would cost `inbound_cost` Joules.
    /// Token-learning devices without a table decline.
    pub fn decide(&self, inbound_cost: f64, table: Option<&PolicyTable>) -> Action {
        match self.mode {
            CooperationMode::TokenLearning => table.map_or(Action::Decline, |table| table.lookup(
                self.pi_hat,
                self.mu_hat,
                inbound_cost,
                self.tokens,
                self.energy_bin(),
            )),
            CooperationMode::ObedientFinite if self.is_alive() => Action::Relay,
            CooperationMode::ObedientFinite => Action::Decline,
            CooperationMode::ObedientInfinite => Action::Relay,
            CooperationMode::NeverCooperate => Action::Decline,
        }
    }

    /// Draws relay energy; a no-op for devices with unlimited budgets.
    pub fn spend_energy(&mut self, cost: f64) {
        if self.mode != CooperationMode::ObedientInfinite {
            self.energy = (self.energy - cost).max(0.0);
        }
    }

    /// Token and energy update after a completed relay transaction.
    pub fn apply_token_event(&mut self, event: TokenEvent, cost: f64) -> Result<(), AgentError> {
        if !self.is_alive() {
            return Err(AgentError::InvalidEvent(format!(
                "{event:?} while in the dead state"
            )));
        }
        match event {
            TokenEvent::Provided => {
                if !(cost > 0.0) {
                    return Err(AgentError::InvalidEvent(format!("relay cost {cost} <= 0")));
                }
                self.tokens = (self.tokens + 1).min(self.max_tokens);
                self.spend_energy(cost);
            }
            TokenEvent::Received => {
                if self.tokens == 0 {
                    return Err(AgentError::InvalidEvent("received help with 0 tokens".into()));
                }
                self.tokens -= 1;
            }
        }
        Ok(())
    }
}
