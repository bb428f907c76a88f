//! Per-device cooperation MDP.
//!
//! A device's state is its token holding `k` and a quantized relay-energy bin
//! `e`. Each slot it may be helped by a relay (spending a token), help another
//! device (earning a token and draining energy), or neither. Bin 0 is the dead
//! state: no relaying in either direction and zero utility.

mod balance;
mod exact;
mod solve;

pub use balance::{steady_state_balance, BalanceRates};
pub use exact::evaluate_policy_exact;
pub use solve::{
    greedy_policy, q_values, to_threshold, value_iteration, BellmanSweeps, DEFAULT_TOLERANCE,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("invalid environment parameters: {0}")]
    InvalidEnv(String),
    #[error("invalid state space: {0}")]
    InvalidSpace(String),
    #[error("action {action:?} is not available in energy bin {bin}")]
    InvalidAction { action: Action, bin: usize },
    #[error("policy is not threshold in the token state (bin {bin}: k={k} cooperates above an idle state)")]
    NonThresholdPolicy { bin: usize, k: usize },
    #[error("token chain has no unique stationary distribution")]
    NoStationaryDistribution,
}

/// Response to an inbound relay request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Action {
    /// R-NACK.
    Decline = 0,
    /// R-ACK: act as a relay.
    Relay = 1,
}

impl Action {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    fn indicator(self) -> f64 {
        match self {
            Action::Decline => 0.0,
            Action::Relay => 1.0,
        }
    }
}

/// Actions available in an energy bin: both when alive, only `Decline` when dead.
pub fn action_set(bin: usize) -> &'static [Action] {
    if bin > 0 {
        &[Action::Decline, Action::Relay]
    } else {
        &[Action::Decline]
    }
}

/// The environment one device sees, as consumed by the MDP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvParams {
    /// Outbound relay success rate (demand rate times recruitment efficiency).
    pub pi: f64,
    /// Inbound relay demand rate.
    pub mu: f64,
    /// Energy cost of one relay transmission, Joules.
    pub cost: f64,
    /// Benefit of one relayed reception.
    pub benefit: f64,
    /// Discount factor.
    pub beta: f64,
}

impl EnvParams {
    pub fn new(pi: f64, mu: f64, cost: f64, benefit: f64, beta: f64) -> Result<Self, MdpError> {
        let env = Self {
            pi,
            mu,
            cost,
            benefit,
            beta,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        let bad = |m: String| Err(MdpError::InvalidEnv(m));
        if !(0.0..=0.5).contains(&self.pi) {
            return bad(format!("pi = {} outside [0, 0.5]", self.pi));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad(format!("mu = {} outside [0, 1]", self.mu));
        }
        if self.pi + self.mu > 1.0 + 1e-12 {
            return bad(format!("pi + mu = {} exceeds 1", self.pi + self.mu));
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return bad(format!("cost = {} must be finite and non-negative", self.cost));
        }
        if !self.benefit.is_finite() {
            return bad(format!("benefit = {} must be finite", self.benefit));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta = {} outside [0, 1)", self.beta));
        }
        Ok(())
    }
}

/// Finite state space: token states `0..=max_tokens`, energy bins `0..energy_bins`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpace {
    pub max_tokens: usize,
    pub energy_bins: usize,
    /// Full relay energy budget in Joules.
    pub p_max: f64,
}

impl StateSpace {
    pub fn new(max_tokens: usize, energy_bins: usize, p_max: f64) -> Result<Self, MdpError> {
        if max_tokens < 1 {
            return Err(MdpError::InvalidSpace("max_tokens must be at least 1".into()));
        }
        if energy_bins < 2 {
            return Err(MdpError::InvalidSpace("energy_bins must be at least 2".into()));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(MdpError::InvalidSpace(format!("p_max = {p_max} must be positive")));
        }
        Ok(Self {
            max_tokens,
            energy_bins,
            p_max,
        })
    }

    /// Width of one live energy bin in Joules.
    pub fn bin_width(&self) -> f64 {
        self.p_max / (self.energy_bins - 1) as f64
    }

    /// Probability that one relay transmission of `cost` Joules drops the bin by one.
    pub fn bin_drop_probability(&self, cost: f64) -> f64 {
        (cost / self.bin_width()).min(1.0)
    }

    pub fn token_states(&self) -> usize {
        self.max_tokens + 1
    }

    pub fn len(&self) -> usize {
        self.token_states() * self.energy_bins
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, s: CoopState) -> usize {
        debug_assert!(s.k <= self.max_tokens && s.e < self.energy_bins);
        s.e * self.token_states() + s.k
    }

    pub fn state(&self, index: usize) -> CoopState {
        CoopState {
            k: index % self.token_states(),
            e: index / self.token_states(),
        }
    }

    pub fn contains(&self, s: CoopState) -> bool {
        s.k <= self.max_tokens && s.e < self.energy_bins
    }

    pub fn states(&self) -> impl Iterator<Item = CoopState> + '_ {
        (0..self.len()).map(move |i| self.state(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoopState {
    /// Token holding.
    pub k: usize,
    /// Energy bin, 0 = dead.
    pub e: usize,
}

impl CoopState {
    pub fn new(k: usize, e: usize) -> Self {
        Self { k, e }
    }
}

/// Successor distribution of `(s, a)`. Coincident successors are merged.
pub fn transition_probs(
    s: CoopState,
    a: Action,
    env: &EnvParams,
    space: &StateSpace,
) -> Result<Vec<(CoopState, f64)>, MdpError> {
    if !action_set(s.e).contains(&a) {
        return Err(MdpError::InvalidAction { action: a, bin: s.e });
    }
    let mut out: Vec<(CoopState, f64)> = Vec::with_capacity(4);
    let mut push = |t: CoopState, p: f64| {
        if p <= 0.0 {
            return;
        }
        match out.iter_mut().find(|(u, _)| *u == t) {
            Some((_, q)) => *q += p,
            None => out.push((t, p)),
        }
    };

    let alive = s.e > 0;
    let p_received = if alive && s.k > 0 { env.pi } else { 0.0 };
    let p_provided = if alive { env.mu * a.indicator() } else { 0.0 };

    push(CoopState::new(s.k.saturating_sub(1), s.e), p_received);
    if p_provided > 0.0 {
        let k_up = (s.k + 1).min(space.max_tokens);
        let drop = space.bin_drop_probability(env.cost);
        push(CoopState::new(k_up, s.e - 1), p_provided * drop);
        push(CoopState::new(k_up, s.e), p_provided * (1.0 - drop));
    }
    push(s, 1.0 - p_received - p_provided);
    Ok(out)
}

/// Expected one-slot utility: benefit when helped, minus energy cost when helping.
pub fn expected_utility(s: CoopState, a: Action, env: &EnvParams) -> f64 {
    if s.e == 0 {
        return 0.0;
    }
    let gain = if s.k > 0 { env.pi * env.benefit } else { 0.0 };
    gain - env.mu * a.indicator() * env.cost
}

/// State value table over a [`StateSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub space: StateSpace,
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(space: StateSpace) -> Self {
        Self {
            values: vec![0.0; space.len()],
            space,
        }
    }

    pub fn get(&self, s: CoopState) -> f64 {
        self.values[self.space.index(s)]
    }

    /// Sup-norm distance to another value function on the same space.
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Deterministic stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub space: StateSpace,
    pub actions: Vec<Action>,
}

impl Policy {
    /// The policy that never relays.
    pub fn idle(space: StateSpace) -> Self {
        Self {
            actions: vec![Action::Decline; space.len()],
            space,
        }
    }

    pub fn get(&self, s: CoopState) -> Action {
        self.actions[self.space.index(s)]
    }

    pub fn set(&mut self, s: CoopState, a: Action) {
        let i = self.space.index(s);
        self.actions[i] = a;
    }

    /// Whether every action is legal in its state.
    pub fn is_feasible(&self) -> bool {
        self.space
            .states()
            .all(|s| action_set(s.e).contains(&self.get(s)))
    }
}

/// Threshold form of a policy: relay iff `k <= thresholds[e]`; `-1` means never.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThresholdPolicy {
    pub thresholds: Vec<i32>,
}

impl ThresholdPolicy {
    pub const NEVER: i32 = -1;

    pub fn threshold(&self, bin: usize) -> i32 {
        self.thresholds[bin]
    }

    pub fn action(&self, k: usize, bin: usize) -> Action {
        if bin > 0 && (k as i64) <= self.thresholds[bin] as i64 {
            Action::Relay
        } else {
            Action::Decline
        }
    }

    /// Threshold in the highest energy bin.
    pub fn top(&self) -> i32 {
        *self.thresholds.last().expect("at least two bins")
    }

    pub fn is_monotone_in_energy(&self) -> bool {
        self.thresholds.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn to_policy(&self, space: StateSpace) -> Policy {
        let mut p = Policy::idle(space);
        for s in space.states() {
            p.set(s, self.action(s.k, s.e));
        }
        p
    }
}
