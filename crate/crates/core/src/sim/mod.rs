//! Time-slotted cellular network with D2D relaying paid for in tokens.
//!
//! One slot runs mobility, then the downlink schedule, then the relay
//! request protocol cell by cell in UE-id order, then every device's estimate
//! update, and finally the ledger checks.

mod config;
mod ledger;
mod metrics;
mod mobility;
mod schedule;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::agent::{AgentState, CooperationMode, SlotObservation, TokenEvent};
use crate::mdp::Action;
use crate::radio::{dbm_to_watts, link_gain, select_relay, shannon_rate, sinr, RelayCandidate};
use crate::table::{build_table, PolicyTable, TableError};

pub use config::{parse_axis, AgentConfig, BudgetMix, GridAxes, MobilityMix, RadioConfig, SimConfig};
pub use ledger::TokenLedger;
pub use metrics::{
    percentile, ClassSummary, MetricsReport, Stat, TokenSnapshot, UeMetrics, UeStats,
};
pub use mobility::{kmh_to_ms, uniform_point, uniform_speed, Position, Waypoint};
pub use schedule::{RoundRobin, Schedule};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("no policy table matches {0}")]
    TableMismatch(String),
    #[error("policy table build failed: {0}")]
    Table(#[from] TableError),
    #[error("invariant violated at slot {slot}, UE {ue}: {what}")]
    InvariantViolation { slot: usize, ue: usize, what: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ue {
    pub id: usize,
    pub pos: Position,
    pub walker: Waypoint,
    pub high_mobility: bool,
    pub high_budget: bool,
    pub agent: AgentState,
    pub stats: UeStats,
    /// Index into the world's policy tables.
    table: Option<usize>,
}

/// One relay request, as resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayEvent {
    pub dest: usize,
    pub relay: usize,
    pub acked: bool,
    /// Joules the relay would spend.
    pub cost: f64,
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub downlink: Vec<Vec<usize>>,
    pub idle: Vec<Vec<usize>>,
    /// BS-to-UE SINR of every UE, linear.
    pub bs_sinr: Vec<f64>,
    pub tokens_before: Vec<usize>,
    /// Relay requests in the order they were resolved.
    pub requests: Vec<RelayEvent>,
}

pub struct World {
    pub config: SimConfig,
    pub ues: Vec<Ue>,
    pub ledger: TokenLedger,
    /// Slots completed so far.
    pub slot: usize,
    pub series: Vec<TokenSnapshot>,
    transfers: u64,
    tables: Vec<Arc<PolicyTable>>,
    scheduler: RoundRobin,
    rng: ChaCha8Rng,
    shadow: Normal<f64>,
}

/// Builds the policy tables every populated budget class needs.
pub fn build_tables(config: &SimConfig) -> Result<Vec<Arc<PolicyTable>>, SimError> {
    config.validate()?;
    config
        .budget_classes()
        .into_iter()
        .map(|high| Ok(Arc::new(build_table(config.param_grid(high), config.grid.tolerance)?)))
        .collect()
}

fn find_table(
    config: &SimConfig,
    high_budget: bool,
    tables: &[Arc<PolicyTable>],
) -> Result<usize, SimError> {
    let want = config.param_grid(high_budget);
    tables
        .iter()
        .position(|t| {
            t.grid.compatible_with(want.beta, want.benefit, &want.space)
                && t.grid.pi == want.pi
                && t.grid.mu == want.mu
                && t.grid.cost == want.cost
        })
        .ok_or_else(|| {
            SimError::TableMismatch(format!(
                "beta={} b={} K={} B={} p_max={} J and the configured grid",
                want.beta,
                want.benefit,
                want.space.max_tokens,
                want.space.energy_bins,
                want.space.p_max
            ))
        })
}

fn cell_of(config: &SimConfig, p: &Position) -> usize {
    let cx = ((p.x / config.cell_size) as usize).min(config.cells_x - 1);
    let cy = ((p.y / config.cell_size) as usize).min(config.cells_y - 1);
    cy * config.cells_x + cx
}

fn bs_position(config: &SimConfig, cell: usize) -> Position {
    Position {
        x: ((cell % config.cells_x) as f64 + 0.5) * config.cell_size,
        y: ((cell / config.cells_x) as f64 + 0.5) * config.cell_size,
    }
}

/// `n` flags with exactly `round(fraction * n)` set, in shuffled order.
fn assign_classes<R: Rng>(rng: &mut R, n: usize, fraction: f64) -> Vec<bool> {
    let high = (fraction * n as f64).round() as usize;
    let mut flags: Vec<bool> = (0..n).map(|i| i < high).collect();
    flags.shuffle(rng);
    flags
}

/// Deals `supply` tokens one at a time to uniformly chosen UEs below the cap.
fn deal_tokens<R: Rng>(rng: &mut R, n: usize, cap: usize, supply: usize) -> Vec<usize> {
    let mut held = vec![0; n];
    let mut eligible: Vec<usize> = (0..n).collect();
    for _ in 0..supply {
        let slot = rng.gen_range(0..eligible.len());
        let ue = eligible[slot];
        held[ue] += 1;
        if held[ue] == cap {
            eligible.swap_remove(slot);
        }
    }
    held
}

impl World {
    /// Places UEs, assigns classes and deals the token supply. Token-learning
    /// runs need a table matching each populated budget class.
    pub fn new(config: SimConfig, tables: Vec<Arc<PolicyTable>>) -> Result<Self, SimError> {
        config.validate()?;
        let n = config.n_ues;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (w, h) = config.area();

        let high_mobility = assign_classes(&mut rng, n, config.mobility.high_fraction);
        let high_budget = assign_classes(&mut rng, n, config.budget.high_fraction);
        let positions: Vec<Position> = (0..n).map(|_| uniform_point(&mut rng, w, h)).collect();
        let targets: Vec<Position> = (0..n).map(|_| uniform_point(&mut rng, w, h)).collect();
        let ranges: Vec<(f64, f64)> = high_mobility
            .iter()
            .map(|&hm| {
                let (lo, hi) = if hm {
                    config.mobility.high_speed_kmh
                } else {
                    config.mobility.low_speed_kmh
                };
                (kmh_to_ms(lo), kmh_to_ms(hi))
            })
            .collect();
        let speeds: Vec<f64> = ranges.iter().map(|r| uniform_speed(&mut rng, *r)).collect();
        let tokens = deal_tokens(&mut rng, n, config.agent.max_tokens, config.token_supply);

        let mut class_table = [None, None];
        if config.mode == CooperationMode::TokenLearning {
            for high in config.budget_classes() {
                class_table[high as usize] = Some(find_table(&config, high, &tables)?);
            }
        }

        let ues = (0..n)
            .map(|id| {
                let a = &config.agent;
                let mut agent = AgentState::new(
                    config.mode,
                    tokens[id],
                    a.max_tokens,
                    config.budget.p_max(high_budget[id]),
                    a.energy_bins,
                    a.window,
                );
                agent.pi_hat = a.initial_pi;
                agent.mu_hat = a.initial_mu;
                Ue {
                    id,
                    pos: positions[id],
                    walker: Waypoint {
                        target: targets[id],
                        speed: speeds[id],
                        speed_range: ranges[id],
                    },
                    high_mobility: high_mobility[id],
                    high_budget: high_budget[id],
                    agent,
                    stats: UeStats::default(),
                    table: class_table[high_budget[id] as usize],
                }
            })
            .collect();

        let scheduler = RoundRobin::new(config.cells(), config.radio.grants_per_cell());
        let shadow = Normal::new(0.0, config.channel.shadow_sigma_db)
            .map_err(|e| SimError::Config(format!("shadowing: {e}")))?;
        let mut world = Self {
            ledger: TokenLedger::new(tokens),
            ues,
            slot: 0,
            series: Vec::new(),
            transfers: 0,
            tables,
            scheduler,
            rng,
            shadow,
            config,
        };
        world.snapshot();
        Ok(world)
    }

    pub fn transfers(&self) -> u64 {
        self.transfers
    }

    pub fn cell_of(&self, ue: usize) -> usize {
        cell_of(&self.config, &self.ues[ue].pos)
    }

    /// UEs associated with each cell, ascending id.
    pub fn cell_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.config.cells()];
        for ue in &self.ues {
            members[cell_of(&self.config, &ue.pos)].push(ue.id);
        }
        members
    }

    pub fn mobility_step(&mut self) {
        let dt = self.config.slot_duration;
        let area = self.config.area();
        for ue in &mut self.ues {
            ue.walker.step(&mut ue.pos, dt, area, &mut self.rng);
        }
    }

    pub fn schedule_downlink(&mut self) -> Schedule {
        let members = self.cell_members();
        self.scheduler.schedule(&members)
    }

    fn violation(&self, ue: usize, what: impl Into<String>) -> SimError {
        SimError::InvariantViolation {
            slot: self.slot,
            ue,
            what: what.into(),
        }
    }

    fn snapshot(&mut self) {
        let every = self.config.series_every;
        if every == 0 || !self.slot.is_multiple_of(every) {
            return;
        }
        let mut counts = vec![0; self.config.agent.max_tokens + 1];
        for &k in self.ledger.holdings() {
            counts[k.min(self.config.agent.max_tokens)] += 1;
        }
        self.series.push(TokenSnapshot {
            slot: self.slot,
            counts,
        });
    }

    /// Advances the world by one slot.
    pub fn step(&mut self) -> Result<SlotTrace, SimError> {
        let cfg = &self.config;
        let n = cfg.n_ues;
        let mode = cfg.mode;
        let ch = cfg.channel;
        let settings = cfg.relay_settings();
        let bs_power = dbm_to_watts(cfg.radio.bs_power_dbm);
        let bandwidth = cfg.radio.link_bandwidth_hz;
        let dt = cfg.slot_duration;
        let cap = cfg.agent.max_tokens;

        self.mobility_step();
        let sched = self.schedule_downlink();

        let alive: Vec<bool> = self.ues.iter().map(|u| u.agent.is_alive()).collect();
        for (ue, &a) in self.ues.iter_mut().zip(&alive) {
            if a {
                ue.stats.lifetime += 1;
            }
        }
        // BS-to-UE SINR for every UE, shadowing drawn in id order
        let bs_sinr: Vec<f64> = (0..n)
            .map(|i| {
                let cell = cell_of(&self.config, &self.ues[i].pos);
                let d = self.ues[i].pos.distance(&bs_position(&self.config, cell));
                let chi = self.shadow.sample(&mut self.rng);
                sinr(link_gain(d, chi, &ch), bs_power, &ch)
            })
            .collect();

        let mut trace = SlotTrace {
            downlink: sched.downlink.clone(),
            idle: sched.idle.clone(),
            bs_sinr: bs_sinr.clone(),
            tokens_before: self.ledger.holdings().to_vec(),
            requests: Vec::new(),
        };
        let mut obs = vec![SlotObservation::default(); n];
        let mut engaged = vec![false; n];
        let target = settings.gamma_target;

        for cell in 0..sched.downlink.len() {
            for &j in &sched.downlink[cell] {
                let direct_rate = shannon_rate(bandwidth, bs_sinr[j]);
                let mut rate = direct_rate;
                let dest_alive = alive[j];
                if bs_sinr[j] < target {
                    // DL UEs are never relays, so energy at slot start still holds
                    let can_request =
                        dest_alive && (!mode.uses_tokens() || self.ues[j].agent.tokens > 0);
                    if dest_alive {
                        self.ues[j].stats.demand += 1;
                    }
                    if can_request {
                        self.ues[j].stats.eligible_demand += 1;
                        let candidates: Vec<RelayCandidate> = sched.idle[cell]
                            .iter()
                            .filter(|&&i| !engaged[i] && self.ues[i].agent.energy_bin() > 0)
                            .map(|&i| {
                                let d = self.ues[i].pos.distance(&self.ues[j].pos);
                                let chi = self.shadow.sample(&mut self.rng);
                                RelayCandidate {
                                    id: i,
                                    bs_sinr: bs_sinr[i],
                                    dest_gain: link_gain(d, chi, &ch),
                                }
                            })
                            .collect();
                        if let Some(offer) = select_relay(&candidates, &ch, &settings) {
                            let r = offer.relay_id;
                            engaged[r] = true;
                            obs[r].inbound_request = true;
                            obs[r].inbound_cost = Some(offer.cost);
                            if alive[r] {
                                self.ues[r].stats.inbound += 1;
                            }
                            let relay = &self.ues[r].agent;
                            let table = self.ues[r].table.map(|t| &*self.tables[t]);
                            let mut action = relay.decide(offer.cost, table);
                            // a relay at the token cap could not hold its fee
                            if mode.uses_tokens() && relay.tokens >= cap {
                                action = Action::Decline;
                            }
                            let acked = action == Action::Relay;
                            trace.requests.push(RelayEvent {
                                dest: j,
                                relay: r,
                                acked,
                                cost: offer.cost,
                            });
                            if acked {
                                self.settle(j, r, offer.cost)?;
                                obs[j].outbound_success = true;
                                if dest_alive {
                                    self.ues[j].stats.racks_received += 1;
                                }
                                if alive[r] {
                                    self.ues[r].stats.racks_sent += 1;
                                    self.ues[r].stats.energy_spent += offer.cost;
                                }
                                let relayed = shannon_rate(bandwidth, offer.effective_sinr);
                                if relayed < direct_rate {
                                    return Err(self.violation(j, "relayed rate below direct rate"));
                                }
                                rate = relayed;
                            }
                        }
                    }
                }
                if dest_alive {
                    let s = &mut self.ues[j].stats;
                    s.dl_slots += 1;
                    s.actual_bits += rate * dt;
                    s.direct_bits += direct_rate * dt;
                }
            }
        }

        for (ue, o) in self.ues.iter_mut().zip(&obs) {
            ue.agent.update_estimates(o);
        }
        self.slot += 1;
        self.check_invariants()?;
        self.snapshot();
        Ok(trace)
    }

    /// Pays for one relayed transmission from `dest` to `relay`.
    fn settle(&mut self, dest: usize, relay: usize, cost: f64) -> Result<(), SimError> {
        if !self.ues[relay].agent.is_alive() {
            return Err(self.violation(relay, "relay without energy"));
        }
        if !self.config.mode.uses_tokens() {
            self.ues[relay].agent.spend_energy(cost);
            return Ok(());
        }
        if self.ues[dest].agent.tokens == 0 || !self.ues[dest].agent.is_alive() {
            return Err(self.violation(dest, "paid relay without tokens or energy"));
        }
        if !self.ledger.transfer(dest, relay) {
            return Err(self.violation(dest, "ledger refused transfer"));
        }
        self.transfers += 1;
        let e1 = self.ues[dest].agent.apply_token_event(TokenEvent::Received, cost);
        let e2 = self.ues[relay].agent.apply_token_event(TokenEvent::Provided, cost);
        e1.map_err(|e| self.violation(dest, e.to_string()))?;
        e2.map_err(|e| self.violation(relay, e.to_string()))?;
        Ok(())
    }

    fn check_invariants(&self) -> Result<(), SimError> {
        self.ledger.check().map_err(|what| {
            let ue = (0..self.ues.len())
                .find(|&i| self.ledger.spent(i) > self.ledger.earned(i) + self.ledger.initial(i) as u64)
                .unwrap_or(0);
            self.violation(ue, what)
        })?;
        if self.ledger.supply() != self.config.token_supply {
            return Err(self.violation(0, "token supply changed"));
        }
        for ue in &self.ues {
            if ue.agent.tokens != self.ledger.holding(ue.id) {
                return Err(self.violation(ue.id, "agent tokens differ from the ledger"));
            }
            if ue.agent.tokens > self.config.agent.max_tokens {
                return Err(self.violation(ue.id, "token cap exceeded"));
            }
            if ue.stats.actual_bits < ue.stats.direct_bits {
                return Err(self.violation(ue.id, "throughput gain below 1"));
            }
        }
        Ok(())
    }

    pub fn report(&self) -> MetricsReport {
        let b = self.config.agent.benefit;
        let ues = self
            .ues
            .iter()
            .map(|u| {
                UeMetrics::from_stats(
                    u.id,
                    u.high_mobility,
                    u.high_budget,
                    &u.stats,
                    b,
                    self.ledger.holding(u.id),
                )
            })
            .collect();
        MetricsReport::new(ues, self.series.clone(), self.transfers, self.slot)
    }
}

/// Runs `config.slots` slots and reports metrics.
pub fn run(config: &SimConfig, tables: Vec<Arc<PolicyTable>>) -> Result<MetricsReport, SimError> {
    let mut world = World::new(config.clone(), tables)?;
    for _ in 0..config.slots {
        world.step()?;
    }
    Ok(world.report())
}
