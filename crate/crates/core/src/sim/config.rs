use crate::agent::{CooperationMode, DEFAULT_INITIAL_ESTIMATE};
use crate::mdp::StateSpace;
use crate::radio::{db_to_linear, dbm_to_watts, ChannelParams, RelaySettings};
use crate::table::{linspace_step, ParamGrid};

use serde::{Deserialize, Deserializer, Serialize};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityMix {
    /// Fraction of high-mobility UEs.
    pub high_fraction: f64,
    pub high_speed_kmh: (f64, f64),
    pub low_speed_kmh: (f64, f64),
}

/// Relay energy budgets, expressed as how many relays a full budget pays for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetMix {
    pub high_fraction: f64,
    pub high_relays: f64,
    pub low_relays: f64,
    /// Joules per relay used to convert relay counts to budgets; the default
    /// is the mean relay energy observed with the default radio settings.
    pub joules_per_relay: f64,
}

impl BudgetMix {
    pub fn p_max(&self, high: bool) -> f64 {
        let relays = if high { self.high_relays } else { self.low_relays };
        relays * self.joules_per_relay
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub beta: f64,
    pub benefit: f64,
    pub window: u32,
    pub max_tokens: usize,
    pub energy_bins: usize,
    pub initial_pi: f64,
    pub initial_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridAxes {
    #[serde(deserialize_with = "axis")]
    pub pi: Vec<f64>,
    #[serde(deserialize_with = "axis")]
    pub mu: Vec<f64>,
    #[serde(deserialize_with = "axis")]
    pub cost: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub bs_power_dbm: f64,
    pub ue_power_dbm: f64,
    pub total_bandwidth_hz: f64,
    pub link_bandwidth_hz: f64,
    pub target_sinr_db: f64,
}

impl RadioConfig {
    pub fn grants_per_cell(&self) -> usize {
        (self.total_bandwidth_hz / self.link_bandwidth_hz + 1e-9).floor() as usize
    }

    pub fn target_sinr(&self) -> f64 {
        db_to_linear(self.target_sinr_db)
    }
}

/// Everything a simulation run needs besides its policy tables.
///
/// Stored as flat `section.key = value` lines, where run-level fields use the
/// `sim` section; any key left out keeps its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_ues: usize,
    pub cells_x: usize,
    pub cells_y: usize,
    /// Cell side, metres.
    pub cell_size: f64,
    pub slots: usize,
    /// Seconds.
    pub slot_duration: f64,
    pub token_supply: usize,
    pub mode: CooperationMode,
    pub seed: u64,
    /// Slots between token-distribution snapshots; 0 disables them.
    pub series_every: usize,
    pub mobility: MobilityMix,
    pub budget: BudgetMix,
    pub agent: AgentConfig,
    pub grid: GridAxes,
    pub channel: ChannelParams,
    pub radio: RadioConfig,
}

impl Default for SimConfig {
    /// Full-scale network: 1500 UEs over 100 cells of 1 km, 8000 tokens, all
    /// UEs high-mobility with budgets for 100 relays.
    fn default() -> Self {
        Self {
            n_ues: 1500,
            cells_x: 10,
            cells_y: 10,
            cell_size: 1000.0,
            slots: 3000,
            slot_duration: 5.0,
            token_supply: 8000,
            mode: CooperationMode::TokenLearning,
            seed: 1,
            series_every: 100,
            mobility: MobilityMix {
                high_fraction: 1.0,
                high_speed_kmh: (50.0, 120.0),
                low_speed_kmh: (0.0, 8.0),
            },
            budget: BudgetMix {
                high_fraction: 1.0,
                high_relays: 100.0,
                low_relays: 40.0,
                joules_per_relay: 0.03,
            },
            agent: AgentConfig {
                beta: 0.99,
                benefit: 0.5,
                window: 50,
                max_tokens: 20,
                energy_bins: 11,
                initial_pi: DEFAULT_INITIAL_ESTIMATE,
                initial_mu: DEFAULT_INITIAL_ESTIMATE,
            },
            grid: GridAxes {
                pi: linspace_step(0.05, 0.45, 0.05),
                mu: linspace_step(0.05, 0.45, 0.05),
                cost: linspace_step(0.025, 0.225, 0.025),
                tolerance: crate::mdp::DEFAULT_TOLERANCE,
            },
            channel: ChannelParams::default(),
            radio: RadioConfig {
                bs_power_dbm: 15.0,
                ue_power_dbm: 15.0,
                total_bandwidth_hz: 50e6,
                link_bandwidth_hz: 10e6,
                target_sinr_db: 0.0,
            },
        }
    }
}

impl SimConfig {
    pub fn cells(&self) -> usize {
        self.cells_x * self.cells_y
    }

    pub fn area(&self) -> (f64, f64) {
        (
            self.cells_x as f64 * self.cell_size,
            self.cells_y as f64 * self.cell_size,
        )
    }

    /// Shrinks the network to `n_ues` UEs over a `cells_x` by `cells_y` grid,
    /// scaling the token supply with the UE count.
    pub fn scaled(mut self, n_ues: usize, cells_x: usize, cells_y: usize) -> Self {
        let supply = self.token_supply as f64 * n_ues as f64 / self.n_ues as f64;
        self.token_supply = supply.round() as usize;
        self.n_ues = n_ues;
        self.cells_x = cells_x;
        self.cells_y = cells_y;
        self
    }

    pub fn relay_settings(&self) -> RelaySettings {
        RelaySettings {
            gamma_target: self.radio.target_sinr(),
            p_max: dbm_to_watts(self.radio.ue_power_dbm),
            slot_duration: self.slot_duration,
        }
    }

    /// State space for a budget class.
    pub fn space(&self, high_budget: bool) -> StateSpace {
        StateSpace {
            max_tokens: self.agent.max_tokens,
            energy_bins: self.agent.energy_bins,
            p_max: self.budget.p_max(high_budget),
        }
    }

    /// Budget classes that will actually be populated.
    pub fn budget_classes(&self) -> Vec<bool> {
        let high = (self.budget.high_fraction * self.n_ues as f64).round() as usize;
        let mut out = Vec::new();
        if high > 0 {
            out.push(true);
        }
        if high < self.n_ues {
            out.push(false);
        }
        out
    }

    /// Policy-table grid serving one budget class.
    pub fn param_grid(&self, high_budget: bool) -> ParamGrid {
        ParamGrid {
            pi: self.grid.pi.clone(),
            mu: self.grid.mu.clone(),
            cost: self.grid.cost.clone(),
            beta: self.agent.beta,
            benefit: self.agent.benefit,
            space: self.space(high_budget),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.n_ues == 0 {
            return bad("n_ues must be positive".into());
        }
        if self.cells_x == 0 || self.cells_y == 0 {
            return bad("cell grid must be non-empty".into());
        }
        if !(self.cell_size > 0.0) || !(self.slot_duration > 0.0) {
            return bad("cell size and slot duration must be positive".into());
        }
        for (name, f) in [
            ("mobility.high_fraction", self.mobility.high_fraction),
            ("budget.high_fraction", self.budget.high_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} = {f} outside [0, 1]"));
            }
        }
        for (name, (lo, hi)) in [
            ("high-mobility speed", self.mobility.high_speed_kmh),
            ("low-mobility speed", self.mobility.low_speed_kmh),
        ] {
            if !(lo >= 0.0 && hi >= lo) {
                return bad(format!("{name} range ({lo}, {hi}) is invalid"));
            }
        }
        if !(self.budget.high_relays > 0.0
            && self.budget.low_relays > 0.0
            && self.budget.joules_per_relay > 0.0)
        {
            return bad("relay budgets must be positive".into());
        }
        let a = &self.agent;
        if !(0.0..1.0).contains(&a.beta) {
            return bad(format!("beta = {} outside [0, 1)", a.beta));
        }
        if a.window == 0 {
            return bad("learning window must be at least 1".into());
        }
        if a.max_tokens == 0 || a.max_tokens > i8::MAX as usize || a.energy_bins < 2 {
            return bad("need 1 <= max_tokens <= 127 and at least 2 energy bins".into());
        }
        if !(0.0..=1.0).contains(&a.initial_pi) || !(0.0..=1.0).contains(&a.initial_mu) {
            return bad("initial estimates must lie in [0, 1]".into());
        }
        if self.token_supply > self.n_ues * a.max_tokens {
            return bad(format!(
                "token supply {} exceeds n_ues * max_tokens = {}",
                self.token_supply,
                self.n_ues * a.max_tokens
            ));
        }
        for high in [true, false] {
            self.param_grid(high)
                .validate()
                .map_err(|e| SimError::Config(e.to_string()))?;
        }
        if !(self.grid.tolerance > 0.0) {
            return bad("grid tolerance must be positive".into());
        }
        self.channel.validate().map_err(SimError::Config)?;
        let r = &self.radio;
        if !(r.link_bandwidth_hz > 0.0) || r.grants_per_cell() == 0 {
            return bad("bandwidth must allow at least one downlink grant per cell".into());
        }
        Ok(())
    }
}

/// A grid axis is a list, either as an array or comma separated, or `start:end:step`.
fn axis<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Axis {
        One(f64),
        List(Vec<f64>),
        Range(String),
    }
    match Axis::deserialize(d)? {
        Axis::One(x) => Ok(vec![x]),
        Axis::List(v) => Ok(v),
        Axis::Range(r) => parse_axis(&r).map_err(serde::de::Error::custom),
    }
}

pub fn parse_axis(r: &str) -> Result<Vec<f64>, String> {
    if r.contains(',') {
        return r
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad axis value '{p}': {e}")))
            .collect();
    }
    let parts: Vec<&str> = r.split(':').map(str::trim).collect();
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    match nums.as_deref() {
        Ok([start, end, step]) if *step > 0.0 && end >= start => {
            Ok(linspace_step(*start, *end, *step))
        }
        _ => Err(format!("bad axis range '{r}', expected start:end:step")),
    }
}

macro_rules! default_from_sim {
    ($($ty:ident => $field:ident),*) => {$(
        impl Default for $ty {
            fn default() -> Self {
                SimConfig::default().$field
            }
        }
    )*};
}

default_from_sim!(
    MobilityMix => mobility,
    BudgetMix => budget,
    AgentConfig => agent,
    GridAxes => grid,
    RadioConfig => radio
);

const SECTIONS: [&str; 6] = ["mobility", "budget", "agent", "grid", "channel", "radio"];

/// A value is read as a TOML literal when it is one (numbers, arrays, quoted
/// strings) and as a bare string otherwise.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl SimConfig {
    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let err = |line: usize, m: String| SimError::Config(format!("line {line}: {m}"));
        let mut root = toml::Table::new();
        for (n, line) in text.lines().enumerate() {
            let n = n + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| err(n, format!("expected key = value, got '{line}'")))?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| err(n, format!("key '{}' needs a section prefix", key.trim())))?;
            let table = match section {
                "sim" if SECTIONS.contains(&field) => {
                    return Err(err(n, format!("unknown key 'sim.{field}'")));
                }
                "sim" => &mut root,
                s if SECTIONS.contains(&s) => root
                    .entry(s)
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .expect("sections are tables"),
                s => return Err(err(n, format!("unknown section '{s}'"))),
            };
            if table.insert(field.to_string(), parse_value(raw.trim())).is_some() {
                return Err(err(n, format!("duplicate key '{}'", key.trim())));
            }
        }
        let cfg: SimConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| SimError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Every field, one per line; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let root = match toml::Value::try_from(self).expect("config serializes") {
            toml::Value::Table(t) => t,
            _ => unreachable!(),
        };
        let mut out = String::new();
        for (k, v) in &root {
            if !v.is_table() {
                out.push_str(&format!("sim.{k} = {v}\n"));
            }
        }
        for (section, v) in &root {
            if let toml::Value::Table(t) = v {
                for (k, v) in t {
                    out.push_str(&format!("{section}.{k} = {v}\n"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
        assert_eq!(SimConfig::default().radio.grants_per_cell(), 5);
    }

    #[test]
    fn echo_round_trips() {
        let mut c = SimConfig::default().scaled(300, 5, 4);
        c.channel.noise_dbm = -2.9;
        c.agent.beta = 0.995;
        c.mode = CooperationMode::ObedientFinite;
        let back = SimConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_and_ranges() {
        let c = SimConfig::from_text(
            "# small world\n\
             sim.n_ues = 40\nsim.cells_x = 2\nsim.cells_y = 2\nsim.token_supply = 100\n\
             sim.mode = never-cooperate\n\
             grid.pi = 0.1:0.3:0.1   # range\ngrid.cost = 0.05, 0.1\nchannel.noise_dbm = -4\n",
        )
        .unwrap();
        assert_eq!(c.n_ues, 40);
        assert_eq!(c.grid.pi, vec![0.1, 0.2, 0.3]);
        assert_eq!(c.grid.cost, vec![0.05, 0.1]);
        assert_eq!(c.grid.mu, SimConfig::default().grid.mu);
        assert_eq!(c.channel.noise_dbm, -4.0);
        assert_eq!(c.channel.eta, 3.0);
        assert_eq!(c.mode, CooperationMode::NeverCooperate);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        for bad in [
            "sim.n_uez = 4",
            "n_ues = 4",
            "foo.bar = 1",
            "sim.agent = 3",
            "agent.beta = 1.0",
            "grid.pi = 0.3:0.1:0.1",
            "sim.token_supply = 100000",
            "sim.seed = 1\nsim.seed = 2",
            "sim.mode = selfish",
        ] {
            assert!(SimConfig::from_text(bad).is_err(), "{bad}");
        }
    }
}
