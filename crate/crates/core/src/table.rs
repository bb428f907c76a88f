//! Offline policy tables.
//!
//! A [`PolicyTable`] holds one threshold policy for every point of a
//! `(pi, mu, cost)` grid. Devices snap their online estimates to the nearest
//! grid point and read the stored threshold instead of solving the MDP.
//!
//! # File format
//!
//! Little-endian throughout:
//!
//! ```text
//! "PTBL"                magic
//! u16                   format version (1)
//! u32 x 3               |pi|, |mu|, |cost|
//! f64 x (|pi|+|mu|+|cost|)  grid values
//! f64, f64              beta, benefit
//! u32, u32, f64         max_tokens, energy_bins, p_max
//! f64, u16              solver tolerance, solver version
//! i8 x (|pi|*|mu|*|cost|*energy_bins)  thresholds, (i_pi, i_mu, i_cost, e) row-major
//! ```

use rayon::prelude::*;
use thiserror::Error;

use crate::mdp::{
    greedy_policy, to_threshold, value_iteration, Action, EnvParams, MdpError, StateSpace,
    ThresholdPolicy,
};

pub const MAGIC: &[u8; 4] = b"PTBL";
pub const FORMAT_VERSION: u16 = 1;
pub const SOLVER_VERSION: u16 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("entry (pi={pi}, mu={mu}, cost={cost}) is not a threshold policy: {source}")]
    NonThresholdPolicy {
        pi: f64,
        mu: f64,
        cost: f64,
        source: MdpError,
    },
    #[error("policy table format error: {0}")]
    Format(String),
}

/// Representative parameter values the offline phase solves for.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub pi: Vec<f64>,
    pub mu: Vec<f64>,
    pub cost: Vec<f64>,
    pub beta: f64,
    pub benefit: f64,
    pub space: StateSpace,
}

/// `start, start + step, ..., end` with values rounded to 12 decimals.
pub fn linspace_step(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .map(|i| ((start + step * i as f64) * 1e12).round() / 1e12)
        .collect()
}

impl ParamGrid {
    /// The default grids: pi, mu in {0.05, ..., 0.45}; cost in {0.025, ..., 0.225} J;
    /// benefit 0.5; 20 tokens; 11 energy bins.
    pub fn table4(beta: f64, p_max: f64) -> Self {
        Self {
            pi: linspace_step(0.05, 0.45, 0.05),
            mu: linspace_step(0.05, 0.45, 0.05),
            cost: linspace_step(0.025, 0.225, 0.025),
            beta,
            benefit: 0.5,
            space: StateSpace::new(20, 11, p_max).expect("valid default space"),
        }
    }

    pub fn validate(&self) -> Result<(), TableError> {
        fn axis(name: &str, v: &[f64], ok: impl Fn(f64) -> bool) -> Result<(), TableError> {
            if v.is_empty() {
                return Err(TableError::InvalidGrid(format!("{name} grid is empty")));
            }
            if let Some(x) = v.iter().find(|x| !ok(**x)) {
                return Err(TableError::InvalidGrid(format!("{name} value {x} out of range")));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TableError::InvalidGrid(format!(
                    "{name} grid is not strictly increasing"
                )));
            }
            Ok(())
        }
        axis("pi", &self.pi, |x| (0.0..=0.5).contains(&x))?;
        axis("mu", &self.mu, |x| (0.0..=1.0).contains(&x))?;
        axis("cost", &self.cost, |x| x > 0.0 && x.is_finite())?;
        if !(0.0..1.0).contains(&self.beta) {
            return Err(TableError::InvalidGrid(format!("beta = {} outside [0, 1)", self.beta)));
        }
        if !self.benefit.is_finite() {
            return Err(TableError::InvalidGrid("benefit must be finite".into()));
        }
        if self.space.max_tokens > i8::MAX as usize {
            return Err(TableError::InvalidGrid(format!(
                "max_tokens = {} does not fit the table encoding",
                self.space.max_tokens
            )));
        }
        StateSpace::new(self.space.max_tokens, self.space.energy_bins, self.space.p_max)
            .map_err(|e| TableError::InvalidGrid(e.to_string()))?;
        Ok(())
    }

    pub fn entry_count(&self) -> usize {
        self.pi.len() * self.mu.len() * self.cost.len()
    }

    fn flat_index(&self, i_pi: usize, i_mu: usize, i_cost: usize) -> usize {
        (i_pi * self.mu.len() + i_mu) * self.cost.len() + i_cost
    }

    fn unflatten(&self, i: usize) -> (usize, usize, usize) {
        let i_cost = i % self.cost.len();
        let rest = i / self.cost.len();
        (rest / self.mu.len(), rest % self.mu.len(), i_cost)
    }

    /// MDP parameters for one grid point. When `pi + mu > 1`, `mu` is scaled
    /// down to `1 - pi` and the second value is `true`.
    pub fn env_at(&self, i_pi: usize, i_mu: usize, i_cost: usize) -> (EnvParams, bool) {
        let pi = self.pi[i_pi];
        let mut mu = self.mu[i_mu];
        let scaled = pi + mu > 1.0;
        if scaled {
            mu = 1.0 - pi;
        }
        let env = EnvParams {
            pi,
            mu,
            cost: self.cost[i_cost],
            benefit: self.benefit,
            beta: self.beta,
        };
        (env, scaled)
    }

    /// Whether the table built from `self` would serve devices configured by `other`.
    pub fn compatible_with(&self, beta: f64, benefit: f64, space: &StateSpace) -> bool {
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        same(self.beta, beta)
            && same(self.benefit, benefit)
            && self.space.max_tokens == space.max_tokens
            && self.space.energy_bins == space.energy_bins
            && same(self.space.p_max, space.p_max)
    }
}

/// Solves one grid point down to its threshold form.
pub fn solve_threshold(
    env: &EnvParams,
    space: &StateSpace,
    tol: f64,
) -> Result<ThresholdPolicy, MdpError> {
    let v = value_iteration(env, space, tol);
    to_threshold(&greedy_policy(&v, env, space), space)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub grid: ParamGrid,
    /// Flattened `(i_pi, i_mu, i_cost)` row-major.
    pub entries: Vec<ThresholdPolicy>,
    pub tolerance: f64,
    pub solver_version: u16,
}

/// Builds the table, solving grid points in parallel.
pub fn build_table(grid: ParamGrid, tol: f64) -> Result<PolicyTable, TableError> {
    grid.validate()?;
    let entries = (0..grid.entry_count())
        .into_par_iter()
        .map(|i| {
            let (a, b, c) = grid.unflatten(i);
            let (env, _) = grid.env_at(a, b, c);
            solve_threshold(&env, &grid.space, tol).map_err(|source| {
                TableError::NonThresholdPolicy {
                    pi: grid.pi[a],
                    mu: grid.mu[b],
                    cost: grid.cost[c],
                    source,
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolicyTable {
        grid,
        entries,
        tolerance: tol,
        solver_version: SOLVER_VERSION,
    })
}

/// Index of the grid point nearest `value`. Exact midpoints go to the lower
/// point; values outside the grid clamp to its ends.
pub fn nearest(value: f64, grid: &[f64]) -> usize {
    assert!(!grid.is_empty(), "empty grid");
    let upper = grid.partition_point(|g| *g < value);
    if upper == 0 {
        return 0;
    }
    if upper == grid.len() {
        return grid.len() - 1;
    }
    let lower = upper - 1;
    let below = value - grid[lower];
    let above = grid[upper] - value;
    // treat representation noise around the midpoint as a tie
    let eps = 1e-9 * (grid[upper] - grid[lower]);
    if above < below - eps {
        upper
    } else {
        lower
    }
}

impl PolicyTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i_pi: usize, i_mu: usize, i_cost: usize) -> &ThresholdPolicy {
        &self.entries[self.grid.flat_index(i_pi, i_mu, i_cost)]
    }

    /// Entry for the grid point nearest the given estimates.
    pub fn snapped(&self, pi_hat: f64, mu_hat: f64, cost: f64) -> &ThresholdPolicy {
        self.entry(
            nearest(pi_hat, &self.grid.pi),
            nearest(mu_hat, &self.grid.mu),
            nearest(cost, &self.grid.cost),
        )
    }

    pub fn lookup(&self, pi_hat: f64, mu_hat: f64, cost: f64, k: usize, e: usize) -> Action {
        if e == 0 {
            return Action::Decline;
        }
        self.snapped(pi_hat, mu_hat, cost).action(k, e)
    }

    /// Grid points where `mu` had to be scaled to keep transitions valid.
    pub fn scaled_entries(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &p in &self.grid.pi {
            for &m in &self.grid.mu {
                if p + m > 1.0 {
                    out.push((p, m));
                }
            }
        }
        out
    }

    pub fn threshold_range(&self) -> (i32, i32) {
        self.entries
            .iter()
            .flat_map(|t| t.thresholds[1..].iter().copied())
            .fold((i32::MAX, i32::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(64 + 8 * (g.pi.len() + g.mu.len() + g.cost.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for axis in [&g.pi, &g.mu, &g.cost] {
            out.extend_from_slice(&(axis.len() as u32).to_le_bytes());
        }
        for axis in [&g.pi, &g.mu, &g.cost] {
            for x in axis.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.extend_from_slice(&g.beta.to_le_bytes());
        out.extend_from_slice(&g.benefit.to_le_bytes());
        out.extend_from_slice(&(g.space.max_tokens as u32).to_le_bytes());
        out.extend_from_slice(&(g.space.energy_bins as u32).to_le_bytes());
        out.extend_from_slice(&g.space.p_max.to_le_bytes());
        out.extend_from_slice(&self.tolerance.to_le_bytes());
        out.extend_from_slice(&self.solver_version.to_le_bytes());
        for entry in &self.entries {
            out.extend(entry.thresholds.iter().map(|t| (*t as i8) as u8));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TableError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(TableError::Format("bad magic".into()));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(TableError::Format(format!("unsupported version {version}")));
        }
        let lens = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
        let mut axes = Vec::with_capacity(3);
        for n in lens {
            // each value needs 8 bytes; reject absurd lengths before allocating
            if n > r.remaining() / 8 {
                return Err(TableError::Format("truncated grid".into()));
            }
            axes.push((0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?);
        }
        let cost = axes.pop().unwrap();
        let mu = axes.pop().unwrap();
        let pi = axes.pop().unwrap();
        let beta = r.f64()?;
        let benefit = r.f64()?;
        let max_tokens = r.u32()? as usize;
        let energy_bins = r.u32()? as usize;
        let p_max = r.f64()?;
        let tolerance = r.f64()?;
        let solver_version = r.u16()?;
        let space = StateSpace::new(max_tokens, energy_bins, p_max)
            .map_err(|e| TableError::Format(e.to_string()))?;
        let grid = ParamGrid {
            pi,
            mu,
            cost,
            beta,
            benefit,
            space,
        };
        grid.validate()
            .map_err(|e| TableError::Format(e.to_string()))?;
        let need = grid.entry_count() * energy_bins;
        if r.remaining() != need {
            return Err(TableError::Format(format!(
                "expected {need} threshold bytes, found {}",
                r.remaining()
            )));
        }
        let raw = r.take(need)?;
        let entries = raw
            .chunks(energy_bins)
            .map(|c| ThresholdPolicy {
                thresholds: c.iter().map(|b| *b as i8 as i32).collect(),
            })
            .collect::<Vec<_>>();
        for t in &entries {
            if t.thresholds.iter().any(|x| *x < -1 || *x > max_tokens as i32) {
                return Err(TableError::Format("threshold out of range".into()));
            }
        }
        Ok(Self {
            grid,
            entries,
            tolerance,
            solver_version,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TableError> {
        let bytes = std::fs::read(path)
            .map_err(|e| TableError::Format(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], TableError> {
        if self.remaining() < n {
            return Err(TableError::Format("truncated payload".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, TableError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, TableError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, TableError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
