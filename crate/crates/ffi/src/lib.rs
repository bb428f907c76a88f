//! C ABI for relay-core.
//!
//! Every function returns a [`RelayStatus`]; on failure a description is kept
//! per thread and can be read with [`relay_last_error`]. Policy tables are
//! opaque handles released with [`relay_table_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use relay_core::agent::quantize_energy;
use relay_core::mdp::{Action, EnvParams, StateSpace};
use relay_core::radio::{self, ChannelParams};
use relay_core::sim::{SimConfig, SimError};
use relay_core::table::{self, ParamGrid, PolicyTable, TableError};

/// Status codes; 2 to 5 match the `relaysim` exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonThresholdPolicy = 3,
    /// Bad table bytes, or a table that does not fit the config.
    TableMismatch = 4,
    InvariantViolation = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque policy table.
pub struct RelayPolicyTable {
    inner: PolicyTable,
}

/// MDP parameters for one device.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RelayEnv {
    pub pi: f64,
    pub mu: f64,
    pub cost: f64,
    pub benefit: f64,
    pub beta: f64,
}

/// Channel model; see [`relay_channel_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RelayChannel {
    pub eta: f64,
    pub d0: f64,
    pub pl_d0_db: f64,
    pub shadow_sigma_db: f64,
    pub noise_dbm: f64,
    pub interference_w: f64,
}

/// Network-wide results of one simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RelaySummary {
    pub mean_gain: f64,
    pub mean_lambda: f64,
    pub mean_rre: f64,
    pub negative_utility_fraction: f64,
    pub transfers: u64,
    pub slots: u64,
}

impl From<RelayChannel> for ChannelParams {
    fn from(c: RelayChannel) -> Self {
        ChannelParams {
            eta: c.eta,
            d0: c.d0,
            pl_d0_db: c.pl_d0_db,
            shadow_sigma_db: c.shadow_sigma_db,
            noise_dbm: c.noise_dbm,
            interference_w: c.interference_w,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: RelayStatus, msg: impl Into<String>) -> RelayStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn table_status(e: &TableError) -> RelayStatus {
    match e {
        TableError::InvalidGrid(_) => RelayStatus::InvalidArgument,
        TableError::NonThresholdPolicy { .. } => RelayStatus::NonThresholdPolicy,
        TableError::Format(_) => RelayStatus::TableMismatch,
    }
}

fn sim_status(e: &SimError) -> RelayStatus {
    match e {
        SimError::Config(_) => RelayStatus::InvalidArgument,
        SimError::Table(t) => table_status(t),
        SimError::TableMismatch(_) => RelayStatus::TableMismatch,
        SimError::InvariantViolation { .. } => RelayStatus::InvariantViolation,
    }
}

/// Runs `f`, turning panics into [`RelayStatus::Panic`].
fn guard(f: impl FnOnce() -> RelayStatus) -> RelayStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(RelayStatus::Panic, msg)
        }
    }
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, RelayStatus> {
    if s.is_null() {
        return Err(fail(RelayStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(RelayStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn f64_slice<'a>(p: *const f64, n: usize) -> Result<&'a [f64], RelayStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(RelayStatus::NullPointer, "null array"));
    }
    Ok(slice::from_raw_parts(p, n))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn relay_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Solves one MDP and writes its thresholds, one per energy bin (-1 = never
/// relay), into `thresholds`, which must hold `energy_bins` values.
///
/// # Safety
/// `env` must be valid; `thresholds` valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn relay_solve_threshold(
    env: *const RelayEnv,
    max_tokens: usize,
    energy_bins: usize,
    p_max: f64,
    tolerance: f64,
    thresholds: *mut i32,
    capacity: usize,
) -> RelayStatus {
    guard(|| {
        if env.is_null() || thresholds.is_null() {
            return fail(RelayStatus::NullPointer, "null argument");
        }
        let e = &*env;
        let env = EnvParams {
            pi: e.pi,
            mu: e.mu,
            cost: e.cost,
            benefit: e.benefit,
            beta: e.beta,
        };
        let space = match env
            .validate()
            .and_then(|_| StateSpace::new(max_tokens, energy_bins, p_max))
        {
            Ok(s) => s,
            Err(err) => return fail(RelayStatus::InvalidArgument, err.to_string()),
        };
        if !(tolerance > 0.0) {
            return fail(RelayStatus::InvalidArgument, "tolerance must be positive");
        }
        if capacity < energy_bins {
            return fail(RelayStatus::BufferTooSmall, format!("need {energy_bins} slots"));
        }
        match table::solve_threshold(&env, &space, tolerance) {
            Ok(t) => {
                let out = slice::from_raw_parts_mut(thresholds, energy_bins);
                out.copy_from_slice(&t.thresholds);
                RelayStatus::Ok
            }
            Err(err) => fail(RelayStatus::NonThresholdPolicy, err.to_string()),
        }
    })
}

/// Builds a table over explicit grids.
///
/// # Safety
/// Each grid pointer must be valid for its length; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn relay_table_build(
    pi: *const f64,
    n_pi: usize,
    mu: *const f64,
    n_mu: usize,
    cost: *const f64,
    n_cost: usize,
    beta: f64,
    benefit: f64,
    max_tokens: usize,
    energy_bins: usize,
    p_max: f64,
    tolerance: f64,
    out: *mut *mut RelayPolicyTable,
) -> RelayStatus {
    guard(|| {
        if out.is_null() {
            return fail(RelayStatus::NullPointer, "null out pointer");
        }
        let grid = ParamGrid {
            pi: try_status!(f64_slice(pi, n_pi)).to_vec(),
            mu: try_status!(f64_slice(mu, n_mu)).to_vec(),
            cost: try_status!(f64_slice(cost, n_cost)).to_vec(),
            beta,
            benefit,
            space: StateSpace {
                max_tokens,
                energy_bins,
                p_max,
            },
        };
        if !(tolerance > 0.0) {
            return fail(RelayStatus::InvalidArgument, "tolerance must be positive");
        }
        match table::build_table(grid, tolerance) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(RelayPolicyTable { inner: t }));
                RelayStatus::Ok
            }
            Err(e) => fail(table_status(&e), e.to_string()),
        }
    })
}

/// Builds the default 9x9x9 table for the given discount factor and budget.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn relay_table_build_default(
    beta: f64,
    p_max: f64,
    out: *mut *mut RelayPolicyTable,
) -> RelayStatus {
    let g = ParamGrid::table4(beta, p_max);
    relay_table_build(
        g.pi.as_ptr(),
        g.pi.len(),
        g.mu.as_ptr(),
        g.mu.len(),
        g.cost.as_ptr(),
        g.cost.len(),
        g.beta,
        g.benefit,
        g.space.max_tokens,
        g.space.energy_bins,
        g.space.p_max,
        relay_core::mdp::DEFAULT_TOLERANCE,
        out,
    )
}

/// # Safety
/// `bytes` must be valid for `len` bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn relay_table_from_bytes(
    bytes: *const u8,
    len: usize,
    out: *mut *mut RelayPolicyTable,
) -> RelayStatus {
    guard(|| {
        if bytes.is_null() || out.is_null() {
            return fail(RelayStatus::NullPointer, "null argument");
        }
        match PolicyTable::from_bytes(slice::from_raw_parts(bytes, len)) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(RelayPolicyTable { inner: t }));
                RelayStatus::Ok
            }
            Err(e) => fail(table_status(&e), e.to_string()),
        }
    })
}

/// Serializes `table`. Always stores the required size in `needed`; writes
/// into `buf` only when `capacity` suffices.
///
/// # Safety
/// `table` and `needed` must be valid; `buf` null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn relay_table_to_bytes(
    table: *const RelayPolicyTable,
    buf: *mut u8,
    capacity: usize,
    needed: *mut usize,
) -> RelayStatus {
    guard(|| {
        if table.is_null() || needed.is_null() {
            return fail(RelayStatus::NullPointer, "null argument");
        }
        let bytes = (*table).inner.to_bytes();
        *needed = bytes.len();
        if buf.is_null() || capacity < bytes.len() {
            return fail(RelayStatus::BufferTooSmall, format!("need {} bytes", bytes.len()));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        RelayStatus::Ok
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn relay_table_load(
    path: *const c_char,
    out: *mut *mut RelayPolicyTable,
) -> RelayStatus {
    guard(|| {
        let path = try_status!(c_str(path));
        if out.is_null() {
            return fail(RelayStatus::NullPointer, "null out pointer");
        }
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => return fail(RelayStatus::Io, format!("{path}: {e}")),
        };
        match PolicyTable::from_bytes(&bytes) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(RelayPolicyTable { inner: t }));
                RelayStatus::Ok
            }
            Err(e) => fail(table_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `table` must be valid; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn relay_table_save(
    table: *const RelayPolicyTable,
    path: *const c_char,
) -> RelayStatus {
    guard(|| {
        if table.is_null() {
            return fail(RelayStatus::NullPointer, "null table");
        }
        let path = try_status!(c_str(path));
        match (*table).inner.save(Path::new(path)) {
            Ok(()) => RelayStatus::Ok,
            Err(e) => fail(RelayStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn relay_table_len(table: *const RelayPolicyTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.len())
}

/// Action (0 decline, 1 relay) for estimates `pi_hat`, `mu_hat`, an offered
/// relay energy `cost` and state `(k, e)`.
///
/// # Safety
/// `table` and `action` must be valid.
#[no_mangle]
pub unsafe extern "C" fn relay_table_lookup(
    table: *const RelayPolicyTable,
    pi_hat: f64,
    mu_hat: f64,
    cost: f64,
    k: usize,
    e: usize,
    action: *mut u8,
) -> RelayStatus {
    guard(|| {
        if table.is_null() || action.is_null() {
            return fail(RelayStatus::NullPointer, "null argument");
        }
        let t = &(*table).inner;
        let space = &t.grid.space;
        if k > space.max_tokens || e >= space.energy_bins {
            return fail(
                RelayStatus::InvalidArgument,
                format!("state ({k}, {e}) outside the table's state space"),
            );
        }
        if ![pi_hat, mu_hat, cost].iter().all(|x| x.is_finite()) {
            return fail(RelayStatus::InvalidArgument, "estimates must be finite");
        }
        *action = match t.lookup(pi_hat, mu_hat, cost, k, e) {
            Action::Decline => 0,
            Action::Relay => 1,
        };
        RelayStatus::Ok
    })
}

/// # Safety
/// `table` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn relay_table_free(table: *mut RelayPolicyTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Relay-energy bin of a remaining budget `p` out of `p_max`.
#[no_mangle]
pub extern "C" fn relay_quantize_energy(p: f64, p_max: f64, bins: usize) -> usize {
    if bins < 2 || !(p_max > 0.0) {
        return 0;
    }
    quantize_energy(p, p_max, bins)
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn relay_channel_default(out: *mut RelayChannel) -> RelayStatus {
    if out.is_null() {
        return fail(RelayStatus::NullPointer, "null out pointer");
    }
    let c = ChannelParams::default();
    *out = RelayChannel {
        eta: c.eta,
        d0: c.d0,
        pl_d0_db: c.pl_d0_db,
        shadow_sigma_db: c.shadow_sigma_db,
        noise_dbm: c.noise_dbm,
        interference_w: c.interference_w,
    };
    RelayStatus::Ok
}

/// Linear gain of a link, or NaN for a null channel.
///
/// # Safety
/// `ch` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn relay_link_gain(distance: f64, shadow_db: f64, ch: *const RelayChannel) -> f64 {
    ch.as_ref()
        .map_or(f64::NAN, |c| radio::link_gain(distance, shadow_db, &(*c).into()))
}

#[no_mangle]
pub extern "C" fn relay_af_sinr(first_hop: f64, second_hop: f64) -> f64 {
    radio::af_sinr(first_hop, second_hop)
}

/// Least relay power meeting `gamma_target`; `feasible` is set to 0 (and
/// `power` left alone) when no power up to `p_max` works.
///
/// # Safety
/// `ch`, `power` and `feasible` must be valid.
#[no_mangle]
pub unsafe extern "C" fn relay_min_relay_power(
    bs_relay_sinr: f64,
    relay_dest_gain: f64,
    ch: *const RelayChannel,
    gamma_target: f64,
    p_max: f64,
    power: *mut f64,
    feasible: *mut u8,
) -> RelayStatus {
    guard(|| {
        if ch.is_null() || power.is_null() || feasible.is_null() {
            return fail(RelayStatus::NullPointer, "null argument");
        }
        if !(gamma_target > 0.0) {
            return fail(RelayStatus::InvalidArgument, "gamma_target must be positive");
        }
        let ch: ChannelParams = (*ch).into();
        match radio::min_relay_power(bs_relay_sinr, relay_dest_gain, &ch, gamma_target, p_max) {
            Some(p) => {
                *power = p;
                *feasible = 1;
            }
            None => *feasible = 0,
        }
        RelayStatus::Ok
    })
}

/// Runs a simulation described by config text (`section.key = value` lines),
/// building the policy tables it needs.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn relay_simulate(config: *const c_char, out: *mut RelaySummary) -> RelayStatus {
    guard(|| {
        let text = try_status!(c_str(config));
        if out.is_null() {
            return fail(RelayStatus::NullPointer, "null out pointer");
        }
        let result = SimConfig::from_text(text)
            .and_then(|cfg| relay_core::experiment::simulate(&cfg, None));
        match result {
            Ok(r) => {
                let all = r.overall();
                *out = RelaySummary {
                    mean_gain: all.gain.mean,
                    mean_lambda: all.lambda.mean,
                    mean_rre: all.rre.mean,
                    negative_utility_fraction: all.negative_utility_fraction,
                    transfers: r.transfers,
                    slots: r.slots as u64,
                };
                RelayStatus::Ok
            }
            Err(e) => fail(sim_status(&e), e.to_string()),
        }
    })
}
