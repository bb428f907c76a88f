//! Link budgets, SINR and rates, amplify-and-forward combining, and the
//! minimum-power relay choice.

use serde::{Deserialize, Serialize};

/// dBm to Watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Log-distance path loss with log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub eta: f64,
    /// Reference distance, metres.
    pub d0: f64,
    /// Path loss at the reference distance, dB.
    pub pl_d0_db: f64,
    /// Shadowing standard deviation, dB.
    pub shadow_sigma_db: f64,
    /// Noise power over one allocated link, dBm.
    pub noise_dbm: f64,
    /// Inter-cell interference, Watts.
    pub interference_w: f64,
}

/// Noise level that puts the network-average outage probability near 0.1
/// with the default geometry (1 km cells, 15 dBm, 0 dB target).
pub const CALIBRATED_NOISE_DBM: f64 = -3.0;

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            eta: 3.0,
            d0: 100.0,
            pl_d0_db: -5.0,
            shadow_sigma_db: 2.0,
            noise_dbm: CALIBRATED_NOISE_DBM,
            interference_w: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eta > 0.0) {
            return Err(format!("eta = {} must be positive", self.eta));
        }
        if !(self.d0 > 0.0) {
            return Err(format!("d0 = {} must be positive", self.d0));
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(format!("shadow sigma = {} must be >= 0", self.shadow_sigma_db));
        }
        if !(self.interference_w >= 0.0) {
            return Err("interference must be >= 0".into());
        }
        if !self.noise_dbm.is_finite() || !self.pl_d0_db.is_finite() {
            return Err("noise and reference path loss must be finite".into());
        }
        Ok(())
    }

    /// Noise plus interference seen by a receiver, Watts.
    pub fn noise_plus_interference(&self) -> f64 {
        dbm_to_watts(self.noise_dbm) + self.interference_w
    }

    /// Channel gain in dB at `distance` metres with shadowing `shadow_db`.
    /// Distances under `d0` are treated as `d0`.
    pub fn gain_db(&self, distance: f64, shadow_db: f64) -> f64 {
        let d = distance.max(self.d0);
        -self.pl_d0_db - 10.0 * self.eta * (d / self.d0).log10() - shadow_db
    }
}

/// Linear channel gain.
pub fn link_gain(distance: f64, shadow_db: f64, ch: &ChannelParams) -> f64 {
    db_to_linear(ch.gain_db(distance, shadow_db))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Linear power gain.
    pub gain: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Watts.
    pub tx_power: f64,
}

pub fn sinr(gain: f64, tx_power: f64, ch: &ChannelParams) -> f64 {
    gain * tx_power / ch.noise_plus_interference()
}

/// Shannon rate in bits/s.
pub fn shannon_rate(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * (1.0 + sinr).log2()
}

/// Received SINR (linear) and achievable rate (bits/s) of a link.
pub fn sinr_and_rate(lb: &LinkBudget, ch: &ChannelParams) -> (f64, f64) {
    let g = sinr(lb.gain, lb.tx_power, ch);
    (g, shannon_rate(lb.bandwidth, g))
}

/// End-to-end SINR of a two-hop amplify-and-forward link.
pub fn af_sinr(first_hop: f64, second_hop: f64) -> f64 {
    let denom = first_hop + second_hop + 1.0;
    first_hop * second_hop / denom
}

/// Least relay transmit power meeting `gamma_target` end to end, or `None`
/// when the first hop is too weak or the power would exceed `p_max`.
pub fn min_relay_power(
    bs_relay_sinr: f64,
    relay_dest_gain: f64,
    ch: &ChannelParams,
    gamma_target: f64,
    p_max: f64,
) -> Option<f64> {
    assert!(gamma_target > 0.0);
    // the AF SINR is strictly below the first-hop SINR
    if bs_relay_sinr <= gamma_target || relay_dest_gain <= 0.0 {
        return None;
    }
    let required = required_second_hop_sinr(bs_relay_sinr, gamma_target);
    let power = required * ch.noise_plus_interference() / relay_dest_gain;
    (power <= p_max).then_some(power)
}

/// Second-hop SINR that makes `af_sinr(first_hop, x) == target`.
pub fn required_second_hop_sinr(first_hop: f64, target: f64) -> f64 {
    target * (first_hop + 1.0) / (first_hop - target)
}

/// A candidate relay as seen by a destination in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayCandidate {
    pub id: usize,
    /// SINR of the BS-to-candidate link at the BS's transmit power.
    pub bs_sinr: f64,
    /// Linear gain of the candidate-to-destination link.
    pub dest_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayOffer {
    pub relay_id: usize,
    /// Watts.
    pub required_power: f64,
    pub effective_sinr: f64,
    /// Energy of one relayed slot, Joules.
    pub cost: f64,
}

/// Static link settings for relay selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaySettings {
    pub gamma_target: f64,
    /// Maximum device transmit power, Watts.
    pub p_max: f64,
    /// Slot duration, seconds.
    pub slot_duration: f64,
}

/// The feasible candidate needing the least power; ties go to the lower id.
pub fn select_relay(
    candidates: &[RelayCandidate],
    ch: &ChannelParams,
    settings: &RelaySettings,
) -> Option<RelayOffer> {
    candidates
        .iter()
        .filter_map(|c| {
            min_relay_power(c.bs_sinr, c.dest_gain, ch, settings.gamma_target, settings.p_max)
                .map(|p| (c, p))
        })
        .min_by(|(a, pa), (b, pb)| pa.total_cmp(pb).then(a.id.cmp(&b.id)))
        .map(|(c, power)| RelayOffer {
            relay_id: c.id,
            required_power: power,
            effective_sinr: af_sinr(c.bs_sinr, sinr(c.dest_gain, power, ch)),
            cost: settings.slot_duration * power,
        })
}
