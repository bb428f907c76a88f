use super::{EnvParams, MdpError, StateSpace, ThresholdPolicy};

/// Long-run token spending and earning rates of a threshold policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRates {
    /// Probability per slot of using a relay (spending a token).
    pub use_rate: f64,
    /// Probability per slot of acting as a relay (earning a token).
    pub provide_rate: f64,
    /// Stationary token-holding distribution over `0..=max_tokens`.
    pub distribution: Vec<f64>,
}

impl BalanceRates {
    pub fn imbalance(&self) -> f64 {
        self.provide_rate - self.use_rate
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        self.imbalance().abs() <= tol
    }
}

/// Stationary spend/earn rates of the token chain induced by `p` with energy
/// treated as unlimited (the top-bin threshold applies at every slot).
///
/// The chain is birth-death on `0..=max_tokens`: down with probability `pi`
/// when `k > 0`, up with probability `mu` when `k <= K_th`. A relay at the
/// token cap still earns (and loses) its token, so it counts toward
/// `provide_rate` without moving the chain.
pub fn steady_state_balance(
    p: &ThresholdPolicy,
    env: &EnvParams,
    space: &StateSpace,
) -> Result<BalanceRates, MdpError> {
    let cap = space.max_tokens;
    let th = p.top();
    let relays = |k: usize| (k as i64) <= th as i64;
    let can_rise = |k: usize| k < cap && env.mu > 0.0 && relays(k);

    let mut dist = vec![0.0; cap + 1];
    if env.pi > 0.0 {
        // single closed class [0, top]; detailed balance across each cut
        let top = (0..=cap).find(|&k| !can_rise(k)).unwrap_or(cap);
        dist[0] = 1.0;
        for k in 0..top {
            dist[k + 1] = dist[k] * env.mu / env.pi;
        }
    } else {
        let mut absorbing = (0..=cap).filter(|&k| !can_rise(k));
        let only = absorbing.next().ok_or(MdpError::NoStationaryDistribution)?;
        if absorbing.next().is_some() {
            return Err(MdpError::NoStationaryDistribution);
        }
        dist[only] = 1.0;
    }
    let total: f64 = dist.iter().sum();
    dist.iter_mut().for_each(|x| *x /= total);

    let use_rate = env.pi * dist[1..].iter().sum::<f64>();
    let provide_rate = env.mu
        * dist
            .iter()
            .enumerate()
            .filter(|(k, _)| relays(*k))
            .map(|(_, x)| x)
            .sum::<f64>();
    Ok(BalanceRates {
        use_rate,
        provide_rate,
        distribution: dist,
    })
}
