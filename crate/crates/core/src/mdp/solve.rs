use super::{
    action_set, expected_utility, transition_probs, Action, CoopState, EnvParams, MdpError,
    Policy, StateSpace, ThresholdPolicy, ValueFunction,
};

/// Default value-iteration tolerance, in utility units.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Successive Bellman optimality sweeps starting from `V = 0`.
///
/// Each call to [`Iterator::next`] performs one synchronous sweep and yields
/// the sup-norm change it produced.
pub struct BellmanSweeps {
    env: EnvParams,
    space: StateSpace,
    current: Vec<f64>,
    scratch: Vec<f64>,
    drop: f64,
}

impl BellmanSweeps {
    pub fn new(env: EnvParams, space: StateSpace) -> Self {
        Self {
            drop: space.bin_drop_probability(env.cost),
            current: vec![0.0; space.len()],
            scratch: vec![0.0; space.len()],
            env,
            space,
        }
    }

    pub fn values(&self) -> ValueFunction {
        ValueFunction {
            space: self.space,
            values: self.current.clone(),
        }
    }

    pub fn into_values(self) -> ValueFunction {
        ValueFunction {
            space: self.space,
            values: self.current,
        }
    }

    #[inline]
    fn backup(&self, k: usize, e: usize) -> f64 {
        let n = self.space.token_states();
        let v = &self.current;
        let at = |k: usize, e: usize| v[e * n + k];
        let beta = self.env.beta;
        if e == 0 {
            return beta * at(k, 0);
        }
        let p_recv = if k > 0 { self.env.pi } else { 0.0 };
        let recv = if k > 0 { p_recv * at(k - 1, e) } else { 0.0 };
        let stay = at(k, e);
        let q_decline = p_recv * self.env.benefit + beta * (recv + (1.0 - p_recv) * stay);

        let mu = self.env.mu;
        let k_up = (k + 1).min(self.space.max_tokens);
        let up = (1.0 - self.drop) * at(k_up, e) + self.drop * at(k_up, e - 1);
        let q_relay = p_recv * self.env.benefit - mu * self.env.cost
            + beta * (recv + mu * up + (1.0 - p_recv - mu) * stay);
        q_decline.max(q_relay)
    }
}

impl Iterator for BellmanSweeps {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let n = self.space.token_states();
        let mut delta = 0.0_f64;
        for e in 0..self.space.energy_bins {
            for k in 0..n {
                let v = self.backup(k, e);
                delta = delta.max((v - self.current[e * n + k]).abs());
                self.scratch[e * n + k] = v;
            }
        }
        std::mem::swap(&mut self.current, &mut self.scratch);
        Some(delta)
    }
}

/// Value iteration from `V = 0` until the sweep change drops below
/// `tol * (1 - beta) / (2 * beta)`, which makes the greedy policy `tol`-optimal.
pub fn value_iteration(env: &EnvParams, space: &StateSpace, tol: f64) -> ValueFunction {
    assert!(tol > 0.0, "tolerance must be positive");
    let stop = if env.beta > 0.0 {
        tol * (1.0 - env.beta) / (2.0 * env.beta)
    } else {
        f64::INFINITY
    };
    let mut sweeps = BellmanSweeps::new(*env, *space);
    loop {
        let delta = sweeps.next().expect("sweeps never end");
        if delta < stop {
            break;
        }
    }
    sweeps.into_values()
}

/// `Q(s, a)` for every available action.
pub fn q_values(
    s: CoopState,
    v: &ValueFunction,
    env: &EnvParams,
    space: &StateSpace,
) -> Vec<(Action, f64)> {
    action_set(s.e)
        .iter()
        .map(|&a| {
            let next = transition_probs(s, a, env, space).expect("action drawn from action set");
            let continuation: f64 = next.iter().map(|(t, p)| p * v.get(*t)).sum();
            (a, expected_utility(s, a, env) + env.beta * continuation)
        })
        .collect()
}

/// Greedy policy with respect to `v`. Ties resolve to [`Action::Decline`].
pub fn greedy_policy(v: &ValueFunction, env: &EnvParams, space: &StateSpace) -> Policy {
    let mut policy = Policy::idle(*space);
    for s in space.states() {
        let q = q_values(s, v, env, space);
        let mut best = q[0];
        for &(a, value) in &q[1..] {
            if value > best.1 {
                best = (a, value);
            }
        }
        policy.set(s, best.0);
    }
    policy
}

/// Compresses a policy to one token threshold per energy bin.
///
/// Fails if some bin relays at a token level above one where it declines.
pub fn to_threshold(p: &Policy, space: &StateSpace) -> Result<ThresholdPolicy, MdpError> {
    let mut thresholds = Vec::with_capacity(space.energy_bins);
    for e in 0..space.energy_bins {
        let mut th = ThresholdPolicy::NEVER;
        let mut seen_decline = false;
        for k in 0..=space.max_tokens {
            match p.get(CoopState::new(k, e)) {
                Action::Relay if seen_decline => {
                    return Err(MdpError::NonThresholdPolicy { bin: e, k });
                }
                Action::Relay => th = k as i32,
                Action::Decline => seen_decline = true,
            }
        }
        thresholds.push(th);
    }
    Ok(ThresholdPolicy { thresholds })
}
