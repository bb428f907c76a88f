//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the solver under test: the cooperation model is
//! re-derived from its definition and evaluated with dense Gaussian
//! elimination.
#![allow(dead_code)]

use rand::Rng;

/// One device environment, mirrored from the model definition.
#[derive(Debug, Clone, Copy)]
pub struct Model {
    pub pi: f64,
    pub mu: f64,
    pub cost: f64,
    pub benefit: f64,
    pub beta: f64,
    /// Token cap.
    pub k_cap: usize,
    /// Energy bins including the dead bin 0.
    pub bins: usize,
    pub p_max: f64,
}

impl Model {
    pub fn random<R: Rng>(rng: &mut R, k_cap: usize, bins: usize) -> Self {
        let pi = rng.gen_range(0.0..=0.5);
        let mu = rng.gen_range(0.0..=(1.0 - pi));
        Self {
            pi,
            mu,
            cost: rng.gen_range(0.0..0.6),
            benefit: rng.gen_range(0.05..1.0),
            beta: rng.gen_range(0.0..0.99),
            k_cap,
            bins,
            p_max: rng.gen_range(0.2..2.0),
        }
    }

    pub fn n(&self) -> usize {
        (self.k_cap + 1) * self.bins
    }

    /// State index with tokens fastest.
    pub fn idx(&self, k: usize, e: usize) -> usize {
        e * (self.k_cap + 1) + k
    }

    pub fn unidx(&self, i: usize) -> (usize, usize) {
        (i % (self.k_cap + 1), i / (self.k_cap + 1))
    }

    /// Successor row of `(k, e)` under `relay`, as a dense vector.
    pub fn row(&self, k: usize, e: usize, relay: bool) -> Vec<f64> {
        let mut row = vec![0.0; self.n()];
        if e == 0 {
            row[self.idx(k, e)] = 1.0;
            return row;
        }
        let helped = if k > 0 { self.pi } else { 0.0 };
        let asked = if relay { self.mu } else { 0.0 };
        let width = self.p_max / (self.bins - 1) as f64;
        let q = (self.cost / width).min(1.0);
        let up = (k + 1).min(self.k_cap);
        if k > 0 {
            row[self.idx(k - 1, e)] += helped;
        }
        row[self.idx(up, e - 1)] += asked * q;
        row[self.idx(up, e)] += asked * (1.0 - q);
        row[self.idx(k, e)] += 1.0 - helped - asked;
        row
    }

    pub fn reward(&self, k: usize, e: usize, relay: bool) -> f64 {
        if e == 0 {
            return 0.0;
        }
        let gain = if k > 0 { self.pi * self.benefit } else { 0.0 };
        let pay = if relay { self.mu * self.cost } else { 0.0 };
        gain - pay
    }

    /// Exact value of the stationary policy `relay[s]` by solving
    /// `(I - beta P) V = r`.
    pub fn evaluate(&self, relay: &[bool]) -> Vec<f64> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for i in 0..n {
            let (k, e) = self.unidx(i);
            let row = self.row(k, e, relay[i]);
            for j in 0..n {
                a[i][j] = -self.beta * row[j];
            }
            a[i][i] += 1.0;
            b[i] = self.reward(k, e, relay[i]);
        }
        gauss_solve(a, b)
    }

    /// `Q(s, a)` under `v`.
    pub fn q(&self, v: &[f64], k: usize, e: usize, relay: bool) -> f64 {
        let row = self.row(k, e, relay);
        self.reward(k, e, relay) + self.beta * row.iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
    }

    /// Optimal values by enumerating every deterministic policy over the
    /// live states. Returns the pointwise maximum and a policy attaining it.
    pub fn enumerate(&self) -> (Vec<f64>, Vec<bool>) {
        let n = self.n();
        let live: Vec<usize> = (0..n).filter(|&i| self.unidx(i).1 > 0).collect();
        assert!(live.len() <= 20, "enumeration too large");
        let mut best = vec![f64::NEG_INFINITY; n];
        let mut best_sum = f64::NEG_INFINITY;
        let mut arg = vec![false; n];
        for mask in 0u32..(1 << live.len()) {
            let mut relay = vec![false; n];
            for (bit, &i) in live.iter().enumerate() {
                relay[i] = mask >> bit & 1 == 1;
            }
            let v = self.evaluate(&relay);
            for i in 0..n {
                best[i] = best[i].max(v[i]);
            }
            let sum: f64 = v.iter().sum();
            if sum > best_sum {
                best_sum = sum;
                arg = relay;
            }
        }
        (best, arg)
    }
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 1e-14, "singular system");
        for r in col + 1..n {
            let f = a[r][col] / d;
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(r);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Per-slot use and provide frequencies of the token chain under a top-bin
/// threshold, energy unlimited, simulated for `steps` slots.
pub fn chain_rates<R: Rng>(
    rng: &mut R,
    pi: f64,
    mu: f64,
    threshold: i32,
    k_cap: usize,
    steps: u64,
) -> (f64, f64) {
    let mut k = 0usize;
    let (mut used, mut provided) = (0u64, 0u64);
    for _ in 0..steps {
        let u: f64 = rng.gen();
        let helped = if k > 0 { pi } else { 0.0 };
        let asked = if (k as i64) <= threshold as i64 { mu } else { 0.0 };
        if u < helped {
            used += 1;
            k -= 1;
        } else if u < helped + asked {
            provided += 1;
            k = (k + 1).min(k_cap);
        }
    }
    (used as f64 / steps as f64, provided as f64 / steps as f64)
}

/// Least power in `[0, p_max]` whose amplify-and-forward SINR reaches
/// `target`, located by successive grid refinement on a log scale.
pub fn grid_min_power(
    first_hop: f64,
    gain: f64,
    noise: f64,
    target: f64,
    p_max: f64,
) -> Option<f64> {
    let end_to_end = |p: f64| {
        let second = gain * p / noise;
        first_hop * second / (first_hop + second + 1.0)
    };
    if end_to_end(p_max) < target {
        return None;
    }
    let (mut lo, mut hi) = (p_max * 1e-30, p_max);
    if end_to_end(lo) >= target {
        return Some(lo);
    }
    // invariant: lo infeasible, hi feasible
    while hi / lo - 1.0 > 1e-12 {
        let pts = 64;
        let ratio = (hi / lo).powf(1.0 / pts as f64);
        let mut prev = lo;
        for i in 1..=pts {
            let p = if i == pts { hi } else { lo * ratio.powi(i) };
            if end_to_end(p) >= target {
                lo = prev;
                hi = p;
                break;
            }
            prev = p;
        }
    }
    Some(hi)
}

/// Gap below which the two actions count as tied in the reference model.
pub const TIE: f64 = 1e-7;

/// Runs value iteration and greedy extraction on `envs` random small models
/// and compares them with exhaustive enumeration. Returns one message per
/// mismatch.
pub fn oracle_equivalence(envs: usize, seed: u64) -> Vec<String> {
    use rand::SeedableRng;
    use relay_core::mdp::{greedy_policy, value_iteration, Action, CoopState, EnvParams, StateSpace};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for case in 0..envs {
        let (k_cap, bins) = (rng.gen_range(1..=4), rng.gen_range(2..=3));
        let m = Model::random(&mut rng, k_cap, bins);
        let env = EnvParams::new(m.pi, m.mu, m.cost, m.benefit, m.beta).unwrap();
        let space = StateSpace::new(m.k_cap, m.bins, m.p_max).unwrap();
        let (best, _) = m.enumerate();

        let v = value_iteration(&env, &space, 1e-9);
        let policy = greedy_policy(&v, &env, &space);
        let relay: Vec<bool> = (0..m.n())
            .map(|i| {
                let (k, e) = m.unidx(i);
                policy.get(CoopState::new(k, e)) == Action::Relay
            })
            .collect();
        let attained = m.evaluate(&relay);
        for i in 0..m.n() {
            let (k, e) = m.unidx(i);
            let vi = v.get(CoopState::new(k, e));
            if (vi - best[i]).abs() > 1e-8 {
                failures.push(format!("case {case} {m:?}: V({k},{e}) = {vi} vs {}", best[i]));
            }
            if (attained[i] - best[i]).abs() > 1e-8 {
                failures.push(format!(
                    "case {case} {m:?}: greedy policy worth {} at ({k},{e}), optimum {}",
                    attained[i], best[i]
                ));
            }
            if e > 0 {
                let gap = m.q(&best, k, e, true) - m.q(&best, k, e, false);
                if gap.abs() > TIE && relay[i] != (gap > 0.0) {
                    failures.push(format!(
                        "case {case} {m:?}: action at ({k},{e}) disagrees, Q gap {gap}"
                    ));
                }
            }
        }
    }
    failures
}

/// Compares the closed-form relay power with [`grid_min_power`] on random
/// instances. Returns one message per mismatch.
pub fn relay_power_oracle(instances: usize, seed: u64) -> Vec<String> {
    use rand::SeedableRng;
    use relay_core::radio::{af_sinr, min_relay_power, sinr, ChannelParams};

    let ch = ChannelParams::default();
    let noise = ch.noise_plus_interference();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let log_uniform = |rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64| {
        10f64.powf(rng.gen_range(lo.log10()..hi.log10()))
    };
    let mut failures = Vec::new();
    for case in 0..instances {
        let first = log_uniform(&mut rng, 0.1, 1e4);
        let gain = log_uniform(&mut rng, 1e-12, 1e-2);
        let target = log_uniform(&mut rng, 0.3, 30.0);
        let p_max = log_uniform(&mut rng, 1e-3, 1.0);
        let got = min_relay_power(first, gain, &ch, target, p_max);
        let want = grid_min_power(first, gain, noise, target, p_max);
        match (got, want) {
            (Some(p), Some(q)) => {
                if (p - q).abs() > 1e-6 * q {
                    failures.push(format!("case {case}: power {p} vs grid {q}"));
                }
                let end = af_sinr(first, sinr(gain, p, &ch));
                if (end - target).abs() > 1e-9 * target {
                    failures.push(format!("case {case}: end-to-end SINR {end} vs {target}"));
                }
            }
            (None, None) => {}
            _ => failures.push(format!("case {case}: feasibility {got:?} vs grid {want:?}")),
        }
    }
    failures
}

/// Index of the nearest grid value by exhaustive scan; ties go low.
pub fn nearest_scan(x: f64, grid: &[f64]) -> usize {
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        let d = (x - g).abs();
        let b = (x - grid[best]).abs();
        if d < b - 1e-12 * (grid[grid.len() - 1] - grid[0]).max(1.0) {
            best = i;
        }
    }
    best
}

/// Checks that the top-bin threshold moves the right way along every grid
/// axis: up with beta and pi, down with cost and mu. `tables` must be sorted
/// by beta and share one grid otherwise.
pub fn comparative_statics(tables: &[relay_core::table::PolicyTable]) -> Vec<String> {
    let mut failures = Vec::new();
    let g = &tables[0].grid;
    let top = |t: &relay_core::table::PolicyTable, a: usize, b: usize, c: usize| t.entry(a, b, c).top();
    for t in tables {
        for b in 0..g.mu.len() {
            for c in 0..g.cost.len() {
                for a in 1..g.pi.len() {
                    if top(t, a, b, c) < top(t, a - 1, b, c) {
                        failures.push(format!(
                            "beta {}: K_th falls with pi at pi={} mu={} c={}",
                            t.grid.beta, g.pi[a], g.mu[b], g.cost[c]
                        ));
                    }
                }
            }
        }
        for a in 0..g.pi.len() {
            for c in 0..g.cost.len() {
                for b in 1..g.mu.len() {
                    if top(t, a, b, c) > top(t, a, b - 1, c) {
                        failures.push(format!(
                            "beta {}: K_th rises with mu at pi={} mu={} c={}",
                            t.grid.beta, g.pi[a], g.mu[b], g.cost[c]
                        ));
                    }
                }
            }
            for b in 0..g.mu.len() {
                for c in 1..g.cost.len() {
                    if top(t, a, b, c) > top(t, a, b, c - 1) {
                        failures.push(format!(
                            "beta {}: K_th rises with cost at pi={} mu={} c={}",
                            t.grid.beta, g.pi[a], g.mu[b], g.cost[c]
                        ));
                    }
                }
            }
        }
    }
    for w in tables.windows(2) {
        for i in 0..g.entry_count() {
            let (lo, hi) = (&w[0].entries[i], &w[1].entries[i]);
            if hi.top() < lo.top() {
                failures.push(format!(
                    "K_th falls from beta {} to {} at entry {i}",
                    w[0].grid.beta, w[1].grid.beta
                ));
            }
        }
    }
    failures
}
