/// Per-UE counters accumulated over the slots in which the UE still had relay
/// energy at slot start.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UeStats {
    pub lifetime: u64,
    pub dl_slots: u64,
    /// Direct link below the SINR target.
    pub demand: u64,
    /// Demand events while the UE could pay (tokens and energy).
    pub eligible_demand: u64,
    pub racks_received: u64,
    pub inbound: u64,
    pub racks_sent: u64,
    pub actual_bits: f64,
    pub direct_bits: f64,
    /// Joules spent relaying for others.
    pub energy_spent: f64,
}

/// Lifetime metrics of one UE. Ratios with an empty denominator are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct UeMetrics {
    pub id: usize,
    pub high_mobility: bool,
    pub high_budget: bool,
    pub lambda: Option<f64>,
    pub mu: f64,
    pub rre: Option<f64>,
    pub rack_rate: Option<f64>,
    pub lifetime: u64,
    /// 1 when the UE was never scheduled while alive.
    pub gain: f64,
    pub utility: f64,
    pub final_tokens: usize,
}

impl UeMetrics {
    pub fn from_stats(
        id: usize,
        high_mobility: bool,
        high_budget: bool,
        s: &UeStats,
        benefit: f64,
        final_tokens: usize,
    ) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let life = s.lifetime.max(1) as f64;
        let gain = if s.direct_bits > 0.0 {
            s.actual_bits / s.direct_bits
        } else {
            1.0
        };
        Self {
            id,
            high_mobility,
            high_budget,
            lambda: ratio(s.demand, s.dl_slots),
            mu: s.inbound as f64 / life,
            rre: ratio(s.racks_received, s.eligible_demand),
            rack_rate: ratio(s.racks_sent, s.inbound),
            lifetime: s.lifetime,
            gain,
            utility: (benefit * s.racks_received as f64 - s.energy_spent) / life,
            final_tokens,
        }
    }
}

/// Mean and quartiles of one metric over a group of UEs. All `NaN` when no UE
/// in the group has the metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub p25: f64,
    pub p75: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                p25: f64::NAN,
                p75: f64::NAN,
                count: 0,
            };
        }
        v.sort_by(f64::total_cmp);
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p25: percentile(&v, 0.25),
            p75: percentile(&v, 0.75),
            count: v.len(),
        }
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Aggregates over a named group of UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSummary {
    pub class: String,
    pub ues: usize,
    pub lambda: Stat,
    pub mu: Stat,
    pub rre: Stat,
    pub rack_rate: Stat,
    pub lifetime: Stat,
    pub gain: Stat,
    pub utility: Stat,
    pub negative_utility_fraction: f64,
}

impl ClassSummary {
    pub fn of<'a>(class: &str, ues: impl IntoIterator<Item = &'a UeMetrics>) -> Self {
        let ues: Vec<&UeMetrics> = ues.into_iter().collect();
        let negative = ues.iter().filter(|u| u.utility < 0.0).count();
        Self {
            class: class.to_string(),
            ues: ues.len(),
            lambda: Stat::of(ues.iter().filter_map(|u| u.lambda)),
            mu: Stat::of(ues.iter().map(|u| u.mu)),
            rre: Stat::of(ues.iter().filter_map(|u| u.rre)),
            rack_rate: Stat::of(ues.iter().filter_map(|u| u.rack_rate)),
            lifetime: Stat::of(ues.iter().map(|u| u.lifetime as f64)),
            gain: Stat::of(ues.iter().map(|u| u.gain)),
            utility: Stat::of(ues.iter().map(|u| u.utility)),
            negative_utility_fraction: if ues.is_empty() {
                f64::NAN
            } else {
                negative as f64 / ues.len() as f64
            },
        }
    }
}

/// Token-holding histogram at one slot: `counts[k]` UEs hold `k` tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSnapshot {
    pub slot: usize,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub ues: Vec<UeMetrics>,
    /// "all" first, then the populated mobility and budget classes.
    pub classes: Vec<ClassSummary>,
    pub series: Vec<TokenSnapshot>,
    pub transfers: u64,
    pub slots: usize,
}

impl MetricsReport {
    pub fn new(ues: Vec<UeMetrics>, series: Vec<TokenSnapshot>, transfers: u64, slots: usize) -> Self {
        let mut classes = vec![ClassSummary::of("all", &ues)];
        let groups: [(&str, fn(&UeMetrics) -> bool); 4] = [
            ("high-mobility", |u| u.high_mobility),
            ("low-mobility", |u| !u.high_mobility),
            ("high-budget", |u| u.high_budget),
            ("low-budget", |u| !u.high_budget),
        ];
        for (name, pick) in groups {
            if ues.iter().any(pick) {
                classes.push(ClassSummary::of(name, ues.iter().filter(|u| pick(u))));
            }
        }
        Self {
            ues,
            classes,
            series,
            transfers,
            slots,
        }
    }

    pub fn overall(&self) -> &ClassSummary {
        &self.classes[0]
    }

    pub fn class(&self, name: &str) -> Option<&ClassSummary> {
        self.classes.iter().find(|c| c.class == name)
    }

    pub fn mean_gain(&self) -> f64 {
        self.overall().gain.mean
    }

    /// Network-average outbound relay demand rate.
    pub fn mean_lambda(&self) -> f64 {
        self.overall().lambda.mean
    }
}
