//! Scenario presets, parameter sweeps and CSV artifacts.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::agent::CooperationMode;
use crate::sim::{build_tables, run, ClassSummary, MetricsReport, SimConfig, SimError, Stat, UeMetrics};
use crate::table::{build_table, PolicyTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    TokenSupply,
    /// Fraction of high-mobility UEs.
    MobilityMix,
    /// Fraction of high-budget UEs.
    BudgetMix,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::TokenSupply => "token_supply",
            SweepParam::MobilityMix => "mobility.high_fraction",
            SweepParam::BudgetMix => "budget.high_fraction",
        }
    }

    pub fn apply(self, cfg: &mut SimConfig, value: f64) {
        match self {
            SweepParam::TokenSupply => cfg.token_supply = value.round() as usize,
            SweepParam::MobilityMix => cfg.mobility.high_fraction = value,
            SweepParam::BudgetMix => cfg.budget.high_fraction = value,
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token_supply" | "sim.token_supply" | "tokens" => Ok(SweepParam::TokenSupply),
            "mobility.high_fraction" | "mobility" => Ok(SweepParam::MobilityMix),
            "budget.high_fraction" | "budget" => Ok(SweepParam::BudgetMix),
            _ => Err(format!(
                "cannot sweep '{s}'; use token_supply, mobility.high_fraction or budget.high_fraction"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Sweep {
    /// Parses `param=v1,v2,...` or `param=start:end:step`.
    pub fn parse(spec: &str, seeds: Vec<u64>) -> Result<Self, String> {
        let (param, values) = spec
            .split_once('=')
            .ok_or_else(|| format!("sweep '{spec}' should look like param=values"))?;
        let param: SweepParam = param.trim().parse()?;
        let values = crate::sim::parse_axis(values.trim())?;
        if values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        Ok(Self {
            param,
            values,
            seeds,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: SimConfig,
    pub sweep: Option<Sweep>,
}

pub const PRESETS: [&str; 7] = [
    "table4",
    "vc-scenario-1",
    "vc-scenario-2",
    "vc-scenario-3",
    "mobility-sweep",
    "budget-sweep",
    "token-sweep",
];

/// Shrinks a full-scale config by `scale` (fraction of UEs and cells), keeping
/// UE density and tokens per UE.
pub fn scale_config(cfg: SimConfig, scale: f64) -> SimConfig {
    if scale == 1.0 {
        return cfg;
    }
    let cells = (cfg.cells() as f64 * scale).round().max(1.0);
    let cx = ((cfg.cells_x as f64 * scale.sqrt()).round().max(1.0)) as usize;
    let cy = ((cells / cx as f64).round().max(1.0)) as usize;
    let n = ((cfg.n_ues as f64 * scale).round().max(1.0)) as usize;
    cfg.scaled(n, cx, cy)
}

fn seeds(base: u64, n: u64) -> Vec<u64> {
    (0..n).map(|i| base + i).collect()
}

/// A named scenario at the given scale (1.0 = 1500 UEs over 100 cells).
pub fn preset(name: &str, scale: f64) -> Option<Preset> {
    let mut c = SimConfig::default();
    let heterogeneous = |c: &mut SimConfig, mode| {
        c.mode = mode;
        c.mobility.high_fraction = 0.7;
        c.budget.high_fraction = 0.7;
    };
    let mixes = vec![0.1, 0.3, 0.5, 0.7, 0.9];
    let (description, sweep) = match name {
        "table4" => ("all UEs high-mobility and high-budget, 8000 tokens", None),
        "vc-scenario-1" => {
            heterogeneous(&mut c, CooperationMode::TokenLearning);
            ("self-interested token users, 70% high mobility, 70% high budget", None)
        }
        "vc-scenario-2" => {
            heterogeneous(&mut c, CooperationMode::ObedientInfinite);
            ("obedient users with unlimited relay energy", None)
        }
        "vc-scenario-3" => {
            heterogeneous(&mut c, CooperationMode::ObedientFinite);
            ("obedient users with finite relay energy", None)
        }
        "mobility-sweep" => {
            c.agent.beta = 0.995;
            c.budget.high_relays = 1000.0;
            let sweep = Sweep {
                param: SweepParam::MobilityMix,
                values: mixes,
                seeds: seeds(1, 3),
            };
            ("10% to 90% high-mobility UEs, budgets for 1000 relays", Some(sweep))
        }
        "budget-sweep" => {
            c.agent.beta = 0.995;
            let sweep = Sweep {
                param: SweepParam::BudgetMix,
                values: mixes,
                seeds: seeds(1, 3),
            };
            ("10% to 90% high-budget UEs (100 vs 40 relays)", Some(sweep))
        }
        "token-sweep" => {
            let values = (0..=20).map(|i| (i as f64 * 1000.0 * scale).round()).collect();
            let sweep = Sweep {
                param: SweepParam::TokenSupply,
                values,
                seeds: seeds(1, 3),
            };
            ("token supply 0 to 20000 in steps of 1000", Some(sweep))
        }
        _ => return None,
    };
    let name = PRESETS.into_iter().find(|p| *p == name)?;
    Some(Preset {
        name,
        description,
        config: scale_config(c, scale),
        sweep,
    })
}

/// Builds each distinct policy table the given configs need, once.
pub fn tables_for(configs: &[SimConfig]) -> Result<Vec<Arc<PolicyTable>>, SimError> {
    let mut grids = Vec::new();
    for c in configs {
        c.validate()?;
        if c.mode != CooperationMode::TokenLearning {
            continue;
        }
        for high in c.budget_classes() {
            let g = (c.param_grid(high), c.grid.tolerance.to_bits());
            if !grids.contains(&g) {
                grids.push(g);
            }
        }
    }
    grids
        .into_iter()
        .map(|(g, tol)| Ok(Arc::new(build_table(g, f64::from_bits(tol))?)))
        .collect()
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub transfers: u64,
    pub summary: ClassSummary,
}

/// Runs every (value, seed) pair on `jobs` worker threads (0 = all cores).
/// Rows come back in (value, seed) order. Without `tables`, the needed tables
/// are built first.
pub fn run_sweep(
    base: &SimConfig,
    sweep: &Sweep,
    tables: Option<Vec<Arc<PolicyTable>>>,
    jobs: usize,
) -> Result<Vec<SweepRow>, SimError> {
    let mut points = Vec::new();
    for &value in &sweep.values {
        for &seed in &sweep.seeds {
            let mut c = base.clone();
            sweep.param.apply(&mut c, value);
            c.seed = seed;
            c.series_every = 0;
            points.push((value, c));
        }
    }
    let configs: Vec<SimConfig> = points.iter().map(|(_, c)| c.clone()).collect();
    let tables = match tables {
        Some(t) => t,
        None => tables_for(&configs)?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        points
            .par_iter()
            .map(|(value, c)| {
                let r = run(c, tables.clone())?;
                Ok(SweepRow {
                    value: *value,
                    seed: c.seed,
                    transfers: r.transfers,
                    summary: r.overall().clone(),
                })
            })
            .collect()
    })
}

/// Runs one config, building its tables if none are given.
pub fn simulate(
    cfg: &SimConfig,
    tables: Option<Vec<Arc<PolicyTable>>>,
) -> Result<MetricsReport, SimError> {
    let tables = match tables {
        Some(t) => t,
        None if cfg.mode == CooperationMode::TokenLearning => build_tables(cfg)?,
        None => Vec::new(),
    };
    run(cfg, tables)
}

/// `x` with 9 significant digits, in the shortest of fixed or exponent form.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn parse_float(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("bad number '{s}': {e}"))
}

fn parse_opt(s: &str) -> Result<Option<f64>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_float(s).map(Some)
    }
}

fn parse_class(s: &str, high: &str, low: &str) -> Result<bool, String> {
    if s == high {
        Ok(true)
    } else if s == low {
        Ok(false)
    } else {
        Err(format!("expected '{high}' or '{low}', got '{s}'"))
    }
}

fn csv_err(e: csv::Error) -> String {
    e.to_string()
}

pub const UE_HEADER: [&str; 11] = [
    "id", "mobility", "budget", "lambda", "mu", "rre", "rack_rate", "lifetime", "gain", "utility",
    "final_tokens",
];

pub fn write_ue_csv<W: Write>(w: W, ues: &[UeMetrics]) -> Result<(), String> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(UE_HEADER).map_err(csv_err)?;
    for u in ues {
        out.write_record([
            u.id.to_string(),
            if u.high_mobility { "high" } else { "low" }.into(),
            if u.high_budget { "high" } else { "low" }.into(),
            fmt_opt(u.lambda),
            fmt_float(u.mu),
            fmt_opt(u.rre),
            fmt_opt(u.rack_rate),
            u.lifetime.to_string(),
            fmt_float(u.gain),
            fmt_float(u.utility),
            u.final_tokens.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| e.to_string())
}

pub fn read_ue_csv<R: Read>(r: R) -> Result<Vec<UeMetrics>, String> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers().map_err(csv_err)? != UE_HEADER.as_slice() {
        return Err("unexpected per-UE CSV header".into());
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let f = |i: usize| &rec[i];
            Ok(UeMetrics {
                id: f(0).parse().map_err(|e| format!("id: {e}"))?,
                high_mobility: parse_class(f(1), "high", "low")?,
                high_budget: parse_class(f(2), "high", "low")?,
                lambda: parse_opt(f(3))?,
                mu: parse_float(f(4))?,
                rre: parse_opt(f(5))?,
                rack_rate: parse_opt(f(6))?,
                lifetime: f(7).parse().map_err(|e| format!("lifetime: {e}"))?,
                gain: parse_float(f(8))?,
                utility: parse_float(f(9))?,
                final_tokens: f(10).parse().map_err(|e| format!("tokens: {e}"))?,
            })
        })
        .collect()
}

const METRICS: [&str; 7] = ["lambda", "mu", "rre", "rack_rate", "lifetime", "gain", "utility"];

fn summary_header(lead: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    h.push("ues".into());
    for m in METRICS {
        for s in ["mean", "p25", "p75"] {
            h.push(format!("{m}_{s}"));
        }
    }
    h.push("negative_utility_fraction".into());
    h
}

fn stats(c: &ClassSummary) -> [&Stat; 7] {
    [&c.lambda, &c.mu, &c.rre, &c.rack_rate, &c.lifetime, &c.gain, &c.utility]
}

fn summary_fields(c: &ClassSummary) -> Vec<String> {
    let mut row = vec![c.ues.to_string()];
    for s in stats(c) {
        row.extend([fmt_float(s.mean), fmt_float(s.p25), fmt_float(s.p75)]);
    }
    row.push(fmt_float(c.negative_utility_fraction));
    row
}

/// Reads the stat columns back; counts are not stored and come back as 0.
fn parse_summary_fields(class: &str, f: &[&str]) -> Result<ClassSummary, String> {
    let num = |i: usize| parse_float(f[i]);
    let stat = |i: usize| -> Result<Stat, String> {
        Ok(Stat {
            mean: num(i)?,
            p25: num(i + 1)?,
            p75: num(i + 2)?,
            count: 0,
        })
    };
    Ok(ClassSummary {
        class: class.to_string(),
        ues: f[0].parse().map_err(|e| format!("ues: {e}"))?,
        lambda: stat(1)?,
        mu: stat(4)?,
        rre: stat(7)?,
        rack_rate: stat(10)?,
        lifetime: stat(13)?,
        gain: stat(16)?,
        utility: stat(19)?,
        negative_utility_fraction: num(22)?,
    })
}

pub fn write_summary_csv<W: Write>(w: W, classes: &[ClassSummary]) -> Result<(), String> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(summary_header(&["class"])).map_err(csv_err)?;
    for c in classes {
        let mut row = vec![c.class.clone()];
        row.extend(summary_fields(c));
        out.write_record(row).map_err(csv_err)?;
    }
    out.flush().map_err(|e| e.to_string())
}

pub fn read_summary_csv<R: Read>(r: R) -> Result<Vec<ClassSummary>, String> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != summary_header(&["class"]) {
        return Err("unexpected summary CSV header".into());
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let f: Vec<&str> = rec.iter().collect();
            parse_summary_fields(f[0], &f[1..])
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(w: W, param: SweepParam, rows: &[SweepRow]) -> Result<(), String> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(summary_header(&[param.as_str(), "seed", "transfers"]))
        .map_err(csv_err)?;
    for r in rows {
        let mut row = vec![fmt_float(r.value), r.seed.to_string(), r.transfers.to_string()];
        row.extend(summary_fields(&r.summary));
        out.write_record(row).map_err(csv_err)?;
    }
    out.flush().map_err(|e| e.to_string())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<(SweepParam, Vec<SweepRow>), String> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let param: SweepParam = header.first().ok_or("empty sweep CSV")?.parse()?;
    if header != summary_header(&[param.as_str(), "seed", "transfers"]) {
        return Err("unexpected sweep CSV header".into());
    }
    let rows = rdr
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let f: Vec<&str> = rec.iter().collect();
            Ok(SweepRow {
                value: parse_float(f[0])?,
                seed: f[1].parse().map_err(|e| format!("seed: {e}"))?,
                transfers: f[2].parse().map_err(|e| format!("transfers: {e}"))?,
                summary: parse_summary_fields("all", &f[3..])?,
            })
        })
        .collect::<Result<_, String>>()?;
    Ok((param, rows))
}

/// Token-holding histograms: one row per snapshot, one column per holding.
pub fn write_series_csv<W: Write>(w: W, report: &MetricsReport) -> Result<(), String> {
    let mut out = csv::Writer::from_writer(w);
    let width = report.series.first().map_or(0, |s| s.counts.len());
    let mut header = vec!["slot".to_string()];
    header.extend((0..width).map(|k| format!("k{k}")));
    out.write_record(header).map_err(csv_err)?;
    for s in &report.series {
        let mut row = vec![s.slot.to_string()];
        row.extend(s.counts.iter().map(|c| c.to_string()));
        out.write_record(row).map_err(csv_err)?;
    }
    out.flush().map_err(|e| e.to_string())
}

/// Mean of a metric over seeds for each sweep value, in sweep order.
pub fn mean_by_value(rows: &[SweepRow], metric: impl Fn(&SweepRow) -> f64) -> Vec<(f64, f64)> {
    let mut order = Vec::new();
    let mut acc: HashMap<u64, (f64, usize)> = HashMap::new();
    for r in rows {
        let e = acc.entry(r.value.to_bits()).or_insert_with(|| {
            order.push(r.value);
            (0.0, 0)
        });
        e.0 += metric(r);
        e.1 += 1;
    }
    order
        .into_iter()
        .map(|v| {
            let (s, n) = acc[&v.to_bits()];
            (v, s / n as f64)
        })
        .collect()
}
