use std::path::Path;

use serde::{Deserialize, Serialize};

use super::log::RunLog;
use super::{train, Regime, TrainConfig};
use crate::envs::EnvKind;
use crate::error::{config_err, Result};
use crate::losses::Fusion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlStats {
    pub min: f64,
    pub max: f64,
    /// Population variance.
    pub variance: f64,
}

pub fn kl_stats_of(series: &[f64]) -> Result<KlStats> {
    if series.len() < 2 {
        return config_err(format!("KL statistics need at least 2 steps, got {}", series.len()));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    Ok(KlStats {
        min: series.iter().copied().fold(f64::INFINITY, f64::min),
        max: series.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        variance: series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n,
    })
}

pub fn kl_stats(log: &RunLog) -> Result<KlStats> {
    kl_stats_of(&log.kl_series())
}

/// Relative change `(new - base) / base` in percent.
pub fn percent_delta(base: f64, new: f64) -> f64 {
    100.0 * (new - base) / base
}

/// RL-versus-hybrid KL comparison with max and variance deltas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlComparison {
    pub rl: KlStats,
    pub hybrid: KlStats,
    pub max_delta_pct: f64,
    pub var_delta_pct: f64,
}

pub fn compare_kl(rl: &RunLog, hybrid: &RunLog) -> Result<KlComparison> {
    let rl = kl_stats(rl)?;
    let hybrid = kl_stats(hybrid)?;
    Ok(KlComparison {
        rl,
        hybrid,
        max_delta_pct: percent_delta(rl.max, hybrid.max),
        var_delta_pct: percent_delta(rl.variance, hybrid.variance),
    })
}

/// `s_0 = x_0`, `s_t = decay·s_{t-1} + (1 - decay)·x_t`.
pub fn smooth_ema(series: &[f64], decay: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&decay) {
        return config_err(format!("EMA decay must lie in [0, 1), got {decay}"));
    }
    let mut out = Vec::with_capacity(series.len());
    for (i, &x) in series.iter().enumerate() {
        out.push(if i == 0 { x } else { decay * out[i - 1] + (1.0 - decay) * x });
    }
    Ok(out)
}

/// Row label for a configuration; hybrid variants carry their fusion.
pub fn regime_label(config: &TrainConfig) -> String {
    match (config.regime, config.hybrid.fusion) {
        (Regime::Hybrid, Fusion::LogSigma) => "Hybrid".into(),
        (Regime::Hybrid, f) => format!("Hybrid-{f:?}"),
        (r, _) => r.name().into(),
    }
}

const LABEL_ORDER: [&str; 8] = [
    "RL",
    "SFT",
    "SFT_then_RL",
    "Hybrid",
    "Hybrid-Theta",
    "Hybrid-PerStep",
    "Hybrid-ExpertInject",
    "SuperRL",
];

fn label_rank(label: &str) -> usize {
    LABEL_ORDER.iter().position(|l| *l == label).unwrap_or(LABEL_ORDER.len())
}

fn env_label(kind: EnvKind) -> &'static str {
    match kind {
        EnvKind::DenseChain => "DenseChain",
        EnvKind::SparseLock => "SparseLock",
    }
}

/// One row of the comparison table. KL columns are empty for runs without
/// rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub regime: String,
    pub env: String,
    pub em: f64,
    pub kl_min: Option<f64>,
    pub kl_max: Option<f64>,
    pub kl_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv()?)?;
        std::fs::write(json_path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn ordered(configs: &[TrainConfig]) -> Result<Vec<usize>> {
    let Some(first) = configs.first() else {
        return config_err("compare needs at least one configuration");
    };
    if configs.iter().any(|c| c.env != first.env || c.seed != first.seed) {
        return config_err("all compared configurations must share env and seed");
    }
    let mut order: Vec<usize> = (0..configs.len()).collect();
    order.sort_by_key(|&i| label_rank(&regime_label(&configs[i])));
    Ok(order)
}

fn rows_for(cfg: &TrainConfig) -> Result<Vec<ComparisonRow>> {
    let outcome = train(cfg)?;
    let kl = kl_stats(&outcome.log).ok();
    let env = env_label(cfg.env.kind);
    let mut row = ComparisonRow {
        regime: regime_label(cfg),
        env: env.into(),
        em: outcome.final_em,
        kl_min: kl.map(|k| k.min),
        kl_max: kl.map(|k| k.max),
        kl_var: kl.map(|k| k.variance),
    };
    let mut rows = vec![row.clone()];
    if let Some(t) = outcome.transfer_em {
        row.env = format!("{env}-transfer");
        row.em = t;
        rows.push(row);
    }
    Ok(rows)
}

/// Trains every configuration and tabulates final EM and KL statistics, one
/// row per regime (plus a transfer row when the env holds out prompts).
pub fn compare_regimes(configs: &[TrainConfig]) -> Result<Comparison> {
    let mut rows = Vec::new();
    for i in ordered(configs)? {
        rows.extend(rows_for(&configs[i])?);
    }
    Ok(Comparison { rows })
}

/// [`compare_regimes`] with one thread per configuration. Same table.
pub fn compare_regimes_parallel(configs: &[TrainConfig]) -> Result<Comparison> {
    let order = ordered(configs)?;
    let results: Vec<Result<Vec<ComparisonRow>>> = std::thread::scope(|s| {
        let handles: Vec<_> = order.iter().map(|&i| s.spawn(move || rows_for(&configs[i]))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| config_err("training thread panicked")))
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(Comparison { rows })
}
