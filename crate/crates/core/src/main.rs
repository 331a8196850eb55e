use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use superrl::envs::{load_instances, save_instances, Dataset, DemoSet, TaskInstance};
use superrl::policy::save_checkpoint;
use superrl::switch::{Actor, ProbeReport};
use superrl::trainer::{
    compare_regimes, generate_dataset, kl_stats, regime_label, smooth_ema, train_on, KlStats, Regime, TrainConfig,
    SUMMARY_EMA_DECAY,
};
use superrl::{Error, Result};

const OUT_ENV: &str = "SUPERRL_OUT";
const DEFAULT_OUT: &str = "runs";

#[derive(Parser)]
#[command(name = "superrl", version, about = "Adaptive RL / hybrid RL+SFT training on synthetic sequence tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config step budget.
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory; takes precedence over SUPERRL_OUT and out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration.
    Defaults,
    /// Write train/test/demo files and a manifest.
    GenData {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the reward-density probe. Exit 0 = dense (vanilla RL), 2 = sparse (hybrid).
    Probe {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train and write the run log, checkpoint and summary.
    Train {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train every *.json config in a directory and tabulate the results.
    Compare {
        config_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the configurations on parallel threads.
        #[arg(long)]
        parallel: bool,
    },
}

/// A training config plus where to write results and, optionally, where to
/// read a previously generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct CliConfig {
    #[serde(flatten)]
    train: TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data_dir: Option<PathBuf>,
}

impl CliConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        let Some(map) = value.as_object_mut() else {
            return Err(Error::Config(format!("{}: top level must be a JSON object", path.display())));
        };
        let take_path = |map: &mut serde_json::Map<String, serde_json::Value>, key: &str| -> Result<Option<PathBuf>> {
            match map.remove(key) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(serde_json::Value::String(s)) => Ok(Some(PathBuf::from(s))),
                Some(_) => Err(Error::Config(format!("{key} must be a string"))),
            }
        };
        let out_dir = take_path(map, "out_dir")?;
        let data_dir = take_path(map, "data_dir")?;
        let train: TrainConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(Self {
            train,
            out_dir,
            data_dir,
        })
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if let Some(steps) = o.steps {
            self.train.steps = steps;
        }
    }

    fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_ENV) {
            return PathBuf::from(p);
        }
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    fn dataset(&self) -> Result<Dataset> {
        match &self.data_dir {
            None => generate_dataset(&self.train),
            Some(dir) => read_dataset(dir),
        }
    }
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    name: String,
    sha256: String,
    records: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    env: superrl::envs::EnvConfig,
    files: Vec<ManifestFile>,
    /// Unix seconds; the only field that differs between identical runs.
    generated_at: u64,
}

fn demo_instances(data: &Dataset) -> Vec<TaskInstance> {
    data.demos
        .entries
        .iter()
        .map(|(id, tokens)| {
            let inst = data.train_instance(*id).expect("demo prompts come from the training split");
            TaskInstance {
                oracle_trace: tokens.clone(),
                ..inst.clone()
            }
        })
        .collect()
}

fn read_dataset(dir: &Path) -> Result<Dataset> {
    let train = load_instances(&dir.join("train.jsonl"))?;
    let test = load_instances(&dir.join("test.jsonl"))?;
    let transfer_path = dir.join("transfer.jsonl");
    let transfer = if transfer_path.exists() {
        load_instances(&transfer_path)?
    } else {
        Vec::new()
    };
    let demos = DemoSet {
        entries: load_instances(&dir.join("demos.jsonl"))?
            .into_iter()
            .map(|d| (d.prompt_id, d.oracle_trace))
            .collect(),
    };
    Ok(Dataset {
        train,
        test,
        transfer,
        demos,
    })
}

fn cmd_gen_data(config: &Path, overrides: &Overrides) -> Result<()> {
    let mut cfg = CliConfig::load(config)?;
    cfg.apply(overrides);
    cfg.train.env.validate()?;
    let out = cfg.out_dir(overrides.out.as_deref());
    fs::create_dir_all(&out)?;
    let data = generate_dataset(&cfg.train)?;
    let mut splits = vec![
        ("train.jsonl", data.train.clone()),
        ("test.jsonl", data.test.clone()),
        ("demos.jsonl", demo_instances(&data)),
    ];
    if !data.transfer.is_empty() {
        splits.push(("transfer.jsonl", data.transfer.clone()));
    }
    let mut files = Vec::new();
    for (name, items) in &splits {
        let path = out.join(name);
        save_instances(&path, items)?;
        files.push(ManifestFile {
            name: (*name).into(),
            sha256: sha256_file(&path)?,
            records: items.len(),
        });
    }
    let manifest = Manifest {
        seed: cfg.train.seed,
        env: cfg.train.env.clone(),
        files,
        generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    write_pretty(&out.join("manifest.json"), &manifest)?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_probe(config: &Path, overrides: &Overrides) -> Result<Actor> {
    let mut cfg = CliConfig::load(config)?;
    cfg.apply(overrides);
    let sw = cfg.train.switch_config();
    // the probe alone: k vanilla RL steps, then the decision
    let probe_cfg = TrainConfig {
        regime: Regime::SuperRl,
        steps: sw.k,
        switch: Some(superrl::switch::SwitchConfig {
            reprobe_interval: None,
            ..sw
        }),
        ..cfg.train.clone()
    };
    let data = cfg.dataset()?;
    let outcome = train_on(&probe_cfg, &data)?;
    let choice = outcome.choice.expect("SuperRL records its decision");
    let report = ProbeReport::from(&choice);
    let out = cfg.out_dir(overrides.out.as_deref());
    fs::create_dir_all(&out)?;
    write_pretty(&out.join("probe.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.choice)
}

#[derive(Serialize)]
struct Summary {
    regime: String,
    env: superrl::envs::EnvKind,
    seed: u64,
    steps: usize,
    final_em: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    transfer_em: Option<f64>,
    smoothed_em: f64,
    ema_decay: f64,
    kl: Option<KlStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    choice: Option<Actor>,
}

fn cmd_train(config: &Path, overrides: &Overrides) -> Result<()> {
    let mut cfg = CliConfig::load(config)?;
    cfg.apply(overrides);
    let data = cfg.dataset()?;
    let outcome = train_on(&cfg.train, &data)?;
    let out = cfg.out_dir(overrides.out.as_deref());
    fs::create_dir_all(&out)?;
    outcome.log.write_jsonl(&out.join("runlog.jsonl"))?;
    save_checkpoint(&out.join("checkpoint.json"), &outcome.params)?;
    write_pretty(&out.join("config.json"), &cfg)?;
    let smoothed = smooth_ema(&outcome.log.em_series(), SUMMARY_EMA_DECAY)?;
    let summary = Summary {
        regime: regime_label(&cfg.train),
        env: cfg.train.env.kind,
        seed: cfg.train.seed,
        steps: cfg.train.steps,
        final_em: outcome.final_em,
        transfer_em: outcome.transfer_em,
        smoothed_em: smoothed.last().copied().unwrap_or(outcome.final_em),
        ema_decay: SUMMARY_EMA_DECAY,
        kl: kl_stats(&outcome.log).ok(),
        choice: outcome.choice.map(|c| c.choice),
    };
    write_pretty(&out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_compare(dir: &Path, out: Option<&Path>, parallel: bool) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no *.json configs in {}", dir.display())));
    }
    let configs: Vec<CliConfig> = paths.iter().map(|p| CliConfig::load(p)).collect::<Result<_>>()?;
    let trains: Vec<TrainConfig> = configs.iter().map(|c| c.train.clone()).collect();
    let table = if parallel {
        superrl::trainer::compare_regimes_parallel(&trains)?
    } else {
        compare_regimes(&trains)?
    };
    let out = configs[0].out_dir(out);
    fs::create_dir_all(&out)?;
    table.write(&out.join("comparison.csv"), &out.join("comparison.json"))?;
    print!("{}", table.to_csv()?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Defaults => {
            let cfg = CliConfig {
                train: TrainConfig::default(),
                out_dir: Some(PathBuf::from(DEFAULT_OUT)),
                data_dir: None,
            };
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        Command::GenData { config, overrides } => cmd_gen_data(&config, &overrides)?,
        Command::Probe { config, overrides } => {
            return Ok(match cmd_probe(&config, &overrides)? {
                Actor::VanillaRL => ExitCode::SUCCESS,
                Actor::HybridActor => ExitCode::from(2),
            });
        }
        Command::Train { config, overrides } => cmd_train(&config, &overrides)?,
        Command::Compare {
            config_dir,
            out,
            parallel,
        } => cmd_compare(&config_dir, out.as_deref(), parallel)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
