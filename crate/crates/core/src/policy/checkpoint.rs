use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureSpec, PolicyParams};
use crate::error::{config_err, Result};
use crate::numerics::{Matrix, MlpParams};

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Scalar(f64),
    Array(Vec<f64>),
}

/// Flat map: `features` = [vocab, prompt_len, horizon, hidden], one array per
/// weight tensor (`net.w1`, `value.b2`, ...) and the scalars `sigma_pg`,
/// `sigma_sft`, `alpha`.
fn to_map(p: &PolicyParams) -> BTreeMap<String, Entry> {
    let mut m = BTreeMap::new();
    let f = p.features;
    m.insert(
        "features".into(),
        Entry::Array(vec![
            f.vocab as f64,
            f.prompt_len as f64,
            f.horizon as f64,
            p.net.hidden_dim() as f64,
        ]),
    );
    for (prefix, net) in [("net", &p.net), ("value", &p.value_net)] {
        m.insert(format!("{prefix}.w1"), Entry::Array(net.w1.data().to_vec()));
        m.insert(format!("{prefix}.b1"), Entry::Array(net.b1.clone()));
        m.insert(format!("{prefix}.w2"), Entry::Array(net.w2.data().to_vec()));
        m.insert(format!("{prefix}.b2"), Entry::Array(net.b2.clone()));
    }
    m.insert("sigma_pg".into(), Entry::Scalar(p.sigma_pg));
    m.insert("sigma_sft".into(), Entry::Scalar(p.sigma_sft));
    m.insert("alpha".into(), Entry::Scalar(p.alpha));
    m
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams) -> Result<()> {
    let text = serde_json::to_string(&to_map(params))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams> {
    let text = std::fs::read_to_string(path)?;
    let mut m: BTreeMap<String, Entry> = serde_json::from_str(&text)?;
    let mut array = |name: &str| -> Result<Vec<f64>> {
        match m.remove(name) {
            Some(Entry::Array(v)) => Ok(v),
            Some(Entry::Scalar(_)) => config_err(format!("checkpoint entry {name} should be an array")),
            None => config_err(format!("checkpoint missing {name}")),
        }
    };
    let dims = array("features")?;
    if dims.len() != 4 || dims.iter().any(|d| *d < 0.0 || d.fract() != 0.0) {
        return config_err("checkpoint features must be four non-negative integers");
    }
    let features = FeatureSpec {
        vocab: dims[0] as usize,
        prompt_len: dims[1] as usize,
        horizon: dims[2] as usize,
    };
    let hidden = dims[3] as usize;
    let input = features.input_dim();
    let mut net_of = |prefix: &str, out: usize| -> Result<MlpParams> {
        let b1 = array(&format!("{prefix}.b1"))?;
        let b2 = array(&format!("{prefix}.b2"))?;
        if b1.len() != hidden || b2.len() != out {
            return config_err(format!("checkpoint biases of {prefix} have the wrong length"));
        }
        Ok(MlpParams {
            w1: Matrix::from_vec(hidden, input, array(&format!("{prefix}.w1"))?)?,
            b1,
            w2: Matrix::from_vec(out, hidden, array(&format!("{prefix}.w2"))?)?,
            b2,
        })
    };
    let net = net_of("net", features.vocab)?;
    let value_net = net_of("value", 1)?;
    let mut scalar = |name: &str| -> Result<f64> {
        match m.remove(name) {
            Some(Entry::Scalar(v)) => Ok(v),
            _ => config_err(format!("checkpoint missing scalar {name}")),
        }
    };
    let params = PolicyParams {
        features,
        net,
        value_net,
        sigma_pg: scalar("sigma_pg")?,
        sigma_sft: scalar("sigma_sft")?,
        alpha: scalar("alpha")?,
    };
    if let Some(extra) = m.keys().next() {
        return config_err(format!("unknown checkpoint entry {extra}"));
    }
    Ok(params)
}
