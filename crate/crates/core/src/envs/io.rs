use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TaskInstance;
use crate::error::Result;

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub prompt_id: usize,
    pub prompt: Vec<usize>,
    pub gold: Vec<usize>,
    pub trace: Vec<usize>,
}

impl From<&TaskInstance> for DatasetRecord {
    fn from(t: &TaskInstance) -> Self {
        Self {
            prompt_id: t.prompt_id,
            prompt: t.prompt_tokens.clone(),
            gold: t.gold_answer.clone(),
            trace: t.oracle_trace.clone(),
        }
    }
}

impl From<DatasetRecord> for TaskInstance {
    fn from(r: DatasetRecord) -> Self {
        Self {
            prompt_id: r.prompt_id,
            prompt_tokens: r.prompt,
            gold_answer: r.gold,
            oracle_trace: r.trace,
        }
    }
}

pub fn save_instances(path: &Path, items: &[TaskInstance]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &DatasetRecord::from(item))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_instances(path: &Path) -> Result<Vec<TaskInstance>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line)?;
        out.push(rec.into());
    }
    Ok(out)
}
