//! On-disk results store. Records are appended as JSON lines and never
//! rewritten; every record carries the manifest hash.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::graphs::{GraphDatasetSummary, GraphEntry};
use super::manifest::{ExperimentManifest, ScaleMode};
use crate::attack::AttackKind;
use crate::error::{Error, Result};
use crate::measure::RobustnessRecord;
use crate::network::InitMethod;
use crate::train::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSeeds {
    pub init: u64,
    pub train: u64,
    pub attack: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed { error: String },
}

/// Outcome of one (graph, init) task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub manifest_hash: String,
    pub master_seed: u64,
    pub scale_mode: ScaleMode,
    pub graph_id: String,
    pub init_method: InitMethod,
    pub seeds: TaskSeeds,
    #[serde(flatten)]
    pub status: RunStatus,
    pub param_count: Option<usize>,
    pub final_loss: Option<f64>,
    pub eval: Option<EvalReport>,
    pub robustness: Vec<RobustnessRecord>,
    /// Test indices given to the one-pixel attack.
    pub one_pixel_subset: Vec<usize>,
    pub started_unix: u64,
    pub elapsed_secs: f64,
}

impl RunRecord {
    pub fn key(&self) -> (String, InitMethod) {
        (self.graph_id.clone(), self.init_method)
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    pub fn robustness(&self, attack: AttackKind) -> Option<&RobustnessRecord> {
        self.robustness.iter().find(|r| r.attack == attack)
    }
}

pub(crate) fn model_key(graph_id: &str, init: InitMethod) -> String {
    format!("{graph_id}_{}", init.code())
}

pub(crate) fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Directory layout of one experiment.
#[derive(Debug, Clone)]
pub struct ResultsStore {
    root: PathBuf,
}

impl ResultsStore {
    pub fn open(root: &Path) -> Result<Self> {
        for sub in ["", "graphs", "models", "histories", "outcomes", "pruning"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.path("manifest.json")
    }

    pub fn save_manifest(&self, m: &ExperimentManifest) -> Result<()> {
        m.save(&self.manifest_path())
    }

    pub fn has_manifest(&self) -> bool {
        self.manifest_path().exists()
    }

    pub fn load_manifest(&self) -> Result<ExperimentManifest> {
        let path = self.manifest_path();
        if !path.exists() {
            return Err(Error::InsufficientData(format!("no manifest at {}; run gen-graphs first", path.display())));
        }
        ExperimentManifest::load(&path)
    }

    pub fn save_graphs(&self, entries: &[GraphEntry], summary: &GraphDatasetSummary) -> Result<()> {
        for e in entries {
            let path = self.path(&format!("graphs/{}.json", e.id()));
            fs::write(&path, serde_json::to_string(e)?).map_err(|err| Error::io(&path, err))?;
        }
        let path = self.path("graphs/summary.json");
        fs::write(&path, serde_json::to_string_pretty(summary)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load_graphs(&self) -> Result<(Vec<GraphEntry>, GraphDatasetSummary)> {
        let path = self.path("graphs/summary.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let summary: GraphDatasetSummary = serde_json::from_str(&text)?;
        let mut entries = Vec::with_capacity(summary.accepted.len());
        for id in &summary.accepted {
            let p = self.path(&format!("graphs/{id}.json"));
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            entries.push(serde_json::from_str(&text)?);
        }
        Ok((entries, summary))
    }

    pub fn runs_path(&self) -> PathBuf {
        self.path("runs.jsonl")
    }

    pub fn read_runs(&self) -> Result<Vec<RunRecord>> {
        read_jsonl(&self.runs_path())
    }

    /// Keys of tasks already recorded under `manifest_hash`.
    pub fn completed(&self, manifest_hash: &str) -> Result<BTreeSet<(String, InitMethod)>> {
        Ok(self
            .read_runs()?
            .into_iter()
            .filter(|r| r.manifest_hash == manifest_hash)
            .map(|r| r.key())
            .collect())
    }

    pub fn checkpoint_path(&self, key: &str) -> PathBuf {
        self.path(&format!("models/{key}.ckpt"))
    }

    pub fn history_path(&self, key: &str) -> PathBuf {
        self.path(&format!("histories/{key}.csv"))
    }

    pub fn outcomes_path(&self, key: &str, attack: AttackKind) -> PathBuf {
        self.path(&format!("outcomes/{key}_{}.csv", attack.name()))
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    f.write_all(&line).map_err(|e| Error::io(path, e))
}

/// Serializes appends from many workers through one thread.
pub struct JsonlWriter<T: Serialize + Send + 'static> {
    sender: Option<mpsc::Sender<T>>,
    handle: Option<thread::JoinHandle<Result<usize>>>,
}

impl<T: Serialize + Send + 'static> JsonlWriter<T> {
    pub fn spawn(path: PathBuf) -> Self {
        let (sender, receiver) = mpsc::channel::<T>();
        let handle = thread::spawn(move || {
            let mut written = 0;
            for record in receiver {
                append_jsonl(&path, &record)?;
                written += 1;
            }
            Ok(written)
        });
        Self {
            sender: Some(sender),
            handle: Some(handle),
        }
    }

    pub fn sender(&self) -> mpsc::Sender<T> {
        self.sender.clone().expect("writer open")
    }

    /// Closes the channel and returns the number of records written.
    pub fn finish(mut self) -> Result<usize> {
        self.sender.take();
        self.handle.take().expect("writer open").join().expect("writer thread panicked")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writer_appends_from_many_senders() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let w = JsonlWriter::<u32>::spawn(path.clone());
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let s = w.sender();
                thread::spawn(move || (0..25).for_each(|i| s.send(t * 100 + i).unwrap()))
            })
            .collect();
        handles.into_iter().for_each(|h| h.join().unwrap());
        assert_eq!(w.finish().unwrap(), 100);
        let mut back: Vec<u32> = read_jsonl(&path).unwrap();
        back.sort();
        assert_eq!(back.len(), 100);
        back.dedup();
        assert_eq!(back.len(), 100);
    }
}
