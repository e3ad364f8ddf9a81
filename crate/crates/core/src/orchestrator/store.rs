//! On-disk job store.
//!
//! ```text
//! <root>/jobs/<job_id>/record
//! <root>/jobs/<job_id>/stage_<name>.out
//! <root>/dead_letter/<job_id>
//! <root>/events.log
//! <root>/corrections.log
//! ```
//!
//! Files are replaced atomically (write to a temporary sibling, sync, rename).
//! The two logs are append-only JSON lines, deduplicated by job id.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::job::{CompletionEvent, JobRecord};
use crate::assessment::{CorrectionLog, CorrectionRecord};
use crate::error::{Error, Result};

/// Simulates the process dying right after the `n`-th committed write.
#[derive(Debug)]
struct FaultInjector {
    kill_at: usize,
    fired: AtomicBool,
}

#[derive(Debug)]
pub struct JobStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    log_lock: Mutex<()>,
    commits: AtomicUsize,
    fault: Option<FaultInjector>,
}

impl JobStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in [root.join("jobs"), root.join("dead_letter")] {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(JobStore {
            root,
            locks: Mutex::new(HashMap::new()),
            log_lock: Mutex::new(()),
            commits: AtomicUsize::new(0),
            fault: None,
        })
    }

    /// After the `n`-th committed write (1-based) every store operation that
    /// writes fails with [`Error::Interrupted`], as if the process had died.
    pub fn with_kill_point(mut self, n: usize) -> Self {
        self.fault = Some(FaultInjector {
            kill_at: n,
            fired: AtomicBool::new(false),
        });
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Number of writes committed through this handle.
    pub fn commits(&self) -> usize {
        self.commits.load(Ordering::SeqCst)
    }

    pub fn job_dir(&self, job_id: &str) -> PathBuf {
        self.root.join("jobs").join(job_id)
    }

    pub fn record_path(&self, job_id: &str) -> PathBuf {
        self.job_dir(job_id).join("record")
    }

    pub fn stage_path(&self, job_id: &str, name: &str) -> PathBuf {
        self.job_dir(job_id).join(format!("stage_{name}.out"))
    }

    pub fn dead_letter_path(&self, job_id: &str) -> PathBuf {
        self.root.join("dead_letter").join(job_id)
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.log")
    }

    pub fn corrections_path(&self) -> PathBuf {
        self.root.join("corrections.log")
    }

    /// The per-job single-writer lock.
    pub fn job_lock(&self, job_id: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .unwrap()
            .entry(job_id.to_string())
            .or_default()
            .clone()
    }

    fn check_alive(&self) -> Result<()> {
        match &self.fault {
            Some(f) if f.fired.load(Ordering::SeqCst) => Err(Error::Interrupted(f.kill_at)),
            _ => Ok(()),
        }
    }

    fn commit(&self) -> Result<()> {
        let n = self.commits.fetch_add(1, Ordering::SeqCst) + 1;
        if let Some(f) = &self.fault {
            if n == f.kill_at {
                f.fired.store(true, Ordering::SeqCst);
                return Err(Error::Interrupted(n));
            }
        }
        Ok(())
    }

    pub fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        self.check_alive()?;
        let dir = path.parent().expect("store paths have a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
        let tmp = dir.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
            f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        self.commit()
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("store values serialize");
        text.push('\n');
        self.write_atomic(path, text.as_bytes())
    }

    pub fn read_json<T: DeserializeOwned>(&self, path: &Path) -> Result<T> {
        let text = crate::error::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn read_optional_json<T: DeserializeOwned>(&self, path: &Path) -> Result<Option<T>> {
        if path.exists() {
            self.read_json(path).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn save_record(&self, record: &JobRecord) -> Result<()> {
        self.write_json(&self.record_path(&record.job_id), record)
    }

    pub fn has_record(&self, job_id: &str) -> bool {
        self.record_path(job_id).exists()
    }

    pub fn load_record(&self, job_id: &str) -> Result<JobRecord> {
        let path = self.record_path(job_id);
        if !path.exists() {
            return Err(Error::JobNotFound(job_id.to_string()));
        }
        self.read_json(&path)
    }

    /// Ids of every job directory holding a record, sorted.
    pub fn job_ids(&self) -> Result<Vec<String>> {
        let dir = self.root.join("jobs");
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if entry.path().join("record").exists() {
                if let Some(name) = entry.file_name().to_str() {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn append_line(&self, path: &Path, line: &str) -> Result<()> {
        self.check_alive()?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        f.write_all(format!("{line}\n").as_bytes())
            .map_err(|e| Error::io(path, e))?;
        f.sync_data().map_err(|e| Error::io(path, e))?;
        self.commit()
    }

    /// Every parseable event, in log order. Torn or corrupt lines are skipped.
    pub fn read_events(&self) -> Result<Vec<CompletionEvent>> {
        let path = self.events_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&path, e)),
        };
        Ok(text
            .lines()
            .filter_map(|l| serde_json::from_str(l).ok())
            .collect())
    }

    /// Appends `event` unless one for the same job is already logged. Returns
    /// whether a line was written.
    pub fn append_event(&self, event: &CompletionEvent) -> Result<bool> {
        let _guard = self.log_lock.lock().unwrap();
        if self.read_events()?.iter().any(|e| e.job_id == event.job_id) {
            return Ok(false);
        }
        let line = serde_json::to_string(event).expect("events serialize");
        self.append_line(&self.events_path(), &line)?;
        Ok(true)
    }

    pub fn corrections(&self) -> CorrectionLog {
        CorrectionLog::new(self.corrections_path())
    }

    /// Appends `record` unless one for the same job is already logged.
    pub fn append_correction(&self, record: &CorrectionRecord) -> Result<bool> {
        let _guard = self.log_lock.lock().unwrap();
        if self
            .corrections()
            .read_all()?
            .iter()
            .any(|r| r.job_id == record.job_id)
        {
            return Ok(false);
        }
        let line = serde_json::to_string(record).expect("records serialize");
        self.append_line(&self.corrections_path(), &line)?;
        Ok(true)
    }
}
