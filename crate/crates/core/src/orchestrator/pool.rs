use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use super::engine::Engine;
use super::job::QueueName;
use crate::error::Result;

#[derive(Default)]
struct PoolState {
    queues: BTreeMap<QueueName, VecDeque<String>>,
    /// Jobs queued or in flight.
    tracked: HashSet<String>,
    shutdown: bool,
    errors: Vec<(String, String)>,
}

struct Shared {
    engine: Arc<Engine>,
    state: Mutex<PoolState>,
    changed: Condvar,
}

/// Per-stage worker threads fed by FIFO queues.
///
/// Each stage queue is served by exactly as many threads as its limit, so no
/// more than that many tasks of a stage run at once. A worker steps a job
/// through its stage, then hands it to the queue of the next stage.
pub struct WorkerPool {
    shared: Arc<Shared>,
    handles: Vec<JoinHandle<()>>,
}

impl WorkerPool {
    pub fn start(engine: Arc<Engine>) -> Self {
        let limits = engine.settings().stage_limits;
        let shared = Arc::new(Shared {
            engine,
            state: Mutex::new(PoolState::default()),
            changed: Condvar::new(),
        });
        let mut handles = Vec::new();
        for q in QueueName::ALL {
            for k in 0..limits.get(q) {
                let shared = shared.clone();
                let handle = std::thread::Builder::new()
                    .name(format!("{}-{k}", q.as_str()))
                    .spawn(move || worker(&shared, q))
                    .expect("spawn worker thread");
                handles.push(handle);
            }
        }
        WorkerPool { shared, handles }
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.shared.engine
    }

    /// Queues `job_id` at its current stage. At-rest and already tracked jobs are ignored.
    pub fn enqueue(&self, job_id: &str) -> Result<()> {
        let rec = self.shared.engine.record(job_id)?;
        let Some(q) = rec.stage.queue() else {
            return Ok(());
        };
        let mut st = self.shared.state.lock().unwrap();
        if st.tracked.insert(job_id.to_string()) {
            st.queues
                .entry(q)
                .or_default()
                .push_back(job_id.to_string());
            self.shared.changed.notify_all();
        }
        Ok(())
    }

    /// Repairs the store and queues every pending job; returns their ids.
    pub fn resume_pending(&self) -> Result<Vec<String>> {
        let ids = self.shared.engine.pending_jobs()?;
        for id in &ids {
            self.enqueue(id)?;
        }
        Ok(ids)
    }

    /// Blocks until no job is queued or in flight.
    pub fn wait_idle(&self) {
        let mut st = self.shared.state.lock().unwrap();
        while !st.tracked.is_empty() && !st.shutdown {
            st = self.shared.changed.wait(st).unwrap();
        }
    }

    /// `(job_id, error)` for jobs whose step failed with a store or I/O error.
    pub fn errors(&self) -> Vec<(String, String)> {
        self.shared.state.lock().unwrap().errors.clone()
    }

    /// Lets in-flight tasks finish, then stops the workers. Queued jobs stay
    /// persisted at their current stage.
    pub fn shutdown(self) {
        {
            let mut st = self.shared.state.lock().unwrap();
            st.shutdown = true;
            self.shared.changed.notify_all();
        }
        for h in self.handles {
            let _ = h.join();
        }
    }
}

fn worker(shared: &Shared, q: QueueName) {
    loop {
        let job_id = {
            let mut st = shared.state.lock().unwrap();
            loop {
                if st.shutdown {
                    return;
                }
                if let Some(id) = st.queues.get_mut(&q).and_then(VecDeque::pop_front) {
                    break id;
                }
                st = shared.changed.wait(st).unwrap();
            }
        };
        let next = loop {
            match shared.engine.step(&job_id) {
                Ok(rec) => match rec.stage.queue() {
                    Some(nq) if nq == q => continue,
                    other => break Ok(other),
                },
                Err(e) => break Err(e),
            }
        };
        let mut st = shared.state.lock().unwrap();
        match next {
            Ok(Some(nq)) => st.queues.entry(nq).or_default().push_back(job_id),
            Ok(None) => {
                st.tracked.remove(&job_id);
            }
            Err(e) => {
                log::error!("job {job_id}: {e}");
                st.tracked.remove(&job_id);
                st.errors.push((job_id, e.to_string()));
            }
        }
        shared.changed.notify_all();
    }
}
