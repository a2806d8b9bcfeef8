//! In-memory session store with idle eviction.

use std::sync::{Arc, Mutex as StdMutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use dashmap::DashMap;
use fcxl_core::pipeline::{SegmenterBackend, SessionState};
use fcxl_core::BinaryMask;
use tokio::sync::Mutex;

/// One live session. Rounds take `state` with `try_lock`, so at most one
/// runs at a time and a second caller is turned away instead of queued.
pub struct SessionEntry {
    pub id: String,
    /// Unix seconds.
    pub created_at: u64,
    pub backend_name: String,
    pub backend: Arc<dyn SegmenterBackend>,
    /// Debug ground truth; enables `iou_vs_gt` in round responses.
    pub gt: Option<BinaryMask>,
    pub state: Arc<Mutex<SessionState>>,
    /// Context token delivered by the background precompute, picked up by
    /// the next round. Kept outside `state` so delivery never contends
    /// with a running round.
    pending_context: StdMutex<Option<String>>,
    last_used: StdMutex<Instant>,
}

impl SessionEntry {
    pub fn new(
        state: SessionState,
        backend_name: String,
        backend: Arc<dyn SegmenterBackend>,
        gt: Option<BinaryMask>,
    ) -> Self {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            id: state.id().to_string(),
            created_at,
            backend_name,
            backend,
            gt,
            state: Arc::new(Mutex::new(state)),
            pending_context: StdMutex::new(None),
            last_used: StdMutex::new(Instant::now()),
        }
    }

    pub fn touch(&self) {
        *self.last_used.lock().unwrap_or_else(|e| e.into_inner()) = Instant::now();
    }

    pub fn deliver_context(&self, token: String) {
        *self.pending_context.lock().unwrap_or_else(|e| e.into_inner()) = Some(token);
    }

    /// Moves a delivered context token into the session, if any.
    pub fn adopt_context(&self, state: &mut SessionState) {
        if let Some(t) = self.pending_context.lock().unwrap_or_else(|e| e.into_inner()).take() {
            state.set_context_token(Some(t));
        }
    }

    pub fn idle_for(&self) -> Duration {
        self.last_used.lock().unwrap_or_else(|e| e.into_inner()).elapsed()
    }
}

#[derive(Default)]
pub struct SessionStore {
    sessions: DashMap<String, Arc<SessionEntry>>,
}

impl SessionStore {
    pub fn insert(&self, entry: SessionEntry) -> Arc<SessionEntry> {
        let entry = Arc::new(entry);
        self.sessions.insert(entry.id.clone(), entry.clone());
        entry
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionEntry>> {
        self.sessions.get(id).map(|e| e.value().clone())
    }

    pub fn remove(&self, id: &str) -> Option<Arc<SessionEntry>> {
        self.sessions.remove(id).map(|(_, e)| e)
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Drops sessions idle longer than `ttl`. Sessions with a round in
    /// flight are kept. Returns the number evicted.
    pub fn evict_idle(&self, ttl: Duration) -> usize {
        let before = self.sessions.len();
        self.sessions
            .retain(|_, e| e.idle_for() < ttl || e.state.try_lock().is_err());
        before - self.sessions.len()
    }
}
