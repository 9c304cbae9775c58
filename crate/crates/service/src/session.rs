//! In-memory planner sessions with idle expiry.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use ragam_core::corpus::RagamId;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone)]
pub struct PlannerSession {
    pub session_id: String,
    pub prefix: Vec<RagamId>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub updated_at: u64,
    pub k_default: usize,
    last_touched: Instant,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl PlannerSession {
    fn new(session_id: String) -> Self {
        let now = unix_now();
        Self {
            session_id,
            prefix: Vec::new(),
            created_at: now,
            updated_at: now,
            k_default: DEFAULT_K,
            last_touched: Instant::now(),
        }
    }

    /// Marks a mutation.
    pub fn touch(&mut self) {
        self.updated_at = unix_now();
        self.last_touched = Instant::now();
    }
}

pub type SessionHandle = Arc<Mutex<PlannerSession>>;

/// Registry of live sessions. Lookups share a read lock; each session has its
/// own mutex so writers to one session serialize without blocking others.
#[derive(Debug)]
pub struct SessionStore {
    ttl: Duration,
    sessions: RwLock<HashMap<String, SessionHandle>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            ttl,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn create(&self) -> String {
        self.sweep();
        let id = uuid::Uuid::new_v4().simple().to_string();
        let handle = Arc::new(Mutex::new(PlannerSession::new(id.clone())));
        self.sessions.write().unwrap().insert(id.clone(), handle);
        id
    }

    fn expired(&self, session: &PlannerSession, now: Instant) -> bool {
        now.duration_since(session.last_touched) >= self.ttl
    }

    /// Live session by id. An expired session is removed and reported missing.
    /// Looking a session up counts as activity.
    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        let handle = self.sessions.read().unwrap().get(id).cloned()?;
        let now = Instant::now();
        {
            let mut s = handle.lock().unwrap();
            if !self.expired(&s, now) {
                s.last_touched = now;
                drop(s);
                return Some(handle);
            }
        }
        self.sessions.write().unwrap().remove(id);
        None
    }

    /// Drops every expired session; returns how many were removed.
    pub fn sweep(&self) -> usize {
        let now = Instant::now();
        let mut map = self.sessions.write().unwrap();
        let before = map.len();
        map.retain(|_, h| !self.expired(&h.lock().unwrap(), now));
        before - map.len()
    }

    /// Number of live sessions.
    pub fn len(&self) -> usize {
        self.sweep();
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
