//! Registry of live sessions. Each session sits behind its own mutex, so
//! calls on one session are serialized while distinct sessions proceed
//! independently.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use prefq_core::gridworld::{maps, Pos, SolverParams};
use prefq_core::harness::GridEnv;
use serde::{Deserialize, Serialize};

use crate::session::{Session, SessionConfig, SessionError};
use crate::wire::WireEvent;

/// A shipped map as listed by the read-only maps endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapInfo {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub goals: Vec<Pos>,
    /// Canonical text form, start marker included.
    pub text: String,
}

pub fn shipped_maps() -> Vec<MapInfo> {
    maps::NAMES
        .iter()
        .map(|&name| {
            let map = maps::load(name).expect("shipped map");
            MapInfo {
                name: name.to_string(),
                width: map.width(),
                height: map.height(),
                goals: map.valid_goals(),
                text: map.to_text(),
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ManagerOptions {
    /// Map used when a create request names none.
    pub default_map: String,
    pub params: SolverParams,
    /// Where solved Q tables are cached; no caching when absent.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ManagerOptions {
    fn default() -> Self {
        Self {
            default_map: "empty".to_string(),
            params: SolverParams::default(),
            cache_dir: None,
        }
    }
}

pub struct SessionManager {
    options: ManagerOptions,
    worlds: Mutex<HashMap<String, Arc<GridEnv>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl SessionManager {
    pub fn new(options: ManagerOptions) -> Result<Self, SessionError> {
        if maps::load(&options.default_map).is_none() {
            return Err(SessionError::Config(format!(
                "unknown default map {:?}",
                options.default_map
            )));
        }
        options.params.validate().map_err(SessionError::Config)?;
        Ok(Self {
            options,
            worlds: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn options(&self) -> &ManagerOptions {
        &self.options
    }

    /// Solved world for a shipped map, solving it on first use.
    pub fn world(&self, name: &str) -> Result<Arc<GridEnv>, SessionError> {
        if let Some(w) = lock(&self.worlds).get(name) {
            return Ok(Arc::clone(w));
        }
        let map = maps::load(name)
            .ok_or_else(|| SessionError::Config(format!("unknown map {name:?}")))?;
        let env = GridEnv::cached(
            name,
            map,
            self.options.params,
            self.options.cache_dir.as_deref(),
        )?;
        let mut worlds = lock(&self.worlds);
        Ok(Arc::clone(
            worlds.entry(name.to_string()).or_insert_with(|| Arc::new(env)),
        ))
    }

    /// Opens a session; returns its id and initial events.
    pub fn create(&self, mut config: SessionConfig) -> Result<(String, Vec<WireEvent>), SessionError> {
        let name = config
            .map
            .get_or_insert_with(|| self.options.default_map.clone())
            .clone();
        let world = self.world(&name)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let (session, events) = Session::new(id.clone(), config, &world)?;
        lock(&self.sessions).insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((id, events))
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    /// Runs `f` with exclusive access to one session.
    pub fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> T,
    ) -> Result<T, SessionError> {
        let session = self.get(id)?;
        let mut guard = lock(&session);
        Ok(f(&mut guard))
    }

    pub fn advance(&self, id: &str) -> Result<Vec<WireEvent>, SessionError> {
        self.with_session(id, Session::advance)?
    }

    pub fn run(&self, id: &str) -> Result<Vec<WireEvent>, SessionError> {
        self.with_session(id, Session::run)?
    }

    pub fn submit(&self, id: &str, label: &str) -> Result<Vec<WireEvent>, SessionError> {
        self.with_session(id, |s| s.submit_label(label))?
    }

    pub fn close(&self, id: &str) -> bool {
        lock(&self.sessions).remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        lock(&self.sessions).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
