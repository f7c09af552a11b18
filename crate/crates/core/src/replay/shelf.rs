use std::collections::BTreeMap;
use std::sync::Arc;

use super::{open_session, ReplayError, ReplayMode, ReplaySession};
use crate::pod::MemoryPod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShelfId(pub u64);

/// Several independently placed replays open side by side. The same pod may
/// be shelved more than once; each entry has its own cursor and placement.
#[derive(Debug, Default)]
pub struct PodShelf {
    next: u64,
    sessions: BTreeMap<ShelfId, ReplaySession>,
}

impl PodShelf {
    pub fn new() -> Self {
        PodShelf::default()
    }

    pub fn add(&mut self, pod: impl Into<Arc<MemoryPod>>, mode: ReplayMode) -> Result<ShelfId, ReplayError> {
        let session = open_session(pod, mode)?;
        let id = ShelfId(self.next);
        self.next += 1;
        self.sessions.insert(id, session);
        Ok(id)
    }

    pub fn remove(&mut self, id: ShelfId) -> Option<ReplaySession> {
        self.sessions.remove(&id)
    }

    pub fn get(&self, id: ShelfId) -> Option<&ReplaySession> {
        self.sessions.get(&id)
    }

    pub fn get_mut(&mut self, id: ShelfId) -> Option<&mut ReplaySession> {
        self.sessions.get_mut(&id)
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ShelfId, &ReplaySession)> {
        self.sessions.iter().map(|(id, s)| (*id, s))
    }
}
