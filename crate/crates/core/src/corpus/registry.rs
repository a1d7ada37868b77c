use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use super::{CorpusError, Recording};

/// In-memory recording registry keyed by id.
///
/// Reads may run concurrently; inserts take the write lock.
#[derive(Debug, Default)]
pub struct Registry {
    inner: RwLock<BTreeMap<String, Arc<Recording>>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, rec: Recording) -> Result<Arc<Recording>, CorpusError> {
        let mut map = self.inner.write().expect("registry lock poisoned");
        if map.contains_key(rec.id()) {
            return Err(CorpusError::DuplicateId(rec.id().to_string()));
        }
        let rec = Arc::new(rec);
        map.insert(rec.id().to_string(), Arc::clone(&rec));
        Ok(rec)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Recording>> {
        self.inner.read().expect("registry lock poisoned").get(id).cloned()
    }

    /// Ids in sorted order.
    pub fn ids(&self) -> Vec<String> {
        self.inner
            .read()
            .expect("registry lock poisoned")
            .keys()
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("registry lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn recordings(&self) -> Vec<Arc<Recording>> {
        self.inner
            .read()
            .expect("registry lock poisoned")
            .values()
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    #[test]
    fn duplicate_ids_are_rejected() {
        let reg = Registry::new();
        reg.insert(Recording::new("a", vec![0.0], 4000, Source::Field).unwrap())
            .unwrap();
        let dup = reg.insert(Recording::new("a", vec![0.5], 4000, Source::Field).unwrap());
        assert!(matches!(dup, Err(CorpusError::DuplicateId(id)) if id == "a"));
        assert_eq!(reg.len(), 1);
        assert_eq!(reg.get("a").unwrap().samples(), &[0.0]);
    }

    #[test]
    fn concurrent_inserts_keep_ids_unique() {
        let reg = Arc::new(Registry::new());
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let reg = Arc::clone(&reg);
                std::thread::spawn(move || {
                    let mut ok = 0;
                    for i in 0..50 {
                        let id = format!("r{}", (i + t * 25) % 100);
                        let rec = Recording::new(id, vec![0.0], 4000, Source::Field).unwrap();
                        if reg.insert(rec).is_ok() {
                            ok += 1;
                        }
                    }
                    ok
                })
            })
            .collect();
        let total: usize = handles.into_iter().map(|h| h.join().unwrap()).sum();
        assert_eq!(total, reg.len());
        assert_eq!(reg.len(), 100);
    }
}
