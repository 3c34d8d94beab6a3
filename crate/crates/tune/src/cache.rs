use std::sync::Arc;

use indexmap::IndexMap;
use ulfsim::kspace::DegradationReport;
use ulfsim::Volume;

/// A finished degradation.
#[derive(Debug)]
pub struct Computed {
    pub volume: Volume,
    pub report: DegradationReport,
}

impl Computed {
    pub fn bytes(&self) -> usize {
        self.volume.len() * std::mem::size_of::<f64>()
    }
}

/// Least-recently-used map bounded by the summed size of its volumes.
/// Entries are shared, so an evicted result stays alive for any response
/// still holding it.
#[derive(Debug)]
pub struct ResultCache {
    budget: usize,
    used: usize,
    entries: IndexMap<String, Arc<Computed>>,
}

impl ResultCache {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            used: 0,
            entries: IndexMap::new(),
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    /// Looks up and marks as most recently used.
    pub fn get(&mut self, id: &str) -> Option<Arc<Computed>> {
        let (k, v) = self.entries.shift_remove_entry(id)?;
        self.entries.insert(k, v.clone());
        Some(v)
    }

    /// Inserts, evicting least recently used entries until the budget holds.
    /// A result larger than the whole budget is not stored.
    pub fn insert(&mut self, id: String, value: Arc<Computed>) {
        let size = value.bytes();
        if size > self.budget {
            return;
        }
        if let Some(old) = self.entries.shift_remove(&id) {
            self.used -= old.bytes();
        }
        while self.used + size > self.budget {
            let (_, evicted) = self
                .entries
                .shift_remove_index(0)
                .expect("used > 0 implies entries");
            self.used -= evicted.bytes();
        }
        self.used += size;
        self.entries.insert(id, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ulfsim::kspace::DegradationParams;

    fn entry(n: usize) -> Arc<Computed> {
        Arc::new(Computed {
            volume: Volume::zeros([n, 1, 1], [1.0; 3]).unwrap(),
            report: DegradationReport {
                params: DegradationParams::default(),
                achieved_fraction: 1.0,
                signal_power: 0.0,
                noise_sigma_k: 0.0,
                band_energy_pre: vec![],
                band_energy_post: vec![],
            },
        })
    }

    #[test]
    fn evicts_least_recently_used() {
        let mut c = ResultCache::new(8 * 10);
        c.insert("a".into(), entry(4));
        c.insert("b".into(), entry(4));
        assert!(c.get("a").is_some());
        c.insert("c".into(), entry(4));
        assert!(c.contains("a") && c.contains("c") && !c.contains("b"));
        assert!(c.used() <= c.budget());
    }

    #[test]
    fn oversized_entries_are_not_stored() {
        let mut c = ResultCache::new(8 * 3);
        c.insert("big".into(), entry(4));
        assert!(c.is_empty());
        assert_eq!(c.used(), 0);
    }

    #[test]
    fn held_entries_survive_eviction() {
        let mut c = ResultCache::new(8 * 4);
        c.insert("a".into(), entry(4));
        let held = c.get("a").unwrap();
        c.insert("b".into(), entry(4));
        assert!(!c.contains("a"));
        assert_eq!(held.volume.len(), 4);
    }
}
