use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tokio::sync::OnceCell;
use ulfsim::kspace::{synthesize_ulf, DegradationParams};
use ulfsim::metrics::SpectrumReport;
use ulfsim::Volume;

use crate::cache::{Computed, ResultCache};
use crate::error::{ApiError, ApiResult};
use crate::presets::PresetStore;

/// Deterministic id of a degradation: SHA-256 over the volume id and the
/// canonical JSON of every parameter field, seed included.
pub fn result_id(volume_id: &str, params: &DegradationParams) -> String {
    let mut h = Sha256::new();
    h.update(volume_id.as_bytes());
    h.update([0u8]);
    h.update(serde_json::to_vec(params).expect("parameters serialize"));
    hex::encode(h.finalize())
}

#[derive(Clone, Debug)]
pub struct Recipe {
    pub volume_id: String,
    pub params: DegradationParams,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reference {
    /// `volume:<id>` or `result:<id>`.
    pub source: String,
    pub bins: usize,
    pub report: SpectrumReport,
}

type Slot = Arc<OnceCell<Arc<Computed>>>;

pub struct AppState {
    pub session_id: String,
    volumes: RwLock<HashMap<String, Arc<Volume>>>,
    next_volume: AtomicU64,
    recipes: RwLock<HashMap<String, Recipe>>,
    cache: Mutex<ResultCache>,
    inflight: Mutex<HashMap<String, Slot>>,
    computations: AtomicU64,
    reference: RwLock<Option<Reference>>,
    pub presets: Mutex<PresetStore>,
}

impl AppState {
    pub fn new(cache_bytes: usize, presets: PresetStore) -> Self {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64);
        Self {
            session_id: format!(
                "{:016x}",
                ulfsim::rng::mix64(nanos ^ std::process::id() as u64)
            ),
            volumes: RwLock::default(),
            next_volume: AtomicU64::new(1),
            recipes: RwLock::default(),
            cache: Mutex::new(ResultCache::new(cache_bytes)),
            inflight: Mutex::default(),
            computations: AtomicU64::new(0),
            reference: RwLock::default(),
            presets: Mutex::new(presets),
        }
    }

    /// Registers a volume under a fresh id; identical uploads get distinct ids.
    pub fn add_volume(&self, v: Volume) -> String {
        let id = format!("v{}", self.next_volume.fetch_add(1, Ordering::Relaxed));
        self.volumes
            .write()
            .unwrap()
            .insert(id.clone(), Arc::new(v));
        id
    }

    pub fn volume(&self, id: &str) -> ApiResult<Arc<Volume>> {
        self.volumes
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown volume {id:?}")))
    }

    pub fn volume_ids(&self) -> Vec<(String, Arc<Volume>)> {
        let mut v: Vec<_> = self
            .volumes
            .read()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        v.sort_by_key(|(k, _)| k[1..].parse::<u64>().unwrap_or(u64::MAX));
        v
    }

    /// Number of degradations actually computed (cache misses).
    pub fn computations(&self) -> u64 {
        self.computations.load(Ordering::Relaxed)
    }

    pub fn cache_stats(&self) -> (usize, usize, usize) {
        let c = self.cache.lock().unwrap();
        (c.len(), c.used(), c.budget())
    }

    pub fn recipe(&self, result_id: &str) -> ApiResult<Recipe> {
        self.recipes
            .read()
            .unwrap()
            .get(result_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown result {result_id:?}")))
    }

    /// Returns the result for `(volume_id, params)` and whether this call
    /// found it already computed. Concurrent calls for one key share a
    /// single computation.
    pub async fn degrade(
        &self,
        volume_id: &str,
        params: DegradationParams,
    ) -> ApiResult<(String, Arc<Computed>, bool)> {
        let volume = self.volume(volume_id)?;
        let id = result_id(volume_id, &params);
        if let Some(hit) = self.cache.lock().unwrap().get(&id) {
            return Ok((id, hit, true));
        }
        let slot = self
            .inflight
            .lock()
            .unwrap()
            .entry(id.clone())
            .or_default()
            .clone();
        let ran = AtomicBool::new(false);
        let outcome = slot
            .get_or_try_init(|| async {
                ran.store(true, Ordering::Relaxed);
                self.computations.fetch_add(1, Ordering::Relaxed);
                let p = params.clone();
                let (v, report) = tokio::task::spawn_blocking(move || synthesize_ulf(&volume, &p))
                    .await
                    .map_err(|e| ApiError::internal(e.to_string()))??;
                Ok::<_, ApiError>(Arc::new(Computed { volume: v, report }))
            })
            .await
            .cloned();
        let ran = ran.load(Ordering::Relaxed);
        if ran {
            if let Ok(done) = &outcome {
                self.recipes.write().unwrap().insert(
                    id.clone(),
                    Recipe {
                        volume_id: volume_id.to_owned(),
                        params,
                    },
                );
                self.cache.lock().unwrap().insert(id.clone(), done.clone());
            }
            self.inflight.lock().unwrap().remove(&id);
        }
        outcome.map(|c| (id, c, !ran))
    }

    /// Result by id, recomputed from its recipe if it was evicted.
    pub async fn result(&self, result_id: &str) -> ApiResult<Arc<Computed>> {
        if let Some(hit) = self.cache.lock().unwrap().get(result_id) {
            return Ok(hit);
        }
        let r = self.recipe(result_id)?;
        Ok(self.degrade(&r.volume_id, r.params).await?.1)
    }

    pub fn set_reference(&self, r: Reference) {
        *self.reference.write().unwrap() = Some(r);
    }

    pub fn reference(&self) -> ApiResult<Reference> {
        self.reference.read().unwrap().clone().ok_or_else(|| {
            ApiError::conflict("no reference spectrum set; POST /reference-spectrum first")
        })
    }
}
