//! Online prediction service: request/response model, per-IP caching with
//! TTL expiry, background cache warming, and the HTTP surface.

pub mod http;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LocatedEndpoint, Measurement, MeasurementOrigin, RouterIp};
use crate::error::{Error, Result};
use crate::geo::LatLon;
use crate::pipeline::{self, HopOutcome, HopPrediction, Model, StagePrediction};

/// An immutable trained engine: the corpus view and model snapshot that
/// predictions read. Swapped atomically when a new snapshot is published.
#[derive(Debug)]
pub struct Engine {
    pub corpus: Corpus,
    pub model: Model,
}

impl Engine {
    /// Corpus-only staged prediction for one router.
    pub fn predict_ip(&self, ip: RouterIp) -> Result<StagePrediction> {
        pipeline::predict_router(ip, &self.model, &self.corpus, &self.corpus.measurements)
    }
}

/// A prediction request carries exactly one of a raw traceroute or a
/// single IP, plus optional client-side RTT measurements.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PredictionRequest {
    #[serde(default)]
    pub traceroute: Option<String>,
    #[serde(default)]
    pub ip: Option<String>,
    #[serde(default)]
    pub measurements: Vec<MeasurementInput>,
    #[serde(default)]
    pub request_id: Option<String>,
}

/// Client-supplied measurement, mirroring the measurement CSV columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementInput {
    pub src_ip: String,
    pub src_lat: f64,
    pub src_lon: f64,
    pub target_ip: String,
    pub min_rtt_ms: f64,
}

impl MeasurementInput {
    fn to_measurement(&self) -> Result<Measurement> {
        let location = LatLon::new(self.src_lat, self.src_lon);
        if !location.is_valid() || self.min_rtt_ms < 0.0 || !self.min_rtt_ms.is_finite() {
            return Err(Error::Invalid("bad measurement input".into()));
        }
        Ok(Measurement {
            source: LocatedEndpoint {
                ip: self.src_ip.parse()?,
                location,
            },
            target: self.target_ip.parse()?,
            min_rtt_ms: self.min_rtt_ms,
            origin: MeasurementOrigin::Direct,
        })
    }
}

/// Surface status for one hop. The public response never lists more than
/// two countries; wider sets are marked ambiguous and the full detail
/// stays available at the detail endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopStatus {
    Ok,
    Ambiguous,
    Conflict,
    Skipped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopResponse {
    pub hop_index: usize,
    pub ip: String,
    pub status: HopStatus,
    /// Present only when the final set has at most two countries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub countries: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub request_id: String,
    pub hops: Vec<HopResponse>,
    pub detail_url: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetailResponse {
    pub request_id: String,
    pub hops: Vec<HopPrediction>,
}

fn hop_response(hop: &HopPrediction) -> HopResponse {
    match &hop.outcome {
        HopOutcome::Skipped { .. } => HopResponse {
            hop_index: hop.hop_index,
            ip: hop.ip.to_string(),
            status: HopStatus::Skipped,
            countries: None,
        },
        HopOutcome::Predicted { prediction } => {
            let final_set: Vec<String> = prediction
                .final_set
                .iter()
                .map(|c| c.as_str().to_string())
                .collect();
            let status = match final_set.len() {
                0 => HopStatus::Conflict,
                1 | 2 => HopStatus::Ok,
                _ => HopStatus::Ambiguous,
            };
            HopResponse {
                hop_index: hop.hop_index,
                ip: hop.ip.to_string(),
                status,
                countries: (final_set.len() <= 2 && !final_set.is_empty()).then_some(final_set),
            }
        }
    }
}

struct CacheEntry {
    prediction: StagePrediction,
    expires_at: Instant,
}

/// Concurrent per-IP prediction cache with TTL expiry.
pub struct PredictionCache {
    entries: RwLock<HashMap<RouterIp, CacheEntry>>,
    ttl: Duration,
}

impl PredictionCache {
    pub fn new(ttl: Duration) -> Self {
        PredictionCache {
            entries: RwLock::new(HashMap::new()),
            ttl,
        }
    }

    pub fn get(&self, ip: RouterIp) -> Option<StagePrediction> {
        let entries = self.entries.read().expect("cache lock");
        entries.get(&ip).and_then(|e| {
            (e.expires_at > Instant::now()).then(|| e.prediction.clone())
        })
    }

    pub fn insert(&self, ip: RouterIp, prediction: StagePrediction) {
        let mut entries = self.entries.write().expect("cache lock");
        entries.insert(
            ip,
            CacheEntry {
                prediction,
                expires_at: Instant::now() + self.ttl,
            },
        );
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bounded store of full staged predictions, addressable by request id.
struct DetailStore {
    records: RwLock<(HashMap<String, DetailResponse>, VecDeque<String>)>,
    capacity: usize,
}

impl DetailStore {
    fn new(capacity: usize) -> Self {
        DetailStore {
            records: RwLock::new((HashMap::new(), VecDeque::new())),
            capacity: capacity.max(1),
        }
    }

    fn insert(&self, detail: DetailResponse) {
        let mut guard = self.records.write().expect("detail lock");
        let (map, order) = &mut *guard;
        let id = detail.request_id.clone();
        if map.insert(id.clone(), detail).is_none() {
            order.push_back(id);
        }
        while map.len() > self.capacity {
            if let Some(oldest) = order.pop_front() {
                map.remove(&oldest);
            } else {
                break;
            }
        }
    }

    fn get(&self, request_id: &str) -> Option<DetailResponse> {
        self.records
            .read()
            .expect("detail lock")
            .0
            .get(request_id)
            .cloned()
    }
}

pub struct ServiceConfig {
    pub cache_ttl: Duration,
    pub detail_capacity: usize,
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            cache_ttl: Duration::from_secs(24 * 60 * 60),
            detail_capacity: 10_000,
            workers: 8,
        }
    }
}

/// Shared service state: the swappable engine, the prediction cache, the
/// detail store, and the cache-warming job queue.
pub struct ServiceState {
    engine: RwLock<Option<Arc<Engine>>>,
    cache: PredictionCache,
    details: DetailStore,
    request_counter: AtomicU64,
    computes: AtomicU64,
    cache_hits: AtomicU64,
    warm_jobs: mpsc::Sender<RouterIp>,
    pub workers: usize,
}

impl ServiceState {
    pub fn new(engine: Option<Arc<Engine>>, config: ServiceConfig) -> Arc<Self> {
        let (tx, rx) = mpsc::channel::<RouterIp>();
        let state = Arc::new(ServiceState {
            engine: RwLock::new(engine),
            cache: PredictionCache::new(config.cache_ttl),
            details: DetailStore::new(config.detail_capacity),
            request_counter: AtomicU64::new(0),
            computes: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            warm_jobs: tx,
            workers: config.workers.max(1),
        });

        // background warmer: computes corpus-only predictions for cold IPs
        let warm_state = Arc::clone(&state);
        std::thread::spawn(move || {
            while let Ok(ip) = rx.recv() {
                if warm_state.cache.get(ip).is_some() {
                    continue;
                }
                let engine = warm_state.current_engine();
                if let Some(engine) = engine {
                    if let Ok(prediction) = engine.predict_ip(ip) {
                        warm_state.cache.insert(ip, prediction);
                    }
                }
            }
        });
        state
    }

    pub fn current_engine(&self) -> Option<Arc<Engine>> {
        self.engine.read().expect("engine lock").clone()
    }

    /// Atomically publish a new model snapshot.
    pub fn swap_engine(&self, engine: Arc<Engine>) {
        *self.engine.write().expect("engine lock") = Some(engine);
    }

    pub fn compute_count(&self) -> u64 {
        self.computes.load(Ordering::Relaxed)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    pub fn cache_hit_count(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    fn next_request_id(&self) -> String {
        let n = self.request_counter.fetch_add(1, Ordering::Relaxed);
        format!("r-{n:08}")
    }

    /// Corpus-only prediction with cache: warm entries answer directly.
    fn cached_predict(&self, engine: &Engine, ip: RouterIp) -> Result<StagePrediction> {
        if let Some(hit) = self.cache.get(ip) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.computes.fetch_add(1, Ordering::Relaxed);
        let prediction = engine.predict_ip(ip)?;
        self.cache.insert(ip, prediction.clone());
        Ok(prediction)
    }

    /// Handle one prediction request end to end.
    pub fn predict(&self, request: &PredictionRequest) -> Result<PredictionResponse> {
        let engine = self
            .current_engine()
            .ok_or_else(|| Error::Invalid("no model loaded".into()))?;

        match (&request.traceroute, &request.ip) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Invalid(
                    "exactly one of `traceroute` or `ip` must be present".into(),
                ));
            }
            _ => {}
        }
        let client_measurements: Vec<Measurement> = request
            .measurements
            .iter()
            .map(|m| m.to_measurement())
            .collect::<Result<_>>()?;

        let request_id = request
            .request_id
            .clone()
            .unwrap_or_else(|| self.next_request_id());

        let hops: Vec<HopPrediction> = if let Some(text) = &request.traceroute {
            if client_measurements.is_empty() {
                // cacheable path: corpus measurements only
                let path = crate::corpus::parse_traceroute(text).map_err(|e| match e {
                    Error::EmptyPath => Error::EmptyPath,
                    other => Error::UnparseablePath(other.to_string()),
                })?;
                let mut out = Vec::with_capacity(path.hops.len());
                for hop in &path.hops {
                    if hop.ip.is_private_or_reserved() {
                        out.push(HopPrediction {
                            hop_index: hop.hop_index,
                            ip: hop.ip,
                            min_rtt_ms: hop.min_rtt_ms,
                            outcome: HopOutcome::Skipped {
                                reason: "private or reserved address".to_string(),
                            },
                        });
                        continue;
                    }
                    out.push(HopPrediction {
                        hop_index: hop.hop_index,
                        ip: hop.ip,
                        min_rtt_ms: hop.min_rtt_ms,
                        outcome: HopOutcome::Predicted {
                            prediction: self.cached_predict(&engine, hop.ip)?,
                        },
                    });
                }
                out
            } else {
                // request-specific constraints: compute fresh, then queue
                // corpus-only warming for the touched IPs
                self.computes.fetch_add(1, Ordering::Relaxed);
                let hops = pipeline::predict_raw(
                    text,
                    &engine.model,
                    &engine.corpus,
                    &client_measurements,
                )?;
                for hop in &hops {
                    if self.cache.get(hop.ip).is_none() {
                        let _ = self.warm_jobs.send(hop.ip);
                    }
                }
                hops
            }
        } else {
            let ip: RouterIp = request.ip.as_deref().unwrap().parse()?;
            if ip.is_private_or_reserved() {
                vec![HopPrediction {
                    hop_index: 1,
                    ip,
                    min_rtt_ms: 0.0,
                    outcome: HopOutcome::Skipped {
                        reason: "private or reserved address".to_string(),
                    },
                }]
            } else if client_measurements.is_empty() {
                vec![HopPrediction {
                    hop_index: 1,
                    ip,
                    min_rtt_ms: 0.0,
                    outcome: HopOutcome::Predicted {
                        prediction: self.cached_predict(&engine, ip)?,
                    },
                }]
            } else {
                self.computes.fetch_add(1, Ordering::Relaxed);
                let mut merged = engine.corpus.measurements.clone();
                for m in &client_measurements {
                    merged.insert(*m);
                }
                if self.cache.get(ip).is_none() {
                    let _ = self.warm_jobs.send(ip);
                }
                vec![HopPrediction {
                    hop_index: 1,
                    ip,
                    min_rtt_ms: 0.0,
                    outcome: HopOutcome::Predicted {
                        prediction: pipeline::predict_router(
                            ip,
                            &engine.model,
                            &engine.corpus,
                            &merged,
                        )?,
                    },
                }]
            }
        };

        self.details.insert(DetailResponse {
            request_id: request_id.clone(),
            hops: hops.clone(),
        });

        Ok(PredictionResponse {
            request_id: request_id.clone(),
            hops: hops.iter().map(hop_response).collect(),
            detail_url: format!("/v1/predict/detail/{request_id}"),
        })
    }

    pub fn detail(&self, request_id: &str) -> Option<DetailResponse> {
        self.details.get(request_id)
    }

    pub fn health(&self) -> serde_json::Value {
        serde_json::json!({
            "status": "ok",
            "model_loaded": self.current_engine().is_some(),
            "cache_entries": self.cache.len(),
        })
    }
}

/// The union of distinct countries across a detail response; used by
/// clients that want the full resolved set regardless of surface limits.
pub fn response_country_union(detail: &DetailResponse) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for hop in &detail.hops {
        if let HopOutcome::Predicted { prediction } = &hop.outcome {
            out.extend(prediction.final_set.iter().map(|c| c.as_str().to_string()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_expires_entries() {
        let cache = PredictionCache::new(Duration::from_millis(30));
        let ip: RouterIp = "9.9.9.9".parse().unwrap();
        let prediction = StagePrediction {
            ip,
            ensemble_set: BTreeSet::new(),
            sol_set: None,
            intersected_set: BTreeSet::new(),
            final_set: BTreeSet::new(),
            provenance: crate::pipeline::StageProvenance::EnsembleOnly,
        };
        cache.insert(ip, prediction);
        assert!(cache.get(ip).is_some());
        std::thread::sleep(Duration::from_millis(50));
        assert!(cache.get(ip).is_none(), "entry should have expired");
    }

    #[test]
    fn detail_store_evicts_oldest() {
        let store = DetailStore::new(2);
        for i in 0..3 {
            store.insert(DetailResponse {
                request_id: format!("r{i}"),
                hops: Vec::new(),
            });
        }
        assert!(store.get("r0").is_none());
        assert!(store.get("r1").is_some());
        assert!(store.get("r2").is_some());
    }

    #[test]
    fn wide_final_sets_are_marked_ambiguous_without_country_list() {
        let cc = |s: &str| crate::corpus::CountryCode::parse(s).unwrap();
        let ip: RouterIp = "9.9.9.9".parse().unwrap();
        let wide: BTreeSet<_> = [cc("US"), cc("DE"), cc("FR")].into_iter().collect();
        let hop = HopPrediction {
            hop_index: 3,
            ip,
            min_rtt_ms: 10.0,
            outcome: HopOutcome::Predicted {
                prediction: StagePrediction {
                    ip,
                    ensemble_set: wide.clone(),
                    sol_set: None,
                    intersected_set: wide.clone(),
                    final_set: wide,
                    provenance: crate::pipeline::StageProvenance::EnsembleOnly,
                },
            },
        };
        let response = hop_response(&hop);
        assert_eq!(response.status, HopStatus::Ambiguous);
        assert!(response.countries.is_none(), "wide sets stay off the surface");

        // conflict: empty final set
        let empty = HopPrediction {
            hop_index: 4,
            ip,
            min_rtt_ms: 10.0,
            outcome: HopOutcome::Predicted {
                prediction: StagePrediction {
                    ip,
                    ensemble_set: BTreeSet::from([cc("US")]),
                    sol_set: Some(BTreeSet::from([cc("FR"), cc("DE")])),
                    intersected_set: BTreeSet::new(),
                    final_set: BTreeSet::new(),
                    provenance: crate::pipeline::StageProvenance::Conflict,
                },
            },
        };
        let response = hop_response(&empty);
        assert_eq!(response.status, HopStatus::Conflict);
        assert!(response.countries.is_none());

        // two countries stay on the surface
        let two = HopPrediction {
            hop_index: 5,
            ip,
            min_rtt_ms: 10.0,
            outcome: HopOutcome::Predicted {
                prediction: StagePrediction {
                    ip,
                    ensemble_set: BTreeSet::from([cc("US"), cc("CA")]),
                    sol_set: None,
                    intersected_set: BTreeSet::from([cc("US"), cc("CA")]),
                    final_set: BTreeSet::from([cc("US"), cc("CA")]),
                    provenance: crate::pipeline::StageProvenance::EnsembleOnly,
                },
            },
        };
        let response = hop_response(&two);
        assert_eq!(response.status, HopStatus::Ok);
        assert_eq!(response.countries, Some(vec!["CA".into(), "US".into()]));
    }

    #[test]
    fn request_validation_requires_exactly_one_input() {
        let state = ServiceState::new(None, ServiceConfig::default());
        let both = PredictionRequest {
            traceroute: Some("x".into()),
            ip: Some("1.2.3.4".into()),
            ..Default::default()
        };
        // no engine loaded reports first; validation is still covered via
        // the HTTP layer tests
        assert!(state.predict(&both).is_err());
    }
}
