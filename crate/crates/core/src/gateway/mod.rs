//! Chat-completion client shared by the proposal, verification and baseline
//! stages, with retries, a per-endpoint in-flight cap and a content-addressed
//! response cache that doubles as a replay log.

mod cache;
mod transport;

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::sha256_hex;

pub use cache::{cache_key, canonical_json, CacheEntry, ResponseCache};
pub use transport::{completion_body, FnTransport, HttpTransport, NoNetwork, Transport, TransportResponse};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("unknown endpoint {0:?}")]
    UnknownEndpoint(String),

    #[error("endpoint {endpoint}: environment variable {var} is not set")]
    MissingKey { endpoint: String, var: String },

    #[error("endpoint {endpoint}: no recorded response for key {key}")]
    ReplayMiss { endpoint: String, key: String },

    #[error("endpoint {endpoint}: {message} (after {attempts} attempt(s))")]
    Transport {
        endpoint: String,
        message: String,
        attempts: u32,
    },

    #[error("endpoint {endpoint}: HTTP {status}: {body}")]
    Status { endpoint: String, status: u16, body: String },

    #[error("endpoint {endpoint}: malformed response: {message}")]
    Malformed { endpoint: String, message: String },

    #[error("response cache: {0}")]
    Cache(String),
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub endpoint_id: String,
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token; no
    /// authorization header is sent when absent.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl EndpointConfig {
    pub fn new(endpoint_id: &str, base_url: &str, model_name: &str) -> Self {
        EndpointConfig {
            endpoint_id: endpoint_id.into(),
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: None,
            temperature: 0.0,
            timeout: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.endpoint_id.is_empty() {
            return Err("endpoint_id must not be empty".into());
        }
        if !(self.temperature >= 0.0) {
            return Err(format!("endpoint {}: temperature must be >= 0", self.endpoint_id));
        }
        if !(self.timeout > 0.0) {
            return Err(format!("endpoint {}: timeout must be positive", self.endpoint_id));
        }
        if self.max_in_flight == 0 {
            return Err(format!("endpoint {}: max_in_flight must be >= 1", self.endpoint_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePart {
    pub media_type: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub image: Option<ImagePart>,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            text: text.into(),
            image: None,
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            text: text.into(),
            image: None,
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            text: text.into(),
            image: None,
        }
    }

    pub fn with_image(mut self, media_type: &str, bytes: Vec<u8>) -> Self {
        self.image = Some(ImagePart {
            media_type: media_type.into(),
            bytes,
        });
        self
    }

    /// Cache-key form: images are represented by their digest.
    fn keyed(&self) -> Value {
        let mut v = json!({"role": self.role, "text": self.text});
        if let Some(image) = &self.image {
            v["image_sha256"] = json!(sha256_hex(&image.bytes));
            v["media_type"] = json!(image.media_type);
        }
        v
    }

    fn wire(&self) -> Value {
        match &self.image {
            None => json!({"role": self.role, "content": self.text}),
            Some(image) => {
                let data = base64::engine::general_purpose::STANDARD.encode(&image.bytes);
                json!({
                    "role": self.role,
                    "content": [
                        {"type": "text", "text": self.text},
                        {"type": "image_url", "image_url": {"url": format!("data:{};base64,{data}", image.media_type)}}
                    ]
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Serve from the cache, call the endpoint on a miss and record the reply.
    Record,
    /// Serve only from the cache; a miss is an error.
    Replay,
}

struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().expect("semaphore lock");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore lock");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore lock") += 1;
        self.0.freed.notify_one();
    }
}

pub struct Gateway {
    endpoints: BTreeMap<String, (EndpointConfig, Semaphore)>,
    cache: ResponseCache,
    mode: Mode,
    transport: Arc<dyn Transport>,
    backoff: Duration,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("endpoints", &self.endpoints.keys().collect::<Vec<_>>())
            .field("cache", &self.cache.dir())
            .field("mode", &self.mode)
            .finish()
    }
}

impl Gateway {
    pub fn new(
        endpoints: Vec<EndpointConfig>,
        cache: ResponseCache,
        mode: Mode,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for endpoint in endpoints {
            endpoint.validate()?;
            let permits = endpoint.max_in_flight;
            let id = endpoint.endpoint_id.clone();
            if map.insert(id.clone(), (endpoint, Semaphore::new(permits))).is_some() {
                return Err(format!("duplicate endpoint_id {id:?}"));
            }
        }
        Ok(Gateway {
            endpoints: map,
            cache,
            mode,
            transport,
            backoff: Duration::from_millis(500),
        })
    }

    /// Offline gateway over a recorded cache.
    pub fn replay(endpoints: Vec<EndpointConfig>, cache: ResponseCache) -> Result<Self, String> {
        Gateway::new(endpoints, cache, Mode::Replay, Arc::new(NoNetwork))
    }

    /// Base delay of the exponential retry schedule.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn endpoint(&self, endpoint_id: &str) -> Result<&EndpointConfig, GatewayError> {
        self.endpoints
            .get(endpoint_id)
            .map(|(c, _)| c)
            .ok_or_else(|| GatewayError::UnknownEndpoint(endpoint_id.into()))
    }

    /// Canonical request recorded in the cache for these messages.
    pub fn request_record(&self, endpoint_id: &str, messages: &[Message]) -> Result<Value, GatewayError> {
        let config = self.endpoint(endpoint_id)?;
        Ok(json!({
            "endpoint_id": config.endpoint_id,
            "model_name": config.model_name,
            "temperature": config.temperature,
            "messages": messages.iter().map(Message::keyed).collect::<Vec<_>>(),
        }))
    }

    pub fn key_for(&self, endpoint_id: &str, messages: &[Message]) -> Result<String, GatewayError> {
        Ok(cache_key(&self.request_record(endpoint_id, messages)?))
    }

    pub fn complete(&self, endpoint_id: &str, messages: &[Message]) -> Result<String, GatewayError> {
        let (config, semaphore) = self
            .endpoints
            .get(endpoint_id)
            .ok_or_else(|| GatewayError::UnknownEndpoint(endpoint_id.into()))?;
        let record = self.request_record(endpoint_id, messages)?;
        let key = cache_key(&record);
        if let Some(entry) = self.cache.get(&key)? {
            return Ok(entry.response);
        }
        if self.mode == Mode::Replay {
            return Err(GatewayError::ReplayMiss {
                endpoint: endpoint_id.into(),
                key,
            });
        }
        let headers = match &config.api_key_env {
            None => Vec::new(),
            Some(var) => {
                let token = std::env::var(var).map_err(|_| GatewayError::MissingKey {
                    endpoint: endpoint_id.into(),
                    var: var.clone(),
                })?;
                vec![("Authorization".to_string(), format!("Bearer {token}"))]
            }
        };
        let body = json!({
            "model": config.model_name,
            "temperature": config.temperature,
            "messages": messages.iter().map(Message::wire).collect::<Vec<_>>(),
        });
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        let raw = {
            let _permit = semaphore.acquire();
            self.send_with_retries(config, &url, &headers, &body)?
        };
        let parsed: Value = serde_json::from_str(&raw).map_err(|e| GatewayError::Malformed {
            endpoint: endpoint_id.into(),
            message: e.to_string(),
        })?;
        let text = reply_text(&parsed).ok_or_else(|| GatewayError::Malformed {
            endpoint: endpoint_id.into(),
            message: "no choices[0].message.content".into(),
        })?;
        self.cache.put(record, text.clone(), parsed)?;
        Ok(text)
    }

    fn send_with_retries(
        &self,
        config: &EndpointConfig,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<String, GatewayError> {
        let timeout = Duration::from_secs_f64(config.timeout);
        let attempts = config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.transport.post(url, headers, body, timeout) {
                Ok(r) if (200..300).contains(&r.status) => return Ok(r.body),
                Ok(r) if r.status == 429 || r.status >= 500 => last = format!("HTTP {}: {}", r.status, r.body),
                Ok(r) => {
                    return Err(GatewayError::Status {
                        endpoint: config.endpoint_id.clone(),
                        status: r.status,
                        body: r.body,
                    })
                }
                Err(e) => last = e,
            }
        }
        Err(GatewayError::Transport {
            endpoint: config.endpoint_id.clone(),
            message: last,
            attempts,
        })
    }

    /// Runs requests against one endpoint with at most `max_in_flight` of
    /// them outstanding; results line up with `requests`.
    pub fn batch(
        &self,
        endpoint_id: &str,
        requests: &[Vec<Message>],
        max_in_flight: usize,
    ) -> Vec<Result<String, GatewayError>> {
        let workers = max_in_flight.max(1).min(requests.len());
        if workers <= 1 {
            return requests.iter().map(|m| self.complete(endpoint_id, m)).collect();
        }
        let next = Mutex::new(0usize);
        let slots: Vec<Mutex<Option<Result<String, GatewayError>>>> = requests.iter().map(|_| Mutex::new(None)).collect();
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = {
                        let mut n = next.lock().expect("batch cursor");
                        let i = *n;
                        *n += 1;
                        i
                    };
                    if i >= requests.len() {
                        break;
                    }
                    let result = self.complete(endpoint_id, &requests[i]);
                    *slots[i].lock().expect("batch slot") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("batch slot").expect("every slot filled"))
            .collect()
    }
}

/// Reply text of a chat-completions response; content given as a list of
/// parts is concatenated.
pub fn reply_text(response: &Value) -> Option<String> {
    let content = response.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}
