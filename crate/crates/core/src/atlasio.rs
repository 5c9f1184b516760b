//! RIPE Atlas result retrieval.
//!
//! This module holds the only network transport in the crate. Results come
//! either from `GET {base_url}/api/v2/measurements/{id}/results/` or, offline,
//! from a file holding the same body. The API key is taken from the config
//! or from the `SDI_ATLAS_KEY` environment variable, never from the command
//! line.

use std::io;
use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const API_KEY_ENV: &str = "SDI_ATLAS_KEY";
pub const DEFAULT_BASE_URL: &str = "https://atlas.ripe.net";
pub const MAX_RETRIES: u8 = 5;

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("invalid Atlas configuration: {0}")]
    Config(String),
    #[error("measurement {0} does not exist")]
    UnknownMeasurement(u64),
    #[error("rate limited by the Atlas API")]
    RateLimited,
    #[error("Atlas API returned HTTP {status} after {attempts} attempt(s)")]
    Http { status: u16, attempts: u32 },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("results file `{0}` not found")]
    NotFound(String),
    #[error("reading results file: {0}")]
    Io(#[from] io::Error),
}

fn default_timeout() -> f64 {
    30.0
}

fn default_backoff() -> f64 {
    1.0
}

fn default_base_url() -> String {
    DEFAULT_BASE_URL.to_string()
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasEndpointConfig {
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default)]
    pub retry_count: u8,
    /// First retry delay; each further retry doubles it.
    #[serde(default = "default_backoff")]
    pub backoff_base_s: f64,
}

impl std::fmt::Debug for AtlasEndpointConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AtlasEndpointConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("timeout_s", &self.timeout_s)
            .field("retry_count", &self.retry_count)
            .field("backoff_base_s", &self.backoff_base_s)
            .finish()
    }
}

impl Default for AtlasEndpointConfig {
    fn default() -> Self {
        Self::new(DEFAULT_BASE_URL)
    }
}

impl AtlasEndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            timeout_s: default_timeout(),
            retry_count: 0,
            backoff_base_s: default_backoff(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, AtlasError> {
        serde_json::from_str(text).map_err(|e| AtlasError::Config(e.to_string()))
    }

    /// Fills in the API key from the environment when none is configured.
    pub fn with_env_key(mut self) -> Self {
        if self.api_key.is_none() {
            self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        }
        self
    }

    pub fn validate(&self) -> Result<(), AtlasError> {
        if self.base_url.is_empty() {
            return Err(AtlasError::Config("base_url must be nonempty".into()));
        }
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(AtlasError::Config("timeout_s must be positive".into()));
        }
        if self.retry_count > MAX_RETRIES {
            return Err(AtlasError::Config(format!("retry_count must be at most {MAX_RETRIES}")));
        }
        if self.backoff_base_s.is_nan() || self.backoff_base_s < 0.0 {
            return Err(AtlasError::Config("backoff_base_s must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn results_url(&self, measurement_id: u64) -> String {
        format!("{}/api/v2/measurements/{measurement_id}/results/", self.base_url.trim_end_matches('/'))
    }

    fn backoff(&self, retry: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base_s * f64::from(1u32 << retry.min(16)))
    }
}

enum Attempt {
    Done(Vec<u8>),
    Fatal(AtlasError),
    Retry(AtlasError),
}

fn attempt(agent: &ureq::Agent, cfg: &AtlasEndpointConfig, id: u64, attempts: u32) -> Attempt {
    let mut req = agent.get(cfg.results_url(id)).header("Accept", "application/json");
    if let Some(key) = &cfg.api_key {
        req = req.header("Authorization", format!("Key {key}"));
    }
    match req.call() {
        Ok(mut resp) => {
            let status = resp.status().as_u16();
            match status {
                200 => match resp.body_mut().with_config().limit(u64::MAX).read_to_vec() {
                    Ok(body) => Attempt::Done(body),
                    Err(e) => Attempt::Retry(AtlasError::Transport { message: e.to_string(), attempts }),
                },
                404 => Attempt::Fatal(AtlasError::UnknownMeasurement(id)),
                429 => Attempt::Fatal(AtlasError::RateLimited),
                s if s >= 500 => Attempt::Retry(AtlasError::Http { status: s, attempts }),
                s => Attempt::Fatal(AtlasError::Http { status: s, attempts }),
            }
        }
        Err(e) => Attempt::Retry(AtlasError::Transport { message: e.to_string(), attempts }),
    }
}

/// Fetches the raw result body of a measurement. Server errors and
/// transport failures are retried up to `retry_count` times with
/// exponential backoff; 404 and 429 are returned immediately.
pub fn fetch_results(cfg: &AtlasEndpointConfig, measurement_id: u64) -> Result<Vec<u8>, AtlasError> {
    cfg.validate()?;
    if measurement_id == 0 {
        return Err(AtlasError::Config("measurement id must be positive".into()));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
        .http_status_as_error(false)
        .build()
        .into();

    let mut retry = 0u32;
    loop {
        match attempt(&agent, cfg, measurement_id, retry + 1) {
            Attempt::Done(body) => return Ok(body),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Retry(e) => {
                if retry >= u32::from(cfg.retry_count) {
                    return Err(e);
                }
                thread::sleep(cfg.backoff(retry));
                retry += 1;
            }
        }
    }
}

/// Offline counterpart of [`fetch_results`].
pub fn load_results_file(path: impl AsRef<Path>) -> Result<Vec<u8>, AtlasError> {
    let path = path.as_ref();
    std::fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => AtlasError::NotFound(path.display().to_string()),
        _ => AtlasError::Io(e),
    })
}

/// Scripted HTTP server for exercising the client without network access.
pub mod stub {
    use std::io::{BufRead, BufReader, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::{Arc, Mutex};
    use std::thread::JoinHandle;

    /// One canned response.
    #[derive(Debug, Clone)]
    pub struct StubResponse {
        pub status: u16,
        pub body: Vec<u8>,
    }

    impl StubResponse {
        pub fn new(status: u16, body: impl Into<Vec<u8>>) -> Self {
            Self { status, body: body.into() }
        }
    }

    /// A request as the stub saw it.
    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct SeenRequest {
        pub path: String,
        pub authorization: Option<String>,
    }

    /// Serves the scripted responses in order, repeating the last one once
    /// the script runs out. Stops when dropped.
    pub struct StubServer {
        addr: std::net::SocketAddr,
        seen: Arc<Mutex<Vec<SeenRequest>>>,
        shutdown: Arc<Mutex<bool>>,
        handle: Option<JoinHandle<()>>,
    }

    impl StubServer {
        pub fn start(script: Vec<StubResponse>) -> std::io::Result<Self> {
            assert!(!script.is_empty(), "stub needs at least one response");
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let seen = Arc::new(Mutex::new(Vec::new()));
            let shutdown = Arc::new(Mutex::new(false));
            let handle = {
                let seen = seen.clone();
                let shutdown = shutdown.clone();
                std::thread::spawn(move || {
                    let mut next = 0;
                    for stream in listener.incoming() {
                        if *shutdown.lock().unwrap() {
                            break;
                        }
                        let Ok(stream) = stream else { continue };
                        let resp = &script[next.min(script.len() - 1)];
                        next += 1;
                        if let Some(req) = serve(stream, resp) {
                            seen.lock().unwrap().push(req);
                        }
                    }
                })
            };
            Ok(Self { addr, seen, shutdown, handle: Some(handle) })
        }

        pub fn base_url(&self) -> String {
            format!("http://{}", self.addr)
        }

        pub fn requests(&self) -> Vec<SeenRequest> {
            self.seen.lock().unwrap().clone()
        }
    }

    impl Drop for StubServer {
        fn drop(&mut self) {
            *self.shutdown.lock().unwrap() = true;
            // Wake the accept loop.
            let _ = TcpStream::connect(self.addr);
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
    }

    fn reason(status: u16) -> &'static str {
        match status {
            200 => "OK",
            404 => "Not Found",
            429 => "Too Many Requests",
            500 => "Internal Server Error",
            502 => "Bad Gateway",
            503 => "Service Unavailable",
            _ => "Status",
        }
    }

    fn serve(stream: TcpStream, resp: &StubResponse) -> Option<SeenRequest> {
        let mut reader = BufReader::new(stream.try_clone().ok()?);
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let path = line.split_whitespace().nth(1)?.to_string();
        let mut authorization = None;
        loop {
            let mut header = String::new();
            if reader.read_line(&mut header).ok()? == 0 || header == "\r\n" || header == "\n" {
                break;
            }
            if let Some((name, value)) = header.split_once(':') {
                if name.eq_ignore_ascii_case("authorization") {
                    authorization = Some(value.trim().to_string());
                }
            }
        }
        let mut stream = stream;
        let head = format!(
            "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
            resp.status,
            reason(resp.status),
            resp.body.len()
        );
        stream.write_all(head.as_bytes()).ok()?;
        stream.write_all(&resp.body).ok()?;
        stream.flush().ok()?;
        Some(SeenRequest { path, authorization })
    }
}
