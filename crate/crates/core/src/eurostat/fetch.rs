use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::{EurostatError, RequestDescriptor};

pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Connection(String),
}

/// Blocking HTTP GET.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError>;
}

/// [`Transport`] over `ureq` with a per-request timeout.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .user_agent(concat!("regionscope/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        Self { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(REQUEST_TIMEOUT)
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        match self.agent.get(url).call() {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp
                    .body_mut()
                    .with_config()
                    .limit(256 * 1024 * 1024)
                    .read_to_vec()
                    .map_err(|e| TransportError::Connection(e.to_string()))?;
                Ok(HttpResponse { status, body })
            }
            Err(ureq::Error::Timeout(_)) => Err(TransportError::Timeout),
            Err(e) => Err(TransportError::Connection(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
            multiplier: 2,
        }
    }
}

fn is_transient(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// On-disk response cache: `<dir>/<sha256(url)>.json` plus a `.meta` sidecar.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheMeta {
    pub url: String,
    pub fetched_at: String,
    pub status: u16,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(url: &str) -> String {
        hex::encode(Sha256::digest(url.as_bytes()))
    }

    pub fn body_path(&self, url: &str) -> PathBuf {
        self.dir.join(format!("{}.json", Self::key(url)))
    }

    pub fn meta_path(&self, url: &str) -> PathBuf {
        self.dir.join(format!("{}.meta", Self::key(url)))
    }

    /// Cached body for `url`, or `None` on a miss.
    pub fn load(&self, url: &str) -> Result<Option<Vec<u8>>, EurostatError> {
        let body_path = self.body_path(url);
        let body = match fs::read(&body_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(EurostatError::Io(format!("{}: {e}", body_path.display()))),
        };
        let meta_path = self.meta_path(url);
        let corrupt = |reason: String| EurostatError::CacheCorrupt {
            path: meta_path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(&meta_path).map_err(|e| corrupt(e.to_string()))?;
        let meta = parse_meta(&text).ok_or_else(|| corrupt("unreadable metadata".into()))?;
        if meta.url != url {
            return Err(corrupt(format!("metadata is for {}", meta.url)));
        }
        if meta.status != 200 {
            return Err(corrupt(format!("cached status {}", meta.status)));
        }
        Ok(Some(body))
    }

    pub fn load_meta(&self, url: &str) -> Option<CacheMeta> {
        fs::read_to_string(self.meta_path(url))
            .ok()
            .and_then(|t| parse_meta(&t))
    }

    /// Writes body and metadata via temp files and renames; the body is
    /// renamed last so a visible body always has its metadata.
    pub fn store(&self, url: &str, body: &[u8], status: u16) -> Result<(), EurostatError> {
        let io = |e: std::io::Error| EurostatError::Io(format!("{}: {e}", self.dir.display()));
        fs::create_dir_all(&self.dir).map_err(io)?;
        let meta = format!(
            "url={url}\nfetched_at={}\nstatus={status}\n",
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        );
        let meta_tmp = self.write_temp(meta.as_bytes()).map_err(io)?;
        fs::rename(&meta_tmp, self.meta_path(url)).map_err(io)?;
        let body_tmp = self.write_temp(body).map_err(io)?;
        fs::rename(&body_tmp, self.body_path(url)).map_err(io)?;
        Ok(())
    }

    fn write_temp(&self, bytes: &[u8]) -> std::io::Result<PathBuf> {
        use std::sync::atomic::{AtomicU64, Ordering};
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = self.dir.join(format!(".tmp-{}-{n}", std::process::id()));
        let mut f = fs::File::create(&path)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        Ok(path)
    }
}

fn parse_meta(text: &str) -> Option<CacheMeta> {
    let mut url = None;
    let mut fetched_at = None;
    let mut status = None;
    for line in text.lines() {
        let (k, v) = line.split_once('=')?;
        match k {
            "url" => url = Some(v.to_owned()),
            "fetched_at" => fetched_at = Some(v.to_owned()),
            "status" => status = v.parse().ok(),
            _ => {}
        }
    }
    Some(CacheMeta {
        url: url?,
        fetched_at: fetched_at?,
        status: status?,
    })
}

/// Cache-first GET with retry on transient failures.
pub struct Fetcher {
    cache: Cache,
    transport: Option<Box<dyn Transport>>,
    retry: RetryPolicy,
}

impl Fetcher {
    pub fn new(cache: Cache, transport: Option<Box<dyn Transport>>) -> Self {
        Self {
            cache,
            transport,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    pub fn fetch(&self, request: &RequestDescriptor) -> Result<Vec<u8>, EurostatError> {
        let url = request.url();
        if let Some(body) = self.cache.load(&url)? {
            return Ok(body);
        }
        let transport = self
            .transport
            .as_deref()
            .ok_or_else(|| EurostatError::NetworkUnavailable { url: url.clone() })?;

        let mut backoff = self.retry.initial_backoff;
        let mut last_err = None;
        for attempt in 0..self.retry.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= self.retry.multiplier;
            }
            match transport.get(&url) {
                Ok(resp) if resp.status == 200 => {
                    self.cache.store(&url, &resp.body, resp.status)?;
                    return Ok(resp.body);
                }
                Ok(resp) if is_transient(resp.status) => {
                    last_err = Some(EurostatError::HttpStatus {
                        code: resp.status,
                        url: url.clone(),
                    });
                }
                Ok(resp) => {
                    return Err(EurostatError::HttpStatus {
                        code: resp.status,
                        url,
                    })
                }
                Err(e) => {
                    let reason = match e {
                        TransportError::Timeout => "timed out".to_owned(),
                        TransportError::Connection(msg) => msg,
                    };
                    last_err = Some(EurostatError::Transport {
                        url: url.clone(),
                        reason,
                    });
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}
