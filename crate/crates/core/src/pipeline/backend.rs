//! Backend endpoints and their descriptors.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::mock::{MockEndpoint, MockMode};
use super::protocol::{Request, RequestBody, Response, ResponseBody};
use crate::error::{Error, Result};
use crate::io;
use crate::synth::GroundTruth;

pub const DEFAULT_TIMEOUT_MS: u64 = 600_000;

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

/// One request line in, one response line out.
pub trait Endpoint: Send + Sync {
    fn exchange(&self, request: &str) -> Result<String>;
    fn describe(&self) -> String;
}

/// Sends `body` and returns the checked response body.
pub fn call(endpoint: &dyn Endpoint, stage: &str, id: &str, workdir: &Path, body: RequestBody) -> Result<ResponseBody> {
    let request = Request::new(id, workdir.to_string_lossy(), body);
    let line = serde_json::to_string(&request).expect("requests serialize");
    let raw = endpoint
        .exchange(&line)
        .map_err(|e| match e {
            Error::Backend { message, .. } => Error::backend(stage, message),
            other => Error::backend(stage, other.to_string()),
        })?;
    Response::parse_for(stage, &request, &raw)
}

/// Where a backend lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EndpointDescriptor {
    /// A long-lived child process speaking newline-delimited JSON on stdio.
    Subprocess {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
    /// JSON bodies POSTed to `address`.
    Http {
        address: String,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
    /// In-process test double backed by a synthetic scene's ground truth.
    Mock {
        scene: String,
        #[serde(default)]
        mode: MockMode,
        #[serde(default)]
        noise_rate: f64,
        #[serde(default)]
        seed: u64,
    },
}

/// Contents of a `backends.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsFile {
    pub segmenter: EndpointDescriptor,
    pub depth_estimator: EndpointDescriptor,
    pub outpainter: EndpointDescriptor,
}

#[derive(Clone)]
pub struct BackendEndpoints {
    pub segmenter: Arc<dyn Endpoint>,
    pub depth_estimator: Arc<dyn Endpoint>,
    pub outpainter: Arc<dyn Endpoint>,
}

impl std::fmt::Debug for BackendEndpoints {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendEndpoints")
            .field("segmenter", &self.segmenter.describe())
            .field("depth_estimator", &self.depth_estimator.describe())
            .field("outpainter", &self.outpainter.describe())
            .finish()
    }
}

impl BackendEndpoints {
    /// Reads a backends file; relative mock scene paths resolve against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: BackendsFile = io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_descriptors(&file, base)
    }

    pub fn from_descriptors(file: &BackendsFile, base_dir: &Path) -> Result<Self> {
        let mut scenes: Vec<(PathBuf, Arc<GroundTruth>)> = Vec::new();
        let mut build = |d: &EndpointDescriptor| -> Result<Arc<dyn Endpoint>> {
            Ok(match d {
                EndpointDescriptor::Subprocess { command, timeout_ms } => {
                    Arc::new(SubprocessEndpoint::new(command.clone(), Duration::from_millis(*timeout_ms))?)
                }
                EndpointDescriptor::Http { address, timeout_ms } => {
                    Arc::new(HttpEndpoint::new(address.clone(), Duration::from_millis(*timeout_ms)))
                }
                EndpointDescriptor::Mock {
                    scene,
                    mode,
                    noise_rate,
                    seed,
                } => {
                    let path = base_dir.join(scene);
                    let gt = match scenes.iter().find(|(p, _)| *p == path) {
                        Some((_, gt)) => gt.clone(),
                        None => {
                            let gt = Arc::new(GroundTruth::load(&path)?);
                            scenes.push((path, gt.clone()));
                            gt
                        }
                    };
                    Arc::new(MockEndpoint::new(gt, *mode, *noise_rate, *seed)?)
                }
            })
        };
        Ok(Self {
            segmenter: build(&file.segmenter)?,
            depth_estimator: build(&file.depth_estimator)?,
            outpainter: build(&file.outpainter)?,
        })
    }

    /// Health-checks every endpoint, naming the first that fails.
    pub fn check_health(&self, workdir: &Path) -> Result<()> {
        for (stage, ep) in [
            ("segmenter", &self.segmenter),
            ("depth_estimator", &self.depth_estimator),
            ("outpainter", &self.outpainter),
        ] {
            match call(ep.as_ref(), stage, &format!("health-{stage}"), workdir, RequestBody::Health)? {
                ResponseBody::Health { status } if status == "ok" => {}
                other => return Err(Error::backend(stage, format!("unhealthy: {other:?}"))),
            }
        }
        Ok(())
    }
}

struct ChildState {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

/// Spawns the command on first use and keeps it alive across requests. A
/// timed-out or crashed child is killed and respawned on the next request.
pub struct SubprocessEndpoint {
    command: Vec<String>,
    timeout: Duration,
    state: Mutex<Option<ChildState>>,
}

impl SubprocessEndpoint {
    pub fn new(command: Vec<String>, timeout: Duration) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Config("subprocess backend needs a non-empty command".into()));
        }
        Ok(Self {
            command,
            timeout,
            state: Mutex::new(None),
        })
    }

    fn spawn(&self) -> Result<ChildState> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::backend("spawn", format!("{}: {e}", self.command[0])))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ChildState {
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Endpoint for SubprocessEndpoint {
    fn exchange(&self, request: &str) -> Result<String> {
        let mut guard = self.state.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let state = guard.as_mut().expect("just spawned");
        let sent = writeln!(state.stdin, "{request}").and_then(|_| state.stdin.flush());
        let outcome = match sent {
            Err(e) => Err(format!("write to backend failed: {e}")),
            Ok(()) => match state.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) => Ok(line),
                Ok(Err(e)) => Err(format!("read from backend failed: {e}")),
                Err(RecvTimeoutError::Timeout) => Err(format!("no response within {:?}", self.timeout)),
                Err(RecvTimeoutError::Disconnected) => Err("backend closed its output".to_string()),
            },
        };
        outcome.map_err(|message| {
            if let Some(mut dead) = guard.take() {
                let _ = dead.child.kill();
                let _ = dead.child.wait();
            }
            Error::backend("exchange", message)
        })
    }

    fn describe(&self) -> String {
        format!("subprocess {:?}", self.command)
    }
}

impl Drop for SubprocessEndpoint {
    fn drop(&mut self) {
        let state = self.state.get_mut().unwrap_or_else(|p| p.into_inner());
        if let Some(mut s) = state.take() {
            drop(s.stdin);
            let _ = s.child.kill();
            let _ = s.child.wait();
        }
    }
}

pub struct HttpEndpoint {
    address: String,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(address: String, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { address, agent }
    }
}

impl Endpoint for HttpEndpoint {
    fn exchange(&self, request: &str) -> Result<String> {
        let mut resp = self
            .agent
            .post(&self.address)
            .header("content-type", "application/json")
            .send(request)
            .map_err(|e| Error::backend("exchange", format!("POST {}: {e}", self.address)))?;
        let status = resp.status();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::backend("exchange", format!("reading body from {}: {e}", self.address)))?;
        // error objects may come with a non-2xx status; let the caller see them
        if !status.is_success() && serde_json::from_str::<Response>(&body).is_err() {
            return Err(Error::backend("exchange", format!("HTTP {status} from {}", self.address)));
        }
        Ok(body)
    }

    fn describe(&self) -> String {
        format!("http {}", self.address)
    }
}
