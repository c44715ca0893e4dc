//! Supervisor for the Python execution shim.
//!
//! One shim process per [`ExecBridge`]. Requests and responses are single
//! JSON lines. The shim enforces per-call timeouts itself; the supervisor
//! waits a little longer and kills the process as a backstop. A killed or
//! crashed process is respawned on the next request, and every module loaded
//! so far is reloaded into it.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

pub const SHIM_SOURCE: &str = include_str!("../bridge/shim.py");

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot start the execution shim ({python}): {reason}")]
    Spawn { python: String, reason: String },
    #[error("execution shim protocol violation: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub python: String,
    /// Per-call limit enforced inside the shim.
    pub call_timeout: Duration,
    /// Extra time the supervisor waits before killing the process.
    pub grace: Duration,
    pub memory_mb: Option<u64>,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            python: std::env::var("BENCHFORGE_PYTHON").unwrap_or_else(|_| "python3".into()),
            call_timeout: Duration::from_secs(5),
            grace: Duration::from_secs(2),
            memory_mb: Some(1024),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Exception,
    Timeout,
    Crash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResponse {
    pub id: Option<u64>,
    pub status: Status,
    #[serde(default)]
    pub value: Option<Value>,
    #[serde(default, rename = "type")]
    pub error_type: Option<String>,
    #[serde(default)]
    pub message: Option<String>,
    #[serde(default)]
    pub covered: Option<BTreeSet<String>>,
    #[serde(default)]
    pub total: Option<BTreeSet<String>>,
}

impl ExecResponse {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    fn synthetic(id: u64, status: Status, message: &str) -> Self {
        ExecResponse {
            id: Some(id),
            status,
            value: None,
            error_type: None,
            message: Some(message.to_string()),
            covered: None,
            total: None,
        }
    }

    /// Short human-readable description of a non-ok response.
    pub fn describe(&self) -> String {
        match self.status {
            Status::Ok => "ok".into(),
            Status::Exception => format!(
                "{}: {}",
                self.error_type.as_deref().unwrap_or("exception"),
                self.message.as_deref().unwrap_or("")
            ),
            Status::Timeout => "timeout".into(),
            Status::Crash => format!("crash: {}", self.message.as_deref().unwrap_or("")),
        }
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(Debug, Clone)]
struct Loaded {
    module: String,
    source: String,
    function: Option<String>,
}

pub struct ExecBridge {
    config: BridgeConfig,
    process: Option<Process>,
    loaded: Vec<Loaded>,
    next_id: u64,
    restarts: u64,
}

impl ExecBridge {
    /// Starts a shim process and checks that it answers.
    pub fn spawn(config: BridgeConfig) -> Result<Self, BridgeError> {
        let mut b = ExecBridge {
            config,
            process: None,
            loaded: Vec::new(),
            next_id: 0,
            restarts: 0,
        };
        let pong = b.ping()?;
        if !pong.is_ok() {
            return Err(BridgeError::Spawn {
                python: b.config.python.clone(),
                reason: pong.describe(),
            });
        }
        Ok(b)
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.config
    }

    /// Number of times the process was replaced after a timeout or crash.
    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    fn start(&self) -> Result<Process, BridgeError> {
        let mut cmd = Command::new(&self.config.python);
        cmd.arg("-u")
            .arg("-c")
            .arg(SHIM_SOURCE)
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        match self.config.memory_mb {
            Some(mb) => cmd.env("BRIDGE_MEMORY_MB", mb.to_string()),
            None => cmd.env_remove("BRIDGE_MEMORY_MB"),
        };
        let mut child = cmd.spawn().map_err(|e| BridgeError::Spawn {
            python: self.config.python.clone(),
            reason: e.to_string(),
        })?;
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
        Ok(Process {
            child,
            stdin,
            lines: rx,
        })
    }

    fn ensure_process(&mut self) -> Result<(), BridgeError> {
        if self.process.is_some() {
            return Ok(());
        }
        self.process = Some(self.start()?);
        for l in self.loaded.clone() {
            let r = self.raw_load(&l)?;
            if !r.is_ok() {
                return Err(BridgeError::Protocol(format!("reload of {} failed: {}", l.module, r.describe())));
            }
        }
        Ok(())
    }

    fn kill(&mut self) {
        if self.process.take().is_some() {
            self.restarts += 1;
        }
    }

    fn exchange(&mut self, mut req: Map<String, Value>, wait: Duration) -> Result<ExecResponse, BridgeError> {
        let id = self.next_id;
        self.next_id += 1;
        req.insert("id".into(), json!(id));
        let line = serde_json::to_string(&req).map_err(|e| BridgeError::Protocol(e.to_string()))?;
        let proc = self.process.as_mut().expect("process running");
        if writeln!(proc.stdin, "{line}").and_then(|_| proc.stdin.flush()).is_err() {
            self.kill();
            return Ok(ExecResponse::synthetic(id, Status::Crash, "shim stdin closed"));
        }
        match proc.lines.recv_timeout(wait) {
            Ok(Ok(text)) => {
                let resp: ExecResponse = serde_json::from_str(&text)
                    .map_err(|e| BridgeError::Protocol(format!("unparseable response {text:?}: {e}")))?;
                if resp.id != Some(id) {
                    return Err(BridgeError::Protocol(format!("response id {:?} for request {id}", resp.id)));
                }
                if resp.status == Status::Timeout {
                    // The shim survived its own alarm; still replace it so
                    // no partially-run state leaks into later calls.
                    self.kill();
                }
                Ok(resp)
            }
            Ok(Err(e)) => {
                self.kill();
                Ok(ExecResponse::synthetic(id, Status::Crash, &e.to_string()))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Ok(ExecResponse::synthetic(id, Status::Timeout, "killed by supervisor"))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.kill();
                Ok(ExecResponse::synthetic(id, Status::Crash, "shim exited"))
            }
        }
    }

    fn request(&mut self, req: Map<String, Value>) -> Result<ExecResponse, BridgeError> {
        self.ensure_process()?;
        let wait = self.config.call_timeout + self.config.grace;
        self.exchange(req, wait)
    }

    fn raw_load(&mut self, l: &Loaded) -> Result<ExecResponse, BridgeError> {
        let mut req = Map::new();
        req.insert("op".into(), json!("load"));
        req.insert("module".into(), json!(l.module));
        req.insert("source".into(), json!(l.source));
        req.insert("timeout".into(), json!(self.config.call_timeout.as_secs_f64()));
        if let Some(f) = &l.function {
            req.insert("function".into(), json!(f));
        }
        let wait = self.config.call_timeout + self.config.grace;
        self.exchange(req, wait)
    }

    pub fn ping(&mut self) -> Result<ExecResponse, BridgeError> {
        let mut req = Map::new();
        req.insert("op".into(), json!("ping"));
        self.request(req)
    }

    /// Loads `source` as module `module`. With `function`, an instrumented
    /// copy is kept for `trace`.
    pub fn load(&mut self, module: &str, source: &str, function: Option<&str>) -> Result<ExecResponse, BridgeError> {
        self.ensure_process()?;
        let l = Loaded {
            module: module.to_string(),
            source: source.to_string(),
            function: function.map(str::to_string),
        };
        let r = self.raw_load(&l)?;
        self.loaded.retain(|x| x.module != module);
        if r.is_ok() {
            self.loaded.push(l);
        }
        Ok(r)
    }

    fn invoke(&mut self, op: &str, module: &str, function: &str, inputs: &Map<String, Value>) -> Result<ExecResponse, BridgeError> {
        let mut req = Map::new();
        req.insert("op".into(), json!(op));
        req.insert("module".into(), json!(module));
        req.insert("function".into(), json!(function));
        req.insert("inputs".into(), Value::Object(inputs.clone()));
        req.insert("timeout".into(), json!(self.config.call_timeout.as_secs_f64()));
        self.request(req)
    }

    pub fn call(&mut self, module: &str, function: &str, inputs: &Map<String, Value>) -> Result<ExecResponse, BridgeError> {
        self.invoke("call", module, function, inputs)
    }

    /// Like `call`, on the instrumented copy; the response carries covered
    /// and total branch ids.
    pub fn trace(&mut self, module: &str, function: &str, inputs: &Map<String, Value>) -> Result<ExecResponse, BridgeError> {
        self.invoke("trace", module, function, inputs)
    }

    /// Sends an arbitrary request line; used by protocol tests.
    pub fn raw(&mut self, req: Map<String, Value>) -> Result<ExecResponse, BridgeError> {
        self.request(req)
    }

    pub fn shutdown(mut self) -> Result<(), BridgeError> {
        if self.process.is_some() {
            let mut req = Map::new();
            req.insert("op".into(), json!("shutdown"));
            let wait = self.config.grace;
            let _ = self.exchange(req, wait)?;
            if let Some(mut p) = self.process.take() {
                let _ = p.child.wait();
            }
        }
        Ok(())
    }
}

/// True when a usable interpreter is on the path.
pub fn python_available() -> bool {
    let python = BridgeConfig::default().python;
    Command::new(python)
        .arg("-c")
        .arg("import sys; sys.exit(0 if sys.version_info >= (3, 8) else 1)")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bridge() -> ExecBridge {
        ExecBridge::spawn(BridgeConfig {
            call_timeout: Duration::from_millis(1500),
            grace: Duration::from_millis(1500),
            ..BridgeConfig::default()
        })
        .expect("python3 available")
    }

    fn inputs(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    const MERGE: &str = "def merge_json_recursive(base, update):\n    if not isinstance(base, dict) or not isinstance(update, dict):\n        if isinstance(base, list) and isinstance(update, list):\n            return base + update\n        return update\n    merged = base.copy()\n    for key, value in update.items():\n        if key in merged:\n            merged[key] = merge_json_recursive(merged[key], value)\n        else:\n            merged[key] = value\n    return merged\n";

    #[test]
    fn call_merges_lists() {
        let mut b = bridge();
        assert!(b.load("gt", MERGE, None).unwrap().is_ok());
        let r = b.call("gt", "merge_json_recursive", &inputs(json!({"base": [1, 2], "update": [3, 4]}))).unwrap();
        assert_eq!(r.value, Some(json!([1, 2, 3, 4])));
        b.shutdown().unwrap();
    }

    #[test]
    fn exceptions_and_unserializable_results() {
        let mut b = bridge();
        b.load("m", "class K:\n    pass\n\ndef obj(x):\n    return K()\n\ndef boom(x):\n    return 1 // x\n\ndef noisy(x):\n    print('garbage on stdout')\n    return x\n", None).unwrap();
        let r = b.call("m", "obj", &inputs(json!({"x": 1}))).unwrap();
        assert_eq!(r.error_type.as_deref(), Some("unserializable-result"));
        let r = b.call("m", "boom", &inputs(json!({"x": 0}))).unwrap();
        assert_eq!(r.error_type.as_deref(), Some("ZeroDivisionError"));
        let r = b.call("m", "noisy", &inputs(json!({"x": 7}))).unwrap();
        assert_eq!(r.value, Some(json!(7)));
    }

    #[test]
    fn timeout_then_recovery() {
        let mut b = bridge();
        b.load("m", "def spin(x):\n    while True:\n        x += 1\n\ndef ident(x):\n    return x\n", None).unwrap();
        let r = b.call("m", "spin", &inputs(json!({"x": 0}))).unwrap();
        assert_eq!(r.status, Status::Timeout);
        let r = b.call("m", "ident", &inputs(json!({"x": 3}))).unwrap();
        assert_eq!(r.value, Some(json!(3)));
    }

    #[test]
    fn crash_is_reported_and_recovered() {
        let mut b = bridge();
        b.load("m", "import os\n\ndef die(x):\n    os._exit(3)\n\ndef ident(x):\n    return x\n", None).unwrap();
        let r = b.call("m", "die", &inputs(json!({"x": 0}))).unwrap();
        assert_eq!(r.status, Status::Crash);
        let r = b.call("m", "ident", &inputs(json!({"x": 4}))).unwrap();
        assert_eq!(r.value, Some(json!(4)));
        assert_eq!(b.restarts(), 1);
    }

    #[test]
    fn trace_reports_one_arm_per_input() {
        let mut b = bridge();
        let src = "def sign(x):\n    if x > 0:\n        return 1\n    else:\n        return -x\n";
        b.load("m", src, Some("sign")).unwrap();
        let r = b.trace("m", "sign", &inputs(json!({"x": 5}))).unwrap();
        assert_eq!(r.total.as_ref().unwrap().len(), 2);
        assert_eq!(r.covered.as_ref().unwrap().len(), 1);
        let c = b.call("m", "sign", &inputs(json!({"x": 5}))).unwrap();
        assert_eq!(c.value, r.value);
    }

    #[test]
    fn malformed_requests_get_a_response() {
        let mut b = bridge();
        let mut req = Map::new();
        req.insert("op".into(), json!("frobnicate"));
        let r = b.raw(req).unwrap();
        assert_eq!(r.error_type.as_deref(), Some("malformed-request"));
    }
}
