//! Ports served by a child process over newline-delimited JSON on stdio.
//!
//! The child announces itself with
//! `{"op":"hello","protocol":1,"capabilities":[...]}` and then answers one
//! request line with exactly one response line carrying the same `id`.
//! Rasters cross the boundary as base64-encoded PNG.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{FeatureExtractor, Genome, Ports, Predictor, Realizer, SceneData, SceneGenerator};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::raster::{ClassMask, ClassTable, RgbImage};

pub const PROTOCOL_VERSION: u64 = 1;
pub const OPERATIONS: [&str; 4] = ["generate_scene", "realize", "predict", "extract_features"];

const DEFAULT_HANDSHAKE_MS: u64 = 10_000;
const DEFAULT_REQUEST_MS: u64 = 120_000;

/// How to launch an external backend.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaunchSpec {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handshake_timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_timeout_ms: Option<u64>,
}

impl LaunchSpec {
    pub fn new<I, S>(command: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            command: command.into_iter().map(Into::into).collect(),
            handshake_timeout_ms: None,
            request_timeout_ms: None,
        }
    }

    fn display(&self) -> String {
        self.command.join(" ")
    }
}

/// One live child process. Admits a single in-flight request.
pub struct ExternalBackend {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    capabilities: Vec<String>,
    next_id: u64,
    request_timeout: Duration,
    table: Arc<ClassTable>,
    dead: Option<String>,
}

impl std::fmt::Debug for ExternalBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalBackend")
            .field("pid", &self.child.id())
            .field("capabilities", &self.capabilities)
            .field("dead", &self.dead)
            .finish()
    }
}

impl ExternalBackend {
    /// Spawns the child and completes the handshake.
    pub fn spawn(spec: &LaunchSpec, table: Arc<ClassTable>) -> Result<Self> {
        let (program, args) = spec
            .command
            .split_first()
            .ok_or_else(|| Error::Config("external backend command is empty".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| Error::Spawn {
                command: spec.display(),
                source,
            })?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut backend = Self {
            child,
            stdin,
            lines: rx,
            capabilities: Vec::new(),
            next_id: 0,
            request_timeout: Duration::from_millis(spec.request_timeout_ms.unwrap_or(DEFAULT_REQUEST_MS)),
            table,
            dead: None,
        };
        let timeout = Duration::from_millis(spec.handshake_timeout_ms.unwrap_or(DEFAULT_HANDSHAKE_MS));
        let hello = match backend.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(backend.violation(format!("reading handshake: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                backend.terminate("handshake timeout");
                return Err(Error::HandshakeTimeout(timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(backend.violation("backend exited before handshake".into()))
            }
        };
        let hello: Value = serde_json::from_str(&hello)
            .map_err(|e| backend.violation(format!("handshake is not JSON: {e}")))?;
        if hello.get("op").and_then(Value::as_str) != Some("hello") {
            return Err(backend.violation(format!("expected hello, got {hello}")));
        }
        if hello.get("protocol").and_then(Value::as_u64) != Some(PROTOCOL_VERSION) {
            return Err(backend.violation(format!("unsupported protocol in {hello}")));
        }
        let caps = hello
            .get("capabilities")
            .and_then(Value::as_array)
            .ok_or_else(|| backend.violation("handshake lacks capabilities".into()))?;
        backend.capabilities = caps
            .iter()
            .filter_map(|c| c.as_str().map(str::to_string))
            .collect();
        Ok(backend)
    }

    pub fn capabilities(&self) -> &[String] {
        &self.capabilities
    }

    pub fn supports(&self, op: &str) -> bool {
        self.capabilities.iter().any(|c| c == op)
    }

    pub fn is_alive(&self) -> bool {
        self.dead.is_none()
    }

    fn terminate(&mut self, reason: &str) {
        if self.dead.is_none() {
            self.dead = Some(reason.to_string());
        }
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn violation(&mut self, msg: String) -> Error {
        self.terminate(&msg);
        Error::ProtocolViolation(msg)
    }

    /// Sends one request and waits for its response payload.
    pub fn call(&mut self, op: &str, mut payload: Map<String, Value>) -> Result<Map<String, Value>> {
        if let Some(reason) = &self.dead {
            return Err(Error::Backend(format!("backend terminated: {reason}")));
        }
        if !self.supports(op) {
            return Err(Error::UnsupportedOperation(op.to_string()));
        }
        let id = self.next_id;
        self.next_id += 1;
        payload.insert("id".into(), json!(id));
        payload.insert("op".into(), json!(op));
        let mut line = serde_json::to_string(&Value::Object(payload))?;
        line.push('\n');
        let write = match self.stdin.as_mut() {
            Some(stdin) => stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()),
            None => Err(std::io::Error::new(std::io::ErrorKind::BrokenPipe, "stdin closed")),
        };
        if let Err(e) = write {
            return Err(self.violation(format!("writing request: {e}")));
        }
        let reply = match self.lines.recv_timeout(self.request_timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(self.violation(format!("reading response: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(self.violation(format!("no response to `{op}` within {:?}", self.request_timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(self.violation(format!("backend exited during `{op}`")))
            }
        };
        let reply: Value = match serde_json::from_str(&reply) {
            Ok(v) => v,
            Err(e) => return Err(self.violation(format!("response is not JSON ({e}): {reply}"))),
        };
        let Value::Object(obj) = reply else {
            return Err(self.violation(format!("response is not an object: {reply}")));
        };
        if obj.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(self.violation(format!("response id {:?} does not match {id}", obj.get("id"))));
        }
        match obj.get("ok").and_then(Value::as_bool) {
            Some(true) => Ok(obj),
            Some(false) => Err(Error::Backend(
                obj.get("error")
                    .and_then(Value::as_str)
                    .unwrap_or("unspecified backend error")
                    .to_string(),
            )),
            None => Err(self.violation(format!("response lacks `ok`: {}", Value::Object(obj)))),
        }
    }

    fn field<'a>(&mut self, obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
        match obj.get(key) {
            Some(v) => Ok(v),
            None => Err(self.violation(format!("response lacks `{key}`"))),
        }
    }

    fn image_field(&mut self, obj: &Map<String, Value>, key: &str) -> Result<RgbImage> {
        let bytes = self.b64_field(obj, key)?;
        RgbImage::decode_png(&bytes).map_err(|e| self.violation(format!("`{key}`: {e}")))
    }

    fn mask_field(&mut self, obj: &Map<String, Value>, key: &str) -> Result<ClassMask> {
        let bytes = self.b64_field(obj, key)?;
        ClassMask::decode_png(&bytes, self.table.clone()).map_err(|e| self.violation(format!("`{key}`: {e}")))
    }

    fn b64_field(&mut self, obj: &Map<String, Value>, key: &str) -> Result<Vec<u8>> {
        let text = match self.field(obj, key)?.as_str() {
            Some(t) => t.to_string(),
            None => return Err(self.violation(format!("`{key}` is not a string"))),
        };
        B64.decode(text).map_err(|e| self.violation(format!("`{key}` is not base64: {e}")))
    }

    pub fn generate_scene(&mut self, genome: &Genome) -> Result<SceneData> {
        let mut req = Map::new();
        req.insert("genome".into(), json!(genome.values()));
        let obj = self.call("generate_scene", req)?;
        let simulated = self.image_field(&obj, "image")?;
        let ground_truth = self.mask_field(&obj, "mask")?;
        let on_road = match self.field(&obj, "on_road")?.as_bool() {
            Some(b) => b,
            None => return Err(self.violation("`on_road` is not a boolean".into())),
        };
        SceneData::new(simulated, ground_truth, on_road).map_err(|e| self.violation(e.to_string()))
    }

    pub fn realize(&mut self, scene: &SceneData) -> Result<RgbImage> {
        let mut req = Map::new();
        req.insert("mask".into(), json!(B64.encode(scene.ground_truth.encode_png()?)));
        req.insert("image".into(), json!(B64.encode(scene.simulated.encode_png()?)));
        let obj = self.call("realize", req)?;
        self.image_field(&obj, "image")
    }

    pub fn predict(&mut self, image: &RgbImage) -> Result<ClassMask> {
        let mut req = Map::new();
        req.insert("image".into(), json!(B64.encode(image.encode_png()?)));
        let obj = self.call("predict", req)?;
        self.mask_field(&obj, "mask")
    }

    pub fn extract_features(&mut self, image: &RgbImage) -> Result<FeatureVector> {
        let mut req = Map::new();
        req.insert("image".into(), json!(B64.encode(image.encode_png()?)));
        let obj = self.call("extract_features", req)?;
        let values: Option<Vec<f64>> = self
            .field(&obj, "features")?
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect());
        match values.map(FeatureVector::new) {
            Some(Ok(f)) => Ok(f),
            _ => Err(self.violation("`features` is not an array of finite numbers".into())),
        }
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved child exit on its own
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Several processes of one backend; each call checks out an idle one.
#[derive(Debug)]
pub struct ExternalPool {
    idle: Mutex<Vec<ExternalBackend>>,
    available: Condvar,
    capabilities: Vec<String>,
}

impl ExternalPool {
    pub fn spawn(spec: &LaunchSpec, workers: usize, table: Arc<ClassTable>) -> Result<Self> {
        let handles = (0..workers.max(1))
            .map(|_| ExternalBackend::spawn(spec, table.clone()))
            .collect::<Result<Vec<_>>>()?;
        let capabilities = handles[0].capabilities().to_vec();
        Ok(Self {
            idle: Mutex::new(handles),
            available: Condvar::new(),
            capabilities,
        })
    }

    pub fn capabilities(&self) -> &[String] {
        &self.capabilities
    }

    /// This pool, provided it advertises `op`.
    pub fn require(self: &Arc<Self>, op: &str) -> Result<Arc<Self>> {
        if self.capabilities.iter().any(|c| c == op) {
            Ok(self.clone())
        } else {
            Err(Error::UnsupportedOperation(format!("backend does not advertise `{op}`")))
        }
    }

    fn with<T>(&self, f: impl FnOnce(&mut ExternalBackend) -> Result<T>) -> Result<T> {
        let mut handle = {
            let mut idle = self.idle.lock().expect("pool lock");
            loop {
                if let Some(h) = idle.pop() {
                    break h;
                }
                idle = self.available.wait(idle).expect("pool lock");
            }
        };
        let out = f(&mut handle);
        self.idle.lock().expect("pool lock").push(handle);
        self.available.notify_one();
        out
    }
}

impl SceneGenerator for ExternalPool {
    fn generate_scene(&self, genome: &Genome) -> Result<SceneData> {
        self.with(|b| b.generate_scene(genome))
    }
}

impl Realizer for ExternalPool {
    fn realize(&self, scene: &SceneData) -> Result<RgbImage> {
        self.with(|b| b.realize(scene))
    }
}

impl Predictor for ExternalPool {
    fn predict(&self, image: &RgbImage) -> Result<ClassMask> {
        self.with(|b| b.predict(image))
    }
}

impl FeatureExtractor for ExternalPool {
    fn extract_features(&self, image: &RgbImage) -> Result<FeatureVector> {
        self.with(|b| b.extract_features(image))
    }
}

/// Serves `ports` over the wire protocol until `input` closes.
///
/// Bad requests get an `ok:false` reply; the loop itself never fails on them.
pub fn serve<R: BufRead, W: Write>(ports: &Ports, input: R, mut output: W) -> Result<()> {
    let hello = json!({"op": "hello", "protocol": PROTOCOL_VERSION, "capabilities": OPERATIONS});
    writeln!(output, "{hello}").map_err(|e| Error::io("<stdout>", e))?;
    output.flush().map_err(|e| Error::io("<stdout>", e))?;
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Value>(&line) {
            Ok(req) => {
                let id = req.get("id").cloned().unwrap_or(Value::Null);
                match answer(ports, &req) {
                    Ok(mut payload) => {
                        payload.insert("id".into(), id);
                        payload.insert("ok".into(), json!(true));
                        Value::Object(payload)
                    }
                    Err(e) => json!({"id": id, "ok": false, "error": e.to_string()}),
                }
            }
            Err(e) => json!({"id": Value::Null, "ok": false, "error": format!("malformed request: {e}")}),
        };
        writeln!(output, "{reply}").map_err(|e| Error::io("<stdout>", e))?;
        output.flush().map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn answer(ports: &Ports, req: &Value) -> Result<Map<String, Value>> {
    let b64 = |key: &str| -> Result<Vec<u8>> {
        let text = req
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Malformed(format!("missing `{key}`")))?;
        B64.decode(text).map_err(|e| Error::Malformed(format!("`{key}`: {e}")))
    };
    let mut out = Map::new();
    match req.get("op").and_then(Value::as_str) {
        Some("generate_scene") => {
            let genome: Vec<f64> = req
                .get("genome")
                .and_then(Value::as_array)
                .and_then(|a| a.iter().map(Value::as_f64).collect())
                .ok_or_else(|| Error::Malformed("`genome` must be an array of numbers".into()))?;
            let scene = ports.generate_scene(&Genome::new(genome))?;
            out.insert("image".into(), json!(B64.encode(scene.simulated.encode_png()?)));
            out.insert("mask".into(), json!(B64.encode(scene.ground_truth.encode_png()?)));
            out.insert("on_road".into(), json!(scene.on_road));
        }
        Some("realize") => {
            let mask = ClassMask::decode_png(&b64("mask")?, ports.class_table.clone())?;
            let image = RgbImage::decode_png(&b64("image")?)?;
            let scene = SceneData::new(image, mask, true)?;
            out.insert("image".into(), json!(B64.encode(ports.realize(&scene)?.encode_png()?)));
        }
        Some("predict") => {
            let image = RgbImage::decode_png(&b64("image")?)?;
            out.insert("mask".into(), json!(B64.encode(ports.predict(&image)?.encode_png()?)));
        }
        Some("extract_features") => {
            let image = RgbImage::decode_png(&b64("image")?)?;
            out.insert("features".into(), json!(ports.extract_features(&image)?.values()));
        }
        Some(other) => return Err(Error::UnsupportedOperation(other.to_string())),
        None => return Err(Error::Malformed("request has no `op`".into())),
    }
    Ok(out)
}
