#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

use serde_json::{json, Value};

use adabal_core::dataset::{make_synthetic, SyntheticSpec};

pub const BIN: &str = env!("CARGO_BIN_EXE_adabal");

pub fn manifests() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("manifests")
}

pub fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// A `adabal serve` child process on an ephemeral port. Dropping it sends SIGKILL.
pub struct Server {
    child: Child,
    pub addr: String,
}

impl Server {
    pub fn start(manifest: &Path, state: &Path) -> Self {
        let mut child = Command::new(BIN)
            .args(["serve", "--bind", "127.0.0.1:0", "--manifest", manifest.to_str().unwrap()])
            .args(["--state-dir", state.to_str().unwrap()])
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on http://").unwrap_or_else(|| panic!("{line}")).to_string();
        Self { child, addr }
    }

    pub fn call(&self, method: &str, path: &str, body: Option<Value>) -> (u16, Value) {
        call(&self.addr, method, path, body)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One HTTP/1.1 request on a fresh connection.
pub fn call(addr: &str, method: &str, path: &str, body: Option<Value>) -> (u16, Value) {
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, payload) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    (status, serde_json::from_str(payload).unwrap_or(Value::String(payload.to_string())))
}

/// Label submission answering `batch` from the true labels.
pub fn answers(batch: &Value, labels: &[u8]) -> Value {
    let map: serde_json::Map<String, Value> = batch["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|it| {
            let i = it["index"].as_u64().unwrap() as usize;
            (i.to_string(), json!(labels[i]))
        })
        .collect();
    json!({ "labels": map })
}

/// Writes a one-dataset manifest (300 synthetic points) and returns it with the labels.
pub fn serve_manifest(dir: &Path) -> (PathBuf, Vec<u8>) {
    let spec = SyntheticSpec::clustered_and_scattered(300);
    let path = dir.join("serve.json");
    write_json(&path, &json!({ "datasets": [{ "name": "toy", "kind": "synthetic", "seed": 3, "spec": spec }] }));
    let labels = make_synthetic(&spec, 3).unwrap().labels;
    (path, labels)
}
