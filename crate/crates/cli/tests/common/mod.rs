#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use serde_json::Value;

// 2023-11-14T12:00:00Z
pub const NOON: i64 = 1_699_963_200;
pub const NOON_RFC3339: &str = "2023-11-14T12:00:00Z";

pub fn ema() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ema"));
    cmd.env("RUST_LOG", "off");
    cmd
}

/// An `ema serve` child process, killed on drop.
pub struct Server {
    pub child: Child,
    pub base: String,
    agent: ureq::Agent,
}

impl Server {
    pub fn spawn(store: &Path, clock: &str, crash_at: Option<&str>) -> Server {
        let mut cmd = ema();
        cmd.args(["serve", "--bind", "127.0.0.1:0", "--clock", clock, "--store"])
            .arg(store)
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        if let Some(point) = crash_at {
            cmd.env("EMA_CRASH_AT", point);
        }
        let mut child = cmd.spawn().unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_owned();
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Server { child, base, agent }
    }

    pub fn send(&self, method: &str, path: &str, body: Option<&str>) -> Result<(u16, String), ureq::Error> {
        let url = format!("{}{path}", self.base);
        let mut response = match (method, body) {
            ("GET", _) => self.agent.get(&url).call()?,
            ("PUT", Some(b)) => self.agent.put(&url).content_type("application/json").send(b)?,
            ("POST", Some(b)) => self.agent.post(&url).content_type("application/json").send(b)?,
            other => panic!("{other:?}"),
        };
        let status = response.status().as_u16();
        Ok((status, response.body_mut().read_to_string()?))
    }

    pub fn json(&self, method: &str, path: &str, body: Value) -> (u16, Value) {
        let (status, text) = self.send(method, path, Some(&body.to_string())).unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub fn get(&self, path: &str) -> (u16, String) {
        self.send("GET", path, None).unwrap()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Strips `session_id` so transcripts from different front ends compare.
pub fn without_session_ids(jsonl: &str) -> Vec<Value> {
    jsonl
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("session_id");
            v
        })
        .collect()
}
