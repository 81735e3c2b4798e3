//! Declarative remote-data fetches backing a condition's `data_fetching_rule`.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::eval::EvalContext;
use super::value::Value;

/// RFC 3986 unreserved characters pass through untouched.
const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.').remove(b'~');

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchDescriptor {
    pub method: String,
    pub url_template: String,
    pub extract_path: String,
    pub timeout_s: u64,
    pub on_error: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unclosed `{{` at byte {0}")]
    Unclosed(usize),
    #[error("empty or malformed placeholder at byte {0}")]
    BadPlaceholder(usize),
    #[error("placeholder `{0}` is not bound")]
    Unbound(String),
}

enum Piece<'a> {
    Text(&'a str),
    Var(&'a str),
}

fn split_template(template: &str) -> Result<Vec<Piece<'_>>, TemplateError> {
    let mut pieces = Vec::new();
    let mut rest = template;
    let mut base = 0;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(&rest[..open]));
        }
        let close = rest[open..]
            .find('}')
            .ok_or(TemplateError::Unclosed(base + open))?;
        let name = &rest[open + 1..open + close];
        let well_formed = !name.is_empty()
            && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
            && !name.as_bytes()[0].is_ascii_digit();
        if !well_formed {
            return Err(TemplateError::BadPlaceholder(base + open));
        }
        pieces.push(Piece::Var(name));
        base += open + close + 1;
        rest = &rest[open + close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest));
    }
    Ok(pieces)
}

impl FetchDescriptor {
    /// Variable names referenced by `{name}` placeholders in the URL template.
    pub fn placeholders(&self) -> Result<BTreeSet<String>, TemplateError> {
        Ok(split_template(&self.url_template)?
            .into_iter()
            .filter_map(|p| match p {
                Piece::Var(name) => Some(name.to_owned()),
                Piece::Text(_) => None,
            })
            .collect())
    }

    /// Substitutes placeholders from `ctx`, percent-encoding each value.
    pub fn resolve_url(&self, ctx: &EvalContext) -> Result<String, TemplateError> {
        let mut url = String::with_capacity(self.url_template.len());
        for piece in split_template(&self.url_template)? {
            match piece {
                Piece::Text(t) => url.push_str(t),
                Piece::Var(name) => {
                    let v = ctx
                        .get(name)
                        .ok_or_else(|| TemplateError::Unbound(name.to_owned()))?;
                    url.extend(utf8_percent_encode(&v.to_answer_text(), COMPONENT));
                }
            }
        }
        Ok(url)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("response was not a JSON document: {0}")]
    Decode(String),
}

/// The only channel through which rules observe the outside world.
pub trait FetchGateway: Send + Sync {
    fn get_json(&self, url: &str, timeout: Duration) -> Result<serde_json::Value, FetchError>;
}

/// Gateway for deployments without remote data; every fetch fails.
#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineGateway;

impl FetchGateway for OfflineGateway {
    fn get_json(&self, url: &str, _timeout: Duration) -> Result<serde_json::Value, FetchError> {
        Err(FetchError::Transport(format!("offline: {url}")))
    }
}

/// Fake gateway answering from a fixed URL table, recording every request.
#[derive(Debug, Default)]
pub struct ScriptedGateway {
    responses: HashMap<String, Result<serde_json::Value, FetchError>>,
    requests: Mutex<Vec<String>>,
}

impl ScriptedGateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn respond(mut self, url: impl Into<String>, body: serde_json::Value) -> Self {
        self.responses.insert(url.into(), Ok(body));
        self
    }

    pub fn fail(mut self, url: impl Into<String>, error: FetchError) -> Self {
        self.responses.insert(url.into(), Err(error));
        self
    }

    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().expect("request log poisoned").clone()
    }
}

impl FetchGateway for ScriptedGateway {
    fn get_json(&self, url: &str, _timeout: Duration) -> Result<serde_json::Value, FetchError> {
        self.requests
            .lock()
            .expect("request log poisoned")
            .push(url.to_owned());
        self.responses
            .get(url)
            .cloned()
            .unwrap_or_else(|| Err(FetchError::Transport(format!("no scripted response for {url}"))))
    }
}

/// Walks a dotted path; numeric segments index into arrays.
pub fn extract(doc: &serde_json::Value, path: &str) -> Option<Value> {
    let mut cur = doc;
    if !path.is_empty() {
        for seg in path.split('.') {
            cur = match cur {
                serde_json::Value::Object(map) => map.get(seg)?,
                serde_json::Value::Array(items) => items.get(seg.parse::<usize>().ok()?)?,
                _ => return None,
            };
        }
    }
    Value::from_json(cur)
}

/// Performs the fetch, falling back to `on_error` on any failure.
pub fn run_fetch(descriptor: &FetchDescriptor, ctx: &EvalContext, gateway: &dyn FetchGateway) -> Value {
    let url = match descriptor.resolve_url(ctx) {
        Ok(url) => url,
        Err(e) => {
            log::warn!("fetch skipped: {e}");
            return descriptor.on_error.clone();
        }
    };
    match gateway.get_json(&url, descriptor.timeout()) {
        Ok(doc) => extract(&doc, &descriptor.extract_path).unwrap_or_else(|| {
            log::warn!("fetch {url}: no scalar at `{}`", descriptor.extract_path);
            descriptor.on_error.clone()
        }),
        Err(e) => {
            log::warn!("fetch {url}: {e}");
            descriptor.on_error.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn weather() -> FetchDescriptor {
        FetchDescriptor {
            method: "GET".into(),
            url_template: "https://wttr.example/{city}".into(),
            extract_path: "current.temp_c".into(),
            timeout_s: 2,
            on_error: Value::Null,
        }
    }

    fn ctx() -> EvalContext {
        let mut c = EvalContext::new();
        c.set("city", "San Diego".into());
        c
    }

    #[test]
    fn extracts_value_at_path() {
        let gw = ScriptedGateway::new().respond("https://wttr.example/San%20Diego", json!({"current": {"temp_c": 12}}));
        assert_eq!(run_fetch(&weather(), &ctx(), &gw), Value::Number(12.0));
        assert_eq!(gw.requests(), vec!["https://wttr.example/San%20Diego"]);
    }

    #[test]
    fn timeout_yields_on_error() {
        let gw = ScriptedGateway::new().fail("https://wttr.example/San%20Diego", FetchError::Timeout);
        assert_eq!(run_fetch(&weather(), &ctx(), &gw), Value::Null);
    }

    #[test]
    fn missing_path_yields_on_error() {
        let mut d = weather();
        d.on_error = Value::Number(-1.0);
        let gw = ScriptedGateway::new().respond("https://wttr.example/San%20Diego", json!({"current": {}}));
        assert_eq!(run_fetch(&d, &ctx(), &gw), Value::Number(-1.0));
        let gw = ScriptedGateway::new().respond("https://wttr.example/San%20Diego", json!({"current": {"temp_c": [1, 2]}}));
        assert_eq!(run_fetch(&d, &ctx(), &gw), Value::Number(-1.0));
    }

    #[test]
    fn array_segments_index() {
        let doc = json!({"hourly": [{"t": 1}, {"t": 2}]});
        assert_eq!(extract(&doc, "hourly.1.t"), Some(Value::Number(2.0)));
        assert_eq!(extract(&doc, "hourly.9.t"), None);
    }

    #[test]
    fn placeholders_and_template_errors() {
        let d = weather();
        assert_eq!(d.placeholders().unwrap().into_iter().collect::<Vec<_>>(), vec!["city"]);
        let mut bad = weather();
        bad.url_template = "https://x/{city".into();
        assert_eq!(bad.placeholders().unwrap_err(), TemplateError::Unclosed(10));
        bad.url_template = "https://x/{}".into();
        assert!(matches!(bad.placeholders(), Err(TemplateError::BadPlaceholder(_))));
        assert_eq!(
            weather().resolve_url(&EvalContext::new()).unwrap_err(),
            TemplateError::Unbound("city".into())
        );
    }

    #[test]
    fn descriptor_wire_format() {
        let d: FetchDescriptor = serde_json::from_value(json!({
            "method": "GET",
            "url_template": "https://wttr.example/{city}",
            "extract_path": "current.temp_c",
            "timeout_s": 2,
            "on_error": null
        }))
        .unwrap();
        assert_eq!(d, weather());
    }
}
