use std::time::Duration;

use ema_core::rule::{FetchError, FetchGateway};

/// Fetch gateway that performs real HTTP GETs.
#[derive(Debug, Clone, Default)]
pub struct HttpGateway;

impl FetchGateway for HttpGateway {
    fn get_json(&self, url: &str, timeout: Duration) -> Result<serde_json::Value, FetchError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let mut response = agent.get(url).call().map_err(|e| match e {
            ureq::Error::Timeout(_) => FetchError::Timeout,
            other => FetchError::Transport(other.to_string()),
        })?;
        response
            .body_mut()
            .read_json::<serde_json::Value>()
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => FetchError::Timeout,
                other => FetchError::Decode(other.to_string()),
            })
    }
}
