use std::time::Duration;

use serde_json::Value;

/// Raw HTTP outcome of one POST.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

/// Moves one JSON request to a URL. Errors are connection-level failures;
/// HTTP error statuses come back as responses.
pub trait Transport: Send + Sync {
    fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<TransportResponse, String>;
}

/// Blocking HTTP client.
#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<TransportResponse, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut request = agent.post(url);
        for (name, value) in headers {
            request = request.header(name.as_str(), value.as_str());
        }
        let mut response = request.send_json(body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(TransportResponse { status, body })
    }
}

/// Transport that must never be reached; used wherever network access is
/// forbidden, e.g. replay runs.
#[derive(Debug, Default)]
pub struct NoNetwork;

impl Transport for NoNetwork {
    fn post(&self, url: &str, _: &[(String, String)], _: &Value, _: Duration) -> Result<TransportResponse, String> {
        panic!("network access attempted in offline mode: POST {url}");
    }
}

/// Transport answering from a closure over the request body.
pub struct FnTransport<F>(pub F);

impl<F> Transport for FnTransport<F>
where
    F: Fn(&str, &Value) -> Result<TransportResponse, String> + Send + Sync,
{
    fn post(&self, url: &str, _: &[(String, String)], body: &Value, _: Duration) -> Result<TransportResponse, String> {
        (self.0)(url, body)
    }
}

/// Wraps a reply text in a minimal chat-completions response body.
pub fn completion_body(text: &str) -> String {
    serde_json::json!({
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
    })
    .to_string()
}
