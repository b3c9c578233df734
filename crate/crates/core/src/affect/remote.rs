//! Chat-completion wire types and the HTTP transport.

use super::estimator::{EstimateError, EstimatorConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Duration;

pub const API_KEY_ENV: &str = "AFFECT_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: &str) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: &str) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Debug, Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("transport: {0}")]
pub struct TransportError(pub String);

/// Sends one chat request and returns the assistant text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Bearer token. Never printed.
#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        ApiKey(key.into())
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug)]
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    key: ApiKey,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, key: ApiKey, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            agent,
            endpoint: endpoint.into(),
            key,
        }
    }

    pub fn from_env(config: &EstimatorConfig) -> Result<Self, EstimateError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| EstimateError::Config(format!("{API_KEY_ENV} is not set")))?;
        Ok(Self::new(config.endpoint_url.clone(), ApiKey::new(key), config.timeout()?))
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key.0))
            .send_json(request)
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            let snippet: String = body.chars().take(200).collect();
            return Err(TransportError(format!("HTTP {status}: {snippet}")));
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError("response has no message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serves exactly one request with `status` and `body`, handing back the
    /// raw request head and body it received.
    fn one_shot(status: &'static str, body: &'static str) -> (String, thread::JoinHandle<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
                head.push_str(&line);
            }
            let mut req_body = vec![0; len];
            reader.read_exact(&mut req_body).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            (head, String::from_utf8(req_body).unwrap())
        });
        (url, handle)
    }

    fn request() -> ChatRequest {
        ChatRequest {
            model: "gpt-4o-mini".into(),
            messages: vec![ChatMessage::system("rate it"), ChatMessage::user("楽しい")],
            temperature: 0.0,
        }
    }

    #[test]
    fn posts_json_with_bearer_and_reads_content() {
        let (url, server) = one_shot(
            "200 OK",
            r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"Pleasure: 80.0%, Misery: 20.0%, Arousal: 65.5%, Sleepiness: 34.5%"}}]}"#,
        );
        let t = HttpTransport::new(url, ApiKey::new("sk-test"), Duration::from_secs(5));
        let reply = t.complete(&request()).unwrap();
        assert!(reply.starts_with("Pleasure: 80.0%"));
        let (head, body) = server.join().unwrap();
        assert!(head.starts_with("POST /v1/chat/completions"));
        assert!(head.contains("Bearer sk-test"));
        let json: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(json["model"], "gpt-4o-mini");
        assert_eq!(json["temperature"], 0.0);
        assert_eq!(json["messages"][1]["content"], "楽しい");
    }

    #[test]
    fn http_error_is_transport_error() {
        let (url, server) = one_shot("500 Internal Server Error", r#"{"error":{"message":"boom"}}"#);
        let t = HttpTransport::new(url, ApiKey::new("k"), Duration::from_secs(5));
        let err = t.complete(&request()).unwrap_err();
        assert!(err.0.contains("500"), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn connection_refused_is_transport_error() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let t = HttpTransport::new(format!("http://127.0.0.1:{port}/"), ApiKey::new("k"), Duration::from_secs(2));
        assert!(t.complete(&request()).is_err());
    }

    #[test]
    fn key_is_redacted() {
        let t = HttpTransport::new("http://localhost/", ApiKey::new("sk-secret"), Duration::from_secs(1));
        assert!(!format!("{t:?}").contains("sk-secret"));
    }
}
