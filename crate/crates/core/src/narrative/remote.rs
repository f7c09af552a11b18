//! Text-in, text-out access to a chat-completion endpoint.

use std::fmt;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

/// Environment variable holding the bearer token, if the endpoint needs one.
pub const TOKEN_ENV: &str = "MEMORYPOD_LLM_TOKEN";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionLimits {
    pub max_tokens: u32,
}

impl Default for CompletionLimits {
    fn default() -> Self {
        CompletionLimits { max_tokens: 1024 }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompletionError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP {0}")]
    Status(u16),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
}

pub trait CompletionClient: Send + Sync {
    fn model(&self) -> &str;
    fn complete(&self, prompt: &str, limits: &CompletionLimits) -> Result<String, CompletionError>;
}

/// Blocking client for an OpenAI-style `{model, messages, max_tokens}`
/// endpoint. Replies are read from `choices[0].message.content`, or from
/// `content[0].text` for endpoints using that shape.
///
/// Must not be called from inside an async runtime thread.
#[derive(Clone)]
pub struct HttpChatClient {
    endpoint: String,
    model: String,
    token: Option<String>,
    timeout: Duration,
}

impl fmt::Debug for HttpChatClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpChatClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl HttpChatClient {
    /// Reads the token from [`TOKEN_ENV`].
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        HttpChatClient { endpoint: endpoint.into(), model: model.into(), token, timeout: DEFAULT_TIMEOUT }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn transport(e: reqwest::Error) -> CompletionError {
    if e.is_timeout() {
        CompletionError::Timeout
    } else {
        CompletionError::Transport(e.to_string())
    }
}

pub(crate) fn extract_reply(body: &Value) -> Option<&str> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .or_else(|| body.pointer("/content/0/text").and_then(Value::as_str))
}

impl CompletionClient for HttpChatClient {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str, limits: &CompletionLimits) -> Result<String, CompletionError> {
        let client = reqwest::blocking::Client::builder().timeout(self.timeout).build().map_err(transport)?;
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": limits.max_tokens,
        });
        let mut req = client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(transport)?;
        if !resp.status().is_success() {
            return Err(CompletionError::Status(resp.status().as_u16()));
        }
        let value: Value = resp.json().map_err(|e| {
            if e.is_timeout() {
                CompletionError::Timeout
            } else {
                CompletionError::BadResponse(e.to_string())
            }
        })?;
        extract_reply(&value)
            .map(str::to_owned)
            .ok_or_else(|| CompletionError::BadResponse("no message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serves one connection: returns the raw request body via the join
    /// handle after replying with `status` and `body` (or never replying).
    fn stub(status: u16, body: Option<&'static str>) -> (String, thread::JoinHandle<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = String::new();
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
                headers.push_str(&line);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let mut stream = stream;
            match body {
                Some(b) => {
                    let resp = format!(
                        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{b}",
                        b.len()
                    );
                    stream.write_all(resp.as_bytes()).unwrap();
                }
                None => thread::sleep(Duration::from_millis(1500)),
            }
            (headers, String::from_utf8(buf).unwrap())
        });
        (url, handle)
    }

    #[test]
    fn openai_shape() {
        let (url, h) = stub(200, Some(r#"{"choices":[{"message":{"role":"assistant","content":"OVERVIEW: hi"}}]}"#));
        let client = HttpChatClient::from_env(url, "m1").with_token(Some("sekrit".into()));
        let reply = client.complete("prompt text", &CompletionLimits { max_tokens: 77 }).unwrap();
        assert_eq!(reply, "OVERVIEW: hi");
        let (headers, body) = h.join().unwrap();
        assert!(headers.to_ascii_lowercase().contains("authorization: bearer sekrit"));
        let body: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(body, json!({"model": "m1", "messages": [{"role": "user", "content": "prompt text"}], "max_tokens": 77}));
    }

    #[test]
    fn content_block_shape() {
        let (url, h) = stub(200, Some(r#"{"content":[{"type":"text","text":"DURATION: 3"}]}"#));
        let client = HttpChatClient::from_env(url, "m").with_token(None);
        assert_eq!(client.complete("p", &CompletionLimits::default()).unwrap(), "DURATION: 3");
        let (headers, _) = h.join().unwrap();
        assert!(!headers.to_ascii_lowercase().contains("authorization"));
    }

    #[test]
    fn errors() {
        let (url, h) = stub(503, Some("{}"));
        let client = HttpChatClient::from_env(url, "m");
        assert_eq!(client.complete("p", &CompletionLimits::default()), Err(CompletionError::Status(503)));
        h.join().unwrap();

        let (url, h) = stub(200, Some(r#"{"choices":[]}"#));
        let client = HttpChatClient::from_env(url, "m");
        assert!(matches!(client.complete("p", &CompletionLimits::default()), Err(CompletionError::BadResponse(_))));
        h.join().unwrap();

        let (url, h) = stub(200, None);
        let client = HttpChatClient::from_env(url, "m").with_timeout(Duration::from_millis(200));
        assert_eq!(client.complete("p", &CompletionLimits::default()), Err(CompletionError::Timeout));
        h.join().unwrap();
    }
}
