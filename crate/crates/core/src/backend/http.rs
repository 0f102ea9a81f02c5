//! Generic single-turn completion client over JSON/HTTP.
//!
//! Request body: `{"model", "prompt", "temperature", "max_output_tokens"}`.
//! Response body: `{"text"}`. The bearer token is read from the environment
//! variable named by `token_env`.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, Capabilities, DEFAULT_MAX_INPUT_CHARS, DEFAULT_MAX_OUTPUT_CHARS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_env: Option<String>,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_input")]
    pub max_input_chars: usize,
    #[serde(default = "default_output")]
    pub max_output_chars: usize,
    #[serde(default = "default_true")]
    pub supports_concurrent_calls: bool,
}

fn default_max_tokens() -> usize {
    1024
}
fn default_timeout() -> u64 {
    60
}
fn default_input() -> usize {
    DEFAULT_MAX_INPUT_CHARS
}
fn default_output() -> usize {
    DEFAULT_MAX_OUTPUT_CHARS
}
fn default_true() -> bool {
    true
}

impl HttpConfig {
    pub fn new(endpoint: &str, model: &str) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            temperature: 0.0,
            token_env: None,
            max_output_tokens: default_max_tokens(),
            timeout_secs: default_timeout(),
            max_input_chars: default_input(),
            max_output_chars: default_output(),
            supports_concurrent_calls: true,
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let err = |m: String| BackendError::Parse {
            path: path.display().to_string(),
            message: m,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_output_tokens: usize,
}

#[derive(Deserialize)]
struct Response {
    text: String,
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        Self { config, agent }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn token(&self) -> Result<Option<String>, BackendError> {
        match &self.config.token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| BackendError::Auth(format!("environment variable {var} is not set"))),
        }
    }
}

impl Backend for HttpBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_input_chars: self.config.max_input_chars,
            max_output_chars: self.config.max_output_chars,
            supports_concurrent_calls: self.config.supports_concurrent_calls,
        }
    }

    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        let body = Request {
            model: &self.config.model,
            prompt,
            temperature: self.config.temperature,
            max_output_tokens: self.config.max_output_tokens,
        };
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .set("Content-Type", "application/json");
        if let Some(token) = self.token()? {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let payload = serde_json::to_string(&body).expect("request serializes");
        let resp = match req.send_string(&payload) {
            Ok(r) => r,
            Err(ureq::Error::Status(code @ (401 | 403), _)) => {
                return Err(BackendError::Auth(format!("HTTP {code}")))
            }
            Err(ureq::Error::Status(code, r)) if code >= 500 => {
                return Err(BackendError::Unavailable(format!(
                    "HTTP {code} {}",
                    r.status_text()
                )))
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(BackendError::MalformedResponse(format!("HTTP {code}")))
            }
            Err(ureq::Error::Transport(t)) => return Err(BackendError::Unavailable(t.to_string())),
        };
        let text = resp
            .into_string()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        serde_json::from_str::<Response>(&text)
            .map(|r| r.text)
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// One-shot loopback server; returns the endpoint and the captured request.
    fn serve(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf).to_string();
                if let Some(idx) = text.find("\r\n\r\n") {
                    let len = text
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length: ").map(|v| v.trim().parse::<usize>().unwrap()))
                        .unwrap_or(0);
                    if buf.len() >= idx + 4 + len {
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            stream.write_all(response.as_bytes()).unwrap();
            String::from_utf8_lossy(&buf).to_string()
        });
        (format!("http://{addr}/v1/complete"), handle)
    }

    #[test]
    fn canned_completion() {
        let (url, h) = serve("200 OK", r#"{"text": "[Finish]: yes"}"#);
        let mut cfg = HttpConfig::new(&url, "m1");
        cfg.token_env = Some("HAMMR_TEST_TOKEN_SET".into());
        std::env::set_var("HAMMR_TEST_TOKEN_SET", "sekrit");
        let b = HttpBackend::new(cfg);
        assert_eq!(b.generate("hello").unwrap(), "[Finish]: yes");
        let req = h.join().unwrap();
        assert!(req.contains("Bearer sekrit"));
        assert!(req.contains(r#""model":"m1""#));
        assert!(req.contains(r#""temperature":0.0"#));
        assert!(req.contains(r#""prompt":"hello""#));
    }

    #[test]
    fn status_mapping() {
        let (url, h) = serve("401 Unauthorized", "");
        assert!(matches!(HttpBackend::new(HttpConfig::new(&url, "m")).generate("p"), Err(BackendError::Auth(_))));
        h.join().unwrap();
        let (url, h) = serve("503 Service Unavailable", "");
        assert!(matches!(
            HttpBackend::new(HttpConfig::new(&url, "m")).generate("p"),
            Err(BackendError::Unavailable(_))
        ));
        h.join().unwrap();
        let (url, h) = serve("200 OK", "<html>nope</html>");
        assert!(matches!(
            HttpBackend::new(HttpConfig::new(&url, "m")).generate("p"),
            Err(BackendError::MalformedResponse(_))
        ));
        h.join().unwrap();
    }

    #[test]
    fn missing_token_env_is_auth_error() {
        let mut cfg = HttpConfig::new("http://127.0.0.1:9/", "m");
        cfg.token_env = Some("HAMMR_TEST_TOKEN_UNSET_XYZ".into());
        assert!(matches!(HttpBackend::new(cfg).generate("p"), Err(BackendError::Auth(_))));
    }

    #[test]
    fn unreachable_is_unavailable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let b = HttpBackend::new(HttpConfig::new(&format!("http://{addr}/"), "m"));
        assert!(matches!(b.generate("p"), Err(BackendError::Unavailable(_))));
    }
}
