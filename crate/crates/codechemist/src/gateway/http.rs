//! OpenAI-style chat-completion HTTP backend.
//!
//! One wire protocol covers the hosted models we target; anything else can
//! implement [`Backend`](super::Backend) directly. Retries are limited to
//! transport failures, 5xx and 429, with exponential backoff.

use std::sync::{Condvar, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendDescriptor, BackendKind, CompletionRequest, GatewayError};

pub struct HttpChatBackend {
    descriptor: BackendDescriptor,
    client: reqwest::blocking::Client,
    in_flight: Semaphore,
}

/// Counting semaphore bounding simultaneous requests.
struct Semaphore {
    permits: Mutex<u32>,
    released: Condvar,
}

impl Semaphore {
    fn new(permits: u32) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.released.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore poisoned");
        *permits += 1;
        self.semaphore.released.notify_one();
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequestBody<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponseBody {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpChatBackend {
    pub fn new(descriptor: BackendDescriptor) -> Result<Self, GatewayError> {
        if descriptor.kind != BackendKind::HttpChat {
            return Err(GatewayError::InvalidDescriptor(
                "HttpChatBackend requires kind = http-chat".to_string(),
            ));
        }
        if descriptor.endpoint.is_none() {
            return Err(GatewayError::InvalidDescriptor(
                "http-chat backend requires an endpoint".to_string(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(descriptor.request_timeout())
            .build()
            .map_err(|e| GatewayError::InvalidDescriptor(e.to_string()))?;
        let in_flight = Semaphore::new(descriptor.max_in_flight);
        Ok(HttpChatBackend {
            descriptor,
            client,
            in_flight,
        })
    }

    fn credential(&self) -> Result<Option<String>, GatewayError> {
        match &self.descriptor.auth_env {
            Some(var) => match std::env::var(var) {
                Ok(value) if !value.is_empty() => Ok(Some(value)),
                _ => Err(GatewayError::AuthMissing(var.clone())),
            },
            None => Ok(None),
        }
    }

    fn attempt(
        &self,
        endpoint: &str,
        credential: Option<&str>,
        body: &ChatRequestBody<'_>,
    ) -> Result<String, AttemptError> {
        let mut builder = self.client.post(endpoint).json(body);
        if let Some(token) = credential {
            builder = builder.bearer_auth(token);
        }
        let response = builder
            .send()
            .map_err(|e| AttemptError::Retryable(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(AttemptError::Retryable(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(AttemptError::Fatal(format!("status {status}")));
        }
        let parsed: ChatResponseBody = response
            .json()
            .map_err(|e| AttemptError::Fatal(format!("malformed response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or(AttemptError::Refusal)
    }
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
    Refusal,
}

impl Backend for HttpChatBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let credential = self.credential()?;
        let _permit = self.in_flight.acquire();
        let endpoint = self
            .descriptor
            .endpoint
            .as_deref()
            .expect("validated at construction");
        let body = ChatRequestBody {
            model: &self.descriptor.model_name,
            messages: vec![ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature.as_f64(),
            top_p: request.top_p,
            max_tokens: request.max_tokens,
        };

        let attempts = self.descriptor.max_retries + 1;
        let mut backoff = self.descriptor.retry_initial_backoff();
        let mut last_detail = String::new();
        for attempt in 0..attempts {
            match self.attempt(endpoint, credential.as_deref(), &body) {
                Ok(text) => {
                    if text.trim().is_empty() {
                        return Err(GatewayError::BackendRefusal);
                    }
                    return Ok(text);
                }
                Err(AttemptError::Refusal) => return Err(GatewayError::BackendRefusal),
                Err(AttemptError::Fatal(detail)) => {
                    return Err(GatewayError::TransportExhausted {
                        attempts: attempt + 1,
                        detail,
                    })
                }
                Err(AttemptError::Retryable(detail)) => {
                    log::warn!(
                        "chat completion attempt {}/{} failed: {detail}",
                        attempt + 1,
                        attempts
                    );
                    last_detail = detail;
                    if attempt + 1 < attempts {
                        thread::sleep(backoff);
                        backoff = backoff.saturating_mul(2);
                    }
                }
            }
        }
        Err(GatewayError::TransportExhausted {
            attempts,
            detail: last_detail,
        })
    }
}

/// Spawns a throwaway single-threaded HTTP responder for tests.
#[cfg(test)]
mod test_server {
    use std::io::{Read, Write};
    use std::net::TcpListener;

    pub fn serve(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        format!("http://{addr}/v1/chat/completions")
    }
}
