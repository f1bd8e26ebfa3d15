use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Constraint on the shape of a reply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputSchema {
    /// A JSON object `{ "<field>": <one of values> }`.
    Enum { field: String, values: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub system: String,
    pub user: String,
    pub schema: Option<OutputSchema>,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    Protocol(String),
    #[error("missing configuration: {0}")]
    Config(String),
}

/// A chat model reachable with one system and one user message.
pub trait LlmClient: Send + Sync {
    fn send(&self, request: &LlmRequest) -> Result<String, LlmError>;

    fn name(&self) -> String;
}

pub const ENV_BASE_URL: &str = "LANGGAME_LLM_BASE_URL";
pub const ENV_MODEL: &str = "LANGGAME_LLM_MODEL";
pub const ENV_API_KEY: &str = "LANGGAME_LLM_API_KEY";

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
#[derive(Clone, Debug)]
pub struct HttpLlm {
    pub base_url: String,
    pub model: String,
    api_key: Option<String>,
    pub temperature: f64,
    agent: ureq::Agent,
}

impl HttpLlm {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        HttpLlm { base_url: base_url.trim_end_matches('/').to_string(), model: model.to_string(), api_key, temperature: 0.0, agent }
    }

    /// Reads the endpoint, model and key from the environment.
    pub fn from_env() -> Result<Self, LlmError> {
        let base = std::env::var(ENV_BASE_URL).map_err(|_| LlmError::Config(format!("{ENV_BASE_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| LlmError::Config(format!("{ENV_MODEL} is not set")))?;
        let key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(HttpLlm::new(&base, &model, key, Duration::from_secs(60)))
    }

    pub fn request_body(&self, request: &LlmRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        if let Some(OutputSchema::Enum { field, values }) = &request.schema {
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": {
                    "name": "selection",
                    "strict": true,
                    "schema": {
                        "type": "object",
                        "properties": { field: { "type": "string", "enum": values } },
                        "required": [field],
                        "additionalProperties": false,
                    },
                },
            });
        }
        body
    }
}

impl LlmClient for HttpLlm {
    fn send(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let url = format!("{}/chat/completions", self.base_url);
        let mut call = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(self.request_body(request)).map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status { status, body: text });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| LlmError::Protocol(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Protocol("no choices[0].message.content".into()))
    }

    fn name(&self) -> String {
        format!("http:{}", self.model)
    }
}
