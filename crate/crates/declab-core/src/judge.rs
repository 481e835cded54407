//! Client for an external OpenAI-compatible judge endpoint that scores
//! caption pairs for correctness and detailedness (0-10 each).
//!
//! Nothing here performs network I/O unless [`request_verdict`] is invoked
//! explicitly; the rest of the crate stays fully offline.

use crate::{Error, Result};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// A caption pair to be judged against a reference scene description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub reference: String,
    pub caption_a: String,
    pub caption_b: String,
    pub template_id: String,
}

/// Integer scores in 0..=10 for each caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub correctness_a: u8,
    pub detailedness_a: u8,
    pub correctness_b: u8,
    pub detailedness_b: u8,
}

/// Verdict plus transport diagnostics.
#[derive(Debug, Clone)]
pub struct VerdictOutcome {
    pub verdict: JudgeVerdict,
    /// How many failed attempts preceded the successful one.
    pub retries: u32,
}

/// Endpoint coordinates and request policy.
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub initial_backoff: Duration,
}

impl EndpointConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        EndpointConfig {
            endpoint: endpoint.into(),
            api_key: None,
            model: "judge".into(),
            temperature: 0.0,
            max_retries: 3,
            initial_backoff: Duration::from_millis(50),
        }
    }

    /// Read `JUDGE_ENDPOINT` (required) and `JUDGE_API_KEY` (optional).
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var("JUDGE_ENDPOINT")
            .map_err(|_| Error::config("JUDGE_ENDPOINT is not set"))?;
        let mut cfg = EndpointConfig::new(endpoint);
        cfg.api_key = std::env::var("JUDGE_API_KEY").ok();
        Ok(cfg)
    }
}

/// Default prompt template. The upstream protocol's exact wording is not
/// published, so this is a stand-in paraphrase; pass your own template to
/// replace it.
pub const DEFAULT_TEMPLATE: &str = "\
You are shown a reference description of an image and two candidate captions.\n\
Reference: {reference}\n\
Caption A: {a}\n\
Caption B: {b}\n\
Rate each caption's correctness (agreement with the reference) and detailedness\n\
on a 0-10 integer scale. Reply exactly in the form:\n\
Caption A: Correctness: <int> Detailedness: <int>\n\
Caption B: Correctness: <int> Detailedness: <int>\n";

/// Substitute the request into a template. `{a}` and `{b}` are required
/// placeholders; `{reference}` is substituted when present.
pub fn format_judge_prompt(request: &JudgeRequest, template: &str) -> Result<String> {
    if !template.contains("{a}") {
        return Err(Error::Template("template lacks the {a} placeholder".into()));
    }
    if !template.contains("{b}") {
        return Err(Error::Template("template lacks the {b} placeholder".into()));
    }
    Ok(template
        .replace("{reference}", &request.reference)
        .replace("{a}", &request.caption_a)
        .replace("{b}", &request.caption_b))
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

/// Parse the documented response contract: the first two
/// `Correctness: <int>` matches belong to captions A and B, likewise for
/// `Detailedness: <int>`. Scores outside 0..=10 are rejected, never clamped.
pub fn parse_scores(content: &str) -> Result<JudgeVerdict> {
    let correctness = Regex::new(r"(?i)correctness:\s*(-?\d+)").expect("static regex");
    let detailedness = Regex::new(r"(?i)detailedness:\s*(-?\d+)").expect("static regex");
    let pull = |re: &Regex, what: &str| -> Result<(u8, u8)> {
        let values: Vec<i64> = re
            .captures_iter(content)
            .filter_map(|c| c.get(1).and_then(|m| m.as_str().parse::<i64>().ok()))
            .collect();
        if values.len() < 2 {
            return Err(Error::Parse {
                reason: format!("expected two {what} scores, found {}", values.len()),
                raw: content.to_string(),
            });
        }
        let a = validate_score(values[0], what, content)?;
        let b = validate_score(values[1], what, content)?;
        Ok((a, b))
    };
    let (correctness_a, correctness_b) = pull(&correctness, "correctness")?;
    let (detailedness_a, detailedness_b) = pull(&detailedness, "detailedness")?;
    Ok(JudgeVerdict {
        correctness_a,
        detailedness_a,
        correctness_b,
        detailedness_b,
    })
}

fn validate_score(value: i64, what: &str, raw: &str) -> Result<u8> {
    if !(0..=10).contains(&value) {
        return Err(Error::Parse {
            reason: format!("{what} score {value} outside 0..=10"),
            raw: raw.to_string(),
        });
    }
    Ok(value as u8)
}

/// POST the payload as a chat-completions request and parse the verdict.
/// Connection failures and 5xx responses are retried with exponential
/// backoff up to `max_retries` times; other statuses fail immediately.
pub fn request_verdict(
    config: &EndpointConfig,
    payload: &str,
    timeout: Duration,
) -> Result<VerdictOutcome> {
    let client = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| Error::Connection(format!("client build failed: {e}")))?;
    let body = ChatBody {
        model: &config.model,
        messages: vec![ChatMessage {
            role: "user",
            content: payload,
        }],
        temperature: config.temperature,
    };

    let mut retries = 0u32;
    let mut backoff = config.initial_backoff;
    loop {
        let mut request = client.post(&config.endpoint).json(&body);
        if let Some(key) = &config.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let attempt: Result<JudgeVerdict> = match request.send() {
            Err(e) => Err(Error::Connection(e.to_string())),
            Ok(response) => {
                let status = response.status();
                let text = response
                    .text()
                    .map_err(|e| Error::Connection(format!("reading body: {e}")))?;
                if status.is_success() {
                    let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| {
                        Error::Parse {
                            reason: format!("response is not a chat completion: {e}"),
                            raw: text.clone(),
                        }
                    })?;
                    let content = parsed
                        .choices
                        .first()
                        .map(|c| c.message.content.as_str())
                        .ok_or_else(|| Error::Parse {
                            reason: "empty choices".into(),
                            raw: text.clone(),
                        })?;
                    parse_scores(content)
                } else {
                    Err(Error::Status {
                        status: status.as_u16(),
                        body: text,
                    })
                }
            }
        };

        match attempt {
            Ok(verdict) => return Ok(VerdictOutcome { verdict, retries }),
            Err(e) => {
                let transient = matches!(&e, Error::Connection(_))
                    || matches!(&e, Error::Status { status, .. } if *status >= 500);
                if !transient || retries >= config.max_retries {
                    return Err(e);
                }
                retries += 1;
                std::thread::sleep(backoff);
                backoff = backoff.saturating_mul(2);
            }
        }
    }
}
