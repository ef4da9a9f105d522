use std::time::Duration;

use regex::Regex;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::dsl::AffordanceProgram;

/// Remote program-proposal endpoint. Everything else in the crate runs
/// offline; this is the one optional network touchpoint, and it is off
/// unless the endpoint variable is set.
#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

pub const ENDPOINT_VAR: &str = "TABRL_PROPOSER_URL";
pub const KEY_VAR: &str = "TABRL_PROPOSER_KEY";
pub const MODEL_VAR: &str = "TABRL_PROPOSER_MODEL";

impl FetchConfig {
    /// None when no endpoint is configured; callers then use the bundled
    /// reference programs.
    pub fn from_env() -> Option<FetchConfig> {
        let endpoint = std::env::var(ENDPOINT_VAR).ok()?;
        Some(FetchConfig {
            endpoint,
            api_key: std::env::var(KEY_VAR).ok(),
            model: std::env::var(MODEL_VAR).unwrap_or_else(|_| "program-proposer".into()),
            timeout: Duration::from_secs(30),
        })
    }
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("response carries no fenced JSON block")]
    NoJsonBlock,
    #[error("fenced block is not valid JSON: {0}")]
    BadJson(String),
    #[error("every proposed program was rejected")]
    Empty,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

/// First fenced code block in the reply, with an optional `json` tag.
fn extract_fenced(text: &str) -> Option<&str> {
    // Non-greedy so multiple blocks pick the first.
    let re = Regex::new(r"(?s)```(?:json)?\s*(.*?)```").unwrap();
    re.captures(text).map(|c| c.get(1).unwrap().as_str())
}

/// Crops used to smoke-test proposals before they reach a live policy:
/// one letter and one bowl from a canonical rendered scene.
fn probe_crops() -> Vec<Vec<f64>> {
    use crate::sim::reset;
    use crate::surrogate::detect::{detect_objects, DetectorConfig};
    use crate::{EpisodeConfig, TaskSpec};

    let task = TaskSpec::Lh { max_steps: 30 };
    let (scene, _) = reset(&task, &EpisodeConfig::default()).expect("probe scene");
    let mut rng = crate::rng::stream(0, "probe", 0);
    let det = detect_objects(&scene, &DetectorConfig::noiseless(), &mut rng);
    let letter = (0..det.len())
        .find(|&k| det.labels[k].kind == crate::ObjectKind::Letter)
        .unwrap();
    let bowl = (0..det.len())
        .find(|&k| det.labels[k].kind == crate::ObjectKind::Bowl)
        .unwrap();
    vec![det.crops[letter].clone(), det.crops[bowl].clone()]
}

/// Parses, schema-checks, and probe-runs every proposal in a reply body.
/// Rejected candidates are logged and dropped rather than failing the
/// whole batch.
pub fn accept_proposals(reply_text: &str) -> Result<Vec<AffordanceProgram>, FetchError> {
    let block = extract_fenced(reply_text).ok_or(FetchError::NoJsonBlock)?;
    let parsed: Value =
        serde_json::from_str(block).map_err(|e| FetchError::BadJson(e.to_string()))?;
    let items: Vec<Value> = match parsed {
        Value::Array(items) => items,
        single @ Value::Object(_) => vec![single],
        other => return Err(FetchError::BadJson(format!("expected object or array, got {other}"))),
    };

    let probes = probe_crops();
    let side = 2 * crate::sim::glyphs::CROP_RADIUS;
    let mut accepted = Vec::new();
    for (k, item) in items.iter().enumerate() {
        let program = match AffordanceProgram::from_value(item) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("dropping proposal {k}: {e}");
                continue;
            }
        };
        let mut ok = true;
        for crop in &probes {
            if let Err(e) = super::affordance::interpret_affordance(&program, crop, side) {
                log::warn!("dropping proposal {k} ({}): probe run failed: {e}", program.name);
                ok = false;
                break;
            }
        }
        if ok {
            accepted.push(program);
        }
    }
    if accepted.is_empty() {
        return Err(FetchError::Empty);
    }
    Ok(accepted)
}

/// Asks the configured endpoint for affordance-program proposals and
/// returns the vetted survivors.
pub fn fetch_programs(
    cfg: &FetchConfig,
    prompt: &str,
) -> Result<Vec<AffordanceProgram>, FetchError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(cfg.timeout)
        .build()?;
    let body = serde_json::json!({
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
    });
    let mut req = client.post(&cfg.endpoint).json(&body);
    if let Some(key) = &cfg.api_key {
        req = req.bearer_auth(key);
    }
    let resp: ChatResponse = req.send()?.error_for_status()?.json()?;
    let content = resp
        .choices
        .first()
        .map(|c| c.message.content.as_str())
        .unwrap_or_default();
    accept_proposals(content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// One-shot canned HTTP server; returns the URL to hit.
    fn serve_once(body: String) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            let (mut sock, _) = listener.accept().unwrap();
            // Drain the request: headers, then the announced body length.
            let mut buf = Vec::new();
            let mut chunk = [0u8; 1024];
            let (mut header_end, mut content_len) = (None, 0usize);
            loop {
                let n = sock.read(&mut chunk).unwrap();
                if n == 0 {
                    break;
                }
                buf.extend_from_slice(&chunk[..n]);
                if header_end.is_none() {
                    if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                        header_end = Some(pos + 4);
                        let headers = String::from_utf8_lossy(&buf[..pos]);
                        for line in headers.lines() {
                            if let Some(v) = line
                                .to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().to_string())
                            {
                                content_len = v.parse().unwrap_or(0);
                            }
                        }
                    }
                }
                if let Some(h) = header_end {
                    if buf.len() >= h + content_len {
                        break;
                    }
                }
            }
            let resp = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            sock.write_all(resp.as_bytes()).unwrap();
            sock.flush().unwrap();
        });
        format!("http://{addr}")
    }

    fn chat_reply(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        })
        .to_string()
    }

    fn cfg(url: String) -> FetchConfig {
        FetchConfig {
            endpoint: url,
            api_key: Some("test-key".into()),
            model: "canned".into(),
            timeout: Duration::from_secs(5),
        }
    }

    #[test]
    fn fetch_accepts_valid_programs_and_drops_broken_ones() {
        let content = "Here are two candidates.\n```json\n[\n  {\"name\": \"good\", \"ops\": [{\"op\": \"object_mask\"}, {\"op\": \"normalize\"}]},\n  {\"name\": \"no_norm\", \"ops\": [{\"op\": \"object_mask\"}]}\n]\n```\nDone.";
        let url = serve_once(chat_reply(content));
        let programs = fetch_programs(&cfg(url), "propose").unwrap();
        assert_eq!(programs.len(), 1);
        assert_eq!(programs[0].name, "good");
    }

    #[test]
    fn probe_failures_are_dropped_too() {
        // Schema-valid, but NaNs at runtime: sqrt of a negative buffer.
        let content = "```json\n[\n  {\"name\": \"nan_trap\", \"ops\": [{\"op\": \"add\", \"c\": -2.0}, {\"op\": \"power\", \"gamma\": 0.5}, {\"op\": \"normalize\"}]},\n  {\"name\": \"good\", \"ops\": [{\"op\": \"object_mask\"}, {\"op\": \"normalize\"}]}\n]\n```";
        let programs = accept_proposals(content).unwrap();
        assert_eq!(programs.len(), 1);
        assert_eq!(programs[0].name, "good");
    }

    #[test]
    fn missing_fence_and_bad_json_are_distinct_errors() {
        assert!(matches!(
            accept_proposals("no code here"),
            Err(FetchError::NoJsonBlock)
        ));
        assert!(matches!(
            accept_proposals("```json\nnot json\n```"),
            Err(FetchError::BadJson(_))
        ));
        assert!(matches!(
            accept_proposals("```json\n[{\"name\": \"x\", \"ops\": []}]\n```"),
            Err(FetchError::Empty)
        ));
    }

    #[test]
    fn single_object_blocks_are_accepted() {
        let content = "```\n{\"name\": \"solo\", \"ops\": [{\"op\": \"object_mask\"}, {\"op\": \"normalize\"}]}\n```";
        let programs = accept_proposals(content).unwrap();
        assert_eq!(programs.len(), 1);
    }

    #[test]
    fn first_fenced_block_wins() {
        let text = "```json\n[1]\n```\nthen\n```json\n[2]\n```";
        assert_eq!(extract_fenced(text).unwrap().trim(), "[1]");
    }

    #[test]
    fn env_config_is_absent_by_default() {
        // The variable is never set in the test environment.
        assert!(FetchConfig::from_env().is_none());
    }
}
