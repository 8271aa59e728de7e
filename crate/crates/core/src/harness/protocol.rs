//! Line-oriented environment protocol.
//!
//! ```text
//! request  := SEQ SP KIND *(SP KEY "=" VALUE) LF
//! KIND     := "reset" | "step" | "set_gain" | "measure" | "run_episode"
//! response := SEQ SP "ok" *(SP KEY "=" VALUE) LF
//!           | SEQ SP "trace" SP "rate=" F SP "t0=" F SP "diverged=" ("none" | F)
//!                 SP "n=" COUNT SP "samples=" [F *("," F)] LF
//!           | SEQ SP "error" SP "code=" CODE SP "message=" TEXT LF
//! ```
//!
//! `SEQ` is a `u64` that must increase strictly within a session and is
//! echoed by the response; `0` answers a line whose id could not be read.
//! Arguments: `step n=COUNT`, `set_gain kp=F`, `run_episode kp=F`, and
//! `reset` takes any scenario key plus `seed=U64`. Floats are written with
//! 17 significant digits so values survive the round trip bit-for-bit.
//! Error codes: `parse`, `sequence`, `bounds`, `diverged`, `invalid`.

use std::fmt;

/// Formats a float so that parsing recovers the identical value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum RequestKind {
    Reset { overrides: Vec<(String, String)> },
    Step { n_steps: u64 },
    SetGain { kp: f64 },
    Measure,
    RunEpisode { kp: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub seq: u64,
    pub kind: RequestKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePayload {
    pub rate: f64,
    pub t0: f64,
    pub diverged_at: Option<f64>,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseBody {
    Ok(Vec<(String, String)>),
    Trace(TracePayload),
    Error { code: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub seq: u64,
    pub body: ResponseBody,
}

/// A line that does not follow the grammar. `seq` is set when the id parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub seq: Option<u64>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn split_args<'a>(
    seq: Option<u64>,
    tokens: impl Iterator<Item = &'a str>,
) -> Result<Vec<(String, String)>, ParseError> {
    tokens
        .map(|t| {
            t.split_once('=')
                .filter(|(k, _)| !k.is_empty())
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| ParseError {
                    seq,
                    message: format!("expected key=value, found `{t}`"),
                })
        })
        .collect()
}

fn take_arg<T: std::str::FromStr>(
    seq: u64,
    args: &[(String, String)],
    key: &str,
) -> Result<T, ParseError> {
    let err = |message: String| ParseError { seq: Some(seq), message };
    match args {
        [(k, v)] if k == key => v
            .parse()
            .map_err(|_| err(format!("bad value `{v}` for `{key}`"))),
        _ => Err(err(format!("expected exactly one argument `{key}=...`"))),
    }
}

impl Request {
    pub fn parse(line: &str) -> Result<Self, ParseError> {
        let mut tokens = line.split_whitespace();
        let seq_tok = tokens.next().ok_or_else(|| ParseError {
            seq: None,
            message: "empty line".into(),
        })?;
        let seq: u64 = seq_tok.parse().map_err(|_| ParseError {
            seq: None,
            message: format!("bad sequence id `{seq_tok}`"),
        })?;
        let kind_tok = tokens.next().ok_or_else(|| ParseError {
            seq: Some(seq),
            message: "missing request kind".into(),
        })?;
        let args = split_args(Some(seq), tokens)?;
        let no_args = |kind: RequestKind| {
            if args.is_empty() {
                Ok(kind)
            } else {
                Err(ParseError {
                    seq: Some(seq),
                    message: format!("`{kind_tok}` takes no arguments"),
                })
            }
        };
        let kind = match kind_tok {
            "reset" => RequestKind::Reset { overrides: args.clone() },
            "step" => RequestKind::Step {
                n_steps: take_arg(seq, &args, "n")?,
            },
            "set_gain" => RequestKind::SetGain {
                kp: take_arg(seq, &args, "kp")?,
            },
            "measure" => no_args(RequestKind::Measure)?,
            "run_episode" => RequestKind::RunEpisode {
                kp: take_arg(seq, &args, "kp")?,
            },
            other => {
                return Err(ParseError {
                    seq: Some(seq),
                    message: format!("unknown request kind `{other}`"),
                })
            }
        };
        Ok(Request { seq, kind })
    }

    pub fn to_line(&self) -> String {
        let body = match &self.kind {
            RequestKind::Reset { overrides } => {
                let mut s = "reset".to_string();
                for (k, v) in overrides {
                    s.push_str(&format!(" {k}={v}"));
                }
                s
            }
            RequestKind::Step { n_steps } => format!("step n={n_steps}"),
            RequestKind::SetGain { kp } => format!("set_gain kp={}", fmt_f64(*kp)),
            RequestKind::Measure => "measure".to_string(),
            RequestKind::RunEpisode { kp } => format!("run_episode kp={}", fmt_f64(*kp)),
        };
        format!("{} {body}", self.seq)
    }
}

impl Response {
    pub fn ok(seq: u64, payload: Vec<(String, String)>) -> Self {
        Self {
            seq,
            body: ResponseBody::Ok(payload),
        }
    }

    pub fn error(seq: u64, code: &str, message: impl Into<String>) -> Self {
        Self {
            seq,
            body: ResponseBody::Error {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }

    pub fn to_line(&self) -> String {
        match &self.body {
            ResponseBody::Ok(payload) => {
                let mut s = format!("{} ok", self.seq);
                for (k, v) in payload {
                    s.push_str(&format!(" {k}={v}"));
                }
                s
            }
            ResponseBody::Trace(t) => {
                let samples: Vec<String> = t.samples.iter().map(|v| fmt_f64(*v)).collect();
                format!(
                    "{} trace rate={} t0={} diverged={} n={} samples={}",
                    self.seq,
                    fmt_f64(t.rate),
                    fmt_f64(t.t0),
                    t.diverged_at.map_or_else(|| "none".to_string(), fmt_f64),
                    t.samples.len(),
                    samples.join(",")
                )
            }
            ResponseBody::Error { code, message } => {
                // Keep the reply on one line whatever the message holds.
                let flat = message.replace(['\n', '\r'], " ");
                format!("{} error code={code} message={flat}", self.seq)
            }
        }
    }

    pub fn parse(line: &str) -> Result<Self, ParseError> {
        let bad = |seq: Option<u64>, m: String| ParseError { seq, message: m };
        let line = line.trim_end_matches(['\n', '\r']);
        let (seq_tok, rest) = line
            .split_once(' ')
            .ok_or_else(|| bad(None, format!("malformed response `{line}`")))?;
        let seq: u64 = seq_tok
            .parse()
            .map_err(|_| bad(None, format!("bad sequence id `{seq_tok}`")))?;
        let (kind, rest) = rest.split_once(' ').unwrap_or((rest, ""));
        let body = match kind {
            "ok" => ResponseBody::Ok(split_args(Some(seq), rest.split_whitespace())?),
            "error" => {
                let rest = rest
                    .strip_prefix("code=")
                    .ok_or_else(|| bad(Some(seq), "error without code".into()))?;
                let (code, message) = rest.split_once(' ').unwrap_or((rest, ""));
                let message = message.strip_prefix("message=").unwrap_or(message);
                ResponseBody::Error {
                    code: code.to_string(),
                    message: message.to_string(),
                }
            }
            "trace" => {
                let args = split_args(Some(seq), rest.split_whitespace())?;
                let get = |k: &str| {
                    args.iter()
                        .find(|(key, _)| key == k)
                        .map(|(_, v)| v.as_str())
                        .ok_or_else(|| bad(Some(seq), format!("trace without `{k}`")))
                };
                let float = |k: &str| -> Result<f64, ParseError> {
                    let v = get(k)?;
                    v.parse().map_err(|_| bad(Some(seq), format!("bad `{k}` value `{v}`")))
                };
                let diverged_at = match get("diverged")? {
                    "none" => None,
                    _ => Some(float("diverged")?),
                };
                let n: usize = get("n")?
                    .parse()
                    .map_err(|_| bad(Some(seq), "bad sample count".into()))?;
                let raw = get("samples")?;
                let samples: Vec<f64> = if raw.is_empty() {
                    Vec::new()
                } else {
                    raw.split(',')
                        .map(|v| v.parse().map_err(|_| bad(Some(seq), format!("bad sample `{v}`"))))
                        .collect::<Result<_, _>>()?
                };
                if samples.len() != n {
                    return Err(bad(
                        Some(seq),
                        format!("trace announced {n} samples, carried {}", samples.len()),
                    ));
                }
                ResponseBody::Trace(TracePayload {
                    rate: float("rate")?,
                    t0: float("t0")?,
                    diverged_at,
                    samples,
                })
            }
            other => return Err(bad(Some(seq), format!("unknown response kind `{other}`"))),
        };
        Ok(Response { seq, body })
    }
}
