//! JSON messages exchanged with clients, one message per WebSocket text frame.
//!
//! Every outgoing message carries the schema version `v`. Field names follow
//! the CSV log columns so a frame and its log row can be compared directly.

use serde::{Deserialize, Serialize};
use tandemlift::telemetry::LogRow;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateFields {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFields {
    pub xd: f64,
    pub yd: f64,
    pub zd: f64,
    pub phid: f64,
    pub thetad: f64,
    pub psid: f64,
}

/// One telemetry sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub v: u32,
    pub t: f64,
    pub state: StateFields,
    #[serde(rename = "ref")]
    pub reference: ReferenceFields,
    #[serde(rename = "S")]
    pub sliding: [f64; 6],
    #[serde(rename = "U")]
    pub controls: [f64; 4],
    pub force: [f64; 3],
    pub gated: bool,
}

impl From<&LogRow> for Frame {
    fn from(row: &LogRow) -> Self {
        let s = row.state;
        let r = row.reference;
        Self {
            v: SCHEMA_VERSION,
            t: row.t,
            state: StateFields {
                x: s[0],
                y: s[1],
                z: s[2],
                vx: s[3],
                vy: s[4],
                vz: s[5],
                phi: s[6],
                theta: s[7],
                psi: s[8],
                p: s[9],
                q: s[10],
                r: s[11],
            },
            reference: ReferenceFields {
                xd: r[0],
                yd: r[1],
                zd: r[2],
                phid: r[3],
                thetad: r[4],
                psid: r[5],
            },
            sliding: row.sliding,
            controls: row.controls,
            force: row.force,
            gated: row.gated,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Replay,
}

/// Sent once to every client right after it connects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub mode: Mode,
    pub scenario: String,
    pub dt: f64,
    pub decimate: usize,
    /// Gate threshold on ‖F‖ in newtons; unknown for replayed logs.
    pub threshold: Option<f64>,
    pub damping: Option<[f64; 3]>,
    /// Seconds of simulated time an `apply_force` stays active without a refresh.
    pub hold_timeout: Option<f64>,
    pub speed: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// The simulation was reset; `t` restarts from zero.
    Reset,
    Paused,
    Resumed,
    /// The replayed log has been fully streamed.
    End,
}

/// Everything the server can send.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outgoing {
    Frame(Frame),
    Config { v: u32, config: SessionInfo },
    Event { v: u32, event: EventKind, t: f64 },
    Error { v: u32, error: ErrorBody },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl Outgoing {
    pub fn config(info: SessionInfo) -> Self {
        Outgoing::Config {
            v: SCHEMA_VERSION,
            config: info,
        }
    }

    pub fn event(event: EventKind, t: f64) -> Self {
        Outgoing::Event {
            v: SCHEMA_VERSION,
            event,
            t,
        }
    }

    pub fn error(err: &WireError) -> Self {
        Outgoing::Error {
            v: SCHEMA_VERSION,
            error: ErrorBody {
                code: err.code().to_string(),
                message: err.to_string(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outgoing messages contain only finite numbers")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Command {
    ApplyForce([f64; 3]),
    ClearForce,
    Pause,
    Resume,
    Reset,
}

/// A parsed client command.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandMessage {
    pub command: Command,
    pub client: Option<String>,
    pub ts: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCommand {
    kind: String,
    #[serde(default)]
    force: Option<[f64; 3]>,
    #[serde(default)]
    client: Option<String>,
    #[serde(default)]
    ts: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown command kind `{0}`")]
    UnknownKind(String),
    #[error("apply_force requires a force [x, y, z]")]
    MissingForce,
    #[error("force components must be finite")]
    NonFiniteForce,
    #[error("commands are not accepted in replay mode")]
    ReplayMode,
    #[error("simulation stopped: {0}; send reset to restart")]
    Aborted(String),
}

impl WireError {
    pub fn code(&self) -> &'static str {
        match self {
            WireError::Malformed(_) => "malformed",
            WireError::UnknownKind(_) => "unknown_kind",
            WireError::MissingForce => "missing_force",
            WireError::NonFiniteForce => "non_finite_force",
            WireError::ReplayMode => "replay_mode",
            WireError::Aborted(_) => "aborted",
        }
    }
}

pub fn parse_command(text: &str) -> Result<CommandMessage, WireError> {
    let raw: RawCommand = serde_json::from_str(text.trim()).map_err(|e| WireError::Malformed(e.to_string()))?;
    let command = match raw.kind.as_str() {
        "apply_force" => {
            let f = raw.force.ok_or(WireError::MissingForce)?;
            if f.iter().any(|x| !x.is_finite()) {
                return Err(WireError::NonFiniteForce);
            }
            Command::ApplyForce(f)
        }
        "clear_force" => Command::ClearForce,
        "pause" => Command::Pause,
        "resume" => Command::Resume,
        "reset" => Command::Reset,
        other => return Err(WireError::UnknownKind(other.to_string())),
    };
    Ok(CommandMessage {
        command,
        client: raw.client,
        ts: raw.ts,
    })
}
