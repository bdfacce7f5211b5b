//! Streams a recorded log back at real-time or scaled speed.

use std::sync::Arc;
use std::time::Duration;

use tandemlift::telemetry::LogRow;
use tokio::sync::{broadcast, watch};
use tokio::time::Instant;

use crate::wire::{EventKind, Frame, Outgoing};

#[derive(Clone, Copy, Debug)]
pub struct ReplayOptions {
    /// Playback rate relative to the log's own clock.
    pub speed: f64,
    /// Stream every `decimate`-th row.
    pub decimate: usize,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { speed: 1.0, decimate: 1 }
    }
}

/// Log step, taken from the first two rows.
pub fn log_dt(rows: &[LogRow]) -> f64 {
    match rows {
        [a, b, ..] => b.t - a.t,
        _ => 0.0,
    }
}

/// Waits for the first client, then streams rows on their recorded schedule.
pub async fn run(
    rows: Arc<Vec<LogRow>>,
    opts: ReplayOptions,
    frames: broadcast::Sender<Arc<str>>,
    mut started: watch::Receiver<bool>,
) {
    if started.wait_for(|s| *s).await.is_err() {
        return;
    }
    let Some(first) = rows.first() else {
        let _ = frames.send(Outgoing::event(EventKind::End, 0.0).to_json().into());
        return;
    };
    let t0 = first.t;
    let origin = Instant::now();
    for row in rows.iter().step_by(opts.decimate) {
        let due = origin + Duration::from_secs_f64(((row.t - t0) / opts.speed).max(0.0));
        tokio::time::sleep_until(due).await;
        let _ = frames.send(Outgoing::Frame(Frame::from(row)).to_json().into());
    }
    let last = rows.last().map_or(t0, |r| r.t);
    let _ = frames.send(Outgoing::event(EventKind::End, last).to_json().into());
    log::info!("replay finished after {:.3} s", origin.elapsed().as_secs_f64());
}
