//! Real-time paced simulation loop driven by client commands.

use std::sync::Arc;
use std::time::Duration;

use nalgebra::Vector3;
use tandemlift::telemetry::LogRow;
use tandemlift::Simulation;
use tokio::sync::{broadcast, mpsc};
use tokio::time::MissedTickBehavior;

use crate::wire::{Command, EventKind, Frame, Outgoing, WireError};

/// Seconds of simulated time an `apply_force` stays active without a refresh.
pub const HOLD_TIMEOUT: f64 = 2.0;

#[derive(Clone, Copy, Debug)]
pub struct LiveOptions {
    /// Broadcast every `decimate`-th control step.
    pub decimate: usize,
    pub hold_timeout: f64,
}

impl Default for LiveOptions {
    fn default() -> Self {
        Self {
            decimate: 20,
            hold_timeout: HOLD_TIMEOUT,
        }
    }
}

/// Operator force held between `apply_force` and `clear_force` or timeout.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeldForce {
    force: Vector3<f64>,
    since: Option<f64>,
}

impl HeldForce {
    pub fn apply(&mut self, force: Vector3<f64>, t: f64) {
        self.force = force;
        self.since = Some(t);
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    /// Force to use for a step starting at `t`; expires the hold after `timeout`.
    pub fn at(&mut self, t: f64, timeout: f64) -> Vector3<f64> {
        if let Some(since) = self.since {
            if t - since >= timeout {
                log::debug!("held force expired at t = {t:.3}");
                self.clear();
            }
        }
        self.force
    }
}

/// Owns the simulation; the only place its state changes.
pub struct LiveLoop {
    sim: Simulation,
    opts: LiveOptions,
    held: HeldForce,
    paused: bool,
    aborted: Option<String>,
    frames: broadcast::Sender<Arc<str>>,
}

impl LiveLoop {
    pub fn new(sim: Simulation, opts: LiveOptions, frames: broadcast::Sender<Arc<str>>) -> Self {
        Self {
            sim,
            opts,
            held: HeldForce::default(),
            paused: false,
            aborted: None,
            frames,
        }
    }

    fn publish(&self, msg: &Outgoing) {
        // no subscribers is fine
        let _ = self.frames.send(msg.to_json().into());
    }

    /// Applies one command; returns an error for the sender when it cannot be honoured.
    pub fn handle(&mut self, command: Command) -> Result<(), WireError> {
        let t = self.sim.time();
        match command {
            Command::ApplyForce(f) => {
                if let Some(reason) = &self.aborted {
                    return Err(WireError::Aborted(reason.clone()));
                }
                self.held.apply(Vector3::from(f), t);
            }
            Command::ClearForce => self.held.clear(),
            Command::Pause => {
                if !self.paused {
                    self.paused = true;
                    self.publish(&Outgoing::event(EventKind::Paused, t));
                }
            }
            Command::Resume => {
                if self.paused {
                    self.paused = false;
                    self.publish(&Outgoing::event(EventKind::Resumed, t));
                }
            }
            Command::Reset => {
                self.sim.reset();
                self.held.clear();
                self.aborted = None;
                self.publish(&Outgoing::event(EventKind::Reset, 0.0));
            }
        }
        Ok(())
    }

    /// Advances one control step unless paused or stopped.
    pub fn step(&mut self) {
        if self.paused || self.aborted.is_some() {
            return;
        }
        let index = self.sim.step_index();
        let force = self.held.at(self.sim.time(), self.opts.hold_timeout);
        match self.sim.step(&force) {
            Ok(record) => {
                if index % self.opts.decimate as u64 == 0 {
                    self.publish(&Outgoing::Frame(Frame::from(&LogRow::from(&record))));
                }
            }
            Err(e) => {
                log::warn!("live simulation stopped: {e}");
                let err = WireError::Aborted(e.to_string());
                self.publish(&Outgoing::error(&err));
                self.aborted = Some(e.to_string());
            }
        }
    }

    pub fn time(&self) -> f64 {
        self.sim.time()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }
}

/// A command plus the channel to answer the sender on.
pub struct Envelope {
    pub command: Command,
    pub reply: Option<mpsc::UnboundedSender<Arc<str>>>,
}

/// Runs the loop in real time until every command sender is dropped.
pub async fn run(mut live: LiveLoop, mut commands: mpsc::UnboundedReceiver<Envelope>) {
    let dt = live.sim.config().dt;
    let steps_per_tick = live.opts.decimate;
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(dt * steps_per_tick as f64));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    loop {
        ticker.tick().await;
        for _ in 0..steps_per_tick {
            // commands are drained before every step, so they act on the next one
            loop {
                match commands.try_recv() {
                    Ok(env) => {
                        if let Err(e) = live.handle(env.command) {
                            if let Some(reply) = env.reply {
                                let _ = reply.send(Outgoing::error(&e).to_json().into());
                            }
                        }
                    }
                    Err(mpsc::error::TryRecvError::Empty) => break,
                    Err(mpsc::error::TryRecvError::Disconnected) => return,
                }
            }
            live.step();
        }
    }
}
