//! Operator session: newline-delimited JSON commands in, acks, errors and
//! telemetry out.
//!
//! [`Session`] is transport-free and advanced explicitly, so a journal of
//! `(tick, line)` pairs replayed against the same [`RunConfig`] reproduces
//! the outgoing stream exactly.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::apparatus::{MemsMode, SAConfig};
use crate::bench::Bench;
use crate::config::RunConfig;
use crate::control::ControlError;
use crate::optics::ThermalState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Command,
    Telemetry,
    Ack,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMessage {
    pub kind: MessageKind,
    pub name: String,
    #[serde(default)]
    pub payload: Map<String, Value>,
    pub seq: u64,
    #[serde(default)]
    pub timestamp: f64,
}

impl SessionMessage {
    pub fn command(name: &str, seq: u64, payload: Value) -> Self {
        let payload = match payload {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self {
            kind: MessageKind::Command,
            name: name.into(),
            payload,
            seq,
            timestamp: 0.0,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    /// Error code of an error message.
    pub fn code(&self) -> Option<&str> {
        self.payload.get("code").and_then(Value::as_str)
    }
}

pub const COMMANDS: &[&str] = &[
    "ping",
    "set_temperatures",
    "set_pump_power",
    "set_lo_power",
    "set_seed_power",
    "engage_lock",
    "disengage_lock",
    "start_sweep",
    "stop_sweep",
    "set_sa",
    "insert_filter",
    "remove_filter",
    "set_mems",
    "set_drift",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub tick: u64,
    pub line: String,
}

struct Rejection {
    code: &'static str,
    message: String,
}

fn reject(code: &'static str, message: impl Into<String>) -> Rejection {
    Rejection {
        code,
        message: message.into(),
    }
}

impl From<ControlError> for Rejection {
    fn from(e: ControlError) -> Self {
        reject("rejected", e.to_string())
    }
}

impl From<crate::apparatus::SimError> for Rejection {
    fn from(e: crate::apparatus::SimError) -> Self {
        reject("rejected", e.to_string())
    }
}

fn num(payload: &Map<String, Value>, key: &str) -> Result<Option<f64>, Rejection> {
    match payload.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| reject("invalid_payload", format!("`{key}` must be a finite number"))),
    }
}

fn required(payload: &Map<String, Value>, key: &str) -> Result<f64, Rejection> {
    num(payload, key)?.ok_or_else(|| reject("invalid_payload", format!("missing `{key}`")))
}

pub struct Session {
    bench: Bench,
    out_seq: u64,
    last_in_seq: Option<u64>,
    journal: Vec<JournalEntry>,
    telemetry_every: u64,
    max_trace_points: usize,
    seed_trace: Vec<[f64; 2]>,
}

impl Session {
    pub fn new(cfg: &RunConfig) -> Result<Self, ControlError> {
        cfg.validate()
            .map_err(|e| ControlError::Settings(e.to_string()))?;
        let mut bench = Bench::new(cfg.apparatus(), cfg.lock, cfg.extrema)?;
        bench.start_recording();
        let every = (1.0 / (cfg.session.telemetry_hz * cfg.schedule.tick_s)).round().max(1.0);
        Ok(Self {
            bench,
            out_seq: 0,
            last_in_seq: None,
            journal: Vec::new(),
            telemetry_every: every as u64,
            max_trace_points: cfg.session.max_trace_points,
            seed_trace: Vec::new(),
        })
    }

    pub fn bench(&self) -> &Bench {
        &self.bench
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn tick(&self) -> u64 {
        self.bench.apparatus().state().tick
    }

    fn next_seq(&mut self) -> u64 {
        self.out_seq += 1;
        self.out_seq
    }

    fn outgoing(&mut self, kind: MessageKind, name: &str, payload: Map<String, Value>) -> SessionMessage {
        SessionMessage {
            kind,
            name: name.into(),
            payload,
            seq: self.next_seq(),
            timestamp: self.bench.clock(),
        }
    }

    fn error(&mut self, name: &str, code: &str, message: &str, reply_to: Option<u64>) -> SessionMessage {
        let mut p = Map::new();
        p.insert("code".into(), code.into());
        p.insert("message".into(), message.into());
        p.insert("in_reply_to".into(), reply_to.map_or(Value::Null, Value::from));
        self.outgoing(MessageKind::Error, name, p)
    }

    /// Applies one incoming line and returns its single reply.
    pub fn handle_line(&mut self, line: &str) -> SessionMessage {
        self.journal.push(JournalEntry {
            tick: self.tick(),
            line: line.to_owned(),
        });
        let msg = match SessionMessage::from_line(line) {
            Ok(m) => m,
            Err(e) => return self.error("malformed", "malformed", &e.to_string(), None),
        };
        if msg.kind != MessageKind::Command {
            return self.error(&msg.name, "not_a_command", "only commands are accepted", Some(msg.seq));
        }
        if self.last_in_seq.is_some_and(|s| msg.seq <= s) {
            let m = format!("sequence {} does not increase", msg.seq);
            return self.error(&msg.name, "bad_sequence", &m, Some(msg.seq));
        }
        self.last_in_seq = Some(msg.seq);
        match self.apply(&msg) {
            Ok(()) => {
                let mut p = Map::new();
                p.insert("in_reply_to".into(), msg.seq.into());
                self.outgoing(MessageKind::Ack, &msg.name, p)
            }
            Err(r) => self.error(&msg.name, r.code, &r.message, Some(msg.seq)),
        }
    }

    fn apply(&mut self, msg: &SessionMessage) -> Result<(), Rejection> {
        let p = &msg.payload;
        let app = self.bench.apparatus_mut();
        match msg.name.as_str() {
            "ping" => {}
            "set_temperatures" => {
                let cur = app.state().thermal;
                let mut t = ThermalState {
                    active: num(p, "active")?.unwrap_or(cur.active),
                    side1: num(p, "side1")?.unwrap_or(cur.side1),
                    side2: num(p, "side2")?.unwrap_or(cur.side2),
                };
                if let Some(s) = num(p, "sum")? {
                    t = t.with_sum(s);
                }
                if let Some(d) = num(p, "diff")? {
                    t = t.with_diff(d);
                }
                app.set_thermal(t)?;
            }
            "set_pump_power" => app.set_pump_power(required(p, "watts")?)?,
            "set_lo_power" => app.set_lo_power(required(p, "mw")?)?,
            "set_seed_power" => app.set_seed_power(required(p, "mw")?)?,
            "engage_lock" => self.bench.engage_lock()?,
            "disengage_lock" => self.bench.disengage_lock(),
            "start_sweep" => app.set_sweep(true),
            "stop_sweep" => {
                app.set_sweep(false);
                if let Some(ph) = num(p, "phase_rad")? {
                    app.set_pump_phase(ph);
                }
            }
            "set_sa" => {
                let cur = app.config().sa;
                let sa = SAConfig {
                    center_freq_mhz: num(p, "center_freq_mhz")?.unwrap_or(cur.center_freq_mhz),
                    rbw_mhz: num(p, "rbw_mhz")?.unwrap_or(cur.rbw_mhz),
                    vbw_hz: num(p, "vbw_hz")?.unwrap_or(cur.vbw_hz),
                };
                app.set_sa_config(sa)?;
                self.bench.start_recording();
            }
            "insert_filter" => app.set_filter(Some(required(p, "transmission")?))?,
            "remove_filter" => app.set_filter(None)?,
            "set_mems" => {
                let mode = match p.get("mode").and_then(Value::as_str) {
                    Some("switching") => MemsMode::Switching,
                    Some("hold_seed") => MemsMode::HoldSeed,
                    Some("hold_lo") => MemsMode::HoldLo,
                    _ => {
                        return Err(reject(
                            "invalid_payload",
                            "`mode` must be switching, hold_seed or hold_lo",
                        ))
                    }
                };
                app.set_mems_mode(mode);
            }
            "set_drift" => {
                let mut d = app.state().drift;
                if let Some(r) = num(p, "ramp_mhz_per_s")? {
                    d.ramp_mhz_per_s = r;
                }
                if let Some(s) = num(p, "diffusion_mhz_per_sqrt_s")? {
                    if s < 0.0 {
                        return Err(reject("invalid_payload", "diffusion must be non-negative"));
                    }
                    d.diffusion_mhz_per_sqrt_s = s;
                }
                app.set_drift(d);
            }
            other => {
                return Err(reject("unknown_command", format!("unknown command `{other}`")));
            }
        }
        Ok(())
    }

    /// Steps `ticks` ticks and returns the telemetry (and any fault
    /// reports) produced meanwhile.
    pub fn advance(&mut self, ticks: u64) -> Vec<SessionMessage> {
        let mut out = Vec::new();
        for _ in 0..ticks {
            match self.bench.tick() {
                Ok(t) => {
                    if !t.outputs.seed_mw.is_empty() {
                        let mean = t.outputs.seed_mw.iter().sum::<f64>() / t.outputs.seed_mw.len() as f64;
                        self.seed_trace.push([t.outputs.time_s, mean]);
                    }
                }
                Err(e) => {
                    let code = match e {
                        ControlError::AcquisitionFailed { .. } => "acquisition_failed",
                        _ => "simulation_fault",
                    };
                    let m = self.error("fault", code, &e.to_string(), None);
                    out.push(m);
                }
            }
            if self.tick().is_multiple_of(self.telemetry_every) {
                let t = self.telemetry();
                out.push(t);
            }
        }
        out
    }

    fn telemetry(&mut self) -> SessionMessage {
        let mut trace = self.bench.drain_trace();
        let app = self.bench.apparatus();
        let st = app.state();
        let th = st.thermal;
        let window = self.bench.last_window();
        if trace.len() > self.max_trace_points {
            trace.drain(..trace.len() - self.max_trace_points);
        }
        let mut seed = std::mem::take(&mut self.seed_trace);
        if seed.len() > self.max_trace_points {
            seed.drain(..seed.len() - self.max_trace_points);
        }
        let sa = app.config().sa;
        let payload = json!({
            "lock_state": self.bench.lock_state().as_str(),
            "detuning_mhz": app.detuning_mhz(),
            "laser_offset_mhz": st.laser_offset_mhz,
            "temperatures": {
                "active": th.active, "side1": th.side1, "side2": th.side2,
                "sum": th.sum(), "diff": th.diff(),
            },
            "pump_w": st.pump_power_w,
            "lo_mw": st.lo_power_mw,
            "seed_mw": st.seed_power_mw,
            "filter_transmission": st.filter_transmission,
            "sweep": st.sweep_enabled,
            "mems": st.mems.as_str(),
            "pump_phase_rad": st.pump_phase_rad,
            "gain": window.map(|w| w.gain),
            "seed_max_mw": window.map(|w| w.max_mw),
            "seed_min_mw": window.map(|w| w.min_mw),
            "sa": { "center_freq_mhz": sa.center_freq_mhz, "rbw_mhz": sa.rbw_mhz, "vbw_hz": sa.vbw_hz },
            "trace": trace.iter().map(|p| json!([p.time_s, p.phase_rad, p.power_dbm, p.mems.as_str()])).collect::<Vec<_>>(),
            "seed_trace": seed,
        });
        let Value::Object(map) = payload else { unreachable!() };
        self.outgoing(MessageKind::Telemetry, "telemetry", map)
    }
}

/// Replays a journal against a fresh session and returns every outgoing
/// message, up to and including tick `until_tick`.
pub fn replay(
    cfg: &RunConfig,
    journal: &[JournalEntry],
    until_tick: u64,
) -> Result<Vec<SessionMessage>, ControlError> {
    let mut s = Session::new(cfg)?;
    let mut out = Vec::new();
    let mut entries = journal.iter().peekable();
    while s.tick() < until_tick {
        while let Some(e) = entries.next_if(|e| e.tick <= s.tick()) {
            out.push(s.handle_line(&e.line));
        }
        out.extend(s.advance(1));
    }
    for e in entries.filter(|e| e.tick <= until_tick) {
        out.push(s.handle_line(&e.line));
    }
    Ok(out)
}
