//! TCP front end for [`Session`]: one commanding client, any number of
//! read-only observers, all fed the same telemetry stream.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use opotwin::config::RunConfig;
use opotwin::session::{MessageKind, Session, SessionMessage};
use serde_json::{Map, Value};

pub struct ServeOptions {
    pub time_factor: f64,
    pub journal: Option<PathBuf>,
}

enum Event {
    Connected(u64, TcpStream),
    Line(u64, String),
    Closed(u64),
}

fn accept_loop(listener: TcpListener, tx: Sender<Event>) {
    for (id, stream) in (1u64..).zip(listener.incoming()) {
        let Ok(stream) = stream else { continue };
        let Ok(reader) = stream.try_clone() else { continue };
        if tx.send(Event::Connected(id, stream)).is_err() {
            return;
        }
        let tx = tx.clone();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                match line {
                    Ok(l) if l.trim().is_empty() => continue,
                    Ok(l) => {
                        if tx.send(Event::Line(id, l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(Event::Closed(id));
        });
    }
}

/// Out-of-band notice from the server itself; carries sequence 0 so it
/// never collides with the session's own numbering.
fn notice(kind: MessageKind, name: &str, fields: &[(&str, Value)]) -> SessionMessage {
    SessionMessage {
        kind,
        name: name.into(),
        payload: fields
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect::<Map<_, _>>(),
        seq: 0,
        timestamp: 0.0,
    }
}

struct Clients {
    streams: BTreeMap<u64, TcpStream>,
    commander: Option<u64>,
}

impl Clients {
    fn send(&mut self, id: u64, msg: &SessionMessage) {
        let line = msg.to_line() + "\n";
        if let Some(s) = self.streams.get_mut(&id) {
            if s.write_all(line.as_bytes()).is_err() {
                self.streams.remove(&id);
            }
        }
    }

    fn broadcast(&mut self, msg: &SessionMessage) {
        let line = msg.to_line() + "\n";
        self.streams
            .retain(|_, s| s.write_all(line.as_bytes()).is_ok());
    }
}

/// Runs the session server until the listener fails.
pub fn serve(cfg: &RunConfig, listener: TcpListener, opts: ServeOptions) -> std::io::Result<()> {
    let mut session = Session::new(cfg).map_err(std::io::Error::other)?;
    let mut journal = match &opts.journal {
        Some(p) => Some(File::create(p)?),
        None => None,
    };
    let (tx, rx): (Sender<Event>, Receiver<Event>) = mpsc::channel();
    thread::spawn(move || accept_loop(listener, tx));

    let tick_s = cfg.schedule.tick_s;
    let mut clients = Clients {
        streams: BTreeMap::new(),
        commander: None,
    };
    // wall-clock anchor of the current unpaused stretch
    let mut anchor: Option<(Instant, u64)> = None;

    loop {
        match rx.recv_timeout(Duration::from_millis(5)) {
            Ok(Event::Connected(id, stream)) => {
                let _ = stream.set_nodelay(true);
                let _ = stream.set_write_timeout(Some(Duration::from_secs(2)));
                clients.streams.insert(id, stream);
                let role = if clients.commander.is_none() {
                    clients.commander = Some(id);
                    "commander"
                } else {
                    "observer"
                };
                let hello = notice(MessageKind::Ack, "connected", &[("role", role.into())]);
                clients.send(id, &hello);
            }
            Ok(Event::Line(id, line)) => {
                if clients.commander.is_none() {
                    clients.commander = Some(id);
                }
                if clients.commander == Some(id) {
                    let reply = session.handle_line(&line);
                    if let (Some(f), Some(entry)) = (journal.as_mut(), session.journal().last()) {
                        let rec = serde_json::to_string(entry).expect("journal entries serialize");
                        writeln!(f, "{rec}")?;
                    }
                    clients.send(id, &reply);
                } else {
                    let e = notice(
                        MessageKind::Error,
                        "read_only",
                        &[
                            ("code", "read_only".into()),
                            ("message", "another client holds the session".into()),
                        ],
                    );
                    clients.send(id, &e);
                }
            }
            Ok(Event::Closed(id)) => {
                clients.streams.remove(&id);
                if clients.commander == Some(id) {
                    clients.commander = None;
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => return Ok(()),
        }

        if clients.commander.is_none() {
            anchor = None;
            continue;
        }
        let (t0, tick0) = *anchor.get_or_insert((Instant::now(), session.tick()));
        let due = tick0 + (t0.elapsed().as_secs_f64() * opts.time_factor / tick_s) as u64;
        // cap the catch-up so a slow host degrades to slower-than-real-time
        let n = due.saturating_sub(session.tick()).min(2000);
        if n == 0 {
            continue;
        }
        for msg in session.advance(n) {
            clients.broadcast(&msg);
        }
        if due > session.tick() + 2000 {
            anchor = Some((Instant::now(), session.tick()));
        }
    }
}
