//! Newline-delimited JSON protocol for driving cases from another process.
//!
//! The client opens with `hello`, then repeatedly sends `reset` to start a
//! case and `act` to answer each `decision`, until `done`. Each connection
//! runs one case at a time on its own thread.
//!
//! ```text
//! > {"op":"hello","interventions":["time_contact_hq"],"delta":1.0}
//! < {"type":"ready","seed":42,"interventions":["time_contact_hq"],"delta":1.0}
//! > {"op":"reset","case_nr":17}
//! < {"type":"decision","case_nr":17,"intervention":"time_contact_hq","point_index":0,...}
//! > {"op":"act","action":"wait"}
//! ...
//! < {"type":"done","case_nr":17,"profit":812.4,"accepted":true,"canceled":false,"events":[...]}
//! ```
//!
//! Decisions outside the negotiated interventions follow the bank with
//! probability `delta` per case and are random otherwise. A malformed or
//! illegal message gets an `error` reply and leaves the session as it was.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread::{self, JoinHandle};

use serde::{Deserialize, Serialize};

use crate::engine::{Session, Simulator};
use crate::error::{Result, SimError};
use crate::interventions::{Action, InterventionKind, InterventionSequence};
use crate::policies::PolicyRegime;
use crate::process::Event;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        interventions: Vec<InterventionKind>,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Starts a case. With `seed`, the case runs on a simulator reseeded to
    /// it; `case_nr` then defaults to 0.
    Reset {
        #[serde(default)]
        case_nr: Option<u64>,
        #[serde(default)]
        seed: Option<u64>,
    },
    Act {
        action: String,
    },
    Close,
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Ready {
        seed: u64,
        interventions: Vec<InterventionKind>,
        delta: f64,
    },
    Decision {
        case_nr: u64,
        intervention: InterventionKind,
        point_index: usize,
        allowed: Vec<Action>,
        prefix: Vec<Event>,
    },
    Done {
        case_nr: u64,
        profit: f64,
        accepted: bool,
        canceled: bool,
        events: Vec<Event>,
    },
    Error {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        allowed: Option<Vec<Action>>,
    },
}

impl ServerMessage {
    fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            message: message.into(),
            allowed: None,
        }
    }
}

struct Negotiated {
    active: InterventionSequence,
    background: PolicyRegime,
}

/// Protocol state of one connection, independent of the transport.
pub struct Connection {
    sim: Simulator,
    negotiated: Option<Negotiated>,
    case: Option<(u64, Session)>,
    next_case_nr: u64,
    closed: bool,
}

impl Connection {
    pub fn new(sim: Simulator) -> Self {
        Self {
            sim,
            negotiated: None,
            case: None,
            next_case_nr: 0,
            closed: false,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Handles one input line. Returns `None` for blank lines and `close`.
    pub fn handle_line(&mut self, line: &str) -> Option<ServerMessage> {
        if line.trim().is_empty() {
            return None;
        }
        match serde_json::from_str::<ClientMessage>(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => Some(ServerMessage::error(format!("malformed message: {e}"))),
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Option<ServerMessage> {
        let reply = match msg {
            ClientMessage::Hello { interventions, delta } => self.hello(interventions, delta),
            ClientMessage::Reset { case_nr, seed } => self.reset(case_nr, seed),
            ClientMessage::Act { action } => self.act(&action),
            ClientMessage::Close => {
                self.closed = true;
                return None;
            }
        };
        Some(reply.unwrap_or_else(|e| ServerMessage::error(e.to_string())))
    }

    fn hello(&mut self, interventions: Vec<InterventionKind>, delta: f64) -> Result<ServerMessage> {
        let active = InterventionSequence::new(interventions)?;
        let background = PolicyRegime::mixed(delta)?;
        self.negotiated = Some(Negotiated {
            active: active.clone(),
            background,
        });
        self.case = None;
        Ok(ServerMessage::Ready {
            seed: self.sim.seed(),
            interventions: active.kinds().to_vec(),
            delta,
        })
    }

    fn reset(&mut self, case_nr: Option<u64>, seed: Option<u64>) -> Result<ServerMessage> {
        let n = self
            .negotiated
            .as_ref()
            .ok_or_else(|| SimError::InvalidArgument("send hello before reset".into()))?;
        let sim = match seed {
            Some(s) => self.sim.reseeded(s),
            None => self.sim.clone(),
        };
        let case_nr = match (case_nr, seed) {
            (Some(c), _) => c,
            (None, Some(_)) => 0,
            (None, None) => self.next_case_nr,
        };
        self.next_case_nr = case_nr.wrapping_add(1);
        let session = sim.open_session_with(case_nr, &n.active, n.background)?;
        self.case = Some((case_nr, session));
        Ok(self.report())
    }

    fn act(&mut self, action: &str) -> Result<ServerMessage> {
        let (_, session) = self
            .case
            .as_mut()
            .ok_or_else(|| SimError::InvalidArgument("no case running; send reset".into()))?;
        let point = session.pending().cloned().ok_or(SimError::NoPendingDecision)?;
        let parsed: Option<Action> = action.parse().ok();
        match parsed {
            Some(a) if point.allows(a) => session.step(a)?,
            _ => {
                return Ok(ServerMessage::Error {
                    message: format!("action '{action}' not allowed"),
                    allowed: Some(point.allowed),
                })
            }
        }
        Ok(self.report())
    }

    fn report(&self) -> ServerMessage {
        let (case_nr, session) = self.case.as_ref().expect("a case is running");
        let events = session.state().events.clone();
        match (session.pending(), session.result()) {
            (Some(p), _) => ServerMessage::Decision {
                case_nr: *case_nr,
                intervention: p.intervention,
                point_index: p.point_index,
                allowed: p.allowed.clone(),
                prefix: events,
            },
            (None, Some(r)) => ServerMessage::Done {
                case_nr: *case_nr,
                profit: r.profit,
                accepted: r.accepted,
                canceled: r.canceled,
                events: r.final_state.events.clone(),
            },
            (None, None) => ServerMessage::error("session stalled"),
        }
    }
}

fn serve_stream(sim: Simulator, stream: TcpStream) -> Result<()> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    let mut conn = Connection::new(sim);
    for line in reader.lines() {
        if let Some(reply) = conn.handle_line(&line?) {
            let mut out = serde_json::to_vec(&reply)?;
            out.push(b'\n');
            writer.write_all(&out)?;
        }
        if conn.is_closed() {
            break;
        }
    }
    Ok(())
}

/// TCP server with one thread per connection.
pub struct Server {
    listener: TcpListener,
    sim: Simulator,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, sim: Simulator) -> Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            sim,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until the listener fails.
    pub fn serve(self) -> Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let sim = self.sim.clone();
            thread::spawn(move || {
                let _ = serve_stream(sim, stream);
            });
        }
        Ok(())
    }

    /// Runs [`Server::serve`] on a background thread.
    pub fn spawn(self) -> Result<(SocketAddr, JoinHandle<Result<()>>)> {
        let addr = self.local_addr()?;
        Ok((addr, thread::spawn(move || self.serve())))
    }
}

/// Blocking client, one request and one reply at a time.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
        })
    }

    pub fn send_raw(&mut self, line: &str) -> Result<ServerMessage> {
        self.writer.write_all(format!("{}\n", line.trim_end()).as_bytes())?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(SimError::Io(std::io::ErrorKind::UnexpectedEof.into()));
        }
        Ok(serde_json::from_str(&reply)?)
    }

    pub fn send(&mut self, msg: &ClientMessage) -> Result<ServerMessage> {
        self.send_raw(&serde_json::to_string(msg)?)
    }

    pub fn close(mut self) -> Result<()> {
        self.writer.write_all(b"{\"op\":\"close\"}\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hello(conn: &mut Connection, ints: &[InterventionKind], delta: f64) -> ServerMessage {
        conn.handle(ClientMessage::Hello {
            interventions: ints.to_vec(),
            delta,
        })
        .unwrap()
    }

    #[test]
    fn reset_before_hello_is_an_error() {
        let mut c = Connection::new(Simulator::new(1));
        let r = c.handle_line(r#"{"op":"reset","case_nr":3}"#).unwrap();
        assert!(matches!(r, ServerMessage::Error { .. }));
    }

    #[test]
    fn act_before_reset_is_an_error() {
        let mut c = Connection::new(Simulator::new(1));
        hello(&mut c, &[InterventionKind::ChooseProcedure], 1.0);
        let r = c.handle_line(r#"{"op":"act","action":"standard"}"#).unwrap();
        assert!(matches!(r, ServerMessage::Error { .. }));
    }

    #[test]
    fn malformed_input_keeps_the_session() {
        let mut c = Connection::new(Simulator::new(1));
        hello(&mut c, &[InterventionKind::ChooseProcedure], 1.0);
        let first = c.handle_line(r#"{"op":"reset","case_nr":3}"#).unwrap();
        assert!(matches!(first, ServerMessage::Decision { .. }));
        for bad in ["{not json", r#"{"op":"dance"}"#, r#"{"op":"act"}"#] {
            assert!(matches!(c.handle_line(bad), Some(ServerMessage::Error { .. })));
        }
        let done = c.handle_line(r#"{"op":"act","action":"standard"}"#).unwrap();
        assert!(matches!(done, ServerMessage::Done { case_nr: 3, .. }));
    }

    #[test]
    fn disallowed_action_lists_allowed() {
        let mut c = Connection::new(Simulator::new(1));
        hello(&mut c, &[InterventionKind::ChooseProcedure], 1.0);
        c.handle_line(r#"{"op":"reset","case_nr":0}"#);
        match c.handle_line(r#"{"op":"act","action":"0.07"}"#).unwrap() {
            ServerMessage::Error { allowed: Some(a), .. } => {
                assert_eq!(a, InterventionKind::ChooseProcedure.actions().to_vec())
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let mut c = Connection::new(Simulator::new(1));
        let r = c
            .handle_line(r#"{"op":"hello","interventions":["set_interest_rate"],"delta":0.5,"client":"x"}"#)
            .unwrap();
        assert!(matches!(r, ServerMessage::Ready { .. }));
    }

    #[test]
    fn invalid_delta_is_rejected() {
        let mut c = Connection::new(Simulator::new(1));
        let r = hello(&mut c, &[InterventionKind::SetInterestRate], 1.5);
        assert!(matches!(r, ServerMessage::Error { .. }));
    }

    #[test]
    fn matches_an_in_process_session() {
        let sim = Simulator::new(11);
        let active = InterventionSequence::single(InterventionKind::SetInterestRate);
        let mut c = Connection::new(sim.clone());
        hello(&mut c, &[InterventionKind::SetInterestRate], 1.0);
        for case_nr in 0..20 {
            let mut local = sim.open_session(case_nr, &active).unwrap();
            let mut reply = c.handle(ClientMessage::Reset { case_nr: Some(case_nr), seed: None }).unwrap();
            while let ServerMessage::Decision { prefix, allowed, .. } = reply {
                assert_eq!(prefix, local.state().events);
                let a = allowed[case_nr as usize % allowed.len()];
                local.step(a).unwrap();
                reply = c.handle(ClientMessage::Act { action: a.name().into() }).unwrap();
            }
            let r = local.result().unwrap();
            match reply {
                ServerMessage::Done { profit, events, .. } => {
                    assert_eq!(profit, r.profit);
                    assert_eq!(events, r.final_state.events);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn seeded_reset_uses_a_reseeded_simulator() {
        let mut c = Connection::new(Simulator::new(1));
        hello(&mut c, &[InterventionKind::ChooseProcedure], 1.0);
        let r = c.handle(ClientMessage::Reset { case_nr: None, seed: Some(99) }).unwrap();
        let local = Simulator::new(99)
            .open_session(0, &InterventionSequence::single(InterventionKind::ChooseProcedure))
            .unwrap();
        match r {
            ServerMessage::Decision { case_nr, prefix, .. } => {
                assert_eq!(case_nr, 0);
                assert_eq!(prefix, local.state().events);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
