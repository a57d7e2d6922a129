use std::thread;

use loansim::interfaces::{Client, ClientMessage, Server, ServerMessage};
use loansim::{InterventionKind, InterventionSequence, PolicyRegime, Simulator};

fn start(sim: Simulator) -> std::net::SocketAddr {
    let (addr, _handle) = Server::bind("127.0.0.1:0", sim).unwrap().spawn().unwrap();
    addr
}

fn hello(c: &mut Client, ints: &[InterventionKind], delta: f64) {
    let r = c
        .send(&ClientMessage::Hello {
            interventions: ints.to_vec(),
            delta,
        })
        .unwrap();
    assert!(matches!(r, ServerMessage::Ready { .. }), "{r:?}");
}

/// Plays a case remotely, always picking the last allowed action.
fn play_last(c: &mut Client, case_nr: u64) -> f64 {
    let mut r = c.send(&ClientMessage::Reset { case_nr: Some(case_nr), seed: None }).unwrap();
    loop {
        match r {
            ServerMessage::Decision { allowed, .. } => {
                let a = allowed.last().unwrap().name().to_string();
                r = c.send(&ClientMessage::Act { action: a }).unwrap();
            }
            ServerMessage::Done { profit, .. } => return profit,
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn concurrent_clients_get_independent_sessions() {
    let sim = Simulator::new(31);
    let addr = start(sim.clone());
    let ints = [InterventionKind::ChooseProcedure, InterventionKind::TimeContactHq];
    let active = InterventionSequence::new(ints.to_vec()).unwrap();
    let handles: Vec<_> = (0..8u64)
        .map(|t| {
            thread::spawn(move || {
                let mut c = Client::connect(addr).unwrap();
                hello(&mut c, &ints, 1.0);
                (0..25).map(|i| (t * 100 + i, play_last(&mut c, t * 100 + i))).collect::<Vec<_>>()
            })
        })
        .collect();
    for h in handles {
        for (case_nr, profit) in h.join().unwrap() {
            let mut s = sim.open_session(case_nr, &active).unwrap();
            while let Some(p) = s.pending().cloned() {
                s.step(*p.allowed.last().unwrap()).unwrap();
            }
            assert_eq!(profit.to_bits(), s.result().unwrap().profit.to_bits());
        }
    }
}

#[test]
fn background_decisions_follow_the_negotiated_delta() {
    let sim = Simulator::new(4);
    let addr = start(sim.clone());
    let mut c = Client::connect(addr).unwrap();
    hello(&mut c, &[InterventionKind::SetInterestRate], 0.3);
    let active = InterventionSequence::single(InterventionKind::SetInterestRate);
    for case_nr in 0..100 {
        let remote = play_last(&mut c, case_nr);
        let mut s = sim.open_session_with(case_nr, &active, PolicyRegime::Mixed(0.3)).unwrap();
        while let Some(p) = s.pending().cloned() {
            s.step(*p.allowed.last().unwrap()).unwrap();
        }
        assert_eq!(remote.to_bits(), s.result().unwrap().profit.to_bits());
    }
}

#[test]
fn errors_do_not_end_the_connection() {
    let addr = start(Simulator::new(2));
    let mut c = Client::connect(addr).unwrap();
    assert!(matches!(c.send_raw("][").unwrap(), ServerMessage::Error { .. }));
    assert!(matches!(
        c.send(&ClientMessage::Act { action: "wait".into() }).unwrap(),
        ServerMessage::Error { .. }
    ));
    hello(&mut c, &[InterventionKind::TimeContactHq], 1.0);
    let mut r = c.send_raw(r#"{"op":"reset","case_nr":5,"note":"ignored"}"#).unwrap();
    while let ServerMessage::Decision { .. } = r {
        assert!(matches!(
            c.send(&ClientMessage::Act { action: "priority".into() }).unwrap(),
            ServerMessage::Error { allowed: Some(_), .. }
        ));
        r = c.send(&ClientMessage::Act { action: "wait".into() }).unwrap();
    }
    assert!(matches!(r, ServerMessage::Done { case_nr: 5, canceled: true, .. }));
    c.close().unwrap();
}

#[test]
fn reset_without_case_number_counts_up() {
    let addr = start(Simulator::new(2));
    let mut c = Client::connect(addr).unwrap();
    hello(&mut c, &[InterventionKind::ChooseProcedure], 1.0);
    for expected in 0..3 {
        match c.send_raw(r#"{"op":"reset"}"#).unwrap() {
            ServerMessage::Decision { case_nr, .. } => assert_eq!(case_nr, expected),
            other => panic!("unexpected {other:?}"),
        }
    }
}
