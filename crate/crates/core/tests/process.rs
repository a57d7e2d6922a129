use loansim::engine::RandomPolicy;
use loansim::process::{ActivityKind, Event};
use loansim::{InterventionKind, InterventionSequence, Policy, PolicyRegime, Simulator};
use proptest::prelude::*;

fn all() -> InterventionSequence {
    InterventionSequence::parse("choose_procedure,set_interest_rate,time_contact_hq").unwrap()
}

/// Runs a case answering the i-th decision with `choices[i] % allowed`.
fn run_with(sim: &Simulator, case_nr: u64, active: &InterventionSequence, choices: &[usize]) -> (Vec<Event>, f64) {
    let mut s = sim.open_session(case_nr, active).unwrap();
    let mut i = 0;
    while let Some(p) = s.pending().cloned() {
        let c = choices.get(i).copied().unwrap_or(0);
        s.step(p.allowed[c % p.allowed.len()]).unwrap();
        i += 1;
    }
    let r = s.result().unwrap();
    (r.final_state.events.clone(), r.profit)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_seed_case_and_actions_give_the_same_case(
        seed in any::<u64>(), case_nr in 0u64..1_000_000, choices in prop::collection::vec(0usize..3, 0..6)
    ) {
        let a = run_with(&Simulator::new(seed), case_nr, &all(), &choices);
        let b = run_with(&Simulator::new(seed), case_nr, &all(), &choices);
        prop_assert_eq!(a.1.to_bits(), b.1.to_bits());
        prop_assert_eq!(a.0, b.0);
    }

    #[test]
    fn cost_never_decreases_and_attributes_stay_in_range(
        seed in any::<u64>(), case_nr in 0u64..1_000_000, choices in prop::collection::vec(0usize..3, 0..6)
    ) {
        let (events, _) = run_with(&Simulator::new(seed), case_nr, &all(), &choices);
        for w in events.windows(2) {
            prop_assert!(w[1].attributes.cost >= w[0].attributes.cost);
        }
        for e in &events {
            prop_assert!(e.end >= e.start);
            prop_assert!((0.0..=1.0).contains(&e.attributes.est_quality));
            prop_assert!((0.0..=1.0).contains(&e.attributes.unc_quality));
        }
    }

    /// Two branches agree on every event before the first point where
    /// their actions differ.
    #[test]
    fn branches_share_the_prefix_before_they_diverge(seed in any::<u64>(), case_nr in 0u64..1_000_000) {
        let sim = Simulator::new(seed);
        let active = all();
        let branches = sim.evaluate_counterfactuals(case_nr, &active).unwrap();
        for (i, (bi, ri)) in branches.iter().enumerate() {
            for (bj, rj) in &branches[i + 1..] {
                let (si, sj) = (&bi.steps, &bj.steps);
                let shared = si.iter().zip(sj.iter()).take_while(|(x, y)| x == y).count();
                // Replay the shared steps to find where the first divergent decision sits.
                let mut s = sim.open_session(case_nr, &active).unwrap();
                for step in &si[..shared] {
                    s.step(step.2).unwrap();
                }
                let pos = s.pending().map(|p| p.position).unwrap_or(s.state().events.len());
                prop_assert_eq!(&ri.final_state.events[..pos], &rj.final_state.events[..pos]);
            }
        }
    }

    /// The client's accept draw is shared by all rate branches, so a client
    /// who accepts a higher rate also accepts every lower one.
    #[test]
    fn acceptance_is_monotone_in_the_rate(seed in any::<u64>(), case_nr in 0u64..1_000_000) {
        let sim = Simulator::new(seed);
        let active = InterventionSequence::single(InterventionKind::SetInterestRate);
        let out = sim.evaluate_counterfactuals(case_nr, &active).unwrap();
        prop_assert_eq!(out.len(), 3);
        for w in out.windows(2) {
            prop_assert!(w[0].1.accepted || !w[1].1.accepted);
        }
    }

    #[test]
    fn oracle_dominates_every_branch(seed in any::<u64>(), case_nr in 0u64..1_000_000) {
        let sim = Simulator::new(seed);
        let active = all();
        let best = sim.oracle(case_nr, &active).unwrap();
        for (_, r) in sim.evaluate_counterfactuals(case_nr, &active).unwrap() {
            prop_assert!(best.profit >= r.profit);
        }
    }
}

#[test]
fn every_policy_is_bounded_by_the_oracle() {
    let sim = Simulator::new(3);
    let active = all();
    let oracle = sim.oracle_profits(0..300, &active).unwrap();
    let random = RandomPolicy::new(1);
    let policies: [&dyn Policy; 2] = [sim.bank(), &random];
    for p in policies {
        let profits = sim.policy_profits(0..300, &active, p).unwrap();
        for (o, q) in oracle.iter().zip(&profits) {
            assert!(o >= q);
        }
    }
}

/// Logged cases replay exactly through an online session fed the logged
/// actions.
#[test]
fn logged_cases_replay_through_sessions() {
    let sim = Simulator::new(21);
    let active = all();
    let log = sim.generate_log(200, 0.5, &active, 0).unwrap();
    for case in &log.cases {
        let mut s = sim.open_session(case.case_nr, &active).unwrap();
        let mut decisions = case.decisions.iter().filter(|d| active.contains(d.point.intervention));
        while let Some(p) = s.pending().cloned() {
            let d = decisions.next().unwrap();
            assert_eq!(d.point, p);
            s.step(d.action).unwrap();
        }
        let r = s.result().unwrap();
        assert_eq!(r.final_state.events, case.events);
        assert_eq!(r.profit.to_bits(), case.profit.to_bits());
    }
}

#[test]
fn parallel_and_sequential_logs_agree() {
    let sim = Simulator::new(8);
    let a = sim.generate_log(300, 0.3, &all(), 10).unwrap();
    let b = sim.generate_log_sequential(300, 0.3, &all(), 10).unwrap();
    assert_eq!(a, b);
}

/// Inactive decisions follow the background regime: with the bank as
/// background and nothing active, a session reproduces the bank run.
#[test]
fn background_bank_equals_bank_policy() {
    let sim = Simulator::new(12);
    let none = InterventionSequence::empty();
    for c in 0..100 {
        let bg = sim.open_session_with(c, &none, PolicyRegime::Bank).unwrap();
        let bank = sim.run_policy(c, &all(), sim.bank()).unwrap();
        assert_eq!(bg.result().unwrap().profit.to_bits(), bank.result().unwrap().profit.to_bits());
    }
}

/// Estimates are the hidden quality plus Normal(0, unc_quality) noise.
/// Cases whose quality lies 4 standard deviations inside [0, 1] are never
/// clipped, so the standardized error there is standard normal.
#[test]
fn estimate_noise_is_calibrated() {
    let sim = Simulator::new(77);
    let active = InterventionSequence::single(InterventionKind::ChooseProcedure);
    let log = sim.generate_log(100_000, 1.0, &active, 0).unwrap();
    let mut z = Vec::new();
    for case in &log.cases {
        for e in &case.events {
            if !matches!(e.activity, ActivityKind::InitiateApplication | ActivityKind::CallCustomer) {
                continue;
            }
            let (q, u) = (case.quality, e.attributes.unc_quality);
            if q - 4.0 * u > 0.0 && q + 4.0 * u < 1.0 {
                z.push((e.attributes.est_quality - q) / u);
            }
        }
    }
    let n = z.len() as f64;
    assert!(n > 20_000.0, "only {n} unclipped estimates");
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let within_one = z.iter().filter(|v| v.abs() < 1.0).count() as f64 / n;
    // 5 standard errors of each statistic under N(0, 1).
    assert!(mean.abs() < 5.0 / n.sqrt(), "mean {mean}");
    assert!((sd - 1.0).abs() < 5.0 / (2.0 * n).sqrt(), "sd {sd}");
    let p = 0.682_689_492_137_086;
    assert!((within_one - p).abs() < 5.0 * (p * (1.0 - p) / n).sqrt(), "{within_one}");
}

/// Each call shrinks the uncertainty by the decay factor.
#[test]
fn calls_shrink_uncertainty() {
    let sim = Simulator::new(5);
    let decay = sim.spec().uncertainty_decay;
    let log = sim.generate_log(500, 1.0, &all(), 0).unwrap();
    for case in &log.cases {
        let mut last = case.events[0].attributes.unc_quality;
        for e in &case.events[1..] {
            if e.activity == ActivityKind::CallCustomer {
                assert!((e.attributes.unc_quality - last * decay).abs() < 1e-12);
            }
            last = e.attributes.unc_quality;
        }
    }
}
