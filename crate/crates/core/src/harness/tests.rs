use super::*;
use crate::bits::BitString;
use crate::cex::Cex;
use crate::error::Error;
use crate::ma::{AuthStep, Ma, MaParams};
use crate::model::{run_honest_session, Msg, Sid, System};
use crate::pop::{cred_veri, mapop_system, Impl, KeyDirectory, MaPop, PopMode};
use crate::primitives::prf::hash;
use crate::primitives::sig::{sig_keygen, SchemeKind};
use crate::rng::Rng;

fn ma_system(l: usize, rng: &mut Rng) -> System<Ma> {
    let ma = Ma::new(MaParams::default()).unwrap();
    let (records, tags) = ma.setup(l, rng).unwrap();
    System::new(ma, (), records, tags, rng)
}

fn cex_system(l: usize, rng: &mut Rng) -> System<Cex> {
    let cex = Cex::new();
    let (records, tags) = cex.setup(l, rng).unwrap();
    System::new(cex, (), records, tags, rng)
}

fn mapop(imp: Impl, l: usize, rng: &mut Rng) -> (System<MaPop>, KeyDirectory) {
    mapop_system(MaParams::default(), imp, PopMode::Full, l, rng).unwrap()
}

fn ma_hub(l: usize, seed: u64) -> OracleHub<Ma> {
    let mut rng = Rng::from_u64(seed);
    OracleHub::new(ma_system(l, &mut rng), AdversaryBudget::default(), rng.fork("blind"))
}

fn mapop_hub(imp: Impl, l: usize, seed: u64) -> OracleHub<MaPop> {
    let mut rng = Rng::from_u64(seed);
    let (sys, dir) = mapop(imp, l, &mut rng);
    OracleHub::new(sys, AdversaryBudget::default(), rng.fork("blind")).with_directory(dir)
}

fn ma_setup(rng: &mut Rng) -> Result<GameSetup<Ma>> {
    Ok(ma_system(3, rng).into())
}

fn cex_setup(rng: &mut Rng) -> Result<GameSetup<Cex>> {
    Ok(cex_system(3, rng).into())
}

fn mapop_setup(rng: &mut Rng) -> Result<GameSetup<MaPop>> {
    let (system, dir) = mapop(Impl::Imp1, 3, rng);
    Ok(GameSetup {
        system,
        directory: Some(dir),
    })
}

fn deliver(m: &Msg) -> Option<Msg> {
    Some(m.clone())
}

// ---- budgets ----

#[test]
fn budget_refuses_query_n_plus_one_without_counting_it() {
    let mut rng = Rng::from_u64(1);
    let budget = AdversaryBudget::new(100, [2, 1, 1, 1, 0]);
    let mut hub = OracleHub::new(ma_system(2, &mut rng), budget, rng.fork("blind"));
    hub.o1_init_reader().unwrap();
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let sessions = hub.system().reader.sessions();
    assert!(matches!(hub.o1_init_reader(), Err(Error::BudgetExceeded("O1"))));
    assert_eq!(hub.system().reader.sessions(), sessions);
    assert_eq!(hub.meter().used(), [2, 0, 0, 0, 0]);

    hub.o2_send_tag(0, sid, &c1).unwrap();
    assert!(matches!(hub.o2_send_tag(0, sid, &c1), Err(Error::BudgetExceeded("O2"))));
    assert!(matches!(hub.o5_get_cred(sid), Err(Error::BudgetExceeded("O5"))));
    hub.o4_corrupt(1).unwrap();
    assert!(matches!(hub.o4_corrupt(0), Err(Error::BudgetExceeded("O4"))));
    assert!(!hub.is_corrupted(0));
    assert_eq!(hub.meter().total(), 4);
}

#[test]
fn budget_total_limit() {
    let mut meter = BudgetMeter::new(AdversaryBudget::new(3, [5; 5]));
    for k in 1..=3 {
        meter.charge(k).unwrap();
    }
    assert!(matches!(meter.charge(4), Err(Error::BudgetExceeded("t"))));
    assert_eq!(meter.used(), [1, 1, 1, 0, 0]);
}

// ---- stages ----

#[test]
fn guess_stage_restricts_oracles() {
    let mut hub = ma_hub(3, 2);
    assert!(GuessOracles::new(&mut hub).is_err());
    assert!(matches!(hub.enter_guess(3, World::Real), Err(Error::InvalidChallenge(3))));
    hub.o4_corrupt(1).unwrap();
    assert!(matches!(hub.enter_guess(1, World::Real), Err(Error::InvalidChallenge(1))));
    hub.enter_guess(2, World::Real).unwrap();
    let (sid, c1) = hub.o1_init_reader().unwrap();
    assert!(hub.o2_send_tag(0, sid, &c1).is_err());
    assert!(hub.o4_corrupt(0).is_err());
    assert!(hub.o5_get_cred(sid).is_err());
    let mut g = GuessOracles::new(&mut hub).unwrap();
    assert!(g.o2_send_tag(sid, &c1).unwrap().msg.is_some());
}

// ---- blinded unp# world ----

fn sharp<P: GameProtocol>(mut hub: OracleHub<P>) -> OracleHub<P> {
    hub.enter_guess(0, World::BlindedSharp).unwrap();
    hub
}

fn alpha_of(r: &OracleReply) -> Msg {
    r.msg.as_ref().unwrap().1.clone()
}

#[test]
fn sharp_o1_registers_transcript() {
    let mut hub = sharp(ma_hub(2, 3));
    let (sid, c1) = hub.o1_init_reader().unwrap();
    assert_eq!((c1.round, c1.body.len()), (1, hub.layout().reader_c[0]));
    assert_eq!(hub.ledger(&sid).unwrap().messages, vec![c1.body]);
    assert_eq!(hub.system().reader.sessions(), 0, "the reader is never touched");
}

#[test]
fn sharp_honest_flow_outputs_one() {
    let mut hub = sharp(ma_hub(2, 4));
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let r = hub.o2_send_tag(0, sid, &c1).unwrap();
    let a1 = alpha_of(&r);
    assert_eq!((a1.round, a1.body.len(), r.output), (2, hub.layout().tag_alpha[0], None));
    let r = hub.o3_send_reader(sid, &a1).unwrap();
    let c2 = alpha_of(&r);
    assert_eq!((c2.round, c2.body.len()), (3, hub.layout().reader_c[1]));
    assert_eq!(r.output, Some(true), "γ = 1 and the reader output is not deferred");
    let r = hub.o2_send_tag(0, sid, &c2).unwrap();
    assert_eq!(r, OracleReply { msg: None, output: Some(true) });
    let l = hub.ledger(&sid).unwrap();
    assert_eq!(l.messages, vec![c1.body, a1.body.clone(), c2.body.clone()]);
    assert_eq!((l.o_r, l.o_t), (Some(true), Some(true)));
    // the session is complete
    assert!(hub.o2_send_tag(0, sid, &c2).unwrap().is_ignored());
    assert!(hub.o3_send_reader(sid, &a1).unwrap().is_ignored());
}

#[test]
fn sharp_modified_final_message_gives_tag_zero() {
    let mut hub = sharp(ma_hub(2, 5));
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let a1 = alpha_of(&hub.o2_send_tag(0, sid, &c1).unwrap());
    let c2 = alpha_of(&hub.o3_send_reader(sid, &a1).unwrap());
    let bad = Msg::c(2, c2.body.with_flipped_bit(0));
    assert_eq!(hub.o2_send_tag(0, sid, &bad).unwrap().output, Some(false));
    assert_eq!(hub.ledger(&sid).unwrap().o_t, Some(false));
}

#[test]
fn sharp_modified_first_message_presets_reader_zero() {
    let mut hub = sharp(ma_hub(2, 6));
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let other = Msg::c(1, c1.body.with_flipped_bit(3));
    let r = hub.o2_send_tag(0, sid, &other).unwrap();
    let a1 = alpha_of(&r);
    assert_eq!((a1.body.len(), r.output), (hub.layout().tag_alpha[0], None));
    let l = hub.ledger(&sid).unwrap();
    assert!(l.preset);
    assert_eq!(l.o_r, Some(false));
    // even the exact α_1 leads to rejection
    assert_eq!(hub.o3_send_reader(sid, &a1).unwrap(), OracleReply { msg: None, output: Some(false) });
}

#[test]
fn sharp_first_message_outside_space_gives_tag_zero() {
    let mut hub = sharp(ma_hub(2, 7));
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let short = Msg::c(1, c1.body.slice(0, 8).unwrap());
    assert_eq!(hub.o2_send_tag(0, sid, &short).unwrap().output, Some(false));
    let wrong_round = Msg::c(2, c1.body.clone());
    let (sid2, _) = hub.o1_init_reader().unwrap();
    assert_eq!(hub.o2_send_tag(0, sid2, &wrong_round).unwrap().output, Some(false));
}

#[test]
fn sharp_modified_alpha_gives_reader_zero() {
    let mut hub = sharp(ma_hub(2, 8));
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let a1 = alpha_of(&hub.o2_send_tag(0, sid, &c1).unwrap());
    let bad = Msg::alpha(1, a1.body.with_flipped_bit(7));
    assert_eq!(hub.o3_send_reader(sid, &bad).unwrap(), OracleReply { msg: None, output: Some(false) });
    assert_eq!(hub.ledger(&sid).unwrap().o_r, Some(false));
    assert!(hub.o3_send_reader(sid, &a1).unwrap().is_ignored());
}

#[test]
fn sharp_adversary_sessions_use_second_ledger() {
    let mut hub = sharp(ma_hub(2, 9));
    let mut rng = Rng::from_u64(90);
    let sid = Sid::random(&mut rng);
    let c = Msg::c(1, rng.bits(hub.layout().reader_c[0]));
    let r = hub.o2_send_tag(0, sid, &c).unwrap();
    assert_eq!(alpha_of(&r).body.len(), hub.layout().tag_alpha[0]);
    assert!(hub.ledger(&sid).is_none());
    assert_eq!(hub.adv_ledger(&sid).unwrap().messages.len(), 2);
    // the tag is left waiting for a c_2 nobody can produce
    let c2 = Msg::c(2, rng.bits(hub.layout().reader_c[1]));
    assert_eq!(hub.o2_send_tag(0, sid, &c2).unwrap().output, Some(false));
    assert!(hub.o2_send_tag(0, sid, &c2).unwrap().is_ignored());
    // the reader never heard of this sid
    assert!(hub.o3_send_reader(sid, &alpha_of(&r)).unwrap().is_ignored());
}

#[test]
fn sharp_unknown_sid_outside_space_is_ignored() {
    let mut hub = sharp(ma_hub(2, 10));
    let mut rng = Rng::from_u64(100);
    let c = Msg::c(1, rng.bits(17));
    assert!(hub.o2_send_tag(0, Sid::random(&mut rng), &c).unwrap().is_ignored());
}

#[test]
fn sharp_deferred_layout() {
    let mut hub = sharp(mapop_hub(Impl::Imp1, 2, 11));
    let layout = hub.layout().clone();
    assert!(layout.deferred);
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let a1 = alpha_of(&hub.o2_send_tag(0, sid, &c1).unwrap());
    let r = hub.o3_send_reader(sid, &a1).unwrap();
    assert_eq!(r.output, None, "the reader output waits for α_2");
    let c2 = alpha_of(&r);
    assert_eq!(c2.body.len(), layout.reader_c[1]);
    let r = hub.o2_send_tag(0, sid, &c2).unwrap();
    assert_eq!(r.output, Some(true));
    let a2 = alpha_of(&r);
    assert_eq!((a2.round, a2.body.len()), (4, layout.tag_alpha[1]));
    let bad = Msg::alpha(2, a2.body.with_flipped_bit(1));
    assert_eq!(hub.o3_send_reader(sid, &a2).unwrap().output, Some(true));
    let l = hub.ledger(&sid).unwrap();
    assert_eq!(l.messages, vec![c1.body, a1.body, c2.body, a2.body]);
    assert_eq!((l.o_r, l.o_t), (Some(true), Some(true)));
    assert!(hub.o3_send_reader(sid, &bad).unwrap().is_ignored());
}

#[test]
fn sharp_deferred_layout_rejects_modified_final_alpha() {
    let mut hub = sharp(mapop_hub(Impl::Imp1, 2, 12));
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let a1 = alpha_of(&hub.o2_send_tag(0, sid, &c1).unwrap());
    let c2 = alpha_of(&hub.o3_send_reader(sid, &a1).unwrap());
    let a2 = alpha_of(&hub.o2_send_tag(0, sid, &c2).unwrap());
    let bad = Msg::alpha(2, a2.body.with_flipped_bit(100));
    assert_eq!(hub.o3_send_reader(sid, &bad).unwrap().output, Some(false));
}

#[test]
fn sharp_blinded_draws_ignore_system_randomness() {
    let hub = |seed| {
        let sys = ma_system(2, &mut Rng::from_u64(seed));
        sharp(OracleHub::new(sys, AdversaryBudget::default(), Rng::from_u64(77)))
    };
    let (mut a, mut b) = (hub(13), hub(14));
    let (sa, ca) = a.o1_init_reader().unwrap();
    let (sb, cb) = b.o1_init_reader().unwrap();
    assert_eq!((sa, &ca), (sb, &cb));
    assert_eq!(a.o2_send_tag(0, sa, &ca).unwrap(), b.o2_send_tag(0, sb, &cb).unwrap());
}

// ---- blinded unp* world ----

#[test]
fn star_answers_uniformly_without_outputs() {
    let mut rng = Rng::from_u64(14);
    let mut hub = OracleHub::new(ma_system(2, &mut rng), AdversaryBudget::default(), rng.fork("blind"))
        .hide_outputs(true);
    hub.enter_guess(0, World::BlindedStar).unwrap();
    let (sid, c1) = hub.o1_init_reader().unwrap();
    assert!(hub.ledger(&sid).is_none());
    let r = hub.o2_send_tag(0, sid, &c1).unwrap();
    let a1 = alpha_of(&r);
    assert_eq!((a1.round, a1.body.len(), r.output), (2, hub.layout().tag_alpha[0], None));
    let r = hub.o3_send_reader(sid, &a1).unwrap();
    let c2 = alpha_of(&r);
    assert_eq!((c2.round, c2.body.len(), r.output), (3, hub.layout().reader_c[1], None));
    // no tag reply follows the last reader message
    assert!(hub.o2_send_tag(0, sid, &c2).unwrap().is_ignored());
    // modified messages are answered all the same
    let bad = Msg::c(1, c1.body.with_flipped_bit(0));
    assert!(hub.o2_send_tag(0, sid, &bad).unwrap().msg.is_some());
}

#[test]
fn hidden_outputs_in_real_world() {
    let mut rng = Rng::from_u64(15);
    let mut hub = OracleHub::new(ma_system(2, &mut rng), AdversaryBudget::default(), rng.fork("blind"))
        .hide_outputs(true);
    let s = relay(&mut hub, 0, &mut deliver).unwrap();
    assert_eq!((s.o_r, s.o_t), (None, None));
    assert_eq!(s.messages.len(), 3);
    assert!(hub.system().reader.history()[0].output);
}

// ---- real world ----

#[test]
fn real_world_is_transparent() {
    let mut direct = ma_system(3, &mut Rng::from_u64(16));
    let mut hub = OracleHub::new(
        ma_system(3, &mut Rng::from_u64(16)),
        AdversaryBudget::default(),
        Rng::from_u64(0),
    );
    for i in [0, 2, 2, 1] {
        let t = run_honest_session(&mut direct, i).unwrap();
        let s = relay(&mut hub, i, &mut deliver).unwrap();
        assert_eq!(s.messages, t.messages);
        assert_eq!((s.o_r, s.o_t), (t.o_r, t.o_t));
        assert_eq!(s.sid, Some(t.sid));
    }
    // same after switching to the guess stage with b = 1
    hub.enter_guess(1, World::Real).unwrap();
    let t = run_honest_session(&mut direct, 1).unwrap();
    let s = relay(&mut hub, 1, &mut deliver).unwrap();
    assert_eq!(s.messages, t.messages);
}

#[test]
fn o1_times_out_an_open_session() {
    let mut hub = ma_hub(2, 17);
    let (sid, c1) = hub.o1_init_reader().unwrap();
    let a = alpha_of(&hub.o2_send_tag(0, sid, &c1).unwrap());
    hub.o1_init_reader().unwrap();
    assert!(hub.system().reader.history()[0].timed_out);
    // the stale session no longer exists
    assert!(hub.o3_send_reader(sid, &a).unwrap().output != Some(true));
}

#[test]
fn o5_returns_credentials_only_for_pop() {
    let mut hub = ma_hub(2, 18);
    let s = relay(&mut hub, 0, &mut deliver).unwrap();
    assert_eq!(hub.o5_get_cred(s.sid.unwrap()).unwrap(), None);

    let mut hub = mapop_hub(Impl::Imp1, 2, 18);
    let s = relay(&mut hub, 1, &mut deliver).unwrap();
    assert!(s.accepted());
    let cred = hub.o5_get_cred(s.sid.unwrap()).unwrap().unwrap();
    assert!(cred_veri(hub.directory().unwrap(), &cred));
    assert_eq!(cred.tag_id, BitString::from_u64(2, 256));
    assert_eq!(hub.o5_get_cred(Sid([7; 16])).unwrap(), None);
}

#[test]
fn o4_exposes_tag_memory() {
    let mut hub = ma_hub(2, 19);
    let mem = hub.o4_corrupt(0).unwrap();
    assert!(!mem.is_empty());
    assert!(hub.is_corrupted(0));
    assert!(matches!(hub.o4_corrupt(5), Err(Error::UnknownTag(5))));
}

// ---- scenarios ----

fn run_scenario<P: GameProtocol>(
    s: &dyn Scenario<P>,
    sys: System<P>,
    tag: usize,
) -> Vec<SessionOutcome> {
    let mut hub = OracleHub::new(sys, s.budget(), Rng::from_u64(0));
    s.run(&mut hub, tag).unwrap()
}

#[test]
fn honest_runner_accepts_within_budget() {
    for seed in 0..3 {
        let (sys, _) = mapop(Impl::Imp2 { pool: 8 }, 3, &mut Rng::from_u64(seed));
        let out = run_scenario(&HonestRunner { sessions: 4 }, sys, 1);
        assert!(out.iter().all(SessionOutcome::accepted));
    }
}

#[test]
fn bit_flipper_on_final_alpha_rejected() {
    let mut rng = Rng::from_u64(20);
    for _ in 0..20 {
        let (sys, _) = mapop(Impl::Imp1, 2, &mut rng);
        let bit = rng.below(1 << 12);
        let out = run_scenario(&BitFlipper { round: 4, bit }, sys, 0);
        assert_eq!(out[0].o_r, Some(false), "bit {bit}");
    }
}

#[test]
fn bit_flipper_on_any_round_rejected_by_someone() {
    let mut rng = Rng::from_u64(21);
    for round in 1..=4 {
        let (sys, _) = mapop(Impl::Imp3 { k: 4 }, 2, &mut rng);
        let bit = rng.below(1 << 10);
        let out = run_scenario(&BitFlipper { round, bit }, sys, 1);
        assert!(!out[0].accepted(), "round {round}");
        assert_ne!(out[0].o_r, Some(true), "round {round}");
    }
}

#[test]
fn desync_attacker_recovers_through_step_two() {
    let sys = ma_system(4, &mut Rng::from_u64(22));
    let attack = DesyncAttacker { drops: 5 };
    let mut hub = OracleHub::new(sys, Scenario::<Ma>::budget(&attack), Rng::from_u64(0));
    let out = attack.run(&mut hub, 2).unwrap();
    assert_eq!(out.len(), 7);
    // the tag answered, the reader never heard back
    for s in &out[..5] {
        assert_eq!((s.messages.len(), s.o_r, s.o_t), (2, None, None));
    }
    assert!(out[5].accepted() && out[6].accepted());
    let steps: Vec<_> = hub.system().reader.history()[5..]
        .iter()
        .map(|h| h.state.as_ref().unwrap().step)
        .collect();
    assert_eq!(steps, vec![Some(AuthStep::Desync), Some(AuthStep::Sync)]);
}

#[test]
fn desync_attacker_against_mapop() {
    let (sys, _) = mapop(Impl::Imp2 { pool: 16 }, 3, &mut Rng::from_u64(23));
    let out = run_scenario(&DesyncAttacker { drops: 5 }, sys, 0);
    assert!(out[5].accepted() && out[6].accepted());
}

#[test]
fn replayer_on_final_alpha_rejected() {
    for seed in 0..5 {
        let (sys, _) = mapop(Impl::Imp1, 2, &mut Rng::from_u64(30 + seed));
        let out = run_scenario(&Replayer { round: 4 }, sys, 1);
        assert!(out[0].accepted());
        assert_eq!(out[1].o_r, Some(false));
    }
}

#[test]
fn replayer_on_first_alpha_rejected_for_ma() {
    let out = run_scenario(&Replayer { round: 2 }, ma_system(2, &mut Rng::from_u64(35)), 0);
    assert!(out[0].accepted());
    assert_eq!(out[1].o_r, Some(false));
}

#[test]
fn db_splicer_rejected() {
    let mut rng = Rng::from_u64(36);
    for split in [1, 128, 256, 512, 700] {
        let out = run_scenario(&DbSplicer { other: 1, split }, ma_system(2, &mut rng), 0);
        assert_eq!(out[0].o_r, Some(false), "split {split}");
        let (sys, _) = mapop(Impl::Imp1, 2, &mut rng);
        let out = run_scenario(&DbSplicer { other: 1, split }, sys, 0);
        assert_ne!(out[0].o_r, Some(true), "split {split}");
    }
}

#[test]
fn scenario_budgets_are_enforced() {
    let budget = <HonestRunner as Scenario<Ma>>::budget(&HonestRunner { sessions: 2 });
    let mut hub = OracleHub::new(ma_system(1, &mut Rng::from_u64(37)), budget, Rng::from_u64(0));
    assert!(HonestRunner { sessions: 2 }.run(&mut hub, 0).is_ok());
    let tight = AdversaryBudget::new(100, [1, 4, 4, 0, 0]);
    let mut hub = OracleHub::new(ma_system(1, &mut Rng::from_u64(37)), tight, Rng::from_u64(0));
    assert!(matches!(
        HonestRunner { sessions: 2 }.run(&mut hub, 0),
        Err(Error::BudgetExceeded("O1"))
    ));
}

// ---- credential events ----

#[test]
fn honest_credential_triggers_no_event() {
    let mut hub = mapop_hub(Impl::Imp1, 2, 40);
    let s = relay(&mut hub, 0, &mut deliver).unwrap();
    let cred = hub.o5_get_cred(s.sid.unwrap()).unwrap().unwrap();
    assert_eq!(cred_events(&hub, &cred).unwrap(), (false, false));
}

#[test]
fn resigned_cred3_triggers_e1() {
    // positive control: the tag key signs a fresh cred_3 the reader never
    // saw; the next precomputed nonce makes it differ from the honest one
    let mut hub = mapop_hub(Impl::Imp2 { pool: 4 }, 2, 41);
    let mut sk = hub.system().tags[0].state().sk.clone();
    let s = relay(&mut hub, 0, &mut deliver).unwrap();
    let cred = hub.o5_get_cred(s.sid.unwrap()).unwrap().unwrap();
    let h = hash(cred.cred2.bits());
    assert_eq!(sk.sign(&h).unwrap(), cred.cred3);
    let forged = Credential {
        cred3: sk.sign(&h).unwrap(),
        ..cred.clone()
    };
    assert_ne!(forged.cred3, cred.cred3);
    assert_eq!(cred_events(&hub, &forged).unwrap(), (true, false));
    // not once the tag is corrupted
    hub.o4_corrupt(0).unwrap();
    assert_eq!(cred_events(&hub, &forged).unwrap(), (false, false));
}

#[test]
fn adversary_issued_credential_triggers_e2() {
    // positive control: the tag key countersigns the adversary's cred_2
    let mut hub = mapop_hub(Impl::Imp1, 2, 42);
    let mut rng = Rng::from_u64(420);
    let mut tag_sk = hub.system().tags[1].state().sk.clone();
    let (pk, mut sk) = sig_keygen(SchemeKind::FullTime, &mut rng).unwrap();
    let id = BitString::from_u64(MitmResign::ISSUER_ID, 256);
    hub.register_issuer(id.clone(), pk).unwrap();
    let cred1 = rng.bits(256);
    let cred2 = sk.sign(&cred1).unwrap();
    let cred3 = tag_sk.sign(&hash(cred2.bits())).unwrap();
    let cred = Credential {
        reader_id: id,
        tag_id: BitString::from_u64(2, 256),
        cred1,
        cred2,
        cred3,
    };
    assert_eq!(cred_events(&hub, &cred).unwrap(), (false, true));
}

#[test]
fn built_in_forgers_trigger_no_event() {
    let cfg = ExperimentConfig::new(12, 43);
    for name in FORGER_NAMES {
        let f = forger::<MaPop>(name).unwrap();
        let r = exp_cred_unforge(&mapop_setup, f.as_ref(), &cfg).unwrap();
        assert_eq!((r.e1, r.e2, r.successes), (Some(0), Some(0), 0), "{name}");
        assert_eq!(r.counted, 12);
    }
    assert!(matches!(forger::<MaPop>("nope"), Err(Error::UnknownAdversary(_))));
}

#[test]
fn mitm_resign_credential_fails_verification() {
    let mut hub = mapop_hub(Impl::Imp1, 2, 44);
    let cred = MitmResign.forge(&mut hub, &mut Rng::from_u64(440)).unwrap().unwrap();
    assert!(hub.directory().unwrap().is_adversary(&cred.reader_id));
    assert!(!cred_veri(hub.directory().unwrap(), &cred));
}

#[test]
fn cred_events_need_a_directory() {
    let hub = ma_hub(1, 45);
    let mut h2 = mapop_hub(Impl::Imp1, 1, 45);
    let s = relay(&mut h2, 0, &mut deliver).unwrap();
    let cred = h2.o5_get_cred(s.sid.unwrap()).unwrap().unwrap();
    assert!(matches!(cred_events(&hub, &cred), Err(Error::OracleUnavailable(_))));
}

// ---- privacy experiments ----

#[test]
fn cex_distinguisher_breaks_counterexample_only() {
    let cfg = ExperimentConfig::new(200, 50);
    let adv = CexDistinguisher;
    let cex = exp_unp_star(&cex_setup, &adv, &cfg).unwrap();
    assert!(cex.advantage >= 0.45, "{cex}");
    let ma = exp_unp_star(&ma_setup, &adv, &cfg).unwrap();
    assert!(ma.interval_contains_zero(), "{ma}");
    let sharp = exp_unp_sharp(&cex_setup, &adv, &cfg).unwrap();
    assert!(sharp.advantage >= 0.45, "{sharp}");
}

#[test]
fn built_in_adversaries_stay_near_zero_against_mapop() {
    // four standard errors at 200 trials; the 95% interval check at full
    // scale lives in the acceptance suite
    let cfg = ExperimentConfig::new(200, 51);
    for name in ["coin-flipper", "transcript-statistics", "repeated-query", "abort-probe"] {
        let adv = privacy_adversary::<MaPop>(name).unwrap();
        let r = exp_unp_sharp(&mapop_setup, adv.as_ref(), &cfg).unwrap();
        assert!(r.advantage <= 4.0 * (0.25f64 / 200.0).sqrt(), "{r}");
        assert_eq!(r.counted, 200);
    }
}

#[test]
fn abort_probe_detects_a_reader_accepting_in_the_blinded_world() {
    // sanity for the probe: against the real world the reader always rejects
    let mut hub = ma_hub(2, 52);
    hub.enter_guess(0, World::Real).unwrap();
    let mut g = GuessOracles::new(&mut hub).unwrap();
    let st = Challenge::default();
    for k in 0..10 {
        assert!(!AbortProbe.guess(&mut g, &st, &mut Rng::from_u64(k)).unwrap());
    }
}

struct CorruptChallenge;

impl<P: GameProtocol> Adversary<P> for CorruptChallenge {
    fn name(&self) -> &str {
        "corrupt-challenge"
    }

    fn learn(&self, o: &mut OracleHub<P>, _: &mut Rng) -> Result<Challenge> {
        o.o4_corrupt(0)?;
        Ok(Challenge::default())
    }

    fn guess(&self, _: &mut GuessOracles<'_, P>, _: &Challenge, _: &mut Rng) -> Result<bool> {
        unreachable!("an invalid challenge never reaches the guess stage")
    }
}

#[test]
fn corrupted_challenge_invalidates_trial() {
    let r = exp_unp_sharp(&ma_setup, &CorruptChallenge, &ExperimentConfig::new(20, 53)).unwrap();
    assert_eq!((r.invalid, r.counted, r.successes), (20, 0, 0));
}

struct Greedy;

impl<P: GameProtocol> Adversary<P> for Greedy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn learn(&self, o: &mut OracleHub<P>, _: &mut Rng) -> Result<Challenge> {
        o.o1_init_reader()?;
        Ok(Challenge::default())
    }

    fn guess(&self, o: &mut GuessOracles<'_, P>, _: &Challenge, _: &mut Rng) -> Result<bool> {
        loop {
            o.o1_init_reader()?;
        }
    }
}

#[test]
fn budget_policy_decides_overrun_trials() {
    let mut cfg = ExperimentConfig::new(30, 54);
    cfg.budget = AdversaryBudget::uniform(3);
    let r = exp_unp_sharp(&ma_setup, &Greedy, &cfg).unwrap();
    assert_eq!((r.counted, r.successes, r.aborted), (30, 0, 0));
    cfg.policy = BudgetPolicy::AbortTrial;
    let r = exp_unp_sharp(&ma_setup, &Greedy, &cfg).unwrap();
    assert_eq!((r.counted, r.aborted), (0, 30));
}

#[test]
fn reports_are_deterministic() {
    let cfg = ExperimentConfig::new(40, 55);
    let adv = TranscriptStatistics { sessions: 2 };
    let a = exp_unp_sharp(&mapop_setup, &adv, &cfg).unwrap();
    let b = exp_unp_sharp(&mapop_setup, &adv, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_string(), b.to_string());
    let c = exp_unp_sharp(&mapop_setup, &adv, &ExperimentConfig::new(40, 56)).unwrap();
    assert_ne!(a.trial_seeds, c.trial_seeds);
}

#[test]
fn report_formats() {
    let r = exp_unp_star(&cex_setup, &CexDistinguisher, &ExperimentConfig::new(10, 57)).unwrap();
    assert_eq!(ExperimentReport::from_json(&r.to_json()).unwrap(), r);
    let text = r.to_string();
    for key in ["experiment: unp-star", "protocol: ", "trials: 10", "successes: ", "advantage: ", "ci_low: ", "ci_high: ", "seed: 57"] {
        assert!(text.contains(key), "{key} in {text}");
    }
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    for key in ["experiment", "protocol", "trials", "successes", "advantage", "ci_low", "ci_high", "seed"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert!(json.get("e1").is_none());
}

#[test]
fn zero_trials_rejected() {
    assert!(exp_unp_sharp(&ma_setup, &CoinFlipper, &ExperimentConfig::new(0, 1)).is_err());
}

#[test]
fn unknown_adversary_name() {
    assert!(matches!(privacy_adversary::<Ma>("x"), Err(Error::UnknownAdversary(_))));
    for name in ADVERSARY_NAMES {
        assert_eq!(privacy_adversary::<Ma>(name).unwrap().name(), name);
    }
}
