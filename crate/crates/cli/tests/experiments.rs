use rfpop::error::Error;
use rfpop_cli::experiments::{run, within_bounds, Game, Request, Target, ATTACK_FLOOR};

fn req(game: Game, target: Target, adversary: &str, trials: u64) -> Request {
    Request::new(game, target, adversary, trials, 5)
}

#[test]
fn counterexample_distinguisher_clears_the_floor() {
    let r = run(&req(Game::UnpStar, Target::Cex, "cex-distinguisher", 200)).unwrap();
    assert_eq!((r.experiment.as_str(), r.protocol.as_str()), ("unp-star", "cex"));
    assert!(r.advantage >= ATTACK_FLOOR, "{}", r.advantage);
    assert!(within_bounds(&r));
}

#[test]
fn coin_flipper_stays_near_zero() {
    let r = run(&req(Game::UnpSharp, Target::Mapop, "coin-flipper", 200)).unwrap();
    assert_eq!(r.protocol, "mapop");
    assert!(within_bounds(&r));
}

#[test]
fn forgers_fire_no_events() {
    for f in ["replay", "splice", "random"] {
        let r = run(&req(Game::CredUfrg, Target::Mapop, f, 10)).unwrap();
        assert_eq!((r.successes, r.e1, r.e2), (0, Some(0), Some(0)), "{f}");
        assert!(within_bounds(&r));
    }
}

#[test]
fn ptpt_controls() {
    let broken = run(&req(Game::Ptpt, Target::Identity, "identity-probe", 200)).unwrap();
    assert!(broken.protocol.starts_with("identity"));
    assert!(broken.advantage >= ATTACK_FLOOR);
    assert!(within_bounds(&broken));
    let sound = run(&req(Game::Ptpt, Target::Ma, "identity-probe", 200)).unwrap();
    assert!(sound.interval_contains_zero());
    assert!(within_bounds(&sound));
}

#[test]
fn bounds_flag_failures() {
    let mut r = run(&req(Game::UnpStar, Target::Cex, "cex-distinguisher", 50)).unwrap();
    r.advantage = 0.3;
    assert!(!within_bounds(&r));
    let mut r = run(&req(Game::CredUfrg, Target::Mapop, "splice", 2)).unwrap();
    r.successes = 1;
    assert!(!within_bounds(&r));
    let mut r = run(&req(Game::UnpSharp, Target::Ma, "coin-flipper", 50)).unwrap();
    (r.ci_low, r.ci_high) = (0.1, 0.3);
    assert!(!within_bounds(&r));
}

#[test]
fn rejects_bad_requests() {
    assert!(matches!(
        run(&req(Game::UnpSharp, Target::Ma, "nobody", 10)),
        Err(Error::UnknownAdversary(_))
    ));
    assert!(matches!(run(&req(Game::CredUfrg, Target::Mapop, "nobody", 10)), Err(Error::UnknownAdversary(_))));
    assert!(run(&req(Game::CredUfrg, Target::Ma, "splice", 10)).is_err());
    assert!(run(&req(Game::UnpStar, Target::Identity, "coin-flipper", 10)).is_err());
    assert!(run(&req(Game::UnpStar, Target::Ma, "coin-flipper", 0)).is_err());
    assert!("unp".parse::<Game>().is_err());
    assert!("rsa".parse::<Target>().is_err());
}

#[test]
fn reports_replay_from_the_seed() {
    for (g, t, a) in [
        (Game::UnpSharp, Target::Mapop, "transcript-statistics"),
        (Game::CredUfrg, Target::Mapop, "replay"),
        (Game::Ptpt, Target::Ma, "bit-balance"),
    ] {
        let x = run(&req(g, t, a, 20)).unwrap().to_json();
        let y = run(&req(g, t, a, 20)).unwrap().to_json();
        assert_eq!(x, y, "{a}");
    }
}
