use rfpop::error::Error;
use rfpop::ma::Ma;
use rfpop::model::{run_honest_session, run_session, Relay};
use rfpop::pop::MaPop;
use rfpop::rng::Rng;
use rfpop_cli::config::{Config, Mode, SigImpl};
use rfpop_cli::deploy::{self, Deployable, DB_FILE};
use rfpop_cli::store::{db_snapshot_load, DbFile, MAGIC};

fn ma_cfg() -> Config {
    Config { mode: Mode::Ma, seed: 11, ..Config::default() }
}

#[test]
fn journal_reproduces_every_snapshot() {
    let cfg = ma_cfg();
    let (mut sys, _) = Ma::system(&cfg, 4, &mut Rng::from_u64(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.db");
    DbFile::<Ma>::of_reader(cfg.clone(), &sys.reader).save(&path).unwrap();
    for (n, i) in [0usize, 2, 2, 3, 1, 0].into_iter().enumerate() {
        let relay = if n == 2 { Relay::DropFinalTagMessage } else { Relay::Honest };
        run_session(&mut sys, i, relay).unwrap();
        DbFile::<Ma>::append(&path, sys.reader.history().last().unwrap()).unwrap();
    }
    let file = DbFile::<Ma>::load(&path).unwrap();
    assert_eq!(file.journal.len(), 6);
    for j in 0..=6 {
        assert_eq!(file.snapshot(j).unwrap(), sys.reader.db_at(j).unwrap(), "DB^{j}");
        assert_eq!(db_snapshot_load::<Ma>(&path, j).unwrap(), sys.reader.db_at(j).unwrap());
    }
    assert_eq!(&file.snapshot(0).unwrap(), sys.reader.initial_db());
    assert!(matches!(file.snapshot(7), Err(Error::UnknownSnapshot(7))));
}

#[test]
fn save_load_save_is_byte_identical() {
    let cfg = Config { seed: 12, ..Config::default() };
    let (mut sys, _) = MaPop::system(&cfg, 3, &mut Rng::from_u64(2)).unwrap();
    for i in [0, 1, 2, 1] {
        run_honest_session(&mut sys, i).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.db"), dir.path().join("b.db"));
    DbFile::<MaPop>::of_reader(cfg, &sys.reader).save(&a).unwrap();
    DbFile::<MaPop>::load(&a).unwrap().save(&b).unwrap();
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert_eq!(&x[..6], MAGIC);
}

#[test]
fn restored_reader_continues_the_history() {
    let cfg = ma_cfg();
    let (mut sys, _) = Ma::system(&cfg, 2, &mut Rng::from_u64(3)).unwrap();
    run_honest_session(&mut sys, 1).unwrap();
    run_session(&mut sys, 0, Relay::DropFinalTagMessage).unwrap();
    let file = DbFile::<Ma>::decode(&DbFile::<Ma>::of_reader(cfg, &sys.reader).encode()).unwrap();
    let reader = file.reader(sys.proto.clone(), (), Rng::from_u64(4));
    assert_eq!(reader.sessions(), 2);
    assert_eq!(reader.db(), sys.reader.db());
    sys.reader = reader;
    // tag 0 ran ahead; the restored reader still recovers it
    let t = run_honest_session(&mut sys, 0).unwrap();
    assert_eq!((t.o_r, t.o_t), (Some(true), Some(true)));
}

#[test]
fn rejects_foreign_and_damaged_files() {
    assert!(matches!(DbFile::<Ma>::decode(b"NOTADB"), Err(Error::Malformed(_))));
    let cfg = ma_cfg();
    let (mut sys, _) = Ma::system(&cfg, 2, &mut Rng::from_u64(5)).unwrap();
    run_honest_session(&mut sys, 0).unwrap();
    let bytes = DbFile::<Ma>::of_reader(cfg, &sys.reader).encode();
    assert!(DbFile::<Ma>::decode(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn setup_is_deterministic_and_complete() {
    let cfg = Config { seed: 21, ..Config::default() };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sa = deploy::setup::<MaPop>(&cfg, 3, &a).unwrap();
    let sb = deploy::setup::<MaPop>(&cfg, 3, &b).unwrap();
    assert_eq!(sa, sb);
    assert_eq!(sa.digest, deploy::load_para(&a).unwrap().digest());
    for f in [DB_FILE, deploy::READER_KEY, deploy::PARA_FILE, "tag-0.key", "tag-1.key", "tag-2.key"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(!a.join("tag-3.key").exists());
    let file = DbFile::<MaPop>::load(&a.join(DB_FILE)).unwrap();
    assert_eq!(file.records.len(), 3);
    assert_eq!(file.config, cfg);
    // never overwrites
    assert!(deploy::setup::<MaPop>(&cfg, 3, &a).is_err());
    let other = deploy::setup::<MaPop>(&Config { seed: 22, ..cfg }, 3, &dir.path().join("c")).unwrap();
    assert_ne!(other.digest, sa.digest);
}

#[test]
fn loaded_deployment_matches_fresh_system() {
    let cfg = Config { seed: 23, ..Config::default() };
    let dir = tempfile::tempdir().unwrap();
    deploy::setup::<MaPop>(&cfg, 2, dir.path()).unwrap();
    let (_, sys_dir) = MaPop::system(&cfg, 2, &mut Rng::from_u64(cfg.seed)).unwrap();
    let (loaded_cfg, mut reader) = deploy::resume_reader::<MaPop>(dir.path()).unwrap();
    assert_eq!(loaded_cfg, cfg);
    let mut tag = deploy::resume_tag::<MaPop>(dir.path(), 1).unwrap();
    assert_eq!(tag.version(), 1);
    // one session between the stored parties
    let (sid, mut m) = reader.start().unwrap();
    let o_r = loop {
        let out = tag.step(sid, &m).unwrap();
        let a = out.reply().unwrap().1.clone();
        let out = reader.step(sid, &a).unwrap();
        if let Some(o) = out.output() {
            break o;
        }
        m = out.reply().unwrap().1.clone();
    };
    assert!(o_r);
    let cred = reader.protocol().cred_gen(&reader, 1).unwrap().unwrap();
    assert!(rfpop::pop::cred_veri(&sys_dir.unwrap(), &cred));
    deploy::store_tag(dir.path(), 1, &tag).unwrap();
    assert_eq!(deploy::resume_tag::<MaPop>(dir.path(), 1).unwrap().version(), tag.version());
    assert!(matches!(deploy::resume_tag::<MaPop>(dir.path(), 5), Err(Error::UnknownTag(5))));
    assert!(deploy::resume_reader::<Ma>(dir.path()).is_err());
}

#[test]
fn config_violations() {
    let k0 = Config {
        signature: rfpop_cli::config::Signatures { reader: SigImpl::Impl1, tag: SigImpl::Impl3 },
        k: 0,
        ..Config::default()
    };
    assert!(matches!(k0.validate(), Err(Error::Config(_))));
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(deploy::setup::<MaPop>(&k0, 3, dir.path()), Err(Error::Config(_))));
    let small_pool = Config {
        signature: rfpop_cli::config::Signatures { reader: SigImpl::Impl1, tag: SigImpl::Impl2 },
        pool: 5,
        s: 6,
        ..Config::default()
    };
    assert!(small_pool.validate().is_err());
    assert!(Config { pool: 6, ..small_pool }.validate().is_ok());
    let reader3 = Config {
        signature: rfpop_cli::config::Signatures { reader: SigImpl::Impl3, tag: SigImpl::Impl1 },
        ..Config::default()
    };
    assert!(reader3.validate().is_err());
    assert!(Config::from_toml("unknown = 1").is_err());
    assert!(deploy::setup::<MaPop>(&Config::default(), 0, &dir.path().join("x")).is_err());
}

#[test]
fn config_toml_round_trip_and_resolution() {
    let text = "mode = \"ma\"\nseed = 5\nK = 40\n[lengths]\nl_k = 256\nl_r = 256\nl_u = 256\nl_v = 256\n[signature]\nreader = \"impl1\"\ntag = \"impl3\"\n";
    let cfg = Config::from_toml(text).unwrap();
    assert_eq!((cfg.mode, cfg.seed, cfg.k, cfg.signature.tag), (Mode::Ma, 5, 40, SigImpl::Impl3));
    assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    let p = cfg.ma_params();
    assert_eq!((p.l_d, p.l_p), (768, 512));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, text).unwrap();
    assert_eq!(Config::resolve(Some(&path)).unwrap(), cfg);
}
