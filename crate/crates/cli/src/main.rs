use std::fs;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rfpop::harness::ExperimentReport;
use rfpop::ma::Ma;
use rfpop::model::Record;
use rfpop::pop::{cred_veri, Credential, MaPop};
use rfpop::primitives::prf::hash;

use rfpop_cli::config::{Config, Mode, CONFIG_ENV};
use rfpop_cli::deploy::{self, Deployable};
use rfpop_cli::experiments::{self, Game, Request, Target};
use rfpop_cli::service::{self, ReaderService, Ticks};
use rfpop_cli::store::DbFile;
use rfpop_cli::tables::{self, Column};

#[derive(Parser)]
#[command(name = "rfpop", version, about = "RFID mutual authentication with proof of possession")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a fresh deployment: reader database, reader key, tag keys.
    Setup {
        #[arg(long)]
        tags: usize,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "deploy")]
        out: PathBuf,
    },
    /// Serves reader sessions on a socket, one at a time.
    ServeReader {
        #[arg(long, default_value = "deploy")]
        dir: PathBuf,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
        /// Exit after this many sessions.
        #[arg(long)]
        sessions: Option<u64>,
    },
    /// Runs one session as tag `i` against a reader service.
    TagRun {
        #[arg(long, default_value = "deploy")]
        dir: PathBuf,
        #[arg(long)]
        tag: usize,
        /// Overrides the configured reader address.
        #[arg(long)]
        connect: Option<String>,
        /// Where to store the credential the reader hands out.
        #[arg(long)]
        cred_out: Option<PathBuf>,
    },
    /// Runs a security game and writes its report.
    Experiment {
        #[arg(long)]
        name: String,
        #[arg(long)]
        adversary: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "mapop")]
        protocol: String,
        #[arg(long, default_value_t = 3)]
        tags: usize,
        /// Lengths and tag signatures of the trial systems.
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Message and storage sizes measured from a live session.
    ReportSizes {
        #[arg(long = "impl")]
        column: String,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Operation counts of a sync and a desync session.
    ReportOps {
        #[arg(long = "impl")]
        column: String,
        #[arg(long, default_value_t = 100)]
        tags: usize,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Credential export and offline verification.
    Cred {
        #[command(subcommand)]
        command: CredCommand,
    },
    /// Reader database inspection.
    Db {
        #[command(subcommand)]
        command: DbCommand,
    },
}

#[derive(Subcommand)]
enum CredCommand {
    /// Prints 1 if the credential verifies under the key directory, else 0.
    Verify {
        #[arg(long)]
        para: PathBuf,
        #[arg(long)]
        cred: PathBuf,
    },
    /// Regenerates the credential of a journaled session.
    Export {
        #[arg(long, default_value = "deploy")]
        dir: PathBuf,
        #[arg(long)]
        session: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DbCommand {
    /// Prints `DB^j`.
    Load {
        #[arg(long, default_value = "deploy/reader.db")]
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        snapshot: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Setup { tags, config, out } => {
            let cfg = Config::resolve(config.as_deref())?;
            let summary = match cfg.mode {
                Mode::Ma => deploy::setup::<Ma>(&cfg, tags, &out)?,
                Mode::Mapop => deploy::setup::<MaPop>(&cfg, tags, &out)?,
            };
            println!("tags: {}", summary.tags);
            println!("para digest: {}", summary.digest);
        }
        Command::ServeReader { dir, listen, sessions } => match deploy::deployment_config(&dir)?.mode {
            Mode::Ma => serve::<Ma>(&dir, listen, sessions)?,
            Mode::Mapop => serve::<MaPop>(&dir, listen, sessions)?,
        },
        Command::TagRun {
            dir,
            tag,
            connect,
            cred_out,
        } => {
            let ok = match deploy::deployment_config(&dir)?.mode {
                Mode::Ma => tag_run::<Ma>(&dir, tag, connect, cred_out.as_deref())?,
                Mode::Mapop => tag_run::<MaPop>(&dir, tag, connect, cred_out.as_deref())?,
            };
            if !ok {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Experiment {
            name,
            adversary,
            trials,
            seed,
            protocol,
            tags,
            config,
            out,
            format,
        } => {
            let mut req = Request::new(name.parse::<Game>()?, protocol.parse::<Target>()?, &adversary, trials, seed);
            req.tags = tags;
            req.config = Config::resolve(config.as_deref())?;
            let report = experiments::run(&req)?;
            let text = render(&report, format);
            match out {
                Some(path) => fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
            let ok = experiments::within_bounds(&report);
            eprintln!("{}", if ok { "within bounds" } else { "OUT OF BOUNDS" });
            if !ok {
                return Ok(ExitCode::from(1));
            }
        }
        Command::ReportSizes { column, config, format } => {
            let cfg = Config::resolve(config.as_deref())?;
            let t = tables::report_sizes(column.parse::<Column>()?, &cfg)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&t)?),
                Format::Text => println!("{t}"),
            }
        }
        Command::ReportOps {
            column,
            tags,
            config,
            format,
        } => {
            let cfg = Config::resolve(config.as_deref())?;
            let t = tables::report_ops(column.parse::<Column>()?, &cfg, tags)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&t)?),
                Format::Text => print!("{t}"),
            }
        }
        Command::Cred {
            command: CredCommand::Verify { para, cred },
        } => {
            let dir = deploy::load_para_file(&para)?;
            let cred = Credential::from_bytes(&fs::read(&cred)?)?;
            let ok = cred_veri(&dir, &cred);
            println!("{}", u8::from(ok));
            if !ok {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Cred {
            command: CredCommand::Export { dir, session, out },
        } => {
            if deploy::deployment_config(&dir)?.mode != Mode::Mapop {
                bail!("credentials exist only in mapop deployments");
            }
            let (_, reader) = deploy::resume_reader::<MaPop>(&dir)?;
            let cred = reader
                .protocol()
                .cred_gen(&reader, session)?
                .with_context(|| format!("session {session} issued no credential"))?;
            fs::write(&out, cred.to_bytes())?;
            println!("tag id: {}", cred.tag_id.to_hex());
        }
        Command::Db {
            command: DbCommand::Load { file, snapshot },
        } => {
            let bytes = fs::read(&file)?;
            let cfg = deploy::deployment_config(file.parent().unwrap_or(Path::new(".")))
                .or_else(|_| config_of(&bytes))?;
            match cfg.mode {
                Mode::Ma => print_snapshot::<Ma>(&bytes, snapshot)?,
                Mode::Mapop => print_snapshot::<MaPop>(&bytes, snapshot)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn render(report: &ExperimentReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Text => report.to_string(),
    }
}

fn config_of(db: &[u8]) -> Result<Config> {
    let mut r = rfpop::codec::FieldReader::new(db);
    r.raw(rfpop_cli::store::MAGIC.len())?;
    Ok(Config::from_toml(&r.str()?)?)
}

fn print_snapshot<P: Deployable>(bytes: &[u8], j: usize) -> Result<()> {
    let file = DbFile::<P>::decode(bytes)?;
    let db = file.snapshot(j)?;
    println!("snapshot {j} of {}: {} records", file.journal.len(), db.len());
    for (i, rec) in db.records().iter().enumerate() {
        let enc = rfpop::codec::Codec::encoded(rec);
        println!(
            "  {i:>4}  id {}  {} bytes  {}",
            rec.id().to_hex(),
            rec.storage_bytes(),
            &hash(&rfpop::BitString::from_bytes(enc)).to_hex()[..16]
        );
    }
    Ok(())
}

fn serve<P: Deployable>(dir: &Path, listen: Option<String>, sessions: Option<u64>) -> Result<()> {
    let (cfg, reader) = deploy::resume_reader::<P>(dir)?;
    let addr = listen.unwrap_or_else(|| cfg.listen.clone());
    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
    println!("listening on {}", listener.local_addr()?);
    let svc = Arc::new(ReaderService::new(
        reader,
        Some(dir.join(deploy::DB_FILE)),
        Ticks::new(cfg.timeout_ticks, cfg.tick_ms),
    ));
    service::serve(listener, svc, sessions, |r| match r {
        Ok(rep) => println!(
            "session {}: o_R={} o_T={}{}{}",
            rep.transcript.sid.to_hex(),
            u8::from(rep.o_r),
            rep.o_t.map_or("-".into(), |o| u8::from(o).to_string()),
            if rep.timed_out { " (timeout)" } else { "" },
            if rep.credential.is_some() { " credential issued" } else { "" },
        ),
        Err(e) => eprintln!("session failed: {e}"),
    })?;
    Ok(())
}

fn tag_run<P: Deployable>(dir: &Path, i: usize, connect: Option<String>, cred_out: Option<&Path>) -> Result<bool> {
    let cfg = deploy::deployment_config(dir)?;
    let mut tag = deploy::resume_tag::<P>(dir, i)?;
    let addr = connect.unwrap_or_else(|| cfg.listen.clone());
    let stream = TcpStream::connect(&addr).with_context(|| format!("connecting to {addr}"))?;
    let report = service::run_tag(&mut tag, stream, Ticks::new(cfg.timeout_ticks, cfg.tick_ms))?;
    deploy::store_tag(dir, i, &tag)?;
    let show = |o: Option<bool>| o.map_or("-".into(), |o| u8::from(o).to_string());
    println!("o_T={}", show(report.o_t));
    println!("o_R={}", show(report.o_r));
    if let Some(c) = &report.credential {
        match cred_out {
            Some(path) => {
                fs::write(path, c.to_bytes())?;
                println!("credential written to {}", path.display());
            }
            None => println!("credential {}", hex::encode(c.to_bytes())),
        }
    }
    Ok(report.o_t == Some(true) && report.o_r == Some(true))
}
