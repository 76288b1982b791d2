//! Reader service and tag client over a stream socket.
//!
//! The reader speaks first. Protocol messages travel as message frames,
//! outputs as `o_R`/`o_T` frames on the same stream, and an accepting PoP
//! reader finishes with a credential frame. Silence is counted in ticks of
//! one socket read timeout each; a session whose peer stays silent for the
//! configured number of ticks, closes early or violates the framing ends
//! in a reader timeout.

use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rfpop::error::{Error, Result};
use rfpop::harness::GameProtocol;
use rfpop::model::{Msg, Reader, Sid, StepOutcome, TagMachine, Transcript};
use rfpop::pop::Credential;

use crate::store::DbFile;
use crate::wire::{write_frame, Frame, FrameReader, FrameType, Poll};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ticks {
    pub timeout: u64,
    pub tick: Duration,
}

impl Ticks {
    pub fn new(timeout: u64, tick_ms: u64) -> Self {
        Self {
            timeout,
            tick: Duration::from_millis(tick_ms),
        }
    }
}

/// One session as the reader saw it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReaderReport {
    pub transcript: Transcript,
    pub o_r: bool,
    /// `o_T` if the tag reported it before closing.
    pub o_t: Option<bool>,
    pub timed_out: bool,
    pub credential: Option<Credential>,
}

/// One session as the tag saw it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TagReport {
    pub sid: Option<Sid>,
    pub messages: Vec<Msg>,
    pub o_t: Option<bool>,
    pub o_r: Option<bool>,
    pub credential: Option<Credential>,
}

/// A reader behind a session gate: connections may arrive concurrently,
/// sessions run one at a time.
pub struct ReaderService<P: GameProtocol> {
    reader: Mutex<Reader<P>>,
    journal: Option<PathBuf>,
    ticks: Ticks,
}

impl<P: GameProtocol> ReaderService<P> {
    /// `journal` is the database file to append each session to.
    pub fn new(reader: Reader<P>, journal: Option<PathBuf>, ticks: Ticks) -> Self {
        Self {
            reader: Mutex::new(reader),
            journal,
            ticks,
        }
    }

    pub fn reader(&self) -> std::sync::MutexGuard<'_, Reader<P>> {
        self.reader.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs one session over `stream`.
    pub fn serve_connection(&self, stream: TcpStream) -> Result<ReaderReport> {
        let mut reader = self.reader();
        stream.set_read_timeout(Some(self.ticks.tick))?;
        stream.set_nodelay(true)?;
        let mut out = stream.try_clone()?;
        let mut frames = FrameReader::new(stream);
        let (sid, c1) = reader.start()?;
        let mut o_t = None;
        let mut timed_out = false;
        let result = (|| -> Result<Option<bool>> {
            write_frame(&mut out, &Frame::message(sid, &c1)?)?;
            let mut idle = 0;
            loop {
                let frame = match frames.poll()? {
                    Poll::Frame(f) => f,
                    Poll::Tick => {
                        idle += 1;
                        if idle >= self.ticks.timeout {
                            return Ok(None);
                        }
                        continue;
                    }
                    Poll::Closed => return Ok(None),
                };
                idle = 0;
                match frame.kind {
                    FrameType::TagOutput => o_t = Some(frame.to_output()?),
                    FrameType::Alpha1 | FrameType::Alpha2 => {
                        let step = reader.step(frame.sid, &frame.to_msg()?)?;
                        let (msg, output) = match step {
                            StepOutcome::Reply { msg, .. } => (Some(msg), None),
                            StepOutcome::ReplyWithOutput { msg, output, .. } => (Some(msg), Some(output)),
                            StepOutcome::Output { output, .. } => (None, Some(output)),
                            StepOutcome::Ignore | StepOutcome::Restart { .. } => (None, None),
                        };
                        if let Some(m) = msg {
                            write_frame(&mut out, &Frame::message(sid, &m)?)?;
                        }
                        if let Some(o) = output {
                            write_frame(&mut out, &Frame::output(sid, true, o))?;
                            return Ok(Some(o));
                        }
                    }
                    _ => return Err(Error::Malformed(format!("{:?} frame from a tag", frame.kind))),
                }
            }
        })();
        let o_r = match result {
            Ok(Some(o)) => o,
            Ok(None) | Err(_) => {
                // silence, early close and framing violations all time out
                timed_out = true;
                if !reader.is_idle() {
                    reader.timeout()?;
                }
                let _ = write_frame(&mut out, &Frame::output(sid, true, false));
                false
            }
        };
        let j = reader.sessions();
        let credential = if o_r {
            reader.protocol().get_cred(&reader, j)?
        } else {
            None
        };
        if !timed_out {
            if let Some(c) = &credential {
                write_frame(&mut out, &Frame::credential(sid, c))?;
            }
            if o_t.is_none() {
                o_t = self.await_tag_output(&mut frames);
            }
        }
        let _ = out.flush();
        let _ = out.shutdown(std::net::Shutdown::Write);
        let rec = reader.session(j)?.clone();
        if let Some(path) = &self.journal {
            DbFile::<P>::append(path, &rec)?;
        }
        Ok(ReaderReport {
            transcript: rec.transcript,
            o_r,
            o_t,
            timed_out,
            credential,
        })
    }

    fn await_tag_output(&self, frames: &mut FrameReader<TcpStream>) -> Option<bool> {
        let mut idle = 0;
        while idle < self.ticks.timeout {
            match frames.poll() {
                Ok(Poll::Frame(f)) if f.kind == FrameType::TagOutput => return f.to_output().ok(),
                Ok(Poll::Frame(_)) => {}
                Ok(Poll::Tick) => idle += 1,
                Ok(Poll::Closed) | Err(_) => return None,
            }
        }
        None
    }
}

/// Accepts connections and serves each on its own thread behind the
/// session gate. Stops after `limit` connections when given.
pub fn serve<P: GameProtocol>(
    listener: TcpListener,
    service: Arc<ReaderService<P>>,
    limit: Option<u64>,
    mut on_session: impl FnMut(Result<ReaderReport>) + Send,
) -> Result<()> {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::scope(|scope| -> Result<()> {
        let printer = scope.spawn(move || {
            for r in rx {
                on_session(r);
            }
        });
        let mut accepted = 0u64;
        for stream in listener.incoming() {
            let stream = stream?;
            let service = service.clone();
            let tx = tx.clone();
            scope.spawn(move || {
                let _ = tx.send(service.serve_connection(stream));
            });
            accepted += 1;
            if limit.is_some_and(|n| accepted >= n) {
                break;
            }
        }
        drop(tx);
        printer.join().expect("session printer panicked");
        Ok(())
    })
}

/// Runs the tag side of one session over `stream`.
pub fn run_tag<P: GameProtocol>(
    tag: &mut TagMachine<P>,
    stream: TcpStream,
    ticks: Ticks,
) -> Result<TagReport> {
    stream.set_read_timeout(Some(ticks.tick))?;
    stream.set_nodelay(true)?;
    let mut out = stream.try_clone()?;
    let mut frames = FrameReader::new(stream);
    let mut report = TagReport::default();
    let mut idle = 0;
    while idle < ticks.timeout {
        let frame = match frames.poll()? {
            Poll::Frame(f) => f,
            Poll::Tick => {
                idle += 1;
                continue;
            }
            Poll::Closed => break,
        };
        idle = 0;
        match frame.kind {
            FrameType::ReaderOutput => report.o_r = Some(frame.to_output()?),
            FrameType::Credential => report.credential = Some(frame.to_credential()?),
            FrameType::C1 | FrameType::C2 => {
                let msg = frame.to_msg()?;
                report.sid = Some(frame.sid);
                report.messages.push(msg.clone());
                let (reply, output) = match tag.step(frame.sid, &msg)? {
                    StepOutcome::Reply { msg, .. } | StepOutcome::Restart { msg, .. } => (Some(msg), None),
                    StepOutcome::ReplyWithOutput { msg, output, .. } => (Some(msg), Some(output)),
                    StepOutcome::Output { output, .. } => (None, Some(output)),
                    StepOutcome::Ignore => (None, None),
                };
                if let Some(m) = reply {
                    report.messages.push(m.clone());
                    write_frame(&mut out, &Frame::message(frame.sid, &m)?)?;
                }
                if let Some(o) = output {
                    report.o_t = Some(o);
                    write_frame(&mut out, &Frame::output(frame.sid, false, o))?;
                }
            }
            _ => return Err(Error::Malformed(format!("{:?} frame from a reader", frame.kind))),
        }
    }
    Ok(report)
}
