//! Framed byte channel between reader service and tag client.
//!
//! A frame is `len (u32 BE) ‖ type (u8) ‖ sid (16 bytes) ‖ payload`, where
//! `len` counts payload bytes only and the payload is a run of 2-byte
//! length-prefixed fields.

use std::io::{self, Read, Write};

use rfpop::codec::{Codec, FieldReader, FieldWriter};
use rfpop::error::{Error, Result};
use rfpop::model::{Msg, Sid, SID_BYTES};
use rfpop::pop::Credential;

pub const HEADER_BYTES: usize = 4 + 1 + SID_BYTES;
/// Larger payloads are refused before any allocation.
pub const MAX_PAYLOAD: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    C1 = 0x01,
    Alpha1 = 0x02,
    C2 = 0x03,
    Alpha2 = 0x04,
    ReaderOutput = 0x10,
    TagOutput = 0x11,
    Credential = 0x20,
}

impl FrameType {
    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0x01 => Self::C1,
            0x02 => Self::Alpha1,
            0x03 => Self::C2,
            0x04 => Self::Alpha2,
            0x10 => Self::ReaderOutput,
            0x11 => Self::TagOutput,
            0x20 => Self::Credential,
            _ => return Err(Error::UnknownFrameType(b)),
        })
    }

    /// Protocol messages are typed by their round number.
    pub fn of_round(round: u8) -> Result<Self> {
        match round {
            1..=4 => Self::from_byte(round),
            _ => Err(Error::Malformed(format!("no frame type for round {round}"))),
        }
    }

    pub fn round(self) -> Option<u8> {
        let b = self as u8;
        (1..=4).contains(&b).then_some(b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameType,
    pub sid: Sid,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn message(sid: Sid, msg: &Msg) -> Result<Self> {
        let mut w = FieldWriter::new();
        w.bits(&msg.body);
        Ok(Self {
            kind: FrameType::of_round(msg.round)?,
            sid,
            payload: w.finish(),
        })
    }

    pub fn output(sid: Sid, from_reader: bool, output: bool) -> Self {
        let mut w = FieldWriter::new();
        w.u8(u8::from(output));
        Self {
            kind: if from_reader {
                FrameType::ReaderOutput
            } else {
                FrameType::TagOutput
            },
            sid,
            payload: w.finish(),
        }
    }

    pub fn credential(sid: Sid, cred: &Credential) -> Self {
        Self {
            kind: FrameType::Credential,
            sid,
            payload: cred.to_bytes(),
        }
    }

    /// The protocol message carried by a message frame.
    pub fn to_msg(&self) -> Result<Msg> {
        let round = self
            .kind
            .round()
            .ok_or_else(|| Error::Malformed(format!("{:?} frame carries no message", self.kind)))?;
        let mut r = FieldReader::new(&self.payload);
        let body = r.bits()?;
        r.expect_end()?;
        Ok(Msg { round, body })
    }

    pub fn to_output(&self) -> Result<bool> {
        let mut r = FieldReader::new(&self.payload);
        let v = bool::decode(&mut r)?;
        r.expect_end()?;
        Ok(v)
    }

    pub fn to_credential(&self) -> Result<Credential> {
        Credential::from_bytes(&self.payload)
    }

    /// Payload bytes excluding field prefixes: what a size table counts.
    pub fn content_bytes(&self) -> Result<usize> {
        let mut r = FieldReader::new(&self.payload);
        let mut n = 0;
        while !r.is_empty() {
            n += r.field()?.len();
        }
        Ok(n)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.sid.0);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let f = read_frame(&mut cur)?.ok_or_else(|| Error::Malformed("empty input".into()))?;
        if !cur.is_empty() {
            return Err(Error::Malformed(format!("{} bytes after frame", cur.len())));
        }
        Ok(f)
    }
}

/// `Ok(None)` on a clean end of stream before the first header byte.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>> {
    let mut header = [0u8; HEADER_BYTES];
    let mut got = 0;
    while got < HEADER_BYTES {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Malformed("truncated frame header".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(header[..4].try_into().expect("4 bytes")) as usize;
    let kind = FrameType::from_byte(header[4])?;
    if len > MAX_PAYLOAD {
        return Err(Error::Malformed(format!("frame payload of {len} bytes")));
    }
    let sid = Sid(header[5..].try_into().expect("16 bytes"));
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Malformed("truncated frame payload".into()),
        _ => e.into(),
    })?;
    Ok(Some(Frame { kind, sid, payload }))
}

pub fn write_frame(w: &mut impl Write, f: &Frame) -> Result<()> {
    w.write_all(&f.encode())?;
    w.flush()?;
    Ok(())
}

/// What one [`FrameReader::poll`] produced.
#[derive(Debug)]
pub enum Poll {
    Frame(Frame),
    /// The read timed out with no complete frame buffered.
    Tick,
    /// The peer closed the stream between frames.
    Closed,
}

/// Incremental frame decoder over a stream with a read timeout. Partial
/// frames survive timeouts.
pub struct FrameReader<R> {
    inner: R,
    buf: Vec<u8>,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            buf: Vec::new(),
        }
    }

    pub fn get_ref(&self) -> &R {
        &self.inner
    }

    pub fn poll(&mut self) -> Result<Poll> {
        loop {
            if let Some(f) = self.take()? {
                return Ok(Poll::Frame(f));
            }
            let mut chunk = [0u8; 4096];
            match self.inner.read(&mut chunk) {
                Ok(0) if self.buf.is_empty() => return Ok(Poll::Closed),
                Ok(0) => return Err(Error::Malformed("stream ended inside a frame".into())),
                Ok(n) => self.buf.extend_from_slice(&chunk[..n]),
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Ok(Poll::Tick)
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn take(&mut self) -> Result<Option<Frame>> {
        if self.buf.len() > 4 {
            FrameType::from_byte(self.buf[4])?;
        }
        if self.buf.len() < HEADER_BYTES {
            return Ok(None);
        }
        let len = u32::from_be_bytes(self.buf[..4].try_into().expect("4 bytes")) as usize;
        if len > MAX_PAYLOAD {
            return Err(Error::Malformed(format!("frame payload of {len} bytes")));
        }
        if self.buf.len() < HEADER_BYTES + len {
            return Ok(None);
        }
        let rest = self.buf.split_off(HEADER_BYTES + len);
        let bytes = std::mem::replace(&mut self.buf, rest);
        Frame::decode(&bytes).map(Some)
    }
}
