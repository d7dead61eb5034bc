//! Binary transmission log and JSON run summary.
//!
//! Log layout, all integers little-endian:
//!
//! ```text
//! "CMRT"  u16 version  [u8; 32] spec hash  u32 K N r g S Q T
//! per record: u32 sender  u32 member  u8 kind  u32 len  [u8; len] payload
//! ```

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{LoadValue, Rational};
use crate::shuffle::{JobSpec, ShuffleTranscript, TransmissionKind};

const MAGIC: &[u8; 4] = b"CMRT";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogHeader {
    pub spec_hash: [u8; 32],
    pub k: u32,
    pub n: u32,
    pub r: u32,
    pub g: u32,
    pub s: u32,
    pub q: u32,
    pub t: u32,
}

impl LogHeader {
    pub fn for_spec(spec: &JobSpec) -> Self {
        let m = spec.matrix();
        LogHeader {
            spec_hash: spec.spec_hash(),
            k: m.k() as u32,
            n: m.n() as u32,
            r: m.r() as u32,
            g: spec.g() as u32,
            s: spec.cover().len() as u32,
            q: spec.q() as u32,
            t: spec.t() as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub sender: u32,
    pub member: u32,
    pub kind: TransmissionKind,
    pub payload: Vec<u8>,
}

pub fn write_log(
    mut w: impl Write,
    header: &LogHeader,
    transcript: &ShuffleTranscript,
) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&header.spec_hash)?;
    for x in [
        header.k, header.n, header.r, header.g, header.s, header.q, header.t,
    ] {
        w.write_all(&x.to_le_bytes())?;
    }
    for tx in transcript.transmissions() {
        w.write_all(&(tx.sender as u32).to_le_bytes())?;
        w.write_all(&(tx.member as u32).to_le_bytes())?;
        w.write_all(&[tx.kind.code()])?;
        w.write_all(&(tx.payload.len() as u32).to_le_bytes())?;
        w.write_all(&tx.payload)?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_log(mut r: impl Read) -> Result<(LogHeader, Vec<LogRecord>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = &bytes[..];
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("not a transcript log".into()));
    }
    let mut version = [0u8; 2];
    cur.read_exact(&mut version)?;
    if u16::from_le_bytes(version) != VERSION {
        return Err(Error::Io("unsupported transcript log version".into()));
    }
    let mut spec_hash = [0u8; 32];
    cur.read_exact(&mut spec_hash)?;
    let mut fields = [0u32; 7];
    for x in &mut fields {
        *x = read_u32(&mut cur)?;
    }
    let [k, n, r, g, s, q, t] = fields;
    let header = LogHeader {
        spec_hash,
        k,
        n,
        r,
        g,
        s,
        q,
        t,
    };
    let mut records = Vec::new();
    while !cur.is_empty() {
        let sender = read_u32(&mut cur)?;
        let member = read_u32(&mut cur)?;
        let mut kind = [0u8; 1];
        cur.read_exact(&mut kind)?;
        let kind = TransmissionKind::from_code(kind[0])
            .ok_or_else(|| Error::Io(format!("bad transmission kind {}", kind[0])))?;
        let len = read_u32(&mut cur)? as usize;
        if cur.len() < len {
            return Err(Error::Io("truncated payload".into()));
        }
        let (payload, rest) = cur.split_at(len);
        records.push(LogRecord {
            sender,
            member,
            kind,
            payload: payload.to_vec(),
        });
        cur = rest;
    }
    Ok((header, records))
}

/// Everything a run reports, with loads as exact fractions and decimals.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub construction: String,
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub g: usize,
    pub s: usize,
    pub q: usize,
    pub t: usize,
    pub seed: u64,
    pub spec_hash: String,
    pub plan: String,
    pub stragglers: Vec<String>,
    pub kappa: usize,
    pub transmissions: usize,
    pub total_bits: u64,
    pub measured_load: LoadValue,
    pub formula_load: LoadValue,
    pub loads_match: bool,
    pub decode_ok: bool,
    pub decode_failures: usize,
    pub audit_balanced: Option<bool>,
}

impl RunSummary {
    /// Whether every invariant the run checks holds.
    pub fn ok(&self) -> bool {
        self.loads_match && self.decode_ok && self.audit_balanced != Some(false)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_pair(measured: Rational, formula: Rational) -> (LoadValue, LoadValue, bool) {
    (measured.into(), formula.into(), measured == formula)
}
