//! Byte-level message encoding shared by the coordinator and the sites.
//!
//! Integers are unsigned LEB128 varints, strings are a varint length
//! followed by UTF-8 bytes, and bitmaps are packed little-endian within each
//! byte (bit `i` lives in byte `i / 8` at position `i % 8`).

use crate::automaton::{QueryAutomaton, StateLabel};
use crate::error::{Error, Result};
use crate::graph::{Label, NodeId};

pub fn varint_len(mut v: u64) -> usize {
    let mut n = 1;
    while v >= 0x80 {
        v >>= 7;
        n += 1;
    }
    n
}

pub fn bitmap_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

#[derive(Default, Debug)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn varint(&mut self, mut v: u64) -> &mut Self {
        while v >= 0x80 {
            self.buf.push((v as u8) | 0x80);
            v >>= 7;
        }
        self.buf.push(v as u8);
        self
    }

    pub fn byte(&mut self, b: u8) -> &mut Self {
        self.buf.push(b);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.varint(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    /// Appends `bits.len()` bits packed into `ceil(len / 8)` bytes.
    pub fn bitmap(&mut self, bits: &[bool]) -> &mut Self {
        let start = self.buf.len();
        self.buf.resize(start + bitmap_len(bits.len()), 0);
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            self.buf[start + i / 8] |= 1 << (i % 8);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn truncated<T>(&self) -> Result<T> {
        Err(Error::Wire(format!("truncated message at byte {}", self.pos)))
    }

    pub fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        let mut shift = 0;
        loop {
            let Some(&b) = self.buf.get(self.pos) else { return self.truncated() };
            self.pos += 1;
            if shift >= 64 {
                return Err(Error::Wire("varint overflow".into()));
            }
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
            shift += 7;
        }
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.varint()?).map_err(|_| Error::Wire("length out of range".into()))
    }

    pub fn byte(&mut self) -> Result<u8> {
        let Some(&b) = self.buf.get(self.pos) else { return self.truncated() };
        self.pos += 1;
        Ok(b)
    }

    pub fn str(&mut self) -> Result<&'a str> {
        let len = self.usize()?;
        let Some(bytes) = self.buf.get(self.pos..self.pos + len) else { return self.truncated() };
        self.pos += len;
        std::str::from_utf8(bytes).map_err(|_| Error::Wire("invalid UTF-8".into()))
    }

    pub fn bitmap(&mut self, bits: usize) -> Result<Vec<bool>> {
        let len = bitmap_len(bits);
        let Some(bytes) = self.buf.get(self.pos..self.pos + len) else { return self.truncated() };
        self.pos += len;
        Ok((0..bits).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect())
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Wire(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}

/// A query as posted by the coordinator to every site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    Reach { source: NodeId, target: NodeId },
    Bounded { source: NodeId, target: NodeId, bound: u32 },
    Regular { source: NodeId, target: NodeId, automaton: QueryAutomaton },
}

const TAG_REACH: u8 = 1;
const TAG_BOUNDED: u8 = 2;
const TAG_REGULAR: u8 = 3;

const STATE_START: u8 = 0;
const STATE_FINAL: u8 = 1;
const STATE_ANY: u8 = 2;
const STATE_ATOM: u8 = 3;

impl Request {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Request::Reach { source, target } => {
                w.byte(TAG_REACH).str(source.as_str()).str(target.as_str());
            }
            Request::Bounded { source, target, bound } => {
                w.byte(TAG_BOUNDED).str(source.as_str()).str(target.as_str()).varint(u64::from(*bound));
            }
            Request::Regular { source, target, automaton } => {
                w.byte(TAG_REGULAR).str(source.as_str()).str(target.as_str());
                encode_automaton(&mut w, automaton);
            }
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let tag = r.byte()?;
        let source = NodeId::new(r.str()?);
        let target = NodeId::new(r.str()?);
        let req = match tag {
            TAG_REACH => Request::Reach { source, target },
            TAG_BOUNDED => {
                let bound = u32::try_from(r.varint()?).map_err(|_| Error::Wire("bound out of range".into()))?;
                Request::Bounded { source, target, bound }
            }
            TAG_REGULAR => Request::Regular { source, target, automaton: decode_automaton(&mut r)? },
            other => return Err(Error::Wire(format!("unknown query tag {other}"))),
        };
        r.expect_end()?;
        Ok(req)
    }
}

/// `|Vq|`, one tagged label per state, then the transition list.
pub fn encode_automaton(w: &mut Writer, a: &QueryAutomaton) {
    w.varint(a.state_count() as u64);
    for label in a.state_labels() {
        match label {
            StateLabel::Start => w.byte(STATE_START),
            StateLabel::Final => w.byte(STATE_FINAL),
            StateLabel::Any => w.byte(STATE_ANY),
            StateLabel::Atom(l) => w.byte(STATE_ATOM).str(l.as_str()),
        };
    }
    w.varint(a.transitions().len() as u64);
    for &(p, q) in a.transitions() {
        w.varint(p as u64).varint(q as u64);
    }
}

pub fn decode_automaton(r: &mut Reader<'_>) -> Result<QueryAutomaton> {
    let n = r.usize()?;
    let mut labels = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        labels.push(match r.byte()? {
            STATE_START => StateLabel::Start,
            STATE_FINAL => StateLabel::Final,
            STATE_ANY => StateLabel::Any,
            STATE_ATOM => StateLabel::Atom(Label::new(r.str()?)),
            other => return Err(Error::Wire(format!("unknown state tag {other}"))),
        });
    }
    let m = r.usize()?;
    let mut transitions = Vec::with_capacity(m.min(1 << 16));
    for _ in 0..m {
        transitions.push((r.usize()?, r.usize()?));
    }
    QueryAutomaton::from_parts(labels, transitions)
}
