//! Simulated multi-site execution.
//!
//! Each site is a thread that owns one fragment. Sites and the coordinator
//! talk only through [`Link`]s, which carry serialized bytes and log every
//! message with its size. All statistics are derived from that log.

mod mapreduce;
mod msg_bfs;
mod pe;
mod ship_all;

use std::fmt;
use std::sync::mpsc::{SendError, Sender};
use std::sync::{Arc, Mutex};

use serde::{Serialize, Serializer};

use crate::dist::{BoundedQuery, Distance};
use crate::error::{Error, Result};
use crate::fragment::Fragmentation;
use crate::graph::NodeId;
use crate::reach::ReachQuery;
use crate::regular::RegularQuery;
use crate::wire::Request;

pub use mapreduce::{mr_drpq, mr_drpq_split};
pub use msg_bfs::{msg_bfs, BfsMessage};
pub use pe::run_distributed;
pub use ship_all::ship_all;

/// Any of the three query classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Reach(ReachQuery),
    Bounded(BoundedQuery),
    Regular(RegularQuery),
}

impl Query {
    pub fn source(&self) -> &NodeId {
        match self {
            Query::Reach(q) => &q.source,
            Query::Bounded(q) => &q.source,
            Query::Regular(q) => &q.source,
        }
    }

    pub fn target(&self) -> &NodeId {
        match self {
            Query::Reach(q) => &q.target,
            Query::Bounded(q) => &q.target,
            Query::Regular(q) => &q.target,
        }
    }

    pub fn to_request(&self) -> Request {
        match self.clone() {
            Query::Reach(ReachQuery { source, target }) => Request::Reach { source, target },
            Query::Bounded(BoundedQuery { source, target, bound }) => Request::Bounded { source, target, bound },
            Query::Regular(RegularQuery { source, target, automaton }) => {
                Request::Regular { source, target, automaton }
            }
        }
    }

    pub fn from_request(req: Request) -> Self {
        match req {
            Request::Reach { source, target } => Query::Reach(ReachQuery { source, target }),
            Request::Bounded { source, target, bound } => Query::Bounded(BoundedQuery { source, target, bound }),
            Request::Regular { source, target, automaton } => {
                Query::Regular(RegularQuery { source, target, automaton })
            }
        }
    }
}

/// `h`: fragment `i` lives at site `i`; the coordinator shares a site with
/// one fragment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteMap {
    pub sites: usize,
    pub coordinator: usize,
}

impl SiteMap {
    pub fn new(frag: &Fragmentation, coordinator: usize) -> Result<Self> {
        if coordinator >= frag.len() {
            return Err(Error::Unsupported(format!(
                "coordinator site {coordinator} out of range for {} sites",
                frag.len()
            )));
        }
        Ok(SiteMap { sites: frag.len(), coordinator })
    }

    pub fn site_of_fragment(&self, i: usize) -> usize {
        i
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Coordinator,
    Site(usize),
    Mapper(usize),
    Reducer,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Coordinator => f.write_str("coordinator"),
            Endpoint::Site(i) => write!(f, "site{i}"),
            Endpoint::Mapper(i) => write!(f, "mapper{i}"),
            Endpoint::Reducer => f.write_str("reducer"),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct LoggedMessage {
    pub round: usize,
    pub from: Endpoint,
    pub to: Endpoint,
    pub seq: usize,
    pub kind: &'static str,
    /// Serialized size.
    pub bytes: usize,
    /// Bytes that crossed the network: zero between co-located endpoints.
    pub charged: usize,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct MessageLog(Arc<Mutex<Vec<LoggedMessage>>>);

impl MessageLog {
    fn push(&self, msg: LoggedMessage) {
        self.0.lock().expect("message log poisoned").push(msg);
    }

    /// Messages in a canonical order independent of thread interleaving.
    pub(crate) fn snapshot(&self) -> Vec<LoggedMessage> {
        let mut out = self.0.lock().expect("message log poisoned").clone();
        out.sort();
        out
    }
}

/// One direction of a counted channel between two endpoints.
pub(crate) struct Link<T> {
    from: Endpoint,
    to: Endpoint,
    colocated: bool,
    seq: usize,
    log: MessageLog,
    tx: Sender<T>,
}

impl<T> Link<T> {
    pub(crate) fn new(from: Endpoint, to: Endpoint, colocated: bool, log: &MessageLog, tx: Sender<T>) -> Self {
        Link { from, to, colocated, seq: 0, log: log.clone(), tx }
    }

    /// Logs one message per entry of `sizes` and hands `item` to the
    /// receiver.
    pub(crate) fn send_sized(
        &mut self,
        round: usize,
        kind: &'static str,
        sizes: &[usize],
        item: T,
    ) -> std::result::Result<(), SendError<T>> {
        for &bytes in sizes {
            self.log.push(LoggedMessage {
                round,
                from: self.from,
                to: self.to,
                seq: self.seq,
                kind,
                bytes,
                charged: if self.colocated { 0 } else { bytes },
            });
            self.seq += 1;
        }
        self.tx.send(item)
    }
}

impl Link<Vec<u8>> {
    pub(crate) fn send(&mut self, round: usize, kind: &'static str, bytes: Vec<u8>) -> Result<()> {
        let len = bytes.len();
        self.send_sized(round, kind, &[len], bytes).map_err(|_| hung_up(self.to))
    }
}

pub(crate) fn hung_up(to: Endpoint) -> Error {
    Error::Unsupported(format!("{to} hung up"))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SiteStats {
    pub site: usize,
    pub requests_received: usize,
    pub responses_sent: usize,
    /// Network bytes delivered to the site.
    pub request_bytes: usize,
    /// Network bytes sent by the site.
    pub response_bytes: usize,
    /// Serialized size of everything the site sent, co-located or not.
    pub payload_bytes: usize,
    pub messages_total: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub distribute: f64,
    pub local_eval_max: f64,
    pub assemble: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub coordinator: usize,
    pub per_site: Vec<SiteStats>,
    pub phase_ms: PhaseTimes,
    pub ecc_bytes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    /// Active-to-inactive status flips observed by message-passing sites.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status_violations: Option<usize>,
    pub messages: Vec<LoggedMessage>,
}

impl RunStats {
    pub(crate) fn from_log(sites: usize, coordinator: usize, messages: Vec<LoggedMessage>) -> Self {
        let mut per_site: Vec<SiteStats> = (0..sites).map(|site| SiteStats { site, ..Default::default() }).collect();
        let index = |e: Endpoint| match e {
            Endpoint::Site(i) | Endpoint::Mapper(i) => Some(i),
            Endpoint::Coordinator | Endpoint::Reducer => None,
        };
        for m in &messages {
            if let Some(s) = index(m.to) {
                per_site[s].requests_received += 1;
                per_site[s].request_bytes += m.charged;
                per_site[s].messages_total += 1;
            }
            if let Some(s) = index(m.from) {
                per_site[s].responses_sent += 1;
                per_site[s].response_bytes += m.charged;
                per_site[s].payload_bytes += m.bytes;
                per_site[s].messages_total += 1;
            }
        }
        RunStats { coordinator, per_site, messages, ..Default::default() }
    }

    /// Network bytes of all site responses.
    pub fn total_response_bytes(&self) -> usize {
        self.per_site.iter().map(|s| s.response_bytes).sum()
    }

    /// Whether every site got exactly one request and sent exactly one
    /// response.
    pub fn visited_once(&self) -> bool {
        self.per_site.iter().all(|s| s.requests_received == 1 && s.responses_sent == 1)
    }

    pub fn max_visits(&self) -> usize {
        self.per_site.iter().map(|s| s.requests_received).max().unwrap_or(0)
    }
}

/// Answer plus statistics, serialized as one flat JSON object.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutcome {
    pub answer: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<Distance>,
    #[serde(flatten)]
    pub stats: RunStats,
}

pub(crate) fn millis(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}
