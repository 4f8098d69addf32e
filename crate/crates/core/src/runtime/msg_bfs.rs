use std::collections::BTreeSet;
use std::sync::mpsc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{hung_up, millis, Endpoint, Link, MessageLog, Query, RunOutcome, RunStats, SiteMap};
use crate::error::{Error, Result};
use crate::fragment::{Fragment, Fragmentation};
use crate::graph::NodeId;
use crate::reach::{check_endpoints, ReachQuery};
use crate::wire::{Reader, Request, Writer};

/// Messages of the message-passing baseline other than the initial query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BfsMessage {
    /// The target was activated.
    Found,
    Idle,
    /// A node to activate, or a virtual node reached by a site.
    Node(NodeId),
}

const TAG_FOUND: u8 = 1;
const TAG_IDLE: u8 = 2;
const TAG_NODE: u8 = 3;

impl BfsMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            BfsMessage::Found => w.byte(TAG_FOUND),
            BfsMessage::Idle => w.byte(TAG_IDLE),
            BfsMessage::Node(v) => w.byte(TAG_NODE).str(v.as_str()),
        };
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let msg = match r.byte()? {
            TAG_FOUND => BfsMessage::Found,
            TAG_IDLE => BfsMessage::Idle,
            TAG_NODE => BfsMessage::Node(NodeId::new(r.str()?)),
            other => return Err(Error::Wire(format!("unknown message tag {other}"))),
        };
        r.expect_end()?;
        Ok(msg)
    }
}

/// Per-site state: the activation status of every slot, virtual ones
/// included so each virtual node is reported at most once.
struct BfsSite<'a> {
    f: &'a Fragment,
    active: Vec<bool>,
    /// Local slot of the target; set once the query has arrived.
    target: Option<Option<usize>>,
}

impl<'a> BfsSite<'a> {
    fn activate(&mut self, from: usize, out: &mut Vec<BfsMessage>) {
        if self.active[from] {
            return;
        }
        self.active[from] = true;
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if self.target == Some(Some(v)) {
                out.push(BfsMessage::Found);
            }
            if v >= self.f.local_count() {
                out.push(BfsMessage::Node(self.f.node_at(v).clone()));
                continue;
            }
            for &w in self.f.successors_at(v) {
                if !self.active[w] {
                    self.active[w] = true;
                    stack.push(w);
                }
            }
        }
    }

    fn handle(&mut self, bytes: &[u8], out: &mut Vec<BfsMessage>) -> Result<()> {
        if self.target.is_none() {
            let Query::Reach(q) = Query::from_request(Request::decode(bytes)?) else {
                return Err(Error::Unsupported("message-passing BFS answers reachability only".into()));
            };
            self.target = Some(self.f.slot(q.target.as_str()).filter(|&t| t < self.f.local_count()));
            if let Some(s) = self.f.slot(q.source.as_str()).filter(|&s| s < self.f.local_count()) {
                self.activate(s, out);
            }
            return Ok(());
        }
        match BfsMessage::decode(bytes)? {
            BfsMessage::Node(v) => {
                let slot = self
                    .f
                    .slot(v.as_str())
                    .filter(|&s| s < self.f.local_count())
                    .ok_or_else(|| Error::NotInFragment { node: v.clone(), fragment: self.f.id() })?;
                self.activate(slot, out);
            }
            other => return Err(Error::Wire(format!("site cannot handle {other:?}"))),
        }
        Ok(())
    }
}

type Batch = (usize, Vec<Vec<u8>>);

/// Baseline: distributed BFS driven by a master that relays activations of
/// virtual nodes to their owners. Rounds are processed in a fixed site order,
/// optionally shuffled by `sched_seed`.
pub fn msg_bfs(frag: &Fragmentation, q: &ReachQuery, coordinator: usize, sched_seed: Option<u64>) -> Result<RunOutcome> {
    let map = SiteMap::new(frag, coordinator)?;
    check_endpoints(frag, &q.source, &q.target)?;
    let mut order: Vec<usize> = (0..map.sites).collect();
    if let Some(seed) = sched_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let log = MessageLog::default();
    let (resp_tx, resp_rx) = mpsc::channel::<(usize, Vec<Vec<u8>>)>();
    let started = Instant::now();

    let (answer, rounds, violations) = std::thread::scope(|scope| -> Result<_> {
        let mut links = Vec::with_capacity(map.sites);
        let mut workers = Vec::with_capacity(map.sites);
        for f in frag.fragments() {
            let site = map.site_of_fragment(f.id());
            let colocated = site == map.coordinator;
            let (tx, rx) = mpsc::channel::<Batch>();
            links.push(Link::new(Endpoint::Coordinator, Endpoint::Site(site), colocated, &log, tx));
            let mut reply = Link::new(Endpoint::Site(site), Endpoint::Coordinator, colocated, &log, resp_tx.clone());
            workers.push(scope.spawn(move || -> Result<usize> {
                let mut state = BfsSite { f, active: vec![false; f.slot_count()], target: None };
                let mut violations = 0;
                for (round, inbox) in rx {
                    let before = state.active.clone();
                    let mut out = Vec::new();
                    for msg in &inbox {
                        state.handle(msg, &mut out)?;
                    }
                    violations += before.iter().zip(&state.active).filter(|&(&b, &a)| b && !a).count();
                    if out.is_empty() {
                        out.push(BfsMessage::Idle);
                    }
                    let encoded: Vec<Vec<u8>> = out.iter().map(BfsMessage::encode).collect();
                    let sizes: Vec<usize> = encoded.iter().map(Vec::len).collect();
                    reply
                        .send_sized(round, "bfs", &sizes, (site, encoded))
                        .map_err(|_| hung_up(Endpoint::Coordinator))?;
                }
                Ok(violations)
            }));
        }
        drop(resp_tx);

        let mut inbox: Vec<Vec<Vec<u8>>> = vec![vec![Request::Reach { source: q.source.clone(), target: q.target.clone() }.encode()]; map.sites];
        let mut relayed: BTreeSet<NodeId> = BTreeSet::new();
        let mut round = 0;
        let answer = loop {
            let mut expected = 0;
            for &site in &order {
                let batch = std::mem::take(&mut inbox[site]);
                if batch.is_empty() {
                    continue;
                }
                let sizes: Vec<usize> = batch.iter().map(Vec::len).collect();
                links[site]
                    .send_sized(round, if round == 0 { "query" } else { "bfs" }, &sizes, (round, batch))
                    .map_err(|_| hung_up(Endpoint::Site(site)))?;
                expected += 1;
            }
            if expected == 0 {
                break false;
            }
            let mut replies: Vec<Option<Vec<Vec<u8>>>> = vec![None; map.sites];
            for _ in 0..expected {
                let (site, batch) = resp_rx.recv().map_err(|_| hung_up(Endpoint::Coordinator))?;
                replies[site] = Some(batch);
            }
            let mut found = false;
            for &site in &order {
                for bytes in replies[site].take().unwrap_or_default() {
                    match BfsMessage::decode(&bytes)? {
                        BfsMessage::Found => found = true,
                        BfsMessage::Idle => {}
                        BfsMessage::Node(v) => {
                            if relayed.insert(v.clone()) {
                                let owner = frag.fragment_of(v.as_str()).ok_or_else(|| Error::UnknownNode(v.clone()))?;
                                inbox[map.site_of_fragment(owner)].push(BfsMessage::Node(v).encode());
                            }
                        }
                    }
                }
            }
            round += 1;
            if found {
                break true;
            }
        };
        drop(links);
        let mut violations = 0;
        for w in workers {
            violations += w.join().expect("site worker panicked")?;
        }
        Ok((answer, round, violations))
    })?;

    let mut stats = RunStats::from_log(map.sites, map.coordinator, log.snapshot());
    stats.phase_ms.assemble = millis(started.elapsed());
    stats.rounds = Some(rounds);
    stats.status_violations = Some(violations);
    Ok(RunOutcome { answer, distance: None, stats })
}
