use std::sync::mpsc;
use std::time::{Duration, Instant};

use super::{hung_up, millis, Endpoint, Link, MessageLog, Query, RunOutcome, RunStats, SiteMap};
use crate::dist::{self, DistAnswer};
use crate::error::{Error, Result};
use crate::fragment::{Boundary, Fragment, Fragmentation};
use crate::reach::{self, check_endpoints};
use crate::regular;
use crate::wire::Request;

/// Site-side work for one request: decode the query, evaluate it on the
/// local fragment and encode the partial answer.
fn evaluate_at_site(f: &Fragment, request: &[u8]) -> Result<Vec<u8>> {
    Ok(match Query::from_request(Request::decode(request)?) {
        Query::Reach(q) => reach::encode_response(f, &q, &reach::local_eval(f, &q)),
        Query::Bounded(q) => dist::encode_response(f, &q, &dist::local_eval_d(f, &q)),
        Query::Regular(q) => regular::encode_response(f, &q, &regular::local_eval_r(f, &q)),
    })
}

enum Collected {
    Reach(Vec<reach::BoolEquation>),
    Bounded(Vec<dist::DistEquation>),
    Regular(Vec<regular::MatchVector>),
}

impl Collected {
    fn new(query: &Query) -> Self {
        match query {
            Query::Reach(_) => Collected::Reach(Vec::new()),
            Query::Bounded(_) => Collected::Bounded(Vec::new()),
            Query::Regular(_) => Collected::Regular(Vec::new()),
        }
    }

    /// Decodes one response with the coordinator's boundary directory and
    /// returns the fragment id it carried.
    fn absorb(&mut self, bytes: &[u8], boundary: &Boundary, query: &Query) -> Result<usize> {
        let source = query.source();
        Ok(match self {
            Collected::Reach(all) => {
                let (id, eqs) = reach::decode_response(bytes, boundary, source)?;
                all.extend(eqs);
                id
            }
            Collected::Bounded(all) => {
                let (id, eqs) = dist::decode_response(bytes, boundary, source)?;
                all.extend(eqs);
                id
            }
            Collected::Regular(all) => {
                let (id, vecs) = regular::decode_response(bytes, boundary, source)?;
                all.extend(vecs);
                id
            }
        })
    }

    fn assemble(&self, query: &Query) -> Result<(bool, Option<dist::Distance>)> {
        Ok(match (self, query) {
            (Collected::Reach(rvset), Query::Reach(q)) => (reach::eval_dg(rvset, q.source.as_str())?, None),
            (Collected::Bounded(rvset), Query::Bounded(q)) => {
                let DistAnswer { within_bound, distance } = dist::eval_dg_d(rvset, q)?;
                (within_bound, Some(distance))
            }
            (Collected::Regular(rvset), Query::Regular(q)) => (regular::eval_dg_r(rvset, q)?, None),
            _ => unreachable!("collector built for this query"),
        })
    }
}

/// The partial-evaluation run: one request to every site, concurrent local
/// evaluation, one response per site, assembly at the coordinator.
pub fn run_distributed(frag: &Fragmentation, query: &Query, coordinator: usize) -> Result<RunOutcome> {
    let map = SiteMap::new(frag, coordinator)?;
    check_endpoints(frag, query.source(), query.target())?;
    let boundaries: Vec<Boundary> = frag.fragments().iter().map(Fragment::boundary).collect();
    let log = MessageLog::default();
    let (resp_tx, resp_rx) = mpsc::channel::<Vec<u8>>();

    let (answer, times) = std::thread::scope(|scope| -> Result<_> {
        let mut requests = Vec::with_capacity(map.sites);
        let mut workers = Vec::with_capacity(map.sites);
        for f in frag.fragments() {
            let site = map.site_of_fragment(f.id());
            let colocated = site == map.coordinator;
            let (tx, rx) = mpsc::channel::<Vec<u8>>();
            requests.push(Link::new(Endpoint::Coordinator, Endpoint::Site(site), colocated, &log, tx));
            let mut reply = Link::new(Endpoint::Site(site), Endpoint::Coordinator, colocated, &log, resp_tx.clone());
            workers.push(scope.spawn(move || -> Result<Duration> {
                let mut busy = Duration::ZERO;
                for request in rx {
                    let started = Instant::now();
                    let response = evaluate_at_site(f, &request)?;
                    busy += started.elapsed();
                    reply.send(0, "partial-answer", response)?;
                }
                Ok(busy)
            }));
        }
        drop(resp_tx);

        let started = Instant::now();
        let request = query.to_request().encode();
        for link in &mut requests {
            link.send(0, "query", request.clone())?;
        }
        drop(requests);
        let distribute = started.elapsed();

        let mut collected = Collected::new(query);
        let mut seen = vec![false; map.sites];
        for _ in 0..map.sites {
            let bytes = resp_rx.recv().map_err(|_| hung_up(Endpoint::Coordinator))?;
            // The fragment id is the leading varint of every response.
            let id = crate::wire::Reader::new(&bytes).usize()?;
            let boundary = boundaries.get(id).ok_or_else(|| Error::Wire(format!("unknown fragment {id}")))?;
            if std::mem::replace(&mut seen[id], true) || collected.absorb(&bytes, boundary, query)? != id {
                return Err(Error::Wire(format!("unexpected response from fragment {id}")));
            }
        }
        let mut local_eval_max = Duration::ZERO;
        for w in workers {
            local_eval_max = local_eval_max.max(w.join().expect("site worker panicked")?);
        }
        let assembling = Instant::now();
        let answer = collected.assemble(query)?;
        Ok((answer, (distribute, local_eval_max, assembling.elapsed())))
    })?;

    let mut stats = RunStats::from_log(map.sites, map.coordinator, log.snapshot());
    stats.phase_ms.distribute = millis(times.0);
    stats.phase_ms.local_eval_max = millis(times.1);
    stats.phase_ms.assemble = millis(times.2);
    Ok(RunOutcome { answer: answer.0, distance: answer.1, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{BoundedQuery, Distance};
    use crate::fixture;
    use crate::fragment::random_partition;
    use crate::reach::ReachQuery;
    use crate::regular::RegularQuery;

    #[test]
    fn fixture_runs_visit_each_site_once() {
        let frag = fixture::fragmentation();
        let queries = [
            Query::Reach(ReachQuery::new("Ann", "Mark")),
            Query::Bounded(BoundedQuery::new("Ann", "Mark", 6)),
            Query::Regular(RegularQuery::from_pattern("Ann", "Mark", "DB* | HR*").unwrap()),
        ];
        for q in &queries {
            let out = run_distributed(&frag, q, 0).unwrap();
            assert!(out.answer);
            assert!(out.stats.visited_once());
            let remote: Vec<_> = out
                .stats
                .messages
                .iter()
                .filter(|m| m.to == Endpoint::Coordinator && m.charged > 0)
                .collect();
            assert_eq!(remote.len(), 2);
            assert_eq!(out.stats.per_site[0].response_bytes, 0);
            assert_eq!(out.stats.per_site[0].requests_received, 1);
        }
        let out = run_distributed(&frag, &queries[1], 2).unwrap();
        assert_eq!(out.distance, Some(Distance::Finite(6)));
        assert_eq!(out.stats.per_site[2].response_bytes, 0);
    }

    #[test]
    fn single_fragment_has_no_remote_bytes() {
        let g = fixture::graph();
        let frag = random_partition(&g, 1, 0).unwrap();
        let out = run_distributed(&frag, &Query::Reach(ReachQuery::new("Mark", "Ann")), 0).unwrap();
        assert!(!out.answer);
        assert_eq!(out.stats.messages.len(), 2);
        assert!(out.stats.messages.iter().all(|m| m.charged == 0));
    }

    #[test]
    fn bad_inputs() {
        let frag = fixture::fragmentation();
        let q = Query::Reach(ReachQuery::new("Ann", "Nobody"));
        assert!(run_distributed(&frag, &q, 0).is_err());
        let q = Query::Reach(ReachQuery::new("Ann", "Mark"));
        assert!(run_distributed(&frag, &q, 3).is_err());
    }

    #[test]
    fn json_shape() {
        let frag = fixture::fragmentation();
        let out = run_distributed(&frag, &Query::Bounded(BoundedQuery::new("Ann", "Mark", 5)), 0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&out).unwrap();
        assert_eq!(v["answer"], false);
        assert!(v["distance"].is_null());
        assert_eq!(v["per_site"].as_array().unwrap().len(), 3);
        assert!(v["phase_ms"]["assemble"].is_number());
        assert!(v["ecc_bytes"].is_null());
    }
}
