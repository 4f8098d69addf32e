use std::sync::mpsc;
use std::time::Instant;

use super::{hung_up, millis, Endpoint, Link, MessageLog, Query, RunOutcome, RunStats, SiteMap};
use crate::dist::Distance;
use crate::error::{Error, Result};
use crate::fragment::Fragmentation;
use crate::graph::GraphBuilder;
use crate::oracle;
use crate::reach::check_endpoints;

/// Baseline: every site ships its whole fragment as a graph document, the
/// coordinator rebuilds `G` and answers centrally.
pub fn ship_all(frag: &Fragmentation, query: &Query, coordinator: usize) -> Result<RunOutcome> {
    let map = SiteMap::new(frag, coordinator)?;
    check_endpoints(frag, query.source(), query.target())?;
    let log = MessageLog::default();
    let (resp_tx, resp_rx) = mpsc::channel::<Vec<u8>>();

    let (documents, distribute) = std::thread::scope(|scope| -> Result<_> {
        let mut requests = Vec::with_capacity(map.sites);
        for f in frag.fragments() {
            let site = map.site_of_fragment(f.id());
            let colocated = site == map.coordinator;
            let (tx, rx) = mpsc::channel::<Vec<u8>>();
            requests.push(Link::new(Endpoint::Coordinator, Endpoint::Site(site), colocated, &log, tx));
            let mut reply = Link::new(Endpoint::Site(site), Endpoint::Coordinator, colocated, &log, resp_tx.clone());
            scope.spawn(move || -> Result<()> {
                for _request in rx {
                    reply.send(0, "fragment", f.to_text().into_bytes())?;
                }
                Ok(())
            });
        }
        drop(resp_tx);
        let started = Instant::now();
        let request = query.to_request().encode();
        for link in &mut requests {
            link.send(0, "query", request.clone())?;
        }
        drop(requests);
        let distribute = started.elapsed();
        let mut documents = Vec::with_capacity(map.sites);
        for _ in 0..map.sites {
            documents.push(resp_rx.recv().map_err(|_| hung_up(Endpoint::Coordinator))?);
        }
        Ok((documents, distribute))
    })?;

    let started = Instant::now();
    let mut builder = GraphBuilder::default();
    for doc in &documents {
        let text = std::str::from_utf8(doc).map_err(|_| Error::Wire("fragment document is not UTF-8".into()))?;
        builder.add_document(text)?;
    }
    let g = builder.build()?;
    let (s, t) = (query.source().as_str(), query.target().as_str());
    let (answer, distance) = match query {
        Query::Reach(_) => (oracle::oracle_reach(&g, s, t)?, None),
        Query::Bounded(q) => {
            let d = oracle::oracle_dist(&g, s, t)?;
            let ok = d.within(u64::from(q.bound));
            (ok, Some(if ok { d } else { Distance::Infinite }))
        }
        Query::Regular(q) => (oracle::oracle_regular(&g, s, t, &q.automaton)?, None),
    };
    let assemble = started.elapsed();

    let mut stats = RunStats::from_log(map.sites, map.coordinator, log.snapshot());
    stats.phase_ms.distribute = millis(distribute);
    stats.phase_ms.assemble = millis(assemble);
    Ok(RunOutcome { answer, distance, stats })
}
