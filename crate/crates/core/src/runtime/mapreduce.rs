use std::sync::mpsc;
use std::time::{Duration, Instant};

use super::{millis, Endpoint, Link, MessageLog, Query, RunOutcome, RunStats};
use crate::error::{Error, Result};
use crate::fragment::{random_partition, Boundary, Fragment, Fragmentation};
use crate::graph::Graph;
use crate::reach::check_endpoints;
use crate::regular::{self, RegularQuery};
use crate::wire::{Reader, Request, Writer};

/// Mapper input: the fragment split, then the encoded request.
fn map_input(f: &Fragment, request: &[u8]) -> Vec<u8> {
    let split = f.encode_split();
    let mut w = Writer::new();
    w.varint(split.len() as u64);
    let mut out = w.finish();
    out.extend_from_slice(&split);
    out.extend_from_slice(request);
    out
}

/// `mapRPQ`: `localEval_r` over one input split.
fn map_rpq(input: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader::new(input);
    let len = r.usize()?;
    let head = r.position();
    let split = input.get(head..head + len).ok_or_else(|| Error::Wire("truncated split".into()))?;
    let f = Fragment::decode_split(split)?;
    let Query::Regular(q) = Query::from_request(Request::decode(&input[head + len..])?) else {
        return Err(Error::Unsupported("the MapReduce pipeline answers regular reachability only".into()));
    };
    Ok(regular::encode_response(&f, &q, &regular::local_eval_r(&f, &q)))
}

/// `MRdRPQ`: `k` mappers, one per fragment of a seeded random partition,
/// and a single reducer that runs `evalDG_r` over the union of their
/// outputs. `ecc_bytes` is the largest total input along a
/// coordinator-mapper-reducer path.
pub fn mr_drpq(g: &Graph, q: &RegularQuery, k: usize, seed: u64) -> Result<RunOutcome> {
    mr_drpq_split(&random_partition(g, k, seed)?, q)
}

/// [`mr_drpq`] over a given fragmentation, one mapper per fragment.
pub fn mr_drpq_split(frag: &Fragmentation, q: &RegularQuery) -> Result<RunOutcome> {
    let started = Instant::now();
    let k = frag.len();
    check_endpoints(frag, &q.source, &q.target)?;
    let boundaries: Vec<Boundary> = frag.fragments().iter().map(Fragment::boundary).collect();
    let request = Request::Regular { source: q.source.clone(), target: q.target.clone(), automaton: q.automaton.clone() }.encode();
    let log = MessageLog::default();
    let (reduce_tx, reduce_rx) = mpsc::channel::<Vec<u8>>();
    let distribute = started.elapsed();

    let (answer, map_max, reduce) = std::thread::scope(|scope| -> Result<_> {
        let mut inputs = Vec::with_capacity(k);
        let mut mappers = Vec::with_capacity(k);
        for f in frag.fragments() {
            let (tx, rx) = mpsc::channel::<Vec<u8>>();
            inputs.push((Link::new(Endpoint::Coordinator, Endpoint::Mapper(f.id()), false, &log, tx), map_input(f, &request)));
            let mut out = Link::new(Endpoint::Mapper(f.id()), Endpoint::Reducer, false, &log, reduce_tx.clone());
            mappers.push(scope.spawn(move || -> Result<Duration> {
                let mut busy = Duration::ZERO;
                for input in rx {
                    let t = Instant::now();
                    let output = map_rpq(&input)?;
                    busy += t.elapsed();
                    out.send(0, "map-output", output)?;
                }
                Ok(busy)
            }));
        }
        drop(reduce_tx);
        let reducer = scope.spawn(move || -> Result<(bool, Duration)> {
            let mut rvset = Vec::new();
            for bytes in reduce_rx {
                let id = Reader::new(&bytes).usize()?;
                let boundary = boundaries.get(id).ok_or_else(|| Error::Wire(format!("unknown fragment {id}")))?;
                rvset.extend(regular::decode_response(&bytes, boundary, &q.source)?.1);
            }
            let t = Instant::now();
            Ok((regular::eval_dg_r(&rvset, q)?, t.elapsed()))
        });
        for (mut link, input) in inputs {
            link.send(0, "map-input", input)?;
        }
        let mut map_max = Duration::ZERO;
        for m in mappers {
            map_max = map_max.max(m.join().expect("mapper panicked")?);
        }
        let (answer, reduce) = reducer.join().expect("reducer panicked")?;
        Ok((answer, map_max, reduce))
    })?;

    let messages = log.snapshot();
    let reducer_in: usize = messages.iter().filter(|m| m.to == Endpoint::Reducer).map(|m| m.bytes).sum();
    let ecc = (0..k)
        .map(|i| {
            messages.iter().filter(|m| m.to == Endpoint::Mapper(i)).map(|m| m.bytes).sum::<usize>() + reducer_in
        })
        .max();
    let mut stats = RunStats::from_log(k, 0, messages);
    stats.ecc_bytes = ecc;
    stats.phase_ms.distribute = millis(distribute);
    stats.phase_ms.local_eval_max = millis(map_max);
    stats.phase_ms.assemble = millis(reduce);
    Ok(RunOutcome { answer, distance: None, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn fixture_pipeline() {
        let g = fixture::graph();
        let q = RegularQuery::from_pattern("Ann", "Mark", "DB* | HR*").unwrap();
        for k in 1..=4 {
            let out = mr_drpq(&g, &q, k, 11).unwrap();
            assert!(out.answer, "k = {k}");
            assert!(out.stats.visited_once());
        }
        let q = RegularQuery::from_pattern("Ann", "Mark", "DB*").unwrap();
        assert!(!mr_drpq(&g, &q, 3, 11).unwrap().answer);
    }

    #[test]
    fn fixture_split_matches_partial_evaluation() {
        let frag = fixture::fragmentation();
        let q = RegularQuery::from_pattern("Ann", "Mark", "DB* | HR*").unwrap();
        let out = mr_drpq_split(&frag, &q).unwrap();
        assert!(out.answer);
        let pe = crate::runtime::run_distributed(&frag, &Query::Regular(q), 0).unwrap();
        let sizes = |o: &RunOutcome, to: Endpoint| -> Vec<usize> {
            o.stats.messages.iter().filter(|m| m.to == to).map(|m| m.bytes).collect()
        };
        assert_eq!(sizes(&out, Endpoint::Reducer), sizes(&pe, Endpoint::Coordinator));
    }

    #[test]
    fn single_mapper_ecc() {
        let g = fixture::graph();
        let q = RegularQuery::from_pattern("Ann", "Mark", "DB* | HR*").unwrap();
        let out = mr_drpq(&g, &q, 1, 0).unwrap();
        let map_in = out.stats.messages.iter().find(|m| m.to == Endpoint::Mapper(0)).unwrap().bytes;
        let red_in = out.stats.messages.iter().find(|m| m.to == Endpoint::Reducer).unwrap().bytes;
        assert_eq!(out.stats.ecc_bytes, Some(map_in + red_in));
        assert!(mr_drpq(&g, &q, 0, 0).is_err());
        assert!(mr_drpq(&g, &q, 13, 0).is_err());
    }

    #[test]
    fn map_function_matches_local_eval() {
        let frag = fixture::fragmentation();
        let q = RegularQuery::from_pattern("Ann", "Mark", "DB* | HR*").unwrap();
        let request = Query::Regular(q.clone()).to_request().encode();
        for f in frag.fragments() {
            let expected = regular::encode_response(f, &q, &regular::local_eval_r(f, &q));
            assert_eq!(map_rpq(&map_input(f, &request)).unwrap(), expected);
        }
    }
}
