//! `distreach`: partition graphs, answer reachability queries over the
//! fragments with any of the implemented algorithms, and benchmark them.
//!
//! Exit codes for `query`: 0 when the answer is true, 1 when it is false,
//! 2 on any error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use distreach::automaton::{build_query_automaton, parse_regex, wildcard_star};
use distreach::dist::{BoundedQuery, Distance};
use distreach::fragment::parse_partition;
use distreach::reach::ReachQuery;
use distreach::regular::RegularQuery;
use distreach::runtime::{self, Query, RunOutcome};
use distreach::{build_fragmentation, oracle, parse_graph, random_partition, workload, Fragmentation, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "distreach", version, about = "Reachability queries over fragmented graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a graph into k fragments and write the partition file.
    Partition {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one query and print the answer with run statistics as JSON.
    Query(QueryArgs),
    /// Run random instances through every algorithm and report agreement and traffic.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Reach,
    Bdreach,
    Regreach,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Pe,
    ShipAll,
    MsgBfs,
    Mr,
    Oracle,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, conflicts_with_all = ["k", "seed"], required_unless_present = "k")]
    partition: Option<PathBuf>,
    #[arg(long, requires = "seed")]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long)]
    bound: Option<u32>,
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long, value_enum, default_value = "pe")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 0)]
    coordinator: usize,
    /// Mapper count for `mr`; defaults to one mapper per fragment.
    #[arg(long)]
    mappers: Option<usize>,
    /// Also write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Shuffles the site order of `msg-bfs` rounds.
    #[arg(long, env = "PE_SCHED_SEED")]
    sched_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 200)]
    nodes: usize,
    /// Edges per node.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[arg(long, default_value_t = 3)]
    alphabet: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interior sizes for the fixed-boundary scaling series.
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    interior: Vec<usize>,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Partition { graph, k, seed, out } => cmd_partition(&graph, k, seed, &out),
        Command::Query(args) => cmd_query(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

fn load_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_graph(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_partition(graph: &Path, k: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    let g = load_graph(graph)?;
    let frag = random_partition(&g, k, seed)?;
    fs::write(out, frag.to_partition_text(&g)).with_context(|| format!("writing {}", out.display()))?;
    let gf = frag.fragment_graph();
    println!("|Vf| = {}", gf.nodes.len());
    println!("|Ef| = {}", gf.edges.len());
    for f in frag.fragments() {
        println!(
            "fragment {}: {} local, {} in-nodes, {} virtual",
            f.id(),
            f.local_count(),
            f.in_node_count(),
            f.virtual_count()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn build_query(args: &QueryArgs) -> Result<Query> {
    let (s, t) = (args.from.as_str(), args.to.as_str());
    Ok(match args.kind {
        Kind::Reach => Query::Reach(ReachQuery::new(s, t)),
        Kind::Bdreach => {
            let Some(bound) = args.bound else { bail!("--kind bdreach needs --bound") };
            Query::Bounded(BoundedQuery::new(s, t, bound))
        }
        Kind::Regreach => {
            let Some(pattern) = &args.pattern else { bail!("--kind regreach needs --pattern") };
            let ast = parse_regex(pattern).with_context(|| format!("pattern `{pattern}`"))?;
            Query::Regular(RegularQuery::new(s, t, build_query_automaton(&ast)))
        }
    })
}

#[derive(Serialize)]
struct OracleReport {
    answer: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance: Option<Distance>,
}

fn cmd_query(args: &QueryArgs) -> Result<ExitCode> {
    let g = load_graph(&args.graph)?;
    let frag = match (&args.partition, args.k, args.seed) {
        (Some(path), _, _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let assignment = parse_partition(&text).with_context(|| format!("parsing {}", path.display()))?;
            build_fragmentation(&g, &assignment)?
        }
        (None, Some(k), Some(seed)) => random_partition(&g, k, seed)?,
        _ => bail!("give either --partition or both --k and --seed"),
    };
    let query = build_query(args)?;
    let (answer, json) = match args.algorithm {
        Algorithm::Oracle => {
            let (s, t) = (args.from.as_str(), args.to.as_str());
            let report = match &query {
                Query::Reach(_) => OracleReport { answer: oracle::oracle_reach(&g, s, t)?, distance: None },
                Query::Bounded(q) => {
                    let d = oracle::oracle_dist(&g, s, t)?;
                    let within = d.within(u64::from(q.bound));
                    OracleReport { answer: within, distance: Some(if within { d } else { Distance::Infinite }) }
                }
                Query::Regular(q) => {
                    OracleReport { answer: oracle::oracle_regular(&g, s, t, &q.automaton)?, distance: None }
                }
            };
            (report.answer, serde_json::to_string_pretty(&report)?)
        }
        algorithm => {
            let outcome = run_algorithm(&g, &frag, &query, algorithm, args)?;
            (outcome.answer, serde_json::to_string_pretty(&outcome)?)
        }
    };
    println!("{json}");
    if let Some(path) = &args.json {
        fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if answer { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_algorithm(g: &Graph, frag: &Fragmentation, query: &Query, algorithm: Algorithm, args: &QueryArgs) -> Result<RunOutcome> {
    Ok(match (algorithm, query) {
        (Algorithm::Pe, q) => runtime::run_distributed(frag, q, args.coordinator)?,
        (Algorithm::ShipAll, q) => runtime::ship_all(frag, q, args.coordinator)?,
        (Algorithm::MsgBfs, Query::Reach(q)) => runtime::msg_bfs(frag, q, args.coordinator, args.sched_seed)?,
        (Algorithm::Mr, Query::Regular(q)) => match args.mappers {
            Some(k) => runtime::mr_drpq(g, q, k, args.seed.unwrap_or(0))?,
            None => runtime::mr_drpq_split(frag, q)?,
        },
        (Algorithm::MsgBfs, _) => bail!("msg-bfs answers --kind reach only"),
        (Algorithm::Mr, _) => bail!("mr answers --kind regreach only"),
        (Algorithm::Oracle, _) => unreachable!("handled by the caller"),
    })
}

#[derive(Default, Serialize)]
struct Traffic {
    runs: usize,
    agree: usize,
    response_bytes: usize,
    max_visits: usize,
    wall_ms: f64,
}

impl Traffic {
    fn record(&mut self, outcome: &RunOutcome, truth: bool, started: Instant) {
        self.runs += 1;
        self.agree += usize::from(outcome.answer == truth);
        self.response_bytes += outcome.stats.total_response_bytes();
        self.max_visits = self.max_visits.max(outcome.stats.max_visits());
        self.wall_ms += started.elapsed().as_secs_f64() * 1e3;
    }

    fn all_agree(&self) -> bool {
        self.agree == self.runs
    }
}

#[derive(Default, Serialize)]
struct ClassReport {
    true_answers: usize,
    pe: Traffic,
    ship_all: Traffic,
    #[serde(skip_serializing_if = "Option::is_none")]
    msg_bfs: Option<Traffic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mr: Option<Traffic>,
    pe_visited_once: usize,
}

#[derive(Serialize)]
struct ScalePoint {
    interior: usize,
    nodes: usize,
    pe_bytes: usize,
    ship_all_bytes: usize,
}

#[derive(Serialize)]
struct BenchReport {
    instances: usize,
    nodes: usize,
    k: usize,
    agreement: bool,
    reach: ClassReport,
    bdreach: ClassReport,
    regreach: ClassReport,
    /// Instances whose every witness path crosses fragments at least twice.
    multi_crossing: usize,
    msg_bfs_revisits_on_multi_crossing: usize,
    scaling: Vec<ScalePoint>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Instant) {
    let started = Instant::now();
    (f(), started)
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    if args.k == 0 || args.k > args.nodes {
        bail!("--k must be between 1 and --nodes");
    }
    let mut reach = ClassReport { msg_bfs: Some(Traffic::default()), ..Default::default() };
    let mut bdreach = ClassReport::default();
    let mut regreach = ClassReport { mr: Some(Traffic::default()), ..Default::default() };
    let (mut multi, mut revisits) = (0, 0);
    for i in 0..args.instances {
        let seed = args.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = workload::random_graph(&mut rng, args.nodes, args.nodes * args.degree, args.alphabet);
        let frag = random_partition(&g, args.k, rng.gen())?;
        let s = g.node(rng.gen_range(0..args.nodes)).as_str();
        let t = g.node(rng.gen_range(0..args.nodes)).as_str();
        let bound = rng.gen_range(0..=12);
        let budget = rng.gen_range(1..=6);
        let pattern = workload::random_pattern(&mut rng, budget, args.alphabet);
        let coordinator = i % args.k;

        let rq = ReachQuery::new(s, t);
        let truth = oracle::oracle_reach(&g, s, t)?;
        let q = Query::Reach(rq.clone());
        bench_common(&mut reach, &frag, &q, truth, coordinator)?;
        let (out, started) = timed(|| runtime::msg_bfs(&frag, &rq, coordinator, None));
        let out = out?;
        reach.msg_bfs.as_mut().expect("set above").record(&out, truth, started);
        if truth && workload::min_crossings(&g, &frag, s, t).is_some_and(|c| c >= 2) {
            multi += 1;
            revisits += usize::from(out.stats.max_visits() > 1);
        }

        let d = oracle::oracle_dist(&g, s, t)?;
        bench_common(&mut bdreach, &frag, &Query::Bounded(BoundedQuery::new(s, t, bound)), d.within(bound.into()), coordinator)?;

        let gq = RegularQuery::new(s, t, build_query_automaton(&pattern));
        let truth = oracle::oracle_regular(&g, s, t, &gq.automaton)?;
        bench_common(&mut regreach, &frag, &Query::Regular(gq.clone()), truth, coordinator)?;
        let (out, started) = timed(|| runtime::mr_drpq_split(&frag, &gq));
        regreach.mr.as_mut().expect("set above").record(&out?, truth, started);
    }

    let mut scaling = Vec::new();
    for &interior in &args.interior {
        let (g, frag) = workload::boundary_twin(args.k, interior, args.seed);
        let q = Query::Regular(RegularQuery::new("c0_0", &format!("c{}_3", args.k - 1), wildcard_star()));
        let pe = runtime::run_distributed(&frag, &q, 0)?;
        let ship = runtime::ship_all(&frag, &q, 0)?;
        scaling.push(ScalePoint {
            interior,
            nodes: g.node_count(),
            pe_bytes: pe.stats.total_response_bytes(),
            ship_all_bytes: ship.stats.total_response_bytes(),
        });
    }

    let classes = [&reach, &bdreach, &regreach];
    let agreement = classes.iter().all(|c| {
        c.pe.all_agree()
            && c.ship_all.all_agree()
            && c.msg_bfs.as_ref().is_none_or(Traffic::all_agree)
            && c.mr.as_ref().is_none_or(Traffic::all_agree)
    });
    let report = BenchReport {
        instances: args.instances,
        nodes: args.nodes,
        k: args.k,
        agreement,
        reach,
        bdreach,
        regreach,
        multi_crossing: multi,
        msg_bfs_revisits_on_multi_crossing: revisits,
        scaling,
    };
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(path) = &args.json {
        fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if agreement { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn bench_common(report: &mut ClassReport, frag: &Fragmentation, q: &Query, truth: bool, coordinator: usize) -> Result<()> {
    report.true_answers += usize::from(truth);
    let (out, started) = timed(|| runtime::run_distributed(frag, q, coordinator));
    let out = out?;
    report.pe_visited_once += usize::from(out.stats.visited_once());
    report.pe.record(&out, truth, started);
    let (out, started) = timed(|| runtime::ship_all(frag, q, coordinator));
    report.ship_all.record(&out?, truth, started);
    Ok(())
}
