//! `racepred`: predictive data-race queries over trace files.
//!
//! Event ids on the command line and in every report are 1-based positions
//! in the trace after initial-write synthesis. Exit codes: 0 when no race is
//! reported, 1 when at least one is, 2 on errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use racepred::generators::{
    gen_indset_trace, gen_ov_trace, gen_random_trace, Generated, IsInstance, OvInstance,
    RandomConfig,
};
use racepred::oracle::{verify_witness, DEFAULT_CAP};
use racepred::predict::{
    conflicting_pairs, predict, recommended_backend, scan, Algo, Options, Verdict,
};
use racepred::trace_model::{parse_trace_with, Ev, ParseOptions, Trace};

#[derive(Debug, Parser)]
#[command(
    name = "racepred",
    version,
    about = "Sound predictive data-race detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether two events form a predictable race.
    Predict(PredictArgs),
    /// Decide every conflicting pair of read/write events.
    Scan(ScanArgs),
    /// Print the trace parameters and the recommended backend.
    Stats(StatsArgs),
    /// Emit a generated trace followed by a `# query` line.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Trace file.
    #[arg(long)]
    trace: PathBuf,
    /// Do not synthesize initial writes for variables read before written.
    #[arg(long)]
    no_init_synthesis: bool,
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// Backend: auto, general, tree, bounded or bruteforce.
    #[arg(long, default_value = "auto")]
    algo: Algo,
    /// Reversal budget of the bounded backend.
    #[arg(long)]
    distance: Option<usize>,
    /// Largest trace the bruteforce backend accepts.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    oracle_cap: usize,
    /// Emit JSON.
    #[arg(long)]
    json: bool,
    /// Emit `#`-prefixed diagnostics.
    #[arg(long)]
    explain: bool,
}

impl QueryArgs {
    fn options(&self) -> Options {
        Options {
            algo: self.algo,
            distance: self.distance,
            oracle_cap: self.oracle_cap,
        }
    }
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    query: QueryArgs,
    /// First event.
    #[arg(long)]
    e1: usize,
    /// Second event.
    #[arg(long)]
    e2: usize,
    /// Interpret `--e1` and `--e2` as line numbers of the trace file.
    #[arg(long)]
    by_line: bool,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    query: QueryArgs,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Emit JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// Orthogonal-vectors instance.
    Ov {
        /// File with the first vector set, one binary string per line.
        #[arg(long)]
        a: PathBuf,
        /// File with the second vector set.
        #[arg(long)]
        b: PathBuf,
    },
    /// Independent-set instance.
    Indset {
        /// Edge list, one `u v` pair of 1-based nodes per line.
        #[arg(long)]
        graph: PathBuf,
        /// Target independent-set size.
        #[arg(long)]
        c: usize,
    },
    /// Seeded random trace.
    Random {
        /// Seed.
        #[arg(long, env = "RACEPRED_SEED", default_value_t = 0)]
        seed: u64,
        /// Number of events.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Number of threads.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Number of global variables.
        #[arg(long, default_value_t = 2)]
        globals: usize,
        /// Number of locks.
        #[arg(long, default_value_t = 1)]
        locks: usize,
        /// Probability that an access is a read.
        #[arg(long, default_value_t = 0.4)]
        read_ratio: f64,
        /// Probability that a step is a lock operation.
        #[arg(long, default_value_t = 0.3)]
        lock_ratio: f64,
        /// Largest number of locks held at once by one thread.
        #[arg(long, default_value_t = 1)]
        nesting: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(race) => ExitCode::from(u8::from(race)),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Predict(args) => cmd_predict(&args),
        Command::Scan(args) => cmd_scan(&args),
        Command::Stats(args) => cmd_stats(&args).map(|()| false),
        Command::Gen(cmd) => cmd_gen(cmd).map(|()| false),
    }
}

fn load(input: &InputArgs) -> Result<Trace> {
    let text = fs::read_to_string(&input.trace)
        .with_context(|| format!("cannot read {}", input.trace.display()))?;
    let opts = ParseOptions {
        init_synthesis: !input.no_init_synthesis,
    };
    parse_trace_with(&text, opts)
        .with_context(|| format!("invalid trace {}", input.trace.display()))
}

fn resolve(t: &Trace, id: usize, by_line: bool) -> Result<Ev> {
    if by_line {
        t.event_at_line(id)
            .ok_or_else(|| anyhow!("line {id} holds no event"))
    } else if id == 0 {
        bail!("event ids start at 1")
    } else {
        Ok(id - 1)
    }
}

fn ids(events: &[Ev]) -> Vec<usize> {
    events.iter().map(|e| e + 1).collect()
}

fn verdict_json(t: &Trace, v: &Verdict) -> Value {
    json!({
        "query": {
            "e1": v.e1 + 1,
            "e2": v.e2 + 1,
            "e1_line": t.line(v.e1),
            "e2_line": t.line(v.e2),
        },
        "race": v.race,
        "witness": v.witness.as_deref().map(ids),
        "algorithm": v.algorithm.label(),
        "distance": v.distance,
        "stats": {
            "cis_size": v.stats.cis_size,
            "ideals_tested": v.stats.ideals_tested,
            "search_nodes": v.stats.search_nodes,
            "closure_edges": v.stats.closure_edges,
            "lcone_rounds": v.stats.lcone_rounds,
            "tree_fallbacks": v.stats.tree_fallbacks,
            "frontier_sizes": v.stats.frontier_sizes,
            "reversals": v.stats.reversals.iter().map(|&(a, b)| [a + 1, b + 1]).collect::<Vec<_>>(),
            "wall_time_us": v.stats.wall_time_us as u64,
        },
    })
}

fn explain_lines(t: &Trace, v: &Verdict) -> Vec<String> {
    let mut out = vec![
        format!("# query {} {}", t.label(v.e1), t.label(v.e2)),
        format!("# algorithm {}", v.algorithm),
        format!(
            "# candidate ideals {}, tested {}, search nodes {}",
            v.stats.cis_size, v.stats.ideals_tested, v.stats.search_nodes
        ),
    ];
    if v.stats.tree_fallbacks > 0 {
        out.push(format!("# tree fallbacks {}", v.stats.tree_fallbacks));
    }
    if let Some(ideal) = &v.ideal {
        let members: Vec<String> = ids(ideal).iter().map(ToString::to_string).collect();
        out.push(format!("# ideal {}", members.join(" ")));
    }
    match v.algorithm {
        Algo::General if v.race => {
            let sizes: Vec<String> = v
                .stats
                .frontier_sizes
                .iter()
                .map(ToString::to_string)
                .collect();
            out.push(format!("# frontier sizes {}", sizes.join(" ")));
        }
        Algo::Tree => out.push(format!("# closure edges {}", v.stats.closure_edges)),
        Algo::Bounded if v.race => {
            let pairs: Vec<String> = v
                .stats
                .reversals
                .iter()
                .map(|&(a, b)| format!("{}>{}", b + 1, a + 1))
                .collect();
            out.push(format!("# reversals {}", pairs.join(" ")));
        }
        _ => {}
    }
    out.push(format!("# wall time {} us", v.stats.wall_time_us));
    out
}

fn check_witness(t: &Trace, v: &Verdict) -> Result<()> {
    if let Some(w) = &v.witness {
        if !verify_witness(t, w, v.e1, v.e2) {
            bail!(
                "witness for ({}, {}) failed verification",
                v.e1 + 1,
                v.e2 + 1
            );
        }
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<bool> {
    let t = load(&args.input)?;
    let e1 = resolve(&t, args.e1, args.by_line)?;
    let e2 = resolve(&t, args.e2, args.by_line)?;
    let v = predict(&t, e1, e2, &args.query.options())?;
    check_witness(&t, &v)?;
    if args.query.json {
        println!("{}", verdict_json(&t, &v));
    } else {
        if args.query.explain {
            for line in explain_lines(&t, &v) {
                println!("{line}");
            }
        }
        println!("{}", if v.race { "race" } else { "no race" });
        for id in ids(v.witness.as_deref().unwrap_or_default()) {
            println!("{id}");
        }
    }
    Ok(v.race)
}

fn cmd_scan(args: &ScanArgs) -> Result<bool> {
    let t = load(&args.input)?;
    let verdicts = scan(&t, &args.query.options())?;
    for v in &verdicts {
        check_witness(&t, v)?;
    }
    let races = verdicts.iter().filter(|v| v.race).count();
    if args.query.json {
        let list: Vec<Value> = verdicts.iter().map(|v| verdict_json(&t, v)).collect();
        println!("{}", json!({ "pairs": list, "races": races }));
    } else {
        for v in &verdicts {
            if args.query.explain {
                for line in explain_lines(&t, v) {
                    println!("{line}");
                }
            }
            println!(
                "{} {} {}",
                v.e1 + 1,
                v.e2 + 1,
                if v.race { "race" } else { "no race" }
            );
        }
        println!("# {races} of {} pairs race", verdicts.len());
    }
    Ok(races > 0)
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let t = load(&args.input)?;
    let p = t.params();
    let edges: Vec<(String, String)> = p
        .topology
        .iter()
        .map(|&(i, j)| (t.thread_name(i).to_string(), t.thread_name(j).to_string()))
        .collect();
    let backend = recommended_backend(&p);
    if args.json {
        let value = json!({
            "n": p.n,
            "k": p.k,
            "d": p.d,
            "gamma": p.gamma,
            "zeta": p.zeta,
            "topology": edges.iter().map(|(a, b)| [a, b]).collect::<Vec<_>>(),
            "is_tree": p.topology_is_tree,
            "connected": p.topology_connected,
            "recommended": backend.label(),
        });
        println!("{value}");
        return Ok(());
    }
    let topology: Vec<String> = edges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    println!("n {}", p.n);
    println!("k {}", p.k);
    println!("d {}", p.d);
    println!("gamma {}", p.gamma);
    println!("zeta {}", p.zeta);
    println!("topology {}", topology.join(" "));
    println!("is_tree {}", p.topology_is_tree);
    println!("connected {}", p.topology_connected);
    println!("recommended {backend}");
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn read_graph(path: &Path) -> Result<Vec<(usize, usize)>> {
    read_lines(path)?
        .iter()
        .map(|line| {
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("bad edge `{line}`"))?;
            match nums.as_slice() {
                &[u, v] => Ok((u, v)),
                _ => bail!("bad edge `{line}`"),
            }
        })
        .collect()
}

fn emit(g: &Generated) {
    print!("{}", g.trace.to_text());
    println!("# query {} {}", g.e1 + 1, g.e2 + 1);
}

fn cmd_gen(cmd: GenCommand) -> Result<()> {
    match cmd {
        GenCommand::Ov { a, b } => {
            let (a, b) = (read_lines(&a)?, read_lines(&b)?);
            let a: Vec<&str> = a.iter().map(String::as_str).collect();
            let b: Vec<&str> = b.iter().map(String::as_str).collect();
            emit(&gen_ov_trace(&OvInstance::from_strings(&a, &b)?)?);
        }
        GenCommand::Indset { graph, c } => {
            let edges = read_graph(&graph)?;
            let n = edges.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0);
            emit(&gen_indset_trace(&IsInstance { n, edges, c })?);
        }
        GenCommand::Random {
            seed,
            n,
            k,
            globals,
            locks,
            read_ratio,
            lock_ratio,
            nesting,
        } => {
            let cfg = RandomConfig {
                seed,
                n,
                k,
                d_globals: globals,
                d_locks: locks,
                read_ratio,
                lock_ratio,
                nesting_max: nesting,
            };
            let trace = gen_random_trace(&cfg)?;
            let pairs = conflicting_pairs(&trace);
            let query = pairs
                .iter()
                .find(|&&(a, b)| trace.event(a).thread != trace.event(b).thread)
                .or(pairs.first())
                .copied();
            print!("{}", trace.to_text());
            if let Some((e1, e2)) = query {
                println!("# query {} {}", e1 + 1, e2 + 1);
            }
        }
    }
    Ok(())
}
