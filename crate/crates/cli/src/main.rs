use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use optheap::harness::{
    self, config_from_env, delete_min_bound, epsilon, format_trace, parse_counter_script, parse_trace,
    run_counter_script, OpMix, Runner, StatsRow, Workload,
};
use optheap::queue::Config;

#[derive(Parser)]
#[command(name = "optheap", version, about = "Fuzz, replay and measure the optheap priority queue")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Random operations against the queue and a reference oracle.
    Fuzz {
        #[arg(long, default_value_t = 100_000)]
        ops: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        queues: u32,
        /// Validate after every operation instead of every 64.
        #[arg(long)]
        paranoid: bool,
        /// Where to write the trace of a failing run.
        #[arg(long, default_value = "fuzz-failure.trace")]
        out: PathBuf,
        /// Leave melds out of the mix.
        #[arg(long)]
        no_meld: bool,
    },
    /// Per-operation cost summaries over generated workloads.
    Bench {
        /// Workload name; all of them when omitted.
        #[arg(long)]
        workload: Vec<String>,
        #[arg(long = "n", default_values_t = [1usize << 10, 1 << 12, 1 << 14, 1 << 16])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail when delete-min exceeds its bound or constant-time
        /// operations get dearer with n.
        #[arg(long)]
        assert_bounds: bool,
        #[arg(long, default_value_t = harness::DELETE_MIN_SLACK)]
        slack: f64,
    },
    /// Re-executes a trace file against the oracle and the validator.
    Replay {
        file: PathBuf,
        /// Print every queue after each block of this many operations.
        #[arg(long)]
        dump_every: Option<usize>,
        /// Validate every this many operations.
        #[arg(long, default_value_t = 1)]
        validate_every: usize,
    },
    /// Runs a counter script on a bare counter.
    Counter { file: PathBuf },
    /// Executes a trace and prints the resulting trees.
    Dump { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn dump_all(run: &Runner) -> String {
    let mut s = String::new();
    for q in run.queue_ids() {
        let queue = run.queue(q).expect("listed queue");
        s.push_str(&format!("queue {q} ({} elements)\n", queue.len()));
        for (name, root) in [("t1", queue.t1()), ("t2", queue.t2())] {
            if let Some(r) = root {
                s.push_str(&format!("  {name} {}\n", run.f.dump(r)));
            }
        }
    }
    s
}

fn fuzz(ops: usize, seed: u64, queues: u32, paranoid: bool, out: PathBuf, no_meld: bool) -> Result<(), CliError> {
    let config = config_from_env().map_err(CliError::Usage)?;
    let mut mix = OpMix::default();
    if no_meld {
        mix.meld = 0;
    }
    let every = if paranoid { 1 } else { 64 };
    let res = harness::fuzz(seed, ops, queues, mix, config, every);
    match res.verdict {
        Ok(()) => {
            println!(
                "ok: {} operations on {queues} queues, seed {seed}, validated every {every}",
                res.trace.len()
            );
            Ok(())
        }
        Err(d) => {
            fs::write(&out, format_trace(&res.trace))
                .map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
            Err(CliError::Failed(format!("{d}\ntrace written to {}", out.display())))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn bench(
    workloads: Vec<String>,
    ns: Vec<usize>,
    seed: u64,
    format: Format,
    out: Option<PathBuf>,
    assert_bounds: bool,
    slack: f64,
) -> Result<(), CliError> {
    let config = config_from_env().map_err(CliError::Usage)?;
    let chosen: Vec<Workload> = if workloads.is_empty() {
        Workload::ALL.to_vec()
    } else {
        workloads
            .iter()
            .map(|w| Workload::parse(w).ok_or_else(|| CliError::Usage(format!("unknown workload `{w}`"))))
            .collect::<Result<_, _>>()?
    };
    let eps = epsilon(config);
    let mut results: Vec<(Workload, usize, Vec<StatsRow>)> = Vec::new();
    for &w in &chosen {
        for &n in &ns {
            let trace = harness::workload(w, n, seed);
            let (rows, _) = harness::measure(&trace, config).map_err(|d| CliError::Failed(d.to_string()))?;
            results.push((w, n, rows));
        }
    }

    let text = match format {
        Format::Json => {
            let body = json!({
                "extension": config.extension,
                "epsilon": eps,
                "transfers": config.transfers,
                "seed": seed,
                "results": results.iter().map(|(w, n, rows)| json!({
                    "workload": w.name(),
                    "n": n,
                    "rows": rows,
                })).collect::<Vec<_>>(),
            });
            serde_json::to_string_pretty(&body).expect("serializable") + "\n"
        }
        Format::Csv => {
            eprintln!("extension {} epsilon {eps} transfers {}", config.extension, config.transfers);
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record([
                "workload",
                "n",
                "op",
                "n_bucket",
                "max_comparisons",
                "mean_comparisons",
                "max_fixes",
                "max_edits",
            ])
            .expect("in-memory write");
            for (w, n, rows) in &results {
                for r in rows {
                    wtr.write_record([
                        w.name().to_string(),
                        n.to_string(),
                        r.op.to_string(),
                        r.n_bucket.to_string(),
                        r.max_comparisons.to_string(),
                        format!("{:.3}", r.mean_comparisons),
                        r.max_fixes.to_string(),
                        r.max_edits.to_string(),
                    ])
                    .expect("in-memory write");
                }
            }
            String::from_utf8(wtr.into_inner().expect("flush")).expect("utf-8")
        }
    };
    match out {
        Some(p) => fs::write(&p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }

    if !assert_bounds {
        return Ok(());
    }
    let mut breaches = Vec::new();
    // (workload, op) -> n -> (max comparisons, max edits)
    let mut flat: BTreeMap<(&str, &str), BTreeMap<usize, (u64, u64)>> = BTreeMap::new();
    for (w, n, rows) in &results {
        for r in rows {
            if r.op == "deletemin" {
                let bound = delete_min_bound(*n, eps, slack);
                if r.max_comparisons as f64 > bound {
                    breaches.push(format!(
                        "{} n={n}: delete-min used {} comparisons, bound {bound:.1}",
                        w.name(),
                        r.max_comparisons
                    ));
                }
            }
            if matches!(r.op, "insert" | "decrease" | "meld") {
                let e = flat.entry((w.name(), r.op)).or_default().entry(*n).or_default();
                e.0 = e.0.max(r.max_comparisons);
                e.1 = e.1.max(r.max_edits);
            }
        }
    }
    for ((w, op), by_n) in flat {
        let first = by_n.values().next().copied();
        if by_n.values().any(|&v| Some(v) != first) {
            breaches.push(format!("{w}: {op} maxima (comparisons, edits) vary with n: {by_n:?}"));
        }
    }
    if breaches.is_empty() {
        eprintln!("bounds hold");
        Ok(())
    } else {
        Err(CliError::Failed(breaches.join("\n")))
    }
}

fn replay(file: PathBuf, dump_every: Option<usize>, validate_every: usize) -> Result<(), CliError> {
    let config = config_from_env().map_err(CliError::Usage)?;
    let ops = parse_trace(&read(&file)?).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
    let mut run = Runner::new(config);
    run.validate_every = validate_every;
    for (i, &op) in ops.iter().enumerate() {
        if let Err(err) = run.step(op) {
            return Err(CliError::Failed(format!("op {i} (`{op}`): {err}")));
        }
        if let Some(k) = dump_every.filter(|&k| k > 0) {
            if (i + 1) % k == 0 {
                print!("after {} ops\n{}", i + 1, dump_all(&run));
            }
        }
    }
    run.validate_all().map_err(|e| CliError::Failed(format!("after the last op: {e}")))?;
    println!("ok: {} operations replayed", ops.len());
    Ok(())
}

fn counter(file: PathBuf) -> Result<(), CliError> {
    let cmds = parse_counter_script(&read(&file)?).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
    let digits = run_counter_script(&cmds).map_err(|e| CliError::Failed(e.to_string()))?;
    println!("{}", optheap::counter::format_digits(&digits));
    Ok(())
}

fn dump(file: PathBuf) -> Result<(), CliError> {
    let ops = parse_trace(&read(&file)?).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
    let mut run = Runner::new(Config::default());
    run.run(&ops).map_err(|d| CliError::Failed(d.to_string()))?;
    print!("{}", dump_all(&run));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Fuzz { ops, seed, queues, paranoid, out, no_meld } => fuzz(ops, seed, queues, paranoid, out, no_meld),
        Cmd::Bench { workload, n, seed, format, out, assert_bounds, slack } => {
            bench(workload, n, seed, format, out, assert_bounds, slack)
        }
        Cmd::Replay { file, dump_every, validate_every } => replay(file, dump_every, validate_every),
        Cmd::Counter { file } => counter(file),
        Cmd::Dump { file } => dump(file),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
