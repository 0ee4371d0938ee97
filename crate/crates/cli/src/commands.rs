use std::io::Write;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use prefixsched::bounds::{bound_table, BoundInputs};
use prefixsched::feasible::{
    brute_force_with_limit, percentile_schedule, require_linear, FeasibilityOutcome,
};
use prefixsched::gen::{
    gen_3partition_stream, gen_poisson, gen_shuffled, PartitionInstance, PromptShape,
    ShuffledQueueParams,
};
use prefixsched::io::{load_stream, write_stream};
use prefixsched::sim::write_csv;
use prefixsched::{run_policy, CostModel, PolicyKind, QueryId, Rational, SimConfig, Time};

use crate::{
    open_out, BoundsArgs, Cli, CliError, CliResult, FeasibleArgs, Format, GenCommand, Mode,
    RunArgs, ShapeArgs, StartArg, Status,
};

fn shape(a: &ShapeArgs) -> PromptShape {
    PromptShape {
        n: a.n,
        k_rep: a.k_rep,
        u: a.u,
        d: a.d,
    }
}

pub(crate) fn gen(
    cli: &Cli,
    cmd: &GenCommand,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<Status> {
    let (stream, meta) = match cmd {
        GenCommand::Shuffled(a) => {
            let p = ShuffledQueueParams::new(
                a.shape.n,
                a.shape.k_rep,
                a.shape.u,
                a.shape.d,
                a.s,
                cli.seed,
            );
            let meta = json!({ "generator": "shuffled", "params": p, "seed": cli.seed });
            (gen_shuffled(&p)?, meta)
        }
        GenCommand::Partition(a) => {
            let inst = PartitionInstance::new(a.m, a.h, a.a.clone())?;
            let ps = gen_3partition_stream(&inst)?;
            let meta = json!({
                "generator": "partition",
                "params": inst,
                "seed": cli.seed,
                "T": inst.deadline(),
                "x_ids": ps.x_ids,
                "y_ids": ps.y_ids,
                "z_ids": ps.z_ids,
                "w_ids": ps.w_ids,
            });
            (ps.stream, meta)
        }
        GenCommand::Poisson(a) => {
            let meta = json!({ "generator": "poisson", "params": shape(&a.shape), "rate": a.rate, "seed": cli.seed });
            (
                gen_poisson(a.shape.n, a.rate, shape(&a.shape), cli.seed)?,
                meta,
            )
        }
    };
    let meta = serde_json::to_string_pretty(&meta)? + "\n";
    match &cli.out {
        Some(path) => {
            write_stream(&stream, open_out(Some(path), stdout)?)?;
            let mut side = PathBuf::from(path).into_os_string();
            side.push(".meta.json");
            std::fs::write(side, meta)?;
        }
        None => {
            write_stream(&stream, &mut *stdout)?;
            stderr.write_all(meta.as_bytes())?;
        }
    }
    Ok(Status::Ok)
}

pub(crate) fn sim_config(
    start: StartArg,
    c_attn: Rational,
    batch: Option<usize>,
) -> CliResult<SimConfig> {
    let cfg = match start {
        StartArg::Immediate => SimConfig::immediate(),
        StartArg::Delayed(Some(t)) => SimConfig::delayed(t),
        StartArg::Delayed(None) => {
            return Err(CliError::Usage(
                "--start delayed needs a time here, as delayed:<T>".into(),
            ))
        }
    };
    let batch = match batch {
        Some(b) => Some(
            NonZeroUsize::new(b)
                .ok_or_else(|| CliError::Usage("--batch must be positive".into()))?,
        ),
        None => None,
    };
    Ok(cfg.with_cost(CostModel::new(c_attn)?).with_batch_bin(batch))
}

/// Exact decimal as a JSON number, or the `a/b` text when no decimal exists.
pub(crate) fn time_value(t: Time) -> Value {
    let text = t.to_string();
    match serde_json::Number::from_str(&text) {
        Ok(n) if t.is_terminating_decimal() => Value::Number(n),
        _ => Value::String(text),
    }
}

pub(crate) fn run(
    cli: &Cli,
    a: &RunArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<Status> {
    let stream = load_stream(&a.stream)?;
    let kind: PolicyKind = a.policy.parse()?;
    let cfg = sim_config(a.start, a.c_attn, a.batch)?;
    let (_, result) = run_policy(&stream, kind, &cfg, cli.seed)?;
    let summary = result.summary()?;
    let mut out = open_out(cli.out.as_deref(), stdout)?;
    match cli.format {
        Format::Csv => write_csv(&result, &mut out)?,
        Format::Json => {
            let records: Vec<Value> = result
                .records
                .iter()
                .map(|r| {
                    json!({
                        "id": r.id,
                        "arrival": time_value(r.arrival),
                        "start": time_value(r.start),
                        "completion": time_value(r.completion),
                        "ttft": time_value(r.ttft),
                    })
                })
                .collect();
            let doc = json!({
                "policy": kind.to_string(),
                "records": records,
                "summary": {
                    "max_ttft": time_value(summary.max),
                    "p50": time_value(summary.p50),
                    "p90": time_value(summary.p90),
                    "p95": time_value(summary.p95),
                    "p99": time_value(summary.p99),
                },
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    writeln!(stderr, "{summary}")?;
    Ok(Status::Ok)
}

pub(crate) fn bounds(cli: &Cli, a: &BoundsArgs, stdout: &mut dyn Write) -> CliResult<Status> {
    let inputs = BoundInputs {
        n: a.n,
        u: a.u,
        d: a.d,
        s: a.s,
        k: a.k,
        start: a.start.unwrap_or(Time::from_rational(
            a.s * Rational::from_integer(a.n as i128),
        )),
        epsilon: a.epsilon,
    };
    let rows = bound_table(&inputs)?;
    let mut out = open_out(cli.out.as_deref(), stdout)?;
    match cli.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct FeasibleReport {
    outcome: &'static str,
    satisfied_count: usize,
    schedule: Vec<QueryId>,
}

pub(crate) fn feasible(
    cli: &Cli,
    a: &FeasibleArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<Status> {
    let stream = load_stream(&a.stream)?;
    let outcome = match a.mode {
        Mode::Exact => {
            let cfg = sim_config(a.start, a.c_attn, None)?;
            brute_force_with_limit(&stream, a.limit, &cfg, a.max_queries)?
        }
        Mode::Percentile => {
            require_linear(&CostModel::new(a.c_attn)?)?;
            if a.start != StartArg::Immediate {
                return Err(CliError::Usage(
                    "percentile mode runs with immediate start only".into(),
                ));
            }
            let p =
                a.p.ok_or_else(|| CliError::Usage("percentile mode needs --p".into()))?;
            percentile_schedule(&stream, a.limit, p)?
        }
    };
    let (report, status) = match outcome {
        FeasibilityOutcome::Feasible {
            schedule,
            satisfied_count,
        } => (
            FeasibleReport {
                outcome: "feasible",
                satisfied_count,
                schedule: schedule.order,
            },
            Status::Ok,
        ),
        FeasibilityOutcome::Infeasible { certificate } => {
            writeln!(stderr, "{certificate}")?;
            (
                FeasibleReport {
                    outcome: "infeasible",
                    satisfied_count: 0,
                    schedule: Vec::new(),
                },
                Status::Infeasible,
            )
        }
    };
    let mut out = open_out(cli.out.as_deref(), stdout)?;
    serde_json::to_writer(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(status)
}
