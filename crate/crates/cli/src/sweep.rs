//! Grid runs: every (arrival setting, cycle length, seed) cell is one
//! simulation. Cells run in parallel; rows come out in grid order.

use std::io::Write;

use rayon::prelude::*;
use serde_json::{json, Value};

use prefixsched::gen::{gen_poisson, gen_shuffled, PromptShape, ShuffledQueueParams};
use prefixsched::sched::CycleLen;
use prefixsched::time::format_rational;
use prefixsched::types::percentile;
use prefixsched::{run_policy, CostModel, PolicyKind, QueryStream, Rational, SimConfig, Time};

use crate::commands::time_value;
use crate::{open_out, Cli, CliError, CliResult, Format, StartArg, Status, SweepArgs};

/// Arrival axis of the grid. Gaps and rates are never mixed.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalGrid {
    Gaps(Vec<Rational>),
    Rates(Vec<f64>),
}

impl ArrivalGrid {
    fn len(&self) -> usize {
        match self {
            ArrivalGrid::Gaps(v) => v.len(),
            ArrivalGrid::Rates(v) => v.len(),
        }
    }

    fn label(&self, i: usize) -> String {
        match self {
            ArrivalGrid::Gaps(v) => format_rational(&v[i]),
            ArrivalGrid::Rates(v) => v[i].to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub ks: Vec<CycleLen>,
    pub arrivals: ArrivalGrid,
    pub n: usize,
    pub k_rep: usize,
    pub u: usize,
    pub d: usize,
    pub c_attn: Rational,
    pub seeds: Vec<u64>,
    /// `Delayed(None)` starts at the last arrival of each stream.
    pub start: StartArg,
    /// In percent, each in `(0, 100]`.
    pub percentiles: Vec<Rational>,
}

impl SweepSpec {
    pub fn from_args(a: &SweepArgs, base_seed: u64) -> CliResult<Self> {
        let ks =
            a.k.iter()
                .map(|k| k.parse())
                .collect::<Result<Vec<CycleLen>, _>>()?;
        let (arrivals, default_start) = match (a.s.is_empty(), a.rate.is_empty()) {
            (false, true) => (ArrivalGrid::Gaps(a.s.clone()), StartArg::Delayed(None)),
            (true, false) => (ArrivalGrid::Rates(a.rate.clone()), StartArg::Immediate),
            _ => return Err(CliError::Usage("give exactly one of --s and --rate".into())),
        };
        let seeds = (0..a.seeds).map(|i| base_seed.wrapping_add(i)).collect();
        let spec = SweepSpec {
            ks,
            arrivals,
            n: a.n,
            k_rep: a.k_rep,
            u: a.u,
            d: a.d,
            c_attn: a.c_attn,
            seeds,
            start: a.start.unwrap_or(default_start),
            percentiles: a.percentiles.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.ks.is_empty() || self.arrivals.len() == 0 || self.seeds.is_empty() {
            return Err(CliError::Usage("sweep grid is empty".into()));
        }
        if let ArrivalGrid::Rates(r) = &self.arrivals {
            if let Some(bad) = r.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
                return Err(CliError::Usage(format!("rate {bad} must be positive")));
            }
        }
        let (zero, hundred) = (Rational::from_integer(0), Rational::from_integer(100));
        if let Some(p) = self
            .percentiles
            .iter()
            .find(|p| **p <= zero || **p > hundred)
        {
            return Err(CliError::Usage(format!(
                "percentile {} outside (0, 100]",
                format_rational(p)
            )));
        }
        CostModel::new(self.c_attn)?;
        PromptShape {
            n: self.n,
            k_rep: self.k_rep,
            u: self.u,
            d: self.d,
        }
        .validate()?;
        Ok(())
    }

    pub fn header(&self) -> Vec<String> {
        let fixed = [
            "policy",
            "k",
            "s_or_rate",
            "n",
            "u",
            "d",
            "c_attn",
            "seed",
            "max",
        ];
        let mut h: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
        h.extend(
            self.percentiles
                .iter()
                .map(|p| format!("p{}", format_rational(p))),
        );
        h
    }

    fn stream(&self, arrival: usize, seed: u64) -> CliResult<QueryStream> {
        let shape = PromptShape {
            n: self.n,
            k_rep: self.k_rep,
            u: self.u,
            d: self.d,
        };
        Ok(match &self.arrivals {
            ArrivalGrid::Gaps(s) => gen_shuffled(&ShuffledQueueParams::new(
                self.n,
                self.k_rep,
                self.u,
                self.d,
                Time::from_rational(s[arrival]),
                seed,
            ))?,
            ArrivalGrid::Rates(r) => gen_poisson(self.n, r[arrival], shape, seed)?,
        })
    }

    fn config(&self, stream: &QueryStream) -> CliResult<SimConfig> {
        let cfg = match self.start {
            StartArg::Immediate => SimConfig::immediate(),
            StartArg::Delayed(Some(t)) => SimConfig::delayed(t),
            StartArg::Delayed(None) => {
                SimConfig::delayed(stream.max_arrival().unwrap_or(Time::ZERO))
            }
        };
        Ok(cfg.with_cost(CostModel::new(self.c_attn)?))
    }
}

/// Built-in policy for a cycle length: 1 is FCFS, inf is LPM.
pub fn policy_for(k: CycleLen) -> PolicyKind {
    match k {
        CycleLen::Finite(k) if k.get() == 1 => PolicyKind::Fcfs,
        CycleLen::Infinite => PolicyKind::Lpm,
        k => PolicyKind::KLpm(k),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepRow {
    pub policy: &'static str,
    pub k: CycleLen,
    pub s_or_rate: String,
    pub seed: u64,
    pub max: Time,
    pub percentiles: Vec<Time>,
}

/// Runs every cell; the same stream is shared by all cycle lengths of one
/// (arrival setting, seed) pair. Rows are ordered by arrival setting, then
/// cycle length, then seed.
pub fn run_sweep(spec: &SweepSpec) -> CliResult<Vec<SweepRow>> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = (0..spec.arrivals.len())
        .flat_map(|a| (0..spec.seeds.len()).map(move |s| (a, s)))
        .collect();
    let fractions: Vec<Rational> = spec
        .percentiles
        .iter()
        .map(|p| p / Rational::from_integer(100))
        .collect();
    let per_cell: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(a, s)| {
            let seed = spec.seeds[s];
            let stream = spec.stream(a, seed)?;
            let cfg = spec.config(&stream)?;
            spec.ks
                .iter()
                .map(|&k| {
                    let kind = policy_for(k);
                    let (_, result) = run_policy(&stream, kind, &cfg, seed)?;
                    let sorted = result.sorted_ttfts();
                    let percentiles = fractions
                        .iter()
                        .map(|&f| percentile(&sorted, f))
                        .collect::<Result<_, _>>()?;
                    Ok(SweepRow {
                        policy: kind.family(),
                        k,
                        s_or_rate: spec.arrivals.label(a),
                        seed,
                        max: result.max_ttft,
                        percentiles,
                    })
                })
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<_>>()?;

    let seeds = spec.seeds.len();
    let mut rows = Vec::with_capacity(cells.len() * spec.ks.len());
    for group in per_cell.chunks(seeds) {
        for ki in 0..spec.ks.len() {
            rows.extend(group.iter().map(|cell| cell[ki].clone()));
        }
    }
    Ok(rows)
}

pub fn write_rows_csv<W: Write>(spec: &SweepSpec, rows: &[SweepRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(spec.header())?;
    let c_attn = format_rational(&spec.c_attn);
    for r in rows {
        let mut rec = vec![
            r.policy.to_string(),
            r.k.to_string(),
            r.s_or_rate.clone(),
            spec.n.to_string(),
            spec.u.to_string(),
            spec.d.to_string(),
            c_attn.clone(),
            r.seed.to_string(),
            r.max.to_string(),
        ];
        rec.extend(r.percentiles.iter().map(Time::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_json(spec: &SweepSpec, rows: &[SweepRow]) -> Value {
    let header = spec.header();
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut obj = serde_json::Map::new();
            obj.insert("policy".into(), json!(r.policy));
            obj.insert("k".into(), json!(r.k.to_string()));
            obj.insert("s_or_rate".into(), json!(r.s_or_rate));
            obj.insert("n".into(), json!(spec.n));
            obj.insert("u".into(), json!(spec.u));
            obj.insert("d".into(), json!(spec.d));
            obj.insert(
                "c_attn".into(),
                time_value(Time::from_rational(spec.c_attn)),
            );
            obj.insert("seed".into(), json!(r.seed));
            obj.insert("max".into(), time_value(r.max));
            for (name, t) in header[9..].iter().zip(&r.percentiles) {
                obj.insert(name.clone(), time_value(*t));
            }
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

pub(crate) fn run(cli: &Cli, a: &SweepArgs, stdout: &mut dyn Write) -> CliResult<Status> {
    let spec = SweepSpec::from_args(a, cli.seed)?;
    let rows = run_sweep(&spec)?;
    let mut out = open_out(cli.out.as_deref(), stdout)?;
    match cli.format {
        Format::Csv => write_rows_csv(&spec, &rows, &mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &rows_json(&spec, &rows))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(Status::Ok)
}
