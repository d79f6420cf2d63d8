//! Aggregate tables over run records.
//!
//! Columns, in order: instance_id, instance_hash, kind, n, k, r, strategy,
//! mode, sdp_value, best_rounded, best_pre_repair, mean_rounded, oracle_opt,
//! ratio_rounded_opt, ratio_rounded_sdp, lambda_r1, predicted_factor,
//! converged, error. Absent values are empty cells in CSV and `null` in JSON;
//! an infinite predicted factor is written as `inf`.

use std::fs;

use anyhow::{bail, Context};
use lasserre_core::pipeline::RunRecord;
use serde::Serialize;
use serde_json::{Map, Value};

pub const COLUMNS: [&str; 19] = [
    "instance_id",
    "instance_hash",
    "kind",
    "n",
    "k",
    "r",
    "strategy",
    "mode",
    "sdp_value",
    "best_rounded",
    "best_pre_repair",
    "mean_rounded",
    "oracle_opt",
    "ratio_rounded_opt",
    "ratio_rounded_sdp",
    "lambda_r1",
    "predicted_factor",
    "converged",
    "error",
];

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
    Bool(bool),
    Absent,
}

impl Cell {
    fn num(x: Option<f64>) -> Cell {
        match x {
            Some(v) if v.is_finite() => Cell::Num(v),
            Some(v) if v.is_infinite() => Cell::Text(if v > 0.0 { "inf" } else { "-inf" }.into()),
            _ => Cell::Absent,
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => x.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Absent => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Absent => Value::Null,
            other => serde_json::to_value(other).expect("cells serialize"),
        }
    }
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    }
}

fn rows(rec: &RunRecord) -> Vec<Vec<Cell>> {
    let factor = rec.predicted_factor.as_ref().map(|f| f.value());
    let error = rec
        .error
        .as_ref()
        .map(|e| e.message.clone());
    let base = |mode: Cell, sdp: Option<f64>, best: Option<f64>, pre: Option<f64>, mean: Option<f64>, err: Option<String>| {
        vec![
            Cell::Text(rec.instance_id.clone()),
            Cell::Text(rec.instance_hash.clone()),
            Cell::Text(rec.kind.to_string()),
            Cell::Int(rec.n as u64),
            Cell::Int(rec.k as u64),
            Cell::Int(rec.r as u64),
            Cell::Text(rec.strategy_tag.clone()),
            mode,
            Cell::num(sdp),
            Cell::num(best),
            Cell::num(pre),
            Cell::num(mean),
            Cell::num(rec.oracle_opt),
            Cell::num(ratio(best, rec.oracle_opt)),
            Cell::num(ratio(best, sdp)),
            Cell::num(rec.lambda_r1),
            Cell::num(factor),
            Cell::Bool(rec.converged),
            err.map_or(Cell::Absent, Cell::Text),
        ]
    };
    if rec.modes.is_empty() {
        return vec![base(Cell::Absent, rec.sdp_value, None, None, None, error)];
    }
    rec.modes
        .iter()
        .map(|m| {
            let err = error
                .clone()
                .or_else(|| m.error.as_ref().map(|e| e.message.clone()));
            base(
                Cell::Text(m.mode.to_string()),
                rec.sdp_value,
                m.best_post_repair,
                m.best_pre_repair,
                m.mean_post_repair,
                err,
            )
        })
        .collect()
}

pub fn load(pattern: &str) -> anyhow::Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for entry in glob::glob(pattern).with_context(|| format!("bad glob {pattern:?}"))? {
        let path = entry?;
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let rec: RunRecord =
            serde_json::from_str(&text).with_context(|| format!("parsing record {}", path.display()))?;
        records.push(rec);
    }
    if records.is_empty() {
        bail!("no records match {pattern:?}");
    }
    records.sort_by(|a, b| {
        (&a.instance_hash, a.strategy, &a.config_hash).cmp(&(&b.instance_hash, b.strategy, &b.config_hash))
    });
    Ok(records)
}

pub fn build(pattern: &str, json: bool) -> anyhow::Result<String> {
    let table: Vec<Vec<Cell>> = load(pattern)?.iter().flat_map(rows).collect();
    if json {
        let objects: Vec<Value> = table
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, cell) in COLUMNS.iter().zip(row) {
                    obj.insert(name.to_string(), cell.json());
                }
                Value::Object(obj)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&objects)?;
        text.push('\n');
        Ok(text)
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for row in &table {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}
