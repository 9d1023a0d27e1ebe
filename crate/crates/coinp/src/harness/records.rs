//! Persistence of replication records.
//!
//! Schema (header exactly):
//! `scenario,beta_s,n,method,learner,replication,p_value,wall_time_ms,fit_count,status`
//!
//! Numbers are rendered in shortest round-trippable form; a write followed
//! by a read reproduces the record list exactly.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::cit::Method;
use crate::error::{Error, Result};
use crate::harness::{RecordStatus, ReplicationRecord};
use crate::scenarios::ScenarioId;

pub const RECORDS_HEADER: &str =
    "scenario,beta_s,n,method,learner,replication,p_value,wall_time_ms,fit_count,status";

pub fn write_records(records: &[ReplicationRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.beta_s,
            r.n,
            r.method,
            r.learner,
            r.replication,
            r.p_value.map(|p| p.to_string()).unwrap_or_default(),
            r.wall_time_ms,
            r.fit_count,
            r.status.render(),
        )?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<ReplicationRecord>> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or(Error::Records {
            line: 1,
            message: "file is empty".into(),
        })?;
    if header != RECORDS_HEADER {
        return Err(Error::Records {
            line: 1,
            message: format!("unexpected header `{header}`"),
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Records {
                line: line_no,
                message: format!("{} fields, expected 10", fields.len()),
            });
        }
        let bad = |what: &str| Error::Records {
            line: line_no,
            message: format!("cannot parse {what}"),
        };
        let p_value = if fields[6].is_empty() {
            None
        } else {
            Some(fields[6].parse::<f64>().map_err(|_| bad("p_value"))?)
        };
        records.push(ReplicationRecord {
            scenario: ScenarioId::parse(fields[0]).map_err(|_| bad("scenario"))?,
            beta_s: fields[1].parse().map_err(|_| bad("beta_s"))?,
            n: fields[2].parse().map_err(|_| bad("n"))?,
            method: Method::parse(fields[3]).map_err(|_| bad("method"))?,
            learner: fields[4].to_string(),
            replication: fields[5].parse().map_err(|_| bad("replication"))?,
            p_value,
            wall_time_ms: fields[7].parse().map_err(|_| bad("wall_time_ms"))?,
            fit_count: fields[8].parse().map_err(|_| bad("fit_count"))?,
            status: RecordStatus::parse(fields[9]).map_err(|_| bad("status"))?,
        });
    }
    Ok(records)
}
