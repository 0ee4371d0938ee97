//! JSON Lines stream files, one query per line:
//!
//! ```text
//! {"id": 1, "arrival": 0.5, "tokens": [1000, 1001, 1002]}
//! ```
//!
//! Arrivals are read exactly from their decimal text. Saving a canonical
//! stream that was loaded from a file written by [`write_stream`] reproduces
//! the file byte for byte.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::time::{parse_rational, Time};
use crate::types::{Query, QueryId, QueryStream, Token};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: QueryId,
    arrival: serde_json::Number,
    tokens: Vec<Token>,
}

pub fn read_stream<R: Read>(reader: R) -> Result<QueryStream> {
    let mut queries = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let arrival = Time::from_rational(parse_rational(&parsed.arrival.to_string())?);
        if parsed.tokens.is_empty() {
            return Err(Error::Parse(format!(
                "line {}: query {} has an empty prompt",
                lineno + 1,
                parsed.id
            )));
        }
        queries.push(Query::new(parsed.id, parsed.tokens, arrival));
    }
    QueryStream::new(queries)
}

pub fn write_stream<W: Write>(stream: &QueryStream, mut out: W) -> Result<()> {
    let mut line = String::new();
    for q in stream {
        if !q.arrival.is_terminating_decimal() {
            return Err(Error::InvalidParams(format!(
                "arrival {} of query {} has no finite decimal form",
                q.arrival, q.id
            )));
        }
        line.clear();
        write!(
            line,
            "{{\"id\": {}, \"arrival\": {}, \"tokens\": [",
            q.id, q.arrival
        )
        .unwrap();
        for (i, t) in q.prompt.iter().enumerate() {
            if i > 0 {
                line.push_str(", ");
            }
            write!(line, "{t}").unwrap();
        }
        line.push_str("]}\n");
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_stream(path: impl AsRef<Path>) -> Result<QueryStream> {
    read_stream(File::open(path)?)
}

pub fn save_stream(stream: &QueryStream, path: impl AsRef<Path>) -> Result<()> {
    write_stream(stream, BufWriter::new(File::create(path)?))
}
