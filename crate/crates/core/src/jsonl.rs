//! Line-delimited JSON helpers.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_jsonl<'a, T, W>(mut out: W, records: impl IntoIterator<Item = &'a T>) -> Result<()>
where
    T: Serialize + 'a,
    W: Write,
{
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Lazily parses records, skipping blank lines. Errors carry the line number.
pub fn read_jsonl<T, R>(input: R) -> impl Iterator<Item = Result<T>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    input.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(serde_json::from_str(&l).map_err(|e| {
            Error::Config(format!("line {}: {e}", i + 1))
        })),
    })
}

pub fn read_all<T, R>(input: R) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    read_jsonl(input).collect()
}
