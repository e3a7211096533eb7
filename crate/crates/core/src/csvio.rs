//! CSV plumbing shared by the file formats: exact header checks, LF line
//! endings and row-numbered parse errors (row 1 is the first data row).

use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub(crate) fn reader<R: Read>(input: R, name: &str, expected: &[&str]) -> Result<csv::Reader<R>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let found = reader.headers()?.clone();
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Header {
            path: name.to_string(),
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(reader)
}

pub(crate) fn field<'r>(
    record: &'r csv::StringRecord,
    index: usize,
    name: &str,
    row: usize,
) -> Result<&'r str> {
    record.get(index).ok_or_else(|| Error::Record {
        path: name.to_string(),
        row,
        message: format!("missing column {index}"),
    })
}

pub(crate) fn parse<T>(text: &str, name: &str, row: usize) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    text.trim().parse::<T>().map_err(|e| Error::Record {
        path: name.to_string(),
        row,
        message: format!("cannot parse {text:?}: {e}"),
    })
}

pub(crate) fn parse_opt<T>(text: &str, name: &str, row: usize) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    if text.trim().is_empty() {
        Ok(None)
    } else {
        parse(text, name, row).map(Some)
    }
}

pub(crate) fn record_error(name: &str, row: usize, message: impl Into<String>) -> Error {
    Error::Record {
        path: name.to_string(),
        row,
        message: message.into(),
    }
}
