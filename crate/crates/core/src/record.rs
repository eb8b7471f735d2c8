//! Line-oriented text records shared by the tessellation and model formats.
//!
//! A record is a sequence of `keyword value...` lines. Floats are written in
//! Rust's shortest round-trip form, so parsing reproduces every bit.

use crate::error::{Error, Result};

pub(crate) struct RecordReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last_line: usize,
}

impl<'a> RecordReader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate().peekable(), last_line: 0 }
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.last_line, msg: msg.into() }
    }

    /// Next non-blank, non-comment line split into fields.
    pub(crate) fn next_fields(&mut self) -> Result<Vec<&'a str>> {
        for (no, line) in self.lines.by_ref() {
            self.last_line = no + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok(line.split_whitespace().collect());
        }
        Err(Error::Parse { line: self.last_line + 1, msg: "unexpected end of record".into() })
    }

    /// Next line, which must start with `keyword`; returns the remaining fields.
    pub(crate) fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let fields = self.next_fields()?;
        match fields.first() {
            Some(k) if *k == keyword => Ok(fields[1..].to_vec()),
            Some(k) => Err(self.error(format!("expected `{keyword}`, found `{k}`"))),
            None => Err(self.error(format!("expected `{keyword}`"))),
        }
    }

    pub(crate) fn expect_one(&mut self, keyword: &str) -> Result<&'a str> {
        let f = self.expect(keyword)?;
        match f.as_slice() {
            [v] => Ok(v),
            _ => Err(self.error(format!("`{keyword}` takes exactly one value"))),
        }
    }

    pub(crate) fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse::<T>().map_err(|_| self.error(format!("bad {what} `{s}`")))
    }

    /// `keyword value` line parsed as `T`.
    pub(crate) fn value<T: std::str::FromStr>(&mut self, keyword: &str, what: &str) -> Result<T> {
        let v = self.expect_one(keyword)?;
        self.parse(v, what)
    }
}
