//! Text formats for graphs and construction sequences.
//!
//! Graph file: `n <count>` followed by one `e <u> <v>` line per edge.
//! Sequence file: `k <k>` followed by one `v <id> m <id>*` line per vertex,
//! in construction order. Tokens are whitespace separated, lines end in LF,
//! and anything not matching the grammar is rejected.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::graph::{ConstructionEntry, ConstructionSequence, Graph, GraphError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid contents: {0}")]
    Validation(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

/// Either kind of instance file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceFile {
    Graph(Graph),
    Sequence(ConstructionSequence),
}

pub fn write_graph<W: Write>(mut out: W, g: &Graph) -> io::Result<()> {
    writeln!(out, "n {}", g.n())?;
    for (u, v) in g.edges() {
        writeln!(out, "e {u} {v}")?;
    }
    Ok(())
}

pub fn write_sequence<W: Write>(mut out: W, seq: &ConstructionSequence) -> io::Result<()> {
    writeln!(out, "k {}", seq.k())?;
    for entry in seq.entries() {
        write!(out, "v {} m", entry.v)?;
        for w in &entry.m {
            write!(out, " {w}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: R,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<Option<(usize, String)>, FormatError> {
        let mut line = String::new();
        if self.inner.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        self.number += 1;
        if line.ends_with('\n') {
            line.pop();
        }
        if line.contains('\r') {
            return Err(parse_err(self.number, "CR line ending"));
        }
        Ok(Some((self.number, line)))
    }
}

fn number(line: usize, token: Option<&str>, what: &str) -> Result<usize, FormatError> {
    let token = token.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| parse_err(line, format!("{what}: `{token}` is not a non-negative integer")))
}

fn header<R: BufRead>(lines: &mut Lines<R>) -> Result<(usize, char, usize), FormatError> {
    let (line, text) = lines.next_line()?.ok_or_else(|| parse_err(1, "empty file"))?;
    let mut tokens = text.split_whitespace();
    let tag = match tokens.next() {
        Some("n") => 'n',
        Some("k") => 'k',
        other => return Err(parse_err(line, format!("expected header `n` or `k`, found {other:?}"))),
    };
    let value = number(line, tokens.next(), "header value")?;
    if let Some(extra) = tokens.next() {
        return Err(parse_err(line, format!("trailing token `{extra}`")));
    }
    Ok((line, tag, value))
}

fn graph_body<R: BufRead>(lines: &mut Lines<R>, n: usize) -> Result<Graph, FormatError> {
    let mut edges = Vec::new();
    while let Some((line, text)) = lines.next_line()? {
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some("e") {
            return Err(parse_err(line, "expected an `e <u> <v>` line"));
        }
        let u = number(line, tokens.next(), "edge endpoint")?;
        let v = number(line, tokens.next(), "edge endpoint")?;
        if let Some(extra) = tokens.next() {
            return Err(parse_err(line, format!("trailing token `{extra}`")));
        }
        if u >= n || v >= n {
            return Err(parse_err(line, format!("edge endpoint out of range 0..{n}")));
        }
        edges.push((u, v));
    }
    Ok(Graph::from_edges(n, edges)?)
}

fn sequence_body<R: BufRead>(lines: &mut Lines<R>, k: usize) -> Result<ConstructionSequence, FormatError> {
    let mut order = Vec::new();
    while let Some((line, text)) = lines.next_line()? {
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some("v") {
            return Err(parse_err(line, "expected a `v <id> m <ids>` line"));
        }
        let v = number(line, tokens.next(), "vertex id")?;
        if tokens.next() != Some("m") {
            return Err(parse_err(line, "expected `m` after the vertex id"));
        }
        let m = tokens
            .map(|t| number(line, Some(t), "back-neighbor id"))
            .collect::<Result<Vec<_>, _>>()?;
        order.push(ConstructionEntry { v, m });
    }
    Ok(ConstructionSequence::new(k, order)?)
}

pub fn read_graph<R: BufRead>(input: R) -> Result<Graph, FormatError> {
    match read_instance(input)? {
        InstanceFile::Graph(g) => Ok(g),
        InstanceFile::Sequence(_) => Err(parse_err(1, "expected a graph file (`n` header)")),
    }
}

pub fn read_sequence<R: BufRead>(input: R) -> Result<ConstructionSequence, FormatError> {
    match read_instance(input)? {
        InstanceFile::Sequence(s) => Ok(s),
        InstanceFile::Graph(_) => Err(parse_err(1, "expected a construction sequence file (`k` header)")),
    }
}

/// Reads either format, dispatching on the header.
pub fn read_instance<R: BufRead>(input: R) -> Result<InstanceFile, FormatError> {
    let mut lines = Lines { inner: input, number: 0 };
    let (_, tag, value) = header(&mut lines)?;
    match tag {
        'n' => graph_body(&mut lines, value).map(InstanceFile::Graph),
        _ => sequence_body(&mut lines, value).map(InstanceFile::Sequence),
    }
}
