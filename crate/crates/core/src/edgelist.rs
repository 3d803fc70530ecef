//! Plain-text edge lists: a line `n m`, then `m` lines `u v` with `u < v`, 0-based.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum EdgeListError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_pair(line: &str, line_no: usize) -> Result<(usize, usize), EdgeListError> {
    let err = |msg: &str| EdgeListError::Parse { line: line_no, msg: msg.to_string() };
    let mut it = line.split_ascii_whitespace();
    let a = it.next().ok_or_else(|| err("expected two integers"))?;
    let b = it.next().ok_or_else(|| err("expected two integers"))?;
    if it.next().is_some() {
        return Err(err("trailing fields"));
    }
    let a = a.parse().map_err(|_| err("not a non-negative integer"))?;
    let b = b.parse().map_err(|_| err("not a non-negative integer"))?;
    Ok((a, b))
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<Graph, EdgeListError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or(EdgeListError::Parse { line: 1, msg: "empty input".into() })??;
    let (n, m) = parse_pair(&header, 1)?;
    let mut edges = Vec::with_capacity(m);
    let mut last = None;
    let mut sorted = true;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let (u, v) = parse_pair(&line, line_no)?;
        if u >= v {
            return Err(EdgeListError::Parse {
                line: line_no,
                msg: format!("endpoints must satisfy u < v, got {u} {v}"),
            });
        }
        if v >= n {
            return Err(EdgeListError::Parse { line: line_no, msg: format!("vertex {v} >= n = {n}") });
        }
        if last.is_some_and(|prev| prev >= (u, v)) {
            sorted = false;
        }
        last = Some((u, v));
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(EdgeListError::Parse {
            line: 1,
            msg: format!("header announces {m} edges, found {}", edges.len()),
        });
    }
    if !sorted {
        edges.sort_unstable();
    }
    if edges.windows(2).any(|w| w[0] == w[1]) {
        return Err(EdgeListError::Parse { line: 1, msg: "duplicate edge".into() });
    }
    Graph::from_edges(n, edges).map_err(|e| EdgeListError::Parse { line: 1, msg: e.to_string() })
}

pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", g.n(), g.m())?;
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}
