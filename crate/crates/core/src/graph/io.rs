use std::fs;
use std::io::Write;
use std::path::Path;

use super::{EdgeList, GraphError, VertexId, MAX_VERTEX_ID};

/// On-disk edge list encodings.
///
/// `Text` is the SNAP convention: one `<src> <dst>` pair per line, `#` lines
/// are comments. A `# Nodes: <n>` comment, as SNAP writes it, declares the
/// vertex count. `Binary` is a flat run of 8-byte records, each a
/// little-endian `u32` source followed by a little-endian `u32` destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFormat {
    Text,
    Binary,
}

pub fn load_edge_list(path: impl AsRef<Path>, format: EdgeFormat) -> Result<EdgeList, GraphError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        EdgeFormat::Text => parse_text(&bytes),
        EdgeFormat::Binary => parse_binary(&bytes),
    }
}

/// Parses a SNAP-style text edge list.
pub fn parse_text(input: &[u8]) -> Result<EdgeList, GraphError> {
    let mut edges = Vec::new();
    let mut declared: Option<usize> = None;
    for (index, raw) in input.split(|&b| b == b'\n').enumerate() {
        let line_no = index + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|_| GraphError::Parse {
            line: line_no,
            message: "invalid UTF-8".into(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(n) = nodes_header(comment, line_no)? {
                declared = Some(n);
            }
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let (Some(src), Some(dst), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(GraphError::Parse {
                line: line_no,
                message: format!("expected `<src> <dst>`, got {line:?}"),
            });
        };
        edges.push((parse_id(src, line_no)?, parse_id(dst, line_no)?));
    }
    let implied = edges
        .iter()
        .map(|&(s, d)| s.max(d) as usize + 1)
        .max()
        .unwrap_or(0);
    let num_vertices = match declared {
        Some(n) if implied > n => {
            return Err(GraphError::Range {
                location: "header".into(),
                value: implied as u64 - 1,
                limit: n as u64,
            })
        }
        Some(n) => n,
        None => implied,
    };
    Ok(EdgeList::with_vertices(edges, num_vertices))
}

fn parse_id(token: &str, line: usize) -> Result<VertexId, GraphError> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(GraphError::Parse {
            line,
            message: format!("invalid vertex id {token:?}"),
        });
    }
    let value = token.parse::<u64>().unwrap_or(u64::MAX);
    if value > MAX_VERTEX_ID as u64 {
        return Err(GraphError::Range {
            location: format!("line {line}"),
            value,
            limit: MAX_VERTEX_ID as u64 + 1,
        });
    }
    Ok(value as VertexId)
}

// SNAP headers look like `# Nodes: 4847571 Edges: 68993773`.
fn nodes_header(comment: &str, line: usize) -> Result<Option<usize>, GraphError> {
    let mut words = comment.split_ascii_whitespace();
    while let Some(word) = words.next() {
        if word == "Nodes:" {
            let Some(count) = words.next() else {
                return Ok(None);
            };
            let Ok(n) = count.parse::<u64>() else {
                return Ok(None);
            };
            if n > MAX_VERTEX_ID as u64 + 1 {
                return Err(GraphError::Range {
                    location: format!("line {line}"),
                    value: n,
                    limit: MAX_VERTEX_ID as u64 + 1,
                });
            }
            return Ok(Some(n as usize));
        }
    }
    Ok(None)
}

/// Parses the 8-byte-record binary edge list.
pub fn parse_binary(input: &[u8]) -> Result<EdgeList, GraphError> {
    if !input.len().is_multiple_of(8) {
        return Err(GraphError::ParseBinary {
            offset: input.len() - input.len() % 8,
            message: format!("trailing {} bytes do not form a record", input.len() % 8),
        });
    }
    let mut edges = Vec::with_capacity(input.len() / 8);
    for (i, record) in input.chunks_exact(8).enumerate() {
        let src = u32::from_le_bytes(record[0..4].try_into().unwrap());
        let dst = u32::from_le_bytes(record[4..8].try_into().unwrap());
        if src > MAX_VERTEX_ID || dst > MAX_VERTEX_ID {
            return Err(GraphError::Range {
                location: format!("byte offset {}", i * 8),
                value: src.max(dst) as u64,
                limit: MAX_VERTEX_ID as u64 + 1,
            });
        }
        edges.push((src, dst));
    }
    let list = EdgeList::new(edges);
    let n = list.num_vertices();
    Ok(EdgeList::with_vertices(list.edges, n))
}

pub fn write_text(list: &EdgeList, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "# Nodes: {} Edges: {}", list.num_vertices(), list.edges.len())?;
    for &(s, d) in &list.edges {
        writeln!(out, "{s}\t{d}")?;
    }
    out.flush()
}

/// Binary records carry no vertex count; isolated trailing vertices are lost.
pub fn write_binary(list: &EdgeList, mut out: impl Write) -> std::io::Result<()> {
    for &(s, d) in &list.edges {
        out.write_all(&s.to_le_bytes())?;
        out.write_all(&d.to_le_bytes())?;
    }
    out.flush()
}
