//! Graph file formats.
//!
//! Edge list: the vertex count on the first line, then one `i j` pair per
//! line (0-indexed). Blank lines and lines starting with `#` are skipped.
//!
//! Bit-packed: the bytes `RGGB`, a version byte, `n` as a little-endian
//! `u32`, then the upper triangle `(0,1), (0,2), ..., (n-2,n-1)` one bit per
//! pair, least significant bit first. Unused bits of the last byte are zero.

use super::{check_n, Graph, Provenance};
use crate::error::{invalid, parse_error, Result};

pub const BITS_MAGIC: &[u8; 4] = b"RGGB";
pub const BITS_VERSION: u8 = 1;

pub fn encode_edge_list(g: &Graph) -> String {
    let mut out = format!("{}\n", g.n());
    for (i, j) in g.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    out
}

pub fn decode_edge_list(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| parse_error(1, 1, "missing vertex count"))?;
    let n: usize = header
        .parse()
        .map_err(|_| parse_error(hl, 1, format!("vertex count `{header}` is not a non-negative integer")))?;
    check_n(n).map_err(|e| parse_error(hl, 1, e.to_string()))?;
    let mut g = Graph::empty(n, Provenance::External);
    for (ln, line) in lines {
        let mut parts = line.split_whitespace();
        let mut vertex = |col: usize| -> Result<usize> {
            let tok = parts.next().ok_or_else(|| parse_error(ln, col, "expected two vertex indices"))?;
            let v: usize = tok
                .parse()
                .map_err(|_| parse_error(ln, col, format!("`{tok}` is not a vertex index")))?;
            if v >= n {
                return Err(parse_error(ln, col, format!("vertex {v} out of range for n = {n}")));
            }
            Ok(v)
        };
        let i = vertex(1)?;
        let j = vertex(2)?;
        if parts.next().is_some() {
            return Err(parse_error(ln, 3, "trailing tokens after edge"));
        }
        if i == j {
            return Err(parse_error(ln, 1, format!("self-loop at {i}")));
        }
        if g.has_edge(i, j) {
            return Err(parse_error(ln, 1, format!("duplicate edge {i} {j}")));
        }
        g.set(i, j);
    }
    Ok(g)
}

fn payload_len(n: usize) -> usize {
    (n * (n - 1) / 2).div_ceil(8)
}

pub fn encode_bits(g: &Graph) -> Vec<u8> {
    let n = g.n();
    let mut out = Vec::with_capacity(9 + payload_len(n));
    out.extend_from_slice(BITS_MAGIC);
    out.push(BITS_VERSION);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    let mut payload = vec![0u8; payload_len(n)];
    let mut k = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if g.has_edge(i, j) {
                payload[k / 8] |= 1 << (k % 8);
            }
            k += 1;
        }
    }
    out.extend_from_slice(&payload);
    out
}

pub fn decode_bits(bytes: &[u8]) -> Result<Graph> {
    if bytes.len() < 9 {
        return Err(invalid(format!("bit-packed graph needs at least 9 bytes, got {}", bytes.len())));
    }
    if &bytes[..4] != BITS_MAGIC {
        return Err(invalid("bad magic, expected RGGB"));
    }
    if bytes[4] != BITS_VERSION {
        return Err(invalid(format!("unsupported version {}", bytes[4])));
    }
    let n = u32::from_le_bytes([bytes[5], bytes[6], bytes[7], bytes[8]]) as usize;
    check_n(n)?;
    let payload = &bytes[9..];
    if payload.len() != payload_len(n) {
        return Err(invalid(format!(
            "payload has {} bytes, expected {} for n = {n}",
            payload.len(),
            payload_len(n)
        )));
    }
    let pairs = n * (n - 1) / 2;
    if pairs % 8 != 0 {
        let last = payload[payload.len() - 1];
        if last >> (pairs % 8) != 0 {
            return Err(invalid("nonzero padding bits"));
        }
    }
    let mut g = Graph::empty(n, Provenance::External);
    let mut k = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if payload[k / 8] >> (k % 8) & 1 == 1 {
                g.set(i, j);
            }
            k += 1;
        }
    }
    Ok(g)
}
