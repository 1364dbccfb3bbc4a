//! MacKay alist text format for sparse parity-check matrices.
//!
//! Layout: `n m` header, max column/row degrees, per-column and per-row
//! degree lists, then 1-based index lists zero-padded to the max degree.
//! Writing is canonical (single spaces, trailing newline) so a read/write
//! cycle reproduces the file byte for byte.

use super::binmat::BinaryMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlistError {
    #[error("alist line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("alist truncated: expected {expected} lines, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// Serialize a parity-check matrix (checks = rows, variables = columns).
pub fn write_alist(h: &BinaryMatrix) -> String {
    let (m, n) = (h.rows(), h.cols());
    let col_idx: Vec<Vec<usize>> = (0..n)
        .map(|c| (0..m).filter(|&r| h.get(r, c)).map(|r| r + 1).collect())
        .collect();
    let row_idx: Vec<Vec<usize>> = (0..m)
        .map(|r| (0..n).filter(|&c| h.get(r, c)).map(|c| c + 1).collect())
        .collect();
    let dmax_col = col_idx.iter().map(Vec::len).max().unwrap_or(0);
    let dmax_row = row_idx.iter().map(Vec::len).max().unwrap_or(0);

    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let padded = |v: &Vec<usize>, dmax: usize| {
        let mut ext = v.clone();
        ext.resize(dmax, 0);
        join(&ext)
    };

    let mut out = String::new();
    out.push_str(&format!("{n} {m}\n"));
    out.push_str(&format!("{dmax_col} {dmax_row}\n"));
    out.push_str(&format!("{}\n", join(&col_idx.iter().map(Vec::len).collect::<Vec<_>>())));
    out.push_str(&format!("{}\n", join(&row_idx.iter().map(Vec::len).collect::<Vec<_>>())));
    for c in &col_idx {
        out.push_str(&format!("{}\n", padded(c, dmax_col)));
    }
    for r in &row_idx {
        out.push_str(&format!("{}\n", padded(r, dmax_row)));
    }
    out
}

/// Parse an alist document into a parity-check matrix.
pub fn read_alist(text: &str) -> Result<BinaryMatrix, AlistError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut lineno = 0usize;
    let mut ints = |expect_at_least: usize| -> Result<Vec<usize>, AlistError> {
        let raw = lines.get(lineno).ok_or(AlistError::Truncated {
            expected: lineno + 1,
            found: lines.len(),
        })?;
        lineno += 1;
        let vals: Result<Vec<usize>, _> = raw.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|e| AlistError::Parse {
            line: lineno,
            msg: format!("bad integer: {e}"),
        })?;
        if vals.len() < expect_at_least {
            return Err(AlistError::Parse {
                line: lineno,
                msg: format!("expected ≥{expect_at_least} values, got {}", vals.len()),
            });
        }
        Ok(vals)
    };

    let header = ints(2)?;
    let (n, m) = (header[0], header[1]);
    let _maxdeg = ints(2)?;
    let col_deg = ints(n)?;
    let row_deg = ints(m)?;

    let mut h = BinaryMatrix::zeros(m, n);
    for (c, &deg) in col_deg.iter().enumerate() {
        let idx = ints(0)?;
        for &r in idx.iter().filter(|&&v| v != 0) {
            if r > m {
                return Err(AlistError::Parse {
                    line: lineno,
                    msg: format!("row index {r} out of range 1..={m}"),
                });
            }
            h.set(r - 1, c, true);
        }
        let ones = idx.iter().filter(|&&v| v != 0).count();
        if ones != deg {
            return Err(AlistError::Parse {
                line: lineno,
                msg: format!("column {c} lists {ones} indices but declares degree {deg}"),
            });
        }
    }
    // per-row lists are redundant with the column lists; validate consistency
    for (r, &deg) in row_deg.iter().enumerate() {
        let idx = ints(0)?;
        let mut found = 0;
        for &c in idx.iter().filter(|&&v| v != 0) {
            if c > n || !h.get(r, c - 1) {
                return Err(AlistError::Parse {
                    line: lineno,
                    msg: format!("row {r} index {c} disagrees with column lists"),
                });
            }
            found += 1;
        }
        if found != deg {
            return Err(AlistError::Parse {
                line: lineno,
                msg: format!("row {r} lists {found} indices but declares degree {deg}"),
            });
        }
    }
    Ok(h)
}
