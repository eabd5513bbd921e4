//! Parity-check export in the alist layout (MacKay's sparse text format):
//!
//! ```text
//! n m
//! max_column_degree max_row_degree
//! column degrees (n values)
//! row degrees (m values)
//! n lines: 1-based check indices of each column, zero padded
//! m lines: 1-based variable indices of each row, zero padded
//! ```

use std::fmt::Write as _;

use dprx_core::ldpc::LdpcCode;

pub fn to_alist(code: &LdpcCode) -> String {
    let n = code.n();
    let m = code.checks();
    let cols: Vec<Vec<usize>> = (0..n).map(|v| code.variable(v)).collect();
    let rows: Vec<Vec<usize>> = (0..m)
        .map(|c| code.check(c).iter().map(|&v| v as usize).collect())
        .collect();
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = rows.iter().map(Vec::len).max().unwrap_or(0);

    let mut s = String::new();
    let _ = writeln!(s, "{n} {m}");
    let _ = writeln!(s, "{max_col} {max_row}");
    let degrees = |lists: &[Vec<usize>]| {
        lists
            .iter()
            .map(|l| l.len().to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "{}", degrees(&cols));
    let _ = writeln!(s, "{}", degrees(&rows));
    for (lists, width) in [(&cols, max_col), (&rows, max_row)] {
        for l in lists {
            let mut line: Vec<String> = l.iter().map(|i| (i + 1).to_string()).collect();
            line.resize(width, "0".to_string());
            let _ = writeln!(s, "{}", line.join(" "));
        }
    }
    s
}
