//! Text dump of a lookup table together with its channel.
//!
//! ```text
//! dprx-lookup-table 1
//! users 3
//! antennas 6
//! alpha_s 4
//! alpha_x 4
//! precoder mmse_exhaustive
//! channel_fingerprint 5f0c...        (16 hex digits)
//! h 0 0 <re> <im>                     (one line per channel entry, row-major)
//! ...
//! keys 64
//! 0 3 1 2 0 1                         (transmit indices of key 0, antenna 0 first)
//! ...
//! ```
//!
//! Keys are K-digit base-`alpha_s` numbers with user 0 as the most
//! significant digit. Channel values use the shortest decimal form that
//! round-trips exactly, so a loaded channel reproduces the fingerprint.

use std::fmt::Write as _;

use anyhow::{bail, ensure, Context};
use dprx_core::channel::ChannelMatrix;
use dprx_core::precoder::{LookupTable, TableMeta};
use dprx_core::Complex64;

use crate::config::parse_precoder;

const MAGIC: &str = "dprx-lookup-table 1";

pub fn dump_table(table: &LookupTable, h: &ChannelMatrix) -> String {
    let meta = table.meta();
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "users {}", meta.users);
    let _ = writeln!(s, "antennas {}", meta.antennas);
    let _ = writeln!(s, "alpha_s {}", meta.alpha_s);
    let _ = writeln!(s, "alpha_x {}", meta.alpha_x);
    let _ = writeln!(s, "precoder {}", meta.precoder);
    let _ = writeln!(s, "channel_fingerprint {:016x}", meta.channel_fingerprint);
    for k in 0..h.users() {
        for b in 0..h.antennas() {
            let v = h.get(k, b);
            let _ = writeln!(s, "h {k} {b} {:?} {:?}", v.re, v.im);
        }
    }
    let _ = writeln!(s, "keys {}", table.len());
    for key in 0..table.len() {
        let line: Vec<String> = table.entry(key).iter().map(u8::to_string).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

struct Lines<'a> {
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: Box::new(
                text.lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty()),
            ),
        }
    }

    /// Next non-empty line as `(1-based line number, tokens)`.
    fn next(&mut self, what: &str) -> anyhow::Result<(usize, Vec<&'a str>)> {
        let (i, l) = self
            .inner
            .next()
            .with_context(|| format!("unexpected end of file, expected {what}"))?;
        Ok((i + 1, l.split_whitespace().collect()))
    }

    fn field(&mut self, name: &str) -> anyhow::Result<&'a str> {
        let (line, parts) = self.next(name)?;
        ensure!(
            parts.len() == 2 && parts[0] == name,
            "line {line}: expected `{name} <value>`"
        );
        Ok(parts[1])
    }
}

/// Parses a dump, checking the channel against the stored fingerprint.
pub fn load_table(text: &str) -> anyhow::Result<(LookupTable, ChannelMatrix)> {
    let mut lines = Lines::new(text);
    let (_, magic) = lines.next("header")?;
    ensure!(magic.join(" ") == MAGIC, "not a lookup-table dump");
    let users: usize = lines.field("users")?.parse()?;
    let antennas: usize = lines.field("antennas")?.parse()?;
    let alpha_s: usize = lines.field("alpha_s")?.parse()?;
    let alpha_x: usize = lines.field("alpha_x")?.parse()?;
    let precoder = parse_precoder(lines.field("precoder")?).map_err(anyhow::Error::msg)?;
    let fingerprint = u64::from_str_radix(lines.field("channel_fingerprint")?, 16)?;

    let mut entries = Vec::with_capacity(users * antennas);
    for k in 0..users {
        for b in 0..antennas {
            let (line, parts) = lines.next("channel entry")?;
            ensure!(
                parts.len() == 5
                    && parts[0] == "h"
                    && parts[1] == k.to_string()
                    && parts[2] == b.to_string(),
                "line {line}: expected `h {k} {b} <re> <im>`"
            );
            entries.push(Complex64::new(parts[3].parse()?, parts[4].parse()?));
        }
    }
    let h = ChannelMatrix::from_rows(users, antennas, entries)?;
    ensure!(
        h.fingerprint() == fingerprint,
        "channel does not match its fingerprint"
    );

    let keys: usize = lines.field("keys")?.parse()?;
    let mut indices = Vec::with_capacity(keys * antennas);
    for _ in 0..keys {
        let (line, parts) = lines.next("table row")?;
        ensure!(
            parts.len() == antennas,
            "line {line}: expected {antennas} indices"
        );
        for p in parts {
            indices.push(p.parse::<u8>().with_context(|| format!("line {line}"))?);
        }
    }
    if let Ok((line, _)) = lines.next("") {
        bail!("line {line}: trailing content");
    }
    let meta = TableMeta {
        users,
        antennas,
        alpha_s,
        alpha_x,
        precoder,
        channel_fingerprint: fingerprint,
    };
    ensure!(
        meta.keys() == keys,
        "expected {} keys, file declares {keys}",
        meta.keys()
    );
    Ok((LookupTable::from_parts(meta, indices)?, h))
}
