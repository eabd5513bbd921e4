//! Result rows and their CSV form.

use std::fmt;
use std::io::Write;
use std::path::Path;

use anyhow::Context;

pub const CSV_HEADER: [&str; 11] = [
    "receiver",
    "snr_db",
    "channel",
    "user",
    "bit_errors",
    "bits",
    "block_errors",
    "blocks",
    "ber",
    "bler",
    "wall_time_s",
];

/// User column of a row: one user, or all users of the channel pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UserScope {
    User(usize),
    All,
}

impl fmt::Display for UserScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::User(k) => write!(f, "{k}"),
            Self::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub receiver: String,
    pub snr_db: f64,
    pub channel: usize,
    pub user: UserScope,
    pub bit_errors: u64,
    pub bits: u64,
    pub block_errors: u64,
    pub blocks: u64,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.bits)
    }

    pub fn bler(&self) -> f64 {
        ratio(self.block_errors, self.blocks)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Decimal rendering with at most 10 significant digits, trailing zeros
/// trimmed.
pub fn format_sig10(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x == 0.0 {
            "0".into()
        } else {
            format!("{x}")
        };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (9 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (9.99... -> 10.0).
    let digits = s
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count();
    if digits > 10 && decimals > 0 {
        s = format!("{x:.prec$}", prec = decimals - 1);
    }
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.receiver.clone(),
            format_sig10(r.snr_db),
            r.channel.to_string(),
            r.user.to_string(),
            r.bit_errors.to_string(),
            r.bits.to_string(),
            r.block_errors.to_string(),
            r.blocks.to_string(),
            format_sig10(r.ber()),
            format_sig10(r.bler()),
            format_sig10(r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the header and one line per record, creating parent directories.
pub fn emit_csv(records: &[ResultRecord], path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let file =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(records, std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))
}

/// Reads a file written by [`emit_csv`]; checks the header and that the
/// stored ratios agree with the counts.
pub fn read_csv(path: &Path) -> anyhow::Result<Vec<ResultRecord>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == CSV_HEADER, "unexpected header {header:?}");
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |j: usize| row.get(j).unwrap_or_default();
        let user = match field(3) {
            "all" => UserScope::All,
            v => UserScope::User(v.parse()?),
        };
        let rec = ResultRecord {
            receiver: field(0).to_string(),
            snr_db: field(1).parse()?,
            channel: field(2).parse()?,
            user,
            bit_errors: field(4).parse()?,
            bits: field(5).parse()?,
            block_errors: field(6).parse()?,
            blocks: field(7).parse()?,
            wall_time_s: field(10).parse()?,
        };
        let ber: f64 = field(8).parse()?;
        anyhow::ensure!(
            (ber - rec.ber()).abs() <= 1e-9 * rec.ber().max(1e-300),
            "row {}: ber {ber} disagrees with counts",
            i + 1
        );
        out.push(rec);
    }
    Ok(out)
}

/// Pooled counts over every row matching `receiver`, `snr_db` and the
/// per-channel "all users" scope.
pub fn pooled(records: &[ResultRecord], receiver: &str, snr_db: f64) -> Option<(u64, u64)> {
    let rows: Vec<&ResultRecord> = records
        .iter()
        .filter(|r| r.receiver == receiver && r.snr_db == snr_db && r.user == UserScope::All)
        .collect();
    if rows.is_empty() {
        return None;
    }
    Some(
        rows.iter()
            .fold((0, 0), |(e, b), r| (e + r.bit_errors, b + r.bits)),
    )
}
