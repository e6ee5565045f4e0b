//! File formats: two-column CSV tables, the binary channel-response matrix,
//! and the fixed float formatting used by every CSV writer.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::metrics::ChannelResponseSet;

/// Magic bytes opening a channel-response file.
pub const CHANNEL_FILE_MAGIC: [u8; 8] = *b"HLCCHR01";
/// Header size of a channel-response file in bytes.
pub const CHANNEL_FILE_HEADER: usize = 32;

/// Read a two-column numeric CSV with the given header names. Lines starting
/// with `#` are comments.
pub fn read_pair_table(text: &str, col_a: &str, col_b: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::input(format!("csv header: {e}")))?
        .clone();
    let ia = headers
        .iter()
        .position(|h| h == col_a)
        .ok_or_else(|| Error::input(format!("csv is missing column '{col_a}'")))?;
    let ib = headers
        .iter()
        .position(|h| h == col_b)
        .ok_or_else(|| Error::input(format!("csv is missing column '{col_b}'")))?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::input(format!("csv row {}: {e}", line + 1)))?;
        let parse = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| Error::input(format!("csv row {}: '{field}' is not a number", line + 1)))
        };
        out.push((parse(ia)?, parse(ib)?));
    }
    Ok(out)
}

/// Format with 9 significant digits, `%g` style, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

/// CSV `index,cf_hz`.
pub fn cfs_to_csv(cfs: &[f64]) -> String {
    let mut s = String::from("index,cf_hz\n");
    for (i, cf) in cfs.iter().enumerate() {
        s.push_str(&format!("{i},{}\n", fmt_sig(*cf)));
    }
    s
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Write a channel-response matrix: 32-byte header
/// `{magic[8], K: u64, T: u64, sample_rate: f64}` followed by `K * T`
/// row-major `f32` values, all little-endian.
pub fn write_channel_responses<W: Write>(set: &ChannelResponseSet, mut w: W) -> std::io::Result<()> {
    let (k, t) = set.shape();
    w.write_all(&CHANNEL_FILE_MAGIC)?;
    w.write_all(&(k as u64).to_le_bytes())?;
    w.write_all(&(t as u64).to_le_bytes())?;
    w.write_all(&set.sample_rate.to_le_bytes())?;
    for row in set.rows() {
        for &v in row {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_channel_responses<R: Read>(mut r: R) -> Result<ChannelResponseSet> {
    let mut header = [0u8; CHANNEL_FILE_HEADER];
    r.read_exact(&mut header)
        .map_err(|e| Error::input(format!("channel file header: {e}")))?;
    if header[..8] != CHANNEL_FILE_MAGIC {
        return Err(Error::input("not a channel-response file (bad magic)"));
    }
    let word = |i: usize| -> [u8; 8] { header[i..i + 8].try_into().expect("8 bytes") };
    let k = u64::from_le_bytes(word(8)) as usize;
    let t = u64::from_le_bytes(word(16)) as usize;
    let sample_rate = f64::from_le_bytes(word(24));
    let count = k
        .checked_mul(t)
        .ok_or_else(|| Error::input("channel file dimensions overflow"))?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)
        .map_err(|e| Error::input(format!("channel file body: {e}")))?;
    if raw.len() != count * 4 {
        return Err(Error::input(format!(
            "channel file body has {} bytes, expected {} for {k} x {t}",
            raw.len(),
            count * 4
        )));
    }
    let data: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    ChannelResponseSet::new(data, k, t, sample_rate)
}
