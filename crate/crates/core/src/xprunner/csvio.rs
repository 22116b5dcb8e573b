//! Sweep CSV emission and parsing.

use std::io::Write;
use std::path::Path;

use super::run::{SweepResult, SweepRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = [
    "power_dbm",
    "config",
    "air_bits",
    "std_err",
    "snr_eff_db",
    "blocks",
    "seed",
];

/// Formats `v` with 6 significant digits in the style of C's `%g`.
pub fn format_g6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One parsed CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub power_dbm: f64,
    pub config: String,
    pub air_bits: f64,
    pub std_err: f64,
    pub snr_eff_db: f64,
    pub blocks: usize,
    pub seed: u64,
}

impl From<&SweepRow> for CsvRow {
    fn from(r: &SweepRow) -> Self {
        CsvRow {
            power_dbm: r.power_dbm,
            config: r.config.clone(),
            air_bits: r.air_bits,
            std_err: r.std_err,
            snr_eff_db: r.snr_eff_db,
            blocks: r.blocks,
            seed: r.seed,
        }
    }
}

fn write_rows<W: Write>(rows: &[CsvRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            format_g6(r.power_dbm),
            r.config.clone(),
            format_g6(r.air_bits),
            format_g6(r.std_err),
            format_g6(r.snr_eff_db),
            r.blocks.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn sorted_rows(result: &SweepResult) -> Vec<CsvRow> {
    let mut rows: Vec<CsvRow> = result.rows.iter().map(CsvRow::from).collect();
    rows.sort_by(|a, b| {
        a.power_dbm
            .total_cmp(&b.power_dbm)
            .then_with(|| a.config.cmp(&b.config))
    });
    rows
}

/// CSV text of a sweep, power ascending then label.
pub fn csv_string(result: &SweepResult) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&sorted_rows(result), &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(&sorted_rows(result), std::io::BufWriter::new(file))
}

/// Parses sweep CSV text; the header must match [`CSV_HEADER`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidArgument(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("bad {what} value '{s}'")))
    };
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(CsvRow {
                power_dbm: num(&rec[0], "power_dbm")?,
                config: rec[1].to_string(),
                air_bits: num(&rec[2], "air_bits")?,
                std_err: num(&rec[3], "std_err")?,
                snr_eff_db: num(&rec[4], "snr_eff_db")?,
                blocks: rec[5].trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad blocks value '{}'", &rec[5]))
                })?,
                seed: rec[6]
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad seed value '{}'", &rec[6])))?,
            })
        })
        .collect()
}

/// Wide table for plotting: one `air_<label>` and `err_<label>` column pair
/// per technique, one line per power, followed by `#`-prefixed peak lines.
pub fn plot_table(rows: &[CsvRow]) -> String {
    let mut labels: Vec<&str> = rows.iter().map(|r| r.config.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut powers: Vec<f64> = rows.iter().map(|r| r.power_dbm).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    let mut out = String::from("power_dbm");
    for l in &labels {
        out.push_str(&format!(",air_{l},err_{l}"));
    }
    out.push('\n');
    for p in &powers {
        out.push_str(&format_g6(*p));
        for l in &labels {
            match rows.iter().find(|r| r.power_dbm == *p && r.config == *l) {
                Some(r) => out.push_str(&format!(
                    ",{},{}",
                    format_g6(r.air_bits),
                    format_g6(r.std_err)
                )),
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    for l in &labels {
        let peak = rows
            .iter()
            .filter(|r| r.config == *l && r.air_bits.is_finite())
            .max_by(|a, b| a.air_bits.total_cmp(&b.air_bits));
        if let Some(r) = peak {
            out.push_str(&format!(
                "# peak {l}: {} bits/sym/pol at {} dBm (± {})\n",
                format_g6(r.air_bits),
                format_g6(r.power_dbm),
                format_g6(r.std_err)
            ));
        }
    }
    out
}
