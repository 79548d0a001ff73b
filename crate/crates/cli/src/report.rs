//! CSV emission and read-back for sweep results.
//!
//! The artifact is a UTF-8 CSV with one `#` metadata line carrying the
//! configuration digest and seed, a fixed header matching the row field
//! names, and numbers printed with 10 significant digits. Identical
//! configurations produce byte-identical files.

use crate::sweep::SweepRow;
use crate::CliError;
use std::fs;
use std::path::Path;

/// Fixed column order, matching the `SweepRow` field names.
pub const CSV_HEADER: &str = "distance_km,m_total,eps_pra,eps_est,t_pra,t_est,i_ab,s_be,\
                              delta_n,k_est_raw,k_est,k_pra_raw,k_pra,gap,error";

/// 10 significant digits, scientific notation.
fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

/// Render the full CSV document as a string.
pub fn render_report(
    rows: &[SweepRow],
    config_digest: &str,
    seed: u64,
) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Validation(
            "cannot emit a report with no rows".into(),
        ));
    }
    let mut out = String::new();
    out.push_str(&format!("# config_digest={config_digest} seed={seed}\n"));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let error = match &r.error {
            None => String::new(),
            // keep the CSV one-record-per-line
            Some(e) => e.replace([',', '\n'], ";"),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{error}\n",
            fmt(r.distance_km),
            fmt(r.m_total),
            fmt(r.eps_pra),
            fmt(r.eps_est),
            fmt(r.t_pra),
            fmt(r.t_est),
            fmt(r.i_ab),
            fmt(r.s_be),
            fmt(r.delta_n),
            fmt(r.k_est_raw),
            fmt(r.k_est),
            fmt(r.k_pra_raw),
            fmt(r.k_pra),
            fmt(r.gap),
        ));
    }
    Ok(out)
}

/// Write the CSV artifact to `path`.
pub fn emit_report(
    rows: &[SweepRow],
    config_digest: &str,
    seed: u64,
    path: &Path,
) -> Result<(), CliError> {
    let text = render_report(rows, config_digest, seed)?;
    fs::write(path, text)?;
    Ok(())
}

/// Parse a CSV document produced by [`render_report`]. Returns the
/// configuration digest, the seed and the rows.
pub fn parse_report(text: &str) -> Result<(String, u64, Vec<SweepRow>), CliError> {
    let bad = |msg: String| CliError::Validation(msg);
    let mut lines = text.lines();
    let meta = lines
        .next()
        .ok_or_else(|| bad("empty report".into()))?
        .strip_prefix("# config_digest=")
        .ok_or_else(|| bad("missing metadata line".into()))?;
    let (digest, seed_str) = meta
        .split_once(" seed=")
        .ok_or_else(|| bad("missing seed in metadata line".into()))?;
    let seed = seed_str
        .parse()
        .map_err(|e| bad(format!("bad seed in metadata line: {e}")))?;
    let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
    if header != CSV_HEADER {
        return Err(bad(format!("unexpected header: {header}")));
    }

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.splitn(15, ',').collect();
        if fields.len() != 15 {
            return Err(bad(format!(
                "row {i}: expected 15 fields, got {}",
                fields.len()
            )));
        }
        let num = |j: usize| -> Result<f64, CliError> {
            fields[j]
                .parse()
                .map_err(|e| bad(format!("row {i} field {j}: {e}")))
        };
        rows.push(SweepRow {
            distance_km: num(0)?,
            m_total: num(1)?,
            eps_pra: num(2)?,
            eps_est: num(3)?,
            t_pra: num(4)?,
            t_est: num(5)?,
            i_ab: num(6)?,
            s_be: num(7)?,
            delta_n: num(8)?,
            k_est_raw: num(9)?,
            k_est: num(10)?,
            k_pra_raw: num(11)?,
            k_pra: num(12)?,
            gap: num(13)?,
            error: if fields[14].is_empty() {
                None
            } else {
                Some(fields[14].to_string())
            },
        });
    }
    Ok((digest.to_string(), seed, rows))
}
