//! CSV tables and plain-text run summaries.

use std::io::Write;

use crate::error::{Error, Result};
use crate::verification::studies::StudyRow;

pub const STUDY_COLUMNS: [&str; 8] = [
    "level",
    "dofs",
    "eta_K_tot",
    "eta_dK_tot",
    "error",
    "dual_gap",
    "effectivity",
    "bridge_ratio",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Domain(format!("CSV output failed: {other:?}")),
    }
}

/// Study table; `extra` appends named integer columns (e.g. marked counts).
pub fn write_study_csv<W: Write>(w: W, rows: &[StudyRow], extra: Option<(&str, &[usize])>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = STUDY_COLUMNS.to_vec();
    header.push("uzawa_iterations");
    if let Some((name, _)) = extra {
        header.push(name);
    }
    out.write_record(&header).map_err(csv_err)?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec = vec![
            r.level.to_string(),
            r.dofs.to_string(),
            fmt_float(r.eta_k_tot),
            fmt_float(r.eta_dk_tot),
            opt(r.error),
            opt(r.dual_gap),
            r.effectivity.map(|e| e.to_string()).unwrap_or_default(),
            opt(r.bridge_ratio),
            r.uzawa_iterations.to_string(),
        ];
        if let Some((_, vals)) = extra {
            rec.push(vals.get(i).map(|v| v.to_string()).unwrap_or_default());
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Parsed CSV: header and rows of raw cells.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// Observed rates `−log(q_{l+1}/q_l) / log(N_{l+1}/N_l) · 2`, i.e. with
/// respect to `h ~ N^{-1/2}`.
pub fn rates_vs_dofs(rows: &[StudyRow], q: impl Fn(&StudyRow) -> Option<f64>) -> Vec<Option<f64>> {
    rows.windows(2)
        .map(|w| {
            let (a, b) = (q(&w[0])?, q(&w[1])?);
            (a > 0.0 && b > 0.0).then(|| -2.0 * (b / a).ln() / (w[1].dofs as f64 / w[0].dofs as f64).ln())
        })
        .collect()
}

/// Human-readable table written under the configuration header.
pub fn format_table(rows: &[StudyRow]) -> String {
    let mut s = format!(
        "{:>5} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>7}\n",
        "level", "dofs", "eta_K", "eta_dK", "error", "dual_gap", "effectivity", "bridge", "uzawa"
    );
    let o = |v: Option<f64>| v.map(|x| format!("{x:12.4e}")).unwrap_or_else(|| format!("{:>12}", "-"));
    for r in rows {
        let eff = match r.effectivity {
            Some(e) => match e.value() {
                Some(v) => format!("{v:12.4}"),
                None => format!("{:>12}", e.to_string()),
            },
            None => format!("{:>12}", "-"),
        };
        s += &format!(
            "{:>5} {:>8} {:12.4e} {:12.4e} {} {} {} {} {:>7}\n",
            r.level,
            r.dofs,
            r.eta_k_tot,
            r.eta_dk_tot,
            o(r.error),
            o(r.dual_gap),
            eff,
            o(r.bridge_ratio),
            r.uzawa_iterations
        );
    }
    s
}

/// Prefixes every line of `text` with `# `.
pub fn commented(text: &str) -> String {
    text.lines().map(|l| format!("# {l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::studies::Effectivity;

    fn row(level: usize, dofs: usize, err: f64) -> StudyRow {
        StudyRow {
            level,
            dofs,
            eta_k_tot: 0.1 + err,
            eta_dk_tot: 1.0 / 3.0,
            error: Some(err),
            dual_gap: None,
            effectivity: Some(Effectivity::new(0.1, err)),
            bridge_ratio: None,
            uzawa_iterations: 7,
        }
    }

    #[test]
    fn csv_round_trips_with_full_precision() {
        let rows = vec![row(1, 48, 0.25), row(2, 192, 0.125), row(3, 768, 0.0)];
        let mut buf = Vec::new();
        write_study_csv(&mut buf, &rows, Some(("marked", &[3, 5][..]))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let (h, r) = read_csv(&text).unwrap();
        assert_eq!(&h[..8], &STUDY_COLUMNS.map(String::from)[..]);
        assert_eq!(h.last().unwrap(), "marked");
        assert_eq!(r.len(), 3);
        assert_eq!(r[0][3].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(r[0][5], "");
        assert_eq!(r[2][6], "inf");
        assert_eq!(r[2][9], "");
        assert_eq!(fmt_float(0.1).len(), "1.0000000000000001e-1".len());
    }

    #[test]
    fn rates_of_halving_error_on_quadrupled_dofs() {
        let rows = vec![row(1, 48, 0.25), row(2, 192, 0.125), row(3, 768, 0.0)];
        let r = rates_vs_dofs(&rows, |r| r.error);
        assert!((r[0].unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(r[1], None);
    }
}
