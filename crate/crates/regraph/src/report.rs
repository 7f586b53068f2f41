//! Similarity report output.

use std::path::Path;

use regraph_core::rank::{ReportRow, RowFlags, SimilarityReport};

use crate::error::{Error, Result};
use crate::fsutil;

pub const CSV_HEADER: [&str; 6] = [
    "target_function",
    "rank",
    "candidate_function",
    "candidate_address",
    "score",
    "flags",
];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::malformed(path, e)
}

pub fn report_to_csv(report: &SimilarityReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in &report.rows {
        w.write_record([
            r.target_function.as_str(),
            &r.rank.to_string(),
            &r.candidate_function,
            &r.candidate_address,
            &format!("{:.3}", r.score),
            &r.flags.to_field(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub fn write_csv(report: &SimilarityReport, path: &Path) -> Result<()> {
    fsutil::write_file(path, report_to_csv(report).as_bytes())
}

/// Parses a report CSV. Scores come back at the printed precision.
pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::malformed(path, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| Error::malformed(path, format!("bad {what} in {rec:?}"));
        rows.push(ReportRow {
            target_function: field(0).to_string(),
            rank: field(1).parse().map_err(|_| bad("rank"))?,
            candidate_function: field(2).to_string(),
            candidate_address: field(3).to_string(),
            score: field(4).parse().map_err(|_| bad("score"))?,
            flags: RowFlags::parse(field(5)).ok_or_else(|| bad("flags"))?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    parse_csv(&fsutil::read_to_string(path)?, path)
}

#[cfg(feature = "xlsx")]
pub fn write_xlsx(report: &SimilarityReport, path: &Path) -> Result<()> {
    use rust_xlsxwriter::{Format, Workbook};

    let to_err = |e: rust_xlsxwriter::XlsxError| Error::malformed(path, e);
    let mut book = Workbook::new();
    let sheet = book.add_worksheet();
    sheet.set_name("matches").map_err(to_err)?;
    let score_fmt = Format::new().set_num_format("0.000");
    for (c, h) in CSV_HEADER.iter().enumerate() {
        sheet.write_string(0, c as u16, *h).map_err(to_err)?;
    }
    for (i, r) in report.rows.iter().enumerate() {
        let row = i as u32 + 1;
        sheet.write_string(row, 0, &r.target_function).map_err(to_err)?;
        sheet.write_number(row, 1, r.rank as f64).map_err(to_err)?;
        sheet
            .write_string(row, 2, &r.candidate_function)
            .map_err(to_err)?;
        sheet.write_string(row, 3, &r.candidate_address).map_err(to_err)?;
        sheet
            .write_number_with_format(row, 4, r.score, &score_fmt)
            .map_err(to_err)?;
        sheet.write_string(row, 5, r.flags.to_field()).map_err(to_err)?;
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    book.save(path).map_err(to_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(score: f64, flags: RowFlags) -> ReportRow {
        ReportRow {
            target_function: "__time_sub".into(),
            rank: 1,
            candidate_function: "function_154".into(),
            candidate_address: "154".into(),
            score,
            flags,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let text = report_to_csv(&SimilarityReport::default());
        assert_eq!(
            text,
            "target_function,rank,candidate_function,candidate_address,score,flags\n"
        );
        assert!(parse_csv(&text, Path::new("r")).unwrap().is_empty());
    }

    #[test]
    fn three_decimal_scores() {
        let rep = SimilarityReport {
            rows: vec![row(0.92149, RowFlags::default())],
            ..Default::default()
        };
        let text = report_to_csv(&rep);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1), Some("__time_sub,1,function_154,154,0.921,"));
    }

    #[test]
    fn round_trip() {
        let flags = RowFlags {
            oversized: true,
            zero_variance: true,
        };
        let rep = SimilarityReport {
            rows: vec![row(0.5, RowFlags::default()), row(-2.0, flags)],
            ..Default::default()
        };
        let text = report_to_csv(&rep);
        let back = parse_csv(&text, Path::new("r")).unwrap();
        assert_eq!(back, rep.rows);
    }
}
