//! CSV and SVG artifacts, written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write to a temporary file in the target directory, then rename over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let io = |source| OutputError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Header plus rows of preformatted fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, OutputError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| OutputError::Io { path: PathBuf::from("<memory>"), source: e.into_error() })
    }
}

const WIDTH: f64 = 1024.0;
const HEIGHT: f64 = 768.0;
const MARGIN: f64 = 72.0;

/// Scatter points and polylines on a single pair of axes.
#[derive(Debug, Clone, Default)]
pub struct SvgPlot {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub points: Vec<(f64, f64)>,
    pub lines: Vec<Vec<(f64, f64)>>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl SvgPlot {
    pub fn render(&self) -> String {
        let all = || self.points.iter().chain(self.lines.iter().flatten());
        let (x0, x1) = bounds(all().map(|p| p.0));
        let (y0, y1) = bounds(all().map(|p| p.1));
        let pw = WIDTH - 2.0 * MARGIN;
        let ph = HEIGHT - 2.0 * MARGIN;
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;
        let ok = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
        );
        let text = |s: &mut String, x: f64, y: f64, anchor: &str, body: &str| {
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="14" text-anchor="{anchor}">{}</text>"#,
                escape(body)
            );
        };
        text(&mut s, WIDTH / 2.0, MARGIN / 2.0, "middle", &self.title);
        text(&mut s, WIDTH / 2.0, HEIGHT - 20.0, "middle", &self.xlabel);
        text(&mut s, 20.0, HEIGHT / 2.0, "start", &self.ylabel);
        text(&mut s, MARGIN, HEIGHT - MARGIN + 20.0, "start", &format!("{x0:.4}"));
        text(&mut s, WIDTH - MARGIN, HEIGHT - MARGIN + 20.0, "end", &format!("{x1:.4}"));
        text(&mut s, MARGIN - 6.0, HEIGHT - MARGIN, "end", &format!("{y0:.4}"));
        text(&mut s, MARGIN - 6.0, MARGIN + 10.0, "end", &format!("{y1:.4}"));

        for line in &self.lines {
            let pts: Vec<String> = line.iter().filter(ok).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            if pts.len() >= 2 {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="steelblue" stroke-width="1" stroke-opacity="0.6" points="{}"/>"#,
                    pts.join(" ")
                );
            }
        }
        for &(x, y) in self.points.iter().filter(ok) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.2" fill="black"/>"#, sx(x), sy(y));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 5e-324, -0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(["a", "b"]);
        assert_eq!(t.to_csv().unwrap(), b"a,b\r\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/x.csv"), b"").is_err());
    }

    #[test]
    fn svg_has_fixed_viewbox_and_one_circle_per_point() {
        let plot = SvgPlot { points: vec![(0.0, 1.0), (0.5, 2.0), (1.0, f64::NAN)], ..Default::default() };
        let s = plot.render();
        assert!(s.contains(r#"viewBox="0 0 1024 768""#));
        assert_eq!(s.matches("<circle").count(), 2);
    }
}
