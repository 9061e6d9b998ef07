//! Standalone SVG line plots for spectrum and RMSE CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const SPECTRUM_HEADER: &str = "angle_deg,spectrum_db";
const RMSE_HEADER: &str = "snr_db,geometry,method,rmse_deg,trials";
/// RMSE values of exactly zero are drawn at this floor on the log axis.
const LOG_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            width: 720.0,
            height: 440.0,
            title: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Csv(format!("line {line}: `{field}` is not a number")))
}

/// Reads a spectrum or RMSE CSV produced by the experiment harness.
pub fn parse_csv(text: &str, title: &str) -> Result<Figure> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Csv("empty file".into()))?;
    match header.trim() {
        SPECTRUM_HEADER => {
            let mut points = Vec::new();
            for (i, line) in lines {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 2 {
                    return Err(Error::Csv(format!("line {}: expected 2 fields", i + 1)));
                }
                points.push((parse_f64(f[0], i + 1)?, parse_f64(f[1], i + 1)?));
            }
            if points.is_empty() {
                return Err(Error::Csv("no data rows".into()));
            }
            Ok(Figure {
                title: title.to_string(),
                x_label: "angle (deg)".into(),
                y_label: "spectrum (dB)".into(),
                log_y: false,
                series: vec![Series {
                    label: title.to_string(),
                    points,
                }],
            })
        }
        RMSE_HEADER => {
            let mut series: Vec<Series> = Vec::new();
            for (i, line) in lines {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(Error::Csv(format!("line {}: expected 5 fields", i + 1)));
                }
                let label = format!("{} {}", f[2].trim(), f[1].trim());
                let point = (parse_f64(f[0], i + 1)?, parse_f64(f[3], i + 1)?);
                match series.iter_mut().find(|s| s.label == label) {
                    Some(s) => s.points.push(point),
                    None => series.push(Series {
                        label,
                        points: vec![point],
                    }),
                }
            }
            if series.is_empty() {
                return Err(Error::Csv("no data rows".into()));
            }
            Ok(Figure {
                title: title.to_string(),
                x_label: "SNR (dB)".into(),
                y_label: "RMSE (deg)".into(),
                log_y: true,
                series,
            })
        }
        other => Err(Error::Csv(format!("unrecognized header `{other}`"))),
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 3.0 {
        3.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e-3 && v.abs() < 1e4 || v == 0.0 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a figure as a self-contained SVG document.
pub fn render_svg(fig: &Figure, spec: &PlotSpec) -> String {
    let (w, h) = (spec.width, spec.height);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 55.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let ty = |v: f64| if fig.log_y { v.max(LOG_FLOOR).log10() } else { v };
    let all: Vec<(f64, f64)> = fig
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (x, ty(y))))
        .collect();
    let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if fig.log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let title = spec.title.as_deref().unwrap_or(&fig.title);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );

    for t in linear_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 16.0,
            fmt_tick(t)
        );
    }
    let y_ticks: Vec<f64> = if fig.log_y {
        (y0 as i64..=y1 as i64).map(|e| e as f64).collect()
    } else {
        linear_ticks(y0, y1)
    };
    for t in y_ticks {
        let y = sy(t);
        let label = if fig.log_y { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0,
            label
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        escape(&fig.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(&fig.y_label)
    );

    for (i, s) in fig.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(ty(y))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let lx = left + pw - 190.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders `csv` to `<out_dir>/<stem>.svg`.
pub fn emit_plot(csv: &Path, out_dir: &Path, spec: &PlotSpec) -> Result<PathBuf> {
    let text = fs::read_to_string(csv)?;
    let stem = csv
        .file_stem()
        .map_or_else(|| "plot".to_string(), |s| s.to_string_lossy().into_owned());
    let fig = parse_csv(&text, &stem)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{stem}.svg"));
    fs::write(&path, render_svg(&fig, spec))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_csv_gives_one_series() {
        let fig = parse_csv("angle_deg,spectrum_db\n-1,-3\n0,0\n1,-4\n", "s").unwrap();
        assert_eq!(fig.series.len(), 1);
        assert_eq!(fig.series[0].points.len(), 3);
        let svg = render_svg(&fig, &PlotSpec::default());
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn rmse_csv_groups_series() {
        let text = "snr_db,geometry,method,rmse_deg,trials\n\
                    -10,ula-6,real-kr,2.5,10\n0,ula-6,real-kr,0.4,10\n\
                    -10,nested-3-3,real-kr,0.9,10\n0,nested-3-3,real-kr,0,10\n";
        let fig = parse_csv(text, "rmse").unwrap();
        assert!(fig.log_y);
        assert_eq!(fig.series.len(), 2);
        let svg = render_svg(&fig, &PlotSpec::default());
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("real-kr nested-3-3"));
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(matches!(parse_csv("", "x"), Err(Error::Csv(_))));
        assert!(parse_csv("angle_deg,spectrum_db\n", "x").is_err());
        assert!(parse_csv("angle_deg,spectrum_db\n1,abc\n", "x").is_err());
        assert!(parse_csv("a,b\n1,2\n", "x").is_err());
    }

    #[test]
    fn writes_file_next_to_stem() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("spectrum_ula-6_real-kr.csv");
        fs::write(&csv, "angle_deg,spectrum_db\n0,0\n1,-1\n").unwrap();
        let out = emit_plot(&csv, dir.path(), &PlotSpec::default()).unwrap();
        assert_eq!(out.file_name().unwrap(), "spectrum_ula-6_real-kr.svg");
        assert!(fs::read_to_string(out).unwrap().contains("spectrum (dB)"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(linear_ticks(-90.0, 90.0), vec![-90.0, -60.0, -30.0, 0.0, 30.0, 60.0, 90.0]);
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(30.0), "30");
    }
}
