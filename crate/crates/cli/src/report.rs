//! Sweep reports: CSV grid plus a PGM heatmap with the minimizing cell
//! marked.

use std::path::Path;

use lrsim_core::{GrayImage, SweepReport};

use crate::error::{CliError, Result};
use crate::pgm;

/// Pixels per heatmap cell.
pub const HEATMAP_CELL: usize = 16;

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        String::from("inf")
    } else {
        format!("{v}")
    }
}

/// CSV schema: header `model_factor,adjusted_factor,l1`, one row per grid
/// cell (model-major), trailing comment line `# bicubic,<value>`.
pub fn sweep_to_csv(report: &SweepReport) -> String {
    let mut out = String::from("model_factor,adjusted_factor,l1\n");
    for (r, row) in report.losses.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt(report.model_factors[r]),
                fmt(report.adjusted_factors[c]),
                fmt(v)
            ));
        }
    }
    out.push_str(&format!("# bicubic,{}\n", fmt(report.baseline_bicubic)));
    out
}

fn parse_field(field: &str, line: usize) -> Result<f64> {
    if field == "inf" {
        return Ok(f64::INFINITY);
    }
    field
        .trim()
        .parse()
        .map_err(|_| CliError::format(format!("sweep CSV line {line}: bad number {field:?}")))
}

/// Parses the CSV emitted by [`sweep_to_csv`].
pub fn sweep_from_csv(text: &str) -> Result<SweepReport> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "model_factor,adjusted_factor,l1")) => {}
        _ => return Err(CliError::format("sweep CSV: missing header row")),
    }
    let mut model_factors: Vec<f64> = Vec::new();
    let mut adjusted_factors: Vec<f64> = Vec::new();
    let mut losses: Vec<Vec<f64>> = Vec::new();
    let mut baseline = None;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# bicubic,") {
            baseline = Some(parse_field(rest, i + 1)?);
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::format(format!("sweep CSV line {}: want 3 fields", i + 1)));
        }
        let mf = parse_field(fields[0], i + 1)?;
        let af = parse_field(fields[1], i + 1)?;
        let l1 = parse_field(fields[2], i + 1)?;
        if model_factors.last() != Some(&mf) {
            model_factors.push(mf);
            losses.push(Vec::new());
        }
        let row = losses.len() - 1;
        if row == 0 {
            adjusted_factors.push(af);
        } else {
            let col = losses[row].len();
            if adjusted_factors.get(col) != Some(&af) {
                return Err(CliError::format(format!(
                    "sweep CSV line {}: adjusted factor grid is ragged",
                    i + 1
                )));
            }
        }
        losses[row].push(l1);
    }
    let baseline_bicubic =
        baseline.ok_or_else(|| CliError::format("sweep CSV: missing # bicubic line"))?;
    if losses.is_empty() || losses.iter().any(|row| row.len() != adjusted_factors.len()) {
        return Err(CliError::format("sweep CSV: empty or ragged grid"));
    }
    Ok(SweepReport { model_factors, adjusted_factors, losses, baseline_bicubic })
}

pub fn write_sweep_csv(report: &SweepReport, path: &Path) -> Result<()> {
    std::fs::write(path, sweep_to_csv(report)).map_err(|e| CliError::io(path, e))
}

/// Renders the loss grid as a 16-bit PGM: brighter is lower loss, and the
/// minimizing cell carries a one-pixel full-white border.
pub fn heatmap_image(report: &SweepReport) -> GrayImage {
    let rows = report.losses.len();
    let cols = report.adjusted_factors.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in &report.losses {
        for &v in row {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let span = (hi - lo).max(1e-300);
    let (br, bc) = report.argmin();
    let n = HEATMAP_CELL;
    let mut data = vec![0.0; rows * n * cols * n];
    for (r, row) in report.losses.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            // Low loss maps bright, but strictly below the marker value.
            let norm = if v.is_finite() { (v - lo) / span } else { 1.0 };
            let shade = 0.85 * (1.0 - norm);
            for y in 0..n {
                for x in 0..n {
                    let border = y == 0 || x == 0 || y == n - 1 || x == n - 1;
                    let value = if (r, c) == (br, bc) && border { 1.0 } else { shade };
                    data[(r * n + y) * cols * n + c * n + x] = value;
                }
            }
        }
    }
    GrayImage::new(rows * n, cols * n, data).expect("heatmap values lie in range")
}

pub fn write_heatmap(report: &SweepReport, path: &Path) -> Result<()> {
    pgm::write(&heatmap_image(report), path, 65535)
}

/// Locates the marked cell in a rendered heatmap (full-white border ring).
pub fn find_marked_cell(img: &GrayImage) -> Option<(usize, usize)> {
    let n = HEATMAP_CELL;
    let rows = img.height() / n;
    let cols = img.width() / n;
    for r in 0..rows {
        for c in 0..cols {
            let top_left = img.get(r * n, c * n);
            let bottom_right = img.get(r * n + n - 1, c * n + n - 1);
            if top_left == 1.0 && bottom_right == 1.0 {
                return Some((r, c));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> SweepReport {
        SweepReport {
            model_factors: vec![0.5, 1.0],
            adjusted_factors: vec![0.25, 0.5, 1.0],
            losses: vec![vec![0.03, 0.02, 0.025], vec![0.05, 0.04, 0.015]],
            baseline_bicubic: 0.0317,
        }
    }

    #[test]
    fn csv_round_trip() {
        let r = report();
        let text = sweep_to_csv(&r);
        let back = sweep_from_csv(&text).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn single_cell_csv() {
        let r = SweepReport {
            model_factors: vec![1.0],
            adjusted_factors: vec![1.0],
            losses: vec![vec![0.01]],
            baseline_bicubic: 0.02,
        };
        let text = sweep_to_csv(&r);
        assert_eq!(text.lines().count(), 3);
        assert_eq!(sweep_from_csv(&text).unwrap(), r);
    }

    #[test]
    fn infinity_sentinel() {
        let mut r = report();
        r.losses[0][0] = f64::INFINITY;
        let text = sweep_to_csv(&r);
        assert!(text.contains(",inf\n") || text.contains("inf"));
        let back = sweep_from_csv(&text).unwrap();
        assert!(back.losses[0][0].is_infinite());
    }

    #[test]
    fn heatmap_marks_argmin() {
        let r = report();
        let img = heatmap_image(&r);
        assert_eq!(find_marked_cell(&img), Some(r.argmin()));
        assert_eq!(r.argmin(), (1, 2));
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(matches!(sweep_from_csv("nope\n"), Err(CliError::Format(_))));
        assert!(matches!(
            sweep_from_csv("model_factor,adjusted_factor,l1\n1,1\n# bicubic,0.1\n"),
            Err(CliError::Format(_))
        ));
        assert!(matches!(
            sweep_from_csv("model_factor,adjusted_factor,l1\n1,1,0.1\n"),
            Err(CliError::Format(_))
        ));
    }
}
