use std::fmt::Write as _;
use std::path::Path;

use super::{write_atomic, DiagnosticsError};
use crate::metrics::JointTopicMatrix;

const CELL: usize = 64;
const MARGIN_LEFT: usize = 110;
const MARGIN_TOP: usize = 70;

/// The joint matrix as CSV: a header row `answer_topic_j`, one
/// `prompt_topic_i` row per prompt topic, six decimals per cell.
pub fn heatmap_csv(joint: &JointTopicMatrix) -> String {
    let k = joint.k();
    let mut out = String::new();
    for j in 0..k {
        let _ = write!(out, ",answer_topic_{j}");
    }
    out.push('\n');
    for (i, row) in joint.rows().enumerate() {
        let _ = write!(out, "prompt_topic_{i}");
        for v in row {
            let _ = write!(out, ",{v:.6}");
        }
        out.push('\n');
    }
    out
}

/// Parses [`heatmap_csv`] output back into rows of probabilities.
pub fn parse_heatmap_csv(text: &str) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    let err = |line: usize, message: String| DiagnosticsError::Csv { line, message };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let k = header.split(',').skip(1).count();
    let mut rows = Vec::with_capacity(k);
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let label = cells.next().unwrap_or_default();
        if label != format!("prompt_topic_{}", rows.len()) {
            return Err(err(idx + 1, format!("unexpected row label {label:?}")));
        }
        let row = cells
            .map(|c| c.trim().parse::<f64>().map_err(|e| err(idx + 1, format!("{c:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != k {
            return Err(err(idx + 1, format!("{} cells, expected {k}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != k {
        return Err(err(0, format!("{} rows, expected {k}", rows.len())));
    }
    Ok(rows)
}

/// Linear white-to-navy ramp.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

/// SVG cell grid with per-cell values. The color scale runs from 0 to the
/// matrix maximum.
pub fn heatmap_svg(joint: &JointTopicMatrix) -> String {
    let k = joint.k();
    let max = joint.max();
    let width = MARGIN_LEFT + k * CELL + 20;
    let height = MARGIN_TOP + k * CELL + 20;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">Answer topic</text>"#,
        MARGIN_LEFT + k * CELL / 2
    );
    let cy = MARGIN_TOP + k * CELL / 2;
    let _ = writeln!(
        s,
        r#"<text x="20" y="{cy}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {cy})">Prompt topic</text>"#
    );
    for j in 0..k {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{j}</text>"#,
            MARGIN_LEFT + j * CELL + CELL / 2,
            MARGIN_TOP - 10
        );
    }
    for (i, row) in joint.rows().enumerate() {
        let y = MARGIN_TOP + i * CELL;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{i}</text>"#, MARGIN_LEFT - 10, y + CELL / 2 + 4);
        for (j, &v) in row.iter().enumerate() {
            let x = MARGIN_LEFT + j * CELL;
            let t = if max > 0.0 { v / max } else { 0.0 };
            let ink = if t > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#999999"/>"##,
                color(t)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{v:.3}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 4
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the SVG and CSV renderings of `joint`, each atomically.
pub fn render_heatmap(joint: &JointTopicMatrix, out_svg: &Path, out_csv: &Path) -> Result<(), DiagnosticsError> {
    write_atomic(out_csv, heatmap_csv(joint).as_bytes())?;
    write_atomic(out_svg, heatmap_svg(joint).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_identity_csv() {
        let j = JointTopicMatrix::from_probs(2, vec![0.5, 0.0, 0.0, 0.5], 1).unwrap();
        assert_eq!(
            heatmap_csv(&j),
            ",answer_topic_0,answer_topic_1\nprompt_topic_0,0.500000,0.000000\nprompt_topic_1,0.000000,0.500000\n"
        );
    }

    #[test]
    fn zero_row_is_kept() {
        let j = JointTopicMatrix::from_probs(3, vec![0.2, 0.3, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.4], 2).unwrap();
        let rows = parse_heatmap_csv(&heatmap_csv(&j)).unwrap();
        assert_eq!(rows[1], vec![0.0, 0.0, 0.0]);
        let svg = heatmap_svg(&j);
        assert_eq!(svg.matches("<rect x=").count(), 9);
        assert!(svg.contains("Prompt topic") && svg.contains("Answer topic"));
    }

    #[test]
    fn color_scale_ends() {
        assert_eq!(color(0.0), "#ffffff");
        assert_eq!(color(1.0), "#08306b");
    }

    #[test]
    fn malformed_csv() {
        assert!(parse_heatmap_csv("").is_err());
        assert!(parse_heatmap_csv(",answer_topic_0\nprompt_topic_0,abc\n").is_err());
        assert!(parse_heatmap_csv(",answer_topic_0,answer_topic_1\nprompt_topic_0,0.5,0.5\n").is_err());
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let j = JointTopicMatrix::from_probs(1, vec![1.0], 1).unwrap();
        let (svg, csv) = (dir.path().join("h.svg"), dir.path().join("h.csv"));
        render_heatmap(&j, &svg, &csv).unwrap();
        assert_eq!(std::fs::read_to_string(csv).unwrap(), ",answer_topic_0\nprompt_topic_0,1.000000\n");
        assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
        let missing = dir.path().join("nope/h.svg");
        assert!(matches!(render_heatmap(&j, &missing, &dir.path().join("x.csv")), Err(DiagnosticsError::Io { .. })));
    }
}
