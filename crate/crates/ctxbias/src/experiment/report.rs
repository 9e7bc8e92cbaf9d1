//! CSV and SVG output for sweep results.
//!
//! The CSV has two sections. Per-cell rows first:
//!
//! ```text
//! dataset,noise,trial,context_accuracy,baseline_accuracy
//! ```
//!
//! then aggregate rows under a second header:
//!
//! ```text
//! noise,mean,ci_low,ci_high
//! ```
//!
//! Floats are printed with Rust's shortest round-trip formatting, so a
//! re-parsed CSV reproduces the sweep values exactly and two identical runs
//! produce byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::SweepResult;

/// Writes a sweep result as CSV.
pub fn write_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    render_csv(result, &mut out)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Renders the CSV into a string (what [`write_csv`] writes to disk).
pub fn render_csv(result: &SweepResult, out: &mut String) -> Result<()> {
    out.push_str("dataset,noise,trial,context_accuracy,baseline_accuracy\n");
    for (i, &noise) in result.noise_grid.iter().enumerate() {
        for (trial, &acc) in result.context_accuracy[i].iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                result.dataset, noise, trial, acc, result.baseline_accuracy[trial]
            ));
        }
    }
    out.push_str("noise,mean,ci_low,ci_high\n");
    for (i, &noise) in result.noise_grid.iter().enumerate() {
        let mean = result.context_mean(i);
        let ci = result.context_ci(i)?;
        out.push_str(&format!("{},{},{},{}\n", noise, mean, mean - ci, mean + ci));
    }
    Ok(())
}

/// One aggregate row from a parsed CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvAggregate {
    pub noise: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A parsed sweep CSV: the reconstructed result plus the aggregate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub result: SweepResult,
    pub aggregates: Vec<CsvAggregate>,
}

/// Parses a CSV produced by [`write_csv`].
pub fn parse_csv(path: impl AsRef<Path>) -> Result<ParsedCsv> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };

    let mut lines = text.lines();
    match lines.next() {
        Some("dataset,noise,trial,context_accuracy,baseline_accuracy") => {}
        other => {
            return Err(malformed(format!("unexpected first header: {other:?}")));
        }
    }

    let mut dataset = String::new();
    let mut noise_grid: Vec<f64> = Vec::new();
    let mut context_accuracy: Vec<Vec<f64>> = Vec::new();
    let mut baseline_accuracy: Vec<f64> = Vec::new();
    let mut aggregates = Vec::new();
    let mut in_aggregates = false;

    for line in lines {
        if line.is_empty() {
            continue;
        }
        if line == "noise,mean,ci_low,ci_high" {
            in_aggregates = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if in_aggregates {
            if fields.len() != 4 {
                return Err(malformed(format!("bad aggregate row: {line}")));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| malformed(format!("bad float {s}: {e}")))
            };
            aggregates.push(CsvAggregate {
                noise: parse(fields[0])?,
                mean: parse(fields[1])?,
                ci_low: parse(fields[2])?,
                ci_high: parse(fields[3])?,
            });
        } else {
            if fields.len() != 5 {
                return Err(malformed(format!("bad data row: {line}")));
            }
            dataset = fields[0].to_string();
            let noise: f64 = fields[1]
                .parse()
                .map_err(|e| malformed(format!("bad noise {}: {e}", fields[1])))?;
            let trial: usize = fields[2]
                .parse()
                .map_err(|e| malformed(format!("bad trial {}: {e}", fields[2])))?;
            let ctx_acc: f64 = fields[3]
                .parse()
                .map_err(|e| malformed(format!("bad accuracy {}: {e}", fields[3])))?;
            let base_acc: f64 = fields[4]
                .parse()
                .map_err(|e| malformed(format!("bad accuracy {}: {e}", fields[4])))?;

            if noise_grid.last() != Some(&noise) {
                noise_grid.push(noise);
                context_accuracy.push(Vec::new());
            }
            context_accuracy.last_mut().unwrap().push(ctx_acc);
            if baseline_accuracy.len() == trial {
                baseline_accuracy.push(base_acc);
            }
        }
    }

    Ok(ParsedCsv {
        result: SweepResult {
            dataset,
            noise_grid,
            context_accuracy,
            baseline_accuracy,
        },
        aggregates,
    })
}

/// Renders the sweep as an SVG plot: context-model accuracy vs noise with a
/// shaded 95% CI band, plus the baseline mean as a horizontal band.
pub fn render_svg(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = svg_string(result)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(svg.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Builds the SVG document for [`render_svg`].
pub fn svg_string(result: &SweepResult) -> Result<String> {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const ML: f64 = 60.0; // left margin
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;

    let x_max = result
        .noise_grid
        .iter()
        .copied()
        .fold(f64::NAN, f64::max)
        .max(0.01);
    let x_of = |noise: f64| ML + (W - ML - MR) * (noise / x_max);
    let y_of = |acc: f64| MT + (H - MT - MB) * (1.0 - acc.clamp(0.0, 1.0));

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{} : accuracy vs context noise</text>\n",
        (ML + W - MR) / 2.0,
        xml_escape(&result.dataset)
    ));

    // Axes.
    s.push_str(&format!(
        "  <line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    s.push_str(&format!(
        "  <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    for i in 0..=4 {
        let acc = i as f64 / 4.0;
        let y = y_of(acc);
        s.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{ML}\" y2=\"{y:.1}\" stroke=\"black\"/>\n",
            ML - 4.0
        ));
        s.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{acc:.2}</text>\n",
            ML - 8.0,
            y + 4.0
        ));
    }
    for &noise in &result.noise_grid {
        let x = x_of(noise);
        s.push_str(&format!(
            "  <line x1=\"{x:.1}\" y1=\"{}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            H - MB,
            H - MB + 4.0
        ));
        s.push_str(&format!(
            "  <text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{noise:.2}</text>\n",
            H - MB + 18.0
        ));
    }
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">context noise</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0
    ));
    s.push_str(&format!(
        "  <text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">test accuracy</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    ));

    // Baseline band (mean +- CI across the x range) and mean line.
    let base_mean = result.baseline_mean();
    let base_ci = result.baseline_ci()?;
    let (x0, x1) = (ML, W - MR);
    s.push_str(&format!(
        "  <polygon points=\"{x0:.1},{:.1} {x1:.1},{:.1} {x1:.1},{:.1} {x0:.1},{:.1}\" fill=\"#dd8452\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
        y_of(base_mean + base_ci),
        y_of(base_mean + base_ci),
        y_of(base_mean - base_ci),
        y_of(base_mean - base_ci)
    ));
    s.push_str(&format!(
        "  <polyline points=\"{x0:.1},{:.1} {x1:.1},{:.1}\" fill=\"none\" stroke=\"#dd8452\" stroke-width=\"2\" stroke-dasharray=\"6 3\"/>\n",
        y_of(base_mean),
        y_of(base_mean)
    ));

    if !result.noise_grid.is_empty() {
        // Context CI band: upper edge left-to-right, lower edge back.
        let mut band = String::new();
        for (i, &noise) in result.noise_grid.iter().enumerate() {
            let m = result.context_mean(i);
            let ci = result.context_ci(i)?;
            band.push_str(&format!("{:.1},{:.1} ", x_of(noise), y_of(m + ci)));
        }
        for (i, &noise) in result.noise_grid.iter().enumerate().rev() {
            let m = result.context_mean(i);
            let ci = result.context_ci(i)?;
            band.push_str(&format!("{:.1},{:.1} ", x_of(noise), y_of(m - ci)));
        }
        s.push_str(&format!(
            "  <polygon points=\"{}\" fill=\"#4c72b0\" fill-opacity=\"0.25\" stroke=\"none\"/>\n",
            band.trim_end()
        ));

        let mut line = String::new();
        for (i, &noise) in result.noise_grid.iter().enumerate() {
            line.push_str(&format!("{:.1},{:.1} ", x_of(noise), y_of(result.context_mean(i))));
        }
        s.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"2\"/>\n",
            line.trim_end()
        ));
    }

    // Legend.
    s.push_str(&format!(
        "  <rect x=\"{:.1}\" y=\"{MT}\" width=\"150\" height=\"40\" fill=\"white\" stroke=\"black\" stroke-opacity=\"0.3\"/>\n",
        W - MR - 160.0
    ));
    s.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#4c72b0\" stroke-width=\"2\"/>\n",
        W - MR - 152.0,
        MT + 14.0,
        W - MR - 128.0,
        MT + 14.0
    ));
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">context model</text>\n",
        W - MR - 122.0,
        MT + 18.0
    ));
    s.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#dd8452\" stroke-width=\"2\" stroke-dasharray=\"6 3\"/>\n",
        W - MR - 152.0,
        MT + 30.0,
        W - MR - 128.0,
        MT + 30.0
    ));
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">baseline (no context)</text>\n",
        W - MR - 122.0,
        MT + 34.0
    ));

    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_result() -> SweepResult {
        SweepResult {
            dataset: "synthetic".to_string(),
            noise_grid: vec![0.0, 0.25, 0.5],
            context_accuracy: vec![
                vec![0.97, 0.96, 0.98],
                vec![0.81, 0.8, 0.83],
                vec![0.62, 0.6, 0.61],
            ],
            baseline_accuracy: vec![0.55, 0.54, 0.56],
        }
    }

    #[test]
    fn csv_round_trip_reproduces_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let result = sample_result();
        write_csv(&result, &path).unwrap();
        let parsed = parse_csv(&path).unwrap();
        assert_eq!(parsed.result, result);
        assert_eq!(parsed.aggregates.len(), 3);
        for (i, agg) in parsed.aggregates.iter().enumerate() {
            assert_eq!(agg.noise, result.noise_grid[i]);
            assert_eq!(agg.mean, result.context_mean(i));
            let ci = result.context_ci(i).unwrap();
            assert_eq!(agg.ci_low, result.context_mean(i) - ci);
            assert_eq!(agg.ci_high, result.context_mean(i) + ci);
        }
    }

    #[test]
    fn empty_grid_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let result = SweepResult {
            dataset: "none".to_string(),
            noise_grid: vec![],
            context_accuracy: vec![],
            baseline_accuracy: vec![0.5, 0.5],
        };
        write_csv(&result, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "dataset,noise,trial,context_accuracy,baseline_accuracy\nnoise,mean,ci_low,ci_high\n"
        );
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let svg = svg_string(&sample_result()).unwrap();
        let polylines = svg.matches("<polyline").count();
        assert_eq!(polylines, 2, "context line + baseline line");
        assert!(svg.contains("<polygon"), "CI bands present");
    }

    /// Minimal XML well-formedness check: tags balance and nest properly.
    fn assert_well_formed_xml(doc: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = doc;
        while let Some(start) = rest.find('<') {
            rest = &rest[start + 1..];
            let end = rest.find('>').expect("unclosed tag");
            let tag = &rest[..end];
            rest = &rest[end + 1..];
            if tag.starts_with('?') || tag.starts_with('!') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().unwrap_or_else(|| panic!("stray closer {name}"));
                assert_eq!(open, name, "mismatched tags");
            } else if tag.ends_with('/') {
                // self-closing
            } else {
                let name: String = tag.split_whitespace().next().unwrap().to_string();
                stack.push(name);
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn svg_is_well_formed_xml() {
        let svg = svg_string(&sample_result()).unwrap();
        assert_well_formed_xml(&svg);
        // Escaping keeps hostile dataset names well-formed too.
        let mut hostile = sample_result();
        hostile.dataset = "a<b>&\"c\"".to_string();
        assert_well_formed_xml(&svg_string(&hostile).unwrap());
    }
}
