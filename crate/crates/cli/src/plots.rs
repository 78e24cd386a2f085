//! Deterministic SVG renderings of the stage CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eocsa_core::data::write_atomic;
use eocsa_core::select::ClusterReport;
use eocsa_core::Error;

use crate::error::{CliError, CliResult};

const W: f64 = 480.0;
const H: f64 = 320.0;
const LEFT: f64 = 50.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 40.0;

/// Maps data coordinates in `[0, x_max] × [0, 1]` to the plot area.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        LEFT + (W - LEFT - RIGHT) * (v / self.x_max)
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (H - TOP - BOTTOM) * (1.0 - v)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<title>{title}</title>"#).unwrap();
    writeln!(s, r#"<rect class="background" x="0" y="0" width="{W}" height="{H}" fill="white"/>"#).unwrap();
    s
}

fn axes(s: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (f.x(0.0), f.x(f.x_max), f.y(0.0), f.y(1.0));
    writeln!(
        s,
        r#"<path class="axes" d="M {x0:.2} {y1:.2} V {y0:.2} H {x1:.2}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            x0 - 4.0,
            f.y(v) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        (x0 + x1) / 2.0,
        H - 8.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="12" y="{:.2}" text-anchor="middle" transform="rotate(-90 12 {:.2})">{y_label}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
    .unwrap();
}

fn close(mut s: String) -> String {
    s.push_str("</svg>\n");
    s
}

/// One bar per cluster (empty for unevaluable clusters) and a dashed rule
/// at the selection threshold.
pub fn cluster_cindex_svg(reports: &[ClusterReport], threshold: f64) -> String {
    let mut s = open("Held-out C-index per cluster");
    let f = Frame { x_max: 1.0 };
    axes(&mut s, &f, "cluster", "C-index");
    let n = reports.len().max(1) as f64;
    let slot = (W - LEFT - RIGHT) / n;
    for (i, r) in reports.iter().enumerate() {
        let c = r.test_cindex.unwrap_or(0.0);
        let x = LEFT + slot * (i as f64 + 0.15);
        let (y, h) = (f.y(c), f.y(0.0) - f.y(c));
        let fill = if r.selected { "#3b6ea5" } else { "#b0b0b0" };
        writeln!(
            s,
            r#"<rect class="bar" data-cluster="{}" x="{x:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="{fill}"/>"#,
            r.cluster_id,
            slot * 0.7
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + slot * (i as f64 + 0.5),
            f.y(0.0) + 14.0,
            r.cluster_id
        )
        .unwrap();
    }
    let yt = f.y(threshold);
    writeln!(
        s,
        r#"<line class="threshold" x1="{:.2}" y1="{yt:.2}" x2="{:.2}" y2="{yt:.2}" stroke="black" stroke-dasharray="4 3"/>"#,
        f.x(0.0),
        f.x(1.0)
    )
    .unwrap();
    close(s)
}

/// ROC polyline through `(fpr, tpr)` points in file order.
pub fn roc_svg(points: &[(f64, f64)], title: &str) -> String {
    let mut s = open(title);
    let f = Frame { x_max: 1.0 };
    axes(&mut s, &f, "false positive rate", "true positive rate");
    writeln!(
        s,
        r##"<line class="chance" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="2 2"/>"##,
        f.x(0.0),
        f.y(0.0),
        f.x(1.0),
        f.y(1.0)
    )
    .unwrap();
    let pts: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", f.x(x), f.y(y)))
        .collect();
    writeln!(
        s,
        r##"<polyline class="roc" points="{}" fill="none" stroke="#c0392b"/>"##,
        pts.join(" ")
    )
    .unwrap();
    close(s)
}

/// Step path starting at `S = 1`: one horizontal then one vertical segment
/// per `(time, survival)` row.
fn km_path(f: &Frame, steps: &[(f64, f64)]) -> String {
    let mut d = format!("M {:.2} {:.2}", f.x(0.0), f.y(1.0));
    for &(t, surv) in steps {
        write!(d, " H {:.2} V {:.2}", f.x(t), f.y(surv)).unwrap();
    }
    d
}

/// Kaplan-Meier step curves, one path per non-empty group.
pub fn km_svg(groups: &[(&str, &[(f64, f64)])]) -> String {
    let mut s = open("Kaplan-Meier survival by risk group");
    let t_max = groups
        .iter()
        .flat_map(|(_, g)| g.iter().map(|p| p.0))
        .fold(0.0_f64, f64::max);
    let f = Frame {
        x_max: if t_max > 0.0 { t_max } else { 1.0 },
    };
    axes(&mut s, &f, "time (days)", "survival");
    let colors = ["#c0392b", "#2471a3", "#27ae60", "#7d3c98"];
    for (i, (name, steps)) in groups.iter().enumerate() {
        if steps.is_empty() {
            continue;
        }
        writeln!(
            s,
            r#"<path class="km" data-group="{name}" d="{}" fill="none" stroke="{}"/>"#,
            km_path(&f, steps),
            colors[i % colors.len()]
        )
        .unwrap();
    }
    close(s)
}

fn read_columns(path: &Path, cols: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    if !path.exists() {
        return Err(CliError::Core(Error::Data(format!("missing plot input {}", path.display()))));
    }
    let csv_err = |e| {
        CliError::Core(Error::Csv {
            path: path.into(),
            source: e,
        })
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| CliError::Core(Error::Data(format!("{} lacks column {c}", path.display()))))
        })
        .collect::<CliResult<_>>()?;
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let vals = idx
            .iter()
            .map(|&i| {
                rec[i].parse::<f64>().map_err(|_| {
                    CliError::Core(Error::Row {
                        file: path.display().to_string(),
                        row: row + 1,
                        message: format!("bad number {:?}", &rec[i]),
                    })
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        out.push(vals);
    }
    Ok(out)
}

fn pairs(path: &Path, a: &str, b: &str) -> CliResult<Vec<(f64, f64)>> {
    Ok(read_columns(path, &[a, b])?.into_iter().map(|v| (v[0], v[1])).collect())
}

fn write_svg(path: &Path, svg: &str) -> CliResult<()> {
    write_atomic(path, svg.as_bytes()).map_err(CliError::from)
}

/// `roc_*.csv` files in `dir`, sorted by name.
fn roc_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("roc_") && name.ends_with(".csv")
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Writes `cluster_cindex.svg`, `km.svg` and one `roc_<horizon>.svg` per ROC
/// CSV of `survive_dir` into `out`.
pub fn emit_plots(reports: &[ClusterReport], threshold: f64, survive_dir: &Path, out: &Path) -> CliResult<()> {
    write_svg(&out.join("cluster_cindex.svg"), &cluster_cindex_svg(reports, threshold))?;
    let high = pairs(&survive_dir.join("km_high.csv"), "time", "survival")?;
    let low = pairs(&survive_dir.join("km_low.csv"), "time", "survival")?;
    write_svg(&out.join("km.svg"), &km_svg(&[("high", &high), ("low", &low)]))?;
    for path in roc_files(survive_dir)? {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("roc").to_string();
        let pts = pairs(&path, "fpr", "tpr")?;
        let horizon = stem.trim_start_matches("roc_");
        write_svg(&out.join(format!("{stem}.svg")), &roc_svg(&pts, &format!("Time-dependent ROC at {horizon}")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: usize, c: Option<f64>) -> ClusterReport {
        ClusterReport {
            cluster_id: id,
            n_train: 10,
            n_test: 3,
            test_cindex: c,
            selected: c.is_some_and(|c| c >= 0.55),
        }
    }

    #[test]
    fn km_has_one_horizontal_segment_per_row() {
        let steps = [(1.0, 2.0 / 3.0), (2.0, 1.0 / 3.0), (3.0, 0.0)];
        let svg = km_svg(&[("high", &steps), ("low", &steps[..2])]);
        let paths: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="km""#)).collect();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].matches(" H ").count(), 3);
        assert_eq!(paths[1].matches(" H ").count(), 2);
    }

    #[test]
    fn bars_and_threshold() {
        let svg = cluster_cindex_svg(&[report(0, Some(0.6)), report(1, None), report(2, Some(0.5))], 0.55);
        assert_eq!(svg.matches(r#"class="bar""#).count(), 3);
        assert_eq!(svg.matches(r#"class="threshold""#).count(), 1);
    }

    #[test]
    fn deterministic() {
        let pts = [(0.0, 0.0), (0.25, 0.5), (1.0, 1.0)];
        assert_eq!(roc_svg(&pts, "t"), roc_svg(&pts, "t"));
    }
}
