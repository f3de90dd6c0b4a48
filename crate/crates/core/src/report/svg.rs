//! Hand-written SVG figures. Fixed canvas, fonts and palette so identical
//! inputs always give identical bytes.

use std::fmt::Write as _;

use crate::cluster::{ElbowScan, Pca};
use crate::stats::CorrelationMatrix;

const FONT: &str = "font-family=\"DejaVu Sans, Arial, sans-serif\" font-size=\"11\"";

/// Ten-colour qualitative palette; clusters beyond ten wrap around.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn open(width: u32, height: u32, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(
        s,
        "<rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" {FONT} font-weight=\"bold\">{}</text>",
        width / 2,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Diverging blue-white-red ramp over [-1, 1].
fn diverging(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}

pub fn heatmap(m: &CorrelationMatrix) -> String {
    let d = m.variables.len();
    let (cell, left, top) = (64u32, 150u32, 40u32);
    let width = left + cell * d as u32 + 20;
    let height = top + cell * d as u32 + 130;
    let mut s = open(width, height, "Spearman correlation matrix");
    for (i, vi) in m.variables.iter().enumerate() {
        let y = top + cell * i as u32;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{}</text>",
            left - 6,
            y + cell / 2 + 4,
            escape(vi.title())
        );
        for j in 0..d {
            let x = left + cell * j as u32;
            let (fill, label) = match m.rho[i][j] {
                Some(r) => (diverging(r), super::tables::fixed2(r)),
                None => ("#dddddd".to_string(), "n/a".to_string()),
            };
            let _ = writeln!(
                s,
                "<rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\" stroke=\"#ffffff\"/>"
            );
            let _ = writeln!(
                s,
                "<text class=\"value\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{label}</text>",
                x + cell / 2,
                y + cell / 2 + 4
            );
        }
    }
    let base = top + cell * d as u32 + 10;
    for (j, vj) in m.variables.iter().enumerate() {
        let x = left + cell * j as u32 + cell / 2;
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{base}\" text-anchor=\"end\" transform=\"rotate(-45 {x} {base})\" {FONT}>{}</text>",
            escape(vj.title())
        );
    }
    s.push_str("</svg>\n");
    s
}

struct Frame {
    left: f64,
    top: f64,
    w: f64,
    h: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                let m = (hi - lo) * 0.05;
                (lo - m, hi + m)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        Frame {
            left: 70.0,
            top: 40.0,
            w: 480.0,
            h: 320.0,
            x: pad(x),
            y: pad(y),
        }
    }

    fn px(&self, v: f64) -> f64 {
        self.left + (v - self.x.0) / (self.x.1 - self.x.0) * self.w
    }

    fn py(&self, v: f64) -> f64 {
        self.top + self.h - (v - self.y.0) / (self.y.1 - self.y.0) * self.h
    }

    fn axes(&self, s: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, y0, y1) = (self.left, self.top, self.top + self.h);
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333333\"/>",
            self.w, self.h
        );
        for t in 0..=4 {
            let f = t as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" {FONT}>{xv:.2}</text>",
                self.px(xv),
                y1 + 16.0
            );
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>{yv:.2}</text>",
                x0 - 6.0,
                self.py(yv) + 4.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" {FONT}>{}</text>",
            x0 + self.w / 2.0,
            y1 + 36.0,
            escape(xlabel)
        );
        let (lx, ly) = (18.0, y0 + self.h / 2.0);
        let _ = writeln!(
            s,
            "<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 {lx:.2} {ly:.2})\" {FONT}>{}</text>",
            escape(ylabel)
        );
    }
}

fn extent(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    })
}

pub fn elbow(scan: &ElbowScan) -> String {
    let frame = Frame::new(
        extent(scan.points.iter().map(|p| p.k as f64)),
        extent(scan.points.iter().map(|p| p.inertia)),
    );
    let mut s = open(600, 420, "Elbow method");
    frame.axes(&mut s, "Number of clusters k", "Inertia");
    let pts: Vec<String> = scan
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", frame.px(p.k as f64), frame.py(p.inertia)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline class=\"curve\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
        pts.join(" "),
        PALETTE[0]
    );
    for p in &scan.points {
        let fill = if scan.knee == Some(p.k) {
            PALETTE[3]
        } else {
            PALETTE[0]
        };
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{fill}\"/>",
            frame.px(p.k as f64),
            frame.py(p.inertia)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// First two principal components, points coloured by cluster.
pub fn pca_scatter(pca: &Pca, assignments: &[usize]) -> String {
    let two = pca.scores.cols() >= 2;
    let coord = |i: usize| {
        (
            pca.scores.get(i, 0),
            if two { pca.scores.get(i, 1) } else { 0.0 },
        )
    };
    let n = pca.scores.rows();
    let frame = Frame::new(
        extent((0..n).map(|i| coord(i).0)),
        extent((0..n).map(|i| coord(i).1)),
    );
    let mut s = open(600, 420, "KMeans clusters in PCA space");
    let pct = |c: usize| pca.explained_ratio.get(c).copied().unwrap_or(0.0) * 100.0;
    frame.axes(
        &mut s,
        &format!("PC1 ({:.2}%)", pct(0)),
        &format!("PC2 ({:.2}%)", pct(1)),
    );
    for (i, &a) in assignments.iter().enumerate().take(n) {
        let (x, y) = coord(i);
        let _ = writeln!(
            s,
            "<circle class=\"point\" data-cluster=\"{a}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>",
            frame.px(x),
            frame.py(y),
            PALETTE[a % PALETTE.len()]
        );
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    for c in 0..k {
        let y = 50.0 + 16.0 * c as f64;
        let _ = writeln!(
            s,
            "<circle cx=\"565\" cy=\"{y:.2}\" r=\"4\" fill=\"{}\"/>",
            PALETTE[c % PALETTE.len()]
        );
        let _ = writeln!(s, "<text x=\"573\" y=\"{:.2}\" {FONT}>{c}</text>", y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ElbowPoint;
    use crate::stats::Variable;

    #[test]
    fn heatmap_has_one_annotated_cell_per_pair() {
        let vars = Variable::NARRATIVE.to_vec();
        let rho: Vec<Vec<Option<f64>>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| Some(if i == j { 1.0 } else { -0.256 }))
                    .collect()
            })
            .collect();
        let m = CorrelationMatrix {
            variables: vars,
            pvalues: rho.clone(),
            rho,
            n: vec![vec![10; 4]; 4],
        };
        let svg = heatmap(&m);
        assert_eq!(svg.matches("class=\"cell\"").count(), 16);
        assert_eq!(svg.matches("class=\"value\"").count(), 16);
        assert!(svg.contains(">-0.26<"));
        assert!(svg.contains(">1.00<"));
    }

    #[test]
    fn elbow_polyline_has_one_vertex_per_point() {
        let scan = ElbowScan {
            points: (1..=10)
                .map(|k| ElbowPoint {
                    k,
                    inertia: 100.0 / k as f64,
                })
                .collect(),
            knee: Some(2),
        };
        let svg = elbow(&scan);
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = line
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(pts.split(' ').count(), 10);
        assert_eq!(svg, elbow(&scan));
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(diverging(1.0), "#ff0000");
        assert_eq!(diverging(0.0), "#ffffff");
        assert_eq!(diverging(-1.0), "#0000ff");
    }
}
