//! Minimal SVG charts: cumulative metric curves and simplex trajectories.

use std::fmt::Write;

use super::aggregate::Band;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 400;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Indices kept when drawing a curve of length `n`.
fn sample(n: usize) -> Vec<usize> {
    if n <= MAX_POINTS {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..MAX_POINTS).map(|k| k * (n - 1) / (MAX_POINTS - 1)).collect();
    idx.dedup();
    idx
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Cumulative metric against episodes, one mean curve and shaded band per algorithm.
pub fn line_chart(title: &str, ylabel: &str, series: &[(&str, &Band)]) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    let n = series.iter().map(|(_, b)| b.mean.len()).max().unwrap_or(0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, b) in series {
        for v in b.lo.iter().chain(&b.hi) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    lo = lo.min(0.0);
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    hi += pad;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + plot_w * t / (n.max(2) - 1) as f64;
    let sy = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
    );
    for tick in nice_ticks(lo, hi) {
        let y = sy(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            fmt_tick(tick)
        );
    }
    if n > 1 {
        for tick in nice_ticks(1.0, n as f64) {
            let x = sx(tick - 1.0);
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
                TOP + plot_h + 18.0,
                fmt_tick(tick)
            );
        }
    }
    if lo < 0.0 {
        let y = sy(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
            LEFT + plot_w
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">episode</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(ylabel)
    );

    for (k, (name, band)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let idx = sample(band.mean.len());
        let mut poly = String::new();
        for &i in &idx {
            let _ = write!(poly, "{:.2},{:.2} ", sx(i as f64), sy(band.hi[i]));
        }
        for &i in idx.iter().rev() {
            let _ = write!(poly, "{:.2},{:.2} ", sx(i as f64), sy(band.lo[i]));
        }
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            poly.trim_end()
        );
        let mut line = String::new();
        for &i in &idx {
            let _ = write!(line, "{:.2},{:.2} ", sx(i as f64), sy(band.mean[i]));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            line.trim_end()
        );
        let ly = TOP + 14.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Barycentric point to drawing coordinates: vertex 0 bottom left, 1 bottom
/// right, 2 on top.
fn simplex_xy(p: &[f64; 3]) -> (f64, f64) {
    let (x0, y0) = (60.0, 400.0);
    let (x1, y1) = (460.0, 400.0);
    let (x2, y2) = (260.0, 400.0 - 400.0 * 3f64.sqrt() / 2.0);
    (
        p[0] * x0 + p[1] * x1 + p[2] * x2,
        p[0] * y0 + p[1] * y1 + p[2] * y2,
    )
}

/// Part of the simplex with `g·p <= 0`, as a polygon in barycentric coordinates.
pub fn safe_region(g: &[f64; 3]) -> Vec<[f64; 3]> {
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let value = |p: &[f64; 3]| g[0] * p[0] + g[1] * p[1] + g[2] * p[2];
    let mut out = Vec::new();
    for i in 0..3 {
        let a = corners[i];
        let b = corners[(i + 1) % 3];
        let (va, vb) = (value(&a), value(&b));
        if va <= 0.0 {
            out.push(a);
        }
        if (va < 0.0 && vb > 0.0) || (va > 0.0 && vb < 0.0) {
            let s = va / (va - vb);
            out.push([
                a[0] + s * (b[0] - a[0]),
                a[1] + s * (b[1] - a[1]),
                a[2] + s * (b[2] - a[2]),
            ]);
        }
    }
    out
}

/// Policy trajectories on the probability simplex with the safe region shaded.
pub fn simplex_chart(
    title: &str,
    g: &[f64; 3],
    optimum: Option<[f64; 3]>,
    trajectories: &[(&str, &[[f64; 3]])],
) -> String {
    let (w, h) = (640.0, 440.0);
    let mut out = String::new();
    header(&mut out, w, h, title);
    let tri: Vec<String> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        .iter()
        .map(|p| {
            let (x, y) = simplex_xy(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let region: Vec<String> = safe_region(g)
        .iter()
        .map(|p| {
            let (x, y) = simplex_xy(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    if !region.is_empty() {
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="#2ca02c" fill-opacity="0.15" stroke="none"/>"##,
            region.join(" ")
        );
    }
    let _ = writeln!(
        out,
        r##"<polygon points="{}" fill="none" stroke="#333"/>"##,
        tri.join(" ")
    );
    for (i, p) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().enumerate() {
        let (x, y) = simplex_xy(p);
        let dy = if i == 2 { -8.0 } else { 18.0 };
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">a{i}</text>"#, y + dy);
    }
    for (k, (name, path)) in trajectories.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut line = String::new();
        for &i in &sample(path.len()) {
            let (x, y) = simplex_xy(&path[i]);
            let _ = write!(line, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.trim_end()
        );
        if let Some(last) = path.last() {
            let (x, y) = simplex_xy(last);
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#);
        }
        let ly = 60.0 + 20.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="490" y1="{ly}" x2="512" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="518" y="{:.1}">{}</text>"#,
            ly + 4.0,
            escape(name)
        );
    }
    if let Some(opt) = optimum {
        let (x, y) = simplex_xy(&opt);
        let _ = writeln!(
            out,
            r##"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#000" stroke-width="2"/>"##,
            x - 6.0,
            y - 6.0,
            x + 6.0,
            y + 6.0,
            x - 6.0,
            y + 6.0,
            x + 6.0,
            y - 6.0
        );
        let ly = 60.0 + 20.0 * trajectories.len() as f64;
        let _ = writeln!(out, r#"<text x="490" y="{ly:.1}">x  safe optimum</text>"#);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn safe_region_of_worked_constraint() {
        let region = safe_region(&[0.5, -0.5, -0.2]);
        assert_eq!(region.len(), 4);
        assert!(region.contains(&[0.5, 0.5, 0.0]));
        assert!(region.iter().all(|p| 0.5 * p[0] - 0.5 * p[1] - 0.2 * p[2] <= 1e-12));
        assert!(safe_region(&[1.0, 1.0, 1.0]).is_empty());
        assert_eq!(safe_region(&[-1.0, -1.0, -1.0]).len(), 3);
    }

    #[test]
    fn charts_are_well_formed() {
        let band = Band::from_series(&[&[0.0, 1.0, 3.0][..], &[0.0, 2.0, 2.0][..]]).unwrap();
        let svg = line_chart("regret", "R_t", &[("A", &band)]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let path = [[1.0 / 3.0; 3], [0.5, 0.5, 0.0]];
        let svg = simplex_chart("s", &[0.5, -0.5, -0.2], Some([0.5, 0.5, 0.0]), &[("A", &path)]);
        assert!(svg.contains("safe optimum"));
    }
}
