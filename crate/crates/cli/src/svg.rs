//! Minimal SVG charts: vertical bars with an optional reference line.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;

pub struct BarChart<'a> {
    pub title: &'a str,
    pub y_label: &'a str,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
    /// Drawn as a polyline over the bar centres.
    pub reference: Option<Vec<f64>>,
    /// Index of a bar to highlight.
    pub highlight: Option<usize>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl BarChart<'_> {
    pub fn render(&self) -> String {
        let n = self.values.len().max(1) as f64;
        let top = self
            .values
            .iter()
            .chain(self.reference.iter().flatten())
            .fold(0.0f64, |m, &v| m.max(v))
            .max(f64::MIN_POSITIVE);
        let plot_w = W - 2.0 * PAD;
        let plot_h = H - 2.0 * PAD;
        let slot = plot_w / n;
        let y = |v: f64| H - PAD - plot_h * v / top;
        let cx = |i: usize| PAD + slot * (i as f64 + 0.5);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(self.title));
        let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#, H / 2.0, H / 2.0, esc(self.y_label));
        let _ = writeln!(s, r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - PAD, W - PAD, H - PAD);
        let _ = writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{top:.2}</text>"#, PAD - 4.0, PAD + 4.0);
        for (i, (&v, label)) in self.values.iter().zip(&self.labels).enumerate() {
            let fill = if self.highlight == Some(i) { "#d95f02" } else { "#1b9e77" };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                cx(i) - 0.35 * slot,
                y(v),
                0.7 * slot,
                H - PAD - y(v)
            );
            let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, cx(i), H - PAD + 16.0, esc(label));
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{v:.2}</text>"#, cx(i), y(v) - 4.0);
        }
        if let Some(r) = &self.reference {
            let pts: Vec<String> = r.iter().enumerate().map(|(i, &v)| format!("{:.2},{:.2}", cx(i), y(v))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#, pts.join(" "));
        }
        s.push_str("</svg>\n");
        s
    }
}
