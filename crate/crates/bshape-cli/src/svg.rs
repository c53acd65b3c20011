//! Minimal deterministic SVG emission: no timestamps, fixed-precision
//! coordinates, so identical inputs produce byte-identical files.

use std::fmt::Write as _;

pub const PALETTE: [&str; 8] = [
    "#1b6ca8", "#d1495b", "#209f84", "#f2a104", "#7d5ba6", "#3a3a3a", "#8c6d31", "#17becf",
];

pub struct Plot {
    body: String,
    width: f64,
    height: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Plot {
    pub fn new(width: f64, height: f64, x_range: (f64, f64), y_range: (f64, f64)) -> Plot {
        let mut plot = Plot {
            body: String::new(),
            width,
            height,
            margin: 46.0,
            x_range,
            y_range,
        };
        let _ = writeln!(
            plot.body,
            r##"<rect x="0" y="0" width="{:.1}" height="{:.1}" fill="#ffffff"/>"##,
            width, height
        );
        plot
    }

    fn sx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin + (x - lo) / (hi - lo) * (self.width - 2.0 * self.margin)
    }

    fn sy(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2.0 * self.margin)
    }

    pub fn axes(&mut self, x_label: &str, y_label: &str, ticks: usize) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let ax = format!(
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333333" stroke-width="1"/>"##,
            self.sx(x0),
            self.sy(y0),
            self.sx(x1),
            self.sy(y0)
        );
        let ay = format!(
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333333" stroke-width="1"/>"##,
            self.sx(x0),
            self.sy(y0),
            self.sx(x0),
            self.sy(y1)
        );
        self.body.push_str(&ax);
        self.body.push('\n');
        self.body.push_str(&ay);
        self.body.push('\n');
        for i in 0..=ticks {
            let fx = x0 + (x1 - x0) * i as f64 / ticks as f64;
            let fy = y0 + (y1 - y0) * i as f64 / ticks as f64;
            let _ = writeln!(
                self.body,
                r##"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle" fill="#333333">{:.2}</text>"##,
                self.sx(fx),
                self.sy(y0) + 14.0,
                fx
            );
            let _ = writeln!(
                self.body,
                r##"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end" fill="#333333">{:.2}</text>"##,
                self.sx(x0) - 5.0,
                self.sy(fy) + 3.0,
                fy
            );
        }
        let _ = writeln!(
            self.body,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="#000000">{}</text>"##,
            0.5 * self.width,
            self.height - 8.0,
            x_label
        );
        let _ = writeln!(
            self.body,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="#000000" transform="rotate(-90 12 {:.2})">{}</text>"##,
            12.0,
            0.5 * self.height,
            0.5 * self.height,
            y_label
        );
    }

    pub fn title(&mut self, text: &str) {
        let _ = writeln!(
            self.body,
            r##"<text x="{:.2}" y="16" font-size="13" text-anchor="middle" fill="#000000">{}</text>"##,
            0.5 * self.width,
            text
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], color: &str, width: f64) {
        let mut path = String::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            if i > 0 {
                path.push(' ');
            }
            let _ = write!(path, "{:.2},{:.2}", self.sx(x), self.sy(y));
        }
        let _ = writeln!(
            self.body,
            r##"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="{width:.1}"/>"##
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, color: &str) {
        let _ = writeln!(
            self.body,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{r:.1}" fill="{color}"/>"##,
            self.sx(x),
            self.sy(y)
        );
    }

    pub fn label(&mut self, x: f64, y: f64, text: &str, color: &str) {
        let _ = writeln!(
            self.body,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" fill="{color}">{}</text>"##,
            self.sx(x),
            self.sy(y),
            text
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}
