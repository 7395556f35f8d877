//! Static timeline plot: probability curve, threshold, ground-truth bands and
//! detection markers.

use std::fmt::Write;

use intake_core::detector::DetectionList;
use intake_core::timeline::{FrameEvent, ProbabilitySeries};

const WIDTH: f64 = 1200.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

pub struct Plot<'a> {
    pub probs: &'a ProbabilitySeries,
    pub detections: &'a DetectionList,
    pub events: &'a [FrameEvent],
    pub threshold: f64,
}

impl Plot<'_> {
    fn x(&self, frame: f64) -> f64 {
        let first = self.probs.start_frame() as f64;
        let span = (self.probs.len().max(2) - 1) as f64;
        MARGIN + (frame - first) / span * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, p: f64) -> f64 {
        HEIGHT - MARGIN - p * (HEIGHT - 2.0 * MARGIN)
    }

    fn prob_at(&self, frame: u64) -> f64 {
        frame
            .checked_sub(self.probs.start_frame())
            .and_then(|i| self.probs.probs().get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let top = self.y(1.0);
        let bottom = self.y(0.0);

        let _ = writeln!(s, r#"<g class="ground-truth" fill="palegreen" fill-opacity="0.5">"#);
        for e in self.events {
            let x0 = self.x(e.first as f64 - 0.5);
            let x1 = self.x(e.last as f64 + 0.5);
            let _ = writeln!(
                s,
                r#"<rect class="gt" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                x0,
                top,
                x1 - x0,
                bottom - top
            );
        }
        let _ = writeln!(s, "</g>");

        let _ = writeln!(
            s,
            r#"<line class="axis" x1="{MARGIN}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/>"#,
            WIDTH - MARGIN
        );

        let points: Vec<String> = self
            .probs
            .probs()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let frame = self.probs.start_frame() + i as u64;
                format!("{:.2},{:.2}", self.x(frame as f64), self.y(p))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="probability" fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#,
            points.join(" ")
        );

        let ty = self.y(self.threshold);
        let _ = writeln!(
            s,
            r#"<line class="threshold" x1="{MARGIN}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
            WIDTH - MARGIN
        );

        let _ = writeln!(s, r#"<g class="detections" fill="darkorange">"#);
        for &f in self.detections.frames() {
            let _ = writeln!(
                s,
                r#"<circle class="detection" cx="{:.2}" cy="{:.2}" r="4"/>"#,
                self.x(f as f64),
                self.y(self.prob_at(f))
            );
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="12">p_t = {}, {} detections, {} events</text>"#,
            self.threshold,
            self.detections.len(),
            self.events.len()
        );
        s.push_str("</svg>\n");
        s
    }
}
