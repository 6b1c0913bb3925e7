//! Minimal two-panel Bode plot as standalone SVG.

use std::fmt::Write;

const W: f64 = 720.0;
const PANEL_H: f64 = 220.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const GAP: f64 = 50.0;

fn polyline(out: &mut String, xs: &[f64], ys: &[f64], y0: f64, y_lo: f64, y_hi: f64) {
    let (x_lo, x_hi) = (xs[0].log10(), xs[xs.len() - 1].log10());
    let span_x = (x_hi - x_lo).max(1e-12);
    let span_y = (y_hi - y_lo).max(1e-12);
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let px = LEFT + (x.log10() - x_lo) / span_x * (W - LEFT - RIGHT);
            let py = y0 + PANEL_H - (y - y_lo) / span_y * PANEL_H;
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
}

fn frame(out: &mut String, y0: f64, label: &str, lo: f64, hi: f64) {
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{y0}" width="{}" height="{PANEL_H}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT
    );
    let _ = writeln!(out, r#"<text x="5" y="{}" font-size="12">{label}</text>"#, y0 + PANEL_H / 2.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{hi:.0}</text>"#, LEFT - 4.0, y0 + 10.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{lo:.0}</text>"#, LEFT - 4.0, y0 + PANEL_H);
}

/// Magnitude (dB re 1 V/pC) and phase against log frequency.
pub fn bode_svg(freqs: &[f64], mag_v_per_c: &[f64], phase_deg: &[f64]) -> String {
    let db: Vec<f64> = mag_v_per_c.iter().map(|m| 20.0 * (m * 1e-12).log10()).collect();
    let top = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (db_hi, db_lo) = ((top / 10.0).ceil() * 10.0, (top / 10.0).ceil() * 10.0 - 80.0);
    let clipped: Vec<f64> = db.iter().map(|d| d.max(db_lo)).collect();
    let h = TOP + 2.0 * PANEL_H + GAP + 30.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{h}" font-family="sans-serif">"#);
    frame(&mut out, TOP, "dB V/pC", db_lo, db_hi);
    polyline(&mut out, freqs, &clipped, TOP, db_lo, db_hi);
    let y1 = TOP + PANEL_H + GAP;
    frame(&mut out, y1, "phase deg", -180.0, 180.0);
    polyline(&mut out, freqs, phase_deg, y1, -180.0, 180.0);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{:.3e} Hz to {:.3e} Hz (log)</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        h - 8.0,
        freqs[0],
        freqs[freqs.len() - 1]
    );
    out.push_str("</svg>\n");
    out
}
