//! Median error against sampling percentage, drawn straight into a PNG.

use std::path::Path;

use delta_mri::sim::{Method, SweepResult};
use image::{Rgb, RgbImage};

pub const WIDTH: u32 = 800;
pub const HEIGHT: u32 = 600;

const LEFT: i64 = 90;
const RIGHT: i64 = 170;
const TOP: i64 = 40;
const BOTTOM: i64 = 70;

const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const GREY: Rgb<u8> = Rgb([210, 210, 210]);

fn color(m: Method) -> Rgb<u8> {
    match m {
        Method::Delta => Rgb([200, 30, 30]),
        Method::Tcs => Rgb([30, 90, 200]),
        Method::Zidft => Rgb([30, 150, 60]),
    }
}

/// 5x7 glyphs, one byte per row, bit 4 leftmost.
fn glyph(c: char) -> [u8; 7] {
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0, 0, 0, 0, 0, 0x0C, 0x0C],
        '-' => [0, 0, 0, 0x1F, 0, 0, 0],
        '%' => [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
        'a' => [0, 0, 0x0E, 0x01, 0x0F, 0x11, 0x0F],
        'c' => [0, 0, 0x0E, 0x10, 0x10, 0x11, 0x0E],
        'd' => [0x01, 0x01, 0x0D, 0x13, 0x11, 0x11, 0x0F],
        'e' => [0, 0, 0x0E, 0x11, 0x1F, 0x10, 0x0E],
        'f' => [0x06, 0x09, 0x08, 0x1C, 0x08, 0x08, 0x08],
        'g' => [0, 0, 0x0F, 0x11, 0x0F, 0x01, 0x0E],
        'i' => [0x04, 0, 0x0C, 0x04, 0x04, 0x04, 0x0E],
        'l' => [0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'm' => [0, 0, 0x1A, 0x15, 0x15, 0x11, 0x11],
        'n' => [0, 0, 0x16, 0x19, 0x11, 0x11, 0x11],
        'p' => [0, 0, 0x1E, 0x11, 0x1E, 0x10, 0x10],
        's' => [0, 0, 0x0E, 0x10, 0x0E, 0x01, 0x1E],
        't' => [0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06],
        'z' => [0, 0, 0x1F, 0x02, 0x04, 0x08, 0x1F],
        _ => [0; 7],
    }
}

struct Canvas(RgbImage);

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: Rgb<u8>) {
        if x >= 0 && y >= 0 && x < WIDTH as i64 && y < HEIGHT as i64 {
            self.0.put_pixel(x as u32, y as u32, c);
        }
    }

    fn dot(&mut self, x: i64, y: i64, r: i64, c: Rgb<u8>) {
        for dy in -r..=r {
            for dx in -r..=r {
                self.put(x + dx, y + dy, c);
            }
        }
    }

    /// Bresenham line with a square pen of half-width `r`.
    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), r: i64, c: Rgb<u8>) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.dot(x, y, r, c);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    fn text(&mut self, s: &str, x: i64, y: i64, scale: i64) {
        for (k, ch) in s.chars().enumerate() {
            let g = glyph(ch);
            let ox = x + k as i64 * 6 * scale;
            for (row, bits) in g.iter().enumerate() {
                for col in 0..5 {
                    if bits & (0x10 >> col) != 0 {
                        for sy in 0..scale {
                            for sx in 0..scale {
                                self.put(ox + col * scale + sx, y + row as i64 * scale + sy, BLACK);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn text_width(s: &str, scale: i64) -> i64 {
    s.chars().count() as i64 * 6 * scale
}

fn label(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.into() }
}

/// Draws one polyline of median epsilon per method.
pub fn write_plot(path: &Path, result: &SweepResult, pcts: &[f64], methods: &[Method]) -> image::ImageResult<()> {
    let mut cv = Canvas(RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([255, 255, 255])));
    let (x0, x1) = (LEFT, WIDTH as i64 - RIGHT);
    let (y0, y1) = (TOP, HEIGHT as i64 - BOTTOM);

    let mut xs: Vec<f64> = pcts.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let (mut lo, mut hi) = (xs.first().copied().unwrap_or(0.0), xs.last().copied().unwrap_or(1.0));
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let series: Vec<(Method, Vec<(f64, f64)>)> = methods
        .iter()
        .map(|&m| (m, xs.iter().filter_map(|&p| result.median(m, p).map(|e| (p, e))).collect()))
        .collect();
    let top = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.1))
        .filter(|e| e.is_finite())
        .fold(0.0, f64::max);
    let ymax = if top > 0.0 { top * 1.1 } else { 1.0 };

    let px = |p: f64| x0 + ((p - lo) / (hi - lo) * (x1 - x0) as f64).round() as i64;
    let py = |e: f64| y1 - (e.min(ymax) / ymax * (y1 - y0) as f64).round() as i64;

    for k in 0..=5 {
        let e = ymax * k as f64 / 5.0;
        let y = py(e);
        cv.line((x0, y), (x1, y), 0, GREY);
        let s = label(e);
        cv.text(&s, x0 - 10 - text_width(&s, 2), y - 7, 2);
    }
    for &p in &xs {
        let x = px(p);
        cv.line((x, y1), (x, y1 + 6), 0, BLACK);
        let s = label(p);
        cv.text(&s, x - text_width(&s, 2) / 2, y1 + 12, 2);
    }
    cv.line((x0, y0), (x0, y1), 1, BLACK);
    cv.line((x0, y1), (x1, y1), 1, BLACK);
    cv.text("sampling %", (x0 + x1) / 2 - text_width("sampling %", 2) / 2, y1 + 40, 2);
    cv.text("median eps", 8, 10, 2);

    for (k, (m, pts)) in series.iter().enumerate() {
        let c = color(*m);
        // Later series get a thinner pen so coincident curves stay visible.
        let pen = 2 - (k as i64).min(2);
        for w in pts.windows(2) {
            cv.line((px(w[0].0), py(w[0].1)), (px(w[1].0), py(w[1].1)), pen, c);
        }
        for &(p, e) in pts {
            cv.dot(px(p), py(e), 4 - (k as i64).min(2), c);
        }
        let ly = y0 + 20 + 30 * k as i64;
        cv.line((x1 + 20, ly), (x1 + 50, ly), 1, c);
        cv.text(m.name(), x1 + 60, ly - 7, 2);
    }
    cv.0.save(path)
}
