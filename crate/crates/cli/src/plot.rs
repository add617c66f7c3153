//! Static PNG line plot of a sweep, drawn only from `sweep.csv` rows.
//!
//! Layout: mean LNRE against the axis value (blue polyline with square
//! markers), ±1 std whiskers (grey), axes from zero LNRE. Values are in the
//! CSV; the plot carries no text so it needs no font.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{CliError, CliResult};
use crate::sweep::SweepRow;

const WIDTH: u32 = 640;
const HEIGHT: u32 = 400;
const MARGIN: f64 = 40.0;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const GREY: Rgb<u8> = Rgb([150, 150, 150]);
const BLUE: Rgb<u8> = Rgb([31, 119, 180]);

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Bresenham segment.
fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        put(img, x, y, c);
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

fn square(img: &mut RgbImage, (x, y): (i64, i64), half: i64, c: Rgb<u8>) {
    for dx in -half..=half {
        for dy in -half..=half {
            put(img, x + dx, y + dy, c);
        }
    }
}

/// Render `rows` (in file order) to a PNG at `path`.
pub fn plot_sweep(rows: &[SweepRow], path: &Path) -> CliResult<()> {
    if rows.is_empty() {
        return Err(CliError::Plot("no rows to plot".into()));
    }
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    let (xmin, xmax) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.value), hi.max(r.value)));
    let ymax = rows
        .iter()
        .map(|r| finite(r.lnre_mean) + finite(r.lnre_std))
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.1;
    let (w, h) = (WIDTH as f64, HEIGHT as f64);
    let px = |x: f64| {
        let t = if xmax > xmin { (x - xmin) / (xmax - xmin) } else { 0.5 };
        (MARGIN + t * (w - 2.0 * MARGIN)).round() as i64
    };
    let py = |y: f64| (h - MARGIN - (y / ymax) * (h - 2.0 * MARGIN)).round() as i64;

    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, WHITE);
    let origin = (MARGIN as i64, py(0.0));
    line(&mut img, origin, ((w - MARGIN) as i64, origin.1), BLACK);
    line(&mut img, origin, (origin.0, MARGIN as i64), BLACK);
    for r in rows {
        let (m, s) = (finite(r.lnre_mean), finite(r.lnre_std));
        let x = px(r.value);
        line(&mut img, (x, py((m - s).max(0.0))), (x, py(m + s)), GREY);
        line(&mut img, (x, origin.1), (x, origin.1 + 4), BLACK);
    }
    for pair in rows.windows(2) {
        let a = (px(pair[0].value), py(finite(pair[0].lnre_mean)));
        let b = (px(pair[1].value), py(finite(pair[1].lnre_mean)));
        line(&mut img, a, b, BLUE);
        line(&mut img, (a.0, a.1 + 1), (b.0, b.1 + 1), BLUE);
    }
    for r in rows {
        square(&mut img, (px(r.value), py(finite(r.lnre_mean))), 3, BLUE);
    }
    img.save(path).map_err(|e| CliError::Plot(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, mean: f64, std: f64) -> SweepRow {
        SweepRow {
            axis: "bits".into(),
            value,
            trials: 5,
            lnre_mean: mean,
            lnre_std: std,
        }
    }

    #[test]
    fn writes_a_png_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [row(1.0, 0.4, 0.05), row(2.0, 0.2, 0.02), row(8.0, 0.03, 0.0)];
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        plot_sweep(&rows, &a).unwrap();
        plot_sweep(&rows, &b).unwrap();
        let bytes = std::fs::read(&a).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
        assert_eq!(bytes, std::fs::read(&b).unwrap());
        let img = image::open(&a).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (WIDTH, HEIGHT));
        assert!(img.pixels().any(|p| *p == BLUE));
    }

    #[test]
    fn single_point_and_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        plot_sweep(&[row(0.1, 0.0, 0.0)], &dir.path().join("one.png")).unwrap();
        assert!(plot_sweep(&[], &dir.path().join("none.png")).is_err());
    }
}
