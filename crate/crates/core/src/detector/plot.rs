//! Small deterministic PNG charts for prompt attachments and reports.

use image::codecs::png::PngEncoder;
use image::{ImageEncoder, Rgb, RgbImage};

const WIDTH: u32 = 320;
const CURVE_HEIGHT: u32 = 140;
const BAR_HEIGHT: u32 = 60;
const FLOOR_DB: f64 = -60.0;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([160, 160, 160]);
const CURVE: Rgb<u8> = Rgb([20, 60, 160]);
const BAR_COLORS: [Rgb<u8>; 4] = [Rgb([200, 80, 40]), Rgb([40, 150, 60]), Rgb([120, 60, 170]), Rgb([90, 90, 90])];

/// FFT-order spectrum rotated so that 0 Hz sits in the middle.
pub fn fft_shift(v: &[f64]) -> Vec<f64> {
    let half = v.len().div_ceil(2);
    v[half..].iter().chain(&v[..half]).copied().collect()
}

fn to_db(v: &[f64]) -> Vec<f64> {
    let peak = v.iter().cloned().fold(0.0, f64::max);
    v.iter()
        .map(|&x| if peak > 0.0 && x > 0.0 { (20.0 * (x / peak).log10()).max(FLOOR_DB) } else { FLOOR_DB })
        .collect()
}

fn vline(img: &mut RgbImage, x: u32, y0: u32, y1: u32, color: Rgb<u8>) {
    for y in y0.min(y1)..=y0.max(y1) {
        img.put_pixel(x, y, color);
    }
}

/// Marginal spectrum in dB (top) above one bar per feature, each bar's
/// height being `value / full_scale` clamped to `[0, 1]`.
pub fn feature_chart(marginal: &[f64], bars: &[(f64, f64)]) -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, CURVE_HEIGHT + BAR_HEIGHT, BACKGROUND);
    for x in 0..WIDTH {
        img.put_pixel(x, CURVE_HEIGHT - 1, AXIS);
    }
    let db = to_db(&fft_shift(marginal));
    if !db.is_empty() {
        let y_of = |v: f64| -> u32 {
            let t = (v - FLOOR_DB) / -FLOOR_DB;
            ((1.0 - t) * (CURVE_HEIGHT - 2) as f64).round() as u32
        };
        let mut prev = None;
        for x in 0..WIDTH {
            let idx = ((x as usize * db.len()) / WIDTH as usize).min(db.len() - 1);
            let y = y_of(db[idx]);
            vline(&mut img, x, y, prev.unwrap_or(y), CURVE);
            prev = Some(y);
        }
    }
    if !bars.is_empty() {
        let slot = WIDTH / bars.len() as u32;
        for (i, &(value, full)) in bars.iter().enumerate() {
            let frac = if full > 0.0 && value.is_finite() { (value / full).clamp(0.0, 1.0) } else { 0.0 };
            let h = (frac * (BAR_HEIGHT - 4) as f64).round() as u32;
            let color = BAR_COLORS[i % BAR_COLORS.len()];
            for x in i as u32 * slot + slot / 4..(i as u32 + 1) * slot - slot / 4 {
                for y in 0..h {
                    img.put_pixel(x, CURVE_HEIGHT + BAR_HEIGHT - 1 - y, color);
                }
            }
        }
    }
    img
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_valid_png_and_stable() {
        let marginal: Vec<f64> = (0..128).map(|k| if k == 10 { 50.0 } else { 1.0 }).collect();
        let a = encode_png(&feature_chart(&marginal, &[(1.0, 2.0), (3.0, 5.5)]));
        let b = encode_png(&feature_chart(&marginal, &[(1.0, 2.0), (3.0, 5.5)]));
        assert_eq!(a, b);
        assert_eq!(&a[..8], b"\x89PNG\r\n\x1a\n");
        let decoded = image::load_from_memory(&a).unwrap();
        assert_eq!(decoded.width(), WIDTH);
    }

    #[test]
    fn shift_centers_dc() {
        assert_eq!(fft_shift(&[0.0, 1.0, 2.0, -2.0, -1.0]), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(fft_shift(&[0.0, 1.0, -2.0, -1.0]), vec![-2.0, -1.0, 0.0, 1.0]);
    }
}
