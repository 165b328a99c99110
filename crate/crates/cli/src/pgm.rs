//! Binary (P5) 8-bit greyscale images.

use ae1svm_core::Matrix;

/// Intensities are min-max scaled per image to 0..=255; a constant image is all zero.
pub fn encode(m: &Matrix) -> Vec<u8> {
    let (lo, hi) = m
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    out.extend(m.as_slice().iter().map(|&v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round() as u8
        } else {
            0
        }
    }));
    out
}
