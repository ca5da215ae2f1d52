//! False-color rendering of confidence-score maps: low values dark blue,
//! high values red, through cyan/yellow (a fixed jet-style gradient so
//! images are comparable across runs).

use std::path::Path;

use image::{ImageBuffer, Rgb};
use stvu_core::model::GrayMap;

use crate::error::CliError;

/// Map a [0,1] score to the fixed blue -> red gradient.
pub fn colorize(v: f32) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0);
    // piecewise-linear: dark blue, blue, cyan, yellow, red
    let stops: [(f32, [f32; 3]); 5] = [
        (0.0, [0.0, 0.0, 0.5]),
        (0.25, [0.0, 0.0, 1.0]),
        (0.5, [0.0, 1.0, 1.0]),
        (0.75, [1.0, 1.0, 0.0]),
        (1.0, [1.0, 0.0, 0.0]),
    ];
    let mut rgb = stops[4].1;
    for w in stops.windows(2) {
        let (t0, c0) = w[0];
        let (t1, c1) = w[1];
        if v <= t1 {
            let t = (v - t0) / (t1 - t0);
            rgb = [
                c0[0] + t * (c1[0] - c0[0]),
                c0[1] + t * (c1[1] - c0[1]),
                c0[2] + t * (c1[2] - c0[2]),
            ];
            break;
        }
    }
    [
        (rgb[0] * 255.0).round() as u8,
        (rgb[1] * 255.0).round() as u8,
        (rgb[2] * 255.0).round() as u8,
    ]
}

pub fn write_heatmap(map: &GrayMap, path: &Path) -> Result<(), CliError> {
    let img = ImageBuffer::from_fn(map.w as u32, map.h as u32, |x, y| {
        Rgb(colorize(map.data[y as usize * map.w + x as usize]))
    });
    img.save(path).map_err(|e| CliError::io(e, path))
}
