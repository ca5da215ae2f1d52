//! Frame directories: zero-padded sequentially numbered 8-bit RGB PNG
//! files. Pixels are [0,1] floats internally and quantize only here, at
//! the file boundary; read(write(clip)) is bit-exact for 8-bit values.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb};
use stvu_core::frame::{Clip, Frame, TimeIndex, CHANNELS};

use crate::error::CliError;

/// File name of frame `index`.
pub fn frame_name(index: usize) -> String {
    format!("{index:06}.png")
}

pub fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_frame(frame: &Frame, path: &Path) -> Result<(), CliError> {
    let (h, w) = (frame.h() as u32, frame.w() as u32);
    let img = ImageBuffer::from_fn(w, h, |x, y| {
        Rgb([
            quantize_u8(frame.at(0, y as usize, x as usize)),
            quantize_u8(frame.at(1, y as usize, x as usize)),
            quantize_u8(frame.at(2, y as usize, x as usize)),
        ])
    });
    img.save(path).map_err(|e| CliError::io(e, path))
}

pub fn read_frame(path: &Path, time_index: TimeIndex) -> Result<Frame, CliError> {
    let img = image::open(path).map_err(|e| CliError::io(e, path))?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0f32; CHANNELS * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..CHANNELS {
            data[(c * h + y as usize) * w + x as usize] = px.0[c] as f32 / 255.0;
        }
    }
    Ok(Frame::new(time_index, h, w, data))
}

/// Write a clip as 000000.png, 000001.png, ... into `dir`.
pub fn write_frames(clip: &Clip, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(e, dir))?;
    for (i, frame) in clip.frames.iter().enumerate() {
        write_frame(frame, &dir.join(frame_name(i)))?;
    }
    Ok(())
}

/// Read a full frame directory. Numbering must be gapless from 000000;
/// a missing index is an error naming the gap.
pub fn read_frames(dir: &Path) -> Result<Clip, CliError> {
    let mut indices: Vec<usize> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(e, dir))? {
        let entry = entry.map_err(|e| CliError::io(e, dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".png") {
            if let Ok(idx) = stem.parse::<usize>() {
                indices.push(idx);
            }
        }
    }
    if indices.is_empty() {
        return Err(CliError::Io(format!("no frames in {}", dir.display())));
    }
    indices.sort_unstable();
    for (expect, &got) in indices.iter().enumerate() {
        if got != expect {
            return Err(CliError::Io(format!(
                "gap in frame numbering of {}: expected {} next, found {}",
                dir.display(),
                frame_name(expect),
                frame_name(got)
            )));
        }
    }
    let frames = indices
        .iter()
        .map(|&i| read_frame(&dir.join(frame_name(i)), TimeIndex::from_integer(i as i64)))
        .collect::<Result<Vec<_>, _>>()?;
    Clip::new(frames, None).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Clip subdirectories of a corpus root, sorted by name.
pub fn list_clip_dirs(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| CliError::io(e, root))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Atomic write: temp file then rename. `STVU_SCRATCH` overrides the
/// staging directory (it must be on the same filesystem as the target).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let staging = std::env::var_os("STVU_SCRATCH")
        .map(PathBuf::from)
        .unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&staging).map_err(|e| CliError::io(e, &staging))?;
    let tmp = staging.join(format!(
        ".{}.tmp-{}",
        path.file_name().unwrap_or_default().to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(e, &tmp))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(e, path))
}
