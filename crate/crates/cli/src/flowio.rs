//! Flow-field export in the Middlebury `.flo` layout: float tag
//! 202021.25, width and height as little-endian i32, then row-major
//! interleaved (dx, dy) f32 pairs.

use std::io::{Cursor, Read};
use std::path::Path;

use stvu_core::frame::{FlowField, TimeIndex};

use crate::error::CliError;
use crate::pngio::write_atomic;

const TAG: f32 = 202021.25;

pub fn write_flo(flow: &FlowField, path: &Path) -> Result<(), CliError> {
    let (h, w) = (flow.h(), flow.w());
    let mut buf = Vec::with_capacity(12 + 8 * h * w);
    buf.extend_from_slice(&TAG.to_le_bytes());
    buf.extend_from_slice(&(w as i32).to_le_bytes());
    buf.extend_from_slice(&(h as i32).to_le_bytes());
    for y in 0..h {
        for x in 0..w {
            buf.extend_from_slice(&flow.dx(y, x).to_le_bytes());
            buf.extend_from_slice(&flow.dy(y, x).to_le_bytes());
        }
    }
    write_atomic(path, &buf)
}

pub fn read_flo(path: &Path, src_time: TimeIndex, dst_time: TimeIndex) -> Result<FlowField, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(e, path))?;
    let mut cur = Cursor::new(bytes.as_slice());
    let mut b4 = [0u8; 4];
    let mut next = |cur: &mut Cursor<&[u8]>| -> Result<[u8; 4], CliError> {
        cur.read_exact(&mut b4)
            .map_err(|_| CliError::Io(format!("truncated flow file {}", path.display())))?;
        Ok(b4)
    };
    let tag = f32::from_le_bytes(next(&mut cur)?);
    if tag != TAG {
        return Err(CliError::Io(format!(
            "{} is not a flow file (bad tag {tag})",
            path.display()
        )));
    }
    let w = i32::from_le_bytes(next(&mut cur)?) as usize;
    let h = i32::from_le_bytes(next(&mut cur)?) as usize;
    let mut dx = vec![0.0f32; h * w];
    let mut dy = vec![0.0f32; h * w];
    for i in 0..h * w {
        dx[i] = f32::from_le_bytes(next(&mut cur)?);
        dy[i] = f32::from_le_bytes(next(&mut cur)?);
    }
    let mut data = dx;
    data.extend_from_slice(&dy);
    Ok(FlowField::new(src_time, dst_time, h, w, data))
}
