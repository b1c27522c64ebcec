use std::io::{Read, Write};

use super::{FrameSeries, GridLayout, TrafficFrame};
use crate::error::{PanError, Result};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"PANGRID1";
const HEADER_LEN: usize = 32;

/// Writes the frame archive: a 32-byte header (magic, then `T, I, J, K` as
/// little-endian `u32`, then 8 reserved zero bytes) followed by every count
/// as a little-endian `u32` in `(t, i, j, k)` order.
pub fn write_archive<W: Write>(series: &FrameSeries, mut w: W) -> Result<()> {
    let l = series.layout;
    let mut header = [0u8; HEADER_LEN];
    header[..8].copy_from_slice(ARCHIVE_MAGIC);
    for (k, v) in [series.len(), l.rows, l.cols, l.states].into_iter().enumerate() {
        let v = u32::try_from(v)
            .map_err(|_| PanError::Data(format!("archive dimension {v} exceeds u32")))?;
        header[8 + 4 * k..12 + 4 * k].copy_from_slice(&v.to_le_bytes());
    }
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(series.len() * l.frame_len() * 4);
    for f in &series.frames {
        for c in &f.counts {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads an archive written by [`write_archive`]; slots are numbered from 0.
pub fn read_archive<R: Read>(mut r: R) -> Result<FrameSeries> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| PanError::Data(format!("frame archive header: {e}")))?;
    if &header[..8] != ARCHIVE_MAGIC {
        return Err(PanError::Data("not a PANGRID1 frame archive".into()));
    }
    let field = |k: usize| u32::from_le_bytes(header[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as usize;
    let (t, rows, cols, states) = (field(0), field(1), field(2), field(3));
    let layout = GridLayout { rows, cols, states };
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let expected = t * layout.frame_len() * 4;
    if body.len() != expected {
        return Err(PanError::Data(format!(
            "frame archive body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let counts: Vec<u32> = body
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let frames = counts
        .chunks(layout.frame_len().max(1))
        .take(t)
        .enumerate()
        .map(|(slot, c)| TrafficFrame {
            slot,
            counts: c.to_vec(),
        })
        .collect();
    Ok(FrameSeries { layout, frames })
}
