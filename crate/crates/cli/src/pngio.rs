//! Grayscale PNG reading (read-only; color inputs are rejected).

use std::path::Path;

use lrsim_core::GrayImage;
use png::{BitDepth, ColorType};

use crate::error::{CliError, Result};

pub fn read(path: &Path) -> Result<GrayImage> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| CliError::format(format!("bad PNG: {e}")))?;
    let info = reader.info();
    if info.color_type != ColorType::Grayscale {
        return Err(CliError::format(format!(
            "PNG is {:?}, not grayscale; convert it explicitly first",
            info.color_type
        )));
    }
    let depth = info.bit_depth;
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| CliError::format(format!("bad PNG data: {e}")))?;
    let bytes = &buf[..frame.buffer_size()];
    let values: Vec<f64> = match depth {
        BitDepth::Eight => bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        BitDepth::Sixteen => bytes
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64 / 65535.0)
            .collect(),
        other => {
            return Err(CliError::format(format!(
                "unsupported PNG bit depth {other:?} (want 8 or 16)"
            )))
        }
    };
    GrayImage::new(h, w, values).map_err(|e| CliError::format(e.to_string()))
}
