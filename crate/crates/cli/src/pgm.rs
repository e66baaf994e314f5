//! Binary PGM (P5) reading and writing, 8- and 16-bit.
//!
//! Header per the Netpbm convention: `P5`, whitespace-separated width,
//! height and maxval with `#` comments allowed, one whitespace byte, then
//! raw samples (big-endian pairs when maxval > 255).

use std::path::Path;

use lrsim_core::GrayImage;

use crate::error::{CliError, Result};

/// Parses the three header integers, skipping whitespace and comments.
/// Returns (width, height, maxval, data offset).
fn parse_header(bytes: &[u8]) -> Result<(usize, usize, u32, usize)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(CliError::format("not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(CliError::format("truncated PGM header")),
            }
        }
        let start = pos;
        while let Some(b) = bytes.get(pos) {
            if b.is_ascii_digit() {
                pos += 1;
            } else {
                break;
            }
        }
        if pos == start {
            return Err(CliError::format("malformed PGM header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ASCII");
        *field = text
            .parse()
            .map_err(|_| CliError::format("PGM header field out of range"))?;
    }
    // Exactly one whitespace byte separates the header from the samples.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(CliError::format("missing whitespace before PGM data")),
    }
    let (w, h, maxval) = (fields[0] as usize, fields[1] as usize, fields[2] as u32);
    if w == 0 || h == 0 {
        return Err(CliError::format("PGM has zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(CliError::format(format!("unsupported PGM maxval {maxval}")));
    }
    Ok((w, h, maxval, pos))
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let (w, h, maxval, offset) = parse_header(bytes)?;
    let wide = maxval > 255;
    let sample_bytes = if wide { 2 } else { 1 };
    let expected = w * h * sample_bytes;
    let data = bytes
        .get(offset..offset + expected)
        .ok_or_else(|| CliError::format("PGM pixel data truncated"))?;
    let scale = 1.0 / maxval as f64;
    let values: Vec<f64> = if wide {
        data.chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64 * scale)
            .collect()
    } else {
        data.iter().map(|&b| b as f64 * scale).collect()
    };
    for &v in &values {
        if v > 1.0 {
            return Err(CliError::format("PGM sample exceeds maxval"));
        }
    }
    GrayImage::new(h, w, values).map_err(|e| CliError::format(e.to_string()))
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes)
}

pub fn encode(img: &GrayImage, maxval: u32) -> Vec<u8> {
    debug_assert!(maxval == 255 || maxval == 65535);
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    if maxval > 255 {
        for &v in img.data() {
            let q = (v * maxval as f64).round() as u16;
            out.extend_from_slice(&q.to_be_bytes());
        }
    } else {
        for &v in img.data() {
            out.push((v * maxval as f64).round() as u8);
        }
    }
    out
}

pub fn write(img: &GrayImage, path: &Path, maxval: u32) -> Result<()> {
    std::fs::write(path, encode(img, maxval)).map_err(|e| CliError::io(path, e))
}
