//! Image loading/saving and the paired-directory convention
//! `<name>_HR.pgm` / `<name>_LR.pgm` (PNG accepted read-only).

use std::path::{Path, PathBuf};

use lrsim_core::{GrayImage, ImagePair};

use crate::error::{CliError, Result};
use crate::{pgm, pngio};

/// Loads a grayscale image, sniffing PGM or PNG from the magic bytes.
/// Intensities are normalized by the format's maxval.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let mut magic = [0u8; 8];
    {
        use std::io::Read;
        let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let n = f.read(&mut magic).map_err(|e| CliError::io(path, e))?;
        if n < 2 {
            return Err(CliError::format(format!("{}: file too short", path.display())));
        }
    }
    if &magic[..2] == b"P5" {
        pgm::read(path)
    } else if magic == *b"\x89PNG\r\n\x1a\n" {
        pngio::read(path)
    } else {
        Err(CliError::format(format!(
            "{}: unsupported format (want binary PGM or grayscale PNG)",
            path.display()
        )))
    }
}

/// Saves as 8-bit binary PGM.
pub fn save_image(img: &GrayImage, path: &Path) -> Result<()> {
    pgm::write(img, path, 255)
}

/// Saves as 16-bit binary PGM.
pub fn save_image_16(img: &GrayImage, path: &Path) -> Result<()> {
    pgm::write(img, path, 65535)
}

fn strip_suffix(name: &str) -> Option<(&str, &str)> {
    for suffix in ["_HR.pgm", "_HR.png"] {
        if let Some(stem) = name.strip_suffix(suffix) {
            return Some((stem, &suffix[3..]));
        }
    }
    None
}

/// Loads every `<name>_HR.*` / `<name>_LR.*` pair in a directory, sorted by
/// name. The scale is inferred from the dimension ratio and must be an
/// exact integer, identical on both axes.
pub fn load_pair_dir(dir: &Path) -> Result<Vec<(String, ImagePair)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut stems: Vec<(String, String)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some((stem, ext)) = strip_suffix(&name) {
            stems.push((stem.to_string(), ext.to_string()));
        }
    }
    stems.sort();
    let mut pairs = Vec::with_capacity(stems.len());
    for (stem, ext) in stems {
        let hr_path = dir.join(format!("{stem}_HR{ext}"));
        let hr = load_image(&hr_path)?;
        // The LR member may use either format.
        let lr_path = ["pgm", "png"]
            .iter()
            .map(|e| dir.join(format!("{stem}_LR.{e}")))
            .find(|p| p.exists())
            .ok_or_else(|| {
                CliError::format(format!("{stem}: missing {stem}_LR.pgm next to the HR image"))
            })?;
        let lr = load_image(&lr_path)?;
        if lr.height() == 0 || hr.height() % lr.height() != 0 || hr.width() % lr.width() != 0 {
            return Err(CliError::shape(format!(
                "{stem}: HR {}x{} is not an integer multiple of LR {}x{}",
                hr.height(),
                hr.width(),
                lr.height(),
                lr.width()
            )));
        }
        let scale = hr.height() / lr.height();
        if hr.width() / lr.width() != scale || scale < 2 {
            return Err(CliError::shape(format!(
                "{stem}: inconsistent HR:LR ratio ({}x{} vs {}x{})",
                hr.height(),
                hr.width(),
                lr.height(),
                lr.width()
            )));
        }
        let pair = ImagePair::new(hr, lr, scale).map_err(|e| CliError::shape(e.to_string()))?;
        pairs.push((stem, pair));
    }
    if pairs.is_empty() {
        return Err(CliError::format(format!(
            "{}: no <name>_HR.pgm / <name>_LR.pgm pairs found",
            dir.display()
        )));
    }
    Ok(pairs)
}

/// Writes one pair under the directory convention (8-bit PGM).
pub fn save_pair(dir: &Path, name: &str, pair: &ImagePair) -> Result<(PathBuf, PathBuf)> {
    let hr_path = dir.join(format!("{name}_HR.pgm"));
    let lr_path = dir.join(format!("{name}_LR.pgm"));
    save_image(&pair.hr, &hr_path)?;
    save_image(&pair.lr, &lr_path)?;
    Ok((hr_path, lr_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let hr = GrayImage::constant(8, 8, 0.25).unwrap();
        let lr = GrayImage::constant(4, 4, 0.5).unwrap();
        let pair = ImagePair::new(hr, lr, 2).unwrap();
        save_pair(dir.path(), "a", &pair).unwrap();
        save_pair(dir.path(), "b", &pair).unwrap();
        let loaded = load_pair_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "a");
        assert_eq!(loaded[0].1.scale, 2);
        for (a, b) in loaded[0].1.hr.data().iter().zip(pair.hr.data()) {
            assert!((a - b).abs() <= 1.0 / 510.0);
        }
    }

    #[test]
    fn mismatched_ratio_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let hr = GrayImage::constant(9, 8, 0.2).unwrap();
        let lr = GrayImage::constant(4, 4, 0.2).unwrap();
        save_image(&hr, &dir.path().join("x_HR.pgm")).unwrap();
        save_image(&lr, &dir.path().join("x_LR.pgm")).unwrap();
        assert!(matches!(load_pair_dir(dir.path()), Err(CliError::Shape(_))));
    }

    #[test]
    fn empty_dir_and_missing_lr() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_pair_dir(dir.path()), Err(CliError::Format(_))));
        let hr = GrayImage::constant(4, 4, 0.2).unwrap();
        save_image(&hr, &dir.path().join("y_HR.pgm")).unwrap();
        assert!(matches!(load_pair_dir(dir.path()), Err(CliError::Format(_))));
    }

    #[test]
    fn unsupported_format_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        std::fs::write(&p, b"GIF89a junk").unwrap();
        assert!(matches!(load_image(&p), Err(CliError::Format(_))));
        assert!(matches!(
            load_image(&dir.path().join("missing.pgm")),
            Err(CliError::Io { .. })
        ));
    }
}
