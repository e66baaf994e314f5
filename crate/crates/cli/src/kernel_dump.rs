//! Kernel bank dumps: plain-text grids with a metadata header, 16-bit PGM
//! visualizations scaled to the kernel maximum, and the per-channel
//! mixture weights as CSV.

use std::path::Path;

use lrsim_core::net::DegradationModel;
use lrsim_core::GrayImage;

use crate::error::{CliError, Result};
use crate::imageio;

/// Writes `kernel_NN.txt`, `kernel_NN.pgm` and `weights.csv` into `dir`.
pub fn dump(model: &DegradationModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let bank = model.bank();
    let size = bank.size();
    let spec = bank.spec();
    for (i, kernel) in bank.kernels().iter().enumerate() {
        let mut text = String::new();
        text.push_str(&format!("# factor {}\n", kernel.factor));
        text.push_str(&format!("# angle_rad {}\n", kernel.angle));
        text.push_str(&format!("# aspect {}\n", spec.aspect));
        text.push_str(&format!("# roi_half_width {}\n", spec.roi_half_width));
        text.push_str(&format!("# size {size}\n"));
        for row in kernel.grid().chunks(size) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            text.push_str(&cells.join(" "));
            text.push('\n');
        }
        let txt_path = dir.join(format!("kernel_{i:02}.txt"));
        std::fs::write(&txt_path, text).map_err(|e| CliError::io(&txt_path, e))?;

        // Visualization scaled so the kernel maximum maps to full white.
        let max = kernel.grid().iter().cloned().fold(0.0f64, f64::max).max(1e-300);
        let scaled: Vec<f64> = kernel.grid().iter().map(|v| v / max).collect();
        let img = GrayImage::new(size, size, scaled)
            .expect("normalized kernel values lie in range");
        imageio::save_image_16(&img, &dir.join(format!("kernel_{i:02}.pgm")))?;
    }

    let weights = model.mixture_weights();
    let k = bank.len();
    let mut csv = String::from("channel");
    for i in 0..k {
        csv.push_str(&format!(",k{i:02}"));
    }
    csv.push('\n');
    for (c, row) in weights.chunks(k).enumerate() {
        csv.push_str(&format!("{c}"));
        for v in row {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    let csv_path = dir.join("weights.csv");
    std::fs::write(&csv_path, csv).map_err(|e| CliError::io(&csv_path, e))
}
