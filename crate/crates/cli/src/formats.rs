use std::path::{Path, PathBuf};

use cnnm::io;
use cnnm::DenseTensor;

use crate::failure::Failure;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Pgm,
    Cnt1,
}

impl Format {
    /// Chosen by extension; anything unrecognized is read as CNT1.
    pub fn of(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") | Some("txt") => Format::Csv,
            Some("pgm") => Format::Pgm,
            _ => Format::Cnt1,
        }
    }
}

/// A CSV series comes back as a vector.
pub fn read_tensor(path: &Path) -> Result<DenseTensor, Failure> {
    let read = match Format::of(path) {
        Format::Csv => io::read_series_csv(path).and_then(DenseTensor::from_vec),
        Format::Pgm => io::read_pgm(path),
        Format::Cnt1 => io::read_cnt1(path),
    };
    read.map_err(|e| Failure::reading(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    io::write_atomic(path, text.as_bytes()).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn write_cnt1(path: &Path, x: &DenseTensor) -> Result<(), Failure> {
    io::write_cnt1(path, x).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn write_pgm(path: &Path, x: &DenseTensor) -> Result<(), Failure> {
    io::write_pgm(path, x).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn out_dir(dir: &Path) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}
