use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::DatasetError;

fn io_error(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Writes `text`, gzip-compressed when the path ends in `.gz`.
pub fn write_text(path: &Path, text: &str) -> Result<(), DatasetError> {
    let err = |e| io_error(path, e);
    let file = File::create(path).map_err(err)?;
    if is_gz(path) {
        // Fixed header fields keep compressed output byte-stable.
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(text.as_bytes()).map_err(err)?;
        enc.finish().map_err(err)?;
    } else {
        let mut file = file;
        file.write_all(text.as_bytes()).map_err(err)?;
    }
    Ok(())
}

/// Reads a text file, transparently decompressing `.gz`.
pub fn read_text(path: &Path) -> Result<String, DatasetError> {
    let err = |e| io_error(path, e);
    let file = File::open(path).map_err(err)?;
    let mut text = String::new();
    if is_gz(path) {
        GzDecoder::new(file).read_to_string(&mut text).map_err(err)?;
    } else {
        let mut file = file;
        file.read_to_string(&mut text).map_err(err)?;
    }
    Ok(text)
}
