//! Binary PGM (`P5`) masks: values >= 128 are FREE.

use std::path::Path;

use crate::error::{Error, Result};

use super::FreeSpaceMask;

pub fn encode_pgm(mask: &FreeSpaceMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.cells().iter().map(|&f| if f { 255u8 } else { 0u8 }));
    out
}

pub fn write_pgm(mask: &FreeSpaceMask, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm(mask)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path, scale: f64) -> Result<FreeSpaceMask> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, scale).map_err(|msg| Error::format(path, msg))
}

/// Parses a `P5` image with maxval < 256.
pub fn parse_pgm(bytes: &[u8], scale: f64) -> std::result::Result<FreeSpaceMask, String> {
    let mut pos = 0usize;
    let mut next_token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = next_token()?;
    if magic != "P5" {
        return Err(format!("expected P5 magic, found {magic:?}"));
    }
    let mut number = |what: &str| -> std::result::Result<usize, String> {
        let tok = next_token()?;
        tok.parse::<usize>()
            .map_err(|_| format!("invalid PGM {what}: {tok:?}"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported PGM maxval {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let needed = width * height;
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() < needed {
        return Err(format!(
            "truncated PGM raster: expected {needed} bytes, found {}",
            data.len()
        ));
    }
    let cells = data[..needed].iter().map(|&v| v >= 128).collect();
    FreeSpaceMask::from_cells(width, height, scale, cells).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = FreeSpaceMask::all_free(6, 0.05).unwrap();
        m.set_free(1, 2, false);
        m.set_free(5, 5, false);
        let parsed = parse_pgm(&encode_pgm(&m), 0.05).unwrap();
        assert_eq!(parsed, m);
    }

    #[test]
    fn threshold_and_comments() {
        let mut bytes = b"P5\n# made by hand\n2 2\n255\n".to_vec();
        bytes.extend([127u8, 128, 0, 255]);
        let m = parse_pgm(&bytes, 0.1).unwrap();
        assert_eq!(m.cells(), &[false, true, false, true]);
    }

    #[test]
    fn truncated_raster_is_an_error() {
        let mut bytes = b"P5 4 4 255\n".to_vec();
        bytes.extend([255u8; 10]);
        let err = parse_pgm(&bytes, 0.1).unwrap_err();
        assert!(err.contains("truncated"), "{err}");
        assert!(parse_pgm(b"P2 2 2 255\n", 0.1).is_err());
    }
}
