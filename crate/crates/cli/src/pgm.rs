//! Binary PGM (P5) reading and writing, 8-bit only.

use std::fs;
use std::path::Path;

use jpeg_compat::image::GrayImage;

use crate::error::{CliError, CliResult};

/// Parses a P5 image with maxval 255. Comments in the header are skipped.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> CliResult<GrayImage> {
    let malformed = |reason: &str| CliError::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("truncated header"));
        }
        fields.push(&bytes[start..pos]);
    }
    if fields[0] != b"P5" {
        return Err(malformed("not a binary PGM (P5) file"));
    }
    let number = |field: &[u8], what: &str| -> CliResult<usize> {
        std::str::from_utf8(field)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(&format!("invalid {what}")))
    };
    let width = number(fields[1], "width")?;
    let height = number(fields[2], "height")?;
    if number(fields[3], "maxval")? != 255 {
        return Err(malformed("maxval must be 255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let len = width * height;
    if bytes.len() < pos + len {
        return Err(malformed("truncated raster"));
    }
    GrayImage::new(width, height, bytes[pos..pos + len].to_vec()).map_err(CliError::from)
}

pub fn load_pgm(path: &Path) -> CliResult<GrayImage> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_pgm(&bytes, path)
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

pub fn save_pgm(path: &Path, image: &GrayImage) -> CliResult<()> {
    fs::write(path, encode_pgm(image)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_comment() {
        let img = GrayImage::new(3, 2, vec![0, 1, 2, 253, 254, 255]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(parse_pgm(&bytes, Path::new("x")).unwrap(), img);

        let mut commented = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(img.pixels());
        assert_eq!(parse_pgm(&commented, Path::new("x")).unwrap(), img);
    }

    #[test]
    fn rejects_bad_files() {
        let p = Path::new("x");
        assert!(parse_pgm(b"P2\n1 1\n255\n0", p).is_err());
        assert!(parse_pgm(b"P5\n2 2\n65535\n", p).is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x01\x02", p).is_err());
        assert!(parse_pgm(b"P5\n2", p).is_err());
        assert!(matches!(
            parse_pgm(b"P5\n2 2\n255\n\x01\x02", p),
            Err(CliError::Malformed { .. })
        ));
    }
}
