//! Binary PPM (P6, maxval 255) reader and writer.
//!
//! The writer emits the canonical form `P6\n<w> <h>\n255\n<payload>`; the
//! reader additionally accepts arbitrary whitespace and `#` comments in
//! the header, as the format allows. Byte-level round trips are exact for
//! canonical files.

use super::Image;
use crate::error::{Error, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_space_and_comments(&mut self) -> Result<()> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return Ok(());
            }
        }
    }

    fn read_number(&mut self) -> Result<usize> {
        self.skip_space_and_comments()?;
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a decimal number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are ascii")
            .parse::<usize>()
            .map_err(|e| self.err(format!("number out of range: {e}")))
    }
}

/// Decode a binary P6 PPM with maxval 255 into an [`Image`]; byte values
/// map to `u / 255`.
pub fn read_ppm(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(cur.err("not a binary PPM: magic \"P6\" missing"));
    }
    cur.pos = 2;
    let width = cur.read_number()?;
    let height = cur.read_number()?;
    let maxval_at = {
        cur.skip_space_and_comments()?;
        cur.pos
    };
    let maxval = cur.read_number()?;
    if maxval != 255 {
        cur.pos = maxval_at;
        return Err(cur.err(format!("unsupported maxval {maxval}, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(cur.err(format!("degenerate image size {width}x{height}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(cur.err("expected whitespace before pixel payload"));
    }
    cur.pos += 1;
    let need = 3 * width * height;
    let have = bytes.len() - cur.pos;
    if have < need {
        cur.pos = bytes.len();
        return Err(cur.err(format!(
            "truncated payload: need {need} bytes, found {have}"
        )));
    }
    let pixels = bytes[cur.pos..cur.pos + need]
        .iter()
        .map(|&u| u as f64 / 255.0)
        .collect();
    Image::new(width, height, pixels)
}

/// Encode an [`Image`] as canonical binary P6; values are quantized with
/// round-half-up to `round(v * 255)` and clamped to [0, 255].
pub fn write_ppm(img: &Image) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(
        img.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_pixel_red() {
        let bytes = b"P6\n1 1\n255\n\xff\x00\x00";
        let img = read_ppm(bytes).unwrap();
        assert_eq!(img.width, 1);
        assert_eq!(img.height, 1);
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn black_pixel_writes_header_and_zeros() {
        let img = Image::new(1, 1, vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(write_ppm(&img), b"P6\n1 1\n255\n\x00\x00\x00");
    }

    #[test]
    fn half_rounds_up_to_128() {
        let img = Image::new(1, 1, vec![0.5, 0.5, 0.5]).unwrap();
        let bytes = write_ppm(&img);
        assert_eq!(&bytes[bytes.len() - 3..], &[128, 128, 128]);
    }

    #[test]
    fn canonical_byte_round_trip() {
        let mut payload = Vec::new();
        for i in 0..9 {
            payload.push((i * 29 % 256) as u8);
        }
        let mut bytes = b"P6\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&payload);
        let img = read_ppm(&bytes).unwrap();
        assert_eq!(write_ppm(&img), bytes);
    }

    #[test]
    fn accepts_comments_and_loose_whitespace() {
        let bytes = b"P6 # a comment\n# another\n 2\t1 \n255 \x01\x02\x03\x04\x05\x06";
        let img = read_ppm(bytes).unwrap();
        assert_eq!(img.width, 2);
        assert_eq!(img.height, 1);
    }

    #[test]
    fn wrong_magic_reports_offset_zero() {
        let err = read_ppm(b"P5\n1 1\n255\n\x00").unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn wrong_maxval_is_a_parse_error() {
        let err = read_ppm(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00").unwrap_err();
        match err {
            Error::Parse { msg, .. } => assert!(msg.contains("65535"), "{msg}"),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn truncated_payload_reports_end_offset() {
        // 2 pixels need 6 payload bytes; provide 3.
        let bytes = b"P6\n2 1\n255\n\x01\x02\x03";
        let err = read_ppm(bytes).unwrap_err();
        match err {
            Error::Parse { offset, msg } => {
                assert_eq!(offset, bytes.len());
                assert!(msg.contains("need 6"), "{msg}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn image_round_trip_error_is_bounded_by_half_step() {
        // Quantization to 255 levels: worst-case error is 1/510 per channel.
        let vals: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let img = Image::new(10, 1, vals.clone()).unwrap();
        let back = read_ppm(&write_ppm(&img)).unwrap();
        for (a, b) in img.pixels.iter().zip(&back.pixels) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12, "{a} vs {b}");
        }
    }
}
