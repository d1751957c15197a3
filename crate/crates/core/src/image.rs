//! Grayscale images in `[0,1]` and binary PGM (P5) reading/writing.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuf {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl ImageBuf {
    pub fn new(width: usize, height: usize) -> Self {
        ImageBuf { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(CoreError::SizeMismatch { a: data.len(), b: width * height });
        }
        Ok(ImageBuf { width, height, data })
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.data[row * self.width + col] = v;
    }

    pub fn on_pixel_count(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    /// Nearest-neighbor integer upscale (pixel replication).
    pub fn upscale(&self, factor: usize) -> ImageBuf {
        assert!(factor >= 1);
        let mut out = ImageBuf::new(self.width * factor, self.height * factor);
        for r in 0..out.height {
            for c in 0..out.width {
                out.set(r, c, self.get(r / factor, c / factor));
            }
        }
        out
    }
}

/// Three orthographic views, fixed order: x-axis, y-axis, z-axis projection.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteSet {
    pub views: [ImageBuf; 3],
}

impl SilhouetteSet {
    pub fn size(&self) -> usize {
        self.views[0].width
    }
}

/// Write a P5 PGM with maxval 255; each value is stored as round(255 * p).
pub fn write_pgm<W: Write>(mut w: W, img: &ImageBuf) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_pgm<R: Read>(mut r: R) -> Result<ImageBuf> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0usize;

    let magic = take_token(&bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(CoreError::Format { offset: 0, msg: "expected P5 magic".into() });
    }
    let width = parse_usize(&bytes, &mut pos)?;
    let height = parse_usize(&bytes, &mut pos)?;
    let maxval = parse_usize(&bytes, &mut pos)?;
    if maxval != 255 {
        return Err(CoreError::Format {
            offset: pos as u64,
            msg: format!("unsupported maxval {maxval}"),
        });
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(CoreError::Format {
            offset: bytes.len() as u64,
            msg: format!("truncated raster: expected {n} bytes"),
        });
    }
    let data = bytes[pos..pos + n].iter().map(|b| *b as f32 / 255.0).collect();
    ImageBuf::from_data(width, height, data)
}

fn take_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    skip_space_and_comments(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(CoreError::Format { offset: start as u64, msg: "unexpected end of header".into() });
    }
    Ok(&bytes[start..*pos])
}

fn parse_usize(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = take_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(CoreError::Format { offset: *pos as u64, msg: "bad integer in header".into() })
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            return;
        }
    }
}

pub fn write_pgm_file<P: AsRef<Path>>(path: P, img: &ImageBuf) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_pgm(std::io::BufWriter::new(f), img)
}

pub fn read_pgm_file<P: AsRef<Path>>(path: P) -> Result<ImageBuf> {
    let f = std::fs::File::open(path)?;
    read_pgm(std::io::BufReader::new(f))
}
