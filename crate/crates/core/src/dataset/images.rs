use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{AdqError, Result};

pub const IMAGE_MAGIC: [u8; 4] = *b"ADQI";
pub const IMAGE_VERSION: u32 = 1;
/// magic + version + count (u64) + W, H, C (u32 each)
pub const IMAGE_HEADER_LEN: usize = 28;

/// Luma weights used for every grayscale conversion.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// 8-bit images sharing one `W x H x C` shape. Image `i` belongs to item `i`
/// of the companion feature table. Pixels are row-major with interleaved
/// channels: `(y * W + x) * C + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageTable {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

/// One image borrowed from an [`ImageTable`], or an owned augmented copy.
#[derive(Debug, Clone, Copy)]
pub struct ImageRef<'a> {
    pub id: u32,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: &'a [u8],
}

impl ImageTable {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(AdqError::InvalidInput(format!(
                "image shape {width}x{height}x{channels} has a zero side"
            )));
        }
        let per = width * height * channels;
        if pixels.len() % per != 0 || pixels.is_empty() {
            return Err(AdqError::InvalidInput(format!(
                "{} pixel bytes is not a positive multiple of {per}",
                pixels.len()
            )));
        }
        Ok(ImageTable {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.len() / self.image_len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Bytes per image, `W * H * C`.
    pub fn image_len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn image(&self, id: u32) -> Result<ImageRef<'_>> {
        let i = id as usize;
        if i >= self.len() {
            return Err(AdqError::MissingImage(id));
        }
        let n = self.image_len();
        Ok(ImageRef {
            id,
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: &self.pixels[i * n..(i + 1) * n],
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(IMAGE_HEADER_LEN + self.pixels.len());
        out.extend_from_slice(&IMAGE_MAGIC);
        out.extend_from_slice(&IMAGE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let truncated = |expected: u64| AdqError::TruncatedFile {
            offset: bytes.len() as u64,
            expected,
        };
        if bytes.len() < 4 {
            return Err(truncated(IMAGE_HEADER_LEN as u64));
        }
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        if found != IMAGE_MAGIC {
            return Err(AdqError::BadMagic {
                path: origin.to_path_buf(),
                expected: IMAGE_MAGIC,
                found,
            });
        }
        if bytes.len() < IMAGE_HEADER_LEN {
            return Err(truncated(IMAGE_HEADER_LEN as u64));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != IMAGE_VERSION {
            return Err(AdqError::UnsupportedVersion(version));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let (w, h, c) = (u32_at(16) as u64, u32_at(20) as u64, u32_at(24) as u64);
        let expected = count
            .checked_mul(w * h * c)
            .and_then(|n| n.checked_add(IMAGE_HEADER_LEN as u64))
            .ok_or_else(|| AdqError::parse("image header", "size overflows"))?;
        if (bytes.len() as u64) < expected {
            return Err(truncated(expected));
        }
        if (bytes.len() as u64) > expected {
            return Err(AdqError::parse("image file", "trailing bytes"));
        }
        ImageTable::new(
            w as usize,
            h as usize,
            c as usize,
            bytes[IMAGE_HEADER_LEN..].to_vec(),
        )
    }
}

impl ImageRef<'_> {
    /// Luma in `[0, 1]`, row-major `H x W`.
    pub fn grayscale(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.channels)
            .map(|px| luma(px) / 255.0)
            .collect()
    }

    /// Mean of each channel, scaled to `[0, 1]`.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += v as f64;
            }
        }
        let n = (self.width * self.height) as f64 * 255.0;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

fn luma(px: &[u8]) -> f64 {
    if px.len() >= 3 {
        LUMA[0] * px[0] as f64 + LUMA[1] * px[1] as f64 + LUMA[2] * px[2] as f64
    } else {
        px[0] as f64
    }
}

pub fn load_images(path: impl AsRef<Path>) -> Result<ImageTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| AdqError::io(path, e))?;
    ImageTable::from_bytes(&bytes, path)
}

pub fn write_images(table: &ImageTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| AdqError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&table.to_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| AdqError::io(path, e))
}

/// Imports every `.pgm` / `.ppm` file (binary P5/P6, 8-bit) in `dir`, in
/// file-name order. All images must share one shape.
pub fn import_pnm_dir(dir: impl AsRef<Path>) -> Result<(ImageTable, Vec<PathBuf>)> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| AdqError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("pgm") | Some("ppm")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(AdqError::InvalidInput(format!(
            "no .pgm/.ppm files in {}",
            dir.display()
        )));
    }
    let mut shape = None;
    let mut pixels = Vec::new();
    for f in &files {
        let img = image::ImageReader::open(f)
            .map_err(|e| AdqError::io(f, e))?
            .decode()
            .map_err(|e| AdqError::parse("pnm image", format!("{}: {e}", f.display())))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let (c, bytes) = match img {
            image::DynamicImage::ImageLuma8(g) => (1, g.into_raw()),
            image::DynamicImage::ImageRgb8(rgb) => (3, rgb.into_raw()),
            other => {
                return Err(AdqError::parse(
                    "pnm image",
                    format!("{}: unsupported pixel type {:?}", f.display(), other.color()),
                ))
            }
        };
        match shape {
            None => shape = Some((w, h, c)),
            Some(s) if s != (w, h, c) => {
                return Err(AdqError::InvalidInput(format!(
                    "{} is {w}x{h}x{c}, expected {}x{}x{}",
                    f.display(),
                    s.0,
                    s.1,
                    s.2
                )))
            }
            _ => {}
        }
        pixels.extend_from_slice(&bytes);
    }
    let (w, h, c) = shape.unwrap();
    Ok((ImageTable::new(w, h, c, pixels)?, files))
}
