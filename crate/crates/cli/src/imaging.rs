//! Grayscale images as PGM files and the pixel-averaging blur.
//!
//! Pixel `(i, j)` of an image with `width` columns is coordinate
//! `i·width + j`, the same row-major order as the grid penalties.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor};
use std::path::Path;

use alin_core::{GridShape, SparseMatrix};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{GrayImage, ImageFormat, ImageReader, Luma};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> CliResult<Self> {
        if height == 0 || width == 0 {
            return Err(usage("images need at least one pixel"));
        }
        if values.len() != height * width {
            return Err(usage(format!(
                "{height}×{width} image needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn shape(&self) -> GridShape {
        GridShape::new(&[self.height, self.width]).expect("dimensions checked at construction")
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.width + j]
    }

    pub fn clamped(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            ..*self
        }
    }

    /// The `h × w` block whose top-left pixel is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> CliResult<Self> {
        if top + h > self.height || left + w > self.width {
            return Err(usage("crop window exceeds the image"));
        }
        let values = (top..top + h)
            .flat_map(|i| (left..left + w).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Self::new(h, w, values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn from_gray(img: image::DynamicImage) -> CliResult<ImageGrid> {
    let gray = img.to_luma32f();
    let (w, h) = gray.dimensions();
    let values = gray.pixels().map(|p| f64::from(p.0[0])).collect();
    ImageGrid::new(h as usize, w as usize, values)
}

/// Decodes a P2 or P5 graymap, scaling samples to `[0, 1]`.
pub fn parse_pgm(bytes: &[u8]) -> CliResult<ImageGrid> {
    let img = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Pnm).decode()?;
    from_gray(img)
}

pub fn read_pgm(path: impl AsRef<Path>) -> CliResult<ImageGrid> {
    let path = path.as_ref();
    let img_err = |source| CliError::Image {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path)?;
    let img = ImageReader::with_format(BufReader::new(file), ImageFormat::Pnm)
        .decode()
        .map_err(img_err)?;
    from_gray(img)
}

fn to_gray(grid: &ImageGrid) -> GrayImage {
    GrayImage::from_fn(grid.width as u32, grid.height as u32, |x, y| {
        let v = grid.get(y as usize, x as usize).clamp(0.0, 1.0);
        Luma([(v * 255.0).round() as u8])
    })
}

/// 8-bit binary (P5) graymap; values are clamped to `[0, 1]`.
pub fn format_pgm(grid: &ImageGrid) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    let enc = PnmEncoder::new(&mut buf).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    to_gray(grid).write_with_encoder(enc)?;
    Ok(buf)
}

pub fn write_pgm(grid: &ImageGrid, path: impl AsRef<Path>) -> CliResult<()> {
    let path = path.as_ref();
    let out = BufWriter::new(File::create(path)?);
    let enc = PnmEncoder::new(out).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    to_gray(grid)
        .write_with_encoder(enc)
        .map_err(|source| CliError::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Replaces each pixel by the mean of itself and its 4-neighbors inside
/// the image, so boundary pixels average over fewer cells.
pub fn blur_operator(shape: &GridShape) -> CliResult<SparseMatrix> {
    let &[h, w] = shape.dims() else {
        return Err(usage(format!("blur needs a 2D shape, got {:?}", shape.dims())));
    };
    let mut triplets = Vec::with_capacity(5 * h * w);
    for i in 0..h {
        for j in 0..w {
            let mut cells = vec![(i, j)];
            if i > 0 {
                cells.push((i - 1, j));
            }
            if i + 1 < h {
                cells.push((i + 1, j));
            }
            if j > 0 {
                cells.push((i, j - 1));
            }
            if j + 1 < w {
                cells.push((i, j + 1));
            }
            let weight = 1.0 / cells.len() as f64;
            let row = i * w + j;
            triplets.extend(cells.into_iter().map(|(a, b)| (row, a * w + b, weight)));
        }
    }
    Ok(SparseMatrix::from_triplets(h * w, h * w, triplets)?)
}

/// A piecewise-constant test image: background 0.2, a bright rectangle
/// (0.8) in the upper left and a mid-gray one (0.5) in the lower right.
pub fn phantom(height: usize, width: usize) -> CliResult<ImageGrid> {
    let values = (0..height)
        .flat_map(|i| (0..width).map(move |j| (i, j)))
        .map(|(i, j)| {
            let (fi, fj) = (i as f64 / height as f64, j as f64 / width as f64);
            if (0.15..0.5).contains(&fi) && (0.1..0.55).contains(&fj) {
                0.8
            } else if (0.6..0.9).contains(&fi) && (0.45..0.85).contains(&fj) {
                0.5
            } else {
                0.2
            }
        })
        .collect();
    ImageGrid::new(height, width, values)
}

/// Adds seeded `N(0, sd²)` noise; values are not clamped.
pub fn add_noise(grid: &ImageGrid, sd: f64, seed: u64) -> CliResult<ImageGrid> {
    let noise = Normal::new(0.0, sd).map_err(|e| usage(format!("noise sd: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = grid.values.iter().map(|v| v + noise.sample(&mut rng)).collect();
    ImageGrid::new(grid.height, grid.width, values)
}
