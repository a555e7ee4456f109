//! Per-image annotation matrices: the L x D feature rows fed to the decoder.
//!
//! Each of the top-n detector boxes contributes one row `[obj ; loc]`, where
//! `obj` is a feature vector of the cropped box region and `loc` is a feature
//! vector of the full-size image with everything outside the box replaced by
//! the dataset mean pixel. A final row holds the whole-image feature vector
//! repeated twice, so an image with k object boxes yields a (k+1) x 2d matrix.
//!
//! Real CNN features enter through [`load_feature_file`]; tests and the
//! `featurize` command use [`SyntheticExtractor`], a deterministic stand-in.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayView1};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Rectangular object proposal with an objectness score.
/// Coordinates are pixels, `(x, y)` the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub score: f64,
}

impl BoundingBox {
    /// Intersects the box with `[0, width) x [0, height)`. May come out empty.
    pub fn clip(&self, width: usize, height: usize) -> BoundingBox {
        let x0 = self.x.min(width);
        let y0 = self.y.min(height);
        let x1 = (self.x.saturating_add(self.w)).min(width);
        let y1 = (self.y.saturating_add(self.h)).min(height);
        BoundingBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
            score: self.score,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }
}

/// Dense H x W x C pixel buffer in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub pixels: Array3<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, fill: f64) -> ImageBuffer {
        ImageBuffer {
            pixels: Array3::from_elem((height, width, channels), fill),
        }
    }

    pub fn from_pixels(pixels: Array3<f64>) -> ImageBuffer {
        ImageBuffer { pixels }
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.pixels.shape()[2]
    }

    /// Copies out the pixels under the clipped box. Errors when the clipped
    /// box has no pixels, because a feature of nothing is meaningless.
    pub fn crop(&self, bbox: &BoundingBox) -> Result<ImageBuffer> {
        let b = bbox.clip(self.width(), self.height());
        if b.is_empty() {
            return Err(Error::EmptyCrop);
        }
        let view = self
            .pixels
            .slice(ndarray::s![b.y..b.y + b.h, b.x..b.x + b.w, ..]);
        Ok(ImageBuffer {
            pixels: view.to_owned(),
        })
    }
}

/// Maps an image to a fixed-width feature vector. Implementations must be
/// deterministic: the same image always yields the same vector.
pub trait FeatureExtractor {
    fn out_dim(&self) -> usize;
    fn extract(&self, image: &ImageBuffer) -> Array1<f64>;
}

/// The L x D annotation matrix for one image. Row `L-1` is the whole-image
/// row; rows `0..L-1` describe individual objects.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    rows: Array2<f64>,
    n_objects: usize,
}

impl AnnotationSet {
    /// Wraps a raw matrix. The last row is taken to be the whole-image row.
    pub fn from_rows(rows: Array2<f64>) -> Result<AnnotationSet> {
        if rows.nrows() == 0 {
            return Err(Error::parse("annotation set must have at least one row"));
        }
        if !rows.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "annotation matrix".into(),
            });
        }
        let n_objects = rows.nrows() - 1;
        Ok(AnnotationSet { rows, n_objects })
    }

    /// Number of rows L.
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // L >= 1 by construction
    }

    /// Annotation width D.
    pub fn width(&self) -> usize {
        self.rows.ncols()
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.rows.row(i)
    }

    /// Column mean over all rows; the decoder's initial-state input.
    pub fn mean_row(&self) -> Array1<f64> {
        self.rows.mean_axis(ndarray::Axis(0)).expect("L >= 1")
    }
}

/// Keeps the `min(n, boxes.len())` highest-scoring boxes, score descending,
/// ties broken by input index (earlier first).
pub fn select_top_boxes(boxes: &[BoundingBox], n: usize) -> Vec<BoundingBox> {
    assert!(n >= 1, "n must be >= 1");
    let mut sorted = boxes.to_vec();
    sorted.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    sorted.truncate(n);
    sorted
}

/// Returns a copy of `image` with everything outside the (clipped) box set
/// per-channel to `mean_pixel`. The input is untouched.
pub fn mask_to_mean(image: &ImageBuffer, bbox: &BoundingBox, mean_pixel: &[f64]) -> ImageBuffer {
    assert_eq!(
        mean_pixel.len(),
        image.channels(),
        "mean_pixel length must equal channel count"
    );
    let b = bbox.clip(image.width(), image.height());
    let mut out = image.clone();
    for ((y, x, c), value) in out.pixels.indexed_iter_mut() {
        let inside = y >= b.y && y < b.y + b.h && x >= b.x && x < b.x + b.w;
        if !inside {
            *value = mean_pixel[c];
        }
    }
    out
}

/// Assembles the annotation matrix for one image.
///
/// Rows `0..k` (k = min(n, boxes)) are `[obj_i ; loc_i]`; the final row is
/// the whole-image object feature repeated twice. Requires the two extractors
/// to agree on width (the doubled whole-image row must span D = 2d) and at
/// least one box (otherwise no row would describe an object).
pub fn build_annotation_set(
    image: &ImageBuffer,
    boxes: &[BoundingBox],
    n: usize,
    obj_extractor: &dyn FeatureExtractor,
    loc_extractor: &dyn FeatureExtractor,
    mean_pixel: &[f64],
) -> Result<AnnotationSet> {
    let d = obj_extractor.out_dim();
    let t = loc_extractor.out_dim();
    if d != t {
        return Err(Error::ExtractorWidthMismatch {
            obj_dim: d,
            loc_dim: t,
        });
    }
    if boxes.is_empty() {
        return Err(Error::EmptyBoxes);
    }

    let selected = select_top_boxes(boxes, n);
    let mut rows = Array2::zeros((selected.len() + 1, 2 * d));
    for (i, bbox) in selected.iter().enumerate() {
        let obj = obj_extractor.extract(&image.crop(bbox)?);
        let loc = loc_extractor.extract(&mask_to_mean(image, bbox, mean_pixel));
        rows.row_mut(i)
            .slice_mut(ndarray::s![..d])
            .assign(&obj);
        rows.row_mut(i)
            .slice_mut(ndarray::s![d..])
            .assign(&loc);
    }
    let whole = obj_extractor.extract(image);
    rows.row_mut(selected.len())
        .slice_mut(ndarray::s![..d])
        .assign(&whole);
    rows.row_mut(selected.len())
        .slice_mut(ndarray::s![d..])
        .assign(&whole);

    AnnotationSet::from_rows(rows)
}

/// Deterministic stand-in for a CNN feature extractor: a seed-keyed hash of
/// the pixel contents drives a fixed-width draw in [-1, 1].
#[derive(Debug, Clone, Copy)]
pub struct SyntheticExtractor {
    seed: u64,
    out_dim: usize,
}

impl SyntheticExtractor {
    pub fn new(seed: u64, out_dim: usize) -> SyntheticExtractor {
        assert!(out_dim >= 1, "out_dim must be >= 1");
        SyntheticExtractor { seed, out_dim }
    }
}

// FNV-1a, fixed here so hashes never depend on std hasher internals.
fn fnv1a(init: u64, bytes: &[u8]) -> u64 {
    let mut h = init;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

impl FeatureExtractor for SyntheticExtractor {
    fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn extract(&self, image: &ImageBuffer) -> Array1<f64> {
        let mut h = fnv1a(0xcbf2_9ce4_8422_2325, &self.seed.to_le_bytes());
        for dim in image.pixels.shape() {
            h = fnv1a(h, &(*dim as u64).to_le_bytes());
        }
        for value in image.pixels.iter() {
            h = fnv1a(h, &value.to_bits().to_le_bytes());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let unit = Uniform::new_inclusive(-1.0, 1.0);
        Array1::from_iter((0..self.out_dim).map(|_| unit.sample(&mut rng)))
    }
}

const FEATURE_HEADER_PREFIX: &str = "ANNOT v1 D=";

/// Writes annotation sets in the exchange format: a header `ANNOT v1 D=<D>`,
/// then per image a block `image_id L` followed by L rows of D decimals.
pub fn write_feature_file<W: Write>(
    mut w: W,
    sets: &BTreeMap<String, AnnotationSet>,
) -> Result<()> {
    let width = match sets.values().next() {
        Some(first) => first.width(),
        None => 0,
    };
    for (id, set) in sets {
        if set.width() != width {
            return Err(Error::InconsistentWidth {
                image_id: id.clone(),
                expected: width,
                found: set.width(),
            });
        }
    }
    let io_err = |e: std::io::Error| Error::parse(e.to_string());
    writeln!(w, "{FEATURE_HEADER_PREFIX}{width}").map_err(io_err)?;
    for (id, set) in sets {
        writeln!(w, "{id} {}", set.len()).map_err(io_err)?;
        for row in set.rows().rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" ")).map_err(io_err)?;
        }
    }
    Ok(())
}

/// Parses the format written by [`write_feature_file`]. All sets must share
/// one width D; rows must be finite. Errors name the offending image.
pub fn read_feature_file<R: BufRead>(r: R) -> Result<BTreeMap<String, AnnotationSet>> {
    let mut lines = r.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::parse(e.to_string()))?,
        None => return Err(Error::parse("empty feature file: missing header")),
    };
    let width: usize = header
        .strip_prefix(FEATURE_HEADER_PREFIX)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| Error::VersionMismatch {
            expected: format!("{FEATURE_HEADER_PREFIX}<D>"),
            found: header.clone(),
        })?;

    let mut sets = BTreeMap::new();
    while let Some((idx, block_line)) = lines.next() {
        let block_line = block_line.map_err(|e| Error::parse_at(idx + 1, e.to_string()))?;
        if block_line.trim().is_empty() {
            continue;
        }
        let mut fields = block_line.split_whitespace();
        let image_id = fields
            .next()
            .ok_or_else(|| Error::parse_at(idx + 1, "missing image id"))?
            .to_owned();
        let n_rows: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse_at(idx + 1, format!("bad row count for `{image_id}`")))?;
        if n_rows == 0 {
            return Err(Error::parse_at(
                idx + 1,
                format!("image `{image_id}` declares zero rows"),
            ));
        }

        let mut rows = Array2::zeros((n_rows, width));
        for r in 0..n_rows {
            let (row_idx, row_line) = lines.next().ok_or_else(|| Error::Truncated {
                context: format!("annotation rows of image `{image_id}`"),
            })?;
            let row_line = row_line.map_err(|e| Error::parse_at(row_idx + 1, e.to_string()))?;
            let values: Vec<f64> = row_line
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse_at(row_idx + 1, format!("bad value: {e}")))?;
            if values.len() != width {
                return Err(Error::InconsistentWidth {
                    image_id: image_id.clone(),
                    expected: width,
                    found: values.len(),
                });
            }
            if !values.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("annotation row of image `{image_id}`"),
                });
            }
            rows.row_mut(r).assign(&Array1::from(values));
        }
        sets.insert(image_id, AnnotationSet::from_rows(rows)?);
    }
    Ok(sets)
}

pub fn save_feature_file(
    path: impl AsRef<Path>,
    sets: &BTreeMap<String, AnnotationSet>,
) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_feature_file(&mut buf, sets)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, AnnotationSet>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_file(BufReader::new(file)).map_err(|e| e.with_path(path))
}
