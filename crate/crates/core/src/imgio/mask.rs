use image::{ImageBuffer, ImageEncoder, Luma};

use super::ImgioError;

/// Row-major raster of foreground/background pixels for one structure.
///
/// Pixel `(x, y)` sits at index `y * width + x`; coordinates of a pixel are
/// its center, so the pixel in column 3, row 7 is the point `(3.0, 7.0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(width: usize, height: usize) -> Result<Self, ImgioError> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![false; width * height],
        })
    }

    pub fn from_bits(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImgioError> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(ImgioError::Dimension(format!(
                "bit array has {} entries, expected {}x{}={}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, ImgioError> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Parses rows of `0`/`1`/`.`/`#` characters; whitespace-only lines are skipped.
    /// Handy for small hand-written fixtures.
    pub fn from_ascii(rows: &str) -> Result<Self, ImgioError> {
        let lines: Vec<&str> = rows
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let height = lines.len();
        let width = lines.first().map_or(0, |l| l.chars().count());
        let mut data = Vec::with_capacity(width * height);
        for line in &lines {
            if line.chars().count() != width {
                return Err(ImgioError::Dimension("ragged ascii mask".into()));
            }
            for c in line.chars() {
                data.push(matches!(c, '1' | '#'));
            }
        }
        Self::from_bits(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.data
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// True when no pixel is foreground.
    pub fn is_blank(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Horizontal flip: column `x` moves to `width - 1 - x`.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.width) {
            row.reverse();
        }
        out
    }

    /// Shifts content by `(dx, dy)` on the same canvas; pixels pushed off the edge are lost.
    pub fn translated(&self, dx: i64, dy: i64) -> Self {
        let mut out = Self {
            width: self.width,
            height: self.height,
            data: vec![false; self.data.len()],
        };
        for (x, y) in self.foreground() {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                out.set(nx as usize, ny as usize, true);
            }
        }
        out
    }

    pub fn union(&self, other: &Self) -> Result<Self, ImgioError> {
        self.ensure_same_dims(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a || b)
                .collect(),
        })
    }

    pub fn ensure_same_dims(&self, other: &Self) -> Result<(), ImgioError> {
        if self.dims() != other.dims() {
            return Err(ImgioError::Dimension(format!(
                "mask dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// 8-bit grayscale PNG, foreground = 255.
    pub fn to_png(&self) -> Result<Vec<u8>, ImgioError> {
        let pixels: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(
                &pixels,
                self.width as u32,
                self.height as u32,
                image::ExtendedColorType::L8,
            )
            .map_err(|e| ImgioError::Decode(e.to_string()))?;
        Ok(out)
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), ImgioError> {
    if width == 0 || height == 0 {
        return Err(ImgioError::Dimension(format!(
            "zero-sized mask {width}x{height}"
        )));
    }
    Ok(())
}

/// Decodes an encoded raster image; foreground iff the grayscale intensity
/// exceeds `threshold`. Colour and 16-bit inputs are converted to 8-bit luma first.
pub fn decode_mask(bytes: &[u8], threshold: u8) -> Result<BinaryMask, ImgioError> {
    let img = image::load_from_memory(bytes).map_err(|e| ImgioError::Decode(e.to_string()))?;
    let luma = img.to_luma8();
    threshold_luma(&luma, threshold)
}

pub(crate) fn threshold_luma(
    luma: &ImageBuffer<Luma<u8>, Vec<u8>>,
    threshold: u8,
) -> Result<BinaryMask, ImgioError> {
    let (w, h) = luma.dimensions();
    check_dims(w as usize, h as usize)?;
    let data = luma.as_raw().iter().map(|&v| v > threshold).collect();
    BinaryMask::from_bits(w as usize, h as usize, data)
}

/// Default foreground threshold for 8-bit masks.
pub const DEFAULT_THRESHOLD: u8 = 127;
