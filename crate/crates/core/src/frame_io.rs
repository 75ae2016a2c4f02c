//! Frames, frame sequences and their on-disk form.
//!
//! The bit-exact storage format is binary PPM (`P6`, maxval 255). Sequences
//! live in a directory as `frame_0001.ppm`, `frame_0002.ppm`, ... and are
//! ordered by the numeric value of the last digit run in each filename.
//! PNG files are accepted on load as a convenience.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// An 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!("zero dimension {width}x{height}")));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::InvalidFrame(format!(
                "buffer has {} bytes, {}x{} RGB needs {}",
                pixels.len(),
                width,
                height,
                width * height * 3
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// A frame where every pixel has the same color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    /// Nearest-neighbor upscale by an integer factor.
    pub fn upscale_nearest(&self, factor: usize) -> Frame {
        assert!(factor >= 1, "upscale factor must be at least 1");
        let (w, h) = (self.width * factor, self.height * factor);
        let mut pixels = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                pixels.extend_from_slice(&self.pixel(x / factor, y / factor));
            }
        }
        Frame {
            width: w,
            height: h,
            pixels,
        }
    }
}

/// Single-channel intensity image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LumaFrame {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!("zero dimension {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "luma buffer has {} values, {}x{} needs {}",
                values.len(),
                width,
                height,
                width * height
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::InvalidFrame(format!("luma value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Rec. 601 luma: `Y = (0.299 R + 0.587 G + 0.114 B) / 255`.
pub fn to_luma(frame: &Frame) -> LumaFrame {
    let values = frame
        .pixels
        .chunks_exact(3)
        .map(|p| {
            let y = (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0;
            // 0.299 + 0.587 + 0.114 rounds to just above 1 in binary; gray pixels
            // must map to exactly v/255.
            if p[0] == p[1] && p[1] == p[2] {
                p[0] as f64 / 255.0
            } else {
                y.clamp(0.0, 1.0)
            }
        })
        .collect();
    LumaFrame {
        width: frame.width,
        height: frame.height,
        values,
    }
}

/// An ordered, non-empty list of equally sized frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidFrame("empty frame sequence".into()))?;
        let (w, h) = (first.width, first.height);
        for (i, f) in frames.iter().enumerate() {
            if f.width != w || f.height != h {
                return Err(Error::MixedDimensions {
                    file: format!("frame {}", i + 1),
                    want_w: w,
                    want_h: h,
                    got_w: f.width,
                    got_h: f.height,
                });
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    /// Frame by 1-based index.
    pub fn frame(&self, index: usize) -> Option<&Frame> {
        index.checked_sub(1).and_then(|i| self.frames.get(i))
    }

    pub fn upscale_nearest(&self, factor: usize) -> FrameSequence {
        FrameSequence {
            frames: self.frames.iter().map(|f| f.upscale_nearest(factor)).collect(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a binary PPM (`P6`, maxval 255).
pub fn decode_ppm(bytes: &[u8]) -> Result<Frame> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::UnsupportedFormat("truncated PPM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token()? != "P6" {
        return Err(Error::UnsupportedFormat("not a binary PPM (P6)".into()));
    }
    let mut number = |what: &str| -> Result<usize> {
        token()?
            .parse::<usize>()
            .map_err(|_| Error::UnsupportedFormat(format!("bad PPM {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PPM maxval {maxval}, only 255 is supported"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    let data_start = pos + 1;
    let need = width * height * 3;
    let data = bytes
        .get(data_start..data_start + need)
        .ok_or_else(|| Error::UnsupportedFormat("truncated PPM raster".into()))?;
    Frame::new(width, height, data.to_vec()).map_err(|e| Error::UnsupportedFormat(e.to_string()))
}

pub fn encode_ppm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.pixels);
    out
}

/// Binary PGM (`P5`), used for validity masks.
pub fn encode_pgm(width: usize, height: usize, values: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(values);
    out
}

fn decode_png(bytes: &[u8]) -> Result<Frame> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::UnsupportedFormat(e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Frame::new(w, h, img.into_raw())
}

/// Loads a single PPM or PNG image.
pub fn load_frame(path: &Path) -> Result<Frame> {
    if !path.is_file() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    match extension(path).as_deref() {
        Some("ppm") => decode_ppm(&bytes),
        Some("png") => decode_png(&bytes),
        _ if bytes.starts_with(b"P6") => decode_ppm(&bytes),
        _ => Err(Error::UnsupportedFormat(path.display().to_string())),
    }
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    write_bytes(path, &encode_ppm(frame))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

/// Sort key: numeric value of the last digit run, then the name itself.
fn frame_order_key(name: &str) -> (u128, String) {
    let digits: String = name
        .rsplit(|c: char| !c.is_ascii_digit())
        .find(|s| !s.is_empty())
        .unwrap_or("")
        .to_string();
    (digits.parse().unwrap_or(0), name.to_string())
}

/// Loads a frame sequence.
///
/// `path` may be a directory (every `.ppm`/`.png` inside, numeric filename
/// order), a single image file (a one-frame sequence), or a printf-style
/// pattern such as `dir/frame_%04d.ppm` enumerated from index 1 (or 0) until
/// the first missing file.
pub fn load_sequence(path: &Path) -> Result<FrameSequence> {
    let files = resolve_files(path)?;
    let mut frames: Vec<Frame> = Vec::with_capacity(files.len());
    for file in &files {
        let f = load_frame(file)?;
        if let Some(first) = frames.first() {
            if first.width != f.width || first.height != f.height {
                return Err(Error::MixedDimensions {
                    file: file.display().to_string(),
                    want_w: first.width,
                    want_h: first.height,
                    got_w: f.width,
                    got_h: f.height,
                });
            }
        }
        frames.push(f);
    }
    FrameSequence::new(frames)
}

fn resolve_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut named = Vec::new();
        for entry in fs::read_dir(path).map_err(io_err(path))? {
            let p = entry.map_err(io_err(path))?.path();
            if p.is_file() && matches!(extension(&p).as_deref(), Some("ppm" | "png")) {
                let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
                named.push((frame_order_key(&name), p));
            }
        }
        if named.is_empty() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        named.sort_by(|a, b| a.0.cmp(&b.0));
        return Ok(named.into_iter().map(|(_, p)| p).collect());
    }
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let text = path.to_string_lossy();
    if let Some(files) = expand_pattern(&text) {
        if !files.is_empty() {
            return Ok(files);
        }
    }
    Err(Error::MissingPath(path.to_path_buf()))
}

fn expand_pattern(pattern: &str) -> Option<Vec<PathBuf>> {
    let start = pattern.find('%')?;
    let rest = &pattern[start + 1..];
    let end = rest.find('d')?;
    let spec = &rest[..end];
    let width: usize = if spec.is_empty() {
        0
    } else {
        spec.trim_start_matches('0').parse().ok()?
    };
    let (prefix, suffix) = (&pattern[..start], &rest[end + 1..]);
    let name = |i: usize| PathBuf::from(format!("{prefix}{i:0width$}{suffix}"));
    let first = if name(1).is_file() { 1 } else { 0 };
    let mut files = Vec::new();
    let mut i = first;
    while name(i).is_file() {
        files.push(name(i));
        i += 1;
    }
    Some(files)
}

/// File name for a 1-based frame index.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.ppm")
}

/// Writes `frame_0001.ppm`.. into `dir`, creating it if needed.
pub fn save_sequence(seq: &FrameSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, f) in seq.frames.iter().enumerate() {
        save_frame(f, &dir.join(frame_file_name(i + 1)))?;
    }
    Ok(())
}
