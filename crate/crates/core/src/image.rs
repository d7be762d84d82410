//! Grayscale image denoising on top of the solver.
//!
//! Only binary 8-bit PGM (`P5`, maxval 255) is read and written.

use std::path::Path;

use crate::error::{Error, Result};
use crate::interpolation::{projector_pair, PairKind};
use crate::linalg::Matrix;
use crate::rng::{purpose, Stream};
use crate::simulation::rmse;
use crate::solver::{default_penalties, solve, SolveConfig};

/// Row-major pixels, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// `height x width` matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_row_slice(self.height, self.width, &self.pixels)
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let pixels = m.transpose().as_slice().to_vec();
        GrayImage::new(m.ncols(), m.nrows(), pixels)
    }

    /// Pixels that saving would clamp into `[0, 1]`.
    pub fn out_of_range(&self) -> usize {
        self.pixels
            .iter()
            .filter(|p| !(0.0..=1.0).contains(*p))
            .count()
    }

    /// The 8-bit PGM bytes; out-of-range pixels are clamped.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.pixels
                .iter()
                .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset: self.pos,
            message: message.into(),
        })
    }

    /// Skips whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return self.fail(format!("expected {what}"));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        match digits.parse() {
            Ok(v) => Ok(v),
            Err(_) => {
                self.pos = start;
                self.fail(format!("{what} out of range"))
            }
        }
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut c = Cursor { bytes, pos: 0 };
    if !bytes.starts_with(b"P5") {
        return c.fail("missing P5 magic");
    }
    c.pos = 2;
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval_at = c.pos;
    let maxval = c.number("maxval")?;
    if maxval != 255 {
        c.pos = maxval_at;
        return c.fail(format!("unsupported maxval {maxval}"));
    }
    if width == 0 || height == 0 {
        return c.fail("zero image dimension");
    }
    match bytes.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => return c.fail("expected whitespace after maxval"),
    }
    let needed = width
        .checked_mul(height)
        .filter(|n| *n <= bytes.len())
        .ok_or(Error::Format {
            offset: c.pos,
            message: "image dimensions exceed file size".into(),
        })?;
    let data = &bytes[c.pos..];
    if data.len() < needed {
        c.pos = bytes.len();
        return c.fail(format!(
            "truncated pixel data: {} of {needed} bytes",
            data.len()
        ));
    }
    let pixels = data[..needed].iter().map(|&b| b as f64 / 255.0).collect();
    GrayImage::new(width, height, pixels)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    parse_pgm(&std::fs::read(path)?)
}

/// Writes the image, clamping pixels into `[0, 1]`. Returns the number of
/// clamped pixels.
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<usize> {
    std::fs::write(path, img.to_pgm_bytes())?;
    Ok(img.out_of_range())
}

/// Adds i.i.d. `N(0, sigma^2)` noise without clamping.
pub fn add_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut stream = Stream::new(seed, 0, purpose::IMAGE_NOISE);
    let pixels = img
        .pixels
        .iter()
        .map(|p| p + sigma * stream.normal())
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

#[derive(Debug, Clone, Default)]
pub struct RecoverOptions<'a> {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub max_iters: Option<usize>,
    pub clean: Option<&'a GrayImage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverMetrics {
    pub kind: PairKind,
    pub sigma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Against the clean image, after clamping.
    pub rmse: Option<f64>,
    pub seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub clamped: usize,
    /// Shape of the matrices the solver decomposed by SVD.
    pub svd_shape: (usize, usize),
}

impl RecoverMetrics {
    pub const CSV_HEADER: &'static str =
        "kind,sigma,lambda1,lambda2,rmse,seconds,iterations,clamped,status";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.sigma,
            self.lambda1,
            self.lambda2,
            self.rmse.map_or_else(|| "NA".into(), |v| v.to_string()),
            self.seconds,
            self.iterations,
            self.clamped,
            if self.converged {
                "converged"
            } else {
                "max_iters"
            }
        )
    }
}

fn clamped(img: &GrayImage) -> GrayImage {
    GrayImage {
        pixels: img.pixels.iter().map(|p| p.clamp(0.0, 1.0)).collect(),
        ..img.clone()
    }
}

/// Denoises `noisy` with the accelerated solver under the given pair kind.
///
/// Penalties default to the noise-calibrated values for
/// `N = max(height, width)`. The returned image is unclamped.
pub fn recover(
    noisy: &GrayImage,
    kind: PairKind,
    sigma: f64,
    opts: &RecoverOptions,
) -> Result<(GrayImage, RecoverMetrics)> {
    let z = noisy.to_matrix();
    let pair = projector_pair(kind, noisy.height, noisy.width)?;
    let (lambda1, lambda2) = match (opts.lambda1, opts.lambda2) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let (d1, d2) = default_penalties(noisy.height.max(noisy.width), sigma)?;
            (a.unwrap_or(d1), b.unwrap_or(d2))
        }
    };
    let mut config = SolveConfig::new(&z, &pair, lambda1, lambda2).accelerate(true);
    if let Some(n) = opts.max_iters {
        config = config.max_iters(n);
    }
    let res = solve(&config)?;
    let out = GrayImage::from_matrix(&res.theta_hat)?;
    let rmse = match opts.clean {
        Some(clean) => Some(rmse(&clamped(&out).to_matrix(), &clean.to_matrix())?),
        None => None,
    };
    let metrics = RecoverMetrics {
        kind,
        sigma,
        lambda1,
        lambda2,
        rmse,
        seconds: res.wall_time.as_secs_f64(),
        iterations: res.iterations,
        converged: res.converged,
        clamped: out.out_of_range(),
        svd_shape: res.svd_shape,
    };
    Ok((out, metrics))
}
