//! Boundary heatmaps on a 2-D plane through activation space.
//!
//! A [`Plane`] is spanned by three anchor activations. Pixel `(i, j)` of a
//! grid sits at `origin + s_j·u + t_i·v`: columns step along `u`, rows step
//! along `v`. Adjacent pixels whose codes differ mark polytope boundaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::code::{code_at, LayerSpan, SplineCode};
use crate::error::{Error, Result};
use crate::linalg::{axpy, check_dim, dot, norm, scale, sub};
use crate::net::PwlNetwork;

pub const DEFAULT_RESOLUTION: usize = 512;
pub const PAPER_RESOLUTION: usize = 4096;
pub const DEFAULT_SIGMA: f64 = 2.0;
pub const EXTENT_PADDING: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub origin: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Plane {
    /// Plane coordinates `(s, t)` of the orthogonal projection of `p`.
    pub fn project(&self, p: &[f64]) -> (f64, f64) {
        let d = sub(p, &self.origin);
        (dot(&d, &self.u), dot(&d, &self.v))
    }

    pub fn point(&self, s: f64, t: f64) -> Vec<f64> {
        axpy(&axpy(&self.origin, s, &self.u), t, &self.v)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }
}

/// Gram–Schmidt plane through `a`, `b`, `c` with origin `a` and `u ∥ b − a`.
pub fn plane_from_three(a: &[f64], b: &[f64], c: &[f64]) -> Result<Plane> {
    check_dim(a.len(), b.len())?;
    check_dim(a.len(), c.len())?;
    if a.len() < 2 {
        return Err(Error::Degenerate("a plane needs at least two dimensions".into()));
    }
    let ab = sub(b, a);
    let nab = norm(&ab);
    if nab <= 1e-10 {
        return Err(Error::Degenerate("anchors a and b coincide".into()));
    }
    let u = scale(&ab, 1.0 / nab);
    let ac = sub(c, a);
    let mut w = axpy(&ac, -dot(&ac, &u), &u);
    // Second pass keeps u·v at rounding level for nearly collinear inputs.
    w = axpy(&w, -dot(&w, &u), &u);
    let nw = norm(&w);
    if nw <= 1e-10 {
        return Err(Error::Degenerate("anchors are collinear".into()));
    }
    Ok(Plane {
        origin: a.to_vec(),
        u,
        v: scale(&w, 1.0 / nw),
    })
}

/// Plane-coordinate bounds of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub s_min: f64,
    pub s_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Extent {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.s_min, self.s_max, self.t_min, self.t_max]
            .iter()
            .all(|v| v.is_finite())
            && self.s_max > self.s_min
            && self.t_max > self.t_min;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid extent {self:?}")))
        }
    }

    /// Bounding box of the anchors' projections, padded by
    /// [`EXTENT_PADDING`] of its size on every side.
    pub fn around(plane: &Plane, anchors: &[&[f64]]) -> Self {
        let coords: Vec<(f64, f64)> = anchors.iter().map(|p| plane.project(p)).collect();
        let (mut s_min, mut s_max, mut t_min, mut t_max) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &(s, t) in &coords {
            s_min = s_min.min(s);
            s_max = s_max.max(s);
            t_min = t_min.min(t);
            t_max = t_max.max(t);
        }
        let ps = EXTENT_PADDING * (s_max - s_min).max(1e-6);
        let pt = EXTENT_PADDING * (t_max - t_min).max(1e-6);
        Self {
            s_min: s_min - ps,
            s_max: s_max + ps,
            t_min: t_min - pt,
            t_max: t_max + pt,
        }
    }

    pub fn s_at(&self, col: usize, cols: usize) -> f64 {
        self.s_min + (self.s_max - self.s_min) * col as f64 / (cols - 1) as f64
    }

    pub fn t_at(&self, row: usize, rows: usize) -> f64 {
        self.t_min + (self.t_max - self.t_min) * row as f64 / (rows - 1) as f64
    }

    /// Fractional (column, row) of plane coordinates `(s, t)`.
    pub fn to_pixel(&self, s: f64, t: f64, rows: usize, cols: usize) -> (f64, f64) {
        (
            (s - self.s_min) / (self.s_max - self.s_min) * (cols - 1) as f64,
            (t - self.t_min) / (self.t_max - self.t_min) * (rows - 1) as f64,
        )
    }
}

/// Row-major grid of codes.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeGrid {
    pub rows: usize,
    pub cols: usize,
    pub codes: Vec<SplineCode>,
}

impl CodeGrid {
    pub fn get(&self, row: usize, col: usize) -> &SplineCode {
        &self.codes[row * self.cols + col]
    }

    pub fn transpose(&self) -> CodeGrid {
        let mut codes = Vec::with_capacity(self.codes.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                codes.push(self.get(r, c).clone());
            }
        }
        CodeGrid {
            rows: self.cols,
            cols: self.rows,
            codes,
        }
    }
}

/// Codes over a `rows × cols` lattice; rows are evaluated in parallel.
pub fn evaluate_grid(
    net: &PwlNetwork,
    span: LayerSpan,
    plane: &Plane,
    rows: usize,
    cols: usize,
    extent: &Extent,
) -> Result<CodeGrid> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument("grid resolution must be at least 2x2".into()));
    }
    extent.validate()?;
    check_dim(span.input_dim(net)?, plane.dim())?;
    let row_codes: Vec<Vec<SplineCode>> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let t = extent.t_at(r, rows);
            (0..cols)
                .map(|c| code_at(net, span, &plane.point(extent.s_at(c, cols), t)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(CodeGrid {
        rows,
        cols,
        codes: row_codes.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl BoundaryField {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }
}

/// Per pixel: Hamming distance to the right neighbour plus to the one below.
pub fn boundary_field(grid: &CodeGrid) -> Result<BoundaryField> {
    if grid.rows < 2 || grid.cols < 2 || grid.codes.len() != grid.rows * grid.cols {
        return Err(Error::Degenerate("boundary field needs a grid of at least 2x2".into()));
    }
    let values = (0..grid.rows)
        .into_par_iter()
        .map(|r| {
            (0..grid.cols)
                .map(|c| {
                    let here = grid.get(r, c);
                    let mut v = 0;
                    if c + 1 < grid.cols {
                        v += here.hamming(grid.get(r, c + 1))?;
                    }
                    if r + 1 < grid.rows {
                        v += here.hamming(grid.get(r + 1, c))?;
                    }
                    Ok(v as f64)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    BoundaryField::new(grid.rows, grid.cols, values)
}

/// Normalized Gaussian weights for offsets `-r..=r`, `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Half-sample symmetric reflection (`… b a | a b …`), folded as often as
/// needed for kernels wider than the signal.
fn reflect(m: i64, n: i64) -> usize {
    let period = 2 * n;
    let mut m = m.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn convolve_line(line: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = line.len() as i64;
    let radius = (kernel.len() / 2) as i64;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * line[reflect(i + k as i64 - radius, n)])
                .sum()
        })
        .collect()
}

/// Separable Gaussian blur with reflective borders; `sigma = 0` is identity.
pub fn gaussian_smooth(field: &BoundaryField, sigma: f64) -> Result<BoundaryField> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let (rows, cols) = (field.rows, field.cols);
    let horizontal: Vec<f64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|r| convolve_line(&field.values[r * cols..(r + 1) * cols], &kernel))
        .collect();
    let columns: Vec<Vec<f64>> = (0..cols)
        .into_par_iter()
        .map(|c| {
            let col: Vec<f64> = (0..rows).map(|r| horizontal[r * cols + c]).collect();
            convolve_line(&col, &kernel)
        })
        .collect();
    let mut values = vec![0.0; rows * cols];
    for (c, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            values[r * cols + c] = *v;
        }
    }
    BoundaryField::new(rows, cols, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageScale {
    Linear,
    Log1p,
}

impl ImageScale {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(ImageScale::Linear),
            "log1p" => Some(ImageScale::Log1p),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImageScale::Linear => "linear",
            ImageScale::Log1p => "log1p",
        }
    }
}

/// 8-bit gray levels: `floor(255 · f(v) / max f)`, all zero when the max is zero.
pub fn to_gray(field: &BoundaryField, scale: ImageScale) -> Vec<u8> {
    let scaled: Vec<f64> = field
        .values
        .iter()
        .map(|&v| match scale {
            ImageScale::Linear => v,
            ImageScale::Log1p => v.ln_1p(),
        })
        .collect();
    let max = scaled.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0; scaled.len()];
    }
    scaled
        .iter()
        .map(|v| (255.0 * v / max).floor().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Binary portable graymap (`P5`, max value 255).
pub fn export_image(field: &BoundaryField, path: impl AsRef<Path>, scale: ImageScale) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", field.cols, field.rows).into_bytes();
    bytes.extend(to_gray(field, scale));
    fs::write(path, bytes)?;
    Ok(())
}

/// Parses a `P5` graymap back into `(cols, rows, pixels)`.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated graymap header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::Parse("not an 8-bit P5 graymap".into()));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad size {s:?}")));
    let (cols, rows) = (parse(&fields[1])?, parse(&fields[2])?);
    let pixels = bytes[pos + 1..].to_vec();
    if pixels.len() != cols * rows {
        return Err(Error::Parse("pixel count does not match header".into()));
    }
    Ok((cols, rows, pixels))
}

/// Text record of how a slice image was made.
pub fn sidecar_text(
    plane: &Plane,
    extent: &Extent,
    rows: usize,
    cols: usize,
    span: LayerSpan,
    sigma: f64,
    scale: ImageScale,
) -> String {
    let vec = |v: &[f64]| {
        v.iter()
            .map(|x| crate::output::fmt_f64(*x))
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut s = String::new();
    let _ = writeln!(s, "origin = {}", vec(&plane.origin));
    let _ = writeln!(s, "u = {}", vec(&plane.u));
    let _ = writeln!(s, "v = {}", vec(&plane.v));
    let _ = writeln!(
        s,
        "extent = {},{},{},{}",
        crate::output::fmt_f64(extent.s_min),
        crate::output::fmt_f64(extent.s_max),
        crate::output::fmt_f64(extent.t_min),
        crate::output::fmt_f64(extent.t_max)
    );
    let _ = writeln!(s, "resolution = {rows}x{cols}");
    let _ = writeln!(s, "span = {} {}", span.start(), span.k());
    let _ = writeln!(s, "sigma = {}", crate::output::fmt_f64(sigma));
    let _ = writeln!(s, "scale = {}", scale.name());
    s
}

/// Mean field value over pixels strictly inside the triangle of the three
/// anchors' projections, and the number of such pixels.
pub fn triangle_mean(
    field: &BoundaryField,
    plane: &Plane,
    extent: &Extent,
    anchors: [&[f64]; 3],
) -> (f64, usize) {
    let px: Vec<(f64, f64)> = anchors
        .iter()
        .map(|a| {
            let (s, t) = plane.project(a);
            extent.to_pixel(s, t, field.rows, field.cols)
        })
        .collect();
    let (p0, p1, p2) = (px[0], px[1], px[2]);
    let det = (p1.1 - p2.1) * (p0.0 - p2.0) + (p2.0 - p1.0) * (p0.1 - p2.1);
    let (mut total, mut count) = (0.0, 0);
    for r in 0..field.rows {
        for c in 0..field.cols {
            let (x, y) = (c as f64, r as f64);
            let l0 = ((p1.1 - p2.1) * (x - p2.0) + (p2.0 - p1.0) * (y - p2.1)) / det;
            let l1 = ((p2.1 - p0.1) * (x - p2.0) + (p0.0 - p2.0) * (y - p2.1)) / det;
            let l2 = 1.0 - l0 - l1;
            if l0 > 0.0 && l1 > 0.0 && l2 > 0.0 {
                total += field.get(r, c);
                count += 1;
            }
        }
    }
    (if count > 0 { total / count as f64 } else { 0.0 }, count)
}
