//! Reading and writing of matrices, image sets, ROI masks and model files.
//!
//! Matrix files come in two flavours:
//!
//! * `ldm`: the `LDM1` binary container. Bytes 0..4 hold the ASCII magic
//!   `LDM1`, bytes 4..8 the row count and bytes 8..12 the column count (both
//!   `u32`), followed by `rows * cols` `f64` values in row-major order. All
//!   integers and floats are little-endian, so a file is exactly
//!   `12 + 8 * rows * cols` bytes long.
//! * `csv`: comma separated, one matrix row per line, no header. Values are
//!   written with 17 significant digits so doubles survive a round trip.
//!
//! Images are binary netpbm (`P5` grayscale, `P6` RGB) with maxval 255.

use std::fs;
use std::path::{Path, PathBuf};

use crate::eigenimage::EigenImageModel;
use crate::error::{Error, Result};
use crate::linmap::EncoderMap;
use crate::matrix::Matrix;
use crate::roi::RoiMask;

pub const LDM_MAGIC: &[u8; 4] = b"LDM1";
const LDM_HEADER_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Ldm,
}

impl MatrixFormat {
    /// `.csv` (any case) is CSV; everything else is treated as LDM.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Ldm,
        }
    }
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MatrixFormat::Csv),
            "ldm" => Ok(MatrixFormat::Ldm),
            other => Err(Error::ConfigInvalid(format!(
                "unknown matrix format {other:?} (expected csv or ldm)"
            ))),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_error(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    if source.kind() == std::io::ErrorKind::NotFound {
        Error::FileNotFound {
            path: path.to_path_buf(),
        }
    } else {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes)
        .map_err(|_| Error::format(path.display().to_string(), "not valid UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn create_dir_all(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

// ---------------------------------------------------------------------------
// Matrices

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let context = path.display().to_string();
    let bytes = read_bytes(path)?;
    let m = match format {
        MatrixFormat::Ldm => decode_ldm(&bytes, &context)?,
        MatrixFormat::Csv => decode_csv(&bytes, &context)?,
    };
    if let Some((row, col)) = m.first_non_finite() {
        return Err(Error::NonFiniteValue { context, row, col });
    }
    Ok(m)
}

pub fn write_matrix(m: &Matrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Ldm => encode_ldm(m)?,
        MatrixFormat::Csv => encode_csv(m).into_bytes(),
    };
    write_bytes(path, &bytes)
}

/// Reads a matrix, choosing the format from the file extension.
pub fn read_matrix_auto(path: &Path) -> Result<Matrix> {
    read_matrix(path, MatrixFormat::from_path(path))
}

pub fn write_matrix_auto(m: &Matrix, path: &Path) -> Result<()> {
    write_matrix(m, path, MatrixFormat::from_path(path))
}

pub fn encode_ldm(m: &Matrix) -> Result<Vec<u8>> {
    let dim = |n: usize, what: &str| {
        u32::try_from(n)
            .map_err(|_| Error::ShapeMismatch(format!("{what} count {n} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(LDM_HEADER_LEN + 8 * m.data().len());
    out.extend_from_slice(LDM_MAGIC);
    out.extend_from_slice(&dim(m.rows(), "row")?.to_le_bytes());
    out.extend_from_slice(&dim(m.cols(), "column")?.to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_ldm(bytes: &[u8], context: &str) -> Result<Matrix> {
    if bytes.len() < LDM_HEADER_LEN {
        return Err(Error::format(context, "truncated LDM header"));
    }
    if &bytes[0..4] != LDM_MAGIC {
        return Err(Error::format(context, "bad magic (expected LDM1)"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(context, format!("empty {rows}x{cols} matrix")));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(LDM_HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(Error::format(
            context,
            format!(
                "size mismatch: {rows}x{cols} needs {} bytes, file has {}",
                expected.map_or_else(|| "too many".to_string(), |n| n.to_string()),
                bytes.len()
            ),
        ));
    }
    let data = bytes[LDM_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::new(rows, cols, data)
}

pub fn encode_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in m.iter_rows() {
        for (j, &v) in r.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_g17(v));
        }
        out.push('\n');
    }
    out
}

pub fn decode_csv(bytes: &[u8], context: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(context, format!("row {i}: {e}")))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::format(
                    context,
                    format!("ragged rows: row {i} has {} fields, expected {c}", record.len()),
                ))
            }
            _ => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::format(context, format!("non-numeric token {field:?} at row {i}, column {j}"))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::format(context, "no rows"))?;
    Matrix::new(rows, cols, data)
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros removed.
pub fn format_g17(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(format!("{v:.decimals$}"))
    } else {
        let mantissa = strip_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

// ---------------------------------------------------------------------------
// Images

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageGeometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageGeometry {
    pub fn pixel_count(&self) -> usize {
        self.height * self.width * self.channels
    }
}

impl std::fmt::Display for ImageGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Images flattened one per row: row-major within the image, channels
/// interleaved per pixel, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub images: Matrix,
    pub geometry: ImageGeometry,
}

impl ImageSet {
    pub fn new(images: Matrix, geometry: ImageGeometry) -> Result<Self> {
        if images.cols() != geometry.pixel_count() {
            return Err(Error::GeometryMismatch(format!(
                "{} values per image do not fit geometry {geometry}",
                images.cols()
            )));
        }
        Ok(Self { images, geometry })
    }

    pub fn len(&self) -> usize {
        self.images.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.images.rows() == 0
    }
}

/// A single binary netpbm raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetpbmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl NetpbmImage {
    pub fn parse(bytes: &[u8], context: &str) -> Result<Self> {
        let unsupported = |message: String| Error::UnsupportedFormat {
            context: context.to_string(),
            message,
        };
        if bytes.len() < 2 || bytes[0] != b'P' {
            return Err(Error::format(context, "not a netpbm file"));
        }
        let channels = match bytes[1] {
            b'5' => 1,
            b'6' => 3,
            b'1'..=b'4' => {
                return Err(unsupported(format!(
                    "P{} is not supported, only binary P5/P6",
                    bytes[1] as char
                )))
            }
            _ => return Err(Error::format(context, "not a netpbm file")),
        };
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for field in fields.iter_mut() {
            *field = header_integer(bytes, &mut pos, context)?;
        }
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(unsupported(format!("maxval {maxval}, only 255 is supported")));
        }
        if width == 0 || height == 0 {
            return Err(Error::format(context, "zero image dimension"));
        }
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(Error::format(context, "missing raster separator")),
        }
        let expected = width * height * channels;
        let raster = &bytes[pos..];
        if raster.len() != expected {
            return Err(Error::format(
                context,
                format!("raster has {} bytes, expected {expected}", raster.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels: raster.to_vec(),
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn geometry(&self) -> ImageGeometry {
        ImageGeometry {
            height: self.height,
            width: self.width,
            channels: self.channels,
        }
    }
}

fn header_integer(bytes: &[u8], pos: &mut usize, context: &str) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::format(context, "truncated header")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(context, "malformed header integer"))
}

pub fn read_netpbm(path: &Path) -> Result<NetpbmImage> {
    NetpbmImage::parse(&read_bytes(path)?, &path.display().to_string())
}

pub fn write_netpbm(image: &NetpbmImage, path: &Path) -> Result<()> {
    write_bytes(path, &image.encode())
}

/// Regular files of `dir` in lexicographic filename order.
fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| io_error(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

pub fn read_image_set(dir: &Path) -> Result<ImageSet> {
    let files = sorted_files(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyDirectory {
            path: dir.to_path_buf(),
        });
    }
    let mut geometry = None;
    let mut data = Vec::new();
    for path in &files {
        let img = read_netpbm(path)?;
        let g = img.geometry();
        match geometry {
            None => geometry = Some(g),
            Some(expected) if expected != g => {
                return Err(Error::MixedDimensions {
                    name: path.display().to_string(),
                    expected: expected.to_string(),
                    found: g.to_string(),
                })
            }
            _ => {}
        }
        data.extend(img.pixels.iter().map(|&b| f64::from(b) / 255.0));
    }
    let geometry = geometry.expect("at least one image");
    ImageSet::new(Matrix::new(files.len(), geometry.pixel_count(), data)?, geometry)
}

/// Converts `[0, 1]` intensities to bytes: clamp, scale by 255, round half away from zero.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes one netpbm file per row as `000000.pgm`, `000001.pgm`, ... (`.ppm` for RGB).
/// Returns the written paths.
pub fn write_image_set(set: &ImageSet, dir: &Path) -> Result<Vec<PathBuf>> {
    let g = set.geometry;
    if g.channels != 1 && g.channels != 3 {
        return Err(Error::GeometryMismatch(format!(
            "{} channels cannot be written as netpbm",
            g.channels
        )));
    }
    create_dir_all(dir)?;
    let ext = if g.channels == 3 { "ppm" } else { "pgm" };
    let mut written = Vec::with_capacity(set.len());
    for (i, row) in set.images.iter_rows().enumerate() {
        let image = NetpbmImage {
            width: g.width,
            height: g.height,
            channels: g.channels,
            pixels: row.iter().map(|&v| quantize(v)).collect(),
        };
        let path = dir.join(format!("{i:06}.{ext}"));
        write_netpbm(&image, &path)?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// ROI masks

pub fn parse_roi_mask(text: &str, context: &str) -> Result<RoiMask> {
    let mut lines = text.lines();
    let name = lines
        .next()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::format(context, "missing mask name line"))?;
    let mut indices = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let index = line.parse::<usize>().map_err(|_| {
            Error::format(context, format!("line {}: {line:?} is not a voxel index", n + 2))
        })?;
        indices.push(index);
    }
    RoiMask::new(name, indices)
}

pub fn read_roi_mask(path: &Path) -> Result<RoiMask> {
    parse_roi_mask(&read_text(path)?, &path.display().to_string())
}

pub fn format_roi_mask(mask: &RoiMask) -> String {
    let mut out = format!("{}\n", mask.name());
    for i in mask.indices() {
        out.push_str(&format!("{i}\n"));
    }
    out
}

pub fn write_roi_mask(mask: &RoiMask, path: &Path) -> Result<()> {
    write_text(path, &format_roi_mask(mask))
}

// ---------------------------------------------------------------------------
// key=value text

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, context: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(context, format!("line {}: expected key=value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn lookup<'a>(pairs: &'a [(String, String)], key: &str, context: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::format(context, format!("missing key {key}")))
}

fn lookup_parse<T: std::str::FromStr>(pairs: &[(String, String)], key: &str, context: &str) -> Result<T> {
    let raw = lookup(pairs, key, context)?;
    raw.parse()
        .map_err(|_| Error::format(context, format!("bad value {raw:?} for {key}")))
}

/// `prefix` with `suffix` appended to its final component.
pub fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// Encoder map: PREFIX.w.ldm, PREFIX.meta.txt, PREFIX.mean.ldm, PREFIX.std.ldm

pub fn write_encoder_map(map: &EncoderMap, prefix: &Path) -> Result<()> {
    write_matrix(&map.w, &prefixed(prefix, ".w.ldm"), MatrixFormat::Ldm)?;
    write_matrix(
        &Matrix::row_vector(&map.train_latent_mean),
        &prefixed(prefix, ".mean.ldm"),
        MatrixFormat::Ldm,
    )?;
    write_matrix(
        &Matrix::row_vector(&map.train_latent_std),
        &prefixed(prefix, ".std.ldm"),
        MatrixFormat::Ldm,
    )?;
    let meta = format!(
        "latent_dim={}\nn_voxels={}\nridge_lambda={}\nfit_residual_rms={}\n",
        map.latent_dim, map.n_voxels, map.ridge_lambda, map.fit_residual_rms
    );
    write_text(&prefixed(prefix, ".meta.txt"), &meta)
}

pub fn read_encoder_map(prefix: &Path) -> Result<EncoderMap> {
    let meta_path = prefixed(prefix, ".meta.txt");
    let context = meta_path.display().to_string();
    let pairs = parse_key_values(&read_text(&meta_path)?, &context)?;
    let latent_dim: usize = lookup_parse(&pairs, "latent_dim", &context)?;
    let n_voxels: usize = lookup_parse(&pairs, "n_voxels", &context)?;
    let ridge_lambda: f64 = lookup_parse(&pairs, "ridge_lambda", &context)?;
    let fit_residual_rms: f64 = lookup_parse(&pairs, "fit_residual_rms", &context)?;
    let w = read_matrix(&prefixed(prefix, ".w.ldm"), MatrixFormat::Ldm)?;
    let mean = read_matrix(&prefixed(prefix, ".mean.ldm"), MatrixFormat::Ldm)?.into_data();
    let std = read_matrix(&prefixed(prefix, ".std.ldm"), MatrixFormat::Ldm)?.into_data();
    if w.shape() != (latent_dim + 1, n_voxels) || mean.len() != latent_dim || std.len() != latent_dim {
        return Err(Error::format(
            context,
            format!(
                "inconsistent map files: W is {}, {} means, {} stds for latent_dim={latent_dim}, n_voxels={n_voxels}",
                w.shape_str(),
                mean.len(),
                std.len()
            ),
        ));
    }
    if std.iter().any(|&s| s < 0.0) {
        return Err(Error::format(context, "negative training latent std"));
    }
    Ok(EncoderMap {
        w,
        latent_dim,
        n_voxels,
        train_latent_mean: mean,
        train_latent_std: std,
        ridge_lambda,
        fit_residual_rms,
    })
}

// ---------------------------------------------------------------------------
// Eigen-image model: PREFIX.mean.ldm, PREFIX.components.ldm, PREFIX.var.ldm, PREFIX.meta.txt

pub fn write_eigen_model(model: &EigenImageModel, prefix: &Path) -> Result<()> {
    write_matrix(
        &Matrix::row_vector(&model.mean_pixel),
        &prefixed(prefix, ".mean.ldm"),
        MatrixFormat::Ldm,
    )?;
    write_matrix(&model.components, &prefixed(prefix, ".components.ldm"), MatrixFormat::Ldm)?;
    write_matrix(
        &Matrix::row_vector(&model.explained_variance),
        &prefixed(prefix, ".var.ldm"),
        MatrixFormat::Ldm,
    )?;
    let g = model.geometry;
    let meta = format!(
        "height={}\nwidth={}\nchannels={}\nk={}\n",
        g.height,
        g.width,
        g.channels,
        model.k()
    );
    write_text(&prefixed(prefix, ".meta.txt"), &meta)
}

pub fn read_eigen_model(prefix: &Path) -> Result<EigenImageModel> {
    let meta_path = prefixed(prefix, ".meta.txt");
    let context = meta_path.display().to_string();
    let pairs = parse_key_values(&read_text(&meta_path)?, &context)?;
    let geometry = ImageGeometry {
        height: lookup_parse(&pairs, "height", &context)?,
        width: lookup_parse(&pairs, "width", &context)?,
        channels: lookup_parse(&pairs, "channels", &context)?,
    };
    let k: usize = lookup_parse(&pairs, "k", &context)?;
    let mean_pixel = read_matrix(&prefixed(prefix, ".mean.ldm"), MatrixFormat::Ldm)?.into_data();
    let components = read_matrix(&prefixed(prefix, ".components.ldm"), MatrixFormat::Ldm)?;
    let explained_variance = read_matrix(&prefixed(prefix, ".var.ldm"), MatrixFormat::Ldm)?.into_data();
    let p = geometry.pixel_count();
    if mean_pixel.len() != p || components.shape() != (k, p) || explained_variance.len() != k {
        return Err(Error::format(
            context,
            format!(
                "inconsistent model files: mean {}, components {}, variances {} for geometry {geometry}, k={k}",
                mean_pixel.len(),
                components.shape_str(),
                explained_variance.len()
            ),
        ));
    }
    Ok(EigenImageModel {
        mean_pixel,
        components,
        explained_variance,
        geometry,
    })
}
