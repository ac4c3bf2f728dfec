//! Matrix and frame-stack file formats.
//!
//! Two on-disk formats, both byte-deterministic:
//! - CSV: comma-separated decimal rows, LF newlines, no header. Values are
//!   written with 17 significant digits, so a save/load round trip is exact.
//! - PGM: binary grayscale ("P5"), maxval up to 65535 (two-byte samples are
//!   big-endian). Pixels map to reals in `[0, maxval]`.
//!
//! A video becomes a [`FrameStack`]: each frame is flattened in row-major
//! pixel order into one column of the observation matrix.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Pgm,
}

/// A matrix file reference; dimensions are discovered on load.
#[derive(Debug, Clone)]
pub struct MatrixFile {
    pub path: PathBuf,
    pub format: MatrixFormat,
}

impl MatrixFile {
    pub fn csv<P: Into<PathBuf>>(path: P) -> Self {
        Self {
            path: path.into(),
            format: MatrixFormat::Csv,
        }
    }

    pub fn pgm<P: Into<PathBuf>>(path: P) -> Self {
        Self {
            path: path.into(),
            format: MatrixFormat::Pgm,
        }
    }

    /// Picks the format from the file extension (`.pgm` or anything else =
    /// CSV).
    pub fn infer<P: Into<PathBuf>>(path: P) -> Self {
        let path = path.into();
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => MatrixFormat::Pgm,
            _ => MatrixFormat::Csv,
        };
        Self { path, format }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Loads a matrix from a CSV or PGM file.
pub fn load_matrix(file: &MatrixFile) -> Result<DenseMatrix> {
    match file.format {
        MatrixFormat::Csv => load_matrix_csv(&file.path),
        MatrixFormat::Pgm => Ok(load_pgm(&file.path)?.0),
    }
}

/// Parses a headerless CSV of decimal rows. Ragged rows, unparsable cells
/// and empty files are usage errors carrying the 1-based line number.
pub fn load_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut n_cols = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if idx == 0 {
            n_cols = cells.len();
        } else if cells.len() != n_cols {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {n_cols} cells, found {}", cells.len()),
            ));
        }
        let mut row = Vec::with_capacity(n_cols);
        for (col, cell) in cells.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                parse_err(
                    path,
                    line_no,
                    format!("cell {} is not a number: {cell:?}", col + 1),
                )
            })?;
            if !value.is_finite() {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("cell {} is not finite", col + 1),
                ));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty file"));
    }
    DenseMatrix::from_rows(&rows)
}

/// Writes a matrix as CSV with 17-significant-digit values, which round-trip
/// `f64` exactly.
pub fn save_matrix_csv(path: &Path, matrix: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..matrix.rows() {
        for j in 0..matrix.cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.16e}", matrix.get(i, j)));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads a binary PGM; returns the pixel matrix (height x width) and maxval.
pub fn load_pgm(path: &Path) -> Result<(DenseMatrix, u32)> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut pos = 0usize;

    let fail = |pos: usize, msg: &str| parse_err(path, pos, format!("{msg} (byte offset)"));

    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(fail(0, "not a binary PGM (missing P5 magic)"));
    }
    pos += 2;

    // header tokens: width, height, maxval; '#' comments run to end of line
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(fail(pos, "expected a decimal header field"));
        }
        let token = std::str::from_utf8(&bytes[start..pos]).expect("digits are utf8");
        *field = token
            .parse()
            .map_err(|_| fail(start, "header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(fail(2, "zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(fail(2, "maxval must be in [1, 65535]"));
    }
    // single whitespace byte separates header from raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(fail(pos, "missing raster separator"));
    }
    pos += 1;

    let (w, h) = (width as usize, height as usize);
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let expected = w * h * bytes_per_sample;
    if bytes.len() - pos < expected {
        return Err(fail(
            pos,
            &format!(
                "raster truncated: need {expected} bytes, have {}",
                bytes.len() - pos
            ),
        ));
    }
    let raster = &bytes[pos..pos + expected];
    let matrix = DenseMatrix::from_fn(h, w, |i, j| {
        let k = i * w + j;
        if bytes_per_sample == 1 {
            raster[k] as f64
        } else {
            u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as f64
        }
    });
    Ok((matrix, maxval))
}

/// Writes an 8-bit binary PGM from values already in `[0, 255]`.
pub fn save_pgm(path: &Path, pixels: &DenseMatrix) -> Result<()> {
    let (h, w) = pixels.shape();
    let mut out = Vec::with_capacity(32 + h * w);
    write!(out, "P5\n{w} {h}\n255\n").expect("vec write");
    for i in 0..h {
        for j in 0..w {
            out.push(pixels.get(i, j).clamp(0.0, 255.0).round() as u8);
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// A stack of equally sized grayscale frames flattened into matrix columns:
/// column `j` holds frame `j` in row-major pixel order, so the observation
/// has `frame_height * frame_width` rows and one column per frame.
#[derive(Debug, Clone)]
pub struct FrameStack {
    pub frame_height: usize,
    pub frame_width: usize,
    pub matrix: DenseMatrix,
}

impl FrameStack {
    pub fn frame_count(&self) -> usize {
        self.matrix.cols()
    }

    /// Reshapes column `j` back into a `height x width` frame.
    pub fn frame(&self, j: usize) -> DenseMatrix {
        let col = self.matrix.col(j);
        let w = self.frame_width;
        DenseMatrix::from_fn(self.frame_height, w, |y, x| col[y * w + x])
    }

    /// Builds a stack from frames of identical dimensions.
    pub fn from_frames(frames: &[DenseMatrix]) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::invalid("frame stack needs at least one frame"));
        };
        let (h, w) = first.shape();
        let mut entries = Vec::with_capacity(h * w * frames.len());
        for (idx, frame) in frames.iter().enumerate() {
            if frame.shape() != (h, w) {
                return Err(Error::invalid(format!(
                    "frame {idx} has shape {:?}, expected {:?}",
                    frame.shape(),
                    (h, w)
                )));
            }
            for y in 0..h {
                for x in 0..w {
                    entries.push(frame.get(y, x));
                }
            }
        }
        Ok(Self {
            frame_height: h,
            frame_width: w,
            matrix: DenseMatrix::from_col_major(h * w, frames.len(), entries)?,
        })
    }
}

/// Loads PGM frames as a [`FrameStack`], columns ordered lexicographically by
/// file name. Mixed dimensions are rejected naming the offending file.
pub fn load_frames(paths: &[PathBuf]) -> Result<FrameStack> {
    if paths.is_empty() {
        return Err(Error::invalid("load_frames needs at least one frame"));
    }
    let mut ordered: Vec<&PathBuf> = paths.iter().collect();
    ordered.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));

    let mut frames = Vec::with_capacity(ordered.len());
    let mut dims: Option<(usize, usize)> = None;
    for path in &ordered {
        let (frame, _) = load_pgm(path)?;
        match dims {
            None => dims = Some(frame.shape()),
            Some(expected) if frame.shape() != expected => {
                return Err(Error::invalid(format!(
                    "frame {} has dimensions {}x{}, expected {}x{}",
                    path.display(),
                    frame.shape().0,
                    frame.shape().1,
                    expected.0,
                    expected.1
                )));
            }
            _ => {}
        }
        frames.push(frame);
    }
    FrameStack::from_frames(&frames)
}

/// Loads every `.pgm` file in a directory as a frame stack.
pub fn load_frames_dir(dir: &Path) -> Result<FrameStack> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let path = entry.path();
        if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        {
            paths.push(path);
        }
    }
    load_frames(&paths)
}

/// Writes one 8-bit PGM per column into `dir` (created if missing), named
/// `frame_0000.pgm`, `frame_0001.pgm`, ... Values are mapped affinely from
/// `[lo, hi]` onto `[0, 255]` and clamped.
pub fn save_frames(stack: &FrameStack, dir: &Path, clamp: (f64, f64)) -> Result<()> {
    let (lo, hi) = clamp;
    if hi <= lo || !hi.is_finite() || !lo.is_finite() {
        return Err(Error::invalid(format!(
            "clamp range must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let scale = 255.0 / (hi - lo);
    for j in 0..stack.frame_count() {
        let frame = stack.frame(j).map(|v| (v - lo) * scale);
        save_pgm(&dir.join(format!("frame_{j:04}.pgm")), &frame)?;
    }
    Ok(())
}

/// Flat `key=value` lines, LF-terminated; the run-summary format.
pub fn format_key_values(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (key, value) in pairs {
        out.push_str(key);
        out.push('=');
        out.push_str(value);
        out.push('\n');
    }
    out
}

/// Parses flat `key=value` lines. Blank lines and `#` comments are ignored;
/// anything else without a `=` is a parse error.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(parse_err(path, idx + 1, "expected key=value"));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
