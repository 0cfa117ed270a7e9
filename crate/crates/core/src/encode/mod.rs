//! Feature matrices to texture color images.
//!
//! Every encoder follows the same order of operations: min-max normalize
//! each feature row over the original frames, bilinearly resize the
//! unit-interval matrix to the output size, apply the color mapping, then
//! quantize to 8-bit. Color mapping always happens after the resize so
//! interpolation never mixes RGB values, and quantization is the very last
//! step so identical feature matrices yield byte-identical images.
//!
//! Four encodings exist: jet-colored scalars (EM1), XYZ-to-RGB vectors
//! (EM2), two-subject red/green with a derived blue channel (EM3), and a
//! composite that places three scalar families in the three channels (EM4).

use std::collections::HashMap;
use std::io::Cursor;
use std::path::Path;

use crate::features::{
    build_selection_plan_for, extract_features, Family, FeatureMatrix, PlanError, RowSubject,
    SelectionConfig, Strategy, Subject, Values,
};
use crate::preprocess::NormalizedSequence;

/// Default output image side length.
pub const DEFAULT_IMAGE_SIZE: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("{family} is a vector family, expected a scalar matrix")]
    NotScalar { family: Family },
    #[error("{family} is a scalar family, expected a vector matrix")]
    NotVector { family: Family },
    #[error("subject matrices disagree: main is {main_rows}x{main_cols}, auxiliary is {aux_rows}x{aux_cols}")]
    ShapeMismatch { main_rows: usize, main_cols: usize, aux_rows: usize, aux_cols: usize },
    #[error("no rows left after filtering for {0:?}")]
    EmptySelection(RowSubject),
    #[error("composite encoding expects families (JJd, JLd, LLa), got ({0}, {1}, {2})")]
    BadCompositeFamilies(Family, Family, Family),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Plain `rows x cols` grid of real values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// Rows whose spread is below this are mapped to all zeros.
pub const DEGENERATE_ROW_EPS: f64 = 1e-12;

fn scalar_rows<'a>(
    m: &'a FeatureMatrix,
    filter: Option<RowSubject>,
) -> Result<(Vec<usize>, &'a [f64]), EncodeError> {
    let data = match &m.values {
        Values::Scalar(v) => v.as_slice(),
        Values::Vector(_) => return Err(EncodeError::NotScalar { family: m.family }),
    };
    let rows: Vec<usize> = (0..m.rows)
        .filter(|&r| filter.map_or(true, |f| m.row_subjects[r] == f))
        .collect();
    if rows.is_empty() {
        return Err(EncodeError::EmptySelection(filter.unwrap_or(RowSubject::Main)));
    }
    Ok((rows, data))
}

fn min_max_normalize(values: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values.clone() {
        min = min.min(v);
        max = max.max(v);
    }
    let range = max - min;
    if range < DEGENERATE_ROW_EPS {
        values.map(|_| 0.0).collect()
    } else {
        values.map(|v| (v - min) / range).collect()
    }
}

/// Min-max normalizes each row of a scalar matrix over its original frames.
/// Rows with no spread map to all zeros. `filter` keeps only rows tagged
/// with the given subject.
pub fn normalize_rows(
    m: &FeatureMatrix,
    filter: Option<RowSubject>,
) -> Result<Grid, EncodeError> {
    let (rows, data) = scalar_rows(m, filter)?;
    let mut out = Vec::with_capacity(rows.len() * m.cols);
    for &r in &rows {
        let row = &data[r * m.cols..(r + 1) * m.cols];
        out.extend(min_max_normalize(row.iter().copied()));
    }
    Ok(Grid { rows: rows.len(), cols: m.cols, data: out })
}

/// Same as [`normalize_rows`] but for one component (0 = x, 1 = y, 2 = z)
/// of a vector matrix.
pub fn normalize_vector_component(
    m: &FeatureMatrix,
    component: usize,
    filter: Option<RowSubject>,
) -> Result<Grid, EncodeError> {
    let data = match &m.values {
        Values::Vector(v) => v.as_slice(),
        Values::Scalar(_) => return Err(EncodeError::NotVector { family: m.family }),
    };
    let rows: Vec<usize> = (0..m.rows)
        .filter(|&r| filter.map_or(true, |f| m.row_subjects[r] == f))
        .collect();
    if rows.is_empty() {
        return Err(EncodeError::EmptySelection(filter.unwrap_or(RowSubject::Main)));
    }
    let mut out = Vec::with_capacity(rows.len() * m.cols);
    for &r in &rows {
        let row = data[r * m.cols..(r + 1) * m.cols].iter().map(|v| v.component(component));
        out.extend(min_max_normalize(row));
    }
    Ok(Grid { rows: rows.len(), cols: m.cols, data: out })
}

/// Corner-aligned bilinear resize. Output cell (h, w) samples the source at
/// (h*(N-1)/(H-1), w*(T-1)/(W-1)); single-row or single-column sources
/// replicate. Values never leave the hull of the inputs.
pub fn bilinear_resize(grid: &Grid, height: usize, width: usize) -> Grid {
    assert!(grid.rows >= 1 && grid.cols >= 1, "resize needs a non-empty source");
    assert!(height >= 1 && width >= 1, "resize needs a non-empty target");
    let y_step = if height > 1 { (grid.rows - 1) as f64 / (height - 1) as f64 } else { 0.0 };
    let x_step = if width > 1 { (grid.cols - 1) as f64 / (width - 1) as f64 } else { 0.0 };

    let mut data = Vec::with_capacity(height * width);
    for h in 0..height {
        let sy = h as f64 * y_step;
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(grid.rows - 1);
        let fy = sy - y0 as f64;
        for w in 0..width {
            let sx = w as f64 * x_step;
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(grid.cols - 1);
            let fx = sx - x0 as f64;
            let top = grid.get(y0, x0) * (1.0 - fx) + grid.get(y0, x1) * fx;
            let bottom = grid.get(y1, x0) * (1.0 - fx) + grid.get(y1, x1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Grid { rows: height, cols: width, data }
}

fn jet_red(u: f64) -> f64 {
    if u < 0.375 {
        0.0
    } else if u < 0.625 {
        (u - 0.375) / 0.25
    } else if u < 0.875 {
        1.0
    } else {
        1.0 - 0.5 * (u - 0.875) / 0.125
    }
}

fn jet_green(u: f64) -> f64 {
    if u < 0.125 {
        0.0
    } else if u < 0.375 {
        (u - 0.125) / 0.25
    } else if u < 0.625 {
        1.0
    } else if u < 0.875 {
        1.0 - (u - 0.625) / 0.25
    } else {
        0.0
    }
}

/// Piecewise-linear jet colorbar on [0, 1]: deep blue at 0, through cyan,
/// green and yellow, to dark red at 1. Inputs are clamped.
pub fn jet_colorbar(u: f64) -> [f64; 3] {
    let u = u.clamp(0.0, 1.0);
    [jet_red(u), jet_green(u), jet_red(1.0 - u)]
}

/// An 8-bit RGB raster with rows indexing features and columns frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextureImage {
    height: usize,
    width: usize,
    /// Row-major RGB bytes, `height * width * 3` long.
    data: Vec<u8>,
}

fn quantize(v: f64) -> u8 {
    (255.0 * v).round().clamp(0.0, 255.0) as u8
}

impl TextureImage {
    /// Assembles an image from per-channel unit-interval grids of identical
    /// shape, quantizing each sample.
    fn from_channels(r: &Grid, g: &Grid, b: &Grid) -> Self {
        assert_eq!((r.rows, r.cols), (g.rows, g.cols));
        assert_eq!((r.rows, r.cols), (b.rows, b.cols));
        let mut data = Vec::with_capacity(r.rows * r.cols * 3);
        for i in 0..r.data.len() {
            data.push(quantize(r.data[i]));
            data.push(quantize(g.data[i]));
            data.push(quantize(b.data[i]));
        }
        Self { height: r.rows, width: r.cols, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    /// Channel value as a real in [0, 1]; used by the downstream classifier.
    pub fn channel_value(&self, row: usize, col: usize, channel: usize) -> f64 {
        f64::from(self.data[(row * self.width + col) * 3 + channel]) / 255.0
    }

    /// Encodes as an 8-bit RGB, non-interlaced PNG.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>, EncodeError> {
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length matches dimensions");
        let mut bytes = Vec::new();
        img.write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)?;
        Ok(bytes)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, EncodeError> {
        let img = image::load_from_memory(bytes)?.to_rgb8();
        Ok(Self {
            height: img.height() as usize,
            width: img.width() as usize,
            data: img.into_raw(),
        })
    }

    /// Writes the PNG atomically: a temp file in the target directory is
    /// fully written before being renamed over the destination.
    pub fn write_png_atomic(&self, path: &Path) -> Result<(), EncodeError> {
        let bytes = self.to_png_bytes()?;
        write_bytes_atomic(path, &bytes)
    }
}

/// Atomic file write used for every artifact the pipeline emits.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<(), EncodeError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| EncodeError::Io(e.error))?;
    Ok(())
}

/// Jet-colored scalar encoding.
pub fn encode_em1(m: &FeatureMatrix, height: usize, width: usize) -> Result<TextureImage, EncodeError> {
    let grid = bilinear_resize(&normalize_rows(m, None)?, height, width);
    let mut r = Vec::with_capacity(grid.data.len());
    let mut g = Vec::with_capacity(grid.data.len());
    let mut b = Vec::with_capacity(grid.data.len());
    for &u in &grid.data {
        let [cr, cg, cb] = jet_colorbar(u);
        r.push(cr);
        g.push(cg);
        b.push(cb);
    }
    let shape = |data: Vec<f64>| Grid { rows: grid.rows, cols: grid.cols, data };
    Ok(TextureImage::from_channels(&shape(r), &shape(g), &shape(b)))
}

/// XYZ-to-RGB vector encoding: each component is row-normalized on its own
/// and becomes one channel.
pub fn encode_em2(m: &FeatureMatrix, height: usize, width: usize) -> Result<TextureImage, EncodeError> {
    let r = bilinear_resize(&normalize_vector_component(m, 0, None)?, height, width);
    let g = bilinear_resize(&normalize_vector_component(m, 1, None)?, height, width);
    let b = bilinear_resize(&normalize_vector_component(m, 2, None)?, height, width);
    Ok(TextureImage::from_channels(&r, &g, &b))
}

/// Two-subject encoding: red carries the inverted main-subject features,
/// green the auxiliary features, and blue 4*R*G clamped to [0, 1]. The blue
/// channel is derived at feature resolution, before the resize.
pub fn encode_em3(
    m_main: &FeatureMatrix,
    m_aux: &FeatureMatrix,
    height: usize,
    width: usize,
) -> Result<TextureImage, EncodeError> {
    if m_main.rows != m_aux.rows || m_main.cols != m_aux.cols {
        return Err(EncodeError::ShapeMismatch {
            main_rows: m_main.rows,
            main_cols: m_main.cols,
            aux_rows: m_aux.rows,
            aux_cols: m_aux.cols,
        });
    }
    let norm_main = normalize_rows(m_main, None)?;
    let norm_aux = normalize_rows(m_aux, None)?;
    let r_data: Vec<f64> = norm_main.data.iter().map(|v| 1.0 - v).collect();
    let b_data: Vec<f64> = r_data
        .iter()
        .zip(&norm_aux.data)
        .map(|(r, g)| (4.0 * r * g).clamp(0.0, 1.0))
        .collect();
    let r = Grid { rows: norm_main.rows, cols: norm_main.cols, data: r_data };
    let b = Grid { rows: norm_main.rows, cols: norm_main.cols, data: b_data };
    Ok(TextureImage::from_channels(
        &bilinear_resize(&r, height, width),
        &bilinear_resize(&norm_aux, height, width),
        &bilinear_resize(&b, height, width),
    ))
}

/// Composite encoding: three scalar matrices (JJd, JLd, LLa), each
/// independently normalized and resized, fill the red, green and blue
/// channels.
pub fn encode_em4_composite(
    jjd: &FeatureMatrix,
    jld: &FeatureMatrix,
    lla: &FeatureMatrix,
    height: usize,
    width: usize,
) -> Result<TextureImage, EncodeError> {
    if jjd.family != Family::JJd || jld.family != Family::JLd || lla.family != Family::LLa {
        return Err(EncodeError::BadCompositeFamilies(jjd.family, jld.family, lla.family));
    }
    let r = bilinear_resize(&normalize_rows(jjd, None)?, height, width);
    let g = bilinear_resize(&normalize_rows(jld, None)?, height, width);
    let b = bilinear_resize(&normalize_rows(lla, None)?, height, width);
    Ok(TextureImage::from_channels(&r, &g, &b))
}

/// Encoding method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Encoding {
    Em1,
    Em2,
    Em3,
    Em4,
}

impl Encoding {
    pub fn name(self) -> &'static str {
        match self {
            Encoding::Em1 => "EM1",
            Encoding::Em2 => "EM2",
            Encoding::Em3 => "EM3",
            Encoding::Em4 => "EM4",
        }
    }
}

/// The thirteen image configurations one sequence expands into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ImageSpec {
    JjvJs1,
    JjvJs2,
    JjvJs3,
    JjoJs1,
    JjoJs2,
    JjoJs3,
    JjdJs1,
    JjdJs2,
    JjdJs3,
    JldLs1,
    JldLs2,
    LlaLs1,
    Com,
}

impl ImageSpec {
    pub const ALL: [ImageSpec; 13] = [
        ImageSpec::JjvJs1,
        ImageSpec::JjvJs2,
        ImageSpec::JjvJs3,
        ImageSpec::JjoJs1,
        ImageSpec::JjoJs2,
        ImageSpec::JjoJs3,
        ImageSpec::JjdJs1,
        ImageSpec::JjdJs2,
        ImageSpec::JjdJs3,
        ImageSpec::JldLs1,
        ImageSpec::JldLs2,
        ImageSpec::LlaLs1,
        ImageSpec::Com,
    ];

    /// Canonical label, used in filenames, score files and configuration.
    pub fn label(self) -> &'static str {
        match self {
            ImageSpec::JjvJs1 => "JJv-JS1-EM2",
            ImageSpec::JjvJs2 => "JJv-JS2-EM2",
            ImageSpec::JjvJs3 => "JJv-JS3-EM2",
            ImageSpec::JjoJs1 => "JJo-JS1-EM2",
            ImageSpec::JjoJs2 => "JJo-JS2-EM2",
            ImageSpec::JjoJs3 => "JJo-JS3-EM2",
            ImageSpec::JjdJs1 => "JJd-JS1-EM1",
            ImageSpec::JjdJs2 => "JJd-JS2-EM1",
            ImageSpec::JjdJs3 => "JJd-JS3-EM1",
            ImageSpec::JldLs1 => "JLd-LS1-EM3",
            ImageSpec::JldLs2 => "JLd-LS2-EM1",
            ImageSpec::LlaLs1 => "LLa-LS1-EM3",
            ImageSpec::Com => "Com-EM4",
        }
    }

    pub fn encoding(self) -> Encoding {
        match self {
            ImageSpec::JjvJs1
            | ImageSpec::JjvJs2
            | ImageSpec::JjvJs3
            | ImageSpec::JjoJs1
            | ImageSpec::JjoJs2
            | ImageSpec::JjoJs3 => Encoding::Em2,
            ImageSpec::JjdJs1 | ImageSpec::JjdJs2 | ImageSpec::JjdJs3 | ImageSpec::JldLs2 => {
                Encoding::Em1
            }
            ImageSpec::JldLs1 | ImageSpec::LlaLs1 => Encoding::Em3,
            ImageSpec::Com => Encoding::Em4,
        }
    }

    /// Family and strategy behind the image; `None` for the composite,
    /// which draws on three matrices.
    pub fn family_strategy(self) -> Option<(Family, Strategy)> {
        match self {
            ImageSpec::JjvJs1 => Some((Family::JJv, Strategy::Js1)),
            ImageSpec::JjvJs2 => Some((Family::JJv, Strategy::Js2)),
            ImageSpec::JjvJs3 => Some((Family::JJv, Strategy::Js3)),
            ImageSpec::JjoJs1 => Some((Family::JJo, Strategy::Js1)),
            ImageSpec::JjoJs2 => Some((Family::JJo, Strategy::Js2)),
            ImageSpec::JjoJs3 => Some((Family::JJo, Strategy::Js3)),
            ImageSpec::JjdJs1 => Some((Family::JJd, Strategy::Js1)),
            ImageSpec::JjdJs2 => Some((Family::JJd, Strategy::Js2)),
            ImageSpec::JjdJs3 => Some((Family::JJd, Strategy::Js3)),
            ImageSpec::JldLs1 => Some((Family::JLd, Strategy::Ls1)),
            ImageSpec::JldLs2 => Some((Family::JLd, Strategy::Ls2)),
            ImageSpec::LlaLs1 => Some((Family::LLa, Strategy::Ls1)),
            ImageSpec::Com => None,
        }
    }

    /// Output filename for a given sequence.
    pub fn filename(self, source_id: &str) -> String {
        format!("{source_id}__{}.png", self.label())
    }
}

impl std::fmt::Display for ImageSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ImageSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ImageSpec::ALL
            .iter()
            .find(|spec| spec.label().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| format!("unknown image label {s:?}"))
    }
}

impl serde::Serialize for ImageSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> serde::Deserialize<'de> for ImageSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Builds the requested subset of the thirteen texture images for one
/// sequence. Feature matrices shared between images are computed once.
pub fn generate_image_set(
    seq: &NormalizedSequence,
    selection: &SelectionConfig,
    height: usize,
    width: usize,
    labels: &[ImageSpec],
) -> Result<Vec<(ImageSpec, TextureImage)>, EncodeError> {
    let mut cache: HashMap<(Family, Strategy, Subject), FeatureMatrix> = HashMap::new();
    let matrix = |family: Family,
                      strategy: Strategy,
                      subject: Subject,
                      cache: &mut HashMap<(Family, Strategy, Subject), FeatureMatrix>|
     -> Result<FeatureMatrix, EncodeError> {
        if let Some(m) = cache.get(&(family, strategy, subject)) {
            return Ok(m.clone());
        }
        let plan = build_selection_plan_for(family, strategy, subject, selection)?;
        let m = extract_features(seq, &plan);
        cache.insert((family, strategy, subject), m.clone());
        Ok(m)
    };

    let mut out = Vec::with_capacity(labels.len());
    for &spec in labels {
        let image = match spec.encoding() {
            Encoding::Em1 => {
                let (family, strategy) = spec.family_strategy().expect("EM1 has a single source");
                let m = if strategy.is_line_strategy() {
                    // Per-subject line plans are stacked main-then-auxiliary
                    // so the single-matrix encodings still cover both
                    // subjects.
                    let main = matrix(family, strategy, Subject::Main, &mut cache)?;
                    let aux = matrix(family, strategy, Subject::Auxiliary, &mut cache)?;
                    FeatureMatrix::stacked(&[&main, &aux]).expect("same plan template")
                } else {
                    matrix(family, strategy, Subject::Main, &mut cache)?
                };
                encode_em1(&m, height, width)?
            }
            Encoding::Em2 => {
                let (family, strategy) = spec.family_strategy().expect("EM2 has a single source");
                let m = matrix(family, strategy, Subject::Main, &mut cache)?;
                encode_em2(&m, height, width)?
            }
            Encoding::Em3 => {
                let (family, strategy) = spec.family_strategy().expect("EM3 has a single source");
                let main = matrix(family, strategy, Subject::Main, &mut cache)?;
                let aux = matrix(family, strategy, Subject::Auxiliary, &mut cache)?;
                encode_em3(&main, &aux, height, width)?
            }
            Encoding::Em4 => {
                let jjd = matrix(Family::JJd, Strategy::Js1, Subject::Main, &mut cache)?;
                let jld = matrix(Family::JLd, Strategy::Ls1, Subject::Main, &mut cache)?;
                let lla = matrix(Family::LLa, Strategy::Ls1, Subject::Main, &mut cache)?;
                encode_em4_composite(&jjd, &jld, &lla, height, width)?
            }
        };
        out.push((spec, image));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::preprocess::preprocess;
    use crate::skeleton::{synthesize_sequence, SynthesisParams};

    fn scalar_matrix(rows: usize, cols: usize, data: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix {
            family: Family::JJd,
            strategy: Strategy::Js1,
            rows,
            cols,
            values: Values::Scalar(data),
            row_subjects: vec![RowSubject::Main; rows],
        }
    }

    #[test]
    fn normalize_rows_maps_to_unit_interval() {
        let m = scalar_matrix(1, 3, vec![2.0, 4.0, 6.0]);
        let grid = normalize_rows(&m, None).unwrap();
        assert_eq!(grid.data, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_row_becomes_zeros() {
        let m = scalar_matrix(1, 3, vec![5.0, 5.0, 5.0]);
        let grid = normalize_rows(&m, None).unwrap();
        assert_eq!(grid.data, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn nondegenerate_rows_hit_zero_and_one() {
        let m = scalar_matrix(2, 4, vec![0.3, -1.2, 0.9, 0.0, 7.0, 7.5, 6.5, 7.2]);
        let grid = normalize_rows(&m, None).unwrap();
        for row in 0..2 {
            let vals: Vec<f64> = (0..4).map(|c| grid.get(row, c)).collect();
            assert_eq!(vals.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
    }

    #[test]
    fn subject_filter_selects_rows() {
        let mut m = scalar_matrix(2, 2, vec![0.0, 1.0, 5.0, 7.0]);
        m.row_subjects = vec![RowSubject::Main, RowSubject::Auxiliary];
        let grid = normalize_rows(&m, Some(RowSubject::Auxiliary)).unwrap();
        assert_eq!(grid.rows, 1);
        assert_eq!(grid.data, vec![0.0, 1.0]);
    }

    #[test]
    fn resize_identity_when_shapes_match() {
        let grid = Grid { rows: 2, cols: 3, data: vec![0.0, 0.5, 1.0, 1.0, 0.25, 0.75] };
        let out = bilinear_resize(&grid, 2, 3);
        for (a, b) in out.data.iter().zip(&grid.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_replicates_single_cell() {
        let grid = Grid { rows: 1, cols: 1, data: vec![0.42] };
        let out = bilinear_resize(&grid, 4, 5);
        assert!(out.data.iter().all(|v| (*v - 0.42).abs() < 1e-15));
    }

    #[test]
    fn resize_2x2_checkerboard_center_is_half() {
        let grid = Grid { rows: 2, cols: 2, data: vec![0.0, 1.0, 1.0, 0.0] };
        let out = bilinear_resize(&grid, 3, 3);
        assert!((out.get(1, 1) - 0.5).abs() < 1e-12);
        // Corners are preserved by corner alignment.
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.get(0, 2), 1.0);
    }

    #[test]
    fn jet_endpoints_match_the_piecewise_definition() {
        assert_eq!(jet_colorbar(0.0), [0.0, 0.0, 0.5]);
        assert_eq!(jet_colorbar(0.5), [0.5, 1.0, 0.5]);
        assert_eq!(jet_colorbar(1.0), [0.5, 0.0, 0.0]);
        // Out-of-range inputs clamp.
        assert_eq!(jet_colorbar(-3.0), jet_colorbar(0.0));
        assert_eq!(jet_colorbar(42.0), jet_colorbar(1.0));
    }

    #[test]
    fn em1_constant_matrix_is_uniform_jet_zero() {
        let m = scalar_matrix(3, 4, vec![2.5; 12]);
        let img = encode_em1(&m, 8, 8).unwrap();
        for row in 0..8 {
            for col in 0..8 {
                assert_eq!(img.pixel(row, col), [0, 0, 128]);
            }
        }
    }

    #[test]
    fn em1_single_ramp_row_sweeps_the_colorbar() {
        let m = scalar_matrix(1, 256, (0..256).map(|i| i as f64).collect());
        let img = encode_em1(&m, 4, 256).unwrap();
        assert_eq!(img.pixel(0, 0), [0, 0, 128]);
        assert_eq!(img.pixel(0, 255), [128, 0, 0]);
        // Red channel is monotone nondecreasing until the final falloff at
        // u > 0.875.
        let reds: Vec<u8> = (0..224).map(|c| img.pixel(2, c)[0]).collect();
        assert!(reds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn em2_round_trips_only_the_used_channels() {
        // Vectors vary only in x: G and B channels must be uniform.
        let rows = 2;
        let cols = 5;
        let data: Vec<Vec3> = (0..rows * cols)
            .map(|i| Vec3::new(i as f64, 0.0, 0.0))
            .collect();
        let m = FeatureMatrix {
            family: Family::JJv,
            strategy: Strategy::Js1,
            rows,
            cols,
            values: Values::Vector(data),
            row_subjects: vec![RowSubject::Main; rows],
        };
        let img = encode_em2(&m, 6, 6).unwrap();
        for row in 0..6 {
            for col in 0..6 {
                let [_, g, b] = img.pixel(row, col);
                assert_eq!(g, 0);
                assert_eq!(b, 0);
            }
        }
    }

    #[test]
    fn em2_ignores_z_permutations_in_r_and_g() {
        let rows = 3;
        let cols = 4;
        let base: Vec<Vec3> = (0..rows * cols)
            .map(|i| Vec3::new(i as f64 * 0.7, (i as f64).sin(), (i as f64).cos()))
            .collect();
        let mut permuted = base.clone();
        // Reverse the z entries within each row.
        for r in 0..rows {
            let zs: Vec<f64> = (0..cols).map(|c| base[r * cols + c].z).collect();
            for c in 0..cols {
                permuted[r * cols + c].z = zs[cols - 1 - c];
            }
        }
        let make = |data: Vec<Vec3>| FeatureMatrix {
            family: Family::JJo,
            strategy: Strategy::Js2,
            rows,
            cols,
            values: Values::Vector(data),
            row_subjects: vec![RowSubject::Main; rows],
        };
        let img_a = encode_em2(&make(base), 16, 16).unwrap();
        let img_b = encode_em2(&make(permuted), 16, 16).unwrap();
        for row in 0..16 {
            for col in 0..16 {
                assert_eq!(img_a.pixel(row, col)[0], img_b.pixel(row, col)[0]);
                assert_eq!(img_a.pixel(row, col)[1], img_b.pixel(row, col)[1]);
            }
        }
    }

    #[test]
    fn em3_shadow_green_is_complement_of_red() {
        let m = scalar_matrix(2, 4, vec![0.0, 1.0, 2.0, 3.0, 5.0, 4.0, 3.0, 2.0]);
        let norm = normalize_rows(&m, None).unwrap();
        // With aux == main, G = normalized and R = 1 - normalized.
        for v in &norm.data {
            let r = 1.0 - v;
            assert_eq!(r + v, 1.0);
        }
        let img = encode_em3(&m, &m.clone(), 8, 8).unwrap();
        for row in 0..8 {
            for col in 0..8 {
                let [r, g, _] = img.pixel(row, col);
                assert_eq!(u16::from(r) + u16::from(g), 255);
            }
        }
    }

    #[test]
    fn em3_blue_channel_arithmetic() {
        // One row [0, 1]: normalized main = [0, 1] so R = [1, 0]; aux
        // reversed gives G = [1, 0]; B = 4RG clamped = [1, 0] -> pixel 0 is
        // (255, 255, 255).
        let main = scalar_matrix(1, 2, vec![0.0, 1.0]);
        let aux = scalar_matrix(1, 2, vec![1.0, 0.0]);
        let img = encode_em3(&main, &aux, 1, 2).unwrap();
        assert_eq!(img.pixel(0, 0), [255, 255, 255]);
        assert_eq!(img.pixel(0, 1), [0, 0, 0]);
    }

    #[test]
    fn em3_rejects_shape_mismatch() {
        let main = scalar_matrix(2, 2, vec![0.0; 4]);
        let aux = scalar_matrix(3, 2, vec![0.0; 6]);
        assert!(matches!(
            encode_em3(&main, &aux, 4, 4),
            Err(EncodeError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn em4_constant_matrices_give_black() {
        let jjd = scalar_matrix(2, 3, vec![1.0; 6]);
        let mut jld = scalar_matrix(4, 3, vec![2.0; 12]);
        jld.family = Family::JLd;
        let mut lla = scalar_matrix(5, 3, vec![0.5; 15]);
        lla.family = Family::LLa;
        let img = encode_em4_composite(&jjd, &jld, &lla, 8, 8).unwrap();
        for row in 0..8 {
            for col in 0..8 {
                assert_eq!(img.pixel(row, col), [0, 0, 0]);
            }
        }
    }

    #[test]
    fn em4_only_red_varies_when_only_jjd_varies() {
        let jjd = scalar_matrix(1, 3, vec![0.0, 0.5, 1.0]);
        let mut jld = scalar_matrix(2, 3, vec![2.0; 6]);
        jld.family = Family::JLd;
        let mut lla = scalar_matrix(2, 3, vec![0.5; 6]);
        lla.family = Family::LLa;
        let img = encode_em4_composite(&jjd, &jld, &lla, 4, 6).unwrap();
        for row in 0..4 {
            for col in 0..6 {
                let [_, g, b] = img.pixel(row, col);
                assert_eq!((g, b), (0, 0));
            }
        }
        assert!(img.pixel(0, 5)[0] > img.pixel(0, 0)[0]);
    }

    #[test]
    fn em4_checks_families() {
        let jjd = scalar_matrix(1, 2, vec![0.0, 1.0]);
        assert!(matches!(
            encode_em4_composite(&jjd, &jjd.clone(), &jjd.clone(), 4, 4),
            Err(EncodeError::BadCompositeFamilies(..))
        ));
    }

    #[test]
    fn generate_image_set_emits_all_13_at_the_right_size() {
        let seq = preprocess(
            &synthesize_sequence(1, 5, 6, &SynthesisParams::default()).unwrap(),
        )
        .unwrap();
        let images = generate_image_set(&seq, &SelectionConfig::default(), 64, 64, &ImageSpec::ALL)
            .unwrap();
        assert_eq!(images.len(), 13);
        let labels: std::collections::BTreeSet<&str> =
            images.iter().map(|(s, _)| s.label()).collect();
        assert_eq!(labels.len(), 13);
        for (_, img) in &images {
            assert_eq!((img.height(), img.width()), (64, 64));
        }
    }

    #[test]
    fn single_frame_sequences_still_encode() {
        let full = preprocess(
            &synthesize_sequence(2, 9, 4, &SynthesisParams::default()).unwrap(),
        )
        .unwrap();
        let one = crate::preprocess::NormalizedSequence {
            source_id: full.source_id.clone(),
            main: vec![full.main[0]],
            auxiliary: vec![full.auxiliary[0]],
            shadow: full.shadow,
            shadow_frames: 1,
        };
        let images =
            generate_image_set(&one, &SelectionConfig::default(), 32, 32, &ImageSpec::ALL).unwrap();
        assert_eq!(images.len(), 13);
    }

    #[test]
    fn encoding_is_deterministic_down_to_png_bytes() {
        let seq = preprocess(
            &synthesize_sequence(4, 77, 9, &SynthesisParams::default()).unwrap(),
        )
        .unwrap();
        let config = SelectionConfig::default();
        let a = generate_image_set(&seq, &config, 48, 48, &[ImageSpec::JjdJs1]).unwrap();
        let b = generate_image_set(&seq, &config, 48, 48, &[ImageSpec::JjdJs1]).unwrap();
        assert_eq!(
            a[0].1.to_png_bytes().unwrap(),
            b[0].1.to_png_bytes().unwrap()
        );
    }

    #[test]
    fn label_round_trip() {
        for spec in ImageSpec::ALL {
            let parsed: ImageSpec = spec.label().parse().unwrap();
            assert_eq!(parsed, spec);
        }
        assert!("JJx-JS9-EM7".parse::<ImageSpec>().is_err());
    }

    #[test]
    fn static_pose_em2_is_black() {
        // JJv rows of a static pose are constant, so every per-component
        // row normalization degenerates to zero.
        let params = SynthesisParams { amplitude: 0.0, ..Default::default() };
        let seq = preprocess(&synthesize_sequence(0, 3, 4, &params).unwrap()).unwrap();
        let plan = crate::features::build_selection_plan(
            Family::JJv,
            Strategy::Js1,
            &SelectionConfig::default(),
        )
        .unwrap();
        let m = crate::features::extract_features(&seq, &plan);
        let img = encode_em2(&m, 16, 16).unwrap();
        for row in 0..16 {
            for col in 0..16 {
                assert_eq!(img.pixel(row, col), [0, 0, 0]);
            }
        }
    }
}
