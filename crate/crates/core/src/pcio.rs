//! Persistence: PLY point clouds, tree manifests, label datasets and
//! observation tables.
//!
//! Clouds are read from ASCII or binary little-endian PLY and always written
//! as binary little-endian PLY with `float` coordinates and `uchar` colors.
//! Two header comments carry the cloud metadata:
//!
//! ```text
//! comment source_id <id>
//! comment capture_week <n>
//! ```

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Label, LabeledPointRecord};
use crate::yindex::{TreeObservation, YellownessIndex};

/// One 3D point with 8-bit color. `z` is the camera depth axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl ColoredPoint {
    pub fn new(x: f32, y: f32, z: f32, r: u8, g: u8, b: u8) -> Self {
        ColoredPoint { x, y, z, r, g, b }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }

    pub fn rgb(&self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }
}

/// An ordered per-tree point set. Point order is significant and preserved
/// by every reader, writer and filter in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredPointCloud {
    pub points: Vec<ColoredPoint>,
    pub source_id: String,
    pub capture_week: u32,
}

impl ColoredPointCloud {
    pub fn new(source_id: impl Into<String>, capture_week: u32, points: Vec<ColoredPoint>) -> Self {
        ColoredPointCloud {
            points,
            source_id: source_id.into(),
            capture_week,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same metadata, points taken at `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> ColoredPointCloud {
        ColoredPointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            source_id: self.source_id.clone(),
            capture_week: self.capture_week,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capture_week < 1 {
            return Err(Error::Validation("capture_week must be >= 1".into()));
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::Validation(format!("point {i} has a non-finite coordinate")));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
struct PlyHeader {
    format: PlyFormat,
    elements: Vec<Element>,
    comments: Vec<String>,
    body_offset: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<PlyHeader> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut comments = Vec::new();

    loop {
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&c| c == b'\n') else {
            return Err(parse_err(line_no + 1, "unexpected end of file inside header"));
        };
        line_no += 1;
        let raw = &rest[..nl];
        offset += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(line_no, "header is not valid ASCII"))?
            .trim_end_matches('\r');

        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(parse_err(1, "missing 'ply' magic"));
            }
            continue;
        }

        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "format" => {
                let kind = tokens.next().unwrap_or_default();
                let version = tokens.next().unwrap_or_default();
                if version != "1.0" {
                    return Err(parse_err(line_no, format!("unsupported PLY version '{version}'")));
                }
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::Format("binary_big_endian PLY is not supported".into()))
                    }
                    other => return Err(parse_err(line_no, format!("unknown format '{other}'"))),
                });
            }
            "comment" => {
                let text = line.trim_start()["comment".len()..].trim().to_string();
                comments.push(text);
            }
            "obj_info" => {}
            "element" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "element without a name"))?;
                let count = tokens
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(line_no, "element count is not a non-negative integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before any element"))?;
                let ty = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "property without a type"))?;
                let kind = if ty == "list" {
                    let count = tokens.next().and_then(Scalar::parse);
                    let item = tokens.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) if !count.is_float() => PropKind::List { count, item },
                        _ => return Err(parse_err(line_no, "malformed list property")),
                    }
                } else {
                    PropKind::Scalar(
                        Scalar::parse(ty)
                            .ok_or_else(|| parse_err(line_no, format!("unknown property type '{ty}'")))?,
                    )
                };
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "property without a name"))?;
                element.props.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            "end_header" => break,
            other => return Err(parse_err(line_no, format!("unexpected header keyword '{other}'"))),
        }
    }

    let format = format.ok_or_else(|| parse_err(line_no, "header has no format line"))?;
    Ok(PlyHeader {
        format,
        elements,
        comments,
        body_offset: offset,
    })
}

struct VertexLayout {
    coords: [(usize, Scalar); 3],
    colors: [(usize, Scalar); 3],
}

fn vertex_layout(element: &Element) -> Result<VertexLayout> {
    let find = |name: &str| -> Result<(usize, Scalar)> {
        let idx = element
            .props
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::Format(format!("vertex element is missing required property '{name}'")))?;
        match element.props[idx].kind {
            PropKind::Scalar(s) => Ok((idx, s)),
            PropKind::List { .. } => Err(Error::Format(format!("property '{name}' must be a scalar"))),
        }
    };
    let coords = [find("x")?, find("y")?, find("z")?];
    let colors = [find("red")?, find("green")?, find("blue")?];
    for (name, (_, s)) in ["x", "y", "z"].iter().zip(coords) {
        if !s.is_float() {
            return Err(Error::Format(format!("property '{name}' must be float or double")));
        }
    }
    for (name, (_, s)) in ["red", "green", "blue"].iter().zip(colors) {
        if s != Scalar::U8 {
            return Err(Error::Format(format!("property '{name}' must be uchar")));
        }
    }
    Ok(VertexLayout { coords, colors })
}

fn metadata_from_comments(comments: &[String], path: &Path) -> Result<(String, u32)> {
    let mut source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut week = 1;
    for c in comments {
        if let Some(rest) = c.strip_prefix("source_id") {
            source_id = rest.trim().to_string();
        } else if let Some(rest) = c.strip_prefix("capture_week") {
            week = rest
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("invalid capture_week comment '{}'", rest.trim())))?;
        }
    }
    Ok((source_id, week))
}

/// Reads an ASCII or binary little-endian PLY cloud. Properties other than
/// `x y z red green blue` and elements other than `vertex` are ignored.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<ColoredPointCloud> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let cloud = parse_cloud(&bytes, path)?;
    cloud.validate().map_err(|e| match e {
        Error::Validation(m) => Error::Format(m),
        other => other,
    })?;
    Ok(cloud)
}

fn parse_cloud(bytes: &[u8], path: &Path) -> Result<ColoredPointCloud> {
    let header = parse_header(bytes)?;
    let (source_id, week) = metadata_from_comments(&header.comments, path)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::Format("PLY has no vertex element".into()))?;
    let layout = vertex_layout(&header.elements[vertex_pos])?;
    let body = &bytes[header.body_offset..];

    let points = match header.format {
        PlyFormat::BinaryLittleEndian => read_binary_body(body, &header.elements, vertex_pos, &layout)?,
        PlyFormat::Ascii => read_ascii_body(body, &header.elements, vertex_pos, &layout)?,
    };
    Ok(ColoredPointCloud::new(source_id, week, points))
}

fn truncated() -> Error {
    Error::Format("PLY body is truncated".into())
}

fn read_binary_body(
    body: &[u8],
    elements: &[Element],
    vertex_pos: usize,
    layout: &VertexLayout,
) -> Result<Vec<ColoredPoint>> {
    let mut cursor = 0usize;
    for element in &elements[..vertex_pos] {
        for _ in 0..element.count {
            for prop in &element.props {
                cursor = skip_binary_prop(body, cursor, &prop.kind)?;
            }
        }
    }

    let vertex = &elements[vertex_pos];
    let mut offsets = Vec::with_capacity(vertex.props.len());
    let mut points = Vec::with_capacity(vertex.count);
    for _ in 0..vertex.count {
        offsets.clear();
        for prop in &vertex.props {
            offsets.push(cursor);
            cursor = skip_binary_prop(body, cursor, &prop.kind)?;
        }
        let value = |(idx, s): (usize, Scalar)| s.read_le(&body[offsets[idx]..]);
        points.push(ColoredPoint {
            x: value(layout.coords[0]) as f32,
            y: value(layout.coords[1]) as f32,
            z: value(layout.coords[2]) as f32,
            r: body[offsets[layout.colors[0].0]],
            g: body[offsets[layout.colors[1].0]],
            b: body[offsets[layout.colors[2].0]],
        });
    }
    Ok(points)
}

fn skip_binary_prop(body: &[u8], cursor: usize, kind: &PropKind) -> Result<usize> {
    match *kind {
        PropKind::Scalar(s) => {
            let end = cursor + s.size();
            if end > body.len() {
                return Err(truncated());
            }
            Ok(end)
        }
        PropKind::List { count, item } => {
            if cursor + count.size() > body.len() {
                return Err(truncated());
            }
            let n = count.read_le(&body[cursor..]);
            if n < 0.0 {
                return Err(Error::Format("negative list length".into()));
            }
            let end = cursor + count.size() + n as usize * item.size();
            if end > body.len() {
                return Err(truncated());
            }
            Ok(end)
        }
    }
}

fn read_ascii_body(
    body: &[u8],
    elements: &[Element],
    vertex_pos: usize,
    layout: &VertexLayout,
) -> Result<Vec<ColoredPoint>> {
    let text = std::str::from_utf8(body).map_err(|_| Error::Format("ASCII PLY body is not UTF-8".into()))?;
    let mut tokens = text.split_ascii_whitespace();
    let mut next = || tokens.next().ok_or_else(truncated);

    for element in &elements[..vertex_pos] {
        for _ in 0..element.count {
            for prop in &element.props {
                match prop.kind {
                    PropKind::Scalar(_) => {
                        next()?;
                    }
                    PropKind::List { .. } => {
                        let n: usize = next()?
                            .parse()
                            .map_err(|_| Error::Format("invalid list length".into()))?;
                        for _ in 0..n {
                            next()?;
                        }
                    }
                }
            }
        }
    }

    let vertex = &elements[vertex_pos];
    let mut values = vec![0.0f64; vertex.props.len()];
    let mut points = Vec::with_capacity(vertex.count);
    for record in 0..vertex.count {
        for (slot, prop) in values.iter_mut().zip(&vertex.props) {
            match prop.kind {
                PropKind::Scalar(_) => {
                    let tok = next()?;
                    *slot = tok.parse().map_err(|_| {
                        Error::Format(format!("vertex {record}: invalid value '{tok}' for '{}'", prop.name))
                    })?;
                }
                PropKind::List { .. } => {
                    let n: usize = next()?
                        .parse()
                        .map_err(|_| Error::Format("invalid list length".into()))?;
                    for _ in 0..n {
                        next()?;
                    }
                }
            }
        }
        let color = |idx: usize| -> Result<u8> {
            let v = values[idx];
            if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                return Err(Error::Format(format!("vertex {record}: color value {v} outside 0..=255")));
            }
            Ok(v as u8)
        };
        points.push(ColoredPoint {
            x: values[layout.coords[0].0] as f32,
            y: values[layout.coords[1].0] as f32,
            z: values[layout.coords[2].0] as f32,
            r: color(layout.colors[0].0)?,
            g: color(layout.colors[1].0)?,
            b: color(layout.colors[2].0)?,
        });
    }
    Ok(points)
}

/// Writes `cloud` as binary little-endian PLY.
pub fn write_cloud(cloud: &ColoredPointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_cloud_to(cloud, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_cloud_to(cloud: &ColoredPointCloud, out: &mut impl Write) -> std::io::Result<()> {
    let source_id: String = cloud
        .source_id
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\ncomment source_id {source_id}\ncomment capture_week {}\n\
         element vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        cloud.capture_week,
        cloud.points.len()
    )?;
    let mut record = [0u8; 15];
    for p in &cloud.points {
        record[0..4].copy_from_slice(&p.x.to_le_bytes());
        record[4..8].copy_from_slice(&p.y.to_le_bytes());
        record[8..12].copy_from_slice(&p.z.to_le_bytes());
        record[12] = p.r;
        record[13] = p.g;
        record[14] = p.b;
        out.write_all(&record)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tree manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekCloud {
    pub week: u32,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEntry {
    pub tree_id: String,
    pub row: u32,
    pub position_in_row: u32,
    #[serde(default)]
    pub clouds: Vec<WeekCloud>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_n_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_yellow_mass_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_green_mass_g: Option<f64>,
    /// Week the deleafing ground truth refers to; defaults to the last cloud week.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_week: Option<u32>,
}

impl TreeEntry {
    pub fn cloud_for_week(&self, week: u32) -> Option<&WeekCloud> {
        self.clouds.iter().find(|c| c.week == week)
    }

    pub fn ground_truth_masses(&self) -> Option<(f64, f64)> {
        self.ground_truth_yellow_mass_g.zip(self.ground_truth_green_mass_g)
    }

    pub fn ground_truth_week(&self) -> Option<u32> {
        self.ground_truth_week
            .or_else(|| self.clouds.iter().map(|c| c.week).max())
    }
}

/// Per-season table of trees, their weekly cloud files and agronomy data.
///
/// Stored as TOML with one `[[tree]]` table per entry; relative cloud paths
/// are resolved against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<i64>,
    #[serde(rename = "tree", default)]
    pub entries: Vec<TreeEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl TreeManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.tree_id.as_str()) {
                return Err(Error::Validation(format!("duplicate tree_id '{}'", e.tree_id)));
            }
            if let Some(n) = e.leaf_n_percent {
                if !(n > 0.0 && n < 10.0) {
                    return Err(Error::Validation(format!(
                        "tree '{}': leaf_n_percent {n} outside (0, 10)",
                        e.tree_id
                    )));
                }
            }
            match (e.ground_truth_yellow_mass_g, e.ground_truth_green_mass_g) {
                (None, None) => {}
                (Some(y), Some(g)) => {
                    if !(y >= 0.0 && g >= 0.0) || (y == 0.0 && g == 0.0) {
                        return Err(Error::Validation(format!(
                            "tree '{}': ground-truth masses must be nonnegative and not both zero",
                            e.tree_id
                        )));
                    }
                }
                _ => {
                    return Err(Error::Validation(format!(
                        "tree '{}': ground-truth masses must be given together",
                        e.tree_id
                    )))
                }
            }
            let mut weeks = std::collections::HashSet::new();
            for c in &e.clouds {
                if c.week < 1 || !weeks.insert(c.week) {
                    return Err(Error::Validation(format!(
                        "tree '{}': invalid or repeated week {}",
                        e.tree_id, c.week
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, cloud: &WeekCloud) -> PathBuf {
        if cloud.path.is_absolute() {
            cloud.path.clone()
        } else {
            self.base_dir.join(&cloud.path)
        }
    }

    pub fn entry(&self, tree_id: &str) -> Option<&TreeEntry> {
        self.entries.iter().find(|e| e.tree_id == tree_id)
    }

    /// All weeks that appear in any entry, ascending.
    pub fn weeks(&self) -> Vec<u32> {
        let set: std::collections::BTreeSet<u32> =
            self.entries.iter().flat_map(|e| e.clouds.iter().map(|c| c.week)).collect();
        set.into_iter().collect()
    }
}

pub fn parse_manifest(text: &str, base_dir: impl Into<PathBuf>) -> Result<TreeManifest> {
    let mut manifest: TreeManifest = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    manifest.base_dir = base_dir.into();
    manifest.validate()?;
    Ok(manifest)
}

pub(crate) fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        line,
        message: e.message().to_string(),
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<TreeManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, base)
}

pub fn write_manifest(manifest: &TreeManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    manifest.validate()?;
    let text = toml::to_string(manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Label dataset
// ---------------------------------------------------------------------------

/// Column order of the label dataset CSV.
pub const LABEL_DATASET_HEADER: [&str; 18] = [
    "label", "a_star", "b_star", "r", "g", "b", "eig1", "eig2", "eig3", "ev1x", "ev1y", "ev1z", "ev2x",
    "ev2y", "ev2z", "ev3x", "ev3y", "ev3z",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelDataset {
    pub rows: Vec<LabeledPointRecord>,
}

impl LabelDataset {
    pub fn header(&self) -> &'static [&'static str] {
        &LABEL_DATASET_HEADER
    }

    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }
}

fn record_fields(r: &LabeledPointRecord) -> Vec<String> {
    let mut f = Vec::with_capacity(18);
    f.push(r.label.to_string());
    f.push(r.a_star.to_string());
    f.push(r.b_star.to_string());
    f.push(r.r.to_string());
    f.push(r.g.to_string());
    f.push(r.b.to_string());
    f.extend(r.eigenvalues.iter().map(|v| v.to_string()));
    f.extend(r.eigenvectors.iter().flatten().map(|v| v.to_string()));
    f
}

pub fn write_label_dataset_to(ds: &LabelDataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(LABEL_DATASET_HEADER).map_err(csv_err)?;
    for r in &ds.rows {
        w.write_record(record_fields(r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_label_dataset(ds: &LabelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_label_dataset_to(ds, BufWriter::new(file)).map_err(|e| match e {
        Error::Format(m) => Error::io(path, std::io::Error::other(m)),
        other => other,
    })
}

pub fn read_label_dataset_from(input: impl Read) -> Result<LabelDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| csv_parse_error(&e))?,
        None => return Err(Error::Parse { line: 1, message: "missing header".into() }),
    };
    if header.iter().ne(LABEL_DATASET_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be exactly '{}'", LABEL_DATASET_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_parse_error(&e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push(parse_label_record(&rec, line)?);
    }
    Ok(LabelDataset { rows })
}

fn csv_parse_error(e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn parse_label_record(rec: &csv::StringRecord, line: usize) -> Result<LabeledPointRecord> {
    if rec.len() != LABEL_DATASET_HEADER.len() {
        return Err(Error::Validation(format!(
            "line {line}: expected {} fields, got {}",
            LABEL_DATASET_HEADER.len(),
            rec.len()
        )));
    }
    let label: Label = rec[0]
        .parse()
        .map_err(|_| Error::Validation(format!("line {line}: label '{}' is not Green, Yellow or Trunk", &rec[0])))?;
    let num = |i: usize| -> Result<f64> {
        rec[i].parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("column '{}': '{}' is not a number", LABEL_DATASET_HEADER[i], &rec[i]),
        })
    };
    let channel = |i: usize| -> Result<u8> {
        rec[i].parse::<u8>().map_err(|_| {
            Error::Validation(format!("line {line}: column '{}' must be 0..=255", LABEL_DATASET_HEADER[i]))
        })
    };
    let mut eigenvectors = [[0.0; 3]; 3];
    for (k, v) in eigenvectors.iter_mut().flatten().enumerate() {
        *v = num(9 + k)?;
    }
    let record = LabeledPointRecord {
        label,
        a_star: num(1)?,
        b_star: num(2)?,
        r: channel(3)?,
        g: channel(4)?,
        b: channel(5)?,
        eigenvalues: [num(6)?, num(7)?, num(8)?],
        eigenvectors,
    };
    record
        .validate()
        .map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
    Ok(record)
}

pub fn read_label_dataset(path: impl AsRef<Path>) -> Result<LabelDataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_label_dataset_from(std::io::BufReader::new(file))
}

// ---------------------------------------------------------------------------
// Observation table
// ---------------------------------------------------------------------------

pub const OBSERVATION_HEADER: [&str; 7] = ["tree_id", "week", "y", "g", "index", "ground_truth", "leaf_N"];

fn opt_to_string(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_observations_to(obs: &[TreeObservation], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(OBSERVATION_HEADER).map_err(csv_err)?;
    for o in obs {
        w.write_record([
            o.tree_id.clone(),
            o.week.to_string(),
            o.index.yellow.to_string(),
            o.index.green.to_string(),
            o.index.value.to_string(),
            opt_to_string(o.ground_truth),
            opt_to_string(o.leaf_n_percent),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_observations(obs: &[TreeObservation], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_observations_to(obs, BufWriter::new(file))
}

pub fn read_observations_from(input: impl Read) -> Result<Vec<TreeObservation>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers().map_err(|e| csv_parse_error(&e))?.clone();
    if header.iter().ne(OBSERVATION_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be exactly '{}'", OBSERVATION_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_parse_error(&e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |col: &str| Error::Parse {
            line,
            message: format!("invalid value in column '{col}'"),
        };
        let opt = |i: usize, col: &str| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                rec[i].parse().map(Some).map_err(|_| bad(col))
            }
        };
        let week: u32 = rec[1].parse().map_err(|_| bad("week"))?;
        let y: u64 = rec[2].parse().map_err(|_| bad("y"))?;
        let g: u64 = rec[3].parse().map_err(|_| bad("g"))?;
        let stated: f64 = rec[4].parse().map_err(|_| bad("index"))?;
        let index = YellownessIndex::from_counts(y, g)
            .map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
        if (index.value - stated).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "line {line}: index {stated} disagrees with counts y={y}, g={g}"
            )));
        }
        let obs = TreeObservation {
            tree_id: rec[0].to_string(),
            week,
            index,
            ground_truth: opt(5, "ground_truth")?,
            leaf_n_percent: opt(6, "leaf_N")?,
        };
        obs.validate()
            .map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
        out.push(obs);
    }
    Ok(out)
}

pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<TreeObservation>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_observations_from(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ascii_ply(body: &str, props: &str, n: usize) -> String {
        format!("ply\nformat ascii 1.0\nelement vertex {n}\n{props}end_header\n{body}")
    }

    const XYZRGB: &str = "property float x\nproperty float y\nproperty float z\n\
                          property uchar red\nproperty uchar green\nproperty uchar blue\n";

    #[test]
    fn ascii_three_points_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        let text = ascii_ply("0 0 1 10 20 30\n1 0 1 40 50 60\n2 0 1 70 80 90\n", XYZRGB, 3);
        fs::write(&p, text).unwrap();
        let c = read_cloud(&p).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.points[0], ColoredPoint::new(0.0, 0.0, 1.0, 10, 20, 30));
        assert_eq!(c.points[2], ColoredPoint::new(2.0, 0.0, 1.0, 70, 80, 90));
        assert_eq!(c.source_id, "t");
        assert_eq!(c.capture_week, 1);
    }

    #[test]
    fn unknown_properties_and_elements_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        let text = "ply\nformat ascii 1.0\ncomment source_id tree-7\ncomment capture_week 4\n\
                    element camera 1\nproperty float fx\nproperty list uchar int ids\n\
                    element vertex 2\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\n\
                    property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar alpha\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    500.0 3 1 2 3\n\
                    0.5 1 2 3 4 5 6 255\n0.5 7 8 9 10 11 12 255\n3 0 1 1\n";
        fs::write(&p, text).unwrap();
        let c = read_cloud(&p).unwrap();
        assert_eq!(c.source_id, "tree-7");
        assert_eq!(c.capture_week, 4);
        assert_eq!(c.points, vec![
            ColoredPoint::new(1.0, 2.0, 3.0, 4, 5, 6),
            ColoredPoint::new(7.0, 8.0, 9.0, 10, 11, 12)
        ]);
    }

    #[test]
    fn missing_blue_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        let props = "property float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\n";
        fs::write(&p, ascii_ply("0 0 1 1 2\n", props, 1)).unwrap();
        match read_cloud(&p) {
            Err(Error::Format(m)) => assert!(m.contains("blue"), "{m}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        fs::write(&p, "ply\nformat ascii 1.0\nelement vertex x\nend_header\n").unwrap();
        match read_cloud(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&p, "ply\nformat ascii 1.0\nbogus line\nend_header\n").unwrap();
        assert!(matches!(read_cloud(&p), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn empty_cloud_writes_valid_ply() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.ply");
        let cloud = ColoredPointCloud::new("empty", 2, vec![]);
        write_cloud(&cloud, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("format binary_little_endian 1.0"));
        assert!(text.contains("element vertex 0"));
        assert_eq!(read_cloud(&p).unwrap(), cloud);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let cloud = ColoredPointCloud::new("x", 1, vec![]);
        let err = write_cloud(&cloud, "/nonexistent-dir/sub/x.ply").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent-dir/sub/x.ply"));
    }

    #[test]
    fn truncated_binary_body() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        let cloud = ColoredPointCloud::new("t", 1, vec![ColoredPoint::new(1.0, 2.0, 3.0, 4, 5, 6); 4]);
        write_cloud(&cloud, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_cloud(&p), Err(Error::Format(_))));
    }

    #[test]
    fn big_endian_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        fs::write(&p, format!("ply\nformat binary_big_endian 1.0\nelement vertex 0\n{XYZRGB}end_header\n")).unwrap();
        assert!(matches!(read_cloud(&p), Err(Error::Format(_))));
    }

    #[test]
    fn double_coordinates_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty double x\nproperty double y\n\
property double z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
            .to_vec();
        for v in [0.25f64, -1.5, 2.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[1, 2, 3]);
        fs::write(&p, bytes).unwrap();
        let c = read_cloud(&p).unwrap();
        assert_eq!(c.points[0], ColoredPoint::new(0.25, -1.5, 2.0, 1, 2, 3));
    }

    #[test]
    fn manifest_optional_fields() {
        let text = r#"
season = 2023

[[tree]]
tree_id = "r1-t1"
row = 1
position_in_row = 1
leaf_n_percent = 2.2
clouds = [{ week = 1, path = "a.ply" }, { week = 2, path = "/abs/b.ply" }]

[[tree]]
tree_id = "r1-t2"
row = 1
position_in_row = 2
"#;
        let m = parse_manifest(text, "/data").unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].leaf_n_percent, Some(2.2));
        assert_eq!(m.entries[1].leaf_n_percent, None);
        assert_eq!(m.resolve(&m.entries[0].clouds[0]), PathBuf::from("/data/a.ply"));
        assert_eq!(m.resolve(&m.entries[0].clouds[1]), PathBuf::from("/abs/b.ply"));
        assert_eq!(m.weeks(), vec![1, 2]);
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_values() {
        let dup = "[[tree]]\ntree_id = \"a\"\nrow = 1\nposition_in_row = 1\n\
                   [[tree]]\ntree_id = \"a\"\nrow = 1\nposition_in_row = 2\n";
        assert!(matches!(parse_manifest(dup, "."), Err(Error::Validation(_))));
        let bad_n = "[[tree]]\ntree_id = \"a\"\nrow = 1\nposition_in_row = 1\nleaf_n_percent = 12.0\n";
        assert!(matches!(parse_manifest(bad_n, "."), Err(Error::Validation(_))));
        let zero_mass = "[[tree]]\ntree_id = \"a\"\nrow = 1\nposition_in_row = 1\n\
                         ground_truth_yellow_mass_g = 0.0\nground_truth_green_mass_g = 0.0\n";
        assert!(matches!(parse_manifest(zero_mass, "."), Err(Error::Validation(_))));
        let syntax = "[[tree]]\ntree_id = \n";
        assert!(matches!(parse_manifest(syntax, "."), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn label_dataset_rejects_unknown_label_and_header() {
        let mut text = LABEL_DATASET_HEADER.join(",");
        text.push_str("\nBrown,1,2,3,4,5,3,2,1,1,0,0,0,1,0,0,0,1\n");
        assert!(matches!(read_label_dataset_from(text.as_bytes()), Err(Error::Validation(_))));
        let bad_header = "label,a,b\nGreen,1,2\n";
        assert!(matches!(read_label_dataset_from(bad_header.as_bytes()), Err(Error::Parse { .. })));
        let mut short = LABEL_DATASET_HEADER.join(",");
        short.push_str("\nGreen,1,2\n");
        assert!(read_label_dataset_from(short.as_bytes()).is_err());
    }

    #[test]
    fn observations_round_trip() {
        let obs = vec![
            TreeObservation {
                tree_id: "t1".into(),
                week: 2,
                index: YellownessIndex::from_counts(300, 100).unwrap(),
                ground_truth: Some(0.4),
                leaf_n_percent: None,
            },
            TreeObservation {
                tree_id: "t2".into(),
                week: 2,
                index: YellownessIndex::from_counts(0, 7).unwrap(),
                ground_truth: None,
                leaf_n_percent: Some(1.85),
            },
        ];
        let mut buf = Vec::new();
        write_observations_to(&obs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tree_id,week,y,g,index,ground_truth,leaf_N\n"));
        assert!(text.contains("t1,2,300,100,0.5,0.4,\n"));
        assert_eq!(read_observations_from(buf.as_slice()).unwrap(), obs);
    }
}
