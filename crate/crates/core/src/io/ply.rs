//! PLY point clouds: ASCII and binary (either endianness) input, binary
//! little-endian output.
//!
//! Only the `vertex` element is kept; other elements are parsed and skipped.
//! Every failure is reported with the header/ASCII line or binary byte
//! offset where it happened.

use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use crate::classes::class_color;
use crate::error::{Error, Location, Result};
use crate::projection::SemanticCloud;

/// Headers longer than this are rejected rather than scanned.
const MAX_HEADER_BYTES: usize = 1 << 20;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    /// Optional per-point colour, same length as `points`.
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        PointCloud { points, colors: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn range(self) -> (f64, f64) {
        match self {
            Scalar::I8 => (i8::MIN as f64, i8::MAX as f64),
            Scalar::U8 => (0.0, u8::MAX as f64),
            Scalar::I16 => (i16::MIN as f64, i16::MAX as f64),
            Scalar::U16 => (0.0, u16::MAX as f64),
            Scalar::I32 => (i32::MIN as f64, i32::MAX as f64),
            Scalar::U32 => (0.0, u32::MAX as f64),
            Scalar::F32 | Scalar::F64 => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Clone, Debug)]
enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Clone, Debug)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: u64,
    properties: Vec<Property>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    body_offset: usize,
    body_line: usize,
}

fn parse_header(bytes: &[u8], src: &str) -> Result<Header> {
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line_no += 1;
        let at = Location::Line(line_no);
        if offset >= bytes.len() {
            return Err(Error::malformed(src, at, "unexpected end of file in header"));
        }
        if offset > MAX_HEADER_BYTES {
            return Err(Error::malformed(src, at, "header is too long"));
        }
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p)
            .ok_or_else(|| Error::malformed(src, at, "unterminated header line"))?;
        let raw = &bytes[offset..end];
        offset = end + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::malformed(src, at, "header is not valid text"))?
            .trim_end_matches('\r');
        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(Error::malformed(src, at, "missing 'ply' magic"));
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if tokens.len() != 3 || tokens[2] != "1.0" {
                    return Err(Error::malformed(src, at, "expected 'format <kind> 1.0'"));
                }
                format = Some(match tokens[1] {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLittleEndian,
                    "binary_big_endian" => Format::BinaryBigEndian,
                    other => {
                        return Err(Error::malformed(src, at, format!("unknown format {other:?}")))
                    }
                });
            }
            Some("element") => {
                if tokens.len() != 3 {
                    return Err(Error::malformed(src, at, "expected 'element <name> <count>'"));
                }
                let count = tokens[2]
                    .parse::<u64>()
                    .map_err(|_| Error::malformed(src, at, "element count is not an integer"))?;
                elements.push(Element {
                    name: tokens[1].to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::malformed(src, at, "property before any element"))?;
                let bad_type = |t: &str| Error::malformed(src, at, format!("unknown type {t:?}"));
                let property = match tokens.as_slice() {
                    ["property", "list", count, item, name] => {
                        let count = Scalar::parse(count).ok_or_else(|| bad_type(count))?;
                        if !count.is_integer() {
                            return Err(Error::malformed(src, at, "list count type must be an integer"));
                        }
                        Property {
                            name: name.to_string(),
                            kind: PropertyKind::List {
                                count,
                                item: Scalar::parse(item).ok_or_else(|| bad_type(item))?,
                            },
                        }
                    }
                    ["property", ty, name] => Property {
                        name: name.to_string(),
                        kind: PropertyKind::Scalar(Scalar::parse(ty).ok_or_else(|| bad_type(ty))?),
                    },
                    _ => return Err(Error::malformed(src, at, "malformed property line")),
                };
                if element.properties.iter().any(|p| p.name == property.name) {
                    return Err(Error::malformed(src, at, format!("duplicate property {:?}", property.name)));
                }
                element.properties.push(property);
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::malformed(src, at, format!("unexpected header keyword {other:?}")))
            }
        }
    }
    let format = format.ok_or_else(|| Error::malformed(src, Location::Line(2), "missing format line"))?;
    Ok(Header {
        format,
        elements,
        body_offset: offset,
        body_line: line_no + 1,
    })
}

/// Scalar vertex properties as `f64` columns.
struct VertexTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    count: usize,
}

impl VertexTable {
    fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }
}

trait RowSource {
    /// Reads one element row; scalar properties are appended to `out`.
    fn read_row(&mut self, element: &Element, out: &mut Vec<f64>) -> Result<()>;
    fn remaining(&self) -> usize;
    fn finish(&mut self) -> Result<()>;
}

struct BinaryRows<'a> {
    bytes: &'a [u8],
    pos: usize,
    big_endian: bool,
    src: &'a str,
}

impl BinaryRows<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let size = ty.size();
        let Some(raw) = self.bytes.get(self.pos..self.pos + size) else {
            return Err(Error::malformed(
                self.src,
                Location::Byte(self.pos as u64),
                "unexpected end of binary data",
            ));
        };
        let mut buf = [0u8; 8];
        buf[..size].copy_from_slice(raw);
        if self.big_endian {
            buf[..size].reverse();
        }
        self.pos += size;
        Ok(match ty {
            Scalar::I8 => buf[0] as i8 as f64,
            Scalar::U8 => buf[0] as f64,
            Scalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(buf),
        })
    }
}

impl RowSource for BinaryRows<'_> {
    fn read_row(&mut self, element: &Element, out: &mut Vec<f64>) -> Result<()> {
        for p in &element.properties {
            match p.kind {
                PropertyKind::Scalar(ty) => out.push(self.scalar(ty)?),
                PropertyKind::List { count, item } => {
                    let at = self.pos;
                    let n = self.scalar(count)?;
                    if n < 0.0 {
                        return Err(Error::malformed(self.src, Location::Byte(at as u64), "negative list length"));
                    }
                    let skip = n as usize * item.size();
                    if skip > self.bytes.len() - self.pos {
                        return Err(Error::malformed(
                            self.src,
                            Location::Byte(at as u64),
                            "list runs past end of data",
                        ));
                    }
                    self.pos += skip;
                }
            }
        }
        Ok(())
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

struct AsciiRows<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    first_line: usize,
    remaining: usize,
    src: &'a str,
}

impl AsciiRows<'_> {
    fn next_line(&mut self) -> Result<(usize, &str)> {
        loop {
            match self.lines.next() {
                Some((i, line)) => {
                    self.remaining = self.remaining.saturating_sub(line.len() + 1);
                    if !line.trim().is_empty() {
                        return Ok((self.first_line + i, line));
                    }
                }
                None => {
                    return Err(Error::malformed(
                        self.src,
                        Location::Line(self.first_line),
                        "unexpected end of ASCII data",
                    ))
                }
            }
        }
    }
}

fn ascii_value(token: Option<&str>, ty: Scalar, src: &str, at: Location) -> Result<f64> {
    let token = token.ok_or_else(|| Error::malformed(src, at, "too few values on line"))?;
    let v: f64 = token
        .parse()
        .map_err(|_| Error::malformed(src, at, format!("{token:?} is not a number")))?;
    let (lo, hi) = ty.range();
    if ty.is_integer() && !(v.fract() == 0.0 && v >= lo && v <= hi) {
        return Err(Error::malformed(src, at, format!("{token} is out of range for its type")));
    }
    if ty == Scalar::F32 {
        return Ok(v as f32 as f64);
    }
    Ok(v)
}

impl RowSource for AsciiRows<'_> {
    fn read_row(&mut self, element: &Element, out: &mut Vec<f64>) -> Result<()> {
        let src = self.src;
        let (line_no, line) = self.next_line()?;
        let at = Location::Line(line_no);
        let mut tokens = line.split_whitespace();
        for p in &element.properties {
            match p.kind {
                PropertyKind::Scalar(ty) => out.push(ascii_value(tokens.next(), ty, src, at)?),
                PropertyKind::List { count, item } => {
                    let n = ascii_value(tokens.next(), count, src, at)?;
                    if n < 0.0 {
                        return Err(Error::malformed(src, at, "negative list length"));
                    }
                    for _ in 0..n as u64 {
                        ascii_value(tokens.next(), item, src, at)?;
                    }
                }
            }
        }
        if tokens.next().is_some() {
            return Err(Error::malformed(src, at, "too many values on line"));
        }
        Ok(())
    }

    fn remaining(&self) -> usize {
        self.remaining
    }

    fn finish(&mut self) -> Result<()> {
        for (i, line) in self.lines.by_ref() {
            if !line.trim().is_empty() {
                return Err(Error::malformed(
                    self.src,
                    Location::Line(self.first_line + i),
                    "trailing data after last element",
                ));
            }
        }
        Ok(())
    }
}

fn read_vertex_table(bytes: &[u8], src: &str) -> Result<VertexTable> {
    let header = parse_header(bytes, src)?;
    let body = &bytes[header.body_offset..];
    let mut source: Box<dyn RowSource + '_> = match header.format {
        Format::Ascii => {
            let text = std::str::from_utf8(body).map_err(|e| {
                Error::malformed(
                    src,
                    Location::Byte((header.body_offset + e.valid_up_to()) as u64),
                    "ASCII body is not valid text",
                )
            })?;
            Box::new(AsciiRows {
                lines: text.lines().enumerate(),
                first_line: header.body_line,
                remaining: text.len(),
                src,
            })
        }
        Format::BinaryLittleEndian | Format::BinaryBigEndian => Box::new(BinaryRows {
            bytes,
            pos: header.body_offset,
            big_endian: header.format == Format::BinaryBigEndian,
            src,
        }),
    };

    let mut table = None;
    let mut row = Vec::new();
    for element in &header.elements {
        // A row occupies at least one byte per property in either encoding
        // (ASCII needs a digit; binary at least a 1-byte scalar), so counts
        // beyond the remaining payload are rejected before allocating.
        let min_row = element.properties.len().max(1) as u64;
        if element.count.saturating_mul(min_row) > source.remaining() as u64 {
            return Err(Error::malformed(
                src,
                Location::Byte(header.body_offset as u64),
                format!(
                    "element {:?} declares {} rows but the file is too short",
                    element.name, element.count
                ),
            ));
        }
        let is_vertex = element.name == "vertex" && table.is_none();
        let scalar_names: Vec<String> = element
            .properties
            .iter()
            .filter(|p| matches!(p.kind, PropertyKind::Scalar(_)))
            .map(|p| p.name.clone())
            .collect();
        let count = element.count as usize;
        let mut columns = if is_vertex {
            vec![Vec::with_capacity(count); scalar_names.len()]
        } else {
            Vec::new()
        };
        for _ in 0..count {
            row.clear();
            source.read_row(element, &mut row)?;
            if is_vertex {
                for (col, &v) in columns.iter_mut().zip(&row) {
                    col.push(v);
                }
            }
        }
        if is_vertex {
            table = Some(VertexTable {
                names: scalar_names,
                columns,
                count,
            });
        }
    }
    source.finish()?;
    table.ok_or_else(|| Error::malformed(src, Location::Line(1), "no vertex element"))
}

fn positions(table: &VertexTable, src: &str) -> Result<Vec<Point3<f64>>> {
    let col = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| Error::malformed(src, Location::Line(1), format!("vertex has no {name:?} property")))
    };
    let (xs, ys, zs) = (col("x")?, col("y")?, col("z")?);
    let mut out = Vec::with_capacity(table.count);
    for i in 0..table.count {
        let p = Point3::new(xs[i], ys[i], zs[i]);
        if !p.iter().all(|c| c.is_finite()) {
            return Err(Error::malformed(
                src,
                Location::Line(1),
                format!("vertex {i} has a non-finite coordinate"),
            ));
        }
        out.push(p);
    }
    Ok(out)
}

fn colors(table: &VertexTable) -> Option<Vec<[u8; 3]>> {
    let pick = |a: &str, b: &str| table.column(a).or_else(|| table.column(b));
    let (r, g, b) = (pick("red", "r")?, pick("green", "g")?, pick("blue", "b")?);
    let clamp = |v: f64| v.clamp(0.0, 255.0) as u8;
    Some(
        (0..table.count)
            .map(|i| [clamp(r[i]), clamp(g[i]), clamp(b[i])])
            .collect(),
    )
}

/// Decodes a PLY point cloud (x, y, z and optional r, g, b).
pub fn decode_point_cloud(bytes: &[u8], source_name: &str) -> Result<PointCloud> {
    let table = read_vertex_table(bytes, source_name)?;
    Ok(PointCloud {
        points: positions(&table, source_name)?,
        colors: colors(&table),
    })
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    decode_point_cloud(&bytes, &path.display().to_string())
}

fn header_line(out: &mut Vec<u8>, line: &str) {
    out.extend_from_slice(line.as_bytes());
    out.push(b'\n');
}

fn push_f32(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&(v as f32).to_le_bytes());
}

/// Encodes a cloud as binary little-endian PLY with float coordinates.
pub fn encode_point_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + cloud.len() * 15);
    header_line(&mut out, "ply");
    header_line(&mut out, "format binary_little_endian 1.0");
    header_line(&mut out, &format!("element vertex {}", cloud.len()));
    for axis in ["x", "y", "z"] {
        header_line(&mut out, &format!("property float {axis}"));
    }
    if cloud.colors.is_some() {
        for c in ["red", "green", "blue"] {
            header_line(&mut out, &format!("property uchar {c}"));
        }
    }
    header_line(&mut out, "end_header");
    for (i, p) in cloud.points.iter().enumerate() {
        push_f32(&mut out, p.x);
        push_f32(&mut out, p.y);
        push_f32(&mut out, p.z);
        if let Some(colors) = &cloud.colors {
            out.extend_from_slice(&colors[i]);
        }
    }
    out
}

pub fn write_point_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    write_bytes(path, &encode_point_cloud(cloud))
}

/// Encodes a fused cloud: float x,y,z, class colour, class index, support
/// and one `vote_<k>` count per class.
pub fn encode_labeled_cloud(cloud: &SemanticCloud) -> Vec<u8> {
    let k = cloud.class_count();
    let mut out = Vec::with_capacity(256 + cloud.len() * (20 + 4 * k));
    header_line(&mut out, "ply");
    header_line(&mut out, "format binary_little_endian 1.0");
    header_line(&mut out, "comment semantic point cloud with per-class visibility votes");
    header_line(&mut out, &format!("element vertex {}", cloud.len()));
    for axis in ["x", "y", "z"] {
        header_line(&mut out, &format!("property float {axis}"));
    }
    for c in ["red", "green", "blue"] {
        header_line(&mut out, &format!("property uchar {c}"));
    }
    header_line(&mut out, "property uchar class");
    header_line(&mut out, "property uint support");
    for c in 0..k {
        header_line(&mut out, &format!("property uint vote_{c}"));
    }
    header_line(&mut out, "end_header");
    for i in 0..cloud.len() {
        let p = cloud.position(i);
        push_f32(&mut out, p.x);
        push_f32(&mut out, p.y);
        push_f32(&mut out, p.z);
        let class = cloud.fused_class(i);
        out.extend_from_slice(&class_color(class));
        out.push(class.0);
        out.extend_from_slice(&cloud.support(i).to_le_bytes());
        for &v in cloud.votes(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_labeled_cloud(cloud: &SemanticCloud, path: &Path) -> Result<()> {
    write_bytes(path, &encode_labeled_cloud(cloud))
}

/// Decodes a fused cloud written by [`encode_labeled_cloud`]. The stored
/// class and support must agree with the vote columns.
pub fn decode_labeled_cloud(bytes: &[u8], source_name: &str) -> Result<SemanticCloud> {
    let src = source_name;
    let table = read_vertex_table(bytes, src)?;
    let points = positions(&table, src)?;
    let mut vote_columns = Vec::new();
    while let Some(col) = table.column(&format!("vote_{}", vote_columns.len())) {
        vote_columns.push(col);
    }
    let k = vote_columns.len();
    let at = Location::Line(1);
    if !(2..=256).contains(&k) {
        return Err(Error::malformed(src, at, "labelled cloud needs vote_0..vote_<k> columns for 2..256 classes"));
    }
    let class = table
        .column("class")
        .ok_or_else(|| Error::malformed(src, at, "vertex has no \"class\" property"))?;
    let support = table.column("support");
    let mut votes = Vec::with_capacity(points.len() * k);
    for i in 0..points.len() {
        let mut total = 0f64;
        for col in &vote_columns {
            let v = col[i];
            if !(v >= 0.0 && v <= u32::MAX as f64 && v.fract() == 0.0) {
                return Err(Error::malformed(src, at, format!("vertex {i}: invalid vote count {v}")));
            }
            total += v;
            votes.push(v as u32);
        }
        if total > u32::MAX as f64 {
            return Err(Error::malformed(src, at, format!("vertex {i}: vote total overflows")));
        }
        if let Some(s) = support {
            if s[i] != total {
                return Err(Error::malformed(src, at, format!("vertex {i}: support does not equal vote total")));
            }
        }
    }
    let cloud = SemanticCloud::from_votes(points, k, votes);
    for (i, &c) in class.iter().enumerate() {
        if c != cloud.fused_class(i).0 as f64 {
            return Err(Error::malformed(
                src,
                at,
                format!("vertex {i}: stored class {c} disagrees with its votes"),
            ));
        }
    }
    Ok(cloud)
}

pub fn read_labeled_cloud(path: &Path) -> Result<SemanticCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    decode_labeled_cloud(&bytes, &path.display().to_string())
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::write(path, e))?;
    f.write_all(bytes).map_err(|e| Error::write(path, e))
}
