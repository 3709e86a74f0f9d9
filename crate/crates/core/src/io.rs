//! File formats: PFM float maps, PGM masks, channel-stack directories and
//! PLY Gaussian scenes / point clouds.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyAccess, PropertyDef, PropertyType, ScalarType,
};
use ply_rs::writer::Writer;
use serde::{Deserialize, Serialize};

use crate::scene::{radius_schedule, ColoredPoint, GaussianScene};
use crate::{Error, FeatureTensor, Result};

/// Single-channel float map, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

/// Writes a greyscale little-endian PFM. PFM stores rows bottom to top.
pub fn write_pfm<W: Write>(out: &mut W, width: usize, height: usize, data: &[f64]) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::ShapeMismatch(format!("{} values for a {width}x{height} map", data.len())));
    }
    write!(out, "Pf\n{width} {height}\n-1.0\n")?;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for row in data.chunks(width.max(1)).rev() {
        for v in row {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn save_pfm(path: impl AsRef<Path>, width: usize, height: usize, data: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pfm(&mut w, width, height, data)?;
    w.flush()?;
    Ok(())
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        if byte[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(byte[0]);
    }
    if tok.is_empty() {
        return Err(Error::Format("truncated PFM header".into()));
    }
    String::from_utf8(tok).map_err(|_| Error::Format("non-ASCII PFM header".into()))
}

/// Reads a greyscale PFM (`Pf`) in either byte order.
pub fn read_pfm<R: Read>(input: R) -> Result<FloatMap> {
    let mut r = BufReader::new(input);
    let magic = header_token(&mut r)?;
    if magic != "Pf" {
        return Err(Error::Format(format!("expected greyscale PFM 'Pf', found '{magic}'")));
    }
    let parse = |s: String| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PFM dimension '{s}'")));
    let width = parse(header_token(&mut r)?)?;
    let height = parse(header_token(&mut r)?)?;
    let scale: f64 = header_token(&mut r)?.parse().map_err(|_| Error::Format("bad PFM scale".into()))?;
    if scale == 0.0 {
        return Err(Error::Format("PFM scale must be non-zero".into()));
    }
    let little = scale < 0.0;
    let mut raw = vec![0u8; width * height * 4];
    r.read_exact(&mut raw).map_err(|_| Error::Format(format!("PFM payload shorter than {width}x{height}")))?;
    let vals: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let mut data = Vec::with_capacity(vals.len());
    for row in vals.chunks(width.max(1)).rev() {
        data.extend_from_slice(row);
    }
    Ok(FloatMap { width, height, data })
}

pub fn load_pfm(path: impl AsRef<Path>) -> Result<FloatMap> {
    read_pfm(File::open(path)?)
}

/// Binary PGM with 255 for set pixels.
pub fn save_mask_pgm(path: impl AsRef<Path>, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::ShapeMismatch(format!("{} mask values for {width}x{height}", mask.len())));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackChannel {
    pub name: String,
    pub file: String,
}

/// `manifest.json` of a channel-stack directory. Extra keys are kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<StackChannel>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Writes one PFM per channel plus `manifest.json`.
pub fn save_stack(
    dir: impl AsRef<Path>,
    tensor: &FeatureTensor,
    names: &[String],
    extra: BTreeMap<String, serde_json::Value>,
) -> Result<StackManifest> {
    let dir = dir.as_ref();
    if names.len() != tensor.channels() {
        return Err(Error::ShapeMismatch(format!("{} channel names for {} channels", names.len(), tensor.channels())));
    }
    fs::create_dir_all(dir)?;
    let mut channels = Vec::with_capacity(names.len());
    for (c, name) in names.iter().enumerate() {
        let file = format!("{c:03}_{name}.pfm");
        save_pfm(dir.join(&file), tensor.width(), tensor.height(), tensor.plane(c))?;
        channels.push(StackChannel { name: name.clone(), file });
    }
    let manifest = StackManifest { width: tensor.width(), height: tensor.height(), channels, extra };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Loads a stack directory. Values pass through f32, as stored.
pub fn load_stack(dir: impl AsRef<Path>) -> Result<(FeatureTensor, StackManifest)> {
    let dir = dir.as_ref();
    let manifest: StackManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut data = Vec::with_capacity(manifest.channels.len() * manifest.width * manifest.height);
    for ch in &manifest.channels {
        let map = load_pfm(dir.join(&ch.file))?;
        if (map.width, map.height) != (manifest.width, manifest.height) {
            return Err(Error::ShapeMismatch(format!(
                "{} is {}x{}, manifest says {}x{}",
                ch.file, map.width, map.height, manifest.width, manifest.height
            )));
        }
        data.extend(map.data.iter().map(|&v| f64::from(v)));
    }
    let t = FeatureTensor::from_vec(manifest.channels.len(), manifest.height, manifest.width, data)?;
    Ok((t, manifest))
}

/// Vertex record for ply-rs. Colours are normalised while parsing.
#[derive(Debug, Clone, Default)]
struct Vertex {
    pos: [Option<f64>; 3],
    color: [Option<f64>; 3],
    radius: Option<f64>,
    foreground: Option<bool>,
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => f64::from(v),
        Property::UChar(v) => f64::from(v),
        Property::Short(v) => f64::from(v),
        Property::UShort(v) => f64::from(v),
        Property::Int(v) => f64::from(v),
        Property::UInt(v) => f64::from(v),
        Property::Float(v) => f64::from(v),
        Property::Double(v) => v,
        _ => return None,
    })
}

impl PropertyAccess for Vertex {
    fn new() -> Self {
        Self::default()
    }

    fn set_property(&mut self, name: String, property: Property) {
        let Some(v) = scalar(&property) else { return };
        let channel = match name.as_str() {
            "x" => return self.pos[0] = Some(v),
            "y" => return self.pos[1] = Some(v),
            "z" => return self.pos[2] = Some(v),
            "radius" => return self.radius = Some(v),
            "foreground" => return self.foreground = Some(v != 0.0),
            "red" | "r" => 0,
            "green" | "g" => 1,
            "blue" | "b" => 2,
            _ => return,
        };
        self.color[channel] = Some(match property {
            Property::Float(_) | Property::Double(_) => v,
            Property::UShort(_) => v / 65535.0,
            _ => v / 255.0,
        });
    }

    fn get_double(&self, name: &String) -> Option<f64> {
        match name.as_str() {
            "x" => self.pos[0],
            "y" => self.pos[1],
            "z" => self.pos[2],
            "red" => self.color[0],
            "green" => self.color[1],
            "blue" => self.color[2],
            "radius" => self.radius,
            _ => None,
        }
    }

    fn get_uchar(&self, name: &String) -> Option<u8> {
        match name.as_str() {
            "foreground" => self.foreground.map(u8::from),
            _ => None,
        }
    }
}

/// Writes a scene as binary little-endian PLY. Every field is stored at full
/// precision so a save/load round trip is bit-exact.
///
/// Schema: `element vertex N` with `double x, y, z` (ego metres), `double red,
/// green, blue` in `[0, 1]`, `double radius` (metres) and `uchar foreground`.
pub fn write_scene_ply<W: Write>(out: &mut W, scene: &GaussianScene) -> Result<()> {
    scene.validate()?;
    let mut ply = Ply::<Vertex>::new();
    ply.header.encoding = Encoding::BinaryLittleEndian;
    let mut element = ElementDef::new("vertex".to_string());
    for name in ["x", "y", "z", "red", "green", "blue", "radius"] {
        element.properties.add(PropertyDef::new(name.to_string(), PropertyType::Scalar(ScalarType::Double)));
    }
    element.properties.add(PropertyDef::new("foreground".to_string(), PropertyType::Scalar(ScalarType::UChar)));
    ply.header.elements.add(element);
    let vertices = (0..scene.len())
        .map(|i| {
            let c = scene.centers[i];
            Vertex {
                pos: [Some(c.x), Some(c.y), Some(c.z)],
                color: scene.colors[i].map(Some),
                radius: Some(scene.radii[i]),
                foreground: Some(scene.foreground[i]),
            }
        })
        .collect();
    ply.payload.insert("vertex".to_string(), vertices);
    Writer::new().write_ply(out, &mut ply)?;
    Ok(())
}

pub fn save_scene_ply(path: impl AsRef<Path>, scene: &GaussianScene) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scene_ply(&mut w, scene)?;
    w.flush()?;
    Ok(())
}

fn read_vertices<R: Read>(input: &mut R) -> Result<Vec<Vertex>> {
    let mut ply = Parser::<Vertex>::new().read_ply(input).map_err(|e| Error::Format(format!("PLY: {e}")))?;
    ply.payload.remove("vertex").ok_or_else(|| Error::Format("PLY has no vertex element".into()))
}

fn vertex_point(i: usize, v: &Vertex) -> Result<ColoredPoint> {
    let [Some(x), Some(y), Some(z)] = v.pos else {
        return Err(Error::Format(format!("vertex {i} lacks x/y/z")));
    };
    let [Some(r), Some(g), Some(b)] = v.color else {
        return Err(Error::Format(format!("vertex {i} lacks red/green/blue")));
    };
    Ok(ColoredPoint { position: Vector3::new(x, y, z), color: [r, g, b] })
}

/// Reads a coloured point cloud (`x, y, z, red, green, blue`; ASCII or binary).
/// 8-bit colours map to `[0, 1]` by /255, 16-bit by /65535, floats are taken as is.
pub fn read_points_ply<R: Read>(mut input: R) -> Result<Vec<ColoredPoint>> {
    let verts = read_vertices(&mut input)?;
    verts.iter().enumerate().map(|(i, v)| vertex_point(i, v)).collect()
}

pub fn load_points_ply(path: impl AsRef<Path>) -> Result<Vec<ColoredPoint>> {
    read_points_ply(BufReader::new(File::open(path)?))
}

/// Reads a scene PLY. Missing `radius` falls back to the radius schedule and a
/// missing `foreground` flag means background.
pub fn read_scene_ply<R: Read>(mut input: R) -> Result<GaussianScene> {
    let verts = read_vertices(&mut input)?;
    let mut scene = GaussianScene::new();
    for (i, v) in verts.iter().enumerate() {
        let p = vertex_point(i, v)?;
        let fg = v.foreground.unwrap_or(false);
        let r = v.radius.unwrap_or_else(|| radius_schedule(p.position.z, fg));
        scene.push(p.position, r, p.color, fg);
    }
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene_ply(path: impl AsRef<Path>) -> Result<GaussianScene> {
    read_scene_ply(BufReader::new(File::open(path)?))
}

/// Header summary of a PLY file, useful for diagnostics.
pub fn ply_vertex_count(path: impl AsRef<Path>) -> Result<usize> {
    let mut r = BufReader::new(File::open(path)?);
    let header = Parser::<DefaultElement>::new().read_header(&mut r).map_err(|e| Error::Format(format!("PLY: {e}")))?;
    Ok(header.elements.get("vertex").map_or(0, |e| e.count))
}
