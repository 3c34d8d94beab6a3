//! NIfTI-1 reading and writing.
//!
//! Only the fields needed to place a 3D volume in space are interpreted; the
//! rest of the 348-byte header is carried or zero-filled. Files are written
//! little-endian as single-file `.nii` (gzip-compressed when the path ends in
//! `.gz`), with the 4-byte extension indicator set to zero and data at offset
//! 352.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{
    scaling_affine, voxel_count, Affine, SegMask, Shape, Spacing, Volume, IDENTITY_AFFINE,
};

pub const HEADER_SIZE: usize = 348;
pub const SINGLE_FILE_OFFSET: usize = 352;
pub const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
pub const MAGIC_PAIRED: &[u8; 4] = b"ni1\0";

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataType {
    Uint8,
    Int8,
    Int16,
    Uint16,
    Int32,
    Uint32,
    Float32,
    Float64,
}

impl DataType {
    pub fn code(self) -> i16 {
        match self {
            DataType::Uint8 => 2,
            DataType::Int16 => 4,
            DataType::Int32 => 8,
            DataType::Float32 => 16,
            DataType::Float64 => 64,
            DataType::Int8 => 256,
            DataType::Uint16 => 512,
            DataType::Uint32 => 768,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => DataType::Uint8,
            4 => DataType::Int16,
            8 => DataType::Int32,
            16 => DataType::Float32,
            64 => DataType::Float64,
            256 => DataType::Int8,
            512 => DataType::Uint16,
            768 => DataType::Uint32,
            other => {
                return Err(Error::Unsupported(format!("NIfTI datatype code {other}")));
            }
        })
    }

    pub fn bytes(self) -> usize {
        match self {
            DataType::Uint8 | DataType::Int8 => 1,
            DataType::Int16 | DataType::Uint16 => 2,
            DataType::Int32 | DataType::Uint32 | DataType::Float32 => 4,
            DataType::Float64 => 8,
        }
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, DataType::Float32 | DataType::Float64)
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "uint8" | "u8" => DataType::Uint8,
            "int8" | "i8" => DataType::Int8,
            "int16" | "i16" => DataType::Int16,
            "uint16" | "u16" => DataType::Uint16,
            "int32" | "i32" => DataType::Int32,
            "uint32" | "u32" => DataType::Uint32,
            "float32" | "f32" => DataType::Float32,
            "float64" | "f64" => DataType::Float64,
            other => return Err(Error::Unsupported(format!("datatype name {other:?}"))),
        })
    }
}

/// The interpreted subset of a NIfTI-1 header.
#[derive(Clone, Debug, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: DataType,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub descrip: [u8; 80],
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
}

impl NiftiHeader {
    /// Header for a single-file 3D volume.
    pub fn for_volume(shape: Shape, spacing: Spacing, affine: &Affine, datatype: DataType) -> Self {
        let mut srow = [[0f32; 4]; 3];
        for (r, row) in srow.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = affine[r][c] as f32;
            }
        }
        Self {
            dim: [
                3,
                shape[0] as i16,
                shape[1] as i16,
                shape[2] as i16,
                1,
                1,
                1,
                1,
            ],
            datatype,
            pixdim: [
                1.0,
                spacing[0] as f32,
                spacing[1] as f32,
                spacing[2] as f32,
                1.0,
                1.0,
                1.0,
                1.0,
            ],
            vox_offset: SINGLE_FILE_OFFSET as f32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            xyzt_units: 2,
            descrip: [0; 80],
            qform_code: 0,
            sform_code: 1,
            quatern: [0.0; 3],
            qoffset: [0.0; 3],
            srow,
            magic: *MAGIC_SINGLE,
        }
    }

    pub fn shape(&self) -> Shape {
        [self.dim[1], self.dim[2], self.dim[3]].map(|d| d.max(1) as usize)
    }

    pub fn spacing(&self) -> Spacing {
        [self.pixdim[1], self.pixdim[2], self.pixdim[3]].map(|p| {
            let p = p.abs() as f64;
            if p > 0.0 && p.is_finite() {
                p
            } else {
                1.0
            }
        })
    }

    /// Voxel-to-world transform: sform when set, else qform, else the voxel
    /// spacing alone.
    pub fn affine(&self) -> Affine {
        if self.sform_code > 0 {
            let mut a = IDENTITY_AFFINE;
            for r in 0..3 {
                for c in 0..4 {
                    a[r][c] = self.srow[r][c] as f64;
                }
            }
            a
        } else if self.qform_code > 0 {
            self.qform_affine()
        } else {
            scaling_affine(self.spacing())
        }
    }

    fn qform_affine(&self) -> Affine {
        let [b, c, d] = self.quatern.map(|q| q as f64);
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let rot = [
            [
                a * a + b * b - c * c - d * d,
                2.0 * (b * c - a * d),
                2.0 * (b * d + a * c),
            ],
            [
                2.0 * (b * c + a * d),
                a * a + c * c - b * b - d * d,
                2.0 * (c * d - a * b),
            ],
            [
                2.0 * (b * d - a * c),
                2.0 * (c * d + a * b),
                a * a + d * d - c * c - b * b,
            ],
        ];
        let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let sp = self.spacing();
        let scale = [sp[0], sp[1], sp[2] * qfac];
        let mut out = IDENTITY_AFFINE;
        for r in 0..3 {
            for col in 0..3 {
                out[r][col] = rot[r][col] * scale[col];
            }
            out[r][3] = self.qoffset[r] as f64;
        }
        out
    }

    /// Serializes to the 348-byte little-endian layout.
    pub fn to_bytes(&self) -> [u8; HEADER_SIZE] {
        let mut b = [0u8; HEADER_SIZE];
        put(&mut b, 0, &(HEADER_SIZE as i32).to_le_bytes());
        b[38] = b'r';
        for (i, d) in self.dim.iter().enumerate() {
            put(&mut b, 40 + 2 * i, &d.to_le_bytes());
        }
        put(&mut b, 70, &self.datatype.code().to_le_bytes());
        put(
            &mut b,
            72,
            &((self.datatype.bytes() * 8) as i16).to_le_bytes(),
        );
        for (i, p) in self.pixdim.iter().enumerate() {
            put(&mut b, 76 + 4 * i, &p.to_le_bytes());
        }
        put(&mut b, 108, &self.vox_offset.to_le_bytes());
        put(&mut b, 112, &self.scl_slope.to_le_bytes());
        put(&mut b, 116, &self.scl_inter.to_le_bytes());
        b[123] = self.xyzt_units;
        put(&mut b, 148, &self.descrip);
        put(&mut b, 252, &self.qform_code.to_le_bytes());
        put(&mut b, 254, &self.sform_code.to_le_bytes());
        for i in 0..3 {
            put(&mut b, 256 + 4 * i, &self.quatern[i].to_le_bytes());
            put(&mut b, 268 + 4 * i, &self.qoffset[i].to_le_bytes());
        }
        for (r, row) in self.srow.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                put(&mut b, 280 + 16 * r + 4 * c, &v.to_le_bytes());
            }
        }
        put(&mut b, 344, &self.magic);
        b
    }

    /// Parses a header in either byte order; the order is detected from
    /// `sizeof_hdr`.
    pub fn from_bytes(b: &[u8]) -> Result<(Self, Endian)> {
        if b.len() < HEADER_SIZE {
            return Err(Error::Corrupt(format!(
                "header truncated: {} of {HEADER_SIZE} bytes",
                b.len()
            )));
        }
        let endian = if i32::from_le_bytes(b[0..4].try_into().unwrap()) == HEADER_SIZE as i32 {
            Endian::Little
        } else if i32::from_be_bytes(b[0..4].try_into().unwrap()) == HEADER_SIZE as i32 {
            Endian::Big
        } else {
            return Err(Error::Format("sizeof_hdr is not 348".into()));
        };
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&b[344..348]);
        if &magic != MAGIC_SINGLE && &magic != MAGIC_PAIRED {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let e = endian;
        let mut dim = [0i16; 8];
        for (i, d) in dim.iter_mut().enumerate() {
            *d = e.i16(b, 40 + 2 * i);
        }
        if !(1..=7).contains(&dim[0]) {
            return Err(Error::Format(format!("dim[0] = {} outside [1, 7]", dim[0])));
        }
        for i in 1..=dim[0] as usize {
            if dim[i] < 1 {
                return Err(Error::Format(format!("dim[{i}] = {} < 1", dim[i])));
            }
        }
        let datatype = DataType::from_code(e.i16(b, 70))?;
        let mut pixdim = [0f32; 8];
        for (i, p) in pixdim.iter_mut().enumerate() {
            *p = e.f32(b, 76 + 4 * i);
        }
        let mut descrip = [0u8; 80];
        descrip.copy_from_slice(&b[148..228]);
        let mut srow = [[0f32; 4]; 3];
        for (r, row) in srow.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = e.f32(b, 280 + 16 * r + 4 * c);
            }
        }
        let header = Self {
            dim,
            datatype,
            pixdim,
            vox_offset: e.f32(b, 108),
            scl_slope: e.f32(b, 112),
            scl_inter: e.f32(b, 116),
            xyzt_units: b[123],
            descrip,
            qform_code: e.i16(b, 252),
            sform_code: e.i16(b, 254),
            quatern: [e.f32(b, 256), e.f32(b, 260), e.f32(b, 264)],
            qoffset: [e.f32(b, 268), e.f32(b, 272), e.f32(b, 276)],
            srow,
            magic,
        };
        Ok((header, endian))
    }

    fn spatial_shape(&self) -> Result<Shape> {
        let nd = self.dim[0] as usize;
        if (4..=nd).any(|i| self.dim[i] != 1) {
            return Err(Error::Unsupported(format!(
                "non-singleton dimensions beyond 3D: {:?}",
                &self.dim[..=nd]
            )));
        }
        let mut shape = [1usize; 3];
        for (i, s) in shape.iter_mut().enumerate().take(nd.min(3)) {
            *s = self.dim[i + 1] as usize;
        }
        Ok(shape)
    }

    fn intensity_scaling(&self) -> (f64, f64) {
        let slope = self.scl_slope as f64;
        if slope == 0.0 || !slope.is_finite() {
            (1.0, 0.0)
        } else {
            let inter = self.scl_inter as f64;
            (slope, if inter.is_finite() { inter } else { 0.0 })
        }
    }
}

fn put(b: &mut [u8], at: usize, bytes: &[u8]) {
    b[at..at + bytes.len()].copy_from_slice(bytes);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

impl Endian {
    fn take<const N: usize>(self, b: &[u8], at: usize) -> [u8; N] {
        let mut a: [u8; N] = b[at..at + N].try_into().unwrap();
        if self == Endian::Big {
            a.reverse();
        }
        a
    }

    fn i16(self, b: &[u8], at: usize) -> i16 {
        i16::from_le_bytes(self.take(b, at))
    }

    fn f32(self, b: &[u8], at: usize) -> f32 {
        f32::from_le_bytes(self.take(b, at))
    }

    fn decode(self, dt: DataType, b: &[u8], n: usize) -> Vec<f64> {
        let w = dt.bytes();
        (0..n)
            .map(|i| {
                let at = i * w;
                match dt {
                    DataType::Uint8 => b[at] as f64,
                    DataType::Int8 => b[at] as i8 as f64,
                    DataType::Int16 => i16::from_le_bytes(self.take(b, at)) as f64,
                    DataType::Uint16 => u16::from_le_bytes(self.take(b, at)) as f64,
                    DataType::Int32 => i32::from_le_bytes(self.take(b, at)) as f64,
                    DataType::Uint32 => u32::from_le_bytes(self.take(b, at)) as f64,
                    DataType::Float32 => f32::from_le_bytes(self.take(b, at)) as f64,
                    DataType::Float64 => f64::from_le_bytes(self.take(b, at)),
                }
            })
            .collect()
    }
}

fn maybe_gunzip(raw: Vec<u8>) -> Result<Vec<u8>> {
    if raw.len() >= 2 && raw[..2] == GZIP_MAGIC {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Corrupt(format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Header plus raw stored values (before intensity scaling).
struct Decoded {
    header: NiftiHeader,
    shape: Shape,
    stored: Vec<f64>,
}

fn decode_single(bytes: &[u8], companion: Option<&Path>) -> Result<Decoded> {
    let (header, endian) = NiftiHeader::from_bytes(bytes)?;
    let shape = header.spatial_shape()?;
    let n = voxel_count(shape);
    let need = n * header.datatype.bytes();
    let data_bytes: Vec<u8>;
    let payload: &[u8] = if &header.magic == MAGIC_SINGLE {
        let offset = header.vox_offset.max(HEADER_SIZE as f32) as usize;
        if bytes.len() < offset + need {
            return Err(Error::Corrupt(format!(
                "expected {need} data bytes at offset {offset}, file has {}",
                bytes.len().saturating_sub(offset)
            )));
        }
        &bytes[offset..offset + need]
    } else {
        let img = companion
            .ok_or_else(|| Error::Format("paired header (ni1) without an .img companion".into()))?;
        data_bytes = maybe_gunzip(fs::read(img)?)?;
        let offset = header.vox_offset.max(0.0) as usize;
        if data_bytes.len() < offset + need {
            return Err(Error::Corrupt(format!(
                "image file holds {} bytes, need {}",
                data_bytes.len(),
                offset + need
            )));
        }
        &data_bytes[offset..offset + need]
    };
    let stored = endian.decode(header.datatype, payload, n);
    Ok(Decoded {
        header,
        shape,
        stored,
    })
}

fn companion_image(path: &Path) -> Option<PathBuf> {
    let name = path.file_name()?.to_str()?;
    let stem = name
        .strip_suffix(".hdr.gz")
        .or_else(|| name.strip_suffix(".hdr"))?;
    [".img", ".img.gz"]
        .iter()
        .map(|ext| path.with_file_name(format!("{stem}{ext}")))
        .find(|p| p.exists())
}

fn decode_path(path: &Path) -> Result<Decoded> {
    let bytes = maybe_gunzip(fs::read(path)?)?;
    decode_single(&bytes, companion_image(path).as_deref())
}

fn scaled_volume(d: Decoded) -> Result<Volume> {
    let (slope, inter) = d.header.intensity_scaling();
    let data = d.stored.into_iter().map(|v| slope * v + inter).collect();
    Ok(Volume::new(data, d.shape, d.header.spacing())?.with_affine(d.header.affine()))
}

/// Reads a NIfTI-1 volume from memory (plain or gzip-compressed single file).
pub fn read_volume_bytes(bytes: &[u8]) -> Result<Volume> {
    let bytes = maybe_gunzip(bytes.to_vec())?;
    scaled_volume(decode_single(&bytes, None)?)
}

/// Reads a volume with `scl_slope`/`scl_inter` applied.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    scaled_volume(decode_path(path.as_ref())?)
}

fn quantise(v: &Volume, dt: DataType) -> (f32, f32, Vec<f64>) {
    let (lo, hi) = v.min_max();
    let levels = match dt {
        DataType::Uint8 => 255.0,
        DataType::Int8 => 127.0,
        DataType::Int16 => 32767.0,
        DataType::Uint16 => 65535.0,
        DataType::Int32 => 2147483647.0,
        DataType::Uint32 => 4294967295.0,
        DataType::Float32 | DataType::Float64 => unreachable!(),
    };
    let slope = if hi > lo { (hi - lo) / levels } else { 1.0 };
    // The header stores single precision; quantise against the stored values.
    let (slope32, inter32) = (slope as f32, lo as f32);
    let (s, b) = (slope32 as f64, inter32 as f64);
    let stored = v
        .data()
        .iter()
        .map(|&x| ((x - b) / s).round().clamp(0.0, levels))
        .collect();
    (slope32, inter32, stored)
}

fn encode(dt: DataType, values: &[f64], out: &mut Vec<u8>) {
    for &v in values {
        match dt {
            DataType::Uint8 => out.push(v as u8),
            DataType::Int8 => out.push(v as i8 as u8),
            DataType::Int16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            DataType::Uint16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            DataType::Int32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            DataType::Uint32 => out.extend_from_slice(&(v as u32).to_le_bytes()),
            DataType::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            DataType::Float64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

fn assemble(header: &NiftiHeader, stored: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(SINGLE_FILE_OFFSET + stored.len() * header.datatype.bytes());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&[0u8; 4]);
    encode(header.datatype, stored, &mut out);
    out
}

fn is_gz_path(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn gzip(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(bytes)?;
    Ok(enc.finish()?)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if is_gz_path(path) {
        fs::write(path, gzip(bytes)?)?;
    } else {
        fs::write(path, bytes)?;
    }
    Ok(())
}

/// Encodes a volume as an uncompressed single-file NIfTI-1 image.
///
/// Float types store values directly. Integer types map `[min, max]` onto
/// `[0, type max]` through `scl_slope = (max - min) / type max` and
/// `scl_inter = min`.
pub fn encode_volume(v: &Volume, datatype: DataType) -> Vec<u8> {
    let mut header = NiftiHeader::for_volume(v.shape(), v.spacing(), v.affine(), datatype);
    if datatype.is_integer() {
        let (slope, inter, stored) = quantise(v, datatype);
        header.scl_slope = slope;
        header.scl_inter = inter;
        assemble(&header, &stored)
    } else {
        assemble(&header, v.data())
    }
}

/// File contents as `write_volume` would produce them, gzipped on request.
pub fn encode_file(v: &Volume, datatype: DataType, compressed: bool) -> Result<Vec<u8>> {
    let bytes = encode_volume(v, datatype);
    if compressed {
        gzip(&bytes)
    } else {
        Ok(bytes)
    }
}

pub fn write_volume(v: &Volume, path: impl AsRef<Path>, datatype: DataType) -> Result<()> {
    write_bytes(path.as_ref(), &encode_volume(v, datatype))
}

/// Reads an integer label volume. Float datatypes and scaled integers are
/// rejected.
pub fn read_mask(path: impl AsRef<Path>) -> Result<SegMask> {
    let d = decode_path(path.as_ref())?;
    if !d.header.datatype.is_integer() {
        return Err(Error::Format(format!(
            "mask must use an integer datatype, found {:?}",
            d.header.datatype
        )));
    }
    let (slope, inter) = d.header.intensity_scaling();
    if slope != 1.0 || inter != 0.0 {
        return Err(Error::Format(
            "mask has non-trivial intensity scaling".into(),
        ));
    }
    let labels = d
        .stored
        .iter()
        .map(|&v| {
            if v < 0.0 {
                Err(Error::Format(format!("negative label {v}")))
            } else {
                Ok(v as u32)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SegMask::new(labels, d.shape, d.header.spacing())
}

/// Writes labels with the narrowest of uint8, int16 or int32 that holds them.
pub fn write_mask(m: &SegMask, path: impl AsRef<Path>) -> Result<()> {
    let max = m.labels().iter().copied().max().unwrap_or(0);
    let datatype = if max <= u8::MAX as u32 {
        DataType::Uint8
    } else if max <= i16::MAX as u32 {
        DataType::Int16
    } else if max <= i32::MAX as u32 {
        DataType::Int32
    } else {
        DataType::Uint32
    };
    let header = NiftiHeader::for_volume(
        m.shape(),
        m.spacing(),
        &scaling_affine(m.spacing()),
        datatype,
    );
    let stored: Vec<f64> = m.labels().iter().map(|&l| l as f64).collect();
    write_bytes(path.as_ref(), &assemble(&header, &stored))
}

/// How a path should be written: `.nii.gz` compresses.
pub fn has_nifti_extension(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".nii") || name.ends_with(".nii.gz")
}

/// File name without the `.nii` / `.nii.gz` suffix.
pub fn case_id_of(path: &Path) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    name.strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .map(str::to_owned)
}
