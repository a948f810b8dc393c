//! On-disk cloud records (`.npz`-convention zip archives) and training-time
//! jitter.
//!
//! An archive holds `positions.npy` (N×3), `scalars.npy` (N), `topo.npy`
//! (N×C), all little-endian float32 in C order, and `meta.json`:
//!
//! ```json
//! {"channel_layout": ["t1.x", …], "config_hash": "0123456789abcdef",
//!  "format_version": 1, "n_points": 1024, "name": "mol", "scalar_kind": "esp"}
//! ```

use std::io::{Cursor, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::alignment::SurfaceCloud;
use crate::error::{Error, Result};
use crate::numeric::{Mat3, Vec3};

pub const FORMAT_VERSION: u32 = 1;
pub const POSITIONS_MEMBER: &str = "positions.npy";
pub const SCALARS_MEMBER: &str = "scalars.npy";
pub const TOPO_MEMBER: &str = "topo.npy";
pub const META_MEMBER: &str = "meta.json";
/// Position jitter as a fraction of the cloud's bounding radius.
pub const DEFAULT_JITTER_FRACTION: f64 = 0.01;
pub const DEFAULT_ROTATION_JITTER_DEG: f64 = 5.0;

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";
const NPY_ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub name: String,
    pub scalar_kind: String,
    pub n_points: usize,
    pub channel_layout: Vec<String>,
    /// FNV-1a of the canonical config JSON, 16 hex digits.
    pub config_hash: String,
    pub format_version: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmptcrCloud {
    pub positions: Vec<[f32; 3]>,
    pub scalars: Vec<f32>,
    /// Row-major N×C.
    pub topo: Vec<f32>,
    pub meta: CloudMeta,
}

impl AmptcrCloud {
    /// Down-casts an aligned in-memory cloud.
    pub fn from_surface_cloud(cloud: &SurfaceCloud<f64>, meta: CloudMeta) -> Result<Self> {
        let channels = meta.channel_layout.len();
        let mut topo = Vec::with_capacity(cloud.len() * channels);
        for d in &cloud.topo {
            let row = d.channels();
            if row.len() != channels {
                return Err(Error::Integrity(format!(
                    "descriptor has {} channels, layout names {channels}",
                    row.len()
                )));
            }
            topo.extend(row.iter().map(|&v| v as f32));
        }
        let out = AmptcrCloud {
            positions: cloud.positions.iter().map(|p| p.0.map(|v| v as f32)).collect(),
            scalars: cloud.scalars.iter().map(|&s| s as f32).collect(),
            topo,
            meta,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.meta.channel_layout.len()
    }

    pub fn topo_row(&self, i: usize) -> &[f32] {
        let c = self.channels();
        &self.topo[i * c..(i + 1) * c]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if self.scalars.len() != n {
            return Err(Error::Integrity(format!("{} scalars for {n} points", self.scalars.len())));
        }
        if self.topo.len() != n * self.channels() {
            return Err(Error::Integrity(format!(
                "topology has {} values, expected {n}×{}",
                self.topo.len(),
                self.channels()
            )));
        }
        if self.meta.n_points != n {
            return Err(Error::Integrity(format!("meta says {} points, arrays hold {n}", self.meta.n_points)));
        }
        if let Some(s) = self.scalars.iter().find(|s| !(s.abs() <= 1.0)) {
            return Err(Error::Integrity(format!("scalar {s} outside [-1, 1]")));
        }
        Ok(())
    }

    pub fn bounding_radius(&self) -> f64 {
        if self.positions.is_empty() {
            return 0.0;
        }
        let pts: Vec<Vec3<f64>> = self.positions.iter().map(|p| Vec3(p.map(f64::from))).collect();
        crate::pipeline::bounding_radius(&pts)
    }
}

/// 64-bit FNV-1a of the canonical JSON form (sorted keys, no whitespace) of
/// `config`, as 16 lower-case hex digits.
pub fn config_hash<S: Serialize>(config: &S) -> Result<String> {
    // serde_json's default map is ordered by key, so this is canonical.
    let canonical = serde_json::to_string(&serde_json::to_value(config)?)?;
    Ok(format!("{:016x}", crate::numeric::fnv1a64(canonical.as_bytes())))
}

/// Element types storable as `.npy` payloads.
pub trait NpyElement: Copy {
    const DESCR: &'static str;
    const SIZE: usize;
    fn put_le(self, out: &mut Vec<u8>);
    fn from_le(bytes: &[u8]) -> Self;
}

impl NpyElement for f32 {
    const DESCR: &'static str = "<f4";
    const SIZE: usize = 4;
    fn put_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn from_le(b: &[u8]) -> Self {
        f32::from_le_bytes([b[0], b[1], b[2], b[3]])
    }
}

impl NpyElement for f64 {
    const DESCR: &'static str = "<f8";
    const SIZE: usize = 8;
    fn put_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn from_le(b: &[u8]) -> Self {
        f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
    }
}

/// Serialized `.npy` v1.0 bytes of a little-endian C-order array.
pub fn npy_bytes<E: NpyElement>(shape: &[usize], data: &[E]) -> Vec<u8> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!("({})", shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    let mut header = format!("{{'descr': '{}', 'fortran_order': False, 'shape': {dims}, }}", E::DESCR);
    // magic(6) + version(2) + length(2) + header + '\n' is a multiple of 64
    let unpadded = NPY_MAGIC.len() + 4 + header.len() + 1;
    let pad = (NPY_ALIGN - unpadded % NPY_ALIGN) % NPY_ALIGN;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');
    let mut out = Vec::with_capacity(NPY_MAGIC.len() + 4 + header.len() + data.len() * E::SIZE);
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        v.put_le(&mut out);
    }
    out
}

/// Parses `.npy` bytes holding a little-endian C-order array of `E`.
pub fn parse_npy<E: NpyElement>(member: &str, bytes: &[u8]) -> Result<(Vec<usize>, Vec<E>)> {
    let fail = |msg: &str| Error::Format {
        member: member.to_string(),
        msg: msg.to_string(),
    };
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err(fail("bad magic"));
    }
    if bytes[6..8] != [1, 0] {
        return Err(fail(&format!("unsupported version {}.{}", bytes[6], bytes[7])));
    }
    let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body = 10 + hlen;
    if bytes.len() < body {
        return Err(fail("truncated header"));
    }
    let header = std::str::from_utf8(&bytes[10..body]).map_err(|_| fail("header is not ASCII"))?;
    let descr = dict_value(header, "descr").ok_or_else(|| fail("header lacks descr"))?;
    if descr.trim_matches(|c| c == '\'' || c == '"') != E::DESCR {
        return Err(fail(&format!("dtype {descr} is not {}", E::DESCR)));
    }
    if dict_value(header, "fortran_order").map(str::trim) != Some("False") {
        return Err(fail("only C-order arrays are supported"));
    }
    let shape_src = dict_value(header, "shape").ok_or_else(|| fail("header lacks shape"))?;
    let shape = shape_src
        .trim()
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| fail("bad shape"))?;
    let count: usize = shape.iter().product();
    let payload = &bytes[body..];
    if payload.len() != count * E::SIZE {
        return Err(fail(&format!("payload holds {} bytes, shape needs {}", payload.len(), count * E::SIZE)));
    }
    let data = payload.chunks_exact(E::SIZE).map(E::from_le).collect();
    Ok((shape, data))
}

/// Raw text of `key`'s value in a Python dict literal (shape tuples included).
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let k1 = format!("'{key}'");
    let start = header.find(&k1)? + k1.len();
    let rest = header[start..].trim_start().strip_prefix(':')?;
    let end = if rest.trim_start().starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find([',', '}'])?
    };
    Some(rest[..end].trim())
}

/// Options giving reproducible bytes: stored, fixed timestamp and mode.
pub fn member_options() -> SimpleFileOptions {
    SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644)
}

/// Zips `members` in the given order with reproducible options.
pub fn zip_members<'a>(members: impl IntoIterator<Item = (&'a str, Vec<u8>)>) -> Result<Vec<u8>> {
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    for (name, bytes) in members {
        zip.start_file(name, member_options())?;
        zip.write_all(&bytes)?;
    }
    Ok(zip.finish()?.into_inner())
}

/// Reads one member, naming it in any error.
pub fn read_member(zip: &mut ZipArchive<Cursor<&[u8]>>, name: &str) -> Result<Vec<u8>> {
    let wrap = |e: &dyn std::fmt::Display| Error::Format {
        member: name.to_string(),
        msg: e.to_string(),
    };
    let mut f = zip.by_name(name).map_err(|e| wrap(&e))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(|e| wrap(&e))?;
    Ok(buf)
}

/// Archive bytes; identical clouds give identical bytes.
pub fn archive_bytes(cloud: &AmptcrCloud) -> Result<Vec<u8>> {
    cloud.validate()?;
    let n = cloud.len();
    let flat_pos: Vec<f32> = cloud.positions.iter().flatten().copied().collect();
    zip_members([
        (POSITIONS_MEMBER, npy_bytes(&[n, 3], &flat_pos)),
        (SCALARS_MEMBER, npy_bytes(&[n], &cloud.scalars)),
        (TOPO_MEMBER, npy_bytes(&[n, cloud.channels()], &cloud.topo)),
        (META_MEMBER, serde_json::to_vec_pretty(&cloud.meta)?),
    ])
}

pub fn parse_archive(bytes: &[u8]) -> Result<AmptcrCloud> {
    let mut zip = ZipArchive::new(Cursor::new(bytes))?;
    let mut read = |name: &str| read_member(&mut zip, name);
    let meta: CloudMeta = serde_json::from_slice(&read(META_MEMBER)?).map_err(|e| Error::Format {
        member: META_MEMBER.to_string(),
        msg: e.to_string(),
    })?;
    let (ps, pos) = parse_npy(POSITIONS_MEMBER, &read(POSITIONS_MEMBER)?)?;
    let (ss, scalars) = parse_npy(SCALARS_MEMBER, &read(SCALARS_MEMBER)?)?;
    let (ts, topo) = parse_npy(TOPO_MEMBER, &read(TOPO_MEMBER)?)?;
    let n = meta.n_points;
    let c = meta.channel_layout.len();
    if ps != [n, 3] || ss != [n] || ts != [n, c] {
        return Err(Error::Integrity(format!(
            "member shapes {ps:?}, {ss:?}, {ts:?} disagree with {n} points × {c} channels"
        )));
    }
    let cloud = AmptcrCloud {
        positions: pos.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        scalars,
        topo,
        meta,
    };
    cloud.validate()?;
    Ok(cloud)
}

/// Writes via a sibling temp file and rename, so readers never see a
/// partial archive.
pub fn write_archive(cloud: &AmptcrCloud, path: &Path) -> Result<()> {
    let bytes = archive_bytes(cloud)?;
    write_atomic(path, &bytes)
}

pub fn read_archive(path: &Path) -> Result<AmptcrCloud> {
    parse_archive(&std::fs::read(path)?)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Indices of the `t1` and `t2` channel triples in a layout.
fn vector_channels(layout: &[String]) -> Vec<usize> {
    ["t1.x", "t2.x"]
        .iter()
        .filter_map(|name| layout.iter().position(|l| l == name))
        .filter(|&i| i + 2 < layout.len())
        .collect()
}

/// Gaussian position noise followed by a rotation about a uniformly random
/// axis by a Gaussian angle. Positions and the `t1`/`t2` channels rotate;
/// scalars are untouched.
pub fn jitter(cloud: &AmptcrCloud, sigma_pos: f64, rot_sigma_deg: f64, seed: u64) -> Result<AmptcrCloud> {
    if !(sigma_pos >= 0.0) || !(rot_sigma_deg >= 0.0) {
        return Err(Error::invalid("jitter magnitudes must be non-negative"));
    }
    let mut out = cloud.clone();
    if sigma_pos == 0.0 && rot_sigma_deg == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if sigma_pos > 0.0 {
        let noise = Normal::new(0.0, sigma_pos).map_err(|e| Error::invalid(e.to_string()))?;
        for p in out.positions.iter_mut() {
            for v in p.iter_mut() {
                *v = (f64::from(*v) + noise.sample(&mut rng)) as f32;
            }
        }
    }
    if rot_sigma_deg > 0.0 {
        let axis = loop {
            let a: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if let Some(u) = Vec3(a).normalized() {
                break u;
            }
        };
        let angle = rng.sample::<f64, _>(StandardNormal) * rot_sigma_deg.to_radians();
        let r = Mat3::axis_angle(&axis, angle);
        let rot = |v: [f32; 3]| r.mul_vec(&Vec3(v.map(f64::from))).0.map(|x| x as f32);
        for p in out.positions.iter_mut() {
            *p = rot(*p);
        }
        let c = out.channels();
        for start in vector_channels(&out.meta.channel_layout) {
            for row in out.topo.chunks_exact_mut(c) {
                let v = rot([row[start], row[start + 1], row[start + 2]]);
                row[start..start + 3].copy_from_slice(&v);
            }
        }
    }
    Ok(out)
}

/// [`jitter`] with the default magnitudes for this cloud.
pub fn default_jitter(cloud: &AmptcrCloud, seed: u64) -> Result<AmptcrCloud> {
    jitter(
        cloud,
        DEFAULT_JITTER_FRACTION * cloud.bounding_radius(),
        DEFAULT_ROTATION_JITTER_DEG,
        seed,
    )
}
