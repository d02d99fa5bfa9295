//! Point cloud files: PLY and whitespace-separated `x y z` text.

mod ply;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel::PointCloud;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointFormat {
    #[default]
    PlyBinary,
    PlyAscii,
    Xyz,
}

impl PointFormat {
    /// `.xyz`/`.txt` files are text, everything else binary PLY.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xyz" | "txt") => Self::Xyz,
            _ => Self::PlyBinary,
        }
    }
}

/// Parses PLY when the data starts with the `ply` magic, xyz text otherwise.
pub fn parse_points(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n") {
        ply::parse(bytes)
    } else {
        parse_xyz(bytes)
    }
}

pub fn read_points(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_points(&fs::read(path)?)
}

fn parse_xyz(bytes: &[u8]) -> Result<PointCloud> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        location: format!("byte offset {}", e.valid_up_to()),
        message: "not valid text".into(),
    })?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut p = [0.0; 3];
        let mut words = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|w| !w.is_empty());
        for v in &mut p {
            *v = words
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| Error::Parse {
                    location: format!("line {}", i + 1),
                    message: "expected three numeric coordinates".into(),
                })?;
        }
        points.push(p);
    }
    Ok(PointCloud::new(points))
}

pub fn encode_points(pc: &PointCloud, format: PointFormat) -> Vec<u8> {
    match format {
        PointFormat::PlyBinary => ply::to_binary(pc),
        PointFormat::PlyAscii => ply::to_ascii(pc),
        PointFormat::Xyz => {
            let mut s = String::new();
            for p in &pc.points {
                let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
            }
            s.into_bytes()
        }
    }
}

pub fn write_points(pc: &PointCloud, path: impl AsRef<Path>, format: PointFormat) -> Result<()> {
    if !pc.is_finite() {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }
    write_atomic(path, &encode_points(pc, format))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write leaves no file behind.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
