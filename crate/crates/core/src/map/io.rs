//! Map serialization.
//!
//! Binary map file, little endian:
//!
//! ```text
//! magic      4 bytes  "FNVM"
//! version    u32      1
//! resolution f64      metres
//! count      u64      number of records
//! min_key    3 x i32  inclusive key bounds (zeros when empty)
//! max_key    3 x i32
//! records    count x { x: i32, y: i32, z: i32, log_odds: f32, roi: u8 }
//! ```
//!
//! Records are written in ascending key order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Cell, DualMap, LogOddsParams, OccupancyState, VoxelKey, VoxelMap};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"FNVM";
const VERSION: u32 = 1;

pub fn write_map<W: Write>(map: &VoxelMap, mut w: W) -> Result<()> {
    let cells = map.sorted_cells();
    let mut lo = [i32::MAX; 3];
    let mut hi = [i32::MIN; 3];
    for (k, _) in &cells {
        for a in 0..3 {
            lo[a] = lo[a].min(k.axis(a));
            hi[a] = hi[a].max(k.axis(a));
        }
    }
    if cells.is_empty() {
        lo = [0; 3];
        hi = [0; 3];
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&map.resolution().to_le_bytes())?;
    w.write_all(&(cells.len() as u64).to_le_bytes())?;
    for v in lo.iter().chain(hi.iter()) {
        w.write_all(&v.to_le_bytes())?;
    }
    for (k, c) in &cells {
        w.write_all(&k.x.to_le_bytes())?;
        w.write_all(&k.y.to_le_bytes())?;
        w.write_all(&k.z.to_le_bytes())?;
        w.write_all(&c.log_odds.to_le_bytes())?;
        w.write_all(&[u8::from(c.roi)])?;
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::format("map file", e.to_string()))?;
    Ok(buf)
}

pub fn read_map<R: Read>(mut r: R, params: LogOddsParams) -> Result<VoxelMap> {
    if &take::<4, _>(&mut r)? != MAGIC {
        return Err(Error::format("map file", "bad magic"));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != VERSION {
        return Err(Error::format("map file", format!("unsupported version {version}")));
    }
    let res = f64::from_le_bytes(take(&mut r)?);
    if !(res > 0.0 && res.is_finite()) {
        return Err(Error::format("map file", format!("bad resolution {res}")));
    }
    let count = u64::from_le_bytes(take(&mut r)?);
    let _bounds: [u8; 24] = take(&mut r)?;
    let mut map = VoxelMap::new(res, params);
    for _ in 0..count {
        let x = i32::from_le_bytes(take(&mut r)?);
        let y = i32::from_le_bytes(take(&mut r)?);
        let z = i32::from_le_bytes(take(&mut r)?);
        let log_odds = f32::from_le_bytes(take(&mut r)?);
        let [roi] = take::<1, _>(&mut r)?;
        map.insert_raw(VoxelKey::new(x, y, z), Cell { log_odds, roi: roi != 0 });
    }
    Ok(map)
}

pub fn write_map_file(map: &VoxelMap, path: &Path) -> Result<()> {
    write_map(map, BufWriter::new(File::create(path)?))
}

pub fn read_map_file(path: &Path) -> Result<VoxelMap> {
    read_map(BufReader::new(File::open(path)?), LogOddsParams::default())
}

/// Writes `coarse.fnvm` and `fine.fnvm` into `dir`.
pub fn write_dual_map(map: &DualMap, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_map_file(map.coarse(), &dir.join("coarse.fnvm"))?;
    write_map_file(map.fine(), &dir.join("fine.fnvm"))
}

/// ASCII PLY of occupied voxel centres; ROI voxels are red, others grey.
pub fn write_occupied_ply<W: Write>(map: &VoxelMap, mut w: W) -> Result<()> {
    let res = map.resolution();
    let cells: Vec<_> = map
        .sorted_cells()
        .into_iter()
        .filter(|(_, c)| map.params().state_of(c.log_odds) == OccupancyState::Occupied)
        .collect();
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "element vertex {}", cells.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header")?;
    for (k, c) in cells {
        let p = k.center(res);
        let rgb = if c.roi { (220, 30, 30) } else { (160, 160, 160) };
        writeln!(w, "{} {} {} {} {} {}", p.x as f32, p.y as f32, p.z as f32, rgb.0, rgb.1, rgb.2)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_cells() {
        let mut m = VoxelMap::new(0.003, LogOddsParams::default());
        m.update(VoxelKey::new(1, -2, 3), true);
        m.update(VoxelKey::new(-7, 0, 9), false);
        m.set_roi(VoxelKey::new(1, -2, 3));
        let mut buf = Vec::new();
        write_map(&m, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 24 + 2 * 17);
        let back = read_map(buf.as_slice(), LogOddsParams::default()).unwrap();
        assert_eq!(back.resolution(), 0.003);
        assert_eq!(back.sorted_cells(), m.sorted_cells());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut m = VoxelMap::new(0.01, LogOddsParams::default());
        m.update(VoxelKey::new(0, 0, 0), true);
        let mut buf = Vec::new();
        write_map(&m, &mut buf).unwrap();
        buf.pop();
        assert!(matches!(read_map(buf.as_slice(), LogOddsParams::default()), Err(Error::Format { .. })));
        assert!(read_map(&b"NOPE"[..], LogOddsParams::default()).is_err());
    }

    #[test]
    fn ply_lists_occupied_only() {
        let mut m = VoxelMap::new(0.01, LogOddsParams::default());
        m.update(VoxelKey::new(0, 0, 0), true);
        m.update(VoxelKey::new(1, 0, 0), false);
        let mut buf = Vec::new();
        write_occupied_ply(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("element vertex 1\n"));
        assert_eq!(text.lines().count(), 10 + 1);
    }
}
