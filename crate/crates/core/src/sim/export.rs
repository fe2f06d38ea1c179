//! Debug exports: PLY clouds and binary PGM images.

use std::io::Write;

use super::{LabeledPoint, Observation};
use crate::Result;

/// ASCII PLY; labelled points are red, the rest grey.
pub fn write_cloud_ply<W: Write>(cloud: &[LabeledPoint], mut w: W) -> Result<()> {
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header")?;
    for p in cloud {
        let c = if p.label.is_some() { (220, 30, 30) } else { (150, 150, 150) };
        writeln!(
            w,
            "{} {} {} {} {} {}",
            p.position.x as f32, p.position.y as f32, p.position.z as f32, c.0, c.1, c.2
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_pgm<W: Write>(width: usize, height: usize, pixels: &[u8], mut w: W) -> Result<()> {
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    w.flush()?;
    Ok(())
}

/// Instance mask as 8-bit PGM: background 0, fruitlet `id` as `1 + id % 255`.
pub fn write_mask_pgm<W: Write>(obs: &Observation, w: W) -> Result<()> {
    let px: Vec<u8> = obs
        .instance_mask
        .iter()
        .map(|&l| if l == super::BACKGROUND { 0 } else { 1 + (l % 255) as u8 })
        .collect();
    write_pgm(obs.width, obs.height, &px, w)
}

/// Disparity scaled so the largest valid value maps to 255; invalid is 0.
pub fn write_disparity_pgm<W: Write>(obs: &Observation, w: W) -> Result<()> {
    let max = obs
        .disparity
        .iter()
        .filter(|d| d.is_finite())
        .fold(0.0f32, |a, &b| a.max(b));
    let px: Vec<u8> = obs
        .disparity
        .iter()
        .map(|&d| if d.is_finite() && max > 0.0 { (d / max * 255.0).round() as u8 } else { 0 })
        .collect();
    write_pgm(obs.width, obs.height, &px, w)
}
