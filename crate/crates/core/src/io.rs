//! On-disk formats: 16-bit grayscale depth PNGs (0 = invalid) and the
//! intrinsics JSON `{fx, fy, cx, cy, width, height, depth_scale}`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage};

pub const INTRINSICS_FILE: &str = "intrinsics.json";

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let intr: CameraIntrinsics = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    intr.validate().map_err(|e| Error::format(path, e))?;
    Ok(intr)
}

pub fn write_intrinsics(path: &Path, intr: &CameraIntrinsics) -> Result<()> {
    let mut text = serde_json::to_string_pretty(intr).expect("intrinsics serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Decodes a 16-bit single-channel PNG whose size must match `intr`.
pub fn read_depth_png(path: &Path, intr: &CameraIntrinsics) -> Result<DepthImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e))?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Sixteen {
        return Err(Error::format(
            path,
            format!("expected 16-bit grayscale, found {color:?} {depth:?}"),
        ));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e))?;
    if info.width != intr.width || info.height != intr.height {
        return Err(Error::format(
            path,
            format!(
                "image is {}x{}, intrinsics say {}x{}",
                info.width, info.height, intr.width, intr.height
            ),
        ));
    }
    let data = buf[..info.buffer_size()]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    DepthImage::new(data, *intr).map_err(|e| Error::format(path, e))
}

pub fn write_depth_png(path: &Path, img: &DepthImage) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().flat_map(|d| d.to_be_bytes()).collect();
    write_png(path, img.width(), img.height(), png::BitDepth::Sixteen, &bytes)
}

/// 8-bit mask, 255 where `mask` is set.
pub fn write_mask_png(path: &Path, width: u32, height: u32, mask: &[bool]) -> Result<()> {
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    write_png(path, width, height, png::BitDepth::Eight, &bytes)
}

fn write_png(path: &Path, width: u32, height: u32, depth: png::BitDepth, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(depth);
    let mut writer = encoder.write_header().map_err(|e| Error::format(path, e))?;
    writer.write_image_data(bytes).map_err(|e| Error::format(path, e))?;
    writer.finish().map_err(|e| Error::format(path, e))
}

/// File names of the `.png` files directly inside `dir`, sorted.
pub fn list_depth_pngs(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Intrinsics for a frame directory: `explicit` if given, else the
/// directory's own `intrinsics.json`.
pub fn resolve_intrinsics(dir: &Path, explicit: Option<&Path>) -> Result<(PathBuf, CameraIntrinsics)> {
    let path = explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(INTRINSICS_FILE));
    let intr = read_intrinsics(&path)?;
    Ok((path, intr))
}

/// Loads every depth PNG of `dir`; frame ids are the file names.
pub fn load_frames(dir: &Path, intr: &CameraIntrinsics) -> Result<Vec<(String, DepthImage)>> {
    list_depth_pngs(dir)?
        .into_iter()
        .map(|name| {
            let img = read_depth_png(&dir.join(&name), intr)?;
            Ok((name, img))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_preserves_full_range() {
        let dir = tempfile::tempdir().unwrap();
        let intr = CameraIntrinsics::new(10.0, 10.0, 1.0, 1.0, 3, 2, 0.001).unwrap();
        let img = DepthImage::new(vec![0, 1, 255, 256, 40_000, u16::MAX], intr).unwrap();
        let path = dir.path().join("a.png");
        write_depth_png(&path, &img).unwrap();
        assert_eq!(read_depth_png(&path, &intr).unwrap(), img);
    }

    #[test]
    fn rejects_8bit_and_wrong_size() {
        let dir = tempfile::tempdir().unwrap();
        let intr = CameraIntrinsics::new(10.0, 10.0, 1.0, 1.0, 3, 2, 0.001).unwrap();
        let mask = dir.path().join("m.png");
        write_mask_png(&mask, 3, 2, &[true; 6]).unwrap();
        assert!(matches!(read_depth_png(&mask, &intr), Err(Error::Format { .. })));

        let other = CameraIntrinsics::new(10.0, 10.0, 1.0, 1.0, 4, 2, 0.001).unwrap();
        let path = dir.path().join("b.png");
        write_depth_png(&path, &DepthImage::zeros(other)).unwrap();
        assert!(matches!(read_depth_png(&path, &intr), Err(Error::Format { .. })));
    }

    #[test]
    fn intrinsics_json_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let intr = CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480, 0.001).unwrap();
        let path = dir.path().join(INTRINSICS_FILE);
        write_intrinsics(&path, &intr).unwrap();
        assert_eq!(read_intrinsics(&path).unwrap(), intr);

        fs::write(
            &path,
            r#"{"fx":1,"fy":1,"cx":9,"cy":0,"width":4,"height":4,"depth_scale":0.001}"#,
        )
        .unwrap();
        assert!(read_intrinsics(&path).is_err());
    }

    #[test]
    fn listing_is_sorted_and_png_only() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.png", "a.png", "c.txt", "intrinsics.json"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        assert_eq!(list_depth_pngs(dir.path()).unwrap(), vec!["a.png", "b.png"]);
    }
}
