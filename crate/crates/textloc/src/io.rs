//! Image, map and annotation files, and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use textloc_core::dataset::{parse_annotation, serialize_annotations, AnnotationRecord};
use textloc_core::{HeatMap, Image, QuadBox};

use crate::error::{AppError, AppResult};

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("")));
    let mut f = fs::File::create(&tmp).map_err(|e| AppError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| AppError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

pub fn read_bytes(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::io(path, e))
}

/// Loads an image as 8-bit grayscale or RGB (alpha dropped).
pub fn read_image(path: &Path) -> AppResult<Image<u8>> {
    let img = image::open(path).map_err(|e| AppError::io(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = matches!(
        img.color(),
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
    );
    let out = if gray {
        Image::new(w, h, 1, img.into_luma8().into_raw())
    } else {
        Image::new(w, h, 3, img.into_rgb8().into_raw())
    };
    out.map_err(|e| AppError::core(path.display(), e))
}

fn png_bytes(width: usize, height: usize, color: image::ExtendedColorType, data: &[u8]) -> AppResult<Vec<u8>> {
    let mut buf = Vec::new();
    let enc = image::codecs::png::PngEncoder::new(&mut buf);
    image::ImageEncoder::write_image(enc, data, width as u32, height as u32, color).map_err(|e| AppError::data(format!("png encoding: {e}")))?;
    Ok(buf)
}

pub fn write_png(path: &Path, img: &Image<u8>) -> AppResult<()> {
    let color = if img.channels() == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    write_atomic(path, &png_bytes(img.width(), img.height(), color, img.data())?)
}

/// Stores a map as 8-bit grayscale (`round(255·v)`).
pub fn write_map_png(path: &Path, map: &HeatMap) -> AppResult<()> {
    write_atomic(path, &png_bytes(map.width(), map.height(), image::ExtendedColorType::L8, &map.quantized_u8())?)
}

pub fn read_map_png(path: &Path, scale: f64) -> AppResult<HeatMap> {
    let img = image::open(path).map_err(|e| AppError::io(path, e))?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    HeatMap::from_u8(w, h, img.as_raw(), scale).map_err(|e| AppError::core(path.display(), e))
}

pub fn read_annotations(path: &Path) -> AppResult<Vec<AnnotationRecord>> {
    parse_annotation(&read_bytes(path)?).map_err(|e| AppError::core(path.display(), e))
}

pub fn read_boxes(path: &Path) -> AppResult<Vec<QuadBox>> {
    Ok(read_annotations(path)?.into_iter().map(|r| r.quad).collect())
}

pub fn write_boxes(path: &Path, boxes: &[QuadBox]) -> AppResult<()> {
    let records: Vec<_> = boxes
        .iter()
        .map(|&quad| AnnotationRecord {
            quad,
            transcript: String::new(),
        })
        .collect();
    write_atomic(path, serialize_annotations(&records).as_bytes())
}

/// Sorted files of a directory accepted by `keep`.
pub fn list_files(dir: &Path, keep: impl Fn(&Path) -> bool) -> AppResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| AppError::io(dir, e))? {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        if path.is_file() && keep(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_boxes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::new(3, 2, 3, (0..18).map(|v| v as u8 * 10).collect()).unwrap();
        let p = dir.path().join("a.png");
        write_png(&p, &img).unwrap();
        assert_eq!(read_image(&p).unwrap(), img);
        let gray = Image::new(2, 2, 1, vec![0, 64, 128, 255]).unwrap();
        write_png(&p, &gray).unwrap();
        assert_eq!(read_image(&p).unwrap(), gray);

        let boxes = vec![QuadBox::from_rect(1.0, 2.0, 30.0, 12.0).unwrap()];
        let t = dir.path().join("a.txt");
        write_boxes(&t, &boxes).unwrap();
        assert_eq!(read_boxes(&t).unwrap(), boxes);
        assert!(matches!(read_image(&dir.path().join("missing.png")), Err(AppError::Data(_))));
    }
}
