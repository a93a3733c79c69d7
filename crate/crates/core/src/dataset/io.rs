//! Dataset directories on disk.
//!
//! A VOC directory holds `<id>.xml` files; a DarkNet directory holds `<id>.txt`
//! files plus `sizes.json` (`{"<id>": [width, height]}`) and `classes.txt`.
//! Either may hold `<id>.png` / `<id>.jpg` rasters beside the labels.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use super::{
    parse_darknet, parse_ground_truth, parse_submission, parse_voc, write_darknet, write_voc,
    Dataset, DistressClass, Predictions,
};
use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "PNG"];
const SIZES_FILE: &str = "sizes.json";
const CLASSES_FILE: &str = "classes.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirFormat {
    Voc,
    Darknet,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn load_pixels(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes a raster; the format follows the file extension (PNG or JPEG).
pub fn save_pixels(pixels: &RgbImage, path: &Path) -> Result<()> {
    pixels.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn find_image_file(dir: &Path, stem: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

/// Files in `dir` with the given extension, sorted by name, as (stem, path).
fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_voc_dir(dir: &Path, with_pixels: bool) -> Result<Dataset> {
    let mut records = Vec::new();
    for (stem, path) in files_with_extension(dir, "xml")? {
        let mut record = parse_voc(&read_to_string(&path)?, &stem)?;
        if with_pixels {
            if let Some(img) = find_image_file(dir, &stem) {
                record.pixels = Some(load_pixels(&img)?);
                record.validate()?;
            }
        }
        records.push(record);
    }
    Dataset::new(records)
}

pub fn load_darknet_dir(dir: &Path, with_pixels: bool) -> Result<Dataset> {
    let sizes_path = dir.join(SIZES_FILE);
    let sizes: BTreeMap<String, (u32, u32)> = if sizes_path.is_file() {
        serde_json::from_str(&read_to_string(&sizes_path)?).map_err(|e| Error::Parse {
            source_name: sizes_path.display().to_string(),
            line: Some(e.line()),
            message: e.to_string(),
        })?
    } else {
        BTreeMap::new()
    };

    let mut records = Vec::new();
    for (stem, path) in files_with_extension(dir, "txt")? {
        if stem == "classes" {
            continue;
        }
        let image_path = find_image_file(dir, &stem);
        let (width, height) = match (&image_path, sizes.get(&stem)) {
            (_, Some(&wh)) => wh,
            (Some(img), None) => image::image_dimensions(img).map_err(|source| Error::Image {
                path: img.clone(),
                source,
            })?,
            (None, None) => {
                return Err(Error::validation(format!(
                    "no image or {SIZES_FILE} entry gives the size of {stem:?}"
                )))
            }
        };
        let mut record = parse_darknet(&read_to_string(&path)?, width, height, &stem)?;
        if with_pixels {
            if let Some(img) = image_path {
                record.pixels = Some(load_pixels(&img)?);
                record.validate()?;
            }
        }
        records.push(record);
    }
    Dataset::new(records)
}

/// Loads a directory, choosing VOC when any `.xml` file is present.
pub fn load_dataset_dir(dir: &Path, with_pixels: bool) -> Result<(Dataset, DirFormat)> {
    if !files_with_extension(dir, "xml")?.is_empty() {
        Ok((load_voc_dir(dir, with_pixels)?, DirFormat::Voc))
    } else {
        Ok((load_darknet_dir(dir, with_pixels)?, DirFormat::Darknet))
    }
}

/// Loads annotations from a ground-truth JSON file or a VOC/DarkNet directory.
pub fn load_annotations(path: &Path) -> Result<Dataset> {
    if path.is_dir() {
        Ok(load_dataset_dir(path, false)?.0)
    } else {
        parse_ground_truth(&read_to_string(path)?)
    }
}

/// Reads a submission JSON file.
pub fn load_submission(path: &Path) -> Result<Predictions> {
    parse_submission(&read_to_string(path)?)
}

fn write_rasters(dataset: &Dataset, dir: &Path) -> Result<()> {
    for r in dataset {
        if let Some(px) = &r.pixels {
            save_pixels(px, &dir.join(format!("{}.png", r.image_id)))?;
        }
    }
    Ok(())
}

pub fn write_voc_dir(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for r in dataset {
        write_string(&dir.join(format!("{}.xml", r.image_id)), &write_voc(r))?;
    }
    write_rasters(dataset, dir)
}

pub fn write_darknet_dir(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut sizes = BTreeMap::new();
    for r in dataset {
        write_string(&dir.join(format!("{}.txt", r.image_id)), &write_darknet(r))?;
        sizes.insert(r.image_id.as_str(), (r.width, r.height));
    }
    let sizes_json = serde_json::to_string_pretty(&sizes).expect("sizes map serializes");
    write_string(&dir.join(SIZES_FILE), &sizes_json)?;
    let names: String = DistressClass::ALL
        .iter()
        .map(|c| format!("{}\n", c.name()))
        .collect();
    write_string(&dir.join(CLASSES_FILE), &names)?;
    write_rasters(dataset, dir)
}
