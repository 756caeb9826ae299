//! JSON dataset manifests.
//!
//! A manifest is a JSON array. Each entry is either a file sample
//!
//! ```json
//! {"left": "l.png", "right": "r.png", "gt": "gt.pfm",
//!  "fg_mask": "fg.png", "noc_mask": "noc.png"}
//! ```
//!
//! with paths relative to the manifest's directory (`gt` ending in `.pfm`
//! is read as PFM, anything else as a 16-bit KITTI PNG; the masks are
//! optional 8-bit PNGs), or a synthetic sample
//!
//! ```json
//! {"synthetic": {"width": 128, "height": 64, "seed": 7,
//!                "field": {"kind": "constant", "disparity": 5}}}
//! ```
//!
//! Samples keep file order. File existence is checked when the manifest is
//! loaded; decoding happens in [`SampleRef::load`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::disparity::DisparityMap;
use crate::error::{io_err, DataError, Result};
use crate::pfm::{read_pfm, write_pfm};
use crate::png_io::{read_kitti_disp, read_mask, read_rgb, write_mask, write_rgb};
use crate::stereogram::{StereoSample, SyntheticSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub left: PathBuf,
    pub right: PathBuf,
    pub gt: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fg_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noc_mask: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticEntry {
    synthetic: SyntheticSpec,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ManifestEntry {
    Files(FileEntry),
    Synthetic(SyntheticSpec),
}

impl Serialize for ManifestEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ManifestEntry::Files(f) => f.serialize(s),
            ManifestEntry::Synthetic(spec) => SyntheticEntry { synthetic: spec.clone() }.serialize(s),
        }
    }
}

/// Lazily loadable sample; file paths are already resolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SampleRef {
    Files(FileEntry),
    Synthetic(SyntheticSpec),
}

impl SampleRef {
    pub fn load(&self) -> Result<StereoSample> {
        match self {
            SampleRef::Synthetic(spec) => spec.generate(),
            SampleRef::Files(f) => {
                let left = read_rgb(&f.left)?;
                let right = read_rgb(&f.right)?;
                let gt = read_disparity(&f.gt)?;
                let (w, h) = (gt.width(), gt.height());
                for (img, p) in [(&left, &f.left), (&right, &f.right)] {
                    if img.shape()[1..] != [h, w] {
                        return Err(DataError::Parameter(format!(
                            "{}: image is {}x{}, ground truth is {w}x{h}",
                            p.display(),
                            img.shape()[2],
                            img.shape()[1]
                        )));
                    }
                }
                let mask = |p: &Option<PathBuf>| -> Result<Option<Vec<bool>>> {
                    let Some(p) = p else { return Ok(None) };
                    let (mw, mh, m) = read_mask(p)?;
                    if (mw, mh) != (w, h) {
                        return Err(DataError::Parameter(format!("{}: mask is {mw}x{mh}, expected {w}x{h}", p.display())));
                    }
                    Ok(Some(m))
                };
                Ok(StereoSample { left, right, fg_mask: mask(&f.fg_mask)?, noc_mask: mask(&f.noc_mask)?, gt })
            }
        }
    }
}

/// Reads `.pfm` as PFM, any other extension as a KITTI PNG.
pub fn read_disparity(path: &Path) -> Result<DisparityMap> {
    let is_pfm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    if is_pfm {
        read_pfm(path)
    } else {
        read_kitti_disp(path)
    }
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<SampleRef>> {
    let entries: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| DataError::Manifest(format!("expected a JSON array: {e}")))?;
    let mut out = Vec::with_capacity(entries.len());
    for (index, value) in entries.into_iter().enumerate() {
        let is_synthetic = value.get("synthetic").is_some();
        if is_synthetic {
            let e: SyntheticEntry =
                serde_json::from_value(value).map_err(|e| DataError::Manifest(format!("sample {index}: {e}")))?;
            out.push(SampleRef::Synthetic(e.synthetic));
            continue;
        }
        let mut f: FileEntry =
            serde_json::from_value(value).map_err(|e| DataError::Manifest(format!("sample {index}: {e}")))?;
        for p in [Some(&mut f.left), Some(&mut f.right), Some(&mut f.gt), f.fg_mask.as_mut(), f.noc_mask.as_mut()]
            .into_iter()
            .flatten()
        {
            *p = base.join(&*p);
            if !p.is_file() {
                return Err(DataError::MissingFile { index, path: p.clone() });
            }
        }
        out.push(SampleRef::Files(f));
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<SampleRef>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(entries).expect("manifest serialises");
    fs::write(path, text).map_err(io_err(path))
}

/// Writes a sample as `{stem}_left.png`, `{stem}_right.png`, `{stem}_gt.pfm`
/// and any masks into `dir`, returning an entry relative to `dir`.
pub fn write_sample(sample: &StereoSample, dir: &Path, stem: &str) -> Result<FileEntry> {
    let name = |suffix: &str| PathBuf::from(format!("{stem}_{suffix}"));
    let entry = FileEntry {
        left: name("left.png"),
        right: name("right.png"),
        gt: name("gt.pfm"),
        fg_mask: sample.fg_mask.as_ref().map(|_| name("fg.png")),
        noc_mask: sample.noc_mask.as_ref().map(|_| name("noc.png")),
    };
    let (w, h) = (sample.width(), sample.height());
    write_rgb(&sample.left, &dir.join(&entry.left))?;
    write_rgb(&sample.right, &dir.join(&entry.right))?;
    write_pfm(&sample.gt, &dir.join(&entry.gt))?;
    if let (Some(m), Some(p)) = (&sample.fg_mask, &entry.fg_mask) {
        write_mask(w, h, m, &dir.join(p))?;
    }
    if let (Some(m), Some(p)) = (&sample.noc_mask, &entry.noc_mask) {
        write_mask(w, h, m, &dir.join(p))?;
    }
    Ok(entry)
}
