//! Disparity maps and their file formats (PFM, 16-bit KITTI PNG), RGB and
//! mask PNG helpers, JSON dataset manifests and a random-dot stereogram
//! generator with exact ground truth.

pub mod disparity;
pub mod error;
pub mod image;
pub mod manifest;
pub mod pfm;
pub mod png_io;
pub mod stereogram;

pub use disparity::DisparityMap;
pub use error::{DataError, Result};
pub use image::{normalize, stack, CHANNEL_MEAN, CHANNEL_STD};
pub use manifest::{load_manifest, parse_manifest, read_disparity, write_manifest, write_sample, FileEntry, ManifestEntry, SampleRef};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm, Endian};
pub use png_io::{read_kitti_disp, read_mask, read_rgb, write_kitti_disp, write_mask, write_rgb, write_rgb8};
pub use stereogram::{benchmark_specs, generate_stereogram, DisparityField, StereoSample, SyntheticSpec};
