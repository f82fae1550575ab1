//! Dataset containers, on-disk formats and test substrates.

mod featurize;
mod features;
mod images;
mod manifest;
mod synthetic;

pub use featurize::{fallback_featurize, RandomProjection};
pub use features::{
    load_features, write_features, FeatureTable, FEATURE_HEADER_LEN, FEATURE_MAGIC,
    FEATURE_VERSION,
};
pub use images::{
    import_pnm_dir, load_images, write_images, ImageRef, ImageTable, IMAGE_HEADER_LEN,
    IMAGE_MAGIC, IMAGE_VERSION, LUMA,
};
pub use manifest::{load_dataset, sha256_file, Dataset, DatasetManifest};
pub use synthetic::{gen_synthetic_mixture, gen_textured_images, mixture_centers};
