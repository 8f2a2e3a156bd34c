//! Sliding-window fragmentation of large rasters into fixed-size tiles.

mod dataset;
mod grid;
mod split;

pub use dataset::{
    decode_image_tile, decode_label_tile, image_tile_path, label_tile_path, Dataset, GridFile,
    ImageTile, PaletteEntry, TileRecord, GRID_FILE, IMAGES_DIR, LABELS_DIR, MANIFEST_FILE,
};
pub(crate) use dataset::{encode_jpeg, encode_png_gray};
pub use grid::{data_gain, plan_grid, TileGrid};
pub use split::{band_checkpoint, split_raster, SplitOptions};
