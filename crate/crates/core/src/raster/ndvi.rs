use rayon::prelude::*;

use super::{MemRaster, RasterInfo, RasterSource, SampleType, Window};
use crate::error::{Error, Result};

/// Written where the mask excludes a pixel or where NIR + red is zero.
pub const NDVI_NODATA: f32 = -9999.0;

/// NDVI restricted to pixels the class mask assigns to `target_class`.
///
/// `nir` and `red` are read as their first band; `mask` must be a single-band
/// uint8 class-id raster. The output carries the mask's geotransform and records
/// [`NDVI_NODATA`] as its no-data value.
pub fn masked_ndvi(
    nir: &dyn RasterSource,
    red: &dyn RasterSource,
    mask: &dyn RasterSource,
    target_class: u8,
) -> Result<MemRaster> {
    let (ni, ri, mi) = (nir.info(), red.info(), mask.info());
    if !ni.same_dims(ri) || !ni.same_dims(mi) {
        return Err(Error::Shape(format!(
            "NDVI inputs differ in size: nir {}x{}, red {}x{}, mask {}x{}",
            ni.width, ni.height, ri.width, ri.height, mi.width, mi.height
        )));
    }
    if mi.bands != 1 || mi.sample_type != SampleType::U8 {
        return Err(Error::Shape("NDVI mask must be a single-band uint8 raster".into()));
    }
    let (w, h) = (ni.width, ni.height);
    let rows: Vec<u32> = (0..h).collect();
    let out: Vec<Vec<f32>> = rows
        .par_iter()
        .map(|&y| -> Result<Vec<f32>> {
            let win = Window::full(w, 1).offset(0, y);
            let n = nir.read_window(win)?;
            let r = red.read_window(win)?;
            let m = mask.read_window_u8(win)?;
            let (nb, rb) = (ni.bands as usize, ri.bands as usize);
            Ok((0..w as usize)
                .map(|x| {
                    if m[x] != target_class {
                        return NDVI_NODATA;
                    }
                    ndvi(n.samples.get_f64(x * nb), r.samples.get_f64(x * rb))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f32> = out.into_iter().flatten().collect();
    let raster = MemRaster::from_f32(w, h, 1, &flat)?;
    let info = RasterInfo {
        geo: mi.geo.clone().or_else(|| ni.geo.clone()),
        nodata: Some(NDVI_NODATA as f64),
        ..raster.info().clone()
    };
    MemRaster::new(info, raster.into_bytes())
}

fn ndvi(nir: f64, red: f64) -> f32 {
    let sum = nir + red;
    if sum == 0.0 || !sum.is_finite() {
        return NDVI_NODATA;
    }
    ((nir - red) / sum).clamp(-1.0, 1.0) as f32
}
