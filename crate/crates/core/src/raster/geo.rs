use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine pixel-to-map transform in the usual six-coefficient form.
///
/// `map_x = origin_x + px * pixel_size_x + py * skew_x`
/// `map_y = origin_y + px * skew_y + py * pixel_size_y`
///
/// `pixel_size_y` is normally negative for north-up rasters. `crs_id` is carried
/// through untouched; no reprojection ever happens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
    #[serde(default)]
    pub skew_x: f64,
    #[serde(default)]
    pub skew_y: f64,
    #[serde(default)]
    pub crs_id: String,
}

impl GeoTransform {
    pub fn north_up(origin_x: f64, origin_y: f64, gsd: f64, crs_id: impl Into<String>) -> Self {
        GeoTransform {
            origin_x,
            origin_y,
            pixel_size_x: gsd,
            pixel_size_y: -gsd,
            skew_x: 0.0,
            skew_y: 0.0,
            crs_id: crs_id.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = [
            self.origin_x,
            self.origin_y,
            self.pixel_size_x,
            self.pixel_size_y,
            self.skew_x,
            self.skew_y,
        ];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("geotransform has non-finite coefficients".into()));
        }
        if self.pixel_size_x <= 0.0 || self.pixel_size_y == 0.0 {
            return Err(Error::Input(format!(
                "invalid pixel size ({}, {})",
                self.pixel_size_x, self.pixel_size_y
            )));
        }
        Ok(())
    }

    pub fn is_skew_free(&self) -> bool {
        self.skew_x == 0.0 && self.skew_y == 0.0
    }

    pub fn pixel_to_map(&self, px: f64, py: f64) -> (f64, f64) {
        (
            self.origin_x + px * self.pixel_size_x + py * self.skew_x,
            self.origin_y + px * self.skew_y + py * self.pixel_size_y,
        )
    }

    pub fn map_to_pixel(&self, mx: f64, my: f64) -> (f64, f64) {
        let dx = mx - self.origin_x;
        let dy = my - self.origin_y;
        if self.is_skew_free() {
            return (dx / self.pixel_size_x, dy / self.pixel_size_y);
        }
        let det = self.pixel_size_x * self.pixel_size_y - self.skew_x * self.skew_y;
        (
            (dx * self.pixel_size_y - dy * self.skew_x) / det,
            (dy * self.pixel_size_x - dx * self.skew_y) / det,
        )
    }

    /// Transform of a sub-window whose top-left pixel sits at `(x, y)` in this raster.
    pub fn translated(&self, x: u32, y: u32) -> Self {
        let (ox, oy) = self.pixel_to_map(x as f64, y as f64);
        GeoTransform {
            origin_x: ox,
            origin_y: oy,
            ..self.clone()
        }
    }

    /// Transform after resampling an extent of `from` pixels to `to` pixels per axis.
    pub fn rescaled(&self, from: (u32, u32), to: (u32, u32)) -> Self {
        let fx = from.0 as f64 / to.0 as f64;
        let fy = from.1 as f64 / to.1 as f64;
        GeoTransform {
            pixel_size_x: self.pixel_size_x * fx,
            pixel_size_y: self.pixel_size_y * fy,
            skew_x: self.skew_x * fy,
            skew_y: self.skew_y * fx,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn affine_examples() {
        let g = GeoTransform::north_up(0.0, 0.0, 0.08, "");
        assert_eq!(g.pixel_to_map(100.0, 50.0), (8.0, -4.0));
        assert_eq!(g.pixel_to_map(0.0, 0.0), (0.0, 0.0));

        let g = GeoTransform::north_up(120.5, 16.4, 0.022, "EPSG:4326");
        let (x, y) = g.pixel_to_map(10.0, 10.0);
        assert!((x - 120.72).abs() < 1e-9);
        assert!((y - 16.18).abs() < 1e-9);
    }

    #[test]
    fn rejects_degenerate_pixel_size() {
        let mut g = GeoTransform::north_up(0.0, 0.0, 1.0, "");
        g.pixel_size_y = 0.0;
        assert!(g.validate().is_err());
        g.pixel_size_y = 1.0;
        g.pixel_size_x = -1.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn translation_matches_source_pixel() {
        let g = GeoTransform::north_up(500.0, 900.0, 0.08, "x");
        let t = g.translated(256, 512);
        assert_eq!(t.pixel_to_map(0.0, 0.0), g.pixel_to_map(256.0, 512.0));
    }

    proptest! {
        #[test]
        fn round_trip_skew_free(
            ox in -1e6f64..1e6, oy in -1e6f64..1e6,
            sx in 0.001f64..10.0, sy in 0.001f64..10.0, flip in any::<bool>(),
            px in -5e4f64..5e4, py in -5e4f64..5e4
        ) {
            let g = GeoTransform {
                origin_x: ox, origin_y: oy,
                pixel_size_x: sx, pixel_size_y: if flip { -sy } else { sy },
                skew_x: 0.0, skew_y: 0.0, crs_id: String::new(),
            };
            let (qx, qy) = g.pixel_to_map(px, py);
            let (rx, ry) = g.map_to_pixel(qx, qy);
            let (mx, my) = g.pixel_to_map(rx, ry);
            prop_assert!((mx - qx).abs() <= 1e-9);
            prop_assert!((my - qy).abs() <= 1e-9);
        }
    }
}
