//! Procedural orthomosaics for tests and benchmarks.
//!
//! Labels form a jittered Voronoi partition: every `cell`-sized block owns one
//! seed point with a random class, and each pixel takes the class of the nearest
//! seed. Pixels are computed from their coordinates alone, so any window of any
//! size is reproducible without materializing the scene.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{GeoTransform, RasterInfo, RasterSource, SampleType, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub class_count: u32,
    pub seed: u64,
    /// Mean region diameter in pixels.
    #[serde(default = "default_cell")]
    pub cell: u32,
    #[serde(default = "default_gsd")]
    pub gsd: f64,
}

fn default_cell() -> u32 {
    48
}

fn default_gsd() -> f64 {
    0.022
}

impl SceneSpec {
    pub fn new(width: u32, height: u32, class_count: u32, seed: u64) -> Self {
        SceneSpec {
            width,
            height,
            class_count,
            seed,
            cell: default_cell(),
            gsd: default_gsd(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Input("scene must be non-empty".into()));
        }
        if !(1..=256).contains(&self.class_count) {
            return Err(Error::Input(format!("class count {} outside 1..=256", self.class_count)));
        }
        if self.cell == 0 || self.gsd.is_nan() || self.gsd <= 0.0 {
            return Err(Error::Input("scene cell and gsd must be positive".into()));
        }
        Ok(())
    }

    pub fn geo(&self) -> GeoTransform {
        GeoTransform::north_up(500_000.0, 1_200_000.0, self.gsd, "local")
    }

    pub fn labels(&self) -> Result<SceneLabels> {
        self.validate()?;
        Ok(SceneLabels {
            spec: self.clone(),
            info: RasterInfo::new(self.width, self.height, 1, SampleType::U8).with_geo(Some(self.geo())),
        })
    }

    pub fn image(&self) -> Result<SceneImage> {
        self.validate()?;
        Ok(SceneImage {
            labels: self.labels()?,
            info: RasterInfo::new(self.width, self.height, 3, SampleType::U8).with_geo(Some(self.geo())),
        })
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cell_hash(seed: u64, cx: i64, cy: i64) -> u64 {
    mix(seed ^ mix((cx as u64) ^ mix(cy as u64).rotate_left(17)))
}

#[derive(Clone, Copy)]
struct Site {
    x: i64,
    y: i64,
    class: u8,
}

pub struct SceneLabels {
    spec: SceneSpec,
    info: RasterInfo,
}

impl SceneLabels {
    fn site(&self, cx: i64, cy: i64) -> Site {
        let c = self.spec.cell as i64;
        let h = cell_hash(self.spec.seed, cx, cy);
        Site {
            x: cx * c + (h % c as u64) as i64,
            y: cy * c + ((h >> 20) % c as u64) as i64,
            class: ((h >> 40) % self.spec.class_count as u64) as u8,
        }
    }

    /// Fill one row span; `sites` holds the 3 candidate rows of seed points for
    /// cell columns `cx0 - 1 ..= cx1 + 1`.
    fn row(&self, y: u32, x0: u32, out: &mut [u8]) {
        let c = self.spec.cell as i64;
        let cy = y as i64 / c;
        let cx0 = x0 as i64 / c;
        let cx1 = (x0 as i64 + out.len() as i64 - 1) / c;
        let ncols = (cx1 - cx0 + 3) as usize;
        let sites: Vec<[Site; 3]> = (0..ncols as i64)
            .map(|i| {
                let cx = cx0 - 1 + i;
                [self.site(cx, cy - 1), self.site(cx, cy), self.site(cx, cy + 1)]
            })
            .collect();
        let yy = y as i64;
        for (k, v) in out.iter_mut().enumerate() {
            let x = x0 as i64 + k as i64;
            let col = (x / c - cx0) as usize;
            let mut best = (i64::MAX, 0u8);
            for s in sites[col..col + 3].iter().flatten() {
                let d = (s.x - x).pow(2) + (s.y - yy).pow(2);
                if d < best.0 {
                    best = (d, s.class);
                }
            }
            *v = best.1;
        }
    }
}

impl RasterSource for SceneLabels {
    fn info(&self) -> &RasterInfo {
        &self.info
    }

    fn copy_window(&self, win: Window, out: &mut [u8]) -> Result<()> {
        for (r, dst) in out.chunks_exact_mut(win.w as usize).enumerate() {
            self.row(win.y + r as u32, win.x, dst);
        }
        Ok(())
    }
}

const BASE_COLORS: [[u8; 3]; 8] = [
    [70, 110, 60],
    [150, 130, 100],
    [40, 140, 70],
    [120, 120, 125],
    [90, 80, 60],
    [170, 160, 90],
    [60, 70, 110],
    [200, 190, 180],
];

/// RGB rendering of [`SceneLabels`]: a per-class base color with pixel noise.
pub struct SceneImage {
    labels: SceneLabels,
    info: RasterInfo,
}

impl RasterSource for SceneImage {
    fn info(&self) -> &RasterInfo {
        &self.info
    }

    fn copy_window(&self, win: Window, out: &mut [u8]) -> Result<()> {
        let w = win.w as usize;
        let mut ids = vec![0u8; w];
        let seed = self.labels.spec.seed ^ 0xA5A5_5A5A;
        for (r, dst) in out.chunks_exact_mut(w * 3).enumerate() {
            let y = win.y + r as u32;
            self.labels.row(y, win.x, &mut ids);
            for (k, px) in dst.chunks_exact_mut(3).enumerate() {
                let x = win.x + k as u32;
                let base = BASE_COLORS[ids[k] as usize % BASE_COLORS.len()];
                let n = mix(seed ^ ((y as u64) << 32 | x as u64));
                for (b, v) in px.iter_mut().enumerate() {
                    let jitter = ((n >> (b * 8)) & 0x1F) as i32 - 16;
                    *v = (base[b] as i32 + jitter).clamp(0, 255) as u8;
                }
            }
        }
        Ok(())
    }
}
