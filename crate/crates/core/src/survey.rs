//! Survey planning from feature size: critical GSD intervals, equal-pixel-budget
//! survey extents and a data-shortage check with remedial actions.

use num::{BigInt, BigRational, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tiling::plan_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeHint {
    /// Length of the short side of a roughly rectangular feature.
    RectangularShortSide,
    CircularDiameter,
    /// Mean length of the segments outlining an irregular feature.
    IrregularMeanSegment,
}

/// Sizes in metres of a feature's smallest visible attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvaMeasurements {
    pub feature: String,
    pub shape: ShapeHint,
    pub measurements: Vec<f64>,
}

impl SvaMeasurements {
    pub fn new(feature: impl Into<String>, shape: ShapeHint, measurements: Vec<f64>) -> Self {
        SvaMeasurements {
            feature: feature.into(),
            shape,
            measurements,
        }
    }

    /// One measurement per outline, each the mean of that outline's segment lengths.
    pub fn irregular(feature: impl Into<String>, outlines: &[Vec<f64>]) -> Result<Self> {
        let measurements = outlines
            .iter()
            .map(|segs| {
                if segs.is_empty() {
                    Err(Error::Input("outline without segments".into()))
                } else {
                    Ok(segs.iter().sum::<f64>() / segs.len() as f64)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self::new(feature, ShapeHint::IrregularMeanSegment, measurements))
    }
}

/// Open interval `(lower, upper)` of GSDs in m/px.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CordingInterval {
    pub lower: f64,
    pub upper: f64,
}

impl CordingInterval {
    pub fn contains(&self, gsd: f64) -> bool {
        self.lower < gsd && gsd < self.upper
    }
}

/// GSD interval in which segmentation quality for the feature is expected to
/// break down: a third of the smallest and of the largest SVA measurement.
pub fn cording_interval(m: &SvaMeasurements) -> Result<CordingInterval> {
    if m.measurements.is_empty() {
        return Err(Error::Input(format!("no SVA measurements for `{}`", m.feature)));
    }
    if let Some(bad) = m.measurements.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Input(format!(
            "SVA measurement {bad} for `{}` is not a positive length",
            m.feature
        )));
    }
    let lo = m.measurements.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.measurements.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CordingInterval {
        lower: lo / 3.0,
        upper: hi / 3.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CordingFixture {
    pub feature: String,
    pub sva: SvaMeasurements,
    pub interval: CordingInterval,
}

/// Published worked examples: SVA ranges for six features.
pub fn cording_fixtures() -> Vec<CordingFixture> {
    use ShapeHint::*;
    [
        ("chayote leaves", IrregularMeanSegment, 0.15, 0.35),
        ("dirt road tire tracks", RectangularShortSide, 0.4, 0.85),
        ("asphalt roads", RectangularShortSide, 3.0, 8.0),
        ("cows", RectangularShortSide, 0.517, 0.69),
        ("sheep", RectangularShortSide, 0.44, 0.66),
        ("vitis vinifera leaves", IrregularMeanSegment, 0.05, 0.15),
    ]
    .into_iter()
    .map(|(name, shape, lo, hi)| {
        let sva = SvaMeasurements::new(name, shape, vec![lo, hi]);
        let interval = cording_interval(&sva).expect("fixture measurements are valid");
        CordingFixture {
            feature: name.to_string(),
            sva,
            interval,
        }
    })
    .collect()
}

/// Reference flight: GSD, altitude, imaged area and effort, used to scale
/// estimates for other GSDs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub base_gsd: f64,
    pub base_altitude_m: f64,
    pub base_area_km2: f64,
    pub base_workdays: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            base_gsd: 0.022,
            base_altitude_m: 75.08,
            base_area_km2: 3.06,
            base_workdays: 0.30,
        }
    }
}

/// Area covered at `gsd` with the same number of pixels as the calibration flight.
pub fn equal_pixel_area(gsd: f64, cal: &Calibration) -> f64 {
    cal.base_area_km2 * (gsd / cal.base_gsd).powi(2)
}

/// [`equal_pixel_area`] in exact rational arithmetic.
pub fn equal_pixel_area_exact(gsd: &BigRational, base_gsd: &BigRational, base_area: &BigRational) -> BigRational {
    let r = gsd / base_gsd;
    base_area * &r * &r
}

/// Exact rational value of a decimal string such as `"0.022"`.
pub fn decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::Input(format!("`{s}` is not a decimal number"));
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = BigInt::from(10u32).pow(frac.len() as u32);
    let v = BigRational::new(digits, scale);
    if int.starts_with('-') && !v.is_negative() {
        return Ok(-v);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShortageAction {
    LargerArea,
    DecreaseGsd,
    SmallerTiles,
    Satellite,
    None,
}

impl ShortageAction {
    pub fn key(self) -> &'static str {
        match self {
            ShortageAction::LargerArea => "larger-area",
            ShortageAction::DecreaseGsd => "decrease-gsd",
            ShortageAction::SmallerTiles => "smaller-tiles",
            ShortageAction::Satellite => "satellite",
            ShortageAction::None => "none",
        }
    }

    pub fn trade_off(self) -> &'static str {
        match self {
            ShortageAction::LargerArea => {
                "longer survey; enough samples at the intended GSD"
            }
            ShortageAction::DecreaseGsd => {
                "longer survey (fly lower or use a finer sensor); enough samples, possibly \
                 with needless detail, and the imagery can later be downscaled"
            }
            ShortageAction::SmallerTiles => {
                "survey unchanged; more samples, but smaller tiles can hurt the model"
            }
            ShortageAction::Satellite => {
                "no flight needed; very-high-resolution products may suffice, but clouds \
                 and noise make results less predictable"
            }
            ShortageAction::None => "survey unchanged; a small dataset risks overfitting",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOption {
    pub action: ShortageAction,
    pub key: String,
    pub trade_off: String,
}

/// Remedies for too few training tiles, most effective first.
pub fn action_menu() -> Vec<ActionOption> {
    [
        ShortageAction::LargerArea,
        ShortageAction::DecreaseGsd,
        ShortageAction::SmallerTiles,
        ShortageAction::Satellite,
        ShortageAction::None,
    ]
    .into_iter()
    .map(|a| ActionOption {
        action: a,
        key: a.key().to_string(),
        trade_off: a.trade_off().to_string(),
    })
    .collect()
}

pub const LEGAL_ALTITUDE_M: f64 = 120.0;
pub const MAX_ALTITUDE_M: f64 = 6000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRequest {
    pub area_km2: f64,
    pub gsd: f64,
    pub tile: u32,
    pub stride: f64,
    pub min_train_tiles: usize,
    #[serde(default)]
    pub calibration: Calibration,
}

/// Contents of `plan.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPlan {
    pub target_gsd: f64,
    pub area_km2: f64,
    pub pixels: f64,
    /// Side in pixels of a square mosaic with that many pixels.
    pub extent_px: u32,
    pub estimated_tiles: usize,
    pub altitude_m: f64,
    /// Approximate: effort is assumed to scale with area and inversely with altitude.
    pub duration_workdays: f64,
    /// Area imaged at `target_gsd` with the calibration flight's pixel count.
    pub equal_pixel_area_km2: f64,
    pub min_train_tiles: usize,
    pub shortage: bool,
    pub actions: Vec<ActionOption>,
    pub warnings: Vec<String>,
}

pub fn plan_survey(req: &SurveyRequest) -> Result<SurveyPlan> {
    let cal = &req.calibration;
    for (name, v) in [
        ("area", req.area_km2),
        ("gsd", req.gsd),
        ("stride", req.stride),
        ("calibration gsd", cal.base_gsd),
        ("calibration altitude", cal.base_altitude_m),
        ("calibration area", cal.base_area_km2),
        ("calibration workdays", cal.base_workdays),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Input(format!("{name} must be positive, got {v}")));
        }
    }
    if req.tile == 0 || req.stride > 1.0 {
        return Err(Error::Input(format!(
            "tile {} with stride {} is not a valid layout",
            req.tile, req.stride
        )));
    }
    let pixels = req.area_km2 * 1e6 / (req.gsd * req.gsd);
    let extent = pixels.sqrt().round().min(u32::MAX as f64) as u32;
    let estimated_tiles = if extent >= req.tile {
        plan_grid(extent, extent, req.tile, req.tile, req.stride)?.len()
    } else {
        0
    };
    let altitude = cal.base_altitude_m * req.gsd / cal.base_gsd;
    let duration =
        cal.base_workdays * (req.area_km2 / cal.base_area_km2) * (cal.base_altitude_m / altitude);
    let mut warnings = Vec::new();
    if altitude > MAX_ALTITUDE_M {
        warnings.push(format!(
            "altitude {altitude:.0} m exceeds the {MAX_ALTITUDE_M:.0} m ceiling; use a coarser sensor"
        ));
    } else if altitude > LEGAL_ALTITUDE_M {
        warnings.push(format!(
            "altitude {altitude:.0} m exceeds the usual {LEGAL_ALTITUDE_M:.0} m legal limit; a lower-resolution sensor is needed instead"
        ));
    }
    if extent < req.tile {
        warnings.push(format!(
            "the area spans {extent} px, less than one {} px tile",
            req.tile
        ));
    }
    let shortage = estimated_tiles < req.min_train_tiles;
    Ok(SurveyPlan {
        target_gsd: req.gsd,
        area_km2: req.area_km2,
        pixels,
        extent_px: extent,
        estimated_tiles,
        altitude_m: altitude,
        duration_workdays: duration,
        equal_pixel_area_km2: equal_pixel_area(req.gsd, cal),
        min_train_tiles: req.min_train_tiles,
        shortage,
        actions: if shortage { action_menu() } else { Vec::new() },
        warnings,
    })
}

pub const DEFAULT_SUFFICIENCY_FRACTION: f64 = 0.30;

/// Minimum train-set size as a fraction of a reference train set, rounded up.
pub fn min_train_tiles(reference_tiles: usize, fraction: f64) -> usize {
    (reference_tiles as f64 * fraction - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sufficiency {
    pub train_tiles: usize,
    pub threshold: usize,
    pub pass: bool,
    pub actions: Vec<ActionOption>,
}

pub fn sufficiency_check(train_tiles: usize, threshold: usize) -> Sufficiency {
    let pass = train_tiles >= threshold;
    Sufficiency {
        train_tiles,
        threshold,
        pass,
        actions: if pass { Vec::new() } else { action_menu() },
    }
}
