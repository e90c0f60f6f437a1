//! Flood-extent verification: wet/dry rasters, majority filtering,
//! contingency scores and wet-pixel counts in fixed boxes.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esri::AsciiGrid;
use crate::grid::{GridSpec, HydraulicState};

/// Default mapping threshold, m. A pixel is wet when the depth exceeds it.
pub const WET_THRESHOLD: f64 = 0.05;

/// Regular pixel lattice: `ncols × nrows` square pixels from the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterGeometry {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
}

impl RasterGeometry {
    /// One pixel per model cell.
    pub fn from_grid(grid: &GridSpec) -> Self {
        RasterGeometry { ncols: grid.nx, nrows: grid.ny, xll: grid.x0, yll: grid.y0, cellsize: grid.dx }
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (self.xll + (col as f64 + 0.5) * self.cellsize, self.yll + (row as f64 + 0.5) * self.cellsize)
    }
}

/// Wet (`Some(true)`), dry (`Some(false)`) or masked (`None`) per pixel.
/// Rows count from the south edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFloodRaster {
    pub geometry: RasterGeometry,
    pub pixels: Vec<Option<bool>>,
}

impl BinaryFloodRaster {
    pub fn new(geometry: RasterGeometry, pixels: Vec<Option<bool>>) -> Result<Self> {
        if geometry.ncols == 0 || geometry.nrows == 0 || !(geometry.cellsize > 0.0) {
            return Err(Error::Config("raster dimensions must be positive".into()));
        }
        if pixels.len() != geometry.len() {
            return Err(Error::Shape(format!(
                "{} pixels for a {}x{} raster",
                pixels.len(),
                geometry.ncols,
                geometry.nrows
            )));
        }
        Ok(BinaryFloodRaster { geometry, pixels })
    }

    pub fn filled(geometry: RasterGeometry, wet: bool) -> Self {
        BinaryFloodRaster { geometry, pixels: vec![Some(wet); geometry.len()] }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> Option<bool> {
        self.pixels[row * self.geometry.ncols + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: Option<bool>) {
        let n = self.geometry.ncols;
        self.pixels[row * n + col] = v;
    }

    pub fn wet_total(&self) -> usize {
        self.pixels.iter().filter(|p| **p == Some(true)).count()
    }

    pub fn unmasked(&self) -> usize {
        self.pixels.iter().filter(|p| p.is_some()).count()
    }

    /// Masks every pixel that is wet in `mask` (e.g. permanent water).
    pub fn with_mask(&self, mask: &BinaryFloodRaster) -> Result<Self> {
        if mask.geometry != self.geometry {
            return Err(Error::GeometryMismatch);
        }
        let pixels =
            self.pixels.iter().zip(&mask.pixels).map(|(&p, &m)| if m == Some(true) { None } else { p }).collect();
        Ok(BinaryFloodRaster { geometry: self.geometry, pixels })
    }
}

/// Thresholds a depth field sampled at pixel centres (nearest model cell).
/// Pixels outside the model domain are masked.
pub fn rasterize_depth(
    depth: &[f64],
    grid: &GridSpec,
    target: &RasterGeometry,
    threshold: f64,
) -> Result<BinaryFloodRaster> {
    if depth.len() != grid.len() {
        return Err(Error::Shape("depth field does not match grid".into()));
    }
    if !(threshold > 0.0) {
        return Err(Error::Config(format!("wet threshold must be positive, got {threshold}")));
    }
    let mut pixels = Vec::with_capacity(target.len());
    for row in 0..target.nrows {
        for col in 0..target.ncols {
            let (x, y) = target.pixel_center(col, row);
            pixels.push(grid.locate(x, y).map(|(i, j)| depth[grid.idx(i, j)] > threshold));
        }
    }
    if pixels.iter().all(Option::is_none) {
        return Err(Error::GeometryMismatch);
    }
    BinaryFloodRaster::new(*target, pixels)
}

pub fn rasterize(
    state: &HydraulicState,
    grid: &GridSpec,
    target: &RasterGeometry,
    threshold: f64,
) -> Result<BinaryFloodRaster> {
    rasterize_depth(&state.h, grid, target, threshold)
}

/// One pass of a `size × size` majority vote. Masked pixels neither vote nor
/// change; neighbourhoods are truncated at the edges; ties keep the pixel.
pub fn majority_filter(raster: &BinaryFloodRaster, size: usize) -> Result<BinaryFloodRaster> {
    if size < 3 || size.is_multiple_of(2) {
        return Err(Error::Config(format!("majority filter size must be odd and >= 3, got {size}")));
    }
    let g = raster.geometry;
    let r = size / 2;
    let mut out = raster.clone();
    for row in 0..g.nrows {
        for col in 0..g.ncols {
            let Some(own) = raster.get(col, row) else { continue };
            let (mut wet, mut dry) = (0usize, 0usize);
            for rr in row.saturating_sub(r)..=(row + r).min(g.nrows - 1) {
                for cc in col.saturating_sub(r)..=(col + r).min(g.ncols - 1) {
                    match raster.get(cc, rr) {
                        Some(true) => wet += 1,
                        Some(false) => dry += 1,
                        None => {}
                    }
                }
            }
            let v = match wet.cmp(&dry) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => own,
            };
            out.set(col, row, Some(v));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ContingencyTable {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Scores `pred` against `reference`; pixels masked in either are skipped.
pub fn contingency(pred: &BinaryFloodRaster, reference: &BinaryFloodRaster) -> Result<ContingencyTable> {
    if pred.geometry != reference.geometry {
        return Err(Error::GeometryMismatch);
    }
    let mut t = ContingencyTable::default();
    for (p, r) in pred.pixels.iter().zip(&reference.pixels) {
        match (p, r) {
            (Some(true), Some(true)) => t.tp += 1,
            (Some(true), Some(false)) => t.fp += 1,
            (Some(false), Some(true)) => t.fn_ += 1,
            (Some(false), Some(false)) => t.tn += 1,
            _ => {}
        }
    }
    Ok(t)
}

/// Critical success index `TP / (TP + FP + FN)`.
pub fn csi(t: &ContingencyTable) -> Result<f64> {
    let d = t.tp + t.fp + t.fn_;
    if d == 0 {
        return Err(Error::UndefinedCsi);
    }
    Ok(t.tp as f64 / d as f64)
}

/// Inclusive pixel rectangle; rows count from the south edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualBox {
    pub id: String,
    pub col0: usize,
    pub row0: usize,
    pub col1: usize,
    pub row1: usize,
}

impl VirtualBox {
    pub fn new(id: impl Into<String>, col0: usize, row0: usize, col1: usize, row1: usize) -> Self {
        VirtualBox { id: id.into(), col0, row0, col1, row1 }
    }

    pub fn validate(&self, g: &RasterGeometry) -> Result<()> {
        if self.col0 > self.col1 || self.row0 > self.row1 || self.col1 >= g.ncols || self.row1 >= g.nrows {
            return Err(Error::Config(format!(
                "box '{}' is empty or outside the {}x{} raster",
                self.id, g.ncols, g.nrows
            )));
        }
        Ok(())
    }
}

pub fn wet_pixel_count(raster: &BinaryFloodRaster, b: &VirtualBox) -> Result<usize> {
    b.validate(&raster.geometry)?;
    let mut n = 0;
    for row in b.row0..=b.row1 {
        for col in b.col0..=b.col1 {
            if raster.get(col, row) == Some(true) {
                n += 1;
            }
        }
    }
    Ok(n)
}

/// Classification noise applied to synthetic reference maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapNoise {
    /// Probability that each unmasked pixel is flipped.
    pub p_flip: f64,
    pub filter_size: usize,
}

impl Default for MapNoise {
    fn default() -> Self {
        MapNoise { p_flip: 0.02, filter_size: 3 }
    }
}

/// Flips every unmasked pixel independently with probability `p`; returns the
/// flipped raster and the number of flips.
pub fn flip_pixels<R: Rng + ?Sized>(raster: &BinaryFloodRaster, p: f64, rng: &mut R) -> (BinaryFloodRaster, usize) {
    let mut out = raster.clone();
    let mut flips = 0;
    for v in out.pixels.iter_mut().flatten() {
        if rng.random::<f64>() < p {
            *v = !*v;
            flips += 1;
        }
    }
    (out, flips)
}

/// Reference maps from truth depth snapshots: threshold, add classification
/// noise, then majority-filter.
pub fn make_reference_maps<R: Rng + ?Sized>(
    snapshots: &[&[f64]],
    grid: &GridSpec,
    target: &RasterGeometry,
    threshold: f64,
    noise: MapNoise,
    rng: &mut R,
) -> Result<Vec<BinaryFloodRaster>> {
    if !(0.0..=1.0).contains(&noise.p_flip) {
        return Err(Error::Config(format!("flip probability {} outside [0, 1]", noise.p_flip)));
    }
    snapshots
        .iter()
        .map(|depth| {
            let clean = rasterize_depth(depth, grid, target, threshold)?;
            let (noisy, _) = flip_pixels(&clean, noise.p_flip, rng);
            majority_filter(&noisy, noise.filter_size)
        })
        .collect()
}

pub fn raster_to_ascii(r: &BinaryFloodRaster) -> AsciiGrid {
    let g = r.geometry;
    let mut a = AsciiGrid::new(g.ncols, g.nrows, g.xll, g.yll, g.cellsize);
    let nodata = a.nodata;
    for (d, p) in a.data.iter_mut().zip(&r.pixels) {
        *d = match p {
            Some(true) => 1.0,
            Some(false) => 0.0,
            None => nodata,
        };
    }
    a
}

pub fn raster_from_ascii(a: &AsciiGrid) -> Result<BinaryFloodRaster> {
    let geometry =
        RasterGeometry { ncols: a.ncols, nrows: a.nrows, xll: a.xllcorner, yll: a.yllcorner, cellsize: a.cellsize };
    let pixels = a
        .data
        .iter()
        .map(|&v| {
            if a.is_nodata(v) {
                Ok(None)
            } else if v == 1.0 {
                Ok(Some(true))
            } else if v == 0.0 {
                Ok(Some(false))
            } else {
                Err(Error::format(format!("flood raster value {v} is not 0, 1 or NODATA")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryFloodRaster::new(geometry, pixels)
}

pub fn write_raster(r: &BinaryFloodRaster, path: impl AsRef<Path>) -> Result<()> {
    raster_to_ascii(r).write(path)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<BinaryFloodRaster> {
    raster_from_ascii(&AsciiGrid::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn geom(ncols: usize, nrows: usize) -> RasterGeometry {
        RasterGeometry { ncols, nrows, xll: 0.0, yll: 0.0, cellsize: 1.0 }
    }

    fn from_wet(ncols: usize, nrows: usize, wet: &[(usize, usize)]) -> BinaryFloodRaster {
        let mut r = BinaryFloodRaster::filled(geom(ncols, nrows), false);
        for &(c, row) in wet {
            r.set(c, row, Some(true));
        }
        r
    }

    #[test]
    fn threshold_is_strict() {
        let grid = GridSpec::flat(4, 3, 1.0, 1.0).unwrap();
        let g = RasterGeometry::from_grid(&grid);
        let r = rasterize_depth(&[0.0; 12], &grid, &g, WET_THRESHOLD).unwrap();
        assert_eq!(r.wet_total(), 0);
        let r = rasterize_depth(&[0.05; 12], &grid, &g, WET_THRESHOLD).unwrap();
        assert_eq!(r.wet_total(), 0);
        let mut d = vec![0.0; 12];
        d[grid.idx(2, 1)] = 0.10;
        let r = rasterize_depth(&d, &grid, &g, WET_THRESHOLD).unwrap();
        assert_eq!(r.wet_total(), 1);
        assert_eq!(r.get(2, 1), Some(true));
    }

    #[test]
    fn finer_target_and_outside_pixels() {
        let grid = GridSpec::flat(2, 2, 10.0, 10.0).unwrap();
        let d = vec![1.0, 0.0, 0.0, 0.0];
        let target = RasterGeometry { ncols: 6, nrows: 4, xll: 0.0, yll: 0.0, cellsize: 5.0 };
        let r = rasterize_depth(&d, &grid, &target, WET_THRESHOLD).unwrap();
        assert_eq!(r.wet_total(), 4);
        assert_eq!(r.unmasked(), 16);
        assert_eq!(r.get(5, 0), None);
        let away = RasterGeometry { xll: 1e4, ..target };
        assert!(matches!(rasterize_depth(&d, &grid, &away, WET_THRESHOLD), Err(Error::GeometryMismatch)));
    }

    #[test]
    fn majority_hand_cases() {
        let flat = BinaryFloodRaster::filled(geom(5, 5), true);
        assert_eq!(majority_filter(&flat, 3).unwrap(), flat);
        let single = from_wet(5, 5, &[(2, 2)]);
        assert_eq!(majority_filter(&single, 3).unwrap().wet_total(), 0);
        let block = from_wet(6, 6, &[(2, 2), (3, 2), (2, 3), (3, 3)]);
        assert_eq!(majority_filter(&block, 3).unwrap().wet_total(), 0);
        let big: Vec<(usize, usize)> = (0..100).map(|k| (5 + k % 10, 5 + k / 10)).collect();
        let once = majority_filter(&from_wet(20, 20, &big), 3).unwrap();
        assert_eq!(once.wet_total(), 96);
        assert_eq!(majority_filter(&once, 3).unwrap(), once);
        assert!(majority_filter(&single, 4).is_err());
        assert!(majority_filter(&single, 1).is_err());
    }

    #[test]
    fn majority_ties_and_masks() {
        // Corner pixel sees itself and three neighbours: 2 wet, 2 dry keeps it.
        let r = from_wet(4, 4, &[(0, 0), (1, 0)]);
        let f = majority_filter(&r, 3).unwrap();
        assert_eq!(f.get(0, 0), Some(true));
        assert_eq!(f.get(0, 1), Some(false));
        let mut m = from_wet(3, 3, &[(1, 1), (0, 0)]);
        for c in 0..3 {
            m.set(c, 2, None);
        }
        m.set(2, 1, None);
        // (1,1) votes among 5 unmasked pixels: 2 wet, 3 dry.
        let f = majority_filter(&m, 3).unwrap();
        assert_eq!(f.get(1, 1), Some(false));
        assert_eq!(f.get(2, 1), None);
    }

    #[test]
    fn contingency_cases() {
        let mut wet = Vec::new();
        for k in 0..30 {
            wet.push((k % 10, k / 10));
        }
        let a = from_wet(10, 10, &wet);
        assert_eq!(contingency(&a, &a).unwrap(), ContingencyTable { tp: 30, fp: 0, tn: 70, fn_: 0 });
        let t =
            contingency(&BinaryFloodRaster::filled(geom(10, 1), true), &BinaryFloodRaster::filled(geom(10, 1), false))
                .unwrap();
        assert_eq!(t, ContingencyTable { tp: 0, fp: 10, tn: 0, fn_: 0 });
        let pred = from_wet(20, 1, &[(0, 0), (1, 0), (2, 0), (3, 0)]);
        let reference = from_wet(20, 1, &[(2, 0), (3, 0), (4, 0), (5, 0)]);
        assert_eq!(contingency(&pred, &reference).unwrap(), ContingencyTable { tp: 2, fp: 2, tn: 14, fn_: 2 });
        assert!(matches!(contingency(&pred, &a), Err(Error::GeometryMismatch)));
    }

    #[test]
    fn csi_cases() {
        assert_eq!(csi(&ContingencyTable { tp: 3, fp: 1, tn: 9, fn_: 2 }).unwrap(), 0.5);
        assert_eq!(csi(&ContingencyTable { tp: 4, fp: 0, tn: 9, fn_: 0 }).unwrap(), 1.0);
        assert_eq!(csi(&ContingencyTable { tp: 0, fp: 2, tn: 9, fn_: 1 }).unwrap(), 0.0);
        assert!(matches!(csi(&ContingencyTable { tp: 0, fp: 0, tn: 9, fn_: 0 }), Err(Error::UndefinedCsi)));
    }

    #[test]
    fn box_counts() {
        let all = BinaryFloodRaster::filled(geom(6, 6), true);
        assert_eq!(wet_pixel_count(&all, &VirtualBox::new("a", 1, 1, 4, 5)).unwrap(), 20);
        let none = BinaryFloodRaster::filled(geom(6, 6), false);
        assert_eq!(wet_pixel_count(&none, &VirtualBox::new("b", 0, 0, 5, 5)).unwrap(), 0);
        let checker: Vec<(usize, usize)> = (0..36).map(|k| (k % 6, k / 6)).filter(|(c, r)| (c + r) % 2 == 0).collect();
        let ch = from_wet(6, 6, &checker);
        assert_eq!(wet_pixel_count(&ch, &VirtualBox::new("c", 1, 1, 4, 4)).unwrap(), 8);
        assert!(wet_pixel_count(&ch, &VirtualBox::new("d", 1, 1, 6, 4)).is_err());
    }

    #[test]
    fn raster_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.asc");
        let mut r = from_wet(5, 3, &[(0, 0), (4, 2), (2, 1)]);
        r.set(1, 1, None);
        write_raster(&r, &p).unwrap();
        assert_eq!(read_raster(&p).unwrap(), r);
        std::fs::write(&p, "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 0.5\n").unwrap();
        assert!(matches!(read_raster(&p), Err(Error::Format(_))));
        std::fs::write(&p, "ncols 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 0\n").unwrap();
        assert!(matches!(read_raster(&p), Err(Error::Format(_))));
    }

    #[test]
    fn reference_map_noise() {
        let grid = GridSpec::flat(100, 100, 1.0, 1.0).unwrap();
        let g = RasterGeometry::from_grid(&grid);
        let d: Vec<f64> = (0..grid.len()).map(|k| if k % 100 < 40 { 1.0 } else { 0.0 }).collect();
        let clean = rasterize_depth(&d, &grid, &g, WET_THRESHOLD).unwrap();
        let (_, flips) = flip_pixels(&clean, 0.02, &mut stream(4, "flip", &[]));
        assert!((155..=245).contains(&flips), "{flips}");

        let exact = make_reference_maps(
            &[&d],
            &grid,
            &g,
            WET_THRESHOLD,
            MapNoise { p_flip: 0.0, filter_size: 3 },
            &mut stream(1, "m", &[]),
        )
        .unwrap();
        assert_eq!(exact[0], majority_filter(&clean, 3).unwrap());
        let noise = MapNoise::default();
        let a = make_reference_maps(&[&d], &grid, &g, WET_THRESHOLD, noise, &mut stream(9, "m", &[])).unwrap();
        let b = make_reference_maps(&[&d], &grid, &g, WET_THRESHOLD, noise, &mut stream(9, "m", &[])).unwrap();
        assert_eq!(a, b);
    }

    // On arbitrary input a second pass can change more pixels than the first,
    // so only uniform and blocky rasters are checked for idempotence.
    #[test]
    fn second_pass_may_change_more_on_arbitrary_input() {
        let px = [None, Some(false), None, Some(false), Some(true), Some(false), Some(true), Some(false), Some(true)];
        let r = BinaryFloodRaster::new(geom(3, 3), px.to_vec()).unwrap();
        let once = majority_filter(&r, 3).unwrap();
        let twice = majority_filter(&once, 3).unwrap();
        let changed = |a: &BinaryFloodRaster, b: &BinaryFloodRaster| {
            a.pixels.iter().zip(&b.pixels).filter(|(x, y)| x != y).count()
        };
        assert_eq!((changed(&r, &once), changed(&once, &twice)), (1, 2));
    }

    fn raster_strategy() -> impl Strategy<Value = BinaryFloodRaster> {
        (1usize..12, 1usize..12).prop_flat_map(|(c, r)| {
            prop::collection::vec(prop::option::weighted(0.85, any::<bool>()), c * r)
                .prop_map(move |px| BinaryFloodRaster::new(geom(c, r), px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn filter_is_idempotent_on_uniform_and_blocky_rasters(
            c in 1usize..5, r in 1usize..5, b in 5usize..9, blocks in prop::collection::vec(any::<bool>(), 16),
        ) {
            // Each logical cell becomes a b x b block of equal pixels.
            let (nc, nr) = (b * c, b * r);
            let px = (0..nr * nc).map(|i| Some(blocks[(i / nc / b) * 4 + (i % nc) / b])).collect();
            let raster = BinaryFloodRaster::new(geom(nc, nr), px).unwrap();
            let once = majority_filter(&raster, 3).unwrap();
            prop_assert_eq!(&majority_filter(&once, 3).unwrap(), &once);
            let uniform = BinaryFloodRaster::new(geom(nc, nr), vec![Some(blocks[0]); nc * nr]).unwrap();
            prop_assert_eq!(majority_filter(&uniform, 3).unwrap(), uniform);
        }

        #[test]
        fn csi_scale_invariant(tp in 0usize..1000, fp in 0usize..1000, fn_ in 0usize..1000, tn in 0usize..1000) {
            let t = ContingencyTable { tp, fp, tn, fn_ };
            let d = ContingencyTable { tp: 2 * tp, fp: 2 * fp, tn: 2 * tn, fn_: 2 * fn_ };
            match csi(&t) {
                Ok(v) => {
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert_eq!(v, csi(&d).unwrap());
                    prop_assert_eq!(v == 1.0, fp == 0 && fn_ == 0 && tp > 0);
                }
                Err(_) => prop_assert!(tp + fp + fn_ == 0),
            }
        }

        #[test]
        fn box_counts_are_additive(r in raster_strategy(), split in 0usize..12) {
            let g = r.geometry;
            let whole = VirtualBox::new("w", 0, 0, g.ncols - 1, g.nrows - 1);
            let s = split.min(g.ncols - 1);
            let left = VirtualBox::new("l", 0, 0, s, g.nrows - 1);
            let total = wet_pixel_count(&r, &whole).unwrap();
            let right = if s + 1 < g.ncols { wet_pixel_count(&r, &VirtualBox::new("r", s + 1, 0, g.ncols - 1, g.nrows - 1)).unwrap() } else { 0 };
            prop_assert_eq!(total, wet_pixel_count(&r, &left).unwrap() + right);
            prop_assert_eq!(total, r.wet_total());
        }
    }
}
