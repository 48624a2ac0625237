//! Cooling maps over the (delta, Delta) plane and profiles along the
//! analytic curves.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{interference_curve_delta, regime_flags, resonance_curve_delta, DetuningPoint, SystemParams, NU};
use crate::rates::cooling_result;

/// Half-width of the window around a curve pole that profiles skip.
pub const POLE_WINDOW: f64 = 1e-3;

pub const CSV_HEADER: &str = "delta,Delta,Gamma,mean_m,steady,weak_drive_ok,lamb_dicke_ok";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Self {
        Axis { min, max, n }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.max
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("{name} axis needs at least 2 points")));
        }
        if !self.min.is_finite() || !self.max.is_finite() || !(self.max > self.min) {
            return Err(Error::invalid(format!(
                "{name} axis range must be finite with max > min"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub delta: Axis,
    pub delta_cav: Axis,
    pub params: SystemParams,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        self.delta.validate("delta")?;
        self.delta_cav.validate("delta_cav")?;
        self.params.validate()
    }

    pub fn len(&self) -> usize {
        self.delta.n * self.delta_cav.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub delta: f64,
    pub delta_cav: f64,
    /// `None` when the rates could not be evaluated at this point.
    pub gamma_cool: Option<f64>,
    pub mean_m: Option<f64>,
    pub steady: bool,
    pub weak_drive_ok: bool,
    pub lamb_dicke_ok: bool,
    pub error: Option<String>,
}

pub fn evaluate_cell(p: &SystemParams, d: DetuningPoint) -> SweepCell {
    match cooling_result(p, &d) {
        Ok(r) => {
            let flags = regime_flags(p, &d, r.mean_m);
            SweepCell {
                delta: d.delta,
                delta_cav: d.delta_cav,
                gamma_cool: Some(r.gamma_cool),
                mean_m: r.mean_m,
                steady: r.steady,
                weak_drive_ok: flags.weak_drive_ok,
                lamb_dicke_ok: flags.lamb_dicke_ok,
                error: None,
            }
        }
        Err(e) => {
            let flags = regime_flags(p, &d, None);
            SweepCell {
                delta: d.delta,
                delta_cav: d.delta_cav,
                gamma_cool: None,
                mean_m: None,
                steady: false,
                weak_drive_ok: flags.weak_drive_ok,
                lamb_dicke_ok: false,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Evaluates every grid point, delta outer and Delta inner. `threads = 0`
/// uses all available cores. The output does not depend on the thread count.
pub fn run_sweep(grid: &SweepGrid, threads: usize) -> Result<Vec<SweepCell>> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let nc = grid.delta_cav.n;
    let p = grid.params;
    Ok(pool.install(|| {
        (0..grid.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|k| {
                let d = DetuningPoint::new(grid.delta.value(k / nc), grid.delta_cav.value(k % nc));
                evaluate_cell(&p, d)
            })
            .collect()
    }))
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(mut w: W, cells: &[SweepCell]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_float(c.delta),
            fmt_float(c.delta_cav),
            c.gamma_cool.map(fmt_float).unwrap_or_default(),
            c.mean_m.map(fmt_float).unwrap_or_default(),
            c.steady,
            c.weak_drive_ok,
            c.lamb_dicke_ok
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub params: SystemParams,
    pub grid: GridSpec,
    pub cells: usize,
    pub singular_cells: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub delta: Axis,
    pub delta_cav: Axis,
    pub order: &'static str,
}

impl SweepMetadata {
    pub fn new(grid: &SweepGrid, cells: &[SweepCell], wall_clock_seconds: f64) -> Self {
        SweepMetadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            params: grid.params,
            grid: GridSpec {
                delta: grid.delta,
                delta_cav: grid.delta_cav,
                order: "row-major, delta outer, Delta inner",
            },
            cells: cells.len(),
            singular_cells: cells.iter().filter(|c| c.error.is_some()).count(),
            wall_clock_seconds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "delta", rename_all = "snake_case")]
pub enum Curve {
    /// Red sideband of the dressed states.
    Resonance,
    /// Destructive interference of the leading heating amplitude.
    Interference,
    /// Straight cut at a fixed pump-atom detuning.
    FixedDelta(f64),
}

impl Curve {
    pub fn delta_at(&self, p: &SystemParams, delta_cav: f64) -> Result<f64> {
        match *self {
            Curve::Resonance => resonance_curve_delta(p, delta_cav),
            Curve::Interference => interference_curve_delta(p, delta_cav),
            Curve::FixedDelta(d) => Ok(d),
        }
    }

    fn pole(&self) -> Option<f64> {
        match self {
            Curve::Resonance => Some(-NU),
            Curve::Interference => Some(NU),
            Curve::FixedDelta(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub delta_cav: f64,
    pub delta: f64,
    pub gamma_cool: f64,
    pub mean_m: Option<f64>,
    pub steady: bool,
}

/// Rates along a curve. Samples inside the pole window or at singular
/// points are skipped.
pub fn curve_profile(p: &SystemParams, curve: Curve, delta_cav_samples: &[f64]) -> Result<Vec<ProfilePoint>> {
    p.validate()?;
    let mut out = Vec::with_capacity(delta_cav_samples.len());
    for &dc in delta_cav_samples {
        if curve.pole().is_some_and(|pole| (dc - pole).abs() <= POLE_WINDOW) {
            continue;
        }
        let Ok(delta) = curve.delta_at(p, dc) else {
            continue;
        };
        let Ok(r) = cooling_result(p, &DetuningPoint::new(delta, dc)) else {
            continue;
        };
        out.push(ProfilePoint {
            delta_cav: dc,
            delta,
            gamma_cool: r.gamma_cool,
            mean_m: r.mean_m,
            steady: r.steady,
        });
    }
    Ok(out)
}

/// Indices of strict interior local minima of the mean phonon number.
/// Points without a steady state count as infinitely hot.
pub fn local_minima(profile: &[ProfilePoint]) -> Vec<usize> {
    let m = |i: usize| profile[i].mean_m.unwrap_or(f64::INFINITY);
    (1..profile.len().saturating_sub(1))
        .filter(|&i| profile[i].mean_m.is_some() && m(i) < m(i - 1) && m(i) < m(i + 1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_cav_min: f64,
    pub delta_cav_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub cooling: bool,
    pub cells: usize,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub delta: f64,
    pub delta_cav: f64,
    pub value: f64,
    pub index: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSummary {
    pub cooling_cells: usize,
    pub heating_cells: usize,
    pub cooling_regions: usize,
    pub heating_regions: usize,
    pub regions: Vec<Region>,
    pub min_mean_m: Option<Extremum>,
    pub max_gamma: Option<Extremum>,
}

/// Contiguous cooling and heating regions under 4-connectivity. Singular
/// cells count as heating.
pub fn classify_regions(cells: &[SweepCell], n_delta: usize, n_delta_cav: usize) -> Result<RegionSummary> {
    if cells.len() != n_delta * n_delta_cav {
        return Err(Error::invalid(format!(
            "{} cells do not form a {n_delta} x {n_delta_cav} grid",
            cells.len()
        )));
    }
    let at = |i: usize, j: usize| &cells[i * n_delta_cav + j];
    let mut label = vec![usize::MAX; cells.len()];
    let mut regions = Vec::new();
    for start in 0..cells.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let kind = cells[start].steady;
        let id = regions.len();
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        let mut count = 0;
        let mut bbox = BoundingBox {
            delta_min: f64::INFINITY,
            delta_max: f64::NEG_INFINITY,
            delta_cav_min: f64::INFINITY,
            delta_cav_max: f64::NEG_INFINITY,
        };
        while let Some(k) = queue.pop_front() {
            count += 1;
            let c = &cells[k];
            bbox.delta_min = bbox.delta_min.min(c.delta);
            bbox.delta_max = bbox.delta_max.max(c.delta);
            bbox.delta_cav_min = bbox.delta_cav_min.min(c.delta_cav);
            bbox.delta_cav_max = bbox.delta_cav_max.max(c.delta_cav);
            let (i, j) = (k / n_delta_cav, k % n_delta_cav);
            let mut neighbors = Vec::with_capacity(4);
            if i > 0 {
                neighbors.push((i - 1, j));
            }
            if i + 1 < n_delta {
                neighbors.push((i + 1, j));
            }
            if j > 0 {
                neighbors.push((i, j - 1));
            }
            if j + 1 < n_delta_cav {
                neighbors.push((i, j + 1));
            }
            for (a, b) in neighbors {
                let kk = a * n_delta_cav + b;
                if label[kk] == usize::MAX && at(a, b).steady == kind {
                    label[kk] = id;
                    queue.push_back(kk);
                }
            }
        }
        regions.push(Region {
            cooling: kind,
            cells: count,
            bbox,
        });
    }

    let mut min_mean_m: Option<Extremum> = None;
    let mut max_gamma: Option<Extremum> = None;
    for (k, c) in cells.iter().enumerate() {
        let index = (k / n_delta_cav, k % n_delta_cav);
        if let Some(m) = c.mean_m {
            if min_mean_m.is_none_or(|e| m < e.value) {
                min_mean_m = Some(Extremum { delta: c.delta, delta_cav: c.delta_cav, value: m, index });
            }
        }
        if let Some(g) = c.gamma_cool {
            if max_gamma.is_none_or(|e| g > e.value) {
                max_gamma = Some(Extremum { delta: c.delta, delta_cav: c.delta_cav, value: g, index });
            }
        }
    }
    let cooling_cells = cells.iter().filter(|c| c.steady).count();
    Ok(RegionSummary {
        cooling_cells,
        heating_cells: cells.len() - cooling_cells,
        cooling_regions: regions.iter().filter(|r| r.cooling).count(),
        heating_regions: regions.iter().filter(|r| !r.cooling).count(),
        regions,
        min_mean_m,
        max_gamma,
    })
}

/// Distance from `(delta, delta_cav)` to a curve in grid cells, as the
/// smallest Chebyshev distance to the curve sampled finely along Delta.
pub fn cell_distance_to_curve(grid: &SweepGrid, curve: Curve, delta: f64, delta_cav: f64) -> f64 {
    let (hd, hc) = (grid.delta.step(), grid.delta_cav.step());
    let fine = Axis::new(grid.delta_cav.min, grid.delta_cav.max, 40 * grid.delta_cav.n);
    fine.values()
        .into_iter()
        .filter_map(|dc| curve.delta_at(&grid.params, dc).ok().map(|d| (d, dc)))
        .map(|(d, dc)| ((d - delta).abs() / hd).max((dc - delta_cav).abs() / hc))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn good_cavity(c: f64) -> SystemParams {
        SystemParams {
            gamma: 10.0,
            kappa: 0.025,
            omega_p_drive: 0.01,
            varphi: 0.45 * PI,
            eta: 0.05,
            ..Default::default()
        }
        .with_cooperativity(c)
        .unwrap()
    }

    fn grid(n: usize) -> SweepGrid {
        SweepGrid {
            delta: Axis::new(-3.0, 6.0, n),
            delta_cav: Axis::new(-4.0, 4.0, n + 1),
            params: good_cavity(15.0),
        }
    }

    #[test]
    fn two_by_two_order() {
        let g = SweepGrid {
            delta: Axis::new(0.0, 1.0, 2),
            delta_cav: Axis::new(-1.0, 2.0, 2),
            params: good_cavity(3.0),
        };
        let cells = run_sweep(&g, 1).unwrap();
        let coords: Vec<_> = cells.iter().map(|c| (c.delta, c.delta_cav)).collect();
        assert_eq!(coords, vec![(0.0, -1.0), (0.0, 2.0), (1.0, -1.0), (1.0, 2.0)]);
        let mut buf = Vec::new();
        write_csv(&mut buf, &cells).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    #[test]
    fn csv_fields() {
        let cells = run_sweep(&grid(6), 1).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &cells).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        for (line, cell) in lines.zip(&cells) {
            let f: Vec<_> = line.split(',').collect();
            assert_eq!(f.len(), 7);
            assert_eq!(f[4] == "true", cell.steady);
            assert_eq!(f[3].is_empty(), !cell.steady);
            assert_eq!(f[0].parse::<f64>().unwrap(), cell.delta);
        }
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let g = grid(30);
        let a = run_sweep(&g, 1).unwrap();
        let b = run_sweep(&g, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_grid_rejected() {
        let mut g = grid(3);
        g.delta.n = 1;
        assert!(run_sweep(&g, 1).is_err());
        let mut g = grid(3);
        g.delta_cav.max = f64::NAN;
        assert!(run_sweep(&g, 1).is_err());
    }

    #[test]
    fn interference_profile_flat_at_unit_cooperativity() {
        let p = good_cavity(1.0);
        let samples = Axis::new(-3.0, 3.0, 61).values();
        let prof = curve_profile(&p, Curve::Interference, &samples).unwrap();
        assert!(prof.iter().all(|q| q.delta.abs() < 1e-15));
        // the sample at Delta = 1 falls into the pole window
        assert_eq!(prof.len(), 60);
    }

    #[test]
    fn local_minima_simple() {
        let mk = |m: Option<f64>| ProfilePoint { delta_cav: 0.0, delta: 0.0, gamma_cool: 1.0, mean_m: m, steady: m.is_some() };
        let prof: Vec<_> = [Some(3.0), Some(1.0), Some(2.0), None, Some(0.5), None, Some(1.0), Some(0.9)]
            .into_iter()
            .map(mk)
            .collect();
        assert_eq!(local_minima(&prof), vec![1, 4]);
    }

    #[test]
    fn regions_all_heating() {
        let cells: Vec<_> = (0..6)
            .map(|k| SweepCell {
                delta: (k / 3) as f64,
                delta_cav: (k % 3) as f64,
                gamma_cool: Some(-1.0),
                mean_m: None,
                steady: false,
                weak_drive_ok: true,
                lamb_dicke_ok: false,
                error: None,
            })
            .collect();
        let s = classify_regions(&cells, 2, 3).unwrap();
        assert_eq!((s.cooling_cells, s.heating_regions, s.cooling_regions), (0, 1, 0));
        assert!(s.min_mean_m.is_none());
    }

    #[test]
    fn regions_use_four_connectivity() {
        // diagonal cooling cells form two regions
        let steady = [true, false, false, true];
        let cells: Vec<_> = steady
            .iter()
            .enumerate()
            .map(|(k, &s)| SweepCell {
                delta: (k / 2) as f64,
                delta_cav: (k % 2) as f64,
                gamma_cool: Some(if s { 1.0 + k as f64 } else { -1.0 }),
                mean_m: s.then_some(1.0 / (1.0 + k as f64)),
                steady: s,
                weak_drive_ok: true,
                lamb_dicke_ok: true,
                error: None,
            })
            .collect();
        let s = classify_regions(&cells, 2, 2).unwrap();
        assert_eq!(s.cooling_regions, 2);
        assert_eq!(s.heating_regions, 2);
        assert_eq!(s.min_mean_m.unwrap().index, (1, 1));
        assert_eq!(s.max_gamma.unwrap().value, 4.0);
        assert!(classify_regions(&cells, 3, 2).is_err());
    }

    #[test]
    fn steady_cells_self_consistent() {
        let g = grid(40);
        for c in run_sweep(&g, 1).unwrap() {
            let b = crate::rates::rate_breakdown(&g.params, &DetuningPoint::new(c.delta, c.delta_cav)).unwrap();
            if let Some(m) = c.mean_m {
                let again = b.a_plus / (b.a_minus - b.a_plus);
                assert!((m - again).abs() <= 1e-12 * again);
            }
            assert_eq!(c.steady, c.gamma_cool.unwrap() > 0.0);
        }
    }

    #[test]
    fn distance_to_curve_is_zero_on_curve() {
        let g = grid(50);
        let dc = 1.0;
        let d = resonance_curve_delta(&g.params, dc).unwrap();
        assert!(cell_distance_to_curve(&g, Curve::Resonance, d, dc) < 0.1);
        assert!(cell_distance_to_curve(&g, Curve::Resonance, d + 10.0 * g.delta.step(), dc) > 1.0);
    }
}
