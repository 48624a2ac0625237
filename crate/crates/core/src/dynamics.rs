//! Rate-equation dynamics of the phonon distribution.
//!
//! The birth-death generator is truncated at level `M` with a reflecting
//! top: no flux leaves `M` upwards, so every column sums to zero and the
//! truncated chain conserves probability. The population reaching `M` is
//! monitored instead.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rates::RatePair;

/// Largest admissible `dt * eta^2 * max(A+, A-) * M`.
pub const STIFFNESS_LIMIT: f64 = 0.1;

/// Population at the truncation level above which the run is considered
/// to have overflowed.
pub const TAIL_LIMIT: f64 = 1e-6;

/// Upper bound on the number of fixed steps of one run.
pub const MAX_STEPS: u64 = 1 << 40;

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub populations: Vec<f64>,
    pub time: f64,
}

impl PopulationState {
    pub fn new(populations: Vec<f64>, time: f64) -> Result<Self> {
        if populations.len() < 2 {
            return Err(Error::invalid("truncation must be at least 1"));
        }
        if populations.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("populations must be finite and non-negative"));
        }
        let sum: f64 = populations.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid(format!("populations sum to {sum}, not 1")));
        }
        Ok(Self { populations, time })
    }

    /// All population in level `m`.
    pub fn fock(m: usize, truncation: usize) -> Result<Self> {
        if m > truncation {
            return Err(Error::invalid(format!(
                "level {m} lies above the truncation {truncation}"
            )));
        }
        let mut p = vec![0.0; truncation + 1];
        p[m] = 1.0;
        Self::new(p, 0.0)
    }

    /// Thermal distribution with the given mean, cut at the truncation and
    /// renormalized.
    pub fn thermal(mean_m: f64, truncation: usize) -> Result<Self> {
        if !(mean_m >= 0.0) || !mean_m.is_finite() {
            return Err(Error::invalid("thermal mean must be finite and >= 0"));
        }
        let r = mean_m / (mean_m + 1.0);
        let mut p: Vec<f64> = (0..=truncation).map(|m| r.powi(m as i32)).collect();
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= sum);
        Self::new(p, 0.0)
    }

    pub fn truncation(&self) -> usize {
        self.populations.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.populations.iter().sum()
    }

    /// Population in the truncation level.
    pub fn tail_mass(&self) -> f64 {
        *self.populations.last().unwrap()
    }

    pub fn truncation_adequate(&self) -> bool {
        self.tail_mass() < TAIL_LIMIT * self.total()
    }

    fn check_tail(&self) -> Result<()> {
        if self.truncation_adequate() {
            Ok(())
        } else {
            Err(Error::TruncationOverflow {
                level: self.truncation(),
                population: self.tail_mass(),
                time: self.time,
            })
        }
    }
}

/// Truncation that holds the thermal tails of the initial mean `mean0` and,
/// when given, of the expected steady state down to 1e-8.
pub fn default_truncation(mean0: f64, mean_inf: Option<f64>) -> usize {
    let mut m = 50usize.max((10.0 * mean0).ceil() as usize);
    for n in [Some(mean0), mean_inf].into_iter().flatten().filter(|n| *n > 0.0 && n.is_finite()) {
        let r = n / (n + 1.0);
        // (1 - r) r^M < 1e-8
        let level = ((1e-8f64).ln() - (1.0 - r).ln()) / r.ln();
        m = m.max(level.ceil() as usize + 1);
    }
    m
}

#[derive(Debug, Clone, Copy)]
struct Chain {
    up: f64,
    down: f64,
}

impl Chain {
    fn new(rates: RatePair, eta: f64) -> Self {
        Chain {
            up: eta * eta * rates.a_plus,
            down: eta * eta * rates.a_minus,
        }
    }

    fn max_rate(&self) -> f64 {
        self.up.max(self.down)
    }

    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let top = p.len() - 1;
        for m in 0..=top {
            let mf = m as f64;
            let leave_up = if m < top { self.up * (mf + 1.0) } else { 0.0 };
            let mut v = -(leave_up + self.down * mf) * p[m];
            if m < top {
                v += self.down * (mf + 1.0) * p[m + 1];
            }
            if m > 0 {
                v += self.up * mf * p[m - 1];
            }
            out[m] = v;
        }
    }

    fn rk4(&self, p: &[f64], h: f64) -> Vec<f64> {
        let n = p.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        self.apply(p, &mut k1);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * h * k1[i];
        }
        self.apply(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * h * k2[i];
        }
        self.apply(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = p[i] + h * k3[i];
        }
        self.apply(&tmp, &mut k4);
        (0..n)
            .map(|i| p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    /// Largest step that satisfies the stiffness guard with a factor two margin.
    fn auto_dt(&self, truncation: usize) -> f64 {
        0.5 * STIFFNESS_LIMIT / (self.max_rate() * truncation as f64)
    }

    /// One fixed RK4 step as a dense matrix.
    fn step_matrix(&self, n: usize, h: f64) -> DMatrix<f64> {
        let mut mat = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.rk4(&e, h);
            e[j] = 0.0;
            // only a band of width four is reached in one step
            let lo = j.saturating_sub(4);
            let hi = (j + 4).min(n - 1);
            for i in lo..=hi {
                mat[(i, j)] = col[i];
            }
        }
        mat
    }
}

/// Time derivative of the populations under the rate equation.
pub fn rate_equation_derivative(s: &PopulationState, rates: RatePair, eta: f64) -> Vec<f64> {
    let mut out = vec![0.0; s.populations.len()];
    Chain::new(rates, eta).apply(&s.populations, &mut out);
    out
}

/// One RK4 step of length `dt`.
pub fn step_rate_equation(
    s: &PopulationState,
    eta: f64,
    rates: RatePair,
    dt: f64,
) -> Result<PopulationState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt must be positive"));
    }
    let chain = Chain::new(rates, eta);
    let stiff = dt * chain.max_rate() * s.truncation() as f64;
    if stiff >= STIFFNESS_LIMIT {
        return Err(Error::invalid(format!(
            "dt * eta^2 * max(A+, A-) * M = {stiff:.3e} violates the stiffness guard {STIFFNESS_LIMIT}"
        )));
    }
    let next = PopulationState {
        populations: chain.rk4(&s.populations, dt),
        time: s.time + dt,
    };
    next.check_tail()?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub mean_m: f64,
    pub p0: f64,
    pub tail_mass: f64,
}

impl TrajectoryPoint {
    fn of(s: &PopulationState) -> Self {
        TrajectoryPoint {
            t: s.time,
            mean_m: s.mean(),
            p0: s.populations[0],
            tail_mass: s.tail_mass(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub final_state: PopulationState,
    /// Set when the run stopped early because the truncation level filled up.
    pub overflow: Option<Error>,
}

/// Evolves `s0` through the increasing times `t_grid`, stopping early if
/// the truncation level fills up.
///
/// The step is the largest one allowed by the stiffness guard, shortened so
/// that it divides every grid interval. Long intervals apply the RK4 step
/// polynomial through repeated squaring, which gives the same result as
/// stepping one by one up to rounding.
pub fn evolve(s0: &PopulationState, eta: f64, rates: RatePair, t_grid: &[f64]) -> Result<Trajectory> {
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("time grid must be finite and non-decreasing"));
    }
    if let Some(&t0) = t_grid.first() {
        if t0 < s0.time {
            return Err(Error::invalid("time grid starts before the initial state"));
        }
    }
    let chain = Chain::new(rates, eta);
    let n = s0.populations.len();
    let dt_max = if chain.max_rate() > 0.0 {
        chain.auto_dt(s0.truncation())
    } else {
        f64::INFINITY
    };

    let mut state = s0.clone();
    let mut points = Vec::with_capacity(t_grid.len());
    let mut total_steps: u64 = 0;
    let mut cached: Option<(f64, DMatrix<f64>)> = None;

    for (i, &t) in t_grid.iter().enumerate() {
        let span = t - state.time;
        if span > 0.0 && chain.max_rate() > 0.0 {
            let steps = (span / dt_max).ceil().max(1.0);
            total_steps = total_steps.saturating_add(steps as u64);
            if total_steps > MAX_STEPS {
                return Err(Error::invalid(format!(
                    "run needs more than {MAX_STEPS} steps"
                )));
            }
            let steps = steps as u64;
            let h = span / steps as f64;
            let reuse = matches!(&cached, Some((len, _)) if (len - span).abs() <= 1e-12 * span);
            // a matrix power pays off over the whole run of equal intervals
            let repeats = 1 + t_grid[i..]
                .windows(2)
                .take_while(|w| ((w[1] - w[0]) - span).abs() <= 1e-12 * span)
                .count();
            let direct_cost = repeats as f64 * steps as f64 * n as f64 * 40.0;
            let power_cost = 2.0 * (steps as f64).log2().max(1.0) * (n as f64).powi(3);
            state.populations = if !reuse && direct_cost <= power_cost {
                let mut p = state.populations.clone();
                for _ in 0..steps {
                    p = chain.rk4(&p, h);
                }
                p
            } else {
                if !reuse {
                    cached = Some((span, power(chain.step_matrix(n, h), steps)));
                }
                let q = &cached.as_ref().unwrap().1;
                (q * DVector::from_column_slice(&state.populations))
                    .iter()
                    .map(|x| x.max(0.0))
                    .collect()
            };
        }
        state.time = t;
        points.push(TrajectoryPoint::of(&state));
        if let Err(e) = state.check_tail() {
            return Ok(Trajectory {
                points,
                final_state: state,
                overflow: Some(e),
            });
        }
    }
    Ok(Trajectory {
        points,
        final_state: state,
        overflow: None,
    })
}

fn power(mut base: DMatrix<f64>, mut k: u64) -> DMatrix<f64> {
    let mut acc: Option<DMatrix<f64>> = None;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => &a * &base,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = &base * &base;
    }
    acc.unwrap_or_else(|| DMatrix::identity(base.nrows(), base.ncols()))
}

/// Mean phonon number along `t_grid`. Fails with `TruncationOverflow` when
/// the truncation level fills up before the end of the grid.
pub fn mean_phonon_trajectory(
    s0: &PopulationState,
    eta: f64,
    rates: RatePair,
    t_grid: &[f64],
) -> Result<Vec<TrajectoryPoint>> {
    let traj = evolve(s0, eta, rates, t_grid)?;
    match traj.overflow {
        Some(e) => Err(e),
        None => Ok(traj.points),
    }
}

/// `n` equally spaced times from `t0` to `t1` inclusive.
pub fn linear_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![t1];
    }
    (0..n)
        .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Decay rate from a least-squares line through `ln|<m>_t - baseline|`
/// for `t` in `[t_min, t_max]`.
pub fn fit_decay_rate(points: &[TrajectoryPoint], baseline: f64, t_min: f64, t_max: f64) -> Result<f64> {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.t >= t_min && p.t <= t_max)
        .filter_map(|p| {
            let d = (p.mean_m - baseline).abs();
            (d > 0.0).then(|| (p.t, d.ln()))
        })
        .collect();
    if data.len() < 3 {
        return Err(Error::invalid("too few points in the fit window"));
    }
    let n = data.len() as f64;
    let mt = data.iter().map(|d| d.0).sum::<f64>() / n;
    let my = data.iter().map(|d| d.1).sum::<f64>() / n;
    let sxy: f64 = data.iter().map(|d| (d.0 - mt) * (d.1 - my)).sum();
    let sxx: f64 = data.iter().map(|d| (d.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub gamma_fit: f64,
    pub gamma_est: f64,
    pub baseline: f64,
    pub window: (f64, f64),
}

/// Evolves to `15 / gamma_est`, takes the last mean as the baseline and
/// fits the decay over `[0.5, 3] / gamma_est`.
pub fn fit_cooling_rate(
    s0: &PopulationState,
    eta: f64,
    rates: RatePair,
    gamma_est: f64,
) -> Result<(RateFit, Vec<TrajectoryPoint>)> {
    if !(gamma_est > 0.0) {
        return Err(Error::invalid("rate fit needs a positive rate estimate"));
    }
    let t_end = 15.0 / gamma_est;
    let grid = linear_grid(s0.time, s0.time + t_end, 301);
    let points = mean_phonon_trajectory(s0, eta, rates, &grid)?;
    let baseline = points.last().unwrap().mean_m;
    let window = (s0.time + 0.5 / gamma_est, s0.time + 3.0 / gamma_est);
    let gamma_fit = fit_decay_rate(&points, baseline, window.0, window.1)?;
    Ok((
        RateFit {
            gamma_fit,
            gamma_est,
            baseline,
            window,
        },
        points,
    ))
}

pub fn write_trajectory_csv<W: Write>(mut w: W, points: &[TrajectoryPoint]) -> std::io::Result<()> {
    writeln!(w, "t,mean_m,p0,pM_tail_mass")?;
    for p in points {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            p.t, p.mean_m, p.p0, p.tail_mass
        )?;
    }
    Ok(())
}
