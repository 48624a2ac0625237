//! Brute-force check of the rate formulas: the Lindblad generator of the
//! truncated atom + cavity + motion system, its steady state, and its
//! slowest motional relaxation rate.
//!
//! Nothing here calls into `rates`. The Hilbert space is ordered with the
//! motion outermost, `h = m * D + atom * n_c + n` with optical dimension
//! `D = 2 n_c`, and density matrices are stored with both motional indices
//! outermost so that the generator is banded with half-width about
//! `(n_motion + 1) D^2`.

pub mod band;
pub mod sparse;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DetuningPoint, SystemParams, NU};
use band::{BandLu, BandMatrix};
use sparse::CsrMatrix;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Top motional population above which the truncation is suspect.
pub const MOTION_TAIL_LIMIT: f64 = 1e-4;

/// Relative separation below which two slow motional modes are ambiguous.
pub const MODE_SEPARATION: f64 = 0.05;

/// Share of a mode's norm that must sit in motional populations for the
/// mode to count as a motional relaxation mode.
pub const POPULATION_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_cavity: usize,
    pub n_motion: usize,
    pub include_recoil: bool,
    /// Angular factor of the recoil dissipator; ignored unless `include_recoil`.
    pub recoil_factor: f64,
    pub tol: f64,
    /// Keep the full cosine of the position-dependent coupling instead of
    /// its first-order expansion.
    pub exact_cosine: bool,
    pub max_hilbert_dim: usize,
    pub krylov_dim: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            n_cavity: 3,
            n_motion: 10,
            include_recoil: false,
            recoil_factor: 0.0,
            tol: 1e-8,
            exact_cosine: false,
            max_hilbert_dim: 512,
            krylov_dim: 30,
        }
    }
}

impl OracleConfig {
    pub fn hilbert_dim(&self) -> usize {
        2 * self.n_cavity * self.n_motion
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cavity < 2 {
            return Err(Error::invalid("n_cavity must be at least 2"));
        }
        if self.n_motion < 4 {
            return Err(Error::invalid("n_motion must be at least 4"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if !(self.recoil_factor >= 0.0) || !self.recoil_factor.is_finite() {
            return Err(Error::invalid("recoil_factor must be finite and >= 0"));
        }
        if self.krylov_dim < 4 {
            return Err(Error::invalid("krylov_dim must be at least 4"));
        }
        let dim = self.hilbert_dim();
        if dim > self.max_hilbert_dim {
            return Err(Error::DimensionGuard {
                dim,
                max: self.max_hilbert_dim,
            });
        }
        Ok(())
    }

    fn recoil(&self) -> f64 {
        if self.include_recoil {
            self.recoil_factor
        } else {
            0.0
        }
    }
}

/// Lindblad generator acting on vectorized density matrices.
#[derive(Debug, Clone)]
pub struct Generator {
    pub matrix: CsrMatrix,
    n_cavity: usize,
    n_motion: usize,
}

impl Generator {
    pub fn optical_dim(&self) -> usize {
        2 * self.n_cavity
    }

    pub fn hilbert_dim(&self) -> usize {
        self.optical_dim() * self.n_motion
    }

    pub fn n_motion(&self) -> usize {
        self.n_motion
    }

    /// Hilbert index of `|atom, n_c, m>` with atom 0 = ground, 1 = excited.
    pub fn state(&self, m: usize, atom: usize, photons: usize) -> usize {
        (m * 2 + atom) * self.n_cavity + photons
    }

    /// Position of the density-matrix element `(i, j)` in the vector.
    pub fn index(&self, i: usize, j: usize) -> usize {
        let d = self.optical_dim();
        let (mi, oi) = (i / d, i % d);
        let (mj, oj) = (j / d, j % d);
        ((mi * self.n_motion + mj) * d + oi) * d + oj
    }

    pub fn apply(&self, x: &[C]) -> Vec<C> {
        let mut y = vec![ZERO; x.len()];
        self.matrix.matvec(x, &mut y);
        y
    }

    pub fn to_matrix(&self, x: &[C]) -> DMatrix<C> {
        let d = self.hilbert_dim();
        DMatrix::from_fn(d, d, |i, j| x[self.index(i, j)])
    }

    pub fn from_matrix(&self, rho: &DMatrix<C>) -> Vec<C> {
        let d = self.hilbert_dim();
        let mut x = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                x[self.index(i, j)] = rho[(i, j)];
            }
        }
        x
    }

    pub fn trace(&self, x: &[C]) -> C {
        (0..self.hilbert_dim()).map(|i| x[self.index(i, i)]).sum()
    }

    /// Partial trace over atom and cavity.
    pub fn motional_matrix(&self, x: &[C]) -> DMatrix<C> {
        let d = self.optical_dim();
        let nm = self.n_motion;
        DMatrix::from_fn(nm, nm, |mi, mj| {
            (0..d).map(|o| x[self.index(mi * d + o, mj * d + o)]).sum()
        })
    }

    /// Populations of the optical states `(atom, photons)`, summed over the motion.
    fn optical_population(&self, x: &[C], atom: usize, photons: usize) -> f64 {
        (0..self.n_motion)
            .map(|m| {
                let s = self.state(m, atom, photons);
                x[self.index(s, s)].re
            })
            .sum()
    }
}

fn destroy(n: usize) -> DMatrix<C> {
    DMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            C::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

fn kron3(motion: &DMatrix<C>, atom: &DMatrix<C>, cavity: &DMatrix<C>) -> DMatrix<C> {
    motion.kronecker(atom).kronecker(cavity)
}

fn nonzeros(m: &DMatrix<C>) -> Vec<(usize, usize, C)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != ZERO {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Motional factor of the atom-cavity coupling, g cos(eta cos(phi) x + varphi),
/// either exact or to first order in eta.
fn coupling_operator(p: &SystemParams, nm: usize, exact: bool) -> DMatrix<C> {
    let b = destroy(nm);
    let x = &b + b.adjoint();
    let k = p.eta * p.phi.cos();
    if exact {
        let xr = x.map(|v| v.re);
        let eig = xr.symmetric_eigen();
        let cosd = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| (k * e + p.varphi).cos()));
        let v = &eig.eigenvectors;
        (v * cosd * v.transpose()).map(|r| C::new(p.g * r, 0.0))
    } else {
        DMatrix::<C>::identity(nm, nm) * C::new(p.g * p.varphi.cos(), 0.0)
            - x * C::new(p.g * p.varphi.sin() * k, 0.0)
    }
}

fn build(p: &SystemParams, d: &DetuningPoint, nc: usize, nm: usize, c: &OracleConfig) -> Generator {
    let id2 = DMatrix::<C>::identity(2, 2);
    let idc = DMatrix::<C>::identity(nc, nc);
    let idm = DMatrix::<C>::identity(nm, nm);
    let mut lower = DMatrix::<C>::zeros(2, 2);
    lower[(0, 1)] = ONE;

    let a = kron3(&idm, &id2, &destroy(nc));
    let sm = kron3(&idm, &lower, &idc);
    let bm = destroy(nm);
    let num_b = kron3(&(bm.adjoint() * &bm), &id2, &idc);
    let xm = &bm + bm.adjoint();
    let coupling = kron3(&coupling_operator(p, nm, c.exact_cosine), &id2, &idc);

    let ad = a.adjoint();
    let sp = sm.adjoint();
    let hop = &coupling * (&sp * &a);
    let h = &num_b * C::new(NU, 0.0) - (&sp * &sm) * C::new(d.delta, 0.0)
        - (&ad * &a) * C::new(d.delta_cav, 0.0)
        + (&a + &ad) * C::new(p.omega_p_drive / 2.0, 0.0)
        + &hop
        + hop.adjoint();

    let mut jumps = vec![&a * C::new((2.0 * p.kappa).sqrt(), 0.0)];
    let alpha = c.recoil();
    if alpha > 0.0 && p.eta > 0.0 {
        let x = kron3(&xm, &id2, &idc);
        let dim = x.nrows();
        let kick = x * (I * p.eta * alpha.sqrt());
        let id = DMatrix::<C>::identity(dim, dim);
        let amp = C::new((p.gamma / 2.0).sqrt(), 0.0);
        jumps.push(&sm * (&id - &kick) * amp);
        jumps.push(&sm * (&id + &kick) * amp);
    } else {
        jumps.push(&sm * C::new(p.gamma.sqrt(), 0.0));
    }

    let mut heff = h;
    for l in &jumps {
        heff -= (l.adjoint() * l) * C::new(0.0, 0.5);
    }

    let dim = heff.nrows();
    let gen = Generator {
        matrix: CsrMatrix::from_triplets(0, Vec::new()),
        n_cavity: nc,
        n_motion: nm,
    };
    let mut trip = Vec::new();
    // -i Heff rho + i rho Heff^dagger
    for (i, k, v) in nonzeros(&heff) {
        for j in 0..dim {
            trip.push((gen.index(i, j), gen.index(k, j), -I * v));
        }
    }
    for (l, j, v) in nonzeros(&heff.adjoint()) {
        for i in 0..dim {
            trip.push((gen.index(i, j), gen.index(i, l), I * v));
        }
    }
    // L rho L^dagger
    for l in &jumps {
        let nz = nonzeros(l);
        for &(i, k, u) in &nz {
            for &(j, m, w) in &nz {
                trip.push((gen.index(i, j), gen.index(k, m), u * w.conj()));
            }
        }
    }
    Generator {
        matrix: CsrMatrix::from_triplets(dim * dim, trip),
        ..gen
    }
}

/// Lindblad generator for the truncated atom + cavity + motion system.
pub fn build_generator(p: &SystemParams, d: &DetuningPoint, c: &OracleConfig) -> Result<Generator> {
    p.validate()?;
    c.validate()?;
    Ok(build(p, d, c.n_cavity, c.n_motion, c))
}

/// Generator with the row of the reference population replaced by a unit
/// row, which removes the trace degeneracy while keeping the band.
fn factor_pinned(g: &Generator, tol: f64) -> Result<(BandLu, usize)> {
    let pin = g.index(g.state(0, 0, 0), g.state(0, 0, 0));
    let n = g.matrix.dim();
    let (kl, ku) = g.matrix.bandwidths();
    let mut band = BandMatrix::zeros(n, kl, ku);
    for r in 0..n {
        if r == pin {
            band.add(r, r, ONE);
        } else {
            for (col, v) in g.matrix.row(r) {
                band.add(r, col, v);
            }
        }
    }
    let lu = band.factor().map_err(|_| Error::NonConvergence {
        residual: f64::INFINITY,
        tol,
    })?;
    Ok((lu, pin))
}

fn norm(x: &[C]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyState {
    pub mean_m: f64,
    pub residual: f64,
    /// Population of the highest motional level.
    pub top_population: f64,
    /// Population of the highest cavity Fock level.
    pub cavity_top_population: f64,
    pub excited_population: f64,
    pub photon_number: f64,
    pub min_eigenvalue: f64,
    pub hilbert_dim: usize,
    #[serde(skip)]
    pub rho: Vec<C>,
}

struct Solved {
    gen: Generator,
    lu: BandLu,
    pin: usize,
    steady: SteadyState,
}

fn solve(p: &SystemParams, d: &DetuningPoint, nc: usize, nm: usize, c: &OracleConfig) -> Result<Solved> {
    let gen = build(p, d, nc, nm, c);
    let (lu, pin) = factor_pinned(&gen, c.tol)?;
    let mut x = vec![ZERO; gen.matrix.dim()];
    x[pin] = ONE;
    lu.solve(&mut x);

    let mut rho = gen.to_matrix(&x);
    rho = (&rho + rho.adjoint()) * C::new(0.5, 0.0);
    let tr = rho.trace();
    rho /= tr;
    let x = gen.from_matrix(&rho);
    let residual = norm(&gen.apply(&x));
    if !(residual <= c.tol) {
        return Err(Error::NonConvergence {
            residual,
            tol: c.tol,
        });
    }

    let mot = gen.motional_matrix(&x);
    let mean_m = (0..nm).map(|m| m as f64 * mot[(m, m)].re).sum();
    let top_population = mot[(nm - 1, nm - 1)].re;
    let cavity_top_population = (0..2).map(|atom| gen.optical_population(&x, atom, nc - 1)).sum();
    let excited_population = (0..nc).map(|n| gen.optical_population(&x, 1, n)).sum();
    let photon_number = (0..2)
        .flat_map(|atom| (0..nc).map(move |n| (atom, n)))
        .map(|(atom, n)| n as f64 * gen.optical_population(&x, atom, n))
        .sum();
    let min_eigenvalue = rho.symmetric_eigenvalues().min();
    let hilbert_dim = gen.hilbert_dim();
    Ok(Solved {
        gen,
        lu,
        pin,
        steady: SteadyState {
            mean_m,
            residual,
            top_population,
            cavity_top_population,
            excited_population,
            photon_number,
            min_eigenvalue,
            hilbert_dim,
            rho: x,
        },
    })
}

fn motion_is_frozen(p: &SystemParams) -> bool {
    p.eta == 0.0
}

/// Steady state without the truncation check, for reports that want to show
/// a suspect result together with the reason.
pub fn solve_steady_state(p: &SystemParams, d: &DetuningPoint, c: &OracleConfig) -> Result<SteadyState> {
    p.validate()?;
    c.validate()?;
    if motion_is_frozen(p) {
        return Err(Error::invalid(
            "eta = 0 conserves every motional population; use optical_steady_state",
        ));
    }
    Ok(solve(p, d, c.n_cavity, c.n_motion, c)?.steady)
}

/// Mean phonon number of the Lindblad steady state.
pub fn steady_state_mean_m(p: &SystemParams, d: &DetuningPoint, c: &OracleConfig) -> Result<SteadyState> {
    let s = solve_steady_state(p, d, c)?;
    if s.top_population > MOTION_TAIL_LIMIT {
        return Err(Error::TruncationSuspect {
            top_population: s.top_population,
            mean_m: s.mean_m,
        });
    }
    Ok(s)
}

/// Steady state of atom and cavity alone, with the motion removed.
pub fn optical_steady_state(p: &SystemParams, d: &DetuningPoint, c: &OracleConfig) -> Result<SteadyState> {
    p.validate()?;
    if c.n_cavity < 2 {
        return Err(Error::invalid("n_cavity must be at least 2"));
    }
    let frozen = SystemParams { eta: 0.0, ..*p };
    let optics_only = OracleConfig {
        include_recoil: false,
        ..*c
    };
    Ok(solve(&frozen, d, c.n_cavity, 1, &optics_only)?.steady)
}

#[derive(Debug, Clone, Serialize)]
pub struct Relaxation {
    pub gamma: f64,
    /// Generator eigenvalue of the slowest motional population mode.
    pub eigenvalue: (f64, f64),
    /// Next slower-decaying population mode, when one was resolved.
    pub next_eigenvalue: Option<(f64, f64)>,
    pub population_weight: f64,
    /// Relative Arnoldi residual of the selected mode.
    pub ritz_residual: f64,
}

/// Negative real part of the slowest motional population mode of the
/// generator, which estimates the cooling rate.
///
/// The slow end of the spectrum is found by Arnoldi iteration on the inverse
/// of the generator restricted to traceless matrices.
pub fn relaxation_rate(p: &SystemParams, d: &DetuningPoint, c: &OracleConfig) -> Result<Relaxation> {
    p.validate()?;
    c.validate()?;
    if motion_is_frozen(p) {
        return Ok(Relaxation {
            gamma: 0.0,
            eigenvalue: (0.0, 0.0),
            next_eigenvalue: None,
            population_weight: 1.0,
            ritz_residual: 0.0,
        });
    }
    let s = solve(p, d, c.n_cavity, c.n_motion, c)?;
    slow_modes(&s, c.krylov_dim)
}

fn slow_modes(s: &Solved, krylov: usize) -> Result<Relaxation> {
    let gen = &s.gen;
    let rho = &s.steady.rho;
    let n = gen.matrix.dim();
    let nm = gen.n_motion();
    let dop = gen.optical_dim();

    // inverse generator on traceless vectors
    let apply_inverse = |x: &[C]| -> Vec<C> {
        let mut z = x.to_vec();
        z[s.pin] = ZERO;
        s.lu.solve(&mut z);
        let tr = gen.trace(&z);
        z.iter_mut().zip(rho).for_each(|(v, r)| *v -= tr * r);
        z
    };

    // start from a motional population imbalance on top of the steady state
    let mean = s.steady.mean_m;
    let mut v0 = vec![ZERO; n];
    for mi in 0..nm {
        for mj in 0..nm {
            let w = C::new((mi + mj) as f64 / 2.0 - mean + 0.1 * ((mi * 7 + mj * 3) % 5) as f64, 0.0);
            for oi in 0..dop {
                for oj in 0..dop {
                    let k = gen.index(mi * dop + oi, mj * dop + oj);
                    v0[k] = rho[k] * w;
                }
            }
        }
    }
    for mi in 0..nm {
        v0[gen.index(mi * dop, mi * dop)] += C::new(1e-3 * ((mi as f64) * 1.3).sin(), 0.0);
    }
    let tr = gen.trace(&v0);
    v0.iter_mut().zip(rho).for_each(|(v, r)| *v -= tr * r);

    let k_max = krylov.min(n - 1).max(2);
    let mut basis: Vec<Vec<C>> = Vec::with_capacity(k_max + 1);
    let nv = norm(&v0);
    basis.push(v0.iter().map(|v| v / nv).collect());
    let mut h = DMatrix::<C>::zeros(k_max + 1, k_max);
    let mut k = 0;
    while k < k_max {
        let mut w = apply_inverse(&basis[k]);
        let wn = norm(&w);
        for _pass in 0..2 {
            for (j, q) in basis.iter().enumerate() {
                let dot: C = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                h[(j, k)] += dot;
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let beta = norm(&w);
        h[(k + 1, k)] = C::new(beta, 0.0);
        k += 1;
        if beta <= 1e-13 * wn {
            break;
        }
        basis.push(w.iter().map(|v| v / beta).collect());
    }
    let hk = h.view((0, 0), (k, k)).into_owned();
    let beta_last = h[(k, k - 1)].norm();
    let mu = hk
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::invalid("Hessenberg eigenvalues did not converge"))?;

    struct Mode {
        lambda: C,
        weight: f64,
        residual: f64,
    }
    let mut modes = Vec::new();
    for &m in mu.iter() {
        if m.norm() == 0.0 {
            continue;
        }
        let y = ritz_vector(&hk, m);
        let mut x = vec![ZERO; n];
        for (j, q) in basis.iter().take(k).enumerate() {
            let c = y[j];
            x.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
        }
        let xn = norm(&x);
        let mot = gen.motional_matrix(&x);
        let diag = (0..nm).map(|i| mot[(i, i)].norm_sqr()).sum::<f64>().sqrt();
        modes.push(Mode {
            lambda: 1.0 / m,
            weight: diag / xn,
            residual: beta_last * y[k - 1].norm() / m.norm(),
        });
    }
    let mut pop: Vec<&Mode> = modes.iter().filter(|m| m.weight > POPULATION_WEIGHT).collect();
    pop.sort_by(|a, b| a.lambda.re.abs().partial_cmp(&b.lambda.re.abs()).unwrap());
    let first = pop
        .first()
        .ok_or_else(|| Error::invalid("no motional population mode among the slow modes"))?;
    let gamma = -first.lambda.re;
    let next = pop.get(1);
    if let Some(second) = next {
        let g2 = -second.lambda.re;
        if (g2 - gamma).abs() < MODE_SEPARATION * gamma.abs() {
            return Err(Error::ModeIdentificationAmbiguous {
                first: gamma,
                second: g2,
            });
        }
    }
    Ok(Relaxation {
        gamma,
        eigenvalue: (first.lambda.re, first.lambda.im),
        next_eigenvalue: next.map(|m| (m.lambda.re, m.lambda.im)),
        population_weight: first.weight,
        ritz_residual: first.residual,
    })
}

/// Eigenvector of a small matrix for a known eigenvalue, by inverse iteration.
fn ritz_vector(h: &DMatrix<C>, mu: C) -> DVector<C> {
    let k = h.nrows();
    let shift = mu + C::new(1e-10 * mu.norm().max(1e-300), 0.0);
    let lu = (h - DMatrix::<C>::identity(k, k) * shift).lu();
    let mut y = DVector::from_fn(k, |i, _| C::new(1.0 + 0.01 * i as f64, 0.0));
    for _ in 0..3 {
        if let Some(z) = lu.solve(&y) {
            let zn = z.norm();
            if zn.is_finite() && zn > 0.0 {
                y = z / C::new(zn, 0.0);
            }
        }
    }
    y
}
