//! Heating and cooling rates in second order of the Lamb-Dicke expansion,
//! the resulting cooling rate and steady-state occupation, and the closed
//! forms the rates reduce to in various limits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{at_node, cooperativity, drive_parameter, DetuningPoint, SystemParams, NU};

/// The two brackets of the response function. Their squares sum to `f`.
///
/// `(kappa gamma / 2)(1 + C)` is written as `kappa gamma / 2 + g^2 cos^2`
/// so that the lossless limit stays finite.
pub fn response_brackets(p: &SystemParams, delta_cav: f64, delta_c: f64) -> (f64, f64) {
    let kg = p.kappa * p.gamma / 2.0;
    let delta = delta_c + delta_cav;
    (
        delta_cav * delta - (kg + p.coupling_sq()),
        delta_cav * p.gamma / 2.0 + delta * p.kappa,
    )
}

/// Response function f(Delta, delta_c). Its real zeros are the resonances of
/// the coupled atom-cavity system.
pub fn response_f(p: &SystemParams, delta_cav: f64, delta_c: f64) -> f64 {
    let (a, b) = response_brackets(p, delta_cav, delta_c);
    a * a + b * b
}

fn checked_f(p: &SystemParams, d: &DetuningPoint, delta_cav: f64) -> Result<f64> {
    let f = response_f(p, delta_cav, d.delta_c());
    if f > 0.0 && f.is_finite() {
        Ok(f)
    } else {
        Err(Error::ResonanceSingular {
            delta: d.delta,
            delta_cav,
        })
    }
}

/// Excited-state factor rho_e = (Omega_P^2 / 4) g^2 / f(Delta, delta_c).
/// The excited population itself is `rho_e cos^2(varphi)`.
pub fn excited_population(p: &SystemParams, d: &DetuningPoint) -> Result<f64> {
    let f = checked_f(p, d, d.delta_cav)?;
    Ok(p.omega_p_drive.powi(2) / 4.0 * p.g * p.g / f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub f0: f64,
    /// f(Delta - nu, delta_c), the denominator of the heating terms.
    pub f_minus: f64,
    /// f(Delta + nu, delta_c), the denominator of the cooling terms.
    pub f_plus: f64,
    pub rho_e: f64,
    pub diffusion: f64,
    pub a_gamma_plus: f64,
    pub a_gamma_minus: f64,
    pub a_kappa_plus: f64,
    pub a_kappa_minus: f64,
    pub a_plus: f64,
    pub a_minus: f64,
}

pub fn rate_breakdown(p: &SystemParams, d: &DetuningPoint) -> Result<RateBreakdown> {
    let f0 = checked_f(p, d, d.delta_cav)?;
    let f_minus = checked_f(p, d, d.delta_cav - NU)?;
    let f_plus = checked_f(p, d, d.delta_cav + NU)?;
    let rho_e = p.omega_p_drive.powi(2) / 4.0 * p.g * p.g / f0;

    let kg = p.kappa * p.gamma / 2.0;
    let gc2 = p.coupling_sq();
    let cos2 = p.varphi.cos().powi(2);
    let delta = d.delta;

    // sign = +1 for heating (A+), -1 for cooling (A-)
    let a_gamma = |sign: f64, f_shift: f64| {
        let dc = d.delta_cav - sign * NU;
        let first = dc * delta - (kg - gc2);
        let second = dc * p.gamma / 2.0 + delta * p.kappa;
        p.gamma * rho_e / f_shift * (first * first + second * second)
    };
    let a_kappa = |sign: f64, f_shift: f64| {
        let x = delta - sign * NU / 2.0;
        2.0 * p.kappa * 4.0 * rho_e * gc2 / f_shift * (x * x + p.gamma * p.gamma / 4.0)
    };

    let a_gamma_plus = a_gamma(1.0, f_minus);
    let a_gamma_minus = a_gamma(-1.0, f_plus);
    let a_kappa_plus = a_kappa(1.0, f_minus);
    let a_kappa_minus = a_kappa(-1.0, f_plus);
    let diffusion = p.gamma * rho_e * cos2 * p.d0;
    let mech = p.phi.cos().powi(2) * p.varphi.sin().powi(2);

    Ok(RateBreakdown {
        f0,
        f_minus,
        f_plus,
        rho_e,
        diffusion,
        a_gamma_plus,
        a_gamma_minus,
        a_kappa_plus,
        a_kappa_minus,
        a_plus: diffusion + mech * (a_gamma_plus + a_kappa_plus),
        a_minus: diffusion + mech * (a_gamma_minus + a_kappa_minus),
    })
}

/// Heating and cooling rate pair, without the eta^2 prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePair {
    pub a_plus: f64,
    pub a_minus: f64,
}

impl From<&RateBreakdown> for RatePair {
    fn from(b: &RateBreakdown) -> Self {
        RatePair {
            a_plus: b.a_plus,
            a_minus: b.a_minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoolingResult {
    pub gamma_cool: f64,
    /// `None` when there is no steady state.
    pub mean_m: Option<f64>,
    pub steady: bool,
}

impl CoolingResult {
    pub fn from_rates(rates: RatePair, eta: f64) -> Self {
        let diff = rates.a_minus - rates.a_plus;
        let gamma_cool = eta * eta * diff;
        let steady = gamma_cool > 0.0;
        CoolingResult {
            gamma_cool,
            mean_m: steady.then(|| rates.a_plus / diff),
            steady,
        }
    }
}

pub fn cooling_result(p: &SystemParams, d: &DetuningPoint) -> Result<CoolingResult> {
    let b = rate_breakdown(p, d)?;
    Ok(CoolingResult::from_rates((&b).into(), p.eta))
}

/// Rates at gamma = 0, where only scattering through cavity decay survives.
pub fn rates_bad_cavity(p: &SystemParams, d: &DetuningPoint) -> Result<RatePair> {
    let lossless = SystemParams { gamma: 0.0, ..*p };
    let f0 = checked_f(&lossless, d, d.delta_cav)?;
    let rho_e = p.omega_p_drive.powi(2) / 4.0 * p.g * p.g / f0;
    let gc2 = p.coupling_sq();
    let pre = p.phi.cos().powi(2) * rho_e * 2.0 * p.kappa * gc2 * p.varphi.sin().powi(2);
    let rate = |sign: f64| {
        let dd = d.delta - sign * NU;
        let first = (d.delta_cav - sign * NU) * dd - gc2;
        let denom = first * first + dd * dd * p.kappa * p.kappa;
        if denom > 0.0 {
            Ok(pre * (2.0 * d.delta - sign * NU).powi(2) / denom)
        } else {
            Err(Error::ResonanceSingular {
                delta: d.delta,
                delta_cav: d.delta_cav - sign * NU,
            })
        }
    };
    Ok(RatePair {
        a_plus: rate(1.0)?,
        a_minus: rate(-1.0)?,
    })
}

/// Bad-cavity rates at delta = 0, which take the form known from EIT cooling.
/// Like [`rates_bad_cavity`], rho_e is taken at gamma = 0.
pub fn rates_eit(p: &SystemParams, delta_cav: f64) -> Result<RatePair> {
    let gc2 = p.coupling_sq();
    if gc2 == 0.0 {
        return Ok(RatePair {
            a_plus: 0.0,
            a_minus: 0.0,
        });
    }
    // f(Delta, -Delta) at gamma = 0 is g^4 cos^4
    let rho_e = p.omega_p_drive.powi(2) / 4.0 * p.g * p.g / (gc2 * gc2);
    let pre = p.phi.cos().powi(2) * rho_e * 2.0 * p.kappa * NU * NU * gc2 * p.varphi.sin().powi(2);
    let rate = |sign: f64| {
        let x = NU * (NU - sign * delta_cav) - gc2;
        pre / (p.kappa * p.kappa * NU * NU + x * x)
    };
    Ok(RatePair {
        a_plus: rate(1.0),
        a_minus: rate(-1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EitOptimum {
    pub delta_cav: f64,
    pub mean_m: f64,
    pub gamma_cool: f64,
}

/// Optimum of EIT-like cooling at delta = 0.
pub fn optimum_eit(p: &SystemParams) -> Result<EitOptimum> {
    let gc2 = p.coupling_sq();
    if gc2 == 0.0 {
        return Err(Error::DegenerateOptimum(
            "no atom-cavity coupling at the trap center".into(),
        ));
    }
    let delta_cav = gc2 / NU - NU;
    if delta_cav == 0.0 {
        return Err(Error::DegenerateOptimum(
            "optimal pump-cavity detuning is zero (g^2 cos^2 = nu^2)".into(),
        ));
    }
    let rho_e = excited_population(p, &DetuningPoint::new(0.0, delta_cav))?;
    Ok(EitOptimum {
        delta_cav,
        mean_m: (p.kappa / (2.0 * delta_cav)).powi(2),
        gamma_cool: 2.0 * p.eta_eff().powi(2) * rho_e * gc2 / p.kappa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceOptimum {
    pub delta: f64,
    pub delta_cav: f64,
    pub mean_m: f64,
    pub gamma_cool: f64,
}

/// Optimum of interference cooling at delta = nu/2, for the pump-cavity
/// detuning that maximizes A-/A+.
pub fn optimum_interference(p: &SystemParams) -> Result<InterferenceOptimum> {
    let c = cooperativity(p);
    if c <= 0.0 {
        return Err(Error::DegenerateOptimum("cooperativity is zero".into()));
    }
    let cos2_phi = p.phi.cos().powi(2);
    let sin2 = p.varphi.sin().powi(2);
    if cos2_phi == 0.0 || sin2 == 0.0 {
        return Err(Error::DegenerateOptimum(
            "no mechanical coupling to the cavity field".into(),
        ));
    }
    let gc2 = p.coupling_sq();
    let delta = NU / 2.0;
    let delta_cav = 2.0 * gc2 / (3.0 * NU) - NU;
    let cot2 = p.varphi.cos().powi(2) / sin2;
    let mean_m = 9.0 / (16.0 * c) * (1.0 + cot2 * p.d0 / cos2_phi);
    let rho_e = excited_population(p, &DetuningPoint::new(delta, delta_cav))?;
    Ok(InterferenceOptimum {
        delta,
        delta_cav,
        mean_m,
        gamma_cool: p.eta_eff().powi(2) * rho_e * 32.0 / 9.0 * gc2 / p.kappa,
    })
}

/// Leading order in the cooperativity: the rates of a two-level atom in a
/// standing wave in free space.
pub fn rates_low_cooperativity(p: &SystemParams, d: &DetuningPoint) -> Result<RatePair> {
    if at_node(p.varphi) {
        return Err(Error::NodeSingular);
    }
    let cos2 = p.varphi.cos().powi(2);
    let a0 = p.gamma * excited_population(p, d)? * cos2;
    let tan2 = p.varphi.sin().powi(2) / cos2;
    let g4 = p.gamma * p.gamma / 4.0;
    let num = d.delta * d.delta + g4;
    let rate = |sign: f64| {
        let x = d.delta - sign * NU;
        a0 * (p.d0 + p.phi.cos().powi(2) * tan2 * num / (x * x + g4))
    };
    Ok(RatePair {
        a_plus: rate(1.0),
        a_minus: rate(-1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub mean_m: f64,
    pub gamma_cool: f64,
    /// Whether gamma lies on the side of nu where the estimate applies.
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeSpaceLimits {
    /// Standing-wave Rabi frequency Omega_SW = 2 g epsilon.
    pub omega_sw: f64,
    pub sideband: LimitEstimate,
    pub doppler: LimitEstimate,
}

/// Sideband (delta = -nu, gamma < nu) and Doppler (delta = -gamma/2,
/// gamma > nu) limits of the low-cooperativity rates. The pump-cavity
/// detuning enters through the intracavity amplitude epsilon.
pub fn limits_sideband_doppler(p: &SystemParams, delta_cav: f64) -> Result<FreeSpaceLimits> {
    if at_node(p.varphi) {
        return Err(Error::NodeSingular);
    }
    let cos2 = p.varphi.cos().powi(2);
    let cos2_phi = p.phi.cos().powi(2);
    let sin2 = p.varphi.sin().powi(2);
    let geom = if p.d0 == 0.0 {
        0.0
    } else {
        cos2 / sin2 * p.d0 / cos2_phi
    };
    let eps = drive_parameter(p, &DetuningPoint::new(0.0, delta_cav));
    let omega_sw = 2.0 * p.g * eps;
    let mech = p.eta * p.eta * sin2 * cos2_phi * omega_sw * omega_sw;
    let ratio = p.gamma / (4.0 * NU);
    Ok(FreeSpaceLimits {
        omega_sw,
        sideband: LimitEstimate {
            mean_m: ratio * ratio * (1.0 + 4.0 * geom),
            gamma_cool: mech / p.gamma,
            valid: p.gamma < NU,
        },
        doppler: LimitEstimate {
            mean_m: ratio * (1.0 + geom) - 0.5,
            gamma_cool: mech * 2.0 * NU / (p.gamma * p.gamma),
            valid: p.gamma > NU,
        },
    })
}
