//! Physical parameters of the atom-cavity setup and the quantities derived
//! directly from them.
//!
//! Every frequency is measured in units of the trap frequency, so the trap
//! frequency itself is the constant [`NU`] and never appears as a field.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trap frequency. All rates and detunings are expressed in these units.
pub const NU: f64 = 1.0;

/// Weak-drive regime bound on the perturbation parameter epsilon.
pub const WEAK_DRIVE_LIMIT: f64 = 0.1;

/// Lamb-Dicke regime bound on eta * sqrt(m_max).
pub const LAMB_DICKE_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Atomic linewidth.
    pub gamma: f64,
    /// Cavity field decay rate (the cavity loses photons at 2 kappa).
    pub kappa: f64,
    /// Vacuum Rabi frequency.
    pub g: f64,
    /// Pump strength of the laser driving the cavity.
    pub omega_p_drive: f64,
    /// Lamb-Dicke parameter.
    pub eta: f64,
    /// Angle between the cavity wave vector and the motional axis.
    pub phi: f64,
    /// Phase of the trap center in the standing wave.
    pub varphi: f64,
    /// Geometric diffusion factor.
    pub d0: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            kappa: 1.0,
            g: 0.0,
            omega_p_drive: 0.0,
            eta: 0.0,
            phi: 0.0,
            varphi: 0.0,
            d0: 1.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("g", self.g),
            ("omega_p_drive", self.omega_p_drive),
            ("eta", self.eta),
            ("phi", self.phi),
            ("varphi", self.varphi),
            ("d0", self.d0),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if self.gamma <= 0.0 {
            return Err(Error::invalid("gamma must be > 0"));
        }
        if self.kappa <= 0.0 {
            return Err(Error::invalid("kappa must be > 0"));
        }
        for (name, v) in [
            ("g", self.g),
            ("omega_p_drive", self.omega_p_drive),
            ("eta", self.eta),
            ("d0", self.d0),
        ] {
            if v < 0.0 {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Sets `g` so that the position-dependent cooperativity equals `c`.
    ///
    /// Fails at a node of the standing wave, where no finite `g` reaches a
    /// non-zero cooperativity.
    pub fn with_cooperativity(mut self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("cooperativity must be >= 0, got {c}")));
        }
        if at_node(self.varphi) {
            return Err(Error::NodeSingular);
        }
        let cos2 = self.varphi.cos().powi(2);
        self.g = (c * self.kappa * self.gamma / 2.0 / cos2).sqrt();
        Ok(self)
    }

    /// Coupling at the trap center, g cos(varphi).
    pub fn coupling(&self) -> f64 {
        self.g * self.varphi.cos()
    }

    /// g^2 cos^2(varphi), the squared coupling at the trap center.
    pub fn coupling_sq(&self) -> f64 {
        self.coupling().powi(2)
    }

    /// Effective Lamb-Dicke parameter eta cos(phi) sin(varphi).
    pub fn eta_eff(&self) -> f64 {
        self.eta * self.phi.cos() * self.varphi.sin()
    }
}

/// True when the trap center sits on a node of the standing wave to within
/// floating-point resolution of the phase.
pub fn at_node(varphi: f64) -> bool {
    varphi.cos().abs() < 1e-15
}

/// Position-dependent cooperativity C = g^2 cos^2(varphi) / (kappa gamma / 2).
pub fn cooperativity(p: &SystemParams) -> f64 {
    p.coupling_sq() / (p.kappa * p.gamma / 2.0)
}

/// Cooperativity at an antinode, the upper bound of [`cooperativity`].
pub fn cooperativity_max(p: &SystemParams) -> f64 {
    p.g * p.g / (p.kappa * p.gamma / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningPoint {
    /// Pump-atom detuning.
    pub delta: f64,
    /// Pump-cavity detuning.
    pub delta_cav: f64,
}

impl DetuningPoint {
    pub fn new(delta: f64, delta_cav: f64) -> Self {
        Self { delta, delta_cav }
    }

    /// Atom-cavity detuning.
    pub fn delta_c(&self) -> f64 {
        self.delta - self.delta_cav
    }
}

/// Mean intracavity photon number of the empty driven cavity.
pub fn weak_drive_photon_number(p: &SystemParams, d: &DetuningPoint) -> f64 {
    let amp = Complex64::new(p.omega_p_drive / 2.0, 0.0) / Complex64::new(d.delta_cav, p.kappa);
    amp.norm_sqr()
}

/// Perturbation parameter epsilon = |Omega_P / 2(Delta + i kappa)|.
pub fn drive_parameter(p: &SystemParams, d: &DetuningPoint) -> f64 {
    weak_drive_photon_number(p, d).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedStates {
    pub theta: f64,
    pub omega_plus: Complex64,
    pub omega_minus: Complex64,
}

/// Dressed states of the single-excitation atom-cavity block.
///
/// The eigenfrequencies are those of the non-Hermitian block
/// `[[-delta - i gamma/2, g cos(varphi)], [g cos(varphi), -Delta - i kappa]]`,
/// ordered by descending real part, ties broken by descending imaginary part.
/// The mixing angle lives in `[0, pi/2)`.
pub fn dressed_states(p: &SystemParams, d: &DetuningPoint) -> DressedStates {
    let gc = p.coupling();
    let delta_c = d.delta_c();
    let theta = if gc == 0.0 {
        0.0
    } else if delta_c == 0.0 {
        std::f64::consts::FRAC_PI_4
    } else {
        0.5 * (2.0 * gc / delta_c)
            .atan()
            .rem_euclid(std::f64::consts::PI)
    };

    let a = Complex64::new(-d.delta, -p.gamma / 2.0);
    let b = Complex64::new(-d.delta_cav, -p.kappa);
    let mean = (a + b) / 2.0;
    let half_diff = (a - b) / 2.0;
    let root = (half_diff * half_diff + gc * gc).sqrt();
    let (mut hi, mut lo) = (mean + root, mean - root);
    if (lo.re, lo.im) > (hi.re, hi.im) {
        std::mem::swap(&mut hi, &mut lo);
    }
    DressedStates {
        theta,
        omega_plus: hi,
        omega_minus: lo,
    }
}

/// Pump-atom detuning on the red-sideband resonance of the dressed states
/// as a function of the pump-cavity detuning.
pub fn resonance_curve_delta(p: &SystemParams, delta_cav: f64) -> Result<f64> {
    let denom = delta_cav + NU;
    if denom == 0.0 {
        return Err(Error::PoleAtDetuning { delta_cav });
    }
    let kg = p.kappa * p.gamma / 2.0;
    Ok((kg + p.coupling_sq()) / denom - NU)
}

/// Pump-atom detuning on which the leading heating amplitude through
/// spontaneous emission interferes destructively.
pub fn interference_curve_delta(p: &SystemParams, delta_cav: f64) -> Result<f64> {
    let denom = delta_cav - NU;
    if denom == 0.0 {
        return Err(Error::PoleAtDetuning { delta_cav });
    }
    let kg = p.kappa * p.gamma / 2.0;
    Ok((kg - p.coupling_sq()) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeFlags {
    pub weak_drive_ok: bool,
    pub lamb_dicke_ok: bool,
}

/// Highest relevantly occupied level of a thermal state: mean plus three
/// standard deviations, at least one.
pub fn relevant_level(mean_m: f64) -> f64 {
    let sd = (mean_m * (mean_m + 1.0)).sqrt();
    (mean_m + 3.0 * sd).ceil().max(1.0)
}

/// Regime checks. `mean_m` is `None` for points without a steady state,
/// which are never inside the Lamb-Dicke regime at long times.
pub fn regime_flags(p: &SystemParams, d: &DetuningPoint, mean_m: Option<f64>) -> RegimeFlags {
    let weak_drive_ok = drive_parameter(p, d) < WEAK_DRIVE_LIMIT;
    let lamb_dicke_ok = match mean_m {
        Some(m) if m.is_finite() && m >= 0.0 => p.eta * relevant_level(m).sqrt() < LAMB_DICKE_LIMIT,
        _ => false,
    };
    RegimeFlags {
        weak_drive_ok,
        lamb_dicke_ok,
    }
}
