//! Physical parameters, unit conventions and the density-matrix type.
//!
//! Configuration files carry every frequency in MHz, written as the number
//! that multiplies 2π (a 10 MHz Rabi frequency means Ω = 2π·10 MHz). Inside
//! the library every frequency is an angular frequency in rad/µs and every
//! time is in µs, with ħ = 1. [`mhz`] and [`to_mhz`] convert between the two.
//!
//! The level basis is ordered (S, P, D, Q) everywhere.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;

/// Converts a "2π×" frequency in MHz to an angular frequency in rad/µs.
#[inline]
pub fn mhz(value: f64) -> f64 {
    2.0 * PI * value
}

/// Inverse of [`mhz`].
#[inline]
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

const AMU_KG: f64 = 1.660_539_066_60e-27;

/// Hermiticity tolerance for density matrices (max elementwise deviation).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Electronic levels, in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    S,
    P,
    D,
    Q,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::S, Level::P, Level::D, Level::Q];

    pub fn index(self) -> usize {
        match self {
            Level::S => 0,
            Level::P => 1,
            Level::D => 2,
            Level::Q => 3,
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S" | "s" => Ok(Level::S),
            "P" | "p" => Ok(Level::P),
            "D" | "d" => Ok(Level::D),
            "Q" | "q" => Ok(Level::Q),
            other => Err(Error::UnknownLevel(other.to_string())),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Level::S => "S",
            Level::P => "P",
            Level::D => "D",
            Level::Q => "Q",
        };
        f.write_str(s)
    }
}

/// The three lasers: B couples S–P, R couples D–P, C couples S–Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Beam {
    B,
    R,
    C,
}

impl Beam {
    pub const ALL: [Beam; 3] = [Beam::B, Beam::R, Beam::C];
}

// ---------------------------------------------------------------------------
// Raw (file) configuration, MHz units
// ---------------------------------------------------------------------------

fn default_gamma_q() -> f64 {
    // 1 s lifetime: 1e-6 rad/µs, stored in the 2π× MHz convention.
    to_mhz(1e-6)
}

fn default_mass() -> f64 {
    40.0
}

fn default_direction() -> i32 {
    1
}

/// Atomic constants as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAtom {
    /// Total decay rate of P, MHz.
    pub gamma_p: f64,
    pub beta_ps: f64,
    pub beta_pd: f64,
    /// Decay rate of Q, MHz.
    #[serde(default = "default_gamma_q")]
    pub gamma_q: f64,
    #[serde(default = "default_mass")]
    pub mass_amu: f64,
}

impl Default for RawAtom {
    /// ⁴⁰Ca⁺: γ_P = 2π·22 MHz, β_PS/β_PD = 15, 1 s lifetime of Q.
    fn default() -> Self {
        RawAtom {
            gamma_p: 22.0,
            beta_ps: 15.0 / 16.0,
            beta_pd: 1.0 / 16.0,
            gamma_q: default_gamma_q(),
            mass_amu: default_mass(),
        }
    }
}

/// One laser as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLaser {
    /// Rabi frequency, MHz.
    pub rabi: f64,
    /// Detuning, MHz.
    pub detuning: f64,
    pub wavelength_nm: f64,
    /// +1 or -1 along the trap axis.
    #[serde(default = "default_direction")]
    pub direction: i32,
    /// Half width at half maximum of the laser line, MHz.
    #[serde(default)]
    pub linewidth_hwhm: f64,
}

/// Classical oscillation of the ion along the trap axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMotion {
    /// Trap frequency ν, MHz.
    pub trap_frequency: f64,
    /// Oscillation amplitude |x₀|, nm.
    pub amplitude_nm: f64,
    #[serde(default)]
    pub enabled: bool,
}

impl Default for RawMotion {
    fn default() -> Self {
        RawMotion {
            trap_frequency: 1.0,
            amplitude_nm: 0.0,
            enabled: false,
        }
    }
}

/// Unvalidated configuration, exactly as stored in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub atom: RawAtom,
    pub laser_b: RawLaser,
    pub laser_r: RawLaser,
    pub laser_c: RawLaser,
    #[serde(default)]
    pub motion: RawMotion,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn laser(&self, beam: Beam) -> &RawLaser {
        match beam {
            Beam::B => &self.laser_b,
            Beam::R => &self.laser_r,
            Beam::C => &self.laser_c,
        }
    }

    pub fn laser_mut(&mut self, beam: Beam) -> &mut RawLaser {
        match beam {
            Beam::B => &mut self.laser_b,
            Beam::R => &mut self.laser_r,
            Beam::C => &mut self.laser_c,
        }
    }

    pub fn validate(&self) -> Result<SystemConfig> {
        validate(self)
    }
}

// ---------------------------------------------------------------------------
// Validated configuration, rad/µs units
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpec {
    pub gamma_p: f64,
    pub beta_ps: f64,
    pub beta_pd: f64,
    pub gamma_q: f64,
    pub mass_kg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserDrive {
    pub rabi: f64,
    pub detuning: f64,
    pub wavelength_nm: f64,
    pub direction: Direction,
    pub linewidth_hwhm: f64,
}

impl LaserDrive {
    /// Signed wavenumber along the trap axis, rad/nm.
    pub fn wavenumber(&self) -> f64 {
        self.direction.sign() * 2.0 * PI / self.wavelength_nm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSpec {
    pub trap_frequency: f64,
    pub amplitude_nm: f64,
    pub enabled: bool,
}

/// A checked parameter set in internal units. Construct it with
/// [`validate`]; it cannot be modified afterwards, only rebuilt from a
/// (possibly edited) [`RawConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    atom: AtomSpec,
    lasers: [LaserDrive; 3],
    motion: MotionSpec,
    lamb_dicke: Option<LambDicke>,
    raw: RawConfig,
}

impl SystemConfig {
    pub fn atom(&self) -> &AtomSpec {
        &self.atom
    }

    pub fn laser(&self, beam: Beam) -> &LaserDrive {
        match beam {
            Beam::B => &self.lasers[0],
            Beam::R => &self.lasers[1],
            Beam::C => &self.lasers[2],
        }
    }

    pub fn laser_b(&self) -> &LaserDrive {
        &self.lasers[0]
    }

    pub fn laser_r(&self) -> &LaserDrive {
        &self.lasers[1]
    }

    pub fn laser_c(&self) -> &LaserDrive {
        &self.lasers[2]
    }

    pub fn motion(&self) -> &MotionSpec {
        &self.motion
    }

    /// The file-level description this config was validated from.
    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    /// True when any laser has a non-zero linewidth.
    pub fn has_linewidth(&self) -> bool {
        self.lasers.iter().any(|l| l.linewidth_hwhm > 0.0)
    }

    /// Same configuration with γ_Q forced to zero, as assumed by the
    /// analytical dressed-state model.
    pub fn without_q_decay(&self) -> SystemConfig {
        let mut out = self.clone();
        out.atom.gamma_q = 0.0;
        out.raw.atom.gamma_q = 0.0;
        out
    }
}

fn check_finite(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { field })
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<f64> {
    check_finite(field, v)?;
    if v < 0.0 {
        Err(Error::NegativeRate { field, value: v })
    } else {
        Ok(v)
    }
}

fn positive(field: &'static str, v: f64) -> Result<f64> {
    check_finite(field, v)?;
    if v <= 0.0 {
        Err(Error::NonPositive { field, value: v })
    } else {
        Ok(v)
    }
}

fn direction(field: &'static str, v: i32) -> Result<Direction> {
    match v {
        1 => Ok(Direction::Forward),
        -1 => Ok(Direction::Backward),
        _ => Err(Error::BadDirection { field, value: v }),
    }
}

fn laser(names: [&'static str; 5], raw: &RawLaser) -> Result<LaserDrive> {
    Ok(LaserDrive {
        rabi: mhz(non_negative(names[0], raw.rabi)?),
        detuning: mhz(check_finite(names[1], raw.detuning)?),
        wavelength_nm: positive(names[2], raw.wavelength_nm)?,
        direction: direction(names[3], raw.direction)?,
        linewidth_hwhm: mhz(non_negative(names[4], raw.linewidth_hwhm)?),
    })
}

/// Checks every invariant of the raw configuration and converts it to
/// internal units.
pub fn validate(raw: &RawConfig) -> Result<SystemConfig> {
    let a = &raw.atom;
    let beta_ps = check_finite("atom.beta_ps", a.beta_ps)?;
    let beta_pd = check_finite("atom.beta_pd", a.beta_pd)?;
    for (field, value) in [("atom.beta_ps", beta_ps), ("atom.beta_pd", beta_pd)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::BranchingOutOfRange { field, value });
        }
    }
    let sum = beta_ps + beta_pd;
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::BranchingNotNormalized {
            beta_ps,
            beta_pd,
            sum,
        });
    }
    let atom = AtomSpec {
        gamma_p: mhz(positive("atom.gamma_p", a.gamma_p)?),
        beta_ps,
        beta_pd,
        gamma_q: mhz(non_negative("atom.gamma_q", a.gamma_q)?),
        mass_kg: positive("atom.mass_amu", a.mass_amu)? * AMU_KG,
    };

    let lasers = [
        laser(
            [
                "laser_b.rabi",
                "laser_b.detuning",
                "laser_b.wavelength_nm",
                "laser_b.direction",
                "laser_b.linewidth_hwhm",
            ],
            &raw.laser_b,
        )?,
        laser(
            [
                "laser_r.rabi",
                "laser_r.detuning",
                "laser_r.wavelength_nm",
                "laser_r.direction",
                "laser_r.linewidth_hwhm",
            ],
            &raw.laser_r,
        )?,
        laser(
            [
                "laser_c.rabi",
                "laser_c.detuning",
                "laser_c.wavelength_nm",
                "laser_c.direction",
                "laser_c.linewidth_hwhm",
            ],
            &raw.laser_c,
        )?,
    ];

    let m = &raw.motion;
    let amplitude_nm = non_negative("motion.amplitude_nm", m.amplitude_nm)?;
    let trap_frequency = if m.enabled {
        mhz(positive("motion.trap_frequency", m.trap_frequency)?)
    } else {
        mhz(check_finite("motion.trap_frequency", m.trap_frequency)?)
    };
    let motion = MotionSpec {
        trap_frequency,
        amplitude_nm,
        enabled: m.enabled,
    };

    let lamb_dicke = motion
        .enabled
        .then(|| compute_lamb_dicke(&lasers, motion.amplitude_nm));

    Ok(SystemConfig {
        atom,
        lasers,
        motion,
        lamb_dicke,
        raw: raw.clone(),
    })
}

// ---------------------------------------------------------------------------
// Derived quantities
// ---------------------------------------------------------------------------

/// Detuning mismatches of the two resonance conditions, rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceMismatch {
    /// Δ_B − Δ_R − Δ_C; zero at three-photon resonance.
    pub three_photon: f64,
    /// Δ_R − Δ_B; zero at two-photon (Λ dark) resonance.
    pub two_photon: f64,
    /// Δ_C; zero when the clock laser is on carrier resonance.
    pub carrier_c: f64,
}

pub fn resonance_mismatches(config: &SystemConfig) -> ResonanceMismatch {
    let (db, dr, dc) = (
        config.laser_b().detuning,
        config.laser_r().detuning,
        config.laser_c().detuning,
    );
    ResonanceMismatch {
        three_photon: db - dr - dc,
        two_photon: dr - db,
        carrier_c: dc,
    }
}

/// Signed Lamb-Dicke parameters η_j = k_j·|x₀|/2 and the three-photon
/// wavevector mismatch Δk = k_R − k_B + k_C in units of |k_B|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambDicke {
    pub eta_b: f64,
    pub eta_r: f64,
    pub eta_c: f64,
    pub delta_k_over_kb: f64,
    /// Δk in rad/nm.
    pub delta_k: f64,
}

impl LambDicke {
    pub fn eta(&self, beam: Beam) -> f64 {
        match beam {
            Beam::B => self.eta_b,
            Beam::R => self.eta_r,
            Beam::C => self.eta_c,
        }
    }
}

fn compute_lamb_dicke(lasers: &[LaserDrive; 3], amplitude_nm: f64) -> LambDicke {
    let [kb, kr, kc] = [
        lasers[0].wavenumber(),
        lasers[1].wavenumber(),
        lasers[2].wavenumber(),
    ];
    let delta_k = kr - kb + kc;
    LambDicke {
        eta_b: kb * amplitude_nm / 2.0,
        eta_r: kr * amplitude_nm / 2.0,
        eta_c: kc * amplitude_nm / 2.0,
        delta_k_over_kb: delta_k / kb.abs(),
        delta_k,
    }
}

pub fn lamb_dicke_parameters(config: &SystemConfig) -> Result<LambDicke> {
    config.lamb_dicke.ok_or(Error::MotionDisabled)
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// A physical 4×4 density matrix over (S, P, D, Q): Hermitian, unit trace,
/// positive semidefinite (within the module tolerances).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Mat4);

impl DensityMatrix {
    /// Validates `m` against all density-matrix invariants.
    pub fn new(m: Mat4) -> Result<Self> {
        let herm = max_abs(&(m - m.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(Error::NonPhysicalState(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NonPhysicalState(format!("trace is {tr}")));
        }
        let min = min_eigenvalue(&m);
        if min < -POSITIVITY_TOL {
            return Err(Error::NonPhysicalState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(DensityMatrix(m))
    }

    /// The projector |level⟩⟨level|.
    pub fn pure(level: Level) -> Self {
        let mut m = Mat4::zeros();
        m[(level.index(), level.index())] = C64::new(1.0, 0.0);
        DensityMatrix(m)
    }

    /// |ψ⟩⟨ψ| for a normalized amplitude vector.
    pub fn from_amplitudes(psi: &[C64; 4]) -> Result<Self> {
        let m = Mat4::from_fn(|i, j| psi[i] * psi[j].conj());
        DensityMatrix::new(m)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat4 {
        self.0
    }

    pub fn populations(&self) -> [f64; 4] {
        populations(&self.0)
    }

    pub fn population(&self, level: Level) -> f64 {
        self.0[(level.index(), level.index())].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

/// Parses a level label and returns its projector.
pub fn pure_state(label: &str) -> Result<DensityMatrix> {
    Ok(DensityMatrix::pure(label.parse()?))
}

pub(crate) fn populations(m: &Mat4) -> [f64; 4] {
    [m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re, m[(3, 3)].re]
}

pub(crate) fn max_abs(m: &Mat4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &Mat4) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().min()
}
