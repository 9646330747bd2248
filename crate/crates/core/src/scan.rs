//! Parameter sweeps of the steady state and peak finding on the results.
//!
//! Every grid point is an independent solve of an edited copy of the base
//! configuration. Points run on a rayon pool and are gathered by index, so
//! the output does not depend on the number of workers. A point that fails
//! is kept as a flagged row of NaNs.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::floquet::solve_floquet_auto;
use crate::liouvillian::carrier_superoperator;
use crate::model::{Beam, Level, RawConfig};
use crate::steady;

/// Environment variable holding the default number of scan workers.
pub const WORKERS_ENV: &str = "NSCHEME_WORKERS";

/// Version stamp written into JSON outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `git describe` of the source tree at build time, when available.
pub fn git_describe() -> &'static str {
    option_env!("NSCHEME_GIT_DESCRIBE").unwrap_or("unknown")
}

/// A scalar configuration field, in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rabi(Beam),
    Detuning(Beam),
    Linewidth(Beam),
    GammaP,
    GammaQ,
    TrapFrequency,
}

impl Axis {
    pub fn get(self, raw: &RawConfig) -> f64 {
        match self {
            Axis::Rabi(b) => raw.laser(b).rabi,
            Axis::Detuning(b) => raw.laser(b).detuning,
            Axis::Linewidth(b) => raw.laser(b).linewidth_hwhm,
            Axis::GammaP => raw.atom.gamma_p,
            Axis::GammaQ => raw.atom.gamma_q,
            Axis::TrapFrequency => raw.motion.trap_frequency,
        }
    }

    pub fn set(self, raw: &mut RawConfig, value: f64) {
        match self {
            Axis::Rabi(b) => raw.laser_mut(b).rabi = value,
            Axis::Detuning(b) => raw.laser_mut(b).detuning = value,
            Axis::Linewidth(b) => raw.laser_mut(b).linewidth_hwhm = value,
            Axis::GammaP => raw.atom.gamma_p = value,
            Axis::GammaQ => raw.atom.gamma_q = value,
            Axis::TrapFrequency => raw.motion.trap_frequency = value,
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// Paths such as `laser_R.detuning` (beam letter case-insensitive),
    /// `atom.gamma_q` or `motion.trap_frequency`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownAxis(s.to_string());
        let (section, field) = s.split_once('.').ok_or_else(unknown)?;
        let section = section.to_ascii_lowercase();
        if let Some(letter) = section.strip_prefix("laser_") {
            let beam = match letter {
                "b" => Beam::B,
                "r" => Beam::R,
                "c" => Beam::C,
                _ => return Err(unknown()),
            };
            return match field {
                "rabi" => Ok(Axis::Rabi(beam)),
                "detuning" => Ok(Axis::Detuning(beam)),
                "linewidth_hwhm" => Ok(Axis::Linewidth(beam)),
                _ => Err(unknown()),
            };
        }
        match (section.as_str(), field) {
            ("atom", "gamma_p") => Ok(Axis::GammaP),
            ("atom", "gamma_q") => Ok(Axis::GammaQ),
            ("motion", "trap_frequency") => Ok(Axis::TrapFrequency),
            _ => Err(unknown()),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let beam = |b: &Beam| match b {
            Beam::B => "B",
            Beam::R => "R",
            Beam::C => "C",
        };
        match self {
            Axis::Rabi(b) => write!(f, "laser_{}.rabi", beam(b)),
            Axis::Detuning(b) => write!(f, "laser_{}.detuning", beam(b)),
            Axis::Linewidth(b) => write!(f, "laser_{}.linewidth_hwhm", beam(b)),
            Axis::GammaP => f.write_str("atom.gamma_p"),
            Axis::GammaQ => f.write_str("atom.gamma_q"),
            Axis::TrapFrequency => f.write_str("motion.trap_frequency"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Ion at rest.
    Carrier,
    /// Floquet blocks, starting at this order and raised until converged.
    Floquet(usize),
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solver::Carrier => f.write_str("carrier"),
            Solver::Floquet(n) => write!(f, "floquet({n})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaQMode {
    #[default]
    Physical,
    /// γ_Q forced to zero, as in the dressed-state model.
    Zero,
}

impl FromStr for GammaQMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(GammaQMode::Physical),
            "zero" => Ok(GammaQMode::Zero),
            other => Err(Error::InvalidInput(format!(
                "gamma_Q mode must be `physical` or `zero`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for GammaQMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GammaQMode::Physical => "physical",
            GammaQMode::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub axis: Axis,
    /// MHz.
    pub start: f64,
    /// MHz.
    pub stop: f64,
    pub points: usize,
    pub solver: Solver,
    pub gamma_q_mode: GammaQMode,
}

impl ScanSpec {
    pub fn new(axis: Axis, start: f64, stop: f64, points: usize) -> Result<Self> {
        let spec = ScanSpec {
            axis,
            start,
            stop,
            points,
            solver: Solver::Carrier,
            gamma_q_mode: GammaQMode::Physical,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_gamma_q_mode(mut self, mode: GammaQMode) -> Self {
        self.gamma_q_mode = mode;
        self
    }

    fn check(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidInput(format!("points must be at least 2, got {}", self.points)));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(Error::InvalidInput(format!(
                "scan range {}:{} must be finite with start < stop",
                self.start, self.stop
            )));
        }
        if let Solver::Floquet(0) = self.solver {
            return Err(Error::InvalidInput("Floquet order must be at least 1".into()));
        }
        Ok(())
    }

    /// Grid value of point `i`, MHz.
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.stop
        } else {
            self.start + (self.stop - self.start) * i as f64 / (self.points - 1) as f64
        }
    }
}

/// Outcome of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub axis_mhz: f64,
    pub populations: [f64; 4],
    pub residual: f64,
    /// Error tag of a failed point.
    pub flag: Option<String>,
    /// max |ρ⁽⁻ⁿ⁾ − (ρ⁽ⁿ⁾)†| for Floquet points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing_deviation: Option<f64>,
    /// Floquet order used at this point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floquet_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub axis: Axis,
    pub solver: Solver,
    pub gamma_q_mode: GammaQMode,
    pub config_sha256: String,
    pub points: Vec<ScanPoint>,
}

impl Spectrum {
    pub fn axis_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.axis_mhz).collect()
    }

    pub fn level(&self, level: Level) -> Vec<f64> {
        self.points.iter().map(|p| p.populations[level.index()]).collect()
    }

    /// CSV with header `axis_MHz,P_S,P_P,P_D,P_Q,residual,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis_MHz,P_S,P_P,P_D,P_Q,residual,flag\n");
        for p in &self.points {
            let q = p.populations;
            let _ = writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.3e},{}",
                p.axis_mhz,
                q[0],
                q[1],
                q[2],
                q[3],
                p.residual,
                p.flag.as_deref().unwrap_or("")
            );
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "metadata": {
                "version": VERSION,
                "git_describe": git_describe(),
                "config_sha256": self.config_sha256,
                "solver": self.solver.to_string(),
                "gamma_q_mode": self.gamma_q_mode.to_string(),
                "axis": self.axis.to_string(),
                "units": "MHz (values multiply 2*pi)",
            },
            "points": self.points,
        })
    }
}

/// SHA-256 of the configuration's canonical JSON.
pub fn config_hash(raw: &RawConfig) -> String {
    let digest = Sha256::digest(raw.to_json().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Worker count from `NSCHEME_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Solves the single grid point `value` (MHz) of `spec`.
pub fn solve_point(base: &RawConfig, spec: &ScanSpec, value: f64) -> ScanPoint {
    let mut raw = base.clone();
    spec.axis.set(&mut raw, value);
    if spec.gamma_q_mode == GammaQMode::Zero {
        raw.atom.gamma_q = 0.0;
    }
    let result = raw.validate().and_then(|config| match spec.solver {
        Solver::Carrier => {
            let sol = steady::solve(&carrier_superoperator(&config))?;
            Ok((sol.rho.populations(), sol.residual, None, None))
        }
        Solver::Floquet(order) => {
            let f = solve_floquet_auto(&config, order)?;
            Ok((f.populations(), f.residual, Some(f.pairing_deviation), Some(f.order)))
        }
    });
    match result {
        Ok((populations, residual, pairing_deviation, floquet_order)) => ScanPoint {
            axis_mhz: value,
            populations,
            residual,
            flag: None,
            pairing_deviation,
            floquet_order,
        },
        Err(e) => ScanPoint {
            axis_mhz: value,
            populations: [f64::NAN; 4],
            residual: f64::NAN,
            flag: Some(e.name().to_string()),
            pairing_deviation: None,
            floquet_order: None,
        },
    }
}

/// Runs `spec` with [`default_workers`] workers.
pub fn run_scan(base: &RawConfig, spec: &ScanSpec) -> Result<Spectrum> {
    run_scan_with_workers(base, spec, default_workers())
}

pub fn run_scan_with_workers(base: &RawConfig, spec: &ScanSpec, workers: usize) -> Result<Spectrum> {
    spec.check()?;
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let points = pool.install(|| {
        (0..spec.points)
            .into_par_iter()
            .map(|i| solve_point(base, spec, spec.value(i)))
            .collect()
    });
    Ok(Spectrum {
        axis: spec.axis,
        solver: spec.solver,
        gamma_q_mode: spec.gamma_q_mode,
        config_sha256: config_hash(base),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// MHz.
    pub location: f64,
    pub height: f64,
    pub prominence: f64,
    /// Full width at half prominence, MHz.
    pub fwhm: f64,
}

/// Local maxima of `level` with prominence ≥ `min_prominence`.
///
/// Boundary samples are never peaks and NaN samples are skipped. A flat
/// top is located at its midpoint, a single-sample top by a parabola
/// through its neighbours. The width is measured at height − prominence/2
/// between linearly interpolated crossings and must span at least five
/// samples.
pub fn find_peaks(spectrum: &Spectrum, level: Level, min_prominence: f64) -> Result<Vec<Peak>> {
    let pairs: Vec<(f64, f64)> = spectrum
        .points
        .iter()
        .map(|p| (p.axis_mhz, p.populations[level.index()]))
        .filter(|(_, y)| !y.is_nan())
        .collect();
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    find_peaks_xy(&x, &y, min_prominence)
}

pub fn find_peaks_xy(x: &[f64], y: &[f64], min_prominence: f64) -> Result<Vec<Peak>> {
    let n = y.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !(y[i] > y[i - 1]) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        if j + 1 >= n || !(y[j + 1] < y[i]) {
            i = j + 1;
            continue;
        }
        let top = y[i];

        let mut left_min = top;
        let mut k = i;
        while k > 0 {
            k -= 1;
            if y[k] > top {
                break;
            }
            left_min = left_min.min(y[k]);
        }
        let mut right_min = top;
        let mut k = j;
        while k + 1 < n {
            k += 1;
            if y[k] > top {
                break;
            }
            right_min = right_min.min(y[k]);
        }
        let prominence = top - left_min.max(right_min);
        if prominence >= min_prominence && prominence > 0.0 {
            let (location, height) = if i == j {
                let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
                let denom = y0 - 2.0 * y1 + y2;
                let h = x[i + 1] - x[i];
                let hl = x[i] - x[i - 1];
                if denom < 0.0 && (h - hl).abs() <= 1e-9 * h.abs() {
                    let off = 0.5 * (y0 - y2) / denom;
                    (x[i] + off * h, y1 - 0.25 * (y0 - y2) * off)
                } else {
                    (x[i], y1)
                }
            } else {
                (0.5 * (x[i] + x[j]), top)
            };
            let half = top - 0.5 * prominence;
            let mut a = i;
            while a > 0 && y[a] > half {
                a -= 1;
            }
            let left = x[a] + (half - y[a]) / (y[a + 1] - y[a]) * (x[a + 1] - x[a]);
            let mut b = j;
            while b + 1 < n && y[b] > half {
                b += 1;
            }
            let right = x[b - 1] + (y[b - 1] - half) / (y[b - 1] - y[b]) * (x[b] - x[b - 1]);
            let fwhm = right - left;
            let inside = x.iter().filter(|&&v| v >= left && v <= right).count();
            if inside < 5 {
                return Err(Error::TooCoarse {
                    location,
                    points: inside as f64,
                });
            }
            peaks.push(Peak {
                location,
                height,
                prominence,
                fwhm,
            });
        }
        i = j + 1;
    }
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn spectrum_of(x: &[f64], y: &[f64]) -> Spectrum {
        Spectrum {
            axis: Axis::Detuning(Beam::R),
            solver: Solver::Carrier,
            gamma_q_mode: GammaQMode::Physical,
            config_sha256: String::new(),
            points: x
                .iter()
                .zip(y)
                .map(|(&a, &q)| ScanPoint {
                    axis_mhz: a,
                    populations: [0.0, 0.0, 0.0, q],
                    residual: 0.0,
                    flag: None,
                    pairing_deviation: None,
                    floquet_order: None,
                })
                .collect(),
        }
    }

    #[test]
    fn axis_paths() {
        assert_eq!("laser_R.detuning".parse::<Axis>().unwrap(), Axis::Detuning(Beam::R));
        assert_eq!("LASER_b.rabi".parse::<Axis>().unwrap(), Axis::Rabi(Beam::B));
        assert_eq!("motion.trap_frequency".parse::<Axis>().unwrap(), Axis::TrapFrequency);
        for bad in ["laser_X.detuning", "laser_R.wavelength_nm", "detuning", "atom.mass_amu"] {
            assert!(matches!(bad.parse::<Axis>(), Err(Error::UnknownAxis(_))), "{bad}");
        }
        let a = Axis::Detuning(Beam::C);
        assert_eq!(a.to_string().parse::<Axis>().unwrap(), a);
    }

    #[test]
    fn spec_validation() {
        let a = Axis::Detuning(Beam::R);
        assert!(ScanSpec::new(a, 2.0, 10.0, 1).is_err());
        assert!(ScanSpec::new(a, 10.0, 2.0, 11).is_err());
        let s = ScanSpec::new(a, 2.0, 10.0, 5).unwrap();
        assert_eq!((0..5).map(|i| s.value(i)).collect::<Vec<_>>(), vec![2.0, 4.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn gaussian_peak() {
        let x: Vec<f64> = (0..401).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|&v| 0.1 + 0.8 * (-(v - 1.503f64).powi(2) / (2.0 * 0.1f64.powi(2))).exp()).collect();
        let peaks = find_peaks(&spectrum_of(&x, &y), Level::Q, 0.1).unwrap();
        assert_eq!(peaks.len(), 1);
        let p = peaks[0];
        assert!((p.location - 1.503).abs() < 1e-3);
        assert!((p.fwhm - 2.0 * (2.0f64.ln() * 2.0).sqrt() * 0.1).abs() < 2e-3);
        assert!((p.height - 0.9).abs() < 1e-4);
    }

    #[test]
    fn flat_and_boundary_and_nan() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(find_peaks(&spectrum_of(&x, &vec![0.5; 50]), Level::Q, 0.0).unwrap().is_empty());
        let rising: Vec<f64> = x.iter().map(|v| v * 0.01).collect();
        assert!(find_peaks(&spectrum_of(&x, &rising), Level::Q, 0.0).unwrap().is_empty());
        let mut y: Vec<f64> = x.iter().map(|&v| (-(v - 25.0f64).powi(2) / 50.0).exp()).collect();
        y[25] = f64::NAN;
        let peaks = find_peaks(&spectrum_of(&x, &y), Level::Q, 0.1).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].location - 25.0).abs() < 0.6);
    }

    #[test]
    fn plateau_midpoint_and_coarse_peak() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| if (18.0..=21.0).contains(&v) { 1.0 } else { 1.0 - 0.02 * (v - 19.5).abs().powi(2) })
            .map(|v| v.max(0.0))
            .collect();
        let p = find_peaks(&spectrum_of(&x, &y), Level::Q, 0.1).unwrap();
        assert_eq!(p[0].location, 19.5);

        let mut spike = vec![0.0; 40];
        spike[20] = 1.0;
        assert!(matches!(
            find_peaks(&spectrum_of(&x, &spike), Level::Q, 0.1),
            Err(Error::TooCoarse { .. })
        ));
    }

    #[test]
    fn three_photon_scan_peaks_at_resonance() {
        let spec = ScanSpec::new(Axis::Detuning(Beam::R), 2.5, 3.5, 201).unwrap();
        let s = run_scan_with_workers(&presets::fig3a(), &spec, 2).unwrap();
        let peaks = find_peaks(&s, Level::Q, 0.5).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].location - 3.0).abs() < 0.005);
        for p in &s.points {
            assert!(p.flag.is_none());
            assert!((p.populations.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!(p.residual < 1e-9);
        }
    }

    #[test]
    fn scan_is_deterministic_and_pointwise() {
        let spec = ScanSpec::new(Axis::Detuning(Beam::R), 2.0, 10.0, 17).unwrap();
        let base = presets::fig3a();
        let a = run_scan_with_workers(&base, &spec, 1).unwrap();
        let b = run_scan_with_workers(&base, &spec, 4).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let single = solve_point(&base, &spec, spec.value(7));
        assert_eq!(single, a.points[7]);
    }

    #[test]
    fn failed_points_are_flagged() {
        // Negative Rabi frequencies fail validation at those points only.
        let spec = ScanSpec::new(Axis::Rabi(Beam::C), -0.1, 0.1, 5).unwrap();
        let s = run_scan_with_workers(&presets::fig3a(), &spec, 2).unwrap();
        assert_eq!(s.points[0].flag.as_deref(), Some("NegativeRate"));
        assert!(s.points[0].populations[0].is_nan());
        assert!(s.points[4].flag.is_none());
        let csv = s.to_csv();
        assert!(csv.lines().nth(1).unwrap().ends_with(",NegativeRate"));
        assert!(csv.starts_with("axis_MHz,P_S,P_P,P_D,P_Q,residual,flag\n"));
    }

    #[test]
    fn dark_resonance_scan() {
        let mut raw = presets::fig3a();
        raw.laser_c.rabi = 0.0;
        let spec = ScanSpec::new(Axis::Detuning(Beam::R), 7.0, 9.0, 21)
            .unwrap()
            .with_gamma_q_mode(GammaQMode::Zero);
        let s = run_scan_with_workers(&raw, &spec, 2).unwrap();
        assert!(s.level(Level::Q).iter().all(|&q| q == 0.0));
        let at = s.points.iter().find(|p| (p.axis_mhz - 8.0).abs() < 1e-12).unwrap();
        assert!(at.populations[1] < 1e-8);
    }

    #[test]
    fn json_metadata() {
        let spec = ScanSpec::new(Axis::Detuning(Beam::R), 2.0, 4.0, 3).unwrap();
        let s = run_scan_with_workers(&presets::fig3a(), &spec, 1).unwrap();
        let v = s.to_json();
        assert_eq!(v["metadata"]["config_sha256"].as_str().unwrap().len(), 64);
        assert_eq!(v["metadata"]["solver"], "carrier");
        assert_eq!(v["points"].as_array().unwrap().len(), 3);
        assert_ne!(config_hash(&presets::fig3a()), config_hash(&presets::fig3e()));
    }
}
