//! Deterministic time evolution ρ(t) = exp(𝓜t)ρ₀, timescale extraction and
//! the photon–photon correlation g²(τ).

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::dopri5;
use crate::liouvillian::{unvectorize, vectorize, Superoperator};
use crate::model::{populations, DensityMatrix, Level, Mat4, SystemConfig, C64};
use crate::spectral::dominant_frequency;

/// Eigenbases worse conditioned than this are not trusted for propagation.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Relative tolerance of the stepwise integrator.
pub const STEPWISE_RTOL: f64 = 1e-8;
/// Oscillations below this spectral contrast are not reported.
pub const OSCILLATION_CONTRAST: f64 = 0.1;

const TRACE_LIMIT: f64 = 1e-8;
const RANGE_SLACK: f64 = 1e-10;

/// Level populations sampled on a time grid (µs).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationTrace {
    pub times: Vec<f64>,
    /// (P_S, P_P, P_D, P_Q) at each time.
    pub populations: Vec<[f64; 4]>,
    /// Standard error of each population, for ensemble averages.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<[f64; 4]>>,
    /// Full density matrices, when retained.
    #[serde(skip)]
    pub states: Option<Vec<Mat4>>,
}

impl PopulationTrace {
    pub fn level(&self, level: Level) -> Vec<f64> {
        self.populations.iter().map(|p| p[level.index()]).collect()
    }

    /// CSV with header `t_us,P_S,P_P,P_D,P_Q`, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_us,P_S,P_P,P_D,P_Q\n");
        for (t, p) in self.times.iter().zip(&self.populations) {
            let _ = writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                t, p[0], p[1], p[2], p[3]
            );
        }
        out
    }
}

/// `points` equally spaced times from 0 to `t_max`.
pub fn linear_grid(t_max: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

/// Sorted union of two grids, duplicates removed.
pub fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => return Err(Error::InvalidInput("empty time grid".into())),
        Some(&t0) if t0 != 0.0 => {
            return Err(Error::InvalidInput(format!("time grid must start at 0, got {t0}")))
        }
        _ => {}
    }
    if let Some(w) = t_grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!(
            "time grid not increasing at {} -> {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn finish(t_grid: &[f64], raw: Vec<Mat4>) -> Result<PopulationTrace> {
    let mut states = Vec::with_capacity(raw.len());
    let mut pops = Vec::with_capacity(raw.len());
    for (t, m) in t_grid.iter().zip(raw) {
        let m = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let p = populations(&m);
        let tr: f64 = p.iter().sum();
        if (tr - 1.0).abs() > TRACE_LIMIT
            || p.iter().any(|&x| !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&x))
        {
            return Err(Error::NonPhysicalState(format!(
                "populations {p:?} at t = {t} µs"
            )));
        }
        pops.push(p);
        states.push(m);
    }
    Ok(PopulationTrace {
        times: t_grid.to_vec(),
        populations: pops,
        standard_errors: None,
        states: Some(states),
    })
}

/// Density matrices exp(𝓜t)ρ₀ on `t_grid`, by eigen-propagation when the
/// eigenbasis is well conditioned and by adaptive Runge-Kutta otherwise.
fn propagate(superop: &Superoperator, rho0: &Mat4, t_grid: &[f64]) -> Result<Vec<Mat4>> {
    match superop.eigen() {
        Some(e) if e.condition <= CONDITION_LIMIT => {
            let x = vectorize(rho0);
            let c = &e.inverse * x;
            Ok(t_grid
                .iter()
                .map(|&t| {
                    let mut ct = c.clone();
                    for (ci, l) in ct.iter_mut().zip(e.values.iter()) {
                        *ci *= (l * t).exp();
                    }
                    unvectorize(&(&e.vectors * ct))
                })
                .collect())
        }
        _ => propagate_stepwise(superop, rho0, t_grid),
    }
}

fn propagate_stepwise(superop: &Superoperator, rho0: &Mat4, t_grid: &[f64]) -> Result<Vec<Mat4>> {
    let m = superop.to_dmatrix();
    let f = |_t: f64, y: &DVector<C64>| &m * y;
    let ys = dopri5(f, 0.0, vectorize(rho0), t_grid, STEPWISE_RTOL, 1e-12)
        .map_err(Error::NoConvergence)?;
    Ok(ys.iter().map(unvectorize).collect())
}

/// Whether [`evolve`] will use the eigenbasis of `superop`; `Err` carries
/// the condition number that forces the stepwise fallback.
pub fn eigen_propagation_status(superop: &Superoperator) -> Result<f64> {
    match superop.eigen() {
        Some(e) if e.condition <= CONDITION_LIMIT => Ok(e.condition),
        Some(e) => Err(Error::DefectiveGenerator {
            condition: e.condition,
        }),
        None => Err(Error::DefectiveGenerator {
            condition: f64::INFINITY,
        }),
    }
}

/// ρ(t) on `t_grid` (µs, starting at 0).
pub fn evolve(superop: &Superoperator, rho0: &DensityMatrix, t_grid: &[f64]) -> Result<PopulationTrace> {
    check_grid(t_grid)?;
    finish(t_grid, propagate(superop, rho0.matrix(), t_grid)?)
}

/// ρ(t) from the adaptive Runge-Kutta integrator alone.
pub fn evolve_stepwise(
    superop: &Superoperator,
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<PopulationTrace> {
    check_grid(t_grid)?;
    finish(t_grid, propagate_stepwise(superop, rho0.matrix(), t_grid)?)
}

/// Characteristic times of a population trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timescales {
    /// Approach of P_P to its quasi-steady value, µs.
    pub fast: f64,
    /// Approach of P_Q to its final value, µs.
    pub slow: f64,
    /// Dominant oscillation of P_Q, rad/µs.
    pub rabi_frequency: Option<f64>,
}

/// Least-squares slope of ln y against t over the given points.
fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let (st, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y.ln()));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(t, y)| {
        (a + (t - mt) * (y.ln() - my), b + (t - mt) * (t - mt))
    });
    (den > 0.0).then(|| num / den)
}

/// Exponential time constant of a decaying, non-negative deviation series,
/// fitted where it lies between 10% and 80% of its maximum.
fn decay_time(times: &[f64], dev: &[f64]) -> Option<f64> {
    let (imax, &dmax) = dev
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(dmax > 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = times[imax..]
        .iter()
        .zip(&dev[imax..])
        .filter(|(_, &d)| d <= 0.8 * dmax && d >= 0.1 * dmax)
        .map(|(&t, &d)| (t, d))
        .collect();
    let slope = log_slope(&pts)?;
    (slope < 0.0).then(|| -1.0 / slope)
}

/// Fast and slow time constants and the P_Q oscillation frequency.
///
/// The slow scale is a log-linear fit to |P_Q(t) − P_Q(t_max)|. The fast
/// scale is a log-linear fit to the decreasing envelope of
/// |P_P(t) − P_P(t_q)| with t_q one hundredth of the slow scale.
pub fn fit_timescales(trace: &PopulationTrace) -> Result<Timescales> {
    let t = &trace.times;
    if t.len() < 8 {
        return Err(Error::FitFailed(format!("only {} samples", t.len())));
    }
    let t_max = *t.last().unwrap();
    let pq = trace.level(Level::Q);
    let pp = trace.level(Level::P);

    let q_end = *pq.last().unwrap();
    let dev_q: Vec<f64> = pq.iter().map(|x| (x - q_end).abs()).collect();
    let slow = decay_time(t, &dev_q)
        .ok_or_else(|| Error::FitFailed("P_Q shows no decaying approach to its final value".into()))?;
    if 5.0 * slow > t_max {
        return Err(Error::FitFailed(format!(
            "slow scale {slow:.4e} µs needs a trace of at least {:.4e} µs, got {t_max:.4e}",
            5.0 * slow
        )));
    }

    let t_q = slow / 100.0;
    let iq = t.partition_point(|&s| s <= t_q).max(2) - 1;
    let p_ref = pp[iq];
    let mut env: Vec<f64> = pp[..=iq].iter().map(|x| (x - p_ref).abs()).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let fast = decay_time(&t[..=iq], &env).ok_or_else(|| {
        Error::FitFailed(format!(
            "P_P has no resolvable initial relaxation before t = {t_q:.4e} µs"
        ))
    })?;

    let rabi_frequency = dominant_frequency(t, &pq, OSCILLATION_CONTRAST).map(|p| p.omega);
    Ok(Timescales {
        fast,
        slow,
        rabi_frequency,
    })
}

/// Which P decays count as detected photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Both P → S and P → D.
    #[default]
    All,
    /// P → S only.
    BlueOnly,
}

impl std::str::FromStr for Detection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Detection::All),
            "blue" | "blue_only" => Ok(Detection::BlueOnly),
            other => Err(Error::InvalidInput(format!("unknown detection channel {other}"))),
        }
    }
}

/// 𝒥ρ for the detected channels.
pub fn apply_jump(config: &SystemConfig, rho: &Mat4, detection: Detection) -> Mat4 {
    let atom = config.atom();
    let p = Level::P.index();
    let rho_pp = rho[(p, p)];
    let mut out = Mat4::zeros();
    out[(Level::S.index(), Level::S.index())] = rho_pp * (atom.gamma_p * atom.beta_ps);
    if detection == Detection::All {
        out[(Level::D.index(), Level::D.index())] = rho_pp * (atom.gamma_p * atom.beta_pd);
    }
    out
}

fn jump_rate(config: &SystemConfig, rho: &Mat4, detection: Detection) -> f64 {
    apply_jump(config, rho, detection).trace().re
}

/// g²(τ) = Tr[𝒥 e^{𝓜τ}(𝒥ρ_ss)] / (Tr 𝒥ρ_ss)² on `tau_grid` (µs, from 0).
/// At τ = 0 the post-jump state is used directly.
pub fn g2(
    superop: &Superoperator,
    config: &SystemConfig,
    rho_ss: &DensityMatrix,
    tau_grid: &[f64],
    detection: Detection,
) -> Result<Vec<f64>> {
    check_grid(tau_grid)?;
    let flux = jump_rate(config, rho_ss.matrix(), detection);
    if !(flux >= 1e-30) {
        return Err(Error::ZeroFluorescence { flux });
    }
    let post = apply_jump(config, rho_ss.matrix(), detection) / C64::new(flux, 0.0);
    let mut states = propagate(superop, &post, tau_grid)?;
    states[0] = post;
    Ok(states
        .iter()
        .map(|s| jump_rate(config, s, detection) / flux)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::carrier_superoperator;
    use crate::model::{mhz, validate, RawConfig};
    use crate::presets;
    use crate::steady::steady_state;

    fn setup(raw: &RawConfig) -> (SystemConfig, Superoperator) {
        let c = validate(raw).unwrap();
        let m = carrier_superoperator(&c);
        (c, m)
    }

    #[test]
    fn decoupled_q_stays_put() {
        let mut raw = presets::fig3a();
        raw.laser_c.rabi = 0.0;
        raw.atom.gamma_q = 0.0;
        let (_, m) = setup(&raw);
        let tr = evolve(&m, &DensityMatrix::pure(Level::Q), &linear_grid(1000.0, 50)).unwrap();
        for p in &tr.populations {
            assert!((p[3] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_must_start_at_zero_and_increase() {
        let (_, m) = setup(&presets::fig3a());
        let rho = DensityMatrix::pure(Level::S);
        assert!(evolve(&m, &rho, &[1.0, 2.0]).is_err());
        assert!(evolve(&m, &rho, &[0.0, 2.0, 2.0]).is_err());
        assert!(evolve(&m, &rho, &[]).is_err());
    }

    #[test]
    fn semigroup() {
        let (_, m) = setup(&presets::fig4a());
        let rho0 = DensityMatrix::pure(Level::S);
        let (t1, t2) = (3.7, 41.0);
        let direct = evolve(&m, &rho0, &[0.0, t2]).unwrap().states.unwrap()[1];
        let half = evolve(&m, &rho0, &[0.0, t1]).unwrap().states.unwrap()[1];
        let half = DensityMatrix::new(half).unwrap();
        let two = evolve(&m, &half, &[0.0, t2 - t1]).unwrap().states.unwrap()[1];
        assert!(crate::model::max_abs(&(direct - two)) < 1e-9);
    }

    #[test]
    fn long_time_limit_is_steady_state() {
        let (_, m) = setup(&presets::fig4d());
        let slow = m
            .eigen()
            .unwrap()
            .values
            .iter()
            .map(|l| -l.re)
            .filter(|&r| r > 1e-9)
            .fold(f64::INFINITY, f64::min);
        let t = 50.0 / slow;
        let tr = evolve(&m, &DensityMatrix::pure(Level::S), &[0.0, t]).unwrap();
        let rho = steady_state(&m).unwrap();
        let diff = tr.states.unwrap()[1] - rho.matrix();
        assert!(crate::model::max_abs(&diff) < 1e-6);
    }

    #[test]
    fn eigen_and_stepwise_agree_over_three_ms() {
        let (_, m) = setup(&presets::fig4a());
        assert!(eigen_propagation_status(&m).is_ok());
        let grid = linear_grid(3000.0, 301);
        let rho0 = DensityMatrix::pure(Level::S);
        let a = evolve(&m, &rho0, &grid).unwrap();
        let b = evolve_stepwise(&m, &rho0, &grid).unwrap();
        let worst = a
            .populations
            .iter()
            .zip(&b.populations)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn positivity_along_the_trace() {
        let (_, m) = setup(&presets::fig4d());
        let tr = evolve(&m, &DensityMatrix::pure(Level::S), &linear_grid(500.0, 400)).unwrap();
        for s in tr.states.unwrap() {
            assert!(crate::model::min_eigenvalue(&s) >= -1e-8);
        }
    }

    #[test]
    fn csv_layout() {
        let tr = PopulationTrace {
            times: vec![0.0, 1.5],
            populations: vec![[1.0, 0.0, 0.0, 0.0], [0.25, 0.25, 0.25, 0.25]],
            standard_errors: None,
            states: None,
        };
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t_us,P_S,P_P,P_D,P_Q");
        assert_eq!(lines[2].split(',').next().unwrap(), "1.50000000000e0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn rabi_frequency_at_two_plus_one_resonance() {
        let (c, m) = setup(&presets::fig4d());
        let grid = merge_grids(&linear_grid(40.0, 801), &linear_grid(5000.0, 5001));
        let tr = evolve(&m, &DensityMatrix::pure(Level::S), &grid).unwrap();
        let ts = fit_timescales(&tr).unwrap();
        let expected = crate::dressed::lambda_eigensystem(&c).unwrap().effective_rabi;
        assert!((expected - mhz(0.012127)).abs() < 1e-5);
        let got = ts.rabi_frequency.unwrap();
        assert!((got / expected - 1.0).abs() < 0.05, "{got} vs {expected}");
    }

    #[test]
    fn constant_trace_cannot_be_fitted() {
        let times = linear_grid(100.0, 100);
        let tr = PopulationTrace {
            populations: vec![[0.25; 4]; times.len()],
            times,
            standard_errors: None,
            states: None,
        };
        assert!(matches!(fit_timescales(&tr), Err(Error::FitFailed(_))));
    }

    #[test]
    fn g2_antibunching_and_factorization() {
        let (c, m) = setup(&presets::fig4d());
        let rho = steady_state(&m).unwrap();
        let grid = merge_grids(&linear_grid(5.0, 51), &[20_000.0]);
        for det in [Detection::All, Detection::BlueOnly] {
            let g = g2(&m, &c, &rho, &grid, det).unwrap();
            assert_eq!(g[0], 0.0);
            assert!((g.last().unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn g2_needs_fluorescence() {
        let mut raw = presets::fig3a();
        raw.laser_b.rabi = 0.0;
        raw.laser_r.rabi = 0.0;
        raw.laser_c.rabi = 0.0;
        let (c, m) = setup(&raw);
        let rho = DensityMatrix::pure(Level::S);
        assert!(matches!(
            g2(&m, &c, &rho, &[0.0, 1.0], Detection::All),
            Err(Error::ZeroFluorescence { .. })
        ));
    }
}
