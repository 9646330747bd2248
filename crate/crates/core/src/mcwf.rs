//! Quantum-jump (Monte-Carlo wave-function) trajectories.
//!
//! Between jumps the amplitudes evolve under the non-Hermitian
//! H_eff = H − (i/2)(γ_P|P⟩⟨P| + γ_Q|Q⟩⟨Q|). A jump happens when the
//! squared norm falls to a uniform random threshold; the jump time is
//! located to [`JUMP_TIME_TOL`] by bracketing and safeguarded Newton
//! iteration on the closed-form norm. The channel is then drawn in
//! proportion to the channel rates of the pre-jump state.
//!
//! Trajectory `i` of an ensemble started from `seed` draws its random
//! numbers from ChaCha8 seeded with [`trajectory_seed`]`(seed, i)`, so
//! results do not depend on scheduling.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::PopulationTrace;
use crate::error::{Error, Result};
use crate::linalg::eigen_decompose;
use crate::liouvillian::{build_hamiltonian, carrier_superoperator};
use crate::model::{Level, SystemConfig, C64};
use crate::steady::steady_state;

/// Resolution of the jump-time search, µs.
pub const JUMP_TIME_TOL: f64 = 1e-6;
/// Eigenbases of H_eff worse conditioned than this use the matrix
/// exponential instead.
const CONDITION_LIMIT: f64 = 1e8;

pub type Amplitudes = [C64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum JumpChannel {
    #[serde(rename = "P->S")]
    PtoS,
    #[serde(rename = "P->D")]
    PtoD,
    #[serde(rename = "Q->S")]
    QtoS,
}

impl JumpChannel {
    /// Whether the jump emits a photon on the P transitions.
    pub fn is_fluorescence(self) -> bool {
        matches!(self, JumpChannel::PtoS | JumpChannel::PtoD)
    }

    fn target(self) -> Level {
        match self {
            JumpChannel::PtoS | JumpChannel::QtoS => Level::S,
            JumpChannel::PtoD => Level::D,
        }
    }
}

impl fmt::Display for JumpChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JumpChannel::PtoS => "P->S",
            JumpChannel::PtoD => "P->D",
            JumpChannel::QtoS => "Q->S",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// Strictly increasing, µs.
    pub jump_times: Vec<f64>,
    pub jump_channels: Vec<JumpChannel>,
    /// Normalized amplitudes at the requested sample times.
    #[serde(skip)]
    pub sampled_states: Option<Vec<(f64, Amplitudes)>>,
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` in an ensemble: SplitMix64(SplitMix64(seed) ⊕ index).
pub fn trajectory_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index)
}

pub fn basis_state(level: Level) -> Amplitudes {
    let mut psi = [C64::new(0.0, 0.0); 4];
    psi[level.index()] = C64::new(1.0, 0.0);
    psi
}

/// exp(A s) with A = −i H_eff, in the eigenbasis when it is well
/// conditioned and by the matrix exponential otherwise.
#[allow(clippy::large_enum_variant)]
enum Propagator {
    Eigen {
        values: Vector4<C64>,
        vectors: Matrix4<C64>,
        inverse: Matrix4<C64>,
    },
    Direct(Matrix4<C64>),
}

impl Propagator {
    fn new(a: Matrix4<C64>) -> Self {
        let d = DMatrix::from_iterator(4, 4, a.iter().copied());
        match eigen_decompose(&d) {
            Some(e) if e.condition < CONDITION_LIMIT => Propagator::Eigen {
                values: Vector4::from_iterator(e.values.iter().copied()),
                vectors: Matrix4::from_iterator(e.vectors.iter().copied()),
                inverse: Matrix4::from_iterator(e.inverse.iter().copied()),
            },
            _ => Propagator::Direct(a),
        }
    }

    fn apply(&self, psi: &Vector4<C64>, s: f64) -> Vector4<C64> {
        match self {
            Propagator::Eigen {
                values,
                vectors,
                inverse,
            } => {
                let mut c = inverse * psi;
                for (ci, l) in c.iter_mut().zip(values.iter()) {
                    *ci *= (l * s).exp();
                }
                vectors * c
            }
            Propagator::Direct(a) => (a * C64::new(s, 0.0)).exp() * psi,
        }
    }
}

/// Squared norm n(s) = Re Σ a_kl e^{(λ̄_k+λ_l)s} of the evolving
/// amplitudes, set up once per jump interval.
struct NormCurve<'a> {
    prop: &'a Propagator,
    psi: Vector4<C64>,
    terms: Vec<(C64, C64)>,
}

impl<'a> NormCurve<'a> {
    fn new(prop: &'a Propagator, psi: Vector4<C64>) -> Self {
        let terms = match prop {
            Propagator::Eigen {
                values,
                vectors,
                inverse,
            } => {
                let c = inverse * psi;
                let gram = vectors.adjoint() * vectors;
                let mut t = Vec::with_capacity(16);
                for k in 0..4 {
                    for l in 0..4 {
                        let a = c[k].conj() * c[l] * gram[(k, l)];
                        if a.norm() > 0.0 {
                            t.push((a, values[k].conj() + values[l]));
                        }
                    }
                }
                t
            }
            Propagator::Direct(_) => Vec::new(),
        };
        NormCurve { prop, psi, terms }
    }

    fn norm(&self, s: f64) -> f64 {
        match self.prop {
            Propagator::Eigen { .. } => self.terms.iter().map(|(a, mu)| (a * (mu * s).exp()).re).sum(),
            Propagator::Direct(_) => self.prop.apply(&self.psi, s).norm_squared(),
        }
    }

    fn state(&self, s: f64) -> Vector4<C64> {
        self.prop.apply(&self.psi, s)
    }
}

struct Rates {
    gamma_p: f64,
    beta_ps: f64,
    beta_pd: f64,
    gamma_q: f64,
}

impl Rates {
    fn decay(&self, psi: &Vector4<C64>) -> f64 {
        self.gamma_p * psi[Level::P.index()].norm_sqr() + self.gamma_q * psi[Level::Q.index()].norm_sqr()
    }
}

/// First s in (0, horizon] with n(s) = r, or `None` when the norm stays
/// above r up to the horizon.
fn jump_delay(curve: &NormCurve, rates: &Rates, r: f64, horizon: f64) -> Option<f64> {
    if curve.norm(horizon) > r {
        return None;
    }
    let total = rates.gamma_p + rates.gamma_q;
    let mut lo = 0.0;
    let mut hi = (1.0 / total).min(horizon);
    while curve.norm(hi) > r {
        lo = hi;
        hi = (2.0 * hi).min(horizon);
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        if hi - lo < JUMP_TIME_TOL {
            break;
        }
        let f = curve.norm(s) - r;
        if f > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let slope = -rates.decay(&curve.state(s));
        let newton = if slope < 0.0 { s - f / slope } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - s).abs() < 0.5 * JUMP_TIME_TOL {
            s = next;
            break;
        }
        s = next;
    }
    Some(s.clamp(lo, hi))
}

fn check_trajectory_config(config: &SystemConfig) -> Result<()> {
    if config.motion().enabled {
        return Err(Error::InvalidInput(
            "quantum-jump trajectories are carrier-only; disable motion".into(),
        ));
    }
    if config.has_linewidth() {
        return Err(Error::InvalidInput(
            "quantum-jump trajectories assume zero laser linewidth".into(),
        ));
    }
    Ok(())
}

fn normalized(psi0: &Amplitudes) -> Result<Vector4<C64>> {
    let v = Vector4::from_iterator(psi0.iter().copied());
    let n = v.norm_squared();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "initial amplitudes have squared norm {n}"
        )));
    }
    Ok(v)
}

fn effective_generator(config: &SystemConfig) -> (Propagator, Rates) {
    let atom = config.atom();
    let parts = build_hamiltonian(config);
    let mut h = parts.total();
    h[(Level::P.index(), Level::P.index())] -= C64::new(0.0, atom.gamma_p / 2.0);
    h[(Level::Q.index(), Level::Q.index())] -= C64::new(0.0, atom.gamma_q / 2.0);
    let a = h * C64::new(0.0, -1.0);
    (
        Propagator::new(a),
        Rates {
            gamma_p: atom.gamma_p,
            beta_ps: atom.beta_ps,
            beta_pd: atom.beta_pd,
            gamma_q: atom.gamma_q,
        },
    )
}

fn to_array(v: &Vector4<C64>) -> Amplitudes {
    [v[0], v[1], v[2], v[3]]
}

fn simulate(
    config: &SystemConfig,
    psi0: &Amplitudes,
    t_max: f64,
    seed: u64,
    samples: Option<&[f64]>,
) -> Result<TrajectoryRecord> {
    check_trajectory_config(config)?;
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidInput(format!("t_max must be finite and non-negative, got {t_max}")));
    }
    let mut psi = normalized(psi0)?;
    let (prop, rates) = effective_generator(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut record = TrajectoryRecord {
        seed,
        jump_times: Vec::new(),
        jump_channels: Vec::new(),
        sampled_states: samples.map(|s| Vec::with_capacity(s.len())),
    };
    let sample_times = samples.unwrap_or(&[]);
    let mut next_sample = 0;
    let mut t = 0.0;

    loop {
        let curve = NormCurve::new(&prop, psi);
        let r: f64 = 1.0 - rng.random::<f64>();
        let delay = jump_delay(&curve, &rates, r, t_max - t);
        let t_end = delay.map_or(t_max, |d| t + d);

        if let Some(out) = record.sampled_states.as_mut() {
            while next_sample < sample_times.len()
                && (sample_times[next_sample] < t_end
                    || (delay.is_none() && sample_times[next_sample] <= t_max))
            {
                let ts = sample_times[next_sample];
                let v = curve.state(ts - t);
                out.push((ts, to_array(&(v / C64::new(v.norm(), 0.0)))));
                next_sample += 1;
            }
        }

        let Some(d) = delay else { break };
        let pre = curve.state(d);
        let p_rate = rates.gamma_p * pre[Level::P.index()].norm_sqr();
        let q_rate = rates.gamma_q * pre[Level::Q.index()].norm_sqr();
        let weights = [p_rate * rates.beta_ps, p_rate * rates.beta_pd, q_rate];
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut channel = JumpChannel::QtoS;
        for (w, ch) in weights.iter().zip([JumpChannel::PtoS, JumpChannel::PtoD, JumpChannel::QtoS]) {
            if u < *w {
                channel = ch;
                break;
            }
            u -= w;
        }
        t = t_end;
        if record.jump_times.last().is_some_and(|&last| t <= last) {
            t = record.jump_times.last().unwrap().next_up();
        }
        record.jump_times.push(t);
        record.jump_channels.push(channel);
        psi = Vector4::from_iterator(basis_state(channel.target()));
    }
    Ok(record)
}

/// One trajectory from `psi0` up to `t_max` µs.
pub fn run_trajectory(config: &SystemConfig, psi0: &Amplitudes, t_max: f64, seed: u64) -> Result<TrajectoryRecord> {
    simulate(config, psi0, t_max, seed, None)
}

/// One trajectory, also recording the normalized amplitudes at
/// `sample_times` (increasing, µs). It runs until the last sample time.
pub fn run_trajectory_sampled(
    config: &SystemConfig,
    psi0: &Amplitudes,
    sample_times: &[f64],
    seed: u64,
) -> Result<TrajectoryRecord> {
    if sample_times.windows(2).any(|w| !(w[1] > w[0])) || sample_times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidInput("sample times must be increasing and non-negative".into()));
    }
    let t_max = sample_times.last().copied().unwrap_or(0.0);
    simulate(config, psi0, t_max, seed, Some(sample_times))
}

/// `n_traj` trajectories in parallel; record i uses [`trajectory_seed`]`(seed, i)`.
pub fn run_ensemble(
    config: &SystemConfig,
    psi0: &Amplitudes,
    t_max: f64,
    n_traj: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory(config, psi0, t_max, trajectory_seed(seed, i)))
        .collect()
}

/// Ensemble-averaged populations on `t_grid`, with standard errors
/// s/√n (zero for a single trajectory).
pub fn ensemble_populations(
    config: &SystemConfig,
    psi0: &Amplitudes,
    t_grid: &[f64],
    n_traj: usize,
    seed: u64,
) -> Result<PopulationTrace> {
    if n_traj == 0 {
        return Err(Error::InvalidInput("n_traj must be at least 1".into()));
    }
    let records: Vec<TrajectoryRecord> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory_sampled(config, psi0, t_grid, trajectory_seed(seed, i)))
        .collect::<Result<_>>()?;

    let n = t_grid.len();
    let mut sum = vec![[0.0; 4]; n];
    let mut sum_sq = vec![[0.0; 4]; n];
    for rec in &records {
        for (k, (_, amp)) in rec.sampled_states.as_ref().unwrap().iter().enumerate() {
            for l in 0..4 {
                let p = amp[l].norm_sqr();
                sum[k][l] += p;
                sum_sq[k][l] += p * p;
            }
        }
    }
    let nf = n_traj as f64;
    let mut mean = vec![[0.0; 4]; n];
    let mut se = vec![[0.0; 4]; n];
    for k in 0..n {
        for l in 0..4 {
            let m = sum[k][l] / nf;
            mean[k][l] = m;
            if n_traj > 1 {
                let var = ((sum_sq[k][l] - nf * m * m) / (nf - 1.0)).max(0.0);
                se[k][l] = (var / nf).sqrt();
            }
        }
    }
    Ok(PopulationTrace {
        times: t_grid.to_vec(),
        populations: mean,
        standard_errors: Some(se),
        states: None,
    })
}

/// Mean and standard error of a sample; the error is `None` below two
/// samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: Option<f64>,
    pub count: usize,
}

impl Estimate {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                standard_error: None,
                count: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let standard_error = (n > 1).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Estimate {
            mean,
            standard_error,
            count: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrightDarkStatistics {
    pub dark_threshold_us: f64,
    /// Fluorescence photons per bright period.
    pub bright_photons: Estimate,
    /// Length of the gaps longer than the threshold, µs.
    pub dark_duration: Estimate,
}

/// Splits each record's fluorescence photons (P → S and P → D) at gaps
/// longer than `dark_threshold` µs.
pub fn bright_dark_statistics(records: &[TrajectoryRecord], dark_threshold: f64) -> Result<BrightDarkStatistics> {
    let mut bright = Vec::new();
    let mut dark = Vec::new();
    for rec in records {
        let photons: Vec<f64> = rec
            .jump_times
            .iter()
            .zip(&rec.jump_channels)
            .filter(|(_, c)| c.is_fluorescence())
            .map(|(&t, _)| t)
            .collect();
        if photons.is_empty() {
            continue;
        }
        let mut count = 1usize;
        for w in photons.windows(2) {
            let gap = w[1] - w[0];
            if gap > dark_threshold {
                bright.push(count as f64);
                dark.push(gap);
                count = 1;
            } else {
                count += 1;
            }
        }
        bright.push(count as f64);
    }
    if bright.is_empty() {
        return Err(Error::NoJumps);
    }
    Ok(BrightDarkStatistics {
        dark_threshold_us: dark_threshold,
        bright_photons: Estimate::of(&bright),
        dark_duration: Estimate::of(&dark),
    })
}

/// 100 mean inter-photon intervals of the bright state, where the bright
/// state is the steady state with the clock laser off.
pub fn default_dark_threshold(config: &SystemConfig) -> Result<f64> {
    let mut raw = config.raw().clone();
    raw.laser_c.rabi = 0.0;
    raw.atom.gamma_q = 0.0;
    let bright = raw.validate()?;
    let rho = steady_state(&carrier_superoperator(&bright))?;
    let atom = config.atom();
    let rate = atom.gamma_p * (atom.beta_ps + atom.beta_pd) * rho.population(Level::P);
    if !(rate > 0.0) {
        return Err(Error::ZeroFluorescence { flux: rate });
    }
    Ok(100.0 / rate)
}

/// Photon record CSV `trajectory_id,jump_time_us,channel`.
pub fn photon_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::from("trajectory_id,jump_time_us,channel\n");
    for (i, rec) in records.iter().enumerate() {
        for (t, c) in rec.jump_times.iter().zip(&rec.jump_channels) {
            let _ = writeln!(out, "{i},{t:.11e},{c}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, linear_grid};
    use crate::model::{validate, DensityMatrix};
    use crate::presets;

    #[test]
    fn no_light_no_jumps() {
        let mut raw = presets::fig4a();
        raw.laser_b.rabi = 0.0;
        raw.laser_r.rabi = 0.0;
        raw.laser_c.rabi = 0.0;
        let c = validate(&raw).unwrap();
        let rec = run_trajectory(&c, &basis_state(Level::S), 1e4, 7).unwrap();
        assert!(rec.jump_times.is_empty());
    }

    #[test]
    fn decoupled_q_has_no_variance() {
        let mut raw = presets::fig4a();
        raw.laser_c.rabi = 0.0;
        raw.atom.gamma_q = 0.0;
        let c = validate(&raw).unwrap();
        let tr = ensemble_populations(&c, &basis_state(Level::Q), &linear_grid(100.0, 11), 8, 1).unwrap();
        for (p, e) in tr.populations.iter().zip(tr.standard_errors.unwrap()) {
            assert_eq!(p[3], 1.0);
            assert_eq!(e[3], 0.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let c = validate(&presets::fig4a()).unwrap();
        let a = run_trajectory(&c, &basis_state(Level::S), 50.0, 99).unwrap();
        let b = run_trajectory(&c, &basis_state(Level::S), 50.0, 99).unwrap();
        assert_eq!(a, b);
        let d = run_trajectory(&c, &basis_state(Level::S), 50.0, 100).unwrap();
        assert_ne!(a.jump_times, d.jump_times);
    }

    #[test]
    fn jump_times_increase_and_states_are_normalized() {
        let c = validate(&presets::fig4a()).unwrap();
        let grid = linear_grid(20.0, 101);
        let rec = run_trajectory_sampled(&c, &basis_state(Level::S), &grid, 3).unwrap();
        assert!(rec.jump_times.len() > 20);
        assert!(rec.jump_times.windows(2).all(|w| w[1] > w[0]));
        let states = rec.sampled_states.unwrap();
        assert_eq!(states.len(), grid.len());
        for (_, a) in states {
            let n: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn norm_is_non_increasing_between_jumps() {
        let c = validate(&presets::fig4a()).unwrap();
        let (prop, _) = effective_generator(&c);
        let curve = NormCurve::new(&prop, Vector4::from_iterator(basis_state(Level::S)));
        let mut last = curve.norm(0.0);
        assert!((last - 1.0).abs() < 1e-12);
        for k in 1..400 {
            let n = curve.norm(k as f64 * 0.01);
            assert!(n <= last + 1e-12);
            assert!((n - curve.state(k as f64 * 0.01).norm_squared()).abs() < 1e-10);
            last = n;
        }
    }

    #[test]
    fn single_trajectory_ensemble_is_that_trajectory() {
        let c = validate(&presets::fig4a()).unwrap();
        let grid = linear_grid(10.0, 21);
        let tr = ensemble_populations(&c, &basis_state(Level::S), &grid, 1, 5).unwrap();
        let rec = run_trajectory_sampled(&c, &basis_state(Level::S), &grid, trajectory_seed(5, 0)).unwrap();
        for (p, (_, a)) in tr.populations.iter().zip(rec.sampled_states.unwrap()) {
            for l in 0..4 {
                assert_eq!(p[l], a[l].norm_sqr());
            }
        }
    }

    #[test]
    fn ensemble_tracks_master_equation_early_on() {
        let c = validate(&presets::fig4a()).unwrap();
        let grid = linear_grid(5.0, 26);
        let tr = ensemble_populations(&c, &basis_state(Level::S), &grid, 400, 11).unwrap();
        let me = evolve(&carrier_superoperator(&c), &DensityMatrix::pure(Level::S), &grid).unwrap();
        let se = tr.standard_errors.unwrap();
        let mut inside = 0;
        let mut total = 0;
        for ((p, q), e) in tr.populations.iter().zip(&me.populations).zip(&se).skip(1) {
            for l in [0, 1, 2] {
                total += 1;
                if (p[l] - q[l]).abs() <= 3.0 * e[l] + 1e-12 {
                    inside += 1;
                }
            }
        }
        assert!(inside as f64 >= 0.9 * total as f64, "{inside}/{total}");
    }

    #[test]
    fn synthetic_record_statistics() {
        let mut times = Vec::new();
        let mut t = 0.0;
        for _ in 0..1000 {
            times.push(t);
            t += 0.1;
        }
        t += 1000.0 - 0.1;
        for _ in 0..1000 {
            times.push(t);
            t += 0.1;
        }
        let rec = TrajectoryRecord {
            seed: 0,
            jump_channels: vec![JumpChannel::PtoS; times.len()],
            jump_times: times,
            sampled_states: None,
        };
        let s = bright_dark_statistics(&[rec], 10.0).unwrap();
        assert_eq!(s.bright_photons.count, 2);
        assert_eq!(s.bright_photons.mean, 1000.0);
        assert_eq!(s.dark_duration.count, 1);
        assert!((s.dark_duration.mean - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn empty_record_has_no_statistics() {
        let rec = TrajectoryRecord {
            seed: 0,
            jump_times: vec![],
            jump_channels: vec![],
            sampled_states: None,
        };
        assert!(matches!(bright_dark_statistics(&[rec], 10.0), Err(Error::NoJumps)));
    }

    #[test]
    fn photon_csv_layout() {
        let rec = TrajectoryRecord {
            seed: 0,
            jump_times: vec![0.5, 1.25],
            jump_channels: vec![JumpChannel::PtoS, JumpChannel::QtoS],
            sampled_states: None,
        };
        let csv = photon_csv(&[rec]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "trajectory_id,jump_time_us,channel");
        assert_eq!(lines[2], "0,1.25000000000e0,Q->S");
    }

    #[test]
    fn default_threshold_for_bright_state() {
        let c = validate(&presets::fig4a()).unwrap();
        let th = default_dark_threshold(&c).unwrap();
        // Bright-state photon rate ≈ 8 per µs.
        assert!(th > 5.0 && th < 30.0, "{th}");
    }

    #[test]
    fn motion_is_rejected() {
        let c = validate(&presets::fig6_co()).unwrap();
        assert!(run_trajectory(&c, &basis_state(Level::S), 1.0, 0).is_err());
    }
}
