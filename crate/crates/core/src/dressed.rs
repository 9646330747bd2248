//! Closed-form dressed-state quantities.
//!
//! Two limits have analytical solutions that the numerical solvers are
//! checked against:
//!
//! * **Three-photon resonance** (Δ_B − Δ_R − Δ_C = 0, Δ_C ≠ 0, weak Ω_C).
//!   The clock coupling mixes S and Q at first order in α_C = Ω_C/2Δ_C, and
//!   the state |Ψ_NC⟩ ∝ ε|D⟩ + |Q_S⟩ with ε = (Ω_B/Ω_R)·α_C is dark. Its
//!   populations predict the steady state.
//! * **Two+one-photon resonance** (Δ_R = Δ_B, Δ_C = 0). The Λ subsystem is
//!   diagonalized exactly; Q couples resonantly to the Λ dark state at the
//!   effective Rabi frequency Ω_C Ω_R / Ω̄.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{lamb_dicke_parameters, resonance_mismatches, SystemConfig};

/// α_C above which the perturbative picture is flagged as unreliable.
pub const PERTURBATIVE_LIMIT: f64 = 0.1;

/// Non-fatal remarks attached to a [`PerturbativeReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ReportWarning {
    /// |α_C| ≥ 0.1.
    PerturbationInvalid { alpha_c: f64 },
    /// The detunings miss three-photon resonance by this much (rad/µs).
    OffResonance { mismatch: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbativeReport {
    pub alpha_c: f64,
    pub epsilon: f64,
    /// (P_Q, P_D, P_S) of |Ψ_NC⟩ with exact normalization.
    pub populations_nc: (f64, f64, f64),
    /// 1/(1 + α_C² + ε²), the second-order estimate of P_Q.
    pub p_q_leading: f64,
    /// Eigenfrequency of |S_Q⟩, rad/µs.
    pub shift_sq: f64,
    /// Eigenfrequency of |Q_S⟩, rad/µs.
    pub shift_qs: f64,
    /// (α_C² Ω_B/Ω_R)², the scaling of the Q resonance width.
    pub q_linewidth_scale: f64,
    pub warnings: Vec<ReportWarning>,
}

pub fn three_photon_report(config: &SystemConfig) -> Result<PerturbativeReport> {
    let (ob, or, oc) = (
        config.laser_b().rabi,
        config.laser_r().rabi,
        config.laser_c().rabi,
    );
    let dc = config.laser_c().detuning;
    if dc == 0.0 {
        return Err(Error::ZeroDetuningC);
    }
    if or == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let alpha = oc / (2.0 * dc);
    let epsilon = ob / or * alpha;

    // |S_Q⟩, |Q_S⟩ share 𝒩 = (1 + α²)^{-1/2}; |Ψ_NC⟩ has 𝒩' = (1 + ε²)^{-1/2}.
    let n2 = 1.0 / (1.0 + alpha * alpha);
    let n2p = 1.0 / (1.0 + epsilon * epsilon);
    let populations_nc = (n2p * n2, n2p * epsilon * epsilon, n2p * n2 * alpha * alpha);

    let mut warnings = Vec::new();
    if alpha.abs() >= PERTURBATIVE_LIMIT {
        warnings.push(ReportWarning::PerturbationInvalid { alpha_c: alpha });
    }
    let mismatch = resonance_mismatches(config).three_photon;
    if mismatch.abs() > 1e-9 * dc.abs() {
        warnings.push(ReportWarning::OffResonance { mismatch });
    }

    Ok(PerturbativeReport {
        alpha_c: alpha,
        epsilon,
        populations_nc,
        p_q_leading: 1.0 / (1.0 + alpha * alpha + epsilon * epsilon),
        shift_sq: alpha * oc / 2.0,
        shift_qs: -dc - alpha * oc / 2.0,
        q_linewidth_scale: (alpha * alpha * ob / or).powi(2),
        warnings,
    })
}

/// Eigenstates of the Λ system {S, P, D} at two-photon resonance. Vectors
/// are amplitudes on (S, P, D).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaEigensystem {
    pub theta: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_d: f64,
    pub dark_state: [f64; 3],
    pub bright_plus: [f64; 3],
    pub bright_minus: [f64; 3],
    pub omega_bar: f64,
    /// Ω_C Ω_R / Ω̄: coupling of Q to the dark state.
    pub effective_rabi: f64,
}

pub fn lambda_eigensystem(config: &SystemConfig) -> Result<LambdaEigensystem> {
    let (ob, or, oc) = (
        config.laser_b().rabi,
        config.laser_r().rabi,
        config.laser_c().rabi,
    );
    let db = config.laser_b().detuning;
    let omega_bar = ob.hypot(or);
    if omega_bar == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let root = db.hypot(omega_bar);
    // tan θ = (Δ_B + root)/Ω̄, rewritten to avoid cancellation for Δ_B < 0.
    let tan_theta = if db >= 0.0 {
        (db + root) / omega_bar
    } else {
        omega_bar / (root - db)
    };
    let theta = tan_theta.atan().min(FRAC_PI_2 - f64::EPSILON);
    let (s, c) = theta.sin_cos();
    let (bs, bd) = (ob / omega_bar, or / omega_bar);
    Ok(LambdaEigensystem {
        theta,
        omega_plus: -0.5 * (db - root),
        omega_minus: -0.5 * (db + root),
        omega_d: 0.0,
        dark_state: [or / omega_bar, 0.0, -ob / omega_bar],
        bright_plus: [s * bs, c, s * bd],
        bright_minus: [c * bs, -s, c * bd],
        omega_bar,
        effective_rabi: oc * or / omega_bar,
    })
}

/// Rate ℛ ≈ ε·v·Δk (rad/µs) at which motion at `velocity` (m/s) couples
/// |Ψ_NC⟩ out of darkness. Δk = k_R − k_B + k_C follows the beam geometry.
pub fn doppler_rate(config: &SystemConfig, velocity: f64) -> Result<f64> {
    let report = three_photon_report(config)?;
    let ld = lamb_dicke_parameters(config)?;
    // Δk is in rad/nm; rad/nm · m/s = 1e9 rad/s = 1e3 rad/µs.
    Ok(report.epsilon * velocity * ld.delta_k * 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mhz, to_mhz, validate};
    use crate::presets;
    use nalgebra::Matrix3;

    fn fig3() -> SystemConfig {
        validate(&presets::fig3a()).unwrap()
    }

    #[test]
    fn fig3_perturbative_numbers() {
        let r = three_photon_report(&fig3()).unwrap();
        assert!((r.alpha_c - 0.005).abs() < 1e-15);
        assert!((r.epsilon - 0.02).abs() < 1e-15);
        let (q, d, s) = r.populations_nc;
        assert!((q - 0.99957).abs() < 1e-5);
        assert!((d - 3.998e-4).abs() < 1e-7);
        assert!((s - 2.5e-5).abs() < 5e-8);
        assert!((q + d + s - 1.0).abs() < 1e-14);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn decoupling_limit() {
        let mut raw = presets::fig3a();
        raw.laser_c.rabi = 0.0;
        let r = three_photon_report(&validate(&raw).unwrap()).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert_eq!(r.populations_nc.0, 1.0);
    }

    #[test]
    fn zero_clock_detuning() {
        let mut raw = presets::fig3a();
        raw.laser_c.detuning = 0.0;
        assert!(matches!(
            three_photon_report(&validate(&raw).unwrap()),
            Err(Error::ZeroDetuningC)
        ));
    }

    #[test]
    fn strong_clock_drive_is_flagged() {
        let mut raw = presets::fig3a();
        raw.laser_c.rabi = 2.0;
        let r = three_photon_report(&validate(&raw).unwrap()).unwrap();
        assert!(matches!(r.warnings[0], ReportWarning::PerturbationInvalid { .. }));
    }

    #[test]
    fn symmetric_splitting_at_zero_detuning() {
        let mut raw = presets::fig3e();
        raw.laser_b.detuning = 0.0;
        let l = lambda_eigensystem(&validate(&raw).unwrap()).unwrap();
        assert!((l.theta - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((l.omega_plus - l.omega_bar / 2.0).abs() < 1e-12);
        assert!((l.omega_minus + l.omega_bar / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fig3_lambda_numbers() {
        let l = lambda_eigensystem(&validate(&presets::fig3e()).unwrap()).unwrap();
        assert!((to_mhz(l.omega_bar) - 10.3078).abs() < 1e-4);
        assert!((l.theta - 1.1155).abs() < 1e-4);
        assert!((to_mhz(l.omega_plus) - 2.5240).abs() < 1e-4);
        assert!((to_mhz(l.omega_minus) + 10.5240).abs() < 1e-4);
        assert!((to_mhz(l.effective_rabi) - 0.012127).abs() < 1e-6);
        assert!((l.dark_state[0] - 0.2425).abs() < 1e-4);
        assert!((l.dark_state[2] + 0.9701).abs() < 1e-4);
    }

    #[test]
    fn eigenvectors_diagonalize_lambda_hamiltonian() {
        for (ob, or, db) in [(10.0, 2.5, 8.0), (1.0, 7.0, -3.0), (4.0, 4.0, 0.0)] {
            let mut raw = presets::fig3e();
            raw.laser_b.rabi = ob;
            raw.laser_r.rabi = or;
            raw.laser_b.detuning = db;
            raw.laser_r.detuning = db;
            let l = lambda_eigensystem(&validate(&raw).unwrap()).unwrap();
            let (ob, or, db) = (mhz(ob), mhz(or), mhz(db));
            let h = Matrix3::new(0.0, ob / 2.0, 0.0, ob / 2.0, -db, or / 2.0, 0.0, or / 2.0, 0.0);
            let vecs = [l.dark_state, l.bright_plus, l.bright_minus];
            let vals = [l.omega_d, l.omega_plus, l.omega_minus];
            for (v, e) in vecs.iter().zip(vals) {
                let v = nalgebra::Vector3::from(*v);
                assert!((h * v - v * e).amax() < 1e-10);
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let d: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                    assert!(d.abs() < 1e-12);
                }
            }
            assert!((0.0..FRAC_PI_2).contains(&l.theta));
        }
    }

    #[test]
    fn zero_coupling() {
        let mut raw = presets::fig3e();
        raw.laser_b.rabi = 0.0;
        raw.laser_r.rabi = 0.0;
        assert!(matches!(
            lambda_eigensystem(&validate(&raw).unwrap()),
            Err(Error::ZeroCoupling)
        ));
    }

    #[test]
    fn doppler_rate_cases() {
        let co = validate(&presets::fig6_co()).unwrap();
        assert_eq!(doppler_rate(&co, 0.0).unwrap(), 0.0);

        let mut matched = presets::fig6_co();
        // k_R − k_B + k_C = 0 exactly when 1/λ_R + 1/λ_C = 1/λ_B.
        matched.laser_c.wavelength_nm = 1.0 / (1.0 / 397.0 - 1.0 / 866.0);
        let matched = validate(&matched).unwrap();
        assert!(doppler_rate(&matched, 3.7).unwrap().abs() < 1e-12);

        let counter = validate(&presets::fig6_counter()).unwrap();
        let r = doppler_rate(&counter, 1.0).unwrap();
        // ε·v·Δk with Δk = 2π(1/397 + 1/866 + 1/729) nm⁻¹, in rad/µs.
        let dk = 2.0 * std::f64::consts::PI * (1.0 / 397.0 + 1.0 / 866.0 + 1.0 / 729.0) * 1e9;
        let expect = 0.02 * dk * 1e-6;
        assert!((r - expect).abs() < 1e-12 * expect);
        // ≈ 0.02 · 2·(2π/397 nm) · 1 m/s ≈ 6.33e5 rad/s.
        assert!((r * 1e6 / 6.33e5 - 1.0).abs() < 0.01);
    }
}
