//! Stationary response of an ion oscillating at the trap frequency ν.
//!
//! To first order in the Lamb-Dicke parameters the coupling splits into a
//! carrier part and two sideband parts H⁺, H⁻ multiplying e^{±iνt}. With
//! ρ(t) = Σₙ ρ⁽ⁿ⁾ e^{inνt} the stationary blocks satisfy
//!
//! 0 = −inν ρ⁽ⁿ⁾ + 𝓜₀ρ⁽ⁿ⁾ − i[H⁺, ρ⁽ⁿ⁻¹⁾] − i[H⁻, ρ⁽ⁿ⁺¹⁾],
//!
//! truncated at |n| ≤ N. The blocks are solved together as one dense
//! linear system in which one population equation of block 0 is replaced by
//! Tr ρ⁽⁰⁾ = 1.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::sorted_singular_values;
use crate::liouvillian::{build_hamiltonian, carrier_superoperator, commutator_matrix, mat4_json, vec_index};
use crate::model::{lamb_dicke_parameters, populations, DensityMatrix, Mat4, SystemConfig, C64};
use crate::steady::KERNEL_GAP_THRESHOLD;

/// Largest |ρ⁽⁰⁾_N − ρ⁽⁰⁾_{N+1}| accepted as converged.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Highest order tried by [`solve_floquet_auto`].
pub const MAX_AUTO_ORDER: usize = 8;
/// Largest accepted residual of the block system.
pub const BLOCK_RESIDUAL_LIMIT: f64 = 1e-9;
/// Largest accepted deviation from ρ⁽⁻ⁿ⁾ = (ρ⁽ⁿ⁾)† before symmetrization.
pub const PAIRING_TOL: f64 = 1e-10;

/// Stationary Fourier blocks ρ⁽ⁿ⁾, n = −N..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetBlockSystem {
    pub order: usize,
    /// ν in rad/µs.
    pub trap_frequency: f64,
    /// `blocks[n + N]` is ρ⁽ⁿ⁾.
    pub blocks: Vec<Mat4>,
    /// Max-norm residual of the untruncated equations of the block system.
    pub residual: f64,
    /// max |ρ⁽⁻ⁿ⁾ − (ρ⁽ⁿ⁾)†| of the raw solution.
    pub pairing_deviation: f64,
}

impl FloquetBlockSystem {
    pub fn block(&self, n: i64) -> Option<&Mat4> {
        let idx = n + self.order as i64;
        (0..self.blocks.len() as i64)
            .contains(&idx)
            .then(|| &self.blocks[idx as usize])
    }

    /// The time-averaged state ρ⁽⁰⁾.
    pub fn rho0(&self) -> &Mat4 {
        &self.blocks[self.order]
    }

    /// Time-averaged populations (P_S, P_P, P_D, P_Q).
    pub fn populations(&self) -> [f64; 4] {
        populations(self.rho0())
    }

    /// All blocks as JSON, `{"order", "trap_frequency", "blocks": {"-1": [[[re, im], …], …], …}}`
    /// with each block row-major.
    pub fn to_json(&self) -> Value {
        let blocks: serde_json::Map<String, Value> = (-(self.order as i64)..=self.order as i64)
            .map(|n| (n.to_string(), mat4_json(self.block(n).unwrap())))
            .collect();
        json!({
            "order": self.order,
            "trap_frequency": self.trap_frequency,
            "residual": self.residual,
            "blocks": blocks,
        })
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidInput("Floquet order must be at least 1".into()));
    }
    Ok(())
}

/// The 16(2N+1)-dimensional block-tridiagonal generator. Block (n, m) acts
/// on ρ⁽ᵐ⁾ in the equation for ρ⁽ⁿ⁾.
pub fn build_floquet_generator(config: &SystemConfig, order: usize) -> Result<DMatrix<C64>> {
    lamb_dicke_parameters(config)?;
    check_order(order)?;
    let nu = config.motion().trap_frequency;
    let m0 = carrier_superoperator(config);
    let parts = build_hamiltonian(config);
    let plus = commutator_matrix(&parts.h_plus);
    let minus = commutator_matrix(&parts.h_minus);

    let nb = 2 * order + 1;
    let dim = 16 * nb;
    let mut g = DMatrix::<C64>::zeros(dim, dim);
    for b in 0..nb {
        let n = b as f64 - order as f64;
        let r0 = 16 * b;
        g.view_mut((r0, r0), (16, 16)).copy_from(m0.matrix());
        for k in 0..16 {
            g[(r0 + k, r0 + k)] -= C64::new(0.0, n * nu);
        }
        if b > 0 {
            g.view_mut((r0, r0 - 16), (16, 16)).copy_from(&plus);
        }
        if b + 1 < nb {
            g.view_mut((r0, r0 + 16), (16, 16)).copy_from(&minus);
        }
    }
    Ok(g)
}

/// Stationary blocks at exactly `order`, without a truncation check.
pub fn solve_at_order(config: &SystemConfig, order: usize) -> Result<FloquetBlockSystem> {
    let g = build_floquet_generator(config, order)?;
    let dim = g.nrows();
    // Uniqueness is judged on the carrier generator; the block residual
    // below catches a bad solve of the full system.
    let sv = sorted_singular_values(&carrier_superoperator(config).to_dmatrix());
    let gap = if sv[0] > 0.0 { sv[14] / sv[0] } else { 0.0 };
    if gap < KERNEL_GAP_THRESHOLD {
        return Err(Error::DegenerateKernel { gap });
    }

    let trace_row = 16 * order + vec_index(0, 0);
    let mut a = g.clone();
    for c in 0..dim {
        a[(trace_row, c)] = C64::new(0.0, 0.0);
    }
    for l in 0..4 {
        a[(trace_row, 16 * order + vec_index(l, l))] = C64::new(1.0, 0.0);
    }
    let mut rhs = DVector::<C64>::zeros(dim);
    rhs[trace_row] = C64::new(1.0, 0.0);
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoConvergence("bordered Floquet system is singular".into()))?;

    let residual = (&g * &x).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > BLOCK_RESIDUAL_LIMIT {
        return Err(Error::NoConvergence(format!(
            "Floquet residual {residual:e} exceeds {BLOCK_RESIDUAL_LIMIT:e}"
        )));
    }

    let nb = 2 * order + 1;
    let raw: Vec<Mat4> = (0..nb)
        .map(|b| Mat4::from_iterator(x.rows(16 * b, 16).iter().copied()))
        .collect();
    let mut pairing_deviation: f64 = 0.0;
    let mut blocks = raw.clone();
    for b in 0..nb {
        let mirror = raw[nb - 1 - b].adjoint();
        pairing_deviation = pairing_deviation.max(
            (raw[b] - mirror)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max),
        );
        blocks[b] = (raw[b] + mirror) * C64::new(0.5, 0.0);
    }
    if pairing_deviation > PAIRING_TOL {
        return Err(Error::NoConvergence(format!(
            "Floquet blocks violate Hermitian pairing by {pairing_deviation:e}"
        )));
    }
    DensityMatrix::new(blocks[order]).map_err(|e| Error::NonPhysicalState(format!("time-averaged state: {e}")))?;

    Ok(FloquetBlockSystem {
        order,
        trap_frequency: config.motion().trap_frequency,
        blocks,
        residual,
        pairing_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Convergence {
    pub order: usize,
    /// max |ρ⁽⁰⁾_N − ρ⁽⁰⁾_{N+1}|.
    pub delta: f64,
    pub converged: bool,
}

fn delta_between(a: &FloquetBlockSystem, b: &FloquetBlockSystem) -> f64 {
    (a.rho0() - b.rho0()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Compares the time-averaged state at orders N and N+1.
pub fn convergence_check(config: &SystemConfig, order: usize) -> Result<Convergence> {
    let a = solve_at_order(config, order)?;
    let b = solve_at_order(config, order + 1)?;
    let delta = delta_between(&a, &b);
    Ok(Convergence {
        order,
        delta,
        converged: delta < CONVERGENCE_TOL,
    })
}

/// Stationary blocks at `order`, rejected with `TruncationNotConverged`
/// unless order N+1 agrees to [`CONVERGENCE_TOL`].
pub fn solve_floquet_steady(config: &SystemConfig, order: usize) -> Result<FloquetBlockSystem> {
    let a = solve_at_order(config, order)?;
    let b = solve_at_order(config, order + 1)?;
    let delta = delta_between(&a, &b);
    if delta < CONVERGENCE_TOL {
        Ok(a)
    } else {
        Err(Error::TruncationNotConverged {
            order,
            next: order + 1,
            delta,
        })
    }
}

/// Stationary blocks at the lowest order ≥ `start` that agrees with the
/// next order to [`CONVERGENCE_TOL`], trying up to [`MAX_AUTO_ORDER`].
pub fn solve_floquet_auto(config: &SystemConfig, start: usize) -> Result<FloquetBlockSystem> {
    check_order(start)?;
    let mut current = solve_at_order(config, start)?;
    let mut delta = f64::INFINITY;
    for order in start..MAX_AUTO_ORDER.max(start + 1) {
        let next = solve_at_order(config, order + 1)?;
        delta = delta_between(&current, &next);
        if delta < CONVERGENCE_TOL {
            return Ok(current);
        }
        current = next;
    }
    Err(Error::TruncationNotConverged {
        order: current.order - 1,
        next: current.order,
        delta,
    })
}
