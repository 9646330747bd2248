//! Hamiltonian, relaxation operator and the 16×16 master-equation generator.
//!
//! Density matrices are vectorized by stacking columns: element ρ_ij sits at
//! index `i + 4 j`, with the level order (S, P, D, Q). The generator 𝓜 then
//! satisfies vec(dρ/dt) = 𝓜 · vec(ρ).

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SMatrix};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{eigen_decompose, EigenDecomposition};
use crate::model::{lamb_dicke_parameters, max_abs, Mat4, SystemConfig, C64};

pub type Mat16 = SMatrix<C64, 16, 16>;

const S: usize = 0;
const P: usize = 1;
const D: usize = 2;
const Q: usize = 3;

/// Maximum anti-Hermitian residue accepted for an input Hamiltonian.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-10;

/// Position of ρ_ij in the vectorized density matrix.
#[inline]
pub fn vec_index(i: usize, j: usize) -> usize {
    i + 4 * j
}

pub fn vectorize(rho: &Mat4) -> DVector<C64> {
    DVector::from_iterator(16, rho.iter().copied())
}

pub fn unvectorize(v: &DVector<C64>) -> Mat4 {
    Mat4::from_iterator(v.iter().copied())
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn ket_bra(i: usize, j: usize) -> Mat4 {
    let mut m = Mat4::zeros();
    m[(i, j)] = c(1.0);
    m
}

/// Terms of the laser Hamiltonian in the rotating frame (ħ = 1).
///
/// `h_plus` and `h_minus` multiply e^{+iνt} and e^{−iνt} in the first-order
/// Lamb-Dicke expansion of the coupling; they vanish when motion is off.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianParts {
    pub h0: Mat4,
    pub h_carrier: Mat4,
    pub h_plus: Mat4,
    pub h_minus: Mat4,
}

impl HamiltonianParts {
    /// H₀ + H_I⁽⁰⁾, the Hamiltonian of an ion at rest.
    pub fn total(&self) -> Mat4 {
        self.h0 + self.h_carrier
    }
}

pub fn build_hamiltonian(config: &SystemConfig) -> HamiltonianParts {
    let (b, r, cc) = (config.laser_b(), config.laser_r(), config.laser_c());

    let mut h0 = Mat4::zeros();
    h0[(P, P)] = c(-b.detuning);
    h0[(D, D)] = c(r.detuning - b.detuning);
    h0[(Q, Q)] = c(-cc.detuning);

    let coupling = |wb: C64, wr: C64, wc: C64| {
        let up = ket_bra(P, S) * wb * c(b.rabi / 2.0)
            + ket_bra(P, D) * wr * c(r.rabi / 2.0)
            + ket_bra(Q, S) * wc * c(cc.rabi / 2.0);
        up + up.adjoint()
    };
    let h_carrier = coupling(c(1.0), c(1.0), c(1.0));

    let h_side = match lamb_dicke_parameters(config) {
        Ok(ld) => coupling(
            C64::new(0.0, ld.eta_b),
            C64::new(0.0, ld.eta_r),
            C64::new(0.0, ld.eta_c),
        ),
        Err(_) => Mat4::zeros(),
    };

    HamiltonianParts {
        h0,
        h_carrier,
        h_plus: h_side,
        h_minus: h_side,
    }
}

/// Extra coherence decay rates from laser phase diffusion, as
/// `(i, j, rate)` with i > j. Each coherence picks up the summed HWHM of
/// every laser whose phase it carries.
pub fn dephasing_rates(config: &SystemConfig) -> [(usize, usize, f64); 6] {
    let bb = config.laser_b().linewidth_hwhm;
    let br = config.laser_r().linewidth_hwhm;
    let bc = config.laser_c().linewidth_hwhm;
    [
        (P, S, bb),
        (P, D, br),
        (Q, S, bc),
        (D, S, bb + br),
        (Q, P, bb + bc),
        (Q, D, bb + br + bc),
    ]
}

/// The relaxation operator applied to ρ, written out term by term:
/// P decays at γ_P into S (fraction β_PS) and D (β_PD); Q decays at γ_Q
/// into S; optional phase diffusion damps the coherences.
pub fn dissipator(config: &SystemConfig, rho: &Mat4, dephasing: bool) -> Mat4 {
    let a = config.atom();
    let pp = ket_bra(P, P);
    let qq = ket_bra(Q, Q);
    let mut out = -(rho * pp + pp * rho) * c(a.gamma_p / 2.0)
        - (rho * qq + qq * rho) * c(a.gamma_q / 2.0);
    out[(S, S)] += rho[(P, P)] * a.beta_ps * a.gamma_p + rho[(Q, Q)] * a.gamma_q;
    out[(D, D)] += rho[(P, P)] * a.beta_pd * a.gamma_p;
    if dephasing {
        for (i, j, rate) in dephasing_rates(config) {
            out[(i, j)] -= rho[(i, j)] * rate;
            out[(j, i)] -= rho[(j, i)] * rate;
        }
    }
    out
}

/// Master-equation generator 𝓜 acting on column-stacked density matrices.
///
/// The eigendecomposition used for propagation is computed on first use and
/// cached; the cache is safe to read from many threads.
#[derive(Debug)]
pub struct Superoperator {
    matrix: Mat16,
    eigen: OnceLock<Option<EigenDecomposition>>,
}

impl Clone for Superoperator {
    fn clone(&self) -> Self {
        Superoperator::from_matrix(self.matrix)
    }
}

impl Superoperator {
    pub fn from_matrix(matrix: Mat16) -> Self {
        Superoperator {
            matrix,
            eigen: OnceLock::new(),
        }
    }

    pub fn matrix(&self) -> &Mat16 {
        &self.matrix
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_iterator(16, 16, self.matrix.iter().copied())
    }

    /// Cached eigendecomposition; `None` when the Schur back substitution
    /// produced a singular eigenbasis.
    pub fn eigen(&self) -> Option<&EigenDecomposition> {
        self.eigen
            .get_or_init(|| eigen_decompose(&self.to_dmatrix()))
            .as_ref()
    }
}

/// Builds 𝓜 = −i[h, ·] + ℒ column by column from the action on the
/// elementary matrices |k⟩⟨l|.
pub fn build_superoperator(h: &Mat4, config: &SystemConfig, dephasing: bool) -> Result<Superoperator> {
    let deviation = max_abs(&(h - h.adjoint()));
    if deviation > HERMITIAN_INPUT_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(Superoperator::from_matrix(liouville_matrix(h, config, dephasing)))
}

/// Commutator part only, −i[h, ·], with no Hermiticity requirement on h.
pub fn commutator_matrix(h: &Mat4) -> Mat16 {
    let mut m = Mat16::zeros();
    for l in 0..4 {
        for k in 0..4 {
            let e = ket_bra(k, l);
            let out = (h * e - e * h) * C64::new(0.0, -1.0);
            let col = vec_index(k, l);
            for (row, v) in out.iter().enumerate() {
                m[(row, col)] = *v;
            }
        }
    }
    m
}

fn liouville_matrix(h: &Mat4, config: &SystemConfig, dephasing: bool) -> Mat16 {
    let mut m = commutator_matrix(h);
    for l in 0..4 {
        for k in 0..4 {
            let out = dissipator(config, &ket_bra(k, l), dephasing);
            let col = vec_index(k, l);
            for (row, v) in out.iter().enumerate() {
                m[(row, col)] += *v;
            }
        }
    }
    m
}

/// Generator of the ion at rest: H₀ + H_I⁽⁰⁾ with dephasing switched on
/// whenever a laser has a finite linewidth.
pub fn carrier_superoperator(config: &SystemConfig) -> Superoperator {
    let h = build_hamiltonian(config).total();
    Superoperator::from_matrix(liouville_matrix(&h, config, config.has_linewidth()))
}

/// dρ/dt for the given generator.
pub fn apply(superop: &Superoperator, rho: &Mat4) -> Mat4 {
    let v = superop.matrix() * nalgebra::SVector::<C64, 16>::from_iterator(rho.iter().copied());
    Mat4::from_iterator(v.iter().copied())
}

fn complex_rows<'a>(rows: usize, cols: usize, at: impl Fn(usize, usize) -> &'a C64) -> Value {
    Value::Array(
        (0..rows)
            .map(|i| Value::Array((0..cols).map(|j| json!([at(i, j).re, at(i, j).im])).collect()))
            .collect(),
    )
}

/// Row-major `[re, im]` dump of a 4×4 matrix.
pub fn mat4_json(m: &Mat4) -> Value {
    complex_rows(4, 4, |i, j| &m[(i, j)])
}

/// Row-major `[re, im]` dump of the generator, for cross-implementation diffs.
pub fn superoperator_json(superop: &Superoperator) -> Value {
    json!({
        "vectorization": "column-major, index i + 4*j for rho_ij, levels S,P,D,Q",
        "matrix": complex_rows(16, 16, |i, j| &superop.matrix()[(i, j)]),
    })
}

pub fn hamiltonian_json(parts: &HamiltonianParts) -> Value {
    json!({
        "h0": mat4_json(&parts.h0),
        "h_carrier": mat4_json(&parts.h_carrier),
        "h_plus": mat4_json(&parts.h_plus),
        "h_minus": mat4_json(&parts.h_minus),
    })
}
