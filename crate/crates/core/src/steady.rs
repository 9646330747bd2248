//! Stationary solution of 𝓜ρ = 0 with Tr ρ = 1.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::liouvillian::{vec_index, Mat16, Superoperator};
use crate::linalg::sorted_singular_values;
use crate::model::{DensityMatrix, Mat4, C64, POSITIVITY_TOL};

/// Kernel is declared degenerate when σ₂/σ_max falls below this.
pub const KERNEL_GAP_THRESHOLD: f64 = 1e-12;
/// Largest accepted ‖𝓜ρ‖_max.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub rho: DensityMatrix,
    /// ‖𝓜ρ‖_max of the returned state.
    pub residual: f64,
    /// Second-smallest over largest singular value of the reduced generator.
    pub gap: f64,
    /// Levels that carry no coupling at all and were left unpopulated.
    pub spectators: Vec<usize>,
}

/// The steady state of `superop`.
pub fn steady_state(superop: &Superoperator) -> Result<DensityMatrix> {
    solve(superop).map(|s| s.rho)
}

/// Levels whose population neither feeds nor is fed by any other element
/// of the density matrix. Such a level is invariant under the dynamics and
/// is taken to be empty, together with its coherences.
fn spectator_levels(m: &Mat16) -> Vec<usize> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    (0..4)
        .filter(|&lvl| {
            let e = vec_index(lvl, lvl);
            (0..16).all(|f| f == e || (m[(e, f)].norm() <= tiny && m[(f, e)].norm() <= tiny))
        })
        .collect()
}

/// Full solve with diagnostics.
///
/// One population row of the (reduced) generator is replaced by the trace
/// condition and the square system is solved directly. The result is then
/// Hermitized, checked against the full residual, and tiny negative
/// eigenvalues in [−1e-10, 0) are clipped.
pub fn solve(superop: &Superoperator) -> Result<SteadySolution> {
    let m = superop.matrix();
    let spectators = spectator_levels(m);
    let active: Vec<usize> = (0..4).filter(|l| !spectators.contains(l)).collect();
    if active.is_empty() {
        return Err(Error::DegenerateKernel { gap: 0.0 });
    }

    let elems: Vec<(usize, usize)> = active
        .iter()
        .flat_map(|&j| active.iter().map(move |&i| (i, j)))
        .collect();
    let n = elems.len();
    let reduced = DMatrix::<C64>::from_fn(n, n, |r, c| {
        let (i, j) = elems[r];
        let (k, l) = elems[c];
        m[(vec_index(i, j), vec_index(k, l))]
    });

    let sv = sorted_singular_values(&reduced);
    let gap = if n < 2 || sv[0] == 0.0 {
        0.0
    } else {
        sv[n - 2] / sv[0]
    };
    if gap < KERNEL_GAP_THRESHOLD {
        return Err(Error::DegenerateKernel { gap });
    }

    let mut a = reduced;
    let trace_row = elems.iter().position(|&(i, j)| i == j).expect("active level");
    for (c, &(i, j)) in elems.iter().enumerate() {
        a[(trace_row, c)] = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    let mut b = DVector::<C64>::zeros(n);
    b[trace_row] = C64::new(1.0, 0.0);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NoConvergence("bordered steady-state system is singular".into()))?;

    let mut rho = Mat4::zeros();
    for (v, &(i, j)) in x.iter().zip(&elems) {
        rho[(i, j)] = *v;
    }
    rho = (rho + rho.adjoint()) * C64::new(0.5, 0.0);

    let residual = residual(m, &rho);
    if residual > RESIDUAL_LIMIT {
        return Err(Error::NoConvergence(format!(
            "steady-state residual {residual:e} exceeds {RESIDUAL_LIMIT:e}"
        )));
    }

    let rho = clip_negative(rho)?;
    let residual = crate::steady::residual(m, &rho);
    Ok(SteadySolution {
        rho: DensityMatrix::new(rho)?,
        residual,
        gap,
        spectators,
    })
}

/// ‖𝓜 vec(ρ)‖_max.
pub fn residual(m: &Mat16, rho: &Mat4) -> f64 {
    let v = m * nalgebra::SVector::<C64, 16>::from_iterator(rho.iter().copied());
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn clip_negative(rho: Mat4) -> Result<Mat4> {
    let eig = rho.symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -POSITIVITY_TOL {
        return Err(Error::NonPhysicalState(format!(
            "steady state has eigenvalue {min:e}"
        )));
    }
    if min >= 0.0 {
        return Ok(rho);
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = eig.eigenvectors;
    let d = Mat4::from_diagonal(&clipped.map(|l| C64::new(l, 0.0)));
    let out = v * d * v.adjoint();
    let tr = out.trace().re;
    let out = out / C64::new(tr, 0.0);
    Ok((out + out.adjoint()) * C64::new(0.5, 0.0))
}

/// Three-level Λ steady state computed independently of the four-level
/// solver, by deleting every row and column that involves Q. Used to
/// cross-check the Ω_C = 0 reduction.
pub fn lambda_only_steady_state(superop: &Superoperator) -> Result<Mat4> {
    let m = superop.matrix();
    let elems: Vec<(usize, usize)> = (0..3).flat_map(|j| (0..3).map(move |i| (i, j))).collect();
    let mut a = DMatrix::<C64>::from_fn(9, 9, |r, c| {
        let (i, j) = elems[r];
        let (k, l) = elems[c];
        m[(vec_index(i, j), vec_index(k, l))]
    });
    for (c, &(i, j)) in elems.iter().enumerate() {
        a[(0, c)] = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    let mut b = DVector::<C64>::zeros(9);
    b[0] = C64::new(1.0, 0.0);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NoConvergence("Lambda system singular".into()))?;
    let mut rho = Mat4::zeros();
    for (v, &(i, j)) in x.iter().zip(&elems) {
        rho[(i, j)] = *v;
    }
    Ok(rho)
}
