//! Dense complex linear algebra shared by the solvers: eigendecomposition
//! of non-normal matrices and an adaptive Runge-Kutta integrator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Right eigenvectors `vectors` (as columns), their eigenvalues and the
/// inverse eigenbasis, so that `m = vectors · diag(values) · inverse`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: DVector<C64>,
    pub vectors: DMatrix<C64>,
    pub inverse: DMatrix<C64>,
    /// 2-norm condition number of `vectors`.
    pub condition: f64,
    /// max |m·V − V·Λ| relative to max |m|.
    pub residual: f64,
}

impl EigenDecomposition {
    /// `exp(m t) x`, evaluated in the eigenbasis.
    pub fn propagate(&self, x: &DVector<C64>, t: f64) -> DVector<C64> {
        let mut c = &self.inverse * x;
        for (ci, lambda) in c.iter_mut().zip(self.values.iter()) {
            *ci *= (lambda * t).exp();
        }
        &self.vectors * c
    }
}

/// Eigendecomposition via the complex Schur form followed by back
/// substitution on the triangular factor. Near-coincident eigenvalues are
/// separated by an `eps·‖T‖` floor on the pivots, so a defective matrix shows
/// up as an ill-conditioned eigenbasis rather than as a failure.
pub fn eigen_decompose(m: &DMatrix<C64>) -> Option<EigenDecomposition> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let (q, t) = m.clone().schur().unpack();
    let small = f64::EPSILON * scale;

    let mut x = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        x[(k, k)] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * x[(l, k)];
            }
            let mut pivot = t[(j, j)] - lambda;
            if pivot.norm() < small {
                pivot = C64::new(small, 0.0);
            }
            x[(j, k)] = -s / pivot;
        }
    }
    let mut vectors = q * x;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        col /= C64::new(norm, 0.0);
    }
    let values = DVector::from_iterator(n, (0..n).map(|k| t[(k, k)]));

    let sv = vectors.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let inverse = vectors.clone().try_inverse()?;

    let lambda = DMatrix::from_diagonal(&values);
    let residual = (m * &vectors - &vectors * lambda)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        / scale;

    Some(EigenDecomposition {
        values,
        vectors,
        inverse,
        condition,
        residual,
    })
}

/// Singular values sorted in decreasing order.
pub fn sorted_singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Dormand–Prince 5(4) with adaptive steps for `dy/dt = f(t, y)`, returning
/// the state at each requested output time. Outputs must be non-decreasing
/// and start at or after `t0`.
pub fn dopri5<F>(
    f: F,
    t0: f64,
    y0: DVector<C64>,
    outputs: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<DVector<C64>>, String>
where
    F: Fn(f64, &DVector<C64>) -> DVector<C64>,
{
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    // Error coefficients: fifth-order minus embedded fourth-order weights.
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    let r = |x: f64| C64::new(x, 0.0);
    let mut out = Vec::with_capacity(outputs.len());
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = {
        let scale = y.iter().map(|z| z.norm()).fold(0.0, f64::max).max(atol);
        let dnorm = k1.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        (0.01 * scale / dnorm).min(1.0)
    };
    let mut steps = 0usize;

    for &target in outputs {
        if target < t {
            return Err(format!("output time {target} precedes current time {t}"));
        }
        while t < target {
            steps += 1;
            if steps > 50_000_000 {
                return Err("step limit exceeded".into());
            }
            let last = t + h >= target;
            let hh = if last { target - t } else { h };
            let y2 = &y + &k1 * r(hh * A21);
            let k2 = f(t + C2 * hh, &y2);
            let y3 = &y + (&k1 * r(A31) + &k2 * r(A32)) * r(hh);
            let k3 = f(t + C3 * hh, &y3);
            let y4 = &y + (&k1 * r(A41) + &k2 * r(A42) + &k3 * r(A43)) * r(hh);
            let k4 = f(t + C4 * hh, &y4);
            let y5 = &y + (&k1 * r(A51) + &k2 * r(A52) + &k3 * r(A53) + &k4 * r(A54)) * r(hh);
            let k5 = f(t + C5 * hh, &y5);
            let y6 = &y
                + (&k1 * r(A61) + &k2 * r(A62) + &k3 * r(A63) + &k4 * r(A64) + &k5 * r(A65))
                    * r(hh);
            let k6 = f(t + hh, &y6);
            let ynew = &y
                + (&k1 * r(B1) + &k3 * r(B3) + &k4 * r(B4) + &k5 * r(B5) + &k6 * r(B6)) * r(hh);
            let k7 = f(t + hh, &ynew);
            let err_vec = (&k1 * r(E1)
                + &k3 * r(E3)
                + &k4 * r(E4)
                + &k5 * r(E5)
                + &k6 * r(E6)
                + &k7 * r(E7))
                * r(hh);
            let err = err_vec
                .iter()
                .zip(y.iter().zip(ynew.iter()))
                .map(|(e, (a, b))| {
                    let sc = atol + rtol * a.norm().max(b.norm());
                    (e.norm() / sc).powi(2)
                })
                .sum::<f64>()
                .sqrt()
                / (y.len() as f64).sqrt();

            if err <= 1.0 {
                t = if last { target } else { t + hh };
                y = ynew;
                k1 = k7;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !(last && err <= 1.0) {
                h = hh * factor;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(format!("step size underflow at t = {t}"));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
