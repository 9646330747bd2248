//! Dominant oscillation frequency of a sampled signal.
//!
//! The signal minus its final value is resampled onto a uniform grid and
//! Fourier transformed by the trapezoidal rule. The strongest interior local
//! maximum of |F(ω)| is the candidate; it is accepted when the spectrum dips
//! enough between ω = 0 and the peak.

use num_complex::Complex64 as C64;

/// Largest number of uniform samples used for the transform.
pub const MAX_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    /// Angular frequency of the peak, in the inverse units of the time axis.
    pub omega: f64,
    /// 1 − |F(valley)|/|F(peak)|, with the valley taken between the lowest
    /// resolved frequency and the peak.
    pub contrast: f64,
}

struct Uniform {
    t0: f64,
    dt: f64,
    x: Vec<f64>,
}

fn resample(times: &[f64], values: &[f64]) -> Option<Uniform> {
    let n = times.len();
    if n < 8 || values.len() != n {
        return None;
    }
    let (t0, t1) = (times[0], times[n - 1]);
    if t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    let m = n.min(MAX_SAMPLES);
    let dt = (t1 - t0) / (m - 1) as f64;
    let last = values[n - 1];
    let mut x = Vec::with_capacity(m);
    let mut k = 0;
    for i in 0..m {
        let t = if i + 1 == m { t1 } else { t0 + i as f64 * dt };
        while k + 2 < n && times[k + 1] < t {
            k += 1;
        }
        let (ta, tb) = (times[k], times[k + 1]);
        let w = if tb > ta { ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { 0.0 };
        x.push(values[k] + w * (values[k + 1] - values[k]) - last);
    }
    Some(Uniform { t0, dt, x })
}

impl Uniform {
    fn magnitude(&self, omega: f64) -> f64 {
        let step = C64::from_polar(1.0, -omega * self.dt);
        let mut phase = C64::from_polar(1.0, -omega * self.t0);
        let mut acc = C64::new(0.0, 0.0);
        let n = self.x.len();
        for (i, &v) in self.x.iter().enumerate() {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            acc += phase * (w * v);
            phase *= step;
        }
        (acc * self.dt).norm()
    }
}

/// The dominant oscillation of `values(times)`, or `None` when no interior
/// spectral maximum reaches `min_contrast`.
pub fn dominant_frequency(times: &[f64], values: &[f64], min_contrast: f64) -> Option<SpectralPeak> {
    let u = resample(times, values)?;
    let span = u.dt * (u.x.len() - 1) as f64;
    let w_lo = 2.0 * std::f64::consts::PI / span;
    let w_hi = std::f64::consts::PI / u.dt;
    let dw = 0.5 * std::f64::consts::PI / span;
    let count = ((w_hi - w_lo) / dw).floor() as usize + 1;
    if count < 3 {
        return None;
    }
    let omegas: Vec<f64> = (0..count).map(|k| w_lo + k as f64 * dw).collect();
    let mags: Vec<f64> = omegas.iter().map(|&w| u.magnitude(w)).collect();

    let best = (1..count - 1)
        .filter(|&k| mags[k] > mags[k - 1] && mags[k] >= mags[k + 1])
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))?;
    if mags[best] <= 0.0 {
        return None;
    }
    let valley = mags[..best].iter().copied().fold(f64::INFINITY, f64::min);

    // Golden-section refinement of the peak inside its bracketing cell.
    let (mut a, mut b) = (omegas[best - 1], omegas[best + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (u.magnitude(c), u.magnitude(d));
    while (b - a) > 1e-9 * b.abs().max(dw) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = u.magnitude(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = u.magnitude(d);
        }
    }
    let omega = 0.5 * (a + b);
    let peak = u.magnitude(omega).max(mags[best]);
    let contrast = 1.0 - valley / peak;
    (contrast >= min_contrast).then_some(SpectralPeak { omega, contrast })
}
