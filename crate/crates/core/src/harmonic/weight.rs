//! The cutoff `w`: a normalised convolution of `K` box kernels with widths
//! `a_j = a_0 / (j+1)^2` summing to 1, so `w` is supported on `[0, 1]` and
//! its transform is the product of the box transforms.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::e;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SmoothWeight {
    /// `w(i / resolution)` for `i = 0..=resolution`.
    grid: Vec<f64>,
    depth: usize,
    resolution: usize,
    widths: Vec<f64>,
    /// Peak of the unit-mass convolution; `w` is that density divided by it.
    peak: f64,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl SmoothWeight {
    pub fn build(depth: usize, resolution: usize) -> Result<Self> {
        if depth < 2 || resolution < 1 << 10 || !resolution.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "need depth >= 2 and an even resolution >= 1024, got {depth}, {resolution}"
            )));
        }
        let a0 = 1.0 / (1..=depth).map(|j| 1.0 / (j * j) as f64).sum::<f64>();
        let widths: Vec<f64> = (0..depth).map(|j| a0 / ((j + 1) * (j + 1)) as f64).collect();

        // Fourier series of the density periodised with period 2, so the
        // support [0, 1] never wraps onto itself. Sample spacing 1/resolution.
        let n = 2 * resolution;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|m| {
                let freq = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 } / 2.0;
                let mag: f64 = widths.iter().map(|a| sinc(std::f64::consts::PI * a * freq)).product();
                e(-freq / 2.0) * (mag / 2.0)
            })
            .collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let density: Vec<f64> = buf[..=resolution].iter().map(|c| c.re.max(0.0)).collect();
        let peak = density.iter().cloned().fold(0.0, f64::max);
        let grid = density.iter().map(|d| (d / peak).clamp(0.0, 1.0)).collect();
        Ok(SmoothWeight { grid, depth, resolution, widths, peak })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Linear interpolation on the grid; zero off `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let s = x * self.resolution as f64;
        let i = (s.floor() as usize).min(self.resolution - 1);
        let t = s - i as f64;
        self.grid[i] * (1.0 - t) + self.grid[i + 1] * t
    }

    /// Transform of the exact (unsampled) convolution, rescaled like the grid.
    pub fn fourier(&self, t: f64) -> Complex64 {
        let mag: f64 = self.widths.iter().map(|a| sinc(std::f64::consts::PI * a * t)).product();
        e(-t / 2.0) * (mag / self.peak)
    }

    /// Integral of the interpolated grid over `[0, 1]`.
    pub fn mass(&self) -> f64 {
        let h = 1.0 / self.resolution as f64;
        let inner: f64 = self.grid[1..self.resolution].iter().sum();
        h * (inner + 0.5 * (self.grid[0] + self.grid[self.resolution]))
    }

    /// Frequency past which the truncated product decays only polynomially
    /// and no longer tracks `exp(-sqrt(t/2))`: the first `t` beyond
    /// `K^2 / (pi a_0)` where `prod (pi a_j t)^(-1)` exceeds the envelope.
    pub fn decay_range(&self) -> f64 {
        let a0 = self.widths[0];
        let k = self.depth as f64;
        let start = k * k / (std::f64::consts::PI * a0);
        let log_tail = |t: f64| -> f64 { -self.widths.iter().map(|a| (std::f64::consts::PI * a * t).ln()).sum::<f64>() };
        let above = |t: f64| log_tail(t) > -(t / 2.0).sqrt();
        let mut hi = start;
        while !above(hi) {
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        let mut lo = hi / 2.0;
        if lo < start {
            return start;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if above(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    pub fn invariants_hold(&self) -> bool {
        let r = self.resolution;
        let mid = self.grid[r / 2];
        self.grid.iter().all(|v| (0.0..=1.0).contains(v))
            && (r / 4..=3 * r / 4).all(|i| self.grid[i] >= 0.5)
            && (mid - 1.0).abs() < 1e-12
            && self.eval(-1e-9) == 0.0
            && self.eval(1.0 + 1e-9) == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightAudit {
    pub depth: usize,
    pub t_max: f64,
    pub points: usize,
    /// `w^(0)`, the mass.
    pub mass: f64,
    /// Smallest `C` with `|w^(t)| <= C exp(-sqrt(t/2))` at every grid point.
    pub fitted_c: f64,
    /// The same fit restricted to `[0, t_max / 8]`.
    pub fitted_c_head: f64,
    /// Grid points beyond the head that exceed the head envelope.
    pub violations: usize,
    /// Largest gap between the sampled and the analytic transform.
    pub analytic_deviation: f64,
    pub decay_range: f64,
    pub max_ratio_to_mass: f64,
}

/// Transform of the sampled weight on `[0, t_max]` at spacing `1/8`, via
/// a zero-padded FFT, fitted against `C exp(-sqrt(t/2))`.
pub fn weight_fourier_audit(w: &SmoothWeight, t_max: f64) -> Result<WeightAudit> {
    const PAD: usize = 8;
    let range = w.decay_range();
    if !(t_max > 0.0) || t_max > range {
        return Err(Error::Hypothesis(format!("t_max = {t_max} outside the decay range (0, {range:.1}]")));
    }
    let m = w.resolution;
    if t_max > m as f64 / 4.0 {
        return Err(Error::InvalidInput(format!("resolution {m} too coarse for t_max = {t_max}")));
    }
    let len = PAD * m;
    let h = 1.0 / m as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (i, &v) in w.grid[..m].iter().enumerate() {
        buf[i] = Complex64::new(v * h, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let kmax = (t_max * PAD as f64).floor() as usize;
    let head = kmax / 8;
    let env = |t: f64| (-(t / 2.0).sqrt()).exp();
    let mass = buf[0].re;
    let (mut c, mut c_head, mut dev, mut ratio) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (k, v) in buf.iter().enumerate().take(kmax + 1) {
        let t = k as f64 / PAD as f64;
        let r = v.norm() / env(t);
        c = c.max(r);
        if k <= head {
            c_head = c_head.max(r);
        }
        dev = dev.max((v - w.fourier(t)).norm());
        ratio = ratio.max(v.norm() / mass);
    }
    let violations = (head + 1..=kmax)
        .filter(|&k| buf[k].norm() > c_head * env(k as f64 / PAD as f64) * (1.0 + 1e-12))
        .count();
    Ok(WeightAudit {
        depth: w.depth,
        t_max,
        points: kmax + 1,
        mass,
        fitted_c: c,
        fitted_c_head: c_head,
        violations,
        analytic_deviation: dev,
        decay_range: range,
        max_ratio_to_mass: ratio,
    })
}
