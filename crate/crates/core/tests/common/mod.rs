//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the propagator code under test: the split-step
//! integrator has its own FFT handling and sign conventions derived from
//! the Schrödinger equation directly.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

/// 1D or 2D periodic box matching `[-L, L)` with `n` points per axis.
#[derive(Clone, Copy, Debug)]
pub struct Box {
    pub dim: usize,
    pub n: usize,
    pub l: f64,
}

impl Box {
    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.dx()
    }

    /// Angular wavenumber of DFT bin `k`.
    pub fn k(&self, k: usize) -> f64 {
        let n = self.n as i64;
        let s = if (k as i64) < n / 2 { k as i64 } else { k as i64 - n };
        2.0 * PI * s as f64 / (2.0 * self.l)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.x(flat)],
            2 => vec![self.x(flat / self.n), self.x(flat % self.n)],
            _ => unimplemented!("oracle supports n = 1, 2"),
        }
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> Complex64) -> Vec<Complex64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }
}

fn fft2(data: &mut [Complex64], b: &Box, forward: bool) {
    let mut planner = FftPlanner::new();
    let fft = if forward {
        planner.plan_fft_forward(b.n)
    } else {
        planner.plan_fft_inverse(b.n)
    };
    let n = b.n;
    if b.dim == 1 {
        fft.process(data);
    } else {
        fft.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            fft.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }
    if !forward {
        let s = 1.0 / b.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

fn kinetic(psi: &mut [Complex64], b: &Box, h: f64) {
    fft2(psi, b, true);
    for (idx, v) in psi.iter_mut().enumerate() {
        let k2: f64 = if b.dim == 1 {
            b.k(idx).powi(2)
        } else {
            b.k(idx / b.n).powi(2) + b.k(idx % b.n).powi(2)
        };
        *v *= Complex64::cis(-0.5 * h * k2);
    }
    fft2(psi, b, false);
}

fn potential(psi: &mut [Complex64], b: &Box, h: f64, w: &dyn Fn(&[f64]) -> f64) {
    for (idx, v) in psi.iter_mut().enumerate() {
        *v *= Complex64::cis(-h * w(&b.point(idx)));
    }
}

/// Fourth-order (Yoshida) split-step integration of
/// `i ∂ψ = [-Δ/2 + k(t)|x|²/2 + V(x)] ψ` from `t0` to `t1`.
/// Steps are aligned to `breaks` so a discontinuous `k` is never straddled.
#[allow(clippy::too_many_arguments)]
pub fn split_step(
    psi: &[Complex64],
    b: &Box,
    t0: f64,
    t1: f64,
    dt: f64,
    breaks: &[f64],
    k: &dyn Fn(f64) -> f64,
    v: &dyn Fn(&[f64]) -> f64,
) -> Vec<Complex64> {
    let mut out = psi.to_vec();
    let cbrt2 = 2f64.powf(1.0 / 3.0);
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 / (2.0 - cbrt2);
    let mut cuts = vec![t0];
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&c| c > lo && c < hi).collect();
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if t1 < t0 {
        inner.reverse();
    }
    cuts.extend(inner);
    cuts.push(t1);
    for seg in cuts.windows(2) {
        let (a, bnd) = (seg[0], seg[1]);
        let steps = ((bnd - a).abs() / dt).ceil().max(1.0) as usize;
        let h = (bnd - a) / steps as f64;
        for s in 0..steps {
            let mut t = a + s as f64 * h;
            for w in [w1, w0, w1] {
                let hh = w * h;
                let tm = t + 0.5 * hh;
                // clamp the evaluation time inside the segment so k picks the right branch
                let tm = tm.clamp(a.min(bnd) + 1e-14, a.max(bnd) - 1e-14);
                let kk = k(tm);
                let pot = |x: &[f64]| 0.5 * kk * x.iter().map(|c| c * c).sum::<f64>() + v(x);
                potential(&mut out, b, 0.5 * hh, &pot);
                kinetic(&mut out, b, hh);
                potential(&mut out, b, 0.5 * hh, &pot);
                t += hh;
            }
        }
    }
    out
}

pub fn l2_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// `k(t)` written out from its definition.
pub fn k_of(omega: f64, sigma: f64, r0: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| if t.abs() < r0 { omega * omega } else { sigma / (t * t) }
}

/// A smooth random packet: a few Gaussians with random centers, momenta and phases.
pub fn random_packet(b: &Box, seed: u64, spread: f64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(Vec<f64>, Vec<f64>, f64, Complex64)> = (0..3)
        .map(|_| {
            let c: Vec<f64> = (0..b.dim).map(|_| rng.gen_range(-spread..spread)).collect();
            let p: Vec<f64> = (0..b.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w = rng.gen_range(0.7..1.2);
            let amp = Complex64::from_polar(rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI));
            (c, p, w, amp)
        })
        .collect();
    let mut out = b.sample(|x| {
        terms
            .iter()
            .map(|(c, p, w, amp)| {
                let mut r2 = 0.0;
                let mut ph = 0.0;
                for a in 0..x.len() {
                    r2 += (x[a] - c[a]).powi(2);
                    ph += p[a] * x[a];
                }
                amp * Complex64::from_polar((-r2 / (2.0 * w * w)).exp(), ph)
            })
            .sum()
    });
    let norm: f64 = (out.iter().map(|v| v.norm_sqr()).sum::<f64>() * b.dx().powi(b.dim as i32)).sqrt();
    for v in &mut out {
        *v /= norm;
    }
    out
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Line integral of `exp(-|x - c|²/w²)` along `{y + s v̂}`: `√π w exp(-d²/w²)`
/// with `d` the distance from `c` to the line.
pub fn gaussian_xray(amplitude: f64, center: [f64; 2], width: f64, y: [f64; 2], dir: [f64; 2]) -> f64 {
    let rel = [center[0] - y[0], center[1] - y[1]];
    let along = rel[0] * dir[0] + rel[1] * dir[1];
    let d2 = rel[0] * rel[0] + rel[1] * rel[1] - along * along;
    amplitude * PI.sqrt() * width * (-d2 / (width * width)).exp()
}
