//! Closed-form transport of isotropic Gaussian packets through linear
//! (metaplectic) dynamics.
//!
//! A map `[[a, b], [c, d]]` acts per axis on `(x, p)`. The packet
//! `exp(i[w (x - x̄)²/2 + p̄·(x - x̄) + γ])` goes to the packet with
//! `w' = (c + d w)/(a + b w)`, transported center and momentum, and
//! `γ' = γ + (p̄'·x̄' - p̄·x̄)/2 + i (n/2) log(a + b w)`.
//! The principal logarithm is the correct branch as long as `b` keeps one
//! sign along the path that generated the map, so long evolutions are fed
//! in pieces.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, WaveFunction};
use crate::model::{split_at_boundaries, DecayParams};

/// Below this `|a + b w|` the update is refused and the caller must split.
pub const CAUSTIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SymplecticMap {
    pub const IDENTITY: SymplecticMap = SymplecticMap {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        SymplecticMap { a, b, c, d }
    }

    /// `e^{-iτp²/2}`.
    pub fn free(tau: f64) -> Self {
        SymplecticMap::new(1.0, tau, 0.0, 1.0)
    }

    /// Multiplication by `e^{i c x²/2}`.
    pub fn kick(c: f64) -> Self {
        SymplecticMap::new(1.0, 0.0, c, 1.0)
    }

    /// `ψ(x) -> s^{-n/2} ψ(x/s)`.
    pub fn scale(s: f64) -> Self {
        SymplecticMap::new(s, 0.0, 0.0, 1.0 / s)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &SymplecticMap) -> SymplecticMap {
        SymplecticMap {
            a: self.a * first.a + self.b * first.c,
            b: self.a * first.b + self.b * first.d,
            c: self.c * first.a + self.d * first.c,
            d: self.c * first.b + self.d * first.d,
        }
    }

    pub fn inverse(&self) -> SymplecticMap {
        let det = self.det();
        SymplecticMap::new(self.d / det, -self.b / det, -self.c / det, self.a / det)
    }

    pub fn apply(&self, x: f64, p: f64) -> (f64, f64) {
        (self.a * x + self.b * p, self.c * x + self.d * p)
    }

    pub fn max_abs_diff(&self, other: &SymplecticMap) -> f64 {
        [
            self.a - other.a,
            self.b - other.b,
            self.c - other.c,
            self.d - other.d,
        ]
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Classical flow of `p²/2 + ω²x²/2` over `dt`.
pub fn flow_harmonic(dt: f64, omega: f64) -> SymplecticMap {
    let (s, c) = (omega * dt).sin_cos();
    SymplecticMap::new(c, s / omega, -omega * s, c)
}

/// Fundamental matrix `[[f1, f2], [f1', f2']]` built from `|t|^{1-λ}` and `|t|^λ`.
fn decay_fundamental(t: f64, lambda: f64) -> [[f64; 2]; 2] {
    let at = t.abs();
    let sg = t.signum();
    let f1 = at.powf(1.0 - lambda);
    let f2 = at.powf(lambda);
    [[f1, f2], [sg * (1.0 - lambda) * f1 / at, sg * lambda * f2 / at]]
}

/// Exact flow of `ẍ = -(σ/t²) x` from `t0` to `t1`, both in the same outer region.
pub fn flow_decay(t0: f64, t1: f64, params: &DecayParams) -> Result<SymplecticMap> {
    let r0 = params.r0();
    let same_side = (t0 >= r0 && t1 >= r0) || (t0 <= -r0 && t1 <= -r0);
    if !same_side {
        return Err(Error::Domain(format!(
            "decay flow needs t0 = {t0} and t1 = {t1} on one side outside ±{r0}"
        )));
    }
    if t0 == t1 {
        return Ok(SymplecticMap::IDENTITY);
    }
    let lambda = params.lambda();
    let f0 = decay_fundamental(t0, lambda);
    let f1 = decay_fundamental(t1, lambda);
    // Wronskian of the pair, constant in t
    let w = f0[0][0] * f0[1][1] - f0[0][1] * f0[1][0];
    let inv0 = [[f0[1][1] / w, -f0[0][1] / w], [-f0[1][0] / w, f0[0][0] / w]];
    let m = |i: usize, j: usize| f1[i][0] * inv0[0][j] + f1[i][1] * inv0[1][j];
    Ok(SymplecticMap::new(m(0, 0), m(0, 1), m(1, 0), m(1, 1)))
}

/// Classical flow of `H0(t)` from `t0` to `t1`, split at `±r0`.
pub fn flow_h0(t0: f64, t1: f64, params: &DecayParams) -> SymplecticMap {
    let mut total = SymplecticMap::IDENTITY;
    for (s, t) in split_at_boundaries(t0, t1, params.r0()) {
        let mid = 0.5 * (s + t);
        let piece = if mid.abs() < params.r0() {
            flow_harmonic(t - s, params.omega())
        } else {
            flow_decay(s, t, params).expect("pieces are split at the boundaries")
        };
        total = piece.compose(&total);
    }
    total
}

/// `exp(i[w (x - x̄)²/2 + p̄·(x - x̄) + γ])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub center: Vec<f64>,
    pub momentum: Vec<f64>,
    pub width: Complex64,
    pub gamma: Complex64,
}

impl GaussianState {
    /// Normalized `(πw²)^{-n/4} e^{-|x-y|²/(2w²)} e^{i v·x}`.
    pub fn probe(center: Vec<f64>, velocity: Vec<f64>, w: f64) -> Result<Self> {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Parameter(format!("probe width {w} must be positive")));
        }
        if center.len() != velocity.len() || center.is_empty() {
            return Err(Error::Parameter("probe center and velocity need one common dimension".into()));
        }
        let n = center.len() as f64;
        let phase: f64 = center.iter().zip(&velocity).map(|(y, v)| y * v).sum();
        Ok(GaussianState {
            center,
            momentum: velocity,
            width: Complex64::new(0.0, 1.0 / (w * w)),
            gamma: Complex64::new(phase, 0.25 * n * (PI * w * w).ln()),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> Complex64 {
        let mut r2 = 0.0;
        let mut lin = 0.0;
        for ((xi, c), p) in x.iter().zip(&self.center).zip(&self.momentum) {
            let d = xi - c;
            r2 += d * d;
            lin += p * d;
        }
        let i = Complex64::i();
        (i * (self.width * r2 * 0.5 + lin + self.gamma)).exp()
    }

    pub fn norm_sqr(&self) -> f64 {
        let n = self.dim() as f64;
        (PI / self.width.im).powf(0.5 * n) * (-2.0 * self.gamma.im).exp()
    }

    /// Shifts `γ` so the norm is one.
    pub fn normalized(mut self) -> Self {
        let n = self.dim() as f64;
        self.gamma.im = 0.25 * n * (PI / self.width.im).ln();
        self
    }

    /// Standard deviation of `|ψ|²` along one axis.
    pub fn position_std(&self) -> f64 {
        (0.5 / self.width.im).sqrt()
    }

    /// Standard deviation of the momentum density along one axis.
    pub fn momentum_std(&self) -> f64 {
        self.width.norm() / (2.0 * self.width.im).sqrt()
    }

    /// `ψ(x - a)`.
    pub fn translated(mut self, a: &[f64]) -> Self {
        for (c, s) in self.center.iter_mut().zip(a) {
            *c += s;
        }
        self
    }

    /// `e^{i v·x} ψ`.
    pub fn boosted(mut self, v: &[f64]) -> Self {
        let dot: f64 = v.iter().zip(&self.center).map(|(a, b)| a * b).sum();
        for (p, s) in self.momentum.iter_mut().zip(v) {
            *p += s;
        }
        self.gamma += dot;
        self
    }

    /// Multiplies by a constant `e^{iφ}` (φ may be complex).
    pub fn with_phase(mut self, phi: Complex64) -> Self {
        self.gamma += phi;
        self
    }

    /// `(self, other)` in closed form, linear in `other`.
    pub fn overlap(&self, other: &GaussianState) -> Complex64 {
        let i = Complex64::i();
        let n = self.dim() as f64;
        let a1c = self.width.conj();
        let a2 = other.width;
        let big_a = -i * (a2 - a1c);
        let mut bb = Complex64::new(0.0, 0.0);
        let mut r1 = 0.0;
        let mut r2 = 0.0;
        let mut px1 = 0.0;
        let mut px2 = 0.0;
        for k in 0..self.dim() {
            let (x1, p1) = (self.center[k], self.momentum[k]);
            let (x2, p2) = (other.center[k], other.momentum[k]);
            let b = i * (p2 - a2 * x2) - i * (p1 - a1c * x1);
            bb += b * b;
            r1 += x1 * x1;
            r2 += x2 * x2;
            px1 += p1 * x1;
            px2 += p2 * x2;
        }
        let c = i * (a2 * r2 * 0.5 - px2 + other.gamma) - i * (a1c * r1 * 0.5 - px1 + self.gamma.conj());
        (Complex64::new(2.0 * PI, 0.0) / big_a).powf(0.5 * n) * (bb / (2.0 * big_a) + c).exp()
    }

    /// Writes `ψ(x)` at every node after checking that six standard widths
    /// fit inside the box and the momentum content sits below Nyquist.
    pub fn sample_to_grid(&self, grid: &GridSpec) -> Result<WaveFunction> {
        if grid.dim() != self.dim() {
            return Err(Error::Usage(format!(
                "packet dimension {} does not match grid dimension {}",
                self.dim(),
                grid.dim()
            )));
        }
        let sx = self.position_std();
        let reach = self.center.iter().fold(0.0f64, |m, c| m.max(c.abs())) + 6.0 * sx;
        if reach > grid.half_width() {
            return Err(Error::overflow("packet does not fit the grid", reach, grid.points()));
        }
        let sp = self.momentum_std();
        let preach = self.momentum.iter().fold(0.0f64, |m, p| m.max(p.abs())) + 6.0 * sp;
        if preach > grid.p_max() {
            let need = (preach / grid.p_max() * grid.points() as f64).ceil() as usize;
            return Err(Error::overflow(
                "packet momentum exceeds the grid Nyquist limit",
                grid.half_width(),
                need.next_power_of_two(),
            ));
        }
        Ok(WaveFunction::from_fn(*grid, |x| self.evaluate(x)))
    }
}

/// Exact metaplectic action of `map` on `g` with the principal branch.
pub fn gaussian_apply(map: &SymplecticMap, g: &GaussianState) -> Result<GaussianState> {
    let denom = map.a + map.b * g.width;
    if denom.norm() < CAUSTIC_TOL {
        return Err(Error::Caustic(denom.norm()));
    }
    let width = (map.c + map.d * g.width) / denom;
    let mut center = Vec::with_capacity(g.dim());
    let mut momentum = Vec::with_capacity(g.dim());
    let mut action = 0.0;
    for (x, p) in g.center.iter().zip(&g.momentum) {
        let (x1, p1) = map.apply(*x, *p);
        action += 0.5 * (p1 * x1 - p * x);
        center.push(x1);
        momentum.push(p1);
    }
    let n = g.dim() as f64;
    let gamma = g.gamma + action + Complex64::i() * 0.5 * n * denom.ln();
    Ok(GaussianState {
        center,
        momentum,
        width,
        gamma,
    })
}

/// Transports `g` along the classical path of `H0` from `t0` to `t1`,
/// cutting the path into pieces on which the branch rule is valid.
pub fn gaussian_evolve_h0(g: &GaussianState, t0: f64, t1: f64, params: &DecayParams) -> Result<GaussianState> {
    let mut out = g.clone();
    let max_phase = 0.5 * PI;
    for (s, t) in split_at_boundaries(t0, t1, params.r0()) {
        let mid = 0.5 * (s + t);
        if mid.abs() < params.r0() {
            let pieces = ((params.omega() * (t - s)).abs() / max_phase).ceil().max(1.0) as usize;
            let h = (t - s) / pieces as f64;
            let step = flow_harmonic(h, params.omega());
            for _ in 0..pieces {
                out = gaussian_apply(&step, &out)?;
            }
        } else {
            out = gaussian_apply(&flow_decay(s, t, params)?, &out)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{integrate_newton, ClassicalState};

    fn close(a: &SymplecticMap, b: &SymplecticMap, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn harmonic_examples() {
        let q = flow_harmonic(PI / 2.0, 1.0);
        assert!(close(&q, &SymplecticMap::new(0.0, 1.0, -1.0, 0.0), 1e-15));
        assert_eq!(flow_harmonic(0.0, 2.0), SymplecticMap::IDENTITY);
        let ab = flow_harmonic(0.3, 1.7).compose(&flow_harmonic(1.1, 1.7));
        assert!(close(&ab, &flow_harmonic(1.4, 1.7), 1e-12));
    }

    #[test]
    fn decay_examples() {
        let p = DecayParams::default();
        assert!(close(&flow_decay(2.0, 2.0, &p).unwrap(), &SymplecticMap::IDENTITY, 0.0));
        // x = t^{3/4}: x(1) = 1, ẋ(1) = 3/4
        let m = flow_decay(1.0, 16.0, &p).unwrap();
        assert!((m.apply(1.0, 0.75).0 - 8.0).abs() < 1e-12);
        assert!((m.det() - 1.0).abs() < 1e-12);
        let neg = flow_decay(-16.0, -1.0, &p).unwrap();
        assert!((neg.det() - 1.0).abs() < 1e-12);
        assert!(flow_decay(0.5, 2.0, &p).is_err());
        assert!(flow_decay(-2.0, 2.0, &p).is_err());
    }

    #[test]
    fn decay_matches_newton() {
        let p = DecayParams::default();
        for (t0, t1) in [(1.0, 3.0), (2.5, 1.2), (-4.0, -1.0), (-1.0, -7.5)] {
            let m = flow_decay(t0, t1, &p).unwrap();
            let (x, v) = m.apply(0.3, -1.1);
            let s = integrate_newton(&ClassicalState::new(vec![0.3], vec![-1.1], t0), t1, 1e-3, &p);
            assert!((x - s.x[0]).abs() < 1e-8 && (v - s.v[0]).abs() < 1e-8, "{t0} -> {t1}");
        }
    }

    #[test]
    fn flow_h0_crosses_regions() {
        let p = DecayParams::default();
        let m = flow_h0(-3.0, 2.5, &p);
        let (x, v) = m.apply(0.4, 0.9);
        let s = integrate_newton(&ClassicalState::new(vec![0.4], vec![0.9], -3.0), 2.5, 1e-3, &p);
        assert!((x - s.x[0]).abs() < 1e-8 && (v - s.v[0]).abs() < 1e-8);
        assert!((m.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probe_is_normalized_and_overlap_is_consistent() {
        let g = GaussianState::probe(vec![0.3, -0.2], vec![1.5, 0.0], 0.8).unwrap();
        assert!((g.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((g.overlap(&g).re - 1.0).abs() < 1e-12);
        assert!(g.overlap(&g).im.abs() < 1e-12);
        assert!(GaussianState::probe(vec![0.0], vec![0.0], 0.0).is_err());
    }

    #[test]
    fn identity_and_caustic() {
        let g = GaussianState::probe(vec![1.0], vec![2.0], 1.0).unwrap();
        let same = gaussian_apply(&SymplecticMap::IDENTITY, &g).unwrap();
        assert!((same.overlap(&g) - 1.0).norm() < 1e-14);
        // quarter rotation of a coherent state with width 1/ω: a + b w = i ≠ 0,
        // but a squeezed packet can be sent to a caustic by a tailored map
        let squeeze = SymplecticMap::new(1.0, 1.0, -1.0, 0.0);
        let h = GaussianState {
            width: Complex64::new(-1.0, 1e-10),
            ..g
        };
        assert!(matches!(gaussian_apply(&squeeze, &h), Err(Error::Caustic(_))));
    }

    #[test]
    fn ground_state_phase() {
        let g = GaussianState::probe(vec![0.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let h = gaussian_apply(&flow_harmonic(0.3, 1.0), &g).unwrap();
        let expected = Complex64::cis(-0.3);
        assert!((g.overlap(&h) - expected).norm() < 1e-14);
    }

    #[test]
    fn sampling_checks_support() {
        let grid = GridSpec::new(2, 64, 6.0).unwrap();
        let g = GaussianState::probe(vec![0.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let psi = g.sample_to_grid(&grid).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-9);
        let far = g.clone().translated(&[2.0, 0.0]);
        match far.sample_to_grid(&grid) {
            Err(Error::Overflow { required_half_width, .. }) => assert!(required_half_width > 6.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sampled_overlap_matches_closed_form() {
        let grid = GridSpec::new(2, 128, 10.0).unwrap();
        let g1 = GaussianState::probe(vec![0.5, 0.0], vec![1.0, -0.5], 1.0).unwrap();
        let g2 = gaussian_apply(&SymplecticMap::free(0.7), &GaussianState::probe(vec![-0.3, 0.4], vec![0.2, 0.3], 0.9).unwrap())
            .unwrap();
        let num = g1.sample_to_grid(&grid).unwrap().inner_product(&g2.sample_to_grid(&grid).unwrap()).unwrap();
        assert!((num - g1.overlap(&g2)).norm() < 1e-8);
    }

    #[test]
    fn boost_and_translate_match_grid() {
        let grid = GridSpec::new(1, 128, 10.0).unwrap();
        let g = GaussianState::probe(vec![0.5], vec![1.0], 1.0).unwrap();
        let mut psi = g.sample_to_grid(&grid).unwrap();
        psi.apply_linear_phase(&[0.7]).unwrap();
        psi.apply_translate(&[-1.2]).unwrap();
        let h = g.boosted(&[0.7]).translated(&[-1.2]);
        assert!(psi.relative_distance(&h.sample_to_grid(&grid).unwrap()).unwrap() < 1e-10);
    }
}
