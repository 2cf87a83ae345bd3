//! Model constants, the potential library, admissibility checks, and the
//! classical mechanics of the time-decaying oscillator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ceiling applied to singular components when no grid scale is available.
pub const SINGULAR_CEILING: f64 = 1e12;

/// `λ = (1 - sqrt(1 - 4σ)) / 2`.
pub fn lambda_from_sigma(sigma: f64) -> Result<f64> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Parameter(format!("sigma = {sigma} violates sigma >= 0")));
    }
    if sigma >= 0.25 {
        return Err(Error::Parameter(format!("sigma = {sigma} violates sigma < 1/4")));
    }
    Ok((1.0 - (1.0 - 4.0 * sigma).sqrt()) / 2.0)
}

/// Constants of the free Hamiltonian: `k(t) = ω²` for `|t| < r0`, `σ/t²` beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDecayParams", into = "RawDecayParams")]
pub struct DecayParams {
    omega: f64,
    sigma: f64,
    r0: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecayParams {
    omega: f64,
    sigma: f64,
    r0: f64,
}

impl TryFrom<RawDecayParams> for DecayParams {
    type Error = Error;

    fn try_from(raw: RawDecayParams) -> Result<Self> {
        DecayParams::new(raw.omega, raw.sigma, raw.r0)
    }
}

impl From<DecayParams> for RawDecayParams {
    fn from(p: DecayParams) -> Self {
        RawDecayParams {
            omega: p.omega,
            sigma: p.sigma,
            r0: p.r0,
        }
    }
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            omega: 1.0,
            sigma: 3.0 / 16.0,
            r0: 1.0,
        }
    }
}

impl DecayParams {
    pub fn new(omega: f64, sigma: f64, r0: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Parameter(format!("omega = {omega} violates omega > 0")));
        }
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::Parameter(format!("r0 = {r0} violates r0 > 0")));
        }
        lambda_from_sigma(sigma)?;
        Ok(DecayParams { omega, sigma, r0 })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn lambda(&self) -> f64 {
        (1.0 - (1.0 - 4.0 * self.sigma).sqrt()) / 2.0
    }

    /// `σ = 0` has free flight outside the harmonic region; it is a
    /// regression mode, not part of the admissible model.
    pub fn is_diagnostic(&self) -> bool {
        self.sigma == 0.0
    }

    pub fn in_harmonic_region(&self, t: f64) -> bool {
        t.abs() < self.r0
    }
}

/// `k(t)`, including `|t| = r0` in the decaying branch.
pub fn k_coeff(t: f64, params: &DecayParams) -> f64 {
    if t.abs() < params.r0 {
        params.omega * params.omega
    } else {
        params.sigma / (t * t)
    }
}

/// `c1 t^(1-λ) + c2 t^λ` for `t >= r0`.
pub fn classical_trajectory(t: f64, c1: f64, c2: f64, params: &DecayParams) -> Result<f64> {
    if t < params.r0 {
        return Err(Error::Domain(format!("t = {t} is below r0 = {}", params.r0)));
    }
    let lambda = params.lambda();
    Ok(c1 * t.powf(1.0 - lambda) + c2 * t.powf(lambda))
}

/// Time derivative of [`classical_trajectory`].
pub fn classical_velocity(t: f64, c1: f64, c2: f64, params: &DecayParams) -> Result<f64> {
    if t < params.r0 {
        return Err(Error::Domain(format!("t = {t} is below r0 = {}", params.r0)));
    }
    let lambda = params.lambda();
    Ok((1.0 - lambda) * c1 * t.powf(-lambda) + lambda * c2 * t.powf(lambda - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl ClassicalState {
    pub fn new(x: Vec<f64>, v: Vec<f64>, t: f64) -> Self {
        assert_eq!(x.len(), v.len(), "position and velocity dimensions differ");
        ClassicalState { x, v, t }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().chain(&self.v).all(|c| c.is_finite())
    }
}

/// Classical RK4 integration of `x'' = -k(t) x` from `state0.t` to `t1`.
///
/// Steps never straddle `±r0`, where `k` jumps; each segment uses the
/// smallest number of equal steps not exceeding `dt`.
pub fn integrate_newton(state0: &ClassicalState, t1: f64, dt: f64, params: &DecayParams) -> ClassicalState {
    assert!(dt > 0.0, "dt must be positive");
    let mut x = state0.x.clone();
    let mut v = state0.v.clone();
    let t0 = state0.t;
    for (a, b) in split_at_boundaries(t0, t1, params.r0) {
        let steps = ((b - a).abs() / dt).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        // k is evaluated strictly inside the segment so the branch is unambiguous
        let k_at = |t: f64| {
            let eps = 1e-12 * (b - a).abs().max(1e-300);
            let tc = t.clamp(a.min(b) + eps, a.max(b) - eps);
            k_coeff(tc, params)
        };
        for s in 0..steps {
            let t = a + s as f64 * h;
            let k1 = k_at(t);
            let k2 = k_at(t + 0.5 * h);
            let k4 = k_at(t + h);
            for i in 0..x.len() {
                let (x0, v0) = (x[i], v[i]);
                let dx1 = v0;
                let dv1 = -k1 * x0;
                let dx2 = v0 + 0.5 * h * dv1;
                let dv2 = -k2 * (x0 + 0.5 * h * dx1);
                let dx3 = v0 + 0.5 * h * dv2;
                let dv3 = -k2 * (x0 + 0.5 * h * dx2);
                let dx4 = v0 + h * dv3;
                let dv4 = -k4 * (x0 + h * dx3);
                x[i] = x0 + h / 6.0 * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4);
                v[i] = v0 + h / 6.0 * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4);
            }
        }
    }
    ClassicalState { x, v, t: t1 }
}

/// Splits `[t0, t1]` (either orientation) at `±r0`.
pub(crate) fn split_at_boundaries(t0: f64, t1: f64, r0: f64) -> Vec<(f64, f64)> {
    if t0 == t1 {
        return Vec::new();
    }
    let mut cuts = vec![t0];
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    let mut inner: Vec<f64> = [-r0, r0].into_iter().filter(|&c| c > lo && c < hi).collect();
    if t1 < t0 {
        inner.reverse();
    }
    cuts.extend(inner);
    cuts.push(t1);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// One additive piece of the potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialComponent {
    /// `a exp(-|x-c|²/w²)`.
    GaussianBump { amplitude: f64, center: Vec<f64>, width: f64 },
    /// `a exp(1 - 1/(1 - |x-c|²/R²))` inside the ball, zero outside.
    SmoothCompactBump { amplitude: f64, center: Vec<f64>, radius: f64 },
    /// `a <x>^(-ρ)`.
    PowerTail { amplitude: f64, rho: f64 },
    /// `a |x-c|^(-α)` on `0 < |x-c| < R`, zero outside.
    TruncatedSingular {
        amplitude: f64,
        center: Vec<f64>,
        alpha: f64,
        radius: f64,
        q: f64,
    },
}

impl PotentialComponent {
    pub fn is_singular(&self) -> bool {
        matches!(self, PotentialComponent::TruncatedSingular { .. })
    }

    pub fn center(&self) -> Option<&[f64]> {
        match self {
            PotentialComponent::GaussianBump { center, .. }
            | PotentialComponent::SmoothCompactBump { center, .. }
            | PotentialComponent::TruncatedSingular { center, .. } => Some(center),
            PotentialComponent::PowerTail { .. } => None,
        }
    }

    /// Support radius for compactly supported pieces.
    pub fn compact_radius(&self) -> Option<f64> {
        match self {
            PotentialComponent::SmoothCompactBump { radius, .. }
            | PotentialComponent::TruncatedSingular { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Value with singular magnitudes limited to `clamp`.
    pub fn value_clamped(&self, x: &[f64], clamp: f64) -> f64 {
        match self {
            PotentialComponent::GaussianBump { amplitude, center, width } => {
                amplitude * (-dist_sqr(x, center) / (width * width)).exp()
            }
            PotentialComponent::SmoothCompactBump { amplitude, center, radius } => {
                let u = dist_sqr(x, center) / (radius * radius);
                if u >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - u)).exp()
                }
            }
            PotentialComponent::PowerTail { amplitude, rho } => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                amplitude * (1.0 + r2).powf(-rho / 2.0)
            }
            PotentialComponent::TruncatedSingular { amplitude, center, alpha, radius, .. } => {
                let r = dist_sqr(x, center).sqrt();
                if r >= *radius {
                    return 0.0;
                }
                let magnitude = if r == 0.0 {
                    clamp
                } else {
                    (amplitude.abs() * r.powf(-alpha)).min(clamp)
                };
                magnitude.copysign(*amplitude)
            }
        }
    }
}

fn dist_sqr(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `V = V_bdd + V_sing` as a sum of components.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub components: Vec<PotentialComponent>,
}

impl PotentialSpec {
    pub fn new(components: Vec<PotentialComponent>) -> Self {
        PotentialSpec { components }
    }

    pub fn zero() -> Self {
        PotentialSpec::default()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| match c {
            PotentialComponent::GaussianBump { amplitude, .. }
            | PotentialComponent::SmoothCompactBump { amplitude, .. }
            | PotentialComponent::PowerTail { amplitude, .. }
            | PotentialComponent::TruncatedSingular { amplitude, .. } => *amplitude == 0.0,
        })
    }

    /// Sum of the components; a singular point evaluates to [`SINGULAR_CEILING`].
    pub fn value(&self, x: &[f64]) -> f64 {
        self.value_clamped(x, SINGULAR_CEILING)
    }

    pub fn value_clamped(&self, x: &[f64], clamp: f64) -> f64 {
        self.components.iter().map(|c| c.value_clamped(x, clamp)).sum()
    }

    /// Adds another potential; sums are the only composition supported.
    pub fn plus(&self, other: &PotentialSpec) -> PotentialSpec {
        let mut components = self.components.clone();
        components.extend(other.components.iter().cloned());
        PotentialSpec { components }
    }

    /// `α V`.
    pub fn scaled(&self, alpha: f64) -> PotentialSpec {
        let components = self
            .components
            .iter()
            .cloned()
            .map(|mut c| {
                match &mut c {
                    PotentialComponent::GaussianBump { amplitude, .. }
                    | PotentialComponent::SmoothCompactBump { amplitude, .. }
                    | PotentialComponent::PowerTail { amplitude, .. }
                    | PotentialComponent::TruncatedSingular { amplitude, .. } => *amplitude *= alpha,
                }
                c
            })
            .collect();
        PotentialSpec { components }
    }

    /// Rigid translation of every centered component.
    pub fn translated(&self, shift: &[f64]) -> Result<PotentialSpec> {
        let mut out = self.clone();
        for c in &mut out.components {
            match c {
                PotentialComponent::GaussianBump { center, .. }
                | PotentialComponent::SmoothCompactBump { center, .. }
                | PotentialComponent::TruncatedSingular { center, .. } => {
                    for (ci, s) in center.iter_mut().zip(shift) {
                        *ci += s;
                    }
                }
                PotentialComponent::PowerTail { .. } => {
                    return Err(Error::Usage("a power tail is anchored at the origin".into()))
                }
            }
        }
        Ok(out)
    }

    /// True when every component has compact support.
    pub fn is_compact(&self) -> bool {
        self.components.iter().all(|c| c.compact_radius().is_some())
    }
}

/// Outcome of one admissibility clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub clause: String,
    pub component: Option<usize>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub clauses: Vec<Clause>,
    /// Set when `σ = 0`; such runs are regression diagnostics.
    pub diagnostic_mode: bool,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.passed)
    }
}

pub const CLAUSE_SIGMA: &str = "0<σ<1/4";
pub const CLAUSE_DECAY: &str = "ρ>1/(1−λ)";
pub const CLAUSE_LQ: &str = "α·q<n";
pub const CLAUSE_Q_RULE: &str = "q=2 (n≤3), q>n/2 (n≥4)";
pub const CLAUSE_DIMENSION: &str = "center dimension = n";

/// Evaluates every clause of the short-range assumption for dimension `n`.
pub fn check_admissibility(spec: &PotentialSpec, params: &DecayParams, n: usize) -> AdmissibilityReport {
    let lambda = params.lambda();
    let threshold = 1.0 / (1.0 - lambda);
    let mut clauses = Vec::new();
    let diagnostic_mode = params.is_diagnostic();
    clauses.push(Clause {
        clause: CLAUSE_SIGMA.into(),
        component: None,
        passed: true,
        detail: if diagnostic_mode {
            "σ = 0: diagnostic free-flight mode, outside the model's range".into()
        } else {
            format!("σ = {}, λ = {lambda}", params.sigma())
        },
    });
    for (i, comp) in spec.components.iter().enumerate() {
        if let Some(center) = comp.center() {
            clauses.push(Clause {
                clause: CLAUSE_DIMENSION.into(),
                component: Some(i),
                passed: center.len() == n,
                detail: format!("center has {} coordinates, n = {n}", center.len()),
            });
        }
        match comp {
            PotentialComponent::PowerTail { rho, .. } => clauses.push(Clause {
                clause: CLAUSE_DECAY.into(),
                component: Some(i),
                passed: *rho > threshold,
                detail: if *rho > threshold {
                    format!("ρ = {rho} > {threshold}")
                } else {
                    format!("ρ = {rho} <= {threshold}: long-range")
                },
            }),
            PotentialComponent::GaussianBump { .. } | PotentialComponent::SmoothCompactBump { .. } => {
                clauses.push(Clause {
                    clause: CLAUSE_DECAY.into(),
                    component: Some(i),
                    passed: true,
                    detail: "decays faster than any power".into(),
                })
            }
            PotentialComponent::TruncatedSingular { alpha, q, radius, .. } => {
                let nf = n as f64;
                let lq = *alpha > 0.0 && *radius > 0.0 && q.is_finite() && alpha * q < nf;
                clauses.push(Clause {
                    clause: CLAUSE_LQ.into(),
                    component: Some(i),
                    passed: lq,
                    detail: format!("α·q = {} vs n = {n}", alpha * q),
                });
                let q_ok = q.is_finite() && if n <= 3 { *q == 2.0 } else { *q > nf / 2.0 };
                clauses.push(Clause {
                    clause: CLAUSE_Q_RULE.into(),
                    component: Some(i),
                    passed: q_ok,
                    detail: format!("q = {q}, n = {n}"),
                });
            }
        }
    }
    AdmissibilityReport { clauses, diagnostic_mode }
}
