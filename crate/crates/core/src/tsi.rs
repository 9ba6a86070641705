//! The tilted steering inequality `α⟨A₀⟩ + β⟨A₀Z⟩ + ⟨A₁X⟩` with its local and
//! quantum bounds.
//!
//! Correlators use the unit-norm Paulis `Z = |0⟩⟨0| - |1⟩⟨1|` and
//! `X = |0⟩⟨1| + |1⟩⟨0|`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{Matrix3, Vector3};

use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::qmath::{pauli_x, pauli_z, trace, ComplexMatrix};

/// Tolerance on `β² = α² + 1` for certifying parameters.
pub const CERTIFYING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsiParams {
    pub alpha: f64,
    pub beta: f64,
    pub certifying: bool,
}

impl TsiParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::OutOfRange(format!("alpha = {alpha} must be finite and >= 0")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::OutOfRange(format!("beta = {beta} must be finite and > 0")));
        }
        let certifying = (beta * beta - alpha * alpha - 1.0).abs() <= CERTIFYING_TOL;
        Ok(TsiParams { alpha, beta, certifying })
    }

    /// `β = √(α² + 1)`.
    pub fn tilted(alpha: f64) -> Result<Self> {
        TsiParams::new(alpha, (alpha * alpha + 1.0).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitSteeringData {
    pub exp_a0: f64,
    pub exp_a0z: f64,
    pub exp_a1x: f64,
}

impl QubitSteeringData {
    /// Reads the three correlators off settings 0 and 1 of a two-outcome qubit assemblage.
    pub fn from_assemblage(asm: &Assemblage) -> Result<Self> {
        if asm.d_b() != 2 || asm.outcomes() != 2 || asm.settings() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "need a qubit assemblage with 2 outcomes and >= 2 settings, got d={} outcomes={} settings={}",
                asm.d_b(),
                asm.outcomes(),
                asm.settings()
            )));
        }
        Ok(QubitSteeringData::from_blocks(
            &(asm.get(0, 0) - asm.get(0, 1)),
            &(asm.get(1, 0) - asm.get(1, 1)),
        ))
    }

    /// Correlators from the outcome differences `σ_{0|0} - σ_{1|0}` and `σ_{0|1} - σ_{1|1}`.
    pub fn from_blocks(diff0: &ComplexMatrix, diff1: &ComplexMatrix) -> Self {
        QubitSteeringData {
            exp_a0: trace(diff0).re,
            exp_a0z: trace(&(diff0 * pauli_z())).re,
            exp_a1x: trace(&(diff1 * pauli_x())).re,
        }
    }
}

pub fn tsi_value(data: &QubitSteeringData, p: &TsiParams) -> f64 {
    p.alpha * data.exp_a0 + p.beta * data.exp_a0z + data.exp_a1x
}

pub fn tsi_value_of_assemblage(asm: &Assemblage, p: &TsiParams) -> Result<f64> {
    Ok(tsi_value(&QubitSteeringData::from_assemblage(asm)?, p))
}

/// `α + √(1 + β²)`.
pub fn local_bound(p: &TsiParams) -> f64 {
    p.alpha + (1.0 + p.beta * p.beta).sqrt()
}

/// `√(2(1 + α² + β²))`.
pub fn quantum_bound(p: &TsiParams) -> f64 {
    (2.0 * (1.0 + p.alpha * p.alpha + p.beta * p.beta)).sqrt()
}

/// One extremal LHV-LHS strategy: a deterministic response `χ` for Alice and
/// a pure qubit state at Bloch angle `ξ` in the X-Z plane for Bob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhvLhsStrategy {
    pub chi: u8,
    pub xi: f64,
}

impl LhvLhsStrategy {
    pub fn new(chi: u8, xi: f64) -> Result<Self> {
        if !(1..=4).contains(&chi) {
            return Err(Error::OutOfRange(format!("chi = {chi} not in 1..=4")));
        }
        if !(0.0..2.0 * PI).contains(&xi) {
            return Err(Error::OutOfRange(format!("xi = {xi} not in [0, 2π)")));
        }
        Ok(LhvLhsStrategy { chi, xi })
    }

    pub fn value(&self, p: &TsiParams) -> f64 {
        strategy_value(self.chi, self.xi, p)
    }
}

fn strategy_value(chi: u8, xi: f64, p: &TsiParams) -> f64 {
    let (s, c) = xi.sin_cos();
    let tilt = p.alpha + p.beta * c;
    match chi {
        1 => tilt + s,
        2 => tilt - s,
        3 => -tilt + s,
        _ => -tilt - s,
    }
}

/// Maximum of the extremal-strategy table over `χ ∈ {1..4}` and `grid` uniform values of `ξ`.
pub fn local_bound_bruteforce(p: &TsiParams, grid: usize) -> Result<f64> {
    if grid < 1000 {
        return Err(Error::OutOfRange(format!("grid = {grid} must be at least 1000")));
    }
    Ok(strategy_maxima(p, grid).into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Grid maximum of each of the four strategies separately.
pub fn strategy_maxima(p: &TsiParams, grid: usize) -> [f64; 4] {
    let mut best = [f64::NEG_INFINITY; 4];
    let step = 2.0 * PI / grid as f64;
    for k in 0..grid {
        let xi = k as f64 * step;
        for (chi, b) in (1u8..=4).zip(best.iter_mut()) {
            *b = b.max(strategy_value(chi, xi, p));
        }
    }
    best
}

/// Correlation matrix `T = diag(sin2θ, -sin2θ, 1)` of `cos θ|00⟩ + sin θ|11⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitCorrelation {
    pub theta: f64,
    pub t: Matrix3<f64>,
    pub mu: f64,
}

impl TwoQubitCorrelation {
    pub fn new(theta: f64, mu: f64) -> Result<Self> {
        check_theta(theta)?;
        let s = (2.0 * theta).sin();
        Ok(TwoQubitCorrelation { theta, t: Matrix3::from_diagonal(&Vector3::new(s, -s, 1.0)), mu })
    }

    /// Alice's local Bloch vector `(0, 0, cos2θ)`.
    pub fn local_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, (2.0 * self.theta).cos())
    }

    /// Bob's directions `b̂₀ = (cos μ, 0, sin μ)`, `b̂₁ = (-sin μ, 0, cos μ)`.
    pub fn bob_directions(&self) -> (Vector3<f64>, Vector3<f64>) {
        bob_directions(self.mu)
    }
}

fn bob_directions(mu: f64) -> (Vector3<f64>, Vector3<f64>) {
    let (s, c) = mu.sin_cos();
    (Vector3::new(c, 0.0, s), Vector3::new(-s, 0.0, c))
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(Error::OutOfRange(format!("theta = {theta} not in (0, π/2)")));
    }
    Ok(())
}

/// Measurement-optimal value `α|cos2θ| + √((1+β²)(1+sin²2θ))` for `|ψ(θ)⟩`
/// and Bob's optimal angle `μ`.
///
/// The expression is an upper bound on the optimum over measurements. It is
/// attained when `sin2θ ≤ β ≤ 1/sin2θ` and either `α = 0` or `β sin2θ = 1`,
/// the latter being the certifying angle. `μ` is clamped to `0` when the
/// stationary point lies beyond `cos²μ = 1` and to `π/2` below `0`.
pub fn tsi_value_for_theta(theta: f64, p: &TsiParams) -> Result<(f64, f64)> {
    check_theta(theta)?;
    let s = (2.0 * theta).sin();
    let c2 = 1.0 - s * s;
    let b2 = p.beta * p.beta;
    let value = p.alpha * (2.0 * theta).cos().abs() + ((1.0 + b2) * (1.0 + s * s)).sqrt();
    let mu = if c2 <= 0.0 {
        FRAC_PI_2
    } else {
        let cos2 = (1.0 - b2 * s * s) / (c2 * (1.0 + b2));
        if cos2 > 1.0 {
            0.0
        } else if cos2 >= 0.0 {
            cos2.sqrt().acos()
        } else {
            FRAC_PI_2
        }
    };
    Ok((value, mu))
}

/// Certifying parameters `β = 1/sin2θ`, `α = √(β² - 1)` for `θ ∈ (0, π/4]`.
pub fn cert_params_for_theta(theta: f64) -> Result<TsiParams> {
    if !(theta > 0.0 && theta <= FRAC_PI_4 + 1e-15) {
        return Err(Error::OutOfRange(format!("theta = {theta} not in (0, π/4]")));
    }
    let beta = 1.0 / (2.0 * theta).sin().min(1.0);
    let alpha = (beta * beta - 1.0).max(0.0).sqrt();
    if !beta.is_finite() {
        return Err(Error::OutOfRange("theta too close to 0".into()));
    }
    TsiParams::tilted(alpha)
}

/// The angle where `|ψ(θ)⟩` reaches the quantum bound: `sin²2θ = (1+β²-α²)/(1+β²+α²)`, `θ ≤ π/4`.
pub fn optimal_theta(p: &TsiParams) -> f64 {
    let b2 = p.beta * p.beta;
    let a2 = p.alpha * p.alpha;
    let s2 = ((1.0 + b2 - a2) / (1.0 + b2 + a2)).clamp(0.0, 1.0);
    0.5 * s2.sqrt().asin()
}

fn unit(polar: f64, azimuth: f64) -> Vector3<f64> {
    let (sp, cp) = polar.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vector3::new(sp * ca, sp * sa, cp)
}

struct Objective {
    alpha: f64,
    beta: f64,
    t: Matrix3<f64>,
    r: Vector3<f64>,
}

impl Objective {
    fn new(theta: f64, p: &TsiParams) -> Self {
        let s = (2.0 * theta).sin();
        Objective {
            alpha: p.alpha,
            beta: p.beta,
            t: Matrix3::from_diagonal(&Vector3::new(s, -s, 1.0)),
            r: Vector3::new(0.0, 0.0, (2.0 * theta).cos()),
        }
    }

    /// Full five-angle objective: `x = [â₀ polar, â₀ azimuth, â₁ polar, â₁ azimuth, μ]`.
    fn full(&self, x: &[f64; 5]) -> f64 {
        let a0 = unit(x[0], x[1]);
        let a1 = unit(x[2], x[3]);
        let (b0, b1) = bob_directions(x[4]);
        self.alpha * a0.dot(&self.r) + self.beta * a0.dot(&(self.t * b0)) + a1.dot(&(self.t * b1))
    }

    /// Best responses for both of Alice's vectors at Bob angle `μ`.
    fn best_response(&self, mu: f64) -> [f64; 5] {
        let (b0, b1) = bob_directions(mu);
        let angles = |v: Vector3<f64>| {
            let n = v.norm();
            if n > 0.0 {
                ((v.z / n).clamp(-1.0, 1.0).acos(), v.y.atan2(v.x))
            } else {
                (0.0, 0.0)
            }
        };
        let (p0, z0) = angles(self.r * self.alpha + self.t * b0 * self.beta);
        let (p1, z1) = angles(self.t * b1);
        [p0, z0, p1, z1, mu]
    }

    /// Value at `μ` with Alice answering optimally.
    fn profile(&self, mu: f64) -> f64 {
        self.full(&self.best_response(mu))
    }
}

/// Coarse `μ` grid size and golden-section steps used by [`numeric_max`].
pub const NUMERIC_GRID: usize = 60;
pub const NUMERIC_REFINE_STEPS: usize = 200;

/// Golden-section maximization of `f` on `[lo, hi]`; returns `(argmax, max)`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, steps: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..steps {
        if hi - lo < 1e-13 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Direct maximization of `α(â₀·r) + β(â₀·T b̂₀) + â₁·T b̂₁` for `|ψ(θ)⟩` over
/// Alice's unit vectors and Bob's angle `μ`.
///
/// For each `μ` both of Alice's vectors are set to their best responses. A
/// coarse grid over `μ ∈ [0, 2π)` picks the `restarts` best angles, each
/// refined by golden-section search.
pub fn numeric_max(theta: f64, p: &TsiParams, restarts: usize) -> Result<f64> {
    check_theta(theta)?;
    Ok(max_over_measurements(&Objective::new(theta, p), NUMERIC_GRID, restarts))
}

fn max_over_measurements(obj: &Objective, grid: usize, restarts: usize) -> f64 {
    let step = 2.0 * PI / grid as f64;
    let mut seeds: Vec<(f64, f64)> = (0..grid)
        .map(|k| {
            let mu = step * k as f64;
            (obj.profile(mu), mu)
        })
        .collect();
    seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
    seeds
        .iter()
        .take(restarts.max(1))
        .map(|&(_, mu)| golden_max(|m| obj.profile(m), mu - step, mu + step, NUMERIC_REFINE_STEPS).1)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Numerical quantum bound: [`numeric_max`]'s objective maximized over `θ` as well,
/// by a 24-point `θ` grid refined with golden-section search.
pub fn numeric_quantum_bound(p: &TsiParams, restarts: usize) -> f64 {
    let thetas = 24;
    let width = FRAC_PI_2 / thetas as f64;
    let h = |theta: f64| {
        let theta = theta.clamp(1e-9, FRAC_PI_2 - 1e-9);
        max_over_measurements(&Objective::new(theta, p), NUMERIC_GRID, restarts)
    };
    let mut seeds: Vec<(f64, f64)> = (0..thetas)
        .map(|i| {
            let theta = width * (i as f64 + 0.5);
            (h(theta), theta)
        })
        .collect();
    seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
    seeds
        .iter()
        .take(restarts.max(1))
        .map(|&(_, theta)| golden_max(h, theta - width, theta + width, NUMERIC_REFINE_STEPS).1)
        .fold(f64::NEG_INFINITY, f64::max)
}
