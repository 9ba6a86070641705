//! Controlled noise, ε estimation and the robustness bounds for the maximally
//! entangled qudit.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assemblage::{
    assemblage_from, per_element_distances, pairs, Assemblage, MeasurementSet, SchmidtCoefficients,
};
use crate::certify::{apply_isometry, build_certification_operators, ideal_measurements, swap_isometry};
use crate::error::{Error, Result};
use crate::qmath::{
    expm_i_hermitian, outer, partial_trace_a, purify, random_hermitian_unit, random_vector, tensor_vec, trace_norm,
    BipartiteDims, ComplexMatrix, ComplexVector, DensityMatrix, Ket,
};

/// Slack allowed on top of every bound comparison.
pub const BOUND_SLACK: f64 = 1e-12;

/// `½(4d²√ε + d³ε√ε + dε)`.
pub fn robust_state_bound(d: usize, eps: f64) -> f64 {
    let d = d as f64;
    let s = eps.sqrt();
    0.5 * (4.0 * d * d * s + d * d * d * eps * s + d * eps)
}

/// `4(d² + d)√ε + ε`.
pub fn robust_measurement_bound(d: usize, eps: f64) -> f64 {
    let d = d as f64;
    4.0 * (d * d + d) * eps.sqrt() + eps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    WhiteNoise,
    MeasurementRotation,
    BobDephasing,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::WhiteNoise => "white-noise",
            NoiseKind::MeasurementRotation => "rotation",
            NoiseKind::BobDephasing => "dephasing",
        }
    }

    /// Largest strength that keeps the perturbed setup physical.
    pub fn max_strength(&self) -> f64 {
        match self {
            NoiseKind::MeasurementRotation => f64::INFINITY,
            _ => 1.0,
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white-noise" | "white" => Ok(NoiseKind::WhiteNoise),
            "rotation" | "measurement-rotation" => Ok(NoiseKind::MeasurementRotation),
            "dephasing" | "bob-dephasing" => Ok(NoiseKind::BobDephasing),
            other => Err(Error::Invalid(format!("unknown noise model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub strength: f64,
    /// Seeds the random generators of the rotation model.
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, strength: f64, seed: u64) -> Result<Self> {
        if !(strength >= 0.0 && strength <= kind.max_strength() && strength.is_finite()) {
            return Err(Error::OutOfRange(format!("{kind} strength {strength} outside [0, {}]", kind.max_strength())));
        }
        Ok(NoiseModel { kind, strength, seed })
    }
}

/// Applies `model` to a reference state on `dims` and measurements on `dims.a`.
///
/// * white noise: `(1 - η)ρ̄ + η I/(d_A d_B)`
/// * rotation: `M_{a|x} → U_x M_{a|x} U_x†` with `U_x = exp(iδH_x)`, one seeded
///   unit-norm Hermitian `H_x` per setting
/// * dephasing: entries off-diagonal in Bob's index damped by `1 - γ`
pub fn perturb(
    reference_state: &DensityMatrix,
    dims: BipartiteDims,
    reference_meas: &MeasurementSet,
    model: &NoiseModel,
) -> Result<(DensityMatrix, MeasurementSet)> {
    if reference_state.dim() != dims.joint() {
        return Err(Error::DimensionMismatch { expected: dims.joint(), got: reference_state.dim() });
    }
    let NoiseModel { kind, strength, seed } = NoiseModel::new(model.kind, model.strength, model.seed)?;
    if strength == 0.0 {
        return Ok((reference_state.clone(), reference_meas.clone()));
    }
    let rho = reference_state.matrix();
    let n = dims.joint();
    match kind {
        NoiseKind::WhiteNoise => {
            let mixed = rho.scale(1.0 - strength) + ComplexMatrix::identity(n, n).scale(strength / n as f64);
            Ok((DensityMatrix::new(mixed)?, reference_meas.clone()))
        }
        NoiseKind::BobDephasing => {
            let db = dims.b;
            let damped = ComplexMatrix::from_fn(n, n, |r, c| {
                if r % db == c % db {
                    rho[(r, c)]
                } else {
                    rho[(r, c)] * (1.0 - strength)
                }
            });
            Ok((DensityMatrix::new(damped)?, reference_meas.clone()))
        }
        NoiseKind::MeasurementRotation => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let da = reference_meas.d_a();
            let mut projectors = Vec::with_capacity(reference_meas.projectors().len());
            for x in 0..reference_meas.settings() {
                let u = expm_i_hermitian(&random_hermitian_unit(da, &mut rng), strength);
                for a in 0..reference_meas.outcomes() {
                    let p = &u * reference_meas.get(x, a) * u.adjoint();
                    projectors.push(crate::qmath::hermitian_part(&p));
                }
            }
            let meas = MeasurementSet::new(da, reference_meas.settings(), reference_meas.outcomes(), projectors)?;
            Ok((reference_state.clone(), meas))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonReport {
    /// `‖σ_{a|x} - σ̄_{a|x}‖₁` in `x * outcomes + a` order.
    pub per_element: Vec<f64>,
    /// `D(ρ_B, ρ̄_B)`.
    pub state_dist: f64,
    pub epsilon: f64,
}

pub fn epsilon_of(
    physical: &Assemblage,
    physical_rho_b: &ComplexMatrix,
    reference: &Assemblage,
    reference_rho_b: &ComplexMatrix,
) -> Result<EpsilonReport> {
    if physical_rho_b.shape() != reference_rho_b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "reduced states {:?} vs {:?}",
            physical_rho_b.shape(),
            reference_rho_b.shape()
        )));
    }
    let per_element = per_element_distances(physical, reference)?;
    let state_dist = 0.5 * trace_norm(&(physical_rho_b - reference_rho_b))?;
    let epsilon = per_element.iter().copied().fold(state_dist, f64::max);
    Ok(EpsilonReport { per_element, state_dist, epsilon })
}

/// ε as a function of strength where it has a closed form on the maximally
/// entangled reference: `2η(d-1)/d²` for white noise, `γ/d` for dephasing.
pub fn closed_form_epsilon(kind: NoiseKind, d: usize, strength: f64) -> Option<f64> {
    let df = d as f64;
    match kind {
        NoiseKind::WhiteNoise => Some(strength * 2.0 * (df - 1.0) / (df * df)),
        NoiseKind::BobDephasing => Some(strength / df),
        NoiseKind::MeasurementRotation => None,
    }
}

/// `‖|u⟩⟨u| - |v⟩⟨v|‖₁ = √((‖u‖² - ‖v‖²)² + 4‖u‖²‖v_⊥‖²)`, with `v_⊥` the part of
/// `v` orthogonal to `u`.
pub fn rank_one_difference_norm(u: &ComplexVector, v: &ComplexVector) -> f64 {
    let nu = u.norm_squared();
    let nv = v.norm_squared();
    if nu == 0.0 {
        return nv;
    }
    let overlap = u.dotc(v) / nu;
    let v_perp = v - u * overlap;
    ((nu - nv).powi(2) + 4.0 * nu * v_perp.norm_squared()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport {
    pub lemma1_ok: bool,
    /// `max_{a,x} ‖(M_{a|x} ⊗ I)|ψ⟩ - (I ⊗ M̄_{a|x})|ψ⟩‖`.
    pub lemma2_max: f64,
    /// Same for `X^u_m`, `Y^u_m` against their reference unitaries.
    pub lemma3_max: f64,
}

/// Number of random triples drawn for the two-vector norm inequality.
pub const LEMMA1_SAMPLES: usize = 1000;

/// Checks `‖(|u⟩ - |v⟩)⟨t|‖₁ ≤ βη` and `‖|t⟩(⟨u| - ⟨v|)‖₁ ≤ βη` for random
/// `‖u‖, ‖v‖ ≤ 1`, `‖u - v‖ ≤ η ≤ 1`, `‖t‖ ≤ β`.
pub fn lemma1_check<R: Rng + ?Sized>(samples: usize, rng: &mut R) -> bool {
    let mut done = 0;
    while done < samples {
        let dim = rng.random_range(2..=6);
        let u = random_vector(dim, rng).normalize() * crate::qmath::real(rng.random::<f64>());
        let v = random_vector(dim, rng).normalize() * crate::qmath::real(rng.random::<f64>());
        let diff = &u - &v;
        let gap = diff.norm();
        if gap > 1.0 {
            continue;
        }
        let eta = rng.random_range(gap..=1.0);
        let beta = rng.random_range(0.1..3.0);
        let t = random_vector(dim, rng).normalize() * crate::qmath::real(beta * rng.random::<f64>());
        let left = trace_norm(&outer(&diff, &t)).unwrap_or(f64::INFINITY);
        let right = trace_norm(&outer(&t, &diff)).unwrap_or(f64::INFINITY);
        if left > beta * eta + BOUND_SLACK || right > beta * eta + BOUND_SLACK {
            return false;
        }
        done += 1;
    }
    true
}

/// `(I ⊗ op)|ψ⟩` for `|ψ⟩` on `n ⊗ d`.
fn apply_second(op: &ComplexMatrix, psi: &ComplexVector, n: usize) -> ComplexVector {
    let d = op.nrows();
    let mat = ComplexMatrix::from_fn(n, d, |i, j| psi[i * d + j]);
    let res = mat * op.transpose();
    ComplexVector::from_fn(n * d, |k, _| res[(k / d, k % d)])
}

/// `(op ⊗ I)|ψ⟩` for `|ψ⟩` on `n ⊗ d`.
fn apply_first(op: &ComplexMatrix, psi: &ComplexVector, d: usize) -> ComplexVector {
    let n = op.ncols();
    let mat = ComplexMatrix::from_fn(n, d, |i, j| psi[i * d + j]);
    let res = op * mat;
    ComplexVector::from_fn(n * d, |k, _| res[(k / d, k % d)])
}

fn require_maximally_entangled(reference: &SchmidtCoefficients) -> Result<()> {
    let target = 1.0 / (reference.d() as f64).sqrt();
    if reference.as_slice().iter().any(|c| (c - target).abs() > 1e-12) {
        return Err(Error::Invalid("robustness bounds hold only for the maximally entangled reference".into()));
    }
    Ok(())
}

/// Shifts each physical projector and unitary on the black box to its reference
/// counterpart on Bob's side and reports the largest displacement.
///
/// The reference operators are real, so the matrix acting on Bob is the same
/// matrix as on Alice.
pub fn lemma_checks(
    psi: &Ket,
    meas: &MeasurementSet,
    reference_meas: &MeasurementSet,
    reference: &SchmidtCoefficients,
    seed: u64,
) -> Result<LemmaReport> {
    require_maximally_entangled(reference)?;
    let d = reference.d();
    let n = meas.d_a();
    if psi.dim() != n * d {
        return Err(Error::DimensionMismatch { expected: n * d, got: psi.dim() });
    }
    if reference_meas.d_a() != d || reference_meas.settings() != meas.settings() {
        return Err(Error::ShapeMismatch("reference measurements do not match".into()));
    }
    let amps = psi.amplitudes();
    let shift = |phys: &ComplexMatrix, refr: &ComplexMatrix| {
        (apply_first(phys, amps, d) - apply_second(refr, amps, n)).norm()
    };
    let mut lemma2_max = 0.0_f64;
    for x in 0..meas.settings() {
        for a in 0..meas.outcomes() {
            lemma2_max = lemma2_max.max(shift(meas.get(x, a), reference_meas.get(x, a)));
        }
    }
    let id_n = ComplexMatrix::identity(n, n);
    let id_d = ComplexMatrix::identity(d, d);
    let mut lemma3_max = 0.0_f64;
    for x in 1..meas.settings().min(3) {
        for (_, j) in pairs(d, x) {
            let phys = &id_n - meas.get(x, j).scale(2.0);
            let refr = &id_d - reference_meas.get(x, j).scale(2.0);
            lemma3_max = lemma3_max.max(shift(&phys, &refr));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lemma1_ok = lemma1_check(LEMMA1_SAMPLES, &mut rng);
    Ok(LemmaReport { lemma1_ok, lemma2_max, lemma3_max })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRecord {
    pub d: usize,
    pub model: NoiseKind,
    pub strength: f64,
    pub epsilon: f64,
    pub state_dist_observed: f64,
    pub state_bound: f64,
    /// Per element in `x * d + a` order.
    pub meas_dist_observed: Vec<f64>,
    pub meas_bound: f64,
    pub lemma1_ok: bool,
    pub lemma2_max: f64,
    pub lemma3_max: f64,
}

impl RobustnessRecord {
    pub fn meas_dist_max(&self) -> f64 {
        self.meas_dist_observed.iter().copied().fold(0.0, f64::max)
    }

    pub fn lemma2_bound(&self) -> f64 {
        2.0 * self.epsilon.sqrt()
    }

    pub fn lemma3_bound(&self) -> f64 {
        4.0 * self.epsilon.sqrt()
    }

    pub fn passed(&self) -> bool {
        self.state_dist_observed <= self.state_bound + BOUND_SLACK
            && self.meas_dist_max() <= self.meas_bound + BOUND_SLACK
            && self.lemma1_ok
            && self.lemma2_max <= self.lemma2_bound() + BOUND_SLACK
            && self.lemma3_max <= self.lemma3_bound() + BOUND_SLACK
    }
}

/// The maximally entangled reference: state, measurements, assemblage and `ρ̄_B`.
pub struct Reference {
    pub coeffs: SchmidtCoefficients,
    pub state: DensityMatrix,
    pub meas: MeasurementSet,
    pub assemblage: Assemblage,
    pub rho_b: ComplexMatrix,
    pub dims: BipartiteDims,
}

impl Reference {
    pub fn maximally_entangled(d: usize) -> Result<Self> {
        let coeffs = SchmidtCoefficients::maximally_entangled(d)?;
        let state = DensityMatrix::from_ket(&coeffs.target_ket());
        let dims = BipartiteDims::new(d, d)?;
        let rho_b = partial_trace_a(state.matrix(), dims)?;
        let meas = ideal_measurements(d)?;
        Ok(Reference {
            assemblage: assemblage_from(&state, dims, &meas)?,
            meas,
            coeffs,
            state,
            rho_b,
            dims,
        })
    }

    /// Perturbs the reference and reports the resulting ε.
    pub fn epsilon_for(&self, model: &NoiseModel) -> Result<f64> {
        let (rho, meas) = perturb(&self.state, self.dims, &self.meas, model)?;
        let asm = assemblage_from(&rho, self.dims, &meas)?;
        let rho_b = partial_trace_a(rho.matrix(), self.dims)?;
        Ok(epsilon_of(&asm, &rho_b, &self.assemblage, &self.rho_b)?.epsilon)
    }
}

/// One sweep point: perturb, measure ε, purify, build the isometry from the
/// physical measurements and compare against both bounds.
///
/// The full physical state `ρ_AB` is purified so that the black box becomes
/// `E ⊗ A` with measurements `I_E ⊗ M_{a|x}`; this reproduces the physical
/// assemblage exactly.
pub fn robust_point(reference: &Reference, model: &NoiseModel) -> Result<RobustnessRecord> {
    let d = reference.coeffs.d();
    let (rho, meas) = perturb(&reference.state, reference.dims, &reference.meas, model)?;
    let asm = assemblage_from(&rho, reference.dims, &meas)?;
    let rho_b = partial_trace_a(rho.matrix(), reference.dims)?;
    let eps = epsilon_of(&asm, &rho_b, &reference.assemblage, &reference.rho_b)?;

    let (psi, pdims) = purify(&rho);
    let meas = meas.lift(pdims.a);
    let n = meas.d_a();
    let ops = build_certification_operators(&meas, d)?;
    let circuit = swap_isometry(&ops);
    let out = apply_isometry(&circuit, psi.amplitudes(), d)?;

    let junk_raw = ComplexVector::from_fn(n, |i, _| psi.amplitudes()[i * d]);
    let junk = Ket::normalized(junk_raw)?;
    let target = reference.coeffs.target_ket();
    let ideal = tensor_vec(junk.amplitudes(), target.amplitudes());
    let state_dist_observed = 0.5 * rank_one_difference_norm(&out, &ideal);

    let mut meas_dist_observed = Vec::with_capacity(meas.projectors().len());
    for x in 0..meas.settings() {
        for a in 0..meas.outcomes() {
            let moved = apply_first(meas.get(x, a), psi.amplitudes(), d);
            let u = apply_isometry(&circuit, &moved, d)?;
            let v = tensor_vec(junk.amplitudes(), &apply_first(reference.meas.get(x, a), target.amplitudes(), d));
            meas_dist_observed.push(rank_one_difference_norm(&u, &v));
        }
    }

    let lemmas = lemma_checks(&psi, &meas, &reference.meas, &reference.coeffs, model.seed)?;
    Ok(RobustnessRecord {
        d,
        model: model.kind,
        strength: model.strength,
        epsilon: eps.epsilon,
        state_dist_observed,
        state_bound: robust_state_bound(d, eps.epsilon),
        meas_dist_observed,
        meas_bound: robust_measurement_bound(d, eps.epsilon),
        lemma1_ok: lemmas.lemma1_ok,
        lemma2_max: lemmas.lemma2_max,
        lemma3_max: lemmas.lemma3_max,
    })
}

pub fn robust_certification_experiment(
    d: usize,
    kind: NoiseKind,
    strengths: &[f64],
    seed: u64,
) -> Result<Vec<RobustnessRecord>> {
    let reference = Reference::maximally_entangled(d)?;
    strengths
        .iter()
        .map(|&s| robust_point(&reference, &NoiseModel::new(kind, s, seed)?))
        .collect()
}

/// Strength at which the perturbed reference reaches `target` ε, by bisection
/// on `[0, hi]` (closed form where available).
pub fn strength_for_epsilon(reference: &Reference, kind: NoiseKind, target: f64, seed: u64) -> Result<f64> {
    let d = reference.coeffs.d();
    if let Some(unit) = closed_form_epsilon(kind, d, 1.0) {
        let s = target / unit;
        return if s <= kind.max_strength() {
            Ok(s)
        } else {
            Err(Error::OutOfRange(format!("ε = {target} unreachable with {kind}")))
        };
    }
    let mut hi = 1e-3;
    while reference.epsilon_for(&NoiseModel::new(kind, hi, seed)?)? < target {
        hi *= 2.0;
        if hi > 10.0 {
            return Err(Error::OutOfRange(format!("ε = {target} unreachable with {kind}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if reference.epsilon_for(&NoiseModel::new(kind, mid, seed)?)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
