//! Assemblages `σ_{a|x}` on the trusted side and the ideal certifying structure.

use crate::error::{Error, Result};
use crate::qmath::{
    self, basis_projector, max_abs, min_eigenvalue, real, tensor_vec, trace, BipartiteDims, ComplexMatrix,
    ComplexVector, DensityMatrix, Ket, MatrixChecks, ONE, ZERO,
};

/// Tolerance for projector, completeness and orthogonality checks.
pub const MEASUREMENT_TOL: f64 = 1e-10;

/// Pairs of computational-basis indices coupled by setting 1 or 2.
///
/// Setting 1 couples `(2m, 2m+1)`. Setting 2 couples `(2m+1, 2m+2 mod d)`, so
/// for even `d` the last pair wraps around to `(d-1, 0)`.
pub fn pairs(d: usize, setting: usize) -> Vec<(usize, usize)> {
    match setting {
        1 => (0..d / 2).map(|m| (2 * m, 2 * m + 1)).collect(),
        2 if d % 2 == 0 => (0..d / 2).map(|m| (2 * m + 1, (2 * m + 2) % d)).collect(),
        2 => (0..(d - 1) / 2).map(|m| (2 * m + 1, 2 * m + 2)).collect(),
        _ => Vec::new(),
    }
}

/// The index left unpaired by setting 1 or 2 when `d` is odd.
pub fn singleton(d: usize, setting: usize) -> Option<usize> {
    match (setting, d % 2) {
        (1, 1) => Some(d - 1),
        (2, 1) => Some(0),
        _ => None,
    }
}

/// Projective measurements `M_{a|x}` on Alice's space.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    d_a: usize,
    settings: usize,
    outcomes: usize,
    projectors: Vec<ComplexMatrix>,
}

impl MeasurementSet {
    /// `projectors[x * outcomes + a]` is `M_{a|x}`.
    pub fn new(d_a: usize, settings: usize, outcomes: usize, projectors: Vec<ComplexMatrix>) -> Result<Self> {
        if projectors.len() != settings * outcomes {
            return Err(Error::ShapeMismatch(format!(
                "expected {} projectors, got {}",
                settings * outcomes,
                projectors.len()
            )));
        }
        for p in &projectors {
            if p.nrows() != d_a || p.ncols() != d_a {
                return Err(Error::DimensionMismatch { expected: d_a, got: p.nrows() });
            }
            if !p.is_projector(MEASUREMENT_TOL) {
                return Err(Error::Invalid("measurement operator is not a projector".into()));
            }
        }
        let id = ComplexMatrix::identity(d_a, d_a);
        for x in 0..settings {
            let block = &projectors[x * outcomes..(x + 1) * outcomes];
            let total: ComplexMatrix = block.iter().fold(ComplexMatrix::zeros(d_a, d_a), |acc, p| acc + p);
            if max_abs(&(total - &id)) > MEASUREMENT_TOL {
                return Err(Error::Invalid(format!("projectors of setting {x} do not sum to identity")));
            }
            for a in 0..outcomes {
                for b in (a + 1)..outcomes {
                    if max_abs(&(&block[a] * &block[b])) > MEASUREMENT_TOL {
                        return Err(Error::Invalid(format!("outcomes {a} and {b} of setting {x} overlap")));
                    }
                }
            }
        }
        Ok(MeasurementSet { d_a, settings, outcomes, projectors })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn get(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.projectors[x * self.outcomes + a]
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    /// `I_E ⊗ M_{a|x}`: the same measurements acting on an enlarged black box.
    pub fn lift(&self, env_dim: usize) -> MeasurementSet {
        let id = ComplexMatrix::identity(env_dim, env_dim);
        MeasurementSet {
            d_a: env_dim * self.d_a,
            settings: self.settings,
            outcomes: self.outcomes,
            projectors: self.projectors.iter().map(|p| qmath::tensor(&id, p)).collect(),
        }
    }

    /// Pads every projector with `extra` unused dimensions, assigning them to outcome 0.
    pub fn embed(&self, extra: usize) -> MeasurementSet {
        let n = self.d_a + extra;
        let projectors = (0..self.settings)
            .flat_map(|x| (0..self.outcomes).map(move |a| (x, a)))
            .map(|(x, a)| {
                let mut p = ComplexMatrix::zeros(n, n);
                p.view_mut((0, 0), (self.d_a, self.d_a)).copy_from(self.get(x, a));
                if a == 0 {
                    for k in self.d_a..n {
                        p[(k, k)] = ONE;
                    }
                }
                p
            })
            .collect();
        MeasurementSet { d_a: n, settings: self.settings, outcomes: self.outcomes, projectors }
    }

    /// Keeps only the first `settings` measurements.
    pub fn truncate(&self, settings: usize) -> MeasurementSet {
        let settings = settings.min(self.settings);
        MeasurementSet {
            d_a: self.d_a,
            settings,
            outcomes: self.outcomes,
            projectors: self.projectors[..settings * self.outcomes].to_vec(),
        }
    }
}

/// Schmidt coefficients `c_i` of the target `Σ c_i |ii⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtCoefficients {
    c: Vec<f64>,
}

impl SchmidtCoefficients {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.len() < 2 {
            return Err(Error::OutOfRange(format!("need at least two coefficients, got {}", c.len())));
        }
        if let Some(bad) = c.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::OutOfRange(format!("coefficient {bad} outside (0, 1)")));
        }
        let sq: f64 = c.iter().map(|x| x * x).sum();
        if (sq - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::Invalid(format!("squared coefficients sum to {sq}")));
        }
        Ok(SchmidtCoefficients { c })
    }

    /// Rescales positive weights to unit squared sum.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::Invalid("coefficients must have positive norm".into()));
        }
        SchmidtCoefficients::new(raw.iter().map(|x| x / norm).collect())
    }

    pub fn maximally_entangled(d: usize) -> Result<Self> {
        SchmidtCoefficients::new(vec![1.0 / (d as f64).sqrt(); d])
    }

    /// `(cos θ, sin θ)`.
    pub fn qubit(theta: f64) -> Result<Self> {
        SchmidtCoefficients::new(vec![theta.cos(), theta.sin()])
    }

    pub fn d(&self) -> usize {
        self.c.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }

    /// `Σ_i c_i |i⟩|i⟩` on `d ⊗ d`.
    pub fn target_ket(&self) -> Ket {
        let d = self.d();
        let mut v = ComplexVector::zeros(d * d);
        for (i, &ci) in self.c.iter().enumerate() {
            v[i * d + i] = real(ci);
        }
        Ket::new(v).expect("coefficients are normalized")
    }
}

/// Subnormalized conditional states `σ_{a|x}` on Bob's space.
#[derive(Debug, Clone, PartialEq)]
pub struct Assemblage {
    d_b: usize,
    settings: usize,
    outcomes: usize,
    sigma: Vec<ComplexMatrix>,
}

impl Assemblage {
    /// `sigma[x * outcomes + a]` is `σ_{a|x}`. Only shapes are validated; use
    /// [`consistency_check`] for the physical invariants.
    pub fn new(d_b: usize, settings: usize, outcomes: usize, sigma: Vec<ComplexMatrix>) -> Result<Self> {
        if sigma.len() != settings * outcomes {
            return Err(Error::ShapeMismatch(format!(
                "expected {} elements, got {}",
                settings * outcomes,
                sigma.len()
            )));
        }
        if let Some(bad) = sigma.iter().find(|s| s.nrows() != d_b || s.ncols() != d_b) {
            return Err(Error::DimensionMismatch { expected: d_b, got: bad.nrows() });
        }
        Ok(Assemblage { d_b, settings, outcomes, sigma })
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn get(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.sigma[x * self.outcomes + a]
    }

    pub fn get_mut(&mut self, x: usize, a: usize) -> &mut ComplexMatrix {
        &mut self.sigma[x * self.outcomes + a]
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.sigma
    }

    /// `Σ_a σ_{a|x}`.
    pub fn marginal(&self, x: usize) -> ComplexMatrix {
        (0..self.outcomes).fold(ComplexMatrix::zeros(self.d_b, self.d_b), |acc, a| acc + self.get(x, a))
    }

    /// Bob's reduced state read off from setting 0.
    pub fn reduced_state(&self) -> ComplexMatrix {
        self.marginal(0)
    }

    fn same_shape(&self, other: &Assemblage) -> Result<()> {
        if (self.d_b, self.settings, self.outcomes) != (other.d_b, other.settings, other.outcomes) {
            return Err(Error::ShapeMismatch(format!(
                "({}, {}, {}) vs ({}, {}, {})",
                self.d_b, self.settings, self.outcomes, other.d_b, other.settings, other.outcomes
            )));
        }
        Ok(())
    }

    /// `(1 - t) self + t other`.
    pub fn mix(&self, other: &Assemblage, t: f64) -> Result<Assemblage> {
        self.same_shape(other)?;
        let sigma = self.sigma.iter().zip(&other.sigma).map(|(a, b)| a.scale(1.0 - t) + b.scale(t)).collect();
        Ok(Assemblage { sigma, ..self.clone() })
    }

    /// Keeps only the first `settings` settings.
    pub fn truncate(&self, settings: usize) -> Assemblage {
        let settings = settings.min(self.settings);
        Assemblage {
            d_b: self.d_b,
            settings,
            outcomes: self.outcomes,
            sigma: self.sigma[..settings * self.outcomes].to_vec(),
        }
    }

    /// Assemblage of a local-hidden-state model: `σ_{a|x} = Σ_k w_k δ_{a, f_k(x)} ρ_k`.
    pub fn from_lhs_model(
        outcomes: usize,
        weights: &[f64],
        responses: &[Vec<usize>],
        states: &[ComplexMatrix],
    ) -> Result<Assemblage> {
        if weights.len() != responses.len() || weights.len() != states.len() || weights.is_empty() {
            return Err(Error::ShapeMismatch("weights, responses and states must align".into()));
        }
        let settings = responses[0].len();
        let d_b = states[0].nrows();
        let mut sigma = vec![ComplexMatrix::zeros(d_b, d_b); settings * outcomes];
        for ((w, f), rho) in weights.iter().zip(responses).zip(states) {
            if f.len() != settings || f.iter().any(|&a| a >= outcomes) {
                return Err(Error::Invalid("response function out of range".into()));
            }
            for (x, &a) in f.iter().enumerate() {
                sigma[x * outcomes + a] += rho.scale(*w);
            }
        }
        Assemblage::new(d_b, settings, outcomes, sigma)
    }
}

/// `σ_{a|x} = tr_A[(M_{a|x} ⊗ I) ρ_AB]`.
pub fn assemblage_from(rho_ab: &DensityMatrix, dims: BipartiteDims, meas: &MeasurementSet) -> Result<Assemblage> {
    if meas.d_a() != dims.a {
        return Err(Error::DimensionMismatch { expected: dims.a, got: meas.d_a() });
    }
    if rho_ab.dim() != dims.joint() {
        return Err(Error::DimensionMismatch { expected: dims.joint(), got: rho_ab.dim() });
    }
    let rho = rho_ab.matrix();
    let (da, db) = (dims.a, dims.b);
    let sigma = meas
        .projectors()
        .iter()
        .map(|m| {
            ComplexMatrix::from_fn(db, db, |j, l| {
                let mut acc = ZERO;
                for k in 0..da {
                    for i in 0..da {
                        let mki = m[(k, i)];
                        if mki != ZERO {
                            acc += mki * rho[(i * db + j, k * db + l)];
                        }
                    }
                }
                acc
            })
        })
        .collect();
    Assemblage::new(db, meas.settings(), meas.outcomes(), sigma)
}

/// Pure-state shortcut: `σ_{a|x} = (Ψ† M_{a|x} Ψ)ᵀ` with `Ψ` the `d_A × d_B` amplitude matrix.
pub fn assemblage_from_ket(psi: &Ket, dims: BipartiteDims, meas: &MeasurementSet) -> Result<Assemblage> {
    if meas.d_a() != dims.a {
        return Err(Error::DimensionMismatch { expected: dims.a, got: meas.d_a() });
    }
    if psi.dim() != dims.joint() {
        return Err(Error::DimensionMismatch { expected: dims.joint(), got: psi.dim() });
    }
    let amps = psi.amplitudes();
    let big_psi = ComplexMatrix::from_fn(dims.a, dims.b, |i, j| amps[i * dims.b + j]);
    let sigma = meas
        .projectors()
        .iter()
        .map(|m| (big_psi.adjoint() * m * &big_psi).transpose())
        .collect();
    Assemblage::new(dims.b, meas.settings(), meas.outcomes(), sigma)
}

fn pair_block(d: usize, i: usize, j: usize, ci: f64, cj: f64, sign: f64) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    m[(i, i)] = real(ci * ci / 2.0);
    m[(j, j)] = real(cj * cj / 2.0);
    m[(i, j)] = real(sign * ci * cj / 2.0);
    m[(j, i)] = real(sign * ci * cj / 2.0);
    m
}

/// The certifying assemblage for `Σ c_i |ii⟩`, built directly from its block structure.
///
/// Setting 0 is diagonal, `σ_{i|0} = c_i² |i⟩⟨i|`. Settings 1 and 2 carry the
/// 2×2 coherent blocks on [`pairs`]: the first outcome of a pair gets
/// `+c_i c_j / 2` off-diagonals, the second `-c_i c_j / 2`; odd-`d`
/// singletons are diagonal.
pub fn ideal_assemblage(c: &SchmidtCoefficients) -> Assemblage {
    let d = c.d();
    let cs = c.as_slice();
    let mut sigma = vec![ComplexMatrix::zeros(d, d); 3 * d];
    for i in 0..d {
        sigma[i] = basis_projector(d, i).scale(cs[i] * cs[i]);
    }
    for x in 1..=2 {
        for (i, j) in pairs(d, x) {
            sigma[x * d + i] = pair_block(d, i, j, cs[i], cs[j], 1.0);
            sigma[x * d + j] = pair_block(d, i, j, cs[i], cs[j], -1.0);
        }
        if let Some(k) = singleton(d, x) {
            sigma[x * d + k] = basis_projector(d, k).scale(cs[k] * cs[k]);
        }
    }
    Assemblage { d_b: d, settings: 3, outcomes: d, sigma }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// Largest `max(-λ_min(σ), ‖σ - σ†‖_max)` over elements.
    pub positivity: f64,
    /// Largest `‖Σ_a σ_{a|x} - Σ_a σ_{a|0}‖₁` over settings.
    pub non_signalling: f64,
    /// Largest `|Σ_a tr σ_{a|x} - 1|` over settings.
    pub normalization: f64,
    pub passed: bool,
}

pub fn consistency_check(asm: &Assemblage, tol: f64) -> ConsistencyReport {
    let positivity = asm
        .elements()
        .iter()
        .map(|s| (-min_eigenvalue(s)).max(max_abs(&(s - s.adjoint()))).max(0.0))
        .fold(0.0, f64::max);
    let reference = asm.marginal(0);
    let mut non_signalling = 0.0_f64;
    let mut normalization = 0.0_f64;
    for x in 0..asm.settings() {
        let m = asm.marginal(x);
        normalization = normalization.max((trace(&m).re - 1.0).abs());
        if x > 0 {
            non_signalling = non_signalling.max(qmath::trace_norm(&(&m - &reference)).unwrap_or(f64::INFINITY));
        }
    }
    let passed = positivity <= tol && non_signalling <= tol && normalization <= tol;
    ConsistencyReport { positivity, non_signalling, normalization, passed }
}

/// `max_{a,x} ‖σ_{a|x} - σ̄_{a|x}‖₁`.
pub fn assemblage_distance(asm: &Assemblage, reference: &Assemblage) -> Result<f64> {
    asm.same_shape(reference)?;
    per_element_distances(asm, reference).map(|v| v.into_iter().fold(0.0, f64::max))
}

/// `‖σ_{a|x} - σ̄_{a|x}‖₁` for every element, in `x * outcomes + a` order.
pub fn per_element_distances(asm: &Assemblage, reference: &Assemblage) -> Result<Vec<f64>> {
    asm.same_shape(reference)?;
    asm.elements().iter().zip(reference.elements()).map(|(s, r)| qmath::trace_norm(&(s - r))).collect()
}

/// `|ψ(θ)⟩ = cos θ |00⟩ + sin θ |11⟩`.
pub fn two_qubit_state(theta: f64) -> Ket {
    let v = tensor_vec(&qmath::basis_vector(2, 0), &qmath::basis_vector(2, 0)).scale(theta.cos())
        + tensor_vec(&qmath::basis_vector(2, 1), &qmath::basis_vector(2, 1)).scale(theta.sin());
    Ket::normalized(v).expect("nonzero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::ideal_measurements;
    use crate::qmath::{pauli_x, pauli_z, random_density, random_ket};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn random_coeffs(d: usize, rng: &mut impl Rng) -> SchmidtCoefficients {
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
        SchmidtCoefficients::normalized(&raw).unwrap()
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        max_abs(&(a - b)) <= tol
    }

    #[test]
    fn pair_structure() {
        assert_eq!(pairs(2, 1), vec![(0, 1)]);
        assert_eq!(pairs(2, 2), vec![(1, 0)]);
        assert_eq!(pairs(4, 2), vec![(1, 2), (3, 0)]);
        assert_eq!(pairs(5, 1), vec![(0, 1), (2, 3)]);
        assert_eq!(pairs(5, 2), vec![(1, 2), (3, 4)]);
        assert_eq!(singleton(5, 1), Some(4));
        assert_eq!(singleton(5, 2), Some(0));
        assert_eq!(singleton(4, 2), None);
    }

    #[test]
    fn coefficient_validation() {
        assert!(SchmidtCoefficients::new(vec![1.0]).is_err());
        assert!(SchmidtCoefficients::new(vec![1.0, 0.0]).is_err());
        assert!(SchmidtCoefficients::new(vec![0.6, 0.6]).is_err());
        assert!(SchmidtCoefficients::new(vec![0.6, 0.8]).is_ok());
    }

    #[test]
    fn bell_state_with_z_measurement() {
        let meas = ideal_measurements(2).unwrap();
        let bell = Ket::from_real(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).unwrap();
        let dims = BipartiteDims::new(2, 2).unwrap();
        let asm = assemblage_from(&DensityMatrix::from_ket(&bell), dims, &meas).unwrap();
        assert!(close(asm.get(0, 0), &basis_projector(2, 0).scale(0.5), 1e-15));
        assert!(close(asm.get(0, 1), &basis_projector(2, 1).scale(0.5), 1e-15));
    }

    #[test]
    fn two_qubit_state_matches_table() {
        let theta = 0.41;
        let meas = ideal_measurements(2).unwrap();
        let dims = BipartiteDims::new(2, 2).unwrap();
        let asm = assemblage_from(&DensityMatrix::from_ket(&two_qubit_state(theta)), dims, &meas).unwrap();
        let ideal = ideal_assemblage(&SchmidtCoefficients::qubit(theta).unwrap());
        assert!(assemblage_distance(&asm, &ideal).unwrap() < 1e-12);
        for (a, b) in asm.elements().iter().zip(ideal.elements()) {
            assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn product_state_gives_unsteerable_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ra = random_density(3, 3, &mut rng);
        let rb = random_density(3, 2, &mut rng);
        let rho = DensityMatrix::new(qmath::tensor(ra.matrix(), rb.matrix())).unwrap();
        let meas = ideal_measurements(3).unwrap();
        let asm = assemblage_from(&rho, BipartiteDims::new(3, 3).unwrap(), &meas).unwrap();
        for x in 0..3 {
            for a in 0..3 {
                let p = trace(&(meas.get(x, a) * ra.matrix())).re;
                assert!(close(asm.get(x, a), &rb.matrix().scale(p), 1e-14));
            }
        }
    }

    #[test]
    fn ideal_table_entries() {
        let c = SchmidtCoefficients::maximally_entangled(2).unwrap();
        let asm = ideal_assemblage(&c);
        let quarter = ComplexMatrix::from_element(2, 2, real(0.25));
        assert!(close(asm.get(1, 0), &quarter, 1e-15));

        let c = SchmidtCoefficients::normalized(&[0.3, 0.5, 0.8]).unwrap();
        let cs = c.as_slice();
        let asm = ideal_assemblage(&c);
        assert!(close(asm.get(1, 2), &basis_projector(3, 2).scale(cs[2] * cs[2]), 1e-15));
        assert!(close(asm.get(2, 0), &basis_projector(3, 0).scale(cs[0] * cs[0]), 1e-15));
    }

    #[test]
    fn ideal_assemblage_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=6 {
            let c = random_coeffs(d, &mut rng);
            let cs = c.as_slice();
            let asm = ideal_assemblage(&c);
            assert!(consistency_check(&asm, 1e-12).passed);
            for i in 0..d {
                assert_abs_diff_eq!(trace(asm.get(0, i)).re, cs[i] * cs[i], epsilon = 1e-15);
            }
            for (i, j) in pairs(d, 1) {
                let half = (cs[i] * cs[i] + cs[j] * cs[j]) / 2.0;
                assert_abs_diff_eq!(trace(asm.get(1, i)).re, half, epsilon = 1e-15);
                assert_abs_diff_eq!(trace(asm.get(1, j)).re, half, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ideal_measurements_reproduce_ideal_assemblage() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in 2..=6 {
            let c = random_coeffs(d, &mut rng);
            let meas = ideal_measurements(d).unwrap();
            let dims = BipartiteDims::new(d, d).unwrap();
            let rho = DensityMatrix::from_ket(&c.target_ket());
            let from_rho = assemblage_from(&rho, dims, &meas).unwrap();
            let from_ket = assemblage_from_ket(&c.target_ket(), dims, &meas).unwrap();
            let ideal = ideal_assemblage(&c);
            for ((a, b), e) in from_rho.elements().iter().zip(from_ket.elements()).zip(ideal.elements()) {
                assert!(close(a, e, 1e-12), "d={d}");
                assert!(close(b, e, 1e-12), "d={d}");
            }
        }
    }

    #[test]
    fn consistency_flags_scaled_element() {
        let c = SchmidtCoefficients::normalized(&[0.4, 0.7, 0.6]).unwrap();
        let c0 = c.as_slice()[0];
        let mut asm = ideal_assemblage(&c);
        *asm.get_mut(0, 0) = asm.get(0, 0).scale(1.1);
        let report = consistency_check(&asm, 1e-9);
        assert_abs_diff_eq!(report.normalization, 0.1 * c0 * c0, epsilon = 1e-14);
        assert!(!report.passed);
    }

    #[test]
    fn consistency_flags_signalling() {
        let c = SchmidtCoefficients::maximally_entangled(2).unwrap();
        let mut asm = ideal_assemblage(&c);
        // Move weight between outcomes of setting 1 only: traces stay 1, marginals differ.
        *asm.get_mut(1, 0) = basis_projector(2, 0).scale(0.75);
        *asm.get_mut(1, 1) = basis_projector(2, 1).scale(0.25);
        let report = consistency_check(&asm, 1e-9);
        assert!(report.non_signalling > 0.1);
        assert!(report.normalization < 1e-15);
        assert!(!report.passed);
    }

    #[test]
    fn white_noise_distance_is_half_eta() {
        let eta = 0.02;
        let c = SchmidtCoefficients::maximally_entangled(2).unwrap();
        let pure = DensityMatrix::from_ket(&c.target_ket());
        let noisy = pure.matrix().scale(1.0 - eta) + ComplexMatrix::identity(4, 4).scale(eta / 4.0);
        let asm = assemblage_from(
            &DensityMatrix::new(noisy).unwrap(),
            BipartiteDims::new(2, 2).unwrap(),
            &ideal_measurements(2).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(assemblage_distance(&asm, &ideal_assemblage(&c)).unwrap(), eta / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn distance_with_one_element_replaced() {
        let d = 3;
        let c = SchmidtCoefficients::normalized(&[0.5, 0.6, 0.7]).unwrap();
        let ideal = ideal_assemblage(&c);
        let mut asm = ideal.clone();
        let mixed = ComplexMatrix::identity(d, d).scale(1.0 / (2.0 * d as f64));
        *asm.get_mut(1, 0) = mixed.clone();
        let oracle: f64 = qmath::eigh(&(ideal.get(1, 0) - &mixed)).0.iter().map(|l| l.abs()).sum();
        assert_abs_diff_eq!(assemblage_distance(&asm, &ideal).unwrap(), oracle, epsilon = 1e-13);
        assert_abs_diff_eq!(assemblage_distance(&ideal, &ideal).unwrap(), 0.0);
    }

    #[test]
    fn distance_rejects_shape_mismatch() {
        let a = ideal_assemblage(&SchmidtCoefficients::maximally_entangled(2).unwrap());
        let b = ideal_assemblage(&SchmidtCoefficients::maximally_entangled(3).unwrap());
        assert!(matches!(assemblage_distance(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn measurement_validation() {
        let z = pauli_z();
        assert!(MeasurementSet::new(2, 1, 2, vec![z.clone(), z]).is_err());
        let x = pauli_x();
        assert!(MeasurementSet::new(2, 1, 1, vec![x]).is_err());
        let p0 = basis_projector(2, 0);
        assert!(MeasurementSet::new(2, 1, 2, vec![p0.clone(), p0]).is_err());
        assert!(ideal_measurements(4).unwrap().embed(2).d_a() == 6);
    }

    #[test]
    fn lhs_model_assemblage_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let states: Vec<_> = (0..4).map(|_| random_ket(2, &mut rng).projector()).collect();
        let responses = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let asm = Assemblage::from_lhs_model(2, &[0.1, 0.2, 0.3, 0.4], &responses, &states).unwrap();
        assert!(consistency_check(&asm, 1e-12).passed);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn assemblages_from_random_inputs_are_valid(seed in any::<u64>(), d in 2usize..=4, rank in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(d * d, rank, &mut rng);
            let asm = assemblage_from(&rho, BipartiteDims::new(d, d).unwrap(), &ideal_measurements(d).unwrap()).unwrap();
            let report = consistency_check(&asm, 1e-10);
            prop_assert!(report.passed, "{:?}", report);
        }
    }
}
