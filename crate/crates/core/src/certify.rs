//! Subspace certification of `Σ c_i |ii⟩` and the Fourier SWAP isometry.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::assemblage::{
    assemblage_distance, assemblage_from_ket, ideal_assemblage, pairs, singleton, Assemblage, MeasurementSet,
    SchmidtCoefficients,
};
use crate::error::{Error, Result};
use crate::qmath::{
    basis_projector, c, max_abs, outer, purify, real, trace, BipartiteDims, ComplexMatrix, ComplexVector,
    DensityMatrix, Ket, MatrixChecks, ONE, ZERO,
};
use crate::tsi::{cert_params_for_theta, tsi_value, QubitSteeringData};

/// Default pass threshold for exact-mode certification.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Minimum pair weight `c_i² + c_j²` for a subspace check.
pub const MIN_PAIR_WEIGHT: f64 = 1e-14;

fn plus_minus(d: usize, i: usize, j: usize) -> (ComplexMatrix, ComplexMatrix) {
    let mut plus = ComplexVector::zeros(d);
    let mut minus = ComplexVector::zeros(d);
    plus[i] = real(FRAC_1_SQRT_2);
    plus[j] = real(FRAC_1_SQRT_2);
    minus[i] = real(FRAC_1_SQRT_2);
    minus[j] = real(-FRAC_1_SQRT_2);
    (outer(&plus, &plus), outer(&minus, &minus))
}

/// Computational basis for setting 0, and `|±⟩` on the [`pairs`] of settings 1
/// and 2. Outcome `i` of pair `(i, j)` is `|+⟩`, outcome `j` is `|-⟩`.
pub fn ideal_measurements(d: usize) -> Result<MeasurementSet> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("d = {d} must be at least 2")));
    }
    let mut projectors = vec![ComplexMatrix::zeros(d, d); 3 * d];
    for k in 0..d {
        projectors[k] = basis_projector(d, k);
    }
    for x in 1..=2 {
        for (i, j) in pairs(d, x) {
            let (p, m) = plus_minus(d, i, j);
            projectors[x * d + i] = p;
            projectors[x * d + j] = m;
        }
        if let Some(k) = singleton(d, x) {
            projectors[x * d + k] = basis_projector(d, k);
        }
    }
    MeasurementSet::new(d, 3, d, projectors)
}

/// Setting families used for certification: `{1}` for `d = 2` or two-setting
/// data, `{1, 2}` otherwise.
pub fn families(d: usize, settings: usize) -> Vec<usize> {
    if d == 2 || settings < 3 {
        vec![1]
    } else {
        vec![1, 2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceViolation {
    /// Setting paired with setting 0.
    pub setting: usize,
    pub pair: (usize, usize),
    /// Value on the normalized 2×2 sub-assemblage.
    pub value: f64,
    /// Value before normalization.
    pub raw_value: f64,
    /// `2β_m`.
    pub target: f64,
    pub beta: f64,
    pub weight: f64,
}

/// `Z` and `X` restricted to the block `(i, j)`.
fn block_paulis(d: usize, i: usize, j: usize) -> (ComplexMatrix, ComplexMatrix) {
    let mut z = ComplexMatrix::zeros(d, d);
    z[(i, i)] = ONE;
    z[(j, j)] = -ONE;
    let mut x = ComplexMatrix::zeros(d, d);
    x[(i, j)] = ONE;
    x[(j, i)] = ONE;
    (z, x)
}

/// TSI value of each normalized pair sub-assemblage with the certifying
/// parameters of its angle `θ_m`, `sin2θ_m = 2c_ic_j / (c_i² + c_j²)`.
///
/// When `c_j > c_i` the state on the pair has `θ_m > π/4`; the `⟨A₀⟩` term is
/// then taken with the opposite sign so the same target `2β_m` applies.
pub fn subspace_violations(asm: &Assemblage, c: &SchmidtCoefficients) -> Result<Vec<SubspaceViolation>> {
    let d = c.d();
    if asm.d_b() != d || asm.outcomes() != d || asm.settings() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "assemblage (d={}, outcomes={}, settings={}) does not match d={d}",
            asm.d_b(),
            asm.outcomes(),
            asm.settings()
        )));
    }
    let cs = c.as_slice();
    let mut out = Vec::new();
    for x in families(d, asm.settings()) {
        for (i, j) in pairs(d, x) {
            let weight = cs[i] * cs[i] + cs[j] * cs[j];
            if weight < MIN_PAIR_WEIGHT {
                return Err(Error::Invalid(format!("pair ({i}, {j}) has zero weight")));
            }
            let sin2 = (2.0 * cs[i] * cs[j] / weight).min(1.0);
            let params = cert_params_for_theta(0.5 * sin2.asin())?;
            let (z, xm) = block_paulis(d, i, j);
            let d0 = asm.get(0, i) - asm.get(0, j);
            let d1 = asm.get(x, i) - asm.get(x, j);
            let orient = if cs[j] > cs[i] { -1.0 } else { 1.0 };
            let data = QubitSteeringData {
                exp_a0: orient * trace(&d0).re / weight,
                exp_a0z: trace(&(&d0 * &z)).re / weight,
                exp_a1x: trace(&(&d1 * &xm)).re / weight,
            };
            let value = tsi_value(&data, &params);
            out.push(SubspaceViolation {
                setting: x,
                pair: (i, j),
                value,
                raw_value: value * weight,
                target: 2.0 * params.beta,
                beta: params.beta,
                weight,
            });
        }
    }
    Ok(out)
}

/// Projectors `P^{(k)}`, unitaries `X^u_m`, `Y^u_m` and `X^{(k)}` on Alice's space.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationOperators {
    pub d_a: usize,
    pub d: usize,
    pub p: Vec<ComplexMatrix>,
    pub xu: Vec<ComplexMatrix>,
    pub yu: Vec<ComplexMatrix>,
    pub xbig: Vec<ComplexMatrix>,
}

impl CertificationOperators {
    /// Largest violation of the projector, completeness and unitarity invariants.
    pub fn invariant_residual(&self) -> f64 {
        let n = self.d_a;
        let id = ComplexMatrix::identity(n, n);
        let mut worst = 0.0_f64;
        let mut total = ComplexMatrix::zeros(n, n);
        for (k, p) in self.p.iter().enumerate() {
            worst = worst.max(max_abs(&(p * p - p))).max(max_abs(&(p - p.adjoint())));
            for q in &self.p[k + 1..] {
                worst = worst.max(max_abs(&(p * q)));
            }
            total += p;
        }
        worst = worst.max(max_abs(&(total - &id)));
        for u in self.xu.iter().chain(&self.yu).chain(&self.xbig) {
            worst = worst.max(max_abs(&(u.adjoint() * u - &id)));
        }
        worst
    }
}

/// `P^{(k)} = M_{k|0}`, `X^u_m = 1 - 2Π_{2m+1|1}`, `Y^u_m = 1 - 2Π_{2m+2 mod d|2}`,
/// and the chains `X^{(2m+1)} = X^u_0 Y^u_0 ⋯ Y^u_{m-1} X^u_m`,
/// `X^{(2m)} = X^u_0 Y^u_0 ⋯ X^u_{m-1} Y^u_{m-1}`.
pub fn build_certification_operators(meas: &MeasurementSet, d: usize) -> Result<CertificationOperators> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("d = {d} must be at least 2")));
    }
    if meas.outcomes() != d {
        return Err(Error::ShapeMismatch(format!("measurements have {} outcomes, need {d}", meas.outcomes())));
    }
    let needed = if d == 2 { 2 } else { 3 };
    if meas.settings() < needed {
        return Err(Error::ShapeMismatch(format!("need {needed} settings, got {}", meas.settings())));
    }
    if meas.projectors().iter().any(|p| !p.is_projector(crate::assemblage::MEASUREMENT_TOL)) {
        return Err(Error::Invalid("measurements are not projective".into()));
    }
    let n = meas.d_a();
    let id = ComplexMatrix::identity(n, n);
    let p: Vec<_> = (0..d).map(|k| meas.get(0, k).clone()).collect();
    let xu: Vec<_> = pairs(d, 1).iter().map(|&(_, j)| &id - meas.get(1, j).scale(2.0)).collect();
    let yu: Vec<_> = if meas.settings() >= 3 {
        pairs(d, 2).iter().map(|&(_, j)| &id - meas.get(2, j).scale(2.0)).collect()
    } else {
        Vec::new()
    };
    let mut xbig = Vec::with_capacity(d);
    let mut chain = id.clone();
    xbig.push(id);
    for k in 1..d {
        let m = k / 2;
        if k % 2 == 1 {
            xbig.push(&chain * &xu[m]);
        } else {
            chain = &chain * &xu[m - 1] * &yu[m - 1];
            xbig.push(chain.clone());
        }
    }
    Ok(CertificationOperators { d_a: n, d, p, xu, yu, xbig })
}

/// `max_k ‖X^{(k)} P^{(k)} |ψ⟩ - c_k |0, k⟩‖` for `|ψ⟩` on `d_A ⊗ d`.
pub fn check_sufficient_condition(ops: &CertificationOperators, psi: &Ket, c: &SchmidtCoefficients) -> Result<f64> {
    let d = ops.d;
    if c.d() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c.d() });
    }
    if psi.dim() != ops.d_a * d {
        return Err(Error::DimensionMismatch { expected: ops.d_a * d, got: psi.dim() });
    }
    let amps = ComplexMatrix::from_fn(ops.d_a, d, |i, j| psi.amplitudes()[i * d + j]);
    let mut worst = 0.0_f64;
    for k in 0..d {
        let mut v = &ops.xbig[k] * &ops.p[k] * &amps;
        v[(0, k)] -= real(c.as_slice()[k]);
        worst = worst.max(v.norm());
    }
    Ok(worst)
}

/// `Φ = R (I ⊗ F̄) S (I ⊗ F)` on `A ⊗ A'`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryCircuit {
    pub d_a: usize,
    pub d: usize,
    pub phi: ComplexMatrix,
    pub f: ComplexMatrix,
    pub fbar: ComplexMatrix,
    pub s: ComplexMatrix,
    pub r: ComplexMatrix,
}

/// `F_{jk} = ω^{jk} / √d` with `ω = e^{2πi/d}`.
pub fn fourier(d: usize) -> ComplexMatrix {
    let norm = 1.0 / (d as f64).sqrt();
    ComplexMatrix::from_fn(d, d, |j, k| {
        let phase = 2.0 * PI * ((j * k) % d) as f64 / d as f64;
        c(phase.cos() * norm, phase.sin() * norm)
    })
}

fn controlled(blocks: &[ComplexMatrix], n: usize) -> ComplexMatrix {
    let d = blocks.len();
    let mut out = ComplexMatrix::zeros(n * d, n * d);
    for (k, u) in blocks.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                out[(i * d + k, j * d + k)] = u[(i, j)];
            }
        }
    }
    out
}

pub fn swap_isometry(ops: &CertificationOperators) -> IsometryCircuit {
    let (n, d) = (ops.d_a, ops.d);
    let f = fourier(d);
    let fbar = f.conjugate();
    let id = ComplexMatrix::identity(n, n);
    let z_powers: Vec<ComplexMatrix> = (0..d)
        .map(|k| {
            ops.p.iter().enumerate().fold(ComplexMatrix::zeros(n, n), |acc, (j, pj)| {
                let phase = 2.0 * PI * ((j * k) % d) as f64 / d as f64;
                acc + pj * c(phase.cos(), phase.sin())
            })
        })
        .collect();
    let s = controlled(&z_powers, n);
    let r = controlled(&ops.xbig, n);
    let phi = &r * crate::qmath::tensor(&id, &fbar) * &s * crate::qmath::tensor(&id, &f);
    IsometryCircuit { d_a: n, d, phi, f, fbar, s, r }
}

/// `(op ⊗ I_m) v` where `v` lives on `n ⊗ m`.
fn apply_first(op: &ComplexMatrix, v: &ComplexVector, m: usize) -> ComplexVector {
    let n = op.ncols();
    let mat = ComplexMatrix::from_fn(n, m, |i, j| v[i * m + j]);
    let res = op * mat;
    ComplexVector::from_fn(op.nrows() * m, |k, _| res[(k / m, k % m)])
}

/// `(Φ ⊗ I_B)(|ψ⟩_{AB} ⊗ |0⟩_{A'})`, ordered `A ⊗ A' ⊗ B`.
pub fn apply_isometry(circuit: &IsometryCircuit, psi: &ComplexVector, d_b: usize) -> Result<ComplexVector> {
    let n = circuit.d_a;
    if psi.len() != n * d_b {
        return Err(Error::DimensionMismatch { expected: n * d_b, got: psi.len() });
    }
    let d = circuit.d;
    let mut input = ComplexVector::zeros(n * d * d_b);
    for i in 0..n {
        for b in 0..d_b {
            input[(i * d) * d_b + b] = psi[i * d_b + b];
        }
    }
    Ok(apply_first(&circuit.phi, &input, d_b))
}

/// `(I_A ⊗ ⟨t|) v` for `v` on `A ⊗ T`.
fn contract_target(v: &ComplexVector, target: &ComplexVector, d_a: usize) -> ComplexVector {
    let m = target.len();
    ComplexVector::from_fn(d_a, |i, _| (0..m).fold(ZERO, |acc, r| acc + target[r].conj() * v[i * m + r]))
}

/// Normalized junk state and fidelity `‖(I ⊗ ⟨ψ_target|) out‖²`.
pub fn extract_junk(out: &ComplexVector, target: &Ket, d_a: usize) -> (Ket, f64) {
    let j = contract_target(out, target.amplitudes(), d_a);
    let fidelity = j.norm_squared();
    let junk = Ket::normalized(j).unwrap_or_else(|_| Ket::basis(d_a, 0));
    (junk, fidelity)
}

/// Fidelity of `Φ(A_{x,m} ⊗ I)|ψ⟩|0⟩` with `|junk⟩ ⊗ ([σ]_m ⊗ I)|ψ_target⟩` for
/// every subspace operator `A_{x,m} = Π_{i|x} - Π_{j|x}`, `x ∈ {0, 1, 2}`.
///
/// Setting 0 uses the pairs of setting 1 with `[σ_z]_m`; settings 1 and 2 use
/// `[σ_x]_m` on their own pairs. The overlap is normalized by the ideal side.
pub fn certify_measurements(
    circuit: &IsometryCircuit,
    psi: &Ket,
    meas: &MeasurementSet,
    c: &SchmidtCoefficients,
    junk: &Ket,
) -> Result<BTreeMap<(usize, usize), f64>> {
    let d = c.d();
    if circuit.d != d || meas.d_a() != circuit.d_a || junk.dim() != circuit.d_a {
        return Err(Error::DimensionMismatch { expected: circuit.d_a, got: meas.d_a() });
    }
    let target = c.target_ket();
    let mut out = BTreeMap::new();
    let mut settings = vec![0];
    settings.extend(families(d, meas.settings()));
    for x in settings {
        let family = if x == 0 { 1 } else { x };
        for (m, (i, j)) in pairs(d, family).into_iter().enumerate() {
            let a_op = meas.get(x, i) - meas.get(x, j);
            let (z, xm) = block_paulis(d, i, j);
            let sigma = if x == 0 { z } else { xm };
            let ideal_b = apply_first(&sigma, target.amplitudes(), d);
            let ideal = crate::qmath::tensor_vec(junk.amplitudes(), &ideal_b);
            let norm_ideal = ideal.norm_squared();
            if norm_ideal < MIN_PAIR_WEIGHT {
                return Err(Error::Invalid(format!("ideal side of ({x}, {m}) has zero norm")));
            }
            let moved = apply_first(&a_op, psi.amplitudes(), d);
            let actual = apply_isometry(circuit, &moved, d)?;
            let overlap = ideal.dotc(&actual).norm_sqr();
            let fid = overlap / (norm_ideal * norm_ideal.max(actual.norm_squared()));
            out.insert((x, m), fid);
        }
    }
    Ok(out)
}

/// Reads `c_k = √(tr σ_{k|0})` and cross-checks each pair's `sin2θ_m` against
/// the coherence `tr((σ_{i|x} - σ_{j|x}) X_{ij}) / (c_i² + c_j²)`.
pub fn reconstruct_coefficients(asm: &Assemblage, tol: f64) -> Result<SchmidtCoefficients> {
    let d = asm.outcomes();
    if asm.d_b() != d || d < 2 || asm.settings() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "assemblage (d={}, outcomes={}, settings={}) is not a certification assemblage",
            asm.d_b(),
            d,
            asm.settings()
        )));
    }
    let traces: Vec<f64> = (0..d).map(|k| trace(asm.get(0, k)).re.max(0.0)).collect();
    for x in families(d, asm.settings()) {
        for (i, j) in pairs(d, x) {
            let weight = traces[i] + traces[j];
            if weight < MIN_PAIR_WEIGHT {
                return Err(Error::Invalid(format!("pair ({i}, {j}) has zero weight")));
            }
            let from_traces = 2.0 * (traces[i] * traces[j]).sqrt() / weight;
            let (_, xm) = block_paulis(d, i, j);
            let coherence = trace(&((asm.get(x, i) - asm.get(x, j)) * xm)).re / weight;
            if (coherence - from_traces).abs() > tol {
                return Err(Error::CrossCheck(format!(
                    "pair ({i}, {j}) of setting {x}: sin2θ is {from_traces} from traces but {coherence} from coherence"
                )));
            }
        }
    }
    let raw: Vec<f64> = traces.iter().map(|t| t.sqrt()).collect();
    SchmidtCoefficients::normalized(&raw)
}

/// Input to [`certify_state`].
#[derive(Debug, Clone)]
pub enum StateInput {
    Pure(Ket),
    Mixed(DensityMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub structure_residual: f64,
    pub subspace_violations: Vec<SubspaceViolation>,
    /// `max |value - target|` over the subspace checks.
    pub violation_residual: f64,
    pub sufficient_residual: f64,
    pub state_fidelity: f64,
    pub junk: Ket,
    pub measurement_fidelities: BTreeMap<(usize, usize), f64>,
    pub tol: f64,
    pub passed: bool,
}

/// Everything the pipeline builds on the way to a report.
#[derive(Debug, Clone)]
pub struct CertificationRun {
    pub report: CertificationReport,
    pub assemblage: Assemblage,
    pub ops: CertificationOperators,
    pub circuit: IsometryCircuit,
    /// The pure state the operators act on, on `A ⊗ B` (or `E ⊗ A ⊗ B` for mixed input).
    pub psi: Ket,
    pub meas: MeasurementSet,
}

/// Runs the full pipeline: assemblage, structure check, subspace violations,
/// operators, sufficient condition, isometry and measurement fidelities.
///
/// A mixed input is purified first; Alice's measurements then act as
/// `I_E ⊗ M` on the enlarged register.
pub fn certify_state(
    input: &StateInput,
    dims: BipartiteDims,
    meas: &MeasurementSet,
    c: &SchmidtCoefficients,
    tol: f64,
) -> Result<CertificationReport> {
    certify_state_run(input, dims, meas, c, tol).map(|r| r.report)
}

pub fn certify_state_run(
    input: &StateInput,
    dims: BipartiteDims,
    meas: &MeasurementSet,
    c: &SchmidtCoefficients,
    tol: f64,
) -> Result<CertificationRun> {
    let d = c.d();
    if dims.b != d {
        return Err(Error::DimensionMismatch { expected: d, got: dims.b });
    }
    if meas.d_a() != dims.a {
        return Err(Error::DimensionMismatch { expected: dims.a, got: meas.d_a() });
    }
    let (psi, meas) = match input {
        StateInput::Pure(k) => (k.clone(), meas.clone()),
        StateInput::Mixed(rho) => {
            if rho.dim() != dims.joint() {
                return Err(Error::DimensionMismatch { expected: dims.joint(), got: rho.dim() });
            }
            let (k, pdims) = purify(rho);
            (k, meas.lift(pdims.a))
        }
    };
    let dims = BipartiteDims::new(meas.d_a(), d)?;
    let asm = assemblage_from_ket(&psi, dims, &meas)?;
    let ideal = ideal_assemblage(c).truncate(asm.settings());
    let structure_residual = assemblage_distance(&asm, &ideal)?;
    let subspace = subspace_violations(&asm, c)?;
    let violation_residual = subspace.iter().map(|v| (v.value - v.target).abs()).fold(0.0, f64::max);
    let ops = build_certification_operators(&meas, d)?;
    let sufficient_residual = check_sufficient_condition(&ops, &psi, c)?;
    let circuit = swap_isometry(&ops);
    let out = apply_isometry(&circuit, psi.amplitudes(), d)?;
    let (junk, state_fidelity) = extract_junk(&out, &c.target_ket(), dims.a);
    let measurement_fidelities = certify_measurements(&circuit, &psi, &meas, c, &junk)?;
    let min_meas = measurement_fidelities.values().copied().fold(1.0, f64::min);
    let passed = structure_residual <= tol
        && violation_residual <= tol
        && sufficient_residual <= tol
        && 1.0 - state_fidelity <= tol
        && 1.0 - min_meas <= tol;
    let report = CertificationReport {
        structure_residual,
        subspace_violations: subspace,
        violation_residual,
        sufficient_residual,
        state_fidelity,
        junk,
        measurement_fidelities,
        tol,
        passed,
    };
    Ok(CertificationRun { report, assemblage: asm, ops, circuit, psi, meas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemblage::{assemblage_from, two_qubit_state};
    use crate::qmath::{pauli_x, tensor, ComplexVector};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_8;

    fn random_coeffs(d: usize, rng: &mut impl Rng) -> SchmidtCoefficients {
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
        SchmidtCoefficients::normalized(&raw).unwrap()
    }

    fn ideal_ops(d: usize) -> CertificationOperators {
        build_certification_operators(&ideal_measurements(d).unwrap(), d).unwrap()
    }

    fn embed_ket(psi: &Ket, d_a: usize, extra: usize, d_b: usize) -> Ket {
        let mut v = ComplexVector::zeros((d_a + extra) * d_b);
        for i in 0..d_a * d_b {
            v[i] = psi.amplitudes()[i];
        }
        Ket::new(v).unwrap()
    }

    #[test]
    fn ideal_measurement_examples() {
        let m = ideal_measurements(2).unwrap();
        let quarter = ComplexMatrix::from_element(2, 2, real(0.5));
        assert!(max_abs(&(m.get(1, 0) - &quarter)) < 1e-15);
        let minus = ComplexMatrix::from_row_slice(2, 2, &[real(0.5), real(-0.5), real(-0.5), real(0.5)]);
        assert!(max_abs(&(m.get(1, 1) - &minus)) < 1e-15);

        let m = ideal_measurements(3).unwrap();
        assert!(max_abs(&(m.get(1, 2) - basis_projector(3, 2))) < 1e-15);
        assert_abs_diff_eq!(m.get(1, 0)[(0, 1)].re, 0.5, epsilon = 1e-15);

        let m = ideal_measurements(4).unwrap();
        assert_abs_diff_eq!(m.get(2, 1)[(1, 2)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(2, 3)[(3, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(2, 0)[(3, 0)].re, -0.5, epsilon = 1e-15);
        assert!(ideal_measurements(1).is_err());
    }

    #[test]
    fn violations_maximally_entangled_qubit() {
        let c = SchmidtCoefficients::maximally_entangled(2).unwrap();
        let v = subspace_violations(&ideal_assemblage(&c), &c).unwrap();
        assert_eq!(v.len(), 1);
        assert_abs_diff_eq!(v[0].value, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0].target, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn violations_maximally_entangled_d4() {
        let c = SchmidtCoefficients::maximally_entangled(4).unwrap();
        let v = subspace_violations(&ideal_assemblage(&c), &c).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.iter().any(|s| s.pair == (3, 0)));
        for s in &v {
            assert_abs_diff_eq!(s.value, 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.beta, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn raw_violation_scales_with_pair_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in 2..=6 {
            let c = random_coeffs(d, &mut rng);
            let cs = c.as_slice();
            for s in subspace_violations(&ideal_assemblage(&c), &c).unwrap() {
                let (i, j) = s.pair;
                let w = cs[i] * cs[i] + cs[j] * cs[j];
                assert_abs_diff_eq!(s.raw_value, 2.0 * s.beta * w, epsilon = 1e-10);
                assert_abs_diff_eq!(s.value, s.target, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn qubit_operators() {
        let ops = ideal_ops(2);
        assert!(max_abs(&(&ops.xbig[1] - pauli_x())) < 1e-15);
        assert!(max_abs(&(&ops.p[0] - basis_projector(2, 0))) < 1e-15);
        assert!(max_abs(&(&ops.p[1] - basis_projector(2, 1))) < 1e-15);
    }

    #[test]
    fn big_unitaries_map_k_to_zero() {
        for d in 2..=6 {
            let ops = ideal_ops(d);
            assert!(ops.invariant_residual() < 1e-12);
            assert_eq!(ops.xbig[0], ComplexMatrix::identity(d, d));
            for k in 0..d {
                let v = &ops.xbig[k] * crate::qmath::basis_vector(d, k);
                assert!((v - crate::qmath::basis_vector(d, 0)).norm() < 1e-12, "d={d} k={k}");
            }
        }
        let ops = ideal_ops(4);
        let expected = &ops.xu[0] * &ops.yu[0] * &ops.xu[1];
        assert!(max_abs(&(&ops.xbig[3] - expected)) < 1e-15);
    }

    #[test]
    fn sufficient_condition_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 2..=6 {
            let c = random_coeffs(d, &mut rng);
            let r = check_sufficient_condition(&ideal_ops(d), &c.target_ket(), &c).unwrap();
            assert!(r < 1e-12, "d={d}: {r}");
        }
    }

    #[test]
    fn sufficient_condition_with_identity_unitaries() {
        let c = SchmidtCoefficients::normalized(&[0.4, 0.5, 0.6, 0.7]).unwrap();
        let mut ops = ideal_ops(4);
        ops.xbig = vec![ComplexMatrix::identity(4, 4); 4];
        let r = check_sufficient_condition(&ops, &c.target_ket(), &c).unwrap();
        assert!(r >= c.as_slice()[1]);
    }

    #[test]
    fn sufficient_condition_under_white_noise() {
        let d = 2;
        let c = SchmidtCoefficients::maximally_entangled(d).unwrap();
        let eta = 1e-4;
        let rho = DensityMatrix::from_ket(&c.target_ket()).matrix().scale(1.0 - eta)
            + ComplexMatrix::identity(4, 4).scale(eta / 4.0);
        let (psi, pdims) = purify(&DensityMatrix::new(rho).unwrap());
        let ops = build_certification_operators(&ideal_measurements(d).unwrap().lift(pdims.a), d).unwrap();
        let r = check_sufficient_condition(&ops, &psi, &c).unwrap();
        assert!(r > 0.0);
        assert!(r < 10.0 * eta.sqrt());
    }

    #[test]
    fn fourier_is_unitary() {
        for d in 2..=6 {
            assert!(fourier(d).is_unitary(1e-13));
        }
    }

    #[test]
    fn isometry_extracts_qubit_state() {
        let theta = 0.37;
        let ops = ideal_ops(2);
        let circuit = swap_isometry(&ops);
        assert!(circuit.phi.is_unitary(1e-12));
        let psi = two_qubit_state(theta);
        let out = apply_isometry(&circuit, psi.amplitudes(), 2).unwrap();
        let expected = Ket::basis(2, 0).tensor(&psi);
        assert!((out - expected.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn isometry_extracts_qutrit_state() {
        let c = SchmidtCoefficients::maximally_entangled(3).unwrap();
        let circuit = swap_isometry(&ideal_ops(3));
        let out = apply_isometry(&circuit, c.target_ket().amplitudes(), 3).unwrap();
        let (_, fid) = extract_junk(&out, &c.target_ket(), 3);
        assert_abs_diff_eq!(fid, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn isometry_output_matches_telescoped_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for d in 2..=5 {
            let ops = ideal_ops(d);
            let circuit = swap_isometry(&ops);
            let psi = crate::qmath::random_ket(d * d, &mut rng);
            let out = apply_isometry(&circuit, psi.amplitudes(), d).unwrap();
            let mut expected = ComplexVector::zeros(d * d * d);
            for j in 0..d {
                let moved = apply_first(&(&ops.xbig[j] * &ops.p[j]), psi.amplitudes(), d);
                for a in 0..d {
                    for b in 0..d {
                        expected[(a * d + j) * d + b] += moved[a * d + b];
                    }
                }
            }
            assert!((out - expected).norm() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn certify_ideal_d5() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let c = random_coeffs(5, &mut rng);
        let report = certify_state(
            &StateInput::Pure(c.target_ket()),
            BipartiteDims::new(5, 5).unwrap(),
            &ideal_measurements(5).unwrap(),
            &c,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.state_fidelity >= 1.0 - 1e-10);
        assert!(report.measurement_fidelities.values().all(|&f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn certify_maximally_entangled_qubit_from_density() {
        let c = SchmidtCoefficients::maximally_entangled(2).unwrap();
        let report = certify_state(
            &StateInput::Mixed(DensityMatrix::from_ket(&c.target_ket())),
            BipartiteDims::new(2, 2).unwrap(),
            &ideal_measurements(2).unwrap(),
            &c,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(report.passed);
        assert_abs_diff_eq!(report.subspace_violations[0].target, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn certify_product_state_fails() {
        let c = SchmidtCoefficients::normalized(&[0.5, 0.6, 0.7, 0.4]).unwrap();
        let cs = c.as_slice();
        let report = certify_state(
            &StateInput::Pure(Ket::basis(16, 0)),
            BipartiteDims::new(4, 4).unwrap(),
            &ideal_measurements(4).unwrap(),
            &c,
            DEFAULT_TOL,
        )
        .unwrap();
        let min_coh = (0..2).map(|m| cs[2 * m] * cs[2 * m + 1]).fold(f64::INFINITY, f64::min);
        assert!(report.structure_residual >= min_coh);
        assert!(!report.passed);
    }

    #[test]
    fn certify_embedded_black_box() {
        let c = SchmidtCoefficients::normalized(&[0.3, 0.6, 0.5, 0.55]).unwrap();
        let extra = 3;
        let psi = embed_ket(&c.target_ket(), 4, extra, 4);
        let meas = ideal_measurements(4).unwrap().embed(extra);
        let report =
            certify_state(&StateInput::Pure(psi), BipartiteDims::new(4 + extra, 4).unwrap(), &meas, &c, DEFAULT_TOL)
                .unwrap();
        assert!(report.passed);
        assert_abs_diff_eq!(report.state_fidelity, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn measurement_fidelities_ideal() {
        for d in [2, 4] {
            let c = SchmidtCoefficients::maximally_entangled(d).unwrap();
            let run = certify_state_run(
                &StateInput::Pure(c.target_ket()),
                BipartiteDims::new(d, d).unwrap(),
                &ideal_measurements(d).unwrap(),
                &c,
                DEFAULT_TOL,
            )
            .unwrap();
            let fids = &run.report.measurement_fidelities;
            assert!(fids.contains_key(&(1, 0)));
            for f in fids.values() {
                assert_abs_diff_eq!(*f, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn measurement_fidelities_under_noise() {
        let d = 2;
        let c = SchmidtCoefficients::maximally_entangled(d).unwrap();
        let eta = 1e-4;
        let rho = DensityMatrix::from_ket(&c.target_ket()).matrix().scale(1.0 - eta)
            + ComplexMatrix::identity(4, 4).scale(eta / 4.0);
        let report = certify_state(
            &StateInput::Mixed(DensityMatrix::new(rho).unwrap()),
            BipartiteDims::new(2, 2).unwrap(),
            &ideal_measurements(2).unwrap(),
            &c,
            DEFAULT_TOL,
        )
        .unwrap();
        for f in report.measurement_fidelities.values() {
            assert!(*f >= 1.0 - 10.0 * eta.sqrt() && *f <= 1.0 + 1e-10);
        }
        assert!(!report.passed);
    }

    #[test]
    fn reconstruct_examples() {
        let c = SchmidtCoefficients::new(vec![0.5, 0.75f64.sqrt()]).unwrap();
        let r = reconstruct_coefficients(&ideal_assemblage(&c), 1e-9).unwrap();
        assert_abs_diff_eq!(r.as_slice()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.as_slice()[1], 0.75f64.sqrt(), epsilon = 1e-12);

        for d in 2..=6 {
            let c = SchmidtCoefficients::maximally_entangled(d).unwrap();
            let r = reconstruct_coefficients(&ideal_assemblage(&c), 1e-9).unwrap();
            assert!(r.as_slice().iter().all(|x| (x - 1.0 / (d as f64).sqrt()).abs() < 1e-12));
        }
    }

    #[test]
    fn reconstruct_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for d in 2..=6 {
            for _ in 0..100 {
                let c = random_coeffs(d, &mut rng);
                let r = reconstruct_coefficients(&ideal_assemblage(&c), 1e-9).unwrap();
                let err = r.as_slice().iter().zip(c.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-10);
            }
        }
    }

    #[test]
    fn reconstruct_rejects_missing_coherence() {
        let meas = ideal_measurements(2).unwrap();
        let rho = DensityMatrix::new(
            tensor(&basis_projector(2, 0), &basis_projector(2, 0)).scale(0.5)
                + tensor(&basis_projector(2, 1), &basis_projector(2, 1)).scale(0.5),
        )
        .unwrap();
        let asm = assemblage_from(&rho, BipartiteDims::new(2, 2).unwrap(), &meas).unwrap();
        assert!(matches!(reconstruct_coefficients(&asm, 1e-9), Err(Error::CrossCheck(_))));
    }

    #[test]
    fn qubit_certification_at_pi_over_8() {
        let c = SchmidtCoefficients::qubit(FRAC_PI_8).unwrap();
        let report = certify_state(
            &StateInput::Pure(c.target_ket()),
            BipartiteDims::new(2, 2).unwrap(),
            &ideal_measurements(2).unwrap(),
            &c,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(report.passed);
        assert_abs_diff_eq!(report.subspace_violations[0].value, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    }
}
