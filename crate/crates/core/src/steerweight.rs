//! Steerable weight by a dense log-det barrier interior-point method.
//!
//! Solves
//!
//! ```text
//! maximize   Σ_λ tr σ_λ
//! subject to σ_{a|x} - Σ_λ D(a|x,λ) σ_λ ⪰ 0,   σ_λ ⪰ 0
//! ```
//!
//! and reports `sw = 1 - optimum`. Each `σ_λ` is first restricted to the
//! intersection of the ranges of the `σ_{λ(x)|x}` it must fit under, and each
//! slack to the range of its `σ_{a|x}`; the reduced problem then has a strictly
//! feasible interior.

use nalgebra::{Cholesky, DMatrix};

use crate::assemblage::{consistency_check, Assemblage};
use crate::error::{Error, Result};
use crate::qmath::{eigh, min_eigenvalue, real, trace, ComplexMatrix, C64, ONE};

/// Upper limit on the number of deterministic strategies.
pub const MAX_STRATEGIES: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-7;
/// Cap on barrier-parameter updates.
pub const MAX_OUTER_ITERATIONS: usize = 200;
/// Cap on Newton steps within one centering.
pub const MAX_NEWTON_STEPS: usize = 200;
/// Eigenvalues below this are treated as outside a matrix's range.
pub const RANGE_TOL: f64 = 1e-9;

/// All deterministic response functions `λ: x ↦ a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategySet {
    settings: usize,
    outcomes: usize,
    table: Vec<Vec<usize>>,
}

impl DeterministicStrategySet {
    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Row `λ` lists the outcome for each setting.
    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    /// `D(a|x, λ)`.
    pub fn d(&self, a: usize, x: usize, lambda: usize) -> f64 {
        if self.table[lambda][x] == a {
            1.0
        } else {
            0.0
        }
    }
}

/// Strategy `λ` answers `a_x = ⌊λ / outcomes^x⌋ mod outcomes`.
pub fn deterministic_strategies(settings: usize, outcomes: usize) -> Result<DeterministicStrategySet> {
    let count = (0..settings).try_fold(1usize, |acc, _| acc.checked_mul(outcomes));
    let count = match count {
        Some(n) if n <= MAX_STRATEGIES && outcomes > 0 => n,
        _ => {
            return Err(Error::OutOfRange(format!(
                "{outcomes}^{settings} strategies exceed the cap of {MAX_STRATEGIES}"
            )))
        }
    };
    let table = (0..count)
        .map(|lambda| {
            let mut rest = lambda;
            (0..settings)
                .map(|_| {
                    let a = rest % outcomes;
                    rest /= outcomes;
                    a
                })
                .collect()
        })
        .collect();
    Ok(DeterministicStrategySet { settings, outcomes, table })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub sigma_lambda: Vec<ComplexMatrix>,
    pub primal: f64,
    pub sw: f64,
    pub iterations: usize,
    pub gap: f64,
}

/// Smallest eigenvalue over the slacks `σ_{a|x} - Σ_λ D(a|x,λ) σ_λ`.
pub fn slack_min_eigenvalue(asm: &Assemblage, strategies: &DeterministicStrategySet, sigma_lambda: &[ComplexMatrix]) -> f64 {
    let mut worst = f64::INFINITY;
    for x in 0..asm.settings() {
        for a in 0..asm.outcomes() {
            let mut s = asm.get(x, a).clone();
            for (lambda, sl) in sigma_lambda.iter().enumerate() {
                if strategies.table()[lambda][x] == a {
                    s -= sl;
                }
            }
            worst = worst.min(min_eigenvalue(&s));
        }
    }
    worst
}

/// Orthonormal basis (as columns) of the eigenvectors of `m` with eigenvalue above `tol`.
fn range_basis(m: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let (vals, vecs) = eigh(m);
    let cols: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > tol).collect();
    ComplexMatrix::from_fn(m.nrows(), cols.len(), |i, j| vecs[(i, cols[j])])
}

/// Orthonormal basis of the eigenvectors of `m` with eigenvalue below `tol`.
fn kernel_basis(m: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let (vals, vecs) = eigh(m);
    let cols: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] < tol).collect();
    ComplexMatrix::from_fn(m.nrows(), cols.len(), |i, j| vecs[(i, cols[j])])
}

/// Real coordinate basis of `r × r` Hermitian matrices.
fn hermitian_basis(r: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(r * r);
    for k in 0..r {
        let mut e = ComplexMatrix::zeros(r, r);
        e[(k, k)] = ONE;
        out.push(e);
    }
    for k in 0..r {
        for l in (k + 1)..r {
            let mut e = ComplexMatrix::zeros(r, r);
            e[(k, l)] = ONE;
            e[(l, k)] = ONE;
            out.push(e);
            let mut e = ComplexMatrix::zeros(r, r);
            e[(k, l)] = C64::new(0.0, 1.0);
            e[(l, k)] = C64::new(0.0, -1.0);
            out.push(e);
        }
    }
    out
}

/// `Re tr(A B)`.
fn re_tr_prod(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (a[(i, j)], b[(j, i)]);
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Real symmetric embedding `[[Re, -Im], [Im, Re]]` of a Hermitian matrix.
fn real_embedding(m: &ComplexMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = (m[(i % n, j % n)] + m[(j % n, i % n)].conj()) * 0.5;
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn real_cholesky(m: &ComplexMatrix) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let chol = Cholesky::new(real_embedding(m))?;
    let l = chol.l_dirty();
    if (0..l.nrows()).all(|k| l[(k, k)] > 0.0) {
        Some(chol)
    } else {
        None
    }
}

fn chol_logdet(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let l = chol.l_dirty();
    // The embedding doubles every eigenvalue's multiplicity.
    (0..l.nrows()).map(|k| l[(k, k)].ln()).sum()
}

/// `(log det M, M⁻¹)` for Hermitian positive definite `M`, `None` otherwise.
fn logdet_inv(m: &ComplexMatrix) -> Option<(f64, ComplexMatrix)> {
    let n = m.nrows();
    if n == 0 {
        return Some((0.0, m.clone()));
    }
    let chol = real_cholesky(m)?;
    let inv = chol.inverse();
    let out = ComplexMatrix::from_fn(n, n, |i, j| C64::new(inv[(i, j)], inv[(i + n, j)]));
    Some((chol_logdet(&chol), out))
}

fn logdet(m: &ComplexMatrix) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(0.0);
    }
    real_cholesky(m).map(|c| chol_logdet(&c))
}

/// A face-reduced block `σ_λ = B Y B†`.
struct Block {
    lambda: usize,
    b: ComplexMatrix,
    offset: usize,
    basis: Vec<ComplexMatrix>,
}

/// A slack restricted to `range(σ_{a|x})`: `S = Q†σQ - Σ K Y K†` with `K = Q†B`.
struct Slack {
    base: ComplexMatrix,
    /// `(block index, K)` for every block with `λ(x) = a`.
    terms: Vec<(usize, ComplexMatrix)>,
}

struct Problem {
    blocks: Vec<Block>,
    slacks: Vec<Slack>,
    nvars: usize,
    /// Number of barrier terms counted by dimension, `m` in the gap `m/t`.
    barrier_dim: usize,
}

impl Problem {
    fn build(asm: &Assemblage, strategies: &DeterministicStrategySet) -> Problem {
        let d = asm.d_b();
        let ranges: Vec<ComplexMatrix> = asm.elements().iter().map(|s| range_basis(s, RANGE_TOL)).collect();
        let id = ComplexMatrix::identity(d, d);
        let mut blocks = Vec::new();
        let mut nvars = 0;
        for (lambda, row) in strategies.table().iter().enumerate() {
            let mut excluded = ComplexMatrix::zeros(d, d);
            for (x, &a) in row.iter().enumerate() {
                let q = &ranges[x * asm.outcomes() + a];
                excluded += &id - q * q.adjoint();
            }
            let b = kernel_basis(&excluded, 1e-8);
            let r = b.ncols();
            if r == 0 {
                continue;
            }
            blocks.push(Block { lambda, b, offset: nvars, basis: hermitian_basis(r) });
            nvars += r * r;
        }
        let mut slacks = Vec::new();
        for x in 0..asm.settings() {
            for a in 0..asm.outcomes() {
                let q = &ranges[x * asm.outcomes() + a];
                if q.ncols() == 0 {
                    continue;
                }
                let base = crate::qmath::hermitian_part(&(q.adjoint() * asm.get(x, a) * q));
                let terms = blocks
                    .iter()
                    .enumerate()
                    .filter(|(_, blk)| strategies.table()[blk.lambda][x] == a)
                    .map(|(i, blk)| (i, q.adjoint() * &blk.b))
                    .collect();
                slacks.push(Slack { base, terms });
            }
        }
        let barrier_dim =
            blocks.iter().map(|b| b.b.ncols()).sum::<usize>() + slacks.iter().map(|s| s.base.nrows()).sum::<usize>();
        Problem { blocks, slacks, nvars, barrier_dim }
    }

    fn block_matrix(&self, k: usize, x: &[f64]) -> ComplexMatrix {
        let blk = &self.blocks[k];
        let r = blk.b.ncols();
        blk.basis
            .iter()
            .enumerate()
            .fold(ComplexMatrix::zeros(r, r), |acc, (i, e)| acc + e * real(x[blk.offset + i]))
    }

    fn slack_matrix(&self, s: &Slack, ys: &[ComplexMatrix]) -> ComplexMatrix {
        s.terms.iter().fold(s.base.clone(), |acc, (k, kmat)| acc - kmat * &ys[*k] * kmat.adjoint())
    }

    /// `-t Σ tr Y - Σ log det Y - Σ log det S`, or `None` outside the domain.
    fn objective(&self, x: &[f64], t: f64) -> Option<f64> {
        let ys: Vec<ComplexMatrix> = (0..self.blocks.len()).map(|k| self.block_matrix(k, x)).collect();
        let mut f = 0.0;
        for y in &ys {
            f -= t * trace(y).re + logdet(y)?;
        }
        for s in &self.slacks {
            f -= logdet(&self.slack_matrix(s, &ys))?;
        }
        Some(f)
    }

    fn primal_value(&self, x: &[f64]) -> f64 {
        (0..self.blocks.len()).map(|k| trace(&self.block_matrix(k, x)).re).sum()
    }

    /// Gradient and Hessian of the barrier objective in the real coordinates.
    fn derivatives(&self, x: &[f64], t: f64) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let n = self.nvars;
        let mut g = vec![0.0; n];
        let mut h = DMatrix::<f64>::zeros(n, n);
        let ys: Vec<ComplexMatrix> = (0..self.blocks.len()).map(|k| self.block_matrix(k, x)).collect();
        let mut grad_mats: Vec<ComplexMatrix> = Vec::with_capacity(ys.len());
        for (blk, y) in self.blocks.iter().zip(&ys) {
            let r = y.nrows();
            let (_, yinv) = logdet_inv(y)?;
            grad_mats.push(-ComplexMatrix::identity(r, r).scale(t) - &yinv);
            let prod: Vec<ComplexMatrix> = blk.basis.iter().map(|e| &yinv * e).collect();
            for i in 0..prod.len() {
                for j in i..prod.len() {
                    let v = re_tr_prod(&prod[i], &prod[j]);
                    h[(blk.offset + i, blk.offset + j)] += v;
                    if i != j {
                        h[(blk.offset + j, blk.offset + i)] += v;
                    }
                }
            }
        }
        for s in &self.slacks {
            let (_, sinv) = logdet_inv(&self.slack_matrix(s, &ys))?;
            let mut idx = Vec::new();
            let mut mats = Vec::new();
            for (k, kmat) in &s.terms {
                grad_mats[*k] += kmat.adjoint() * &sinv * kmat;
                let blk = &self.blocks[*k];
                let left = &sinv * kmat;
                for (i, e) in blk.basis.iter().enumerate() {
                    idx.push(blk.offset + i);
                    mats.push(&left * e * kmat.adjoint());
                }
            }
            for i in 0..mats.len() {
                for j in i..mats.len() {
                    let v = re_tr_prod(&mats[i], &mats[j]);
                    h[(idx[i], idx[j])] += v;
                    if i != j {
                        h[(idx[j], idx[i])] += v;
                    }
                }
            }
        }
        for (blk, gm) in self.blocks.iter().zip(&grad_mats) {
            for (i, e) in blk.basis.iter().enumerate() {
                g[blk.offset + i] = re_tr_prod(gm, e);
            }
        }
        Some((g, h))
    }

    /// Newton direction `-H⁻¹g` with Jacobi scaling.
    fn newton_step(g: &[f64], h: &DMatrix<f64>) -> Option<Vec<f64>> {
        let n = g.len();
        let scale: Vec<f64> = (0..n).map(|i| 1.0 / h[(i, i)].max(1e-300).sqrt()).collect();
        let scaled = DMatrix::from_fn(n, n, |i, j| h[(i, j)] * scale[i] * scale[j]);
        let rhs = nalgebra::DVector::from_fn(n, |i, _| -g[i] * scale[i]);
        let mut ridge = 0.0;
        for _ in 0..8 {
            let mut m = scaled.clone();
            for i in 0..n {
                m[(i, i)] += ridge;
            }
            if let Some(chol) = Cholesky::new(m) {
                let z = chol.solve(&rhs);
                return Some((0..n).map(|i| z[i] * scale[i]).collect());
            }
            ridge = if ridge == 0.0 { 1e-14 } else { ridge * 100.0 };
        }
        None
    }

    fn strict_start(&self) -> Vec<f64> {
        let mut c = 1.0;
        loop {
            let mut x = vec![0.0; self.nvars];
            for blk in &self.blocks {
                for k in 0..blk.b.ncols() {
                    x[blk.offset + k] = c;
                }
            }
            if self.objective(&x, 0.0).is_some() || c < 1e-300 {
                return x;
            }
            c *= 0.5;
        }
    }
}

/// Steerable weight of `asm` with duality gap at most `tol`.
pub fn steerable_weight(asm: &Assemblage, tol: f64) -> Result<SdpSolution> {
    let report = consistency_check(asm, 1e-8);
    if !report.passed {
        return Err(Error::Invalid(format!("assemblage fails consistency checks: {report:?}")));
    }
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tol = {tol} must be positive")));
    }
    let strategies = deterministic_strategies(asm.settings(), asm.outcomes())?;
    let problem = Problem::build(asm, &strategies);
    let d = asm.d_b();
    let mut sigma_lambda = vec![ComplexMatrix::zeros(d, d); strategies.len()];
    if problem.nvars == 0 {
        return Ok(SdpSolution { sigma_lambda, primal: 0.0, sw: 1.0, iterations: 0, gap: 0.0 });
    }

    let mut x = problem.strict_start();
    let m = problem.barrier_dim as f64;
    let mut t = 1.0;
    let mut iterations = 0;
    let mut outer = 0;
    loop {
        // Centering.
        let mut steps = 0;
        loop {
            let (g, h) = problem
                .derivatives(&x, t)
                .ok_or(Error::NonConvergence { iterations, gap: m / t })?;
            let dx = Problem::newton_step(&g, &h).ok_or(Error::NonConvergence { iterations, gap: m / t })?;
            let slope: f64 = g.iter().zip(&dx).map(|(a, b)| a * b).sum();
            if -slope / 2.0 <= 1e-10 {
                break;
            }
            let f0 = problem.objective(&x, t).ok_or(Error::NonConvergence { iterations, gap: m / t })?;
            let mut s = 1.0;
            let mut decrease = None;
            while s > 1e-16 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + s * b).collect();
                if let Some(f1) = problem.objective(&trial, t) {
                    if f1 <= f0 + 0.25 * s * slope {
                        x = trial;
                        decrease = Some(f0 - f1);
                        break;
                    }
                }
                s *= 0.5;
            }
            iterations += 1;
            steps += 1;
            // Stalled at working precision: treat as centered.
            match decrease {
                Some(df) if df > 1e-13 * f0.abs().max(1.0) => {}
                _ => break,
            }
            if steps >= MAX_NEWTON_STEPS {
                return Err(Error::NonConvergence { iterations, gap: m / t });
            }
        }
        outer += 1;
        let gap = m / t;
        if gap <= tol {
            break;
        }
        if outer >= MAX_OUTER_ITERATIONS {
            return Err(Error::NonConvergence { iterations, gap });
        }
        t *= 10.0;
    }

    for (k, blk) in problem.blocks.iter().enumerate() {
        let y = problem.block_matrix(k, &x);
        sigma_lambda[blk.lambda] = crate::qmath::hermitian_part(&(&blk.b * y * blk.b.adjoint()));
    }
    let primal = problem.primal_value(&x);
    Ok(SdpSolution { sigma_lambda, primal, sw: 1.0 - primal, iterations, gap: m / t })
}

/// `clamp((f_val - f_lhs_max) / (f_max - f_lhs_max), 0, 1)`.
pub fn sw_lower_bound_from_violation(f_val: f64, f_max: f64, f_lhs_max: f64) -> Result<f64> {
    let denom = f_max - f_lhs_max;
    if !(denom > 1e-15) {
        return Err(Error::Invalid(format!("f_max = {f_max} must exceed f_lhs_max = {f_lhs_max}")));
    }
    Ok(((f_val - f_lhs_max) / denom).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemblage::{assemblage_from, ideal_assemblage, two_qubit_state, SchmidtCoefficients};
    use crate::certify::ideal_measurements;
    use crate::qmath::{random_density, random_ket, tensor, BipartiteDims, DensityMatrix};
    use crate::tsi::{cert_params_for_theta, local_bound, quantum_bound, tsi_value_of_assemblage, TsiParams};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, SQRT_2};

    fn qubit_tsi_assemblage(theta: f64) -> Assemblage {
        ideal_assemblage(&SchmidtCoefficients::qubit(theta).unwrap()).truncate(2)
    }

    fn white(asm: &Assemblage, v: f64) -> Assemblage {
        let d = asm.d_b();
        let n = asm.outcomes() as f64;
        let noise = Assemblage::new(
            d,
            asm.settings(),
            asm.outcomes(),
            vec![ComplexMatrix::identity(d, d).scale(1.0 / (d as f64 * n)); asm.elements().len()],
        )
        .unwrap();
        asm.mix(&noise, v).unwrap()
    }

    #[test]
    fn strategy_enumeration() {
        let s = deterministic_strategies(2, 2).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.table(), &[vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(deterministic_strategies(3, 4).unwrap().len(), 64);
        let s = deterministic_strategies(3, 3).unwrap();
        for lambda in 0..s.len() {
            for x in 0..3 {
                let total: f64 = (0..3).map(|a| s.d(a, x, lambda)).sum();
                assert_eq!(total, 1.0);
            }
        }
        assert!(deterministic_strategies(5, 7).is_err());
    }

    #[test]
    fn product_state_is_unsteerable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [2, 3] {
            let ra = random_density(d, d, &mut rng);
            let rb = random_density(d, d, &mut rng);
            let rho = DensityMatrix::new(tensor(ra.matrix(), rb.matrix())).unwrap();
            let asm = assemblage_from(&rho, BipartiteDims::new(d, d).unwrap(), &ideal_measurements(d).unwrap())
                .unwrap()
                .truncate(2);
            let sol = steerable_weight(&asm, DEFAULT_TOL).unwrap();
            assert!(sol.sw <= 1e-7, "d={d}: {}", sol.sw);
            assert!(sol.gap <= DEFAULT_TOL);
        }
    }

    #[test]
    fn maximal_violation_has_unit_weight() {
        for theta in [FRAC_PI_4, FRAC_PI_8, PI / 6.0] {
            let sol = steerable_weight(&qubit_tsi_assemblage(theta), DEFAULT_TOL).unwrap();
            assert!(sol.sw >= 1.0 - 1e-4, "theta={theta}: {}", sol.sw);
        }
    }

    #[test]
    fn noisy_bell_weight_decreases_with_noise() {
        let base = qubit_tsi_assemblage(FRAC_PI_4);
        let mut prev = 1.0 + 1e-9;
        for v in [0.05, 0.1, 0.2, 0.3] {
            let sol = steerable_weight(&white(&base, v), DEFAULT_TOL).unwrap();
            assert!(sol.sw <= prev + 1e-7);
            assert!((-1e-9..=1.0 + 1e-8).contains(&sol.sw));
            prev = sol.sw;
        }
    }

    #[test]
    fn returned_solution_is_feasible() {
        let base = qubit_tsi_assemblage(0.5);
        let asm = white(&base, 0.2);
        let sol = steerable_weight(&asm, DEFAULT_TOL).unwrap();
        let strategies = deterministic_strategies(2, 2).unwrap();
        assert!(slack_min_eigenvalue(&asm, &strategies, &sol.sigma_lambda) >= -DEFAULT_TOL);
        for s in &sol.sigma_lambda {
            assert!(min_eigenvalue(s) >= -DEFAULT_TOL);
        }
        let total: f64 = sol.sigma_lambda.iter().map(|s| trace(s).re).sum();
        assert_abs_diff_eq!(total, sol.primal, epsilon = 1e-12);
    }

    #[test]
    fn lhs_model_assemblage_has_zero_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let strategies = deterministic_strategies(3, 2).unwrap();
        let states: Vec<_> = (0..strategies.len()).map(|_| random_density(2, 2, &mut rng).into_matrix()).collect();
        let raw: Vec<f64> = (0..strategies.len()).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let asm = Assemblage::from_lhs_model(2, &weights, strategies.table(), &states).unwrap();
        assert!(steerable_weight(&asm, DEFAULT_TOL).unwrap().sw <= 1e-7);
    }

    #[test]
    fn convexity_on_sampled_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let meas = ideal_measurements(2).unwrap().truncate(2);
        let dims = BipartiteDims::new(2, 2).unwrap();
        for _ in 0..4 {
            let a = assemblage_from(&random_density(4, 2, &mut rng), dims, &meas).unwrap();
            let b = assemblage_from(&random_density(4, 2, &mut rng), dims, &meas).unwrap();
            let t = rng.random_range(0.1..0.9);
            let swa = steerable_weight(&a, DEFAULT_TOL).unwrap().sw;
            let swb = steerable_weight(&b, DEFAULT_TOL).unwrap().sw;
            let swm = steerable_weight(&a.mix(&b, t).unwrap(), DEFAULT_TOL).unwrap().sw;
            assert!(swm <= (1.0 - t) * swa + t * swb + 2.0 * DEFAULT_TOL);
        }
    }

    #[test]
    fn mixing_with_unsteerable_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = qubit_tsi_assemblage(0.6);
        let states: Vec<_> = (0..4).map(|_| random_ket(2, &mut rng).projector()).collect();
        let strategies = deterministic_strategies(2, 2).unwrap();
        let u = Assemblage::from_lhs_model(2, &[0.25; 4], strategies.table(), &states).unwrap();
        let swa = steerable_weight(&a, DEFAULT_TOL).unwrap().sw;
        for t in [0.1, 0.4, 0.7] {
            let sw = steerable_weight(&a.mix(&u, t).unwrap(), DEFAULT_TOL).unwrap().sw;
            assert!(sw <= swa + DEFAULT_TOL);
        }
    }

    #[test]
    fn violation_bound_is_below_weight() {
        let theta = FRAC_PI_8;
        let p = cert_params_for_theta(theta).unwrap();
        let base = qubit_tsi_assemblage(theta);
        for k in 0..6 {
            let asm = white(&base, 0.01 * k as f64);
            let lb = sw_lower_bound_from_violation(
                tsi_value_of_assemblage(&asm, &p).unwrap(),
                quantum_bound(&p),
                local_bound(&p),
            )
            .unwrap();
            let sw = steerable_weight(&asm, DEFAULT_TOL).unwrap().sw;
            assert!(lb <= sw + 2.0 * DEFAULT_TOL, "k={k}: {lb} > {sw}");
        }
    }

    #[test]
    fn violation_bound_examples() {
        assert_eq!(sw_lower_bound_from_violation(3.0, 3.0, 2.0).unwrap(), 1.0);
        assert_eq!(sw_lower_bound_from_violation(2.0, 3.0, 2.0).unwrap(), 0.0);
        let p = TsiParams::new(1.0, SQRT_2).unwrap();
        assert_eq!(sw_lower_bound_from_violation(2.7, quantum_bound(&p), local_bound(&p)).unwrap(), 0.0);
        assert!(sw_lower_bound_from_violation(1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn rejects_invalid_assemblage() {
        let mut asm = qubit_tsi_assemblage(0.3);
        *asm.get_mut(0, 0) = asm.get(0, 0).scale(2.0);
        assert!(matches!(steerable_weight(&asm, DEFAULT_TOL), Err(Error::Invalid(_))));
    }

    #[test]
    fn pure_state_assemblage_from_circuit() {
        let meas = ideal_measurements(2).unwrap().truncate(2);
        let asm = crate::assemblage::assemblage_from_ket(&two_qubit_state(0.3), BipartiteDims::new(2, 2).unwrap(), &meas)
            .unwrap();
        let sol = steerable_weight(&asm, DEFAULT_TOL).unwrap();
        assert!(sol.sw >= 1.0 - 1e-4);
    }
}
