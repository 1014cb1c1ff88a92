//! General measurements on qubits 1–2 at `λ = 0`.
//!
//! Alice's Kraus operators have the form
//! `K(α) = [a I + b·σ₁] ⊗ I₂ + [c I + d·σ₁] ⊗ σ₂ˣ` (tensored with `I₃`),
//! so they commute with every term of `H_B`. Writing `V = (a, b₁, b₂, b₃, c, d₁, d₂, d₃)`
//! and `B_β` for the matching operator basis, `K†K = Σ V̄_β V_γ 𝓜_βγ` with
//! `𝓜_βγ = B_β B_γ`.
//!
//! Bob's loss coefficient is the quadratic form
//! `B_α = −Σ V̄_β R_j tr[𝓜_βγ 𝒪_jk ρ] R_k V_γ` with `𝒪_jk = σ₃ʲ[σ₃ᵏ, H_B]`.
//! Only the part symmetric in `(j, k)` contributes, and [`PMatrix`] stores
//! `𝒫_{(j,β),(k,γ)} = −¼ tr[𝓜_βγ (𝒪_jk + 𝒪_kj) ρ]`, so that
//! `B_α = 2 (V̄ ⊗ R)ᵀ 𝒫 (V ⊗ R)` and
//! the spectrum of `𝒫` is `{0, (1+κ²)(𝒞₁ ± 𝒞₂√(1+κ²))}`, each value eight-fold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{embed, hermitian_eig, kron, pauli, pauli_dot, rotation_unitary, Axis, ComplexMatrix, C64, I, ZERO};
use crate::model::{build_local_hb, gibbs_state, thermal_functionals, ModelParams, Temperature};

/// Largest tolerated imaginary part of `A_α`, `B_α`.
pub const IMAGINARY_TOL: f64 = 1e-8;

/// Trace form and sinusoid form of the energy loss must agree this closely.
pub const LOSS_AGREEMENT_TOL: f64 = 1e-9;

/// Allowed deviation of the numeric `𝒫` blocks from the `p₀`/`p₁` tables.
pub const BLOCK_TOL: f64 = 1e-9;

/// Minimum number of random families in the adversarial search.
pub const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenMeasError {
    #[error("a measurement needs at least two outcomes, got {0}")]
    TooFewOutcomes(usize),
    #[error("outcome {index} out of range for a family of {len}")]
    OutcomeOutOfRange { index: usize, len: usize },
    #[error("Bob direction has norm {0}, expected 1")]
    NotUnitVector(f64),
    #[error("{0} outcomes but {1} Bob vectors")]
    LengthMismatch(usize, usize),
    #[error("{what} has imaginary residue {value:e}")]
    ImaginaryResidue { what: &'static str, value: f64 },
    #[error("trace form {trace} and sinusoid form {sinusoid} disagree")]
    LossMismatch { trace: f64, sinusoid: f64 },
    #[error("the P matrix is only defined at lambda = 0, got {0}")]
    NonZeroLambda(f64),
    #[error("P blocks deviate from the p0/p1 tables by {0:e}")]
    BlockMismatch(f64),
}

/// Coefficients of one Kraus operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrausCoefficients {
    pub a: C64,
    pub b: [C64; 3],
    pub c: C64,
    pub d: [C64; 3],
}

impl KrausCoefficients {
    /// `V = (a, b₁, b₂, b₃, c, d₁, d₂, d₃)`.
    pub fn to_vector(&self) -> [C64; 8] {
        [self.a, self.b[0], self.b[1], self.b[2], self.c, self.d[0], self.d[1], self.d[2]]
    }

    pub fn from_vector(v: &[C64; 8]) -> Self {
        Self { a: v[0], b: [v[1], v[2], v[3]], c: v[4], d: [v[5], v[6], v[7]] }
    }

    /// The 4×4 operator on qubits 1–2.
    pub fn operator_12(&self) -> ComplexMatrix {
        let basis = operator_basis_12();
        self.to_vector()
            .iter()
            .zip(&basis)
            .fold(ComplexMatrix::zeros(4), |acc, (v, b)| &acc + &b.scale(*v))
    }

    /// The 8×8 operator `K ⊗ I₃`.
    pub fn operator(&self) -> ComplexMatrix {
        kron(&self.operator_12(), &ComplexMatrix::identity(2))
    }
}

/// A measurement with any number of outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralKraus {
    pub outcomes: Vec<KrausCoefficients>,
}

impl GeneralKraus {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// `max |Σ_α K†K − I|`.
    pub fn completeness_residual(&self) -> f64 {
        let sum = self.outcomes.iter().fold(ComplexMatrix::zeros(4), |acc, k| {
            let op = k.operator_12();
            &acc + &(&op.adjoint() * &op)
        });
        sum.max_abs_diff(&ComplexMatrix::identity(4))
    }
}

/// `{I, σ₁ˣ, σ₁ʸ, σ₁ᶻ} ⊗ {I, σ₂ˣ}` in the order of `V`.
pub fn operator_basis_12() -> [ComplexMatrix; 8] {
    let id = ComplexMatrix::identity(2);
    let x2 = pauli(Axis::X);
    let singles = [id.clone(), pauli(Axis::X), pauli(Axis::Y), pauli(Axis::Z)];
    std::array::from_fn(|beta| {
        let second = if beta < 4 { &id } else { &x2 };
        kron(&singles[beta % 4], second)
    })
}

/// The basis embedded on three qubits.
pub fn operator_basis() -> [ComplexMatrix; 8] {
    operator_basis_12().map(|b| kron(&b, &ComplexMatrix::identity(2)))
}

/// `𝓜_βγ = B_β B_γ` (all basis elements are Hermitian).
pub fn m_matrices() -> Vec<Vec<ComplexMatrix>> {
    let basis = operator_basis();
    basis.iter().map(|b| basis.iter().map(|g| b * g).collect()).collect()
}

/// `𝒪_jk = σ₃ʲ[σ₃ᵏ, H_B]`.
pub fn o_matrices(params: ModelParams) -> [[ComplexMatrix; 3]; 3] {
    let hb = build_local_hb(params);
    let s: [ComplexMatrix; 3] = Axis::ALL.map(|a| embed(&pauli(a), 3).expect("site 3"));
    std::array::from_fn(|j| std::array::from_fn(|k| &s[j] * &s[k].commutator(&hb)))
}

/// Kraus operator of one outcome, as an 8×8 matrix.
pub fn build_general_kraus(family: &GeneralKraus, outcome: usize) -> Result<ComplexMatrix, GenMeasError> {
    family
        .outcomes
        .get(outcome)
        .map(KrausCoefficients::operator)
        .ok_or(GenMeasError::OutcomeOutOfRange { index: outcome, len: family.len() })
}

/// Projects a 4×4 operator onto the basis; returns the coefficients and the residual.
fn extract_coefficients(op: &ComplexMatrix) -> (KrausCoefficients, f64) {
    let basis = operator_basis_12();
    let v: [C64; 8] = std::array::from_fn(|beta| (&basis[beta] * op).trace() * 0.25);
    let coeffs = KrausCoefficients::from_vector(&v);
    let residual = coeffs.operator_12().max_abs_diff(op);
    (coeffs, residual)
}

/// Smallest eigenvalue ratio of `Σ K†K` accepted before normalizing.
const CONDITION_FLOOR: f64 = 1e-6;

/// Seeded random family, normalized by `(Σ K†K)^{−1/2}` so completeness holds.
pub fn random_kraus_family(seed: u64, n_outcomes: usize) -> Result<GeneralKraus, GenMeasError> {
    if n_outcomes < 2 {
        return Err(GenMeasError::TooFewOutcomes(n_outcomes));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let raw: Vec<KrausCoefficients> = (0..n_outcomes)
            .map(|_| {
                let v: [C64; 8] = std::array::from_fn(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                KrausCoefficients::from_vector(&v)
            })
            .collect();
        let ops: Vec<ComplexMatrix> = raw.iter().map(KrausCoefficients::operator_12).collect();
        let s = ops.iter().fold(ComplexMatrix::zeros(4), |acc, k| &acc + &(&k.adjoint() * k));
        let eig = hermitian_eig(&s).expect("Hermitian sum");
        let (lo, hi) = (eig.eigenvalues[0], eig.eigenvalues[3]);
        if lo <= CONDITION_FLOOR * hi {
            continue;
        }
        let inv_sqrt = eig.map(|l| 1.0 / l.sqrt());
        let mut outcomes = Vec::with_capacity(n_outcomes);
        let mut ok = true;
        for k in &ops {
            let (coeffs, residual) = extract_coefficients(&(k * &inv_sqrt));
            ok &= residual <= 1e-10;
            outcomes.push(coeffs);
        }
        let family = GeneralKraus { outcomes };
        if ok && family.completeness_residual() <= 1e-10 {
            return Ok(family);
        }
    }
}

/// Gibbs state and `H_B` shared by repeated coefficient evaluations.
#[derive(Debug, Clone)]
pub struct LossContext {
    pub params: ModelParams,
    pub rho: ComplexMatrix,
    pub hb: ComplexMatrix,
}

fn real_part(what: &'static str, z: C64) -> Result<f64, GenMeasError> {
    if z.im.abs() > IMAGINARY_TOL {
        Err(GenMeasError::ImaginaryResidue { what, value: z.im })
    } else {
        Ok(z.re)
    }
}

fn check_unit(r_hat: [f64; 3]) -> Result<(), GenMeasError> {
    let norm = r_hat.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(GenMeasError::NotUnitVector(norm));
    }
    Ok(())
}

impl LossContext {
    pub fn new(params: ModelParams, temp: Temperature) -> Self {
        Self { params, rho: gibbs_state(params, temp), hb: build_local_hb(params) }
    }

    /// `(A_α, B_α)` for an 8×8 Kraus operator and Bob direction `r̂`.
    pub fn coefficients(&self, k: &ComplexMatrix, r_hat: [f64; 3]) -> Result<(f64, f64), GenMeasError> {
        check_unit(r_hat)?;
        let n = embed(&pauli_dot(r_hat), 3).expect("site 3");
        let kk = &k.adjoint() * k;
        let comm = n.commutator(&self.hb);
        let a = (&kk * &comm).trace_product(&self.rho) * (-0.5 * I);
        let b = -(&(&kk * &n) * &comm).trace_product(&self.rho);
        Ok((real_part("A", a)?, real_part("B", b)?))
    }

    /// `Σ_α tr[K†K U†[U, H_B] ρ]`, checked against `Σ_α A_α sin 2r_α − B_α sin² r_α`.
    pub fn energy_loss(&self, family: &GeneralKraus, bob_vectors: &[[f64; 3]]) -> Result<f64, GenMeasError> {
        if family.len() != bob_vectors.len() {
            return Err(GenMeasError::LengthMismatch(family.len(), bob_vectors.len()));
        }
        let mut trace = 0.0;
        let mut sinusoid = 0.0;
        for (coeffs, &r_vec) in family.outcomes.iter().zip(bob_vectors) {
            let k = coeffs.operator();
            let kk = &k.adjoint() * &k;
            let u = embed(&rotation_unitary(r_vec), 3).expect("site 3");
            let term = (&(&kk * &u.adjoint()) * &u.commutator(&self.hb)).trace_product(&self.rho);
            trace += real_part("energy loss", term)?;

            let r = r_vec.iter().map(|c| c * c).sum::<f64>().sqrt();
            if r > 0.0 {
                let (a, b) = self.coefficients(&k, r_vec.map(|c| c / r))?;
                sinusoid += a * (2.0 * r).sin() - b * r.sin().powi(2);
            }
        }
        if (trace - sinusoid).abs() > LOSS_AGREEMENT_TOL {
            return Err(GenMeasError::LossMismatch { trace, sinusoid });
        }
        Ok(trace)
    }
}

pub fn coefficients_ab(
    k: &ComplexMatrix,
    r_hat: [f64; 3],
    params: ModelParams,
    temp: Temperature,
) -> Result<(f64, f64), GenMeasError> {
    LossContext::new(params, temp).coefficients(k, r_hat)
}

pub fn general_energy_loss(
    family: &GeneralKraus,
    bob_vectors: &[[f64; 3]],
    params: ModelParams,
    temp: Temperature,
) -> Result<f64, GenMeasError> {
    LossContext::new(params, temp).energy_loss(family, bob_vectors)
}

/// Best amplitude for one outcome: maximizes `A sin 2r − B sin² r`.
pub fn optimal_amplitude(a: f64, b: f64) -> (f64, f64) {
    let r = 0.5 * (2.0 * a).atan2(b);
    let value = a.hypot(0.5 * b) - 0.5 * b;
    (r, value)
}

/// The `p₀` table at given `𝒞₁`, `𝒞₂`, `κ`.
pub fn p0_table(c1: f64, c2: f64, kappa: f64) -> ComplexMatrix {
    let re = |x: f64| C64::new(x, 0.0);
    let im = |x: f64| C64::new(0.0, x);
    let (a, b, bk) = (re(c1), c2, c2 * kappa);
    let z = ZERO;
    #[rustfmt::skip]
    let rows = [
        [a, z, z, re(-b), z, re(-bk), z, z],
        [z, a, im(-b), z, re(-bk), z, z, z],
        [z, im(b), a, z, z, z, z, im(-bk)],
        [re(-b), z, z, a, z, z, im(bk), z],
        [z, re(-bk), z, z, a, z, z, re(-b)],
        [re(-bk), z, z, z, z, a, im(-b), z],
        [z, z, z, im(-bk), z, im(b), a, z],
        [z, z, im(bk), z, re(-b), z, z, a],
    ];
    ComplexMatrix::from_fn(8, |i, j| rows[i][j])
}

/// The `p₁` table with the coupling-block signs that follow from the trace definition.
pub fn p1_table(c1: f64, c2: f64, kappa: f64) -> ComplexMatrix {
    printed_p1_table(-c1, c2, kappa, 1.0)
}

/// `p₁` as printed, where `entry_26` multiplies the `𝒞₁` entry at row 2, column 6.
///
/// Passing `entry_26 = κ` reproduces the printed table literally; `1` gives the
/// Hermitian reading.
pub fn printed_p1_table(c1: f64, c2: f64, kappa: f64, entry_26: f64) -> ComplexMatrix {
    let re = |x: f64| C64::new(x, 0.0);
    let im = |x: f64| C64::new(0.0, x);
    let (a, b, bk) = (re(c1), c2, c2 * kappa);
    let z = ZERO;
    #[rustfmt::skip]
    let rows = [
        [z, re(bk), z, z, a, z, z, re(b)],
        [re(bk), z, z, z, z, a, im(b), z],
        [z, z, z, im(bk), z, im(-b), re(c1 * entry_26), z],
        [z, z, im(-bk), z, re(b), z, z, a],
        [a, z, z, re(b), z, re(bk), z, z],
        [z, a, im(b), z, re(bk), z, z, z],
        [z, im(-b), a, z, z, z, z, im(bk)],
        [re(b), z, z, a, z, z, im(-bk), z],
    ];
    ComplexMatrix::from_fn(8, |i, j| rows[i][j])
}

/// The 24×24 matrix `𝒫` at `λ = 0`, indexed `j·8 + β`.
#[derive(Debug, Clone, PartialEq)]
pub struct PMatrix {
    pub entries: ComplexMatrix,
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    /// Deviation from `[[p₀, 0, κp₁], [0, (1+κ²)p₀, 0], [κp₁, 0, κ²p₀]]`.
    pub block_residual: f64,
    /// Positions `(row, col)` where the numeric `p₁` block differs from the printed table.
    pub printed_p1_disagreements: Vec<(usize, usize)>,
}

impl PMatrix {
    pub fn block(&self, j: usize, k: usize) -> ComplexMatrix {
        self.entries.block(8 * j, 8 * k, 8)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eig(&self.entries).expect("Hermitian").eigenvalues
    }

    /// `{0, (1+κ²)(𝒞₁ + 𝒞₂ s), (1+κ²)(𝒞₁ − 𝒞₂ s)}` with `s = √(1+κ²)`.
    pub fn closed_form_spectrum(&self) -> [f64; 3] {
        let k2 = 1.0 + self.kappa * self.kappa;
        let s = k2.sqrt();
        [0.0, k2 * (self.c1 + self.c2 * s), k2 * (self.c1 - self.c2 * s)]
    }

    /// `B_α = 2 (V̄ ⊗ R)ᵀ 𝒫 (V ⊗ R)`.
    pub fn loss_coefficient(&self, v: &[C64; 8], r_hat: [f64; 3]) -> f64 {
        let x: Vec<C64> = (0..24).map(|idx| v[idx % 8] * r_hat[idx / 8]).collect();
        2.0 * self.entries.expectation(&x).re
    }
}

/// Builds `𝒫` from the trace definition and checks it against the block tables.
pub fn build_p_matrix(params: ModelParams, temp: Temperature) -> Result<PMatrix, GenMeasError> {
    if !params.is_lambda_zero() {
        return Err(GenMeasError::NonZeroLambda(params.lambda));
    }
    let rho = gibbs_state(params, temp);
    let m = m_matrices();
    let o = o_matrices(params);
    let mut entries = ComplexMatrix::zeros(24);
    for j in 0..3 {
        for k in 0..3 {
            let sym_rho = &(&o[j][k] + &o[k][j]) * &rho;
            for beta in 0..8 {
                for gamma in 0..8 {
                    entries[(8 * j + beta, 8 * k + gamma)] = -0.25 * m[beta][gamma].trace_product(&sym_rho);
                }
            }
        }
    }

    let tf = thermal_functionals(params, temp);
    let (c1, c2) = (tf.c1.expect("lambda = 0"), tf.c2.expect("lambda = 0"));
    let kappa = params.kappa;
    let p0 = p0_table(c1, c2, kappa);
    let p1 = p1_table(c1, c2, kappa);
    let zero = ComplexMatrix::zeros(8);
    let expected = [
        [p0.clone(), zero.clone(), p1.scale_re(kappa)],
        [zero.clone(), p0.scale_re(1.0 + kappa * kappa), zero.clone()],
        [p1.scale_re(kappa), zero, p0.scale_re(kappa * kappa)],
    ];
    let mut block_residual: f64 = 0.0;
    for (j, row) in expected.iter().enumerate() {
        for (k, block) in row.iter().enumerate() {
            block_residual = block_residual.max(entries.block(8 * j, 8 * k, 8).max_abs_diff(block));
        }
    }
    if block_residual > BLOCK_TOL {
        return Err(GenMeasError::BlockMismatch(block_residual));
    }

    let mut printed_p1_disagreements = Vec::new();
    if kappa.abs() > 1e-12 {
        let printed = printed_p1_table(c1, c2, kappa, kappa);
        let numeric = entries.block(0, 16, 8).scale_re(1.0 / kappa);
        for r in 0..8 {
            for c in 0..8 {
                if (numeric[(r, c)] - printed[(r, c)]).norm() > BLOCK_TOL {
                    printed_p1_disagreements.push((r, c));
                }
            }
        }
    }

    Ok(PMatrix { entries, kappa, c1, c2, block_residual, printed_p1_disagreements })
}

/// Outcome of the `λ = 0` no-teleportation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub kappa: f64,
    pub temperature: f64,
    /// Numeric eigenvalues of `𝒫`, ascending.
    pub spectrum: Vec<f64>,
    pub closed_form_spectrum: [f64; 3],
    pub min_eig: f64,
    /// `𝒞₁ − 𝒞₂√(1+κ²)`.
    pub gap: f64,
    /// `min_eig ≥ −1e-10` and `gap ≥ −1e-10`.
    pub certified: bool,
    pub trials: usize,
    /// Largest energy loss found by the randomized search.
    pub adversarial_max: f64,
    /// `adversarial_max ≤ 1e-8`.
    pub adversarial_ok: bool,
}

/// Random Bob directions tried per outcome in the adversarial search.
const DIRECTIONS_PER_OUTCOME: usize = 8;

fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let rho = (1.0 - z * z).sqrt();
    [rho * phi.cos(), rho * phi.sin(), z]
}

/// Largest energy loss over random families with per-outcome optimal Bob rotations.
pub fn adversarial_search(ctx: &LossContext, trials: usize, seed: u64) -> Result<f64, GenMeasError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let n_outcomes = rng.gen_range(2..=4);
        let family = random_kraus_family(rng.gen(), n_outcomes)?;
        let mut vectors = Vec::with_capacity(n_outcomes);
        for coeffs in &family.outcomes {
            let k = coeffs.operator();
            let mut best = (f64::NEG_INFINITY, [0.0; 3]);
            for _ in 0..DIRECTIONS_PER_OUTCOME {
                let dir = random_unit(&mut rng);
                let (a, b) = ctx.coefficients(&k, dir)?;
                let (r, value) = optimal_amplitude(a, b);
                if value > best.0 {
                    best = (value, dir.map(|c| c * r));
                }
            }
            vectors.push(best.1);
        }
        worst = worst.max(ctx.energy_loss(&family, &vectors)?);
    }
    Ok(worst)
}

pub fn no_qet_certificate_with(kappa: f64, temp: Temperature, trials: usize, seed: u64) -> Result<CertificateReport, GenMeasError> {
    let params = ModelParams { kappa, lambda: 0.0 };
    let p = build_p_matrix(params, temp)?;
    let spectrum = p.eigenvalues();
    let min_eig = spectrum[0];
    let gap = p.c1 - p.c2 * (1.0 + kappa * kappa).sqrt();
    let adversarial_max = adversarial_search(&LossContext::new(params, temp), trials, seed)?;
    Ok(CertificateReport {
        kappa,
        temperature: temp.value(),
        closed_form_spectrum: p.closed_form_spectrum(),
        spectrum,
        min_eig,
        gap,
        certified: min_eig >= -1e-10 && gap >= -1e-10,
        trials,
        adversarial_max,
        adversarial_ok: adversarial_max <= 1e-8,
    })
}

pub fn no_qet_certificate(kappa: f64, temp: Temperature) -> Result<CertificateReport, GenMeasError> {
    no_qet_certificate_with(kappa, temp, DEFAULT_TRIALS, 0x5eed)
}

/// `K = I₈/√n` for every outcome.
pub fn uniform_family(n_outcomes: usize) -> GeneralKraus {
    let a = C64::new(1.0 / (n_outcomes as f64).sqrt(), 0.0);
    GeneralKraus { outcomes: vec![KrausCoefficients { a, b: [ZERO; 3], c: ZERO, d: [ZERO; 3] }; n_outcomes] }
}
