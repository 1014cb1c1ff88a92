//! Projective-measurement energy teleportation: Alice measures qubit 1 along
//! `r̂_A`, Bob applies `U_B(α) = exp(−iα r_B·σ₃)` on qubit 3.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{embed, kron, pauli, pauli_dot, rotation_unitary, Axis, ComplexMatrix, C64, ZERO};
use crate::model::{build_hamiltonian, build_local_hb, gibbs_state, thermal_functionals, ModelParams, Temperature, ThermalFunctionals};
use crate::optimize::{nelder_mead, NelderMeadOptions};

/// Measurement outcomes.
pub const OUTCOMES: [i32; 2] = [1, -1];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("measurement outcome must be +1 or -1, got {0}")]
    InvalidOutcome(i32),
    #[error("angle {0} must be finite")]
    NonFinite(&'static str),
}

fn check_outcome(alpha: i32) -> Result<f64, ProtocolError> {
    match alpha {
        1 | -1 => Ok(alpha as f64),
        _ => Err(ProtocolError::InvalidOutcome(alpha)),
    }
}

/// Alice's measurement direction `(θ, φ)` and Bob's rotation `r·(sin δ cos γ, sin δ sin γ, cos δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolAngles {
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl ProtocolAngles {
    pub fn new(theta: f64, phi: f64, r: f64, delta: f64, gamma: f64) -> Result<Self, ProtocolError> {
        for (name, v) in [("theta", theta), ("phi", phi), ("r", r), ("delta", delta), ("gamma", gamma)] {
            if !v.is_finite() {
                return Err(ProtocolError::NonFinite(name));
            }
        }
        Ok(Self { theta, phi, r, delta, gamma })
    }

    /// `σʸ` measurement for Alice and an `x`-axis rotation by `r` for Bob.
    pub fn optimal(r: f64) -> Self {
        Self { theta: FRAC_PI_2, phi: FRAC_PI_2, r, delta: FRAC_PI_2, gamma: 0.0 }
    }

    pub fn alice_direction(&self) -> [f64; 3] {
        unit_vector(self.theta, self.phi)
    }

    /// `r_B = r·(sin δ cos γ, sin δ sin γ, cos δ)`.
    pub fn bob_vector(&self) -> [f64; 3] {
        unit_vector(self.delta, self.gamma).map(|c| self.r * c)
    }

    fn to_vec(self) -> Vec<f64> {
        vec![self.theta, self.phi, self.r, self.delta, self.gamma]
    }

    fn from_slice(x: &[f64]) -> Self {
        Self { theta: x[0], phi: x[1], r: x[2], delta: x[3], gamma: x[4] }
    }
}

fn unit_vector(polar: f64, azimuth: f64) -> [f64; 3] {
    [polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()]
}

/// Outcome of one protocol evaluation or optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QetResult {
    pub e_a: f64,
    pub e_b: f64,
    /// `100·E_B/E_A` in percent; `None` when `E_A = 0`.
    pub eta: Option<f64>,
    pub angles: ProtocolAngles,
    pub r0: f64,
}

pub fn efficiency(e_a: f64, e_b: f64) -> Option<f64> {
    if e_a > 0.0 {
        Some(100.0 * e_b / e_a)
    } else {
        None
    }
}

/// `M_A(α) = ½(I + α r̂·σ)`.
pub fn alice_kraus(alpha: i32, theta: f64, phi: f64) -> Result<ComplexMatrix, ProtocolError> {
    let a = check_outcome(alpha)?;
    let n = unit_vector(theta, phi).map(|c| a * c);
    Ok((&ComplexMatrix::identity(2) + &pauli_dot(n)).scale_re(0.5))
}

/// `U_B(α) = exp(−iα r_B·σ)`.
pub fn bob_unitary(alpha: i32, angles: &ProtocolAngles) -> Result<ComplexMatrix, ProtocolError> {
    let a = check_outcome(alpha)?;
    Ok(rotation_unitary(angles.bob_vector().map(|c| a * c)))
}

fn site1(op: &ComplexMatrix) -> ComplexMatrix {
    embed(op, 1).expect("2x2 operator")
}

fn site3(op: &ComplexMatrix) -> ComplexMatrix {
    embed(op, 3).expect("2x2 operator")
}

fn energy_input_with(h: &ComplexMatrix, rho: &ComplexMatrix, theta: f64, phi: f64) -> f64 {
    let after: f64 = OUTCOMES
        .iter()
        .map(|&alpha| {
            let m = site1(&alice_kraus(alpha, theta, phi).expect("valid outcome"));
            (&(&m.adjoint() * h) * &m).trace_product(rho).re
        })
        .sum();
    after - h.trace_product(rho).re
}

/// `E_A = Σ_α tr[M_A†(α) H M_A(α) ρ] − tr[Hρ]`.
pub fn energy_input(params: ModelParams, temp: Temperature, theta: f64, phi: f64) -> f64 {
    energy_input_with(&build_hamiltonian(params), &gibbs_state(params, temp), theta, phi)
}

fn teleported_with(hb: &ComplexMatrix, rho: &ComplexMatrix, angles: &ProtocolAngles) -> f64 {
    OUTCOMES
        .iter()
        .map(|&alpha| {
            let m = site1(&alice_kraus(alpha, angles.theta, angles.phi).expect("valid outcome"));
            let u = site3(&bob_unitary(alpha, angles).expect("valid outcome"));
            let mm = &m.adjoint() * &m;
            let op = &(&mm * &u.adjoint()) * &u.commutator(hb);
            op.trace_product(rho).re
        })
        .sum()
}

/// `E_B = Σ_α tr[M_A†M_A U_B†[U_B, H_B] ρ]` by dense 8×8 products.
pub fn teleported_energy_bruteforce(params: ModelParams, temp: Temperature, angles: &ProtocolAngles) -> f64 {
    teleported_with(&build_local_hb(params), &gibbs_state(params, temp), angles)
}

/// `E_B = tr[ρ H_B] − Σ_α tr[U_B(α) M_A(α) ρ M_A†(α) U_B†(α) H_B]`.
pub fn teleported_energy_difference(params: ModelParams, temp: Temperature, angles: &ProtocolAngles) -> f64 {
    let hb = build_local_hb(params);
    let rho = gibbs_state(params, temp);
    let after: f64 = OUTCOMES
        .iter()
        .map(|&alpha| {
            let m = site1(&alice_kraus(alpha, angles.theta, angles.phi).expect("valid outcome"));
            let u = site3(&bob_unitary(alpha, angles).expect("valid outcome"));
            let um = &u * &m;
            let post = &(&um * &rho) * &um.adjoint();
            post.trace_product(&hb).re
        })
        .sum();
    rho.trace_product(&hb).re - after
}

/// The sinusoid coefficients `(A, B)` with `E_B = A sin 2r − B(1 − cos 2r)`.
pub fn sinusoid_coefficients(tf: &ThermalFunctionals, angles: &ProtocolAngles) -> (f64, f64) {
    let ProtocolAngles { theta, phi, delta, gamma, .. } = *angles;
    let a = tf.a_fn * theta.sin() * delta.sin() * (phi - gamma).sin();
    let b = delta.sin().powi(2) * (2.0 * tf.b_fn * gamma.cos().powi(2) + tf.r_fn) - 2.0 * tf.b_fn;
    (a, b)
}

pub fn teleported_energy_from_functionals(tf: &ThermalFunctionals, angles: &ProtocolAngles) -> f64 {
    let (a, b) = sinusoid_coefficients(tf, angles);
    let two_r = 2.0 * angles.r;
    a * two_r.sin() - b * (1.0 - two_r.cos())
}

pub fn teleported_energy_closed(params: ModelParams, temp: Temperature, angles: &ProtocolAngles) -> f64 {
    teleported_energy_from_functionals(&thermal_functionals(params, temp), angles)
}

/// `√(𝒜² + ℛ²) − ℛ`, written to avoid cancellation when `ℛ > 0`.
fn peak(a: f64, r: f64) -> f64 {
    let norm = a.hypot(r);
    if r > 0.0 {
        a * a / (norm + r)
    } else {
        norm - r
    }
}

pub fn optimal_from_functionals(tf: &ThermalFunctionals) -> QetResult {
    let r0 = 0.5 * tf.a_fn.atan2(tf.r_fn);
    let e_b = peak(tf.a_fn, tf.r_fn);
    let e_a = tf.r_fn - 2.0 * tf.b_fn;
    QetResult { e_a, e_b, eta: efficiency(e_a, e_b), angles: ProtocolAngles::optimal(r0), r0 }
}

/// Analytic optimum at `θ = φ = δ = π/2`, `γ = 0`, `tan 2r₀ = 𝒜/ℛ`.
pub fn optimal_protocol(params: ModelParams, temp: Temperature) -> QetResult {
    optimal_from_functionals(&thermal_functionals(params, temp))
}

type Mat4 = [C64; 16];

/// `tr[XY]` for 4×4 Hermitian matrices.
fn trace_product4(x: &Mat4, y: &Mat4) -> f64 {
    (0..4).map(|i| (0..4).map(|j| (x[4 * i + j] * y[4 * j + i]).re).sum::<f64>()).sum()
}

/// Fast evaluator: `E_B = Σ_α tr[ρ₂₃(α) X(α)]` with `ρ₂₃(α) = Tr₁[(M_α ⊗ I)ρ]`
/// and `X(α) = H_B − U_α† H_B U_α` on qubits 2–3.
struct ReducedEvaluator {
    rho: ComplexMatrix,
    hb: ComplexMatrix,
}

impl ReducedEvaluator {
    fn new(params: ModelParams, temp: Temperature) -> Self {
        let hb = &kron(&pauli(Axis::X), &pauli(Axis::X)).scale_re(params.kappa)
            + &kron(&ComplexMatrix::identity(2), &pauli(Axis::Z));
        Self { rho: gibbs_state(params, temp), hb }
    }

    fn alice(&self, alpha: i32, theta: f64, phi: f64) -> Mat4 {
        let m = alice_kraus(alpha, theta, phi).expect("valid outcome");
        let mut out = [ZERO; 16];
        for x in 0..4 {
            for y in 0..4 {
                let mut acc = ZERO;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += m[(b, a)] * self.rho[(4 * a + x, 4 * b + y)];
                    }
                }
                out[4 * x + y] = acc;
            }
        }
        out
    }

    fn bob(&self, alpha: i32, angles: &ProtocolAngles) -> Mat4 {
        let u = kron(&ComplexMatrix::identity(2), &bob_unitary(alpha, angles).expect("valid outcome"));
        let x = &self.hb - &(&(&u.adjoint() * &self.hb) * &u);
        let mut out = [ZERO; 16];
        out.copy_from_slice(x.entries());
        out
    }

    fn energy(&self, angles: &ProtocolAngles) -> f64 {
        OUTCOMES
            .iter()
            .map(|&a| trace_product4(&self.alice(a, angles.theta, angles.phi), &self.bob(a, angles)))
            .sum()
    }
}

fn grid(lo: f64, hi: f64, n: usize, inclusive: bool) -> Vec<f64> {
    let d = if inclusive { n - 1 } else { n } as f64;
    (0..n).map(|i| lo + (hi - lo) * i as f64 / d).collect()
}

/// Seeding resolution for [`numeric_optimize`].
pub const POLAR_SEEDS: usize = 9;
pub const AZIMUTH_SEEDS: usize = 12;
pub const AMPLITUDE_SEEDS: usize = 12;
const REFINED_SEEDS: usize = 4;

/// Grid-seeded simplex maximization of `E_B` over all five angles.
pub fn numeric_optimize(params: ModelParams, temp: Temperature) -> QetResult {
    let eval = ReducedEvaluator::new(params, temp);
    let polar = grid(0.0, PI, POLAR_SEEDS, true);
    let azimuth = grid(0.0, 2.0 * PI, AZIMUTH_SEEDS, false);
    let amplitude = grid(-FRAC_PI_2, FRAC_PI_2, AMPLITUDE_SEEDS, false);

    let mut alice: Vec<((f64, f64), [Mat4; 2])> = Vec::new();
    let mut bob: Vec<((f64, f64, f64), [Mat4; 2])> = Vec::new();
    for &u in &polar {
        for &v in &azimuth {
            alice.push(((u, v), [eval.alice(1, u, v), eval.alice(-1, u, v)]));
            for &r in &amplitude {
                let angles = ProtocolAngles { theta: 0.0, phi: 0.0, r, delta: u, gamma: v };
                bob.push(((u, v, r), [eval.bob(1, &angles), eval.bob(-1, &angles)]));
            }
        }
    }

    let mut best: Vec<(f64, ProtocolAngles)> = Vec::with_capacity(REFINED_SEEDS + 1);
    for ((theta, phi), ra) in &alice {
        for ((delta, gamma, r), xb) in &bob {
            let e = trace_product4(&ra[0], &xb[0]) + trace_product4(&ra[1], &xb[1]);
            if best.len() < REFINED_SEEDS || e > best[best.len() - 1].0 {
                let angles = ProtocolAngles { theta: *theta, phi: *phi, r: *r, delta: *delta, gamma: *gamma };
                let at = best.partition_point(|(v, _)| *v >= e);
                best.insert(at, (e, angles));
                best.truncate(REFINED_SEEDS);
            }
        }
    }

    let opts = NelderMeadOptions { initial_step: 0.2, x_tol: 1e-8, f_tol: 1e-16, max_evals: 20_000 };
    let objective = |x: &[f64]| -eval.energy(&ProtocolAngles::from_slice(x));
    let mut winner = best[0];
    for &(_, seed) in &best {
        let mut m = nelder_mead(objective, &seed.to_vec(), opts);
        // A restart escapes the occasional collapsed simplex.
        let polish = nelder_mead(objective, &m.x, NelderMeadOptions { initial_step: 0.05, ..opts });
        if polish.value < m.value {
            m = polish;
        }
        if -m.value > winner.0 {
            winner = (-m.value, ProtocolAngles::from_slice(&m.x));
        }
    }

    let angles = winner.1;
    let hb = build_local_hb(params);
    let h = build_hamiltonian(params);
    let e_b = teleported_with(&hb, &eval.rho, &angles);
    let e_a = energy_input_with(&h, &eval.rho, angles.theta, angles.phi);
    QetResult { e_a, e_b, eta: efficiency(e_a, e_b), angles, r0: angles.r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(kappa: f64, lambda: f64) -> ModelParams {
        ModelParams::new(kappa, lambda).unwrap()
    }

    fn temp(t: f64) -> Temperature {
        Temperature::new(t).unwrap()
    }

    fn random_angles(rng: &mut impl Rng) -> ProtocolAngles {
        ProtocolAngles::new(
            rng.gen_range(0.0..PI),
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(-PI..PI),
            rng.gen_range(0.0..PI),
            rng.gen_range(0.0..2.0 * PI),
        )
        .unwrap()
    }

    #[test]
    fn alice_projectors() {
        assert_eq!(alice_kraus(1, 0.0, 0.0).unwrap(), ComplexMatrix::from_diag(&[1.0, 0.0]));
        let y = alice_kraus(1, FRAC_PI_2, FRAC_PI_2).unwrap();
        let expected = (&ComplexMatrix::identity(2) + &pauli(Axis::Y)).scale_re(0.5);
        assert!(y.max_abs_diff(&expected) < 1e-15);
        assert!(matches!(alice_kraus(0, 0.0, 0.0), Err(ProtocolError::InvalidOutcome(0))));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (t, p) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
            let plus = alice_kraus(1, t, p).unwrap();
            let minus = alice_kraus(-1, t, p).unwrap();
            assert!((&plus + &minus).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
            assert!((&plus * &plus).max_abs_diff(&plus) < 1e-12);
            let complete = &(&plus.adjoint() * &plus) + &(&minus.adjoint() * &minus);
            assert!(complete.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
        }
    }

    #[test]
    fn bob_rotations() {
        let still = ProtocolAngles::new(0.3, 0.1, 0.0, 1.0, 2.0).unwrap();
        for a in OUTCOMES {
            assert!(bob_unitary(a, &still).unwrap().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        }
        let angles = ProtocolAngles::new(0.0, 0.0, PI / 4.0, FRAC_PI_2, 0.0).unwrap();
        let c = (PI / 4.0).cos();
        let expected = &ComplexMatrix::identity(2).scale_re(c) - &pauli(Axis::X).scale(C64::new(0.0, c));
        assert!(bob_unitary(1, &angles).unwrap().max_abs_diff(&expected) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let angles = random_angles(&mut rng);
            let plus = bob_unitary(1, &angles).unwrap();
            assert!(plus.is_unitary(1e-12));
            assert!(bob_unitary(-1, &angles).unwrap().max_abs_diff(&plus.adjoint()) < 1e-12);
        }
        assert!(bob_unitary(2, &angles).is_err());
    }

    #[test]
    fn measurement_leaves_bob_terms_alone() {
        let hb = build_local_hb(params(1.7, 0.4));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let m = site1(&alice_kraus(1, rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI)).unwrap());
            assert!(m.commutator(&hb).max_abs() < 1e-12);
        }
    }

    /// Projector onto the `α` eigenvector of `n·σ`, from the eigensolver.
    fn spectral_projector(alpha: i32, theta: f64, phi: f64) -> ComplexMatrix {
        let eig = hermitian_eig(&pauli_dot(unit_vector(theta, phi))).unwrap();
        let k = if alpha == 1 { 1 } else { 0 };
        ComplexMatrix::outer(&eig.eigenvector(k))
    }

    #[test]
    fn energy_input_cases() {
        assert!(energy_input(params(0.0, 1.3), temp(0.7), 0.0, 0.0).abs() < 1e-14);

        let p = params(1.0, 1.0);
        let tf = thermal_functionals(p, temp(0.0));
        let e = energy_input(p, temp(0.0), FRAC_PI_2, FRAC_PI_2);
        assert!((e - (tf.r_fn - 2.0 * tf.b_fn)).abs() < 1e-10);

        let (p, t) = (params(1.0, 1.0), temp(1.0));
        let h = build_hamiltonian(p);
        let rho = gibbs_state(p, t);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let (theta, phi) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
            // Post-measurement state Σ PρP built from eigenvector projectors.
            let post = OUTCOMES.iter().fold(ComplexMatrix::zeros(8), |acc, &a| {
                let proj = kron(&spectral_projector(a, theta, phi), &ComplexMatrix::identity(4));
                &acc + &(&(&proj * &rho) * &proj)
            });
            let oracle = post.trace_product(&h).re - rho.trace_product(&h).re;
            let e = energy_input(p, t, theta, phi);
            assert!((e - oracle).abs() < 1e-10);
            assert!(e >= -1e-12);
        }
    }

    #[test]
    fn teleported_energy_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut angles = random_angles(&mut rng);
            // Uncoupled: Bob only disturbs a passive qubit.
            let tf = thermal_functionals(params(0.0, 2.0), temp(0.5));
            let loss = -tf.r_fn * angles.delta.sin().powi(2) * (1.0 - (2.0 * angles.r).cos());
            let e = teleported_energy_bruteforce(params(0.0, 2.0), temp(0.5), &angles);
            assert!(e <= 1e-12 && (e - loss).abs() < 1e-12);
            angles.r = 0.0;
            assert!(teleported_energy_bruteforce(params(1.0, 2.0), temp(0.5), &angles).abs() < 1e-15);
        }
    }

    #[test]
    fn bruteforce_matches_difference_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let p = params(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let t = temp(rng.gen_range(0.0..3.0));
            let angles = random_angles(&mut rng);
            let a = teleported_energy_bruteforce(p, t, &angles);
            let b = teleported_energy_difference(p, t, &angles);
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_matches_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let p = params(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
            let t = temp(if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.01..5.0) });
            let angles = random_angles(&mut rng);
            let closed = teleported_energy_closed(p, t, &angles);
            let brute = teleported_energy_bruteforce(p, t, &angles);
            assert!((closed - brute).abs() < 1e-9, "{p:?} {t:?} {angles:?}: {closed} vs {brute}");
        }
        let angles = ProtocolAngles::new(0.4, 1.1, 0.8, 2.0, 0.3).unwrap();
        let (p, t) = (params(2.0, 1.0), temp(0.7));
        assert!((teleported_energy_closed(p, t, &angles) - teleported_energy_bruteforce(p, t, &angles)).abs() < 1e-9);
    }

    #[test]
    fn no_gain_without_field_or_off_axis_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let mut angles = random_angles(&mut rng);
            let t = temp(rng.gen_range(0.0..3.0));
            let tf = thermal_functionals(params(rng.gen_range(-5.0..5.0), 0.0), t);
            let (a, b) = sinusoid_coefficients(&tf, &angles);
            assert!(a.abs() < 1e-12 && b >= -1e-12);
            assert!(teleported_energy_from_functionals(&tf, &angles) <= 1e-12);

            angles.delta = 0.0;
            let tf = thermal_functionals(params(rng.gen_range(0.1..5.0), rng.gen_range(-5.0..5.0)), t);
            let (a, b) = sinusoid_coefficients(&tf, &angles);
            assert_eq!(a, 0.0);
            assert!(b > 0.0);
            assert!(teleported_energy_from_functionals(&tf, &angles) <= 0.0);
        }
    }

    #[test]
    fn analytic_optimum() {
        for &k in &[0.0, 0.5, 3.0] {
            for &t in &[0.0, 1.0] {
                assert!(optimal_protocol(params(k, 0.0), temp(t)).e_b.abs() < 1e-15);
            }
        }
        assert!(optimal_protocol(params(0.0, 2.0), temp(0.4)).e_b.abs() < 1e-12);

        let (p, t) = (params(1.0, 1.0), temp(0.0));
        let opt = optimal_protocol(p, t);
        assert!(opt.e_b > 0.0);
        assert!((teleported_energy_bruteforce(p, t, &opt.angles) - opt.e_b).abs() < 1e-10);
        let ahead = ProtocolAngles { r: opt.r0 + FRAC_PI_2, ..opt.angles };
        assert!(teleported_energy_closed(p, t, &ahead) <= opt.e_b);
        assert!((energy_input(p, t, FRAC_PI_2, FRAC_PI_2) - opt.e_a).abs() < 1e-10);
        let eta = opt.eta.unwrap();
        assert!(eta > 0.0 && eta <= 100.0);
    }

    #[test]
    fn optimum_even_in_couplings() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let (k, l) = (rng.gen_range(0.1..8.0), rng.gen_range(0.1..8.0));
            let t = temp(rng.gen_range(0.0..3.0));
            let base = optimal_protocol(params(k, l), t);
            for (kk, ll) in [(-k, l), (k, -l), (-k, -l)] {
                let other = optimal_protocol(params(kk, ll), t);
                assert!((other.e_b - base.e_b).abs() < 1e-9);
            }
            assert!(base.e_a >= 0.0 && base.e_b <= base.e_a);
        }
    }

    #[test]
    fn reduced_evaluator_matches_bruteforce() {
        let (p, t) = (params(1.3, -0.6), temp(0.4));
        let eval = ReducedEvaluator::new(p, t);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..20 {
            let angles = random_angles(&mut rng);
            assert!((eval.energy(&angles) - teleported_energy_bruteforce(p, t, &angles)).abs() < 1e-12);
        }
        assert!((eval.rho.trace() - ONE).norm() < 1e-12);
    }

    #[test]
    fn numeric_optimum_agrees() {
        let (p, t) = (params(1.0, 1.0), temp(0.0));
        let analytic = optimal_protocol(p, t).e_b;
        let numeric = numeric_optimize(p, t).e_b;
        assert!((numeric - analytic).abs() <= 1e-6 * analytic, "{numeric} vs {analytic}");

        let numeric = numeric_optimize(params(3.0, 0.0), temp(1.0));
        assert!(numeric.e_b <= 1e-8);
    }
}
