//! The DEF passivity transform and passivity classification of element FRFs.
//!
//! The DEF integral `∫(Ir·V̇i − Ii·V̇r) dt` is the supply-rate integral of the
//! transformed system `Ĩ = (Y·Γ)·ṼT` with input `ṼT = (jΩṼi, −jΩṼr)`, where
//! `Γ(Ω) = [[0, −1/(jΩ)], [1/(jΩ), 0]]` and the output transform is the
//! identity. The element injects non-negative dissipating energy for every
//! input exactly when the Hermitian part
//!
//! ```text
//! K(Ω) = ½·(Y·Γ + (Y·Γ)†)
//! ```
//!
//! is positive semidefinite. The checks here run on a finite frequency grid;
//! they say nothing about residues of poles on the imaginary axis, which a
//! sampled FRF cannot see.
//!
//! Phasors are peak-amplitude phasors. For a sinusoidal steady state the
//! quadratic form `P* = ṼT†·K·ṼT` is twice the time-averaged dissipating
//! power: `P̄ = P*/2`.

use num_complex::Complex64;

use crate::element::{ClassicalGenerator, ElementModel, Frf};
use crate::{hz_to_rad, Error, Mat2, Result};

/// Output-side transform of the DEF passivity transformation (identity).
pub fn transform_m() -> Mat2 {
    Mat2::identity()
}

/// Input-side transform `Γ(Ω) = [[0, j/Ω], [−j/Ω, 0]]`.
pub fn gamma(omega: f64) -> Result<Mat2> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::NonPositiveFrequency(omega));
    }
    let z = Complex64::new(0.0, 0.0);
    Ok(Mat2::new(
        z,
        Complex64::new(0.0, 1.0 / omega),
        Complex64::new(0.0, -1.0 / omega),
        z,
    ))
}

/// `ṼT = Γ⁻¹·Ṽ = (jΩṼi, −jΩṼr)`: the phasors of `(V̇i, −V̇r)`.
pub fn transformed_input(omega: f64, v: [Complex64; 2]) -> [Complex64; 2] {
    let jw = Complex64::new(0.0, omega);
    [jw * v[1], -jw * v[0]]
}

/// Hermitian part of the transformed FRF at one frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitianK {
    pub matrix: Mat2,
    pub omega: f64,
}

impl HermitianK {
    pub fn eigenvalues(&self) -> Result<(f64, f64)> {
        eig_hermitian_2x2(&self.matrix)
    }
}

/// `K(Ω) = ½·(M·Y·Γ + (M·Y·Γ)†)` with `M = I`.
pub fn k_matrix(y: &Frf, omega: f64) -> Result<HermitianK> {
    let transformed = transform_m() * *y.matrix() * gamma(omega)?;
    Ok(HermitianK {
        matrix: transformed.hermitian_part(),
        omega,
    })
}

/// Closed-form eigenvalues `(λ_min, λ_max)` of a 2×2 Hermitian matrix.
pub fn eig_hermitian_2x2(k: &Mat2) -> Result<(f64, f64)> {
    let defect = k.hermitian_defect();
    if defect > 1e-12 * k.max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let a = k.get(0, 0).re;
    let d = k.get(1, 1).re;
    let b = 0.5 * (k.get(0, 1) + k.get(1, 0).conj());
    let mean = 0.5 * (a + d);
    // sqrt(mean² − det) written without the cancellation in mean² − det
    let radius = (0.5 * (a - d)).hypot(b.norm());
    Ok((mean - radius, mean + radius))
}

/// Passivity class of an element over a frequency grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Both eigenvalues vanish everywhere.
    Lossless,
    /// Never negative, positive somewhere, but not positive definite everywhere.
    Passive,
    /// Positive definite at every grid frequency.
    StrictlyPassive,
    /// Mixed-sign eigenvalues at some frequency.
    Indefinite,
    /// Negative somewhere without ever being indefinite at a single frequency.
    NonPassive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Lossless => "Lossless",
            Verdict::Passive => "Passive",
            Verdict::StrictlyPassive => "StrictlyPassive",
            Verdict::Indefinite => "Indefinite",
            Verdict::NonPassive => "NonPassive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PassivityReport {
    /// Grid frequencies in rad/s.
    pub omegas: Vec<f64>,
    /// `(λ_min, λ_max)` of `K` at each grid frequency.
    pub eigenvalues: Vec<(f64, f64)>,
    pub verdict: Verdict,
    pub tolerance: f64,
}

/// Applies the verdict rules to a list of eigenvalue pairs.
pub fn verdict_from_eigenvalues(eigs: &[(f64, f64)], tol: f64) -> Verdict {
    let lossless = eigs
        .iter()
        .all(|&(lo, hi)| lo.abs() <= tol && hi.abs() <= tol);
    if lossless {
        return Verdict::Lossless;
    }
    if eigs.iter().all(|&(lo, _)| lo > tol) {
        return Verdict::StrictlyPassive;
    }
    if eigs.iter().all(|&(lo, _)| lo >= -tol) {
        return Verdict::Passive;
    }
    if eigs.iter().any(|&(lo, hi)| lo < -tol && hi > tol) {
        return Verdict::Indefinite;
    }
    Verdict::NonPassive
}

/// Default classification tolerance: `1e-9 · max|λ|` over the grid, with an
/// absolute floor of `1e-12`.
pub fn default_tolerance(eigs: &[(f64, f64)]) -> f64 {
    let peak = eigs
        .iter()
        .map(|&(lo, hi)| lo.abs().max(hi.abs()))
        .fold(0.0, f64::max);
    (1e-9 * peak).max(1e-12)
}

fn sweep(model: &ElementModel, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty frequency grid".into()));
    }
    grid.iter()
        .map(|&omega| k_matrix(&model.frf(omega)?, omega)?.eigenvalues())
        .collect()
}

/// Classifies an element with an explicit tolerance.
pub fn classify(model: &ElementModel, grid: &[f64], tol: f64) -> Result<PassivityReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let eigenvalues = sweep(model, grid)?;
    Ok(PassivityReport {
        omegas: grid.to_vec(),
        verdict: verdict_from_eigenvalues(&eigenvalues, tol),
        eigenvalues,
        tolerance: tol,
    })
}

/// Classifies an element using [`default_tolerance`].
pub fn classify_default(model: &ElementModel, grid: &[f64]) -> Result<PassivityReport> {
    let eigenvalues = sweep(model, grid)?;
    let tol = default_tolerance(&eigenvalues);
    Ok(PassivityReport {
        omegas: grid.to_vec(),
        verdict: verdict_from_eigenvalues(&eigenvalues, tol),
        eigenvalues,
        tolerance: tol,
    })
}

/// `n` log-spaced frequencies from `fmin_hz` to `fmax_hz`, returned in rad/s.
pub fn log_grid(fmin_hz: f64, fmax_hz: f64, n: usize) -> Result<Vec<f64>> {
    if !(fmin_hz > 0.0) || !(fmax_hz >= fmin_hz) || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad frequency grid: fmin={fmin_hz} fmax={fmax_hz} n={n}"
        )));
    }
    if n == 1 {
        return Ok(vec![hz_to_rad(fmin_hz)]);
    }
    let (lo, hi) = (fmin_hz.ln(), fmax_hz.ln());
    Ok((0..n)
        .map(|k| {
            let f = if k == n - 1 {
                fmax_hz
            } else {
                (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()
            };
            hz_to_rad(f)
        })
        .collect())
}

/// 50 log-spaced points over 0.01–10 Hz, in rad/s.
pub fn default_grid() -> Vec<f64> {
    log_grid(0.01, 10.0, 50).expect("static grid is valid")
}

/// Nonzero eigenvalue of `K_g`:
/// `D·(E′/X′d)² / ((Ks − MΩ²)² + (ΩD)²)` with `Ks = Vt·E′·cos φ / X′d`.
pub fn generator_eig_analytic(gen: &ClassicalGenerator, omega: f64) -> Result<f64> {
    let den = gen.resonance_denominator(omega)?;
    let m = &gen.machine;
    Ok(m.damping * (m.e_prime / m.xd_prime).powi(2) / den)
}

/// Quadratic-form dissipating power `P* = 2·G·Ω·|Ṽi|·|Ṽr|·sin(θr − θi)` of a
/// conductance. The time-averaged power is half of this.
pub fn resistor_power_analytic(
    conductance: f64,
    omega: f64,
    amp_r: f64,
    amp_i: f64,
    phase_diff: f64,
) -> f64 {
    2.0 * conductance * omega * amp_i * amp_r * phase_diff.sin()
}

/// `Re{ṼT†·(Y·Γ)·ṼT}` for the voltage phasors `v = (Ṽr, Ṽi)`.
pub fn dissipating_power(y: &Frf, omega: f64, v: [Complex64; 2]) -> Result<f64> {
    let transformed = *y.matrix() * gamma(omega)?;
    Ok(transformed.quadratic_form(transformed_input(omega, v)).re)
}

/// Time-averaged dissipating power `P̄ = P*/2` of a sinusoidal steady state
/// with peak phasors `v`.
pub fn mean_dissipating_power(y: &Frf, omega: f64, v: [Complex64; 2]) -> Result<f64> {
    Ok(0.5 * dissipating_power(y, omega, v)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::{
        frf_generator, frf_impedance, frf_power_load, generator_equilibrium, power_load_from_pq,
        ImpedanceLoad, MachineParams,
    };
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn machine(damping: f64) -> MachineParams {
        MachineParams {
            e_prime: 1.1,
            xd_prime: 0.3,
            inertia_m: 4.0,
            damping,
        }
    }

    #[test]
    fn gamma_values() {
        let g1 = gamma(1.0).unwrap();
        assert_eq!(
            g1,
            Mat2::new(c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0))
        );
        let g2 = gamma(2.0).unwrap();
        assert_eq!(
            g2,
            Mat2::new(c(0.0, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.0, 0.0))
        );
        // Γ is skew-symmetric and purely imaginary, hence Hermitian.
        let g = gamma(3.7).unwrap();
        assert_eq!(g.adjoint(), g);
        let transpose = Mat2::new(g.get(0, 0), g.get(1, 0), g.get(0, 1), g.get(1, 1));
        assert_eq!(transpose, -g);
        assert!(g.0.iter().flatten().all(|z| z.re == 0.0));
        assert!((g.adjoint() * g - Mat2::identity().scale(1.0 / (3.7 * 3.7))).max_abs() < 1e-16);
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.0).is_err());
    }

    #[test]
    fn gamma_inverts_transformed_input() {
        let v = [c(0.3, -0.1), c(-0.2, 0.7)];
        let back = gamma(2.5).unwrap().mul_vec(transformed_input(2.5, v));
        assert!((back[0] - v[0]).norm() < 1e-15);
        assert!((back[1] - v[1]).norm() < 1e-15);
    }

    #[test]
    fn k_of_unit_conductance() {
        // Y_z·Γ = [[1, −B], [B, 1]]·[[0, j/2], [−j/2, 0]]; B terms cancel in the Hermitian part.
        for b in [-3.0, 0.0, 0.7] {
            let k = k_matrix(&frf_impedance(&ImpedanceLoad::new(1.0, b)), 2.0).unwrap();
            let expected = Mat2::new(c(0.0, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.0, 0.0));
            assert!((k.matrix - expected).max_abs() < 1e-16, "b = {b}");
        }
    }

    #[test]
    fn k_of_power_load_and_zero() {
        let op = power_load_from_pq(0.8, 0.2, 1.0, 0.05).unwrap();
        assert_eq!(
            k_matrix(&frf_power_load(&op), 1.3).unwrap().matrix,
            Mat2::zero()
        );
        assert_eq!(
            k_matrix(&Frf(Mat2::zero()), 1.3).unwrap().matrix,
            Mat2::zero()
        );
        assert!(k_matrix(&Frf(Mat2::zero()), 0.0).is_err());
    }

    #[test]
    fn closed_form_eigenvalues() {
        assert_eq!(eig_hermitian_2x2(&Mat2::identity()).unwrap(), (1.0, 1.0));
        let k = Mat2::new(c(0.0, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.0, 0.0));
        assert_eq!(eig_hermitian_2x2(&k).unwrap(), (-0.5, 0.5));
        let k = Mat2::from_real([[2.0, 0.0], [0.0, -3.0]]);
        assert_eq!(eig_hermitian_2x2(&k).unwrap(), (-3.0, 2.0));
        let bad = Mat2::from_real([[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(
            eig_hermitian_2x2(&bad),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn generator_eigenvalue_example() {
        let gen = ClassicalGenerator::new(machine(2.0), 1.0, 0.0, 0.0).unwrap();
        let lam = generator_eig_analytic(&gen, PI).unwrap();
        // independent numeric evaluation of the formula
        assert!((lam - 0.020340169489689208).abs() < 1e-15);
        let (lo, hi) = k_matrix(&frf_generator(&gen, PI).unwrap(), PI)
            .unwrap()
            .eigenvalues()
            .unwrap();
        assert!(lo.abs() < 1e-15);
        assert!((hi - lam).abs() < 1e-12 * lam);

        let zero = ClassicalGenerator::new(machine(0.0), 1.0, 0.0, 0.0).unwrap();
        assert_eq!(generator_eig_analytic(&zero, PI).unwrap(), 0.0);
        let neg = ClassicalGenerator::new(machine(-0.5), 1.0, 0.0, 0.0).unwrap();
        assert!(generator_eig_analytic(&neg, PI).unwrap() < 0.0);
    }

    #[test]
    fn classification_of_the_three_elements() {
        let grid = default_grid();
        assert_eq!(grid.len(), 50);
        assert!((grid[0] - hz_to_rad(0.01)).abs() < 1e-15);
        assert!((grid[49] - hz_to_rad(10.0)).abs() < 1e-12);

        let op = power_load_from_pq(0.8, 0.2, 1.0, 0.0).unwrap();
        let r = classify_default(&ElementModel::PowerLoad(op), &grid).unwrap();
        assert_eq!(r.verdict, Verdict::Lossless);

        let gen = ClassicalGenerator::new(machine(2.0), 1.0, 0.0, 0.0).unwrap();
        let r = classify_default(&ElementModel::Generator(gen), &grid).unwrap();
        assert_eq!(r.verdict, Verdict::Passive);

        let neg = ClassicalGenerator {
            machine: machine(-0.1),
            ..gen
        };
        let r = classify_default(&ElementModel::Generator(neg), &grid).unwrap();
        assert_eq!(r.verdict, Verdict::NonPassive);

        let z = ImpedanceLoad::new(1.0, -0.5);
        let r = classify(&ElementModel::Impedance(z), &grid, 1e-9).unwrap();
        assert_eq!(r.verdict, Verdict::Indefinite);
        let z = ImpedanceLoad::new(0.0, -0.5);
        let r = classify_default(&ElementModel::Impedance(z), &grid).unwrap();
        assert_eq!(r.verdict, Verdict::Lossless);

        let r = classify_default(&ElementModel::Impedance(z), &grid[..1]).unwrap();
        assert_eq!(r.eigenvalues.len(), 1);

        assert!(classify_default(&ElementModel::Impedance(z), &[]).is_err());
        assert!(classify(&ElementModel::Impedance(z), &grid, 0.0).is_err());
    }

    #[test]
    fn verdict_rules() {
        let t = 1e-9;
        assert_eq!(
            verdict_from_eigenvalues(&[(1.0, 2.0), (0.5, 0.6)], t),
            Verdict::StrictlyPassive
        );
        assert_eq!(
            verdict_from_eigenvalues(&[(0.0, 2.0), (0.5, 0.6)], t),
            Verdict::Passive
        );
        assert_eq!(
            verdict_from_eigenvalues(&[(-1.0, 2.0)], t),
            Verdict::Indefinite
        );
        assert_eq!(
            verdict_from_eigenvalues(&[(-1.0, 0.0), (0.0, 1.0)], t),
            Verdict::NonPassive
        );
        assert_eq!(
            verdict_from_eigenvalues(&[(-1e-10, 1e-10)], t),
            Verdict::Lossless
        );
        assert_eq!(default_tolerance(&[(0.0, 0.0)]), 1e-12);
        assert_eq!(default_tolerance(&[(-5.0, 2.0)]), 5e-9);
    }

    #[test]
    fn resistor_power_against_time_average() {
        // Oracle: average G·(Vr·V̇i − Vi·V̇r) over one period by midpoint quadrature.
        let (g, w, a, b, dphi) = (1.0, PI, 0.01, 0.01, PI / 2.0);
        let n = 20_000;
        let period = 2.0 * PI / w;
        let mut acc = 0.0;
        for k in 0..n {
            let t = (k as f64 + 0.5) * period / n as f64;
            let (vr, vi) = (a * (w * t + dphi).cos(), b * (w * t).cos());
            let (dvr, dvi) = (-a * w * (w * t + dphi).sin(), -b * w * (w * t).sin());
            acc += g * (vr * dvi - vi * dvr);
        }
        let mean = acc / n as f64;
        let p_star = resistor_power_analytic(g, w, a, b, dphi);
        assert!((p_star - 2.0 * PI * 1e-4).abs() < 1e-15);
        assert!((0.5 * p_star - mean).abs() < 1e-12);
        assert_eq!(resistor_power_analytic(g, w, a, b, 0.0), 0.0);
        assert!(resistor_power_analytic(g, w, a, b, -PI / 5.0) < 0.0);
    }

    #[test]
    fn dissipating_power_examples() {
        let w = 1.7;
        let op = power_load_from_pq(0.8, 0.2, 1.0, 0.0).unwrap();
        let v = [c(0.4, -0.2), c(0.1, 0.9)];
        assert_eq!(dissipating_power(&frf_power_load(&op), w, v).unwrap(), 0.0);
        assert_eq!(dissipating_power(&Frf(Mat2::zero()), w, v).unwrap(), 0.0);

        // Ṽr = 1, Ṽi = e^{jπ/2}: θr − θi = −π/2, so P* = −2·G·Ω.
        let g = 0.8;
        let y = frf_impedance(&ImpedanceLoad::new(g, 0.3));
        let p = dissipating_power(&y, w, [c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let analytic = resistor_power_analytic(g, w, 1.0, 1.0, -PI / 2.0);
        assert!((p - analytic).abs() < 1e-12);
        assert!((p + 2.0 * g * w).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_bounds_hold_for_random_inputs() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let gen = generator_equilibrium(machine(3.0), 1.0, 0.1, 0.6).unwrap();
        let op = power_load_from_pq(-0.4, 0.7, 0.95, -0.1).unwrap();
        let models = [
            ElementModel::Generator(gen),
            ElementModel::PowerLoad(op),
            ElementModel::Impedance(ImpedanceLoad::new(2.0, -1.0)),
        ];
        for _ in 0..1000 {
            let w = rng.gen_range(0.05..60.0);
            let v = [
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ];
            let vt = transformed_input(w, v);
            let norm2 = vt[0].norm_sqr() + vt[1].norm_sqr();
            for model in &models {
                let y = model.frf(w).unwrap();
                let (lo, hi) = k_matrix(&y, w).unwrap().eigenvalues().unwrap();
                let p = dissipating_power(&y, w, v).unwrap();
                let slack = 1e-12 * norm2 * (lo.abs() + hi.abs()).max(1.0);
                assert!(p >= lo * norm2 - slack && p <= hi * norm2 + slack);
                let kq = k_matrix(&y, w).unwrap().matrix.quadratic_form(vt).re;
                assert!((kq - p).abs() <= slack);
            }
        }
    }

    proptest! {
        #[test]
        fn k_is_hermitian(
            g in -5.0f64..5.0, b in -5.0f64..5.0, d in -2.0f64..20.0,
            w in 0.01f64..100.0, delta in -1.0f64..1.0,
        ) {
            let gen = ClassicalGenerator::new(machine(d), 1.0, delta, delta).unwrap();
            for y in [frf_impedance(&ImpedanceLoad::new(g, b)), frf_generator(&gen, w).unwrap()] {
                let k = k_matrix(&y, w).unwrap().matrix;
                prop_assert!(k.hermitian_defect() <= 1e-14 * k.max_abs().max(1.0));
            }
        }

        #[test]
        fn impedance_k_independent_of_susceptance(
            g in -5.0f64..5.0, b1 in -5.0f64..5.0, b2 in -5.0f64..5.0, w in 0.01f64..100.0,
        ) {
            let k1 = k_matrix(&frf_impedance(&ImpedanceLoad::new(g, b1)), w).unwrap();
            let k2 = k_matrix(&frf_impedance(&ImpedanceLoad::new(g, b2)), w).unwrap();
            prop_assert!((k1.matrix - k2.matrix).max_abs() <= 1e-15 * (g.abs() / w).max(1.0));
        }

        #[test]
        fn eigenvalues_match_numeric_characteristic_roots(
            a in -3.0f64..3.0, d in -3.0f64..3.0, br in -3.0f64..3.0, bi in -3.0f64..3.0,
        ) {
            let k = Mat2::new(c(a, 0.0), c(br, bi), c(br, -bi), c(d, 0.0));
            let (lo, hi) = eig_hermitian_2x2(&k).unwrap();
            prop_assert!(lo <= hi);
            // both roots annihilate det(K − λI)
            for lam in [lo, hi] {
                let shifted = k - Mat2::identity().scale(lam);
                prop_assert!(shifted.det().norm() < 1e-12 * (1.0 + k.max_abs().powi(2)));
            }
            prop_assert!((lo + hi - (a + d)).abs() < 1e-12);
        }
    }
}
