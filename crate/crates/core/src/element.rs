//! Element parameterizations and their linearized rectangular FRFs.
//!
//! Every FRF maps the column `(Ṽr, Ṽi)` of rectangular voltage perturbation
//! phasors to the column `(Ĩr, Ĩi)` of current perturbation phasors, with
//! current taken positive *into* the element. All quantities are per-unit on a
//! common base; frequencies are in rad/s.

use num_complex::Complex64;

use crate::{Error, Mat2, Result};

/// Linearized frequency response of one element at a single frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frf(pub Mat2);

impl Frf {
    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0.get(row, col)
    }
}

/// Constant-impedance shunt load with admittance `G + jB`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpedanceLoad {
    pub conductance: f64,
    pub susceptance: f64,
}

impl ImpedanceLoad {
    pub fn new(conductance: f64, susceptance: f64) -> Self {
        Self {
            conductance,
            susceptance,
        }
    }

    /// Builds the load from its impedance `R + jX`.
    pub fn from_impedance(resistance: f64, reactance: f64) -> Result<Self> {
        let z = Complex64::new(resistance, reactance);
        if z.norm_sqr() <= 0.0 || !z.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "impedance {resistance}+j{reactance} has no admittance"
            )));
        }
        let y = z.inv();
        Ok(Self::new(y.re, y.im))
    }

    pub fn admittance(&self) -> Complex64 {
        Complex64::new(self.conductance, self.susceptance)
    }

    /// Current drawn at the instantaneous bus voltage.
    pub fn current(&self, v: Complex64) -> Complex64 {
        self.admittance() * v
    }
}

/// Equilibrium of a constant-power load together with its linearization
/// coefficients `Gp`, `Bp`.
///
/// Fields are private so that `Gp`/`Bp` always agree with the stored
/// voltage and current.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLoadOperatingPoint {
    v_r: f64,
    v_i: f64,
    i_r: f64,
    i_i: f64,
    g_p: f64,
    b_p: f64,
}

impl PowerLoadOperatingPoint {
    /// Builds the operating point from steady-state voltage and current.
    pub fn from_voltage_current(v_r: f64, v_i: f64, i_r: f64, i_i: f64) -> Result<Self> {
        let v2 = v_r * v_r + v_i * v_i;
        if !(v2 > 0.0) || !v2.is_finite() {
            return Err(Error::ZeroVoltage);
        }
        Ok(Self {
            v_r,
            v_i,
            i_r,
            i_i,
            g_p: (v_r * i_r - v_i * i_i) / v2,
            b_p: (-v_i * i_r - i_i * v_r) / v2,
        })
    }

    pub fn voltage(&self) -> (f64, f64) {
        (self.v_r, self.v_i)
    }

    pub fn current(&self) -> (f64, f64) {
        (self.i_r, self.i_i)
    }

    pub fn g_p(&self) -> f64 {
        self.g_p
    }

    pub fn b_p(&self) -> f64 {
        self.b_p
    }

    /// `P = Vr·Ir + Vi·Ii`
    pub fn active_power(&self) -> f64 {
        self.v_r * self.i_r + self.v_i * self.i_i
    }

    /// `Q = Vi·Ir − Vr·Ii`
    pub fn reactive_power(&self) -> f64 {
        self.v_i * self.i_r - self.v_r * self.i_i
    }
}

/// Solves `P + jQ = V·I*` for the current at voltage `(v_r, v_i)`.
pub fn power_load_from_pq(p: f64, q: f64, v_r: f64, v_i: f64) -> Result<PowerLoadOperatingPoint> {
    let v2 = v_r * v_r + v_i * v_i;
    if !(v2 > 0.0) {
        return Err(Error::ZeroVoltage);
    }
    let i_r = (p * v_r + q * v_i) / v2;
    let i_i = (p * v_i - q * v_r) / v2;
    PowerLoadOperatingPoint::from_voltage_current(v_r, v_i, i_r, i_i)
}

/// Machine constants of a classical generator, independent of its operating
/// point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MachineParams {
    /// Internal EMF magnitude E′.
    pub e_prime: f64,
    /// Transient reactance X′d.
    pub xd_prime: f64,
    /// Inertia in pu·s² (`2H/ω_s`).
    pub inertia_m: f64,
    /// Damping, pu torque per rad/s of speed deviation. Any sign.
    pub damping: f64,
}

/// Classical (second-order) generator linearized at an operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalGenerator {
    pub machine: MachineParams,
    /// Terminal voltage magnitude.
    pub v_t: f64,
    /// Absolute rotor angle δ.
    pub delta: f64,
    /// Internal angle φ = δ − θt between E′ and the terminal voltage.
    pub phi: f64,
}

impl ClassicalGenerator {
    pub fn new(machine: MachineParams, v_t: f64, delta: f64, phi: f64) -> Result<Self> {
        let gen = Self {
            machine,
            v_t,
            delta,
            phi,
        };
        gen.validate()?;
        Ok(gen)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.machine;
        let positive = [
            ("E'", m.e_prime),
            ("X'd", m.xd_prime),
            ("M", m.inertia_m),
            ("Vt", self.v_t),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !m.damping.is_finite() || !self.delta.is_finite() || !self.phi.is_finite() {
            return Err(Error::InvalidParameter(
                "non-finite generator parameter".into(),
            ));
        }
        Ok(())
    }

    /// Synchronizing coefficient `Vt·E′·cos φ / X′d`.
    pub fn synchronizing_coefficient(&self) -> f64 {
        self.v_t * self.machine.e_prime * self.phi.cos() / self.machine.xd_prime
    }

    /// Electrical power `(E′·Vt/X′d)·sin φ`.
    pub fn electrical_power(&self) -> f64 {
        self.machine.e_prime * self.v_t * self.phi.sin() / self.machine.xd_prime
    }

    /// Denominator `(Ks − MΩ²)² + (ΩD)²` shared by γ and the K eigenvalue.
    pub(crate) fn resonance_denominator(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::NonPositiveFrequency(omega));
        }
        let m = &self.machine;
        let detune = self.synchronizing_coefficient() - m.inertia_m * omega * omega;
        let den = detune * detune + (omega * m.damping).powi(2);
        let scale = self.synchronizing_coefficient().abs() + m.inertia_m * omega * omega;
        if den <= (8.0 * f64::EPSILON * scale).powi(2) {
            return Err(Error::Resonance { omega });
        }
        Ok(den)
    }

    /// The scalar γ(Ω) weighting the rotor-angle part of the FRF.
    pub fn gamma(&self, omega: f64) -> Result<Complex64> {
        let den = self.resonance_denominator(omega)?;
        let m = &self.machine;
        let scale = (m.e_prime / m.xd_prime).powi(2);
        let jw = Complex64::new(0.0, omega);
        let num = (jw * jw * m.inertia_m + self.synchronizing_coefficient())
            - Complex64::new(0.0, omega * m.damping);
        Ok(num * (scale / den))
    }
}

/// Solves the generator equilibrium for a dispatch `p_gen` at terminal voltage
/// `v_t∠theta_t`.
pub fn generator_equilibrium(
    machine: MachineParams,
    v_t: f64,
    theta_t: f64,
    p_gen: f64,
) -> Result<ClassicalGenerator> {
    let ratio = p_gen * machine.xd_prime / (machine.e_prime * v_t);
    if !(ratio.abs() <= 1.0) {
        return Err(Error::InfeasibleDispatch { ratio });
    }
    let phi = ratio.asin();
    ClassicalGenerator::new(machine, v_t, theta_t + phi, phi)
}

pub fn frf_impedance(load: &ImpedanceLoad) -> Frf {
    let (g, b) = (load.conductance, load.susceptance);
    Frf(Mat2::from_real([[g, -b], [b, g]]))
}

pub fn frf_power_load(op: &PowerLoadOperatingPoint) -> Frf {
    let (g, b) = (op.g_p, op.b_p);
    Frf(Mat2::from_real([[-g, b], [b, g]]))
}

pub fn frf_generator(gen: &ClassicalGenerator, omega: f64) -> Result<Frf> {
    let gamma = gen.gamma(omega)?;
    let (s, c) = gen.delta.sin_cos();
    let rotor = Mat2::from_real([[s * c, -c * c], [s * s, -s * c]]).scale_complex(gamma);
    let x = gen.machine.xd_prime;
    let stator = Mat2::from_real([[0.0, 1.0 / x], [-1.0 / x, 0.0]]);
    Ok(Frf(rotor + stator))
}

/// One of the three element types.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementModel {
    Impedance(ImpedanceLoad),
    PowerLoad(PowerLoadOperatingPoint),
    Generator(ClassicalGenerator),
}

impl ElementModel {
    pub fn frf(&self, omega: f64) -> Result<Frf> {
        if !(omega > 0.0) {
            return Err(Error::NonPositiveFrequency(omega));
        }
        match self {
            ElementModel::Impedance(z) => Ok(frf_impedance(z)),
            ElementModel::PowerLoad(p) => Ok(frf_power_load(p)),
            ElementModel::Generator(g) => frf_generator(g, omega),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ElementModel::Impedance(_) => "impedance",
            ElementModel::PowerLoad(_) => "power_load",
            ElementModel::Generator(_) => "generator",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
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
    fn impedance_frf_substitution() {
        let y = frf_impedance(&ImpedanceLoad::new(1.0, -0.5));
        assert_eq!(y.0, Mat2::from_real([[1.0, 0.5], [-0.5, 1.0]]));
        assert_eq!(frf_impedance(&ImpedanceLoad::new(0.0, 0.0)).0, Mat2::zero());
    }

    #[test]
    fn impedance_from_rx() {
        // (1 + j)^-1 = 0.5 - 0.5j
        let z = ImpedanceLoad::from_impedance(1.0, 1.0).unwrap();
        assert!((z.conductance - 0.5).abs() < 1e-15);
        assert!((z.susceptance + 0.5).abs() < 1e-15);
        let y = frf_impedance(&z);
        let expected = Mat2::from_real([[0.5, 0.5], [-0.5, 0.5]]);
        assert!((y.0 - expected).max_abs() < 1e-15);
        assert!(ImpedanceLoad::from_impedance(0.0, 0.0).is_err());
    }

    #[test]
    fn power_load_unit_real_voltage() {
        let op = power_load_from_pq(0.8, 0.2, 1.0, 0.0).unwrap();
        assert_eq!(op.current(), (0.8, -0.2));
        assert!((op.g_p() - 0.8).abs() < 1e-15);
        assert!((op.b_p() - 0.2).abs() < 1e-15);
        assert_eq!(
            frf_power_load(&op).0,
            Mat2::from_real([[-0.8, 0.2], [0.2, 0.8]])
        );
    }

    #[test]
    fn power_load_unit_imaginary_voltage() {
        // Values from a linear-solve oracle of P = Vr Ir + Vi Ii, Q = Vi Ir − Vr Ii.
        let op = power_load_from_pq(0.8, 0.2, 0.0, 1.0).unwrap();
        let (i_r, i_i) = op.current();
        assert!((i_r - 0.2).abs() < 1e-15);
        assert!((i_i - 0.8).abs() < 1e-15);
        assert!((op.g_p() + 0.8).abs() < 1e-15);
        assert!((op.b_p() + 0.2).abs() < 1e-15);
    }

    #[test]
    fn power_load_zero_and_errors() {
        let op = power_load_from_pq(0.0, 0.0, 0.97, -0.1).unwrap();
        assert_eq!(op.current(), (0.0, 0.0));
        assert_eq!((op.g_p(), op.b_p()), (0.0, 0.0));
        assert_eq!(frf_power_load(&op).0, Mat2::zero());
        assert_eq!(
            power_load_from_pq(0.8, 0.2, 0.0, 0.0),
            Err(Error::ZeroVoltage)
        );
    }

    #[test]
    fn generator_gamma_and_frf_match_oracle() {
        // Oracle: γ = (E'/X')² / (M s² + D s + Ks) at s = jπ, evaluated independently.
        let gen = ClassicalGenerator::new(machine(2.0), 1.0, 0.0, 0.0).unwrap();
        let g = gen.gamma(PI).unwrap();
        assert!((g.re - -0.3642085418975833).abs() < 1e-14);
        assert!((g.im - -0.06390052704157886).abs() < 1e-14);

        let y = frf_generator(&gen, PI).unwrap();
        // δ = 0 leaves only the (0,1) rotor entry −γ.
        assert_eq!(y.get(0, 0), c(0.0, 0.0));
        assert_eq!(y.get(1, 1), c(0.0, 0.0));
        assert!((y.get(0, 1) - (-g + 1.0 / 0.3)).norm() < 1e-14);
        assert!((y.get(1, 0) - c(-1.0 / 0.3, 0.0)).norm() < 1e-14);

        let gen = ClassicalGenerator { delta: 0.3, ..gen };
        let y = frf_generator(&gen, PI).unwrap();
        let expected = Mat2::new(
            c(-0.10282380596432537, -0.018040475820001713),
            c(3.665734744723325, 0.05831995391024644),
            c(-3.3651404638409255, -0.0055805731313324225),
            c(0.10282380596432537, 0.018040475820001713),
        );
        assert!((y.0 - expected).max_abs() < 1e-13);
    }

    #[test]
    fn generator_infinite_damping_limit() {
        let gen = ClassicalGenerator::new(machine(1e12), 1.0, 0.4, 0.4).unwrap();
        let y = frf_generator(&gen, 2.0).unwrap();
        let stator = Mat2::from_real([[0.0, 1.0 / 0.3], [-1.0 / 0.3, 0.0]]);
        assert!((y.0 - stator).max_abs() < 1e-10);
    }

    #[test]
    fn generator_resonance_is_an_error() {
        // Ks = E'/X' = 11/3 with φ = 0; choose Ω so that MΩ² = Ks.
        let gen = ClassicalGenerator::new(machine(0.0), 1.0, 0.0, 0.0).unwrap();
        let omega = (gen.synchronizing_coefficient() / 4.0).sqrt();
        assert_eq!(frf_generator(&gen, omega), Err(Error::Resonance { omega }));
        assert!(frf_generator(&gen, omega * 1.01).is_ok());
        assert_eq!(
            frf_generator(&gen, 0.0),
            Err(Error::NonPositiveFrequency(0.0))
        );
    }

    #[test]
    fn generator_validation() {
        let mut m = machine(1.0);
        m.xd_prime = 0.0;
        assert!(ClassicalGenerator::new(m, 1.0, 0.0, 0.0).is_err());
        assert!(ClassicalGenerator::new(machine(-0.1), 1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn equilibrium_cases() {
        let gen = generator_equilibrium(machine(1.0), 1.0, 0.2, 0.0).unwrap();
        assert_eq!(gen.delta, 0.2);
        assert_eq!(gen.phi, 0.0);

        let gen = generator_equilibrium(machine(1.0), 1.0, 0.0, 1.0).unwrap();
        assert!((gen.phi - 0.27622663076359155).abs() < 1e-15);
        assert!((gen.electrical_power() - 1.0).abs() < 1e-12);

        let p_max = 1.1 / 0.3;
        let gen = generator_equilibrium(machine(1.0), 1.0, 0.0, p_max).unwrap();
        assert!((gen.phi - PI / 2.0).abs() < 1e-7);

        assert!(matches!(
            generator_equilibrium(machine(1.0), 1.0, 0.0, 4.0),
            Err(Error::InfeasibleDispatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn impedance_frf_is_rotational(g in -10.0f64..10.0, b in -10.0f64..10.0) {
            let y = frf_impedance(&ImpedanceLoad::new(g, b));
            prop_assert_eq!(y.get(0, 0), y.get(1, 1));
            prop_assert_eq!(y.get(0, 1), -y.get(1, 0));
        }

        #[test]
        fn impedance_from_rx_inverts(r in -5.0f64..5.0, x in -5.0f64..5.0) {
            prop_assume!(r * r + x * x > 1e-6);
            let z = ImpedanceLoad::from_impedance(r, x).unwrap();
            let prod = z.admittance() * Complex64::new(r, x);
            prop_assert!((prod - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }

        #[test]
        fn pq_back_substitution(
            p in -1.0f64..1.0,
            q in -1.0f64..1.0,
            vm in 0.5f64..1.5,
            va in -PI..PI,
        ) {
            let (v_r, v_i) = (vm * va.cos(), vm * va.sin());
            let op = power_load_from_pq(p, q, v_r, v_i).unwrap();
            prop_assert!((op.active_power() - p).abs() <= 1e-12 * p.abs().max(1.0));
            prop_assert!((op.reactive_power() - q).abs() <= 1e-12 * q.abs().max(1.0));
        }

        #[test]
        fn equilibrium_reproduces_dispatch(p in -3.5f64..3.5, theta in -1.0f64..1.0) {
            let gen = generator_equilibrium(machine(1.0), 1.0, theta, p).unwrap();
            prop_assert!((gen.electrical_power() - p).abs() < 1e-12);
            prop_assert!((gen.delta - gen.phi - theta).abs() < 1e-15);
        }

        #[test]
        fn gamma_imaginary_part_negative_for_positive_damping(
            d in 0.01f64..50.0,
            omega in 1e-3f64..(200.0 * PI),
            phi in -1.2f64..1.2,
        ) {
            let gen = ClassicalGenerator::new(machine(d), 1.0, phi, phi).unwrap();
            let g = gen.gamma(omega).unwrap();
            prop_assert!(g.im < 0.0);
            prop_assert!(frf_generator(&gen, omega).unwrap().0.is_finite());
        }
    }
}
