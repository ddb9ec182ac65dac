//! Oscillating infinite bus feeding a classical generator, a constant-impedance
//! load and a constant-power load, all connected directly at the bus.
//!
//! The bus voltage is prescribed; the generator follows the swing equation
//!
//! ```text
//! δ̇  = Δω
//! M·Δω̇ = Pm − (E′/X′d)·(Vr·sin δ − Vi·cos δ) − D·Δω
//! ```
//!
//! integrated with fixed-step RK4. The loads are algebraic and evaluated at the
//! instantaneous voltage with their exact nonlinear relations. Every stored
//! current flows into its element.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::def::{self, DefOptions, DefTrace, ElementTimeSeries};
use crate::element::{
    generator_equilibrium, power_load_from_pq, ClassicalGenerator, ImpedanceLoad, MachineParams,
    PowerLoadOperatingPoint,
};
use crate::{Error, Result};

/// Below this bus voltage magnitude the constant-power model is abandoned.
pub const COLLAPSE_VOLTAGE: f64 = 0.1;

/// Forcing applied by the infinite bus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForcingSpec {
    /// Forcing frequency Ω in rad/s.
    pub omega: f64,
    /// Peak amplitude of the real-part oscillation.
    pub amp_r: f64,
    /// Peak amplitude of the imaginary-part oscillation.
    pub amp_i: f64,
    pub theta_r: f64,
    pub theta_i: f64,
    pub v_r0: f64,
    pub v_i0: f64,
    /// Forced span after onset, in s.
    pub duration: f64,
    /// Integration and sampling step, in s.
    pub step: f64,
    /// Half-cosine ramp length, in s.
    pub ramp: f64,
    /// Unforced lead-in before onset, in s.
    pub pre_window: f64,
}

impl ForcingSpec {
    /// Defaults for a forcing at `omega`: 0.01 pu on both channels, a ramp of
    /// two periods, a 2 s lead-in, `h = min(1 ms, T/200)` and 40 periods of
    /// forcing.
    pub fn new(omega: f64, theta_r: f64, theta_i: f64) -> Self {
        let period = 2.0 * PI / omega;
        Self {
            omega,
            amp_r: 0.01,
            amp_i: 0.01,
            theta_r,
            theta_i,
            v_r0: 1.0,
            v_i0: 0.0,
            duration: 40.0 * period,
            step: default_step(omega),
            ramp: 2.0 * period,
            pre_window: def::DEFAULT_PRE_WINDOW,
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn total_time(&self) -> f64 {
        self.pre_window + self.duration
    }

    pub fn sample_count(&self) -> usize {
        (self.total_time() / self.step).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::NonPositiveFrequency(self.omega));
        }
        if !(self.amp_r >= 0.0 && self.amp_i >= 0.0) {
            return bad(format!(
                "amplitudes must be non-negative ({}, {})",
                self.amp_r, self.amp_i
            ));
        }
        let period = self.period();
        if !(self.duration >= 10.0 * period * (1.0 - 1e-12)) {
            return bad(format!(
                "duration {} s is shorter than 10 forcing periods ({} s)",
                self.duration,
                10.0 * period
            ));
        }
        if !(self.step > 0.0 && self.step <= period / 200.0 * (1.0 + 1e-12)) {
            return bad(format!(
                "step {} s must be in (0, T/200 = {} s]",
                self.step,
                period / 200.0
            ));
        }
        if !(self.ramp >= 0.0 && self.pre_window >= 0.0) {
            return bad("ramp and pre-window must be non-negative".into());
        }
        let v0 = self.v_r0.hypot(self.v_i0);
        if !(v0 > 0.0) {
            return Err(Error::ZeroVoltage);
        }
        if [self.theta_r, self.theta_i, self.v_r0, self.v_i0]
            .iter()
            .any(|x| !x.is_finite())
        {
            return bad("non-finite forcing parameter".into());
        }
        Ok(())
    }
}

/// `min(1 ms, T/200)`.
pub fn default_step(omega: f64) -> f64 {
    (2.0 * PI / omega / 200.0).min(1e-3)
}

/// Ramp factor: 0 before onset, half-cosine rise over `ramp`, then 1.
pub fn ramp_factor(spec: &ForcingSpec, t: f64) -> f64 {
    let s = t - spec.pre_window;
    if s <= 0.0 {
        0.0
    } else if s >= spec.ramp {
        1.0
    } else {
        0.5 * (1.0 - (PI * s / spec.ramp).cos())
    }
}

/// Infinite-bus voltage `(Vr, Vi)` at time `t`.
pub fn bus_voltage(spec: &ForcingSpec, t: f64) -> (f64, f64) {
    let r = ramp_factor(spec, t);
    let wt = spec.omega * t;
    (
        spec.v_r0 + r * spec.amp_r * (wt + spec.theta_r).cos(),
        spec.v_i0 + r * spec.amp_i * (wt + spec.theta_i).cos(),
    )
}

/// Fixed active/reactive setpoint of the constant-power load.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerSetpoint {
    pub p: f64,
    pub q: f64,
}

/// Currents into the impedance and constant-power loads at bus voltage `v`.
pub fn load_currents(
    t: f64,
    v: (f64, f64),
    z: &ImpedanceLoad,
    setpoint: &PowerSetpoint,
) -> Result<((f64, f64), (f64, f64))> {
    let (v_r, v_i) = v;
    let iz = z.current(Complex64::new(v_r, v_i));
    let v2 = v_r * v_r + v_i * v_i;
    let magnitude = v2.sqrt();
    if !(magnitude >= COLLAPSE_VOLTAGE) {
        return Err(Error::VoltageCollapse { t, magnitude });
    }
    let (p, q) = (setpoint.p, setpoint.q);
    let ip = ((p * v_r + q * v_i) / v2, (p * v_i - q * v_r) / v2);
    Ok(((iz.re, iz.im), ip))
}

/// Rotor angle and speed deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorState {
    pub delta: f64,
    pub d_omega: f64,
}

fn swing_rhs(
    state: GeneratorState,
    v: (f64, f64),
    machine: &MachineParams,
    p_m: f64,
) -> (f64, f64) {
    let (s, c) = state.delta.sin_cos();
    let p_e = machine.e_prime / machine.xd_prime * (v.0 * s - v.1 * c);
    let accel = (p_m - p_e - machine.damping * state.d_omega) / machine.inertia_m;
    (state.d_omega, accel)
}

/// One RK4 step of the swing equation from `t` to `t + h`, with the bus
/// voltage sampled through `bus` at the stage times.
pub fn step_generator<F>(
    state: GeneratorState,
    t: f64,
    bus: F,
    machine: &MachineParams,
    p_m: f64,
    h: f64,
) -> Result<GeneratorState>
where
    F: Fn(f64) -> (f64, f64),
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {h}"
        )));
    }
    let at = |s: GeneratorState, (dd, dw): (f64, f64), f: f64| GeneratorState {
        delta: s.delta + f * dd,
        d_omega: s.d_omega + f * dw,
    };
    let v_mid = bus(t + 0.5 * h);
    let k1 = swing_rhs(state, bus(t), machine, p_m);
    let k2 = swing_rhs(at(state, k1, 0.5 * h), v_mid, machine, p_m);
    let k3 = swing_rhs(at(state, k2, 0.5 * h), v_mid, machine, p_m);
    let k4 = swing_rhs(at(state, k3, h), bus(t + h), machine, p_m);
    let next = GeneratorState {
        delta: state.delta + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        d_omega: state.d_omega + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    };
    if !next.delta.is_finite() || !next.d_omega.is_finite() {
        return Err(Error::NonFiniteState { t: t + h });
    }
    Ok(next)
}

/// Current into the generator: `(V − E′e^{jδ}) / (jX′d)`.
pub fn generator_current(delta: f64, v: (f64, f64), machine: &MachineParams) -> (f64, f64) {
    let e = Complex64::from_polar(machine.e_prime, delta);
    let i = (Complex64::new(v.0, v.1) - e) / Complex64::new(0.0, machine.xd_prime);
    (i.re, i.im)
}

/// Full description of one infinite-bus experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub forcing: ForcingSpec,
    pub machine: MachineParams,
    /// Generator dispatch; also the constant mechanical power.
    pub p_gen: f64,
    pub impedance: ImpedanceLoad,
    pub power_load: PowerSetpoint,
}

impl Scenario {
    /// Generator linearized at the pre-forcing bus voltage.
    pub fn generator_equilibrium(&self) -> Result<ClassicalGenerator> {
        let f = &self.forcing;
        generator_equilibrium(
            self.machine,
            f.v_r0.hypot(f.v_i0),
            f.v_i0.atan2(f.v_r0),
            self.p_gen,
        )
    }

    /// Constant-power load linearized at the pre-forcing bus voltage.
    pub fn power_operating_point(&self) -> Result<PowerLoadOperatingPoint> {
        power_load_from_pq(
            self.power_load.p,
            self.power_load.q,
            self.forcing.v_r0,
            self.forcing.v_i0,
        )
    }

    /// Peak phasors `(Ṽr, Ṽi)` of the steady forcing.
    pub fn forcing_phasors(&self) -> [Complex64; 2] {
        let f = &self.forcing;
        [
            Complex64::from_polar(f.amp_r, f.theta_r),
            Complex64::from_polar(f.amp_i, f.theta_i),
        ]
    }

    /// DEF options matched to this scenario's lead-in and period.
    pub fn def_options(&self) -> DefOptions {
        DefOptions {
            pre_window: self.forcing.pre_window,
            period: Some(self.forcing.period()),
            window: None,
        }
    }
}

/// The three elements of the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Generator,
    Impedance,
    PowerLoad,
}

impl ElementKind {
    pub const ALL: [ElementKind; 3] = [
        ElementKind::Generator,
        ElementKind::Impedance,
        ElementKind::PowerLoad,
    ];

    /// Column suffix in the time-series CSV.
    pub fn suffix(&self) -> &'static str {
        match self {
            ElementKind::Generator => "gen",
            ElementKind::Impedance => "z",
            ElementKind::PowerLoad => "p",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ElementKind::Generator => "generator",
            ElementKind::Impedance => "impedance",
            ElementKind::PowerLoad => "power_load",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gen" | "generator" => Some(ElementKind::Generator),
            "z" | "impedance" => Some(ElementKind::Impedance),
            "p" | "power" | "power_load" => Some(ElementKind::PowerLoad),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub equilibrium: ClassicalGenerator,
    pub generator: ElementTimeSeries,
    pub impedance: ElementTimeSeries,
    pub power_load: ElementTimeSeries,
    pub delta: Vec<f64>,
    pub d_omega: Vec<f64>,
}

impl ScenarioResult {
    pub fn series(&self, kind: ElementKind) -> &ElementTimeSeries {
        match kind {
            ElementKind::Generator => &self.generator,
            ElementKind::Impedance => &self.impedance,
            ElementKind::PowerLoad => &self.power_load,
        }
    }

    /// DEF trace of one element with the scenario's default options.
    pub fn def_trace(&self, kind: ElementKind) -> Result<DefTrace> {
        def::def_integral(self.series(kind), &self.scenario.def_options())
    }
}

/// Runs the experiment from the unforced equilibrium.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult> {
    let spec = scenario.forcing;
    spec.validate()?;
    let equilibrium = scenario.generator_equilibrium()?;
    let machine = &scenario.machine;
    let p_m = scenario.p_gen;
    let h = spec.step;
    let n = spec.sample_count();
    let bus = |t: f64| bus_voltage(&spec, t);

    let mut t = Vec::with_capacity(n);
    let mut v_r = Vec::with_capacity(n);
    let mut v_i = Vec::with_capacity(n);
    let mut currents: [(Vec<f64>, Vec<f64>); 3] = Default::default();
    for c in currents.iter_mut() {
        c.0.reserve(n);
        c.1.reserve(n);
    }
    let mut delta = Vec::with_capacity(n);
    let mut d_omega = Vec::with_capacity(n);

    let mut state = GeneratorState {
        delta: equilibrium.delta,
        d_omega: 0.0,
    };
    for k in 0..n {
        let tk = k as f64 * h;
        let v = bus(tk);
        let ig = generator_current(state.delta, v, machine);
        let (iz, ip) = load_currents(tk, v, &scenario.impedance, &scenario.power_load)?;
        t.push(tk);
        v_r.push(v.0);
        v_i.push(v.1);
        for (slot, i) in currents.iter_mut().zip([ig, iz, ip]) {
            slot.0.push(i.0);
            slot.1.push(i.1);
        }
        delta.push(state.delta);
        d_omega.push(state.d_omega);
        if k + 1 < n {
            state = step_generator(state, tk, bus, machine, p_m, h)?;
        }
    }

    let [(ig_r, ig_i), (iz_r, iz_i), (ip_r, ip_i)] = currents;
    let make = |i_r, i_i| ElementTimeSeries::new(t.clone(), v_r.clone(), v_i.clone(), i_r, i_i);
    Ok(ScenarioResult {
        scenario: *scenario,
        equilibrium,
        generator: make(ig_r, ig_i)?,
        impedance: make(iz_r, iz_i)?,
        power_load: make(ip_r, ip_i)?,
        delta,
        d_omega,
    })
}
