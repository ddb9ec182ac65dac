//! Dissipating-energy traces from sampled element voltages and currents.
//!
//! Two discretizations of the same integral are provided:
//!
//! - [`def_integral`] differentiates the voltages and integrates the supply
//!   rate `p = Ir·V̇i − Ii·V̇r` with the trapezoidal rule;
//! - [`def_integral_raw`] sums `Ir·dVi − Ii·dVr` directly over each sample
//!   interval, weighting the current at the interval midpoint.
//!
//! Both are second order in the sample step and agree to `O(h²)`.
//!
//! Currents are treated as perturbations: the mean of each current channel
//! over the pre-forcing window is subtracted before integrating. Voltage
//! offsets drop out of the integral since only their increments enter.

use crate::{Error, Result};

/// Default length of the pre-forcing window used for mean removal, in s.
pub const DEFAULT_PRE_WINDOW: f64 = 2.0;

/// Uniformly sampled voltage and current of one element.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementTimeSeries {
    t: Vec<f64>,
    v_r: Vec<f64>,
    v_i: Vec<f64>,
    i_r: Vec<f64>,
    i_i: Vec<f64>,
    step: f64,
}

impl ElementTimeSeries {
    pub fn new(
        t: Vec<f64>,
        v_r: Vec<f64>,
        v_i: Vec<f64>,
        i_r: Vec<f64>,
        i_i: Vec<f64>,
    ) -> Result<Self> {
        let n = t.len();
        if n < 3 {
            return Err(Error::SeriesTooShort(n));
        }
        for (channel, len) in [
            ("V_r", v_r.len()),
            ("V_i", v_i.len()),
            ("I_r", i_r.len()),
            ("I_i", i_i.len()),
        ] {
            if len != n {
                return Err(Error::LengthMismatch {
                    channel,
                    expected: n,
                    got: len,
                });
            }
        }
        let step = (t[n - 1] - t[0]) / (n - 1) as f64;
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time axis is not increasing (step {step})"
            )));
        }
        for (k, pair) in t.windows(2).enumerate() {
            let deviation = pair[1] - pair[0] - step;
            if deviation.abs() > 1e-9 * step {
                return Err(Error::NonUniformSampling {
                    index: k + 1,
                    deviation,
                });
            }
        }
        Ok(Self {
            t,
            v_r,
            v_i,
            i_r,
            i_i,
            step,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Mean sample step.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn v_r(&self) -> &[f64] {
        &self.v_r
    }

    pub fn v_i(&self) -> &[f64] {
        &self.v_i
    }

    pub fn i_r(&self) -> &[f64] {
        &self.i_r
    }

    pub fn i_i(&self) -> &[f64] {
        &self.i_i
    }

    /// Same voltages, currents scaled by `factor`.
    pub fn with_scaled_currents(&self, factor: f64) -> Self {
        Self {
            i_r: self.i_r.iter().map(|x| x * factor).collect(),
            i_i: self.i_i.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }
}

/// Settings shared by both DEF integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefOptions {
    /// Leading span (s) whose current mean is removed; `0` disables removal.
    pub pre_window: f64,
    /// Forcing period (s). When set, the averaging window is a whole number
    /// of periods.
    pub period: Option<f64>,
    /// Trailing averaging window (s). Defaults to the second half of the
    /// record.
    pub window: Option<f64>,
}

impl Default for DefOptions {
    fn default() -> Self {
        Self {
            pre_window: DEFAULT_PRE_WINDOW,
            period: None,
            window: None,
        }
    }
}

impl DefOptions {
    pub fn with_period(period: f64) -> Self {
        Self {
            period: Some(period),
            ..Self::default()
        }
    }
}

/// Cumulative dissipating energy of one element.
#[derive(Clone, Debug, PartialEq)]
pub struct DefTrace {
    pub t: Vec<f64>,
    /// `E*(t)`, zero at the first sample.
    pub e_star: Vec<f64>,
    /// Least-squares slope of `E*` over the trailing window.
    pub p_bar: f64,
    /// Length of the averaging window actually used, in s.
    pub window: f64,
}

impl DefTrace {
    pub fn final_energy(&self) -> f64 {
        *self.e_star.last().expect("trace is never empty")
    }
}

/// First derivative of a uniformly sampled signal.
///
/// Central differences inside, second-order one-sided stencils at both ends;
/// exact for polynomials up to degree two.
pub fn differentiate(x: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::SeriesTooShort(n));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {h}"
        )));
    }
    let inv2h = 0.5 / h;
    let mut dx = Vec::with_capacity(n);
    dx.push((-3.0 * x[0] + 4.0 * x[1] - x[2]) * inv2h);
    dx.extend(x.windows(3).map(|w| (w[2] - w[0]) * inv2h));
    dx.push((3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) * inv2h);
    Ok(dx)
}

fn pre_window_mean(x: &[f64], samples: usize) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    x[..samples].iter().sum::<f64>() / samples as f64
}

fn perturbation_currents(ts: &ElementTimeSeries, opts: &DefOptions) -> (Vec<f64>, Vec<f64>) {
    let samples = if opts.pre_window > 0.0 {
        ((opts.pre_window / ts.step).round() as usize).min(ts.len())
    } else {
        0
    };
    let mr = pre_window_mean(&ts.i_r, samples);
    let mi = pre_window_mean(&ts.i_i, samples);
    (
        ts.i_r.iter().map(|x| x - mr).collect(),
        ts.i_i.iter().map(|x| x - mi).collect(),
    )
}

/// Instantaneous supply rate `Ir·V̇i − Ii·V̇r` with perturbation currents.
pub fn supply_rate(ts: &ElementTimeSeries, opts: &DefOptions) -> Result<Vec<f64>> {
    let dv_r = differentiate(&ts.v_r, ts.step)?;
    let dv_i = differentiate(&ts.v_i, ts.step)?;
    let (i_r, i_i) = perturbation_currents(ts, opts);
    Ok((0..ts.len())
        .map(|k| i_r[k] * dv_i[k] - i_i[k] * dv_r[k])
        .collect())
}

/// DEF integral via differentiated voltages and the trapezoidal rule.
pub fn def_integral(ts: &ElementTimeSeries, opts: &DefOptions) -> Result<DefTrace> {
    let p = supply_rate(ts, opts)?;
    let half_h = 0.5 * ts.step;
    let mut e = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    e.push(acc);
    for w in p.windows(2) {
        acc += half_h * (w[0] + w[1]);
        e.push(acc);
    }
    finish(ts, e, opts)
}

/// DEF integral summed directly as `Σ Ir·ΔVi − Ii·ΔVr` with interval-midpoint
/// currents.
pub fn def_integral_raw(ts: &ElementTimeSeries, opts: &DefOptions) -> Result<DefTrace> {
    let (i_r, i_i) = perturbation_currents(ts, opts);
    let mut e = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    e.push(acc);
    for k in 0..ts.len() - 1 {
        let d_vi = ts.v_i[k + 1] - ts.v_i[k];
        let d_vr = ts.v_r[k + 1] - ts.v_r[k];
        acc += 0.5 * (i_r[k] + i_r[k + 1]) * d_vi - 0.5 * (i_i[k] + i_i[k + 1]) * d_vr;
        e.push(acc);
    }
    finish(ts, e, opts)
}

fn finish(ts: &ElementTimeSeries, e_star: Vec<f64>, opts: &DefOptions) -> Result<DefTrace> {
    let (p_bar, window) = windowed_mean_power(&ts.t, &e_star, opts.period, opts.window)?;
    Ok(DefTrace {
        t: ts.t.clone(),
        e_star,
        p_bar,
        window,
    })
}

/// Mean dissipating power as the least-squares slope of `E*(t)` over a
/// trailing window.
///
/// The window defaults to the second half of the record. With a known period
/// it is shortened to a whole number of periods (at least one, when the
/// record allows it) and the fit carries cosine/sine terms at the forcing
/// frequency and its second harmonic, so the periodic ripple of `E*` does not
/// leak into the slope. Returns the slope and the window length used.
pub fn windowed_mean_power(
    t: &[f64],
    e_star: &[f64],
    period: Option<f64>,
    window: Option<f64>,
) -> Result<(f64, f64)> {
    let n = t.len();
    if n < 3 || e_star.len() != n {
        return Err(Error::SeriesTooShort(n.min(e_star.len())));
    }
    let span = t[n - 1] - t[0];
    let h = span / (n - 1) as f64;
    let mut w = window.unwrap_or(0.5 * span).min(span);
    if let Some(period) = period {
        if !(period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period must be positive, got {period}"
            )));
        }
        let whole = (w / period + 1e-9).floor();
        w = if whole >= 1.0 {
            whole * period
        } else {
            period.min(span)
        };
    }
    if !(w > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "averaging window must be positive, got {w}"
        )));
    }
    let count = ((w / h).round() as usize + 1).clamp(2, n);
    let ts = &t[n - count..];
    let es = &e_star[n - count..];
    let used = ts[count - 1] - ts[0];
    let slope = match period {
        // six unknowns need a few samples more than that
        Some(period) if count >= 12 => harmonic_slope(ts, es, 2.0 * std::f64::consts::PI / period),
        _ => least_squares_slope(ts, es),
    };
    Ok((slope, used))
}

fn least_squares_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let t_mean = t.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let dt = ti - t_mean;
        sty += dt * (yi - y_mean);
        stt += dt * dt;
    }
    sty / stt
}

/// Slope of the fit `y ≈ c₀ + c₁·τ + Σₖ aₖ·cos(kΩt) + bₖ·sin(kΩt)`, k = 1, 2,
/// with `τ` centred on the window.
fn harmonic_slope(t: &[f64], y: &[f64], omega: f64) -> f64 {
    const P: usize = 6;
    let t_mid = 0.5 * (t[0] + t[t.len() - 1]);
    let mut normal = [[0.0f64; P + 1]; P];
    for (&ti, &yi) in t.iter().zip(y) {
        let (s1, c1) = (omega * ti).sin_cos();
        let (s2, c2) = (2.0 * omega * ti).sin_cos();
        let row = [1.0, ti - t_mid, c1, s1, c2, s2];
        for i in 0..P {
            for j in 0..P {
                normal[i][j] += row[i] * row[j];
            }
            normal[i][P] += row[i] * yi;
        }
    }
    // Gauss-Jordan with partial pivoting
    for col in 0..P {
        let pivot = (col..P)
            .max_by(|&a, &b| normal[a][col].abs().total_cmp(&normal[b][col].abs()))
            .expect("non-empty range");
        normal.swap(col, pivot);
        let lead = normal[col];
        for (r, row) in normal.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / lead[col];
                for (x, l) in row[col..].iter_mut().zip(&lead[col..]) {
                    *x -= f * l;
                }
            }
        }
    }
    normal[1][P] / normal[1][1]
}
