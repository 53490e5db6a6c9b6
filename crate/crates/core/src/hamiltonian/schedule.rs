use serde::{Deserialize, Serialize};

use crate::units::{mhz, mhz_per_us, to_mhz, to_us, us};
use crate::{Error, Result};

/// Instantaneous drive: Rabi frequency and detuning in rad/s, laser phase in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub omega: f64,
    pub delta: f64,
    pub phi: f64,
}

impl DriveParams {
    pub fn new(omega: f64, delta: f64, phi: f64) -> Self {
        DriveParams {
            omega,
            delta,
            phi: phi.rem_euclid(std::f64::consts::TAU),
        }
    }
}

/// Natural cubic spline through a set of knots.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidArgument("spline needs at least two matching knots".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("spline knots must be strictly increasing".into()));
        }
        // tridiagonal system for interior second derivatives (Thomas algorithm)
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Ok(NaturalSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = ((x1 - x) / h, (x - x0) / h);
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = ((x1 - x) / h, (x - x0) / h);
        (self.ys[i + 1] - self.ys[i]) / h
            + (-(3.0 * a * a - 1.0) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
}

/// A time-dependent drive program. All quantities in rad/s and seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ScheduleSpec", try_from = "ScheduleSpec")]
pub enum DriveSchedule {
    /// `Δ(t) = delta_start + rate t` at constant `Ω`, then `Ω` ramped
    /// linearly to zero over `end_ramp_time` at fixed `delta_end`.
    LinearSweep {
        delta_start: f64,
        delta_end: f64,
        rate: f64,
        omega: f64,
        end_ramp_time: f64,
    },
    /// `Ω` ramped on over `omega_ramp_time` at the first knot's detuning,
    /// `Δ` following a natural cubic spline through the knots, then `Ω` ramped
    /// off at the last knot's detuning. Knot times are measured from the end
    /// of the ramp-on.
    SplineSweep {
        points: [(f64, f64); 5],
        omega: f64,
        omega_ramp_time: f64,
        spline: NaturalSpline,
    },
    /// Constant drive for `t_q`.
    Quench {
        omega_q: f64,
        delta_q: f64,
        phi_q: f64,
        t_q: f64,
    },
}

impl DriveSchedule {
    pub fn linear_sweep(
        delta_start: f64,
        delta_end: f64,
        rate: f64,
        omega: f64,
        end_ramp_time: f64,
    ) -> Result<Self> {
        let s = DriveSchedule::LinearSweep {
            delta_start,
            delta_end,
            rate,
            omega,
            end_ramp_time,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn spline_sweep(points: [(f64, f64); 5], omega: f64, omega_ramp_time: f64) -> Result<Self> {
        let (ts, ds): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        let spline = NaturalSpline::new(&ts, &ds)?;
        let s = DriveSchedule::SplineSweep {
            points,
            omega,
            omega_ramp_time,
            spline,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn quench(omega_q: f64, delta_q: f64, phi_q: f64, t_q: f64) -> Result<Self> {
        let s = DriveSchedule::Quench {
            omega_q,
            delta_q,
            phi_q,
            t_q,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks hard invariants; returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        let mut warnings = Vec::new();
        match *self {
            DriveSchedule::LinearSweep {
                delta_start,
                delta_end,
                rate,
                omega,
                end_ramp_time,
            } => {
                let all = [delta_start, delta_end, rate, omega, end_ramp_time];
                if all.iter().any(|v| !v.is_finite()) {
                    return bad("linear sweep parameters must be finite");
                }
                if !((delta_end - delta_start) / rate > 0.0) {
                    return bad("linear sweep duration (delta_end - delta_start) / rate must be positive");
                }
                if omega < 0.0 || end_ramp_time < 0.0 {
                    return bad("omega and end_ramp_time must be non-negative");
                }
            }
            DriveSchedule::SplineSweep {
                points,
                omega,
                omega_ramp_time,
                ..
            } => {
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return bad("spline control points must be strictly increasing in time");
                }
                if omega < 0.0 || omega_ramp_time < 0.0 || !omega.is_finite() {
                    return bad("omega and omega_ramp_time must be non-negative");
                }
            }
            DriveSchedule::Quench { omega_q, t_q, .. } => {
                if !(t_q >= 0.0) || omega_q < 0.0 {
                    return bad("quench needs t_q >= 0 and omega_q >= 0");
                }
                if omega_q > 0.0 && t_q >= 1.0 / omega_q {
                    warnings.push(format!(
                        "quench time {t_q:e} s is not short compared with 1/omega_q = {:e} s",
                        1.0 / omega_q
                    ));
                }
            }
        }
        Ok(warnings)
    }

    pub fn duration(&self) -> f64 {
        match *self {
            DriveSchedule::LinearSweep {
                delta_start,
                delta_end,
                rate,
                end_ramp_time,
                ..
            } => (delta_end - delta_start) / rate + end_ramp_time,
            DriveSchedule::SplineSweep {
                points,
                omega_ramp_time,
                ..
            } => 2.0 * omega_ramp_time + points[4].0 - points[0].0,
            DriveSchedule::Quench { t_q, .. } => t_q,
        }
    }

    pub fn eval(&self, t: f64) -> Result<DriveParams> {
        let duration = self.duration();
        let slack = 1e-12 * duration.max(1e-300);
        if !(t >= -slack && t <= duration + slack) {
            return Err(Error::TimeOutOfRange { t, duration });
        }
        let t = t.clamp(0.0, duration);
        Ok(match self {
            DriveSchedule::LinearSweep {
                delta_start,
                delta_end,
                rate,
                omega,
                end_ramp_time,
            } => {
                let sweep = (delta_end - delta_start) / rate;
                if t <= sweep {
                    DriveParams::new(*omega, delta_start + rate * t, 0.0)
                } else {
                    let frac = (t - sweep) / end_ramp_time;
                    DriveParams::new(omega * (1.0 - frac).max(0.0), *delta_end, 0.0)
                }
            }
            DriveSchedule::SplineSweep {
                points,
                omega,
                omega_ramp_time,
                spline,
            } => {
                let span = points[4].0 - points[0].0;
                let tr = *omega_ramp_time;
                if t < tr {
                    DriveParams::new(omega * t / tr, points[0].1, 0.0)
                } else if t <= tr + span {
                    DriveParams::new(*omega, spline.eval(points[0].0 + t - tr), 0.0)
                } else {
                    let frac = (t - tr - span) / tr;
                    DriveParams::new(omega * (1.0 - frac).max(0.0), points[4].1, 0.0)
                }
            }
            DriveSchedule::Quench {
                omega_q,
                delta_q,
                phi_q,
                ..
            } => DriveParams::new(*omega_q, *delta_q, *phi_q),
        })
    }
}

/// Experiment-facing schedule description: frequencies in MHz (meaning
/// `2π × MHz`), times in µs, sweep rates in MHz/µs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    LinearSweep {
        #[serde(default = "units_tag")]
        units: String,
        delta_start_mhz: f64,
        delta_end_mhz: f64,
        rate_mhz_per_us: f64,
        omega_mhz: f64,
        #[serde(default)]
        end_ramp_us: f64,
    },
    SplineSweep {
        #[serde(default = "units_tag")]
        units: String,
        /// `[t_us, delta_mhz]` knots
        points: [[f64; 2]; 5],
        omega_mhz: f64,
        omega_ramp_us: f64,
    },
    Quench {
        #[serde(default = "units_tag")]
        units: String,
        omega_mhz: f64,
        delta_mhz: f64,
        phi: f64,
        t_us: f64,
    },
}

fn units_tag() -> String {
    "MHz (2pi x 1e6 rad/s), us".to_string()
}

impl From<DriveSchedule> for ScheduleSpec {
    fn from(s: DriveSchedule) -> Self {
        match s {
            DriveSchedule::LinearSweep {
                delta_start,
                delta_end,
                rate,
                omega,
                end_ramp_time,
            } => ScheduleSpec::LinearSweep {
                units: units_tag(),
                delta_start_mhz: to_mhz(delta_start),
                delta_end_mhz: to_mhz(delta_end),
                rate_mhz_per_us: rate / mhz_per_us(1.0),
                omega_mhz: to_mhz(omega),
                end_ramp_us: to_us(end_ramp_time),
            },
            DriveSchedule::SplineSweep {
                points,
                omega,
                omega_ramp_time,
                ..
            } => ScheduleSpec::SplineSweep {
                units: units_tag(),
                points: points.map(|(t, d)| [to_us(t), to_mhz(d)]),
                omega_mhz: to_mhz(omega),
                omega_ramp_us: to_us(omega_ramp_time),
            },
            DriveSchedule::Quench {
                omega_q,
                delta_q,
                phi_q,
                t_q,
            } => ScheduleSpec::Quench {
                units: units_tag(),
                omega_mhz: to_mhz(omega_q),
                delta_mhz: to_mhz(delta_q),
                phi: phi_q,
                t_us: to_us(t_q),
            },
        }
    }
}

impl TryFrom<ScheduleSpec> for DriveSchedule {
    type Error = Error;

    fn try_from(spec: ScheduleSpec) -> Result<Self> {
        match spec {
            ScheduleSpec::LinearSweep {
                delta_start_mhz,
                delta_end_mhz,
                rate_mhz_per_us,
                omega_mhz,
                end_ramp_us,
                ..
            } => DriveSchedule::linear_sweep(
                mhz(delta_start_mhz),
                mhz(delta_end_mhz),
                mhz_per_us(rate_mhz_per_us),
                mhz(omega_mhz),
                us(end_ramp_us),
            ),
            ScheduleSpec::SplineSweep {
                points,
                omega_mhz,
                omega_ramp_us,
                ..
            } => DriveSchedule::spline_sweep(
                points.map(|[t, d]| (us(t), mhz(d))),
                mhz(omega_mhz),
                us(omega_ramp_us),
            ),
            ScheduleSpec::Quench {
                omega_mhz,
                delta_mhz,
                phi,
                t_us,
                ..
            } => DriveSchedule::quench(mhz(omega_mhz), mhz(delta_mhz), phi, us(t_us)),
        }
    }
}
