//! Adaptive explicit Runge–Kutta integration shared by all engines.
//!
//! Dormand–Prince 5(4) with FSAL, PI step-size control, and fourth-order
//! dense output. The problems integrated here are two-timescale (fast rates
//! up to ~Γ together with slow decays ~ω²/Γ, four decades apart), so the
//! embedded error estimate drives the step size while trajectory samples are
//! produced on a uniform grid from the dense interpolant — sampling never
//! constrains the step.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::real::Real;

/// Error-control settings for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions<T: Real> {
    /// Relative tolerance per component.
    pub rtol: T,
    /// Absolute tolerance per component.
    pub atol: T,
    /// Optional cap on the step size.
    pub h_max: Option<T>,
}

impl<T: Real> OdeOptions<T> {
    /// Defaults tuned so that decay-rate extraction at 1e-3 relative
    /// accuracy is free of integrator noise.
    pub fn tight() -> Self {
        Self {
            rtol: T::lit(1e-9),
            atol: T::lit(1e-12),
            h_max: None,
        }
    }

    /// Custom tolerances, validated.
    pub fn new(rtol: T, atol: T) -> Result<Self> {
        if rtol <= T::zero() || atol <= T::zero() {
            return Err(Error::InvalidConfig(format!(
                "tolerances must be > 0, got rtol={rtol} atol={atol}"
            )));
        }
        Ok(Self {
            rtol,
            atol,
            h_max: None,
        })
    }
}

/// Uniformly sampled trajectory: `states[k]` is the solution at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<DVector<T>>,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// 5th-order minus 4th-order weights (error estimator).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output weights.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
// PI controller exponents (order-5 method).
const ALPHA: f64 = 0.7 / 5.0;
const BETA: f64 = 0.4 / 5.0;

struct DenseSegment<T: Real> {
    t: T,
    h: T,
    r1: DVector<T>,
    r2: DVector<T>,
    r3: DVector<T>,
    r4: DVector<T>,
    r5: DVector<T>,
}

impl<T: Real> DenseSegment<T> {
    fn eval(&self, t: T) -> DVector<T> {
        let theta = (t - self.t) / self.h;
        let one_m = T::one() - theta;
        // r1 + θ(r2 + (1−θ)(r3 + θ(r4 + (1−θ) r5)))
        let inner = &self.r4 + &self.r5 * one_m;
        let mid = &self.r3 + inner * theta;
        &self.r1 + (&self.r2 + mid * one_m) * theta
    }
}

/// RMS of err_i / (atol + rtol·max(|y0_i|, |y1_i|)); NaN propagates and is
/// treated as a rejected step by the caller.
fn error_norm<T: Real>(
    err: &DVector<T>,
    y0: &DVector<T>,
    y1: &DVector<T>,
    rtol: T,
    atol: T,
) -> T {
    let n = err.len();
    let mut acc = T::zero();
    for i in 0..n {
        let scale = atol + rtol * y0[i].abs().max(y1[i].abs());
        let q = err[i] / scale;
        acc += q * q;
    }
    (acc / T::from_usize(n).expect("length")).sqrt()
}

/// Conservative initial step size from the solution and derivative scales.
fn initial_step<T: Real>(
    t0: T,
    y0: &DVector<T>,
    f0: &DVector<T>,
    span: T,
    rtol: T,
    atol: T,
) -> T {
    let n = y0.len();
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for i in 0..n {
        let sc = atol + rtol * y0[i].abs();
        let a = y0[i] / sc;
        let b = f0[i] / sc;
        d0 += a * a;
        d1 += b * b;
    }
    let fn_ = T::from_usize(n).expect("length");
    let d0 = (d0 / fn_).sqrt();
    let d1 = (d1 / fn_).sqrt();
    let h = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
        T::lit(1e-6) * span
    } else {
        T::lit(0.01) * (d0 / d1)
    };
    h.min(span).max(T::lit(1e-12) * span + T::eps() * t0.abs())
}

/// Integrate dy/dt = rhs(t, y) from `t0` to `t_end`, sampling the solution
/// every `sample_dt` (the initial state is the first sample). `rhs` writes
/// the derivative into its third argument.
///
/// Errors on step-size underflow (stiffness beyond the adaptive range at the
/// requested tolerance) and on non-finite states.
pub fn integrate_sampled<T, F>(
    mut rhs: F,
    y0: DVector<T>,
    t0: T,
    t_end: T,
    sample_dt: T,
    opts: &OdeOptions<T>,
) -> Result<Sampled<T>>
where
    T: Real,
    F: FnMut(T, &DVector<T>, &mut DVector<T>),
{
    if !(t_end > t0) {
        return Err(Error::InvalidConfig(format!(
            "integration span must be positive, got [{t0}, {t_end}]"
        )));
    }
    if sample_dt <= T::zero() {
        return Err(Error::InvalidConfig(format!(
            "sample interval must be > 0, got {sample_dt}"
        )));
    }
    if opts.rtol <= T::zero() || opts.atol <= T::zero() {
        return Err(Error::InvalidConfig(
            "tolerances must be > 0".into(),
        ));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: t0.as_f64() });
    }

    let n = y0.len();
    let span = t_end - t0;
    let n_samples = (span / sample_dt).round().to_usize().unwrap_or(0);
    let mut times = Vec::with_capacity(n_samples + 1);
    let mut states = Vec::with_capacity(n_samples + 1);
    times.push(t0);
    states.push(y0.clone());
    let mut next_sample = 1usize;
    let sample_time = |k: usize| t0 + sample_dt * T::from_usize(k).expect("index");

    let mut y = y0;
    let mut t = t0;
    let mut k1 = DVector::zeros(n);
    rhs(t, &y, &mut k1);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    let mut k5 = DVector::zeros(n);
    let mut k6 = DVector::zeros(n);
    let mut k7 = DVector::zeros(n);

    let mut h = initial_step(t0, &y, &k1, span, opts.rtol, opts.atol);
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }
    let h_floor = span * T::lit(1e-14);
    let mut err_old = T::lit(1e-4);
    let lit = T::lit;

    while t < t_end {
        if h < h_floor || !h.is_finite() {
            return Err(Error::StepSizeUnderflow {
                t: t.as_f64(),
                rtol: opts.rtol.as_f64(),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        // Stages (k1 carried over: FSAL).
        rhs(t + h * lit(C2), &(&y + &k1 * (h * lit(A21))), &mut k2);
        rhs(
            t + h * lit(C3),
            &(&y + &k1 * (h * lit(A31)) + &k2 * (h * lit(A32))),
            &mut k3,
        );
        rhs(
            t + h * lit(C4),
            &(&y + &k1 * (h * lit(A41)) + &k2 * (h * lit(A42)) + &k3 * (h * lit(A43))),
            &mut k4,
        );
        rhs(
            t + h * lit(C5),
            &(&y
                + &k1 * (h * lit(A51))
                + &k2 * (h * lit(A52))
                + &k3 * (h * lit(A53))
                + &k4 * (h * lit(A54))),
            &mut k5,
        );
        rhs(
            t + h,
            &(&y
                + &k1 * (h * lit(A61))
                + &k2 * (h * lit(A62))
                + &k3 * (h * lit(A63))
                + &k4 * (h * lit(A64))
                + &k5 * (h * lit(A65))),
            &mut k6,
        );
        let y1 = &y
            + &k1 * (h * lit(A71))
            + &k3 * (h * lit(A73))
            + &k4 * (h * lit(A74))
            + &k5 * (h * lit(A75))
            + &k6 * (h * lit(A76));
        rhs(t + h, &y1, &mut k7);

        let err_vec = &k1 * (h * lit(E1))
            + &k3 * (h * lit(E3))
            + &k4 * (h * lit(E4))
            + &k5 * (h * lit(E5))
            + &k6 * (h * lit(E6))
            + &k7 * (h * lit(E7));
        let err = error_norm(&err_vec, &y, &y1, opts.rtol, opts.atol);

        if !err.is_finite() {
            // Non-finite trial: shrink hard and retry.
            h *= lit(0.25);
            continue;
        }
        if err > T::one() {
            let fac = (lit(SAFETY) * err.powf(-lit(ALPHA))).max(lit(FAC_MIN));
            h *= fac.min(T::one());
            continue;
        }

        // Accepted.
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                t: (t + h).as_f64(),
            });
        }
        let t_new = t + h;

        // Emit samples covered by this step via dense output.
        if next_sample <= n_samples && sample_time(next_sample) <= t_new {
            let ydiff = &y1 - &y;
            let bspl = &k1 * h - &ydiff;
            let seg = DenseSegment {
                t,
                h,
                r1: y.clone(),
                r4: -(&k7 * h) + &ydiff - &bspl,
                r2: ydiff,
                r3: bspl,
                r5: (&k1 * lit(D1)
                    + &k3 * lit(D3)
                    + &k4 * lit(D4)
                    + &k5 * lit(D5)
                    + &k6 * lit(D6)
                    + &k7 * lit(D7))
                    * h,
            };
            while next_sample <= n_samples && sample_time(next_sample) <= t_new {
                let ts = sample_time(next_sample);
                times.push(ts);
                states.push(seg.eval(ts));
                next_sample += 1;
            }
        }

        // PI controller.
        let err = err.max(lit(1e-16));
        let fac = lit(SAFETY) * err.powf(-lit(ALPHA)) * err_old.powf(lit(BETA));
        let fac = fac.clamp(lit(FAC_MIN), lit(FAC_MAX));
        err_old = err;
        h *= fac;
        if let Some(hm) = opts.h_max {
            h = h.min(hm);
        }

        t = t_new;
        y = y1;
        std::mem::swap(&mut k1, &mut k7);
    }

    // Cover a final grid point lost to rounding (t_k == t_end ± ulp).
    while next_sample <= n_samples {
        times.push(sample_time(next_sample));
        states.push(y.clone());
        next_sample += 1;
    }
    Ok(Sampled { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn defaults() -> OdeOptions<f64> {
        OdeOptions::tight()
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let out = integrate_sampled(
            |_, y, dy| dy[0] = -y[0],
            DVector::from_vec(vec![1.0_f64]),
            0.0,
            5.0,
            0.5,
            &defaults(),
        )
        .unwrap();
        assert_eq!(out.times.len(), 11);
        for (t, y) in out.times.iter().zip(&out.states) {
            assert_abs_diff_eq!(y[0], (-t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator_phase_and_energy() {
        let w = 2.0 * std::f64::consts::PI;
        let out = integrate_sampled(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -w * w * y[0];
            },
            DVector::from_vec(vec![1.0_f64, 0.0]),
            0.0,
            10.0,
            0.25,
            &defaults(),
        )
        .unwrap();
        for (t, y) in out.times.iter().zip(&out.states) {
            assert_abs_diff_eq!(y[0], (w * t).cos(), epsilon = 1e-6);
            let energy = y[1] * y[1] + w * w * y[0] * y[0];
            assert_abs_diff_eq!(energy, w * w, epsilon = 1e-5 * w * w);
        }
    }

    #[test]
    fn linear_invariant_preserved_to_roundoff() {
        // y0 + y1 is conserved by the flow and by any Runge–Kutta method;
        // drift must be pure roundoff.
        let out = integrate_sampled(
            |_, y, dy| {
                dy[0] = y[1] - y[0];
                dy[1] = y[0] - y[1];
            },
            DVector::from_vec(vec![0.9_f64, -0.4]),
            0.0,
            50.0,
            5.0,
            &defaults(),
        )
        .unwrap();
        for y in &out.states {
            assert_abs_diff_eq!(y[0] + y[1], 0.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn fast_decay_remains_accurate() {
        let out = integrate_sampled(
            |_, y, dy| dy[0] = -100.0 * y[0],
            DVector::from_vec(vec![1.0_f64]),
            0.0,
            0.5,
            0.05,
            &defaults(),
        )
        .unwrap();
        for (t, y) in out.times.iter().zip(&out.states) {
            assert_abs_diff_eq!(y[0], (-100.0 * t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn sample_grid_is_uniform_and_complete() {
        let out = integrate_sampled(
            |_, _, dy| dy[0] = 1.0,
            DVector::from_vec(vec![0.0_f64]),
            0.0,
            1.0,
            0.125,
            &defaults(),
        )
        .unwrap();
        let expect: Vec<f64> = (0..=8).map(|k| k as f64 * 0.125).collect();
        assert_eq!(out.times, expect);
        for (t, y) in out.times.iter().zip(&out.states) {
            assert_abs_diff_eq!(y[0], t, epsilon = 1e-12);
        }
    }

    #[test]
    fn blowup_reports_failure_not_garbage() {
        // y' = y², y(0)=1 diverges at t=1; the integrator must error out.
        let res = integrate_sampled(
            |_, y, dy| dy[0] = y[0] * y[0],
            DVector::from_vec(vec![1.0_f64]),
            0.0,
            2.0,
            0.1,
            &defaults(),
        );
        assert!(res.is_err(), "integration through a singularity must fail");
    }

    #[test]
    fn rejects_invalid_spans_and_tolerances() {
        let y0 = DVector::from_vec(vec![1.0_f64]);
        let f = |_: f64, _: &DVector<f64>, dy: &mut DVector<f64>| dy[0] = 0.0;
        assert!(integrate_sampled(f, y0.clone(), 1.0, 1.0, 0.1, &defaults()).is_err());
        assert!(integrate_sampled(f, y0.clone(), 0.0, 1.0, 0.0, &defaults()).is_err());
        assert!(OdeOptions::new(0.0_f64, 1e-9).is_err());
        let nan0 = DVector::from_vec(vec![f64::NAN]);
        assert!(integrate_sampled(f, nan0, 0.0, 1.0, 0.1, &defaults()).is_err());
    }

    #[test]
    fn integration_is_deterministic() {
        let run = || {
            integrate_sampled(
                |t, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0] - 0.1 * y[1] + (3.0 * t).sin();
                },
                DVector::from_vec(vec![0.3_f64, -0.2]),
                0.0,
                20.0,
                0.5,
                &defaults(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.times, b.times);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn dense_output_is_fifth_order_accurate_between_steps() {
        // Coarse tolerance forces large steps; samples still land on the
        // interpolant, which must stay well inside the step error budget.
        let opts = OdeOptions::new(1e-6_f64, 1e-9).unwrap();
        let out = integrate_sampled(
            |t, _, dy| dy[0] = t.cos(),
            DVector::from_vec(vec![0.0_f64]),
            0.0,
            6.0,
            0.01,
            &opts,
        )
        .unwrap();
        for (t, y) in out.times.iter().zip(&out.states) {
            assert_abs_diff_eq!(y[0], t.sin(), epsilon = 1e-5);
        }
    }
}
