//! Adaptive Dormand–Prince 5(4) integration for autonomous linear systems.
//!
//! All dynamics in this crate (Lyapunov covariance flow, Langevin means,
//! Lindblad master equation) are time-independent, so the right-hand side is
//! a function of the state alone.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::real::{real, Real};

/// State vector abstraction for the integrator.
pub trait OdeState<T: Real>: Clone {
    fn set_zero(&mut self);
    fn copy_from(&mut self, src: &Self);
    /// `self += a * x`
    fn axpy(&mut self, a: T, x: &Self);
    /// Weighted RMS of `self` (the error estimate) against the tolerance
    /// profile `atol + rtol * max(|y0|, |y1|)`, elementwise.
    fn error_rms(&self, y0: &Self, y1: &Self, atol: T, rtol: T) -> T;
    fn is_finite(&self) -> bool;
}

impl<T: Real> OdeState<T> for DVector<T> {
    fn set_zero(&mut self) {
        self.fill(T::zero());
    }
    fn copy_from(&mut self, src: &Self) {
        self.copy_from(src);
    }
    fn axpy(&mut self, a: T, x: &Self) {
        self.zip_apply(x, |s, xi| *s += a * xi);
    }
    fn error_rms(&self, y0: &Self, y1: &Self, atol: T, rtol: T) -> T {
        weighted_rms(self.iter(), y0.iter(), y1.iter(), atol, rtol, |v| v.abs())
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl<T: Real> OdeState<T> for DMatrix<T> {
    fn set_zero(&mut self) {
        self.fill(T::zero());
    }
    fn copy_from(&mut self, src: &Self) {
        self.copy_from(src);
    }
    fn axpy(&mut self, a: T, x: &Self) {
        self.zip_apply(x, |s, xi| *s += a * xi);
    }
    fn error_rms(&self, y0: &Self, y1: &Self, atol: T, rtol: T) -> T {
        weighted_rms(self.iter(), y0.iter(), y1.iter(), atol, rtol, |v| v.abs())
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl<T: Real> OdeState<T> for DMatrix<Complex<T>> {
    fn set_zero(&mut self) {
        self.fill(Complex::new(T::zero(), T::zero()));
    }
    fn copy_from(&mut self, src: &Self) {
        self.copy_from(src);
    }
    fn axpy(&mut self, a: T, x: &Self) {
        let ac = Complex::new(a, T::zero());
        self.zip_apply(x, |s, xi| *s += ac * xi);
    }
    fn error_rms(&self, y0: &Self, y1: &Self, atol: T, rtol: T) -> T {
        weighted_rms(self.iter(), y0.iter(), y1.iter(), atol, rtol, |v| {
            (v.re * v.re + v.im * v.im).sqrt()
        })
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

fn weighted_rms<'a, T: Real, V: 'a, I>(
    err: I,
    y0: I,
    y1: I,
    atol: T,
    rtol: T,
    abs: impl Fn(&V) -> T,
) -> T
where
    I: Iterator<Item = &'a V>,
{
    let mut sum = T::zero();
    let mut n = 0usize;
    for ((e, a), b) in err.zip(y0).zip(y1) {
        let scale = atol + rtol * abs(a).max(abs(b));
        let q = abs(e) / scale;
        sum += q * q;
        n += 1;
    }
    if n == 0 {
        T::zero()
    } else {
        (sum / real::<T>(n as f64)).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
}

impl<T: Real> Default for AdaptiveOptions<T> {
    fn default() -> Self {
        AdaptiveOptions {
            rtol: real(1e-10),
            atol: real(1e-12),
            max_steps: 50_000_000,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `dy/dt = f(y)` from `y0` over `[0, t_end]`.
///
/// `f` writes the derivative of its first argument into its second.
pub fn integrate_adaptive<T, S, F>(
    mut f: F,
    y0: &S,
    t_end: T,
    opts: &AdaptiveOptions<T>,
) -> Result<S>
where
    T: Real,
    S: OdeState<T>,
    F: FnMut(&S, &mut S),
{
    if t_end < T::zero() {
        return Err(Error::validation("integration time must be nonnegative"));
    }
    if t_end == T::zero() {
        return Ok(y0.clone());
    }

    let mut y = y0.clone();
    let mut t = T::zero();
    let mut stage = y0.clone();
    let mut k: Vec<S> = (0..7).map(|_| y0.clone()).collect();
    let mut y_new = y0.clone();
    let mut err_est = y0.clone();

    let mut h = t_end * real::<T>(1e-3);
    let h_min = t_end * real::<T>(1e-14);
    let order_exp = real::<T>(-0.2);

    let mut steps = 0usize;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(Error::Integration(format!(
                "step budget exhausted at t = {:e}",
                crate::real::to_f64(t)
            )));
        }
        steps += 1;
        if t + h > t_end {
            h = t_end - t;
        }

        f(&y, &mut k[0]);
        for i in 0..6 {
            stage.copy_from(&y);
            for (j, &aij) in A[i].iter().enumerate().take(i + 1) {
                if aij != 0.0 {
                    stage.axpy(h * real::<T>(aij), &k[j]);
                }
            }
            let (done, rest) = k.split_at_mut(i + 1);
            let _ = done;
            f(&stage, &mut rest[0]);
        }

        y_new.copy_from(&y);
        err_est.set_zero();
        for i in 0..7 {
            if B5[i] != 0.0 {
                y_new.axpy(h * real::<T>(B5[i]), &k[i]);
            }
            let d = B5[i] - B4[i];
            if d != 0.0 {
                err_est.axpy(h * real::<T>(d), &k[i]);
            }
        }

        if !y_new.is_finite() {
            return Err(Error::Divergence {
                t: crate::real::to_f64(t + h),
            });
        }

        let err = err_est.error_rms(&y, &y_new, opts.atol, opts.rtol);
        if err <= T::one() {
            t += h;
            y.copy_from(&y_new);
            let grow = if err == T::zero() {
                real::<T>(5.0)
            } else {
                (real::<T>(0.9) * err.powf(order_exp)).clamp(real(0.2), real(5.0))
            };
            h *= grow;
        } else {
            h *= (real::<T>(0.9) * err.powf(order_exp)).clamp(real(0.1), real(0.9));
            if h < h_min {
                return Err(Error::Integration(format!(
                    "step size underflow at t = {:e}",
                    crate::real::to_f64(t)
                )));
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_exponential_decay() {
        let y0 = DVector::from_element(1, 1.0f64);
        let y = integrate_adaptive(
            |y: &DVector<f64>, dy: &mut DVector<f64>| dy[0] = -y[0],
            &y0,
            1.0,
            &AdaptiveOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(y[0], (-1.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn rotation_preserves_norm() {
        let y0 = DVector::from_vec(vec![1.0f64, 0.0]);
        let y = integrate_adaptive(
            |y: &DVector<f64>, dy: &mut DVector<f64>| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &y0,
            10.0,
            &AdaptiveOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(y.norm(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(y[0], 10.0f64.cos(), max_relative = 1e-8);
    }

    #[test]
    fn zero_time_is_identity() {
        let y0 = DVector::from_vec(vec![2.0f64, 3.0]);
        let y = integrate_adaptive(
            |_: &DVector<f64>, dy: &mut DVector<f64>| dy.fill(1.0),
            &y0,
            0.0,
            &AdaptiveOptions::default(),
        )
        .unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn negative_time_rejected() {
        let y0 = DVector::from_element(1, 1.0f64);
        let r = integrate_adaptive(
            |_: &DVector<f64>, dy: &mut DVector<f64>| dy.fill(0.0),
            &y0,
            -1.0,
            &AdaptiveOptions::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn blowup_reports_divergence() {
        // dy/dt = y^2 from y=1 blows up at t=1
        let y0 = DVector::from_element(1, 1.0f64);
        let r = integrate_adaptive(
            |y: &DVector<f64>, dy: &mut DVector<f64>| dy[0] = y[0] * y[0],
            &y0,
            2.0,
            &AdaptiveOptions {
                rtol: 1e-6,
                atol: 1e-9,
                max_steps: 100_000,
            },
        );
        assert!(r.is_err());
    }
}
