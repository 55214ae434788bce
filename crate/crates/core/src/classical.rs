//! Classical anharmonic oscillator `ẍ + x + gx³ = 0`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClassicalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscState {
    pub x: f64,
    pub v: f64,
    pub t: f64,
}

/// `v²/2 + x²/2 + gx⁴/4`.
pub fn energy(s: &OscState, g: f64) -> f64 {
    0.5 * s.v * s.v + 0.5 * s.x * s.x + 0.25 * g * s.x.powi(4)
}

fn accel(x: f64, g: f64) -> f64 {
    -x - g * x * x * x
}

/// One classical Runge–Kutta step.
pub fn rk4_step(s: OscState, g: f64, dt: f64) -> OscState {
    let (x, v) = (s.x, s.v);
    let k1x = v;
    let k1v = accel(x, g);
    let k2x = v + 0.5 * dt * k1v;
    let k2v = accel(x + 0.5 * dt * k1x, g);
    let k3x = v + 0.5 * dt * k2v;
    let k3v = accel(x + 0.5 * dt * k2x, g);
    let k4x = v + dt * k3v;
    let k4v = accel(x + dt * k3x, g);
    OscState {
        x: x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        v: v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        t: s.t + dt,
    }
}

/// Trajectory of `steps + 1` states starting at `t = 0`. A negative `dt`
/// integrates backward.
pub fn integrate(g: f64, x0: f64, v0: f64, dt: f64, steps: usize) -> Result<Vec<OscState>, ClassicalError> {
    integrate_from(OscState { x: x0, v: v0, t: 0.0 }, g, dt, steps)
}

pub fn integrate_from(start: OscState, g: f64, dt: f64, steps: usize) -> Result<Vec<OscState>, ClassicalError> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(ClassicalError::InvalidArgument(format!("g = {g} must be a nonnegative real")));
    }
    if !(dt != 0.0 && dt.is_finite() && (dt * steps as f64).is_finite()) {
        return Err(ClassicalError::InvalidArgument(format!("dt = {dt} must be finite and nonzero")));
    }
    if !(start.x.is_finite() && start.v.is_finite() && start.t.is_finite()) {
        return Err(ClassicalError::NonFinite { step: 0 });
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    let mut s = start;
    for step in 1..=steps {
        s = rk4_step(s, g, dt);
        s.t = start.t + dt * step as f64;
        if !(s.x.is_finite() && s.v.is_finite()) {
            return Err(ClassicalError::NonFinite { step });
        }
        out.push(s);
    }
    Ok(out)
}

/// Final state only, without storing the trajectory.
pub fn advance(start: OscState, g: f64, dt: f64, steps: usize) -> Result<OscState, ClassicalError> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(ClassicalError::InvalidArgument(format!("dt = {dt} must be finite and nonzero")));
    }
    let mut s = start;
    for step in 1..=steps {
        s = rk4_step(s, g, dt);
        if !(s.x.is_finite() && s.v.is_finite()) {
            return Err(ClassicalError::NonFinite { step });
        }
    }
    s.t = start.t + dt * steps as f64;
    Ok(s)
}

/// Time of the first local maximum of `x` after `t = 0`, refined by
/// locating the zero of `v` with linear interpolation.
pub fn first_return_to_max(traj: &[OscState]) -> Option<f64> {
    traj.windows(2).skip(1).find(|w| w[0].v > 0.0 && w[1].v <= 0.0).map(|w| {
        let f = w[0].v / (w[0].v - w[1].v);
        w[0].t + f * (w[1].t - w[0].t)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    #[test]
    fn energy_examples() {
        assert_eq!(energy(&OscState { x: 1.0, v: 0.0, t: 0.0 }, 1.0), 0.75);
        assert_eq!(energy(&OscState { x: 0.0, v: 2.0, t: 0.0 }, 3.7), 2.0);
    }

    #[test]
    fn equilibrium_stays_put() {
        let tr = integrate(1.0, 0.0, 0.0, 0.01, 1000).unwrap();
        assert!(tr.iter().all(|s| s.x == 0.0 && s.v == 0.0));
    }

    #[test]
    fn linear_case_matches_cosine() {
        let steps = (TAU / 1e-3).round() as usize;
        let dt = TAU / steps as f64;
        let end = advance(OscState { x: 1.0, v: 0.0, t: 0.0 }, 0.0, dt, steps).unwrap();
        assert!((end.x - 1.0).abs() <= 1e-6);
    }

    /// Period `4∫₀^{π/2} dψ / √(1 + gA²(1 + sin²ψ)/2)` by composite Simpson.
    fn period_oracle(g: f64, a: f64) -> f64 {
        let n = 2000;
        let h = FRAC_PI_2 / n as f64;
        let f = |psi: f64| 1.0 / (1.0 + g * a * a * (1.0 + psi.sin().powi(2)) / 2.0).sqrt();
        let mut s = f(0.0) + f(FRAC_PI_2);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        4.0 * s * h / 3.0
    }

    #[test]
    fn hardening_spring_shortens_period() {
        let tr = integrate(1.0, 1.0, 0.0, 1e-3, 8000).unwrap();
        let t = first_return_to_max(&tr).unwrap();
        assert!(t < TAU);
        assert!((t - period_oracle(1.0, 1.0)).abs() < 1e-5, "{t} vs {}", period_oracle(1.0, 1.0));
    }

    #[test]
    fn time_reversal() {
        let fwd = advance(OscState { x: 0.8, v: -0.3, t: 0.0 }, 1.0, 1e-3, 5000).unwrap();
        let back = advance(fwd, 1.0, -1e-3, 5000).unwrap();
        assert!((back.x - 0.8).abs() < 1e-9 && (back.v + 0.3).abs() < 1e-9);
    }

    #[test]
    fn blow_up_is_reported() {
        assert!(matches!(integrate(1.0, 1e150, 0.0, 1.0, 10), Err(ClassicalError::NonFinite { .. })));
        assert!(integrate(-1.0, 1.0, 0.0, 0.1, 1).is_err());
    }
}
