//! Error norms between trajectories and the sample-set indicators.

use crate::error::{Error, Result};
use crate::fem::velocity_error;
use crate::schemes::Trajectory;

/// Ratio `M_ref / M` of two time grids over the same horizon.
fn time_ratio(coarse: &Trajectory, reference: &Trajectory) -> Result<usize> {
    let (mc, mr) = (coarse.steps(), reference.steps());
    let horizon_c = coarse.dt * mc as f64;
    let horizon_r = reference.dt * mr as f64;
    if mc == 0 || mr % mc != 0 || (horizon_c - horizon_r).abs() > 1e-12 * horizon_r.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "incompatible time grids: {mc} steps of {} against {mr} steps of {}",
            coarse.dt, reference.dt
        )));
    }
    Ok(mr / mc)
}

/// Coarse iterates expressed in the reference space.
fn lifted(coarse: &Trajectory, reference: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let (sc, sr) = (coarse.space(), reference.space());
    let (nc, nr) = (sc.mesh().n(), sr.mesh().n());
    if nc == nr && sc.pair() == sr.pair() {
        return Ok(coarse.velocities.clone());
    }
    if nr % nc != 0 {
        return Err(Error::InvalidArgument(format!(
            "mesh {nc} is not nested in the reference mesh {nr}"
        )));
    }
    Ok(coarse.velocities.iter().map(|u| sr.lift_velocity(sc, u)).collect())
}

/// `max_m ||e_m||^2 + dt sum_m ||grad e_m||^2` over `m = 1..M` of the coarse
/// grid, with the reference sampled at the coarse times and the coarse
/// iterates lifted into the reference space.
pub fn error_norm(coarse: &Trajectory, reference: &Trajectory) -> Result<f64> {
    let ratio = time_ratio(coarse, reference)?;
    let lifted = lifted(coarse, reference)?;
    let ops = &reference.operators;
    let mut max_l2 = 0.0f64;
    let mut sum_grad = 0.0;
    for m in 1..=coarse.steps() {
        let e: Vec<f64> = lifted[m]
            .iter()
            .zip(&reference.velocities[m * ratio])
            .map(|(a, b)| a - b)
            .collect();
        max_l2 = max_l2.max(ops.l2_sq(&e));
        sum_grad += ops.gradient_sq(&e);
    }
    Ok(max_l2 + coarse.dt * sum_grad)
}

/// The same norm against a closed-form solution `value(t, x)` with Jacobian
/// `jac(t, x)`, integrated by quadrature.
pub fn error_norm_exact(
    traj: &Trajectory,
    value: impl Fn(f64, [f64; 2]) -> [f64; 2],
    jac: impl Fn(f64, [f64; 2]) -> [[f64; 2]; 2],
) -> f64 {
    let mut max_l2 = 0.0f64;
    let mut sum_grad = 0.0;
    for m in 1..=traj.steps() {
        let t = m as f64 * traj.dt;
        let e = velocity_error(traj.space(), &traj.velocities[m], |x| value(t, x), |x| jac(t, x));
        max_l2 = max_l2.max(e.l2 * e.l2);
        sum_grad += e.h1 * e.h1;
    }
    max_l2 + traj.dt * sum_grad
}

/// `max_{m>=1} ||grad u_m||^2` of the time-discrete trajectory, sampled every
/// `stride` steps.
pub fn time_statistic(traj: &Trajectory, stride: usize) -> f64 {
    (1..=traj.steps() / stride)
        .map(|m| traj.operators.gradient_sq(&traj.velocities[m * stride]))
        .fold(0.0, f64::max)
}

/// `max_m (||grad u_m||^4 + ||u_{h,m}||^2)` over the coarse grid of `fe`.
pub fn space_statistic(time: &Trajectory, fe: &Trajectory) -> Result<f64> {
    let ratio = time_ratio(fe, time)?;
    Ok((1..=fe.steps())
        .map(|m| {
            let g = time.operators.gradient_sq(&time.velocities[m * ratio]);
            g * g + fe.operators.l2_sq(&fe.velocities[m])
        })
        .fold(0.0, f64::max))
}

/// `-eps log dt`; rejects `dt >= 1`.
pub fn time_threshold(eps: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "the time indicator needs 0 < dt < 1, got {dt}"
        )));
    }
    Ok(-eps * dt.ln())
}

/// `-eps log h`; rejects `h >= 1`.
pub fn space_threshold(eps: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "the space indicator needs 0 < h < 1, got {h}"
        )));
    }
    Ok(-eps * h.ln())
}

/// Membership in the time sample set: `max_m ||grad u_m||^2 <= -eps log dt`.
pub fn indicator_time(traj: &Trajectory, eps: f64) -> Result<bool> {
    Ok(time_statistic(traj, 1) <= time_threshold(eps, traj.dt)?)
}

/// Membership in the space sample set:
/// `max_m (||grad u_m||^4 + ||u_{h,m}||^2) <= -eps log h`.
pub fn indicator_space(time: &Trajectory, fe: &Trajectory, eps: f64, h: f64) -> Result<bool> {
    let threshold = space_threshold(eps, h)?;
    Ok(space_statistic(time, fe)? <= threshold)
}
