//! Classical fourth-order Runge-Kutta for marker positions.

use crate::fields::Velocity2;
use crate::geometry::Point2;
use crate::Result;

/// Advances every point by one RK4 step. `velocity` is called once per
/// stage with the stage positions and must return one velocity per point.
pub fn rk4_step<F>(x: &[Point2], dt: f64, mut velocity: F) -> Result<Vec<Point2>>
where
    F: FnMut(&[Point2]) -> Result<Vec<Velocity2>>,
{
    let stage = |base: &[Point2], k: &[Velocity2], s: f64| -> Vec<Point2> {
        base.iter().zip(k).map(|(p, u)| *p + u.as_point() * s).collect()
    };
    let k1 = velocity(x)?;
    let k2 = velocity(&stage(x, &k1, 0.5 * dt))?;
    let k3 = velocity(&stage(x, &k2, 0.5 * dt))?;
    let k4 = velocity(&stage(x, &k3, dt))?;
    Ok((0..x.len())
        .map(|i| {
            let sum = k1[i].as_point() + k2[i].as_point() * 2.0 + k3[i].as_point() * 2.0 + k4[i].as_point();
            x[i] + sum * (dt / 6.0)
        })
        .collect())
}

/// RK4 trajectory of a single point in a steady field, including the start.
pub fn rk4_trajectory(start: Point2, dt: f64, steps: usize, field: impl Fn(Point2) -> Velocity2) -> Vec<Point2> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut p = start;
    out.push(p);
    for _ in 0..steps {
        let k1 = field(p).as_point();
        let k2 = field(p + k1 * (0.5 * dt)).as_point();
        let k3 = field(p + k2 * (0.5 * dt)).as_point();
        let k4 = field(p + k3 * dt).as_point();
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        out.push(p);
    }
    out
}
