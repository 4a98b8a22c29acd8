//! Reference velocity fields: the Biot-Savart kernel, the Rankine disk, and
//! the stationary odd-odd state `sgn(x1) sgn(x2)` on the torus.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity2 {
    pub u1: f64,
    pub u2: f64,
}

impl Velocity2 {
    pub const ZERO: Velocity2 = Velocity2 { u1: 0.0, u2: 0.0 };

    pub const fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    pub fn norm(self) -> f64 {
        self.u1.hypot(self.u2)
    }

    pub fn as_point(self) -> Point2 {
        Point2::new(self.u1, self.u2)
    }

    /// Radial component `u . x/|x|` with `x = p - center`; zero at the center.
    pub fn u_rad(self, p: Point2, center: Point2) -> f64 {
        let d = p - center;
        let r = d.norm();
        if r == 0.0 {
            return 0.0;
        }
        self.as_point().dot(d) / r
    }

    /// Tangential component `u . x^perp/|x|`; zero at the center.
    pub fn u_tan(self, p: Point2, center: Point2) -> f64 {
        let d = p - center;
        let r = d.norm();
        if r == 0.0 {
            return 0.0;
        }
        self.as_point().dot(d.perp()) / r
    }
}

impl From<Point2> for Velocity2 {
    fn from(p: Point2) -> Self {
        Self::new(p.x, p.y)
    }
}

impl Add for Velocity2 {
    type Output = Velocity2;
    fn add(self, o: Velocity2) -> Velocity2 {
        Velocity2::new(self.u1 + o.u1, self.u2 + o.u2)
    }
}

impl Sub for Velocity2 {
    type Output = Velocity2;
    fn sub(self, o: Velocity2) -> Velocity2 {
        Velocity2::new(self.u1 - o.u1, self.u2 - o.u2)
    }
}

impl Mul<f64> for Velocity2 {
    type Output = Velocity2;
    fn mul(self, s: f64) -> Velocity2 {
        Velocity2::new(self.u1 * s, self.u2 * s)
    }
}

/// `K(x) = x^perp / (2 pi |x|^2)`.
pub fn biot_savart_kernel(x: Point2) -> Result<Velocity2> {
    let r2 = x.norm2();
    if r2 == 0.0 {
        return Err(Error::SingularKernel);
    }
    Ok(Velocity2::from(x.perp() * (1.0 / (TAU * r2))))
}

/// Velocity of the unit-disk patch: rigid rotation at rate 1/2 inside,
/// point-vortex decay outside.
pub fn disk_velocity(x: Point2) -> Velocity2 {
    let r2 = x.norm2();
    let scale = if r2 <= 1.0 { 0.5 } else { 0.5 / r2 };
    Velocity2::from(x.perp() * scale)
}

pub fn bc_vorticity(x: Point2) -> f64 {
    sgn(x.x) * sgn(x.y)
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Truncation of the odd-odd double sine series at mode `max_mode` in each
/// index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralTruncation {
    max_mode: usize,
}

impl Default for SpectralTruncation {
    fn default() -> Self {
        Self { max_mode: 399 }
    }
}

impl SpectralTruncation {
    pub fn new(max_mode: usize) -> Result<Self> {
        if max_mode == 0 || max_mode.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "max_mode must be odd and positive, got {max_mode}"
            )));
        }
        Ok(Self { max_mode })
    }

    pub fn max_mode(self) -> usize {
        self.max_mode
    }

    /// Uniform bound on the discarded part of the stream series,
    /// `(8/pi^2)(2 + ln M)/M^2`.
    pub fn stream_tail_bound(self) -> f64 {
        let m = self.max_mode as f64;
        8.0 / (PI * PI) * (2.0 + m.ln()) / (m * m)
    }

    /// Pointwise stream tail from summation by parts in the truncated index.
    pub fn stream_tail_bound_at(self, x: Point2) -> f64 {
        let m = self.max_mode as f64;
        let s = x.x.sin().min(x.y.sin());
        if s <= 0.0 {
            return self.stream_tail_bound();
        }
        let local = 16.0 / (PI * PI) * (2.0 + m.ln()) / (m * m * m * s) + 1.0 / (PI * m * m);
        local.min(self.stream_tail_bound())
    }

    /// Pointwise bound on `|u_M - u|`; infinite on the boundary, where the
    /// velocity series only converges conditionally.
    pub fn velocity_tail_bound_at(self, x: Point2) -> f64 {
        let m = self.max_mode as f64;
        let s = x.x.sin().min(x.y.sin());
        if s <= 0.0 {
            return f64::INFINITY;
        }
        let c = 16.0 / (PI * PI) * (1.0 + 1.0 / m) + 8.0 / PI;
        std::f64::consts::SQRT_2 * c / (m * m * s)
    }

    fn odd_modes(self) -> impl Iterator<Item = usize> {
        (1..=self.max_mode).step_by(2)
    }
}

/// Coefficient of `sin(m x1) sin(n x2)` in the stream function.
#[inline]
pub fn bc_stream_coefficient(m: usize, n: usize) -> f64 {
    if m.is_multiple_of(2) || n.is_multiple_of(2) {
        return 0.0;
    }
    let (mf, nf) = (m as f64, n as f64);
    -16.0 / (PI * PI * mf * nf * (mf * mf + nf * nf))
}

/// Truncated stream function of the stationary state on `[0, pi]^2`,
/// solving `Laplace psi = 1` with `psi = 0` on the boundary.
pub fn bc_stream(x: Point2, trunc: SpectralTruncation) -> f64 {
    let sy: Vec<f64> = trunc.odd_modes().map(|n| (n as f64 * x.y).sin()).collect();
    let mut total = 0.0;
    for m in trunc.odd_modes() {
        let sm = (m as f64 * x.x).sin();
        let mut row = 0.0;
        for (k, n) in trunc.odd_modes().enumerate() {
            row += bc_stream_coefficient(m, n) * sy[k];
        }
        total += sm * row;
    }
    total
}

/// Term-wise `grad^perp` of the truncated stream series.
pub fn bc_velocity(x: Point2, trunc: SpectralTruncation) -> Velocity2 {
    let (sy, cy): (Vec<f64>, Vec<f64>) = trunc.odd_modes().map(|n| (n as f64 * x.y).sin_cos()).unzip();
    let mut u1 = 0.0;
    let mut u2 = 0.0;
    for m in trunc.odd_modes() {
        let mf = m as f64;
        let (sm, cm) = (mf * x.x).sin_cos();
        let mut a = 0.0;
        let mut b = 0.0;
        for (k, n) in trunc.odd_modes().enumerate() {
            let nf = n as f64;
            let c = bc_stream_coefficient(m, n);
            a += nf * c * cy[k];
            b += c * sy[k];
        }
        u1 -= sm * a;
        u2 += mf * cm * b;
    }
    Velocity2::new(u1, u2)
}

/// Rigid rotation at rate 1/2 about `x_c`, the leading-order model of the
/// stationary field near the center.
pub fn bc_velocity_quadratic(x: Point2) -> Velocity2 {
    Velocity2::new(-0.5 * (x.y - FRAC_PI_2), 0.5 * (x.x - FRAC_PI_2))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::geometry::X_C;

    const PSI_CENTER: f64 = -0.727_107_112_581_437_7;

    #[test]
    fn kernel_values() {
        let k = biot_savart_kernel(Point2::new(1.0, 0.0)).unwrap();
        assert_eq!(k, Velocity2::new(0.0, 1.0 / TAU));
        let k = biot_savart_kernel(Point2::new(0.0, 2.0)).unwrap();
        assert!((k.u1 + 1.0 / (4.0 * PI)).abs() < 1e-17 && k.u2 == 0.0);
        assert!(matches!(
            biot_savart_kernel(Point2::default()),
            Err(Error::SingularKernel)
        ));
    }

    #[test]
    fn disk_values() {
        assert_eq!(disk_velocity(Point2::new(0.5, 0.0)), Velocity2::new(0.0, 0.25));
        assert_eq!(disk_velocity(Point2::new(2.0, 0.0)), Velocity2::new(0.0, 0.25));
        assert_eq!(disk_velocity(Point2::default()).norm(), 0.0);
        let inside = disk_velocity(Point2::new(0.0, 1.0));
        let outside = disk_velocity(Point2::new(0.0, 1.0 + 1e-12));
        assert!((inside - outside).norm() < 1e-12);
    }

    #[test]
    fn disk_flux_through_circles_vanishes() {
        for r in [0.3, 1.0, 1.7] {
            let n = 720;
            let flux: f64 = (0..n)
                .map(|k| {
                    let th = TAU * (k as f64 + 0.5) / n as f64;
                    let p = Point2::polar(Point2::default(), r, th);
                    disk_velocity(p).u_rad(p, Point2::default()) * r * TAU / n as f64
                })
                .sum();
            assert!(flux.abs() < 1e-14);
        }
    }

    #[test]
    fn decomposition_reassembles() {
        let c = Point2::new(0.3, -0.2);
        let p = Point2::new(1.1, 0.7);
        let u = Velocity2::new(0.4, -1.3);
        let d = p - c;
        let e = d * (1.0 / d.norm());
        let back = e * u.u_rad(p, c) + e.perp() * u.u_tan(p, c);
        assert!((back - u.as_point()).norm() < 1e-15);
    }

    #[test]
    fn vorticity_signs() {
        assert_eq!(bc_vorticity(Point2::new(1.0, 1.0)), 1.0);
        assert_eq!(bc_vorticity(Point2::new(-1.0, 1.0)), -1.0);
        assert_eq!(bc_vorticity(Point2::new(0.0, 2.0)), 0.0);
    }

    #[test]
    fn truncation_must_be_odd() {
        assert!(SpectralTruncation::new(10).is_err());
        assert!(SpectralTruncation::new(0).is_err());
        assert_eq!(SpectralTruncation::default().max_mode(), 399);
    }

    #[test]
    fn stream_vanishes_on_boundary() {
        let t = SpectralTruncation::default();
        for s in [0.0, 0.4, 1.3, 2.9] {
            for p in [
                Point2::new(s, 0.0),
                Point2::new(0.0, s),
                Point2::new(PI, s),
                Point2::new(s, PI),
            ] {
                assert!(bc_stream(p, t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stream_center_value() {
        let t = SpectralTruncation::default();
        let v = bc_stream(X_C, t);
        assert!((v - PSI_CENTER).abs() <= t.stream_tail_bound_at(X_C), "{v}");
        assert!(v < 0.0);
    }

    #[test]
    fn center_is_stagnation_point() {
        let u = bc_velocity(X_C, SpectralTruncation::default());
        assert!(u.norm() < 1e-12);
    }

    #[test]
    fn near_center_matches_rigid_rotation() {
        let t = SpectralTruncation::default();
        let p = Point2::new(FRAC_PI_2 + 0.01, FRAC_PI_2);
        let u = bc_velocity(p, t);
        let q = bc_velocity_quadratic(p);
        assert!((q - Velocity2::new(0.0, 0.005)).norm() < 1e-17);
        assert!((u - q).norm() <= 0.01f64.powi(3) / 4.0 + t.velocity_tail_bound_at(p));
        assert!((q.u_tan(p, X_C) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn quadratic_model_values() {
        assert_eq!(bc_velocity_quadratic(X_C), Velocity2::ZERO);
    }

    #[test]
    fn tails_shrink_with_modes() {
        let a = SpectralTruncation::new(99).unwrap();
        let b = SpectralTruncation::new(399).unwrap();
        assert!(b.stream_tail_bound() < a.stream_tail_bound() / 10.0);
        assert!(b.velocity_tail_bound_at(X_C) < a.velocity_tail_bound_at(X_C) / 10.0);
        assert_eq!(b.velocity_tail_bound_at(Point2::new(0.0, 1.0)), f64::INFINITY);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kernel_is_homogeneous(x in -5.0f64..5.0, y in -5.0f64..5.0, lam in 0.1f64..10.0) {
            prop_assume!(x.hypot(y) > 1e-3);
            let p = Point2::new(x, y);
            let k = biot_savart_kernel(p).unwrap();
            let kl = biot_savart_kernel(p * lam).unwrap();
            prop_assert!((kl * lam - k).norm() <= 1e-15 * k.norm() * 4.0);
            prop_assert!((k.norm() * p.norm() - 1.0 / TAU).abs() < 1e-15);
        }

        #[test]
        fn stream_is_quarter_turn_invariant(x in 0.05f64..3.09, y in 0.05f64..3.09) {
            let t = SpectralTruncation::default();
            let p = Point2::new(x, y);
            let d = p - X_C;
            let q = X_C + d.perp();
            let tol = t.stream_tail_bound_at(p) + t.stream_tail_bound_at(q);
            prop_assert!((bc_stream(p, t) - bc_stream(q, t)).abs() <= tol);
        }

        #[test]
        fn velocity_is_tangent_to_level_sets(x in 0.2f64..2.94, y in 0.2f64..2.94) {
            let t = SpectralTruncation::new(199).unwrap();
            let p = Point2::new(x, y);
            let h = 1e-5;
            let gx = (bc_stream(Point2::new(x + h, y), t) - bc_stream(Point2::new(x - h, y), t)) / (2.0 * h);
            let gy = (bc_stream(Point2::new(x, y + h), t) - bc_stream(Point2::new(x, y - h), t)) / (2.0 * h);
            let u = bc_velocity(p, t);
            prop_assert!((u.u1 * gx + u.u2 * gy).abs() < 1e-8);
        }

        #[test]
        fn taylor_bounds_near_center(r in 0.0f64..0.5, th in 0.0f64..TAU) {
            let t = SpectralTruncation::default();
            let p = Point2::polar(X_C, r, th);
            let psi_c = bc_stream(X_C, t);
            let dpsi = (bc_stream(p, t) - psi_c - r * r / 4.0).abs();
            let psi_tol = r.powi(3) / 16.0 + t.stream_tail_bound_at(p) + t.stream_tail_bound_at(X_C);
            prop_assert!(dpsi <= psi_tol, "{dpsi} > {psi_tol}");
            let du = (bc_velocity(p, t) - bc_velocity_quadratic(p)).norm();
            prop_assert!(du <= r * r / 4.0 + t.velocity_tail_bound_at(p));
        }
    }
}
