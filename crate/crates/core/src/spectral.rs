//! Odd-odd Poisson solver on `[0, pi]^2`.
//!
//! Fields live on the `(n+1)^2` nodes `(i h, j h)` with `h = pi/n`, stored
//! row-major by the x-index. Fields that are odd about an axis vanish on it,
//! so the sine transforms only see interior nodes. Sine and cosine
//! transforms of length `n` are evaluated through a complex FFT of length
//! `2n` applied to the odd or even extension.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::fields::Velocity2;
use crate::geometry::Point2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Vorticity,
    Stream,
    VelocityX,
    VelocityY,
}

impl FieldKind {
    /// Reflection parity about the x = 0 and y = 0 axes (and their images).
    fn parity(self) -> (f64, f64) {
        match self {
            FieldKind::Vorticity | FieldKind::Stream => (-1.0, -1.0),
            FieldKind::VelocityX => (-1.0, 1.0),
            FieldKind::VelocityY => (1.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    Bilinear,
    Bicubic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub kind: FieldKind,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(n: usize, kind: FieldKind) -> Self {
        Self {
            n,
            kind,
            values: vec![0.0; (n + 1) * (n + 1)],
        }
    }

    pub fn from_fn(n: usize, kind: FieldKind, f: impl Fn(Point2) -> f64 + Sync) -> Self {
        let h = PI / n as f64;
        let values = (0..(n + 1) * (n + 1))
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / (n + 1), idx % (n + 1));
                f(Point2::new(i as f64 * h, j as f64 * h))
            })
            .collect();
        Self { n, kind, values }
    }

    pub fn spacing(&self) -> f64 {
        PI / self.n as f64
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.n + 1) + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid-free node sum times cell area; boundary nodes carry zero
    /// for odd fields.
    pub fn integral(&self) -> f64 {
        let h = self.spacing();
        self.values.iter().sum::<f64>() * h * h
    }

    /// Value at an index of the periodic odd/even extension.
    #[inline]
    fn extended(&self, i: i64, j: i64) -> f64 {
        let (px, py) = self.kind.parity();
        let (ii, sx) = reflect(i, self.n as i64, px);
        let (jj, sy) = reflect(j, self.n as i64, py);
        sx * sy * self.get(ii, jj)
    }

    /// Interpolated value anywhere in the plane, through the periodic
    /// odd/even extension of the stored quarter cell.
    pub fn sample(&self, p: Point2, interp: Interp) -> f64 {
        let h = self.spacing();
        let gx = p.x / h;
        let gy = p.y / h;
        let i0 = gx.floor();
        let j0 = gy.floor();
        let tx = gx - i0;
        let ty = gy - j0;
        let (i0, j0) = (i0 as i64, j0 as i64);
        match interp {
            Interp::Bilinear => {
                let f00 = self.extended(i0, j0);
                let f10 = self.extended(i0 + 1, j0);
                let f01 = self.extended(i0, j0 + 1);
                let f11 = self.extended(i0 + 1, j0 + 1);
                (1.0 - tx) * ((1.0 - ty) * f00 + ty * f01) + tx * ((1.0 - ty) * f10 + ty * f11)
            }
            Interp::Bicubic => {
                let wx = cubic_weights(tx);
                let wy = cubic_weights(ty);
                let mut total = 0.0;
                for (a, wxa) in wx.iter().enumerate() {
                    let mut col = 0.0;
                    for (b, wyb) in wy.iter().enumerate() {
                        col += wyb * self.extended(i0 - 1 + a as i64, j0 - 1 + b as i64);
                    }
                    total += wxa * col;
                }
                total
            }
        }
    }
}

/// Maps an index of the `2n`-periodic extension into `[0, n]` with the sign
/// picked up by reflection.
#[inline]
fn reflect(i: i64, n: i64, parity: f64) -> (usize, f64) {
    let period = 2 * n;
    let k = i.rem_euclid(period);
    if k <= n {
        (k as usize, 1.0)
    } else {
        ((period - k) as usize, parity)
    }
}

/// Four-point Lagrange weights at offset `t` in `[0, 1)` for nodes -1, 0, 1, 2.
#[inline]
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Stream function and velocity components on the solver grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGrid {
    pub psi: GridField,
    pub u1: GridField,
    pub u2: GridField,
}

impl FlowGrid {
    pub fn n(&self) -> usize {
        self.psi.n
    }

    pub fn velocity_at(&self, p: Point2, interp: Interp) -> Velocity2 {
        Velocity2::new(self.u1.sample(p, interp), self.u2.sample(p, interp))
    }

    pub fn stream_at(&self, p: Point2, interp: Interp) -> f64 {
        self.psi.sample(p, interp)
    }

    /// Largest node speed.
    pub fn max_speed(&self) -> f64 {
        self.u1
            .values
            .iter()
            .zip(&self.u2.values)
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }
}

/// Cached FFT plans for one grid size.
pub struct SpectralSolver {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSolver").field("n", &self.n).finish()
    }
}

#[derive(Clone, Copy)]
enum Line {
    /// `c_k = (2/n) sum_j v_j sin(pi j k / n)`.
    SineAnalysis,
    /// `v_j = sum_k c_k sin(pi j k / n)`.
    SineSynthesis,
    /// `v_j = sum_k c_k cos(pi j k / n)`, with `c_0 = c_n = 0`.
    CosineSynthesis,
}

impl SpectralSolver {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::Domain(format!("grid size must be at least 4, got {n}")));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        Ok(Self { n, fft })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn transform_line(&self, line: Line, data: &mut [f64], buf: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.n;
        let odd = !matches!(line, Line::CosineSynthesis);
        buf[0] = Complex64::new(0.0, 0.0);
        buf[n] = Complex64::new(0.0, 0.0);
        for k in 1..n {
            buf[k] = Complex64::new(data[k], 0.0);
            buf[2 * n - k] = Complex64::new(if odd { -data[k] } else { data[k] }, 0.0);
        }
        self.fft.process_with_scratch(buf, scratch);
        match line {
            Line::SineAnalysis => {
                let scale = -1.0 / n as f64;
                for k in 1..n {
                    data[k] = scale * buf[k].im;
                }
                data[0] = 0.0;
                data[n] = 0.0;
            }
            Line::SineSynthesis => {
                for j in 1..n {
                    data[j] = -0.5 * buf[j].im;
                }
                data[0] = 0.0;
                data[n] = 0.0;
            }
            Line::CosineSynthesis => {
                for j in 0..=n {
                    data[j] = 0.5 * buf[j].re;
                }
            }
        }
    }

    /// Applies `along_x` to every column and `along_y` to every row.
    fn transform_2d(&self, values: &mut [f64], along_x: Line, along_y: Line) {
        let n = self.n;
        let stride = n + 1;
        let scratch_len = self.fft.get_inplace_scratch_len();
        let init = || {
            (
                vec![Complex64::new(0.0, 0.0); 2 * n],
                vec![Complex64::new(0.0, 0.0); scratch_len],
            )
        };
        values
            .par_chunks_mut(stride)
            .for_each_init(init, |(buf, scratch), row| {
                self.transform_line(along_y, row, buf, scratch)
            });
        let mut transposed = transpose(values, stride);
        transposed
            .par_chunks_mut(stride)
            .for_each_init(init, |(buf, scratch), col| {
                self.transform_line(along_x, col, buf, scratch)
            });
        values.copy_from_slice(&transpose(&transposed, stride));
    }

    /// Double sine coefficients `c_{kl}` of an odd-odd field, indexed like
    /// the field itself.
    pub fn sine_coefficients(&self, field: &GridField) -> Vec<f64> {
        let mut v = field.values.clone();
        self.transform_2d(&mut v, Line::SineAnalysis, Line::SineAnalysis);
        v
    }

    /// Synthesizes stream and velocity grids from stream coefficients
    /// `psi_hat[k * (n+1) + l]` of `sin(k x) sin(l y)`.
    pub fn flow_from_stream_coefficients(&self, psi_hat: &[f64]) -> FlowGrid {
        let n = self.n;
        let stride = n + 1;
        let mut psi = psi_hat.to_vec();
        let mut u1 = vec![0.0; stride * stride];
        let mut u2 = vec![0.0; stride * stride];
        for k in 0..=n {
            for l in 0..=n {
                let c = psi_hat[k * stride + l];
                u1[k * stride + l] = -(l as f64) * c;
                u2[k * stride + l] = k as f64 * c;
            }
        }
        self.transform_2d(&mut psi, Line::SineSynthesis, Line::SineSynthesis);
        self.transform_2d(&mut u1, Line::SineSynthesis, Line::CosineSynthesis);
        self.transform_2d(&mut u2, Line::CosineSynthesis, Line::SineSynthesis);
        FlowGrid {
            psi: GridField {
                n,
                kind: FieldKind::Stream,
                values: psi,
            },
            u1: GridField {
                n,
                kind: FieldKind::VelocityX,
                values: u1,
            },
            u2: GridField {
                n,
                kind: FieldKind::VelocityY,
                values: u2,
            },
        }
    }

    /// Inverts `Laplace psi = omega` with `psi = 0` on the boundary, using
    /// the continuous eigenvalues `-(k^2 + l^2)` of each sine mode.
    pub fn solve(&self, vorticity: &GridField) -> Result<FlowGrid> {
        if vorticity.n != self.n {
            return Err(Error::Domain(format!(
                "grid size {} does not match solver size {}",
                vorticity.n, self.n
            )));
        }
        let stride = self.n + 1;
        let mut c = self.sine_coefficients(vorticity);
        for k in 0..=self.n {
            for l in 0..=self.n {
                let idx = k * stride + l;
                c[idx] = if k == 0 || l == 0 || k == self.n || l == self.n {
                    0.0
                } else {
                    -c[idx] / (k * k + l * l) as f64
                };
            }
        }
        Ok(self.flow_from_stream_coefficients(&c))
    }

    /// The stationary `sgn(x1) sgn(x2)` flow from its exact stream
    /// coefficients, truncated at the grid's highest mode.
    pub fn bc_flow(&self) -> FlowGrid {
        let stride = self.n + 1;
        let mut c = vec![0.0; stride * stride];
        for k in 1..self.n {
            for l in 1..self.n {
                c[k * stride + l] = crate::fields::bc_stream_coefficient(k, l);
            }
        }
        self.flow_from_stream_coefficients(&c)
    }
}

/// Solves for the two velocity components of a vorticity grid.
pub fn solve_velocity(vorticity: &GridField) -> Result<(GridField, GridField)> {
    let flow = SpectralSolver::new(vorticity.n)?.solve(vorticity)?;
    Ok((flow.u1, flow.u2))
}

fn transpose(v: &[f64], stride: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for i in 0..stride {
        for j in 0..stride {
            out[j * stride + i] = v[i * stride + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fields::{bc_stream, bc_velocity, SpectralTruncation};
    use crate::geometry::X_C;

    fn naive_sine_coefficient(v: &[f64], n: usize, k: usize) -> f64 {
        (1..n)
            .map(|j| v[j] * (PI * (j * k) as f64 / n as f64).sin())
            .sum::<f64>()
            * 2.0
            / n as f64
    }

    #[test]
    fn line_transforms_match_direct_sums() {
        let n = 16;
        let s = SpectralSolver::new(n).unwrap();
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); s.fft.get_inplace_scratch_len()];
        let v: Vec<f64> = (0..=n)
            .map(|j| if j == 0 || j == n { 0.0 } else { (j as f64).sqrt() })
            .collect();
        let mut c = v.clone();
        s.transform_line(Line::SineAnalysis, &mut c, &mut buf, &mut scratch);
        for (k, ck) in c.iter().enumerate().take(n).skip(1) {
            assert!((ck - naive_sine_coefficient(&v, n, k)).abs() < 1e-13);
        }
        s.transform_line(Line::SineSynthesis, &mut c, &mut buf, &mut scratch);
        for (cj, vj) in c.iter().zip(&v) {
            assert!((cj - vj).abs() < 1e-13);
        }
        let mut cc = v.clone();
        s.transform_line(Line::CosineSynthesis, &mut cc, &mut buf, &mut scratch);
        for (j, ccj) in cc.iter().enumerate() {
            let direct: f64 = (1..n).map(|k| v[k] * (PI * (j * k) as f64 / n as f64).cos()).sum();
            assert!((ccj - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_vorticity_gives_zero_flow() {
        let s = SpectralSolver::new(32).unwrap();
        let f = s.solve(&GridField::zeros(32, FieldKind::Vorticity)).unwrap();
        assert_eq!(f.max_speed(), 0.0);
        assert_eq!(f.psi.max_abs(), 0.0);
    }

    #[test]
    fn single_mode_is_an_eigenfunction() {
        let n = 64;
        let w = GridField::from_fn(n, FieldKind::Vorticity, |p| p.x.sin() * p.y.sin());
        let s = SpectralSolver::new(n).unwrap();
        let f = s.solve(&w).unwrap();
        for (a, b) in f.psi.values.iter().zip(&w.values) {
            assert!((a + 0.5 * b).abs() < 1e-14);
        }
        // u = (-sin x cos y, cos x sin y) / -2.
        let h = PI / n as f64;
        for i in 0..=n {
            for j in 0..=n {
                let (x, y) = (i as f64 * h, j as f64 * h);
                assert!((f.u1.get(i, j) - 0.5 * x.sin() * y.cos()).abs() < 1e-14);
                assert!((f.u2.get(i, j) + 0.5 * x.cos() * y.sin()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn uniform_vorticity_matches_stream_series() {
        let t = SpectralTruncation::default();
        let mut last = f64::INFINITY;
        for n in [32, 64, 128] {
            let w = GridField::from_fn(n, FieldKind::Vorticity, |p| {
                if p.x > 0.0 && p.y > 0.0 && p.x < PI - 1e-12 && p.y < PI - 1e-12 {
                    1.0
                } else {
                    0.0
                }
            });
            let f = SpectralSolver::new(n).unwrap().solve(&w).unwrap();
            let err = (f.psi.sample(X_C, Interp::Bicubic) - bc_stream(X_C, t)).abs();
            assert!(err < 4.0 / (n * n) as f64, "{n}: {err}");
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn bc_flow_matches_series_velocity() {
        let s = SpectralSolver::new(128).unwrap();
        let f = s.bc_flow();
        let t = SpectralTruncation::new(127).unwrap();
        let h = PI / 128.0;
        for (i, j) in [(64, 64), (10, 90), (100, 3), (40, 70)] {
            let p = Point2::new(i as f64 * h, j as f64 * h);
            let u = bc_velocity(p, t);
            assert!((f.u1.get(i, j) - u.u1).abs() < 1e-12);
            assert!((f.u2.get(i, j) - u.u2).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_respects_symmetry() {
        let f = SpectralSolver::new(64).unwrap().bc_flow();
        for s in [0.3, 1.1, 2.7] {
            // Normal velocity vanishes on the invariant axes.
            assert!(f.velocity_at(Point2::new(0.0, s), Interp::Bicubic).u1.abs() < 1e-15);
            assert!(f.velocity_at(Point2::new(s, 0.0), Interp::Bicubic).u2.abs() < 1e-15);
            assert!(f.velocity_at(Point2::new(PI, s), Interp::Bilinear).u1.abs() < 1e-14);
        }
        // The odd extension mirrors across x = 0.
        let p = Point2::new(0.013, 0.8);
        let q = Point2::new(-0.013, 0.8);
        let (a, b) = (f.velocity_at(p, Interp::Bicubic), f.velocity_at(q, Interp::Bicubic));
        assert!((a.u1 + b.u1).abs() < 1e-15 && (a.u2 - b.u2).abs() < 1e-15);
    }

    #[test]
    fn bicubic_reproduces_cubics_exactly() {
        let n = 16;
        let h = PI / n as f64;
        let g = GridField::from_fn(n, FieldKind::Stream, |p| p.x.powi(3) - 2.0 * p.x * p.y * p.y + p.y);
        let p = Point2::new(5.3 * h, 7.71 * h);
        let exact = p.x.powi(3) - 2.0 * p.x * p.y * p.y + p.y;
        assert!((g.sample(p, Interp::Bicubic) - exact).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn analysis_inverts_synthesis(seed in 0u64..1000) {
            let n = 32;
            let stride = n + 1;
            let s = SpectralSolver::new(n).unwrap();
            let mut coeffs = vec![0.0; stride * stride];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 1..n {
                for l in 1..n {
                    coeffs[k * stride + l] = rng.gen_range(-0.5..0.5);
                }
            }
            let mut v = coeffs.clone();
            s.transform_2d(&mut v, Line::SineSynthesis, Line::SineSynthesis);
            let field = GridField { n, kind: FieldKind::Vorticity, values: v };
            let back = s.sine_coefficients(&field);
            for (a, b) in back.iter().zip(&coeffs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
