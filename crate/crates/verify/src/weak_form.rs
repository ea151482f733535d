//! Weak formulation residual
//! `∫f_in φ(0) + ∫∫ f (∂_t + v·∇_x)φ − ∇_vφ·(ā∇_v f) − f b̄·∇_vφ`,
//! which vanishes for a weak solution and a test function supported in `[0, T)`.
//!
//! Time quadrature: the `∂_tφ` term uses `(φ(t_{n+1}) − φ(t_n))·(f_n + f_{n+1})/2`,
//! which telescopes exactly for a constant-in-time `∫fφ`; everything else
//! uses the trapezoid rule over the stored times.

use landau_core::coefficients::{CoefficientEngine, CoefficientField, CollisionKernel};
use landau_core::field::DistributionField;
use landau_core::solver::positive_part;
use landau_core::{Error, Result};
use rayon::prelude::*;

/// Test function with closed-form derivatives.
pub trait TestFunction: Sync {
    fn value(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64;
    fn time_derivative(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64;
    fn grad_x(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> [f64; 3];
    fn grad_v(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> [f64; 3];
    /// `φ = 0` for `t ≥ time_support()`.
    fn time_support(&self) -> f64;
    /// Half-width of the velocity box outside which `φ` is below round-off;
    /// `None` when `φ` does not depend on `v`.
    fn velocity_extent(&self) -> Option<f64>;
}

fn smooth_step(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    let s = a / (a + b);
    let ds = a * b * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))) / ((a + b) * (a + b));
    (s, ds)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VFactor {
    Constant,
    Gaussian { center: [f64; 3], sigma: f64 },
}

/// `amplitude · χ(t) · cos(k·x + phase) · V(v)` with the smooth cutoff
/// `χ(t) = 1 − S(t / t_c)`, `χ = 0` for `t ≥ t_c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparableTest {
    pub amplitude: f64,
    pub cutoff: f64,
    pub wave: [f64; 3],
    pub phase: f64,
    pub v: VFactor,
}

impl SeparableTest {
    pub fn v_independent(cutoff: f64) -> Self {
        Self {
            amplitude: 1.0,
            cutoff,
            wave: [0.0; 3],
            phase: 0.0,
            v: VFactor::Constant,
        }
    }

    pub fn gaussian(cutoff: f64, center: [f64; 3], sigma: f64) -> Self {
        Self {
            v: VFactor::Gaussian { center, sigma },
            ..Self::v_independent(cutoff)
        }
    }

    fn chi(&self, t: f64) -> (f64, f64) {
        let (s, ds) = smooth_step(t / self.cutoff);
        (1.0 - s, -ds / self.cutoff)
    }

    fn x_part(&self, x: [f64; 3]) -> (f64, f64) {
        let arg = self.wave[0] * x[0] + self.wave[1] * x[1] + self.wave[2] * x[2] + self.phase;
        (arg.cos(), -arg.sin())
    }

    fn v_part(&self, v: [f64; 3]) -> (f64, [f64; 3]) {
        match self.v {
            VFactor::Constant => (1.0, [0.0; 3]),
            VFactor::Gaussian { center, sigma } => {
                let d: [f64; 3] = std::array::from_fn(|a| v[a] - center[a]);
                let g = (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * sigma * sigma)).exp();
                (g, d.map(|c| -c / (sigma * sigma) * g))
            }
        }
    }
}

impl TestFunction for SeparableTest {
    fn value(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        self.amplitude * self.chi(t).0 * self.x_part(x).0 * self.v_part(v).0
    }

    fn time_derivative(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        self.amplitude * self.chi(t).1 * self.x_part(x).0 * self.v_part(v).0
    }

    fn grad_x(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> [f64; 3] {
        let s = self.amplitude * self.chi(t).0 * self.x_part(x).1 * self.v_part(v).0;
        self.wave.map(|k| k * s)
    }

    fn grad_v(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> [f64; 3] {
        let s = self.amplitude * self.chi(t).0 * self.x_part(x).0;
        self.v_part(v).1.map(|g| g * s)
    }

    fn time_support(&self) -> f64 {
        self.cutoff
    }

    fn velocity_extent(&self) -> Option<f64> {
        match self.v {
            VFactor::Constant => None,
            // exp(−32) is below 1e-13.
            VFactor::Gaussian { center, sigma } => Some(center.iter().fold(0.0f64, |m, c| m.max(c.abs())) + 8.0 * sigma),
        }
    }
}

/// `Σ wᵢ φᵢ`, for superposition checks.
pub struct Combination<'a>(pub Vec<(f64, &'a dyn TestFunction)>);

impl TestFunction for Combination<'_> {
    fn value(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        self.0.iter().map(|(w, p)| w * p.value(t, x, v)).sum()
    }

    fn time_derivative(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        self.0.iter().map(|(w, p)| w * p.time_derivative(t, x, v)).sum()
    }

    fn grad_x(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> [f64; 3] {
        self.0.iter().fold([0.0; 3], |acc, (w, p)| {
            let g = p.grad_x(t, x, v);
            std::array::from_fn(|a| acc[a] + w * g[a])
        })
    }

    fn grad_v(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> [f64; 3] {
        self.0.iter().fold([0.0; 3], |acc, (w, p)| {
            let g = p.grad_v(t, x, v);
            std::array::from_fn(|a| acc[a] + w * g[a])
        })
    }

    fn time_support(&self) -> f64 {
        self.0.iter().map(|(_, p)| p.time_support()).fold(0.0, f64::max)
    }

    fn velocity_extent(&self) -> Option<f64> {
        self.0.iter().filter_map(|(_, p)| p.velocity_extent()).reduce(f64::max)
    }
}

/// Terms of the residual; `signed = initial + time + transport − diffusion − drift`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeakFormTerms {
    pub initial: f64,
    pub time: f64,
    pub transport: f64,
    pub diffusion: f64,
    pub drift: f64,
    pub signed: f64,
}

/// Coefficients of `f⁺` for every snapshot.
pub fn trajectory_coefficients(trajectory: &[DistributionField<f64>], gamma: f64) -> Result<Vec<Vec<CoefficientField<f64>>>> {
    let kernel = CollisionKernel::new(gamma)?;
    let engine = CoefficientEngine::new();
    trajectory.iter().map(|f| engine.compute_all(&positive_part(f), &kernel)).collect()
}

fn velocity_gradient(grid: &landau_core::grid::VelocityGrid<f64>, s: &[f64], iv: usize) -> [f64; 3] {
    let n = grid.n;
    let c = grid.unravel(iv);
    let two_h = 2.0 * grid.h();
    std::array::from_fn(|a| {
        let at = |d: i64| {
            let j = c[a] as i64 + d;
            if j < 0 || j >= n as i64 {
                return 0.0;
            }
            let mut q = c;
            q[a] = j as usize;
            s[grid.index(q[0], q[1], q[2])]
        };
        (at(1) - at(-1)) / two_h
    })
}

/// Per-snapshot `(∫ f v·∇_xφ, ∫ ∇_vφ·ā∇_v f, ∫ f b̄·∇_vφ)` at time `t`.
fn spatial_terms(f: &DistributionField<f64>, coeffs: &[CoefficientField<f64>], phi: &dyn TestFunction, t: f64) -> (f64, f64, f64) {
    let g = &f.grid;
    let vol = g.cell_volume();
    let v_dep = phi.velocity_extent().is_some();
    let parts: Vec<(f64, f64, f64)> = (0..g.x.len())
        .into_par_iter()
        .map(|ix| {
            let x = g.x.position(ix);
            let s = f.slice(ix);
            let c = &coeffs[ix];
            let (mut tr, mut di, mut dr) = (0.0, 0.0, 0.0);
            for iv in 0..g.v.len() {
                let v = g.v.velocity(iv);
                if g.x.dim > 0 {
                    let gx = phi.grad_x(t, x, v);
                    tr += s[iv] * (v[0] * gx[0] + v[1] * gx[1] + v[2] * gx[2]);
                }
                if v_dep {
                    let gv = phi.grad_v(t, x, v);
                    if gv.iter().all(|c| *c == 0.0) {
                        continue;
                    }
                    let df = velocity_gradient(&g.v, s, iv);
                    let m = c.matrix(iv);
                    for i in 0..3 {
                        di += gv[i] * (m[i][0] * df[0] + m[i][1] * df[1] + m[i][2] * df[2]);
                        dr += s[iv] * c.b[iv][i] * gv[i];
                    }
                }
            }
            (tr, di, dr)
        })
        .collect();
    parts
        .iter()
        .fold((0.0, 0.0, 0.0), |a, p| (a.0 + p.0 * vol, a.1 + p.1 * vol, a.2 + p.2 * vol))
}

fn integral(f: &DistributionField<f64>, phi: &dyn TestFunction, t: f64) -> f64 {
    let g = &f.grid;
    let mut acc = 0.0;
    for ix in 0..g.x.len() {
        let x = g.x.position(ix);
        let s = f.slice(ix);
        for iv in 0..g.v.len() {
            if s[iv] != 0.0 {
                acc += s[iv] * phi.value(t, x, g.v.velocity(iv));
            }
        }
    }
    acc * g.cell_volume()
}

/// Signed residual and its parts. Test-function time is measured from the
/// initial data's time. `coeffs[n]` holds one slice per x-cell of snapshot `n`.
pub fn weak_form_defect(
    trajectory: &[DistributionField<f64>],
    coeffs: &[Vec<CoefficientField<f64>>],
    f_in: &DistributionField<f64>,
    phi: &dyn TestFunction,
) -> Result<WeakFormTerms> {
    let last = trajectory.last().ok_or_else(|| Error::EmptySample("empty trajectory".into()))?;
    if coeffs.len() != trajectory.len() {
        return Err(Error::GridMismatch(format!(
            "{} coefficient sets for {} snapshots",
            coeffs.len(),
            trajectory.len()
        )));
    }
    if trajectory.iter().any(|f| f.grid != f_in.grid) {
        return Err(Error::GridMismatch("trajectory and initial data use different grids".into()));
    }
    let t0 = f_in.time;
    let horizon = last.time - t0;
    if !(phi.time_support() < horizon) {
        return Err(Error::InvalidArgument {
            what: "test function",
            detail: format!("time support {} reaches the end of the trajectory {horizon}", phi.time_support()),
        });
    }
    if let Some(ext) = phi.velocity_extent() {
        if !(ext < f_in.grid.v.l) {
            return Err(Error::InvalidArgument {
                what: "test function",
                detail: format!("velocity extent {ext} touches the box boundary {}", f_in.grid.v.l),
            });
        }
    }
    let mut out = WeakFormTerms {
        initial: integral(f_in, phi, 0.0),
        ..WeakFormTerms::default()
    };
    let span: Vec<(f64, f64, f64)> = trajectory
        .iter()
        .zip(coeffs)
        .map(|(f, c)| spatial_terms(f, c, phi, f.time - t0))
        .collect();
    for n in 0..trajectory.len() - 1 {
        let (a, b) = (&trajectory[n], &trajectory[n + 1]);
        let (ta, tb) = (a.time - t0, b.time - t0);
        if !(tb > ta) {
            return Err(Error::InvalidArgument {
                what: "trajectory",
                detail: "snapshot times must increase strictly".into(),
            });
        }
        let g = &a.grid;
        let mut dphi = 0.0;
        for ix in 0..g.x.len() {
            let x = g.x.position(ix);
            let (sa, sb) = (a.slice(ix), b.slice(ix));
            for iv in 0..g.v.len() {
                let favg = 0.5 * (sa[iv] + sb[iv]);
                if favg != 0.0 {
                    let v = g.v.velocity(iv);
                    dphi += favg * (phi.value(tb, x, v) - phi.value(ta, x, v));
                }
            }
        }
        out.time += dphi * g.cell_volume();
        let w = 0.5 * (tb - ta);
        out.transport += w * (span[n].0 + span[n + 1].0);
        out.diffusion += w * (span[n].1 + span[n + 1].1);
        out.drift += w * (span[n].2 + span[n + 1].2);
    }
    out.signed = out.initial + out.time + out.transport - out.diffusion - out.drift;
    Ok(out)
}

pub fn weak_form_residual(
    trajectory: &[DistributionField<f64>],
    coeffs: &[Vec<CoefficientField<f64>>],
    f_in: &DistributionField<f64>,
    phi: &dyn TestFunction,
) -> Result<f64> {
    Ok(weak_form_defect(trajectory, coeffs, f_in, phi)?.signed.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use landau_core::field::make_maxwellian;
    use landau_core::grid::{PhaseGrid, SpatialGrid, VelocityGrid};

    #[test]
    fn closed_form_derivatives_match_differences() {
        let phi = SeparableTest {
            amplitude: 1.3,
            cutoff: 0.5,
            wave: [1.0, 0.0, 0.0],
            phase: 0.3,
            v: VFactor::Gaussian {
                center: [0.2, -0.1, 0.0],
                sigma: 0.7,
            },
        };
        let (t, x, v) = (0.2, [0.4, 0.0, 0.0], [0.3, 0.5, -0.2]);
        let h = 1e-6;
        let fd_t = (phi.value(t + h, x, v) - phi.value(t - h, x, v)) / (2.0 * h);
        assert!((fd_t - phi.time_derivative(t, x, v)).abs() < 1e-7);
        let gx = phi.grad_x(t, x, v);
        let gv = phi.grad_v(t, x, v);
        for a in 0..3 {
            let mut p = x;
            let mut m = x;
            p[a] += h;
            m[a] -= h;
            assert!(((phi.value(t, p, v) - phi.value(t, m, v)) / (2.0 * h) - gx[a]).abs() < 1e-7);
            let mut p = v;
            let mut m = v;
            p[a] += h;
            m[a] -= h;
            assert!(((phi.value(t, x, p) - phi.value(t, x, m)) / (2.0 * h) - gv[a]).abs() < 1e-7);
        }
        assert_eq!(phi.value(0.5, x, v), 0.0);
        assert_eq!(phi.value(0.0, [0.0; 3], [0.2, -0.1, 0.0]), 1.3 * 0.3f64.cos());
    }

    type Fixture = (DistributionField<f64>, Vec<DistributionField<f64>>, Vec<Vec<CoefficientField<f64>>>);

    fn constant_trajectory(n: usize) -> Fixture {
        let f_in = make_maxwellian(PhaseGrid::homogeneous(8, 4.0).unwrap(), 1.0, 1.0).unwrap();
        let traj: Vec<_> = (0..n).map(|i| f_in.clone().with_time(0.05 * i as f64)).collect();
        let coeffs = trajectory_coefficients(&traj, -1.0).unwrap();
        (f_in, traj, coeffs)
    }

    #[test]
    fn zero_trajectory_has_zero_residual() {
        let g = PhaseGrid::homogeneous(8, 4.0).unwrap();
        let z = DistributionField::zeros(g);
        let traj: Vec<_> = (0..6).map(|i| z.clone().with_time(0.1 * i as f64)).collect();
        let coeffs = trajectory_coefficients(&traj, -1.0).unwrap();
        let phi = SeparableTest::gaussian(0.4, [0.0; 3], 0.3);
        assert_eq!(weak_form_residual(&traj, &coeffs, &z, &phi).unwrap(), 0.0);
    }

    #[test]
    fn v_independent_test_sees_only_mass_change() {
        let (f_in, traj, coeffs) = constant_trajectory(11);
        let phi = SeparableTest::v_independent(0.3);
        let r = weak_form_defect(&traj, &coeffs, &f_in, &phi).unwrap();
        assert!(r.signed.abs() < 1e-14 * f_in.total_mass(), "{r:?}");
        assert_eq!((r.diffusion, r.drift), (0.0, 0.0));
        // A 1% mass jump after the cutoff is invisible; before it, it is not.
        let mut bumped = traj.clone();
        for f in bumped.iter_mut().skip(3) {
            f.values.iter_mut().for_each(|v| *v *= 1.01);
        }
        let r2 = weak_form_defect(&bumped, &coeffs, &f_in, &phi).unwrap();
        assert!(r2.signed.abs() > 1e-4);
    }

    #[test]
    fn residual_is_linear_in_the_test_function() {
        let grid = PhaseGrid::new(
            SpatialGrid::new(1, 6, 2.0 * std::f64::consts::PI).unwrap(),
            VelocityGrid::new(10, 4.0).unwrap(),
        );
        let f_in = DistributionField::from_fn(grid, |x, v| {
            (1.0 + 0.3 * x[0].sin()) * (-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).exp()
        })
        .unwrap();
        let traj: Vec<_> = (0..6)
            .map(|i| {
                let mut f = f_in.clone().with_time(0.05 * i as f64);
                f.values
                    .iter_mut()
                    .enumerate()
                    .for_each(|(j, v)| *v *= 1.0 + 0.01 * i as f64 * ((j % 7) as f64));
                f
            })
            .collect();
        let coeffs = trajectory_coefficients(&traj, -2.0).unwrap();
        let p1 = SeparableTest {
            wave: [1.0, 0.0, 0.0],
            ..SeparableTest::gaussian(0.2, [0.3, 0.0, 0.0], 0.4)
        };
        let p2 = SeparableTest::gaussian(0.15, [-0.5, 0.2, 0.0], 0.3);
        let r1 = weak_form_defect(&traj, &coeffs, &f_in, &p1).unwrap().signed;
        let r2 = weak_form_defect(&traj, &coeffs, &f_in, &p2).unwrap().signed;
        let sum = Combination(vec![(2.0, &p1), (-0.5, &p2)]);
        let r12 = weak_form_defect(&traj, &coeffs, &f_in, &sum).unwrap().signed;
        assert!((r12 - (2.0 * r1 - 0.5 * r2)).abs() < 1e-12 * (r1.abs() + r2.abs() + 1.0));
    }

    #[test]
    fn rejects_supports_touching_the_boundary() {
        let (f_in, traj, coeffs) = constant_trajectory(5);
        let late = SeparableTest::v_independent(0.2);
        assert!(weak_form_defect(&traj, &coeffs, &f_in, &late).is_err());
        let wide = SeparableTest::gaussian(0.1, [0.0; 3], 1.0);
        assert!(weak_form_defect(&traj, &coeffs, &f_in, &wide).is_err());
    }
}
