//! Cell-centered phase-space grids and the kinetic distance.

use crate::error::{invalid, Result};
use crate::scalar::{norm3, Real};

/// Uniform cell-centered grid on the velocity cube `[-l, l]^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityGrid<T> {
    pub n: usize,
    pub l: T,
}

impl<T: Real> VelocityGrid<T> {
    pub fn new(n: usize, l: T) -> Result<Self> {
        if n < 4 {
            return Err(invalid("velocity grid", format!("n_v = {n} < 4")));
        }
        if !(l > T::zero()) || !l.is_finite() {
            return Err(invalid("velocity grid", format!("l_v = {l} must be > 0")));
        }
        Ok(Self { n, l })
    }

    #[inline]
    pub fn h(&self) -> T {
        T::lit(2.0) * self.l / T::from_usize_lossy(self.n)
    }

    #[inline]
    pub fn cell_volume(&self) -> T {
        let h = self.h();
        h * h * h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Coordinate of node `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> T {
        -self.l + (T::from_usize_lossy(i) + T::lit(0.5)) * self.h()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn velocity(&self, idx: usize) -> [T; 3] {
        let [i, j, k] = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Nearest node index along one axis, if the coordinate lies in the box.
    pub fn locate(&self, c: T) -> Option<usize> {
        let s = (c + self.l) / self.h() - T::lit(0.5);
        let r = s.round();
        if r < T::zero() || r > T::from_usize_lossy(self.n - 1) {
            None
        } else {
            r.to_usize()
        }
    }
}

/// Periodic spatial grid. `dim = 0` is the spatially homogeneous mode with a
/// single cell; `dim = 1` varies along the first axis only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialGrid<T> {
    pub dim: usize,
    pub n: usize,
    pub period: T,
}

impl<T: Real> SpatialGrid<T> {
    pub fn new(dim: usize, n: usize, period: T) -> Result<Self> {
        match dim {
            0 => Ok(Self::homogeneous()),
            1 | 3 => {
                if n == 0 {
                    return Err(invalid("spatial grid", "n_x must be ≥ 1"));
                }
                if !(period > T::zero()) || !period.is_finite() {
                    return Err(invalid("spatial grid", format!("l_x = {period} must be > 0")));
                }
                Ok(Self { dim, n, period })
            }
            d => Err(invalid("spatial grid", format!("dim_x = {d} not in {{0, 1, 3}}"))),
        }
    }

    pub fn homogeneous() -> Self {
        Self {
            dim: 0,
            n: 1,
            period: T::one(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dx(&self) -> T {
        self.period / T::from_usize_lossy(self.n)
    }

    /// Volume element of one x-cell (1 in the homogeneous mode).
    #[inline]
    pub fn cell_volume(&self) -> T {
        let dx = self.dx();
        match self.dim {
            0 => T::one(),
            1 => dx,
            _ => dx * dx * dx,
        }
    }

    #[inline]
    pub fn unravel(&self, ix: usize) -> [usize; 3] {
        let n = self.n;
        match self.dim {
            0 => [0, 0, 0],
            1 => [ix, 0, 0],
            _ => [ix / (n * n), (ix / n) % n, ix % n],
        }
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        match self.dim {
            0 => 0,
            1 => c[0],
            _ => (c[0] * self.n + c[1]) * self.n + c[2],
        }
    }

    /// Cell center; inactive axes are 0.
    pub fn position(&self, ix: usize) -> [T; 3] {
        let c = self.unravel(ix);
        let dx = self.dx();
        let mut p = [T::zero(); 3];
        for (a, pa) in p.iter_mut().enumerate().take(self.dim) {
            *pa = (T::from_usize_lossy(c[a]) + T::lit(0.5)) * dx;
        }
        p
    }

    /// Minimal-image representative of a displacement on the periodic axes.
    pub fn wrap(&self, mut d: [T; 3]) -> [T; 3] {
        for da in d.iter_mut().take(self.dim) {
            *da = *da - self.period * (*da / self.period).round();
        }
        d
    }

    pub fn distance(&self, a: [T; 3], b: [T; 3]) -> T {
        norm3(self.wrap([b[0] - a[0], b[1] - a[1], b[2] - a[2]]))
    }

    /// Kinetic distance with the x-displacement wrapped on the torus.
    pub fn kinetic_distance(&self, z: &PhasePoint<T>, zp: &PhasePoint<T>) -> T {
        let dt = zp.t - z.t;
        let dx = self.wrap([
            zp.x[0] - z.x[0] - dt * z.v[0],
            zp.x[1] - z.x[1] - dt * z.v[1],
            zp.x[2] - z.x[2] - dt * z.v[2],
        ]);
        kinetic_parts(dt, dx, [zp.v[0] - z.v[0], zp.v[1] - z.v[1], zp.v[2] - z.v[2]])
    }
}

/// The product of a spatial and a velocity grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseGrid<T> {
    pub x: SpatialGrid<T>,
    pub v: VelocityGrid<T>,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(x: SpatialGrid<T>, v: VelocityGrid<T>) -> Self {
        Self { x, v }
    }

    pub fn homogeneous(n_v: usize, l_v: T) -> Result<Self> {
        Ok(Self {
            x: SpatialGrid::homogeneous(),
            v: VelocityGrid::new(n_v, l_v)?,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len() * self.v.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iv: usize) -> usize {
        ix * self.v.len() + iv
    }

    /// Phase-space volume element used by global quadratures.
    pub fn cell_volume(&self) -> T {
        self.x.cell_volume() * self.v.cell_volume()
    }
}

/// A point `z = (t, x, v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint<T> {
    pub t: T,
    pub x: [T; 3],
    pub v: [T; 3],
}

impl<T: Real> PhasePoint<T> {
    pub fn new(t: T, x: [T; 3], v: [T; 3]) -> Self {
        Self { t, x, v }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|c| c.is_finite()) && self.v.iter().all(|c| c.is_finite())
    }
}

#[inline]
fn kinetic_parts<T: Real>(dt: T, dx: [T; 3], dv: [T; 3]) -> T {
    dt.abs().sqrt() + norm3(dx).cbrt() + norm3(dv)
}

/// `ρ(z, z') = |t'−t|^{1/2} + |x'−x−(t'−t)v|^{1/3} + |v'−v|` on ℝ³ × ℝ³.
///
/// Not symmetric: the transport correction uses the velocity of `z`.
pub fn kinetic_distance<T: Real>(z: &PhasePoint<T>, zp: &PhasePoint<T>) -> T {
    let dt = zp.t - z.t;
    kinetic_parts(
        dt,
        [
            zp.x[0] - z.x[0] - dt * z.v[0],
            zp.x[1] - z.x[1] - dt * z.v[1],
            zp.x[2] - z.x[2] - dt * z.v[2],
        ],
        [zp.v[0] - z.v[0], zp.v[1] - z.v[1], zp.v[2] - z.v[2]],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(t: f64, x: [f64; 3], v: [f64; 3]) -> PhasePoint<f64> {
        PhasePoint::new(t, x, v)
    }

    #[test]
    fn velocity_grid_is_cell_centered() {
        let g = VelocityGrid::new(4, 2.0).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.coord(0), -1.5);
        assert_eq!(g.coord(3), 1.5);
        assert_eq!(g.locate(0.4), Some(2));
        assert_eq!(g.locate(9.0), None);
        let idx = g.index(1, 2, 3);
        assert_eq!(g.unravel(idx), [1, 2, 3]);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(VelocityGrid::new(3, 1.0).is_err());
        assert!(VelocityGrid::new(8, 0.0).is_err());
        assert!(SpatialGrid::new(2, 4, 1.0).is_err());
        assert!(SpatialGrid::new(1, 4, -1.0).is_err());
    }

    #[test]
    fn torus_uses_minimal_image() {
        let g = SpatialGrid::<f64>::new(1, 8, 4.0).unwrap();
        let d = g.wrap([3.5, 7.0, 0.0]);
        assert!((d[0] + 0.5).abs() < 1e-12);
        // inactive axes are not wrapped
        assert_eq!(d[1], 7.0);
        assert!((g.distance([0.25, 0.0, 0.0], [3.75, 0.0, 0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kinetic_distance_examples() {
        let o = z(0.0, [0.0; 3], [0.0; 3]);
        assert_eq!(kinetic_distance(&o, &o), 0.0);
        assert_eq!(kinetic_distance(&o, &z(1.0, [0.0; 3], [0.0; 3])), 1.0);
        let d = kinetic_distance(&o, &z(1.0, [1.0, 0.0, 0.0], [0.0; 3]));
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kinetic_distance_quasi_symmetric_over_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut worst = 0.0f64;
        for _ in 0..100_000 {
            let mut draw = || -> PhasePoint<f64> {
                let mut c = || rng.gen_range(-10.0f64..10.0);
                z(c().abs(), [c(), c(), c()], [c(), c(), c()])
            };
            let a = draw();
            let b = draw();
            let ab = kinetic_distance(&a, &b);
            let ba = kinetic_distance(&b, &a);
            if ba > 0.0 {
                worst = worst.max(ab / ba);
            }
        }
        assert!(worst <= 4.0, "ρ(z1,z2)/ρ(z2,z1) reached {worst}");
    }

    proptest! {
        #[test]
        fn kinetic_distance_scales_under_dilation(
            t in 0.0f64..5.0, tp in 0.0f64..5.0,
            x in prop::array::uniform3(-5.0f64..5.0), xp in prop::array::uniform3(-5.0f64..5.0),
            v in prop::array::uniform3(-5.0f64..5.0), vp in prop::array::uniform3(-5.0f64..5.0),
            r in 0.05f64..1.0,
        ) {
            let a = z(t, x, v);
            let b = z(tp, xp, vp);
            let dil = |p: &PhasePoint<f64>| z(r * r * p.t, p.x.map(|c| r * r * r * c), p.v.map(|c| r * c));
            let lhs = kinetic_distance(&dil(&a), &dil(&b));
            let rhs = r * kinetic_distance(&a, &b);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
        }
    }
}
