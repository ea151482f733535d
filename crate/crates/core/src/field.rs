//! Distribution fields on the phase grid, weighted norms and the
//! well-distributedness predicate.

use crate::error::{invalid, Error, Result};
use crate::grid::{PhaseGrid, VelocityGrid};
use crate::scalar::{bracket, Real};

/// Snapshot of `f(t, x, v) ≥ 0`, stored x-major then v (row-major in v).
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField<T> {
    pub grid: PhaseGrid<T>,
    pub values: Vec<T>,
    pub time: T,
}

/// Exponent of a Lebesgue norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LpExponent<T> {
    Finite(T),
    Infinity,
}

impl<T: Real> LpExponent<T> {
    pub fn validate(self) -> Result<Self> {
        match self {
            LpExponent::Finite(p) if !(p >= T::one()) || !p.is_finite() => {
                Err(invalid("Lebesgue exponent", format!("p = {p} must lie in [1, ∞]")))
            }
            _ => Ok(self),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormScope {
    /// Velocity-only norm at every x-cell.
    PerSlice,
    /// Norm over the whole phase grid.
    Global,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpNorm<T> {
    Global(T),
    PerSlice(Vec<T>),
}

impl<T: Real> LpNorm<T> {
    /// Largest value: the global norm, or `sup_x` of the per-slice norms.
    pub fn sup(&self) -> T {
        match self {
            LpNorm::Global(v) => *v,
            LpNorm::PerSlice(v) => v.iter().copied().fold(T::zero(), T::max),
        }
    }
}

impl<T: Real> DistributionField<T> {
    /// Builds a field after checking nonnegativity and finiteness.
    pub fn new(grid: PhaseGrid<T>, values: Vec<T>, time: T) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(invalid(
                "distribution field",
                format!("value {} at cell {i} is negative or non-finite", values[i]),
            ));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: PhaseGrid<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
            time: T::zero(),
        }
    }

    /// Samples `g(x, v)` at every cell center. Negative samples are an error.
    pub fn from_fn(grid: PhaseGrid<T>, g: impl Fn([T; 3], [T; 3]) -> T) -> Result<Self> {
        let nv = grid.v.len();
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.x.len() {
            let x = grid.x.position(ix);
            for iv in 0..nv {
                values.push(g(x, grid.v.velocity(iv)));
            }
        }
        Self::new(grid, values, T::zero())
    }

    pub fn with_time(mut self, t: T) -> Self {
        self.time = t;
        self
    }

    #[inline]
    pub fn slice(&self, ix: usize) -> &[T] {
        let nv = self.grid.v.len();
        &self.values[ix * nv..(ix + 1) * nv]
    }

    #[inline]
    pub fn slice_mut(&mut self, ix: usize) -> &mut [T] {
        let nv = self.grid.v.len();
        &mut self.values[ix * nv..(ix + 1) * nv]
    }

    pub fn slices(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.grid.v.len())
    }

    pub fn sup(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// `∫∫ f dx dv` by the rectangle rule.
    pub fn total_mass(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    /// `max ⟨v⟩^k |f|` over all cells.
    pub fn weighted_sup_norm(&self, k: T) -> T {
        let weights = velocity_weights(&self.grid.v, k);
        self.slices()
            .fold(T::zero(), |m, s| s.iter().zip(&weights).fold(m, |m, (f, w)| m.max(*w * f.abs())))
    }

    /// Discrete `L^{p,k}` norm, either per x-slice (velocity only) or over
    /// the whole phase grid. Quadrature weights are the cell volumes.
    pub fn weighted_lp_norm(&self, p: LpExponent<T>, k: T, scope: NormScope) -> Result<LpNorm<T>> {
        let p = p.validate()?;
        let weights = velocity_weights(&self.grid.v, k);
        let hv3 = self.grid.v.cell_volume();
        Ok(match scope {
            NormScope::PerSlice => LpNorm::PerSlice(self.slices().map(|s| slice_lp(s, &weights, p, hv3)).collect()),
            NormScope::Global => {
                let vol = hv3 * self.grid.x.cell_volume();
                LpNorm::Global(match p {
                    LpExponent::Infinity => self.weighted_sup_norm(k),
                    LpExponent::Finite(p) => {
                        let sum: T = self
                            .slices()
                            .map(|s| s.iter().zip(&weights).map(|(f, w)| (*w * f.abs()).powf(p)).sum::<T>())
                            .sum();
                        (sum * vol).powf(T::one() / p)
                    }
                })
            }
        })
    }

    pub fn is_admissible(&self) -> bool {
        self.values.iter().all(|v| v.is_finite() && *v >= T::zero())
    }
}

/// `⟨v⟩^k` at every velocity cell.
pub fn velocity_weights<T: Real>(grid: &VelocityGrid<T>, k: T) -> Vec<T> {
    (0..grid.len()).map(|iv| bracket(grid.velocity(iv)).powf(k)).collect()
}

/// Velocity-only `L^{p,k}` norm of one slice with precomputed weights.
pub fn slice_lp<T: Real>(s: &[T], weights: &[T], p: LpExponent<T>, hv3: T) -> T {
    match p {
        LpExponent::Infinity => s.iter().zip(weights).fold(T::zero(), |m, (f, w)| m.max(*w * f.abs())),
        LpExponent::Finite(p) if p == T::one() => s.iter().zip(weights).map(|(f, w)| *w * f.abs()).sum::<T>() * hv3,
        LpExponent::Finite(p) => {
            let sum: T = s.iter().zip(weights).map(|(f, w)| (*w * f.abs()).powf(p)).sum();
            (sum * hv3).powf(T::one() / p)
        }
    }
}

/// `c1·exp(−c2|v|²)` at every cell, independent of x.
pub fn make_maxwellian<T: Real>(grid: PhaseGrid<T>, c1: T, c2: T) -> Result<DistributionField<T>> {
    if !(c1 > T::zero()) || !(c2 > T::zero()) {
        return Err(invalid(
            "Maxwellian parameters",
            format!("c1 = {c1}, c2 = {c2} must both be positive"),
        ));
    }
    DistributionField::from_fn(grid, |_, v| c1 * (-c2 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).exp())
}

/// One term `w·(1 + ε cos(k·x))·exp(−|v−u|²/(2σ²))` of a bump sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump<T> {
    pub weight: T,
    pub center: [T; 3],
    pub sigma: T,
    /// `ε`, with `|ε| ≤ 1` so the term stays nonnegative.
    pub x_amplitude: T,
    pub x_wave: [T; 3],
}

impl<T: Real> Bump<T> {
    pub fn new(weight: T, center: [T; 3], sigma: T) -> Self {
        Self {
            weight,
            center,
            sigma,
            x_amplitude: T::zero(),
            x_wave: [T::zero(); 3],
        }
    }

    pub fn value(&self, x: [T; 3], v: [T; 3]) -> T {
        let d2 = (0..3).map(|a| (v[a] - self.center[a]).powi(2)).fold(T::zero(), |s, d| s + d);
        let kx = (0..3).map(|a| self.x_wave[a] * x[a]).fold(T::zero(), |s, d| s + d);
        self.weight * (T::one() + self.x_amplitude * kx.cos()) * (-d2 / (T::lit(2.0) * self.sigma * self.sigma)).exp()
    }
}

pub fn make_bump_sum<T: Real>(grid: PhaseGrid<T>, bumps: &[Bump<T>]) -> Result<DistributionField<T>> {
    for b in bumps {
        if !(b.weight >= T::zero() && b.sigma > T::zero() && b.x_amplitude.abs() <= T::one()) {
            return Err(invalid(
                "bump",
                format!(
                    "weight {} >= 0, sigma {} > 0 and |amplitude| {} <= 1 required",
                    b.weight, b.sigma, b.x_amplitude
                ),
            ));
        }
    }
    DistributionField::from_fn(grid, |x, v| bumps.iter().fold(T::zero(), |s, b| s + b.value(x, v)))
}

/// Parameters `(R, δ, r)` of the well-distributedness condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellDistributedParams<T> {
    pub search_radius: T,
    pub delta: T,
    pub ball_radius: T,
}

impl<T: Real> WellDistributedParams<T> {
    pub fn new(search_radius: T, delta: T, ball_radius: T) -> Result<Self> {
        if !(search_radius > T::zero()) || !(delta > T::zero()) || !(ball_radius > T::zero()) {
            return Err(invalid("well-distributed parameters", "R, delta and r must all be positive"));
        }
        Ok(Self {
            search_radius,
            delta,
            ball_radius,
        })
    }
}

/// A ball center `(x_m, v_m)` witnessing the lower bound near one x-cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallWitness<T> {
    pub x_cell: usize,
    pub x_center: [T; 3],
    pub v_center: [T; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct WellDistributedReport<T> {
    pub holds: bool,
    /// One witness per x-cell on success.
    pub witnesses: Vec<BallWitness<T>>,
    /// First x-cell without a witness on failure.
    pub first_failure: Option<usize>,
    /// `R ≥ L/2`: every x_m is admissible and the condition loses its meaning on the torus.
    pub vacuous_on_torus: bool,
}

/// Candidate velocity ball centers: the lattice of half-cell spacing, so both
/// cell centers and cell corners (including `v = 0` for even `n`) are tried.
fn velocity_centers<T: Real>(g: &VelocityGrid<T>, radius: T) -> Vec<([T; 3], [isize; 3])> {
    let h = g.h();
    let half = h * T::lit(0.5);
    let m = 2 * g.n + 1;
    let mut out = Vec::new();
    let coord = |a: usize| -g.l + T::from_usize_lossy(a) * half;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let v = [coord(a), coord(b), coord(c)];
                if crate::scalar::norm3(v) < radius {
                    out.push((v, [a as isize, b as isize, c as isize]));
                }
            }
        }
    }
    // smallest |v_m| first so witnesses are as central as possible
    out.sort_by(|a, b| {
        crate::scalar::norm3(a.0)
            .partial_cmp(&crate::scalar::norm3(b.0))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Checks that every x-cell has a ball `B_r(x_m, v_m)` with `|x − x_m| < R`,
/// `|v_m| < R` on which `f ≥ δ`. The ball is the set of cells whose centers
/// lie within `r` of `(x_m, v_m)`; cells outside the velocity box count as 0.
pub fn well_distributed_check<T: Real>(f: &DistributionField<T>, params: &WellDistributedParams<T>) -> Result<WellDistributedReport<T>> {
    let grid = f.grid;
    let h = grid.v.h();
    if params.ball_radius < T::lit(2.0) * h {
        return Err(invalid(
            "well-distributed parameters",
            format!("ball radius r = {} is below 2·h_v = {}", params.ball_radius, T::lit(2.0) * h),
        ));
    }
    let vacuous = grid.x.dim > 0 && params.search_radius >= grid.x.period * T::lit(0.5);
    if vacuous {
        log::warn!(
            "search radius {} ≥ half the torus period {}: well-distributedness is vacuous in x",
            params.search_radius,
            grid.x.period
        );
    }

    let nx = grid.x.len();
    let n = grid.v.n as isize;
    let r2 = params.ball_radius * params.ball_radius;
    let dx = grid.x.dx();
    let active = grid.x.dim;

    // x-offsets (in cells, per active axis) that can belong to a ball
    let reach_x = if active == 0 {
        0
    } else {
        (params.ball_radius / dx).floor().to_isize().unwrap_or(0)
    };
    let reach_v = (params.ball_radius / h).ceil().to_isize().unwrap_or(0) + 1;

    let centers = velocity_centers(&grid.v, params.search_radius);

    // good[ix_m][c] = f ≥ δ on the ball centered at (x_m, centers[c])
    let x_offsets = offsets_for_dim(active, reach_x);
    let mut good = vec![false; nx * centers.len()];
    for ixm in 0..nx {
        let cm = grid.x.unravel(ixm);
        for (ci, (_, half_idx)) in centers.iter().enumerate() {
            let mut ok = true;
            'ball: for xo in &x_offsets {
                let xdist2 = xo.iter().fold(T::zero(), |s, o| {
                    s + T::from_isize(*o).unwrap() * dx * T::from_isize(*o).unwrap() * dx
                });
                if xdist2 >= r2 {
                    continue;
                }
                let mut c = [0usize; 3];
                for a in 0..3 {
                    c[a] = if a < active {
                        (cm[a] as isize + xo[a]).rem_euclid(grid.x.n as isize) as usize
                    } else {
                        0
                    };
                }
                let ix = grid.x.index(c);
                let slice = f.slice(ix);
                // cells i with |(i+½)h − l − v_m| < rest, where v_m = −l + half_idx·h/2
                let rest2 = r2 - xdist2;
                for di in -reach_v..=reach_v {
                    for dj in -reach_v..=reach_v {
                        for dk in -reach_v..=reach_v {
                            let idx = [(half_idx[0] - 1) / 2 + di, (half_idx[1] - 1) / 2 + dj, (half_idx[2] - 1) / 2 + dk];
                            let mut d2 = T::zero();
                            for a in 0..3 {
                                // offset between cell center and ball center in units of h/2
                                let off = (2 * idx[a] + 1 - half_idx[a]) as f64;
                                let d = T::lit(off * 0.5) * h;
                                d2 += d * d;
                            }
                            if d2 >= rest2 {
                                continue;
                            }
                            let inside = idx.iter().all(|&i| i >= 0 && i < n);
                            let value = if inside {
                                slice[grid.v.index(idx[0] as usize, idx[1] as usize, idx[2] as usize)]
                            } else {
                                T::zero()
                            };
                            if value < params.delta {
                                ok = false;
                                break 'ball;
                            }
                        }
                    }
                }
            }
            good[ixm * centers.len() + ci] = ok;
        }
    }

    let mut witnesses = Vec::with_capacity(nx);
    for ix in 0..nx {
        let x = grid.x.position(ix);
        let found = (0..nx)
            .filter(|&ixm| active == 0 || grid.x.distance(x, grid.x.position(ixm)) < params.search_radius)
            .find_map(|ixm| {
                (0..centers.len()).find(|&ci| good[ixm * centers.len() + ci]).map(|ci| BallWitness {
                    x_cell: ix,
                    x_center: grid.x.position(ixm),
                    v_center: centers[ci].0,
                })
            });
        match found {
            Some(w) => witnesses.push(w),
            None => {
                return Ok(WellDistributedReport {
                    holds: false,
                    witnesses: Vec::new(),
                    first_failure: Some(ix),
                    vacuous_on_torus: vacuous,
                })
            }
        }
    }
    Ok(WellDistributedReport {
        holds: true,
        witnesses,
        first_failure: None,
        vacuous_on_torus: vacuous,
    })
}

fn offsets_for_dim(dim: usize, reach: isize) -> Vec<[isize; 3]> {
    let r = |a: usize| if a < dim { -reach..=reach } else { 0..=0 };
    let mut out = Vec::new();
    for a in r(0) {
        for b in r(1) {
            for c in r(2) {
                out.push([a, b, c]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use proptest::prelude::*;

    fn hgrid(n: usize, l: f64) -> PhaseGrid<f64> {
        PhaseGrid::homogeneous(n, l).unwrap()
    }

    #[test]
    fn maxwellian_values() {
        let g = PhaseGrid::new(SpatialGrid::homogeneous(), VelocityGrid::new(4, 2.0).unwrap());
        let m = make_maxwellian(g, 2.0, 0.5).unwrap();
        // v = (−1.5, −0.5, 0.5) → |v|² = 2.75
        let iv = g.v.index(0, 1, 2);
        assert!((m.values[iv] - 2.0 * (-0.5f64 * 2.75).exp()).abs() < 1e-15);
        assert!(make_maxwellian(g, 0.0, 1.0).is_err());
        assert!(make_maxwellian(g, 1.0, -1.0).is_err());
    }

    #[test]
    fn maxwellian_at_origin_and_mass() {
        // odd n puts a node at v = 0
        let g = hgrid(33, 6.0);
        let m = make_maxwellian(g, 1.0, 1.0).unwrap();
        assert_eq!(m.values[g.v.index(16, 16, 16)], 1.0);
        let mass = m.total_mass();
        assert!((mass - std::f64::consts::PI.powf(1.5)).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn weighted_sup_examples() {
        let g = hgrid(8, 3.0);
        assert_eq!(DistributionField::zeros(g).weighted_sup_norm(3.0), 0.0);
        let f = DistributionField::from_fn(g, |_, v| bracket(v).powf(-4.0)).unwrap();
        assert!((f.weighted_sup_norm(4.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weighted_sup_of_maxwellian_k5() {
        // max over s = |v|² of (1+s)^{5/2} e^{−s} is at s = 3/2
        let exact = 2.5f64.powf(2.5) * (-1.5f64).exp();
        let g = hgrid(64, 4.0);
        let m = make_maxwellian(g, 1.0, 1.0).unwrap();
        let got = m.weighted_sup_norm(5.0);
        assert!((got - exact).abs() < 0.02 * exact, "{got} vs {exact}");
        assert!((exact - 2.205).abs() < 1e-3);
    }

    #[test]
    fn lp_norm_examples() {
        let g = hgrid(8, 2.0);
        let z = DistributionField::zeros(g);
        assert_eq!(
            z.weighted_lp_norm(LpExponent::Finite(2.0), 1.0, NormScope::Global).unwrap().sup(),
            0.0
        );
        let mut one = DistributionField::zeros(g);
        one.values[17] = 1.0;
        let n = one.weighted_lp_norm(LpExponent::Finite(1.0), 0.0, NormScope::Global).unwrap().sup();
        assert!((n - g.v.cell_volume()).abs() < 1e-15);
        assert!(one.weighted_lp_norm(LpExponent::Finite(0.5), 0.0, NormScope::Global).is_err());
    }

    #[test]
    fn maxwellian_l12_per_slice() {
        let g = hgrid(48, 6.0);
        let m = make_maxwellian(g, 1.0, 1.0).unwrap();
        let n = m.weighted_lp_norm(LpExponent::Finite(1.0), 2.0, NormScope::PerSlice).unwrap();
        let exact = std::f64::consts::PI.powf(1.5) * 2.5;
        match n {
            LpNorm::PerSlice(v) => assert!((v[0] - exact).abs() < 1e-6, "{}", v[0]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn well_distributed_plateau_has_witness_at_origin() {
        let g = PhaseGrid::new(SpatialGrid::new(1, 4, 8.0).unwrap(), VelocityGrid::new(12, 3.0).unwrap());
        let delta = 0.3;
        let r = 1.0; // h = 0.5
        let f = DistributionField::from_fn(g, |_, v| if crate::scalar::norm3(v) < 2.0 * r { delta } else { 0.0 }).unwrap();
        let rep = well_distributed_check(&f, &WellDistributedParams::new(1.5, delta, r).unwrap()).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.witnesses.len(), 4);
        assert!(rep.witnesses.iter().all(|w| w.v_center == [0.0; 3]));
        assert!(!rep.vacuous_on_torus);
    }

    #[test]
    fn well_distributed_rejects_zero_and_small_balls() {
        let g = hgrid(8, 2.0);
        let z = DistributionField::zeros(g);
        let rep = well_distributed_check(&z, &WellDistributedParams::new(1.0, 0.1, 1.0).unwrap()).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.first_failure, Some(0));
        assert!(well_distributed_check(&z, &WellDistributedParams::new(1.0, 0.1, 0.5).unwrap()).is_err());
    }

    /// Independent brute-force oracle: for each x, every (x_m, v_m) candidate,
    /// every cell of the phase grid is tested for membership in the ball.
    fn brute_force(f: &DistributionField<f64>, p: &WellDistributedParams<f64>) -> Vec<bool> {
        let g = f.grid;
        let h = g.v.h();
        let mut lattice = Vec::new();
        for a in 0..=(2 * g.v.n) {
            lattice.push(-g.v.l + a as f64 * 0.5 * h);
        }
        let mut centers = Vec::new();
        for &a in &lattice {
            for &b in &lattice {
                for &c in &lattice {
                    if (a * a + b * b + c * c).sqrt() < p.search_radius {
                        centers.push([a, b, c]);
                    }
                }
            }
        }
        // cells beyond the velocity box are treated as zero
        let reach = (p.ball_radius / h).ceil() as isize + 1;
        let n = g.v.n as isize;
        let ball_ok = |ixm: usize, vm: [f64; 3]| -> bool {
            let xm = g.x.position(ixm);
            for ix in 0..g.x.len() {
                let dxm = g.x.distance(xm, g.x.position(ix));
                for i in -reach..n + reach {
                    for j in -reach..n + reach {
                        for k in -reach..n + reach {
                            let c = |m: isize| -g.v.l + (m as f64 + 0.5) * h;
                            let v = [c(i), c(j), c(k)];
                            let d2 = dxm * dxm + (0..3).map(|a| (v[a] - vm[a]).powi(2)).sum::<f64>();
                            if d2 >= p.ball_radius * p.ball_radius {
                                continue;
                            }
                            let inside = [i, j, k].iter().all(|&m| m >= 0 && m < n);
                            let val = if inside {
                                f.values[g.index(ix, g.v.index(i as usize, j as usize, k as usize))]
                            } else {
                                0.0
                            };
                            if val < p.delta {
                                return false;
                            }
                        }
                    }
                }
            }
            true
        };
        (0..g.x.len())
            .map(|ix| {
                let x = g.x.position(ix);
                (0..g.x.len())
                    .filter(|&m| g.x.distance(x, g.x.position(m)) < p.search_radius)
                    .any(|m| centers.iter().any(|vm| ball_ok(m, *vm)))
            })
            .collect()
    }

    #[test]
    fn single_bump_fails_far_from_its_x_and_matches_brute_force() {
        let g = PhaseGrid::new(SpatialGrid::new(1, 8, 8.0).unwrap(), VelocityGrid::new(8, 2.0).unwrap());
        let delta = 0.5;
        let r = 1.0;
        let x0 = g.x.position(2);
        let f = DistributionField::from_fn(g, |x, v| {
            let dx = g.x.distance(x, x0);
            let d = (dx * dx + v.iter().map(|c| c * c).sum::<f64>()).sqrt();
            if d < 1.6 * r {
                2.0 * delta
            } else {
                0.0
            }
        })
        .unwrap();
        let p = WellDistributedParams::new(1.5, delta, r).unwrap();
        let rep = well_distributed_check(&f, &p).unwrap();
        let oracle = brute_force(&f, &p);
        assert!(!rep.holds);
        assert_eq!(rep.first_failure, oracle.iter().position(|ok| !ok));
        assert!(oracle[2], "the bump's own x-cell has a witness");
        assert!(!oracle[6], "the antipodal x-cell has none");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sup_norm_k0_is_plain_sup_and_monotone(
            vals in prop::collection::vec(0.0f64..5.0, 4 * 4 * 4),
            bump in prop::collection::vec(0.0f64..1.0, 4 * 4 * 4),
            k in -3.0f64..8.0,
        ) {
            let g = hgrid(4, 2.0);
            let f = DistributionField::new(g, vals.clone(), 0.0).unwrap();
            let plain = vals.iter().cloned().fold(0.0, f64::max);
            prop_assert_eq!(f.weighted_sup_norm(0.0), plain);
            let bigger: Vec<f64> = vals.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let gf = DistributionField::new(g, bigger, 0.0).unwrap();
            prop_assert!(f.weighted_sup_norm(k) <= gf.weighted_sup_norm(k));
        }

        #[test]
        fn well_distributed_is_monotone(
            vals in prop::collection::vec(0.0f64..1.0, 8 * 8 * 8),
            bump in prop::collection::vec(0.0f64..1.0, 8 * 8 * 8),
        ) {
            let g = hgrid(8, 2.0);
            let p = WellDistributedParams::new(1.5, 0.2, 1.0).unwrap();
            let f = DistributionField::new(g, vals.clone(), 0.0).unwrap();
            let gf = DistributionField::new(g, vals.iter().zip(&bump).map(|(a, b)| a + b).collect(), 0.0).unwrap();
            if well_distributed_check(&f, &p).unwrap().holds {
                prop_assert!(well_distributed_check(&gf, &p).unwrap().holds);
            }
        }
    }
}
