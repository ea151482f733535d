//! Barrier functions for the maximum-principle arguments and their residuals
//! under `L g = ∂_t g + v·∇_x g − tr(ā D²_v g) − c̄ g`.
//!
//! Every derivative is taken in closed form; nothing here finite-differences
//! a barrier.

use landau_core::coefficients::CoefficientField;
use landau_core::field::DistributionField;
use landau_core::grid::{SpatialGrid, VelocityGrid};
use landau_core::scalar::bracket;
use landau_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BarrierKind {
    /// `φ̄ = e^{βt}⟨v⟩^{−k}`.
    Decay,
    /// `h̄ = e^{βt}[M q + η + f₀ + ρt]`.
    MatchingUpper,
    /// `h̲ = e^{−βt}[f₀ − M q − η − ρt]`.
    MatchingLower,
}

/// Barrier parameters. `q = |x − x₀ − vt|² + |v − v₀|²` and `f₀ = f_in(x₀, v₀)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    pub beta: f64,
    pub k: f64,
    pub m: f64,
    pub rho: f64,
    pub eta: f64,
    pub x0: [f64; 3],
    pub v0: [f64; 3],
    pub f0: f64,
}

fn bad(detail: String) -> Error {
    Error::InvalidArgument { what: "barrier", detail }
}

impl BarrierSpec {
    /// `β = 0` is accepted so that a bisection can bracket from below.
    pub fn decay(beta: f64, k: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) || !(k > 0.0 && k.is_finite()) {
            return Err(bad(format!("decay barrier needs beta >= 0 and k > 0, got beta={beta}, k={k}")));
        }
        Ok(Self {
            kind: BarrierKind::Decay,
            beta,
            k,
            m: 0.0,
            rho: 0.0,
            eta: 0.0,
            x0: [0.0; 3],
            v0: [0.0; 3],
            f0: 0.0,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn matching(kind: BarrierKind, beta: f64, m: f64, rho: f64, eta: f64, x0: [f64; 3], v0: [f64; 3], f0: f64) -> Result<Self> {
        if kind == BarrierKind::Decay {
            return Err(bad("use BarrierSpec::decay for the decay barrier".into()));
        }
        if !(beta >= 0.0) || !(m > 0.0) || !(rho > 0.0) || !(eta > 0.0) || !f0.is_finite() {
            return Err(bad(format!(
                "matching barrier needs M, rho, eta > 0 and beta >= 0, got M={m}, rho={rho}, eta={eta}, beta={beta}"
            )));
        }
        Ok(Self {
            kind,
            beta,
            k: 1.0,
            m,
            rho,
            eta,
            x0,
            v0,
            f0,
        })
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    fn q(&self, x_grid: &SpatialGrid<f64>, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        let d = x_grid.wrap(std::array::from_fn(
            |a| if a < x_grid.dim { x[a] - self.x0[a] - v[a] * t } else { 0.0 },
        ));
        let dv: [f64; 3] = std::array::from_fn(|a| v[a] - self.v0[a]);
        d.iter().map(|c| c * c).sum::<f64>() + dv.iter().map(|c| c * c).sum::<f64>()
    }

    /// `tr(a D²_v q)`: `D²_v q = 2(1+t²)` on transported axes and `2` on
    /// the axes a reduced spatial grid does not resolve.
    fn tr_d2q(&self, x_grid: &SpatialGrid<f64>, t: f64, a: [f64; 6]) -> f64 {
        let diag = [a[0], a[3], a[5]];
        (0..3).map(|i| 2.0 * diag[i] * if i < x_grid.dim { 1.0 + t * t } else { 1.0 }).sum()
    }

    pub fn value(&self, x_grid: &SpatialGrid<f64>, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        match self.kind {
            BarrierKind::Decay => (self.beta * t).exp() * bracket(v).powf(-self.k),
            BarrierKind::MatchingUpper => (self.beta * t).exp() * (self.m * self.q(x_grid, t, x, v) + self.eta + self.f0 + self.rho * t),
            BarrierKind::MatchingLower => (-self.beta * t).exp() * (self.f0 - self.m * self.q(x_grid, t, x, v) - self.eta - self.rho * t),
        }
    }

    /// `L` applied to the barrier at one point, with `ā = a` (upper triangle)
    /// and `c̄ = c` there.
    pub fn operator(&self, x_grid: &SpatialGrid<f64>, t: f64, x: [f64; 3], v: [f64; 3], a: [f64; 6], c: f64) -> f64 {
        let val = self.value(x_grid, t, x, v);
        match self.kind {
            BarrierKind::Decay => {
                let k = self.k;
                let br2 = 1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                let vav = a[0] * v[0] * v[0]
                    + a[3] * v[1] * v[1]
                    + a[5] * v[2] * v[2]
                    + 2.0 * (a[1] * v[0] * v[1] + a[2] * v[0] * v[2] + a[4] * v[1] * v[2]);
                // D²⟨v⟩^{−k} = k(k+2)⟨v⟩^{−k−4} v vᵀ − k⟨v⟩^{−k−2} I
                let tr = a[0] + a[3] + a[5];
                let tr_ad2 = val * (k * (k + 2.0) * vav / (br2 * br2) - k * tr / br2);
                self.beta * val - tr_ad2 - c * val
            }
            BarrierKind::MatchingUpper => {
                let e = (self.beta * t).exp();
                self.beta * val + self.rho * e - self.m * e * self.tr_d2q(x_grid, t, a) - c * val
            }
            BarrierKind::MatchingLower => {
                let e = (-self.beta * t).exp();
                -self.beta * val - self.rho * e + self.m * e * self.tr_d2q(x_grid, t, a) - c * val
            }
        }
    }

    /// Signed supersolution residual: `Lφ̄`, `Lh̄`, or `−Lh̲` (the latter only
    /// where `h̲ > 0`, since `max(h̲, 0)` is the comparison function).
    pub fn residual(&self, x_grid: &SpatialGrid<f64>, t: f64, x: [f64; 3], v: [f64; 3], a: [f64; 6], c: f64) -> Option<f64> {
        let l = self.operator(x_grid, t, x, v, a, c);
        match self.kind {
            BarrierKind::MatchingLower if self.value(x_grid, t, x, v) <= 0.0 => None,
            BarrierKind::MatchingLower => Some(-l),
            _ => Some(l),
        }
    }

    /// Positive factor that removes the trivial scale of the residual:
    /// `φ̄` itself, or `e^{±βt}` for the matching barriers.
    pub fn scale(&self, x_grid: &SpatialGrid<f64>, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        match self.kind {
            BarrierKind::Decay => self.value(x_grid, t, x, v),
            BarrierKind::MatchingUpper => (self.beta * t).exp(),
            BarrierKind::MatchingLower => (-self.beta * t).exp(),
        }
    }
}

/// Grid minimum of a residual, with the cell that attains it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualMin {
    pub min: f64,
    /// Minimum of `residual / scale`; sign-equivalent to `min` cell by cell.
    pub normalized_min: f64,
    pub witness: Option<(usize, [f64; 3])>,
    pub cells: usize,
}

impl ResidualMin {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            normalized_min: f64::INFINITY,
            witness: None,
            cells: 0,
        }
    }

    fn visit(&mut self, r: f64, scale: f64, at: (usize, [f64; 3])) {
        self.cells += 1;
        let n = r / scale;
        if n < self.normalized_min || self.witness.is_none() {
            self.normalized_min = n;
            self.witness = Some(at);
        }
        self.min = self.min.min(r);
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.cells == 0 || self.normalized_min >= -tolerance
    }
}

/// Residual minimum over every `(x-cell, v-cell)` at time `t`, with one
/// coefficient slice per x-cell.
pub fn barrier_residual(coeffs: &[CoefficientField<f64>], x_grid: &SpatialGrid<f64>, spec: &BarrierSpec, t: f64) -> Result<ResidualMin> {
    if coeffs.len() != x_grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} coefficient slices for {} x-cells",
            coeffs.len(),
            x_grid.len()
        )));
    }
    let mut out = ResidualMin::empty();
    for (ix, c) in coeffs.iter().enumerate() {
        let x = x_grid.position(ix);
        for iv in 0..c.grid.len() {
            let v = c.grid.velocity(iv);
            if let Some(r) = spec.residual(x_grid, t, x, v, c.a[iv], c.c[iv]) {
                out.visit(r, spec.scale(x_grid, t, x, v), (ix, v));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaStar {
    /// Smallest bracketed β with a nonnegative grid residual.
    pub beta: f64,
    /// Largest β tried that still fails (0 if β = 0 already passes).
    pub lower: f64,
    pub iterations: usize,
}

/// Bisection for the smallest β making the decay barrier a supersolution on
/// the grid. Valid because `Lφ̄/φ̄ = β − S(v)` is increasing in β.
pub fn beta_star(coeffs: &[CoefficientField<f64>], x_grid: &SpatialGrid<f64>, k: f64, rel_tol: f64) -> Result<BetaStar> {
    let ok =
        |beta: f64| -> Result<bool> { Ok(barrier_residual(coeffs, x_grid, &BarrierSpec::decay(beta, k)?, 0.0)?.normalized_min >= 0.0) };
    if ok(0.0)? {
        return Ok(BetaStar {
            beta: 0.0,
            lower: 0.0,
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut it = 0;
    while !ok(hi)? {
        lo = hi;
        hi *= 2.0;
        it += 1;
        if !hi.is_finite() {
            return Err(Error::Instability {
                time: 0.0,
                detail: "no finite beta makes the decay barrier a supersolution".into(),
            });
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        it += 1;
    }
    Ok(BetaStar {
        beta: hi,
        lower: lo,
        iterations: it,
    })
}

/// Matching-barrier parameters that make `h̄`/`h̲` a super-/subsolution
/// for `t ∈ [0, 1]` given the coefficients: `M = 2 sup f / δ²`,
/// `ρ = 4 M max tr ā + η`, `β = max c̄ + η` (`2(1+t²) ≤ 4`).
pub fn matching_parameters(coeffs: &[CoefficientField<f64>], sup_f: f64, delta: f64, eta: f64) -> (f64, f64, f64) {
    let m = 2.0 * sup_f / (delta * delta);
    let max_tr = coeffs
        .iter()
        .flat_map(|c| (0..c.len()).map(move |i| c.trace(i)))
        .fold(0.0, f64::max);
    let max_c = coeffs.iter().map(|c| c.max_c()).fold(0.0, f64::max);
    (m, 4.0 * m * max_tr + eta, max_c + eta)
}

/// `h̄(t, z) − sup f` over points of the lateral shell
/// `|x − x₀|² + |v − v₀|² = δ²` and `t ∈ [0, δ/(4(R + δ))]`, `R = |v₀|`.
/// Shell points are the radial projections of grid nodes near the shell.
pub fn boundary_dominance(
    spec: &BarrierSpec,
    x_grid: &SpatialGrid<f64>,
    v_grid: &VelocityGrid<f64>,
    delta: f64,
    sup_f: f64,
    time_samples: usize,
) -> Result<ResidualMin> {
    if spec.kind != BarrierKind::MatchingUpper {
        return Err(bad("boundary dominance applies to the upper matching barrier".into()));
    }
    let r = spec.v0.iter().map(|c| c * c).sum::<f64>().sqrt();
    let t_b = delta / (4.0 * (r + delta));
    let mut out = ResidualMin::empty();
    let n_t = time_samples.max(2);
    for ix in 0..x_grid.len() {
        let dx = x_grid.wrap(std::array::from_fn(|a| {
            if a < x_grid.dim {
                x_grid.position(ix)[a] - spec.x0[a]
            } else {
                0.0
            }
        }));
        for iv in 0..v_grid.len() {
            let dv: [f64; 3] = std::array::from_fn(|a| v_grid.velocity(iv)[a] - spec.v0[a]);
            let d = (dx.iter().chain(&dv).map(|c| c * c).sum::<f64>()).sqrt();
            if d < 0.5 * delta || d > 2.0 * delta {
                continue;
            }
            let s = delta / d;
            let x: [f64; 3] = std::array::from_fn(|a| spec.x0[a] + s * dx[a]);
            let v: [f64; 3] = std::array::from_fn(|a| spec.v0[a] + s * dv[a]);
            for j in 0..n_t {
                let t = t_b * j as f64 / (n_t - 1) as f64;
                let gap = spec.value(x_grid, t, x, v) - sup_f;
                out.visit(gap, sup_f.max(f64::MIN_POSITIVE), (ix, v));
            }
        }
    }
    Ok(out)
}

/// `h̄(0, ·) − f_in` over grid cells inside `B_δ(x₀, v₀)`.
pub fn initial_containment(spec: &BarrierSpec, f_in: &DistributionField<f64>, delta: f64) -> ResidualMin {
    let g = &f_in.grid;
    let mut out = ResidualMin::empty();
    for ix in 0..g.x.len() {
        let x = g.x.position(ix);
        let dx = g.x.wrap(std::array::from_fn(|a| if a < g.x.dim { x[a] - spec.x0[a] } else { 0.0 }));
        for iv in 0..g.v.len() {
            let v = g.v.velocity(iv);
            let d2: f64 = dx.iter().map(|c| c * c).sum::<f64>() + (0..3).map(|a| (v[a] - spec.v0[a]).powi(2)).sum::<f64>();
            if d2 <= delta * delta {
                let gap = spec.value(&g.x, 0.0, x, v) - f_in.values[g.index(ix, iv)];
                out.visit(gap, 1.0, (ix, v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use landau_core::coefficients::CoefficientEngine;
    use landau_core::coefficients::CollisionKernel;
    use landau_core::field::make_maxwellian;
    use landau_core::grid::PhaseGrid;

    fn maxwellian_coeffs(n: usize, l: f64, gamma: f64) -> (DistributionField<f64>, Vec<CoefficientField<f64>>) {
        let f = make_maxwellian(PhaseGrid::homogeneous(n, l).unwrap(), 1.0, 1.0).unwrap();
        let c = CoefficientEngine::new()
            .compute_all(&f, &CollisionKernel::new(gamma).unwrap())
            .unwrap();
        (f, c)
    }

    #[test]
    fn zero_coefficients_leave_beta_times_barrier() {
        let g = VelocityGrid::new(6, 3.0).unwrap();
        let x = SpatialGrid::homogeneous();
        let c = vec![CoefficientField::zeros(g)];
        for beta in [0.0, 0.5, 3.0] {
            let spec = BarrierSpec::decay(beta, 6.0).unwrap();
            let r = barrier_residual(&c, &x, &spec, 0.3).unwrap();
            assert!((r.normalized_min - beta).abs() < 1e-14);
            assert!(r.passes(0.0));
        }
    }

    /// Central differences of the barrier itself, used only as an oracle.
    fn fd_operator(spec: &BarrierSpec, xg: &SpatialGrid<f64>, t: f64, x: [f64; 3], v: [f64; 3], a: [f64; 6], c: f64) -> f64 {
        let h = 1e-4;
        let f = |t: f64, x: [f64; 3], v: [f64; 3]| spec.value(xg, t, x, v);
        let shift = |p: [f64; 3], i: usize, d: f64| {
            let mut q = p;
            q[i] += d;
            q
        };
        let mut transport = (f(t + h, x, v) - f(t - h, x, v)) / (2.0 * h);
        for i in 0..xg.dim {
            transport += v[i] * (f(t, shift(x, i, h), v) - f(t, shift(x, i, -h), v)) / (2.0 * h);
        }
        let m = [[a[0], a[1], a[2]], [a[1], a[3], a[4]], [a[2], a[4], a[5]]];
        let mut tr = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d2 = if i == j {
                    (f(t, x, shift(v, i, h)) - 2.0 * f(t, x, v) + f(t, x, shift(v, i, -h))) / (h * h)
                } else {
                    let pp = shift(shift(v, i, h), j, h);
                    let pm = shift(shift(v, i, h), j, -h);
                    let mp = shift(shift(v, i, -h), j, h);
                    let mm = shift(shift(v, i, -h), j, -h);
                    (f(t, x, pp) - f(t, x, pm) - f(t, x, mp) + f(t, x, mm)) / (4.0 * h * h)
                };
                tr += m[i][j] * d2;
            }
        }
        transport - tr - c * f(t, x, v)
    }

    #[test]
    fn closed_form_operator_matches_finite_differences() {
        let xg = SpatialGrid::new(1, 8, 6.0).unwrap();
        let a = [1.3, 0.2, -0.1, 0.9, 0.05, 1.1];
        let (t, x, v) = (0.2, [1.1, 0.0, 0.0], [0.4, -0.7, 0.3]);
        let specs = [
            BarrierSpec::decay(1.5, 6.0).unwrap(),
            BarrierSpec::matching(
                BarrierKind::MatchingUpper,
                0.7,
                2.0,
                1.5,
                0.1,
                [1.0, 0.0, 0.0],
                [0.2, -0.5, 0.1],
                0.8,
            )
            .unwrap(),
            BarrierSpec::matching(
                BarrierKind::MatchingLower,
                0.7,
                2.0,
                1.5,
                0.1,
                [1.0, 0.0, 0.0],
                [0.2, -0.5, 0.1],
                3.0,
            )
            .unwrap(),
        ];
        for s in &specs {
            let exact = s.operator(&xg, t, x, v, a, 0.6);
            let fd = fd_operator(s, &xg, t, x, v, a, 0.6);
            assert!((exact - fd).abs() < 1e-5 * (1.0 + exact.abs()), "{:?}: {exact} vs {fd}", s.kind);
        }
    }

    #[test]
    fn residual_is_monotone_in_beta() {
        let (_, c) = maxwellian_coeffs(12, 4.0, -1.0);
        let x = SpatialGrid::homogeneous();
        let mut prev = f64::NEG_INFINITY;
        for beta in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let r = barrier_residual(&c, &x, &BarrierSpec::decay(beta, 6.0).unwrap(), 0.0).unwrap();
            assert!(r.normalized_min > prev);
            prev = r.normalized_min;
        }
    }

    #[test]
    fn bisection_recovers_the_pointwise_maximum() {
        let (_, c) = maxwellian_coeffs(12, 4.0, -1.0);
        let k = 6.0;
        // β* = max_v S(v) with S = tr(ā D²⟨v⟩^{−k})/⟨v⟩^{−k} + c̄.
        let cf = &c[0];
        let exact = (0..cf.len())
            .map(|i| {
                let v = cf.grid.velocity(i);
                let b2 = 1.0 + v.iter().map(|x| x * x).sum::<f64>();
                let m = cf.matrix(i);
                let mut vav = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        vav += v[p] * m[p][q] * v[q];
                    }
                }
                k * (k + 2.0) * vav / (b2 * b2) - k * cf.trace(i) / b2 + cf.c[i]
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(exact > 0.0);
        let b = beta_star(&c, &SpatialGrid::homogeneous(), k, 1e-10).unwrap();
        assert!((b.beta - exact).abs() < 1e-8 * exact, "{} vs {exact}", b.beta);
        assert!(b.lower < exact && exact <= b.beta);
    }

    #[test]
    fn chosen_matching_parameters_give_super_and_subsolutions() {
        let (f, c) = maxwellian_coeffs(12, 4.0, -1.0);
        let x = SpatialGrid::homogeneous();
        let (delta, eta) = (0.8, 0.05);
        let (m, rho, beta) = matching_parameters(&c, f.sup(), delta, eta);
        let v0 = [0.5, 0.0, -0.25];
        let f0 = (-(0.25f64 + 0.0625)).exp();
        for kind in [BarrierKind::MatchingUpper, BarrierKind::MatchingLower] {
            let s = BarrierSpec::matching(kind, beta, m, rho, eta, [0.0; 3], v0, f0).unwrap();
            for t in [0.0, 0.3, 1.0] {
                let r = barrier_residual(&c, &x, &s, t).unwrap();
                assert!(r.passes(0.0), "{kind:?} at t={t}: {}", r.normalized_min);
            }
        }
    }

    #[test]
    fn boundary_dominance_holds_for_the_prescribed_m_only() {
        let (f, c) = maxwellian_coeffs(16, 4.0, -1.0);
        let x = SpatialGrid::homogeneous();
        let delta = 1.0;
        let (m, rho, beta) = matching_parameters(&c, f.sup(), delta, 0.05);
        let v0 = [0.5, 0.0, 0.0];
        let good = BarrierSpec::matching(BarrierKind::MatchingUpper, beta, m, rho, 0.05, [0.0; 3], v0, 0.0).unwrap();
        let r = boundary_dominance(&good, &x, &f.grid.v, delta, f.sup(), 5).unwrap();
        assert!(r.cells > 0 && r.min >= 0.0, "{}", r.min);
        let weak = BarrierSpec { m: 0.2 * m, ..good };
        assert!(boundary_dominance(&weak, &x, &f.grid.v, delta, f.sup(), 5).unwrap().min < 0.0);
        let contain = initial_containment(&BarrierSpec { f0: f.sup(), ..good }, &f, delta);
        assert!(contain.cells > 0 && contain.min >= 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(BarrierSpec::decay(-1.0, 6.0).is_err());
        assert!(BarrierSpec::decay(1.0, 0.0).is_err());
        assert!(BarrierSpec::matching(BarrierKind::MatchingUpper, 1.0, 0.0, 1.0, 0.1, [0.0; 3], [0.0; 3], 1.0).is_err());
        assert!(BarrierSpec::matching(BarrierKind::Decay, 1.0, 1.0, 1.0, 0.1, [0.0; 3], [0.0; 3], 1.0).is_err());
    }
}
