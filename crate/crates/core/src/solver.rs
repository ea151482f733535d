//! Operator-split time integration: free transport on the torus and the
//! collision operator with coefficients frozen per (sub)step.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::coefficients::{CoefficientEngine, CoefficientField, CollisionKernel};
use crate::diagnostics::{diagnostics_row, DiagnosticsOptions, DiagnosticsRow, PsiChoice, PsiMonitor};
use crate::error::{invalid, Error, Result};
use crate::field::{DistributionField, LpExponent};
use crate::grid::VelocityGrid;
use crate::numerics::solve_tridiagonal;
use crate::scalar::{norm3, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Splitting {
    Lie,
    Strang,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollisionForm {
    /// `∇·(ā∇f + b̄f)`, conservative face fluxes.
    Divergence,
    /// `tr(āD²f) + c̄f`.
    Nondivergence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollisionIntegrator {
    ExplicitEuler,
    /// Diagonal second differences implicit (one tridiagonal sweep per axis).
    SemiImplicit,
    /// Two-stage predictor/corrector. [`Solver`] refreshes the coefficients
    /// at the predictor; [`collision_step`] keeps them frozen.
    Heun,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Positivity {
    Clamp,
    /// The internal state may go negative; emitted fields are floored at 0
    /// and the hidden negative mass is tracked.
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportScheme {
    /// Periodic 4-point Lagrange interpolation, exact for whole-cell shifts.
    CubicLagrange,
    /// Phase shift of the discrete Fourier series along each axis.
    Spectral,
}

impl fmt::Display for Splitting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Splitting::Lie => "lie",
            Splitting::Strang => "strang",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub gamma: T,
    pub dt: T,
    pub t_end: T,
    pub splitting: Splitting,
    pub collision_form: CollisionForm,
    pub integrator: CollisionIntegrator,
    pub transport: TransportScheme,
    pub k_decay: T,
    pub psi_threshold: T,
    /// Exponent of the `L^p_v` term of Ψ; `None` picks the default.
    pub psi_p: Option<LpExponent<T>>,
    /// Moment exponent of Ψ̃; `None` picks the default.
    pub psi_tilde_ell: Option<T>,
    pub mollify_eps: T,
    pub positivity: Positivity,
    /// Steps between diagnostics rows and stored snapshots.
    pub diag_every: usize,
    /// Halve the collision substep until the explicit stability rule holds.
    pub auto_halve: bool,
    pub diagnostics: DiagnosticsOptions<T>,
}

impl<T: Real> SolverConfig<T> {
    /// Defaults for everything except `gamma` and `t_end`.
    pub fn new(gamma: T, t_end: T) -> Self {
        let k_min = T::lit(5.0).max(T::lit(15.0) / (T::lit(5.0) + gamma));
        Self {
            gamma,
            dt: T::lit(1e-3),
            t_end,
            splitting: Splitting::Strang,
            collision_form: CollisionForm::Divergence,
            integrator: CollisionIntegrator::ExplicitEuler,
            transport: TransportScheme::CubicLagrange,
            k_decay: k_min.floor() + T::one(),
            psi_threshold: T::lit(1e6),
            psi_p: None,
            psi_tilde_ell: None,
            mollify_eps: T::zero(),
            positivity: Positivity::Clamp,
            diag_every: 10,
            auto_halve: false,
            diagnostics: DiagnosticsOptions::default(),
        }
    }

    /// Every violated invariant, in field order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = self.gamma;
        if !(g >= T::lit(-3.0) && g < T::zero()) {
            out.push(format!("gamma = {g} must lie in [-3, 0)"));
        }
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            out.push(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end > T::zero() && self.t_end.is_finite()) {
            out.push(format!("t_end = {} must be positive", self.t_end));
        }
        if g >= T::lit(-3.0) && g < T::zero() {
            let k_min = T::lit(5.0).max(T::lit(15.0) / (T::lit(5.0) + g));
            if !(self.k_decay > k_min) {
                out.push(format!("k_decay = {} must exceed max(5, 15/(5+gamma)) = {k_min}", self.k_decay));
            }
            if let Err(e) = self.psi_choice() {
                out.push(e.to_string());
            }
        }
        if !(self.psi_threshold > T::zero()) {
            out.push(format!("psi_threshold = {} must be positive", self.psi_threshold));
        }
        if !(self.mollify_eps >= T::zero() && self.mollify_eps.is_finite()) {
            out.push(format!("mollify_eps = {} must be >= 0", self.mollify_eps));
        }
        if self.diag_every == 0 {
            out.push("diag_every must be >= 1".into());
        }
        let a = self.diagnostics.holder_alpha;
        if !(a > T::zero() && a < T::one()) {
            out.push(format!("holder_alpha = {a} must lie in (0, 1)"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(invalid("config", v.join("; ")))
        }
    }

    pub fn psi_choice(&self) -> Result<PsiChoice<T>> {
        let d = PsiChoice::defaults(self.gamma)?;
        PsiChoice::new(self.gamma, self.psi_p.unwrap_or(d.p), self.psi_tilde_ell.unwrap_or(d.ell))
    }

    pub fn kernel(&self) -> Result<CollisionKernel<T>> {
        CollisionKernel::new(self.gamma)
    }
}

fn smooth_step<T: Real>(u: T) -> T {
    if u <= T::zero() {
        return T::zero();
    }
    if u >= T::one() {
        return T::one();
    }
    let a = (-T::one() / u).exp();
    let b = (-T::one() / (T::one() - u)).exp();
    a / (a + b)
}

/// `ζ_ε(|v|)`: 1 for `|v| ≤ 1/ε`, 0 for `|v| ≥ 1/ε + 1`, smooth between.
pub fn velocity_cutoff<T: Real>(eps: T, speed: T) -> T {
    smooth_step(T::one() + T::one() / eps - speed)
}

/// Normalized samples of a centered Gaussian of standard deviation `eps`
/// at spacing `h`, offsets `-J..=J`.
pub fn gaussian_weights<T: Real>(eps: T, h: T) -> Vec<T> {
    let half = (T::lit(5.0) * eps / h).ceil().to_usize().unwrap_or(0);
    let mut w: Vec<T> = (0..=2 * half)
        .map(|j| {
            let d = T::from_usize_lossy(j) - T::from_usize_lossy(half);
            let r = d * h / eps;
            (-T::lit(0.5) * r * r).exp()
        })
        .collect();
    let s: T = w.iter().copied().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn convolve_line<T: Real>(line: &[T], w: &[T], periodic: bool, out: &mut [T]) {
    let n = line.len() as i64;
    let half = (w.len() / 2) as i64;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (j, wj) in w.iter().enumerate() {
            let mut k = i as i64 + j as i64 - half;
            if periodic {
                k = k.rem_euclid(n);
            } else if k < 0 || k >= n {
                continue;
            }
            acc += *wj * line[k as usize];
        }
        *o = acc;
    }
}

/// Applies `op` to every line along `axis` of an `n^dim` block.
fn for_each_line<T: Real>(data: &mut [T], n: usize, dim: usize, axis: usize, mut op: impl FnMut(&[T], &mut [T])) {
    let stride = n.pow((dim - 1 - axis) as u32);
    let mut line = vec![T::zero(); n];
    let mut out = vec![T::zero(); n];
    for start in 0..data.len() {
        if !(start / stride).is_multiple_of(n) {
            continue;
        }
        for (i, l) in line.iter_mut().enumerate() {
            *l = data[start + i * stride];
        }
        op(&line, &mut out);
        for (i, o) in out.iter().enumerate() {
            data[start + i * stride] = *o;
        }
    }
}

/// Splits a field into per-velocity x-blocks (v-major) and back.
fn to_v_major<T: Real>(f: &DistributionField<T>) -> Vec<T> {
    let (nx, nv) = (f.grid.x.len(), f.grid.v.len());
    let mut out = vec![T::zero(); nx * nv];
    for ix in 0..nx {
        for (iv, val) in f.slice(ix).iter().enumerate() {
            out[iv * nx + ix] = *val;
        }
    }
    out
}

fn from_v_major<T: Real>(data: &[T], f: &mut DistributionField<T>) {
    let (nx, nv) = (f.grid.x.len(), f.grid.v.len());
    for ix in 0..nx {
        let s = f.slice_mut(ix);
        for iv in 0..nv {
            s[iv] = data[iv * nx + ix];
        }
    }
}

/// `ζ_ε·(f ∗ ψ_ε)` with a separable discrete Gaussian of standard deviation
/// `eps` in every active x-axis (periodic) and every v-axis (zero outside).
pub fn mollify_initial_data<T: Real>(f_in: &DistributionField<T>, eps: T) -> Result<DistributionField<T>> {
    if !(eps >= T::zero()) {
        return Err(invalid("mollify_eps", format!("{eps} must be >= 0")));
    }
    if eps == T::zero() {
        return Ok(f_in.clone());
    }
    let g = f_in.grid;
    if T::one() / eps < g.v.h() {
        return Err(invalid(
            "mollify_eps",
            format!("cutoff radius 1/eps = {} is below the velocity spacing {}", T::one() / eps, g.v.h()),
        ));
    }
    let mut out = f_in.clone();
    if g.x.dim > 0 {
        let w = gaussian_weights(eps, g.x.dx());
        let mut vm = to_v_major(&out);
        let nx = g.x.len();
        vm.par_chunks_mut(nx).for_each(|block| {
            for axis in 0..g.x.dim {
                for_each_line(block, g.x.n, g.x.dim, axis, |l, o| convolve_line(l, &w, true, o));
            }
        });
        from_v_major(&vm, &mut out);
    }
    let w = gaussian_weights(eps, g.v.h());
    let cut: Vec<T> = (0..g.v.len()).map(|i| velocity_cutoff(eps, norm3(g.v.velocity(i)))).collect();
    out.values.par_chunks_mut(g.v.len()).for_each(|s| {
        for axis in 0..3 {
            for_each_line(s, g.v.n, 3, axis, |l, o| convolve_line(l, &w, false, o));
        }
        for (x, c) in s.iter_mut().zip(&cut) {
            *x = (*x * *c).max(T::zero());
        }
    });
    Ok(out)
}

fn cubic_weights<T: Real>(th: T) -> [T; 4] {
    let (one, two) = (T::one(), T::lit(2.0));
    [
        -th * (th - one) * (th - two) / T::lit(6.0),
        (th + one) * (th - one) * (th - two) / two,
        -(th + one) * th * (th - two) / two,
        (th + one) * th * (th - one) / T::lit(6.0),
    ]
}

/// `out[i] = line(i − s)` on a periodic line; `s` in cells.
fn shift_line_cubic<T: Real>(line: &[T], s: T, out: &mut [T]) {
    let n = line.len() as i64;
    let r = s.round();
    if (s - r).abs() < T::lit(1e-9) {
        let k = r.to_i64().unwrap_or(0);
        for (i, o) in out.iter_mut().enumerate() {
            *o = line[(i as i64 - k).rem_euclid(n) as usize];
        }
        return;
    }
    let fl = s.floor();
    // Position i − s = (i − ⌊s⌋ − 1) + (1 − frac(s)).
    let th = T::one() - (s - fl);
    let base = -fl.to_i64().unwrap_or(0) - 1;
    let w = cubic_weights(th);
    for (i, o) in out.iter_mut().enumerate() {
        let j = i as i64 + base;
        let mut acc = T::zero();
        for (m, wm) in w.iter().enumerate() {
            acc += *wm * line[(j + m as i64 - 1).rem_euclid(n) as usize];
        }
        *o = acc;
    }
}

struct SpectralShift<T: Real> {
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
}

impl<T: Real> SpectralShift<T> {
    fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
            buf: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    fn shift(&mut self, line: &[T], s: T, out: &mut [T]) {
        let n = line.len();
        for (b, l) in self.buf.iter_mut().zip(line) {
            *b = Complex::new(*l, T::zero());
        }
        self.fwd.process(&mut self.buf);
        let tau = T::TAU() / T::from_usize_lossy(n);
        for (k, b) in self.buf.iter_mut().enumerate() {
            let kk = if 2 * k < n {
                k as i64
            } else if 2 * k == n {
                0
            } else {
                k as i64 - n as i64
            };
            if 2 * k == n {
                // Real part of the Nyquist mode under the shift.
                *b *= (tau * T::from_usize_lossy(k) * s).cos();
                continue;
            }
            let ph = -tau * T::lit(kk as f64) * s;
            *b *= Complex::new(ph.cos(), ph.sin());
        }
        self.inv.process(&mut self.buf);
        let inv_n = T::one() / T::from_usize_lossy(n);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * inv_n;
        }
    }
}

/// Free streaming `∂_t f + v·∇_x f = 0` for time `dt` on the torus.
pub fn transport_step<T: Real>(f: &DistributionField<T>, dt: T, scheme: TransportScheme) -> DistributionField<T> {
    let g = f.grid;
    if g.x.dim == 0 || dt == T::zero() {
        return f.clone();
    }
    let nx = g.x.len();
    let dx = g.x.dx();
    let mut vm = to_v_major(f);
    vm.par_chunks_mut(nx).enumerate().for_each_init(
        || SpectralShift::new(g.x.n),
        |spec, (iv, block)| {
            let v = g.v.velocity(iv);
            for axis in 0..g.x.dim {
                let s = v[axis] * dt / dx;
                for_each_line(block, g.x.n, g.x.dim, axis, |l, o| match scheme {
                    TransportScheme::CubicLagrange => shift_line_cubic(l, s, o),
                    TransportScheme::Spectral => spec.shift(l, s, o),
                });
            }
        },
    );
    let mut out = f.clone();
    from_v_major(&vm, &mut out);
    out.time = f.time + dt;
    out
}

/// `v`-index stride along each axis.
fn strides(n: usize) -> [usize; 3] {
    [n * n, n, 1]
}

/// Central first differences with zero ghosts, `[∂₁f, ∂₂f, ∂₃f]` per cell.
fn central_gradient<T: Real>(g: &VelocityGrid<T>, f: &[T]) -> Vec<[T; 3]> {
    let n = g.n;
    let st = strides(n);
    let inv2h = T::one() / (T::lit(2.0) * g.h());
    let mut out = vec![[T::zero(); 3]; f.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let c = g.unravel(idx);
        for a in 0..3 {
            let up = if c[a] + 1 < n { f[idx + st[a]] } else { T::zero() };
            let dn = if c[a] > 0 { f[idx - st[a]] } else { T::zero() };
            o[a] = (up - dn) * inv2h;
        }
    }
    out
}

const SYM: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

/// `Q(f)` in divergence form for one velocity slice: face flux
/// `F = ā∇f + b̄f` with face averages of `ā`, `b̄`, `f` and of the cell-centred
/// tangential gradients; boundary fluxes vanish.
fn divergence_operator<T: Real>(c: &CoefficientField<T>, f: &[T], out: &mut [T]) {
    let g = &c.grid;
    let n = g.n;
    let st = strides(n);
    let h = g.h();
    let half = T::lit(0.5);
    let grad = central_gradient(g, f);
    out.iter_mut().for_each(|o| *o = T::zero());
    for idx in 0..f.len() {
        let cell = g.unravel(idx);
        for a in 0..3 {
            if cell[a] + 1 >= n {
                continue;
            }
            let j = idx + st[a];
            let (aa, ab) = (&c.a[idx], &c.a[j]);
            let mut flux = half * (aa[SYM[a][a]] + ab[SYM[a][a]]) * (f[j] - f[idx]) / h;
            for b in 0..3 {
                if b != a {
                    flux += half * (aa[SYM[a][b]] + ab[SYM[a][b]]) * half * (grad[idx][b] + grad[j][b]);
                }
            }
            flux += half * (c.b[idx][a] + c.b[j][a]) * half * (f[idx] + f[j]);
            let d = flux / h;
            out[idx] += d;
            out[j] -= d;
        }
    }
}

/// Second difference along axis `a`: central with zero ghosts, or one-sided
/// at the box faces when `one_sided`.
fn second_difference<T: Real>(f: &[T], idx: usize, cell: [usize; 3], a: usize, n: usize, one_sided: bool) -> T {
    let s = strides(n)[a];
    let two = T::lit(2.0);
    if one_sided && n >= 3 {
        if cell[a] == 0 {
            return f[idx] - two * f[idx + s] + f[idx + 2 * s];
        }
        if cell[a] == n - 1 {
            return f[idx] - two * f[idx - s] + f[idx - 2 * s];
        }
    }
    let up = if cell[a] + 1 < n { f[idx + s] } else { T::zero() };
    let dn = if cell[a] > 0 { f[idx - s] } else { T::zero() };
    up - two * f[idx] + dn
}

/// `tr(āD²f) + c̄f` for one slice; cross terms use zero ghosts.
fn nondivergence_operator<T: Real>(c: &CoefficientField<T>, f: &[T], out: &mut [T]) {
    let g = &c.grid;
    let n = g.n;
    let st = strides(n);
    let h2 = g.h() * g.h();
    let at = |cell: [usize; 3], da: (usize, i64), db: (usize, i64)| -> T {
        let mut p = [cell[0] as i64, cell[1] as i64, cell[2] as i64];
        p[da.0] += da.1;
        p[db.0] += db.1;
        if p.iter().any(|&q| q < 0 || q >= n as i64) {
            T::zero()
        } else {
            f[p[0] as usize * st[0] + p[1] as usize * st[1] + p[2] as usize]
        }
    };
    for (idx, o) in out.iter_mut().enumerate() {
        let cell = g.unravel(idx);
        let a = &c.a[idx];
        let mut acc = T::zero();
        for d in 0..3 {
            acc += a[SYM[d][d]] * second_difference(f, idx, cell, d, n, true);
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let cross = at(cell, (p, 1), (q, 1)) - at(cell, (p, 1), (q, -1)) - at(cell, (p, -1), (q, 1)) + at(cell, (p, -1), (q, -1));
            acc += T::lit(2.0) * a[SYM[p][q]] * cross / T::lit(4.0);
        }
        *o = acc / h2 + c.c[idx] * f[idx];
    }
}

/// Right-hand side `Q(f)` for one velocity slice.
pub fn collision_operator<T: Real>(form: CollisionForm, c: &CoefficientField<T>, f: &[T], out: &mut [T]) {
    match form {
        CollisionForm::Divergence => divergence_operator(c, f, out),
        CollisionForm::Nondivergence => nondivergence_operator(c, f, out),
    }
}

/// Diagonal diffusion coefficients of the implicit part along axis `a`:
/// `(lower, upper)` couplings of cell `idx`, zero across the box faces.
fn implicit_couplings<T: Real>(form: CollisionForm, c: &CoefficientField<T>, idx: usize, cell: [usize; 3], a: usize) -> (T, T) {
    let n = c.grid.n;
    let s = strides(n)[a];
    let k = SYM[a][a];
    let half = T::lit(0.5);
    match form {
        CollisionForm::Divergence => {
            let lo = if cell[a] > 0 {
                half * (c.a[idx][k] + c.a[idx - s][k])
            } else {
                T::zero()
            };
            let up = if cell[a] + 1 < n {
                half * (c.a[idx][k] + c.a[idx + s][k])
            } else {
                T::zero()
            };
            (lo, up)
        }
        CollisionForm::Nondivergence => (c.a[idx][k], c.a[idx][k]),
    }
}

/// `D_a f`, the part of the operator treated implicitly along axis `a`.
fn implicit_part<T: Real>(form: CollisionForm, c: &CoefficientField<T>, f: &[T], a: usize, out: &mut [T]) {
    let g = &c.grid;
    let s = strides(g.n)[a];
    let h2 = g.h() * g.h();
    for (idx, o) in out.iter_mut().enumerate() {
        let cell = g.unravel(idx);
        let (lo, up) = implicit_couplings(form, c, idx, cell, a);
        let fu = if cell[a] + 1 < g.n { f[idx + s] } else { T::zero() };
        let fd = if cell[a] > 0 { f[idx - s] } else { T::zero() };
        *o = match form {
            CollisionForm::Divergence => (up * (fu - f[idx]) - lo * (f[idx] - fd)) / h2,
            CollisionForm::Nondivergence => up * (fu - T::lit(2.0) * f[idx] + fd) / h2,
        };
    }
}

/// Solves `(I − dt D_a) u = rhs` in place along every line of axis `a`.
fn implicit_solve<T: Real>(form: CollisionForm, c: &CoefficientField<T>, dt: T, a: usize, u: &mut [T]) {
    let g = &c.grid;
    let n = g.n;
    let st = strides(n);
    let r = dt / (g.h() * g.h());
    let (mut lower, mut diag, mut upper) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let (mut rhs, mut scratch) = (vec![T::zero(); n], vec![T::zero(); n]);
    for start in 0..u.len() {
        if !(start / st[a]).is_multiple_of(n) {
            continue;
        }
        for i in 0..n {
            let idx = start + i * st[a];
            let cell = g.unravel(idx);
            let (lo, up) = implicit_couplings(form, c, idx, cell, a);
            lower[i] = -r * lo;
            upper[i] = -r * up;
            diag[i] = match form {
                CollisionForm::Divergence => T::one() + r * (lo + up),
                CollisionForm::Nondivergence => T::one() + T::lit(2.0) * r * lo,
            };
            rhs[i] = u[idx];
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut scratch);
        for i in 0..n {
            u[start + i * st[a]] = rhs[i];
        }
    }
}

/// Explicit stability limit `min(0.4h²/(6 max|ā|), 0.5/max c̄)` for one slice;
/// the semi-implicit integrator only keeps the `c̄` part.
pub fn stable_dt<T: Real>(c: &CoefficientField<T>, integrator: CollisionIntegrator) -> T {
    let h2 = c.grid.h() * c.grid.h();
    let mut lim = T::infinity();
    if integrator != CollisionIntegrator::SemiImplicit {
        let am = c.max_a_norm();
        if am > T::zero() {
            lim = lim.min(T::lit(0.4) * h2 / (T::lit(6.0) * am));
        }
    }
    let cm = c.max_c();
    if cm > T::zero() {
        lim = lim.min(T::lit(0.5) / cm);
    }
    lim
}

fn euler_slice<T: Real>(form: CollisionForm, c: &CoefficientField<T>, f: &[T], dt: T, out: &mut [T]) {
    collision_operator(form, c, f, out);
    for (o, x) in out.iter_mut().zip(f) {
        *o = *x + dt * *o;
    }
}

fn semi_implicit_slice<T: Real>(form: CollisionForm, c: &CoefficientField<T>, f: &[T], dt: T, out: &mut [T]) {
    collision_operator(form, c, f, out);
    let mut d = vec![T::zero(); f.len()];
    for a in 0..3 {
        implicit_part(form, c, f, a, &mut d);
        for (o, x) in out.iter_mut().zip(&d) {
            *o -= *x;
        }
    }
    for (o, x) in out.iter_mut().zip(f) {
        *o = *x + dt * *o;
    }
    for a in 0..3 {
        implicit_solve(form, c, dt, a, out);
    }
}

/// `f + dt/2 (Q₀ f + Q₁ f₁)` with `f₁` the Euler predictor; `c1` defaults to `c0`.
fn heun_slice<T: Real>(form: CollisionForm, c0: &CoefficientField<T>, c1: &CoefficientField<T>, f: &[T], f1: &[T], dt: T, out: &mut [T]) {
    let mut q0 = vec![T::zero(); f.len()];
    collision_operator(form, c0, f, &mut q0);
    collision_operator(form, c1, f1, out);
    let half = T::lit(0.5) * dt;
    for ((o, x), q) in out.iter_mut().zip(f).zip(&q0) {
        *o = *x + half * (*q + *o);
    }
}

fn check_slices<T: Real>(f: &DistributionField<T>, coeffs: &[CoefficientField<T>]) -> Result<()> {
    if coeffs.len() != f.grid.x.len() {
        return Err(Error::GridMismatch(format!(
            "{} coefficient slices for {} x-cells",
            coeffs.len(),
            f.grid.x.len()
        )));
    }
    if coeffs.iter().any(|c| c.grid != f.grid.v) {
        return Err(Error::GridMismatch(
            "coefficient grid differs from the field's velocity grid".into(),
        ));
    }
    Ok(())
}

/// Sets negatives to zero; returns the removed (positive) mass.
pub fn clamp_negative<T: Real>(f: &mut DistributionField<T>) -> T {
    let mut lost = T::zero();
    for v in f.values.iter_mut() {
        if *v < T::zero() {
            lost -= *v;
            *v = T::zero();
        }
    }
    lost * f.grid.cell_volume()
}

/// Copy with negatives floored at zero.
pub fn positive_part<T: Real>(f: &DistributionField<T>) -> DistributionField<T> {
    let mut g = f.clone();
    g.values.iter_mut().for_each(|v| *v = v.max(T::zero()));
    g
}

fn check_growth<T: Real>(f: &DistributionField<T>, reference_sup: T) -> Result<()> {
    let limit = T::lit(1e3) * reference_sup;
    if let Some(i) = f.values.iter().position(|v| !v.is_finite() || v.abs() > limit) {
        return Err(Error::Instability {
            time: f.time.to_f64_lossy(),
            detail: format!("value {} at cell {i} exceeds 1e3 x initial sup {}", f.values[i], reference_sup),
        });
    }
    Ok(())
}

fn check_stability<T: Real>(coeffs: &[CoefficientField<T>], dt: T, integrator: CollisionIntegrator) -> Result<()> {
    let lim = coeffs.iter().map(|c| stable_dt(c, integrator)).fold(T::infinity(), T::min);
    if dt > lim {
        return Err(invalid("dt", format!("dt = {dt} exceeds the explicit stability limit {lim}")));
    }
    Ok(())
}

fn advance<T: Real>(
    f: &DistributionField<T>,
    c0: &[CoefficientField<T>],
    c1: Option<&[CoefficientField<T>]>,
    predictor: Option<&DistributionField<T>>,
    dt: T,
    form: CollisionForm,
    integrator: CollisionIntegrator,
) -> DistributionField<T> {
    let nv = f.grid.v.len();
    let mut out = f.clone();
    out.time = f.time + dt;
    out.values.par_chunks_mut(nv).enumerate().for_each(|(ix, o)| {
        let s = f.slice(ix);
        match integrator {
            CollisionIntegrator::ExplicitEuler => euler_slice(form, &c0[ix], s, dt, o),
            CollisionIntegrator::SemiImplicit => semi_implicit_slice(form, &c0[ix], s, dt, o),
            CollisionIntegrator::Heun => {
                let p = predictor.expect("Heun needs a predictor");
                let c = c1.map_or(&c0[ix], |c| &c[ix]);
                heun_slice(form, &c0[ix], c, s, p.slice(ix), dt, o)
            }
        }
    });
    out
}

/// One collision step with coefficients frozen at `coeffs` (one slice per
/// x-cell). Returns the new field and the mass removed by clamping.
pub fn collision_step<T: Real>(
    f: &DistributionField<T>,
    coeffs: &[CoefficientField<T>],
    dt: T,
    config: &SolverConfig<T>,
) -> Result<(DistributionField<T>, T)> {
    check_slices(f, coeffs)?;
    if dt == T::zero() {
        return Ok((f.clone(), T::zero()));
    }
    check_stability(coeffs, dt, config.integrator)?;
    let reference = f.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let predictor = (config.integrator == CollisionIntegrator::Heun)
        .then(|| advance(f, coeffs, None, None, dt, config.collision_form, CollisionIntegrator::ExplicitEuler));
    let mut out = advance(f, coeffs, None, predictor.as_ref(), dt, config.collision_form, config.integrator);
    check_growth(&out, reference)?;
    let clamped = match config.positivity {
        Positivity::Clamp => clamp_negative(&mut out),
        Positivity::Off => T::zero(),
    };
    Ok((out, clamped))
}

/// Stateful stepper: owns the coefficient engine, the instability reference
/// and the clamping ledger.
pub struct Solver<T: Real> {
    pub config: SolverConfig<T>,
    kernel: CollisionKernel<T>,
    engine: CoefficientEngine<T>,
    reference_sup: T,
    pub clamped_mass: T,
    /// Most negative internal value seen (0 when clamping).
    pub min_raw: T,
}

impl<T: Real> Solver<T> {
    /// `reference_sup` is the sup norm that the growth guard compares to.
    pub fn new(config: SolverConfig<T>, reference_sup: T) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            kernel: config.kernel()?,
            config,
            engine: CoefficientEngine::new(),
            reference_sup,
            clamped_mass: T::zero(),
            min_raw: T::zero(),
        })
    }

    /// Coefficients of `f⁺` at every x-cell.
    pub fn coefficients(&self, f: &DistributionField<T>) -> Result<Vec<CoefficientField<T>>> {
        if f.values.iter().any(|v| *v < T::zero()) {
            self.engine.compute_all(&positive_part(f), &self.kernel)
        } else {
            self.engine.compute_all(f, &self.kernel)
        }
    }

    fn single_collision(&mut self, f: &DistributionField<T>, coeffs: Vec<CoefficientField<T>>, dt: T) -> Result<DistributionField<T>> {
        let form = self.config.collision_form;
        let integ = self.config.integrator;
        let out = if integ == CollisionIntegrator::Heun {
            let pred = advance(f, &coeffs, None, None, dt, form, CollisionIntegrator::ExplicitEuler);
            let c1 = self.coefficients(&pred)?;
            check_stability(&c1, dt, integ)?;
            advance(f, &coeffs, Some(&c1), Some(&pred), dt, form, integ)
        } else {
            advance(f, &coeffs, None, None, dt, form, integ)
        };
        let mut out = out;
        check_growth(&out, self.reference_sup)?;
        match self.config.positivity {
            Positivity::Clamp => self.clamped_mass += clamp_negative(&mut out),
            Positivity::Off => self.min_raw = self.min_raw.min(out.min_value()),
        }
        Ok(out)
    }

    /// Collision over `dt`, recomputing coefficients at the start (and at
    /// the predictor for Heun); splits `dt` when auto-halving is on.
    pub fn collision_substep(&mut self, f: &DistributionField<T>, dt: T) -> Result<DistributionField<T>> {
        if dt == T::zero() {
            return Ok(f.clone());
        }
        let coeffs = self.coefficients(f)?;
        let lim = coeffs
            .iter()
            .map(|c| stable_dt(c, self.config.integrator))
            .fold(T::infinity(), T::min);
        if dt <= lim {
            return self.single_collision(f, coeffs, dt);
        }
        if !self.config.auto_halve {
            return Err(invalid("dt", format!("dt = {dt} exceeds the explicit stability limit {lim}")));
        }
        let mut pieces = 2usize;
        while dt / T::from_usize_lossy(pieces) > lim {
            pieces *= 2;
            if pieces > 1 << 20 {
                return Err(Error::Instability {
                    time: f.time.to_f64_lossy(),
                    detail: format!("stability limit {lim} needs more than 2^20 substeps"),
                });
            }
        }
        let sub = dt / T::from_usize_lossy(pieces);
        let mut cur = self.single_collision(f, coeffs, sub)?;
        for _ in 1..pieces {
            let c = self.coefficients(&cur)?;
            cur = self.single_collision(&cur, c, sub)?;
        }
        cur.time = f.time + dt;
        Ok(cur)
    }

    /// One split step: `T(dt/2) C(dt) T(dt/2)` (Strang) or `C(dt) T(dt)` (Lie).
    /// With clamping on, the returned state is nonnegative.
    pub fn step(&mut self, f: &DistributionField<T>, dt: T) -> Result<DistributionField<T>> {
        let scheme = self.config.transport;
        let mut out = match self.config.splitting {
            Splitting::Strang => {
                let half = T::lit(0.5) * dt;
                let a = transport_step(f, half, scheme);
                let b = self.collision_substep(&a, dt)?;
                transport_step(&b, half, scheme)
            }
            Splitting::Lie => {
                let a = transport_step(f, dt, scheme);
                self.collision_substep(&a, dt)?
            }
        };
        out.time = f.time + dt;
        // Interpolated transport can undershoot too.
        if self.config.positivity == Positivity::Clamp {
            self.clamped_mass += clamp_negative(&mut out);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Ψ exceeded the threshold at `time`.
    ContinuationAbort {
        time: f64,
        psi: f64,
    },
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord<T> {
    pub times: Vec<T>,
    pub snapshots: Vec<DistributionField<T>>,
    pub rows: Vec<DiagnosticsRow>,
    pub status: RunStatus,
    pub steps: usize,
    pub clamped_mass: T,
    pub min_raw: T,
    pub peak_psi: T,
    pub peak_linfty_k: T,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn final_time(&self) -> T {
        *self.times.last().expect("record holds the initial snapshot")
    }
}

/// Progress notifications from [`run_simulation_with`].
pub enum RunEvent<'a, T> {
    Row(&'a DiagnosticsRow),
    Snapshot(&'a DistributionField<T>),
}

/// [`run_simulation_with`] without an observer.
pub fn run_simulation<T: Real>(f_in: &DistributionField<T>, config: &SolverConfig<T>) -> Result<TrajectoryRecord<T>> {
    run_simulation_with(f_in, config, |_| {})
}

/// Mollifies `f_in`, then steps from its time to `t_end`, emitting a row and
/// a snapshot every `diag_every` steps and at the end. Ψ is checked after
/// every step; exceeding the threshold ends the run with
/// [`RunStatus::ContinuationAbort`].
pub fn run_simulation_with<T: Real>(
    f_in: &DistributionField<T>,
    config: &SolverConfig<T>,
    mut observer: impl FnMut(RunEvent<'_, T>),
) -> Result<TrajectoryRecord<T>> {
    config.validate()?;
    if !f_in.is_admissible() {
        return Err(invalid("f_in", "initial data must be finite and nonnegative"));
    }
    let mut f = mollify_initial_data(f_in, config.mollify_eps)?;
    let t0 = f.time;
    if !(config.t_end > t0) {
        return Err(invalid(
            "t_end",
            format!("t_end = {} must exceed the initial time {t0}", config.t_end),
        ));
    }
    let mut solver = Solver::new(config.clone(), f.sup())?;
    let mut monitor = PsiMonitor::new(config.psi_choice()?);
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        snapshots: Vec::new(),
        rows: Vec::new(),
        status: RunStatus::Completed,
        steps: 0,
        clamped_mass: T::zero(),
        min_raw: T::zero(),
        peak_psi: T::zero(),
        peak_linfty_k: T::zero(),
    };
    let mut emit =
        |rec: &mut TrajectoryRecord<T>, solver: &Solver<T>, state: &DistributionField<T>, monitor: &mut PsiMonitor<T>| -> Result<()> {
            let shown = positive_part(state);
            let coeffs = solver.coefficients(&shown)?;
            let row = diagnostics_row(&shown, &coeffs, monitor, config.k_decay, solver.clamped_mass, &config.diagnostics)?;
            observer(RunEvent::Row(&row));
            observer(RunEvent::Snapshot(&shown));
            rec.rows.push(row);
            rec.times.push(shown.time);
            rec.snapshots.push(shown);
            Ok(())
        };
    let (psi0, _) = monitor.update(&positive_part(&f));
    rec.peak_psi = psi0;
    rec.peak_linfty_k = f.weighted_sup_norm(config.k_decay);
    emit(&mut rec, &solver, &f, &mut monitor)?;
    if psi0 > config.psi_threshold {
        rec.status = RunStatus::ContinuationAbort {
            time: t0.to_f64_lossy(),
            psi: psi0.to_f64_lossy(),
        };
        return Ok(rec);
    }
    let span = config.t_end - t0;
    let n_steps = ((span / config.dt) - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    for step in 1..=n_steps {
        let t_next = if step == n_steps {
            config.t_end
        } else {
            t0 + T::from_usize_lossy(step) * config.dt
        };
        let dt = t_next - f.time;
        f = solver.step(&f, dt)?;
        f.time = t_next;
        rec.steps = step;
        let shown = positive_part(&f);
        let (psi_now, _) = monitor.update(&shown);
        rec.peak_psi = rec.peak_psi.max(psi_now);
        rec.peak_linfty_k = rec.peak_linfty_k.max(shown.weighted_sup_norm(config.k_decay));
        let abort = psi_now > config.psi_threshold;
        if step % config.diag_every == 0 || step == n_steps || abort {
            emit(&mut rec, &solver, &f, &mut monitor)?;
        }
        if abort {
            rec.status = RunStatus::ContinuationAbort {
                time: t_next.to_f64_lossy(),
                psi: psi_now.to_f64_lossy(),
            };
            break;
        }
    }
    rec.clamped_mass = solver.clamped_mass;
    rec.min_raw = solver.min_raw;
    Ok(rec)
}
