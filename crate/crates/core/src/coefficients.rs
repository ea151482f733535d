//! Nonlocal collision coefficients.
//!
//! For a velocity slice `f` the coefficients are the convolutions
//!
//! ```text
//! a(v) = a_const ∫ (I − ŵ⊗ŵ)|w|^{γ+2} f(v−w) dw
//! b(v) = b_const ∫ |w|^γ w f(v−w) dw
//! c(v) = c_const ∫ |w|^γ f(v−w) dw        (c = c_const f(v) when γ = −3)
//! ```
//!
//! discretized by the rectangle rule on the velocity grid. The singular cell
//! `w = 0` carries the exact cube average of the kernel. Two evaluation paths
//! exist: [`compute_coefficients_direct`] sums over all cell pairs and serves
//! as the reference, [`CoefficientEngine`] convolves through zero-padded FFTs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::field::{slice_lp, velocity_weights, DistributionField, LpExponent};
use crate::grid::VelocityGrid;
use crate::numerics::{gauss_legendre, symmetric_eigenvalues};
use crate::scalar::{bracket, norm3, Real};

/// Kernel exponent and normalization constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionKernel<T> {
    pub gamma: T,
    pub a_const: T,
    pub b_const: T,
    pub c_const: T,
}

impl<T: Real> CollisionKernel<T> {
    /// Normalization with `b = −∇·a` and `c = ∇·b`:
    /// `a_const = 1`, `b_const = 2`, `c_const = 2(γ+3)` and `8π` at γ = −3.
    pub fn new(gamma: T) -> Result<Self> {
        Self::check_gamma(gamma)?;
        let c_const = if gamma == T::lit(-3.0) {
            T::lit(8.0) * T::PI()
        } else {
            T::lit(2.0) * (gamma + T::lit(3.0))
        };
        Ok(Self {
            gamma,
            a_const: T::one(),
            b_const: T::lit(2.0),
            c_const,
        })
    }

    pub fn with_constants(gamma: T, a_const: T, b_const: T, c_const: T) -> Result<Self> {
        Self::check_gamma(gamma)?;
        if !(a_const > T::zero()) || !(c_const > T::zero()) || !b_const.is_finite() {
            return Err(invalid(
                "kernel constants",
                format!("need a_const > 0, c_const > 0, got a={a_const}, b={b_const}, c={c_const}"),
            ));
        }
        Ok(Self {
            gamma,
            a_const,
            b_const,
            c_const,
        })
    }

    fn check_gamma(gamma: T) -> Result<()> {
        if !(gamma >= T::lit(-3.0) && gamma < T::zero()) {
            return Err(invalid("gamma", format!("{gamma} is outside [-3, 0)")));
        }
        Ok(())
    }

    /// Coulomb case: `c` is local.
    pub fn is_coulomb(&self) -> bool {
        self.gamma == T::lit(-3.0)
    }

    fn key(&self) -> [u64; 4] {
        [
            self.gamma.to_f64_lossy().to_bits(),
            self.a_const.to_f64_lossy().to_bits(),
            self.b_const.to_f64_lossy().to_bits(),
            self.c_const.to_f64_lossy().to_bits(),
        ]
    }
}

/// Coefficients on one velocity slice. `a` holds the upper triangle
/// `[a11, a12, a13, a22, a23, a33]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    pub grid: VelocityGrid<T>,
    pub a: Vec<[T; 6]>,
    pub b: Vec<[T; 3]>,
    pub c: Vec<T>,
    pub time: T,
    pub x_cell: usize,
}

impl<T: Real> CoefficientField<T> {
    pub fn zeros(grid: VelocityGrid<T>) -> Self {
        let n = grid.len();
        Self {
            grid,
            a: vec![[T::zero(); 6]; n],
            b: vec![[T::zero(); 3]; n],
            c: vec![T::zero(); n],
            time: T::zero(),
            x_cell: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn matrix(&self, idx: usize) -> [[T; 3]; 3] {
        let a = self.a[idx];
        [[a[0], a[1], a[2]], [a[1], a[3], a[4]], [a[2], a[4], a[5]]]
    }

    /// `eᵀ a e` at one cell.
    pub fn quadratic_form(&self, idx: usize, e: [T; 3]) -> T {
        let m = self.matrix(idx);
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += e[i] * m[i][j] * e[j];
            }
        }
        s
    }

    pub fn trace(&self, idx: usize) -> T {
        let a = self.a[idx];
        a[0] + a[3] + a[5]
    }

    pub fn is_finite(&self) -> bool {
        self.a
            .iter()
            .flatten()
            .chain(self.b.iter().flatten())
            .chain(&self.c)
            .all(|v| v.is_finite())
    }

    /// Largest `|a|` (spectral norm) over the slice.
    pub fn max_a_norm(&self) -> T {
        (0..self.len()).map(|i| spectral_norm(self.a[i])).fold(T::zero(), T::max)
    }

    pub fn max_c(&self) -> T {
        self.c.iter().fold(T::zero(), |m, v| m.max(*v))
    }

    pub fn max_abs_c(&self) -> T {
        self.c.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Component-wise maximum norms, in the order `a11..a33, b1..b3, c`.
    pub fn component_max_norms(&self) -> [T; 10] {
        let mut out = [T::zero(); 10];
        for i in 0..self.len() {
            for (o, v) in out.iter_mut().zip(self.entries(i)) {
                *o = o.max(v.abs());
            }
        }
        out
    }

    pub fn entries(&self, idx: usize) -> [T; 10] {
        let (a, b) = (self.a[idx], self.b[idx]);
        [a[0], a[1], a[2], a[3], a[4], a[5], b[0], b[1], b[2], self.c[idx]]
    }

    fn set_entries(&mut self, idx: usize, e: &[T; 10]) {
        self.a[idx] = [e[0], e[1], e[2], e[3], e[4], e[5]];
        self.b[idx] = [e[6], e[7], e[8]];
        self.c[idx] = e[9];
    }
}

fn spectral_norm<T: Real>(a: [T; 6]) -> T {
    let ev = symmetric_eigenvalues(a.map(|x| x.to_f64_lossy()));
    T::lit(ev[0].abs().max(ev[2].abs()))
}

/// Largest discrepancy between two coefficient fields, each component scaled
/// by the max-norm of that component in `reference` (zero components are
/// compared absolutely).
pub fn max_relative_discrepancy<T: Real>(candidate: &CoefficientField<T>, reference: &CoefficientField<T>) -> T {
    let scale = reference.component_max_norms();
    let mut worst = T::zero();
    for i in 0..reference.len() {
        let (x, y) = (candidate.entries(i), reference.entries(i));
        for c in 0..10 {
            let d = (x[c] - y[c]).abs();
            let r = if scale[c] > T::zero() { d / scale[c] } else { d };
            worst = worst.max(r);
        }
    }
    worst
}

/// Average of `|u|^p` over the unit cube centred at the origin, `p > −3`.
///
/// Splitting the cube into the three pyramids where one coordinate dominates
/// leaves a smooth integrand over the unit square.
pub fn unit_cube_power_average(p: f64) -> f64 {
    assert!(p > -3.0, "cube average of |u|^p needs p > -3");
    let rule = gauss_legendre(24, 0.0, 1.0);
    let mut s = 0.0;
    for &(x, wx) in &rule {
        for &(y, wy) in &rule {
            s += wx * wy * (1.0 + x * x + y * y).powf(0.5 * p);
        }
    }
    24.0 * 0.5f64.powf(p + 3.0) / (p + 3.0) * s
}

/// Ten kernel components at lattice offset `d` (in cells), scaled by the cell
/// volume and the normalization constants.
struct KernelTable<T> {
    h: T,
    kernel: CollisionKernel<T>,
    zero_cell: [T; 10],
}

impl<T: Real> KernelTable<T> {
    fn new(grid: &VelocityGrid<T>, kernel: CollisionKernel<T>) -> Self {
        let h = grid.h();
        let h3 = grid.cell_volume();
        let g = kernel.gamma.to_f64_lossy();
        let avg_a = T::lit(unit_cube_power_average(g + 2.0)) * h.powf(kernel.gamma + T::lit(2.0));
        let diag = kernel.a_const * h3 * T::lit(2.0 / 3.0) * avg_a;
        let c0 = if kernel.is_coulomb() {
            T::zero()
        } else {
            kernel.c_const * h3 * T::lit(unit_cube_power_average(g)) * h.powf(kernel.gamma)
        };
        let z = T::zero();
        Self {
            h,
            kernel,
            zero_cell: [diag, z, z, diag, z, diag, z, z, z, c0],
        }
    }

    fn at(&self, d: [i64; 3]) -> [T; 10] {
        if d == [0, 0, 0] {
            return self.zero_cell;
        }
        let k = &self.kernel;
        let h3 = self.h * self.h * self.h;
        let w = d.map(|x| T::lit(x as f64) * self.h);
        let r2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        let rg = r2.powf(k.gamma * T::lit(0.5));
        let sa = k.a_const * h3 * rg;
        let sb = k.b_const * h3 * rg;
        let c = if k.is_coulomb() { T::zero() } else { k.c_const * h3 * rg };
        [
            sa * (r2 - w[0] * w[0]),
            -sa * w[0] * w[1],
            -sa * w[0] * w[2],
            sa * (r2 - w[1] * w[1]),
            -sa * w[1] * w[2],
            sa * (r2 - w[2] * w[2]),
            sb * w[0],
            sb * w[1],
            sb * w[2],
            c,
        ]
    }
}

fn validate_slice<T: Real>(grid: &VelocityGrid<T>, f: &[T]) -> Result<()> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "slice has {} values, velocity grid has {}",
            f.len(),
            grid.len()
        )));
    }
    if let Some(i) = f.iter().position(|v| !v.is_finite() || *v < T::zero()) {
        return Err(invalid("f", format!("value {} at cell {i} is negative or non-finite", f[i])));
    }
    Ok(())
}

fn apply_local_c<T: Real>(out: &mut CoefficientField<T>, f: &[T], kernel: &CollisionKernel<T>) {
    if kernel.is_coulomb() {
        for (c, v) in out.c.iter_mut().zip(f) {
            *c = kernel.c_const * *v;
        }
    }
}

/// Reference evaluation by summation over all cell pairs, `O(n⁶)`.
pub fn compute_coefficients_direct<T: Real>(grid: &VelocityGrid<T>, f: &[T], kernel: &CollisionKernel<T>) -> Result<CoefficientField<T>> {
    validate_slice(grid, f)?;
    let n = grid.n;
    let span = 2 * n - 1;
    let table = KernelTable::new(grid, *kernel);
    let off = n as i64 - 1;
    let mut tab = Vec::with_capacity(span * span * span);
    for d1 in 0..span {
        for d2 in 0..span {
            for d3 in 0..span {
                tab.push(table.at([d1 as i64 - off, d2 as i64 - off, d3 as i64 - off]));
            }
        }
    }
    let mut out = CoefficientField::zeros(*grid);
    let rows: Vec<[T; 10]> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let [i1, i2, i3] = grid.unravel(i);
            let mut acc = [T::zero(); 10];
            for j1 in 0..n {
                for j2 in 0..n {
                    let base = ((i1 + n - 1 - j1) * span + (i2 + n - 1 - j2)) * span + i3 + n - 1;
                    let fj = &f[(j1 * n + j2) * n..(j1 * n + j2 + 1) * n];
                    for (j3, &fv) in fj.iter().enumerate() {
                        if fv == T::zero() {
                            continue;
                        }
                        let t = &tab[base - j3];
                        for c in 0..10 {
                            acc[c] += t[c] * fv;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    for (i, r) in rows.iter().enumerate() {
        out.set_entries(i, r);
    }
    apply_local_c(&mut out, f, kernel);
    Ok(out)
}

/// Kernel spectra on the zero-padded `(2n)³` grid for one `(grid, kernel)`.
struct Spectra<T: Real> {
    m: usize,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
    kernels: Vec<Vec<Complex<T>>>,
}

type CacheKey = (usize, u64, [u64; 4]);

/// FFT convolution engine with per-`(grid, kernel)` cached kernel spectra.
/// Shareable across threads.
pub struct CoefficientEngine<T: Real> {
    cache: Mutex<HashMap<CacheKey, Arc<Spectra<T>>>>,
    planner: Mutex<FftPlanner<T>>,
}

impl<T: Real> Default for CoefficientEngine<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> CoefficientEngine<T> {
    pub fn new() -> Self {
        Self {
            cache: Mutex::new(HashMap::new()),
            planner: Mutex::new(FftPlanner::new()),
        }
    }

    pub fn cached_kernels(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }

    fn spectra(&self, grid: &VelocityGrid<T>, kernel: &CollisionKernel<T>) -> Arc<Spectra<T>> {
        let key = (grid.n, grid.l.to_f64_lossy().to_bits(), kernel.key());
        if let Some(s) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Arc::clone(s);
        }
        let n = grid.n;
        let m = 2 * n;
        let (fft, ifft) = {
            let mut p = self.planner.lock().expect("planner poisoned");
            (p.plan_fft_forward(m), p.plan_fft_inverse(m))
        };
        let table = KernelTable::new(grid, *kernel);
        let wrap = |i: usize| -> Option<i64> {
            match i.cmp(&n) {
                std::cmp::Ordering::Less => Some(i as i64),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(i as i64 - m as i64),
            }
        };
        let mut kernels = vec![vec![Complex::default(); m * m * m]; 10];
        for i1 in 0..m {
            for i2 in 0..m {
                for i3 in 0..m {
                    let (Some(d1), Some(d2), Some(d3)) = (wrap(i1), wrap(i2), wrap(i3)) else {
                        continue;
                    };
                    let e = table.at([d1, d2, d3]);
                    let idx = (i1 * m + i2) * m + i3;
                    for c in 0..10 {
                        kernels[c][idx] = Complex::new(e[c], T::zero());
                    }
                }
            }
        }
        let mut scratch = Scratch::new(m, &*fft);
        for k in kernels.iter_mut() {
            fft3_forward(k, m, m, &*fft, &mut scratch);
        }
        let s = Arc::new(Spectra { m, fft, ifft, kernels });
        self.cache.lock().expect("cache poisoned").insert(key, Arc::clone(&s));
        s
    }

    /// Fast path: `O(n³ log n)` per component via zero-padded FFTs.
    pub fn compute(&self, grid: &VelocityGrid<T>, f: &[T], kernel: &CollisionKernel<T>) -> Result<CoefficientField<T>> {
        validate_slice(grid, f)?;
        let mut out = CoefficientField::zeros(*grid);
        if f.iter().all(|v| *v == T::zero()) {
            return Ok(out);
        }
        let sp = self.spectra(grid, kernel);
        let (n, m) = (grid.n, sp.m);
        let mut scratch = Scratch::new(m, &*sp.fft);
        let mut fh = vec![Complex::default(); m * m * m];
        for i1 in 0..n {
            for i2 in 0..n {
                let src = &f[(i1 * n + i2) * n..(i1 * n + i2 + 1) * n];
                let dst = (i1 * m + i2) * m;
                for (k, v) in src.iter().enumerate() {
                    fh[dst + k] = Complex::new(*v, T::zero());
                }
            }
        }
        fft3_forward(&mut fh, m, n, &*sp.fft, &mut scratch);
        let norm = T::one() / T::from_usize_lossy(m * m * m);
        let mut work = vec![Complex::default(); m * m * m];
        let mut vals = vec![[T::zero(); 10]; grid.len()];
        let pairs = if kernel.is_coulomb() { 9 } else { 10 };
        let mut c = 0;
        while c < pairs {
            let (p, q) = (c, c + 1);
            let kp = &sp.kernels[p];
            if q < pairs {
                let kq = &sp.kernels[q];
                for s in 0..work.len() {
                    let a = kp[s] * fh[s];
                    let b = kq[s] * fh[s];
                    work[s] = Complex::new(a.re - b.im, a.im + b.re);
                }
            } else {
                for s in 0..work.len() {
                    work[s] = kp[s] * fh[s];
                }
            }
            fft3_inverse(&mut work, m, n, &*sp.ifft, &mut scratch);
            for i1 in 0..n {
                for i2 in 0..n {
                    for i3 in 0..n {
                        let z = work[(i1 * m + i2) * m + i3];
                        let idx = (i1 * n + i2) * n + i3;
                        vals[idx][p] = z.re * norm;
                        if q < pairs {
                            vals[idx][q] = z.im * norm;
                        }
                    }
                }
            }
            c += 2;
        }
        for (i, v) in vals.iter().enumerate() {
            out.set_entries(i, v);
        }
        apply_local_c(&mut out, f, kernel);
        Ok(out)
    }

    /// Coefficients for every x-slice of a field, in parallel over slices.
    pub fn compute_all(&self, field: &DistributionField<T>, kernel: &CollisionKernel<T>) -> Result<Vec<CoefficientField<T>>> {
        let nx = field.grid.x.len();
        (0..nx)
            .into_par_iter()
            .map(|ix| {
                let mut c = self.compute(&field.grid.v, field.slice(ix), kernel)?;
                c.x_cell = ix;
                c.time = field.time;
                Ok(c)
            })
            .collect()
    }
}

/// One-shot fast path with a private engine.
pub fn compute_coefficients_fast<T: Real>(grid: &VelocityGrid<T>, f: &[T], kernel: &CollisionKernel<T>) -> Result<CoefficientField<T>> {
    CoefficientEngine::new().compute(grid, f, kernel)
}

struct Scratch<T> {
    fft: Vec<Complex<T>>,
    block: Vec<Complex<T>>,
}

impl<T: Real> Scratch<T> {
    fn new(m: usize, fft: &dyn Fft<T>) -> Self {
        Self {
            fft: vec![Complex::default(); fft.get_inplace_scratch_len()],
            block: vec![Complex::default(); m * m],
        }
    }
}

/// In-place forward 3-D FFT of an `m³` buffer whose input is supported in
/// the first `nz` indices of every axis.
fn fft3_forward<T: Real>(buf: &mut [Complex<T>], m: usize, nz: usize, fft: &dyn Fft<T>, s: &mut Scratch<T>) {
    let plane = m * m;
    for i1 in 0..nz {
        fft.process_with_scratch(&mut buf[i1 * plane..i1 * plane + nz * m], &mut s.fft);
    }
    for i1 in 0..nz {
        transform_plane_rows(&mut buf[i1 * plane..(i1 + 1) * plane], m, m, fft, s);
    }
    transform_first_axis(buf, m, m, fft, s);
}

/// In-place inverse 3-D FFT (unnormalized); only the first `keep` indices of
/// every axis are valid on return.
fn fft3_inverse<T: Real>(buf: &mut [Complex<T>], m: usize, keep: usize, fft: &dyn Fft<T>, s: &mut Scratch<T>) {
    let plane = m * m;
    transform_first_axis(buf, m, keep, fft, s);
    for i1 in 0..keep {
        transform_plane_rows(&mut buf[i1 * plane..(i1 + 1) * plane], m, keep, fft, s);
    }
    for i1 in 0..keep {
        fft.process_with_scratch(&mut buf[i1 * plane..i1 * plane + keep * m], &mut s.fft);
    }
}

/// FFT along the middle axis of one `m×m` plane; writes back rows `< keep`.
fn transform_plane_rows<T: Real>(p: &mut [Complex<T>], m: usize, keep: usize, fft: &dyn Fft<T>, s: &mut Scratch<T>) {
    for j in 0..m {
        for k in 0..m {
            s.block[k * m + j] = p[j * m + k];
        }
    }
    fft.process_with_scratch(&mut s.block, &mut s.fft);
    for j in 0..keep {
        for k in 0..m {
            p[j * m + k] = s.block[k * m + j];
        }
    }
}

/// FFT along the slowest axis; writes back indices `< keep`.
fn transform_first_axis<T: Real>(buf: &mut [Complex<T>], m: usize, keep: usize, fft: &dyn Fft<T>, s: &mut Scratch<T>) {
    let plane = m * m;
    for j in 0..m {
        for i in 0..m {
            let row = &buf[i * plane + j * m..i * plane + (j + 1) * m];
            for k in 0..m {
                s.block[k * m + i] = row[k];
            }
        }
        fft.process_with_scratch(&mut s.block, &mut s.fft);
        for i in 0..keep {
            let row = &mut buf[i * plane + j * m..i * plane + (j + 1) * m];
            for k in 0..m {
                row[k] = s.block[k * m + i];
            }
        }
    }
}

/// Interior max-norm residuals of `b + ∇·a` and `c − ∇·b`, by central
/// differences, skipping the outer two cells on every side.
pub fn divergence_identity_residuals<T: Real>(coeff: &CoefficientField<T>) -> Result<(T, T)> {
    let g = &coeff.grid;
    let n = g.n;
    if n < 8 {
        return Err(invalid("n_v", format!("divergence residuals need n_v >= 8, got {n}")));
    }
    let two_h = T::lit(2.0) * g.h();
    let (mut rb, mut rc) = (T::zero(), T::zero());
    let sym = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    for i1 in 2..n - 2 {
        for i2 in 2..n - 2 {
            for i3 in 2..n - 2 {
                let c = [i1, i2, i3];
                let nb = |axis: usize, up: bool| {
                    let mut q = c;
                    q[axis] = if up { q[axis] + 1 } else { q[axis] - 1 };
                    g.index(q[0], q[1], q[2])
                };
                let idx = g.index(i1, i2, i3);
                let mut div_b = T::zero();
                for i in 0..3 {
                    let mut div_a = T::zero();
                    for (j, &e) in sym[i].iter().enumerate() {
                        div_a += (coeff.a[nb(j, true)][e] - coeff.a[nb(j, false)][e]) / two_h;
                    }
                    rb = rb.max((coeff.b[idx][i] + div_a).abs());
                    div_b += (coeff.b[nb(i, true)][i] - coeff.b[nb(i, false)][i]) / two_h;
                }
                rc = rc.max((coeff.c[idx] - div_b).abs());
            }
        }
    }
    Ok((rb, rc))
}

/// Per-cell ratios of the coefficients to their a priori bounds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundRatios<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub aniso_par: T,
    pub aniso_perp: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientBoundReport<T> {
    pub per_cell: Vec<BoundRatios<T>>,
    pub max: BoundRatios<T>,
    pub weight_k: T,
    /// Moment exponent of the anisotropic bound's `L^{1,ℓ}` norm.
    pub ell: T,
    /// Lebesgue exponent of the anisotropic bound's `L^p` norm (unused for γ > −2).
    pub p: T,
    pub norm_linfty_k: T,
    pub norm_aniso: T,
}

/// Anisotropic-bound exponents `(ℓ, p)`: `(3|γ|/(5+γ) + ½, 3/(5+γ) + ½)` for
/// γ ≤ −2, `ℓ = 2` otherwise.
pub fn anisotropic_exponents<T: Real>(gamma: T) -> (T, T) {
    let half = T::lit(0.5);
    let five = T::lit(5.0) + gamma;
    let p = T::lit(3.0) / five + half;
    if gamma <= T::lit(-2.0) {
        (T::lit(3.0) * gamma.abs() / five + half, p)
    } else {
        (T::lit(2.0), p)
    }
}

pub fn coefficient_bound_report<T: Real>(coeff: &CoefficientField<T>, f: &[T], gamma: T, k: T) -> Result<CoefficientBoundReport<T>> {
    if !(k > gamma + T::lit(5.0)) {
        return Err(invalid("k", format!("need k > gamma + 5, got k={k}, gamma={gamma}")));
    }
    validate_slice(&coeff.grid, f)?;
    let g = &coeff.grid;
    let hv3 = g.cell_volume();
    let ones = vec![T::one(); g.len()];
    let nk = slice_lp(f, &velocity_weights(g, k), LpExponent::Infinity, hv3);
    let sup = slice_lp(f, &ones, LpExponent::Infinity, hv3);
    let (ell, p) = anisotropic_exponents(gamma);
    let l1 = slice_lp(f, &velocity_weights(g, ell), LpExponent::Finite(T::one()), hv3);
    let naniso = if gamma <= T::lit(-2.0) {
        l1 + slice_lp(f, &ones, LpExponent::Finite(p), hv3)
    } else {
        l1
    };
    let nc = if gamma == T::lit(-3.0) { sup } else { nk };
    let ratio = |x: T, d: T| if d > T::zero() { x / d } else { T::zero() };
    let mut per_cell = Vec::with_capacity(g.len());
    let mut max = BoundRatios::<T>::default();
    for i in 0..g.len() {
        let v = g.velocity(i);
        let br = bracket(v);
        let mut r = BoundRatios {
            a: ratio(spectral_norm(coeff.a[i]), br.powf((gamma + T::lit(2.0)).pos_part()) * nk),
            b: ratio(norm3(coeff.b[i]), br.powf((gamma + T::one()).pos_part()) * nk),
            c: ratio(coeff.c[i].abs(), nc),
            ..BoundRatios::default()
        };
        if let Some((e_par, e_perp)) = frame(v) {
            r.aniso_par = ratio(coeff.quadratic_form(i, e_par), br.powf(gamma) * naniso);
            r.aniso_perp = ratio(coeff.quadratic_form(i, e_perp), br.powf(gamma + T::lit(2.0)) * naniso);
        }
        max.a = max.a.max(r.a);
        max.b = max.b.max(r.b);
        max.c = max.c.max(r.c);
        max.aniso_par = max.aniso_par.max(r.aniso_par);
        max.aniso_perp = max.aniso_perp.max(r.aniso_perp);
        per_cell.push(r);
    }
    Ok(CoefficientBoundReport {
        per_cell,
        max,
        weight_k: k,
        ell,
        p,
        norm_linfty_k: nk,
        norm_aniso: naniso,
    })
}

/// `(v̂, e)` with `e` a fixed unit vector orthogonal to `v`; `None` at `v = 0`.
pub fn frame<T: Real>(v: [T; 3]) -> Option<([T; 3], [T; 3])> {
    let r = norm3(v);
    if r == T::zero() {
        return None;
    }
    let u = v.map(|x| x / r);
    let mut axis = 0;
    for i in 1..3 {
        if u[i].abs() < u[axis].abs() {
            axis = i;
        }
    }
    let mut ea = [T::zero(); 3];
    ea[axis] = T::one();
    let cross = [
        u[1] * ea[2] - u[2] * ea[1],
        u[2] * ea[0] - u[0] * ea[2],
        u[0] * ea[1] - u[1] * ea[0],
    ];
    let cn = norm3(cross);
    Some((u, cross.map(|x| x / cn)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellSpectrum<T> {
    pub lambda_min: T,
    pub lambda_max: T,
    pub lambda_par: T,
    pub lambda_perp: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticitySpectrum<T> {
    pub cells: Vec<CellSpectrum<T>>,
    /// Cells with `λ_min < −tolerance`.
    pub psd_violations: Vec<usize>,
}

/// Eigenvalues of `a` per cell and Rayleigh quotients along `v̂` and a fixed
/// unit vector orthogonal to `v` (coordinate axes at `v = 0`).
pub fn ellipticity_spectrum<T: Real>(coeff: &CoefficientField<T>, tolerance: T) -> EllipticitySpectrum<T> {
    let g = &coeff.grid;
    let mut cells = Vec::with_capacity(g.len());
    let mut psd_violations = Vec::new();
    for i in 0..g.len() {
        let ev = symmetric_eigenvalues(coeff.a[i].map(|x| x.to_f64_lossy()));
        let (e_par, e_perp) = frame(g.velocity(i)).unwrap_or(([T::one(), T::zero(), T::zero()], [T::zero(), T::one(), T::zero()]));
        let cs = CellSpectrum {
            lambda_min: T::lit(ev[0]),
            lambda_max: T::lit(ev[2]),
            lambda_par: coeff.quadratic_form(i, e_par),
            lambda_perp: coeff.quadratic_form(i, e_perp),
        };
        if cs.lambda_min < -tolerance {
            psd_violations.push(i);
        }
        cells.push(cs);
    }
    EllipticitySpectrum { cells, psd_violations }
}
