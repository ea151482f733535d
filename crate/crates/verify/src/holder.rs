//! Hölder propagation: the supersolution `Ḡ` of
//! `Ḡ' = N t^{s−1}(1+Ḡ)^P`, `s = α²/(6−α)`, `P = (p(α)+1)/2`, compared with
//! the measured g-functional, and the bound of the kinetic time modulus by
//! the (x, v) modulus.

use landau_core::diagnostics::{
    holder_seminorm, p_alpha, sample_window, time_exponent, HolderMetric, HolderParams, NodeRegion, PairSampler,
};
use landau_core::field::DistributionField;
use landau_core::grid::{kinetic_distance, PhasePoint};
use landau_core::scalar::bracket;
use landau_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::report::CheckReport;

/// Ḡ values above this count as blown up.
pub const BLOW_UP_LEVEL: f64 = 1e6;

/// `(s, P)`: the time exponent `α²/(6−α)` and the power `(p(α)+1)/2`.
pub fn supersolution_exponents(alpha: f64) -> (f64, f64) {
    (time_exponent(&alpha), (p_alpha(&alpha) + 1.0) / 2.0)
}

/// In `τ = t^s` the equation is autonomous, `dḠ/dτ = (N/s)(1+Ḡ)^P`, and
/// separates: `(1+Ḡ)^{1−P} = (1+G₀)^{1−P} − (P−1)(N/s)τ`.
pub fn blow_up_tau_closed(n: f64, alpha: f64, g0: f64) -> f64 {
    let (s, p) = supersolution_exponents(alpha);
    s * (1.0 + g0).powf(1.0 - p) / (n * (p - 1.0))
}

pub fn blow_up_time_closed(n: f64, alpha: f64, g0: f64) -> f64 {
    let (s, _) = supersolution_exponents(alpha);
    blow_up_tau_closed(n, alpha, g0).powf(1.0 / s)
}

/// Closed-form `Ḡ(t)`, `None` at or past the blow-up.
pub fn supersolution_closed(n: f64, alpha: f64, g0: f64, t: f64) -> Option<f64> {
    let (s, p) = supersolution_exponents(alpha);
    let u = (1.0 + g0).powf(1.0 - p) - (p - 1.0) * (n / s) * t.powf(s);
    (u > 0.0).then(|| u.powf(1.0 / (1.0 - p)) - 1.0)
}

/// Result of one adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeEnd {
    pub tau: f64,
    pub y: f64,
    pub steps: usize,
    /// Stopped because `y` passed the cap rather than reaching the end.
    pub capped: bool,
}

/// Dormand–Prince 5(4) for a scalar autonomous `y' = rhs(y)` on
/// `[0, tau_end]`, stopping early once `y ≥ y_cap`.
pub fn dopri5(rhs: impl Fn(f64) -> f64, y0: f64, tau_end: f64, y_cap: f64, rtol: f64) -> OdeEnd {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let (mut tau, mut y) = (0.0, y0);
    let mut h = tau_end * 1e-6;
    let mut steps = 0;
    while tau < tau_end {
        if y >= y_cap {
            return OdeEnd {
                tau,
                y,
                steps,
                capped: true,
            };
        }
        h = h.min(tau_end - tau);
        let mut k = [0.0; 7];
        for i in 0..7 {
            let yi = y + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
            k[i] = rhs(yi);
        }
        let y5 = y + h * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
        let y4 = y + h * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
        let err = if y5.is_finite() {
            (y5 - y4).abs() / (rtol * (1e-12 + y.abs().max(y5.abs())))
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            tau += h;
            y = y5;
            steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h <= f64::EPSILON * tau.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    OdeEnd {
        tau,
        y,
        steps,
        capped: y >= y_cap,
    }
}

/// Blow-up time of `Ḡ` by adaptive integration in `τ` up to [`BLOW_UP_LEVEL`].
/// The neglected tail is `((1+G_cap)/(1+G₀))^{1−P}` relative, far below
/// the step tolerance.
pub fn blow_up_time_integrated(n: f64, alpha: f64, g0: f64, rtol: f64) -> f64 {
    let (s, p) = supersolution_exponents(alpha);
    let horizon = 2.0 * blow_up_tau_closed(n, alpha, g0);
    let end = dopri5(|g| n / s * (1.0 + g).powf(p), g0, horizon, BLOW_UP_LEVEL, rtol);
    end.tau.powf(1.0 / s)
}

/// `Ḡ(t)` by adaptive integration; `None` once the curve has blown up.
pub fn supersolution_integrated(n: f64, alpha: f64, g0: f64, t: f64, rtol: f64) -> Option<f64> {
    let (s, p) = supersolution_exponents(alpha);
    if t <= 0.0 {
        return Some(g0);
    }
    let end = dopri5(|g| n / s * (1.0 + g).powf(p), g0, t.powf(s), BLOW_UP_LEVEL, rtol);
    (!end.capped).then_some(end.y)
}

/// `HolderSupersolution`: one `N` of the logged grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderSupersolution {
    pub n: f64,
    pub alpha: f64,
    pub g0: f64,
    pub blow_up_closed: f64,
    pub blow_up_integrated: f64,
    /// `(t − t₀, Ḡ)` at the snapshots strictly before the blow-up.
    pub curve: Vec<(f64, f64)>,
    /// Measured g-sup stays ≤ Ḡ on the curve.
    pub dominates: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderPropagation {
    /// g-functional sup per snapshot (equal-time pairs, separations ≤ 1).
    pub g_sup: Vec<f64>,
    pub times: Vec<f64>,
    /// `sup_t ‖f(t)‖_{L^{∞,m}}`.
    pub f_norm: f64,
    pub candidates: Vec<HolderSupersolution>,
    /// Smallest passing `N`.
    pub chosen: Option<usize>,
    /// Passing horizon `min(T_G, run length)` for the chosen `N`.
    pub t_h: f64,
    /// Blow-up time strictly decreasing along the `N` grid.
    pub blow_up_decreasing: bool,
}

/// g-functional sup per snapshot, exhaustive over equal-time pairs.
pub fn g_sup_series(trajectory: &[DistributionField<f64>], alpha: f64, m: f64) -> Result<Vec<f64>> {
    let params = HolderParams::new(alpha, m, HolderMetric::Euclidean)?;
    trajectory
        .iter()
        .map(|f| {
            let one = std::slice::from_ref(f);
            let est = holder_seminorm(one, &params, &PairSampler::Exhaustive(NodeRegion::full(1, &f.grid)))?;
            Ok(est.g_sup)
        })
        .collect()
}

pub fn holder_propagation(trajectory: &[DistributionField<f64>], alpha: f64, m: f64, n_grid: &[f64]) -> Result<HolderPropagation> {
    let first = trajectory.first().ok_or_else(|| Error::EmptySample("empty trajectory".into()))?;
    let t0 = first.time;
    let times: Vec<f64> = trajectory.iter().map(|f| f.time - t0).collect();
    let g_sup = g_sup_series(trajectory, alpha, m)?;
    let f_norm = trajectory.iter().map(|f| f.weighted_sup_norm(m)).fold(0.0, f64::max);
    let run_length = times.last().copied().unwrap_or(0.0);
    let mut candidates = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let g0 = 1.0 + g_sup[0] + n * f_norm * f_norm;
        let blow_up_closed = blow_up_time_closed(n, alpha, g0);
        let blow_up_integrated = blow_up_time_integrated(n, alpha, g0, 1e-12);
        let mut curve = Vec::new();
        let mut dominates = true;
        for (i, &t) in times.iter().enumerate() {
            if t >= blow_up_closed {
                break;
            }
            match supersolution_integrated(n, alpha, g0, t, 1e-10) {
                Some(g) => {
                    dominates &= g_sup[i] <= g;
                    curve.push((t, g));
                }
                None => break,
            }
        }
        candidates.push(HolderSupersolution {
            n,
            alpha,
            g0,
            blow_up_closed,
            blow_up_integrated,
            curve,
            dominates,
        });
    }
    let blow_up_decreasing = candidates.windows(2).all(|w| w[1].blow_up_integrated < w[0].blow_up_integrated);
    let chosen = candidates.iter().position(|c| c.dominates && !c.curve.is_empty());
    let t_h = chosen.map_or(0.0, |i| candidates[i].blow_up_closed.min(run_length));
    Ok(HolderPropagation {
        g_sup,
        times,
        f_norm,
        candidates,
        chosen,
        t_h,
        blow_up_decreasing,
    })
}

/// Passes when some `N` of the grid dominates the measured g-sup up to its
/// blow-up, giving `T_H > 0`, and the blow-up time falls as `N` grows.
/// No passing `N` is reported as a finding.
pub fn holder_propagation_check(trajectory: &[DistributionField<f64>], alpha: f64, m: f64, n_grid: &[f64]) -> CheckReport {
    let params = json!({"alpha": alpha, "m": m, "n_grid": n_grid});
    let out = match holder_propagation(trajectory, alpha, m, n_grid) {
        Ok(o) => o,
        Err(e) => return CheckReport::failed("holder_propagation", params, 0, e),
    };
    let g_max = out.g_sup.iter().copied().fold(0.0, f64::max);
    let candidates: Vec<_> = out
        .candidates
        .iter()
        .map(|c| {
            json!({"N": c.n, "G0": c.g0, "T_G_closed": c.blow_up_closed, "T_G_integrated": c.blow_up_integrated,
                   "samples_before_blow_up": c.curve.len(), "dominates": c.dominates})
        })
        .collect();
    let witness = json!({
        "chosen_N": out.chosen.map(|i| out.candidates[i].n),
        "finding": if out.chosen.is_none() { "no N in the grid passes" } else { "" },
        "T_H": out.t_h,
        "blow_up_decreasing": out.blow_up_decreasing,
        "g_sup_initial": out.g_sup.first(),
        "g_sup_max_over_run": g_max,
        "f_norm_linfty_m": out.f_norm,
        "candidates": candidates,
    });
    let pass = out.chosen.is_some() && out.t_h > 0.0 && out.blow_up_decreasing;
    CheckReport::new("holder_propagation", params, 0).verdict(pass, out.t_h, witness)
}

/// Random point of `Q_r(z₀) = {t ∈ (t₀−r², t₀], |x − x₀ − (t−t₀)v₀| < r³, |v − v₀| < r}`;
/// x coordinates beyond `dim_x` stay 0.
fn cylinder_point(rng: &mut ChaCha8Rng, z0: &PhasePoint<f64>, r: f64, dim_x: usize) -> PhasePoint<f64> {
    let t = z0.t - r * r * rng.gen::<f64>();
    let v = ball(rng, r, 3);
    let dx = ball(rng, r * r * r, dim_x);
    PhasePoint {
        t,
        x: std::array::from_fn(|a| if a < dim_x { z0.x[a] + (t - z0.t) * z0.v[a] + dx[a] } else { 0.0 }),
        v: std::array::from_fn(|a| z0.v[a] + v[a]),
    }
}

fn ball(rng: &mut ChaCha8Rng, r: f64, dim: usize) -> [f64; 3] {
    loop {
        let p: [f64; 3] = std::array::from_fn(|a| if a < dim { rng.gen_range(-1.0..1.0) } else { 0.0 });
        if p.iter().map(|c| c * c).sum::<f64>() < 1.0 {
            return p.map(|c| c * r);
        }
    }
}

fn in_cylinder(z: &PhasePoint<f64>, z0: &PhasePoint<f64>, r: f64, dim_x: usize) -> bool {
    let dt = z.t - z0.t;
    let dx: f64 = (0..dim_x).map(|a| (z.x[a] - z0.x[a] - dt * z0.v[a]).powi(2)).sum::<f64>().sqrt();
    let dv: f64 = (0..3).map(|a| (z.v[a] - z0.v[a]).powi(2)).sum::<f64>().sqrt();
    dt <= 0.0 && dt > -r * r && dx < r * r * r && dv < r
}

/// Second point at a log-uniform kinetic scale `λ ∈ [r/100, r]` from `z`,
/// optionally at the same time.
fn nearby(rng: &mut ChaCha8Rng, z: &PhasePoint<f64>, r: f64, dim_x: usize, same_time: bool) -> PhasePoint<f64> {
    let lambda = r * 10f64.powf(-2.0 * rng.gen::<f64>());
    let dt = if same_time {
        0.0
    } else {
        -lambda * lambda * rng.gen_range(-1.0..1.0)
    };
    let dv = ball(rng, lambda, 3);
    let dx = ball(rng, lambda * lambda * lambda, dim_x);
    PhasePoint {
        t: z.t + dt,
        x: std::array::from_fn(|a| if a < dim_x { z.x[a] + dt * z.v[a] + dx[a] } else { 0.0 }),
        v: std::array::from_fn(|a| z.v[a] + dv[a]),
    }
}

/// Sampled `[f]_{C^α_kin}` over pairs inside `Q_r(z₀)`; with `same_time`
/// only equal-time pairs count (the (x, v) seminorm). Returns the seminorm
/// and the largest `|f|` seen.
fn cylinder_seminorm(
    window: &[DistributionField<f64>],
    z0: &PhasePoint<f64>,
    r: f64,
    alpha: f64,
    pairs: usize,
    same_time: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let dim_x = window[0].grid.x.dim;
    let (mut best, mut sup): (f64, f64) = (0.0, 0.0);
    let mut accepted = 0;
    let mut tries = 0;
    while accepted < pairs && tries < 20 * pairs {
        tries += 1;
        let z = cylinder_point(rng, z0, r, dim_x);
        let zp = nearby(rng, &z, r, dim_x, same_time);
        if !in_cylinder(&zp, z0, r, dim_x) {
            continue;
        }
        accepted += 1;
        let (a, b) = (sample_window(window, &z)?, sample_window(window, &zp)?);
        sup = sup.max(a.abs()).max(b.abs());
        let d = kinetic_distance(&z, &zp);
        if d > 0.0 {
            best = best.max((a - b).abs() / d.powf(alpha));
        }
    }
    if accepted == 0 {
        return Err(Error::EmptySample("no pair landed in the cylinder".into()));
    }
    Ok((best, sup))
}

/// `[f]_{C^α_kin(Q₁(z₀))} / (⟨v₀⟩^{α(1+γ/2)+}(‖f‖_∞ + [f]_{C^α_{kin,x,v}(Q₂(z₀))}))`.
pub fn time_from_xv_ratio(
    window: &[DistributionField<f64>],
    z0: &PhasePoint<f64>,
    alpha: f64,
    gamma: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let first = window.first().ok_or_else(|| Error::EmptySample("empty trajectory".into()))?;
    let last = &window[window.len() - 1];
    if z0.t - 4.0 < first.time - 1e-12 || z0.t > last.time + 1e-12 {
        return Err(Error::InvalidArgument {
            what: "window",
            detail: format!("Q₂ around t₀ = {} leaves the stored times [{}, {}]", z0.t, first.time, last.time),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (num, _) = cylinder_seminorm(window, z0, 1.0, alpha, pairs, false, &mut rng)?;
    let (xv, _) = cylinder_seminorm(window, z0, 2.0, alpha, pairs, true, &mut rng)?;
    let sup = window
        .iter()
        .filter(|f| f.time >= z0.t - 4.0 - 1e-12 && f.time <= z0.t + 1e-12)
        .map(|f| f.sup().abs().max(f.min_value().abs()))
        .fold(0.0, f64::max);
    let weight = bracket(z0.v).powf((alpha * (1.0 + gamma / 2.0)).max(0.0));
    let den = weight * (sup + xv);
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Largest ratio over the centres; passes when it stays within `bound`.
pub fn holder_t_from_xv_check(
    window: &[DistributionField<f64>],
    centers: &[PhasePoint<f64>],
    alpha: f64,
    gamma: f64,
    pairs: usize,
    seed: u64,
    bound: f64,
) -> CheckReport {
    let params = json!({"alpha": alpha, "gamma": gamma, "pairs": pairs, "bound": bound, "centers": centers.len()});
    let mut ratios = Vec::with_capacity(centers.len());
    for (i, z0) in centers.iter().enumerate() {
        match time_from_xv_ratio(window, z0, alpha, gamma, pairs, seed.wrapping_add(i as u64)) {
            Ok(r) => ratios.push(r),
            Err(e) => return CheckReport::failed("holder_t_from_xv", params, seed, e),
        }
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let rows: Vec<_> = centers
        .iter()
        .zip(&ratios)
        .map(|(z, r)| json!({"t0": z.t, "v0": z.v, "ratio": r}))
        .collect();
    CheckReport::new("holder_t_from_xv", params, seed).verdict(worst <= bound, bound - worst, json!({"max_ratio": worst, "centers": rows}))
}
