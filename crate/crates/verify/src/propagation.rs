//! Growth of `‖f(t)‖_{L^{∞,k}}` against `‖f_in‖ e^{CKt}`, and the time decay
//! of `⟨v⟩^{m+(γ+2)+} D²_v f`.

use landau_core::coefficients::CoefficientField;
use landau_core::diagnostics::{d2v_weighted_sup, psi, time_exponent, PsiChoice};
use landau_core::field::{DistributionField, NormScope};
use landau_core::grid::PhaseGrid;
use landau_core::numerics::log_log_fit;
use landau_core::scalar::bracket;
use landau_core::solver::{collision_step, CollisionForm, CollisionIntegrator, Positivity, SolverConfig};
use landau_core::Result;
use serde_json::json;

use crate::report::CheckReport;

/// What plays the role of `K` in `‖f(t)‖ ≤ ‖f_in‖ e^{CKt}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KSource {
    /// `sup_t max(|ā|/⟨v⟩^{(γ+2)+}, |c̄|)` measured from the coefficients.
    Coefficients,
    /// `sup_t ‖f(t)‖_{L^{∞,k₀}}`.
    LinftyK0(f64),
    /// `sup_t Ψ(t) + sup_t ‖f(t)‖_{L^∞_x L^p_v}` with the default `p`.
    PsiPlusLp,
}

impl KSource {
    pub fn label(&self) -> String {
        match self {
            KSource::Coefficients => "coefficients".into(),
            KSource::LinftyK0(k0) => format!("linfty_k0={k0}"),
            KSource::PsiPlusLp => "psi_plus_lp".into(),
        }
    }
}

/// `max(|ā|/⟨v⟩^{(γ+2)+}, |c̄|)` over the cells of the given slices.
pub fn coefficient_bound(coeffs: &[CoefficientField<f64>], gamma: f64) -> f64 {
    let w = (gamma + 2.0).max(0.0);
    let mut k: f64 = 0.0;
    for c in coeffs {
        for i in 0..c.len() {
            let m = c.matrix(i);
            let ev = landau_core::numerics::symmetric_eigenvalues([m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2]]);
            let an = ev[0].abs().max(ev[2].abs());
            k = k.max(an / bracket(c.grid.velocity(i)).powf(w)).max(c.c[i].abs());
        }
    }
    k
}

/// `K` for a trajectory; `coeffs[n]` are the slices of snapshot `n` (only
/// needed for [`KSource::Coefficients`]).
pub fn k_value(trajectory: &[DistributionField<f64>], coeffs: &[Vec<CoefficientField<f64>>], gamma: f64, source: KSource) -> Result<f64> {
    Ok(match source {
        KSource::Coefficients => coeffs.iter().map(|c| coefficient_bound(c, gamma)).fold(0.0, f64::max),
        KSource::LinftyK0(k0) => trajectory.iter().map(|f| f.weighted_sup_norm(k0)).fold(0.0, f64::max),
        KSource::PsiPlusLp => {
            let p = PsiChoice::defaults(gamma)?.p;
            let psi_max = psi(trajectory, gamma, p)?.into_iter().fold(0.0, f64::max);
            let mut lp: f64 = 0.0;
            for f in trajectory {
                lp = lp.max(f.weighted_lp_norm(p, 0.0, NormScope::PerSlice)?.sup());
            }
            psi_max + lp
        }
    })
}

/// Smallest `C ≥ 0` with `N(t) ≤ N(0) e^{CKt}` at every sample.
pub fn growth_constant(times: &[f64], norms: &[f64], k: f64) -> f64 {
    let (t0, n0) = match (times.first(), norms.first()) {
        (Some(t), Some(n)) => (*t, *n),
        _ => return 0.0,
    };
    if n0 <= 0.0 || k <= 0.0 {
        return if norms.iter().all(|n| *n <= n0) { 0.0 } else { f64::INFINITY };
    }
    times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t > t0)
        .map(|(t, n)| (n / n0).ln() / (k * (t - t0)))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationFit {
    pub source: KSource,
    pub k: f64,
    pub c: f64,
}

pub fn propagation_fits(
    trajectory: &[DistributionField<f64>],
    coeffs: &[Vec<CoefficientField<f64>>],
    k_weight: f64,
    gamma: f64,
    sources: &[KSource],
) -> Result<Vec<PropagationFit>> {
    let times: Vec<f64> = trajectory.iter().map(|f| f.time).collect();
    let norms: Vec<f64> = trajectory.iter().map(|f| f.weighted_sup_norm(k_weight)).collect();
    sources
        .iter()
        .map(|&s| {
            let k = k_value(trajectory, coeffs, gamma, s)?;
            Ok(PropagationFit {
                source: s,
                k,
                c: growth_constant(&times, &norms, k),
            })
        })
        .collect()
}

/// Fitted `C` for each `K` source on a run and its `dt/2` twin; passes when
/// every `C` is finite and the two runs agree to `rel_tol` (constants below
/// `floor` count as zero).
#[allow(clippy::too_many_arguments)]
pub fn linftyk_propagation_check(
    run: &[DistributionField<f64>],
    run_coeffs: &[Vec<CoefficientField<f64>>],
    halved: &[DistributionField<f64>],
    halved_coeffs: &[Vec<CoefficientField<f64>>],
    k_weight: f64,
    gamma: f64,
    sources: &[KSource],
    rel_tol: f64,
    floor: f64,
) -> CheckReport {
    let params = json!({"k": k_weight, "gamma": gamma, "rel_tol": rel_tol, "floor": floor,
        "sources": sources.iter().map(|s| s.label()).collect::<Vec<_>>()});
    let fits = propagation_fits(run, run_coeffs, k_weight, gamma, sources)
        .and_then(|a| Ok((a, propagation_fits(halved, halved_coeffs, k_weight, gamma, sources)?)));
    let (a, b) = match fits {
        Ok(x) => x,
        Err(e) => return CheckReport::failed("linftyk_propagation", params, 0, e),
    };
    let mut margin = f64::INFINITY;
    let mut rows = Vec::new();
    for (fa, fb) in a.iter().zip(&b) {
        let scale = fa.c.max(fb.c);
        let drift = if scale <= floor { 0.0 } else { (fa.c - fb.c).abs() / scale };
        margin = margin.min(rel_tol - drift);
        if !(fa.c.is_finite() && fb.c.is_finite()) {
            margin = f64::NEG_INFINITY;
        }
        rows.push(json!({"source": fa.source.label(), "K": fa.k, "C_dt": fa.c, "C_dt_half": fb.c, "relative_change": drift}));
    }
    CheckReport::new("linftyk_propagation", params, 0).verdict(margin >= 0.0, margin, json!(rows))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub sups: Vec<f64>,
    pub slope: f64,
}

/// Log-log slope of `sup ⟨v⟩^w |D²_v f|` against `t − t₀` over snapshots
/// after the first `skip`.
pub fn d2v_decay_fit(trajectory: &[DistributionField<f64>], weight: f64, skip: usize) -> DecayFit {
    let t0 = trajectory.first().map_or(0.0, |f| f.time);
    let (times, sups): (Vec<f64>, Vec<f64>) = trajectory
        .iter()
        .skip(skip)
        .map(|f| (f.time - t0, d2v_weighted_sup(f, weight)))
        .unzip();
    let slope = log_log_fit(&times, &sups).map_or(0.0, |fit| fit.slope);
    DecayFit { times, sups, slope }
}

/// Slope of the weighted `D²_v` sup must not fall below `−1 + α²/(6−α) − 0.2`.
pub fn d2v_decay_check(trajectory: &[DistributionField<f64>], alpha: f64, m: f64, gamma: f64, skip: usize) -> CheckReport {
    let weight = m + (gamma + 2.0).max(0.0);
    let threshold = -1.0 + time_exponent(&alpha) - 0.2;
    let fit = d2v_decay_fit(trajectory, weight, skip);
    let params = json!({"alpha": alpha, "m": m, "gamma": gamma, "weight": weight, "skip": skip});
    CheckReport::new("d2v_decay", params, 0).verdict(
        fit.slope >= threshold,
        fit.slope - threshold,
        json!({"slope": fit.slope, "threshold": threshold, "samples": fit.times.len()}),
    )
}

/// Pure diffusion `∂_t f = Δ_v f` (coefficients `ā = I`, `b̄ = 0`, `c̄ = 0`)
/// from the heat kernel at time `tau0`, advanced with the divergence-form
/// explicit step. Returns the snapshots (initial one included). Use an odd
/// `n_v` so that `v = 0`, where `|D²f|` peaks, is a cell centre.
pub fn heat_surrogate_run(n_v: usize, l_v: f64, tau0: f64, dt: f64, steps: usize) -> Result<Vec<DistributionField<f64>>> {
    let grid = PhaseGrid::homogeneous(n_v, l_v)?;
    let f0 = DistributionField::from_fn(grid, |_, v| heat_kernel(tau0, v))?;
    let mut coeffs = CoefficientField::zeros(grid.v);
    coeffs.a.iter_mut().for_each(|a| *a = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    let coeffs = vec![coeffs];
    let mut cfg = SolverConfig::new(-1.0, dt * steps as f64);
    cfg.collision_form = CollisionForm::Divergence;
    cfg.integrator = CollisionIntegrator::ExplicitEuler;
    cfg.positivity = Positivity::Off;
    let mut out = vec![f0];
    for _ in 0..steps {
        let (next, _) = collision_step(out.last().expect("nonempty"), &coeffs, dt, &cfg)?;
        out.push(next);
    }
    Ok(out)
}

pub fn heat_kernel(tau: f64, v: [f64; 3]) -> f64 {
    let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    (4.0 * std::f64::consts::PI * tau).powf(-1.5) * (-r2 / (4.0 * tau)).exp()
}

/// `sup |D²_v|` (entry max-norm) of the heat kernel, attained at `v = 0`.
pub fn heat_kernel_d2_sup(tau: f64) -> f64 {
    (4.0 * std::f64::consts::PI * tau).powf(-1.5) / (2.0 * tau)
}

/// Measured decay slope of the surrogate against the closed-form slope over
/// the same sample times; passes within `tol`.
pub fn heat_surrogate_check(n_v: usize, l_v: f64, tau0: f64, dt: f64, steps: usize, tol: f64) -> CheckReport {
    let params = json!({"n_v": n_v, "l_v": l_v, "tau0": tau0, "dt": dt, "steps": steps, "tol": tol});
    let run = match heat_surrogate_run(n_v, l_v, tau0, dt, steps) {
        Ok(r) => r,
        Err(e) => return CheckReport::failed("d2v_heat_surrogate", params, 0, e),
    };
    let fit = d2v_decay_fit(&run, 0.0, 3);
    let exact: Vec<f64> = fit.times.iter().map(|t| heat_kernel_d2_sup(tau0 + t)).collect();
    let exact_slope = log_log_fit(&fit.times, &exact).map_or(f64::NAN, |f| f.slope);
    let gap = (fit.slope - exact_slope).abs();
    CheckReport::new("d2v_heat_surrogate", params, 0).verdict(
        gap <= tol,
        tol - gap,
        json!({"measured_slope": fit.slope, "closed_form_slope": exact_slope}),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use landau_core::coefficients::{CoefficientEngine, CollisionKernel};
    use landau_core::field::make_maxwellian;
    use landau_core::grid::VelocityGrid;

    #[test]
    fn growth_constant_of_exact_exponential() {
        let times: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let norms: Vec<f64> = times.iter().map(|t| 2.0 * (0.6 * t).exp()).collect();
        assert!((growth_constant(&times, &norms, 3.0) - 0.2).abs() < 1e-12);
        let flat = vec![1.0; 6];
        assert_eq!(growth_constant(&times, &flat, 3.0), 0.0);
        assert_eq!(growth_constant(&times, &[0.0; 6], 0.0), 0.0);
    }

    #[test]
    fn stationary_maxwellian_needs_no_growth() {
        let f = make_maxwellian(PhaseGrid::homogeneous(10, 4.0).unwrap(), 1.0, 1.0).unwrap();
        let traj: Vec<_> = (0..4).map(|i| f.clone().with_time(0.1 * i as f64)).collect();
        let c = CoefficientEngine::new()
            .compute_all(&f, &CollisionKernel::new(-1.0).unwrap())
            .unwrap();
        let coeffs = vec![c; 4];
        let fits = propagation_fits(
            &traj,
            &coeffs,
            6.0,
            -1.0,
            &[KSource::Coefficients, KSource::LinftyK0(6.0), KSource::PsiPlusLp],
        )
        .unwrap();
        for fit in &fits {
            assert!(fit.k > 0.0 && fit.c == 0.0, "{fit:?}");
        }
        let r = linftyk_propagation_check(&traj, &coeffs, &traj, &coeffs, 6.0, -1.0, &[KSource::Coefficients], 0.2, 1e-8);
        assert!(r.pass);
    }

    #[test]
    fn coefficient_bound_reads_c_at_coulomb_scale() {
        let g = VelocityGrid::new(4, 2.0).unwrap();
        let mut c = CoefficientField::zeros(g);
        c.c[3] = -5.0;
        c.a[0] = [2.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let br = bracket(g.velocity(0));
        assert!((coefficient_bound(&[c.clone()], -3.0) - 5.0).abs() < 1e-12);
        c.a[0] = [20.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        assert!((coefficient_bound(&[c], -1.0) - 20.0 / br).abs() < 1e-12);
    }

    #[test]
    fn stationary_d2v_slope_is_zero() {
        let f = make_maxwellian(PhaseGrid::homogeneous(10, 4.0).unwrap(), 1.0, 1.0).unwrap();
        let traj: Vec<_> = (0..8).map(|i| f.clone().with_time(0.1 * i as f64)).collect();
        let r = d2v_decay_check(&traj, 0.5, 0.0, -1.0, 3);
        assert!(r.pass);
        assert!(r.witness["slope"].as_f64().unwrap().abs() < 1e-12);
    }

    #[test]
    fn heat_surrogate_follows_the_gaussian_rate() {
        let r = heat_surrogate_check(31, 6.0, 0.5, 0.005, 200, 0.1);
        assert!(r.pass, "{}", r.witness);
        let measured = r.witness["measured_slope"].as_f64().unwrap();
        assert!(measured < -0.5);
    }
}
