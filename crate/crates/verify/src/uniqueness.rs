//! Contraction functional `W = ½⟨v⟩^{10} w²`, `w = e^{−∫₀ᵗ r}(g − f)`, with
//! `r(t) = C(2 + t^{s−1})`, `s = α²/(6−α)`, evaluated between two computed
//! trajectories.

use landau_core::diagnostics::time_exponent;
use landau_core::field::DistributionField;
use landau_core::scalar::bracket;
use landau_core::{Error, Result};
use serde_json::json;

use crate::report::CheckReport;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonWeight {
    pub c: f64,
    pub alpha: f64,
}

impl ComparisonWeight {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || c < 0.0 {
            return Err(Error::InvalidArgument {
                what: "comparison weight",
                detail: format!("need C ≥ 0 and α ∈ (0, 1), got C = {c}, α = {alpha}"),
            });
        }
        Ok(Self { c, alpha })
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.c * (2.0 + t.powf(time_exponent(&self.alpha) - 1.0))
    }

    /// `∫₀ᵗ r = C(2t + t^s/s)`, finite because `s > 0`.
    pub fn accumulated(&self, t: f64) -> f64 {
        let s = time_exponent(&self.alpha);
        self.c * (2.0 * t + t.powf(s) / s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionSeries {
    /// Times measured from the first snapshot.
    pub times: Vec<f64>,
    pub sup_w: Vec<f64>,
}

impl ContractionSeries {
    pub fn max(&self) -> f64 {
        self.sup_w.iter().copied().fold(0.0, f64::max)
    }

    /// Largest one-step increase of `sup W`.
    pub fn max_increase(&self) -> f64 {
        self.sup_w.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// `sup_{x,v} W(t)` at every shared snapshot time.
pub fn contraction_series(
    a: &[DistributionField<f64>],
    b: &[DistributionField<f64>],
    weight: &ComparisonWeight,
) -> Result<ContractionSeries> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::GridMismatch(format!(
            "trajectories have {} and {} snapshots",
            a.len(),
            b.len()
        )));
    }
    let t0 = a[0].time;
    let mut times = Vec::with_capacity(a.len());
    let mut sup_w = Vec::with_capacity(a.len());
    for (fa, fb) in a.iter().zip(b) {
        if fa.grid != fb.grid {
            return Err(Error::GridMismatch("trajectories use different grids".into()));
        }
        if (fa.time - fb.time).abs() > 1e-9 * (1.0 + fa.time.abs()) {
            return Err(Error::GridMismatch(format!("diagnostic times differ: {} vs {}", fa.time, fb.time)));
        }
        let t = fa.time - t0;
        let damp = (-2.0 * weight.accumulated(t)).exp();
        let g = &fa.grid;
        let w10: Vec<f64> = (0..g.v.len()).map(|i| bracket(g.v.velocity(i)).powi(10)).collect();
        let mut s: f64 = 0.0;
        for (k, (x, y)) in fa.values.iter().zip(&fb.values).enumerate() {
            let d = x - y;
            s = s.max(0.5 * w10[k % w10.len()] * damp * d * d);
        }
        times.push(t);
        sup_w.push(s);
    }
    Ok(ContractionSeries { times, sup_w })
}

/// Passes when `sup W` never increases by more than `tol` between
/// diagnostic times.
pub fn uniqueness_contraction_check(
    a: &[DistributionField<f64>],
    b: &[DistributionField<f64>],
    alpha: f64,
    c_weight: f64,
    tol: f64,
) -> CheckReport {
    let params = json!({"alpha": alpha, "C": c_weight, "tol": tol});
    let series = ComparisonWeight::new(c_weight, alpha).and_then(|w| contraction_series(a, b, &w));
    let series = match series {
        Ok(s) => s,
        Err(e) => return CheckReport::failed("uniqueness_contraction", params, 0, e),
    };
    let inc = series.max_increase();
    CheckReport::new("uniqueness_contraction", params, 0).verdict(
        inc <= tol,
        tol - inc,
        json!({"sup_w_max": series.max(), "max_increase": inc, "times": series.times, "sup_w": series.sup_w}),
    )
}

/// Richardson-style comparison of runs at `dt`, `dt/2` and `dt/4` sharing
/// their diagnostic times. The constant `K` of `sup W ≤ K dt` is fitted on
/// the (dt, dt/2) pair; the check passes when the (dt/2, dt/4) pair obeys
/// the same bound at its own `dt` and a run compared with itself gives
/// `W ≡ 0` exactly.
pub fn refinement_contraction_check(runs: [&[DistributionField<f64>]; 3], dt: f64, alpha: f64, c_weight: f64) -> CheckReport {
    let params = json!({"dt": dt, "alpha": alpha, "C": c_weight});
    let result = (|| -> Result<(ContractionSeries, ContractionSeries, ContractionSeries)> {
        let w = ComparisonWeight::new(c_weight, alpha)?;
        Ok((
            contraction_series(runs[0], runs[1], &w)?,
            contraction_series(runs[1], runs[2], &w)?,
            contraction_series(runs[0], runs[0], &w)?,
        ))
    })();
    let (coarse, fine, own) = match result {
        Ok(s) => s,
        Err(e) => return CheckReport::failed("uniqueness_refinement", params, 0, e),
    };
    let k = coarse.max() / dt;
    let bound = k * dt / 2.0;
    let self_zero = own.sup_w.iter().all(|w| *w == 0.0);
    let pass = self_zero && fine.max() <= bound && k.is_finite();
    let margin = if bound > 0.0 { 1.0 - fine.max() / bound } else { -fine.max() };
    CheckReport::new("uniqueness_refinement", params, 0).verdict(
        pass,
        margin,
        json!({
            "K": k,
            "sup_w_dt": coarse.max(),
            "sup_w_dt_half": fine.max(),
            "bound_dt_half": bound,
            "observed_ratio": if coarse.max() > 0.0 { fine.max() / coarse.max() } else { 0.0 },
            "self_comparison_zero": self_zero,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use landau_core::field::make_maxwellian;
    use landau_core::grid::PhaseGrid;

    fn traj(scale: f64) -> Vec<DistributionField<f64>> {
        let g = PhaseGrid::homogeneous(6, 3.0).unwrap();
        let m = make_maxwellian(g, 1.0, 1.0).unwrap();
        (0..4)
            .map(|i| {
                let mut f = m.clone().with_time(0.1 * i as f64);
                f.values.iter_mut().for_each(|v| *v *= 1.0 + scale * i as f64);
                f
            })
            .collect()
    }

    #[test]
    fn accumulated_weight_integrates_the_rate() {
        let w = ComparisonWeight::new(0.7, 0.5).unwrap();
        // t = u^{1/s} turns t^{s−1} dt into a smooth integrand.
        let (t, s): (f64, f64) = (0.3, time_exponent(&0.5));
        let q = 1.0 / s;
        let n = 20000;
        let u_end = t.powf(1.0 / q);
        let mut acc = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64 * u_end;
            let tt = u.powf(q);
            acc += w.rate(tt) * q * u.powf(q - 1.0) * u_end / n as f64;
        }
        assert!(
            (acc - w.accumulated(t)).abs() < 1e-6 * w.accumulated(t),
            "{acc} vs {}",
            w.accumulated(t)
        );
    }

    #[test]
    fn identical_runs_give_zero() {
        let a = traj(0.01);
        let s = contraction_series(&a, &a, &ComparisonWeight::new(1.0, 0.5).unwrap()).unwrap();
        assert!(s.sup_w.iter().all(|w| *w == 0.0));
        assert!(uniqueness_contraction_check(&a, &a, 0.5, 1.0, 0.0).pass);
    }

    #[test]
    fn growing_gap_is_flagged() {
        let (a, b) = (traj(0.0), traj(0.1));
        let r = uniqueness_contraction_check(&a, &b, 0.5, 0.0, 1e-12);
        assert!(!r.pass);
        assert!(r.witness["max_increase"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let a = traj(0.0);
        let w = ComparisonWeight::new(1.0, 0.5).unwrap();
        assert!(contraction_series(&a, &a[..2], &w).is_err());
        let mut b = a.clone();
        b[1].time += 0.01;
        assert!(contraction_series(&a, &b, &w).is_err());
        assert!(ComparisonWeight::new(1.0, 1.5).is_err());
    }

    #[test]
    fn first_order_gaps_satisfy_the_refinement_bound() {
        // Gap proportional to dt, so W scales like dt².
        let (r0, r1, r2) = (traj(0.0), traj(0.02), traj(0.03));
        assert!(refinement_contraction_check([&r0, &r1, &r2], 0.1, 0.5, 1.0).pass);
    }
}
