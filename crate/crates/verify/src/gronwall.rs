//! The threshold lemma: a continuous increasing `H` with `H(t) ≤ A e^{BtH(t)}`
//! satisfies `H(t) ≤ eA` for `t ≤ 1/(eAB)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::report::CheckReport;

const MAX_ITERATIONS: usize = 400_000;

/// Smallest root of `H = A e^{BtH}`, by fixed-point iteration from `H = A`.
/// Iterates increase monotonically, so every iterate satisfies the
/// hypothesis `H ≤ A e^{BtH}`; for `t > 1/(eAB)` there is no root and the
/// iteration diverges (returns `None`).
pub fn equality_branch(a: f64, b: f64, t: f64) -> Option<f64> {
    let mut h = a;
    for _ in 0..MAX_ITERATIONS {
        let next = a * (b * t * h).exp();
        if !next.is_finite() || next > 1e6 * a * std::f64::consts::E {
            return None;
        }
        if next - h <= 1e-16 * next {
            return Some(next);
        }
        h = next;
    }
    Some(h)
}

/// `n` equally spaced samples of the equality branch on `[0, 1/(eAB)]`.
pub fn equality_branch_samples(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let t_star = threshold_time(a, b);
    (0..n.max(2))
        .map(|i| {
            let t = t_star * i as f64 / (n.max(2) - 1) as f64;
            (t, equality_branch(a, b, t).expect("root exists below the threshold"))
        })
        .collect()
}

pub fn threshold_time(a: f64, b: f64) -> f64 {
    1.0 / (std::f64::consts::E * a * b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GronwallOutcome {
    /// Largest `H − A e^{BtH}` over the samples (≤ tol when the hypothesis holds).
    pub hypothesis_excess: f64,
    pub hypothesis_ok: bool,
    pub monotone: bool,
    /// Largest `H − eA` over samples with `t ≤ min(T, 1/(eAB))`.
    pub conclusion_excess: f64,
    pub conclusion_ok: bool,
    pub witness_t: f64,
}

/// Checks the hypothesis first, then the conclusion, on sampled `(t, H(t))`.
pub fn gronwall_threshold(a: f64, b: f64, samples: &[(f64, f64)], tol: f64) -> GronwallOutcome {
    let mut hyp = f64::NEG_INFINITY;
    let mut monotone = true;
    for (i, &(t, h)) in samples.iter().enumerate() {
        hyp = hyp.max(h - a * (b * t * h).exp());
        if i > 0 && h < samples[i - 1].1 {
            monotone = false;
        }
    }
    let t_end = samples.last().map_or(0.0, |s| s.0);
    let horizon = t_end.min(threshold_time(a, b));
    let ea = std::f64::consts::E * a;
    let mut concl = f64::NEG_INFINITY;
    let mut witness_t = f64::NAN;
    for &(t, h) in samples.iter().filter(|s| s.0 <= horizon) {
        if h - ea > concl {
            concl = h - ea;
            witness_t = t;
        }
    }
    GronwallOutcome {
        hypothesis_excess: hyp,
        hypothesis_ok: hyp <= tol,
        monotone,
        conclusion_excess: concl,
        conclusion_ok: concl <= tol,
        witness_t,
    }
}

/// Random `(A, B) ∈ [0.1, 10]²` with `H` from the equality branch.
pub fn gronwall_sweep(draws: usize, samples_per_draw: usize, seed: u64, tol: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    let mut hypothesis_failures = 0;
    let mut conclusion_failures = 0;
    for _ in 0..draws {
        let a = rng.gen_range(0.1..=10.0);
        let b = rng.gen_range(0.1..=10.0);
        let out = gronwall_threshold(a, b, &equality_branch_samples(a, b, samples_per_draw), tol);
        if !out.hypothesis_ok || !out.monotone {
            hypothesis_failures += 1;
        }
        if !out.conclusion_ok {
            conclusion_failures += 1;
        }
        let rel = out.conclusion_excess / a;
        if rel > worst.0 {
            worst = (rel, a, b, out.witness_t);
        }
    }
    let params = json!({"draws": draws, "samples_per_draw": samples_per_draw, "range": [0.1, 10.0], "tol": tol});
    CheckReport::new("gronwall_threshold", params, seed).verdict(
        hypothesis_failures == 0 && conclusion_failures == 0,
        -worst.0,
        json!({
            "hypothesis_failures": hypothesis_failures,
            "conclusion_failures": conclusion_failures,
            "worst_relative_excess": worst.0,
            "A": worst.1, "B": worst.2, "t": worst.3,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Principal branch of Lambert W on `[−1/e, 0]` by Halley iteration.
    fn lambert_w0(x: f64) -> f64 {
        let mut w: f64 = if x < -0.3 {
            -1.0 + (2.0 * (1.0 + std::f64::consts::E * x)).max(0.0).sqrt()
        } else {
            x
        };
        for _ in 0..100 {
            let ew = w.exp();
            let f = w * ew - x;
            if f == 0.0 || (w + 1.0).abs() < 1e-15 {
                break;
            }
            let step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
            w -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        w
    }

    #[test]
    fn branch_matches_lambert_w() {
        for &(a, b) in &[(1.0, 1.0), (0.3, 7.0), (9.0, 0.2)] {
            let ts = threshold_time(a, b);
            for frac in [0.0, 0.1, 0.5, 0.9] {
                let t = frac * ts;
                let h = equality_branch(a, b, t).unwrap();
                let exact = if t == 0.0 { a } else { -lambert_w0(-a * b * t) / (b * t) };
                assert!((h - exact).abs() < 1e-10 * exact, "{a} {b} {t}: {h} vs {exact}");
            }
        }
    }

    #[test]
    fn unit_case_reaches_e_at_the_threshold() {
        let h = equality_branch(1.0, 1.0, 1.0 / std::f64::consts::E).unwrap();
        assert!(h <= std::f64::consts::E + 1e-9);
        assert!(h > std::f64::consts::E - 1e-2);
        assert!(h <= (h / std::f64::consts::E).exp() + 1e-12);
    }

    #[test]
    fn branch_diverges_past_the_threshold() {
        assert!(equality_branch(1.0, 1.0, 1.01 / std::f64::consts::E).is_none());
    }

    #[test]
    fn constant_h_passes() {
        let s: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.01, 2.0)).collect();
        let out = gronwall_threshold(2.0, 1.0, &s, 0.0);
        assert!(out.hypothesis_ok && out.conclusion_ok && out.monotone);
    }

    #[test]
    fn hypothesis_violation_is_reported_separately() {
        let s = [(0.0, 1.0), (0.1, 10.0)];
        let out = gronwall_threshold(1.0, 1.0, &s, 0.0);
        assert!(!out.hypothesis_ok);
        assert!(!out.conclusion_ok);
        let decreasing = [(0.0, 1.0), (0.1, 0.5)];
        assert!(!gronwall_threshold(1.0, 1.0, &decreasing, 0.0).monotone);
    }

    #[test]
    fn sweep_is_deterministic_and_passes() {
        let a = gronwall_sweep(20, 17, 3, 1e-9);
        let b = gronwall_sweep(20, 17, 3, 1e-9);
        assert!(a.pass, "{}", a.witness);
        assert_eq!(a.witness, b.witness);
    }
}
