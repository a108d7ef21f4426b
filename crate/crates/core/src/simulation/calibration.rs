//! Quadrature over the Gaussian design, used to calibrate unprinted constants
//! and to compute population minimizers.
//!
//! Every generator has `x ~ N(0, s² I)` and `η` depending on `x` only through
//! `x₁` and `w = β₂x₂ + … + β_q x_q`, so expectations reduce to two dimensions.

use nalgebra::{DMatrix, DVector};

use crate::loss::{norm_cdf, Family};
use crate::simulation::scenario::{Generator, Response};

/// Trapezoid nodes and weights for `E f(Z)`, `Z ~ N(0, 1)`.
///
/// The trapezoid rule converges geometrically for analytic integrands with
/// Gaussian decay, so a uniform grid is enough here.
fn normal_grid() -> (Vec<f64>, Vec<f64>) {
    const H: f64 = 0.05;
    const L: f64 = 10.0;
    let m = (2.0 * L / H).round() as usize;
    let c = H / (2.0 * std::f64::consts::PI).sqrt();
    (0..=m)
        .map(|k| {
            let z = -L + k as f64 * H;
            (z, c * (-0.5 * z * z).exp())
        })
        .unzip()
}

/// `E f(x₁, w)` under the generator's design.
pub fn expect2(g: &Generator, f: impl Fn(f64, f64) -> f64) -> f64 {
    let (z, wt) = normal_grid();
    let s_w = g.x_sd * g.beta[1..].iter().map(|b| b * b).sum::<f64>().sqrt();
    let mut total = 0.0;
    for (za, wa) in z.iter().zip(&wt) {
        let x1 = g.x_sd * za;
        if s_w == 0.0 {
            total += wa * f(x1, 0.0);
            continue;
        }
        let mut inner = 0.0;
        for (zb, wb) in z.iter().zip(&wt) {
            inner += wb * f(x1, s_w * zb);
        }
        total += wa * inner;
    }
    total
}

fn eta(g: &Generator, x1: f64, w: f64) -> f64 {
    g.alpha + g.beta[0] * x1 + w + g.quad * x1 * x1
}

/// `P(Y = 1)` for a Bernoulli generator.
pub fn case_rate(g: &Generator) -> f64 {
    expect2(g, |x1, w| crate::loss::sigmoid(eta(g, x1, w)))
}

/// `P(Y ≤ 1)` for a Poisson generator.
pub fn prob_at_most_one(g: &Generator) -> f64 {
    expect2(g, |x1, w| {
        let mu = eta(g, x1, w).exp();
        (-mu).exp() * (1.0 + mu)
    })
}

/// `P(|Y| < h)` for a Gaussian generator.
pub fn prob_within(g: &Generator, h: f64) -> f64 {
    let Response::Gaussian { noise_sd } = g.response else {
        panic!("prob_within needs a Gaussian generator");
    };
    expect2(g, |x1, w| {
        let m = eta(g, x1, w);
        norm_cdf((h - m) / noise_sd) - norm_cdf((-h - m) / noise_sd)
    })
}

/// Root of a monotone `f` on `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    let rising = fhi > flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if (fm > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Intercept giving the requested marginal quantity.
pub fn calibrate_alpha(g: &Generator, target: f64, metric: impl Fn(&Generator) -> f64) -> Option<f64> {
    let mut work = g.clone();
    bisect(
        |a| {
            work.alpha = a;
            metric(&work) - target
        },
        -40.0,
        20.0,
        1e-13,
    )
}

/// Common slope magnitude `b` (every nonzero `βⱼ` replaced by `b·sign(βⱼ)`)
/// giving the requested marginal quantity.
pub fn calibrate_slope(g: &Generator, target: f64, metric: impl Fn(&Generator) -> f64) -> Option<f64> {
    let mut work = g.clone();
    let signs: Vec<f64> = g.beta.iter().map(|b| if *b == 0.0 { 0.0 } else { b.signum() }).collect();
    bisect(
        |b| {
            work.beta = signs.iter().map(|s| s * b).collect();
            metric(&work) - target
        },
        0.0,
        50.0,
        1e-13,
    )
}

/// Population minimizer of the linear working model of `family` by quadrature.
///
/// The minimizer has coefficients `(α*, a*, b*·β₂, …, b*·β_q)`: the part of
/// `(x₂, …, x_q)` orthogonal to `w` is independent of `(x₁, w)` and has zero
/// mean, so it gets no weight. Only canonical-link families are supported.
pub fn population_target(g: &Generator, family: Family) -> Vec<f64> {
    assert!(
        matches!(family, Family::Logistic | Family::PoissonLog | Family::GaussianLinear),
        "population_target needs a canonical-link family"
    );
    let has_w = g.beta[1..].iter().any(|b| *b != 0.0);
    let k = if has_w { 3 } else { 2 };
    let mean_true = |x1: f64, w: f64| g.mean_of(eta(g, x1, w));
    let mean_fit = |t: f64| family.mean_at(t);
    let slope_fit = |t: f64| match family {
        Family::Logistic => {
            let p = crate::loss::sigmoid(t);
            p * (1.0 - p)
        }
        Family::PoissonLog => t.exp(),
        _ => 1.0,
    };

    let cumulant = |t: f64| match family {
        Family::Logistic => crate::loss::log1p_exp(t),
        Family::PoissonLog => t.exp(),
        _ => 0.5 * t * t,
    };
    let risk = |r: &[f64]| {
        expect2(g, |x1, w| {
            let t = r[0] + r[1] * x1 + if has_w { r[2] * w } else { 0.0 };
            cumulant(t) - mean_true(x1, w) * t
        })
    };

    // Start from the generating coefficients, which is exact under correct specification.
    let mut r = vec![g.alpha, g.beta[0], 1.0];
    r.truncate(k);
    for _ in 0..100 {
        let u = |x1: f64, w: f64| [1.0, x1, w];
        let t = |x1: f64, w: f64| r[0] + r[1] * x1 + if has_w { r[2] * w } else { 0.0 };
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for a in 0..k {
            grad[a] = expect2(g, |x1, w| (mean_true(x1, w) - mean_fit(t(x1, w))) * u(x1, w)[a]);
            for b in a..k {
                let v = expect2(g, |x1, w| slope_fit(t(x1, w)) * u(x1, w)[a] * u(x1, w)[b]);
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        let step = hess.lu().solve(&grad).expect("population curvature is nonsingular");
        // Halve until the population risk does not increase; far from the
        // optimum a full logistic step can overshoot into flat regions.
        let before = risk(&r);
        let mut scale = 1.0;
        let mut trial = r.clone();
        for _ in 0..60 {
            trial.iter_mut().zip(&r).enumerate().for_each(|(a, (t, ra))| *t = ra + scale * step[a]);
            if risk(&trial) <= before {
                break;
            }
            scale *= 0.5;
        }
        r = trial;
        if step.amax() * scale < 1e-13 {
            break;
        }
    }
    let mut theta = vec![r[0], r[1]];
    theta.extend(g.beta[1..].iter().map(|b| if has_w { r[2] * b } else { 0.0 }));
    theta
}
