//! The characteristic cubic `tau^3 - T tau^2 + c2 tau - 1` of a unimodular
//! 3x3 matrix and its discriminant.

use num_complex::Complex64;

type C64 = Complex64;

/// Largest-modulus root of `tau^3 + a tau^2 + b tau + c` by Cardano,
/// polished with Newton.
fn dominant_root(a: C64, b: C64, c: C64) -> C64 {
    let poly = |t: C64| ((t + a) * t + b) * t + c;
    let dpoly = |t: C64| (3.0 * t + 2.0 * a) * t + b;

    // Depressed cubic t^3 + P t + Q with tau = t - a/3.
    let shift = a / 3.0;
    let pp = b - a * a / 3.0;
    let qq = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (qq * qq / 4.0 + pp * pp * pp / 27.0).sqrt();
    // Pick the sign that avoids cancellation in -Q/2 +- sqrt(...).
    let u3 = {
        let plus = -qq / 2.0 + disc;
        let minus = -qq / 2.0 - disc;
        if plus.norm() >= minus.norm() {
            plus
        } else {
            minus
        }
    };
    let mut best = -shift;
    let mut best_norm = -1.0;
    if u3.norm() == 0.0 {
        // Triple root of the depressed cubic.
        best = -shift;
    } else {
        let u0 = u3.powf(1.0 / 3.0);
        let omega = C64::new(-0.5, 0.75_f64.sqrt());
        let mut u = u0;
        for _ in 0..3 {
            let t = u - pp / (3.0 * u);
            let tau = t - shift;
            if tau.norm() > best_norm {
                best_norm = tau.norm();
                best = tau;
            }
            u *= omega;
        }
    }
    newton_polish(best, poly, dpoly)
}

fn newton_polish(mut t: C64, f: impl Fn(C64) -> C64, df: impl Fn(C64) -> C64) -> C64 {
    let mut r = f(t).norm();
    for _ in 0..8 {
        let d = df(t);
        if d.norm() == 0.0 {
            break;
        }
        let cand = t - f(t) / d;
        let rc = f(cand).norm();
        if !(rc < r) {
            break;
        }
        t = cand;
        r = rc;
    }
    t
}

/// Roots of `tau^2 - s tau + p` without cancellation.
fn quadratic_roots(s: C64, p: C64) -> [C64; 2] {
    let d = (s * s - 4.0 * p).sqrt();
    let big = if (s + d).norm() >= (s - d).norm() {
        (s + d) / 2.0
    } else {
        (s - d) / 2.0
    };
    if big.norm() == 0.0 {
        return [C64::new(0.0, 0.0); 2];
    }
    [p / big, big]
}

/// Multipliers and discriminant from the invariants of a unimodular matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoots {
    /// Ordered `[tau_1, tau_2, tau_3]` with `tau_3` of largest modulus.
    pub roots: [C64; 3],
    /// `prod_{i<j} (tau_i - tau_j)^2` assembled from the deflated factors.
    pub product_form: C64,
}

/// Roots of `tau^3 - trace tau^2 + c2 tau - 1`.
pub fn unimodular_cubic(trace: C64, c2: C64) -> CubicRoots {
    characteristic_cubic(trace, c2, C64::new(1.0, 0.0))
}

/// Roots of `tau^3 - trace tau^2 + c2 tau - det`.
///
/// The dominant root is found first; the other two come from the
/// deflated quadratic `tau^2 - s tau + det/tau_3` with
/// `s = (c2 - det/tau_3) / tau_3`, which stays accurate when `tau_3` is
/// exponentially large. Every root is then Newton-polished on the cubic.
pub fn characteristic_cubic(trace: C64, c2: C64, det: C64) -> CubicRoots {
    let poly = |t: C64| ((t - trace) * t + c2) * t - det;
    let dpoly = |t: C64| (3.0 * t - 2.0 * trace) * t + c2;
    let t3 = dominant_root(-trace, c2, -det);
    let prod = det / t3;
    let s = (c2 - prod) / t3;
    let [t1, t2] = quadratic_roots(s, prod);
    let inner = s * s - 4.0 * prod;
    let outer = t3 * t3 - s * t3 + prod;
    // Polishing a near-double pair independently can merge it; keep the
    // deflated values there.
    let close = (t1 - t2).norm() < 1e-6 * t1.norm().max(t2.norm()).max(1e-300);
    let (t1, t2) = if close {
        (t1, t2)
    } else {
        (newton_polish(t1, poly, dpoly), newton_polish(t2, poly, dpoly))
    };
    CubicRoots {
        roots: [t1, t2, t3],
        product_form: inner * outer * outer,
    }
}

/// `(tau_1 - tau_2)^2 (tau_1 - tau_3)^2 (tau_2 - tau_3)^2` from explicit roots.
pub fn discriminant_from_roots(r: [C64; 3]) -> C64 {
    let d = (r[0] - r[1]) * (r[0] - r[2]) * (r[1] - r[2]);
    d * d
}

/// Discriminant of `tau^3 - T tau^2 + c2 tau - 1` from its coefficients.
pub fn discriminant_from_invariants(trace: C64, c2: C64) -> C64 {
    cubic_discriminant(trace, c2, C64::new(1.0, 0.0))
}

/// Discriminant of `tau^3 - T tau^2 + c2 tau - det` from its coefficients.
pub fn cubic_discriminant(trace: C64, c2: C64, det: C64) -> C64 {
    let t = trace;
    t * t * c2 * c2 - 4.0 * c2 * c2 * c2 - 4.0 * t * t * t * det + 18.0 * t * c2 * det - 27.0 * det * det
}
