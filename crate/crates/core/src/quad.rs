//! Adaptive Gauss–Legendre quadrature.

use std::sync::OnceLock;

const ORDER: usize = 20;
const MAX_DEPTH: u32 = 40;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        let n = ORDER as f64;
        for i in 0..ORDER.div_ceil(2) {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let mut p0 = 1.0;
                let mut p1 = 0.0;
                for j in 0..ORDER {
                    let p2 = p1;
                    p1 = p0;
                    let jf = j as f64;
                    p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
                }
                dp = n * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[ORDER - 1 - i] = z;
            weights[i] = w;
            weights[ORDER - 1 - i] = w;
        }
        Rule { nodes, weights }
    })
}

fn fixed<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let r = rule();
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    r.nodes
        .iter()
        .zip(r.weights.iter())
        .map(|(&z, &w)| w * f(mid + half * z))
        .sum::<f64>()
        * half
}

fn recurse<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (lo + hi);
    let left = fixed(f, lo, mid);
    let right = fixed(f, mid, hi);
    let refined = left + right;
    if depth >= MAX_DEPTH || (refined - whole).abs() <= tol {
        return refined;
    }
    recurse(f, lo, mid, left, 0.5 * tol, depth + 1)
        + recurse(f, mid, hi, right, 0.5 * tol, depth + 1)
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let whole = fixed(&f, lo, hi);
    recurse(&f, lo, hi, whole, tol, 0)
}
