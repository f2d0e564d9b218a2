//! Numerical integration rules used across the crate.
//!
//! * Gauss–Legendre and Gauss–Hermite rules generated by Newton iteration
//!   on the three-term recurrences.
//! * Tanh–sinh (double exponential) quadrature for finite intervals with
//!   algebraic endpoint singularities. The integrand receives the distance
//!   to *both* endpoints so that kernels singular at an endpoint can be
//!   evaluated without cancellation.
//! * Globally adaptive 7/15-point Gauss–Kronrod for smooth or oscillatory
//!   integrands on finite intervals.

use std::f64::consts::PI;

/// Nodes and weights of a quadrature rule on a fixed reference domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule on `[-1, 1]` with `n` nodes, ascending.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-15 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for `∫ f(x) exp(-x²) dx` over the real line with `n`
/// nodes, in descending order.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z: f64 = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        if n == 1 {
            z = 0.0;
        }
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Rule { nodes, weights }
}

/// Applies a Gauss–Legendre rule on `panels` equal sub-intervals of `[a, b]`.
pub fn gauss_legendre_panels<F: FnMut(f64) -> f64>(
    rule: &Rule,
    a: f64,
    b: f64,
    panels: usize,
    mut f: F,
) -> f64 {
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let half = 0.5 * width;
        let mid = lo + half;
        let mut s = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Settings for [`tanh_sinh`].
#[derive(Debug, Clone, Copy)]
pub struct TanhSinh {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_level: u32,
    pub max_level: u32,
    pub t_max: f64,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-300,
            min_level: 3,
            max_level: 9,
            t_max: 6.1,
        }
    }
}

/// Integrates `f` over `[a, b]` by tanh–sinh quadrature.
///
/// `f(u, v)` is called with `u = x - a` and `v = b - x`, both computed
/// without cancellation, so an integrand singular at either endpoint can
/// use the exact offset.
pub fn tanh_sinh<F: FnMut(f64, f64) -> f64>(a: f64, b: f64, cfg: TanhSinh, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let hw = 0.5 * (b - a);
    let mut eval = |t: f64| -> f64 {
        let s = 0.5 * PI * t.sinh();
        let e_pos = (-2.0 * s).exp();
        let e_neg = (2.0 * s).exp();
        let u = 2.0 * hw / (1.0 + e_pos);
        let v = 2.0 * hw / (1.0 + e_neg);
        if u <= 0.0 || v <= 0.0 || !u.is_finite() || !v.is_finite() {
            return 0.0;
        }
        let em = (-2.0 * s.abs()).exp();
        let sech2 = 4.0 * em / ((1.0 + em) * (1.0 + em));
        let w = hw * 0.5 * PI * t.cosh() * sech2;
        if w == 0.0 {
            return 0.0;
        }
        let val = f(u, v);
        if val.is_finite() {
            w * val
        } else {
            0.0
        }
    };

    let mut h = 1.0;
    let n0 = (cfg.t_max / h).floor() as i64;
    let mut sum = eval(0.0);
    for k in 1..=n0 {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
    }
    let mut estimate = sum * h;
    for level in 1..=cfg.max_level {
        h *= 0.5;
        let kmax = (cfg.t_max / h).floor() as i64;
        let mut add = 0.0;
        let mut k = 1;
        while k <= kmax {
            let t = k as f64 * h;
            add += eval(t) + eval(-t);
            k += 2;
        }
        sum += add;
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= cfg.min_level && diff <= cfg.rel_tol * estimate.abs() + cfg.abs_tol {
            break;
        }
    }
    estimate
}

// 7-point Gauss / 15-point Kronrod abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for j in 0..7 {
        let dx = hl * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * hl, ((resk - resg) * hl).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
    mut f: F,
) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (v, e) = kronrod15(&mut f, a, b);
    let mut segs = vec![(a, b, v, e)];
    let mut value = v;
    let mut error = e;
    while error > abs_tol.max(rel_tol * value.abs()) {
        if segs.len() >= max_segments {
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, sv, se) = segs.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval cannot be split further in floating point
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let (v1, e1) = kronrod15(&mut f, lo, mid);
        let (v2, e2) = kronrod15(&mut f, mid, hi);
        value += v1 + v2 - sv;
        error += e1 + e2 - se;
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated rounding from the running updates
    let value = segs.iter().map(|s| s.2).sum();
    let error = segs.iter().map(|s| s.3).sum();
    Integral {
        value,
        error,
        converged: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(10);
        // degree 19 is the highest exact degree for 10 nodes
        let got: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(18))
            .sum();
        assert_relative_eq!(got, 2.0 / 19.0, max_relative = 1e-13);
        let wsum: f64 = rule.weights.iter().sum();
        assert_relative_eq!(wsum, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn legendre_odd_order_has_center_node() {
        let rule = gauss_legendre(7);
        assert_eq!(rule.nodes[3], 0.0);
        assert_relative_eq!(
            rule.weights[3],
            0.417_959_183_673_469_4,
            max_relative = 1e-13
        );
    }

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite(24);
        let sqrt_pi = PI.sqrt();
        let m0: f64 = rule.weights.iter().sum();
        let m2: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x * x)
            .sum();
        let m10: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(10))
            .sum();
        assert_relative_eq!(m0, sqrt_pi, max_relative = 1e-13);
        assert_relative_eq!(m2, sqrt_pi / 2.0, max_relative = 1e-13);
        // (2k-1)!! / 2^k * sqrt(pi) with k = 5
        assert_relative_eq!(m10, 945.0 / 32.0 * sqrt_pi, max_relative = 1e-12);
        assert!(rule.nodes.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn hermite_order_one_and_two() {
        let one = gauss_hermite(1);
        assert_eq!(one.nodes, vec![0.0]);
        assert_relative_eq!(one.weights[0], PI.sqrt(), max_relative = 1e-14);
        let two = gauss_hermite(2);
        assert_relative_eq!(two.nodes[0], 0.5f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(two.weights[0], PI.sqrt() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        // ∫_0^1 u^{-0.9} du = 10
        let got = tanh_sinh(0.0, 1.0, TanhSinh::default(), |u, _| u.powf(-0.9));
        assert_relative_eq!(got, 10.0, max_relative = 1e-9);
        // ∫_0^2 v^{-0.5} log(v) ... use a both-ends case: ∫_0^1 (u v)^{-1/2} = pi
        let got = tanh_sinh(0.0, 1.0, TanhSinh::default(), |u, v| (u * v).powf(-0.5));
        assert_relative_eq!(got, PI, max_relative = 1e-9);
    }

    #[test]
    fn kronrod_is_exact_for_low_degree() {
        let mut f = |x: f64| x.powi(20);
        let (v, _) = kronrod15(&mut f, -1.0, 1.0);
        assert_relative_eq!(v, 2.0 / 21.0, max_relative = 1e-12);
    }

    #[test]
    fn adaptive_gk_oscillatory() {
        // ∫_0^{50} cos(x) e^{-x/10} dx
        let r = adaptive_gk(0.0, 50.0, 1e-13, 1e-12, 500, |x| {
            x.cos() * (-x / 10.0).exp()
        });
        let exact = {
            let a: f64 = 0.1;
            let e = (-a * 50.0_f64).exp();
            (a + e * (50.0f64.sin() - a * 50.0f64.cos())) / (1.0 + a * a)
        };
        assert!(r.converged);
        assert_relative_eq!(r.value, exact, max_relative = 1e-11);
    }
}
