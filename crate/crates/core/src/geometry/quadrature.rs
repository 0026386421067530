//! Gauss rules on intervals and on the reference triangle.

use std::f64::consts::PI;

use crate::mesh::Point;

/// `n`-point Gauss-Legendre rule on `[-1, 1]` as `(nodes, weights)`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss rule mapped to `[a, b]`.
pub fn gauss_on_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

/// Collapsed tensor Gauss rule on the reference triangle `{x, y >= 0, x + y <= 1}`,
/// exact for polynomials of total degree `2 * points - 2`.
pub fn triangle_rule(points: usize) -> Vec<(Point, f64)> {
    let (x, w) = gauss_legendre(points);
    let mut rule = Vec::with_capacity(points * points);
    for (&xu, &wu) in x.iter().zip(&w) {
        let u = 0.5 * (xu + 1.0);
        for (&xv, &wv) in x.iter().zip(&w) {
            let v = 0.5 * (xv + 1.0);
            rule.push((Point::new(u, (1.0 - u) * v), 0.25 * wu * wv * (1.0 - u)));
        }
    }
    rule
}

/// Smallest collapsed rule integrating total degree `degree` exactly.
pub fn triangle_rule_for_degree(degree: usize) -> Vec<(Point, f64)> {
    triangle_rule((degree + 3) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rules_integrate_monomials() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} k={k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn triangle_rule_integrates_monomials() {
        // int_T x^a y^b = a! b! / (a + b + 2)!
        let fact = |k: usize| (1..=k).product::<usize>() as f64;
        for deg in 0..=8 {
            let rule = triangle_rule_for_degree(deg);
            for a in 0..=deg {
                let b = deg - a;
                let q: f64 = rule
                    .iter()
                    .map(|(p, w)| w * p.x.powi(a as i32) * p.y.powi(b as i32))
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-15, "deg={deg} a={a}");
            }
        }
    }
}
