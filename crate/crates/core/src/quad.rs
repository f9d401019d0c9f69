//! Composite Gauss–Legendre rules.

use gauss_quad::GaussLegendre;

/// Nodes and weights of `panels` equal sub-intervals of `[a, b]`, each with an
/// `order`-point Gauss–Legendre rule.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(order).expect("Gauss-Legendre order must be at least 2");
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for &(node, weight) in rule.as_node_weight_pairs() {
            out.push((mid + 0.5 * width * node, 0.5 * width * weight));
        }
    }
    out
}

pub fn integrate<F: Fn(f64) -> f64>(rule: &[(f64, f64)], f: F) -> f64 {
    rule.iter().map(|&(x, w)| w * f(x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_trig() {
        let rule = composite_rule(0.0, 1.0, 4, 6);
        assert!((integrate(&rule, |x| x.powi(5)) - 1.0 / 6.0).abs() < 1e-15);
        let rule = composite_rule(0.0, std::f64::consts::PI, 20, 10);
        assert!((integrate(&rule, f64::sin) - 2.0).abs() < 1e-14);
    }
}
