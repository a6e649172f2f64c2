//! Symmetric triangle quadrature rules in barycentric coordinates.

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Barycentric coordinates of each point.
    pub points: Vec<[f64; 3]>,
    /// Weights on the reference triangle (sum to 1/2).
    pub weights: Vec<f64>,
    pub degree: u32,
}

fn orbit3(a: f64) -> [[f64; 3]; 3] {
    let b = 1.0 - 2.0 * a;
    [[a, a, b], [a, b, a], [b, a, a]]
}

fn orbit6(a: f64, b: f64) -> [[f64; 3]; 6] {
    let c = 1.0 - a - b;
    [
        [a, b, c],
        [a, c, b],
        [b, a, c],
        [b, c, a],
        [c, a, b],
        [c, b, a],
    ]
}

impl QuadratureRule {
    /// Dunavant 6-point rule, exact for degree 4.
    pub fn degree4() -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in [
            (0.445_948_490_915_965, 0.223_381_589_678_011),
            (0.091_576_213_509_771, 0.109_951_743_655_322),
        ] {
            for p in orbit3(a) {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        QuadratureRule {
            points,
            weights,
            degree: 4,
        }
    }

    /// Dunavant 12-point rule, exact for degree 6.
    pub fn degree6() -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in [
            (0.249_286_745_170_910, 0.116_786_275_726_379),
            (0.063_089_014_491_502, 0.050_844_906_370_207),
        ] {
            for p in orbit3(a) {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        for p in orbit6(0.053_145_049_844_817, 0.310_352_451_033_784) {
            points.push(p);
            weights.push(0.5 * 0.082_851_075_618_374);
        }
        QuadratureRule {
            points,
            weights,
            degree: 6,
        }
    }

    /// Rule used for every assembled form and energy evaluation.
    pub fn default_rule() -> Self {
        Self::degree6()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^p y^q over the reference triangle (0,0),(1,0),(0,1).
    fn monomial_exact(p: u32, q: u32) -> f64 {
        let f = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        f(p) * f(q) / f(p + q + 2)
    }

    fn check(rule: &QuadratureRule) {
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 0.5).abs() < 1e-14);
        for p in 0..=rule.degree {
            for q in 0..=(rule.degree - p) {
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(l, w)| w * l[1].powi(p as i32) * l[2].powi(q as i32))
                    .sum();
                let exact = monomial_exact(p, q);
                assert!(
                    ((approx - exact) / exact).abs() < 1e-12,
                    "x^{p} y^{q}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn degree4_exactness() {
        check(&QuadratureRule::degree4());
    }

    #[test]
    fn degree6_exactness() {
        check(&QuadratureRule::degree6());
    }
}
