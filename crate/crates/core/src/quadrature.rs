//! Quadrature on the reference triangle and on the unit interval.

/// Quadrature rule on the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub degree: usize,
    /// Reference coordinates `(xi, eta)`.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to 1/2.
    pub weights: Vec<f64>,
}

/// Highest degree covered by the tabulated symmetric rules.
pub const MAX_SYMMETRIC_DEGREE: usize = 5;

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [x, y] = self.points[q];
        [1.0 - x - y, x, y]
    }

    fn from_orbits(degree: usize, orbits: &[(f64, f64, f64)], centroid: Option<f64>) -> Self {
        // (a, b, w): permutations of barycentric (a, b, b); weights given for unit area
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if let Some(w) = centroid {
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(0.5 * w);
        }
        for &(a, b, w) in orbits {
            for bary in [[a, b, b], [b, a, b], [b, b, a]] {
                points.push([bary[1], bary[2]]);
                weights.push(0.5 * w);
            }
        }
        QuadratureRule {
            degree,
            points,
            weights,
        }
    }
}

/// Quadrature rule exact for polynomials of total degree `degree` on the
/// reference triangle. Symmetric rules with positive weights up to degree 5,
/// collapsed Gauss-Legendre rules above.
pub fn quadrature(degree: usize) -> QuadratureRule {
    match degree {
        0 | 1 => QuadratureRule {
            degree: 1,
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        },
        2 => QuadratureRule::from_orbits(2, &[(2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0)], None),
        3 | 4 => QuadratureRule::from_orbits(
            4,
            &[
                (0.108_103_018_168_070, 0.445_948_490_915_965, 0.223_381_589_678_011),
                (0.816_847_572_980_459, 0.091_576_213_509_771, 0.109_951_743_655_322),
            ],
            None,
        ),
        5 => {
            let s15 = 15f64.sqrt();
            let a1 = (6.0 - s15) / 21.0;
            let a2 = (6.0 + s15) / 21.0;
            QuadratureRule::from_orbits(
                5,
                &[
                    (1.0 - 2.0 * a1, a1, (155.0 - s15) / 1200.0),
                    (1.0 - 2.0 * a2, a2, (155.0 + s15) / 1200.0),
                ],
                Some(9.0 / 40.0),
            )
        }
        _ => collapsed_gauss(degree),
    }
}

/// Duffy-collapsed tensor Gauss-Legendre rule exact to `degree`.
pub fn collapsed_gauss(degree: usize) -> QuadratureRule {
    // the collapse Jacobian (1 - s) adds one degree in s
    let n = (degree + 3) / 2;
    let (t, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (i, &s) in t.iter().enumerate() {
        for (j, &r) in t.iter().enumerate() {
            points.push([s, r * (1.0 - s)]);
            weights.push(w[i] * w[j] * (1.0 - s));
        }
    }
    QuadratureRule {
        degree,
        points,
        weights,
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    let x = x.into_iter().map(|z| 0.5 * (z + 1.0)).collect();
    let w = w.into_iter().map(|v| 0.5 * v).collect();
    (x, w)
}
