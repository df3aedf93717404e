//! Quadrature rules on intervals, triangles and tetrahedra.
//!
//! Simplex rules are expressed in barycentric coordinates with weights that
//! sum to one, so the caller multiplies by the element measure.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre: need at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (0.5 * (xi + 1.0), 0.5 * wi))
        .collect()
}

/// 3-point Gauss–Legendre on `[0, 1]`, exact through degree 5.
pub fn gauss3_unit() -> [(f64, f64); 3] {
    let a = (0.6f64).sqrt() * 0.5;
    [(0.5 - a, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + a, 5.0 / 18.0)]
}

/// Barycentric point with weight (weights sum to 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexPoint<const K: usize> {
    pub bary: [f64; K],
    pub weight: f64,
}

/// 3-point interior triangle rule, exact through degree 2.
pub fn triangle3() -> [SimplexPoint<3>; 3] {
    let a = 2.0 / 3.0;
    let b = 1.0 / 6.0;
    [
        SimplexPoint { bary: [a, b, b], weight: 1.0 / 3.0 },
        SimplexPoint { bary: [b, a, b], weight: 1.0 / 3.0 },
        SimplexPoint { bary: [b, b, a], weight: 1.0 / 3.0 },
    ]
}

/// 4-point tetrahedron rule, exact through degree 2.
pub fn tet4() -> [SimplexPoint<4>; 4] {
    let a = 0.585_410_196_624_968_5;
    let b = 0.138_196_601_125_010_5;
    [
        SimplexPoint { bary: [a, b, b, b], weight: 0.25 },
        SimplexPoint { bary: [b, a, b, b], weight: 0.25 },
        SimplexPoint { bary: [b, b, a, b], weight: 0.25 },
        SimplexPoint { bary: [b, b, b, a], weight: 0.25 },
    ]
}

/// Conical-product (collapsed Gauss–Legendre) rule with `q` points per
/// direction; exact for polynomials of degree `2q − 3` or better on the
/// tetrahedron.
pub fn tet_conical(q: usize) -> Vec<SimplexPoint<4>> {
    let g = gauss_legendre_unit(q);
    let mut pts = Vec::with_capacity(q * q * q);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            for &(w, ww) in &g {
                // (u, v, w) ∈ [0,1]³ → reference tet via Duffy collapse.
                let x = u;
                let y = v * (1.0 - u);
                let z = w * (1.0 - u) * (1.0 - v);
                let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                // Reference tet volume 1/6; normalize weights to sum to 1.
                let weight = 6.0 * wu * wv * ww * jac;
                pts.push(SimplexPoint {
                    bary: [1.0 - x - y - z, x, y, z],
                    weight,
                });
            }
        }
    }
    pts
}
