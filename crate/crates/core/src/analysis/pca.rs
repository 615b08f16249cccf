//! Two-component PCA by power iteration with deflation.

/// Top-2 principal directions of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca2D {
    /// Per-point coordinates in the (pc1, pc2) plane.
    pub projections: Vec<[f64; 2]>,
    /// Orthonormal component vectors, sign-fixed so the largest-magnitude
    /// coordinate of each is positive.
    pub components: [Vec<f64>; 2],
    /// Top-2 eigenvalues of the sample covariance.
    pub eigenvalues: [f64; 2],
    /// Eigenvalue share of total variance, non-increasing, in [0, 1].
    pub explained_variance_ratio: [f64; 2],
}

fn mat_vec(m: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    (0..d)
        .map(|r| m[r * d..(r + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic pseudo-random start vector; any fixed vector works as long
/// as it is not orthogonal to the dominant eigenvector, which a fixed
/// irrational pattern essentially never is.
fn start_vector(d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d)
        .map(|i| (((i as f64) + 1.0) * std::f64::consts::SQRT_2).sin() + 0.3)
        .collect();
    let n = norm(&v);
    for x in &mut v {
        *x /= n;
    }
    v
}

/// A deterministic unit vector orthogonal to `u`: the basis vector least
/// aligned with `u`, Gram-Schmidt'ed against it.
fn orthogonal_unit(u: &[f64]) -> Vec<f64> {
    let d = u.len();
    let j = (0..d)
        .min_by(|&a, &b| u[a].abs().partial_cmp(&u[b].abs()).unwrap())
        .unwrap_or(0);
    let mut v = vec![0.0; d];
    v[j] = 1.0;
    let proj = dot(&v, u);
    for (x, uu) in v.iter_mut().zip(u) {
        *x -= proj * uu;
    }
    let n = norm(&v);
    for x in &mut v {
        *x /= n;
    }
    v
}

/// Dominant eigenpair of a symmetric PSD matrix, optionally constrained to
/// the complement of `deflate`.
fn power_iterate(cov: &[f64], d: usize, deflate: Option<&[f64]>, scale: f64) -> (Vec<f64>, f64) {
    let mut v = start_vector(d);
    if let Some(u) = deflate {
        let p = dot(&v, u);
        for (x, uu) in v.iter_mut().zip(u) {
            *x -= p * uu;
        }
        let n = norm(&v);
        if n < 1e-300 {
            v = orthogonal_unit(u);
        } else {
            for x in &mut v {
                *x /= n;
            }
        }
    }
    for _ in 0..200_000 {
        let mut w = mat_vec(cov, d, &v);
        if let Some(u) = deflate {
            let p = dot(&w, u);
            for (x, uu) in w.iter_mut().zip(u) {
                *x -= p * uu;
            }
        }
        let n = norm(&w);
        if n <= scale * 1e-15 {
            // (Near-)zero operator on this subspace: eigenvalue 0; keep a
            // deterministic direction.
            let dir = match deflate {
                Some(u) => orthogonal_unit(u),
                None => v,
            };
            let lambda = dot(&mat_vec(cov, d, &dir), &dir);
            return (dir, lambda.max(0.0));
        }
        for x in &mut w {
            *x /= n;
        }
        let drift: f64 = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = w;
        if drift < 1e-15 {
            break;
        }
    }
    let lambda = dot(&mat_vec(cov, d, &v), &v);
    (v, lambda.max(0.0))
}

/// Flips the vector so its largest-magnitude coordinate (lowest index on
/// ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut j = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[j].abs() {
            j = i;
        }
    }
    if v[j] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Mean-centers the points, builds the sample covariance, and extracts the
/// top two eigenpairs. Rank-deficient input yields a zero second component;
/// a constant point cloud yields zero projections and zero ratios.
pub fn pca_2d(points: &[Vec<f64>]) -> Pca2D {
    assert!(points.len() >= 2, "pca needs at least two points");
    let n = points.len();
    let d = points[0].len();

    let mut mean = vec![0.0; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    // Sample covariance, accumulated in fixed index order.
    let mut cov = vec![0.0; d * d];
    for row in &centered {
        for i in 0..d {
            let ri = row[i];
            if ri != 0.0 {
                for j in 0..d {
                    cov[i * d + j] += ri * row[j];
                }
            }
        }
    }
    let denom = (n - 1) as f64;
    for v in &mut cov {
        *v /= denom;
    }
    let total_var: f64 = (0..d).map(|i| cov[i * d + i]).sum();

    if total_var <= 1e-300 {
        let mut c1 = vec![0.0; d];
        let mut c2 = vec![0.0; d];
        c1[0] = 1.0;
        c2[usize::from(d > 1)] = 1.0;
        return Pca2D {
            projections: vec![[0.0, 0.0]; n],
            components: [c1, c2],
            eigenvalues: [0.0, 0.0],
            explained_variance_ratio: [0.0, 0.0],
        };
    }

    let (mut v1, l1) = power_iterate(&cov, d, None, total_var);
    let (mut v2, l2) = power_iterate(&cov, d, Some(&v1), total_var);
    fix_sign(&mut v1);
    fix_sign(&mut v2);
    let (l1, l2) = if l2 > l1 { (l2, l1) } else { (l1, l2) };

    let projections = centered
        .iter()
        .map(|row| [dot(row, &v1), dot(row, &v2)])
        .collect();
    Pca2D {
        projections,
        components: [v1, v2],
        eigenvalues: [l1, l2],
        explained_variance_ratio: [l1 / total_var, l2 / total_var],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn plane_embedded_in_high_dimensions_is_projected_isometrically() {
        // Random rank-2 data: distances in the projection must match.
        let mut rng = crate::rng::seeded_rng("pca-plane", 0);
        let d = 48;
        // two random orthonormal directions
        let mut u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nu = norm(&u);
        u.iter_mut().for_each(|x| *x /= nu);
        let mut w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = dot(&w, &u);
        w.iter_mut().zip(&u).for_each(|(x, uu)| *x -= p * uu);
        let nw = norm(&w);
        w.iter_mut().for_each(|x| *x /= nw);

        let coords: Vec<[f64; 2]> = (0..30)
            .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let pts: Vec<Vec<f64>> = coords
            .iter()
            .map(|[a, b]| (0..d).map(|i| a * u[i] + b * w[i]).collect())
            .collect();
        let pca = pca_2d(&pts);
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let orig = ((coords[i][0] - coords[j][0]).powi(2)
                    + (coords[i][1] - coords[j][1]).powi(2))
                .sqrt();
                let proj = ((pca.projections[i][0] - pca.projections[j][0]).powi(2)
                    + (pca.projections[i][1] - pca.projections[j][1]).powi(2))
                .sqrt();
                assert!(
                    (orig - proj).abs() <= 1e-9,
                    "distance {orig} became {proj}"
                );
            }
        }
    }

    #[test]
    fn identical_points_give_zero_projections_and_ratios() {
        let pts = vec![vec![1.0, 2.0, 3.0]; 5];
        let pca = pca_2d(&pts);
        assert_eq!(pca.projections, vec![[0.0, 0.0]; 5]);
        assert_eq!(pca.explained_variance_ratio, [0.0, 0.0]);
    }

    #[test]
    fn components_are_orthonormal_and_ratios_ordered() {
        let mut rng = crate::rng::seeded_rng("pca-rand", 1);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..48).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let pca = pca_2d(&pts);
        assert!((norm(&pca.components[0]) - 1.0).abs() < 1e-10);
        assert!((norm(&pca.components[1]) - 1.0).abs() < 1e-10);
        assert!(dot(&pca.components[0], &pca.components[1]).abs() < 1e-10);
        assert!(pca.explained_variance_ratio[0] >= pca.explained_variance_ratio[1]);
        assert!(pca.explained_variance_ratio[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn projected_variance_matches_eigenvalues() {
        let mut rng = crate::rng::seeded_rng("pca-var", 2);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let pca = pca_2d(&pts);
        let n = pts.len() as f64;
        for c in 0..2 {
            let mean: f64 = pca.projections.iter().map(|p| p[c]).sum::<f64>() / n;
            let var: f64 = pca
                .projections
                .iter()
                .map(|p| (p[c] - mean) * (p[c] - mean))
                .sum::<f64>()
                / (n - 1.0);
            assert!(
                (var - pca.eigenvalues[c]).abs() < 1e-8 * (1.0 + pca.eigenvalues[c]),
                "component {c}: var {var} vs eigenvalue {}",
                pca.eigenvalues[c]
            );
        }
    }

    #[test]
    fn invariant_under_row_permutation() {
        let mut rng = crate::rng::seeded_rng("pca-perm", 3);
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let pca = pca_2d(&pts);
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.reverse();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let pca_p = pca_2d(&permuted);
        for c in 0..2 {
            for (a, b) in pca.components[c].iter().zip(&pca_p.components[c]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        for (orig_idx, &src) in perm.iter().enumerate() {
            for c in 0..2 {
                assert!((pca.projections[src][c] - pca_p.projections[orig_idx][c]).abs() < 1e-9);
            }
        }
    }
}
