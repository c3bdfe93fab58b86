//! Closed-form least-squares similarity alignment of paired 3D point sets.

use nalgebra::{Matrix3, Vector3};

use super::GeometryError;

/// Relative singular-value floor for rejecting collinear or coincident sets.
const DEGENERACY_RATIO: f64 = 1e-10;

/// `b ≈ scale · rotation · a + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Similarity {
    pub fn apply(&self, a: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * a) + self.translation
    }

    pub fn rms_error(&self, a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
        let sum: f64 = a.iter().zip(b).map(|(p, q)| (self.apply(p) - q).norm_squared()).sum();
        (sum / a.len() as f64).sqrt()
    }
}

/// Umeyama's method: SVD of the cross-covariance with a sign correction that
/// excludes reflections. With `with_scale` off the scale is fixed to 1.
pub fn umeyama_align(
    a: &[Vector3<f64>],
    b: &[Vector3<f64>],
    with_scale: bool,
) -> Result<Similarity, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::SizeMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 3 {
        return Err(GeometryError::DegenerateAlignment(format!(
            "need at least 3 point pairs, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<Vector3<f64>>() / n;
    let mean_b = b.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    let mut cov_a = Matrix3::zeros();
    let mut var_a = 0.0;
    for (p, q) in a.iter().zip(b) {
        let da = p - mean_a;
        let db = q - mean_b;
        cov += db * da.transpose();
        cov_a += da * da.transpose();
        var_a += da.norm_squared();
    }
    cov /= n;
    cov_a /= n;
    var_a /= n;

    check_spread(&cov_a, "source")?;
    let mut cov_b = Matrix3::zeros();
    for q in b {
        let db = q - mean_b;
        cov_b += db * db.transpose();
    }
    check_spread(&(cov_b / n), "target")?;

    let svd = cov.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sv = svd.singular_values;

    let mut s = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s[(sv.imin(), sv.imin())] = -1.0;
    }
    let rotation = u * s * v_t;
    let scale = if with_scale {
        (0..3).map(|i| sv[i] * s[(i, i)]).sum::<f64>() / var_a
    } else {
        1.0
    };
    let translation = mean_b - scale * (rotation * mean_a);
    Ok(Similarity { rotation, translation, scale })
}

fn check_spread(cov: &Matrix3<f64>, which: &str) -> Result<(), GeometryError> {
    let mut sv = cov.singular_values();
    sv.as_mut_slice().sort_by(|x, y| y.total_cmp(x));
    if !(sv[0] > 0.0) || sv[1] <= DEGENERACY_RATIO * sv[0] {
        return Err(GeometryError::DegenerateAlignment(format!(
            "{which} points are coincident or collinear"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation::{axis_angle, geodesic_distance};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn identical_sets_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = cloud(&mut rng, 10);
        let t = umeyama_align(&a, &a, true).unwrap();
        assert_relative_eq!(t.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(t.translation, Vector3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(t.scale, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn recovers_rigid_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = cloud(&mut rng, 20);
        let r = axis_angle(&Vector3::new(0.3, -1.0, 0.5), 2.1);
        let t = Vector3::new(0.5, -2.0, 3.0);
        let b: Vec<_> = a.iter().map(|p| r * p + t).collect();
        let est = umeyama_align(&a, &b, false).unwrap();
        assert!(geodesic_distance(&est.rotation, &r) < 1e-9);
        assert_relative_eq!(est.translation, t, epsilon = 1e-9);
        assert_eq!(est.scale, 1.0);
    }

    #[test]
    fn recovers_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = cloud(&mut rng, 15);
        let b: Vec<_> = a.iter().map(|p| 2.0 * p).collect();
        let est = umeyama_align(&a, &b, true).unwrap();
        assert_relative_eq!(est.scale, 2.0, epsilon = 1e-12);
        assert_relative_eq!(est.rotation, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn reflection_is_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = cloud(&mut rng, 12);
        let b: Vec<_> = a.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
        let est = umeyama_align(&a, &b, false).unwrap();
        assert_relative_eq!(est.rotation.determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_and_mismatched_inputs() {
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(umeyama_align(&line, &line, true), Err(GeometryError::DegenerateAlignment(_))));
        let same = vec![Vector3::new(1.0, 1.0, 1.0); 4];
        assert!(umeyama_align(&same, &same, false).is_err());
        let a = vec![Vector3::zeros(); 4];
        assert!(matches!(umeyama_align(&a, &a[..3], true), Err(GeometryError::SizeMismatch { .. })));
        assert!(umeyama_align(&a[..2], &a[..2], true).is_err());
    }

    #[test]
    fn residual_is_global_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = cloud(&mut rng, 30);
        let r = axis_angle(&Vector3::new(1.0, 1.0, 0.0), 0.7);
        let b: Vec<_> = a
            .iter()
            .map(|p| 1.3 * (r * p) + Vector3::new(0.1, 0.2, 0.3) + 0.05 * Vector3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let est = umeyama_align(&a, &b, true).unwrap();
        let best = est.rms_error(&a, &b);
        for _ in 0..50 {
            let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let perturbed = Similarity {
                rotation: axis_angle(&axis, rng.gen_range(-0.05..0.05)) * est.rotation,
                translation: est.translation + 0.01 * Vector3::new(rng.gen(), rng.gen(), rng.gen()),
                scale: est.scale * (1.0 + rng.gen_range(-0.02..0.02)),
            };
            assert!(perturbed.rms_error(&a, &b) >= best);
        }
    }
}
