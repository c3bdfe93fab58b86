//! Continuous 6D rotation parameterization and the SO(3) geodesic metric.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Below this the Gram–Schmidt construction is treated as undefined.
pub const ROT6D_DEGENERACY_EPS: f64 = 1e-12;

/// Per-entry tolerance used when validating orthonormality and determinant.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Two unconstrained 3-vectors that map onto SO(3) through Gram–Schmidt.
///
/// The first column of the resulting matrix is `a1` normalized, the second is
/// `a2` with its `a1` component removed and normalized, and the third is
/// their cross product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation6D {
    pub a1: Vector3<f64>,
    pub a2: Vector3<f64>,
}

impl Rotation6D {
    pub fn new(a1: Vector3<f64>, a2: Vector3<f64>) -> Result<Self, GeometryError> {
        let r = Self { a1, a2 };
        r.check()?;
        Ok(r)
    }

    /// Packs the parameters as `[a1, a2]`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.a1.x, self.a1.y, self.a1.z, self.a2.x, self.a2.y, self.a2.z]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self, GeometryError> {
        if v.len() != 6 {
            return Err(GeometryError::InvalidRotation6D(format!(
                "expected 6 parameters, got {}",
                v.len()
            )));
        }
        Self::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]))
    }

    fn check(&self) -> Result<(), GeometryError> {
        if !self.a1.iter().chain(self.a2.iter()).all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidRotation6D("non-finite component".into()));
        }
        if self.a1.norm() <= ROT6D_DEGENERACY_EPS {
            return Err(GeometryError::InvalidRotation6D("first column has zero norm".into()));
        }
        if self.a1.cross(&self.a2).norm() <= ROT6D_DEGENERACY_EPS {
            return Err(GeometryError::InvalidRotation6D("columns are collinear".into()));
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> Result<Matrix3<f64>, GeometryError> {
        rot6d_to_matrix(self)
    }
}

/// Gram–Schmidt map from the 6D parameterization to a rotation matrix.
pub fn rot6d_to_matrix(r: &Rotation6D) -> Result<Matrix3<f64>, GeometryError> {
    r.check()?;
    let b1 = r.a1 / r.a1.norm();
    let u2 = r.a2 - b1 * b1.dot(&r.a2);
    let n2 = u2.norm();
    if !(n2 > ROT6D_DEGENERACY_EPS) {
        return Err(GeometryError::InvalidRotation6D("columns are collinear".into()));
    }
    let b2 = u2 / n2;
    let b3 = b1.cross(&b2);
    Ok(Matrix3::from_columns(&[b1, b2, b3]))
}

/// Reads off the first two columns of a validated rotation matrix.
pub fn matrix_to_rot6d(m: &Matrix3<f64>) -> Result<Rotation6D, GeometryError> {
    validate_rotation(m)?;
    Ok(Rotation6D {
        a1: m.column(0).into_owned(),
        a2: m.column(1).into_owned(),
    })
}

/// Checks `RᵀR = I` per entry and `det(R) = +1`, both within [`ROTATION_TOLERANCE`].
pub fn validate_rotation(m: &Matrix3<f64>) -> Result<(), GeometryError> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(GeometryError::NotARotation("non-finite entry".into()));
    }
    let gram = m.transpose() * m;
    let dev = (gram - Matrix3::identity()).amax();
    if dev > ROTATION_TOLERANCE {
        return Err(GeometryError::NotARotation(format!(
            "RᵀR deviates from identity by {dev:e}"
        )));
    }
    let det = m.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(GeometryError::NotARotation(format!("determinant is {det}")));
    }
    Ok(())
}

/// Angle of the relative rotation `R1ᵀR2`, in radians.
///
/// The cosine term is the clamped `(trace − 1)/2`; it is paired with the sine
/// read from the skew part so that angles near 0 keep full precision instead
/// of the `sqrt(ε)` floor of a bare `acos`.
pub fn geodesic_distance(r1: &Matrix3<f64>, r2: &Matrix3<f64>) -> f64 {
    let rel = r1.transpose() * r2;
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = 0.5
        * Vector3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        )
        .norm();
    sin.atan2(cos)
}

/// Rotation about a unit axis by `angle` radians (Rodrigues).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let kx = k.cross_matrix();
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn orthonormal_input_gives_identity() {
        let r = Rotation6D::new(Vector3::x(), Vector3::y()).unwrap();
        assert_eq!(rot6d_to_matrix(&r).unwrap(), Matrix3::identity());
    }

    #[test]
    fn gram_schmidt_normalizes_scale() {
        let r = Rotation6D::new(Vector3::new(2.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 3.0)).unwrap();
        let m = rot6d_to_matrix(&r).unwrap();
        let expected = Matrix3::from_columns(&[
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.0, -1.0, 0.0),
        ]);
        assert_relative_eq!(m, expected, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_inputs_are_errors() {
        assert!(Rotation6D::new(Vector3::zeros(), Vector3::y()).is_err());
        assert!(Rotation6D::new(Vector3::x(), Vector3::new(3.0, 0.0, 0.0)).is_err());
        let raw = Rotation6D { a1: Vector3::x(), a2: Vector3::x() * 2.0 };
        assert!(rot6d_to_matrix(&raw).is_err());
        let nan = Rotation6D { a1: Vector3::new(f64::NAN, 0.0, 0.0), a2: Vector3::y() };
        assert!(rot6d_to_matrix(&nan).is_err());
    }

    #[test]
    fn identity_reads_off_first_two_columns() {
        let r = matrix_to_rot6d(&Matrix3::identity()).unwrap();
        assert_eq!(r.a1, Vector3::x());
        assert_eq!(r.a2, Vector3::y());
    }

    #[test]
    fn quarter_turn_about_z_round_trips() {
        let rz = axis_angle(&Vector3::z(), PI / 2.0);
        let r = matrix_to_rot6d(&rz).unwrap();
        assert_relative_eq!(r.a1, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(rot6d_to_matrix(&r).unwrap(), rz, epsilon = 1e-15);
    }

    #[test]
    fn non_orthonormal_matrix_rejected() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.1;
        assert!(matrix_to_rot6d(&m).is_err());
        assert!(matrix_to_rot6d(&(-Matrix3::identity())).is_err());
    }

    #[test]
    fn geodesic_basics() {
        let i = Matrix3::identity();
        assert_eq!(geodesic_distance(&i, &i), 0.0);
        let rz = axis_angle(&Vector3::z(), PI / 6.0);
        assert_relative_eq!(geodesic_distance(&i, &rz), PI / 6.0, epsilon = 1e-15);
        assert_relative_eq!(geodesic_distance(&rz, &i), PI / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn geodesic_half_turn_is_pi_without_nan() {
        // Trace slightly below -1 after rounding.
        let mut m = Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0));
        m[(0, 0)] -= 2e-15;
        let d = geodesic_distance(&Matrix3::identity(), &m);
        assert!(d.is_finite());
        assert_relative_eq!(d, PI, epsilon = 1e-12);
    }
}
