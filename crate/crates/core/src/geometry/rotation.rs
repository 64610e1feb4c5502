use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use rand::Rng;
use rand_distr::StandardNormal;

/// Draws a rotation uniformly from SO(3).
///
/// A normalised 4D Gaussian vector is uniform on S³, and the double cover
/// S³ → SO(3) pushes that forward to the Haar measure.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3<f64> {
    loop {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if q.norm() > 1e-12 {
            return UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn proper_and_norm_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
            let v = Vector3::new(0.3, -0.4, 0.866_025_403_784_438_6).normalize();
            assert!(((r * v).norm() - 1.0).abs() < 1e-12);
            let id = r.matrix() * r.inverse().matrix();
            assert!((id - Matrix3::identity()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn rotated_pole_is_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000;
        let mut sum = Vector3::zeros();
        for _ in 0..draws {
            sum += random_rotation(&mut rng) * Vector3::z();
        }
        let mean = sum / draws as f64;
        let bound = 3.0 / (draws as f64).sqrt();
        for c in mean.iter() {
            assert!(c.abs() < bound, "component {c} exceeds {bound}");
        }
    }
}
