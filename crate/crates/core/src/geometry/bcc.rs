use nalgebra::Vector3;

use super::{check_spacing, CrystalLayout, Provenance, SHELL_CAPACITY};
use crate::error::{invalid, Result};

/// Lattice site `(i, j, k)` for nearest-neighbour distance `u`.
///
/// Rows alternate by `u/2` along x with the parity of `j`; layers alternate by
/// `u/√3` along y with the parity of `k`; layers are `u·√(2/3)` apart.
pub fn bcc_site(i: i64, j: i64, k: i64, u: f64) -> Vector3<f64> {
    let odd = |n: i64| if n.rem_euclid(2) == 1 { 2.0 } else { 0.0 };
    Vector3::new(
        i as f64 * u + 0.25 * odd(j) * u,
        j as f64 * 3f64.sqrt() / 2.0 * u + u / (2.0 * 3f64.sqrt()) * odd(k),
        k as f64 * (2.0f64 / 3.0).sqrt() * u,
    )
}

/// Lattice constant giving the same ion density as shells `spacing` apart.
///
/// Shell `k` holds `9 k²` ions in a slab of volume `4π k² spacing³`; the
/// lattice has `√2 / u³` sites per unit volume.
pub fn bcc_spacing_for_shells(spacing: f64) -> f64 {
    let shell_density = SHELL_CAPACITY as f64 / (4.0 * std::f64::consts::PI);
    spacing * (std::f64::consts::SQRT_2 / shell_density).cbrt()
}

/// The `n_target` lattice sites closest to the centroid of a generated block,
/// translated so that block centroid sits at the origin.
pub fn bcc_layout(u: f64, n_target: usize) -> Result<CrystalLayout> {
    check_spacing(u)?;
    if n_target == 0 {
        return Err(invalid("n_target", "need at least one ion"));
    }
    // Radius of a ball holding n sites, plus margin.
    let radius = u * (3.0 * n_target as f64 / (4.0 * std::f64::consts::PI * std::f64::consts::SQRT_2)).cbrt();
    let span = |step: f64| (radius / step).ceil() as i64 + 2;
    let (ni, nj, nk) = (span(u), span(3f64.sqrt() / 2.0 * u), span((2.0f64 / 3.0).sqrt() * u));

    let mut sites = Vec::new();
    for k in -nk..=nk {
        for j in -nj..=nj {
            for i in -ni..=ni {
                sites.push(bcc_site(i, j, k, u));
            }
        }
    }
    let centroid = sites.iter().sum::<Vector3<f64>>() / sites.len() as f64;
    let mut keyed: Vec<(f64, Vector3<f64>)> = sites
        .into_iter()
        .map(|p| ((p - centroid).norm_squared(), p - centroid))
        .collect();
    // Stable sort keeps generation order among equidistant sites.
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.truncate(n_target);

    Ok(CrystalLayout {
        positions: keyed.into_iter().map(|(_, p)| p).collect(),
        provenance: Provenance::Bcc { u },
        seed: 0,
    })
}
