//! Emitter positions for trapped-ion crystals.
//!
//! Near-spherical crystals are modelled as concentric shells at radii
//! `k * spacing` (k = 1 innermost). Ions on a shell have no internal order:
//! each shell is filled with the vertices of several independently rotated
//! polyhedra, and surplus vertices are deleted uniformly at random.
//! Very large crystals use a close-packed lattice instead (see [`bcc_layout`]).

mod bcc;
mod io;
mod polyhedra;
mod rotation;

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

pub use bcc::{bcc_layout, bcc_site, bcc_spacing_for_shells};
pub use io::{read_layout_csv, write_layout_csv};
pub use polyhedra::PolyhedronKind;
pub use rotation::random_rotation;

/// Shell occupations of the measured crystals, innermost shell first.
pub const MEASURED_OCCUPATIONS: [(usize, &[usize]); 5] = [
    (12, &[12]),
    (55, &[12, 43]),
    (125, &[8, 35, 82]),
    (204, &[4, 25, 60, 115]),
    (275, &[9, 36, 80, 150]),
];

/// Ions held by shell `k` of an unlisted crystal is `SHELL_CAPACITY * k^2`.
///
/// Matches the inner shells of the 275-ion crystal (9, 36, 81 ≈ 80, ...),
/// i.e. constant surface density on equally spaced shells.
pub const SHELL_CAPACITY: usize = 9;

/// Largest crystal modelled with shells; bigger ones use the lattice.
pub const SHELL_MODEL_LIMIT: usize = 2000;

/// Shell spacing (µm) at which a 1500-ion crystal under the wide-field
/// optics has 391 ions above `η_max/e`. Used when no spacing is given.
pub const DEFAULT_SPACING_UM: f64 = 3.29;

#[derive(Debug, Clone, PartialEq)]
pub struct ShellSpec {
    /// Ion counts per shell, innermost first.
    pub occupancies: Vec<usize>,
    /// Radial distance between consecutive shells (µm).
    pub spacing: f64,
}

impl ShellSpec {
    pub fn for_ions(n_total: usize, spacing: f64) -> Result<Self> {
        check_spacing(spacing)?;
        Ok(Self {
            occupancies: shell_occupation(n_total)?,
            spacing,
        })
    }

    pub fn total(&self) -> usize {
        self.occupancies.iter().sum()
    }

    /// Radius of the shell at position `index` in `occupancies`.
    pub fn radius(&self, index: usize) -> f64 {
        if self.total() == 1 {
            0.0
        } else {
            (index + 1) as f64 * self.spacing
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Shells(ShellSpec),
    Bcc { u: f64 },
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Shells(_) => "shells",
            Provenance::Bcc { .. } => "bcc",
        }
    }
}

/// Emitter positions in µm, immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalLayout {
    pub positions: Vec<Vector3<f64>>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl CrystalLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Spacing parameter: shell spacing or lattice constant.
    pub fn spacing(&self) -> f64 {
        match &self.provenance {
            Provenance::Shells(spec) => spec.spacing,
            Provenance::Bcc { u } => *u,
        }
    }

    /// A single emitter at the origin.
    pub fn single() -> Self {
        Self {
            positions: vec![Vector3::zeros()],
            provenance: Provenance::Shells(ShellSpec {
                occupancies: vec![1],
                spacing: 1.0,
            }),
            seed: 0,
        }
    }
}

/// Ion counts per shell (innermost first) for an `n_total`-ion crystal.
///
/// The measured crystals return their tabulated occupations. Other sizes use
/// the smallest number of shells whose capacities `9 k²` hold all ions, fill
/// proportionally to `k²` and give the remainder to the outermost shell.
pub fn shell_occupation(n_total: usize) -> Result<Vec<usize>> {
    if n_total == 0 {
        return Err(invalid("n_total", "crystal needs at least one ion"));
    }
    if let Some((_, occ)) = MEASURED_OCCUPATIONS.iter().find(|(n, _)| *n == n_total) {
        return Ok(occ.to_vec());
    }
    let mut shells = 1;
    while SHELL_CAPACITY * shells * (shells + 1) * (2 * shells + 1) / 6 < n_total {
        shells += 1;
    }
    if shells == 1 {
        return Ok(vec![n_total]);
    }
    let weight_sum: usize = (1..=shells).map(|k| k * k).sum();
    let mut occupancies: Vec<usize> = (1..=shells).map(|k| (n_total * k * k / weight_sum).max(1)).collect();
    let assigned: usize = occupancies.iter().sum();
    *occupancies.last_mut().expect("at least two shells") += n_total - assigned;
    Ok(occupancies)
}

/// Random points on the unit sphere built from rotated polyhedra vertices.
///
/// Polyhedra are chosen greedily (largest that still fits, tetrahedron for
/// the last few ions); surplus vertices are removed uniformly.
pub fn fill_shell<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<Vector3<f64>> {
    let mut vertices = Vec::with_capacity(count + 4);
    let mut remaining = count;
    while remaining > 0 {
        let kind = PolyhedronKind::DESCENDING
            .into_iter()
            .find(|k| k.vertex_count() <= remaining)
            .unwrap_or(PolyhedronKind::Tetrahedron);
        let rotation = random_rotation(rng);
        vertices.extend(kind.vertices().into_iter().map(|v| rotation * v));
        remaining = remaining.saturating_sub(kind.vertex_count());
    }
    if vertices.len() == count {
        return vertices;
    }
    let mut keep = index::sample(rng, vertices.len(), count).into_vec();
    keep.sort_unstable();
    keep.into_iter().map(|i| vertices[i]).collect()
}

/// Builds a shell-structured crystal; a pure function of its arguments.
pub fn sample_crystal(n_total: usize, spacing: f64, seed: u64) -> Result<CrystalLayout> {
    let spec = ShellSpec::for_ions(n_total, spacing)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_shells(spec, seed, &mut rng))
}

/// Fills every shell of `spec`. Random draws do not depend on the spacing,
/// so for a fixed seed the layout scales linearly with `spec.spacing`.
pub fn sample_shells<R: Rng + ?Sized>(spec: ShellSpec, seed: u64, rng: &mut R) -> CrystalLayout {
    let mut positions = Vec::with_capacity(spec.total());
    if spec.total() == 1 {
        positions.push(Vector3::zeros());
    } else {
        for (index, &count) in spec.occupancies.iter().enumerate() {
            let radius = spec.radius(index);
            positions.extend(fill_shell(count, rng).into_iter().map(|v| v * radius));
        }
    }
    CrystalLayout {
        positions,
        provenance: Provenance::Shells(spec),
        seed,
    }
}

/// Finds the spacing at which `observable(spacing)` crosses `target`.
///
/// `observable` must be monotone on `[lo, hi]` (either direction) and bracket
/// the target. Bisection stops when the interval is narrower than `tol`.
pub fn calibrate_spacing<F>(lo: f64, hi: f64, target: f64, tol: f64, mut observable: F) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("bracket", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let fa = observable(a) - target;
    let fb = observable(b) - target;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(invalid(
            "bracket",
            format!("observable does not cross {target} on [{lo}, {hi}]"),
        ));
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let fm = observable(mid) - target;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Shells up to [`SHELL_MODEL_LIMIT`] ions, the lattice with the
/// density-matched constant above it.
pub fn crystal_for_size(n_total: usize, spacing: f64, seed: u64) -> Result<CrystalLayout> {
    if n_total > SHELL_MODEL_LIMIT {
        bcc_layout(bcc_spacing_for_shells(spacing), n_total)
    } else {
        sample_crystal(n_total, spacing, seed)
    }
}

pub(crate) fn check_spacing(spacing: f64) -> Result<()> {
    if spacing.is_finite() && spacing > 0.0 {
        Ok(())
    } else {
        Err(invalid("spacing", format!("must be positive, got {spacing}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measured_occupations() {
        assert_eq!(shell_occupation(12).unwrap(), vec![12]);
        assert_eq!(shell_occupation(55).unwrap(), vec![12, 43]);
        assert_eq!(shell_occupation(125).unwrap(), vec![8, 35, 82]);
        assert_eq!(shell_occupation(204).unwrap(), vec![4, 25, 60, 115]);
        assert_eq!(shell_occupation(275).unwrap(), vec![9, 36, 80, 150]);
        assert_eq!(shell_occupation(1).unwrap(), vec![1]);
        assert!(shell_occupation(0).is_err());
    }

    #[test]
    fn unlisted_occupations_sum_and_grow() {
        for n in 1..3000 {
            let occ = shell_occupation(n).unwrap();
            assert_eq!(occ.iter().sum::<usize>(), n, "n={n}");
            assert!(occ.iter().all(|&c| c >= 1));
        }
        assert_eq!(shell_occupation(9).unwrap(), vec![9]);
        assert_eq!(shell_occupation(10).unwrap(), vec![2, 8]);
        // 1500 ions need eight shells (capacity 1836).
        assert_eq!(shell_occupation(1500).unwrap().len(), 8);
    }

    #[test]
    fn shells_sit_at_multiples_of_spacing() {
        let layout = sample_crystal(275, 10.0, 5).unwrap();
        assert_eq!(layout.len(), 275);
        let Provenance::Shells(spec) = &layout.provenance else {
            panic!("expected shells");
        };
        let mut offset = 0;
        for (k, &count) in spec.occupancies.iter().enumerate() {
            let radius = (k + 1) as f64 * 10.0;
            for p in &layout.positions[offset..offset + count] {
                assert!((p.norm() - radius).abs() <= 1e-9 * radius);
            }
            offset += count;
        }
    }

    #[test]
    fn twelve_ions_on_one_shell() {
        let layout = sample_crystal(12, 10.0, 1).unwrap();
        assert_eq!(layout.len(), 12);
        assert!(layout.positions.iter().all(|p| (p.norm() - 10.0).abs() < 1e-9));
    }

    #[test]
    fn single_ion_at_origin() {
        let layout = sample_crystal(1, 4.0, 9).unwrap();
        assert_eq!(layout.positions, vec![Vector3::zeros()]);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_crystal(204, 3.0, 42).unwrap();
        let b = sample_crystal(204, 3.0, 42).unwrap();
        let c = sample_crystal(204, 3.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn layout_scales_with_spacing() {
        let a = sample_crystal(125, 2.0, 8).unwrap();
        let b = sample_crystal(125, 5.0, 8).unwrap();
        for (p, q) in a.positions.iter().zip(&b.positions) {
            assert!((p * 2.5 - q).norm() < 1e-12);
        }
    }

    #[test]
    fn fill_shell_exact_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for count in [1, 2, 3, 4, 5, 7, 13, 43, 59, 61, 150] {
            assert_eq!(fill_shell(count, &mut rng).len(), count);
        }
    }

    #[test]
    fn large_shells_are_isotropic() {
        // Mean position over 100 seeds of every shell holding >= 60 ions.
        let spec = ShellSpec::for_ions(275, 1.0).unwrap();
        for (k, &count) in spec.occupancies.iter().enumerate() {
            if count < 60 {
                continue;
            }
            let mut sum = Vector3::zeros();
            for seed in 0..100 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for p in fill_shell(count, &mut rng) {
                    sum += p;
                }
            }
            let mean = sum / (100 * count) as f64;
            assert!(mean.norm() < 0.05, "shell {k}: |mean| = {}", mean.norm());
        }
    }

    #[test]
    fn calibrate_finds_crossing() {
        let s = calibrate_spacing(0.1, 10.0, 4.0, 1e-9, |x| x * x).unwrap();
        assert!((s - 2.0).abs() < 1e-8);
        let s = calibrate_spacing(0.1, 10.0, 0.5, 1e-9, |x| 1.0 / x).unwrap();
        assert!((s - 2.0).abs() < 1e-8);
        assert!(calibrate_spacing(1.0, 2.0, 100.0, 1e-6, |x| x).is_err());
    }
}
