//! Vertex sets of the solids used to tile a spherical shell.

use nalgebra::Vector3;

/// Solids whose randomly rotated vertex sets are combined to populate a shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolyhedronKind {
    Tetrahedron,
    Cube,
    Icosahedron,
    Dodecahedron,
    TruncatedIcosahedron,
}

impl PolyhedronKind {
    /// All kinds, largest vertex count first.
    pub const DESCENDING: [PolyhedronKind; 5] = [
        PolyhedronKind::TruncatedIcosahedron,
        PolyhedronKind::Dodecahedron,
        PolyhedronKind::Icosahedron,
        PolyhedronKind::Cube,
        PolyhedronKind::Tetrahedron,
    ];

    pub const fn vertex_count(self) -> usize {
        match self {
            PolyhedronKind::Tetrahedron => 4,
            PolyhedronKind::Cube => 8,
            PolyhedronKind::Icosahedron => 12,
            PolyhedronKind::Dodecahedron => 20,
            PolyhedronKind::TruncatedIcosahedron => 60,
        }
    }

    /// Unit-norm vertices centred at the origin.
    pub fn vertices(self) -> Vec<Vector3<f64>> {
        let raw = match self {
            PolyhedronKind::Tetrahedron => {
                vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
            }
            PolyhedronKind::Cube => sign_combinations([1.0, 1.0, 1.0]),
            PolyhedronKind::Icosahedron => cyclic_with_signs(&[[0.0, 1.0, PHI]]),
            PolyhedronKind::Dodecahedron => {
                let mut v = sign_combinations([1.0, 1.0, 1.0]);
                v.extend(cyclic_with_signs(&[[0.0, 1.0 / PHI, PHI]]));
                v
            }
            PolyhedronKind::TruncatedIcosahedron => cyclic_with_signs(&[
                [0.0, 1.0, 3.0 * PHI],
                [1.0, 2.0 + PHI, 2.0 * PHI],
                [PHI, 2.0, PHI * PHI * PHI],
            ]),
        };
        raw.into_iter().map(|p| Vector3::from(p).normalize()).collect()
    }
}

const PHI: f64 = 1.618_033_988_749_895;

fn sign_combinations(p: [f64; 3]) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(8);
    for sx in [1.0, -1.0] {
        if p[0] == 0.0 && sx < 0.0 {
            continue;
        }
        for sy in [1.0, -1.0] {
            if p[1] == 0.0 && sy < 0.0 {
                continue;
            }
            for sz in [1.0, -1.0] {
                if p[2] == 0.0 && sz < 0.0 {
                    continue;
                }
                out.push([sx * p[0], sy * p[1], sz * p[2]]);
            }
        }
    }
    out
}

/// Even (cyclic) permutations of each seed point with every sign pattern.
fn cyclic_with_signs(seeds: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for seed in seeds {
        for signed in sign_combinations(*seed) {
            for shift in 0..3 {
                out.push([signed[shift % 3], signed[(shift + 1) % 3], signed[(shift + 2) % 3]]);
            }
        }
    }
    out
}
