#![allow(dead_code)]

use ising_core::lattice::Coord2;

/// Plus-boundary spin enumeration on a box of `w` × `h` vertices.
/// Returns (Z⁺, Σ weight · Π σ at `probe`) with weights e^{β Σ σσ}.
pub fn spin_sums(w: usize, h: usize, beta: f64, probe: &[Coord2]) -> (f64, f64) {
    let interior: Vec<(usize, usize)> = (1..h - 1).flat_map(|y| (1..w - 1).map(move |x| (x, y))).collect();
    assert!(interior.len() <= 20);
    let mut z = 0.0;
    let mut zs = 0.0;
    for mask in 0u32..(1 << interior.len()) {
        let mut s = vec![vec![1.0f64; w]; h];
        for (i, &(x, y)) in interior.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s[y][x] = -1.0;
            }
        }
        let mut e = 0.0;
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    e += s[y][x] * s[y][x + 1];
                }
                if y + 1 < h {
                    e += s[y][x] * s[y + 1][x];
                }
            }
        }
        let wgt = (beta * e).exp();
        z += wgt;
        let prod: f64 = probe.iter().map(|p| s[(p.y2 / 2) as usize][(p.x2 / 2) as usize]).product();
        zs += wgt * prod;
    }
    (z, zs)
}

pub fn edge_count(w: usize, h: usize) -> usize {
    h * (w - 1) + (h - 1) * w
}

pub fn beta_grid() -> [f64; 4] {
    [ising_core::shol_core::beta_critical(), 0.3, 0.7, 1.1]
}
