//! Fixtures shared by the benchmarks.

use tabe_core::{Mask, NearnessMap};

/// A `size`×`size` disc half covered by a nearer vertical bar.
pub fn occluded_disc(size: usize) -> (Mask, NearnessMap) {
    let c = size as f64 / 2.0;
    let r = size as f64 / 3.0;
    let bar = size / 2;
    let mask = Mask::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
        dx * dx + dy * dy <= r * r && x < bar
    })
    .expect("positive size");
    let near = NearnessMap::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
        if x >= bar {
            0.9
        } else if dx * dx + dy * dy <= r * r {
            0.5
        } else {
            0.1
        }
    })
    .expect("positive size");
    (mask, near)
}
