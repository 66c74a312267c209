//! Coordinate-seeded hash noise. Nothing here depends on the genome, so any
//! raster derived from a mask with it is a pure function of that mask.

/// SplitMix64 finalizer.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn hash4(a: u64, b: u64, c: u64, d: u64) -> u64 {
    mix(mix(mix(mix(a) ^ b) ^ c) ^ d)
}

/// Uniform value in `[0, 1)` from the hash of the inputs.
pub(crate) fn unit(a: u64, b: u64, c: u64, d: u64) -> f64 {
    (hash4(a, b, c, d) >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smooth value noise in `[0, 1]` on a square lattice of `cell` pixels.
pub(crate) fn value_noise(x: u32, y: u32, cell: u32, salt: u64) -> f64 {
    let fx = x as f64 / cell as f64;
    let fy = y as f64 / cell as f64;
    let (ix, iy) = (fx.floor() as u64, fy.floor() as u64);
    let (tx, ty) = (smoothstep(fx.fract()), smoothstep(fy.fract()));
    let corner = |dx: u64, dy: u64| unit(salt, ix + dx, iy + dy, 0x5eed);
    let top = corner(0, 0) * (1.0 - tx) + corner(1, 0) * tx;
    let bottom = corner(0, 1) * (1.0 - tx) + corner(1, 1) * tx;
    top * (1.0 - ty) + bottom * ty
}
