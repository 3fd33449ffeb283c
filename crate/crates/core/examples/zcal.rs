use lamtrack::track::assets;
use lamtrack::zippers::{enumerate_zipper_families, z_r_upper_bound, cusps, ZipperError};
use std::time::Instant;

fn main() {
    for track in assets::all() {
        let p = cusps(&track).len() as u32;
        let q = track.edges.len() as u32;
        println!("== {} (p={}, q={})", track.name, p, q);
        for r in 1..=6 {
            let t0 = Instant::now();
            match enumerate_zipper_families(&track, r, 3_000_000) {
                Ok(fams) => {
                    println!("  r={r}: #Z_r = {} (bound {}) in {:?}", fams.len(), z_r_upper_bound(p, q, r as u32), t0.elapsed());
                }
                Err(ZipperError::EnumerationLimit { families_found }) => {
                    println!("  r={r}: CAP at {families_found} in {:?}", t0.elapsed());
                    break;
                }
                Err(e) => { println!("  r={r}: error {e}"); break; }
            }
        }
    }
}
