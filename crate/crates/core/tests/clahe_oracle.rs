mod oracles;

use iaclahe::clahe::{clahe_with, Blend};
use iaclahe::{clahe, clahe_forward_tape, ClipLimitMap, Plane, TileGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane {
    let lo = rng.random_range(0..200u32);
    let hi = rng.random_range(lo + 1..=256u32);
    Plane::from_fn(w, h, |_, _| rng.random_range(lo..hi) as u8).unwrap()
}

#[test]
fn sixteen_square_two_by_two_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = TileGrid::new(2, 2).unwrap();
    let c = ClipLimitMap::uniform(g, 4.0).unwrap();
    for _ in 0..50 {
        let p = random_plane(&mut rng, 16, 16);
        assert_eq!(clahe(&p, g, &c).unwrap(), oracles::naive_clahe(&p, g, &c));
    }
}

#[test]
fn random_instances_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..300 {
        let (w, h) = (rng.random_range(1..48), rng.random_range(1..48));
        let p = random_plane(&mut rng, w, h);
        let g = TileGrid::new(rng.random_range(1..6), rng.random_range(1..6)).unwrap();
        let c = ClipLimitMap::new(
            g,
            (0..g.n_tiles())
                .map(|_| rng.random_range(0.3..12.0))
                .collect(),
        )
        .unwrap();
        let fast = clahe(&p, g, &c).unwrap();
        assert_eq!(fast, oracles::naive_clahe(&p, g, &c), "{w}x{h} grid {g}");
        let (real, _) = clahe_forward_tape(&p, g, &c).unwrap();
        for (a, b) in real.data().iter().zip(oracles::naive_clahe_real(&p, g, &c)) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn single_tile_saturated_is_global_he() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = TileGrid::new(1, 1).unwrap();
    let c = ClipLimitMap::uniform(g, 1e9).unwrap();
    for _ in 0..100 {
        let (w, h) = (rng.random_range(1..80), rng.random_range(1..80));
        let p = random_plane(&mut rng, w, h);
        assert_eq!(clahe(&p, g, &c).unwrap(), oracles::global_he(&p));
    }
}

#[test]
fn without_blending_tiles_are_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..60 {
        let (w, h) = (rng.random_range(4..40), rng.random_range(4..40));
        let p = random_plane(&mut rng, w, h);
        let g = TileGrid::new(rng.random_range(1..4), rng.random_range(1..4)).unwrap();
        let c = ClipLimitMap::new(
            g,
            (0..g.n_tiles())
                .map(|_| rng.random_range(0.5..6.0))
                .collect(),
        )
        .unwrap();
        assert_eq!(
            clahe_with(&p, g, &c, Blend::OwnTile).unwrap(),
            oracles::per_tile_he(&p, g, &c)
        );
    }
}

#[test]
fn saturated_limits_equal_unclipped_adaptive_he() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_plane(&mut rng, 40, 24);
    let g = TileGrid::new(3, 4).unwrap();
    // Every bin count is at most N_pix = 80, so C' = C * 80 / 256 >= 80 at C = 256.
    let (_, tape) = clahe_forward_tape(&p, g, &ClipLimitMap::uniform(g, 256.0).unwrap()).unwrap();
    assert!(tape.excess.iter().all(|&s| s == 0.0));
    let a = clahe(&p, g, &ClipLimitMap::uniform(g, 256.0).unwrap()).unwrap();
    let b = clahe(&p, g, &ClipLimitMap::uniform(g, 1e12).unwrap()).unwrap();
    assert_eq!(a, b);
}
