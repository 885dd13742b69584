mod support;

use granulom_core::granulometry::{granulometry_closings, granulometry_openings, size_intensity};
use granulom_core::imagecore::GreyImage;
use granulom_core::morphology::{close, open, volume, Family, StructuringElement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracles;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, max: u8) -> GreyImage {
    GreyImage::from_fn(w, h, |_, _| rng.random_range(0..=max))
}

#[test]
fn openings_match_translation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let w = rng.random_range(1..=9);
        let h = rng.random_range(1..=9);
        let f = random_image(&mut rng, w, h, 255);
        for family in Family::ALL {
            for r in 0..=4 {
                let se = StructuringElement::new(family, r);
                assert_eq!(open(&f, se), oracles::open_by_translation(&f, family, r));
                assert_eq!(close(&f, se), oracles::close_by_translation(&f, family, r));
            }
        }
    }
}

#[test]
fn opening_granulometry_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let f = random_image(&mut rng, 8, 8, 255);
        let total = volume(&f);
        for family in Family::ALL {
            let curve = granulometry_openings(&f, family, 5).unwrap();
            let removed = oracles::granulometry_removed(&f, family, 5);
            for (r, &num) in removed.iter().enumerate() {
                assert_eq!(total - curve.volumes[r], num);
                assert_eq!(curve.values[r], num as f64 / total as f64);
            }
            assert_eq!(curve.values[0], 0.0);
            assert!(curve.values.windows(2).all(|p| p[0] <= p[1]));
        }
    }
}

#[test]
fn closing_granulometry_is_opening_of_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let f = random_image(&mut rng, 8, 8, 255);
        for family in Family::ALL {
            let c = granulometry_closings(&f, family, 4).unwrap();
            let o = granulometry_openings(&f.complement(), family, 4).unwrap();
            assert_eq!(c.values, o.values);
        }
    }
}

#[test]
fn size_intensity_matches_umbra_and_threshold_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..4 {
        let f = random_image(&mut rng, 8, 8, 20);
        for family in Family::ALL {
            let si = size_intensity(&f, family, 3, 16).unwrap();
            let umbra = oracles::size_intensity_umbra(&f, family, 3, 16);
            for (r, row) in umbra.iter().enumerate() {
                assert_eq!(si.column(r), &row[..], "{family} r={r}");
            }
            assert_eq!(si.column(0), &oracles::survival_counts(&f, 16)[..]);
            for k in 1..=16u8 {
                let mask: Vec<bool> = f.data().iter().map(|&v| v >= k).collect();
                let expected: Vec<u64> = (0..=3)
                    .map(|r| oracles::binary_opening_area(&mask, 8, 8, family, r))
                    .collect();
                assert_eq!(si.row(k).unwrap(), expected);
            }
        }
    }
}

#[test]
fn size_intensity_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let f = random_image(&mut rng, 24, 20, 255);
    let si = size_intensity(&f, Family::Hexagon, 8, 255).unwrap();
    for r in 0..=8 {
        for k in 1..=255u8 {
            let v = si.get(r, k).unwrap();
            assert!(v <= 24 * 20);
            if r > 0 {
                assert!(v <= si.get(r - 1, k).unwrap());
            }
            if k > 1 {
                assert!(v <= si.get(r, k - 1).unwrap());
            }
        }
    }
}
