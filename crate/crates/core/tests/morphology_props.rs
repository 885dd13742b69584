use granulom_core::imagecore::GreyImage;
use granulom_core::morphology::{
    close, dilate, dilate_direct, erode, erode_direct, open, Family, StructuringElement,
};
use proptest::prelude::*;

fn image_strategy(max_side: usize) -> impl Strategy<Value = GreyImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h)
            .prop_map(move |data| GreyImage::new(w, h, data).unwrap())
    })
}

fn family_strategy() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Hexagon), Just(Family::Square), Just(Family::Diamond)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decomposition_matches_direct_scan(f in image_strategy(20), family in family_strategy(), r in 0usize..8) {
        let se = StructuringElement::new(family, r);
        prop_assert_eq!(erode(&f, se), erode_direct(&f, se));
        prop_assert_eq!(dilate(&f, se), dilate_direct(&f, se));
    }

    #[test]
    fn opening_and_closing_axioms(f in image_strategy(16), family in family_strategy(), r in 0usize..5) {
        let se = StructuringElement::new(family, r);
        let o = open(&f, se);
        let c = close(&f, se);
        prop_assert!(o.le(&f));
        prop_assert!(f.le(&c));
        prop_assert_eq!(open(&o, se), o);
        prop_assert_eq!(close(&c, se), c.clone());
        prop_assert_eq!(c, open(&f.complement(), se).complement());
    }

    #[test]
    fn dilation_is_dual_of_erosion(f in image_strategy(16), family in family_strategy(), r in 0usize..5) {
        let se = StructuringElement::new(family, r);
        prop_assert_eq!(dilate(&f, se), erode(&f.complement(), se).complement());
    }

    #[test]
    fn sieve_property(f in image_strategy(16), family in family_strategy(), r in 0usize..5, s in 0usize..5) {
        let by = |n| StructuringElement::new(family, n);
        let expected = open(&f, by(r.max(s)));
        prop_assert_eq!(open(&open(&f, by(r)), by(s)), expected);
    }

    #[test]
    fn openings_are_increasing(f in image_strategy(12), family in family_strategy(), r in 0usize..4, seed in any::<u64>()) {
        // g >= f built by raising a pseudo-random subset of pixels
        let mut g = f.clone();
        let mut state = seed | 1;
        for v in g.data_mut() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            *v = v.saturating_add((state % 64) as u8);
        }
        let se = StructuringElement::new(family, r);
        prop_assert!(open(&f, se).le(&open(&g, se)));
        prop_assert!(close(&f, se).le(&close(&g, se)));
    }
}
