use pixiso_core::{random_grid, Cell, PixelGrid};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = PixelGrid> {
    (1usize..=10, 1usize..=10)
        .prop_flat_map(|(nx, ny)| (Just(nx), Just(ny), proptest::collection::vec(any::<bool>(), nx * ny), 0..nx))
        .prop_map(|(nx, ny, bits, fx)| {
            PixelGrid::from_bits(nx, ny, bits)
                .unwrap()
                .with_feed(Cell::new(fx, 0))
                .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn repair_keeps_exactly_the_feed_component(g in grid_strategy()) {
        let r = g.repair_floating();
        let mut forced = g.clone();
        forced.set(g.feed(), true);
        let comp = forced.connected_component(g.feed()).unwrap();
        prop_assert_eq!(r.bits(), comp.bits());
        prop_assert!(r.is_repaired());
        prop_assert_eq!(r.repair_floating(), r.clone());
        for n in 0..g.len() {
            let c = Cell::new(n % g.nx(), n / g.nx());
            if r.get(c) && !g.get(c) {
                prop_assert_eq!(c, g.feed());
            }
        }
    }

    #[test]
    fn p1_round_trip(g in grid_strategy()) {
        let back = PixelGrid::from_p1(&g.to_p1()).unwrap();
        prop_assert_eq!(back.bits(), g.bits());
        prop_assert_eq!((back.nx(), back.ny()), (g.nx(), g.ny()));
    }

    #[test]
    fn mirror_is_an_involution(g in grid_strategy()) {
        let m = g.mirrored_x();
        prop_assert_eq!(m.mirrored_x(), g.clone());
        prop_assert_eq!(m.repair_floating(), g.repair_floating().mirrored_x());
    }

    #[test]
    fn hex_length_and_hamming(g in grid_strategy(), seed in any::<u64>()) {
        prop_assert_eq!(g.bits_hex().len(), 2 * g.nx().div_ceil(8) * g.ny());
        let other = random_grid(g.nx(), g.ny(), 0.5, seed).unwrap();
        let h = g.hamming(&other).unwrap();
        prop_assert_eq!(h, other.hamming(&g).unwrap());
        prop_assert!(h <= g.len());
    }
}
