use blmol_core::RandomStream;
use blmol_supernet::genome::{encoding_length, genome_spec};
use blmol_supernet::Topology;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decode_is_total_and_encode_round_trips(seed in any::<u64>(), depth in 1usize..6) {
        let spec = genome_spec(depth, 20);
        let g = spec.sample(&mut RandomStream::root(seed));
        let t = Topology::decode(depth, &g).unwrap();
        for (b, block) in t.blocks.iter().enumerate() {
            prop_assert!(!block.inputs.is_empty());
            prop_assert!(block.inputs.iter().all(|&i| i <= b));
        }
        let back = t.encode();
        prop_assert_eq!(back.len(), encoding_length(depth));
        let mut cursor = 0;
        for b in 0..=depth {
            let gates = &g.genes()[cursor..cursor + b + 1];
            let rewritten = &back.genes()[cursor..cursor + b + 1];
            if gates.iter().any(|&v| v == 1) {
                prop_assert_eq!(gates, rewritten);
            } else {
                prop_assert_eq!(rewritten.iter().sum::<i64>(), 1);
                prop_assert_eq!(rewritten[b], 1);
            }
            cursor += b + 1;
        }
        prop_assert_eq!(&g.genes()[cursor..], &back.genes()[cursor..]);
        prop_assert_eq!(Topology::decode(depth, &back).unwrap().encode(), back);
    }
}
