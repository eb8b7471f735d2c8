//! Fixtures shared by the benchmarks.

use tl2_core::prelude::*;

/// Source, target-train and target-validate samples for Target-1 in `dim`
/// dimensions.
pub fn fixture(dim: usize, n_source: usize, n_target: usize, seed: u64) -> (Dataset, Dataset, Dataset) {
    let spec = SyntheticSpec::new(dim, n_source, n_target, TargetFn::Target1).with_seed(RngSeed::new(seed, 0));
    let source = gen_source(&spec).expect("valid spec");
    let target = gen_target(&spec).expect("valid spec");
    let (train, validate) = split_target(&target, &mut RngSeed::new(seed, 1).stream()).expect("split");
    (source, train, validate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shapes() {
        let (s, t, v) = fixture(2, 50, 21, 1);
        assert_eq!((s.len(), t.len(), v.len()), (50, 10, 11));
        assert_eq!(s.role(), Role::Source);
    }
}
