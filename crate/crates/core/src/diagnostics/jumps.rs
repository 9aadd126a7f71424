use crate::process::{ChainPath, FactorPath};
use crate::simulate::WeightedEnsemble;

/// Number of chain jump times that coincide exactly with a factor jump time.
pub fn common_jump_scan_paths<'a>(paths: impl IntoIterator<Item = (&'a FactorPath, &'a ChainPath)>) -> usize {
    paths
        .into_iter()
        .map(|(factor, chain)| {
            let fj = factor.jump_times();
            chain
                .jumps()
                .iter()
                .filter(|j| fj.binary_search_by(|u| u.total_cmp(&j.time)).is_ok())
                .count()
        })
        .sum()
}

pub fn common_jump_scan(ensemble: &WeightedEnsemble) -> usize {
    common_jump_scan_paths(ensemble.paths.iter().map(|p| (&p.factor, &p.chain)))
}
