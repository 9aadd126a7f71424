use super::reference::ReferenceRates;
use crate::error::{Error, Result};
use crate::process::{evaluate_on_grid, ChainPath, FactorPath, GeneratorMatrix, IntensityModel, TimeGrid};

/// Change-of-measure density along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathWeight {
    /// Density at the horizon.
    pub terminal: f64,
    /// Density at every grid node `t_0..=t_K`.
    pub nodes: Vec<f64>,
}

/// Density of the target measure (intensity `model`) with respect to the
/// reference measure (Poisson rates `rates`) along `path`:
///
/// `prod_{x!=y} exp(-int H^x_{u-} (lambda^{xy}_u - a^{xy}) du) * prod_{jumps x->y at u} lambda^{xy}_{u-} / a^{xy}`.
///
/// A jump the model forbids (`lambda^{xy}_{u-} = 0`) yields weight zero.
pub fn radon_nikodym_weight(
    path: &ChainPath,
    factor: &FactorPath,
    model: &dyn IntensityModel,
    rates: &ReferenceRates,
    grid: &TimeGrid,
) -> Result<PathWeight> {
    let lambdas = evaluate_on_grid(model, factor, grid)?;
    weight_from_intensities(path, &lambdas, rates, grid)
}

/// As [`radon_nikodym_weight`], with the interval intensities precomputed.
pub fn weight_from_intensities(
    path: &ChainPath,
    lambdas: &[GeneratorMatrix],
    rates: &ReferenceRates,
    grid: &TimeGrid,
) -> Result<PathWeight> {
    if lambdas.len() != grid.steps() {
        return Err(Error::Mismatch(format!(
            "{} intensities for {} grid intervals",
            lambdas.len(),
            grid.steps()
        )));
    }
    let a = rates.matrix();
    let jumps = path.jumps();
    let mut log_w = 0.0;
    let mut zero = false;
    let mut next_jump = 0;
    let mut nodes = Vec::with_capacity(grid.steps() + 1);
    nodes.push(1.0);

    for (k, lambda) in lambdas.iter().enumerate() {
        let (t0, t1) = (grid.node(k), grid.node(k + 1));
        // Exposure on [t0, t1): the rate of leaving x differs by
        // (lambda^{xx} - a^{xx}) per unit time spent in x.
        for (s, e, x) in path.segments(t0, t1) {
            log_w += (lambda.rate(x, x) - a[(x, x)]) * (e - s);
        }
        // Jumps in (t0, t1] see the left limit, which is this interval's value.
        while next_jump < jumps.len() && jumps[next_jump].time <= t1 {
            let j = jumps[next_jump];
            let l = lambda.rate(j.from, j.to);
            if l < 0.0 {
                return Err(Error::Model(format!("negative rate {l} at jump time {}", j.time)));
            }
            if l == 0.0 {
                zero = true;
            } else {
                log_w += (l / a[(j.from, j.to)]).ln();
            }
            next_jump += 1;
        }
        nodes.push(if zero { 0.0 } else { log_w.exp() });
    }
    Ok(PathWeight { terminal: *nodes.last().expect("at least one node"), nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use crate::process::{IntensitySpec, Jump};

    fn setup() -> (IntensitySpec, ReferenceRates, TimeGrid, FactorPath) {
        let model = IntensitySpec::constant(from_rows(&[vec![-2.0, 2.0], vec![0.0, 0.0]])).unwrap();
        let rates = ReferenceRates::try_from(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let f = FactorPath::constant(&[0.0], 11);
        (model, rates, grid, f)
    }

    #[test]
    fn staying_put_gives_exposure_term_only() {
        let (model, rates, grid, f) = setup();
        let w = radon_nikodym_weight(&ChainPath::constant(0), &f, &model, &rates, &grid).unwrap();
        assert!((w.terminal - (-1.0f64).exp()).abs() < 1e-14);
        assert!((w.nodes[5] - (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn single_allowed_jump() {
        // 2 * exp(-(2-1)*0.5) * exp(-(0-1)*0.5) = 2
        let (model, rates, grid, f) = setup();
        let p = ChainPath::new(0, vec![Jump { time: 0.5, from: 0, to: 1 }]).unwrap();
        let w = radon_nikodym_weight(&p, &f, &model, &rates, &grid).unwrap();
        assert!((w.terminal - 2.0).abs() < 1e-13);
    }

    #[test]
    fn forbidden_jump_gives_zero_weight() {
        let (model, rates, grid, f) = setup();
        let p = ChainPath::new(1, vec![Jump { time: 0.33, from: 1, to: 0 }]).unwrap();
        let w = radon_nikodym_weight(&p, &f, &model, &rates, &grid).unwrap();
        assert_eq!(w.terminal, 0.0);
        assert!(w.nodes[3] > 0.0);
        assert_eq!(w.nodes[4], 0.0);
    }

    #[test]
    fn model_equal_to_reference_gives_unit_weight() {
        let (_, rates, grid, f) = setup();
        let model = IntensitySpec::constant(rates.matrix().clone()).unwrap();
        let p = ChainPath::new(
            0,
            vec![Jump { time: 0.1, from: 0, to: 1 }, Jump { time: 0.75, from: 1, to: 0 }],
        )
        .unwrap();
        let w = radon_nikodym_weight(&p, &f, &model, &rates, &grid).unwrap();
        assert!(w.nodes.iter().all(|&v| v == 1.0));
    }
}
