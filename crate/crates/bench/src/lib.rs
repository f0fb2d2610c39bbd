//! Fixtures shared by the criterion benches in `benches/`.

use std::sync::Arc;

use pesin_core::holonomy::{PoincareMap, Transversal};
use pesin_core::linalg::Vector;
use pesin_core::manifold::{local_stable_chart, LyapunovCoords, StableChart, StableChartOptions};
use pesin_core::oseledets::PesinParams;
use pesin_core::scenarios::ScenarioSpec;

pub const PARAMS: PesinParams = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 2.0, r_prime: 1.0, c_prime: 3.0 };

pub fn coords(spec: &ScenarioSpec, horizon: usize) -> Arc<LyapunovCoords> {
    let word = spec.word(horizon).expect("word");
    Arc::new(LyapunovCoords::build(&word, &Vector::zeros(2), &PARAMS, horizon).expect("coords"))
}

pub fn leaf(coords: &LyapunovCoords, nodes: usize) -> StableChart {
    local_stable_chart(coords, 3.0, &StableChartOptions { nodes, n_shoot: None }).expect("leaf chart")
}

/// Holonomy between `x = tau tanh(y)` and `x = 0.4 + tau tanh(y)`.
pub fn tilted_pair(spec: &ScenarioSpec, tau: f64) -> PoincareMap {
    let c = coords(spec, 60);
    let l = leaf(&c, 33);
    let w = |x0: f64| {
        Transversal::from_implicit_on_leaf(c.clone(), &l, move |q: &Vector| Vector::from_element(1, q[0] - x0 - tau * q[1].tanh()), 0.2, 33)
            .expect("transversal")
    };
    PoincareMap::new(w(0.0), w(0.4)).expect("pair")
}
