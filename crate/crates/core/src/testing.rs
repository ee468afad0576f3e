//! Proptest strategies shared by the unit tests.

use proptest::prelude::*;

use crate::graph::Graph;
use crate::linalg::Matrix;

/// Random weighted graph on `min_n..=max_n` nodes; each pair is an edge with
/// probability ½ and weight in `[0.1, 2)`.
pub fn arb_graph(min_n: usize, max_n: usize) -> impl Strategy<Value = Graph> {
    (min_n..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        prop::collection::vec(prop::option::weighted(0.5, 0.1f64..2.0), pairs).prop_map(move |ws| {
            let mut a = Matrix::zeros(n, n);
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if let Some(w) = ws[k] {
                        a[(i, j)] = w;
                        a[(j, i)] = w;
                    }
                    k += 1;
                }
            }
            Graph::new(a).expect("symmetric nonnegative")
        })
    })
}

/// Like [`arb_graph`] but with a weighted path `0–1–…–n−1` added, so the
/// graph is always connected.
pub fn arb_connected_graph(min_n: usize, max_n: usize) -> impl Strategy<Value = Graph> {
    arb_graph(min_n, max_n).prop_flat_map(|g| {
        let n = g.n();
        prop::collection::vec(0.1f64..2.0, n.saturating_sub(1)).prop_map(move |ws| {
            let mut a = g.adjacency().clone();
            for (i, w) in ws.iter().enumerate() {
                a[(i, i + 1)] += w;
                a[(i + 1, i)] += w;
            }
            Graph::new(a).expect("symmetric nonnegative")
        })
    })
}
