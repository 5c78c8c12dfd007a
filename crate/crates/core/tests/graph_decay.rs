//! Property tests for the layer table and the decay recursions.

use proptest::prelude::*;
use sparse_game_core::decay::{gamma_r, gamma_sequence, lemma51_oracle, theta_star, theta_star_uniform};
use sparse_game_core::graph::{build_lattice, build_tree, nkh_table, GraphDoc};
use sparse_game_core::{Graph, Orientation};

/// Random in-neighbour lists without self-loops, each list in random order.
fn digraph(max_n: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(any::<bool>(), n), n).prop_map(move |mask| {
            mask.iter()
                .enumerate()
                .map(|(i, row)| (0..n).filter(|&j| j != i && row[j]).collect())
                .collect()
        })
    })
}

fn symmetrize(lists: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = lists.to_vec();
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            if !out[j].contains(&i) {
                out[j].push(i);
            }
        }
    }
    out
}

fn graph(lists: Vec<Vec<usize>>) -> Graph {
    Graph::new(lists).unwrap()
}

fn out_degrees(g: &Graph) -> Vec<usize> {
    g.degrees().1
}

proptest! {
    #[test]
    fn table_ignores_storage_order(lists in digraph(12), seed in any::<u64>()) {
        let mut shuffled = lists.clone();
        let mut s = seed;
        for list in &mut shuffled {
            // Fisher-Yates driven by a simple LCG.
            for i in (1..list.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                list.swap(i, (s >> 33) as usize % (i + 1));
            }
            list.reverse();
        }
        let a = graph(lists.clone());
        let b = Graph::try_from(GraphDoc { n: lists.len(), in_neighbors: shuffled, labels: None }).unwrap();
        prop_assert_eq!(nkh_table(&a, 0).unwrap(), nkh_table(&b, 0).unwrap());
    }

    #[test]
    fn table_is_equivariant_under_relabelling(lists in digraph(10), rot in 0usize..10) {
        let n = lists.len();
        let pi = |i: usize| (i + rot) % n;
        let mut relabelled = vec![Vec::new(); n];
        for (i, list) in lists.iter().enumerate() {
            relabelled[pi(i)] = list.iter().map(|&j| pi(j)).collect();
        }
        let a = nkh_table(&graph(lists.clone()), 0).unwrap();
        let b = nkh_table(&graph(relabelled), pi(0)).unwrap();
        prop_assert_eq!(a.h_star, b.h_star);
        for k in 0..n {
            prop_assert_eq!(a.layer_of[k], b.layer_of[pi(k)]);
            prop_assert_eq!(&a.counts[k], &b.counts[pi(k)]);
        }
    }

    #[test]
    fn counts_are_bounded_by_out_degree(lists in digraph(12)) {
        let g = graph(lists);
        let t = nkh_table(&g, 0).unwrap();
        let out = out_degrees(&g);
        for (counts, &deg) in t.counts.iter().zip(&out) {
            prop_assert!(counts.iter().sum::<usize>() <= deg);
        }
    }

    #[test]
    fn undirected_counts_are_local_and_complete(lists in digraph(12)) {
        let g = graph(symmetrize(&lists));
        let t = nkh_table(&g, 0).unwrap();
        let out = out_degrees(&g);
        for (k, &deg) in out.iter().enumerate() {
            match t.layer_of[k] {
                Some(l) => {
                    prop_assert_eq!(t.counts[k].iter().sum::<usize>(), deg);
                    for h in 0..t.h_star {
                        if l.abs_diff(h) > 1 {
                            prop_assert_eq!(t.count(k, h), 0);
                        }
                    }
                }
                None => prop_assert!(t.counts[k].iter().all(|&c| c == 0)),
            }
        }
    }

    #[test]
    fn gamma_is_monotone_in_theta(lists in digraph(10), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let g = graph(lists);
        let t = nkh_table(&g, 0).unwrap();
        let r = t.h_star;
        let star = theta_star(&t, r).unwrap();
        let (lo, hi) = (a.min(b) * star, a.max(b) * star);
        let s_lo = gamma_sequence(&t, lo, r).unwrap();
        let s_hi = gamma_sequence(&t, hi, r).unwrap();
        for (x, y) in s_lo.iter().zip(&s_hi) {
            prop_assert!(x <= y);
        }
        prop_assert!(gamma_r(&s_lo) <= gamma_r(&s_hi));
    }

    #[test]
    fn uniform_threshold_gives_geometric_decay(lists in digraph(12), gamma_bar in 0.01f64..0.5) {
        let g = graph(symmetrize(&lists));
        let t = nkh_table(&g, 0).unwrap();
        let n_bound = t.max_count().max(1);
        let theta = theta_star_uniform(n_bound, gamma_bar).unwrap();
        let seq = gamma_sequence(&t, theta, t.h_star).unwrap();
        for r in 1..=seq.len() {
            prop_assert!(seq[r - 1] < 1.0);
            prop_assert!(gamma_r(&seq[..r]) <= gamma_bar.powi(r as i32) * (1.0 + 1e-12));
        }
    }

    /// Weights meeting the hypothesis with equality on the ball, arbitrary
    /// outside it, obtained by Jacobi iteration rather than a direct solve.
    #[test]
    fn recursion_lemma_holds_on_random_weights(
        lists in digraph(10),
        outer in prop::collection::vec(0.0f64..10.0, 10),
        r in 1usize..6,
    ) {
        let g = graph(lists);
        let n = g.len();
        let t = nkh_table(&g, 0).unwrap();
        let r = r.min(t.h_star);
        let max_deg = g.degrees().0.into_iter().max().unwrap_or(0).max(1);
        let gamma = 0.9 * theta_star(&t, r).unwrap().min(1.0 / max_deg as f64);
        let ball = t.ball(r);
        let mut c: Vec<f64> = (0..n).map(|i| outer[i % outer.len()]).collect();
        for _ in 0..20_000 {
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    if ball.binary_search(&i).is_ok() {
                        gamma * g.neighbors(i).iter().map(|&j| c[j]).sum::<f64>()
                    } else {
                        c[i]
                    }
                })
                .collect();
            // Entries cut off from positive weights decay towards zero; they
            // are flushed below, so convergence is judged on the rest only.
            let done = next.iter().zip(&c).all(|(a, b)| (a - b).abs() <= 1e-13 * a.abs() || *a < 1e-200);
            c = next;
            if done {
                break;
            }
        }
        for v in &mut c {
            if *v < 1e-200 {
                *v = 0.0;
            }
        }
        prop_assert!(lemma51_oracle(&g, 0, gamma, r, &c).unwrap());
    }
}

#[test]
fn trees_and_outward_lattices_only_count_adjacent_layers() {
    let graphs = [
        build_tree(2, 4).unwrap(),
        build_tree(3, 3).unwrap(),
        build_lattice(5, Orientation::Outward).unwrap(),
    ];
    for g in &graphs {
        let t = nkh_table(g, 0).unwrap();
        for k in 1..g.len() {
            let l = t.layer_of[k].unwrap();
            for h in 0..t.h_star {
                if h + 1 != l && l + 1 != h {
                    assert_eq!(t.count(k, h), 0, "k = {k}, h = {h}");
                }
            }
        }
    }
}
