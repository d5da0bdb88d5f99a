use proptest::prelude::*;

use pqdist::capacity::{solve_capacity, Condenser, SolverOptions};
use pqdist::pushforward::{bump, push_forward};
use pqdist::verify::{index_floor, Exponents};
use pqdist::{zoo, Domain, Error, Grid, GridFunction, Group, Region};

fn groups() -> impl Strategy<Value = Group> {
    prop_oneof![Just(Group::abelian(2)), Just(Group::abelian(3)), Just(Group::heisenberg(1)), Just(Group::heisenberg(2))]
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn group_law(
        (g, a, b, c) in groups().prop_flat_map(|g| {
            let n = g.total_dim();
            (Just(g), point(n), point(n), point(n))
        }),
        t in 0.05f64..10.0,
    ) {
        let ab_c = g.compose(&g.compose(&a, &b).unwrap(), &c).unwrap();
        let a_bc = g.compose(&a, &g.compose(&b, &c).unwrap()).unwrap();
        prop_assert!(max_gap(&ab_c, &a_bc) < 1e-11);
        let inv = g.inverse(&a).unwrap();
        prop_assert!(g.compose(&a, &inv).unwrap().iter().all(|v| v.abs() < 1e-12));
        let lhs = g.dilate(t, &g.compose(&a, &b).unwrap()).unwrap();
        let rhs = g.compose(&g.dilate(t, &a).unwrap(), &g.dilate(t, &b).unwrap()).unwrap();
        prop_assert!(max_gap(&lhs, &rhs) <= 1e-11 * (1.0 + t * t * 20.0));
        let na = g.gauge_norm(&a);
        prop_assert!((g.gauge_norm(&g.dilate(t, &a).unwrap()) - t * na).abs() <= 1e-12 * (1.0 + t * na));
        prop_assert!((g.gauge_norm(&inv) - na).abs() <= 1e-12 * (1.0 + na));
        // Korányi is a genuine norm: the triangle inequality holds with constant 1.
        let nab = g.gauge_norm(&g.compose(&a, &b).unwrap());
        prop_assert!(nab <= (na + g.gauge_norm(&b)) * (1.0 + 1e-12));
    }

    #[test]
    fn coverage_is_a_fraction(cx in -0.5f64..0.5, cy in -0.5f64..0.5, r in 0.05f64..1.5) {
        let g = Group::abelian(2);
        let grid = Grid::uniform(vec![-1.0, -1.0], vec![1.0, 1.0], 8).unwrap();
        let ball = Region::ball(&g, &[cx, cy], r);
        let cov = grid.cell_coverage(&ball);
        prop_assert!(cov.iter().all(|c| (0.0..=1.0).contains(c)));
        let comp = grid.cell_coverage(&ball.complement());
        prop_assert!(cov.iter().zip(&comp).all(|(a, b)| (a + b - 1.0).abs() < 1e-12));
        prop_assert!(grid.cell_coverage(&Region::everything()).iter().all(|c| *c == 1.0));
        prop_assert!(grid.cell_coverage(&Region::nothing()).iter().all(|c| *c == 0.0));
    }

    #[test]
    fn exponent_order(g in groups(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let nu = g.hom_dim() as f64;
        // two exponents in (ν−1, ν+3)
        let (x, y) = (nu - 1.0 + 1e-3 + 4.0 * a, nu - 1.0 + 1e-3 + 4.0 * b);
        let (p, q) = if x >= y { (x, y) } else { (y, x) };
        let e = Exponents::new(&g, p, q).unwrap();
        prop_assert!(e.s <= e.r);
        prop_assert_eq!(e.s == e.r, p == q);
        prop_assert!(e.s > 1.0);
        if p > q {
            prop_assert!(matches!(Exponents::new(&g, q, p), Err(Error::Precondition(_))));
        }
    }

    #[test]
    fn push_forward_is_linear(lambda in 0.1f64..5.0, k in 2u32..4, shift in -0.2f64..0.2) {
        let g = Group::abelian(2);
        let grid = Grid::uniform(vec![-1.0, -1.0], vec![1.0, 1.0], 24).unwrap();
        let u1 = bump(&g, &[shift, 0.0], 0.5).sample(&grid);
        let u2 = bump(&g, &[0.0, -shift], 0.4).sample(&grid);
        let sum = GridFunction::new(grid.clone(), u1.values().iter().zip(u2.values()).map(|(a, b)| a + b).collect()).unwrap();
        let w = zoo::winding(k).unwrap();
        let f = w.map.as_ref();
        let v1 = push_forward(f, &u1, 1.0, &grid).unwrap();
        let v2 = push_forward(f, &u2, 1.0, &grid).unwrap();
        let vs = push_forward(f, &sum, lambda, &grid).unwrap();
        for i in 0..grid.node_count() {
            let expect = lambda * (v1.values()[i] + v2.values()[i]);
            prop_assert!((vs.values()[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }
}

/// With Λ = 1/M, the push-forward of a capacity minimizer is at least 1 on
/// f(C), away from a two-cell band at the edge of C.
#[test]
fn pushed_minimizer_dominates_one_on_image_plate() {
    let g = Group::abelian(2);
    let r = 0.5;
    let cond = Condenser::ring(&g, &[0.0, 0.0], r, 1.0).unwrap();
    let res = solve_capacity(&cond, &g, 2.0, 64, &SolverOptions::default()).unwrap();
    let u = res.minimizer;
    let h = u.grid().spacing(0);
    for k in [2u32, 3] {
        let w = zoo::winding(k).unwrap();
        let f = w.map.as_ref();
        let c = Domain::new(u.grid().clone(), Region::ball(&g, &[0.0, 0.0], r));
        let m = index_floor(f, &c).unwrap();
        assert_eq!(m, k as usize);
        let target = Grid::uniform(vec![-0.2, -0.2], vec![0.2, 0.2], 40).unwrap();
        let v = push_forward(f, &u, 1.0 / m as f64, &target).unwrap();
        let inner = (r - 2.0 * h).powi(k as i32);
        let mut y = vec![0.0; 2];
        let mut checked = 0;
        for i in 0..target.node_count() {
            target.node_coords(i, &mut y);
            if g.gauge_norm(&y) < inner {
                checked += 1;
                assert!(v.values()[i] >= 1.0 - 1e-9, "k={k} y={y:?} v={}", v.values()[i]);
            }
        }
        assert!(checked > 100);
    }
}

#[test]
fn identity_capacity_comparison_is_exact() {
    let g = Group::abelian(2);
    let v = pqdist::verify::Verifier::new(32, 0.0).unwrap();
    let c = Condenser::ring(&g, &[0.0, 0.0], 0.5, 1.0).unwrap();
    let rep = v.capacity_comparison(&zoo::identity(&g).map, &c, 2.0, 2.0).unwrap();
    assert!(rep.pass);
    assert!((rep.lhs - rep.rhs).abs() <= 1e-12 * rep.rhs);
}
