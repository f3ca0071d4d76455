//! Reference values checked against independent numeric oracles: midpoint
//! integration of the density on a fine grid, bisection for inverses, and
//! brute-force leaf sums for value trees.

use fairdiv::dual::{dual_closed_form, dual_cut, dual_eval, dual_piece, DualValuation};
use fairdiv::geometry::{int, rat, to_f64};
use fairdiv::valuation::{density_of_piece, PiecewiseConstant, Valuation};
use fairdiv::valuetree::{BalancedValueTree, TreeParams};
use fairdiv::{Piece, Scalar};

const GRID: usize = 1 << 20;

fn two_step_density(t: f64) -> f64 {
    if t < 0.5 {
        1.5
    } else {
        0.5
    }
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = (b - a) / GRID as f64;
    (0..GRID).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

fn bisect(mass: impl Fn(f64) -> f64, from: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (from, 1.0);
    if mass(from) >= target {
        return from;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Closed-form CDF of the two-step density, used only inside the bisection oracle.
fn two_step_cdf(t: f64) -> f64 {
    integrate(two_step_density, 0.0, t.max(1e-300))
}

fn two_step() -> PiecewiseConstant {
    PiecewiseConstant::new(vec![(rat(1, 2), rat(3, 2)), (int(1), rat(1, 2))]).unwrap()
}

#[test]
fn eval_matches_integration() {
    let oracle = integrate(two_step_density, 0.0, 0.75);
    assert!((oracle - 0.875).abs() < 1e-6);
    let exact = two_step().eval(&int(0), &rat(3, 4)).unwrap();
    assert_eq!(exact, rat(7, 8));
    assert!((to_f64(&exact) - oracle).abs() < 1e-6);
}

#[test]
fn cut_matches_bisection() {
    let oracle = bisect(two_step_cdf, 0.0, 0.75);
    assert!((oracle - 0.5).abs() < 1e-6);
    assert_eq!(
        two_step().cut(&int(0), &rat(3, 4)).unwrap(),
        Some(rat(1, 2))
    );
}

#[test]
fn piece_densities_match_integration() {
    let left = integrate(two_step_density, 0.0, 0.5) / 0.5;
    let right = integrate(two_step_density, 0.5, 1.0) / 0.5;
    let v = two_step();
    let l = density_of_piece(&v, &Piece::from_bounds(int(0), rat(1, 2)).unwrap()).unwrap();
    let r = density_of_piece(&v, &Piece::from_bounds(rat(1, 2), int(1)).unwrap()).unwrap();
    assert_eq!((l.clone(), r.clone()), (rat(3, 2), rat(1, 2)));
    assert!((to_f64(&l) - left).abs() < 1e-9 && (to_f64(&r) - right).abs() < 1e-9);
}

#[test]
fn dual_queries_match_inverse_cdf() {
    let d = DualValuation::new(two_step());
    // eval*(0, 3/4) = cut(0, 3/4) - cut(0, 0)
    let oracle = bisect(two_step_cdf, 0.0, 0.75) - 0.0;
    let exact = dual_eval(&d, &int(0), &rat(3, 4)).unwrap();
    assert_eq!(exact, rat(1, 2));
    assert!((to_f64(&exact) - oracle).abs() < 1e-6);
    // cut*(0, 1/2) = eval(0, cut(0, 0) + 1/2)
    let oracle = integrate(two_step_density, 0.0, 0.5);
    let exact = dual_cut(&d, &int(0), &rat(1, 2)).unwrap().unwrap();
    assert_eq!(exact, rat(3, 4));
    assert!((to_f64(&exact) - oracle).abs() < 1e-9);
}

#[test]
fn closed_form_dual_matches_inverse_density() {
    let dual = dual_closed_form(&two_step()).unwrap();
    // The dual's CDF is the inverse of the base CDF; its density is 1 / base density there.
    let width_first = integrate(two_step_density, 0.0, 0.5);
    assert!((width_first - 0.75).abs() < 1e-9);
    assert_eq!(dual.ends(), &[rat(3, 4), int(1)]);
    assert_eq!(dual.densities(), &[rat(2, 3), int(2)]);
}

#[test]
fn dual_piece_matches_integration() {
    let p = dual_piece(&two_step(), &Piece::from_bounds(int(0), rat(1, 2)).unwrap()).unwrap();
    let oracle = integrate(two_step_density, 0.0, 0.5);
    assert_eq!(p, Piece::from_bounds(int(0), rat(3, 4)).unwrap());
    assert!((to_f64(&p.width()) - oracle).abs() < 1e-9);
}

/// Brute-force tree valuation: every leaf's value from its label product,
/// spread uniformly over the leaf.
struct LeafTable {
    values: Vec<f64>,
}

impl LeafTable {
    fn new(tree: &BalancedValueTree) -> Self {
        let d = tree.params().depth() as usize;
        let n = 3usize.pow(d as u32);
        let mut values = vec![0.0; n];
        for (i, slot) in values.iter_mut().enumerate() {
            let mut digits = vec![0u8; d];
            let mut rest = i;
            for j in (0..d).rev() {
                digits[j] = (rest % 3) as u8;
                rest /= 3;
            }
            *slot = tree.node_value(&digits).unwrap();
        }
        Self { values }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let n = self.values.len() as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (a, b) = (i as f64 / n, (i + 1) as f64 / n);
                let overlap = (b.min(y) - a.max(x)).max(0.0);
                v * overlap * n
            })
            .sum()
    }
}

#[test]
fn tree_queries_match_leaf_sums() {
    for seed in 0..4 {
        let tree = BalancedValueTree::build(TreeParams::permissive(6).unwrap(), seed).unwrap();
        let table = LeafTable::new(&tree);
        assert!((table.eval(0.0, 1.0) - 1.0).abs() < 1e-12);
        let points: Vec<Scalar> = (0..12).map(|i| rat(7 * i * i + 3 * i, 1000)).collect();
        for x in &points {
            for y in points.iter().filter(|y| *y >= x) {
                let oracle = table.eval(to_f64(x), to_f64(y));
                let got = tree.eval(x, y).unwrap();
                assert!(
                    (got - oracle).abs() < 1e-12,
                    "seed {seed} [{x}, {y}]: {got} vs {oracle}"
                );
                let cut = tree.cut(x, got).unwrap().unwrap();
                let back = bisect(|t| table.eval(to_f64(x), t), to_f64(x), got);
                assert!(
                    (to_f64(&cut) - back).abs() < 1e-9,
                    "cut from {x}: {cut} vs {back}"
                );
            }
        }
    }
}

#[test]
fn tree_parameters_match_direct_formula() {
    let p = TreeParams::new(11).unwrap();
    let ln_n = 11.0 * 3f64.ln();
    assert!((p.beta() - (2f64.ln() * 6.0 / ln_n).exp()).abs() < 1e-15);
    assert!((p.heavy_label() + 2.0 * p.light_label() - 1.0).abs() < 1e-15);
}
