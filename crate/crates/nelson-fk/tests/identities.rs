use nelson_fk::action::{evaluate, EvalOptions, PathEvaluation};
use nelson_fk::fieldstate::MomentumGrid;
use nelson_fk::kernel::{AngularRule, Kappa, ModelParams};
use nelson_fk::paths::{sample_path, BrownianPath};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn grid(n: usize) -> MomentumGrid {
    let mut p = ModelParams::default();
    p.kappa = Kappa::Finite(4);
    p.n_particles = n;
    p.mu = 0.2;
    p.grid.radial_nodes = 16;
    p.grid.angular = AngularRule::Lebedev(14);
    MomentumGrid::build(&p).unwrap()
}

fn run(g: &MomentumGrid, path: &BrownianPath, x: &[[f64; 3]], t_index: usize) -> PathEvaluation {
    let opts = EvalOptions { keep_fields: true, ..Default::default() };
    evaluate(g, path, x, t_index, &opts).unwrap()
}

fn moved(x: &[[f64; 3]], path: &BrownianPath, t_index: usize) -> Vec<[f64; 3]> {
    x.iter()
        .enumerate()
        .map(|(j, v)| {
            let a = path.particle(t_index, j);
            [v[0] + a[0], v[1] + a[1], v[2] + a[2]]
        })
        .collect()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn scale(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm()).fold(1e-300, f64::max)
}

fn inner(g: &MomentumGrid, a: &[C64], b: &[C64]) -> f64 {
    (0..g.len()).map(|n| g.weight[n] * (a[n].conj() * b[n]).re).sum()
}

fn offsets(n: usize, raw: &[f64]) -> Vec<[f64; 3]> {
    (0..n).map(|j| [raw[3 * j], raw[3 * j + 1], raw[3 * j + 2]]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reversal_swaps_fields_and_keeps_direct_action(
        seed in 0u64..1000, n in 1usize..3, steps in 1usize..40,
        raw in proptest::collection::vec(-2.0f64..2.0, 6),
    ) {
        let g = grid(n);
        let path = sample_path(seed, 0, steps, 0.01, n).unwrap();
        let x = offsets(n, &raw);
        let fwd = run(&g, &path, &x, steps);
        let rev = run(&g, &path.reverse(steps).unwrap(), &moved(&x, &path, steps), steps);
        let (fp, fm) = (fwd.u_plus.as_ref().unwrap(), fwd.u_minus.as_ref().unwrap());
        let (rp, rm) = (rev.u_plus.as_ref().unwrap(), rev.u_minus.as_ref().unwrap());
        prop_assert!(max_diff(rp, fm) <= 1e-12 * scale(fm));
        prop_assert!(max_diff(rm, fp) <= 1e-12 * scale(fp));
        let (uf, ur) = (fwd.breakdown().u_direct.unwrap(), rev.breakdown().u_direct.unwrap());
        prop_assert!((uf - ur).abs() <= 1e-12 * (1.0 + uf.abs()), "{} vs {}", uf, ur);
    }

    #[test]
    fn shift_and_flow_identities(
        seed in 0u64..1000, n in 1usize..3, t1 in 1usize..20, s1 in 1usize..20,
        raw in proptest::collection::vec(-2.0f64..2.0, 6),
    ) {
        let g = grid(n);
        let path = sample_path(seed, 1, t1 + s1, 0.01, n).unwrap();
        let x = offsets(n, &raw);
        let whole = run(&g, &path, &x, t1 + s1);
        let head = run(&g, &path, &x, t1);
        let tail = run(&g, &path.shift(t1).unwrap(), &moved(&x, &path, t1), s1);
        let t = t1 as f64 * 0.01;
        let s = s1 as f64 * 0.01;
        let um: Vec<C64> = (0..g.len())
            .map(|k| head.u_minus.as_ref().unwrap()[k] + (-t * g.omega[k]).exp() * tail.u_minus.as_ref().unwrap()[k])
            .collect();
        let up: Vec<C64> = (0..g.len())
            .map(|k| tail.u_plus.as_ref().unwrap()[k] + (-s * g.omega[k]).exp() * head.u_plus.as_ref().unwrap()[k])
            .collect();
        let wm = whole.u_minus.as_ref().unwrap();
        let wp = whole.u_plus.as_ref().unwrap();
        prop_assert!(max_diff(&um, wm) <= 1e-12 * scale(wm));
        prop_assert!(max_diff(&up, wp) <= 1e-12 * scale(wp));
        let cross = inner(&g, tail.u_minus.as_ref().unwrap(), head.u_plus.as_ref().unwrap());
        let lhs = tail.breakdown().u_direct.unwrap() + head.breakdown().u_direct.unwrap() + cross;
        let rhs = whole.breakdown().u_direct.unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
    }
}

#[test]
fn decomposed_action_obeys_flow_identity_up_to_discretization() {
    let g = grid(1);
    let fine = sample_path(17, 0, 2048, 1.0 / 2048.0, 1).unwrap();
    let x = [[0.0; 3]];
    let mut res = Vec::new();
    for f in [32usize, 8, 2] {
        let path = fine.coarsen(f).unwrap();
        let h = path.n_steps / 2;
        let whole = run(&g, &path, &x, 2 * h);
        let head = run(&g, &path, &x, h);
        let tail = run(&g, &path.shift(h).unwrap(), &moved(&x, &path, h), h);
        let cross = inner(&g, tail.u_minus.as_ref().unwrap(), head.u_plus.as_ref().unwrap());
        let r = tail.breakdown().u_total + head.breakdown().u_total + cross - whole.breakdown().u_total;
        res.push(r.abs());
    }
    assert!(res[2] < 0.1, "{res:?}");
}
