use proptest::prelude::*;

use sgflow::assembly::{hessian_det, CofactorEval};
use sgflow::fields::{C1Field, LagrangeField};
use sgflow::mesh::{Domain, Mesh};
use sgflow::mms::{convergence_rate, psi_errors};
use sgflow::sparse::{BorderedFactor, BorderedSystem, LuFactor, SparseMatrix};
use sgflow::transport::{FootPolicy, Transport, TransportConfig, TransportMethod};

fn unit_mesh(n: usize) -> Mesh {
    Mesh::new(Domain::square(1.0).unwrap(), n, n).unwrap()
}

/// Diagonally dominant matrix with random off-diagonal couplings.
fn dominant(n: usize, off: &[f64]) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        let mut row = 0.0;
        for (k, j) in [(i + 1) % n, (i + 3) % n].into_iter().enumerate() {
            if j != i {
                let v = off[(2 * i + k) % off.len()];
                t.push((i, j, v));
                row += v.abs();
            }
        }
        t.push((i, i, row + 1.0));
    }
    SparseMatrix::from_triplets(n, &t).unwrap()
}

/// 1-D Neumann Laplacian; its kernel is the constants.
fn neumann_laplacian(n: usize) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n - 1 {
        t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
    }
    SparseMatrix::from_triplets(n, &t).unwrap()
}

fn cubic(c: &[f64; 6]) -> impl Fn([f64; 2]) -> [f64; 4] + '_ {
    move |p: [f64; 2]| {
        let (x, y) = (p[0], p[1]);
        let v = c[0] + c[1] * x + c[2] * y * y + c[3] * x * x * x * y + c[4] * x * y * y * y + c[5] * x * x * y * y;
        let vx = c[1] + 3.0 * c[3] * x * x * y + c[4] * y * y * y + 2.0 * c[5] * x * y * y;
        let vy = 2.0 * c[2] * y + c[3] * x * x * x + 3.0 * c[4] * x * y * y + 2.0 * c[5] * x * x * y;
        let vxy = 3.0 * c[3] * x * x + 3.0 * c[4] * y * y + 4.0 * c[5] * x * y;
        [v, vx, vy, vxy]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lu_solves_to_small_residual(n in 2usize..40, off in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-10.0f64..10.0, 40)) {
        let a = dominant(n, &off);
        let b = &b[..n];
        let x = LuFactor::new(&a).unwrap().solve(b).unwrap();
        let r: f64 = a.matvec(&x).iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(r <= 1e-12 * bn.max(1.0), "{r}");
    }

    #[test]
    fn bordered_solves_meet_the_constraint(
        n in 3usize..30,
        w in prop::collection::vec(0.1f64..2.0, 30),
        b in prop::collection::vec(-1.0f64..1.0, 30),
        gamma in -5.0f64..5.0,
        k in 0usize..30,
    ) {
        let a = neumann_laplacian(n);
        let c = w[..n].to_vec();
        let sys = BorderedSystem { a: a.clone(), c: c.clone(), b: b[..n].to_vec(), gamma };
        let ones = vec![1.0; n];
        for f in [BorderedFactor::new(&a, &c).unwrap(), BorderedFactor::deflated(&a, &c, &ones, k % n, None).unwrap()] {
            let (x, lambda) = f.solve(&sys.b, gamma).unwrap();
            let cx: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
            prop_assert!((cx - gamma).abs() <= 1e-10 * gamma.abs().max(1.0));
            prop_assert!(sys.residual(&x, lambda) <= 1e-10);
        }
    }

    #[test]
    fn cofactor_identities(xx in -5.0f64..5.0, xy in -5.0f64..5.0, yy in -5.0f64..5.0) {
        let h = [xx, xy, yy];
        let phi = CofactorEval::from_hessian(h);
        prop_assert_eq!(phi.trace(), xx + yy);
        prop_assert_eq!(phi.det(), hessian_det(h));
        prop_assert!((phi.contract(h) - 2.0 * hessian_det(h)).abs() <= 1e-12 * (1.0 + xx.abs() + xy.abs() + yy.abs()).powi(2));
        let det = hessian_det(h);
        for (i, col) in [[xx, xy], [xy, yy]].into_iter().enumerate() {
            let pc = phi.apply(col);
            let unit = [(i == 0) as u8 as f64, (i == 1) as u8 as f64];
            prop_assert!((pc[0] - det * unit[0]).abs() < 1e-12 && (pc[1] - det * unit[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn power_laws_give_their_slope(c in 1e-4f64..10.0, s in -3.0f64..3.0, p0 in 1e-3f64..1e-1, n in 2usize..6) {
        let params: Vec<f64> = (0..n).map(|i| p0 / 2f64.powi(i as i32)).collect();
        let errors: Vec<f64> = params.iter().map(|p| c * p.powf(s)).collect();
        prop_assert!((convergence_rate(&errors, &params).unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn bicubics_are_reproduced_and_norms_nest(c in prop::array::uniform6(-2.0f64..2.0), d in prop::collection::vec(-1e-2f64..1e-2, 100), n in 2usize..5) {
        let mesh = unit_mesh(n);
        let f = cubic(&c);
        let exact = |p: [f64; 2]| {
            let (x, y) = (p[0], p[1]);
            let v = f(p);
            let xx = 6.0 * c[3] * x * y + 2.0 * c[5] * y * y;
            let yy = 2.0 * c[2] + 6.0 * c[4] * x * y + 2.0 * c[5] * x * x;
            sgflow::fields::C1Value { value: v[0], grad: [v[1], v[2]], hess: [xx, v[3], yy] }
        };
        let interp = C1Field::interpolate(&mesh, &f);
        let e = psi_errors(&interp, exact);
        prop_assert!(e.l2 < 1e-12 && e.h1_semi < 1e-11 && e.h2_semi < 1e-10, "{e:?}");

        let mut perturbed = interp.clone();
        for (k, v) in perturbed.coeffs.iter_mut().enumerate() {
            *v += d[k % d.len()];
        }
        let e = psi_errors(&perturbed, exact);
        prop_assert!(e.l2 >= 0.0 && e.h1() >= e.l2 && e.h2() >= e.h1());
    }

    #[test]
    fn lagrange_interpolation_reproduces_its_space(k in 1usize..=3, c in prop::array::uniform4(-2.0f64..2.0), n in 1usize..4) {
        let mesh = unit_mesh(n);
        let f = |p: [f64; 2]| c[0] + c[1] * p[0].powi(k as i32) + c[2] * p[1].powi(k as i32) + c[3] * (p[0] * p[1]).powi(k as i32);
        let a = LagrangeField::interpolate(&mesh, k, f).unwrap();
        for p in [[0.13, 0.71], [0.5, 0.5], [0.999, 0.01], [0.37, 0.42]] {
            prop_assert!((a.eval(p).unwrap() - f(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn nodal_transport_keeps_values_within_bounds(
        c in prop::array::uniform6(-1.0f64..1.0),
        vals in prop::collection::vec(0.0f64..1.0, 49),
        dt in 1e-3f64..5e-2,
    ) {
        let mesh = unit_mesh(6);
        let psi = C1Field::interpolate(&mesh, cubic(&c));
        let alpha = LagrangeField::from_coeffs(&mesh, 1, vals.clone()).unwrap();
        let cfg = TransportConfig { dt, policy: FootPolicy::Clamp, degree: 1, method: TransportMethod::NodalInterpolation };
        let tr = Transport::new(&mesh, cfg).unwrap();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let next = tr.step(&alpha, &psi, None, &|p| alpha.eval(p).unwrap(), None).unwrap();
        for v in &next.coeffs {
            prop_assert!(*v >= lo - 1e-15 && *v <= hi + 1e-15);
        }
    }

    #[test]
    fn projection_transport_keeps_constants(c in prop::array::uniform6(-1.0f64..1.0), level in -3.0f64..3.0, k in 1usize..=3) {
        let mesh = unit_mesh(4);
        let psi = C1Field::interpolate(&mesh, cubic(&c));
        let alpha = LagrangeField::interpolate(&mesh, k, |_| level).unwrap();
        let cfg = TransportConfig { dt: 0.01, policy: FootPolicy::Clamp, degree: k, method: TransportMethod::L2Projection };
        let next = Transport::new(&mesh, cfg).unwrap().step(&alpha, &psi, None, &|_| level, None).unwrap();
        for v in &next.coeffs {
            prop_assert!((v - level).abs() < 1e-12 * level.abs().max(1.0));
        }
    }
}
