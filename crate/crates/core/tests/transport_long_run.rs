//! The blob of Test 3 under the rotation of `ψ = 0` for 100 steps.

use sgflow::fields::{C1Field, LagrangeField};
use sgflow::mesh::{Domain, Mesh};
use sgflow::mms::test3_alpha0;
use sgflow::transport::{FootPolicy, Transport, TransportConfig, TransportMethod};

#[test]
fn cubic_projection_does_not_drift() {
    let mesh = Mesh::new(Domain::square(6.0).unwrap(), 80, 80).unwrap();
    let psi = C1Field::zeros(&mesh);
    let cfg = TransportConfig { dt: 0.001, policy: FootPolicy::Clamp, degree: 3, method: TransportMethod::L2Projection };
    let tr = Transport::new(&mesh, cfg).unwrap();
    let mut a = LagrangeField::interpolate(&mesh, 3, test3_alpha0).unwrap();
    let top = a.max_abs_dof();
    for _ in 0..100 {
        a = tr.step(&a, &psi, None, &|_| 0.0, None).unwrap();
    }
    assert!(a.max_abs_dof() <= 1.01 * top, "{} vs {top}", a.max_abs_dof());
    assert!(a.min_dof() > -0.02 * top, "{}", a.min_dof());
}
