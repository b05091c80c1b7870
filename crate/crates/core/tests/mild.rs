use critdrift::field::SpaceTimeField;
use critdrift::grid::Grid1d;
use critdrift::heat::compute_constants;
use critdrift::mild::{
    check_gradient_bound, solve_mild, solve_transform_pde, solver_time_grid, time_holder_check,
    MildOptions,
};
use critdrift::spaces::{mirror_time, weighted_norm};
use critdrift::ExponentPair;

fn gauss(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn setup() -> (ExponentPair, Grid1d, Vec<f64>) {
    let e = ExponentPair::new(2.0, 4.0, 1, 1.0).unwrap();
    let g = Grid1d::symmetric(12.0, 0.05).unwrap();
    (e, g, solver_time_grid(1.0, &MildOptions::default()))
}

#[test]
fn zero_data_gives_zero_solution() {
    let (e, g, t) = setup();
    let f = SpaceTimeField::zeros(t, g, 1.0).unwrap();
    let sol = solve_mild(&f, None, &e, &MildOptions::default()).unwrap();
    assert_eq!(sol.iterations, 1);
    assert_eq!(sol.sup_u(), 0.0);
    assert_eq!(sol.sup_grad(), 0.0);
    let rep = check_gradient_bound(&sol, &f, None, 0.05).unwrap();
    assert!(rep.pass && rep.lhs == 0.0 && rep.rhs == 0.0);
    assert!(time_holder_check(&sol, &e).pass);
}

#[test]
fn duhamel_gaussian_oracle() {
    let (e, g, t) = setup();
    let f = SpaceTimeField::from_fn(t, g, 1.0, |_, x| gauss(x)).unwrap();
    let sol = solve_mild(&f, None, &e, &MildOptions::default()).unwrap();
    // int_0^1 N(0, 1 + s)(0) ds
    let want = (2.0 * std::f64::consts::PI).powf(-0.5) * 2.0 * (2f64.sqrt() - 1.0);
    let last = sol.u.n_times() - 1;
    let got = sol.u.slice(last)[240];
    println!("u(1,0) = {got}, oracle {want}");
    assert!((got - want).abs() < 2e-3);
    assert!(sol.u.slice(0).iter().all(|&v| v == 0.0));
    // derivative of the closed form at x = 1
    let dgot = sol.grad_u.slice(last)[260];
    let dwant: f64 = {
        use critdrift::quadrature::GaussLegendre;
        GaussLegendre::new(64).integrate(0.0, 1.0, |s| {
            let v = 1.0 + s;
            -1.0 / v * (-0.5 / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
        })
    };
    println!("u_x(1,1) = {dgot}, oracle {dwant}");
    assert!((dgot - dwant).abs() < 2e-3);
    println!("consistency {}", sol.gradient_consistency());
    assert!(sol.gradient_consistency() < 10.0 * g.h);
    let rep = check_gradient_bound(&sol, &f, None, 0.05).unwrap();
    println!("{rep:?}");
    assert!(rep.pass && rep.grad_pass);
    let h = time_holder_check(&sol, &e);
    println!("{h:?}");
    assert!(h.pass && h.slope.unwrap() >= 0.45);
}

#[test]
fn small_transport_contracts() {
    let (e, g, t) = setup();
    let k = compute_constants(&e).unwrap();
    let f = SpaceTimeField::from_fn(t.clone(), g, 1.0, |_, x| gauss(x)).unwrap();
    let shape = SpaceTimeField::from_fn(t, g, 1.0, |s, x| {
        if s > 0.0 { s.powf(-0.25) * (-(x - 0.5).powi(2)).exp() } else { 0.0 }
    })
    .unwrap();
    let c = 0.4 / k.c0 / weighted_norm(&shape, &e).unwrap();
    let gfield = shape.scaled(c);
    let sol = solve_mild(&f, Some(&gfield), &e, &MildOptions::default()).unwrap();
    println!("iters {} ratio {} residual {} hist {:?}", sol.iterations, sol.contraction_ratio, sol.residual, sol.history);
    assert!(sol.contraction_ratio <= 0.45);
    assert!(sol.residual <= 1e-10);
    let rep = check_gradient_bound(&sol, &f, Some(&gfield), 0.05).unwrap();
    assert!(rep.pass);

    let over = shape.scaled(1.01 / k.c0 / weighted_norm(&shape, &e).unwrap());
    let err = solve_mild(&f, Some(&over), &e, &MildOptions::default()).unwrap_err();
    assert!(err.to_string().contains("smallness violated"), "{err}");

}

#[test]
fn transform_pde_gives_diffeomorphism() {
    let (e, g, t) = setup();
    let k = compute_constants(&e).unwrap();
    let shape = SpaceTimeField::from_fn(t, g, 1.0, |s, x| {
        if s > 0.0 { s.powf(-0.25) * (-(x - 0.5).powi(2)).exp() } else { 0.0 }
    })
    .unwrap();
    let unit = shape.scaled(1.0 / weighted_norm(&shape, &e).unwrap());
    // forward-time drift, singular at T
    let b1 = mirror_time(&unit.scaled(0.3 / k.c0)).unwrap();
    let tr = solve_transform_pde(&b1, &e, &MildOptions::default()).unwrap();
    assert!((tr.g_norm - 0.3 / k.c0).abs() < 1e-9 / k.c0);
    assert!((tr.bound - 0.3 / 0.7).abs() < 1e-6);
    assert!(tr.measured_sup <= tr.bound);
    assert!(tr.grad_phi_min > tr.delta && tr.grad_phi_max < 2.0 - tr.delta);
    assert!(tr.diffeomorphism);

    let over = mirror_time(&unit.scaled(0.6 / k.c0)).unwrap();
    let err = solve_transform_pde(&over, &e, &MildOptions::default()).unwrap_err();
    assert!(err.to_string().contains("smallness violated"), "{err}");
}
