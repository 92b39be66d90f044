use kinetic_wasm::*;

#[test]
fn boundary_is_closed_and_interleaved() {
    let b = stability_boundary("rk44", 64).unwrap();
    assert_eq!(b.len(), 2 * 65);
    assert_eq!(b[..2], b[128..]);
    // angle π/2 sits at index 16: the imaginary-axis crossing 2√2
    assert!((b[33] - 2.0 * 2f64.sqrt()).abs() < 1e-5, "{}", b[33]);
}

#[test]
fn unknown_names_are_errors() {
    assert!(stability_boundary("rk99", 64).is_err());
    assert!(stability_boundary("rk44", 2).is_err());
    assert!(ymax_curve("heun", 0.01, 1.0, 0.1).is_err());
    assert!(ymax_curve("krogstad", 0.01, 1.0, 0.0).is_err());
    assert!(sigma_scan("rk44", 10).is_err());
}

#[test]
fn lawson_ymax_matches_closed_forms() {
    assert!((lawson_ymax("rk33").unwrap() - 3f64.sqrt()).abs() < 1e-6);
    assert_eq!(lawson_ymax("rk22").unwrap(), 0.0);
}

#[test]
fn ymax_curve_shapes() {
    let c = ymax_curve("exprk22", 1e-2, 2.0, 0.5).unwrap();
    assert_eq!(c.a_dt(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    let y = c.y_max();
    for i in 0..y.len() {
        assert_eq!(y[i], c.y_plus()[i].min(-c.y_minus()[i]));
    }
    assert_eq!(c.min(), y.iter().copied().fold(f64::INFINITY, f64::min));
    assert!(c.a_dt().contains(&c.argmin()));
}

#[test]
fn sigma_locus_touches_boundary() {
    let r = sigma_scan("rk44", 256).unwrap();
    assert!((r.sigma() - 1.73).abs() < 0.02);
    assert_eq!(r.angles().len(), r.sigmas().len());
    assert_eq!(r.locus().len(), 2 * r.angles().len());
    assert_eq!(
        r.sigmas().iter().copied().fold(f64::INFINITY, f64::min),
        r.sigma()
    );
}

#[test]
fn name_lists() {
    assert_eq!(tableau_keys(), ["rk44", "rk33", "rk32best", "rk22"]);
    assert_eq!(exponential_methods().len(), 4);
}
