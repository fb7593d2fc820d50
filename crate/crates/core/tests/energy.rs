use std::sync::Arc;

use proptest::prelude::*;
use subsnake_core::energy::{
    gradient_energy, gradient_energy_grad, gradient_energy_grad_filtered, region_energy, region_energy_grad,
};
use subsnake_core::imaging::{build_row_prefix, compute_derivative_fields};
use subsnake_core::*;

fn gaussian_blob(n: usize, sigma: f64) -> GrayImage {
    let c = (n as f64 - 1.0) / 2.0;
    GrayImage::from_fn(n, n, |r, col| {
        let d2 = (r as f64 - c).powi(2) + (col as f64 - c).powi(2);
        220.0 - 170.0 * (-d2 / (2.0 * sigma * sigma)).exp()
    })
    .unwrap()
}

/// Dark disc with a smooth rim of width about `w` pixels.
fn blurred_disc(n: usize, radius: f64, w: f64) -> GrayImage {
    let c = (n as f64 - 1.0) / 2.0;
    GrayImage::from_fn(n, n, |r, col| {
        let d = ((r as f64 - c).powi(2) + (col as f64 - c).powi(2)).sqrt();
        30.0 + 190.0 / (1.0 + (-(d - radius) / w).exp())
    })
    .unwrap()
}

fn wobbly(scheme: Scheme, center: Point, radius: f64, m: usize, seed: u64) -> ControlPolygon {
    let mut s = seed;
    let mut rnd = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let v = (0..m)
        .map(|i| {
            let a = 0.3 + i as f64 * std::f64::consts::TAU / m as f64;
            let r = radius * (1.0 + 0.2 * rnd());
            Point::new(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect();
    ControlPolygon::new(scheme, v).unwrap()
}

fn perturbed(p: &ControlPolygon, k: usize, h: f64) -> ControlPolygon {
    let mut v = p.vertices().to_vec();
    if k.is_multiple_of(2) {
        v[k / 2].x += h;
    } else {
        v[k / 2].y += h;
    }
    ControlPolygon::new(p.scheme(), v).unwrap()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn assert_matches_central_differences(p: &ControlPolygon, table: &BasicFunctionTable, fields: &DerivativeFields) {
    let s = evaluate_curve(p, table).unwrap();
    let g = gradient_energy_grad(&s, table, fields);
    let e = |q: &ControlPolygon| gradient_energy(&evaluate_curve(q, table).unwrap(), fields);
    let h = 1e-3;
    for (k, gk) in g.iter().enumerate() {
        let fd = (e(&perturbed(p, k, h)) - e(&perturbed(p, k, -h))) / (2.0 * h);
        if fd.abs() > 1e-6 {
            let rel = (gk - fd).abs() / fd.abs();
            assert!(rel < 1e-2, "{:?} component {k}: {gk} vs {fd} ({rel})", p.scheme());
        }
    }
}

#[test]
fn gradient_energy_matches_central_differences() {
    let img = gaussian_blob(256, 35.0);
    let fields = compute_derivative_fields(&img, 2).unwrap();
    for scheme in [Scheme::four_point(), Scheme::CubicBSpline] {
        let table = BasicFunctionTable::new(scheme, 4).unwrap();
        for seed in 1..6 {
            let p = wobbly(scheme, Point::new(125.63, 131.61), 45.0, 8, seed);
            assert_matches_central_differences(&p, &table, &fields);
        }
    }
}

// Control vertices on lattice points put samples exactly on grid lines, where
// the interpolated field has a kink.
#[test]
fn gradient_energy_matches_central_differences_on_grid_lines() {
    let img = gaussian_blob(256, 35.0);
    let fields = compute_derivative_fields(&img, 2).unwrap();
    let v: Vec<Point> = [(170, 128), (158, 160), (128, 172), (97, 158), (84, 128), (99, 96), (128, 83), (157, 99)]
        .iter()
        .map(|&(x, y)| Point::new(x as f64, y as f64))
        .collect();
    for scheme in [Scheme::four_point(), Scheme::CubicBSpline] {
        let table = BasicFunctionTable::new(scheme, 4).unwrap();
        assert_matches_central_differences(&ControlPolygon::new(scheme, v.clone()).unwrap(), &table, &fields);
    }
}

#[test]
fn filtered_gradient_is_close_on_smooth_images() {
    let img = gaussian_blob(256, 35.0);
    let fields = compute_derivative_fields(&img, 2).unwrap();
    for scheme in [Scheme::four_point(), Scheme::CubicBSpline] {
        let table = BasicFunctionTable::new(scheme, 4).unwrap();
        let s = evaluate_curve(&wobbly(scheme, Point::new(125.63, 131.61), 45.0, 8, 3), &table).unwrap();
        let exact = gradient_energy_grad(&s, &table, &fields);
        let filtered = gradient_energy_grad_filtered(&s, &table, &fields);
        let diff: f64 = exact.iter().zip(&filtered).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / norm < 0.05, "{scheme:?}: {}", diff / norm);
        assert!(cosine(&exact, &filtered) > 0.99);
    }
}

#[test]
fn gradient_energy_sign_and_flatness() {
    let disc = blurred_disc(128, 30.0, 1.0);
    let fields = compute_derivative_fields(&disc, 1).unwrap();
    let table = BasicFunctionTable::new(Scheme::four_point(), 4).unwrap();
    let p = ControlPolygon::circle(Scheme::four_point(), Point::new(63.5, 63.5), 30.0, 10).unwrap();
    let s = evaluate_curve(&p, &table).unwrap();
    let ccw = if s.signed_area() > 0.0 { s } else { evaluate_curve(&p.reversed(), &table).unwrap() };
    assert!(gradient_energy(&ccw, &fields) < 0.0);

    let flat = GrayImage::from_fn(64, 64, |_, _| 77.0).unwrap();
    let ff = compute_derivative_fields(&flat, 1).unwrap();
    let p = ControlPolygon::circle(Scheme::four_point(), Point::new(30.0, 33.0), 12.0, 7).unwrap();
    let s = evaluate_curve(&p, &table).unwrap();
    assert_eq!(gradient_energy(&s, &ff), 0.0);
    assert!(gradient_energy_grad(&s, &table, &ff).iter().all(|&g| g == 0.0));
}

#[test]
fn gradient_energy_grad_is_translation_invariant() {
    let big = gaussian_blob(200, 25.0);
    let (dr, dc) = (7usize, 11usize);
    let shifted = GrayImage::from_fn(200, 200, |r, c| {
        if r >= dr && c >= dc { big.get(r - dr, c - dc) } else { 220.0 }
    })
    .unwrap();
    let fa = compute_derivative_fields(&big, 2).unwrap();
    let fb = compute_derivative_fields(&shifted, 2).unwrap();
    let table = BasicFunctionTable::new(Scheme::CubicBSpline, 4).unwrap();
    let p = wobbly(Scheme::CubicBSpline, Point::new(95.0, 92.0), 30.0, 9, 5);
    let q = ControlPolygon::new(
        Scheme::CubicBSpline,
        p.vertices().iter().map(|v| Point::new(v.x + dr as f64, v.y + dc as f64)).collect(),
    )
    .unwrap();
    let ga = gradient_energy_grad(&evaluate_curve(&p, &table).unwrap(), &table, &fa);
    let gb = gradient_energy_grad(&evaluate_curve(&q, &table).unwrap(), &table, &fb);
    for (a, b) in ga.iter().zip(&gb) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn gradient_energy_grad_is_local() {
    let img = gaussian_blob(256, 35.0);
    let table = BasicFunctionTable::new(Scheme::four_point(), 4).unwrap();
    let p = wobbly(Scheme::four_point(), Point::new(128.0, 128.0), 60.0, 12, 9);
    let s = evaluate_curve(&p, &table).unwrap();
    let fields = compute_derivative_fields(&img, 2).unwrap();
    let g = gradient_energy_grad(&s, &table, &fields);
    // Keep the image only near the samples that control point 0 influences.
    let near: Vec<Point> = table.support_of(0, 12).map(|(i, _)| s.points[i]).collect();
    let q = 2.0;
    let reach = 2.0 * q + 3.0;
    let masked = GrayImage::from_fn(256, 256, |r, c| {
        let keep = near.iter().any(|p| (p.x - r as f64).abs() <= reach && (p.y - c as f64).abs() <= reach);
        if keep { img.get(r, c) } else { 0.0 }
    })
    .unwrap();
    let mf = compute_derivative_fields(&masked, 2).unwrap();
    let gm = gradient_energy_grad(&s, &table, &mf);
    assert_eq!(g[0], gm[0]);
    assert_eq!(g[1], gm[1]);
}

#[test]
fn region_gradient_points_like_smoothed_differences() {
    let img = blurred_disc(128, 28.0, 2.5);
    let prefix = build_row_prefix(&img);
    let region = RegionBox::full(128, 128);
    for scheme in [Scheme::four_point(), Scheme::CubicBSpline] {
        let table = BasicFunctionTable::new(scheme, 4).unwrap();
        for (radius, seed) in [(38.0, 1), (20.0, 2), (33.0, 3)] {
            let p = wobbly(scheme, Point::new(62.0, 65.0), radius, 8, seed);
            let p = if evaluate_curve(&p, &table).unwrap().signed_area() < 0.0 { p.reversed() } else { p };
            let s = evaluate_curve(&p, &table).unwrap();
            let g = region_energy_grad(&s, &table, &img, &region, &prefix).unwrap();
            let h = 0.5;
            let e = |q: &ControlPolygon| region_energy(&evaluate_curve(q, &table).unwrap(), &region, &prefix).unwrap();
            let fd: Vec<f64> =
                (0..g.len()).map(|k| (e(&perturbed(&p, k, h)) - e(&perturbed(&p, k, -h))) / (2.0 * h)).collect();
            let cos = cosine(&g, &fd);
            assert!(cos > 0.9, "{scheme:?} r={radius}: cosine {cos}");
        }
    }
}

#[test]
fn region_energy_reference_values() {
    let n = 128;
    let disc = GrayImage::from_fn(n, n, |r, c| {
        let d2 = (r as f64 - 64.0).powi(2) + (c as f64 - 64.0).powi(2);
        if d2 <= 900.0 { 0.0 } else { 255.0 }
    })
    .unwrap();
    let prefix = build_row_prefix(&disc);
    let region = RegionBox::full(n, n);
    let table = BasicFunctionTable::new(Scheme::four_point(), 5).unwrap();
    let on = ControlPolygon::circle(Scheme::four_point(), Point::new(64.0, 64.0), 30.0, 16).unwrap();
    let s = evaluate_curve(&on, &table).unwrap();
    let e = region_energy(&s, &region, &prefix).unwrap();
    assert!((e + 65025.0).abs() < 0.02 * 65025.0, "{e}");

    let flat = GrayImage::from_fn(n, n, |_, _| 99.0).unwrap();
    let fp = build_row_prefix(&flat);
    assert_eq!(region_energy(&s, &region, &fp).unwrap(), 0.0);
    assert!(region_energy_grad(&s, &table, &flat, &region, &fp).unwrap().iter().all(|&g| g == 0.0));
}

#[test]
fn region_gradient_vanishes_inside_uniform_interior() {
    // Snake well inside a uniform dark disc: every boundary sample sees the
    // same intensity, so G - H·I is the same everywhere and the
    // contributions cancel around the closed curve.
    let img = blurred_disc(160, 60.0, 1.0);
    let prefix = build_row_prefix(&img);
    let region = RegionBox::full(160, 160);
    let table = BasicFunctionTable::new(Scheme::four_point(), 4).unwrap();
    let p = ControlPolygon::circle(Scheme::four_point(), Point::new(79.5, 79.5), 20.0, 8).unwrap();
    let p = if evaluate_curve(&p, &table).unwrap().signed_area() < 0.0 { p.reversed() } else { p };
    let s = evaluate_curve(&p, &table).unwrap();
    let g = region_energy_grad(&s, &table, &img, &region, &prefix).unwrap();
    // A circle under uniform pressure moves radially: the gradient is
    // nonzero but each control point's component is along its radius.
    for j in 0..8 {
        let v = p.vertices()[j];
        let radial = Point::new(v.x - 79.5, v.y - 79.5);
        let gj = Point::new(g[2 * j], g[2 * j + 1]);
        assert!(radial.cross(gj).abs() <= 1e-6 * radial.norm() * gj.norm().max(1e-12));
    }
}

#[test]
fn alpha_endpoints_and_midpoint() {
    let img = blurred_disc(96, 22.0, 1.5);
    let table = Arc::new(BasicFunctionTable::new(Scheme::CubicBSpline, 4).unwrap());
    let model = EnergyModel::new(&img, table.clone(), EnergyParams::new(RegionBox::full(96, 96))).unwrap();
    let p = wobbly(Scheme::CubicBSpline, Point::new(47.0, 48.0), 28.0, 7, 3);
    let p = model.normalize_orientation(&p).unwrap();
    let s = evaluate_curve(&p, &table).unwrap();
    let eg = gradient_energy(&s, model.fields());
    let er = region_energy(&s, &model.params().region, model.prefix()).unwrap();
    let one = model.evaluate(p.vertices(), 1.0).unwrap();
    let zero = model.evaluate(p.vertices(), 0.0).unwrap();
    let half = model.evaluate(p.vertices(), 0.5).unwrap();
    assert_eq!(one.value, eg);
    assert_eq!(zero.value, er);
    assert_eq!(one.grad, gradient_energy_grad(&s, &table, model.fields()));
    assert_eq!(
        zero.grad,
        region_energy_grad(&s, &table, model.image(), &model.params().region, model.prefix()).unwrap()
    );
    assert!((half.value - 0.5 * (eg + er)).abs() <= 1e-12 * er.abs());
}

#[test]
fn bright_object_polarity_matches_negated_image() {
    let img = blurred_disc(96, 20.0, 1.5);
    let neg = img.inverted();
    let table = Arc::new(BasicFunctionTable::new(Scheme::four_point(), 4).unwrap());
    let mut params = EnergyParams::new(RegionBox::full(96, 96));
    params.polarity = Polarity::BrightObject;
    let bright = EnergyModel::new(&neg, table.clone(), params).unwrap();
    params.polarity = Polarity::DarkObject;
    let dark = EnergyModel::new(&img, table, params).unwrap();
    let p = ControlPolygon::circle(Scheme::four_point(), Point::new(47.5, 47.5), 25.0, 8).unwrap();
    let p = dark.normalize_orientation(&p).unwrap();
    let (b, d) = (bright.evaluate(p.vertices(), 0.3).unwrap(), dark.evaluate(p.vertices(), 0.3).unwrap());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-6);
    assert!(close(b.value, d.value) && close(b.e_grad, d.e_grad) && close(b.e_reg, d.e_reg));
    let scale = d.grad_norm();
    assert!(b.grad.iter().zip(&d.grad).all(|(x, y)| (x - y).abs() <= 1e-9 * scale));
}

#[test]
fn degenerate_regions_are_errors() {
    let img = blurred_disc(64, 15.0, 1.5);
    let table = Arc::new(BasicFunctionTable::new(Scheme::four_point(), 4).unwrap());
    let model = EnergyModel::new(&img, table, EnergyParams::new(RegionBox::new(10, 50, 10, 50).unwrap())).unwrap();
    // larger than the box
    let big = ControlPolygon::circle(Scheme::four_point(), Point::new(31.5, 31.5), 31.0, 8).unwrap();
    let big = model.normalize_orientation(&big).unwrap();
    assert!(matches!(model.evaluate(big.vertices(), 0.5), Err(Error::DegenerateRegion { .. })));
    // collapsed between rows
    let flat = ControlPolygon::new(
        Scheme::four_point(),
        vec![Point::new(20.2, 10.0), Point::new(20.4, 20.0), Point::new(20.6, 30.0), Point::new(20.4, 20.0)],
    )
    .unwrap();
    assert!(matches!(model.evaluate(flat.vertices(), 0.5), Err(Error::DegenerateRegion { .. })));
}

fn random_polygon() -> impl Strategy<Value = (Vec<(f64, f64)>, f64, f64)> {
    (
        prop::collection::vec((-6.0..6.0f64, -6.0..6.0f64), 6..10),
        20.0..60.0f64,
        0.3..2.5f64,
    )
}

fn polygon_from(jitter: &[(f64, f64)], radius: f64, scheme: Scheme) -> ControlPolygon {
    let m = jitter.len();
    let v = jitter
        .iter()
        .enumerate()
        .map(|(i, &(dx, dy))| {
            let a = 0.3 + i as f64 * std::f64::consts::TAU / m as f64;
            Point::new(80.0 + radius * a.cos() + dx, 80.0 + radius * a.sin() + dy)
        })
        .collect();
    ControlPolygon::new(scheme, v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn region_energy_shift_and_scale((jitter, radius, lambda) in random_polygon(), shift in 0.0..40.0f64) {
        let base = blurred_disc(160, 35.0, 2.0).map(|v| v * 0.8).unwrap();
        let table = BasicFunctionTable::new(Scheme::four_point(), 4).unwrap();
        let p = polygon_from(&jitter, radius, Scheme::four_point());
        let s = evaluate_curve(&p, &table).unwrap();
        let region = RegionBox::full(160, 160);
        let e0 = region_energy(&s, &region, &build_row_prefix(&base));
        prop_assume!(e0.is_ok());
        let e0 = e0.unwrap();
        let shifted = base.map(|v| v + shift).unwrap();
        let es = region_energy(&s, &region, &build_row_prefix(&shifted)).unwrap();
        prop_assert!((es - e0).abs() <= 1e-6 * e0.abs().max(1.0));
        let scaled = base.map(|v| v * lambda).unwrap();
        let el = region_energy(&s, &region, &build_row_prefix(&scaled)).unwrap();
        prop_assert!((el - lambda * lambda * e0).abs() <= 1e-6 * (lambda * lambda * e0).abs().max(1.0));
        prop_assert!(e0 <= 0.0);
    }

    #[test]
    fn total_energy_scales_with_intensity((jitter, radius, lambda) in random_polygon()) {
        let base = blurred_disc(160, 35.0, 2.0).map(|v| v * 0.8).unwrap();
        let scaled = base.map(|v| v * lambda).unwrap();
        let table = Arc::new(BasicFunctionTable::new(Scheme::CubicBSpline, 4).unwrap());
        let params = EnergyParams::new(RegionBox::full(160, 160));
        let a = EnergyModel::new(&base, table.clone(), params).unwrap();
        let b = EnergyModel::new(&scaled, table, params).unwrap();
        let p = polygon_from(&jitter, radius, Scheme::CubicBSpline);
        let p = match a.normalize_orientation(&p) { Ok(p) => p, Err(_) => return Ok(()) };
        let (ga, ra) = match (a.evaluate(p.vertices(), 1.0), a.evaluate(p.vertices(), 0.0)) {
            (Ok(g), Ok(r)) => (g, r),
            _ => return Ok(()),
        };
        let gb = b.evaluate(p.vertices(), 1.0).unwrap();
        let rb = b.evaluate(p.vertices(), 0.0).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1e-6);
        prop_assert!(close(gb.value, lambda * ga.value));
        prop_assert!(close(rb.value, lambda * lambda * ra.value));
        for k in 0..ga.grad.len() {
            prop_assert!(close(gb.grad[k], lambda * ga.grad[k]));
            prop_assert!(close(rb.grad[k], lambda * lambda * ra.grad[k]));
        }
        prop_assert!(ga.grad.iter().chain(&ra.grad).all(|g| g.is_finite()));
    }
}
