use proptest::prelude::*;
use subsnake_core::imaging::{bilinear_sample, build_row_prefix, compute_derivative_fields, default_halfwidth, Bilinear};
use subsnake_core::*;

#[test]
fn linear_image_has_exact_derivatives_inside() {
    let img = GrayImage::from_fn(40, 50, |r, c| 10.0 + 1.5 * r as f64 - 0.75 * c as f64).unwrap();
    for q in 1..=4 {
        let f = compute_derivative_fields(&img, q).unwrap();
        for r in q..40 - q {
            for c in q..50 - q {
                assert!((f.ix.get(r, c) - 1.5).abs() < 1e-12);
                assert!((f.iy.get(r, c) + 0.75).abs() < 1e-12);
            }
        }
        // Second derivatives filter the first, so their exact band is 2q wide.
        for r in 2 * q..40 - 2 * q {
            for c in 2 * q..50 - 2 * q {
                assert!(f.ixx.get(r, c).abs() < 1e-12 && f.ixy.get(r, c).abs() < 1e-12 && f.iyy.get(r, c).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn quadratic_image_second_derivatives() {
    let img = GrayImage::from_fn(30, 30, |r, c| {
        let (x, y) = (r as f64, c as f64);
        0.05 * x * x + 0.02 * x * y - 0.03 * y * y
    })
    .unwrap();
    let f = compute_derivative_fields(&img, 2).unwrap();
    for r in 5..25 {
        for c in 5..25 {
            assert!((f.ix.get(r, c) - (0.1 * r as f64 + 0.02 * c as f64)).abs() < 1e-9);
            assert!((f.iy.get(r, c) - (0.02 * r as f64 - 0.06 * c as f64)).abs() < 1e-9);
            assert!((f.ixx.get(r, c) - 0.1).abs() < 1e-9);
            assert!((f.ixy.get(r, c) - 0.02).abs() < 1e-9);
            assert!((f.iyy.get(r, c) + 0.06).abs() < 1e-9);
        }
    }
}

#[test]
fn filter_width_is_checked() {
    let img = GrayImage::from_fn(9, 20, |r, c| (r * c) as f64).unwrap();
    assert!(compute_derivative_fields(&img, 0).is_err());
    assert!(compute_derivative_fields(&img, 4).is_err());
    assert!(compute_derivative_fields(&img, 3).is_ok());
    assert!(default_halfwidth(256, 256) >= 1);
}

#[test]
fn image_validation() {
    assert!(GrayImage::new(Grid::zeros(2, 10)).is_err());
    assert!(GrayImage::from_fn(5, 5, |r, _| if r == 2 { f64::NAN } else { 0.0 }).is_err());
    let img = GrayImage::from_fn(5, 5, |r, c| (r + c) as f64).unwrap();
    assert_eq!(img.inverted().get(1, 2), 252.0);
}

#[test]
fn bilinear_gradient_averages_across_grid_lines() {
    // |x - 3| has slopes -1 and +1 either side of row 3.
    let g = Grid::from_fn(8, 8, |r, _| (r as f64 - 3.0).abs());
    let (dx, dy) = Bilinear::at(8, 8, 3.0, 4.5).gradient(&g);
    assert_eq!((dx, dy), (0.0, 0.0));
    let (dx, _) = Bilinear::at(8, 8, 3.25, 4.5).gradient(&g);
    assert_eq!(dx, 1.0);
    let (dx, _) = Bilinear::at(8, 8, 2.75, 4.5).gradient(&g);
    assert_eq!(dx, -1.0);
}

proptest! {
    #[test]
    fn bilinear_reproduces_grid_and_bilinear_functions(
        coef in prop::array::uniform4(-5.0..5.0f64),
        x in 0.0..11.0f64,
        y in 0.0..13.0f64,
    ) {
        let f = |x: f64, y: f64| coef[0] + coef[1] * x + coef[2] * y + coef[3] * x * y;
        let g = Grid::from_fn(12, 14, |r, c| f(r as f64, c as f64));
        prop_assert!((bilinear_sample(&g, x, y) - f(x, y)).abs() < 1e-9);
        let (dx, dy) = Bilinear::at(12, 14, x, y).gradient(&g);
        prop_assert!((dx - (coef[1] + coef[3] * y)).abs() < 1e-9);
        prop_assert!((dy - (coef[2] + coef[3] * x)).abs() < 1e-9);
        let (r, c) = (x.floor() as usize, y.floor() as usize);
        prop_assert_eq!(bilinear_sample(&g, r as f64, c as f64), g.get(r, c));
    }

    #[test]
    fn clamped_outside(x in -20.0..40.0f64, y in -20.0..40.0f64) {
        let g = Grid::from_fn(10, 10, |r, c| (r * 10 + c) as f64);
        let v = bilinear_sample(&g, x, y);
        prop_assert_eq!(v, bilinear_sample(&g, x.clamp(0.0, 9.0), y.clamp(0.0, 9.0)));
    }

    #[test]
    fn prefix_rectangles_match_direct_sums(
        vals in prop::collection::vec(0.0..255.0f64, 7 * 9),
        r0 in 0usize..7, r1 in 0usize..7, c0 in 0usize..9, c1 in 0usize..9,
    ) {
        let img = GrayImage::new(Grid::from_vec(7, 9, vals.clone()).unwrap()).unwrap();
        let p = build_row_prefix(&img);
        let (ra, rb) = (r0.min(r1), r0.max(r1));
        let (ca, cb) = (c0.min(c1), c0.max(c1));
        let direct: f64 = (ra..=rb).flat_map(|r| (ca..=cb).map(move |c| (r, c))).map(|(r, c)| vals[r * 9 + c]).sum();
        prop_assert!((p.rect_sum(ra..=rb, ca..=cb) - direct).abs() < 1e-9);
        prop_assert_eq!(p.get(r0, 0), 0.0);
    }

    #[test]
    fn jaccard_is_a_bounded_symmetric_distance(
        a in prop::collection::vec(any::<bool>(), 64),
        b in prop::collection::vec(any::<bool>(), 64),
    ) {
        let ma = Mask::from_vec(8, 8, a.clone()).unwrap();
        let mb = Mask::from_vec(8, 8, b.clone()).unwrap();
        if a.iter().any(|&v| v) {
            prop_assert_eq!(jaccard_distance(&ma, &ma).unwrap(), 0.0);
        }
        if a.iter().chain(&b).any(|&v| v) {
            let j = jaccard_distance(&ma, &mb).unwrap();
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert_eq!(j, jaccard_distance(&mb, &ma).unwrap());
        } else {
            prop_assert!(jaccard_distance(&ma, &mb).is_err());
        }
    }
}

#[test]
fn jaccard_reference_cases() {
    let a = Mask::from_fn(10, 10, |r, _| r < 5);
    let b = Mask::from_fn(10, 10, |r, _| r >= 5);
    assert_eq!(jaccard_distance(&a, &b).unwrap(), 1.0);
    assert!(jaccard_distance(&a, &Mask::new(10, 11)).is_err());
    let disc = |rad: f64| Mask::from_fn(256, 256, |r, c| (r as f64 - 128.0).hypot(c as f64 - 128.0) <= rad);
    let j = jaccard_distance(&disc(40.0), &disc(50.0)).unwrap();
    assert!((j - 0.36).abs() < 0.02 * 0.36, "{j}");
}
