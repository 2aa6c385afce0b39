use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridgeflow::angle::*;
use ridgeflow::orientation::*;
use ridgeflow::raster::*;
use ridgeflow::synth::{synth_print, SynthSpec};

fn random_image(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Image<f64> {
    Image::from_fn(w, h, |_, _| rng.gen_range(-1.0..1.0))
}

/// `Σ K(i, j) · I(x + ax − i, y + ay − j)` by direct summation.
fn direct_conv(img: &Image<f64>, k: &Kernel<f64>, pad: PaddingMode) -> Image<f64> {
    let (ax, ay) = k.anchor();
    Image::from_fn(img.width(), img.height(), |x, y| {
        let mut s = 0.0;
        for j in 0..k.height() {
            for i in 0..k.width() {
                let sx = x as isize + ax as isize - i as isize;
                let sy = y as isize + ay as isize - j as isize;
                let inside = sx >= 0 && sy >= 0 && sx < img.width() as isize && sy < img.height() as isize;
                let v = match pad {
                    PaddingMode::Replicate => img.get_clamped(sx, sy),
                    PaddingMode::Zero if inside => img.get(sx as usize, sy as usize),
                    PaddingMode::Zero => 0.0,
                };
                s += k.taps()[j * k.width() + i] * v;
            }
        }
        s
    })
}

#[test]
fn conv2d_matches_direct_sum_64x64_7x7() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let img = random_image(64, 64, &mut rng);
    let k = Kernel::new(7, 7, (0..49).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    for pad in [PaddingMode::Replicate, PaddingMode::Zero] {
        let d = conv2d(&img, &k, pad).unwrap().max_abs_diff(&direct_conv(&img, &k, pad));
        assert!(d <= 1e-12, "{pad:?}: {d}");
    }
}

#[test]
fn conv2d_even_and_rectangular_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let img = random_image(13, 9, &mut rng);
    for (kw, kh) in [(2, 2), (4, 3), (1, 6), (5, 2)] {
        let k = Kernel::new(kw, kh, (0..kw * kh).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        for pad in [PaddingMode::Replicate, PaddingMode::Zero] {
            assert!(conv2d(&img, &k, pad).unwrap().max_abs_diff(&direct_conv(&img, &k, pad)) <= 1e-12);
        }
    }
}

#[test]
fn box_sum_is_conv_with_ones_32x32() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = random_image(32, 32, &mut rng);
    for w in [1, 2, 3, 16] {
        let reference = conv2d(&img, &Kernel::ones(w).unwrap(), PaddingMode::Replicate).unwrap();
        assert!(box_sum(&img, w).unwrap().max_abs_diff(&reference) <= 1e-12, "w={w}");
    }
}

#[test]
fn structure_tensor_matches_sliding_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gx = random_image(40, 36, &mut rng);
    let gy = random_image(40, 36, &mut rng);
    let w = 16usize;
    let t = structure_tensor(&gx, &gy, w).unwrap();
    let a = ((w - 1) / 2) as isize;
    let lo = a - (w as isize - 1);
    for (x, y) in [(0, 0), (7, 30), (20, 18), (39, 35), (33, 2)] {
        let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
        for dy in lo..=a {
            for dx in lo..=a {
                let (sx, sy) = (x as isize + dx, y as isize + dy);
                let (u, v) = (gx.get_clamped(sx, sy), gy.get_clamped(sx, sy));
                xx += u * u;
                yy += v * v;
                xy += u * v;
            }
        }
        assert!((t.gxx.get(x, y) - xx).abs() <= 1e-10);
        assert!((t.gyy.get(x, y) - yy).abs() <= 1e-10);
        assert!((t.gxy.get(x, y) - xy).abs() <= 1e-10);
    }
}

fn interior_error(theta: f64, period: f64) -> f64 {
    let (img, _) = synth_print::<f64>(&SynthSpec::plain(96, 96, theta, period), 0).unwrap();
    let (gx, gy) = sobel_gradients(&img).unwrap();
    let t = structure_tensor(&gx, &gy, 16).unwrap();
    let f = orientation_field(&t, 1).unwrap();
    let mut err = 0.0;
    let mut n = 0.0;
    for y in 24..72 {
        for x in 24..72 {
            err += orientation_distance(f.angle_at_pixel(x, y), theta);
            n += 1.0;
        }
    }
    err / n
}

#[test]
fn sinusoid_orientation_within_two_degrees() {
    for k in 0..18 {
        let theta = 10.0 * k as f64;
        let e = interior_error(theta, 9.0);
        assert!(e < 2.0, "theta {theta}: {e}");
    }
}

#[test]
fn quarter_turn_shifts_orientation_by_ninety() {
    let (img, _) = synth_print::<f64>(&SynthSpec::plain(80, 80, 25.0, 9.0), 0).unwrap();
    // (x, y) → (y, 79 − x) is an exact quarter turn of the raster.
    let rot = Image::from_fn(80, 80, |x, y| img.get(79 - y, x));
    let est = |im: &Image<f64>| {
        let (gx, gy) = sobel_gradients(im).unwrap();
        orientation_field(&structure_tensor(&gx, &gy, 16).unwrap(), 1).unwrap()
    };
    let (a, b) = (est(&img), est(&rot));
    for (x, y) in [(40, 40), (30, 50), (48, 33)] {
        let before = a.angle_at_pixel(79 - y, x);
        let after = b.angle_at_pixel(x, y);
        assert!(orientation_distance(after, before + 90.0) < 2.0, "{before} {after}");
    }
}

#[test]
fn theta_ave_round_trip_across_seam() {
    for sigma in [2.0, 5.0, 10.0] {
        let spec = AngleSpec { bins: 90, span: 180.0, sigma };
        for d in 0..180 {
            let theta = d as f64;
            let angles = Image::<f64>::filled(1, 1, theta);
            let dist = AngleDistribution::encode(&angles, spec).unwrap();
            let got = decode_theta_ave(&dist).unwrap().get(0, 0);
            assert!(circular_distance(got, theta, 180.0) < 0.5, "σ {sigma}, θ {theta}: {got}");
        }
    }
}

#[test]
fn theta_max_round_trip_within_half_bin() {
    for spec in [AngleSpec::ORIENTATION, AngleSpec::DIRECTION] {
        for d in 0..spec.span as usize {
            let theta = d as f64;
            let dist = AngleDistribution::encode(&Image::<f64>::filled(1, 1, theta), spec).unwrap();
            let got = decode_theta_max(&dist).get(0, 0);
            assert!(circular_distance(got, theta, spec.span) <= spec.bin_step() / 2.0 + 1e-9);
        }
    }
}

#[test]
fn encode_matches_scalar_formula() {
    let spec = AngleSpec::ORIENTATION;
    let v: Vec<f64> = encode_angle(47.0, spec).unwrap();
    let raw: Vec<f64> = (0..90)
        .map(|i| {
            let d = circular_distance(2.0 * i as f64, 47.0, 180.0);
            (-d * d / (2.0 * 25.0)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    for (a, b) in v.iter().zip(&raw) {
        assert!((a - b / s).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn conv2d_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, kw in 1usize..6, kh in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_image(12, 10, &mut rng);
        let b = random_image(12, 10, &mut rng);
        let k = Kernel::new(kw, kh, (0..kw * kh).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mix = a.zip_map(&b, |p, q| alpha * p + beta * q).unwrap();
        let lhs = conv2d(&mix, &k, PaddingMode::Replicate).unwrap();
        let ca = conv2d(&a, &k, PaddingMode::Replicate).unwrap();
        let cb = conv2d(&b, &k, PaddingMode::Replicate).unwrap();
        let rhs = ca.zip_map(&cb, |p, q| alpha * p + beta * q).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
    }

    #[test]
    fn box_sum_equals_ones_kernel(seed in any::<u64>(), w in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_image(11, 9, &mut rng);
        let r = conv2d(&img, &Kernel::ones(w).unwrap(), PaddingMode::Replicate).unwrap();
        prop_assert!(box_sum(&img, w).unwrap().max_abs_diff(&r) <= 1e-12);
    }

    #[test]
    fn upsample_then_block_average_is_identity(seed in any::<u64>(), f in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_image(5, 4, &mut rng);
        let up = upsample_nearest(&img, f).unwrap();
        let back = Image::from_fn(5, 4, |x, y| {
            let mut s = 0.0;
            for v in 0..f { for u in 0..f { s += up.get(x * f + u, y * f + v); } }
            s / (f * f) as f64
        });
        prop_assert!(back.max_abs_diff(&img) <= 1e-12);
    }

    #[test]
    fn orientation_in_range_and_coherence_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_image(20, 20, &mut rng);
        let (gx, gy) = sobel_gradients(&img).unwrap();
        let t = structure_tensor(&gx, &gy, 5).unwrap();
        let f = orientation_field(&t, 1).unwrap();
        prop_assert!(f.angles().data().iter().all(|&a| (0.0..180.0).contains(&a)));
        prop_assert!(coherence(&t).data().iter().all(|&c| (0.0..=1.0 + 1e-12).contains(&c)));
    }

    #[test]
    fn rank_one_tensor_is_fully_coherent(gx in -5.0f64..5.0, gy in -5.0f64..5.0) {
        prop_assume!(gx.abs() + gy.abs() > 0.1);
        let gxi = Image::filled(4, 4, gx);
        let gyi = Image::filled(4, 4, gy);
        let c = coherence(&structure_tensor(&gxi, &gyi, 3).unwrap());
        prop_assert!((c.get(1, 1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn theta_max_scale_invariant(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs: Vec<f64> = (0..90).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = probs.iter().sum();
        let p = ChannelMap::new(1, 1, 90, probs.iter().map(|v| v / s).collect()).unwrap();
        let a = decode_theta_max(&AngleDistribution::new(p.clone(), 180.0).unwrap()).get(0, 0);
        let scaled = p.data().iter().map(|v| v * scale).collect::<Vec<_>>();
        let i = argmax(&scaled);
        prop_assert_eq!(a, 2.0 * i as f64);
    }
}
