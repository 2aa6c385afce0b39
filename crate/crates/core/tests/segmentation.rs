use ridgeflow::normalize::{normalize, NormParams};
use ridgeflow::orientation::{sobel_gradients, structure_tensor};
use ridgeflow::raster::Image;
use ridgeflow::segmentation::*;
use ridgeflow::synth::{synth_patch_dataset, synth_print, Foreground, SynthSpec};

#[test]
fn refit_reproduces_shipped_weights() {
    let c = fit_default_classifier(16).unwrap();
    let got = [c.weights[0], c.weights[1], c.weights[2], c.bias];
    for (g, s) in got.iter().zip(DEFAULT_WEIGHTS) {
        assert!((g - s).abs() <= 0.006, "{got:?} vs {DEFAULT_WEIGHTS:?}");
    }
}

#[test]
fn patch_features_separate_on_coherence() {
    let data = synth_patch_dataset(400, 3).unwrap();
    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for p in &data {
        let coh = patch_features(&p.image, 16).unwrap()[0];
        if p.foreground { fg.push(coh) } else { bg.push(coh) }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&fg) >= mean(&bg) + 0.3, "fg {} bg {}", mean(&fg), mean(&bg));
}

#[test]
fn default_classifier_separates_a_synthetic_print() {
    let (w, h) = (256usize, 256usize);
    let mut spec = SynthSpec::plain(w, h, 30.0, 9.0);
    spec.foreground = Foreground::Ellipse { cx: 128.0, cy: 128.0, rx: 80.0, ry: 100.0 };
    spec.noise_sigma = 0.1;
    let (raw, _) = synth_print::<f64>(&spec, 11).unwrap();
    let img = normalize(&raw, NormParams::default()).unwrap();
    let (gx, gy) = sobel_gradients(&img).unwrap();
    let t = structure_tensor(&gx, &gy, 16).unwrap();
    let f = seg_features(&img, &t, 16).unwrap();
    let pooled = seg_classify(&f, &SegClassifier::default()).pooled(8).unwrap();
    let (cw, ch) = pooled.scores.dims();

    // A cell counts when all of it lies 16 px inside (or outside) the ellipse.
    let margin = |x: f64, y: f64| {
        let (u, v) = ((x - 128.0) / 80.0, (y - 128.0) / 100.0);
        (u * u + v * v).sqrt()
    };
    let (mut fg, mut fg_ok, mut bg, mut bg_ok) = (0, 0, 0, 0);
    for cy in 0..ch {
        for cx in 0..cw {
            let corners = [(0.0, 0.0), (8.0, 0.0), (0.0, 8.0), (8.0, 8.0)]
                .map(|(dx, dy)| margin(cx as f64 * 8.0 + dx, cy as f64 * 8.0 + dy));
            let above = pooled.scores.get(cx, cy) > DEFAULT_THRESHOLD;
            if corners.iter().all(|&r| r < 1.0 - 16.0 / 80.0) {
                fg += 1;
                fg_ok += above as usize;
            } else if corners.iter().all(|&r| r > 1.0 + 16.0 / 80.0) {
                bg += 1;
                bg_ok += !above as usize;
            }
        }
    }
    assert!(fg > 50 && bg > 50);
    assert!(fg_ok as f64 >= 0.95 * fg as f64, "{fg_ok}/{fg}");
    assert!(bg_ok as f64 >= 0.95 * bg as f64, "{bg_ok}/{bg}");
}

#[test]
fn sinusoid_moments() {
    let (img, _) = synth_print::<f64>(&SynthSpec::plain(96, 96, 0.0, 8.0), 0).unwrap();
    let (gx, gy) = sobel_gradients(&img).unwrap();
    let t = structure_tensor(&gx, &gy, 32).unwrap();
    let f = seg_features(&img, &t, 32).unwrap();
    for (x, y) in [(48, 48), (40, 56)] {
        assert!(f.mean.get(x, y).abs() < 1e-9);
        assert!((f.var.get(x, y) - 0.5).abs() < 1e-9);
    }
}

/// Window `[x - (w-1)/2 - (w-1)%2 ..= x + (w-1)/2]` with replicated borders.
fn window_mean(img: &Image<f64>, w: usize, x: usize, y: usize) -> f64 {
    let a = ((w - 1) / 2) as i64;
    let lo = a - (w as i64 - 1);
    let (wd, ht) = (img.width() as i64, img.height() as i64);
    let mut s = 0.0;
    for dy in lo..=a {
        for dx in lo..=a {
            s += img.get((x as i64 + dx).clamp(0, wd - 1) as usize, (y as i64 + dy).clamp(0, ht - 1) as usize);
        }
    }
    s / (w * w) as f64
}

#[test]
fn features_match_sliding_window_reference() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let img = Image::<f64>::from_fn(23, 19, |_, _| rng.gen_range(-1.0..1.0));
    for w in [4, 5] {
        let (gx, gy) = sobel_gradients(&img).unwrap();
        let t = structure_tensor(&gx, &gy, w).unwrap();
        let f = seg_features(&img, &t, w).unwrap();
        let mean = Image::from_fn(23, 19, |x, y| window_mean(&img, w, x, y));
        let dev2 = Image::from_fn(23, 19, |x, y| (img.get(x, y) - mean.get(x, y)).powi(2));
        for y in 0..19 {
            for x in 0..23 {
                assert!((f.mean.get(x, y) - mean.get(x, y)).abs() < 1e-9);
                assert!((f.var.get(x, y) - window_mean(&dev2, w, x, y)).abs() < 1e-9);
                assert!(f.var.get(x, y) >= -1e-9);
            }
        }
    }
}

#[test]
fn binarize_at_median_counts() {
    let scores = Image::<f64>::new(7, 1, vec![5.0, 1.0, 3.0, 7.0, 2.0, 6.0, 4.0]).unwrap();
    let m = SegmentationMap { scores, stride: 1 };
    // Median 4; strict inequality keeps 5, 6, 7.
    assert_eq!(seg_binarize(&m, 4.0).count(), 3);
}

#[test]
fn collinear_hull_is_thick_segment() {
    use ridgeflow::Minutia;
    let r = 4.0;
    let pts = [Minutia::new(10.0, 20.0, 0.0, 1.0), Minutia::new(20.0, 20.0, 0.0, 1.0), Minutia::new(30.0, 20.0, 0.0, 1.0)];
    let mask = weak_seg_label_with(&pts, 48, 40, r, 0).unwrap();
    for y in 0..40 {
        for x in 0..48 {
            let (xf, yf) = (x as f64, y as f64);
            let cx = xf.clamp(10.0, 30.0);
            let d = (xf - cx).hypot(yf - 20.0);
            assert_eq!(mask.get(x, y), d <= r, "({x}, {y}) at {d}");
        }
    }
}

#[test]
fn dilation_is_monotone() {
    use ridgeflow::Minutia;
    let pts = [Minutia::new(12.0, 9.0, 0.0, 1.0), Minutia::new(30.0, 25.0, 0.0, 1.0), Minutia::new(8.0, 30.0, 0.0, 1.0)];
    let mut prev = weak_seg_label(&pts, 48, 40, 0.0).unwrap();
    for r in [2.0, 5.0, 9.0] {
        let next = weak_seg_label(&pts, 48, 40, r).unwrap();
        for y in 0..40 {
            for x in 0..48 {
                assert!(!prev.get(x, y) || next.get(x, y));
            }
        }
        prev = next;
    }
}

#[test]
fn classify_is_affine_in_parameters() {
    let f = SegFeatures {
        coh: Image::<f64>::from_fn(5, 4, |x, y| (x * y) as f64 / 20.0),
        mean: Image::from_fn(5, 4, |x, _| x as f64 - 2.0),
        var: Image::from_fn(5, 4, |_, y| y as f64 * 0.3),
    };
    let c = SegClassifier::new([1.5, -0.5, 2.0], 0.25).unwrap();
    let a = 2.5;
    let s = seg_classify(&f, &SegClassifier::new(c.weights.map(|w| a * w), a * c.bias).unwrap());
    let base = seg_classify(&f, &c);
    for (u, v) in s.scores.data().iter().zip(base.scores.data()) {
        assert!((u - a * v).abs() < 1e-12);
    }
}
