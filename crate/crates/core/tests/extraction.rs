use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridgeflow::angle::AngleSpec;
use ridgeflow::enhancement::{selective_enhance, EnhancedMap, GaborBank, GaborParams};
use ridgeflow::evaluation::{match_minutiae, MatchCriteria};
use ridgeflow::extraction::*;
use ridgeflow::orientation::OrientationField;
use ridgeflow::raster::{BinaryMask, Image, Kernel};
use ridgeflow::synth::{random_scene, synth_print, PlantedMinutia, Polarity, SynthSpec};

fn bank() -> TemplateBank<f64> {
    TemplateBank::new(TemplateParams::default()).unwrap()
}

/// Bilinear sample of a kernel at signed offsets, 0 outside.
fn sample(k: &Kernel<f64>, u: f64, v: f64) -> f64 {
    let r = (k.width() / 2) as isize;
    let (u0, v0) = (u.floor(), v.floor());
    let (fu, fv) = (u - u0, v - v0);
    let at = |a: isize, b: isize| if a.abs() <= r && b.abs() <= r { k.at(a, b) } else { 0.0 };
    let (a, b) = (u0 as isize, v0 as isize);
    (1.0 - fu) * (1.0 - fv) * at(a, b) + fu * (1.0 - fv) * at(a + 1, b) + (1.0 - fu) * fv * at(a, b + 1) + fu * fv * at(a + 1, b + 1)
}

fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += (x - ma) * (y - mb);
        aa += (x - ma) * (x - ma);
        bb += (y - mb) * (y - mb);
    }
    ab / (aa * bb).sqrt()
}

/// Pixels inside the inscribed disk, where rotation loses nothing.
fn disk(r: isize) -> Vec<(isize, isize)> {
    (-r..=r).flat_map(|v| (-r..=r).map(move |u| (u, v))).filter(|&(u, v)| u * u + v * v <= r * r).collect()
}

#[test]
fn templates_are_rotations_of_the_first() {
    let b = bank();
    let t0 = &b.templates()[0];
    let pts = disk(12);
    for t in b.templates() {
        let a = t.direction.to_radians();
        let (c, s) = (a.cos(), a.sin());
        for (mine, base) in [(&t.even, &t0.even), (&t.odd, &t0.odd)] {
            let got: Vec<f64> = pts.iter().map(|&(u, v)| mine.at(u, v)).collect();
            // t_α(p) = t_0(R(−α) p)
            let want: Vec<f64> = pts
                .iter()
                .map(|&(u, v)| {
                    let (uf, vf) = (u as f64, v as f64);
                    sample(base, c * uf + s * vf, -s * uf + c * vf)
                })
                .collect();
            let r = ncc(&got, &want);
            assert!(r >= 0.98, "direction {}: {r}", t.direction);
        }
    }
}

#[test]
fn templates_are_zero_mean_unit_norm() {
    for t in bank().templates() {
        for k in [&t.even, &t.odd] {
            let n = k.taps().len() as f64;
            assert!((k.sum() / n).abs() <= 1e-12);
            let norm = k.taps().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn opposite_directions_differ() {
    let b = bank();
    let k = b.len();
    for i in 0..k / 2 {
        let (p, q) = (&b.templates()[i], &b.templates()[i + k / 2]);
        // The quadrature score of q's pattern under p's pair.
        let (ce, co) = (dot(&q.even, &p.even), dot(&q.even, &p.odd));
        let r = ce.hypot(co);
        assert!(r < 0.9, "{} vs {}: {r}", p.direction, q.direction);
    }
}

fn dot(a: &Kernel<f64>, b: &Kernel<f64>) -> f64 {
    a.taps().iter().zip(b.taps()).map(|(x, y)| x * y).sum()
}

fn enhanced(spec: &SynthSpec, seed: u64) -> (EnhancedMap<f64>, MinutiaeList) {
    let (img, gt) = synth_print::<f64>(spec, seed).unwrap();
    let theta = match spec.orientation {
        ridgeflow::synth::SynthOrientation::Constant(t) => t,
        _ => unreachable!(),
    };
    let g = GaborBank::from_params(&GaborParams { period: spec.period, ..GaborParams::default() }).unwrap();
    let field = OrientationField::constant(theta, spec.width, spec.height).unwrap();
    (selective_enhance(&img, &g, &field).unwrap(), gt)
}

#[test]
fn single_ending_is_the_global_maximum() {
    let b = bank();
    for (theta, polarity, seed) in [(0.0, Polarity::Positive, 0), (40.0, Polarity::Negative, 1), (115.0, Polarity::Positive, 2), (160.0, Polarity::Negative, 3)] {
        let mut spec = SynthSpec::plain(128, 128, theta, 9.0);
        spec.global_phase = seed as f64;
        spec.minutiae.push(PlantedMinutia { x: 64.0, y: 64.0, polarity });
        let (e, gt) = enhanced(&spec, 0);
        let maps = minutiae_score(&e, &b, &BinaryMask::filled(128, 128, true)).unwrap();
        let (mut best, mut at) = (f64::MIN, (0, 0));
        for y in 0..128 {
            for x in 0..128 {
                if maps.score.get(x, y) > best {
                    best = maps.score.get(x, y);
                    at = (x, y);
                }
            }
        }
        let d = (at.0 as f64 - 64.0).hypot(at.1 as f64 - 64.0);
        assert!(d <= 6.0, "θ {theta}: max at {at:?}");
        let dir = maps.direction.get(at.0, at.1);
        let m = Minutia::new(0.0, 0.0, dir, 1.0);
        assert!(m.angle_difference(&gt[0]) <= 22.5, "θ {theta}: {dir} vs {}", gt[0].direction);
    }
}

#[test]
fn pure_sinusoid_scores_below_threshold() {
    let b = bank();
    for theta in [0.0, 33.0, 90.0, 147.0] {
        let (e, _) = enhanced(&SynthSpec::plain(96, 96, theta, 9.0), 0);
        let maps = minutiae_score(&e, &b, &BinaryMask::filled(96, 96, true)).unwrap();
        for y in 12..84 {
            for x in 12..84 {
                assert!(maps.score.get(x, y) < 0.5, "θ {theta} ({x}, {y}) {}", maps.score.get(x, y));
            }
        }
    }
}

#[test]
fn empty_foreground_gives_no_minutiae() {
    let mut spec = SynthSpec::plain(96, 96, 20.0, 9.0);
    spec.minutiae.push(PlantedMinutia { x: 48.0, y: 48.0, polarity: Polarity::Positive });
    let (e, _) = enhanced(&spec, 0);
    let got = extract(&e, &bank(), &BinaryMask::filled(96, 96, false), &ExtractParams::default()).unwrap();
    assert!(got.is_empty());
}

#[test]
fn five_planted_minutiae_found() {
    let b = bank();
    let (mut matched, mut pred, mut truth) = (0, 0, 0);
    for seed in 0..4 {
        let spec = random_scene(192, 192, 5, 40.0, 32.0, 0.0, seed).unwrap();
        let (e, gt) = enhanced(&spec, seed);
        let found = extract(&e, &b, &BinaryMask::filled(192, 192, true), &ExtractParams::default()).unwrap();
        let again = extract(&e, &b, &BinaryMask::filled(192, 192, true), &ExtractParams::default()).unwrap();
        assert_eq!(found, again);
        let r = match_minutiae(&found, &gt, &MatchCriteria::default());
        matched += r.pairs.len();
        pred += r.n_pred;
        truth += r.n_gt;
    }
    let (p, r) = (matched as f64 / pred as f64, matched as f64 / truth as f64);
    assert!(p >= 0.9 && r >= 0.9, "precision {p}, recall {r}");
}

#[test]
fn translation_by_whole_cells_translates_decoded_minutiae() {
    let mut spec = random_scene(224, 224, 4, 40.0, 64.0, 0.0, 5).unwrap();
    spec.period = 9.0;
    let (e, _) = enhanced(&spec, 0);
    let cos = e.cosine();
    let b = bank();
    let params = ExtractParams::default();
    let (w, h) = (160, 160);
    let decoded = |ox: usize, oy: usize| {
        let crop = Image::from_fn(w, h, |x, y| cos.get(x + ox, y + oy));
        let scores = minutiae_score_raster(&crop, &b, &BinaryMask::filled(w, h, true)).unwrap();
        let list = extract_from_scores(&scores, &crop, &b, &params).unwrap();
        let rounded: Vec<Minutia> = list.iter().map(|m| Minutia::new(m.x.round(), m.y.round(), m.direction, m.score)).collect();
        let (maps, _) = encode_minutiae_maps::<f64>(&rounded, w, h, AngleSpec::DIRECTION).unwrap();
        decode_minutiae_maps(&maps, 0.5, 0.0).unwrap()
    };
    let a = decoded(40, 40);
    let moved = decoded(40 - 8, 40 - 16);
    assert!(!a.is_empty());
    let interior = |m: &Minutia| m.x >= 24.0 && m.y >= 24.0 && m.x < 136.0 - 16.0 && m.y < 136.0 - 16.0;
    let mut want: Vec<(f64, f64)> = a.iter().filter(|m| interior(m)).map(|m| (m.x + 8.0, m.y + 16.0)).collect();
    let mut got: Vec<(f64, f64)> = moved
        .iter()
        .map(|m| (m.x, m.y))
        .filter(|&(x, y)| interior(&Minutia::new(x - 8.0, y - 16.0, 0.0, 0.0)))
        .collect();
    want.sort_by(|p, q| p.partial_cmp(q).unwrap());
    got.sort_by(|p, q| p.partial_cmp(q).unwrap());
    assert!(!want.is_empty());
    assert_eq!(got, want);
}

/// Repeatedly take the best remaining minutia and delete its neighbours.
fn brute_nms(list: &[Minutia], r: f64) -> Vec<Minutia> {
    let mut left = list.to_vec();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut bi = 0;
        for i in 1..left.len() {
            let (a, b) = (&left[i], &left[bi]);
            let better = a.score > b.score || (a.score == b.score && (a.x < b.x || (a.x == b.x && a.y < b.y)));
            if better {
                bi = i;
            }
        }
        let best = left[bi];
        out.push(best);
        left.retain(|m| (m.x - best.x).powi(2) + (m.y - best.y).powi(2) > r * r);
    }
    out
}

fn random_list(rng: &mut ChaCha8Rng, n: usize) -> Vec<Minutia> {
    (0..n)
        .map(|_| {
            Minutia::new(
                rng.gen_range(0..200) as f64,
                rng.gen_range(0..200) as f64,
                rng.gen_range(0.0..360.0),
                (rng.gen_range(0..20) as f64) / 20.0,
            )
        })
        .collect()
}

#[test]
fn nms_equals_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let list = random_list(&mut rng, 200);
        assert_eq!(nms(&list, 16.0), brute_nms(&list, 16.0));
    }
}

#[test]
fn map_round_trip_is_lossless() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (w, h) = (rng.gen_range(40..120), rng.gen_range(40..120));
        let mut used = std::collections::HashSet::new();
        let mut list = Vec::new();
        for _ in 0..15 {
            let (x, y) = (rng.gen_range(0..w), rng.gen_range(0..h));
            if used.insert((x / 8, y / 8)) {
                list.push(Minutia::new(x as f64, y as f64, rng.gen_range(0..360) as f64, 1.0));
            }
        }
        let (maps, coll) = encode_minutiae_maps::<f64>(&list, w, h, AngleSpec::DIRECTION).unwrap();
        assert!(coll.is_empty());
        let back = decode_minutiae_maps(&maps, 0.5, 0.0).unwrap();
        assert_eq!(back.len(), list.len());
        for m in &list {
            let twin = back.iter().find(|b| b.x == m.x && b.y == m.y).expect("position kept");
            assert!(twin.angle_difference(m) <= 1.0);
        }
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let list = vec![Minutia::new(1.0, 2.5, 359.999, 0.75), Minutia::new(100.25, 7.0, 45.0, 1.0)];
    write_minutiae(&path, &list).unwrap();
    let back = read_minutiae(&path).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0].direction, 0.0);
    assert_eq!((back[1].x, back[1].y, back[1].direction, back[1].score), (100.25, 7.0, 45.0, 1.0));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format_minutiae(&back));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn nms_subset_separated_idempotent(seed in any::<u64>(), n in 0usize..80, r in 0.0f64..30.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let list = random_list(&mut rng, n);
        let out = nms(&list, r);
        for m in &out {
            prop_assert!(list.contains(m));
        }
        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                prop_assert!(a.distance(b) > r);
            }
        }
        prop_assert_eq!(nms(&out, r), out);
    }

    #[test]
    fn score_ignores_constant_offset(seed in any::<u64>(), c in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Image::from_fn(40, 36, |_, _| rng.gen_range(-1.0..1.0));
        let shifted = img.map(|v| v + c);
        let b = bank();
        let mask = BinaryMask::filled(40, 36, true);
        let s0 = minutiae_score_raster(&img, &b, &mask).unwrap();
        let s1 = minutiae_score_raster(&shifted, &b, &mask).unwrap();
        prop_assert!(s0.score.max_abs_diff(&s1.score) <= 1e-9);
    }
}
