#[path = "common/mod.rs"]
mod common;

use common::{extended_knots, random, rng};
use hybridcast::attention::MultiHeadAttention;
use hybridcast::data::{make_windows, synth_series, Channel, Normalizer, SynthKind, WindowSpec};
use hybridcast::kan::{edge_eval, KanLayer, KanSpec, SplineFunction, SplineGrid};
use hybridcast::metrics::{mae, rmse};
use hybridcast::model::{HybridModel, ModelConfig, Variant};
use hybridcast::nn::{BatchNorm, DropoutLayer, LayerNorm, Mode, ParamSet, Scope, TemporalAttention};
use hybridcast::recurrent::{BiGru, GruCell};
use hybridcast::{Graph, Tensor};
use rand::Rng;

pub fn slices(t: &Tensor, width: usize) -> impl Iterator<Item = &[f64]> {
    t.data().chunks(width)
}

#[test]
pub fn attention_rows_sum_to_one() {
    for (b, t, d, h, scale) in [(1, 1, 4, 1, 1.0), (2, 3, 4, 2, 1.0), (4, 6, 8, 2, 5.0), (3, 5, 32, 4, 20.0)] {
        let mut params = ParamSet::new();
        let mha = MultiHeadAttention::new(&mut params, "mha", d, h, &mut rng(1)).unwrap();
        let x = random(&[b, t, d], scale, &mut rng(2));
        let mut s = Scope::new(&params, Mode::INFER, 0);
        let xv = s.input(x);
        let (_, weights) = mha.attend_with_weights(&mut s, xv).unwrap();
        assert_eq!(weights.len(), h);
        for w in weights {
            let a = s.graph.value(w);
            assert_eq!(a.shape(), &[b, t, t]);
            for row in slices(a, t) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
    }
}

#[test]
pub fn query_key_rescaling_leaves_weights_unchanged() {
    let mut params = ParamSet::new();
    let mha = MultiHeadAttention::new(&mut params, "mha", 8, 2, &mut rng(3)).unwrap();
    let x = random(&[2, 5, 8], 1.0, &mut rng(4));
    let weights = |p: &ParamSet| {
        let mut s = Scope::new(p, Mode::INFER, 0);
        let xv = s.input(x.clone());
        let (_, w) = mha.attend_with_weights(&mut s, xv).unwrap();
        w.iter().map(|&v| s.graph.value(v).clone()).collect::<Vec<_>>()
    };
    let before = weights(&params);
    let c = 3.7;
    for p in &mha.projections {
        *params.get_mut(p.query) = params.get(p.query).map(|v| v * c);
        *params.get_mut(p.key) = params.get(p.key).map(|v| v / c);
    }
    let after = weights(&params);
    for (a, b) in before.iter().zip(&after) {
        assert!(a.max_abs_diff(b) < 1e-12);
    }
}

#[test]
pub fn softmax_handles_large_magnitudes() {
    let mut r = rng(5);
    for magnitude in [1.0, 10.0, 100.0, 1000.0] {
        let x = random(&[6, 7], magnitude, &mut r);
        let mut g = Graph::new();
        let v = g.leaf(x);
        let s = g.softmax(v, 1).unwrap();
        for row in slices(g.value(s), 7) {
            assert!(row.iter().all(|v| v.is_finite()));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
pub fn temporal_attention_weights_sum_over_time() {
    let mut params = ParamSet::new();
    let ta = TemporalAttention::new(&mut params, "ta", 5, &mut rng(6));
    let x = random(&[3, 5, 4], 4.0, &mut rng(7));
    let mut s = Scope::new(&params, Mode::INFER, 0);
    let xv = s.input(x);
    let (_, w) = ta.forward_with_weights(&mut s, xv).unwrap();
    let w = s.graph.value(w).permute(&[0, 2, 1]).unwrap();
    for over_time in slices(&w, 5) {
        assert!((over_time.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
pub fn basis_partition_of_unity() {
    for degree in 1..=3 {
        for (g, lo, hi) in [(1, 0.0, 1.0), (5, -2.0, 2.0), (8, -1.0, 1.0), (13, -3.5, 0.25)] {
            let grid = SplineGrid::uniform(g, degree, lo, hi).unwrap();
            for i in 0..=1000 {
                let t = lo + (hi - lo) * i as f64 / 1000.0;
                let sum: f64 = grid.basis(t).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "k={degree} G={g} t={t}: {sum}");
            }
        }
    }
}

#[test]
pub fn coefficient_perturbation_is_local() {
    let grid = SplineGrid::uniform(6, 3, -1.0, 1.0).unwrap();
    let knots = extended_knots(6, 3, -1.0, 1.0);
    let base = SplineFunction::new(grid.clone(), random(&[9], 1.0, &mut rng(8)).into_data(), 0.4).unwrap();
    for j in 0..grid.basis_len() {
        let mut bumped = base.clone();
        bumped.coefficients[j] += 0.5;
        for i in 0..=400 {
            let t = -1.0 + 2.0 * i as f64 / 400.0;
            let changed = edge_eval(&bumped, t) != edge_eval(&base, t);
            let inside = t > knots[j] && t < knots[j + 4];
            if changed {
                assert!(inside || t == knots[j] || t == knots[j + 4], "coef {j} changed output at {t}");
            }
            if !inside {
                assert!(!changed);
            }
        }
    }
}

#[test]
pub fn coefficient_gradient_equals_basis_value() {
    let grid = SplineGrid::uniform(5, 3, -2.0, 2.0).unwrap();
    let coefs = random(&[8], 1.0, &mut rng(9)).into_data();
    let h = 1e-6;
    for t in [-1.7, -0.3, 0.0, 0.45, 1.99] {
        let basis = grid.basis(t);
        for j in 0..8 {
            let eval = |d: f64| {
                let mut c = coefs.clone();
                c[j] += d;
                edge_eval(&SplineFunction::new(grid.clone(), c, 0.0).unwrap(), t)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - basis[j]).abs() < 1e-6);
        }
    }
}

#[test]
pub fn least_squares_spline_reproduces_identity() {
    let grid = SplineGrid::uniform(5, 3, -2.0, 2.0).unwrap();
    let nb = grid.basis_len();
    let samples: Vec<f64> = (0..=200).map(|i| -2.0 + 4.0 * i as f64 / 200.0).collect();
    let mut ata = vec![vec![0.0; nb + 1]; nb];
    for &t in &samples {
        let b = grid.basis(t);
        for r in 0..nb {
            for c in 0..nb {
                ata[r][c] += b[r] * b[c];
            }
            ata[r][nb] += b[r] * t;
        }
    }
    let coefficients = solve(ata);
    let f = SplineFunction::new(grid, coefficients, 0.0).unwrap();
    for i in 1..100 {
        let t = -2.0 + 4.0 * i as f64 / 100.0;
        assert!((edge_eval(&f, t) - t).abs() < 1e-3);
    }
}

/// Gauss–Jordan on an augmented matrix with partial pivoting.
pub fn solve(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (0..n).map(|r| m[r][n] / m[r][r]).collect()
}

#[test]
pub fn kan_is_linear_in_coefficients() {
    let spec = KanSpec { base_term: false, ..KanSpec::default() };
    let mut params = ParamSet::new();
    let layer = KanLayer::new(&mut params, "kan", 3, 2, &spec, &mut rng(10)).unwrap();
    let x = random(&[4, 3], 2.5, &mut rng(11));
    let run = |p: &ParamSet| {
        let mut s = Scope::new(p, Mode::INFER, 0);
        let xv = s.input(x.clone());
        let o = layer.forward(&mut s, xv).unwrap();
        s.graph.value(o).clone()
    };
    let once = run(&params);
    *params.get_mut(layer.coefficients) = params.get(layer.coefficients).map(|v| 2.0 * v);
    let twice = run(&params);
    for (a, b) in once.data().iter().zip(twice.data()) {
        assert_eq!(2.0 * a, *b);
    }
}

#[test]
pub fn layer_norm_moments() {
    let mut params = ParamSet::new();
    let ln = LayerNorm::new(&mut params, "ln", 16);
    let x = random(&[3, 5, 16], 50.0, &mut rng(12));
    let mut s = Scope::new(&params, Mode::INFER, 0);
    let xv = s.input(x);
    let o = ln.forward(&mut s, xv).unwrap();
    for row in slices(s.graph.value(o), 16) {
        let mean = row.iter().sum::<f64>() / 16.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-5);
    }
}

#[test]
pub fn batch_norm_train_moments() {
    let mut params = ParamSet::new();
    let bn = BatchNorm::new(&mut params, "bn", 3);
    let gain = [0.5, 2.0, -1.5];
    let shift = [1.0, -3.0, 0.25];
    *params.get_mut(bn.gain) = Tensor::from_vec(gain.to_vec());
    *params.get_mut(bn.shift) = Tensor::from_vec(shift.to_vec());
    let x = random(&[8, 5, 3], 30.0, &mut rng(13));
    let mut s = Scope::new(&params, Mode::TRAIN, 0);
    let xv = s.input(x);
    let o = bn.forward(&mut s, xv).unwrap();
    let out = s.graph.value(o);
    for f in 0..3 {
        let col: Vec<f64> = out.data().iter().skip(f).step_by(3).copied().collect();
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - shift[f]).abs() < 1e-5);
        assert!((var - gain[f] * gain[f]).abs() < 1e-5);
    }
}

#[test]
pub fn dropout_preserves_expectation() {
    let n = 10_000;
    for rate in [0.1, 0.2, 0.5, 0.8] {
        let layer = DropoutLayer::new(rate).unwrap();
        let params = ParamSet::new();
        let mut s = Scope::new(&params, Mode::TRAIN, 17);
        let xv = s.input(Tensor::ones(&[n]));
        let o = layer.forward(&mut s, xv).unwrap();
        let mean = s.graph.value(o).sum() / n as f64;
        let sigma = (rate / (1.0 - rate) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 6.0 * sigma, "rate {rate}: mean {mean}");
        if rate == 0.5 {
            assert!((0.94..=1.06).contains(&mean));
        }
    }
}

#[test]
pub fn normalizer_roundtrip_every_channel() {
    for kind in [SynthKind::SinusoidMix, SynthKind::RegimeSwitch, SynthKind::TrendPlusNoise] {
        let series = synth_series(kind, 400, 3).unwrap();
        let norm = Normalizer::fit(&series, 0..280, &Channel::ALL).unwrap();
        for c in Channel::ALL {
            for &x in series.channel(c) {
                let back = norm.inverse(c, norm.transform(c, x));
                assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0), "{c:?}: {x} -> {back}");
            }
        }
    }
}

#[test]
pub fn windows_never_see_their_target() {
    let series = synth_series(SynthKind::RegimeSwitch, 300, 4).unwrap();
    let spec = WindowSpec::default();
    let t = spec.window;
    let splits = make_windows(&series, &spec).unwrap();
    let used = spec.used_channels();
    for set in [&splits.train, &splits.val, &splits.test] {
        for (i, &row) in set.target_rows.iter().enumerate() {
            assert!(series.timestamps[row - 1] < set.target_times[i]);
            assert_eq!(series.timestamps[row], set.target_times[i]);
            for step in 0..t {
                for (ci, &c) in spec.inputs.iter().enumerate() {
                    let expected = splits.normalizer.transform(c, series.channel(c)[row - t + step]);
                    assert_eq!(set.inputs.at(&[i, step, ci]), expected);
                }
            }
            for (k, &c) in set.target_channels.iter().enumerate() {
                assert!(used.contains(&c));
                let expected = splits.normalizer.transform(c, series.channel(c)[row]);
                assert_eq!(set.targets[k].data()[i], expected);
            }
        }
    }
    let last = |d: &hybridcast::data::WindowedDataset| *d.target_times.last().unwrap();
    let first = |d: &hybridcast::data::WindowedDataset| d.target_times[0];
    assert!(last(&splits.train) < first(&splits.val));
    assert!(last(&splits.val) < first(&splits.test));
    let first_val_window_start = splits.val.target_rows[0] - t;
    let train_rows = splits.train.target_rows.last().unwrap() + 1;
    assert!(first_val_window_start < train_rows);
}

#[test]
pub fn rmse_bounds_mae_on_random_vectors() {
    let mut r = rng(14);
    for _ in 0..1000 {
        let n = r.random_range(1..50);
        let scale = 10f64.powf(r.random_range(-3.0..4.0));
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-scale..scale)).collect();
        let p: Vec<f64> = (0..n).map(|_| r.random_range(-scale..scale)).collect();
        let (m, q) = (mae(&a, &p).unwrap(), rmse(&a, &p).unwrap());
        assert!(q >= m * (1.0 - 1e-12), "rmse {q} < mae {m}");
    }
    let a = [1.0, 5.0, -2.0];
    let p = [3.0, 3.0, 0.0];
    assert!((rmse(&a, &p).unwrap() - mae(&a, &p).unwrap()).abs() < 1e-15);
}

#[test]
pub fn hidden_states_stay_inside_unit_interval() {
    let mut params = ParamSet::new();
    let bi = BiGru::new(&mut params, "bi", 3, 6, &mut rng(15));
    let cell = GruCell::new(&mut params, "g", 3, 6, &mut rng(16));
    for id in params.ids().collect::<Vec<_>>() {
        *params.get_mut(id) = params.get(id).map(|v| 2.0 * v);
    }
    let x = random(&[4, 7, 3], 3.0, &mut rng(17));
    let mut s = Scope::new(&params, Mode::INFER, 0);
    let xv = s.input(x);
    let a = bi.forward(&mut s, xv).unwrap();
    let b = cell.sequence(&mut s, xv, hybridcast::recurrent::Direction::Forward).unwrap();
    for v in [a, b] {
        assert!(s.graph.value(v).data().iter().all(|h| h.abs() < 1.0));
    }
}

#[test]
pub fn variants_are_sub_registries_of_full() {
    let cfg = |variant| ModelConfig { variant, ..ModelConfig::reference() };
    let full = HybridModel::build(cfg(Variant::Full)).unwrap();
    let full_blocks = full.block_sizes();
    let full_total = full.params().trainable_count();
    for v in Variant::ALL {
        let m = HybridModel::build(cfg(v)).unwrap();
        let names: Vec<&str> = m.params().entries().iter().map(|e| e.name.as_str()).collect();
        let mut unique = names.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), names.len(), "{v}: duplicate registry names");
        for (stage, size) in m.block_sizes() {
            let in_full = full_blocks.iter().find(|(s, _)| *s == stage).map(|p| p.1);
            assert_eq!(in_full, Some(size), "{v}: stage {stage}");
        }
        if v != Variant::Full {
            assert!(m.params().trainable_count() < full_total, "{v}");
            assert!(m.block_sizes().len() < full_blocks.len());
        }
    }
}
