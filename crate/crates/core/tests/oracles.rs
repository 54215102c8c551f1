#[path = "common/mod.rs"]
mod common;

use common::{cox_de_boor, extended_knots, naive_attention, random, rng};
use hybridcast::attention::MultiHeadAttention;
use hybridcast::kan::SplineGrid;
use hybridcast::nn::{Mode, ParamSet, Scope};
use hybridcast::recurrent::{Direction, GruCell};
use rand::Rng;

#[test]
pub fn attention_matches_naive_loops() {
    let mut r = rng(1);
    for &(b, t, d, h) in &[(1, 1, 4, 1), (2, 3, 4, 2), (3, 5, 6, 3), (4, 6, 8, 2), (4, 6, 8, 4)] {
        let mut params = ParamSet::new();
        let mha = MultiHeadAttention::new(&mut params, "mha", d, h, &mut r).unwrap();
        for _ in 0..3 {
            let x = random(&[b, t, d], 2.0, &mut r);
            let mut s = Scope::new(&params, Mode::INFER, 0);
            let xv = s.input(x.clone());
            let out = mha.attend(&mut s, xv).unwrap();
            let want = naive_attention(&mha, &params, &x);
            let got = s.graph.value(out).data();
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "({b},{t},{d},{h}) max diff {err}");
        }
    }
}

#[test]
pub fn basis_matches_recursive_definition() {
    let mut r = rng(2);
    for &(g, k, lo, hi) in &[(5, 3, -2.0, 2.0), (5, 1, -2.0, 2.0), (4, 2, 0.0, 1.0), (8, 3, -1.0, 1.0), (3, 4, -3.0, 5.0)] {
        let grid = SplineGrid::uniform(g, k, lo, hi).unwrap();
        let knots = extended_knots(g, k, lo, hi);
        let mut points: Vec<f64> = (0..200).map(|_| r.random_range(lo..hi)).collect();
        points.extend((0..g).map(|j| lo + j as f64 * (hi - lo) / g as f64));
        for t in points {
            let got = grid.basis(t);
            assert_eq!(got.len(), g + k);
            for (i, v) in got.iter().enumerate() {
                let want = cox_de_boor(&knots, i, k, t);
                assert!((v - want).abs() < 1e-12, "G={g} k={k} t={t} i={i}: {v} vs {want}");
            }
        }
    }
}

#[test]
pub fn clamped_basis_matches_boundary_values() {
    let grid = SplineGrid::uniform(5, 3, -2.0, 2.0).unwrap();
    let knots = extended_knots(5, 3, -2.0, 2.0);
    for t in [-7.0, -2.5, -2.0] {
        for (i, v) in grid.basis(t).iter().enumerate() {
            assert!((v - cox_de_boor(&knots, i, 3, -2.0)).abs() < 1e-12);
        }
    }
}

/// One GRU step written out gate by gate.
pub fn naive_gru_step(cell: &GruCell, params: &ParamSet, h: &[f64], x: &[f64]) -> Vec<f64> {
    let hid = cell.hidden;
    let wi = params.get(cell.w_input).data();
    let wr = params.get(cell.w_recurrent).data();
    let bi = params.get(cell.b_input).data();
    let br = params.get(cell.b_recurrent).data();
    let gx = |gate: usize, j: usize| {
        let c = gate * hid + j;
        bi[c] + (0..cell.inputs).map(|i| x[i] * wi[i * 3 * hid + c]).sum::<f64>()
    };
    let gh = |gate: usize, j: usize| {
        let c = gate * hid + j;
        br[c] + (0..hid).map(|i| h[i] * wr[i * 3 * hid + c]).sum::<f64>()
    };
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    (0..hid)
        .map(|j| {
            let z = sig(gx(0, j) + gh(0, j));
            let r = sig(gx(1, j) + gh(1, j));
            let n = (gx(2, j) + r * gh(2, j)).tanh();
            (1.0 - z) * h[j] + z * n
        })
        .collect()
}

#[test]
pub fn gru_sequence_matches_gate_equations() {
    let mut r = rng(3);
    let mut params = ParamSet::new();
    let cell = GruCell::new(&mut params, "gru", 3, 4, &mut r);
    for id in [cell.b_input, cell.b_recurrent] {
        *params.get_mut(id) = random(&[12], 0.5, &mut r);
    }
    let (b, t) = (2, 6);
    let x = random(&[b, t, 3], 1.5, &mut r);
    let mut s = Scope::new(&params, Mode::INFER, 0);
    let xv = s.input(x.clone());
    let out = cell.sequence(&mut s, xv, Direction::Forward).unwrap();
    let got = s.graph.value(out).data().to_vec();
    for bi in 0..b {
        let mut h = vec![0.0; 4];
        for ti in 0..t {
            let xt = &x.data()[(bi * t + ti) * 3..(bi * t + ti + 1) * 3];
            h = naive_gru_step(&cell, &params, &h, xt);
            for j in 0..4 {
                let g = got[(bi * t + ti) * 4 + j];
                assert!((g - h[j]).abs() < 1e-12, "b{bi} t{ti} j{j}: {g} vs {}", h[j]);
            }
        }
    }
}
