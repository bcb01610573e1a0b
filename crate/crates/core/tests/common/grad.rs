//! Central-difference gradient checks shared by the gradient and
//! acceptance tests. Each case returns the worst relative error seen.

use pepforge::amino::NUM_AA;
use pepforge::geom::NUM_ANGLES;
use pepforge::nn::{
    gated_adaln, Attention, Denoiser, DenoiserInput, DenoiserKind, Graph, ModelConfig, ModelParams, Tensor, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
const PER_TENSOR: usize = 6;

pub fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Randomizes every parameter so that no gradient path is switched off by a
/// zero initialization.
fn jitter(p: &mut ModelParams, rng: &mut ChaCha8Rng) {
    for v in p.values.iter_mut() {
        for x in v.data.iter_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
    }
}

/// Scalar objective sum(proj * out) where `build` records the output node.
fn objective(p: &ModelParams, proj: &Tensor, build: &dyn Fn(&mut Graph, &ModelParams) -> Var) -> f64 {
    let mut g = Graph::new();
    let out = build(&mut g, p);
    g.value(out).data.iter().zip(&proj.data).map(|(a, b)| a * b).sum()
}

pub struct ParamCheck {
    pub max_rel: f64,
    pub checked: usize,
    pub tensors: usize,
}

/// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// per parameter tensor, over a fixed random subset of its entries.
/// Tensors whose sampled gradient is identically zero are not counted.
fn check_params(p: &mut ModelParams, out_shape: (usize, usize), build: &dyn Fn(&mut Graph, &ModelParams) -> Var) -> ParamCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let proj = random(&mut rng, out_shape.0, out_shape.1, 1.0);
    let mut g = Graph::new();
    let out = build(&mut g, p);
    assert_eq!(g.value(out).shape, vec![out_shape.0, out_shape.1]);
    let grads = g.backward(out, proj.clone()).unwrap();
    p.zero_grad();
    grads.accumulate(p);
    let mut res = ParamCheck {
        max_rel: 0.0,
        checked: 0,
        tensors: p.len(),
    };
    for id in 0..p.values.len() {
        let len = p.values[id].data.len();
        let idx: Vec<usize> = if len <= PER_TENSOR {
            (0..len).collect()
        } else {
            (0..PER_TENSOR).map(|_| rng.random_range(0..len)).collect()
        };
        let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
        for &i in &idx {
            let orig = p.values[id].data[i];
            p.values[id].data[i] = orig + H;
            let up = objective(p, &proj, build);
            p.values[id].data[i] = orig - H;
            let down = objective(p, &proj, build);
            p.values[id].data[i] = orig;
            let num = (up - down) / (2.0 * H);
            let ana = p.grads[id].data[i];
            diff += (ana - num).powi(2);
            na += ana * ana;
            nn += num * num;
        }
        let scale = na.sqrt().max(nn.sqrt());
        if scale < 1e-9 {
            continue;
        }
        res.max_rel = res.max_rel.max(diff.sqrt() / scale);
        res.checked += 1;
    }
    res
}

/// Parameters plus the input h. The input check uses the same relative
/// norm as the parameter check.
pub fn gated_adaln_case() -> ParamCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let hidden = 8;
    let mut p = ModelParams::new();
    p.insert_linear(&mut rng, "blk.cond", 5, 3 * hidden).unwrap();
    jitter(&mut p, &mut rng);
    let h = random(&mut rng, 4, hidden, 2.0);
    let c = random(&mut rng, 4, 5, 1.0);
    let build = |g: &mut Graph, p: &ModelParams| {
        let hv = g.input(h.clone());
        let cv = g.input(c.clone());
        gated_adaln(g, p, "blk", hidden, hv, cv).unwrap()
    };
    let mut res = check_params(&mut p, (4, hidden), &build);

    let proj = random(&mut rng, 4, hidden, 1.0);
    let mut g = Graph::new();
    let hv = g.input(h.clone());
    let cv = g.input(c.clone());
    let out = gated_adaln(&mut g, &p, "blk", hidden, hv, cv).unwrap();
    let ana = g.backward(out, proj.clone()).unwrap().of(hv).unwrap().clone();
    let (mut diff, mut norm) = (0.0f64, 0.0f64);
    for i in 0..h.len() {
        let f = |d: f64| {
            let mut hh = h.clone();
            hh.data[i] += d;
            let mut g = Graph::new();
            let hv = g.input(hh);
            let cv = g.input(c.clone());
            let o = gated_adaln(&mut g, &p, "blk", hidden, hv, cv).unwrap();
            g.value(o).data.iter().zip(&proj.data).map(|(a, b)| a * b).sum::<f64>()
        };
        let num = (f(H) - f(-H)) / (2.0 * H);
        diff += (ana.data[i] - num).powi(2);
        norm += num * num;
    }
    res.max_rel = res.max_rel.max(diff.sqrt() / norm.sqrt());
    res
}

/// Cross attention then self attention (over a layer-normed input) with one
/// parameter set.
pub fn attention_case() -> [ParamCheck; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let att = Attention::new("att", 8, 2).unwrap();
    let mut p = ModelParams::new();
    att.init(&mut p, &mut rng).unwrap();
    let q = random(&mut rng, 3, 8, 1.5);
    let kv = random(&mut rng, 5, 8, 1.5);
    let build = |g: &mut Graph, p: &ModelParams| {
        let qv = g.input(q.clone());
        let kvv = g.input(kv.clone());
        att.forward(g, p, qv, kvv, None).unwrap().0
    };
    let cross = check_params(&mut p, (3, 8), &build);
    let self_build = |g: &mut Graph, p: &ModelParams| {
        let x = g.input(kv.clone());
        let ln = g.layer_norm(x, 1e-5).unwrap();
        att.forward(g, p, ln, ln, None).unwrap().0
    };
    [cross, check_params(&mut p, (5, 8), &self_build)]
}

/// Full denoiser at miniature width on random inputs.
pub fn denoiser_case(kind: DenoiserKind) -> ParamCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = Denoiser::new(kind, ModelConfig::miniature()).unwrap();
    let mut p = d.init_params(4).unwrap();
    jitter(&mut p, &mut rng);
    let (n, m) = (5, 7);
    let noisy = match kind {
        DenoiserKind::Structure => random(&mut rng, n, NUM_ANGLES, 3.0),
        DenoiserKind::Sequence => random(&mut rng, n, NUM_AA, 1.0),
    };
    let pep = random(&mut rng, n, NUM_ANGLES, 3.0);
    let pa = random(&mut rng, m, NUM_ANGLES, 3.0);
    // Dense type rows so every input weight row is exercised.
    let pt = random(&mut rng, m, NUM_AA, 1.0);
    let build = |g: &mut Graph, p: &ModelParams| {
        let x = DenoiserInput {
            noisy: &noisy,
            t: 11,
            steps: 20,
            pep_angles: (kind == DenoiserKind::Sequence).then_some(&pep),
            pocket_angles: &pa,
            pocket_types: &pt,
        };
        d.forward(g, p, &x).unwrap()
    };
    check_params(&mut p, (n, kind.output_width()), &build)
}
