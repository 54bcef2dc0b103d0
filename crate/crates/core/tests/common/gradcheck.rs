//! Central finite-difference checks of reverse-mode gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use styledecomp::autodiff::nn::{gru_step, masked_update, GruVars};
use styledecomp::models::losses::{
    forward_terms, gaussian_nll, loss_ae, loss_c, loss_cos_pair, loss_dz, loss_z, ForwardSpec, StyleLossCode,
};
use styledecomp::models::network::{generate_soft, AutoencoderVars, LatentDiscVars, StyleDiscVars};
use styledecomp::models::{total_objective_graph, ArchitectureVariant, Lambdas};
use styledecomp::textpipe::one_hot_styles;
use styledecomp::{Batch, Graph, ModelParams, Result, Tensor, Var};

/// Step for primitive ops.
pub const STEP: f64 = 1e-3;
/// Step for composite model losses; their recurrent chains have enough
/// curvature that a 1e-3 step carries ~1e-4 truncation error.
pub const LOSS_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Coordinates checked per input tensor at most.
const COORDS_PER_INPUT: usize = 10;

type Build = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>;

pub struct Case {
    pub name: String,
    pub inputs: Vec<Tensor>,
    pub build: Build,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
}

fn eval(case: &Case, inputs: &[Tensor]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = (case.build)(&mut g, &vars).unwrap();
    g.value(out).item().unwrap()
}

/// `|a - n| / max(|a|, |n|, 1e-3)`, so near-zero gradients are compared
/// absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

pub fn check(case: &Case, rng: &mut ChaCha8Rng) -> CaseResult {
    let mut g = Graph::new();
    let vars: Vec<Var> = case.inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = (case.build)(&mut g, &vars).unwrap();
    g.backward(out).unwrap();
    let grads: Vec<Tensor> = vars
        .iter()
        .zip(&case.inputs)
        .map(|(&v, t)| g.grad(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (k, t) in case.inputs.iter().enumerate() {
        let n = t.len();
        let coords = sample(rng, n, n.min(COORDS_PER_INPUT));
        for i in coords {
            let mut plus = case.inputs.clone();
            plus[k].data_mut()[i] += case.step;
            let mut minus = case.inputs.clone();
            minus[k].data_mut()[i] -= case.step;
            let numeric = (eval(case, &plus) - eval(case, &minus)) / (2.0 * case.step);
            worst = worst.max(rel_err(grads[k].data()[i], numeric));
            checked += 1;
        }
    }
    CaseResult {
        name: case.name.clone(),
        max_rel_err: worst,
        checked,
    }
}

fn rand_t(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Contracts a tensor output to a scalar with fixed random weights so every
/// Jacobian entry contributes.
fn weighted_sum(g: &mut Graph, out: Var, w: &Tensor) -> Result<Var> {
    let wv = g.constant(w.clone());
    let p = g.mul(out, wv)?;
    Ok(g.sum(p))
}

fn elementwise_case(name: &str, inputs: Vec<Tensor>, out_shape: Vec<usize>, rng: &mut ChaCha8Rng, f: fn(&mut Graph, &[Var]) -> Result<Var>) -> Case {
    let w = rand_t(rng, &out_shape, -1.0, 1.0);
    Case {
        name: name.to_string(),
        inputs,
        step: STEP,
        build: Box::new(move |g, v| {
            let out = f(g, v)?;
            weighted_sum(g, out, &w)
        }),
    }
}

/// Primitive-op cases for one random configuration.
pub fn op_cases(rng: &mut ChaCha8Rng) -> Vec<Case> {
    let m = rng.gen_range(1..5);
    let k = rng.gen_range(1..5);
    let n = rng.gen_range(1..5);
    let mut cases = Vec::new();
    let mut r = |shape: &[usize], lo: f64, hi: f64| rand_t(rng, shape, lo, hi);
    let a = r(&[m, k], -2.0, 2.0);
    let b = r(&[k, n], -2.0, 2.0);
    let c = r(&[m, k], -2.0, 2.0);
    let pos = r(&[m, k], 0.2, 3.0);
    let row = r(&[k], -1.0, 1.0);
    let col = r(&[m, 1], -1.0, 1.0);
    let tau = r(&[1], 0.3, 2.0).data()[0];
    let start = if k > 1 { 1 } else { 0 };
    let len = k - start;
    let h = r(&[m, n], -1.0, 1.0);
    let xw = r(&[m, 3 * n], -2.0, 2.0);
    let hw = r(&[m, 3 * n], -2.0, 2.0);
    let targets: Vec<usize> = (0..m).map(|i| (i * 7 + 1) % k).collect();
    let mut mask: Vec<bool> = (0..m).map(|i| i % 3 != 2).collect();
    mask[0] = true;
    let lv1 = r(&[m, k], -1.5, 1.5);
    let lv2 = r(&[m, k], -1.5, 1.5);
    let ids: Vec<usize> = (0..m + 2).map(|i| (i * 5 + 3) % n.max(1)).collect();
    let table = r(&[n, k], -1.0, 1.0);

    cases.push(elementwise_case("matmul", vec![a.clone(), b.clone()], vec![m, n], rng, |g, v| g.matmul(v[0], v[1])));
    cases.push(elementwise_case("add", vec![a.clone(), c.clone()], vec![m, k], rng, |g, v| g.add(v[0], v[1])));
    cases.push(elementwise_case("sub", vec![a.clone(), c.clone()], vec![m, k], rng, |g, v| g.sub(v[0], v[1])));
    cases.push(elementwise_case("mul", vec![a.clone(), c.clone()], vec![m, k], rng, |g, v| g.mul(v[0], v[1])));
    cases.push(elementwise_case("add_row", vec![a.clone(), row], vec![m, k], rng, |g, v| g.add_row(v[0], v[1])));
    cases.push(elementwise_case("mul_col", vec![a.clone(), col], vec![m, k], rng, |g, v| g.mul_col(v[0], v[1])));
    cases.push(elementwise_case("affine", vec![a.clone()], vec![m, k], rng, |g, v| Ok(g.affine(v[0], -1.7, 0.3))));
    cases.push(elementwise_case("sigmoid", vec![a.clone()], vec![m, k], rng, |g, v| Ok(g.sigmoid(v[0]))));
    cases.push(elementwise_case("tanh", vec![a.clone()], vec![m, k], rng, |g, v| Ok(g.tanh(v[0]))));
    cases.push(elementwise_case("exp", vec![a.clone()], vec![m, k], rng, |g, v| Ok(g.exp(v[0]))));
    cases.push(elementwise_case("log", vec![pos.clone()], vec![m, k], rng, |g, v| Ok(g.log(v[0]))));
    {
        let w = rand_t(rng, &[m, k], -1.0, 1.0);
        cases.push(Case {
            name: "softmax".into(),
            inputs: vec![a.clone()],
            step: STEP,
        build: Box::new(move |g, v| {
                let s = g.softmax(v[0], tau)?;
                weighted_sum(g, s, &w)
            }),
        });
    }
    cases.push(elementwise_case("concat_cols", vec![a.clone(), h.clone()], vec![m, k + n], rng, |g, v| g.concat_cols(v[0], v[1])));
    {
        let w = rand_t(rng, &[m, len.max(1)], -1.0, 1.0);
        let (s, l) = (start, len.max(1).min(k - start));
        cases.push(Case {
            name: "slice_cols".into(),
            inputs: vec![a.clone()],
            step: STEP,
        build: Box::new(move |g, v| {
                let out = g.slice_cols(v[0], s, l)?;
                weighted_sum(g, out, &w)
            }),
        });
    }
    cases.push(elementwise_case("concat_rows", vec![a.clone(), c.clone()], vec![2 * m, k], rng, |g, v| g.concat_rows(&[v[0], v[1]])));
    {
        let w = rand_t(rng, &[1, k], -1.0, 1.0);
        let s = m - 1;
        cases.push(Case {
            name: "slice_rows".into(),
            inputs: vec![a.clone()],
            step: STEP,
        build: Box::new(move |g, v| {
                let out = g.slice_rows(v[0], s, 1)?;
                weighted_sum(g, out, &w)
            }),
        });
    }
    {
        let w = rand_t(rng, &[ids.len(), k], -1.0, 1.0);
        let ids = ids.clone();
        cases.push(Case {
            name: "gather".into(),
            inputs: vec![table],
            step: STEP,
        build: Box::new(move |g, v| {
                let out = g.gather(v[0], &ids)?;
                weighted_sum(g, out, &w)
            }),
        });
    }
    cases.push(Case {
        name: "sum".into(),
        inputs: vec![a.clone()],
        step: STEP,
        build: Box::new(|g, v| Ok(g.sum(v[0]))),
    });
    cases.push(Case {
        name: "mean".into(),
        inputs: vec![a.clone()],
        step: STEP,
        build: Box::new(|g, v| {
            let sq = g.mul(v[0], v[0])?;
            Ok(g.mean(sq))
        }),
    });
    cases.push(elementwise_case("gru_gates", vec![xw, hw, h.clone()], vec![m, n], rng, |g, v| g.gru_gates(v[0], v[1], v[2])));
    {
        let (t, mk) = (targets.clone(), mask.clone());
        cases.push(Case {
            name: "cross_entropy_logits".into(),
            inputs: vec![a.clone()],
            step: STEP,
        build: Box::new(move |g, v| g.cross_entropy_logits(v[0], &t, &mk)),
        });
    }
    {
        let (t, mk) = (targets.clone(), mask.clone());
        cases.push(Case {
            name: "nll_probs".into(),
            inputs: vec![a.clone()],
            step: STEP,
        build: Box::new(move |g, v| {
                let p = g.softmax(v[0], 1.0)?;
                g.nll_probs(p, &t, &mk)
            }),
        });
    }
    if k >= 2 {
        cases.push(elementwise_case("cosine_distance_rows", vec![a.clone(), c.clone()], vec![m, 1], rng, |g, v| {
            g.cosine_distance_rows(v[0], v[1])
        }));
    }
    cases.push(elementwise_case("gaussian_nll_rows", vec![a.clone(), c.clone(), lv1.clone()], vec![m, 1], rng, |g, v| {
        g.gaussian_nll_rows(v[0], v[1], v[2])
    }));
    cases.push(elementwise_case("kl_diag_gaussian_rows", vec![a, lv1, c, lv2], vec![m, 1], rng, |g, v| {
        g.kl_diag_gaussian_rows(v[0], v[1], v[2], v[3])
    }));
    {
        let x = rand_t(rng, &[m, k], -1.0, 1.0);
        let wx = rand_t(rng, &[k, 3 * n], -0.8, 0.8);
        let wh = rand_t(rng, &[n, 3 * n], -0.8, 0.8);
        let bx = rand_t(rng, &[3 * n], -0.3, 0.3);
        let bh = rand_t(rng, &[3 * n], -0.3, 0.3);
        let keep = rand_t(rng, &[m, 1], 0.0, 1.0);
        let w = rand_t(rng, &[m, n], -1.0, 1.0);
        cases.push(Case {
            name: "gru_step+masked_update".into(),
            inputs: vec![x, h, wx, wh, bx, bh, keep],
            step: STEP,
        build: Box::new(move |g, v| {
                let cell = GruVars {
                    wx: v[2],
                    wh: v[3],
                    bx: v[4],
                    bh: v[5],
                };
                let h1 = gru_step(g, &cell, v[0], v[1])?;
                let out = masked_update(g, v[1], h1, v[6])?;
                weighted_sum(g, out, &w)
            }),
        });
    }
    cases
}

/// Binds all three parameter groups from graph leaves given in
/// `ModelParams::named_tensors` order.
fn bind_all(params: &ModelParams, vars: &[Var]) -> (AutoencoderVars, StyleDiscVars, LatentDiscVars) {
    let names: Vec<&str> = params.named_tensors().map(|(n, _)| n).collect();
    let get = |name: &str| vars[names.iter().position(|&n| n == name).unwrap()];
    let gru = |p: &str| GruVars {
        wx: get(&format!("{p}.wx")),
        wh: get(&format!("{p}.wh")),
        bx: get(&format!("{p}.bx")),
        bh: get(&format!("{p}.bh")),
    };
    let ae = AutoencoderVars {
        embedding: get("embedding"),
        encoder: gru("encoder.gru"),
        mu_w: get("encoder.mu.w"),
        mu_b: get("encoder.mu.b"),
        logvar_w: get("encoder.logvar.w"),
        logvar_b: get("encoder.logvar.b"),
        init_w: get("generator.init.w"),
        init_b: get("generator.init.b"),
        generator: gru("generator.gru"),
        out_w: get("generator.out.w"),
        out_b: get("generator.out.b"),
        dims: params.dims,
    };
    let d = StyleDiscVars {
        embedding: get("style_disc.embedding"),
        gru: gru("style_disc.gru"),
        out_w: get("style_disc.out.w"),
        out_b: get("style_disc.out.b"),
    };
    let dz = LatentDiscVars {
        hidden_w: get("latent_disc.hidden.w"),
        hidden_b: get("latent_disc.hidden.b"),
        out_w: get("latent_disc.out.w"),
        out_b: get("latent_disc.out.b"),
    };
    (ae, d, dz)
}

fn model_case(name: &str, params: &ModelParams, f: impl Fn(&mut Graph, &AutoencoderVars, &StyleDiscVars, &LatentDiscVars) -> Result<Var> + 'static) -> Case {
    let inputs: Vec<Tensor> = params.named_tensors().map(|(_, t)| t.clone()).collect();
    let p = params.clone();
    Case {
        name: name.to_string(),
        inputs,
        step: LOSS_STEP,
        build: Box::new(move |g, v| {
            let (ae, d, dz) = bind_all(&p, v);
            f(g, &ae, &d, &dz)
        }),
    }
}

/// Loss-term cases on a tiny model and batch.
pub fn loss_cases(params: &ModelParams, batch: &Batch, rng: &mut ChaCha8Rng) -> Vec<Case> {
    let b = batch.batch_size();
    let dz_dim = params.dims.latent;
    let styles = batch.styles().to_vec();
    let noise = rand_t(rng, &[b, dz_dim], -1.0, 1.0);
    let tau = rng.gen_range(0.5..1.0);
    let steps = batch.seq_len() - 1;
    let mut cases = Vec::new();

    {
        let batch = batch.clone();
        let noise = noise.clone();
        cases.push(model_case("loss_ae", params, move |g, ae, _, _| {
            let (mu, lv) = styledecomp::models::network::encode_hard(g, ae, &batch)?;
            let z = styledecomp::models::network::reparameterize(g, mu, lv, noise.clone())?;
            let code = g.constant(batch.style_codes(false));
            loss_ae(g, ae, &batch, z, code)
        }));
    }
    {
        let batch = batch.clone();
        let st = styles.clone();
        let hd = params.dims.disc_hidden;
        cases.push(model_case("loss_c", params, move |g, ae, d, _| {
            let (mu, _) = styledecomp::models::network::encode_hard(g, ae, &batch)?;
            let code = g.constant(one_hot_styles(&st, true));
            let soft = generate_soft(g, ae, mu, code, tau, steps)?;
            loss_c(g, d, hd, &soft, &st)
        }));
    }
    {
        let batch = batch.clone();
        let st = styles.clone();
        cases.push(model_case("loss_z", params, move |g, ae, _, _| {
            let (mu, _) = styledecomp::models::network::encode_hard(g, ae, &batch)?;
            let code = g.constant(one_hot_styles(&st, false));
            let soft = generate_soft(g, ae, mu, code, tau, steps)?;
            // Target kept differentiable here so the density term is
            // exercised in both arguments.
            loss_z(g, ae, &soft, mu)
        }));
    }
    {
        let target = rand_t(rng, &[b, dz_dim], -1.0, 1.0);
        let mu = rand_t(rng, &[b, dz_dim], -1.0, 1.0);
        let lv = rand_t(rng, &[b, dz_dim], -1.0, 1.0);
        cases.push(Case {
            name: "gaussian_nll".into(),
            inputs: vec![target, mu, lv],
            step: LOSS_STEP,
        build: Box::new(|g, v| gaussian_nll(g, v[0], v[1], v[2])),
        });
    }
    {
        let batch = batch.clone();
        let st = styles.clone();
        cases.push(model_case("loss_dz", params, move |g, ae, _, dz| {
            let (mu, _) = styledecomp::models::network::encode_hard(g, ae, &batch)?;
            loss_dz(g, dz, mu, &st)
        }));
    }
    {
        let batch = batch.clone();
        let st = styles.clone();
        cases.push(model_case("loss_cos+loss_cos_minus", params, move |g, ae, _, _| {
            let (mu, _) = styledecomp::models::network::encode_hard(g, ae, &batch)?;
            let (a, b) = loss_cos_pair(g, ae, mu, &st, tau, steps)?;
            let b2 = g.affine(b, 0.7, 0.0);
            g.add(a, b2)
        }));
    }
    for variant in ArchitectureVariant::ALL {
        let batch = batch.clone();
        let noise = noise.clone();
        let hd = params.dims.disc_hidden;
        cases.push(model_case(&format!("objective[{variant}]"), params, move |g, ae, d, dz| {
            let spec = ForwardSpec {
                variant,
                tau,
                noise: Some(noise.clone()),
                style_loss_code: StyleLossCode::True,
                disc_hidden: hd,
            };
            let terms = forward_terms(g, ae, d, dz, &batch, &spec)?;
            // loss_z targets a detached z, which finite differences cannot see;
            // that term is checked on its own above.
            let lambdas = Lambdas { z: 0.0, ..Lambdas::default() };
            total_objective_graph(g, variant, &terms.losses, &lambdas)
        }));
    }
    cases
}

/// Runs `configs` random configurations of every op and loss case.
pub fn run_all(seed: u64, op_configs: usize, loss_configs: usize) -> Vec<CaseResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    for _ in 0..op_configs {
        for case in op_cases(&mut rng) {
            results.push(check(&case, &mut rng));
        }
    }
    for i in 0..loss_configs {
        let (_, _, params, batch) = super::tiny_setup(seed.wrapping_add(i as u64), 4);
        for case in loss_cases(&params, &batch, &mut rng) {
            results.push(check(&case, &mut rng));
        }
    }
    results
}

