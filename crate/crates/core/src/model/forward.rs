// SPDX-License-Identifier: Apache-2.0

//! Forward pass and hand-written backward pass.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::params::{HeadParams, LayerParams, ModelParams};
use super::{AttentionMode, ModelConfig, ModelError, EDGE_ATTR_DIM};
use crate::embed::EmbeddedGraph;

/// Sender node and the attributes of its edge.
pub type Neighbour = (usize, [f64; EDGE_ATTR_DIM]);

/// Node features plus, per relation, each node's incoming neighbours
/// (sender, edge attributes), self-loop last with a zero attribute row.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub x: Array2<f64>,
    pub nbrs: Vec<Vec<Vec<Neighbour>>>,
}

impl GraphInput {
    pub fn new(g: &EmbeddedGraph, cfg: &ModelConfig) -> Result<Self, ModelError> {
        let n = g.num_nodes();
        if n == 0 {
            return Err(ModelError::ShapeMismatch("graph has no nodes".into()));
        }
        let d = g.feature_dim();
        if d != cfg.embed_dim || g.node_features.iter().any(|r| r.len() != d) {
            return Err(ModelError::ShapeMismatch(format!(
                "node features have width {d}, model expects {}",
                cfg.embed_dim
            )));
        }
        if g.edge_index.len() != g.edge_attr.len() {
            return Err(ModelError::ShapeMismatch("edge_index and edge_attr lengths differ".into()));
        }
        let mut x = Array2::zeros((n, d));
        for (i, row) in g.node_features.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                x[(i, j)] = f64::from(v);
            }
        }
        let rels = cfg.relations();
        let mut nbrs = vec![vec![Vec::new(); n]; rels];
        for (&(src, dst), attr) in g.edge_index.iter().zip(&g.edge_attr) {
            if src >= n || dst >= n {
                return Err(ModelError::ShapeMismatch(format!("edge ({src},{dst}) out of range")));
            }
            let e: [f64; EDGE_ATTR_DIM] = attr.map(f64::from);
            match cfg.attention {
                AttentionMode::Shared => nbrs[0][dst].push((src, e)),
                AttentionMode::PerEdgeType => {
                    // Relations follow the one-hot slots (CDG, DDG, AST).
                    for r in 0..rels {
                        if e[2 + r] != 0.0 {
                            nbrs[r][dst].push((src, e));
                        }
                    }
                }
            }
        }
        for rel in &mut nbrs {
            for (i, list) in rel.iter_mut().enumerate() {
                list.push((i, [0.0; EDGE_ATTR_DIM]));
            }
        }
        Ok(GraphInput { x, nbrs })
    }

    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One attention entry: sender, raw score before LeakyReLU, weight.
#[derive(Debug, Clone, Copy)]
pub struct Attn {
    pub j: usize,
    pub pre: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
struct HeadCache {
    h: Array2<f64>,
    attn: Vec<Vec<Attn>>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    x: Array2<f64>,
    /// Per head, the aggregated output summed over relations.
    o: Vec<Array2<f64>>,
    heads: Vec<Vec<HeadCache>>,
    /// Pre-activation of the averaged output (last layer only).
    mean: Option<Array2<f64>>,
}

fn head_forward(hp: &HeadParams, x: &Array2<f64>, nbrs: &[Vec<(usize, [f64; EDGE_ATTR_DIM])>], slope: f64) -> (Array2<f64>, HeadCache) {
    let c = hp.w.nrows();
    let h = x.dot(&hp.w.t());
    let a1 = hp.a.slice(s![..c]);
    let a2 = hp.a.slice(s![c..2 * c]);
    let a3 = hp.a.slice(s![2 * c..]);
    let s1 = h.dot(&a1);
    let s2 = h.dot(&a2);
    let n = x.nrows();
    let mut o = Array2::zeros((n, c));
    let mut attn = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<Attn> = nbrs[i]
            .iter()
            .map(|(j, e)| {
                let pre = s1[i] + s2[*j] + a3.dot(&ArrayView1::from(&e[..]));
                Attn { j: *j, pre, alpha: 0.0 }
            })
            .collect();
        let zmax = row.iter().map(|a| leaky(a.pre, slope)).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in &mut row {
            a.alpha = (leaky(a.pre, slope) - zmax).exp();
            total += a.alpha;
        }
        for a in &mut row {
            a.alpha /= total;
            let mut oi = o.row_mut(i);
            oi.scaled_add(a.alpha, &h.row(a.j));
        }
        attn.push(row);
    }
    (o, HeadCache { h, attn })
}

#[allow(clippy::too_many_arguments)]
fn head_backward(
    hp: &HeadParams,
    x: &Array2<f64>,
    cache: &HeadCache,
    nbrs: &[Vec<(usize, [f64; EDGE_ATTR_DIM])>],
    d_o: &Array2<f64>,
    slope: f64,
    grad: &mut HeadParams,
) -> Array2<f64> {
    let c = hp.w.nrows();
    let n = x.nrows();
    let h = &cache.h;
    let mut d_h = Array2::<f64>::zeros((n, c));
    let mut ds1 = Array1::<f64>::zeros(n);
    let mut ds2 = Array1::<f64>::zeros(n);
    let mut da3 = Array1::<f64>::zeros(EDGE_ATTR_DIM);
    for i in 0..n {
        let doi = d_o.row(i);
        let row = &cache.attn[i];
        let dalpha: Vec<f64> = row.iter().map(|a| doi.dot(&h.row(a.j))).collect();
        let weighted: f64 = row.iter().zip(&dalpha).map(|(a, d)| a.alpha * d).sum();
        for ((a, &da), (_, e)) in row.iter().zip(&dalpha).zip(&nbrs[i]) {
            d_h.row_mut(a.j).scaled_add(a.alpha, &doi);
            let dz = a.alpha * (da - weighted);
            let dpre = dz * if a.pre > 0.0 { 1.0 } else { slope };
            ds1[i] += dpre;
            ds2[a.j] += dpre;
            da3.scaled_add(dpre, &ArrayView1::from(&e[..]));
        }
    }
    let a1 = hp.a.slice(s![..c]);
    let a2 = hp.a.slice(s![c..2 * c]);
    {
        let mut ga = grad.a.slice_mut(s![..c]);
        ga += &h.t().dot(&ds1);
    }
    {
        let mut ga = grad.a.slice_mut(s![c..2 * c]);
        ga += &h.t().dot(&ds2);
    }
    {
        let mut ga = grad.a.slice_mut(s![2 * c..]);
        ga += &da3;
    }
    for i in 0..n {
        let mut r = d_h.row_mut(i);
        r.scaled_add(ds1[i], &a1);
        r.scaled_add(ds2[i], &a2);
    }
    grad.w += &d_h.t().dot(x);
    d_h.dot(&hp.w)
}

fn layer_forward(lp: &LayerParams, x: &Array2<f64>, g: &GraphInput, last: bool, slope: f64) -> (Array2<f64>, LayerCache) {
    let n = x.nrows();
    let mut os = Vec::new();
    let mut caches = Vec::new();
    for head in &lp.heads {
        let mut sum: Option<Array2<f64>> = None;
        let mut hc = Vec::new();
        for (r, hp) in head.iter().enumerate() {
            let (o, c) = head_forward(hp, x, &g.nbrs[r], slope);
            sum = Some(match sum {
                None => o,
                Some(s) => s + o,
            });
            hc.push(c);
        }
        os.push(sum.expect("at least one relation"));
        caches.push(hc);
    }
    let c = os[0].ncols();
    let (y, mean) = if last {
        let mut m = Array2::zeros((n, c));
        for o in &os {
            m += o;
        }
        m /= os.len() as f64;
        (m.mapv(elu), Some(m))
    } else {
        let mut y = Array2::zeros((n, c * os.len()));
        for (k, o) in os.iter().enumerate() {
            y.slice_mut(s![.., k * c..(k + 1) * c]).assign(&o.mapv(elu));
        }
        (y, None)
    };
    (
        y,
        LayerCache {
            x: x.clone(),
            o: os,
            heads: caches,
            mean,
        },
    )
}

fn layer_backward(lp: &LayerParams, cache: &LayerCache, dy: &Array2<f64>, g: &GraphInput, slope: f64, grad: &mut LayerParams) -> Array2<f64> {
    let k = cache.o.len();
    let c = cache.o[0].ncols();
    let mut dx = Array2::zeros(cache.x.raw_dim());
    for m in 0..k {
        let d_o = match &cache.mean {
            Some(mean) => (dy * &mean.mapv(elu_grad)) / k as f64,
            None => &dy.slice(s![.., m * c..(m + 1) * c]) * &cache.o[m].mapv(elu_grad),
        };
        for (r, hp) in lp.heads[m].iter().enumerate() {
            dx += &head_backward(hp, &cache.x, &cache.heads[m][r], &g.nbrs[r], &d_o, slope, &mut grad.heads[m][r]);
        }
    }
    dx
}

/// Everything computed by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub probability: f64,
    pub logit: f64,
    /// Final node states (N × hidden).
    pub node_states: Array2<f64>,
    layers: Vec<LayerCache>,
    pooled: Array1<f64>,
    argmax: Vec<usize>,
    mlp_pre: Array1<f64>,
}

impl ForwardPass {
    /// Attention rows of layer `l`, head `m`, relation `r`.
    pub fn attention(&self, l: usize, m: usize, r: usize) -> Vec<Vec<Attn>> {
        self.layers[l].heads[m][r].attn.clone()
    }
}

pub fn forward(p: &ModelParams, g: &GraphInput, cfg: &ModelConfig) -> ForwardPass {
    let slope = cfg.leaky_slope;
    let mut x = g.x.clone();
    let mut caches = Vec::new();
    let nl = p.layers.len();
    for (l, lp) in p.layers.iter().enumerate() {
        let (y, cache) = layer_forward(lp, &x, g, l + 1 == nl, slope);
        caches.push(cache);
        x = y;
    }
    let n = x.nrows();
    let h = x.ncols();
    let mean = x.mean_axis(Axis(0)).expect("non-empty graph");
    let mut maxv = Array1::from_elem(h, f64::NEG_INFINITY);
    let mut argmax = vec![0; h];
    for i in 0..n {
        for j in 0..h {
            if x[(i, j)] > maxv[j] {
                maxv[j] = x[(i, j)];
                argmax[j] = i;
            }
        }
    }
    let mut pooled = Array1::zeros(2 * h);
    pooled.slice_mut(s![..h]).assign(&mean);
    pooled.slice_mut(s![h..]).assign(&maxv);
    let mlp_pre = p.mlp_w1.dot(&pooled) + &p.mlp_b1;
    let hidden = mlp_pre.mapv(elu);
    let logit = p.mlp_w2.dot(&hidden) + p.mlp_b2;
    ForwardPass {
        probability: sigmoid(logit),
        logit,
        node_states: x,
        layers: caches,
        pooled,
        argmax,
        mlp_pre,
    }
}

/// Gradient of the loss with respect to every parameter, given the
/// derivative of the loss with respect to the logit.
pub fn backward(p: &ModelParams, g: &GraphInput, cfg: &ModelConfig, fp: &ForwardPass, dlogit: f64) -> ModelParams {
    let mut grad = ModelParams::zeros(cfg);
    let hidden = fp.mlp_pre.mapv(elu);
    grad.mlp_b2 = dlogit;
    grad.mlp_w2 = &hidden * dlogit;
    let dpre = &p.mlp_w2 * dlogit * &fp.mlp_pre.mapv(elu_grad);
    grad.mlp_b1 = dpre.clone();
    grad.mlp_w1 = dpre
        .view()
        .insert_axis(Axis(1))
        .dot(&fp.pooled.view().insert_axis(Axis(0)));
    let dpooled = p.mlp_w1.t().dot(&dpre);
    let (n, h) = fp.node_states.dim();
    let mut dx = Array2::zeros((n, h));
    for j in 0..h {
        let dm = dpooled[j] / n as f64;
        for i in 0..n {
            dx[(i, j)] += dm;
        }
        dx[(fp.argmax[j], j)] += dpooled[h + j];
    }
    for l in (0..p.layers.len()).rev() {
        dx = layer_backward(&p.layers[l], &fp.layers[l], &dx, g, cfg.leaky_slope, &mut grad.layers[l]);
    }
    grad
}
