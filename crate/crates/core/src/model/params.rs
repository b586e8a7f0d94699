// SPDX-License-Identifier: Apache-2.0

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, EDGE_ATTR_DIM, LAYERS};

/// Attention head: node transform `w` (c_out × c_in) and score vector `a`
/// over (receiver ‖ sender ‖ edge attributes), length 2·c_out + 5.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w: Array2<f64>,
    pub a: Array1<f64>,
}

/// `heads[m][r]`: head `m`, relation `r` (one relation unless the model
/// runs separate passes per edge type).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<Vec<HeadParams>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    pub mlp_w1: Array2<f64>,
    pub mlp_b1: Array1<f64>,
    pub mlp_w2: Array1<f64>,
    pub mlp_b2: f64,
}

/// (c_in, c_out) of each layer.
pub(crate) fn layer_dims(cfg: &ModelConfig) -> [(usize, usize); LAYERS] {
    let per_head = cfg.hidden_dim / cfg.heads;
    [
        (cfg.embed_dim, per_head),
        (cfg.hidden_dim, per_head),
        (cfg.hidden_dim, cfg.hidden_dim),
    ]
}

impl ModelParams {
    /// All-zero parameters of the right shapes.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let layers = layer_dims(cfg)
            .iter()
            .map(|&(cin, c)| LayerParams {
                heads: (0..cfg.heads)
                    .map(|_| {
                        (0..cfg.relations())
                            .map(|_| HeadParams {
                                w: Array2::zeros((c, cin)),
                                a: Array1::zeros(2 * c + EDGE_ATTR_DIM),
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        ModelParams {
            layers,
            mlp_w1: Array2::zeros((cfg.mlp_hidden, 2 * cfg.hidden_dim)),
            mlp_b1: Array1::zeros(cfg.mlp_hidden),
            mlp_w2: Array1::zeros(cfg.mlp_hidden),
            mlp_b2: 0.0,
        }
    }

    /// Uniform in ±1/√fan_in, drawn from ChaCha8 seeded with `seed`, in
    /// the order of [`ModelParams::to_flat`].
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut p = ModelParams::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |xs: &mut dyn Iterator<Item = &mut f64>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in xs {
                *x = rng.gen_range(-bound..bound);
            }
        };
        for layer in &mut p.layers {
            for head in &mut layer.heads {
                for hp in head {
                    let fan_w = hp.w.ncols();
                    let fan_a = hp.a.len();
                    fill(&mut hp.w.iter_mut(), fan_w);
                    fill(&mut hp.a.iter_mut(), fan_a);
                }
            }
        }
        let fan1 = p.mlp_w1.ncols();
        fill(&mut p.mlp_w1.iter_mut(), fan1);
        fill(&mut p.mlp_b1.iter_mut(), fan1);
        let fan2 = p.mlp_w2.len();
        fill(&mut p.mlp_w2.iter_mut(), fan2);
        fill(&mut std::iter::once(&mut p.mlp_b2), fan2);
        Ok(p)
    }

    fn visit(&self, f: &mut dyn FnMut(f64)) {
        for layer in &self.layers {
            for head in &layer.heads {
                for hp in head {
                    hp.w.iter().for_each(|&x| f(x));
                    hp.a.iter().for_each(|&x| f(x));
                }
            }
        }
        self.mlp_w1.iter().for_each(|&x| f(x));
        self.mlp_b1.iter().for_each(|&x| f(x));
        self.mlp_w2.iter().for_each(|&x| f(x));
        f(self.mlp_b2);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        for layer in &mut self.layers {
            for head in &mut layer.heads {
                for hp in head {
                    hp.w.iter_mut().for_each(&mut *f);
                    hp.a.iter_mut().for_each(&mut *f);
                }
            }
        }
        self.mlp_w1.iter_mut().for_each(&mut *f);
        self.mlp_b1.iter_mut().for_each(&mut *f);
        self.mlp_w2.iter_mut().for_each(&mut *f);
        f(&mut self.mlp_b2);
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Every parameter in a fixed order: layers, heads, relations (`w`
    /// row-major, then `a`), then the MLP.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        self.visit(&mut |x| v.push(x));
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut it = flat.iter();
        self.visit_mut(&mut |x| *x = *it.next().unwrap());
    }

    /// `self += scale · other`.
    pub fn axpy(&mut self, scale: f64, other: &ModelParams) {
        let flat = other.to_flat();
        let mut it = flat.iter();
        self.visit_mut(&mut |x| *x += scale * it.next().unwrap());
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |x| ok &= x.is_finite());
        ok
    }

    pub fn to_doc(&self) -> ParamsDoc {
        let mat = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
        ParamsDoc {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.heads
                        .iter()
                        .map(|h| {
                            h.iter()
                                .map(|hp| HeadDoc {
                                    w: mat(&hp.w),
                                    a: hp.a.to_vec(),
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            mlp_w1: mat(&self.mlp_w1),
            mlp_b1: self.mlp_b1.to_vec(),
            mlp_w2: self.mlp_w2.to_vec(),
            mlp_b2: self.mlp_b2,
        }
    }

    /// Rebuilds parameters from their document form, checking shapes
    /// against `cfg`.
    pub fn from_doc(cfg: &ModelConfig, doc: &ParamsDoc) -> Result<Self, ModelError> {
        let mut p = ModelParams::zeros(cfg);
        let bad = |what: &str| ModelError::ShapeMismatch(format!("parameter {what} does not match the configuration"));
        let fill_mat = |m: &mut Array2<f64>, rows: &[Vec<f64>], what: &str| -> Result<(), ModelError> {
            if rows.len() != m.nrows() || rows.iter().any(|r| r.len() != m.ncols()) {
                return Err(bad(what));
            }
            for (i, r) in rows.iter().enumerate() {
                for (j, &x) in r.iter().enumerate() {
                    m[(i, j)] = x;
                }
            }
            Ok(())
        };
        let fill_vec = |v: &mut Array1<f64>, xs: &[f64], what: &str| -> Result<(), ModelError> {
            if xs.len() != v.len() {
                return Err(bad(what));
            }
            v.iter_mut().zip(xs).for_each(|(a, &b)| *a = b);
            Ok(())
        };
        if doc.layers.len() != p.layers.len() {
            return Err(bad("layers"));
        }
        for (lp, ld) in p.layers.iter_mut().zip(&doc.layers) {
            if ld.len() != lp.heads.len() {
                return Err(bad("heads"));
            }
            for (hp, hd) in lp.heads.iter_mut().zip(ld) {
                if hd.len() != hp.len() {
                    return Err(bad("relations"));
                }
                for (r, rd) in hp.iter_mut().zip(hd) {
                    fill_mat(&mut r.w, &rd.w, "w")?;
                    fill_vec(&mut r.a, &rd.a, "a")?;
                }
            }
        }
        fill_mat(&mut p.mlp_w1, &doc.mlp_w1, "mlp_w1")?;
        fill_vec(&mut p.mlp_b1, &doc.mlp_b1, "mlp_b1")?;
        fill_vec(&mut p.mlp_w2, &doc.mlp_w2, "mlp_w2")?;
        p.mlp_b2 = doc.mlp_b2;
        if !p.all_finite() {
            return Err(ModelError::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadDoc {
    pub w: Vec<Vec<f64>>,
    pub a: Vec<f64>,
}

/// Parameters as nested arrays: `layers[l][head][relation]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub layers: Vec<Vec<Vec<HeadDoc>>>,
    pub mlp_w1: Vec<Vec<f64>>,
    pub mlp_b1: Vec<f64>,
    pub mlp_w2: Vec<f64>,
    pub mlp_b2: f64,
}
