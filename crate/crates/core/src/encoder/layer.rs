//! One post-norm transformer encoder layer with its hand-written backward pass.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;

use crate::encoder::config::ModelConfig;
use crate::encoder::params::LayerParams;
use crate::scalar::Scalar;

pub(crate) const LN_EPS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct NormCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
}

pub(crate) fn layer_norm<T: Scalar>(
    x: &Array2<T>,
    gamma: &Array1<T>,
    beta: &Array1<T>,
) -> (Array2<T>, NormCache<T>) {
    let d = T::lit(x.ncols() as f64);
    let eps = T::lit(LN_EPS);
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().fold(T::zero(), |a, &v| a + v * v) / d;
        *inv = T::one() / (var + eps).sqrt();
        let i = *inv;
        row.mapv_inplace(|v| v * i);
    }
    let y = &xhat * gamma + beta;
    (y, NormCache { xhat, inv_std })
}

/// Returns dL/dx and accumulates gain and bias gradients.
pub(crate) fn layer_norm_backward<T: Scalar>(
    dy: &Array2<T>,
    cache: &NormCache<T>,
    gamma: &Array1<T>,
    dgamma: Option<(&mut Array1<T>, &mut Array1<T>)>,
) -> Array2<T> {
    if let Some((dg, db)) = dgamma {
        *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
        *db += &dy.sum_axis(Axis(0));
    }
    let d = T::lit(dy.ncols() as f64);
    let mut dx = dy * gamma;
    for ((mut row, xhat), &inv) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let sum = row.sum();
        let dot = row.iter().zip(xhat).fold(T::zero(), |a, (&g, &h)| a + g * h);
        Zip::from(&mut row).and(&xhat).for_each(|g, &h| {
            *g = inv * (*g - sum / d - h * dot / d);
        });
    }
    dx
}

const GELU_A: f64 = 0.044715;

/// Tanh approximation of GELU.
pub(crate) fn gelu<T: Scalar>(u: T) -> T {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let half = T::lit(0.5);
    half * u * (T::one() + (c * (u + T::lit(GELU_A) * u * u * u)).tanh())
}

pub(crate) fn gelu_grad<T: Scalar>(u: T) -> T {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let half = T::lit(0.5);
    let a = T::lit(GELU_A);
    let t = (c * (u + a * u * u * u)).tanh();
    half * (T::one() + t) + half * u * (T::one() - t * t) * c * (T::one() + T::lit(3.0) * a * u * u)
}

/// Row softmax over the columns where `keys` is true; other columns get exactly 0.
pub(crate) fn masked_softmax<T: Scalar>(scores: &mut Array2<T>, keys: &[bool]) {
    for mut row in scores.rows_mut() {
        let max = row
            .iter()
            .zip(keys)
            .filter(|(_, &k)| k)
            .fold(T::neg_infinity(), |m, (&v, _)| m.max(v));
        let mut sum = T::zero();
        for (v, &k) in row.iter_mut().zip(keys) {
            *v = if k { (*v - max).exp() } else { T::zero() };
            sum += *v;
        }
        row.mapv_inplace(|v| v / sum);
    }
}

pub(crate) fn dropout_mask<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    shape: (usize, usize),
    rate: f64,
) -> Array2<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < rate {
            T::zero()
        } else {
            keep
        }
    })
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<T> {
    pub x: Array2<T>,
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    ctx: Array2<T>,
    attn_drop: Option<Array2<T>>,
    norm1: NormCache<T>,
    y1: Array2<T>,
    u: Array2<T>,
    g: Array2<T>,
    ffn_drop: Option<Array2<T>>,
    norm2: NormCache<T>,
}

pub(crate) struct LayerOutput<T> {
    pub y: Array2<T>,
    pub probs: Vec<Array2<T>>,
    pub cache: Option<LayerCache<T>>,
}

pub(crate) fn layer_forward<T: Scalar, R: Rng + ?Sized>(
    x: &Array2<T>,
    p: &LayerParams<T>,
    config: &ModelConfig,
    keys: &[bool],
    dropout: Option<&mut R>,
    keep_cache: bool,
) -> LayerOutput<T> {
    let n = x.nrows();
    let dh = config.head_dim();
    let scale = T::lit(1.0 / (dh as f64).sqrt());
    let q = x.dot(&p.wq) + &p.bq;
    let k = x.dot(&p.wk) + &p.bk;
    let v = x.dot(&p.wv) + &p.bv;
    let mut ctx = Array2::zeros((n, config.hidden_size));
    let mut probs = Vec::with_capacity(config.num_heads);
    for h in 0..config.num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut a = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        masked_softmax(&mut a, keys);
        ctx.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
        probs.push(a);
    }
    let mut attn = ctx.dot(&p.wo) + &p.bo;
    let (attn_drop, ffn_drop) = match dropout {
        Some(rng) if config.dropout_rate > 0.0 => {
            let shape = (n, config.hidden_size);
            let m1 = dropout_mask(rng, shape, config.dropout_rate);
            let m2 = dropout_mask(rng, shape, config.dropout_rate);
            (Some(m1), Some(m2))
        }
        _ => (None, None),
    };
    if let Some(m) = &attn_drop {
        attn *= m;
    }
    let (y1, norm1) = layer_norm(&(x + &attn), &p.ln1_gamma, &p.ln1_beta);
    let u = y1.dot(&p.w1) + &p.b1;
    let g = u.mapv(gelu);
    let mut f = g.dot(&p.w2) + &p.b2;
    if let Some(m) = &ffn_drop {
        f *= m;
    }
    let (y, norm2) = layer_norm(&(&y1 + &f), &p.ln2_gamma, &p.ln2_beta);
    let cache = keep_cache.then(|| LayerCache {
        x: x.clone(),
        q,
        k,
        v,
        ctx,
        attn_drop,
        norm1,
        y1,
        u,
        g,
        ffn_drop,
        norm2,
    });
    LayerOutput { y, probs, cache }
}

/// Backpropagates `dy` through one layer. Parameter gradients are accumulated
/// into `grads` when it is given; the input gradient is always returned.
pub(crate) fn layer_backward<T: Scalar>(
    dy: &Array2<T>,
    cache: &LayerCache<T>,
    probs: &[Array2<T>],
    p: &LayerParams<T>,
    config: &ModelConfig,
    mut grads: Option<&mut LayerParams<T>>,
) -> Array2<T> {
    let dh = config.head_dim();
    let scale = T::lit(1.0 / (dh as f64).sqrt());

    // second residual block
    let dr2 = layer_norm_backward(
        dy,
        &cache.norm2,
        &p.ln2_gamma,
        grads.as_deref_mut().map(|g| (&mut g.ln2_gamma, &mut g.ln2_beta)),
    );
    let mut df = dr2.clone();
    if let Some(m) = &cache.ffn_drop {
        df *= m;
    }
    if let Some(g) = grads.as_deref_mut() {
        g.w2 += &cache.g.t().dot(&df);
        g.b2 += &df.sum_axis(Axis(0));
    }
    let mut du = df.dot(&p.w2.t());
    Zip::from(&mut du)
        .and(&cache.u)
        .for_each(|d, &u| *d *= gelu_grad(u));
    if let Some(g) = grads.as_deref_mut() {
        g.w1 += &cache.y1.t().dot(&du);
        g.b1 += &du.sum_axis(Axis(0));
    }
    let dy1 = dr2 + du.dot(&p.w1.t());

    // first residual block
    let dr1 = layer_norm_backward(
        &dy1,
        &cache.norm1,
        &p.ln1_gamma,
        grads.as_deref_mut().map(|g| (&mut g.ln1_gamma, &mut g.ln1_beta)),
    );
    let mut da = dr1.clone();
    if let Some(m) = &cache.attn_drop {
        da *= m;
    }
    if let Some(g) = grads.as_deref_mut() {
        g.wo += &cache.ctx.t().dot(&da);
        g.bo += &da.sum_axis(Axis(0));
    }
    let dctx = da.dot(&p.wo.t());
    let shape = cache.q.raw_dim();
    let mut dq = Array2::zeros(shape);
    let mut dk = Array2::zeros(shape);
    let mut dv = Array2::zeros(shape);
    for (h, a) in probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dctx_h = dctx.slice(cols);
        let da_h = dctx_h.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&a.t().dot(&dctx_h));
        // softmax backward: dS = A * (dA - rowsum(dA * A))
        let mut ds = &da_h * a;
        let inner = ds.sum_axis(Axis(1));
        Zip::from(ds.rows_mut())
            .and(a.rows())
            .and(&inner)
            .for_each(|mut row, arow, &c| {
                Zip::from(&mut row).and(&arow).for_each(|v, &aij| *v -= aij * c);
            });
        ds *= scale;
        dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
    }
    if let Some(g) = grads {
        let xt = cache.x.t();
        g.wq += &xt.dot(&dq);
        g.bq += &dq.sum_axis(Axis(0));
        g.wk += &xt.dot(&dk);
        g.bk += &dk.sum_axis(Axis(0));
        g.wv += &xt.dot(&dv);
        g.bv += &dv.sum_axis(Axis(0));
    }
    dr1 + dq.dot(&p.wq.t()) + dk.dot(&p.wk.t()) + dv.dot(&p.wv.t())
}
