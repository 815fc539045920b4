use ndarray::{Array1, Array2, Array4, Axis};

use super::config::NetworkConfig;
use super::params::NetworkParams;
use crate::domain::Field;
use crate::error::{Error, Result};

/// An observation paired with the initial value that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub input: Field,
    pub target: Field,
}

impl TrainingSample {
    pub fn new(input: Field, target: Field) -> Result<Self> {
        target.check_compatible(input.grid(), input.components())?;
        Ok(Self { input, target })
    }
}

/// Per-channel activations, each `(M, batch)` so one row is one grid point.
type Channels = Vec<Array2<f64>>;

struct Cache {
    x: Channels,
    z1: Channels,
    h: Channels,
    s2: Channels,
    y: Channels,
    out: Channels,
}

fn check_input(cfg: &NetworkConfig, f: &Field, layer: &str) -> Result<()> {
    if f.components() != cfg.channels || f.grid().shape() != cfg.input_shape {
        return Err(Error::dimension(format!(
            "layer {layer}: expected {} channels on {:?}, got {} on {:?}",
            cfg.channels,
            cfg.input_shape,
            f.components(),
            f.grid().shape()
        )));
    }
    Ok(())
}

fn check_params(cfg: &NetworkConfig, p: &NetworkParams) -> Result<()> {
    let (k, m, h) = (cfg.channels, cfg.points(), cfg.hidden());
    let (r1, c1) = cfg.kernel_shape(cfg.conv1_kernel);
    let (r2, c2) = cfg.kernel_shape(cfg.conv2_kernel);
    let bad = |layer: &str| {
        Err(Error::dimension(format!(
            "layer {layer}: parameter shape does not match config"
        )))
    };
    if p.conv1_w.dim() != (k, k, r1, c1) || p.conv1_b.len() != k {
        return bad("conv1");
    }
    if p.fc1_w.len() != k
        || p.fc1_b.len() != k
        || p.fc1_w.iter().any(|w| w.dim() != (h, m))
        || p.fc1_b.iter().any(|b| b.len() != h)
    {
        return bad("fc1");
    }
    if p.fc2_w.len() != k
        || p.fc2_b.len() != k
        || p.fc2_w.iter().any(|w| w.dim() != (m, h))
        || p.fc2_b.iter().any(|b| b.len() != m)
    {
        return bad("fc2");
    }
    if p.conv2_w.dim() != (k, k, r2, c2) || p.conv2_b.len() != k {
        return bad("conv2");
    }
    Ok(())
}

/// Visits the contiguous row segments of a same-padded correlation:
/// `f(k, c, r, s, out_start, in_start, len)` with offsets in points.
fn for_each_segment(
    nx: usize,
    ny: usize,
    w: &Array4<f64>,
    mut f: impl FnMut(usize, usize, usize, usize, usize, usize, usize),
) {
    let (ko, ki, kr, kc) = w.dim();
    let (rr, rc) = ((kr / 2) as isize, (kc / 2) as isize);
    let (nxi, nyi) = (nx as isize, ny as isize);
    for k in 0..ko {
        for c in 0..ki {
            for r in 0..kr {
                let dy = r as isize - rr;
                for s in 0..kc {
                    let dx = s as isize - rc;
                    let ix0 = (-dx).max(0);
                    let ix1 = nxi.min(nxi - dx);
                    if ix1 <= ix0 {
                        continue;
                    }
                    for iy in (-dy).max(0)..nyi.min(nyi - dy) {
                        let p = (iy * nxi + ix0) as usize;
                        let q = ((iy + dy) * nxi + ix0 + dx) as usize;
                        f(k, c, r, s, p, q, (ix1 - ix0) as usize);
                    }
                }
            }
        }
    }
}

fn conv_forward(
    cfg: &NetworkConfig,
    w: &Array4<f64>,
    b: &Array1<f64>,
    input: &Channels,
) -> Channels {
    let bs = input[0].ncols();
    let m = cfg.points();
    let mut out: Channels = b.iter().map(|&v| Array2::from_elem((m, bs), v)).collect();
    for_each_segment(cfg.nx(), cfg.ny(), w, |k, c, r, s, p, q, len| {
        let wv = w[[k, c, r, s]];
        if wv == 0.0 {
            return;
        }
        let o = &mut out[k].as_slice_mut().expect("standard layout")[p * bs..(p + len) * bs];
        let i = &input[c].as_slice().expect("standard layout")[q * bs..(q + len) * bs];
        for (a, x) in o.iter_mut().zip(i) {
            *a += wv * x;
        }
    });
    out
}

/// Returns kernel and bias gradients, plus the input gradient when asked.
fn conv_backward(
    cfg: &NetworkConfig,
    w: &Array4<f64>,
    input: &Channels,
    dout: &Channels,
    want_input: bool,
) -> (Array4<f64>, Array1<f64>, Option<Channels>) {
    let bs = input[0].ncols();
    let mut dw = Array4::zeros(w.dim());
    let db = Array1::from_iter(dout.iter().map(|d| d.sum()));
    let mut din: Option<Channels> =
        want_input.then(|| input.iter().map(|x| Array2::zeros(x.dim())).collect());
    for_each_segment(cfg.nx(), cfg.ny(), w, |k, c, r, s, p, q, len| {
        let o = &dout[k].as_slice().expect("standard layout")[p * bs..(p + len) * bs];
        let i = &input[c].as_slice().expect("standard layout")[q * bs..(q + len) * bs];
        dw[[k, c, r, s]] += o.iter().zip(i).map(|(a, b)| a * b).sum::<f64>();
        if let Some(din) = din.as_mut() {
            let wv = w[[k, c, r, s]];
            let d = &mut din[c].as_slice_mut().expect("standard layout")[q * bs..(q + len) * bs];
            for (a, g) in d.iter_mut().zip(o) {
                *a += wv * g;
            }
        }
    });
    (dw, db, din)
}

/// Matrix products may come back column-major; the slice kernels need row-major.
fn row_major(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn add_bias(a: Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut a = row_major(a);
    for (mut row, &v) in a.rows_mut().into_iter().zip(b) {
        row += v;
    }
    a
}

fn gather(cfg: &NetworkConfig, fields: &[&Field], scale: f64) -> Channels {
    let (k, m, bs) = (cfg.channels, cfg.points(), fields.len());
    (0..k)
        .map(|c| {
            let mut a = Array2::zeros((m, bs));
            for (b, f) in fields.iter().enumerate() {
                a.column_mut(b).assign(&f.component(c));
            }
            a * scale
        })
        .collect()
}

fn forward_cached(cfg: &NetworkConfig, p: &NetworkParams, inputs: &[&Field]) -> Result<Cache> {
    cfg.validate()?;
    check_params(cfg, p)?;
    for f in inputs {
        check_input(cfg, f, "input")?;
    }
    let x = gather(cfg, inputs, cfg.input_scale);
    let z1 = conv_forward(cfg, &p.conv1_w, &p.conv1_b, &x);
    let mut h = Vec::with_capacity(cfg.channels);
    let mut s2 = Vec::with_capacity(cfg.channels);
    let mut y = Vec::with_capacity(cfg.channels);
    for c in 0..cfg.channels {
        let hc = add_bias(p.fc1_w[c].dot(&z1[c]), &p.fc1_b[c]).mapv_into(f64::tanh);
        let sc = add_bias(p.fc2_w[c].dot(&hc), &p.fc2_b[c]);
        y.push(row_major(sc.mapv(f64::sin)));
        h.push(hc);
        s2.push(sc);
    }
    let out = conv_forward(cfg, &p.conv2_w, &p.conv2_b, &y);
    Ok(Cache {
        x,
        z1,
        h,
        s2,
        y,
        out,
    })
}

fn scatter(cfg: &NetworkConfig, like: &[&Field], out: &Channels) -> Result<Vec<Field>> {
    (0..like.len())
        .map(|b| {
            let mut v = Array2::zeros((cfg.channels, cfg.points()));
            for c in 0..cfg.channels {
                v.row_mut(c).assign(&(&out[c].column(b) * cfg.output_scale));
            }
            Field::new(*like[b].grid(), v)
        })
        .collect()
}

pub fn forward_pass(cfg: &NetworkConfig, p: &NetworkParams, input: &Field) -> Result<Field> {
    Ok(forward_batch(cfg, p, &[input])?.pop().expect("one output"))
}

pub fn forward_batch(
    cfg: &NetworkConfig,
    p: &NetworkParams,
    inputs: &[&Field],
) -> Result<Vec<Field>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let cache = forward_cached(cfg, p, inputs)?;
    scatter(cfg, inputs, &cache.out)
}

/// Mean of squared differences over all K·M entries.
pub fn loss_mse(pred: &Field, target: &Field) -> Result<f64> {
    target.check_compatible(pred.grid(), pred.components())?;
    let n = pred.values().len() as f64;
    Ok((pred.values() - target.values()).mapv(|v| v * v).sum() / n)
}

/// Batch-mean loss and its gradient with respect to every parameter.
pub fn backprop_batch(
    cfg: &NetworkConfig,
    p: &NetworkParams,
    samples: &[&TrainingSample],
) -> Result<(f64, NetworkParams)> {
    if samples.is_empty() {
        return Err(Error::precondition("backprop needs at least one sample"));
    }
    let inputs: Vec<&Field> = samples.iter().map(|s| &s.input).collect();
    let cache = forward_cached(cfg, p, &inputs)?;
    for s in samples {
        check_input(cfg, &s.target, "target")?;
    }
    let targets = gather(
        cfg,
        &samples.iter().map(|s| &s.target).collect::<Vec<_>>(),
        1.0,
    );
    let denom = (samples.len() * cfg.channels * cfg.points()) as f64;
    let mut loss = 0.0;
    let mut dout: Channels = Vec::with_capacity(cfg.channels);
    for c in 0..cfg.channels {
        let diff = &cache.out[c] * cfg.output_scale - &targets[c];
        loss += diff.mapv(|v| v * v).sum();
        dout.push(diff * (2.0 * cfg.output_scale / denom));
    }
    loss /= denom;

    let mut g = NetworkParams::zeros(cfg);
    let (dw2, db2, dy) = conv_backward(cfg, &p.conv2_w, &cache.y, &dout, true);
    g.conv2_w = dw2;
    g.conv2_b = db2;
    let dy = dy.expect("requested");
    let mut dz1: Channels = Vec::with_capacity(cfg.channels);
    for c in 0..cfg.channels {
        let ds2 = &dy[c] * &cache.s2[c].mapv(f64::cos);
        g.fc2_w[c] = row_major(ds2.dot(&cache.h[c].t()));
        g.fc2_b[c] = ds2.sum_axis(Axis(1));
        let dh = p.fc2_w[c].t().dot(&ds2);
        let ds1 = dh * &cache.h[c].mapv(|v| 1.0 - v * v);
        g.fc1_w[c] = row_major(ds1.dot(&cache.z1[c].t()));
        g.fc1_b[c] = ds1.sum_axis(Axis(1));
        dz1.push(row_major(p.fc1_w[c].t().dot(&ds1)));
    }
    let (dw1, db1, _) = conv_backward(cfg, &p.conv1_w, &cache.x, &dz1, false);
    g.conv1_w = dw1;
    g.conv1_b = db1;
    if !cfg.use_bias {
        g.conv1_b.fill(0.0);
        g.conv2_b.fill(0.0);
        g.fc1_b.iter_mut().chain(g.fc2_b.iter_mut()).for_each(|b| b.fill(0.0));
    }
    if let Some(name) = g.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    Ok((loss, g))
}

pub fn backprop(
    cfg: &NetworkConfig,
    p: &NetworkParams,
    sample: &TrainingSample,
) -> Result<(f64, NetworkParams)> {
    backprop_batch(cfg, p, &[sample])
}

/// Inference: the estimated initial value for an observation.
pub fn reconstruct(cfg: &NetworkConfig, p: &NetworkParams, observation: &Field) -> Result<Field> {
    forward_pass(cfg, p, observation)
}
