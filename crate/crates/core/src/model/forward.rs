//! Forward pass, loss and analytic backward pass.
//!
//! Layer `l` computes, for every node `i` at once from layer `l - 1`:
//!
//! ```text
//! a_i   = mean_{j in N(i)} h_j              (zero when i is isolated)
//! h'_i  = relu([h_i || a_i] W_l)
//! ```
//!
//! and the classifier maps the last layer through `W_out` and a softmax.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::params::{ModelParams, CLASS_COUNT, SHS_CLASS};
use crate::error::{Result, ShsError};
use crate::features::FEATURE_COUNT;
use crate::graph::{Graph, NodeId};

pub const PROB_CLAMP: f64 = 1e-12;

/// Mean of the neighbor rows of `i` in `h`.
///
/// Summands are sorted per coordinate, which makes the result independent
/// of how nodes are numbered.
pub fn aggregate_neighbors(h: &Matrix, g: &Graph, i: NodeId) -> Vec<f64> {
    let mut out = vec![0.0; h.cols];
    let mut buf = Vec::new();
    aggregate_into(h, g.neighbors(i), &mut buf, &mut out);
    out
}

fn aggregate_into(h: &Matrix, ns: &[NodeId], buf: &mut Vec<f64>, out: &mut [f64]) {
    let deg = ns.len();
    match deg {
        0 => out.fill(0.0),
        1 => out.copy_from_slice(h.row(ns[0])),
        // Two-term sums are commutative in floating point.
        2 => {
            for (c, o) in out.iter_mut().enumerate() {
                *o = (h[(ns[0], c)] + h[(ns[1], c)]) / 2.0;
            }
        }
        _ => {
            for (c, o) in out.iter_mut().enumerate() {
                buf.clear();
                buf.extend(ns.iter().map(|&j| h[(j, c)]));
                buf.sort_unstable_by(f64::total_cmp);
                *o = buf.iter().sum::<f64>() / deg as f64;
            }
        }
    }
}

/// Concatenation `[h || a]` for every node: an `n x 2d` matrix.
fn concat_with_aggregate(h: &Matrix, g: &Graph) -> Matrix {
    let d = h.cols;
    let mut out = Matrix::zeros(h.rows, 2 * d);
    let mut buf = Vec::new();
    for i in 0..h.rows {
        let row = out.row_mut(i);
        row[..d].copy_from_slice(h.row(i));
        aggregate_into(h, g.neighbors(i), &mut buf, &mut row[d..]);
    }
    out
}

/// `relu([h_self || h_agg] W)` for a single node.
pub fn combine(h_self: &[f64], h_agg: &[f64], w: &Matrix) -> Result<Vec<f64>> {
    if h_self.len() != h_agg.len() || h_self.len() + h_agg.len() != w.rows {
        return Err(ShsError::Shape(format!(
            "self width {} and aggregate width {} against a {}x{} weight",
            h_self.len(),
            h_agg.len(),
            w.rows,
            w.cols
        )));
    }
    let x: Vec<f64> = h_self.iter().chain(h_agg).copied().collect();
    let mut out = vec![0.0; w.cols];
    w.vec_mul_into(&x, &mut out);
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(out)
}

/// Softmax class probabilities per node; column 1 is the spanner class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Vec<[f64; CLASS_COUNT]>,
}

impl Prediction {
    pub fn shs_probability(&self, i: NodeId) -> f64 {
        self.probabilities[i][SHS_CLASS]
    }

    /// Argmax label per node; exact ties go to the normal class.
    pub fn predicted_labels(&self) -> Vec<u8> {
        self.probabilities
            .iter()
            .map(|p| u8::from(p[SHS_CLASS] > p[1 - SHS_CLASS]))
            .collect()
    }
}

pub fn softmax(logits: &[f64; CLASS_COUNT]) -> [f64; CLASS_COUNT] {
    let max = logits[0].max(logits[1]);
    let e0 = (logits[0] - max).exp();
    let e1 = (logits[1] - max).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `h^0 .. h^L`; `h^L` is the final embedding `z`.
    pub embeddings: Vec<Matrix>,
    /// `[h^{l-1} || a^l]` for `l = 1..L`.
    pub concat: Vec<Matrix>,
    /// Pre-activations for `l = 1..L`.
    pub pre_activations: Vec<Matrix>,
    pub logits: Matrix,
    pub prediction: Prediction,
}

impl ForwardPass {
    pub fn embedding(&self) -> &Matrix {
        self.embeddings.last().expect("at least the input layer")
    }
}

/// Packs normalized feature rows into an `n x 3` input matrix.
pub fn input_matrix(rows: &[[f64; FEATURE_COUNT]]) -> Matrix {
    Matrix {
        rows: rows.len(),
        cols: FEATURE_COUNT,
        data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
    }
}

/// Runs every aggregation layer and the softmax head.
pub fn forward(g: &Graph, inputs: &Matrix, params: &ModelParams) -> Result<ForwardPass> {
    params.validate()?;
    if inputs.rows != g.node_count() || inputs.cols != params.dims.input {
        return Err(ShsError::Shape(format!(
            "input matrix {:?} for {} nodes and input width {}",
            inputs.shape(),
            g.node_count(),
            params.dims.input
        )));
    }
    if !inputs.all_finite() {
        return Err(ShsError::NonFiniteLayer { layer: 0 });
    }
    let mut embeddings = vec![inputs.clone()];
    let mut concat = Vec::with_capacity(params.layers.len());
    let mut pre_activations = Vec::with_capacity(params.layers.len());
    for (idx, w) in params.layers.iter().enumerate() {
        let c = concat_with_aggregate(embeddings.last().unwrap(), g);
        let z = c.matmul(w)?;
        if !z.all_finite() {
            return Err(ShsError::NonFiniteLayer { layer: idx + 1 });
        }
        let mut h = z.clone();
        h.data.iter_mut().for_each(|v| *v = v.max(0.0));
        concat.push(c);
        pre_activations.push(z);
        embeddings.push(h);
    }
    let logits = embeddings.last().unwrap().matmul(&params.head)?;
    if !logits.all_finite() {
        return Err(ShsError::NonFiniteLayer {
            layer: params.layers.len() + 1,
        });
    }
    let probabilities = (0..logits.rows)
        .map(|i| softmax(&[logits[(i, 0)], logits[(i, 1)]]))
        .collect();
    Ok(ForwardPass {
        embeddings,
        concat,
        pre_activations,
        logits,
        prediction: Prediction { probabilities },
    })
}

fn check_mask(n: usize, labels: &[u8], mask: &[NodeId]) -> Result<()> {
    if mask.is_empty() {
        return Err(ShsError::config("loss mask is empty"));
    }
    if labels.len() != n {
        return Err(ShsError::Shape(format!(
            "{} labels for {n} nodes",
            labels.len()
        )));
    }
    if let Some(&bad) = mask.iter().find(|&&i| i >= n) {
        return Err(ShsError::NodeOutOfRange { node: bad, n });
    }
    Ok(())
}

/// Mean binary cross-entropy of the spanner-class probability over `mask`.
pub fn bce_loss(pred: &Prediction, labels: &[u8], mask: &[NodeId]) -> Result<f64> {
    check_mask(pred.probabilities.len(), labels, mask)?;
    let sum: f64 = mask
        .iter()
        .map(|&i| {
            let p = pred.shs_probability(i).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if labels[i] == 1 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum();
    Ok(-sum / mask.len() as f64)
}

/// Training objective: cross-entropy plus `weight_decay / 2 * ||W||^2`.
pub fn objective(
    g: &Graph,
    inputs: &Matrix,
    params: &ModelParams,
    labels: &[u8],
    mask: &[NodeId],
    weight_decay: f64,
) -> Result<f64> {
    let pass = forward(g, inputs, params)?;
    Ok(bce_loss(&pass.prediction, labels, mask)? + 0.5 * weight_decay * params.sum_squares())
}

/// Gradient of [`objective`] with respect to every weight, plus the
/// objective value itself.
pub fn backward(
    g: &Graph,
    inputs: &Matrix,
    params: &ModelParams,
    labels: &[u8],
    mask: &[NodeId],
    weight_decay: f64,
) -> Result<(f64, ModelParams)> {
    let pass = forward(g, inputs, params)?;
    backward_from(g, &pass, params, labels, mask, weight_decay)
}

pub(crate) fn backward_from(
    g: &Graph,
    pass: &ForwardPass,
    params: &ModelParams,
    labels: &[u8],
    mask: &[NodeId],
    weight_decay: f64,
) -> Result<(f64, ModelParams)> {
    let n = g.node_count();
    let loss = bce_loss(&pass.prediction, labels, mask)?;
    let r = mask.len() as f64;

    // d loss / d logits. With p = softmax(z)[1] = sigmoid(z1 - z0) the
    // cross-entropy derivative is (p - y) / r on z1 and its negation on z0;
    // clamped probabilities have zero derivative.
    let mut d_logits = Matrix::zeros(n, CLASS_COUNT);
    for &i in mask {
        let p = pass.prediction.shs_probability(i);
        if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
            continue;
        }
        let d = (p - f64::from(labels[i])) / r;
        d_logits[(i, SHS_CLASS)] += d;
        d_logits[(i, 1 - SHS_CLASS)] -= d;
    }

    let mut grads = ModelParams::zeros(params.dims)?;
    grads.head = pass.embedding().t_matmul(&d_logits)?;
    let mut d_h = d_logits.matmul_t(&params.head)?;

    for l in (0..params.layers.len()).rev() {
        let z = &pass.pre_activations[l];
        let mut d_z = d_h;
        for (dz, &zv) in d_z.data.iter_mut().zip(&z.data) {
            if zv <= 0.0 {
                *dz = 0.0;
            }
        }
        grads.layers[l] = pass.concat[l].t_matmul(&d_z)?;
        if l == 0 {
            break;
        }
        let d_c = d_z.matmul_t(&params.layers[l])?;
        let width = pass.embeddings[l].cols;
        let mut d_prev = Matrix::zeros(n, width);
        for i in 0..n {
            let row = d_c.row(i);
            let (d_self, d_agg) = row.split_at(width);
            for (o, v) in d_prev.row_mut(i).iter_mut().zip(d_self) {
                *o += v;
            }
            let ns = g.neighbors(i);
            if ns.is_empty() {
                continue;
            }
            let scale = 1.0 / ns.len() as f64;
            for &j in ns {
                for (o, v) in d_prev.row_mut(j).iter_mut().zip(d_agg) {
                    *o += v * scale;
                }
            }
        }
        d_h = d_prev;
    }

    if weight_decay != 0.0 {
        for (gm, pm) in grads.matrices_mut().zip(params.matrices()) {
            gm.add_scaled(weight_decay, pm);
        }
    }
    Ok((loss + 0.5 * weight_decay * params.sum_squares(), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::ModelDims;
    use approx::assert_abs_diff_eq;

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let g = Graph::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let h = Matrix::from_vec(3, 2, vec![9.0, 9.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(aggregate_neighbors(&h, &g, 0), vec![0.5, 0.5]);

        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        let h = Matrix::from_vec(3, 2, vec![0.0, 0.0, 2.0, 4.0, 7.0, 7.0]).unwrap();
        assert_eq!(aggregate_neighbors(&h, &g, 0), vec![2.0, 4.0]);
        assert_eq!(aggregate_neighbors(&h, &g, 2), vec![0.0, 0.0]);
    }

    #[test]
    fn combine_examples() {
        let w = Matrix::zeros(4, 3);
        assert_eq!(combine(&[1.0, 2.0], &[3.0, 4.0], &w).unwrap(), vec![0.0; 3]);

        let id = Matrix::identity(4);
        assert_eq!(
            combine(&[1.0, -1.0], &[0.5, 0.5], &id).unwrap(),
            vec![1.0, 0.0, 0.5, 0.5]
        );
        assert!(matches!(
            combine(&[1.0], &[0.5, 0.5], &id),
            Err(ShsError::Shape(_))
        ));
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let g = triangle();
        let p = ModelParams::zeros(ModelDims::default()).unwrap();
        let x = input_matrix(&[[0.3, 0.2, 0.1]; 3]);
        let pass = forward(&g, &x, &p).unwrap();
        for row in &pass.prediction.probabilities {
            assert_eq!(*row, [0.5, 0.5]);
        }
    }

    #[test]
    fn symmetric_triangle_rows_match() {
        let g = triangle();
        let p = ModelParams::init(ModelDims::default(), 3).unwrap();
        let x = input_matrix(&[[1.0, 0.5, 0.25]; 3]);
        let pass = forward(&g, &x, &p).unwrap();
        let probs = &pass.prediction.probabilities;
        assert_eq!(probs[0], probs[1]);
        assert_eq!(probs[1], probs[2]);
    }

    #[test]
    fn non_finite_input_is_reported() {
        let g = triangle();
        let p = ModelParams::init(ModelDims::default(), 3).unwrap();
        let x = input_matrix(&[[f64::NAN, 0.0, 0.0]; 3]);
        assert!(matches!(
            forward(&g, &x, &p),
            Err(ShsError::NonFiniteLayer { layer: 0 })
        ));
        let mut big = p.clone();
        big.layers[0].data.iter_mut().for_each(|v| *v = f64::MAX);
        let x = input_matrix(&[[1.0, 1.0, 1.0]; 3]);
        assert!(matches!(
            forward(&g, &x, &big),
            Err(ShsError::NonFiniteLayer { layer: 1 })
        ));
    }

    #[test]
    fn bce_examples() {
        let pred = Prediction {
            probabilities: vec![[0.0, 1.0]],
        };
        assert!(bce_loss(&pred, &[1], &[0]).unwrap() < 1e-11);

        let pred = Prediction {
            probabilities: vec![[0.5, 0.5], [0.5, 0.5]],
        };
        assert_abs_diff_eq!(
            bce_loss(&pred, &[1, 0], &[0, 1]).unwrap(),
            2f64.ln(),
            epsilon = 1e-12
        );

        let pred = Prediction {
            probabilities: vec![[0.1, 0.9]],
        };
        assert_abs_diff_eq!(
            bce_loss(&pred, &[0], &[0]).unwrap(),
            -(0.1f64.ln()),
            epsilon = 1e-12
        );

        assert!(matches!(
            bce_loss(&pred, &[0], &[]),
            Err(ShsError::InvalidConfig(_))
        ));
    }

    #[test]
    fn saturated_correct_predictions_have_no_gradient() {
        // Head weights push every node to the spanner class with huge margin.
        let g = triangle();
        let mut p = ModelParams::zeros(ModelDims::with_hidden(4)).unwrap();
        for m in &mut p.layers {
            m.data.iter_mut().for_each(|v| *v = 1.0);
        }
        p.head.data.iter_mut().enumerate().for_each(|(k, v)| {
            *v = if k % 2 == SHS_CLASS { 100.0 } else { -100.0 };
        });
        let x = input_matrix(&[[1.0, 1.0, 1.0]; 3]);
        let (_, grads) = backward(&g, &x, &p, &[1, 1, 1], &[0, 1, 2], 0.0).unwrap();
        assert!(grads.norm() < 1e-6);
    }

    #[test]
    fn weight_decay_component_is_linear() {
        let g = triangle();
        let p = ModelParams::init(ModelDims::with_hidden(4), 5).unwrap();
        let x = input_matrix(&[[1.0, 0.5, 0.2], [0.1, 0.9, 0.4], [0.3, 0.3, 0.3]]);
        let labels = [1, 0, 0];
        let mask = [0, 1, 2];
        let (_, g0) = backward(&g, &x, &p, &labels, &mask, 0.0).unwrap();
        let (_, g1) = backward(&g, &x, &p, &labels, &mask, 0.01).unwrap();
        let (_, g2) = backward(&g, &x, &p, &labels, &mask, 0.02).unwrap();
        for ((a, b), c) in g0.flat().iter().zip(g1.flat()).zip(g2.flat()) {
            let d1 = b - a;
            let d2 = c - a;
            assert_abs_diff_eq!(d2, 2.0 * d1, epsilon = 1e-15);
        }
    }
}
