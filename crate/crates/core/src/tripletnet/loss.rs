use super::{ModelError, Result};

/// Squared Euclidean distance. Similarity is its negation, so "more similar"
/// and "closer" order pairs identically.
pub fn distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(ModelError::LengthMismatch(u.len(), v.len()));
    }
    Ok(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Hinge ranking loss `max(0, margin + D(a, p) - D(a, n))`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<f64> {
    let dap = distance(anchor, positive)?;
    let dan = distance(anchor, negative)?;
    Ok((margin + dap - dan).max(0.0))
}

/// Loss value with its gradients with respect to each of the three
/// embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// When the hinge is active: `dL/da = 2(n - p)`, `dL/dp = 2(p - a)`,
/// `dL/dn = 2(a - n)`. All zero otherwise (including exactly at the hinge).
pub fn triplet_loss_grad(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<TripletGrad> {
    let loss = triplet_loss(anchor, positive, negative, margin)?;
    let n = anchor.len();
    if loss <= 0.0 {
        return Ok(TripletGrad {
            loss,
            anchor: vec![0.0; n],
            positive: vec![0.0; n],
            negative: vec![0.0; n],
        });
    }
    let mut g = TripletGrad {
        loss,
        anchor: Vec::with_capacity(n),
        positive: Vec::with_capacity(n),
        negative: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (a, p, q) = (anchor[i], positive[i], negative[i]);
        g.anchor.push(2.0 * (q - p));
        g.positive.push(2.0 * (p - a));
        g.negative.push(2.0 * (a - q));
    }
    Ok(g)
}
