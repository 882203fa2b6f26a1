//! Grouped, dilated 1-D cross-correlation over `[B, C, L]` arrays.

/// How the input is padded before the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero-pad `dilation * (kernel - 1)` samples on the left so that the
    /// output keeps length `L` and index `i` only sees inputs `<= i`.
    CausalLeft,
    /// No padding; output length is `L - dilation * (kernel - 1)`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub groups: usize,
    pub dilation: usize,
    pub padding: Padding,
}

impl Conv1dSpec {
    pub fn causal(groups: usize, dilation: usize) -> Self {
        Self {
            groups,
            dilation,
            padding: Padding::CausalLeft,
        }
    }

    pub fn pointwise() -> Self {
        Self::causal(1, 1)
    }
}

/// Resolved geometry of one convolution call.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len_in: usize,
    pub len_out: usize,
    pub kernel: usize,
    pub groups: usize,
    pub dilation: usize,
    pub pad_left: usize,
}

impl ConvGeom {
    fn in_per_group(&self) -> usize {
        self.c_in / self.groups
    }

    fn out_per_group(&self) -> usize {
        self.c_out / self.groups
    }

    /// Output index range `[lo, hi)` for which tap `k` reads a real input
    /// sample, plus the signed shift from output to input index.
    fn tap_range(&self, k: usize) -> (usize, usize, isize) {
        let shift = (k * self.dilation) as isize - self.pad_left as isize;
        let lo = (-shift).max(0) as usize;
        let hi = (self.len_in as isize - shift).clamp(0, self.len_out as isize) as usize;
        if lo >= hi {
            return (0, 0, 0);
        }
        (lo, hi, shift)
    }
}

pub(crate) fn conv1d_forward(g: &ConvGeom, input: &[f64], weight: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; g.batch * g.c_out * g.len_out];
    let (ipg, opg) = (g.in_per_group(), g.out_per_group());
    for b in 0..g.batch {
        for oc in 0..g.c_out {
            let grp = oc / opg;
            let row = &mut out[(b * g.c_out + oc) * g.len_out..][..g.len_out];
            if let Some(bias) = bias {
                row.fill(bias[oc]);
            }
            for icl in 0..ipg {
                let ic = grp * ipg + icl;
                let x = &input[(b * g.c_in + ic) * g.len_in..][..g.len_in];
                for k in 0..g.kernel {
                    let w = weight[(oc * ipg + icl) * g.kernel + k];
                    if w == 0.0 {
                        continue;
                    }
                    let (lo, hi, shift) = g.tap_range(k);
                    let xs = &x[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                    for (o, &xv) in row[lo..hi].iter_mut().zip(xs) {
                        *o += w * xv;
                    }
                }
            }
        }
    }
    out
}

/// Returns `(d_input, d_weight, d_bias)`.
pub(crate) fn conv1d_backward(
    g: &ConvGeom,
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    want_input: bool,
    want_bias: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Option<Vec<f64>>) {
    let (ipg, opg) = (g.in_per_group(), g.out_per_group());
    let mut d_in = want_input.then(|| vec![0.0; input.len()]);
    let mut d_w = vec![0.0; weight.len()];
    let mut d_b = want_bias.then(|| vec![0.0; g.c_out]);
    for b in 0..g.batch {
        for oc in 0..g.c_out {
            let grp = oc / opg;
            let go = &grad_out[(b * g.c_out + oc) * g.len_out..][..g.len_out];
            if let Some(d_b) = d_b.as_mut() {
                d_b[oc] += go.iter().sum::<f64>();
            }
            for icl in 0..ipg {
                let ic = grp * ipg + icl;
                let base = (b * g.c_in + ic) * g.len_in;
                let x = &input[base..][..g.len_in];
                for k in 0..g.kernel {
                    let widx = (oc * ipg + icl) * g.kernel + k;
                    let (lo, hi, shift) = g.tap_range(k);
                    let (xlo, xhi) = ((lo as isize + shift) as usize, (hi as isize + shift) as usize);
                    d_w[widx] += go[lo..hi].iter().zip(&x[xlo..xhi]).map(|(a, b)| a * b).sum::<f64>();
                    if let Some(d_in) = d_in.as_mut() {
                        let w = weight[widx];
                        for (d, &gv) in d_in[base + xlo..base + xhi].iter_mut().zip(&go[lo..hi]) {
                            *d += w * gv;
                        }
                    }
                }
            }
        }
    }
    (d_in, d_w, d_b)
}
