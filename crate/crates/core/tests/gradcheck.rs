//! Central finite-difference gradient checks for every differentiable
//! operation and for the composed network.

use lrsim_core::conv::{abl_mix, conv2d, PadMode, Padding};
use lrsim_core::gauss::{build_bank, BankSpec};
use lrsim_core::net::{DegradationModel, NetConfig};
use lrsim_core::rng::Rng;
use lrsim_core::tensor::{
    add, backward, l1_loss, relu, scalar_mul, softmax_rows, sum, Tensor,
};

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

/// Values kept away from ReLU and L1 kinks so central differences are
/// trustworthy.
fn kink_free(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let sign = if rng.coin() { 1.0 } else { -1.0 };
            sign * rng.uniform(0.2, 1.2)
        })
        .collect()
}

/// L1 targets far enough from the base outputs that signs cannot flip
/// under the finite-difference perturbations. Frozen once per check.
fn far_targets(rng: &mut Rng, base_out: &[f64]) -> Vec<f64> {
    base_out
        .iter()
        .map(|v| {
            let sign = if rng.coin() { 1.0 } else { -1.0 };
            v + sign * rng.uniform(0.5, 1.0)
        })
        .collect()
}

fn rel_err(a: f64, n: f64) -> f64 {
    let denom = a.abs().max(n.abs()).max(1e-8);
    (a - n).abs() / denom
}

/// Checks analytic gradients against central differences on a coordinate
/// sample. `loss_at` rebuilds the whole graph from plain values.
fn check_param(
    values: &[f64],
    analytic: &[f64],
    picks: &[usize],
    mut loss_at: impl FnMut(&[f64]) -> f64,
    label: &str,
) {
    for &i in picks {
        let mut plus = values.to_vec();
        plus[i] += H;
        let mut minus = values.to_vec();
        minus[i] -= H;
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * H);
        let a = analytic[i];
        // Exactly-canceling sign sums leave a zero gradient that central
        // differences only reproduce up to rounding noise.
        if a.abs() < 1e-7 && numeric.abs() < 1e-7 {
            continue;
        }
        assert!(
            rel_err(a, numeric) < REL_TOL,
            "{label}[{i}]: analytic {a} vs numeric {numeric}"
        );
    }
}

fn picks(rng: &mut Rng, len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        return (0..len).collect();
    }
    (0..count).map(|_| rng.below(len)).collect()
}

#[test]
fn conv2d_gradients_all_strides_and_paddings() {
    let mut rng = Rng::new(100);
    let (n, c_in, h, w) = (2, 3, 8, 8);
    let (c_out, k) = (4, 3);
    let input = kink_free(&mut rng, n * c_in * h * w);
    let weight = kink_free(&mut rng, c_out * c_in * k * k);
    let bias = kink_free(&mut rng, c_out);

    for stride in [1usize, 2] {
        for mode in [PadMode::Zero, PadMode::Reflect] {
            let pad = Padding::symmetric(mode, 1);
            // Base run to freeze the loss targets.
            let base_out = {
                let it = Tensor::from_vec(&[n, c_in, h, w], input.clone()).unwrap();
                let wt = Tensor::from_vec(&[c_out, c_in, k, k], weight.clone()).unwrap();
                let bt = Tensor::from_vec(&[c_out], bias.clone()).unwrap();
                conv2d(&it, &wt, &bt, stride, pad).unwrap()
            };
            let target = far_targets(&mut rng, &base_out.to_vec());
            let tshape = base_out.shape().to_vec();

            let run = |iv: &[f64], wv: &[f64], bv: &[f64]| -> (f64, Vec<Vec<f64>>) {
                let it = Tensor::param(&[n, c_in, h, w], iv.to_vec()).unwrap();
                let wt = Tensor::param(&[c_out, c_in, k, k], wv.to_vec()).unwrap();
                let bt = Tensor::param(&[c_out], bv.to_vec()).unwrap();
                let out = conv2d(&it, &wt, &bt, stride, pad).unwrap();
                let tt = Tensor::from_vec(&tshape, target.clone()).unwrap();
                let loss = l1_loss(&out, &tt).unwrap();
                backward(&loss).unwrap();
                (
                    loss.item(),
                    vec![it.grad().unwrap(), wt.grad().unwrap(), bt.grad().unwrap()],
                )
            };
            let (_, grads) = run(&input, &weight, &bias);
            let label = format!("conv s{stride} {mode:?}");

            let ip = picks(&mut rng, input.len(), 12);
            check_param(&input, &grads[0], &ip, |v| run(v, &weight, &bias).0, &format!("{label} input"));
            let wp = picks(&mut rng, weight.len(), 12);
            check_param(&weight, &grads[1], &wp, |v| run(&input, v, &bias).0, &format!("{label} weight"));
            let bp = picks(&mut rng, bias.len(), 4);
            check_param(&bias, &grads[2], &bp, |v| run(&input, &weight, v).0, &format!("{label} bias"));
        }
    }
}

#[test]
fn elementwise_op_gradients() {
    let mut rng = Rng::new(101);
    let x = kink_free(&mut rng, 24);
    let y = kink_free(&mut rng, 24);

    // relu, against frozen targets
    let base: Vec<f64> = x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    let relu_target = far_targets(&mut rng, &base);
    let run_relu = |v: &[f64]| -> (f64, Vec<f64>) {
        let t = Tensor::param(&[24], v.to_vec()).unwrap();
        let out = relu(&t);
        let tt = Tensor::from_vec(&[24], relu_target.clone()).unwrap();
        let loss = l1_loss(&out, &tt).unwrap();
        backward(&loss).unwrap();
        (loss.item(), t.grad().unwrap())
    };
    let (_, g) = run_relu(&x);
    check_param(&x, &g, &(0..24).collect::<Vec<_>>(), |v| run_relu(v).0, "relu");

    // add + scalar_mul + sum composed
    let run_mix = |xv: &[f64], yv: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let tx = Tensor::param(&[24], xv.to_vec()).unwrap();
        let ty = Tensor::param(&[24], yv.to_vec()).unwrap();
        let out = add(&scalar_mul(&tx, -1.7), &ty).unwrap();
        let loss = sum(&out);
        backward(&loss).unwrap();
        (loss.item(), tx.grad().unwrap(), ty.grad().unwrap())
    };
    let (_, gx, gy) = run_mix(&x, &y);
    let px = picks(&mut rng, 24, 8);
    check_param(&x, &gx, &px, |v| run_mix(v, &y).0, "scalar_mul");
    check_param(&y, &gy, &px, |v| run_mix(&x, v).0, "add");

    // l1_loss on both sides
    let targets = far_targets(&mut rng, &x);
    let run_l1 = |pv: &[f64], tv: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let p = Tensor::param(&[24], pv.to_vec()).unwrap();
        let t = Tensor::param(&[24], tv.to_vec()).unwrap();
        let loss = l1_loss(&p, &t).unwrap();
        backward(&loss).unwrap();
        (loss.item(), p.grad().unwrap(), t.grad().unwrap())
    };
    let (_, gp, gt) = run_l1(&x, &targets);
    check_param(&x, &gp, &px, |v| run_l1(v, &targets).0, "l1 pred");
    check_param(&targets, &gt, &px, |v| run_l1(&x, v).0, "l1 target");
}

#[test]
fn softmax_jacobian_matches_finite_differences() {
    // Full Jacobian for a small matrix, entry by entry, against central
    // differences of the forward map alone.
    let mut rng = Rng::new(102);
    let (rows, cols) = (2usize, 4usize);
    let x = kink_free(&mut rng, rows * cols);
    let fwd = |v: &[f64]| -> Vec<f64> {
        softmax_rows(&Tensor::from_vec(&[rows, cols], v.to_vec()).unwrap())
            .unwrap()
            .to_vec()
    };
    let y = fwd(&x);
    for r in 0..rows {
        for j in 0..cols {
            let mut plus = x.clone();
            plus[r * cols + j] += H;
            let mut minus = x.clone();
            minus[r * cols + j] -= H;
            let yp = fwd(&plus);
            let ym = fwd(&minus);
            for i in 0..cols {
                let numeric = (yp[r * cols + i] - ym[r * cols + i]) / (2.0 * H);
                let yi = y[r * cols + i];
                let yj = y[r * cols + j];
                let analytic = if i == j { yi * (1.0 - yi) } else { -yi * yj };
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-6,
                    "J[{r}][{i}][{j}]: {analytic} vs {numeric}"
                );
            }
        }
    }

    // And the backward pass under an asymmetric cotangent.
    let target = far_targets(&mut rng, &y);
    let run = |v: &[f64]| -> (f64, Vec<f64>) {
        let t = Tensor::param(&[rows, cols], v.to_vec()).unwrap();
        let sm = softmax_rows(&t).unwrap();
        let tt = Tensor::from_vec(&[rows, cols], target.clone()).unwrap();
        let loss = l1_loss(&sm, &tt).unwrap();
        backward(&loss).unwrap();
        (loss.item(), t.grad().unwrap())
    };
    let (_, g) = run(&x);
    check_param(&x, &g, &(0..rows * cols).collect::<Vec<_>>(), |v| run(v).0, "softmax bwd");
}

#[test]
fn abl_mix_gradients() {
    let bank = build_bank(&BankSpec::with_factors(vec![1.0])).unwrap();
    let mut rng = Rng::new(103);
    let (n, c, h, w) = (1, 2, 12, 12);
    let feat = kink_free(&mut rng, n * c * h * w);
    let logits = kink_free(&mut rng, c * 4);

    let base_out = {
        let ft = Tensor::from_vec(&[n, c, h, w], feat.clone()).unwrap();
        let lt = Tensor::from_vec(&[c, 4], logits.clone()).unwrap();
        abl_mix(&ft, &softmax_rows(&lt).unwrap(), &bank).unwrap()
    };
    let target = far_targets(&mut rng, &base_out.to_vec());

    let run = |fv: &[f64], lv: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let ft = Tensor::param(&[n, c, h, w], fv.to_vec()).unwrap();
        let lt = Tensor::param(&[c, 4], lv.to_vec()).unwrap();
        let out = abl_mix(&ft, &softmax_rows(&lt).unwrap(), &bank).unwrap();
        let tt = Tensor::from_vec(&[n, c, h, w], target.clone()).unwrap();
        let loss = l1_loss(&out, &tt).unwrap();
        backward(&loss).unwrap();
        (loss.item(), ft.grad().unwrap(), lt.grad().unwrap())
    };
    let (_, gf, gl) = run(&feat, &logits);
    let fp = picks(&mut rng, feat.len(), 12);
    check_param(&feat, &gf, &fp, |v| run(v, &logits).0, "abl feat");
    check_param(&logits, &gl, &(0..8).collect::<Vec<_>>(), |v| run(&feat, v).0, "abl logits");
}

#[test]
fn composed_network_gradient() {
    // encode -> abl -> decode end to end at a small config.
    let cfg = NetConfig {
        channels: 4,
        num_resblocks: 1,
        scale: 2,
        bank: BankSpec::with_factors(vec![1.0]),
    };
    let model = DegradationModel::new(cfg, 5).unwrap();
    let mut rng = Rng::new(104);
    let input: Vec<f64> = (0..256).map(|_| rng.uniform(0.05, 0.95)).collect();
    // Targets far outside the prediction range keep the L1 signs frozen.
    let target: Vec<f64> = (0..64).map(|_| rng.uniform(2.0, 3.0)).collect();

    let run = |iv: &[f64]| -> (f64, Vec<f64>) {
        let it = Tensor::param(&[1, 1, 16, 16], iv.to_vec()).unwrap();
        let out = model.forward(&it).unwrap();
        let tt = Tensor::from_vec(&[1, 1, 8, 8], target.clone()).unwrap();
        let loss = l1_loss(&out, &tt).unwrap();
        backward(&loss).unwrap();
        (loss.item(), it.grad().unwrap())
    };
    let (_, g) = run(&input);
    let ip = picks(&mut rng, input.len(), 16);
    check_param(&input, &g, &ip, |v| run(v).0, "net input");

    // And through one parameter tensor of each stage.
    for name in ["conv_in.weight", "block0.conv1.weight", "abl_logits", "down0.weight", "out.weight"] {
        let tensor = model
            .named_parameters()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .unwrap();
        let base = tensor.to_vec();
        let run_p = |pv: &[f64]| -> (f64, Vec<f64>) {
            tensor.set_data(pv).unwrap();
            let it = Tensor::from_vec(&[1, 1, 16, 16], input.clone()).unwrap();
            let out = model.forward(&it).unwrap();
            let tt = Tensor::from_vec(&[1, 1, 8, 8], target.clone()).unwrap();
            let loss = l1_loss(&out, &tt).unwrap();
            tensor.zero_grad();
            backward(&loss).unwrap();
            let g = tensor.grad().unwrap();
            tensor.set_data(&base).unwrap();
            (loss.item(), g)
        };
        let (_, g) = run_p(&base);
        let pp = picks(&mut rng, base.len(), 10);
        check_param(&base, &g, &pp, |v| run_p(v).0, name);
    }
}
