//! Central finite-difference verification of every differentiable
//! operation, on seeded random instances. Shared by the `grad-check`
//! CLI command and the test suite.

use rand::{Rng as _, SeedableRng as _};

use super::{
    add, add_row, backward, clamp_min, concat_cols, conv1d, dropout, exp, gather_rows, ln, matmul,
    mean_rows, mul, pad_rows, relu, scale, sigmoid, softmax, softplus, spmm, stack_scalars,
    sub, sum, Mode, SeedRng, SparseMatrix, Tape, Tensor,
};

/// Default relative tolerance for the suite.
pub const REL_TOL: f64 = 1e-4;

const FD_STEP: f64 = 1e-5;

/// Outcome of one (operation, seed) check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub op: &'static str,
    pub seed: u64,
    pub max_rel_error: f64,
}

impl CheckResult {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1.0);
    (analytic - numeric).abs() / denom
}

/// Checks one scalar-valued function of a flat parameter vector against
/// central differences, returning the worst relative error over all
/// coordinates.
fn check_fn(params: &[f64], f: &dyn Fn(&[f64]) -> (f64, Vec<f64>)) -> f64 {
    let (_, analytic) = f(params);
    let mut worst: f64 = 0.0;
    let mut perturbed = params.to_vec();
    for i in 0..params.len() {
        let orig = perturbed[i];
        perturbed[i] = orig + FD_STEP;
        let (hi, _) = f(&perturbed);
        perturbed[i] = orig - FD_STEP;
        let (lo, _) = f(&perturbed);
        perturbed[i] = orig;
        let numeric = (hi - lo) / (2.0 * FD_STEP);
        worst = worst.max(rel_error(analytic[i], numeric));
    }
    worst
}

/// Scalarizes a tensor by a fixed random linear functional so the check
/// exercises every output coordinate, not just their sum.
fn weighted_total(t: &Tensor, weights: &[f64]) -> Tensor {
    let w = Tensor::constant(t.shape().to_vec(), weights[..t.data().len()].to_vec());
    sum(&mul(t, &w).unwrap()).unwrap()
}

fn random_vec(rng: &mut SeedRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

/// Runs the full suite: every differentiable op on `seeds` random
/// instances each.
pub fn run_suite(seeds: u64) -> Vec<CheckResult> {
    let mut results = Vec::new();
    for seed in 0..seeds {
        let mut rng = SeedRng::seed_from_u64(seed);
        // shared output weights, oversized so any op can borrow a prefix
        let out_w = random_vec(&mut rng, 256);

        // matmul: both operands
        let (m, k, n) = (3, 2, 4);
        let data = random_vec(&mut rng, m * k + k * n);
        results.push(CheckResult {
            op: "matmul",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![m, k], p[..m * k].to_vec());
                let b = tape.leaf(vec![k, n], p[m * k..].to_vec());
                let y = weighted_total(&matmul(&a, &b).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                let mut g = a.grad(&grads).unwrap().to_vec();
                g.extend_from_slice(b.grad(&grads).unwrap());
                (y.item(), g)
            }),
        });

        // elementwise and unary ops on a 2×3 matrix
        type Unary = fn(&Tensor) -> super::Result<Tensor>;
        let unary: &[(&'static str, Unary)] = &[
            ("relu", relu),
            ("sigmoid", sigmoid),
            ("softplus", softplus),
            ("exp", exp),
            ("mean_rows", mean_rows),
        ];
        for (name, op) in unary {
            let mut data = random_vec(&mut rng, 6);
            if *name == "relu" {
                // keep away from the kink, where FD is undefined
                for v in &mut data {
                    if v.abs() < 0.05 {
                        *v += 0.1;
                    }
                }
            }
            results.push(CheckResult {
                op: name,
                seed,
                max_rel_error: check_fn(&data, &|p| {
                    let tape = Tape::new();
                    let a = tape.leaf(vec![2, 3], p.to_vec());
                    let y = weighted_total(&op(&a).unwrap(), &out_w);
                    let grads = backward(&y).unwrap();
                    (y.item(), a.grad(&grads).unwrap().to_vec())
                }),
            });
        }

        // softmax operates on 1-D tensors
        let data = random_vec(&mut rng, 6);
        results.push(CheckResult {
            op: "softmax",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![6], p.to_vec());
                let y = weighted_total(&softmax(&a).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                (y.item(), a.grad(&grads).unwrap().to_vec())
            }),
        });

        // clamp_min, nudged away from its kink at the floor
        let floor = 0.5f64;
        let data: Vec<f64> = (0..6)
            .map(|_| {
                let v = rng.gen_range(-1.0..2.0);
                if (v - floor).abs() < 0.05 {
                    v + 0.1
                } else {
                    v
                }
            })
            .collect();
        results.push(CheckResult {
            op: "clamp_min",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![2, 3], p.to_vec());
                let y = weighted_total(&clamp_min(&a, floor).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                (y.item(), a.grad(&grads).unwrap().to_vec())
            }),
        });

        // ln needs positive inputs
        let data: Vec<f64> = (0..6).map(|_| rng.gen_range(0.2..2.0)).collect();
        results.push(CheckResult {
            op: "ln",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![2, 3], p.to_vec());
                let y = weighted_total(&ln(&a).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                (y.item(), a.grad(&grads).unwrap().to_vec())
            }),
        });

        // binary ops: add, sub, mul on 2×2; add_row on 2×3 + 1×3
        let data = random_vec(&mut rng, 8);
        type Binary = fn(&Tensor, &Tensor) -> super::Result<Tensor>;
        let binary: &[(&'static str, Binary)] = &[("add", add), ("sub", sub), ("mul", mul)];
        for (name, op) in binary {
            results.push(CheckResult {
                op: name,
                seed,
                max_rel_error: check_fn(&data, &|p| {
                    let tape = Tape::new();
                    let a = tape.leaf(vec![2, 2], p[..4].to_vec());
                    let b = tape.leaf(vec![2, 2], p[4..].to_vec());
                    let y = weighted_total(&op(&a, &b).unwrap(), &out_w);
                    let grads = backward(&y).unwrap();
                    let mut g = a.grad(&grads).unwrap().to_vec();
                    g.extend_from_slice(b.grad(&grads).unwrap());
                    (y.item(), g)
                }),
            });
        }
        let data = random_vec(&mut rng, 9);
        results.push(CheckResult {
            op: "add_row",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![2, 3], p[..6].to_vec());
                let row = tape.leaf(vec![3], p[6..].to_vec());
                let y = weighted_total(&add_row(&a, &row).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                let mut g = a.grad(&grads).unwrap().to_vec();
                g.extend_from_slice(row.grad(&grads).unwrap());
                (y.item(), g)
            }),
        });

        // scale
        let data = random_vec(&mut rng, 4);
        results.push(CheckResult {
            op: "scale",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![2, 2], p.to_vec());
                let y = weighted_total(&scale(&a, -1.75).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                (y.item(), a.grad(&grads).unwrap().to_vec())
            }),
        });

        // conv1d: input 5×2, kernels 2×2×3, stride 1; both operands
        let (len, cin, kw, cout) = (5, 2, 2, 3);
        let data = random_vec(&mut rng, len * cin + kw * cin * cout);
        results.push(CheckResult {
            op: "conv1d",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let input = tape.leaf(vec![len, cin], p[..len * cin].to_vec());
                let kernels = tape.leaf(vec![kw, cin, cout], p[len * cin..].to_vec());
                let y = weighted_total(&conv1d(&input, &kernels, 1).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                let mut g = input.grad(&grads).unwrap().to_vec();
                g.extend_from_slice(kernels.grad(&grads).unwrap());
                (y.item(), g)
            }),
        });

        // spmm with a fixed random sparse 3×3 matrix
        let entries: Vec<(usize, usize, f64)> = (0..5)
            .map(|_| {
                (
                    rng.gen_range(0..3usize),
                    rng.gen_range(0..3usize),
                    rng.gen_range(0.1..2.0),
                )
            })
            .collect();
        let sparse = SparseMatrix { rows: 3, cols: 3, entries };
        let data = random_vec(&mut rng, 6);
        results.push(CheckResult {
            op: "spmm",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let x = tape.leaf(vec![3, 2], p.to_vec());
                let y = weighted_total(&spmm(&sparse, &x).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                (y.item(), x.grad(&grads).unwrap().to_vec())
            }),
        });

        // structural ops: gather_rows (with repetition), pad_rows,
        // concat_cols, stack_scalars
        let data = random_vec(&mut rng, 8);
        results.push(CheckResult {
            op: "gather_rows",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![4, 2], p.to_vec());
                let y = weighted_total(&gather_rows(&a, &[2, 0, 2]).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                (y.item(), a.grad(&grads).unwrap().to_vec())
            }),
        });
        let data = random_vec(&mut rng, 4);
        results.push(CheckResult {
            op: "pad_rows",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![2, 2], p.to_vec());
                let y = weighted_total(&pad_rows(&a, 4).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                (y.item(), a.grad(&grads).unwrap().to_vec())
            }),
        });
        let data = random_vec(&mut rng, 10);
        results.push(CheckResult {
            op: "concat_cols",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![2, 2], p[..4].to_vec());
                let b = tape.leaf(vec![2, 3], p[4..].to_vec());
                let y = weighted_total(&concat_cols(&[&a, &b]).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                let mut g = a.grad(&grads).unwrap().to_vec();
                g.extend_from_slice(b.grad(&grads).unwrap());
                (y.item(), g)
            }),
        });
        let data = random_vec(&mut rng, 3);
        results.push(CheckResult {
            op: "stack_scalars",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let parts: Vec<Tensor> =
                    p.iter().map(|&v| tape.leaf(vec![1], vec![v])).collect();
                let refs: Vec<&Tensor> = parts.iter().collect();
                let y = weighted_total(&stack_scalars(&refs).unwrap(), &out_w);
                let grads = backward(&y).unwrap();
                let g = parts
                    .iter()
                    .map(|t| t.grad(&grads).unwrap()[0])
                    .collect();
                (y.item(), g)
            }),
        });

        // dropout in train mode with a fixed rng seed: the mask is a
        // deterministic function of the seed, so FD sees a fixed linear map
        let data = random_vec(&mut rng, 6);
        let mask_seed = seed.wrapping_mul(31).wrapping_add(7);
        results.push(CheckResult {
            op: "dropout",
            seed,
            max_rel_error: check_fn(&data, &|p| {
                let tape = Tape::new();
                let a = tape.leaf(vec![2, 3], p.to_vec());
                let mut mask_rng = SeedRng::seed_from_u64(mask_seed);
                let y = weighted_total(
                    &dropout(&a, 0.3, Mode::Train, &mut mask_rng).unwrap(),
                    &out_w,
                );
                let grads = backward(&y).unwrap();
                (y.item(), a.grad(&grads).unwrap().to_vec())
            }),
        });
    }
    results
}
