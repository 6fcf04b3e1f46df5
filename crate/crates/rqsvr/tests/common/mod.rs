//! Independent oracles for the acceptance suite.
//!
//! Everything here deliberately avoids the library's stride-arithmetic
//! simulation path: gates are materialized as dense `2^n x 2^n` matrices
//! and composed by full matrix products, and the SVR dual is solved by an
//! interior-point QP solver instead of SMO.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rqsvr::statevec::{Circuit, GateKind, GateOp};

pub type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn bit(index: usize, qubit: usize, num_qubits: usize) -> usize {
    (index >> (num_qubits - 1 - qubit)) & 1
}

fn single_qubit_matrix(kind: &GateKind) -> [[Complex64; 2]; 2] {
    let f = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::H => [[c(f, 0.0), c(f, 0.0)], [c(f, 0.0), c(-f, 0.0)]],
        GateKind::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        GateKind::Rx(t) => {
            let (cos, sin) = ((t / 2.0).cos(), (t / 2.0).sin());
            [[c(cos, 0.0), c(0.0, -sin)], [c(0.0, -sin), c(cos, 0.0)]]
        }
        GateKind::Ry(t) => {
            let (cos, sin) = ((t / 2.0).cos(), (t / 2.0).sin());
            [[c(cos, 0.0), c(-sin, 0.0)], [c(sin, 0.0), c(cos, 0.0)]]
        }
        GateKind::Diagonal(_) => unreachable!("diagonal handled separately"),
    }
}

/// Full-register matrix of one gate, controls included.
pub fn gate_matrix(op: &GateOp, num_qubits: usize) -> CMat {
    let dim = 1usize << num_qubits;
    let mut m = CMat::zeros(dim, dim);
    for col in 0..dim {
        let active = op.controls.iter().all(|&q| bit(col, q, num_qubits) == 1);
        if !active {
            m[(col, col)] = c(1.0, 0.0);
            continue;
        }
        match &op.kind {
            GateKind::Diagonal(entries) => {
                let k = op.targets.len();
                let mut key = 0usize;
                for (t, &q) in op.targets.iter().enumerate() {
                    key |= bit(col, q, num_qubits) << (k - 1 - t);
                }
                m[(col, col)] = entries[key];
            }
            kind => {
                let u = single_qubit_matrix(kind);
                let q = op.targets[0];
                let col_bit = bit(col, q, num_qubits);
                let mask = 1usize << (num_qubits - 1 - q);
                for row_bit in 0..2 {
                    let row = (col & !mask) | (row_bit << (num_qubits - 1 - q));
                    m[(row, col)] += u[row_bit][col_bit];
                }
            }
        }
    }
    m
}

/// Left-to-right product of all gate matrices in a circuit.
pub fn circuit_matrix(circuit: &Circuit) -> CMat {
    let dim = 1usize << circuit.num_qubits;
    let mut m = CMat::identity(dim, dim);
    for op in &circuit.ops {
        m = gate_matrix(op, circuit.num_qubits) * m;
    }
    m
}

/// Largest entry of |U†U - I|.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let dim = u.nrows();
    let product = u.adjoint() * u;
    let mut worst = 0.0f64;
    for r in 0..dim {
        for col in 0..dim {
            let expect = if r == col { c(1.0, 0.0) } else { c(0.0, 0.0) };
            worst = worst.max((product[(r, col)] - expect).norm());
        }
    }
    worst
}

/// Solve the ε-SVR dual with an interior-point QP solver and return the
/// optimal objective of the minimized form
/// `½‖w‖² + ε·Σ(α+α*) - Σ y(α-α*)`.
pub fn svr_dual_objective_qp(x: &[Vec<f64>], y: &[f64], c_penalty: f64, epsilon: f64) -> f64 {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{
        DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT,
    };

    let l = x.len();
    let n = 2 * l;
    let label = |t: usize| if t < l { 1.0 } else { -1.0 };
    let index = |t: usize| t % l;

    // Quadratic term Q[s][t] = y_s y_t K(i(s), i(t)); upper triangle in CSC.
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for t in 0..n {
        for s in 0..=t {
            let k: f64 = x[index(s)].iter().zip(&x[index(t)]).map(|(a, b)| a * b).sum();
            rowval.push(s);
            nzval.push(label(s) * label(t) * k);
        }
        colptr.push(rowval.len());
    }
    let p = CscMatrix::new(n, n, colptr, rowval, nzval);

    let q: Vec<f64> = (0..n).map(|t| epsilon - label(t) * y[index(t)]).collect();

    // Constraints: yᵀβ = 0; -β + s = 0 with s >= 0; β + s = C·1 with s >= 0.
    let mut a_colptr = Vec::with_capacity(n + 1);
    let mut a_rowval = Vec::new();
    let mut a_nzval = Vec::new();
    a_colptr.push(0);
    for t in 0..n {
        a_rowval.push(0);
        a_nzval.push(label(t));
        a_rowval.push(1 + t);
        a_nzval.push(-1.0);
        a_rowval.push(1 + n + t);
        a_nzval.push(1.0);
        a_colptr.push(a_rowval.len());
    }
    let a = CscMatrix::new(1 + 2 * n, n, a_colptr, a_rowval, a_nzval);
    let mut b = vec![0.0; 1 + 2 * n];
    for t in 0..n {
        b[1 + n + t] = c_penalty;
    }
    let cones = [ZeroConeT(1), NonnegativeConeT(n), NonnegativeConeT(n)];

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-12)
        .tol_gap_rel(1e-12)
        .tol_feas(1e-12)
        .max_iter(200)
        .build()
        .unwrap();
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    assert!(
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "QP oracle failed: {:?}",
        solver.solution.status
    );

    let beta = &solver.solution.x;
    let d = x[0].len();
    let mut w = vec![0.0; d];
    for i in 0..l {
        let theta = beta[i] - beta[l + i];
        for (wk, xik) in w.iter_mut().zip(&x[i]) {
            *wk += theta * xik;
        }
    }
    let norm_sqr: f64 = w.iter().map(|v| v * v).sum();
    let linear: f64 = (0..n).map(|t| q[t] * beta[t]).sum();
    0.5 * norm_sqr + linear
}
